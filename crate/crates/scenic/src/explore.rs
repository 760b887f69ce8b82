//! Exploration strategies. Each consumes a gameplay-frame budget and
//! produces a moment archive; the tree-based strategies also return the
//! tree they grew.
//!
//! Budget accounting is uniform: only stepping the game costs frames.
//! Saving or loading snapshots and computing embeddings are free, which is
//! what makes branching strategies competitive with linear play on the
//! same budget. Every strategy is bit-deterministic given (game, config,
//! seed).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::archive::{Archive, Provenance};
use crate::embed::{training_data, BottleneckModel, EmbedError, Embedder, TrainConfig};
use crate::env::{boot, ControllerState, EnvState, GameId};
use crate::trace::ActionModel;

#[derive(Debug, thiserror::Error)]
pub enum ExploreError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Tuning knobs for the tree strategies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrtParams {
    /// Goals are drawn uniformly from the bounding box of all node
    /// vectors, with each side pushed outward by this fraction of the
    /// dimension's span. Dimensions with zero span open up by 0.5 absolute
    /// on both sides instead.
    pub goal_inflation: f64,
    /// Frames each sampled action is held; also the moment cadence.
    pub cadence_frames: u32,
    /// Chaos moments seeding the forest in the hybrid strategy.
    pub k_seeds: usize,
}

impl Default for RrtParams {
    fn default() -> Self {
        RrtParams {
            goal_inflation: 0.10,
            cadence_frames: 30,
            k_seeds: 100,
        }
    }
}

/// One node of a grown tree. `gameplay_frames` is the cumulative budget
/// the run had consumed when the node was created, matching the archived
/// moment; the path from the root replays via (`action`, `frames_held`).
#[derive(Debug, Clone, PartialEq)]
pub struct RrtNode {
    pub id: u64,
    pub parent: Option<u64>,
    pub action: ControllerState,
    pub frames_held: u32,
    pub vector: Vec<f64>,
    pub gameplay_frames: u64,
    pub moment_index: Option<u64>,
    snapshot: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RrtTree {
    pub nodes: Vec<RrtNode>,
    /// Running bounding box over node vectors, one (min, max) per dim.
    bbox: Vec<(f64, f64)>,
}

impl RrtTree {
    fn push_node(
        &mut self,
        parent: Option<u64>,
        action: ControllerState,
        frames_held: u32,
        vector: Vec<f64>,
        gameplay_frames: u64,
        moment_index: Option<u64>,
        snapshot: Vec<u8>,
    ) -> u64 {
        if self.bbox.is_empty() {
            self.bbox = vector.iter().map(|&v| (v, v)).collect();
        } else {
            for (slot, &v) in self.bbox.iter_mut().zip(&vector) {
                slot.0 = slot.0.min(v);
                slot.1 = slot.1.max(v);
            }
        }
        let id = self.nodes.len() as u64;
        self.nodes.push(RrtNode {
            id,
            parent,
            action,
            frames_held,
            vector,
            gameplay_frames,
            moment_index,
            snapshot,
        });
        id
    }

    /// Closest node to `goal` by Euclidean distance; ties pick the lowest
    /// id, so the scan order makes this exact and deterministic.
    fn nearest(&self, goal: &[f64]) -> u64 {
        let mut best = 0u64;
        let mut best_d2 = f64::INFINITY;
        for node in &self.nodes {
            let d2: f64 = node
                .vector
                .iter()
                .zip(goal)
                .map(|(v, g)| (v - g) * (v - g))
                .sum();
            if d2 < best_d2 {
                best_d2 = d2;
                best = node.id;
            }
        }
        best
    }

    fn sample_goal<R: Rng>(&self, rng: &mut R, inflation: f64) -> Vec<f64> {
        self.bbox
            .iter()
            .map(|&(lo, hi)| {
                let span = hi - lo;
                let (lo, hi) = if span == 0.0 {
                    (lo - 0.5, hi + 0.5)
                } else {
                    (lo - inflation * span, hi + inflation * span)
                };
                lo + rng.random::<f64>() * (hi - lo)
            })
            .collect()
    }

    /// Node ids from the root down to `id`.
    pub fn path_from_root(&self, id: u64) -> Vec<u64> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(parent) = self.nodes[cur as usize].parent {
            path.push(parent);
            cur = parent;
        }
        path.reverse();
        path
    }

    /// Re-executes the edge actions from the node's root. For trees grown
    /// from boot the root snapshot is the boot state, so this replays the
    /// entire branch from scratch.
    pub fn replay(&self, id: u64) -> EnvState {
        let path = self.path_from_root(id);
        let root = &self.nodes[path[0] as usize];
        let mut state =
            EnvState::load_snapshot(&root.snapshot).expect("tree snapshots are well-formed");
        for &nid in &path[1..] {
            let node = &self.nodes[nid as usize];
            state.step(node.action, node.frames_held);
        }
        state
    }

    /// JSON dump of the tree structure. Snapshots are not inlined; each
    /// node references its moment's snapshot file in the archive layout.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct NodeRecord<'a> {
            id: u64,
            parent: Option<u64>,
            action: String,
            frames: u32,
            vector: &'a [f64],
            gameplay_frames: u64,
            snapshot: Option<String>,
        }
        #[derive(Serialize)]
        struct TreeRecord<'a> {
            nodes: Vec<NodeRecord<'a>>,
        }
        let record = TreeRecord {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.id,
                    parent: n.parent,
                    action: n.action.to_string(),
                    frames: n.frames_held,
                    vector: &n.vector,
                    gameplay_frames: n.gameplay_frames,
                    snapshot: n.moment_index.map(|i| format!("snapshots/{i:06}.snp")),
                })
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&record).expect("tree serializes");
        out.push('\n');
        out
    }
}

/// Holds no buttons and watches whatever the game does on its own:
/// the do-nothing baseline.
pub fn run_attract(game: GameId, budget_frames: u64, cadence: u32) -> Archive {
    let mut state = boot(game);
    let mut archive = Archive::new(game);
    let mut used = 0u64;
    while used + cadence as u64 <= budget_frames {
        state.step(ControllerState::EMPTY, cadence);
        used += cadence as u64;
        archive.push(
            used,
            state.render(),
            state.memory(),
            Provenance::strategy("attract"),
            None,
        );
    }
    archive
}

fn chaos_segment<R: Rng>(
    state: &mut EnvState,
    archive: &mut Archive,
    rng: &mut R,
    model: &ActionModel,
    cadence: u32,
    used: &mut u64,
    strategy: &str,
    keep_snapshot: bool,
) {
    let action = model.sample(rng);
    state.step(action, cadence);
    *used += cadence as u64;
    let snapshot = keep_snapshot.then(|| state.save_snapshot());
    archive.push(
        *used,
        state.render(),
        state.memory(),
        Provenance::strategy(strategy),
        snapshot,
    );
}

/// Linear play with one action drawn i.i.d. from the action model per
/// cadence window. Keeps no snapshots.
pub fn run_chaos_monkey(
    game: GameId,
    model: &ActionModel,
    budget_frames: u64,
    cadence: u32,
    seed: u64,
) -> Archive {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = boot(game);
    let mut archive = Archive::new(game);
    let mut used = 0u64;
    while used + cadence as u64 <= budget_frames {
        chaos_segment(
            &mut state,
            &mut archive,
            &mut rng,
            model,
            cadence,
            &mut used,
            "chaos-monkey",
            false,
        );
    }
    archive
}

/// One tree expansion: sample a goal, pick the nearest node, hold one
/// model-sampled action from its snapshot. Per expansion the RNG consumes
/// exactly D goal variates plus one action draw.
#[allow(clippy::too_many_arguments)]
fn grow_forest(
    tree: &mut RrtTree,
    archive: &mut Archive,
    rng: &mut ChaCha8Rng,
    model: &ActionModel,
    embedder: &dyn Embedder,
    budget_frames: u64,
    used: &mut u64,
    params: &RrtParams,
    strategy: &str,
) -> Result<(), ExploreError> {
    if tree.nodes.is_empty() {
        return Ok(());
    }
    let cadence = params.cadence_frames;
    while *used + cadence as u64 <= budget_frames {
        let goal = tree.sample_goal(rng, params.goal_inflation);
        let nearest = tree.nearest(&goal);
        let action = model.sample(rng);
        let mut state = EnvState::load_snapshot(&tree.nodes[nearest as usize].snapshot)
            .expect("tree snapshots are well-formed");
        state.step(action, cadence);
        *used += cadence as u64;

        let screen = state.render();
        let vector = embedder.embed(&screen)?;
        let snapshot = state.save_snapshot();
        let mut prov = Provenance::strategy(strategy);
        prov.node = Some(tree.nodes.len() as u64);
        let moment_index = archive.push(
            *used,
            screen,
            state.memory(),
            prov,
            Some(snapshot.clone()),
        );
        tree.push_node(
            Some(nearest),
            action,
            cadence,
            vector,
            *used,
            Some(moment_index),
            snapshot,
        );
    }
    Ok(())
}

/// Grows a single tree rooted at boot. The root is archived (for free);
/// every expansion costs one cadence window.
pub fn run_rrt(
    game: GameId,
    model: &ActionModel,
    embedder: &dyn Embedder,
    budget_frames: u64,
    params: &RrtParams,
    seed: u64,
) -> Result<(Archive, RrtTree), ExploreError> {
    run_rrt_labeled(game, model, embedder, budget_frames, params, seed, "rrt")
}

fn run_rrt_labeled(
    game: GameId,
    model: &ActionModel,
    embedder: &dyn Embedder,
    budget_frames: u64,
    params: &RrtParams,
    seed: u64,
    strategy: &str,
) -> Result<(Archive, RrtTree), ExploreError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut archive = Archive::new(game);
    let mut tree = RrtTree::default();

    let state = boot(game);
    let screen = state.render();
    let vector = embedder.embed(&screen)?;
    let snapshot = state.save_snapshot();
    let mut prov = Provenance::strategy(strategy);
    prov.node = Some(0);
    let moment_index = archive.push(0, screen, state.memory(), prov, Some(snapshot.clone()));
    tree.push_node(
        None,
        ControllerState::EMPTY,
        0,
        vector,
        0,
        Some(moment_index),
        snapshot,
    );

    let mut used = 0u64;
    grow_forest(
        &mut tree,
        &mut archive,
        &mut rng,
        model,
        embedder,
        budget_frames,
        &mut used,
        params,
        strategy,
    )?;
    Ok((archive, tree))
}

/// Chaos monkey for the first half of the budget (keeping snapshots), then
/// a forest of trees seeded from up to `k_seeds` uniformly chosen chaos
/// moments for the rest. The archive stays ordered by cumulative gameplay
/// time across both phases.
pub fn run_hybrid(
    game: GameId,
    model: &ActionModel,
    embedder: &dyn Embedder,
    budget_frames: u64,
    params: &RrtParams,
    seed: u64,
) -> Result<(Archive, RrtTree), ExploreError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = boot(game);
    let mut archive = Archive::new(game);
    let mut used = 0u64;

    let chaos_budget = budget_frames / 2;
    let cadence = params.cadence_frames;
    while used + cadence as u64 <= chaos_budget {
        chaos_segment(
            &mut state,
            &mut archive,
            &mut rng,
            model,
            cadence,
            &mut used,
            "hybrid",
            true,
        );
    }

    // Uniform sample without replacement, in selection order.
    let available = archive.len();
    let k = params.k_seeds.min(available);
    let mut indices: Vec<usize> = (0..available).collect();
    for i in 0..k {
        let j = rng.random_range(i..available);
        indices.swap(i, j);
    }

    let mut tree = RrtTree::default();
    for &idx in &indices[..k] {
        let moment = &archive.moments[idx];
        let vector = embedder.embed(&moment.screen)?;
        let snapshot = moment
            .snapshot
            .clone()
            .expect("chaos phase of hybrid keeps snapshots");
        tree.push_node(
            None,
            ControllerState::EMPTY,
            0,
            vector,
            moment.gameplay_frames,
            Some(moment.index),
            snapshot,
        );
    }

    grow_forest(
        &mut tree,
        &mut archive,
        &mut rng,
        model,
        embedder,
        budget_frames,
        &mut used,
        params,
        "hybrid",
    )?;
    Ok((archive, tree))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapParams {
    pub rounds: u32,
    pub frames_per_round: u64,
    /// Bottleneck width of the model grown across rounds.
    pub bottleneck_dims: usize,
    /// Seed for the fresh, untrained round-1 model.
    pub model_seed: u64,
    pub train: TrainConfig,
}

pub struct BootstrapResult {
    /// One archive per round, in round order.
    pub rounds: Vec<Archive>,
    /// The model as it stood after the final round's training.
    pub model: BottleneckModel,
    /// Per-round epoch loss histories.
    pub losses: Vec<Vec<f64>>,
}

/// Alternates exploration and training: each round grows a fresh tree from
/// boot guided by the current model, then incrementally trains the model
/// on every (screen, memory) pair collected so far. Trees are discarded
/// between rounds; the weights carry over.
pub fn run_bootstrap(
    game: GameId,
    action_model: &ActionModel,
    rrt: &RrtParams,
    boot_params: &BootstrapParams,
    seed: u64,
) -> Result<BootstrapResult, ExploreError> {
    let mut model = BottleneckModel::fresh(boot_params.bottleneck_dims, boot_params.model_seed)?;
    let mut seed_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rounds = Vec::new();
    let mut losses = Vec::new();
    for round in 1..=boot_params.rounds {
        let round_seed: u64 = seed_rng.random();
        let label = format!("bootstrap-r{round}");
        let (archive, _tree) = run_rrt_labeled(
            game,
            action_model,
            &model,
            boot_params.frames_per_round,
            rrt,
            round_seed,
            &label,
        )?;
        rounds.push(archive);

        let pairs: Vec<_> = rounds
            .iter()
            .flat_map(|a| a.training_pairs())
            .collect();
        let data = training_data(pairs.into_iter());
        let history = model.train(&data, &boot_params.train)?;
        losses.push(history);
    }
    Ok(BootstrapResult {
        rounds,
        model,
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{AvgRgb, RandomProjection};
    use crate::env::GqScene;
    use crate::trace::{fit_action_model, Trace};
    use std::collections::BTreeSet;

    fn cs(text: &str) -> ControllerState {
        text.parse().unwrap()
    }

    /// A small hand corpus over the common buttons.
    fn test_model() -> ActionModel {
        let mut t = Trace::new(GameId::GridQuest);
        t.push(ControllerState::EMPTY, 10 * 30);
        t.push(cs("RIGHT"), 8 * 30);
        t.push(cs("LEFT"), 4 * 30);
        t.push(cs("UP"), 3 * 30);
        t.push(cs("DOWN"), 3 * 30);
        t.push(cs("A"), 4 * 30);
        t.push(cs("B"), 2 * 30);
        t.push(cs("START"), 30);
        fit_action_model(&[t], 30).unwrap()
    }

    #[test]
    fn attract_fills_exactly_floor_budget_over_cadence() {
        let archive = run_attract(GameId::GridQuest, 3000 + 29, 30);
        assert_eq!(archive.len(), 100);
        assert_eq!(archive.moments[0].gameplay_frames, 30);
        assert_eq!(archive.moments[99].gameplay_frames, 3000);
        assert!(archive.moments.iter().all(|m| m.snapshot.is_none()));

        let scenes: BTreeSet<u8> = archive.moments.iter().map(|m| m.memory[0]).collect();
        let expected: BTreeSet<u8> = [GqScene::Boot as u8, GqScene::Title as u8, GqScene::Attract as u8]
            .into_iter()
            .collect();
        assert_eq!(scenes, expected, "idle play sees boot, title and the demo");
    }

    #[test]
    fn chaos_monkey_is_deterministic_per_seed() {
        let model = test_model();
        let a = run_chaos_monkey(GameId::GridQuest, &model, 6000, 30, 1);
        let b = run_chaos_monkey(GameId::GridQuest, &model, 6000, 30, 1);
        let c = run_chaos_monkey(GameId::GridQuest, &model, 6000, 30, 2);
        assert_eq!(a, b);
        assert_ne!(a.content_hash(), c.content_hash());
        assert_eq!(a.len(), 200);
        assert!(a.moments.iter().all(|m| m.snapshot.is_none()));
    }

    #[test]
    fn rrt_archives_root_plus_one_moment_per_expansion() {
        let model = test_model();
        let embedder = AvgRgb;
        let (archive, tree) = run_rrt(GameId::GridQuest, &model, &embedder, 900, &RrtParams::default(), 5).unwrap();
        // 900 frames / 30 = 30 expansions, plus the free boot root.
        assert_eq!(tree.nodes.len(), 31);
        assert_eq!(archive.len(), 31);
        assert_eq!(archive.moments[0].gameplay_frames, 0);
        assert!(archive.moments.iter().all(|m| m.snapshot.is_some()));
        // Moment indices and node ids line up 1:1 for a boot-rooted tree.
        for node in &tree.nodes {
            assert_eq!(node.moment_index, Some(node.id));
        }
    }

    #[test]
    fn rrt_is_deterministic_and_replayable() {
        let model = test_model();
        let embedder = RandomProjection::new(8, 3).unwrap();
        let params = RrtParams::default();
        let (a, tree_a) = run_rrt(GameId::GridQuest, &model, &embedder, 3000, &params, 9).unwrap();
        let (b, tree_b) = run_rrt(GameId::GridQuest, &model, &embedder, 3000, &params, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(tree_a, tree_b);

        for id in [1u64, 17, 50, 100] {
            let replayed = tree_a.replay(id);
            let moment = &a.moments[tree_a.nodes[id as usize].moment_index.unwrap() as usize];
            assert_eq!(replayed.memory(), moment.memory, "node {id} replay diverged");
        }
    }

    #[test]
    fn rrt_spends_frames_only_on_steps() {
        let model = test_model();
        let embedder = AvgRgb;
        let (archive, tree) =
            run_rrt(GameId::GridQuest, &model, &embedder, 299, &RrtParams::default(), 0).unwrap();
        // 299 < 10 full windows: 9 expansions.
        assert_eq!(tree.nodes.len(), 10);
        assert_eq!(archive.moments.last().unwrap().gameplay_frames, 270);
    }

    #[test]
    fn hybrid_orders_moments_by_cumulative_time() {
        let model = test_model();
        let embedder = RandomProjection::new(8, 3).unwrap();
        let params = RrtParams {
            k_seeds: 10,
            ..RrtParams::default()
        };
        let (archive, tree) =
            run_hybrid(GameId::GridQuest, &model, &embedder, 6000, &params, 4).unwrap();
        // 3000 chaos frames -> 100 moments; 3000 forest frames -> 100 more.
        assert_eq!(archive.len(), 200);
        let frames: Vec<u64> = archive.moments.iter().map(|m| m.gameplay_frames).collect();
        assert!(frames.windows(2).all(|w| w[0] < w[1]), "not strictly increasing");
        assert_eq!(frames[199], 6000);

        // Forest roots are chaos moments, not re-archived.
        let roots: Vec<_> = tree.nodes.iter().filter(|n| n.parent.is_none()).collect();
        assert_eq!(roots.len(), 10);
        for root in &roots {
            let idx = root.moment_index.unwrap() as usize;
            assert!(idx < 100, "seed {idx} should come from the chaos phase");
        }
        let (again, _) = run_hybrid(GameId::GridQuest, &model, &embedder, 6000, &params, 4).unwrap();
        assert_eq!(archive, again);
    }

    #[test]
    fn hybrid_with_tiny_budget_has_no_forest_phase() {
        let model = test_model();
        let (archive, tree) =
            run_hybrid(GameId::GridQuest, &model, &AvgRgb, 59, &RrtParams::default(), 0).unwrap();
        assert_eq!(archive.len(), 0);
        assert!(tree.nodes.is_empty());
    }

    #[test]
    fn bootstrap_trains_across_rounds() {
        let model = test_model();
        let params = BootstrapParams {
            rounds: 2,
            frames_per_round: 1200,
            bottleneck_dims: 4,
            model_seed: 1,
            train: TrainConfig {
                epochs: 2,
                ..TrainConfig::default()
            },
        };
        let result = run_bootstrap(GameId::GridQuest, &model, &RrtParams::default(), &params, 3).unwrap();
        assert_eq!(result.rounds.len(), 2);
        assert_eq!(result.losses.len(), 2);
        assert_eq!(result.rounds[0].len(), 41);
        assert_eq!(
            result.rounds[0].moments[1].provenance.strategy,
            "bootstrap-r1"
        );
        assert_eq!(
            result.rounds[1].moments[1].provenance.strategy,
            "bootstrap-r2"
        );

        let again = run_bootstrap(GameId::GridQuest, &model, &RrtParams::default(), &params, 3).unwrap();
        assert_eq!(again.model, result.model);
        assert_eq!(again.rounds, result.rounds);

        let other_seed = run_bootstrap(GameId::GridQuest, &model, &RrtParams::default(), &params, 4).unwrap();
        assert_ne!(other_seed.rounds, result.rounds);
    }

    #[test]
    fn tree_json_lists_nodes_with_snapshot_paths() {
        let model = test_model();
        let (_, tree) =
            run_rrt(GameId::ColorCavern, &model, &AvgRgb, 300, &RrtParams::default(), 2).unwrap();
        let json = tree.to_json();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        let nodes = value["nodes"].as_array().unwrap();
        assert_eq!(nodes.len(), 11);
        assert_eq!(nodes[0]["parent"], serde_json::Value::Null);
        assert_eq!(nodes[0]["snapshot"], "snapshots/000000.snp");
        assert!(nodes[1]["parent"].is_u64());
        assert_eq!(nodes[1]["frames"], 30);
        assert_eq!(nodes[1]["vector"].as_array().unwrap().len(), 3);
    }
}
