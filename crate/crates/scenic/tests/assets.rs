//! Pins the bundled assets to the code that regenerates them. The traces,
//! the action model, and the perception model under assets/ are inputs to
//! the bundled experiment configs, so silent drift should fail here and
//! not midway through an experiment run.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::str::FromStr;

use scenic::embed::EmbedSpec;
use scenic::env::GameId;
use scenic::trace::{fit_action_model, load_trace, playback, ActionModel, Trace, DEFAULT_CADENCE};

fn asset(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../assets")
        .join(rel)
}

fn bundled_traces() -> Vec<Trace> {
    [
        "traces/gridquest_tour.trc",
        "traces/gridquest_speedrun.trc",
        "traces/colorcavern_tour.trc",
        "traces/colorcavern_speedrun.trc",
    ]
    .iter()
    .map(|rel| load_trace(&asset(rel)).expect("bundled trace parses"))
    .collect()
}

fn scene_set(trace: &Trace) -> BTreeSet<u8> {
    let archive = playback(trace, DEFAULT_CADENCE).unwrap();
    archive.moments.iter().map(|m| m.memory[0]).collect()
}

#[test]
fn action_model_is_the_refit_of_the_bundled_traces() {
    let text = std::fs::read_to_string(asset("models/actions.json")).unwrap();
    let bundled = ActionModel::from_json(&text).unwrap();
    let refit = fit_action_model(&bundled_traces(), DEFAULT_CADENCE).unwrap();
    assert_eq!(bundled.weights(), refit.weights());
}

#[test]
fn action_model_keeps_start_rare_but_possible() {
    let text = std::fs::read_to_string(asset("models/actions.json")).unwrap();
    let model = ActionModel::from_json(&text).unwrap();
    let start = model.weight("START".parse().unwrap());
    assert!(start > 0.0 && start < 0.05, "START weight {start}");
    let total: f64 = model.weights().values().sum();
    assert!((total - 1.0).abs() < 1e-12, "weights sum to {total}");
}

#[test]
fn tour_traces_complete_their_games() {
    let traces = bundled_traces();

    // The GridQuest tour clears all four levels and ends on the overworld.
    let tour = &traces[0];
    assert_eq!(tour.game, GameId::GridQuest);
    assert_eq!(scene_set(tour), BTreeSet::from([0, 1, 2, 3, 5]));
    let last = playback(tour, DEFAULT_CADENCE).unwrap();
    let mem = last.moments.last().unwrap().memory;
    assert_eq!(mem[0], 2, "tour ends on the overworld");
    assert_eq!(mem[4], 0b1111, "tour unlocks every level");

    // The speedrun clears only the first level, which unlocks the second.
    let speed = &traces[1];
    assert_eq!(scene_set(speed), BTreeSet::from([0, 1, 2, 3, 5]));
    let mem = playback(speed, DEFAULT_CADENCE).unwrap().moments.last().unwrap().memory;
    assert_eq!(mem[4], 0b0011);

    // The ColorCavern tour walks all three mazes and wraps to the title.
    let cc_tour = &traces[2];
    assert_eq!(cc_tour.game, GameId::ColorCavern);
    assert_eq!(scene_set(cc_tour), BTreeSet::from([0, 1, 2, 3]));
    let mem = playback(cc_tour, DEFAULT_CADENCE).unwrap().moments.last().unwrap().memory;
    assert_eq!(mem[0], 0, "cavern tour wraps back to the title");

    // The ColorCavern speedrun stops partway into the second maze.
    assert_eq!(scene_set(&traces[3]), BTreeSet::from([1, 2]));
}

#[test]
fn trace_playback_is_repeatable() {
    for trace in &bundled_traces() {
        let a = playback(trace, DEFAULT_CADENCE).unwrap();
        let b = playback(trace, DEFAULT_CADENCE).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
    }
}

#[test]
fn perception_model_loads_and_embeds() {
    let spec = format!(
        "bottleneck:{}",
        asset("models/gridquest_p2m.bin").display()
    );
    let embedder = EmbedSpec::from_str(&spec).unwrap().build().unwrap();
    assert_eq!(embedder.dims(), 16);
    let archive = playback(&bundled_traces()[0], DEFAULT_CADENCE).unwrap();
    let first = embedder.embed(&archive.moments[0].screen).unwrap();
    let again = embedder.embed(&archive.moments[0].screen).unwrap();
    assert_eq!(first, again);
    assert!(first.iter().all(|v| v.is_finite()));
    // Distinct scenes land in distinct spots; this is what makes the
    // model useful as an exploration metric space.
    let title = archive.moments.iter().find(|m| m.memory[0] == 1).unwrap();
    let level = archive.moments.iter().find(|m| m.memory[0] == 3).unwrap();
    let a = embedder.embed(&title.screen).unwrap();
    let b = embedder.embed(&level.screen).unwrap();
    let dist: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    assert!(dist > 0.5, "title and level embeddings are {dist} apart");
}
