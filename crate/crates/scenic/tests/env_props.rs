//! Property tests for the environment contract: step composition, purity
//! of render/memory, and snapshot round-trips under random play.

use proptest::prelude::*;
use scenic::env::{boot, Button, ControllerState, EnvState, GameId};

fn controller(bits: u8) -> ControllerState {
    ControllerState::new(
        (0..8)
            .filter(|b| bits & (1 << b) != 0)
            .map(|b| Button::ALL[b as usize]),
    )
}

fn game_strategy() -> impl Strategy<Value = GameId> {
    prop_oneof![Just(GameId::GridQuest), Just(GameId::ColorCavern)]
}

/// Random short play prefix so the invariants are exercised from many
/// different scenes, not just from boot.
fn warmed_up(game: GameId, segments: &[(u8, u8)]) -> EnvState {
    let mut s = boot(game);
    for &(bits, frames) in segments {
        s.step(controller(bits), frames as u32);
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1200))]

    #[test]
    fn step_composes(
        game in game_strategy(),
        prefix in proptest::collection::vec((any::<u8>(), 0u8..80), 0..6),
        bits in any::<u8>(),
        m in 0u32..90,
        n in 0u32..90,
    ) {
        let input = controller(bits);
        let mut split = warmed_up(game, &prefix);
        let mut whole = split.clone();
        split.step(input, m);
        split.step(input, n);
        whole.step(input, m + n);
        prop_assert_eq!(split.save_snapshot(), whole.save_snapshot());
        prop_assert_eq!(split.memory(), whole.memory());
        prop_assert_eq!(split.render(), whole.render());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn render_and_memory_are_pure(
        game in game_strategy(),
        prefix in proptest::collection::vec((any::<u8>(), 0u8..120), 0..8),
    ) {
        let s = warmed_up(game, &prefix);
        prop_assert_eq!(s.render(), s.render());
        prop_assert_eq!(s.memory(), s.memory());
        prop_assert_eq!(s.save_snapshot(), s.save_snapshot());
    }

    #[test]
    fn snapshot_round_trips_from_any_state(
        game in game_strategy(),
        prefix in proptest::collection::vec((any::<u8>(), 0u8..120), 0..8),
        bits in any::<u8>(),
        frames in 0u32..90,
    ) {
        let s = warmed_up(game, &prefix);
        let blob = s.save_snapshot();
        let mut restored = EnvState::load_snapshot(&blob).unwrap();
        prop_assert_eq!(restored.save_snapshot(), blob);

        let mut original = s.clone();
        let input = controller(bits);
        restored.step(input, frames);
        original.step(input, frames);
        prop_assert_eq!(restored.save_snapshot(), original.save_snapshot());
    }
}
