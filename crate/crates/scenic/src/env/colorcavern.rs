//! ColorCavern: three sequential mazes behind a title screen, each with
//! its own palette. Reaching a maze's exit advances to the next; leaving
//! the last maze wraps back to the title screen.

use std::sync::LazyLock;

use super::room::{try_move, Room};
use super::{dir_delta, Button, ControllerState, Screenshot, MEMORY_SIZE};

/// Scene ids as stored in memory byte 0: 0 is the title, 1..=3 the mazes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum CcScene {
    Title = 0,
    Maze1 = 1,
    Maze2 = 2,
    Maze3 = 3,
}

const MAZE_COUNT: u8 = 3;
/// ColorCavern paces faster than GridQuest: one tile per 3 held frames.
const MOVE_FRAMES: u8 = 3;

const MAZE_MAPS: [&str; MAZE_COUNT as usize] = [
    // Maze 1: plain serpentine.
    "\
################
#S.............#
##############.#
#..............#
#.##############
#..............#
##############.#
#..............#
#.##############
#..............#
##############.#
#..............#
#.##############
#..............#
##############E#
################",
    // Maze 2: vertical comb.
    "\
################
#S.#...#...#...#
#..#...#...#...#
#..#.#.#.#.#.#.#
#..#.#.#.#.#.#.#
#..#.#.#.#.#.#.#
#..#.#.#.#.#.#.#
#..#.#.#.#.#.#.#
#..#.#.#.#.#.#.#
#..#.#.#.#.#.#.#
#..#.#.#.#.#.#.#
#..#.#.#.#.#.#.#
#..#.#.#.#.#.#.#
#....#...#...#.#
#....#...#...#E#
################",
    // Maze 3: nested rings spiraling to the center.
    "\
################
#S.............#
#.############.#
#.#..........#.#
#.#.########.#.#
#.#.#......#.#.#
#.#.#.####...#.#
#.#.#.#..#.#.#.#
#.#.#.#.E#.#.#.#
#.#.#.#.##.#.#.#
#.#.#......#.#.#
#.#.########.#.#
#.#..........#.#
#.##.#########.#
#..............#
################",
];

pub(crate) static MAZES: LazyLock<Vec<Room>> =
    LazyLock::new(|| MAZE_MAPS.iter().map(|m| Room::parse(m)).collect());

const TITLE_BG: (u8, u8, u8) = (152, 24, 48);
const LOGO: (u8, u8, u8) = (240, 240, 240);
const MAZE_BG: [(u8, u8, u8); MAZE_COUNT as usize] =
    [(48, 120, 136), (120, 128, 48), (124, 56, 148)];
const EXIT: (u8, u8, u8) = (248, 248, 248);
const AVATAR: (u8, u8, u8) = (224, 32, 32);
const FIREFLY: (u8, u8, u8) = (160, 160, 160);

fn half(c: (u8, u8, u8)) -> (u8, u8, u8) {
    (c.0 / 2, c.1 / 2, c.2 / 2)
}

/// Scales a color by `num`/256, saturating at white.
fn shade(c: (u8, u8, u8), num: u32) -> (u8, u8, u8) {
    let ch = |v: u8| ((v as u32 * num) / 256).min(255) as u8;
    (ch(c.0), ch(c.1), ch(c.2))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(super) struct State {
    /// 0 at the title; otherwise the 1-based maze number.
    scene: u8,
    player: (u8, u8),
    move_timer: u8,
    pub(super) frame_counter: u32,
}

impl State {
    pub fn boot() -> State {
        State {
            scene: CcScene::Title as u8,
            player: (0, 0),
            move_timer: 0,
            frame_counter: 0,
        }
    }

    pub fn step_frame(&mut self, input: ControllerState) {
        self.frame_counter = self.frame_counter.wrapping_add(1);
        if self.scene == 0 {
            if input.pressed(Button::Start) {
                self.scene = 1;
                self.player = MAZES[0].start;
                self.move_timer = 0;
            }
            return;
        }
        let (dx, dy) = dir_delta(input);
        if dx == 0 && dy == 0 {
            self.move_timer = 0;
            return;
        }
        self.move_timer += 1;
        if self.move_timer < MOVE_FRAMES {
            return;
        }
        self.move_timer = 0;
        let room = &MAZES[self.scene as usize - 1];
        self.player = try_move(room, self.player, dx, dy);
        if self.player == room.goal {
            if self.scene < MAZE_COUNT {
                self.scene += 1;
                self.player = MAZES[self.scene as usize - 1].start;
            } else {
                self.scene = CcScene::Title as u8;
                self.player = (0, 0);
            }
        }
    }

    pub fn memory(&self) -> [u8; MEMORY_SIZE] {
        let mut m = [0u8; MEMORY_SIZE];
        m[0] = self.scene;
        m[1] = self.scene; // maze number; 0 at the title
        m[2] = self.player.0;
        m[3] = self.player.1;
        m[8..10].copy_from_slice(&((self.frame_counter % 65536) as u16).to_le_bytes());
        m
    }

    /// 32-frame blink phase, same idea as GridQuest's: guarantees idle
    /// frames keep animating so no held input is ever a visual no-op.
    fn tick(&self) -> bool {
        self.frame_counter & 32 != 0
    }

    /// Drifting glow-worm, one hop per half second on a 310-hop orbit.
    /// Keeps otherwise-static screens visually distinct over time.
    fn firefly(&self, s: &mut Screenshot) {
        let hop = (self.frame_counter / 30) as usize;
        s.fill_rect((7 * hop) % 62, 1 + (3 * hop) % 5, 2, 2, FIREFLY);
    }

    pub fn render(&self) -> Screenshot {
        if self.scene == 0 {
            let mut s = Screenshot::filled(TITLE_BG.0, TITLE_BG.1, TITLE_BG.2);
            s.fill_rect(8, 24, 48, 10, LOGO);
            s.fill_rect(20, 40, 24, 4, LOGO);
            if self.tick() {
                s.fill_rect(24, 50, 16, 3, LOGO);
            }
            self.firefly(&mut s);
            return s;
        }
        let room = &MAZES[self.scene as usize - 1];
        // Cave lighting: the walls swallow light near the exit, so the
        // whole screen dims as the player closes in on it.
        let glow =
            66 + 100 * room.goal_distance(self.player.0, self.player.1) / room.max_goal_dist.max(1);
        let bg = shade(MAZE_BG[self.scene as usize - 1], glow);
        let mut s = Screenshot::filled(bg.0, bg.1, bg.2);
        for ty in 0..room.height {
            for tx in 0..room.width {
                if room.is_wall(tx, ty) {
                    s.fill_rect(tx * 4, ty * 4, 4, 4, half(bg));
                } else if (tx as u8, ty as u8) == room.goal {
                    s.fill_rect(tx * 4, ty * 4, 4, 4, EXIT);
                }
            }
        }
        if self.tick() {
            // Exit beacon pulse.
            let (gx, gy) = room.goal;
            s.fill_rect(gx as usize * 4 + 1, gy as usize * 4 + 1, 2, 2, half(EXIT));
        }
        s.fill_rect(self.player.0 as usize * 4, self.player.1 as usize * 4, 4, 4, AVATAR);
        self.firefly(&mut s);
        s
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(8);
        b.push(self.scene);
        b.push(self.player.0);
        b.push(self.player.1);
        b.push(self.move_timer);
        b.extend_from_slice(&self.frame_counter.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8]) -> Option<State> {
        if b.len() != 8 || b[0] > MAZE_COUNT {
            return None;
        }
        Some(State {
            scene: b[0],
            player: (b[1], b[2]),
            move_timer: b[3],
            frame_counter: u32::from_le_bytes([b[4], b[5], b[6], b[7]]),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::{boot, EnvState, GameId};
    use super::*;

    fn press(state: &mut EnvState, buttons: &[Button], frames: u32) {
        state.step(ControllerState::new(buttons.iter().copied()), frames);
    }

    #[test]
    fn all_mazes_are_solvable() {
        for (k, room) in MAZES.iter().enumerate() {
            assert!(room.solvable(), "maze {} has no path to the exit", k + 1);
            assert_eq!(room.width, 16);
            assert_eq!(room.height, 16);
        }
    }

    #[test]
    fn title_waits_for_start() {
        let mut s = boot(GameId::ColorCavern);
        press(&mut s, &[Button::A, Button::Up], 500);
        assert_eq!(s.scene_byte(), CcScene::Title as u8);
        press(&mut s, &[Button::Start], 1);
        assert_eq!(s.scene_byte(), CcScene::Maze1 as u8);
        assert_eq!(s.memory()[2..4], [1, 1]);
    }

    #[test]
    fn maze_one_serpentine_reaches_maze_two() {
        let mut s = boot(GameId::ColorCavern);
        press(&mut s, &[Button::Start], 1);
        let legs: [(&[Button], u32); 14] = [
            (&[Button::Right], 13 * 3),
            (&[Button::Down], 2 * 3),
            (&[Button::Left], 13 * 3),
            (&[Button::Down], 2 * 3),
            (&[Button::Right], 13 * 3),
            (&[Button::Down], 2 * 3),
            (&[Button::Left], 13 * 3),
            (&[Button::Down], 2 * 3),
            (&[Button::Right], 13 * 3),
            (&[Button::Down], 2 * 3),
            (&[Button::Left], 13 * 3),
            (&[Button::Down], 2 * 3),
            (&[Button::Right], 13 * 3),
            (&[Button::Down], 3),
        ];
        for (buttons, frames) in legs {
            press(&mut s, buttons, frames);
        }
        assert_eq!(s.scene_byte(), CcScene::Maze2 as u8);
        assert_eq!(s.memory()[2..4], [1, 1], "player reset to the new start");
    }

    #[test]
    fn mazes_render_with_distinct_palettes() {
        let mut shots = Vec::new();
        let mut s = boot(GameId::ColorCavern);
        shots.push(s.render());
        press(&mut s, &[Button::Start], 1);
        shots.push(s.render());
        for i in 0..shots.len() {
            for j in i + 1..shots.len() {
                assert_ne!(shots[i], shots[j]);
            }
        }
    }
}
