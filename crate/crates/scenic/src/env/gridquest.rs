//! GridQuest: a four-level tile puzzler with a title screen, an overworld
//! level select, a victory fanfare, and an attract-mode demo that plays
//! when the title screen is left idle.

use std::sync::LazyLock;

use super::room::{try_move, Room};
use super::{dir_delta, Button, ControllerState, Screenshot, MEMORY_SIZE, SCREEN_WIDTH};

/// Scene ids as stored in memory byte 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum GqScene {
    Boot = 0,
    Title = 1,
    Overworld = 2,
    Level = 3,
    Attract = 4,
    Fanfare = 5,
}

impl GqScene {
    fn from_u8(v: u8) -> Option<GqScene> {
        match v {
            0 => Some(GqScene::Boot),
            1 => Some(GqScene::Title),
            2 => Some(GqScene::Overworld),
            3 => Some(GqScene::Level),
            4 => Some(GqScene::Attract),
            5 => Some(GqScene::Fanfare),
            _ => None,
        }
    }
}

const BOOT_FRAMES: u8 = 60;
const IDLE_LIMIT: u16 = 300;
const ATTRACT_FRAMES: u16 = 600;
const FANFARE_FRAMES: u8 = 60;
/// A held arrow moves the in-level avatar one tile every this many frames.
const MOVE_FRAMES: u8 = 5;
/// Overworld cursor pacing. Slower than in-level movement so a
/// half-second hold steps 3 cells: every grid column the level cells sit
/// on stays reachable whether inputs come in long presses or fixed
/// half-second holds.
const CURSOR_FRAMES: u8 = 10;
const GRID_SIZE: u8 = 8;
pub(crate) const LEVEL_COUNT: u8 = 4;

const LEVEL_MAPS: [&str; LEVEL_COUNT as usize] = [
    // Level 0: left-to-right serpentine; also drives the attract demo.
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
##############F#
################",
    // Level 1: concentric rings entered bottom-left, then top-right.
    "\
################
#S.............#
#.############.#
#.#..........#.#
#.#.######.#.#.#
#.#.#..F...#.#.#
#.#.#......#.#.#
#.#.########.#.#
#.#..........#.#
#.#.##########.#
#..............#
################",
    // Level 2: vertical comb; corridors alternate between top and bottom.
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
#....#...#...#.#
#....#...#...#F#
################",
    // Level 3: rings again, with the gaps on opposite sides.
    "\
################
#S.............#
#.##########.#.#
#.#..........#.#
#.#.########.#.#
#.#.#......#.#.#
#.#.#.....F#.#.#
#.#.#.######.#.#
#.#..........#.#
#.############.#
#..............#
################",
];

pub(crate) static LEVELS: LazyLock<Vec<Room>> =
    LazyLock::new(|| LEVEL_MAPS.iter().map(|m| Room::parse(m)).collect());

/// The attract demo replays this walk of level 0, one tile per
/// `MOVE_FRAMES` frames. Segments are (dx, dy, steps).
const DEMO_SEGMENTS: [(i8, i8, u8); 10] = [
    (1, 0, 13),
    (0, 1, 2),
    (-1, 0, 13),
    (0, 1, 2),
    (1, 0, 13),
    (0, 1, 2),
    (-1, 0, 13),
    (0, 1, 2),
    (1, 0, 13),
    (0, 1, 1),
];

/// Demo positions indexed by completed steps; position 0 is the start tile.
pub(crate) static DEMO_PATH: LazyLock<Vec<(u8, u8)>> = LazyLock::new(|| {
    let room = &LEVELS[0];
    let mut pos = room.start;
    let mut path = vec![pos];
    for (dx, dy, steps) in DEMO_SEGMENTS {
        for _ in 0..steps {
            let next = (pos.0 as i16 + dx as i16, pos.1 as i16 + dy as i16);
            assert!(room.passable(next.0, next.1), "demo walks into a wall");
            pos = (next.0 as u8, next.1 as u8);
            path.push(pos);
        }
    }
    assert_eq!(pos, room.goal, "demo does not end on the flag");
    path
});

// Palette. Channel values are multiples of 8 so the coarse screen
// embeddings see clean separations between scenes.
const TITLE_BG: (u8, u8, u8) = (24, 40, 168);
const LOGO: (u8, u8, u8) = (240, 240, 240);
const OVERWORLD_BG: (u8, u8, u8) = (24, 128, 40);
const CELL_UNLOCKED: (u8, u8, u8) = (240, 240, 96);
const CELL_LOCKED: (u8, u8, u8) = (64, 64, 64);
const LEVEL_BG: [(u8, u8, u8); LEVEL_COUNT as usize] =
    [(216, 112, 24), (128, 48, 168), (24, 152, 152), (136, 88, 40)];
const FANFARE_BG: (u8, u8, u8) = (232, 208, 48);
const STATUS_STRIP: (u8, u8, u8) = (40, 40, 40);
const FLAG: (u8, u8, u8) = (248, 248, 248);
const AVATAR: (u8, u8, u8) = (224, 32, 32);
const FIREFLY: (u8, u8, u8) = (160, 160, 160);
const IDLE_METER: (u8, u8, u8) = (224, 32, 224);

/// Hues the boot bar cycles through, one 8px stripe each.
const BOOT_STRIPES: [(u8, u8, u8); 8] = [
    TITLE_BG,
    OVERWORLD_BG,
    LEVEL_BG[0],
    LEVEL_BG[1],
    LEVEL_BG[2],
    LEVEL_BG[3],
    FANFARE_BG,
    AVATAR,
];

fn half(c: (u8, u8, u8)) -> (u8, u8, u8) {
    (c.0 / 2, c.1 / 2, c.2 / 2)
}

/// Scales a color by `num`/256, saturating at white. Scene backgrounds
/// run through this with a state-driven numerator, a cheap global
/// lighting pass that makes the whole screen drift with position and
/// timers instead of snapping between a handful of fixed looks.
fn shade(c: (u8, u8, u8), num: u32) -> (u8, u8, u8) {
    let ch = |v: u8| ((v as u32 * num) / 256).min(255) as u8;
    (ch(c.0), ch(c.1), ch(c.2))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(super) struct State {
    scene: GqScene,
    level: u8,
    cursor: (u8, u8),
    player: (u8, u8),
    unlocked: u8,
    boot_timer: u8,
    idle_timer: u16,
    attract_timer: u16,
    fanfare_timer: u8,
    move_timer: u8,
    pub(super) frame_counter: u32,
}

impl State {
    pub fn boot() -> State {
        State {
            scene: GqScene::Boot,
            level: 0,
            // The cursor defaults to the first level's cell.
            cursor: Self::level_cell(0),
            player: (0, 0),
            unlocked: 0b0001,
            boot_timer: 0,
            idle_timer: 0,
            attract_timer: 0,
            fanfare_timer: 0,
            move_timer: 0,
            frame_counter: 0,
        }
    }

    /// Grid cell holding level `k` on the overworld.
    fn level_cell(k: u8) -> (u8, u8) {
        (2 * k + 1, 4)
    }

    pub fn step_frame(&mut self, input: ControllerState) {
        self.frame_counter = self.frame_counter.wrapping_add(1);
        match self.scene {
            GqScene::Boot => {
                self.boot_timer += 1;
                if self.boot_timer >= BOOT_FRAMES {
                    self.boot_timer = 0;
                    self.scene = GqScene::Title;
                }
            }
            GqScene::Title => {
                if input.pressed(Button::Start) {
                    self.idle_timer = 0;
                    self.move_timer = 0;
                    self.scene = GqScene::Overworld;
                } else if input.is_empty() {
                    self.idle_timer += 1;
                    if self.idle_timer >= IDLE_LIMIT {
                        self.idle_timer = 0;
                        self.attract_timer = 0;
                        self.scene = GqScene::Attract;
                    }
                } else {
                    self.idle_timer = 0;
                }
            }
            GqScene::Attract => {
                // The demo cannot be interrupted; it runs its course and
                // returns to the title screen.
                self.attract_timer += 1;
                if self.attract_timer >= ATTRACT_FRAMES {
                    self.attract_timer = 0;
                    self.scene = GqScene::Title;
                }
            }
            GqScene::Overworld => {
                if input.pressed(Button::A) {
                    for k in 0..LEVEL_COUNT {
                        if self.cursor == Self::level_cell(k) && self.unlocked & (1 << k) != 0 {
                            self.level = k;
                            self.player = LEVELS[k as usize].start;
                            self.move_timer = 0;
                            self.scene = GqScene::Level;
                            return;
                        }
                    }
                }
                let (dx, dy) = dir_delta(input);
                if dx == 0 && dy == 0 {
                    self.move_timer = 0;
                } else {
                    self.move_timer += 1;
                    if self.move_timer >= CURSOR_FRAMES {
                        self.move_timer = 0;
                        let nx = (self.cursor.0 as i16 + dx as i16).clamp(0, GRID_SIZE as i16 - 1);
                        let ny = (self.cursor.1 as i16 + dy as i16).clamp(0, GRID_SIZE as i16 - 1);
                        self.cursor = (nx as u8, ny as u8);
                    }
                }
            }
            GqScene::Level => {
                if input.pressed(Button::B) {
                    self.move_timer = 0;
                    self.scene = GqScene::Overworld;
                    return;
                }
                let (dx, dy) = dir_delta(input);
                if dx == 0 && dy == 0 {
                    self.move_timer = 0;
                } else {
                    self.move_timer += 1;
                    if self.move_timer >= MOVE_FRAMES {
                        self.move_timer = 0;
                        let room = &LEVELS[self.level as usize];
                        self.player = try_move(room, self.player, dx, dy);
                        if self.player == room.goal {
                            if self.level + 1 < LEVEL_COUNT {
                                self.unlocked |= 1 << (self.level + 1);
                            }
                            self.fanfare_timer = 0;
                            self.scene = GqScene::Fanfare;
                        }
                    }
                }
            }
            GqScene::Fanfare => {
                self.fanfare_timer += 1;
                if self.fanfare_timer >= FANFARE_FRAMES {
                    self.fanfare_timer = 0;
                    self.move_timer = 0;
                    self.scene = GqScene::Overworld;
                }
            }
        }
    }

    fn demo_pos(&self) -> (u8, u8) {
        let idx = (self.attract_timer / MOVE_FRAMES as u16) as usize;
        DEMO_PATH[idx.min(DEMO_PATH.len() - 1)]
    }

    /// 32-frame blink phase for idle animations (cursor ring, start
    /// prompt, flag pennant). Off the half-second grid on purpose:
    /// fixed-cadence holds land on both phases, so no two consecutive
    /// otherwise-idle frames render identically forever.
    fn tick(&self) -> bool {
        self.frame_counter & 32 != 0
    }

    /// A firefly drifts across the top of every post-boot scene, one hop
    /// per half second. Its orbit takes 310 hops to repeat, which keeps
    /// long stretches of otherwise-static gameplay visually distinct
    /// frame to frame, the way real games never hold a literal still.
    fn firefly(&self, s: &mut Screenshot) {
        let hop = (self.frame_counter / 30) as usize;
        s.fill_rect((7 * hop) % 62, 1 + (3 * hop) % 5, 2, 2, FIREFLY);
    }

    pub fn memory(&self) -> [u8; MEMORY_SIZE] {
        let mut m = [0u8; MEMORY_SIZE];
        m[0] = self.scene as u8;
        match self.scene {
            GqScene::Level | GqScene::Fanfare => {
                m[1] = self.level;
                m[2] = self.player.0;
                m[3] = self.player.1;
            }
            GqScene::Attract => {
                let (x, y) = self.demo_pos();
                m[2] = x;
                m[3] = y;
            }
            GqScene::Overworld => {
                m[2] = self.cursor.0;
                m[3] = self.cursor.1;
            }
            GqScene::Boot | GqScene::Title => {}
        }
        m[4] = self.unlocked;
        m[5..7].copy_from_slice(&self.idle_timer.to_le_bytes());
        m[7] = self.fanfare_timer;
        m[8..10].copy_from_slice(&((self.frame_counter % 65536) as u16).to_le_bytes());
        m
    }

    pub fn render(&self) -> Screenshot {
        let mut s = match self.scene {
            GqScene::Boot => {
                // Black screen with a striped warm-up bar that widens as
                // the boot counter runs. Zero width at frame 0, so the
                // freshly booted state renders pure black.
                let mut s = Screenshot::filled(0, 0, 0);
                let w = self.boot_timer as usize * SCREEN_WIDTH / BOOT_FRAMES as usize;
                for (i, &c) in BOOT_STRIPES.iter().enumerate() {
                    let x0 = i * 8;
                    if x0 < w {
                        s.fill_rect(x0, 60, (w - x0).min(8), 2, c);
                    }
                }
                s
            }
            GqScene::Title => {
                // The sky brightens as the attract demo draws near.
                let bg = shade(TITLE_BG, 192 + 64 * self.idle_timer.min(IDLE_LIMIT) as u32 / IDLE_LIMIT as u32);
                let mut s = Screenshot::filled(bg.0, bg.1, bg.2);
                s.fill_rect(12, 20, 40, 12, LOGO);
                s.fill_rect(16, 40, 32, 4, LOGO);
                if self.tick() {
                    s.fill_rect(22, 52, 20, 3, LOGO);
                }
                // Magenta meter creeping toward the attract demo. No other
                // scene uses this hue, and the width is monotone in the
                // idle timer, so every idle state looks distinct.
                let w = self.idle_timer.min(IDLE_LIMIT) as usize * SCREEN_WIDTH / IDLE_LIMIT as usize;
                s.fill_rect(0, 58, w, 2, IDLE_METER);
                s
            }
            GqScene::Overworld => {
                // A storm cloud hangs over the newest unlocked gate and
                // shades the whole map, darkest with the cursor right
                // under it.
                let (cx, cy) = self.cursor;
                let (gx, gy) = Self::level_cell(self.unlocked.max(1).ilog2() as u8);
                let dist = (cx as i32 - gx as i32).unsigned_abs()
                    + (cy as i32 - gy as i32).unsigned_abs();
                let bg = shade(OVERWORLD_BG, 176 + 8 * dist);
                let mut s = Screenshot::filled(bg.0, bg.1, bg.2);
                for k in 0..LEVEL_COUNT {
                    let (lx, ly) = Self::level_cell(k);
                    let color = if self.unlocked & (1 << k) != 0 {
                        CELL_UNLOCKED
                    } else {
                        CELL_LOCKED
                    };
                    s.fill_rect(lx as usize * 8 + 1, ly as usize * 8 + 1, 6, 6, color);
                }
                s.fill_rect(cx as usize * 8 + 2, cy as usize * 8 + 2, 4, 4, AVATAR);
                if self.tick() {
                    let (px, py) = (cx as usize * 8, cy as usize * 8);
                    s.fill_rect(px, py, 8, 1, LOGO);
                    s.fill_rect(px, py + 7, 8, 1, LOGO);
                    s.fill_rect(px, py, 1, 8, LOGO);
                    s.fill_rect(px + 7, py, 1, 8, LOGO);
                }
                s
            }
            GqScene::Level => render_level(self.level, self.player, false, self.tick()),
            GqScene::Attract => render_level(0, self.demo_pos(), true, self.tick()),
            GqScene::Fanfare => {
                let bg = shade(FANFARE_BG, 196 + self.fanfare_timer as u32);
                Screenshot::filled(bg.0, bg.1, bg.2)
            }
        };
        if self.scene != GqScene::Boot {
            self.firefly(&mut s);
        }
        s
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(18);
        b.push(self.scene as u8);
        b.push(self.level);
        b.push(self.cursor.0);
        b.push(self.cursor.1);
        b.push(self.player.0);
        b.push(self.player.1);
        b.push(self.unlocked);
        b.push(self.boot_timer);
        b.extend_from_slice(&self.idle_timer.to_le_bytes());
        b.extend_from_slice(&self.attract_timer.to_le_bytes());
        b.push(self.fanfare_timer);
        b.push(self.move_timer);
        b.extend_from_slice(&self.frame_counter.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8]) -> Option<State> {
        if b.len() != 18 {
            return None;
        }
        let scene = GqScene::from_u8(b[0])?;
        if b[1] >= LEVEL_COUNT {
            return None;
        }
        Some(State {
            scene,
            level: b[1],
            cursor: (b[2], b[3]),
            player: (b[4], b[5]),
            unlocked: b[6],
            boot_timer: b[7],
            idle_timer: u16::from_le_bytes([b[8], b[9]]),
            attract_timer: u16::from_le_bytes([b[10], b[11]]),
            fanfare_timer: b[12],
            move_timer: b[13],
            frame_counter: u32::from_le_bytes([b[14], b[15], b[16], b[17]]),
        })
    }
}

/// Levels draw in a 16x12 grid of 4px tiles between two status strips.
/// The attract demo reuses the level-0 renderer with a banner on top.
fn render_level(level: u8, avatar: (u8, u8), banner: bool, tick: bool) -> Screenshot {
    let room = &LEVELS[level as usize];
    let dist = room.goal_distance(avatar.0, avatar.1);
    let span = room.max_goal_dist.max(1);
    // Indoors is dimmer than the overworld ever gets, and the room
    // keeps darkening as the avatar closes in on the flag, a running
    // progress cue measured in walking distance rather than crow-flies.
    let glow = 66 + 100 * dist / span;
    let bg = shade(LEVEL_BG[level as usize], glow);
    let mut s = Screenshot::filled(STATUS_STRIP.0, STATUS_STRIP.1, STATUS_STRIP.2);
    for ty in 0..room.height {
        for tx in 0..room.width {
            let color = if room.is_wall(tx, ty) {
                half(bg)
            } else if (tx as u8, ty as u8) == room.goal {
                FLAG
            } else {
                bg
            };
            s.fill_rect(tx * 4, 8 + ty * 4, 4, 4, color);
        }
    }
    if tick {
        // Waving pennant on the flag tile.
        let (gx, gy) = room.goal;
        s.fill_rect(gx as usize * 4, 8 + gy as usize * 4, 2, 2, half(FLAG));
    }
    s.fill_rect(avatar.0 as usize * 4, 8 + avatar.1 as usize * 4, 4, 4, AVATAR);
    // The bottom strip is a progress bar filling with the share of the
    // walk already behind the avatar.
    let done = (span - dist.min(span)) as usize * SCREEN_WIDTH / span as usize;
    s.fill_rect(0, 57, done, 6, FLAG);
    if banner {
        s.fill_rect(0, 0, 64, 8, LOGO);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::super::{boot, EnvState, GameId};
    use super::*;

    fn press(state: &mut EnvState, buttons: &[Button], frames: u32) {
        state.step(ControllerState::new(buttons.iter().copied()), frames);
    }

    #[test]
    fn all_levels_are_solvable() {
        for (k, room) in LEVELS.iter().enumerate() {
            assert!(room.solvable(), "level {k} has no path to the flag");
            assert_eq!(room.width, 16);
            assert_eq!(room.height, 12);
        }
    }

    #[test]
    fn demo_path_ends_on_flag() {
        assert_eq!(*DEMO_PATH.last().unwrap(), LEVELS[0].goal);
    }

    #[test]
    fn boot_reaches_title_after_one_second() {
        let mut s = boot(GameId::GridQuest);
        press(&mut s, &[], 59);
        assert_eq!(s.scene_byte(), GqScene::Boot as u8);
        press(&mut s, &[], 1);
        assert_eq!(s.scene_byte(), GqScene::Title as u8);
    }

    #[test]
    fn start_skips_title_and_idle_reaches_attract() {
        let mut s = boot(GameId::GridQuest);
        press(&mut s, &[], 60);
        press(&mut s, &[Button::Start], 1);
        assert_eq!(s.scene_byte(), GqScene::Overworld as u8);

        let mut t = boot(GameId::GridQuest);
        press(&mut t, &[], 60 + 299);
        assert_eq!(t.scene_byte(), GqScene::Title as u8);
        press(&mut t, &[], 1);
        assert_eq!(t.scene_byte(), GqScene::Attract as u8);
        press(&mut t, &[Button::A], 600);
        assert_eq!(t.scene_byte(), GqScene::Title as u8, "attract ends despite input");
    }

    #[test]
    fn button_press_resets_idle_timer() {
        let mut s = boot(GameId::GridQuest);
        press(&mut s, &[], 60 + 299);
        press(&mut s, &[Button::Select], 1);
        assert_eq!(s.memory()[5], 0);
        press(&mut s, &[], 299);
        assert_eq!(s.scene_byte(), GqScene::Title as u8);
    }

    #[test]
    fn entering_and_leaving_level_zero() {
        let mut s = boot(GameId::GridQuest);
        press(&mut s, &[], 60);
        press(&mut s, &[Button::Start], 1);
        // Cursor boots on the level-0 cell, so A enters straight away.
        assert_eq!(s.memory()[2..4], [1, 4]);
        press(&mut s, &[Button::A], 1);
        assert_eq!(s.scene_byte(), GqScene::Level as u8);
        assert_eq!(s.memory()[1], 0);
        assert_eq!(s.memory()[2..4], [1, 1]);
        press(&mut s, &[Button::B], 1);
        assert_eq!(s.scene_byte(), GqScene::Overworld as u8);
        assert_eq!(s.memory()[2..4], [1, 4], "cursor kept after exit");
    }

    #[test]
    fn locked_level_cannot_be_entered() {
        let mut s = boot(GameId::GridQuest);
        press(&mut s, &[], 60);
        press(&mut s, &[Button::Start], 1);
        press(&mut s, &[Button::Right], 20);
        assert_eq!(s.memory()[2..4], [3, 4]);
        press(&mut s, &[Button::A], 10);
        assert_eq!(s.scene_byte(), GqScene::Overworld as u8);
    }

    #[test]
    fn walls_block_and_diagonals_slide() {
        let mut s = boot(GameId::GridQuest);
        press(&mut s, &[], 60);
        press(&mut s, &[Button::Start], 1);
        press(&mut s, &[Button::A], 1);
        // Up is a wall from the start tile; holding UP+RIGHT slides right.
        press(&mut s, &[Button::Up, Button::Right], 5);
        assert_eq!(s.memory()[2..4], [2, 1]);
        press(&mut s, &[Button::Up], 25);
        assert_eq!(s.memory()[2..4], [2, 1]);
    }

    #[test]
    fn completing_level_zero_unlocks_level_one() {
        let mut s = boot(GameId::GridQuest);
        press(&mut s, &[], 60);
        press(&mut s, &[Button::Start], 1);
        press(&mut s, &[Button::A], 1);
        // Walk the serpentine: the same legs the attract demo uses.
        let legs: [(&[Button], u32); 10] = [
            (&[Button::Right], 13 * 5),
            (&[Button::Down], 2 * 5),
            (&[Button::Left], 13 * 5),
            (&[Button::Down], 2 * 5),
            (&[Button::Right], 13 * 5),
            (&[Button::Down], 2 * 5),
            (&[Button::Left], 13 * 5),
            (&[Button::Down], 2 * 5),
            (&[Button::Right], 13 * 5),
            (&[Button::Down], 5),
        ];
        for (buttons, frames) in legs {
            press(&mut s, buttons, frames);
        }
        assert_eq!(s.scene_byte(), GqScene::Fanfare as u8);
        assert_eq!(s.memory()[4], 0b0011);
        press(&mut s, &[], 60);
        assert_eq!(s.scene_byte(), GqScene::Overworld as u8);
    }

    #[test]
    fn scene_renders_are_distinct() {
        let mut s = boot(GameId::GridQuest);
        let shot_boot = s.render();
        press(&mut s, &[], 60);
        let shot_title = s.render();
        press(&mut s, &[Button::Start], 1);
        let shot_over = s.render();
        press(&mut s, &[Button::A], 1);
        let shot_level = s.render();
        let shots = [&shot_boot, &shot_title, &shot_over, &shot_level];
        for i in 0..shots.len() {
            for j in i + 1..shots.len() {
                assert_ne!(shots[i], shots[j]);
            }
        }
    }
}
