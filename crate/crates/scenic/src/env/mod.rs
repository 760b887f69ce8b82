//! Deterministic game environments: controller input, frame stepping,
//! rendering, memory inspection, and snapshot save/load.
//!
//! Two built-in games are provided, [`GameId::GridQuest`] and
//! [`GameId::ColorCavern`]. Both are pure integer simulations: the same
//! action sequence from boot always yields byte-identical state, screen,
//! and memory.

mod colorcavern;
mod gridquest;
mod room;

pub use colorcavern::CcScene;
pub use gridquest::GqScene;

use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Simulated frames per second; all pacing in the games is derived from this.
pub const FRAMES_PER_SECOND: u32 = 60;
/// The usual moment-extraction cadence: half a simulated second.
pub const HALF_SECOND_FRAMES: u32 = FRAMES_PER_SECOND / 2;

/// Screen dimensions shared by both games.
pub const SCREEN_WIDTH: usize = 64;
pub const SCREEN_HEIGHT: usize = 64;
/// Size of the inspectable memory window exposed by both games.
pub const MEMORY_SIZE: usize = 128;

/// Magic prefix for snapshot blobs.
pub const SNAPSHOT_MAGIC: &[u8; 8] = b"SCNSNAP1";

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("unknown game id `{0}`")]
    UnknownGame(String),
    #[error("unknown button `{0}`")]
    UnknownButton(String),
    #[error("snapshot error: {0}")]
    Snapshot(String),
}

/// One of the eight controller buttons.
///
/// The declaration order is the canonical alphabet order used by the
/// textual controller-state form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Button {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
    A = 4,
    B = 5,
    Start = 6,
    Select = 7,
}

impl Button {
    pub const ALL: [Button; 8] = [
        Button::Up,
        Button::Down,
        Button::Left,
        Button::Right,
        Button::A,
        Button::B,
        Button::Start,
        Button::Select,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Button::Up => "UP",
            Button::Down => "DOWN",
            Button::Left => "LEFT",
            Button::Right => "RIGHT",
            Button::A => "A",
            Button::B => "B",
            Button::Start => "START",
            Button::Select => "SELECT",
        }
    }
}

impl FromStr for Button {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "UP" => Ok(Button::Up),
            "DOWN" => Ok(Button::Down),
            "LEFT" => Ok(Button::Left),
            "RIGHT" => Ok(Button::Right),
            "A" => Ok(Button::A),
            "B" => Ok(Button::B),
            "START" => Ok(Button::Start),
            "SELECT" => Ok(Button::Select),
            other => Err(EnvError::UnknownButton(other.to_string())),
        }
    }
}

/// A set of simultaneously pressed buttons for one held input segment.
///
/// The canonical textual form lists pressed buttons in alphabet order
/// joined by `+`, or `-` for the empty set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ControllerState(u8);

impl ControllerState {
    pub const EMPTY: ControllerState = ControllerState(0);

    pub fn new<I: IntoIterator<Item = Button>>(buttons: I) -> Self {
        let mut bits = 0u8;
        for b in buttons {
            bits |= 1 << b as u8;
        }
        ControllerState(bits)
    }

    pub fn pressed(self, b: Button) -> bool {
        self.0 & (1 << b as u8) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn with(self, b: Button) -> Self {
        ControllerState(self.0 | (1 << b as u8))
    }

    pub fn buttons(self) -> impl Iterator<Item = Button> {
        Button::ALL.into_iter().filter(move |b| self.pressed(*b))
    }
}

impl fmt::Display for ControllerState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("-");
        }
        let mut first = true;
        for b in self.buttons() {
            if !first {
                f.write_str("+")?;
            }
            f.write_str(b.name())?;
            first = false;
        }
        Ok(())
    }
}

impl FromStr for ControllerState {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "-" {
            return Ok(ControllerState::EMPTY);
        }
        let mut state = ControllerState::EMPTY;
        for token in s.split('+') {
            state = state.with(token.parse()?);
        }
        Ok(state)
    }
}

/// Identifies one of the built-in games.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GameId {
    GridQuest,
    ColorCavern,
}

impl GameId {
    pub const ALL: [GameId; 2] = [GameId::GridQuest, GameId::ColorCavern];

    pub fn name(self) -> &'static str {
        match self {
            GameId::GridQuest => "gridquest",
            GameId::ColorCavern => "colorcavern",
        }
    }
}

impl fmt::Display for GameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GameId {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gridquest" => Ok(GameId::GridQuest),
            "colorcavern" => Ok(GameId::ColorCavern),
            other => Err(EnvError::UnknownGame(other.to_string())),
        }
    }
}

/// A 64x64 RGB frame, row-major, 8 bits per channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Screenshot {
    pixels: Vec<u8>,
}

impl Screenshot {
    pub(crate) fn filled(r: u8, g: u8, b: u8) -> Self {
        let mut pixels = Vec::with_capacity(SCREEN_WIDTH * SCREEN_HEIGHT * 3);
        for _ in 0..SCREEN_WIDTH * SCREEN_HEIGHT {
            pixels.extend_from_slice(&[r, g, b]);
        }
        Screenshot { pixels }
    }

    /// Builds a screenshot from raw row-major RGB bytes.
    pub fn from_rgb(pixels: Vec<u8>) -> Option<Self> {
        (pixels.len() == SCREEN_WIDTH * SCREEN_HEIGHT * 3).then_some(Screenshot { pixels })
    }

    pub fn width(&self) -> usize {
        SCREEN_WIDTH
    }

    pub fn height(&self) -> usize {
        SCREEN_HEIGHT
    }

    pub fn rgb_bytes(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> (u8, u8, u8) {
        let i = (y * SCREEN_WIDTH + x) * 3;
        (self.pixels[i], self.pixels[i + 1], self.pixels[i + 2])
    }

    pub(crate) fn fill_rect(&mut self, x: usize, y: usize, w: usize, h: usize, rgb: (u8, u8, u8)) {
        for yy in y..(y + h).min(SCREEN_HEIGHT) {
            for xx in x..(x + w).min(SCREEN_WIDTH) {
                let i = (yy * SCREEN_WIDTH + xx) * 3;
                self.pixels[i] = rgb.0;
                self.pixels[i + 1] = rgb.1;
                self.pixels[i + 2] = rgb.2;
            }
        }
    }
}

/// Complete mutable simulation state of one booted game.
///
/// The static game definitions (room layouts, palettes, demo scripts) are
/// immutable module data and are not part of the state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvState {
    inner: StateInner,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum StateInner {
    GridQuest(gridquest::State),
    ColorCavern(colorcavern::State),
}

/// Boots a game into its initial state (frame counter zero, no entropy).
pub fn boot(game: GameId) -> EnvState {
    let inner = match game {
        GameId::GridQuest => StateInner::GridQuest(gridquest::State::boot()),
        GameId::ColorCavern => StateInner::ColorCavern(colorcavern::State::boot()),
    };
    EnvState { inner }
}

impl EnvState {
    pub fn game(&self) -> GameId {
        match &self.inner {
            StateInner::GridQuest(_) => GameId::GridQuest,
            StateInner::ColorCavern(_) => GameId::ColorCavern,
        }
    }

    /// Frames elapsed since boot.
    pub fn frame_counter(&self) -> u32 {
        match &self.inner {
            StateInner::GridQuest(s) => s.frame_counter,
            StateInner::ColorCavern(s) => s.frame_counter,
        }
    }

    /// Advances the simulation by `frames` frames with `input` held
    /// throughout. Every button is legal in every state; buttons a scene
    /// does not map are ignored.
    pub fn step(&mut self, input: ControllerState, frames: u32) {
        for _ in 0..frames {
            match &mut self.inner {
                StateInner::GridQuest(s) => s.step_frame(input),
                StateInner::ColorCavern(s) => s.step_frame(input),
            }
        }
    }

    /// Renders the current frame. Pure function of the state.
    pub fn render(&self) -> Screenshot {
        match &self.inner {
            StateInner::GridQuest(s) => s.render(),
            StateInner::ColorCavern(s) => s.render(),
        }
    }

    /// The 128-byte inspectable memory window. Byte 0 is always the scene id.
    pub fn memory(&self) -> [u8; MEMORY_SIZE] {
        match &self.inner {
            StateInner::GridQuest(s) => s.memory(),
            StateInner::ColorCavern(s) => s.memory(),
        }
    }

    /// Scene oracle: the scene id held in memory byte 0.
    pub fn scene_byte(&self) -> u8 {
        self.memory()[0]
    }

    /// Serializes the state into a versioned snapshot blob.
    pub fn save_snapshot(&self) -> Vec<u8> {
        let (id, body) = match &self.inner {
            StateInner::GridQuest(s) => (GameId::GridQuest, s.to_bytes()),
            StateInner::ColorCavern(s) => (GameId::ColorCavern, s.to_bytes()),
        };
        let id_bytes = id.name().as_bytes();
        let mut blob = Vec::with_capacity(8 + 4 + id_bytes.len() + 4 + body.len());
        blob.extend_from_slice(SNAPSHOT_MAGIC);
        blob.extend_from_slice(&(id_bytes.len() as u32).to_le_bytes());
        blob.extend_from_slice(id_bytes);
        blob.extend_from_slice(&(body.len() as u32).to_le_bytes());
        blob.extend_from_slice(&body);
        blob
    }

    /// Restores a state from a snapshot blob. Loading consumes no gameplay
    /// frames; the restored state behaves identically to the saved one.
    pub fn load_snapshot(blob: &[u8]) -> Result<EnvState, EnvError> {
        let err = |msg: &str| EnvError::Snapshot(msg.to_string());
        if blob.len() < 12 {
            return Err(err("blob truncated before header"));
        }
        if &blob[..8] != SNAPSHOT_MAGIC {
            return Err(err("bad magic"));
        }
        let id_len = u32::from_le_bytes(blob[8..12].try_into().unwrap()) as usize;
        let id_end = 12 + id_len;
        if blob.len() < id_end + 4 {
            return Err(err("blob truncated in game id"));
        }
        let id_str = std::str::from_utf8(&blob[12..id_end]).map_err(|_| err("game id not utf-8"))?;
        let game: GameId = id_str
            .parse()
            .map_err(|_| err(&format!("unknown game id `{id_str}`")))?;
        let body_len = u32::from_le_bytes(blob[id_end..id_end + 4].try_into().unwrap()) as usize;
        let body = &blob[id_end + 4..];
        if body.len() != body_len {
            return Err(err("state payload length mismatch"));
        }
        let inner = match game {
            GameId::GridQuest => StateInner::GridQuest(
                gridquest::State::from_bytes(body).ok_or_else(|| err("bad gridquest payload"))?,
            ),
            GameId::ColorCavern => StateInner::ColorCavern(
                colorcavern::State::from_bytes(body)
                    .ok_or_else(|| err("bad colorcavern payload"))?,
            ),
        };
        Ok(EnvState { inner })
    }
}

/// Horizontal/vertical movement intent encoded by the held arrows.
pub(crate) fn dir_delta(input: ControllerState) -> (i8, i8) {
    let dx = input.pressed(Button::Right) as i8 - input.pressed(Button::Left) as i8;
    let dy = input.pressed(Button::Down) as i8 - input.pressed(Button::Up) as i8;
    (dx, dy)
}
