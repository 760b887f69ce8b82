//! Input traces and the empirical action model fitted from them.
//!
//! A trace is a recorded sequence of held controller states. The text
//! format is line-oriented: a header naming the game, then one
//! `<buttons>|<frames>` line per held segment. `#` starts a comment line
//! and blank lines are skipped. Replaying a trace through its game stands
//! in for a human player.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use thiserror::Error;

use crate::archive::{Archive, Provenance};
use crate::env::{boot, ControllerState, GameId, HALF_SECOND_FRAMES};

pub const TRACE_HEADER_PREFIX: &str = "scenic-trace v1 game=";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cannot read {file}: {source}")]
    Io {
        file: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("action model: {0}")]
    Model(String),
    #[error("cadence must be positive")]
    ZeroCadence,
}

fn parse_err(line: usize, msg: impl Into<String>) -> TraceError {
    TraceError::Parse {
        line,
        msg: msg.into(),
    }
}

/// One held input segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub input: ControllerState,
    pub frames: u32,
    /// 1-based line this segment occupies in its source file. Traces built
    /// with [`Trace::push`] get the line they would occupy in a
    /// comment-free file.
    pub source_line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub game: GameId,
    pub segments: Vec<Segment>,
}

impl Trace {
    pub fn new(game: GameId) -> Trace {
        Trace {
            game,
            segments: Vec::new(),
        }
    }

    pub fn push(&mut self, input: ControllerState, frames: u32) {
        let source_line = self.segments.len() as u32 + 2;
        self.segments.push(Segment {
            input,
            frames,
            source_line,
        });
    }

    pub fn total_frames(&self) -> u64 {
        self.segments.iter().map(|s| s.frames as u64).sum()
    }

    /// Canonical text form: header plus one line per segment, LF endings.
    pub fn format(&self) -> String {
        let mut out = format!("{}{}\n", TRACE_HEADER_PREFIX, self.game.name());
        for seg in &self.segments {
            out.push_str(&format!("{}|{}\n", seg.input, seg.frames));
        }
        out
    }
}

pub fn parse_trace(text: &str) -> Result<Trace, TraceError> {
    let mut trace = None;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some(trace) = trace.as_mut() else {
            let Some(game_str) = line.strip_prefix(TRACE_HEADER_PREFIX) else {
                return Err(parse_err(
                    lineno,
                    format!("expected header `{TRACE_HEADER_PREFIX}<id>`"),
                ));
            };
            let game: GameId = game_str
                .parse()
                .map_err(|e| parse_err(lineno, format!("{e}")))?;
            trace = Some(Trace::new(game));
            continue;
        };
        let Some((buttons, frames)) = line.split_once('|') else {
            return Err(parse_err(lineno, "expected `<buttons>|<frames>`"));
        };
        let input: ControllerState = buttons
            .parse()
            .map_err(|e| parse_err(lineno, format!("{e}")))?;
        let frames: u32 = frames
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad frame count `{frames}`")))?;
        if frames == 0 {
            return Err(parse_err(lineno, "frame count must be positive"));
        }
        trace.segments.push(Segment {
            input,
            frames,
            source_line: lineno as u32,
        });
    }
    trace.ok_or_else(|| parse_err(1, "empty trace: missing header"))
}

pub fn load_trace(path: &Path) -> Result<Trace, TraceError> {
    let text = std::fs::read_to_string(path).map_err(|e| TraceError::Io {
        file: path.to_path_buf(),
        source: e,
    })?;
    parse_trace(&text)
}

/// Replays a trace from boot, extracting a moment every `cadence` frames.
/// The first moment lands after `cadence` frames of play; a trailing
/// partial window yields none.
pub fn playback(trace: &Trace, cadence: u32) -> Result<Archive, TraceError> {
    if cadence == 0 {
        return Err(TraceError::ZeroCadence);
    }
    let mut state = boot(trace.game);
    let mut archive = Archive::new(trace.game);
    let mut frames_done: u64 = 0;
    for seg in &trace.segments {
        for _ in 0..seg.frames {
            state.step(seg.input, 1);
            frames_done += 1;
            if frames_done % cadence as u64 == 0 {
                let mut prov = Provenance::strategy("replay");
                prov.trace_line = Some(seg.source_line);
                archive.push(frames_done, state.render(), state.memory(), prov, None);
            }
        }
    }
    Ok(archive)
}

/// Categorical distribution over controller states, fitted from traces.
///
/// Weights are raw window frequencies; deliberately no smoothing is
/// applied, so states a human never held are never sampled and rare ones
/// stay rare.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionModel {
    weights: BTreeMap<String, f64>,
}

impl ActionModel {
    pub fn weights(&self) -> &BTreeMap<String, f64> {
        &self.weights
    }

    pub fn weight(&self, input: ControllerState) -> f64 {
        self.weights.get(&input.to_string()).copied().unwrap_or(0.0)
    }

    /// Draws one controller state; one uniform variate per call.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> ControllerState {
        let total: f64 = self.weights.values().sum();
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut last = ControllerState::EMPTY;
        for (key, w) in &self.weights {
            acc += w;
            last = key.parse().expect("validated on construction");
            if u < acc {
                return last;
            }
        }
        // Floating-point edge: u landed on the accumulated total.
        last
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(&self.weights).expect("weights serialize");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<ActionModel, TraceError> {
        let weights: BTreeMap<String, f64> =
            serde_json::from_str(text).map_err(|e| TraceError::Model(e.to_string()))?;
        if weights.is_empty() {
            return Err(TraceError::Model("no actions".to_string()));
        }
        let mut any_positive = false;
        for (key, &w) in &weights {
            key.parse::<ControllerState>()
                .map_err(|e| TraceError::Model(format!("bad action `{key}`: {e}")))?;
            if !w.is_finite() || w < 0.0 {
                return Err(TraceError::Model(format!("bad weight for `{key}`: {w}")));
            }
            any_positive |= w > 0.0;
        }
        if !any_positive {
            return Err(TraceError::Model("all weights are zero".to_string()));
        }
        Ok(ActionModel { weights })
    }

    pub fn load(path: &Path) -> Result<ActionModel, TraceError> {
        let text = std::fs::read_to_string(path).map_err(|e| TraceError::Io {
            file: path.to_path_buf(),
            source: e,
        })?;
        ActionModel::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), TraceError> {
        std::fs::write(path, self.to_json()).map_err(|e| TraceError::Io {
            file: path.to_path_buf(),
            source: e,
        })
    }
}

/// Fits the action model by resampling traces to cadence-aligned windows:
/// each complete window contributes the controller state held at its first
/// frame. Trailing partial windows are dropped.
pub fn fit_action_model(traces: &[Trace], cadence: u32) -> Result<ActionModel, TraceError> {
    if cadence == 0 {
        return Err(TraceError::ZeroCadence);
    }
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut windows: u64 = 0;
    for trace in traces {
        let total = trace.total_frames();
        let complete = total / cadence as u64;
        let mut seg_iter = trace.segments.iter();
        let mut seg_end: u64 = 0;
        let mut current = ControllerState::EMPTY;
        for w in 0..complete {
            let frame = w * cadence as u64;
            while frame >= seg_end {
                let seg = seg_iter.next().expect("frame within trace length");
                current = seg.input;
                seg_end += seg.frames as u64;
            }
            *counts.entry(current.to_string()).or_insert(0) += 1;
        }
        windows += complete;
    }
    if windows == 0 {
        return Err(TraceError::Model(
            "traces contain no complete windows".to_string(),
        ));
    }
    let weights = counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / windows as f64))
        .collect();
    Ok(ActionModel { weights })
}

/// The default moment-extraction cadence used across the crate.
pub const DEFAULT_CADENCE: u32 = HALF_SECOND_FRAMES;
