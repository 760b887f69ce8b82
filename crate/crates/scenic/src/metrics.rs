//! Spread-of-points metrics over embedded moments.
//!
//! Two scores quantify how widely an exploration run has spread through
//! embedding space: the bounding-box size (sum of per-dimension extents)
//! and the nuclear norm of the population covariance matrix. The nuclear
//! norm equals the covariance trace, i.e. the sum of per-dimension
//! population variances, so it never needs an eigendecomposition; tests
//! certify the equivalence against one anyway.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::archive::Archive;
use crate::embed::{EmbedError, Embedder};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("no points accumulated")]
    Empty,
    #[error("dimension mismatch: accumulator is {expected}, point is {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value {value} in dimension {dim}")]
    NonFinite { dim: usize, value: f64 },
    #[error("series row {row}: {msg}")]
    Csv { row: usize, msg: String },
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Which spread metric to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    BboxSum,
    NuclearNorm,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::BboxSum, Metric::NuclearNorm];

    pub fn name(self) -> &'static str {
        match self {
            Metric::BboxSum => "bbox-sum",
            Metric::NuclearNorm => "nuclear-norm",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bbox-sum" => Ok(Metric::BboxSum),
            "nuclear-norm" => Ok(Metric::NuclearNorm),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}

/// Streaming accumulator: per-dimension extremes plus Welford mean/M2,
/// which keeps the variance sums stable enough for tight oracle bounds.
#[derive(Debug, Clone)]
pub struct SpreadAccumulator {
    count: u64,
    mins: Vec<f64>,
    maxs: Vec<f64>,
    means: Vec<f64>,
    m2s: Vec<f64>,
}

impl SpreadAccumulator {
    pub fn new(dims: usize) -> SpreadAccumulator {
        SpreadAccumulator {
            count: 0,
            mins: vec![f64::INFINITY; dims],
            maxs: vec![f64::NEG_INFINITY; dims],
            means: vec![0.0; dims],
            m2s: vec![0.0; dims],
        }
    }

    pub fn dims(&self) -> usize {
        self.means.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, point: &[f64]) -> Result<(), MetricError> {
        if point.len() != self.dims() {
            return Err(MetricError::DimensionMismatch {
                expected: self.dims(),
                got: point.len(),
            });
        }
        if let Some(dim) = point.iter().position(|v| !v.is_finite()) {
            return Err(MetricError::NonFinite {
                dim,
                value: point[dim],
            });
        }
        self.count += 1;
        let n = self.count as f64;
        for (d, &x) in point.iter().enumerate() {
            if x < self.mins[d] {
                self.mins[d] = x;
            }
            if x > self.maxs[d] {
                self.maxs[d] = x;
            }
            let delta = x - self.means[d];
            self.means[d] += delta / n;
            self.m2s[d] += delta * (x - self.means[d]);
        }
        Ok(())
    }

    /// Sum over dimensions of (max - min).
    pub fn bbox_sum(&self) -> Result<f64, MetricError> {
        if self.count == 0 {
            return Err(MetricError::Empty);
        }
        Ok(self
            .mins
            .iter()
            .zip(&self.maxs)
            .map(|(lo, hi)| hi - lo)
            .sum())
    }

    /// Nuclear norm of the population (1/N) covariance matrix. The matrix
    /// is positive semi-definite, so this is its trace: the sum of
    /// per-dimension population variances.
    pub fn nuclear_norm(&self) -> Result<f64, MetricError> {
        if self.count == 0 {
            return Err(MetricError::Empty);
        }
        Ok(self.m2s.iter().map(|m2| m2 / self.count as f64).sum())
    }

    pub fn value(&self, metric: Metric) -> Result<f64, MetricError> {
        match metric {
            Metric::BboxSum => self.bbox_sum(),
            Metric::NuclearNorm => self.nuclear_norm(),
        }
    }
}

/// A metric value after each successive moment, keyed by gameplay frames.
pub type Series = Vec<(u64, f64)>;

/// Embeds each moment of the archive in order and records every requested
/// metric after every push. One embedding pass serves all metrics.
pub fn series_from_archive(
    archive: &Archive,
    embedder: &dyn Embedder,
    metrics: &[Metric],
) -> Result<Vec<Series>, MetricError> {
    let mut acc = SpreadAccumulator::new(embedder.dims());
    let mut series: Vec<Series> = vec![Vec::with_capacity(archive.len()); metrics.len()];
    for moment in &archive.moments {
        let v = embedder.embed(&moment.screen)?;
        acc.push(&v)?;
        for (slot, &metric) in series.iter_mut().zip(metrics) {
            slot.push((moment.gameplay_frames, acc.value(metric)?));
        }
    }
    Ok(series)
}

/// Series CSV: `gameplay_frames,value` header then one row per point.
/// Values print in Rust's shortest round-trip form, so rereading is exact.
pub fn format_series_csv(series: &[(u64, f64)]) -> String {
    let mut out = String::from("gameplay_frames,value\n");
    for (frames, value) in series {
        out.push_str(&format!("{frames},{value}\n"));
    }
    out
}

pub fn parse_series_csv(text: &str) -> Result<Series, MetricError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "gameplay_frames,value")) => {}
        Some((_, other)) => {
            return Err(MetricError::Csv {
                row: 1,
                msg: format!("bad header `{other}`"),
            })
        }
        None => {
            return Err(MetricError::Csv {
                row: 1,
                msg: "empty file".to_string(),
            })
        }
    }
    let mut series = Vec::new();
    for (idx, line) in lines {
        let row = idx + 1;
        if line.is_empty() {
            continue;
        }
        let Some((frames, value)) = line.split_once(',') else {
            return Err(MetricError::Csv {
                row,
                msg: "expected two comma-separated fields".to_string(),
            });
        };
        let frames: u64 = frames.parse().map_err(|_| MetricError::Csv {
            row,
            msg: format!("bad frame count `{frames}`"),
        })?;
        let value: f64 = value.parse().map_err(|_| MetricError::Csv {
            row,
            msg: format!("bad value `{value}`"),
        })?;
        series.push((frames, value));
    }
    Ok(series)
}
