//! Moment archives: the durable record of an exploration run.
//!
//! An archive is a directory holding a manifest, one JSONL row per moment,
//! and per-moment binary payloads: the screenshot as a binary PPM, the
//! 128-byte memory window, and (when the strategy kept one) the state
//! snapshot. A sha256 content hash over the logical content lets readers
//! detect tampering or partial writes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::env::{GameId, Screenshot, MEMORY_SIZE, SCREEN_HEIGHT, SCREEN_WIDTH};

pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("cannot read {file}: {source}")]
    Io {
        file: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {file}: {msg}")]
    Malformed { file: PathBuf, msg: String },
    #[error("unsupported archive version {found} in {file} (expected {ARCHIVE_VERSION})")]
    Version { file: PathBuf, found: u32 },
    #[error("content hash mismatch in {file}: manifest {expected}, computed {actual}")]
    HashMismatch {
        file: PathBuf,
        expected: String,
        actual: String,
    },
}

fn io_err(file: &Path, source: std::io::Error) -> ArchiveError {
    if source.kind() == std::io::ErrorKind::NotFound {
        ArchiveError::MissingFile(file.to_path_buf())
    } else {
        ArchiveError::Io {
            file: file.to_path_buf(),
            source,
        }
    }
}

fn malformed(file: &Path, msg: impl Into<String>) -> ArchiveError {
    ArchiveError::Malformed {
        file: file.to_path_buf(),
        msg: msg.into(),
    }
}

/// Where a moment came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Strategy identifier, e.g. `attract`, `chaos-monkey`, `rrt`.
    pub strategy: String,
    /// Tree node that produced the moment, for tree-based strategies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<u64>,
    /// 1-based trace line the moment fell inside, for trace replay.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_line: Option<u32>,
}

impl Provenance {
    pub fn strategy(strategy: &str) -> Provenance {
        Provenance {
            strategy: strategy.to_string(),
            node: None,
            trace_line: None,
        }
    }
}

/// One observed instant of gameplay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Moment {
    /// Position in the archive, 0-based and dense.
    pub index: u64,
    /// Game frames of play that preceded this moment on its own timeline.
    pub gameplay_frames: u64,
    pub screen: Screenshot,
    pub memory: [u8; MEMORY_SIZE],
    pub provenance: Provenance,
    /// Raw snapshot blob, kept only by strategies that branch from moments.
    pub snapshot: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Archive {
    pub game: GameId,
    pub moments: Vec<Moment>,
}

#[derive(Serialize, Deserialize)]
struct ManifestRecord {
    version: u32,
    game: String,
    moments: u64,
    content_hash: String,
}

#[derive(Serialize, Deserialize)]
struct MomentRecord {
    index: u64,
    gameplay_frames: u64,
    screen: String,
    memory: String,
    provenance: Provenance,
    snapshot: Option<String>,
}

impl Archive {
    pub fn new(game: GameId) -> Archive {
        Archive {
            game,
            moments: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.moments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moments.is_empty()
    }

    /// Appends a moment, assigning the next dense index.
    pub fn push(
        &mut self,
        gameplay_frames: u64,
        screen: Screenshot,
        memory: [u8; MEMORY_SIZE],
        provenance: Provenance,
        snapshot: Option<Vec<u8>>,
    ) -> u64 {
        let index = self.moments.len() as u64;
        self.moments.push(Moment {
            index,
            gameplay_frames,
            screen,
            memory,
            provenance,
            snapshot,
        });
        index
    }

    /// (screenshot, memory) pairs in archive order, one per moment.
    pub fn training_pairs(&self) -> impl Iterator<Item = (&Screenshot, &[u8; MEMORY_SIZE])> {
        self.moments.iter().map(|m| (&m.screen, &m.memory))
    }

    /// Hex sha256 over the logical content: the game id and, per moment,
    /// its index, timeline position, pixels, memory, provenance, and
    /// snapshot. File names and layout do not participate.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.game.name().as_bytes());
        for m in &self.moments {
            h.update(m.index.to_le_bytes());
            h.update(m.gameplay_frames.to_le_bytes());
            h.update(m.screen.rgb_bytes());
            h.update(m.memory);
            h.update(m.provenance.strategy.as_bytes());
            h.update([0u8]);
            match m.provenance.node {
                Some(n) => h.update(n.to_le_bytes()),
                None => h.update(b"-"),
            }
            h.update([0u8]);
            match m.provenance.trace_line {
                Some(n) => h.update(n.to_le_bytes()),
                None => h.update(b"-"),
            }
            h.update([0u8]);
            match &m.snapshot {
                Some(blob) => {
                    h.update([1u8]);
                    h.update(blob);
                }
                None => h.update([0u8]),
            }
        }
        let mut hex = String::with_capacity(64);
        for byte in h.finalize() {
            write!(hex, "{byte:02x}").unwrap();
        }
        hex
    }

    pub fn write_dir(&self, dir: &Path) -> Result<(), ArchiveError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        fs::create_dir_all(dir.join("screens")).map_err(|e| io_err(dir, e))?;
        fs::create_dir_all(dir.join("mem")).map_err(|e| io_err(dir, e))?;
        if self.moments.iter().any(|m| m.snapshot.is_some()) {
            fs::create_dir_all(dir.join("snapshots")).map_err(|e| io_err(dir, e))?;
        }

        let mut jsonl = String::new();
        for m in &self.moments {
            let screen_rel = format!("screens/{:06}.ppm", m.index);
            let mem_rel = format!("mem/{:06}.bin", m.index);
            let snap_rel = m.snapshot.as_ref().map(|_| format!("snapshots/{:06}.snp", m.index));

            let screen_path = dir.join(&screen_rel);
            fs::write(&screen_path, encode_ppm(&m.screen)).map_err(|e| io_err(&screen_path, e))?;
            let mem_path = dir.join(&mem_rel);
            fs::write(&mem_path, m.memory).map_err(|e| io_err(&mem_path, e))?;
            if let (Some(blob), Some(rel)) = (&m.snapshot, &snap_rel) {
                let snap_path = dir.join(rel);
                fs::write(&snap_path, blob).map_err(|e| io_err(&snap_path, e))?;
            }

            let record = MomentRecord {
                index: m.index,
                gameplay_frames: m.gameplay_frames,
                screen: screen_rel,
                memory: mem_rel,
                provenance: m.provenance.clone(),
                snapshot: snap_rel,
            };
            jsonl.push_str(&serde_json::to_string(&record).expect("moment record serializes"));
            jsonl.push('\n');
        }
        let moments_path = dir.join("moments.jsonl");
        fs::write(&moments_path, jsonl).map_err(|e| io_err(&moments_path, e))?;

        let manifest = ManifestRecord {
            version: ARCHIVE_VERSION,
            game: self.game.name().to_string(),
            moments: self.moments.len() as u64,
            content_hash: self.content_hash(),
        };
        let manifest_path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&manifest_path, text).map_err(|e| io_err(&manifest_path, e))?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Archive, ArchiveError> {
        let manifest_path = dir.join("manifest.json");
        let manifest_text =
            fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
        let manifest: ManifestRecord = serde_json::from_str(&manifest_text)
            .map_err(|e| malformed(&manifest_path, e.to_string()))?;
        if manifest.version != ARCHIVE_VERSION {
            return Err(ArchiveError::Version {
                file: manifest_path,
                found: manifest.version,
            });
        }
        let game: GameId = manifest
            .game
            .parse()
            .map_err(|_| malformed(&manifest_path, format!("unknown game `{}`", manifest.game)))?;

        let moments_path = dir.join("moments.jsonl");
        let moments_text =
            fs::read_to_string(&moments_path).map_err(|e| io_err(&moments_path, e))?;
        let mut archive = Archive::new(game);
        for (lineno, line) in moments_text.lines().enumerate() {
            let record: MomentRecord = serde_json::from_str(line)
                .map_err(|e| malformed(&moments_path, format!("line {}: {}", lineno + 1, e)))?;
            if record.index != lineno as u64 {
                return Err(malformed(
                    &moments_path,
                    format!("line {}: index {} out of order", lineno + 1, record.index),
                ));
            }

            let screen_path = dir.join(&record.screen);
            let screen_bytes = fs::read(&screen_path).map_err(|e| io_err(&screen_path, e))?;
            let screen = decode_ppm(&screen_bytes)
                .map_err(|msg| malformed(&screen_path, msg))?;

            let mem_path = dir.join(&record.memory);
            let mem_bytes = fs::read(&mem_path).map_err(|e| io_err(&mem_path, e))?;
            let memory: [u8; MEMORY_SIZE] = mem_bytes
                .as_slice()
                .try_into()
                .map_err(|_| malformed(&mem_path, format!("expected {MEMORY_SIZE} bytes")))?;

            let snapshot = match &record.snapshot {
                Some(rel) => {
                    let snap_path = dir.join(rel);
                    Some(fs::read(&snap_path).map_err(|e| io_err(&snap_path, e))?)
                }
                None => None,
            };

            archive.moments.push(Moment {
                index: record.index,
                gameplay_frames: record.gameplay_frames,
                screen,
                memory,
                provenance: record.provenance,
                snapshot,
            });
        }
        if archive.moments.len() as u64 != manifest.moments {
            return Err(malformed(
                &moments_path,
                format!(
                    "manifest says {} moments, file has {}",
                    manifest.moments,
                    archive.moments.len()
                ),
            ));
        }

        let actual = archive.content_hash();
        if actual != manifest.content_hash {
            return Err(ArchiveError::HashMismatch {
                file: manifest_path,
                expected: manifest.content_hash,
                actual,
            });
        }
        Ok(archive)
    }
}

/// Binary PPM (P6), 8 bits per channel.
pub fn encode_ppm(screen: &Screenshot) -> Vec<u8> {
    let mut out = format!("P6\n{SCREEN_WIDTH} {SCREEN_HEIGHT}\n255\n").into_bytes();
    out.extend_from_slice(screen.rgb_bytes());
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<Screenshot, String> {
    let header = format!("P6\n{SCREEN_WIDTH} {SCREEN_HEIGHT}\n255\n").into_bytes();
    if bytes.len() < header.len() || bytes[..header.len()] != header[..] {
        return Err("not a 64x64 binary PPM".to_string());
    }
    let body = &bytes[header.len()..];
    Screenshot::from_rgb(body.to_vec())
        .ok_or_else(|| format!("expected {} pixel bytes, got {}", 64 * 64 * 3, body.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{boot, ControllerState};

    fn sample_archive() -> Archive {
        let mut state = boot(GameId::GridQuest);
        let mut archive = Archive::new(GameId::GridQuest);
        for i in 0..5u64 {
            state.step(ControllerState::EMPTY, 30);
            let snapshot = (i % 2 == 0).then(|| state.save_snapshot());
            let mut prov = Provenance::strategy("attract");
            if i == 3 {
                prov.node = Some(7);
            }
            archive.push((i + 1) * 30, state.render(), state.memory(), prov, snapshot);
        }
        archive
    }

    #[test]
    fn ppm_round_trip() {
        let screen = boot(GameId::GridQuest).render();
        let encoded = encode_ppm(&screen);
        assert!(encoded.starts_with(b"P6\n64 64\n255\n"));
        assert_eq!(decode_ppm(&encoded).unwrap(), screen);
        assert!(decode_ppm(&encoded[..100]).is_err());
    }

    #[test]
    fn archive_round_trip_is_exact() {
        let archive = sample_archive();
        let dir = tempfile::tempdir().unwrap();
        archive.write_dir(dir.path()).unwrap();
        let reread = Archive::read_dir(dir.path()).unwrap();
        assert_eq!(reread, archive);
        assert_eq!(reread.content_hash(), archive.content_hash());

        // Writing the reread archive again produces identical bytes.
        let dir2 = tempfile::tempdir().unwrap();
        reread.write_dir(dir2.path()).unwrap();
        let a = fs::read(dir.path().join("moments.jsonl")).unwrap();
        let b = fs::read(dir2.path().join("moments.jsonl")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_file_is_named() {
        let archive = sample_archive();
        let dir = tempfile::tempdir().unwrap();
        archive.write_dir(dir.path()).unwrap();
        fs::remove_file(dir.path().join("screens/000002.ppm")).unwrap();
        let err = Archive::read_dir(dir.path()).unwrap_err();
        assert!(matches!(err, ArchiveError::MissingFile(ref p) if p.ends_with("screens/000002.ppm")),
            "unexpected error: {err}");
    }

    #[test]
    fn corrupted_memory_fails_hash_check() {
        let archive = sample_archive();
        let dir = tempfile::tempdir().unwrap();
        archive.write_dir(dir.path()).unwrap();
        let mem_path = dir.path().join("mem/000001.bin");
        let mut bytes = fs::read(&mem_path).unwrap();
        bytes[0] ^= 0x01;
        fs::write(&mem_path, bytes).unwrap();
        let err = Archive::read_dir(dir.path()).unwrap_err();
        assert!(matches!(err, ArchiveError::HashMismatch { .. }), "unexpected error: {err}");
    }

    #[test]
    fn version_bump_is_rejected() {
        let archive = sample_archive();
        let dir = tempfile::tempdir().unwrap();
        archive.write_dir(dir.path()).unwrap();
        let manifest_path = dir.path().join("manifest.json");
        let text = fs::read_to_string(&manifest_path)
            .unwrap()
            .replace("\"version\": 1", "\"version\": 9");
        fs::write(&manifest_path, text).unwrap();
        let err = Archive::read_dir(dir.path()).unwrap_err();
        assert!(matches!(err, ArchiveError::Version { found: 9, .. }), "unexpected error: {err}");
    }

    #[test]
    fn training_pairs_follow_archive_order() {
        let archive = sample_archive();
        let pairs: Vec<_> = archive.training_pairs().collect();
        assert_eq!(pairs.len(), archive.len());
        assert_eq!(pairs[2].1, &archive.moments[2].memory);
    }
}
