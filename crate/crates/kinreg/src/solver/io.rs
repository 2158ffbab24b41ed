//! Snapshot and summary persistence.
//!
//! Binary snapshot layout (all integers little-endian `u32`, reals
//! little-endian `f64`):
//!
//! ```text
//!   bytes 0..4    magic "KRG1"
//!   u32           spatial dimension d
//!   d × u32       cells per axis
//!   u32           snapshot count
//!   then          count · Π(cells) reals, row-major, snapshots in order
//! ```
//!
//! After the payload an optional metadata trailer may follow: the marker
//! line `KRGMETA\n` and sorted `key=value\n` pairs (model tag, provenance,
//! snapshot times, config hash). Readers that stop after the payload stay
//! compatible; our reader parses the trailer when present.
//!
//! All writes go through a temp-file-then-rename so interrupted runs never
//! leave half-written files behind.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::Field;

use super::SolutionField;

const MAGIC: &[u8; 4] = b"KRG1";
const META_MARK: &[u8] = b"KRGMETA\n";

/// Write `bytes` to `path` atomically (temp file in the same directory,
/// then rename).
pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::Builder::new()
        .prefix(".kinreg-tmp-")
        .tempfile_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

/// Serialize a solution (snapshots plus metadata trailer) to `path`.
/// `extra` appends or overrides metadata entries, e.g. a config hash.
pub fn write_snapshots(path: &Path, solution: &SolutionField, extra: &[(&str, String)]) -> Result<()> {
    let grid = &solution.grid;
    let mut meta: BTreeMap<String, String> = BTreeMap::new();
    meta.insert("model".into(), solution.model_tag.clone());
    meta.insert("path_id".into(), solution.path_id.to_string());
    if let Some(seed) = solution.noise_seed {
        meta.insert("noise_seed".into(), seed.to_string());
    }
    meta.insert("box".into(), format!("{:?}", grid.half_width));
    meta.insert("t_final".into(), format!("{:?}", grid.t_final));
    meta.insert("cfl".into(), format!("{:?}", grid.cfl_factor));
    meta.insert(
        "times".into(),
        solution
            .times
            .iter()
            .map(|t| format!("{t:?}"))
            .collect::<Vec<_>>()
            .join(","),
    );
    for (k, v) in extra {
        meta.insert((*k).to_string(), v.clone());
    }
    for (k, v) in &meta {
        if k.contains('=') || k.contains('\n') || v.contains('\n') {
            return Err(Error::InvalidArgument(format!(
                "metadata entry {k:?} contains reserved characters"
            )));
        }
    }

    let cells: usize = grid.nx.iter().product();
    let mut buf =
        Vec::with_capacity(16 + 4 * grid.nx.len() + solution.snapshots.len() * cells * 8 + 256);
    buf.extend_from_slice(MAGIC);
    push_u32(&mut buf, grid.d as u32);
    for &n in &grid.nx {
        push_u32(&mut buf, n as u32);
    }
    push_u32(&mut buf, solution.snapshots.len() as u32);
    for snap in &solution.snapshots {
        for &v in snap.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf.extend_from_slice(META_MARK);
    for (k, v) in &meta {
        buf.extend_from_slice(k.as_bytes());
        buf.push(b'=');
        buf.extend_from_slice(v.as_bytes());
        buf.push(b'\n');
    }
    atomic_write(path, &buf)
}

/// A deserialized snapshot file.
#[derive(Debug, Clone)]
pub struct SnapshotFile {
    pub shape: Vec<usize>,
    pub snapshots: Vec<Field>,
    pub metadata: BTreeMap<String, String>,
}

impl SnapshotFile {
    /// Snapshot times from the metadata trailer, if recorded.
    pub fn times(&self) -> Option<Vec<f64>> {
        let raw = self.metadata.get("times")?;
        raw.split(',').map(|s| s.parse::<f64>().ok()).collect()
    }

    /// Box half-width from the metadata trailer, if recorded.
    pub fn half_width(&self) -> Option<f64> {
        self.metadata.get("box")?.parse().ok()
    }
}

fn bad(path: &Path, message: impl Into<String>) -> Error {
    Error::BadSnapshot {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn take_u32(path: &Path, bytes: &[u8], pos: &mut usize) -> Result<u32> {
    let end = *pos + 4;
    if end > bytes.len() {
        return Err(bad(path, "truncated header"));
    }
    let v = u32::from_le_bytes(bytes[*pos..end].try_into().unwrap());
    *pos = end;
    Ok(v)
}

/// Parse a snapshot file written by [`write_snapshots`] (the metadata
/// trailer is optional).
pub fn read_snapshots(path: &Path) -> Result<SnapshotFile> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(bad(path, "missing KRG1 magic"));
    }
    let mut pos = 4usize;
    let d = take_u32(path, &bytes, &mut pos)? as usize;
    if !(1..=2).contains(&d) {
        return Err(bad(path, format!("unsupported dimension {d}")));
    }
    let mut shape = Vec::with_capacity(d);
    for _ in 0..d {
        let n = take_u32(path, &bytes, &mut pos)? as usize;
        if n == 0 {
            return Err(bad(path, "zero cells on an axis"));
        }
        shape.push(n);
    }
    let count = take_u32(path, &bytes, &mut pos)? as usize;
    let cells: usize = shape.iter().product();
    let payload = count
        .checked_mul(cells)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| bad(path, "snapshot payload overflows"))?;
    if bytes.len() < pos + payload {
        return Err(bad(
            path,
            format!(
                "payload truncated: need {payload} bytes, have {}",
                bytes.len() - pos
            ),
        ));
    }
    let mut snapshots = Vec::with_capacity(count);
    for s in 0..count {
        let mut data = Vec::with_capacity(cells);
        for c in 0..cells {
            let off = pos + (s * cells + c) * 8;
            data.push(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
        }
        snapshots.push(Field::from_vec(&shape, data)?);
    }
    pos += payload;

    let mut metadata = BTreeMap::new();
    if pos < bytes.len() {
        let rest = &bytes[pos..];
        if !rest.starts_with(META_MARK) {
            return Err(bad(path, "unexpected bytes after payload"));
        }
        let text = std::str::from_utf8(&rest[META_MARK.len()..])
            .map_err(|_| bad(path, "metadata trailer is not UTF-8"))?;
        for line in text.lines() {
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(path, format!("malformed metadata line {line:?}")))?;
            metadata.insert(k.to_string(), v.to_string());
        }
    }
    Ok(SnapshotFile {
        shape,
        snapshots,
        metadata,
    })
}

/// Write the per-snapshot summary (time, mass, extrema, L² norm) as CSV.
pub fn write_summary_csv(path: &Path, solution: &SolutionField) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "mass", "min", "max", "l2"])?;
    for row in solution.summary() {
        w.write_record([
            format!("{:?}", row.t),
            format!("{:?}", row.mass),
            format!("{:?}", row.min),
            format!("{:?}", row.max),
            format!("{:?}", row.l2),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv buffer: {e}")))?;
    atomic_write(path, &bytes)
}
