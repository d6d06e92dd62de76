//! On-disk formats.
//!
//! Snapshot files (`snap_<step>.bin`), all little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `HGFSNAP\0` |
//! | 4 | format version (u32) |
//! | 4 | dimension (u32) |
//! | 12 | points per axis (3 × u32, unused axes 1) |
//! | 24 | spacing (3 × f64) |
//! | 24 | origin (3 × f64) |
//! | 8 | step (u64) |
//! | 8 | time (f64) |
//! | 4 | field count (u32) |
//!
//! then per field: an 8-byte zero-padded name, the component count (u32), and
//! `points × components` f64 values, point-major. Fields are written as `g`
//! then `h`.
//!
//! The text index lists one `step time file` line per snapshot under a
//! `hgf-snapshot-index <version>` header. Series files are newline-delimited
//! JSON; plot files are whitespace-separated columns with a `#` header.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use hgf_core::flow::Snapshot;

pub const SNAPSHOT_MAGIC: [u8; 8] = *b"HGFSNAP\0";
pub const FORMAT_VERSION: u32 = 1;
pub const INDEX_HEADER: &str = "hgf-snapshot-index";

/// Decoded snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFile {
    pub dim: u32,
    pub shape: [u32; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    pub step: u64,
    pub t: f64,
    pub fields: Vec<(String, u32, Vec<f64>)>,
}

pub fn encode_snapshot(s: &Snapshot) -> Vec<u8> {
    let g = s.g.field();
    let grid = g.grid();
    let mut b = Vec::with_capacity(96 + 16 * g.data().len());
    b.extend_from_slice(&SNAPSHOT_MAGIC);
    b.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    b.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    for n in grid.shape() {
        b.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for x in grid.spacing().into_iter().chain(grid.origin()) {
        b.extend_from_slice(&x.to_le_bytes());
    }
    b.extend_from_slice(&(s.step as u64).to_le_bytes());
    b.extend_from_slice(&s.t.to_le_bytes());
    b.extend_from_slice(&2u32.to_le_bytes());
    for (name, f) in [("g", g), ("h", s.h.field())] {
        let mut tag = [0u8; 8];
        tag[..name.len()].copy_from_slice(name.as_bytes());
        b.extend_from_slice(&tag);
        b.extend_from_slice(&(f.ncomp() as u32).to_le_bytes());
        for x in f.data() {
            b.extend_from_slice(&x.to_le_bytes());
        }
    }
    b
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> io::Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| invalid("truncated snapshot"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> io::Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> io::Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> io::Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn invalid(m: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, m.to_string())
}

pub fn decode_snapshot(bytes: &[u8]) -> io::Result<SnapshotFile> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != SNAPSHOT_MAGIC {
        return Err(invalid("bad snapshot magic"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(invalid(&format!("unsupported snapshot version {version}")));
    }
    let dim = r.u32()?;
    let shape = [r.u32()?, r.u32()?, r.u32()?];
    let spacing = [r.f64()?, r.f64()?, r.f64()?];
    let origin = [r.f64()?, r.f64()?, r.f64()?];
    let step = r.u64()?;
    let t = r.f64()?;
    let nfields = r.u32()?;
    let points: usize = shape.iter().map(|&n| n as usize).product();
    let mut fields = Vec::new();
    for _ in 0..nfields {
        let tag = r.take(8)?;
        let name = String::from_utf8_lossy(tag).trim_end_matches('\0').to_string();
        let ncomp = r.u32()?;
        let len = points.checked_mul(ncomp as usize).ok_or_else(|| invalid("field too large"))?;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(r.f64()?);
        }
        fields.push((name, ncomp, data));
    }
    if r.pos != bytes.len() {
        return Err(invalid("trailing bytes after snapshot"));
    }
    Ok(SnapshotFile { dim, shape, spacing, origin, step, t, fields })
}

pub fn snapshot_name(step: usize) -> String {
    format!("snap_{step:06}.bin")
}

/// Snapshot directory with its text index.
pub struct SnapshotWriter {
    dir: std::path::PathBuf,
    index: String,
}

impl SnapshotWriter {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(SnapshotWriter { dir: dir.to_path_buf(), index: format!("{INDEX_HEADER} {FORMAT_VERSION}\n") })
    }

    pub fn write(&mut self, s: &Snapshot) -> io::Result<()> {
        let name = snapshot_name(s.step);
        fs::write(self.dir.join(&name), encode_snapshot(s))?;
        writeln!(self.index, "{} {} {}", s.step, s.t, name).unwrap();
        Ok(())
    }

    pub fn finish(self) -> io::Result<()> {
        fs::write(self.dir.join("index.txt"), self.index)
    }
}

/// Parses an index file into `(step, t, file)` rows.
pub fn read_index(text: &str) -> io::Result<Vec<(u64, f64, String)>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| invalid("empty index"))?;
    if header != format!("{INDEX_HEADER} {FORMAT_VERSION}") {
        return Err(invalid("bad index header"));
    }
    lines
        .map(|l| {
            let mut it = l.split_whitespace();
            let step = it.next().and_then(|s| s.parse().ok());
            let t = it.next().and_then(|s| s.parse().ok());
            let file = it.next().map(str::to_string);
            match (step, t, file, it.next()) {
                (Some(s), Some(t), Some(f), None) => Ok((s, t, f)),
                _ => Err(invalid(&format!("bad index line {l:?}"))),
            }
        })
        .collect()
}

/// Newline-delimited JSON records, buffered and written at once.
#[derive(Default)]
pub struct Ndjson {
    buf: Vec<u8>,
}

impl Ndjson {
    pub fn push(&mut self, v: &serde_json::Value) {
        serde_json::to_writer(&mut self.buf, v).expect("json values always serialise");
        self.buf.push(b'\n');
    }

    pub fn write_to(&self, path: &Path) -> io::Result<()> {
        fs::write(path, &self.buf)
    }
}

/// Column file with a `#` header line.
pub fn write_columns(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> io::Result<()> {
    let mut s = format!("# {}\n", header.join(" "));
    for r in rows {
        let cells: Vec<String> = r.iter().map(|x| format!("{x:e}")).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use hgf_core::flow::FlowState;
    use hgf_core::presets::{default_grid, instantiate, MetricPreset};

    fn snapshot() -> Snapshot {
        let p = MetricPreset::RandomSmooth { epsilon: 0.1, seed: 4 };
        let grid = default_grid(&p, 2, 6).unwrap();
        let (g, h) = instantiate(&p, &grid, 0.0).unwrap();
        Snapshot::capture(&FlowState::new(g, h).unwrap()).unwrap()
    }

    #[test]
    fn snapshot_round_trip() {
        let s = snapshot();
        let bytes = encode_snapshot(&s);
        let f = decode_snapshot(&bytes).unwrap();
        assert_eq!((f.dim, f.shape, f.step, f.t), (2, [6, 6, 1], 0, 0.0));
        assert_eq!(f.fields[0].0, "g");
        assert_eq!(f.fields[0].2, s.g.field().data());
        assert_eq!(f.fields[1].2, s.h.field().data());
        assert!(decode_snapshot(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[8] = 2;
        assert!(decode_snapshot(&bad).is_err());
    }

    #[test]
    fn index_round_trip() {
        let text = format!("{INDEX_HEADER} 1\n0 0 snap_000000.bin\n4 0.125 snap_000004.bin\n");
        let rows = read_index(&text).unwrap();
        assert_eq!(rows[1], (4, 0.125, "snap_000004.bin".to_string()));
        assert!(read_index("nope\n").is_err());
        assert!(read_index(&format!("{INDEX_HEADER} 1\n0 x y\n")).is_err());
    }
}
