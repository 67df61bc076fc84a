//! Pose file formats.
//!
//! * CSV: header `t,j0x,j0y,j0z,...,j23z`, one frame per row, values printed
//!   with 9 significant digits.
//! * Binary: magic `UBPM`, u32 version (1), u32 joint count (24), f32 sample
//!   rate, u64 frame count, then `frames * 24 * 3` little-endian f32.
//!
//! The binary layout is shared with feature matrices (magic `UBPF`, the joint
//! count replaced by the row width).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::{Annotation, MotionSequence, PoseFrame, Vec3};
use crate::error::{Error, Result};
use crate::skeleton::JOINT_COUNT;

pub const POSE_MAGIC: &[u8; 4] = b"UBPM";
pub const FEATURE_MAGIC: &[u8; 4] = b"UBPF";
pub const BINARY_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoseFormat {
    Csv,
    Bin,
}

impl PoseFormat {
    /// Guess from the file extension (`.csv` or anything else as binary).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => PoseFormat::Csv,
            _ => PoseFormat::Bin,
        }
    }
}

impl FromStr for PoseFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(PoseFormat::Csv),
            "bin" => Ok(PoseFormat::Bin),
            other => Err(Error::validation(format!("unknown pose format '{other}' (csv|bin)"))),
        }
    }
}

pub fn load_sequence(path: &Path, format: PoseFormat) -> Result<MotionSequence> {
    let file = File::open(path)?;
    match format {
        PoseFormat::Csv => read_csv(BufReader::new(file), path),
        PoseFormat::Bin => read_bin(BufReader::new(file), path),
    }
}

pub fn save_sequence(seq: &MotionSequence, path: &Path, format: PoseFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        PoseFormat::Csv => write_csv(seq, &mut w)?,
        PoseFormat::Bin => write_bin(seq, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

pub fn csv_header() -> String {
    let mut h = String::from("t");
    for j in 0..JOINT_COUNT {
        for axis in ["x", "y", "z"] {
            h.push_str(&format!(",j{j}{axis}"));
        }
    }
    h
}

pub fn write_csv(seq: &MotionSequence, w: &mut impl Write) -> Result<()> {
    writeln!(w, "{}", csv_header())?;
    for f in seq.frames() {
        write!(w, "{:.8e}", f.timestamp)?;
        for p in &f.positions {
            write!(w, ",{:.8e},{:.8e},{:.8e}", p.x, p.y, p.z)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_csv(r: impl BufRead, path: &Path) -> Result<MotionSequence> {
    let parse_err = |frame: usize, message: String| Error::Parse { path: path.to_owned(), frame, message };
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| parse_err(0, "empty file".into()))??;
    if header.trim() != csv_header() {
        return Err(parse_err(0, "header does not match t,j0x,...,j23z".into()));
    }
    let mut frames = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let frame = frames.len();
        let values: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(frame, format!("bad number: {e}")))?;
        if values.len() != 1 + 3 * JOINT_COUNT {
            return Err(parse_err(frame, format!("expected {} columns, got {}", 1 + 3 * JOINT_COUNT, values.len())));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(parse_err(frame, format!("non-finite value {v}")));
        }
        let t = values[0];
        if let Some(prev) = frames.last().map(|f: &PoseFrame| f.timestamp) {
            if t <= prev {
                return Err(parse_err(frame, format!("timestamp {t} not after {prev}")));
            }
        }
        let mut positions = [Vec3::zeros(); JOINT_COUNT];
        for (j, p) in positions.iter_mut().enumerate() {
            *p = Vec3::new(values[1 + 3 * j], values[2 + 3 * j], values[3 + 3 * j]);
        }
        frames.push(PoseFrame::new(positions, t));
    }
    if frames.is_empty() {
        return Err(parse_err(0, "no frames".into()));
    }
    let rate = infer_sample_rate(&frames);
    MotionSequence::new(frames, rate)
}

/// Mean frame rate from the timestamps, rounded to 1e-6 Hz. Single-frame
/// files fall back to the default rate.
fn infer_sample_rate(frames: &[PoseFrame]) -> f64 {
    if frames.len() < 2 {
        return super::DEFAULT_SAMPLE_RATE;
    }
    let span = frames[frames.len() - 1].timestamp - frames[0].timestamp;
    let rate = (frames.len() - 1) as f64 / span;
    (rate * 1e6).round() / 1e6
}

pub fn write_bin(seq: &MotionSequence, w: &mut impl Write) -> Result<()> {
    let rows = seq.frames().iter().map(|f| f.positions.iter().flat_map(|p| [p.x, p.y, p.z]));
    write_matrix(w, POSE_MAGIC, 3 * JOINT_COUNT, JOINT_COUNT as u32, seq.sample_rate() as f32, seq.len(), rows)
}

pub fn read_bin(r: impl Read, path: &Path) -> Result<MotionSequence> {
    let (header, data) = read_matrix(r, POSE_MAGIC, |count| count as usize * 3)?;
    if header.count as usize != JOINT_COUNT {
        return Err(Error::format(format!("{}: expected {JOINT_COUNT} joints, got {}", path.display(), header.count)));
    }
    let rate = header.sample_rate as f64;
    let mut positions = Vec::with_capacity(header.rows);
    for (i, row) in data.chunks_exact(3 * JOINT_COUNT).enumerate() {
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse { path: path.to_owned(), frame: i, message: format!("non-finite value {v}") });
        }
        let mut p = [Vec3::zeros(); JOINT_COUNT];
        for (j, c) in row.chunks_exact(3).enumerate() {
            p[j] = Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64);
        }
        positions.push(p);
    }
    MotionSequence::from_positions(positions, rate)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixHeader {
    /// Joint count for poses, feature count for feature matrices.
    pub count: u32,
    pub sample_rate: f32,
    pub rows: usize,
}

/// Write the shared binary container. `width` values per row are taken from
/// each row iterator and stored as f32.
pub fn write_matrix<I, R>(
    w: &mut impl Write,
    magic: &[u8; 4],
    width: usize,
    count: u32,
    sample_rate: f32,
    rows: usize,
    data: I,
) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = f64>,
{
    w.write_all(magic)?;
    w.write_all(&BINARY_VERSION.to_le_bytes())?;
    w.write_all(&count.to_le_bytes())?;
    w.write_all(&sample_rate.to_le_bytes())?;
    w.write_all(&(rows as u64).to_le_bytes())?;
    let mut written = 0;
    for row in data {
        let mut n = 0;
        for v in row {
            w.write_all(&(v as f32).to_le_bytes())?;
            n += 1;
        }
        if n != width {
            return Err(Error::Shape(format!("row {written} has {n} values, expected {width}")));
        }
        written += 1;
    }
    if written != rows {
        return Err(Error::Shape(format!("wrote {written} rows, header says {rows}")));
    }
    Ok(())
}

/// Read the shared binary container; `width_of(count)` gives values per row.
pub fn read_matrix(
    mut r: impl Read,
    magic: &[u8; 4],
    width_of: impl Fn(u32) -> usize,
) -> Result<(MatrixHeader, Vec<f32>)> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = read_u32(&mut r)?;
    if version != BINARY_VERSION {
        return Err(Error::format(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r)?;
    let sample_rate = f32::from_le_bytes(read_array(&mut r)?);
    let rows = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let width = width_of(count);
    let total = rows
        .checked_mul(width)
        .ok_or_else(|| Error::format("frame count overflow"))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != total * 4 {
        return Err(Error::format(format!("expected {} data bytes, found {}", total * 4, bytes.len())));
    }
    let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    Ok((MatrixHeader { count, sample_rate, rows }, data))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub fn read_annotations(path: &Path) -> Result<Vec<Annotation>> {
    crate::jsonl::read(path)
}

pub fn write_annotations(path: &Path, anns: &[Annotation]) -> Result<()> {
    crate::jsonl::write(path, anns)
}
