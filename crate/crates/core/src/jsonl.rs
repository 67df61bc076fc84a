//! JSON-lines helpers: one serde record per line, UTF-8.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn read<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    from_reader(BufReader::new(File::open(path)?), path)
}

pub fn from_reader<T: DeserializeOwned>(r: impl BufRead, path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::format(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    to_writer(&mut w, records)?;
    w.flush()?;
    Ok(())
}

pub fn to_writer<T: Serialize>(w: &mut impl Write, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
