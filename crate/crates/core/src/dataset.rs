//! CSV and manifest files for triad datasets.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulation::{TriadDataset, TriadRow, LEVEL_MATCH_TOL};

pub const TRIAD_HEADER: [&str; 8] = [
    "run",
    "ev_level",
    "t",
    "c",
    "final_t",
    "final_c",
    "over_budget",
    "late",
];

/// Shortest decimal that round-trips the value rounded to 9 significant
/// digits.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("valid float");
    format!("{rounded}")
}

fn fmt_bool(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn write_triads<W: Write>(rows: &[TriadRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRIAD_HEADER)?;
    for r in rows {
        w.write_record([
            r.run.to_string(),
            fmt_sig9(r.ev_level),
            fmt_sig9(r.t),
            fmt_sig9(r.c),
            fmt_sig9(r.final_t),
            fmt_sig9(r.final_c),
            fmt_bool(r.over_budget).to_string(),
            fmt_bool(r.late).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.trim().parse().map_err(|_| {
        Error::Parse(format!(
            "triad CSV line {line}: bad value `{raw}` in column `{}`",
            TRIAD_HEADER[i]
        ))
    })
}

fn parse_bool(rec: &csv::StringRecord, i: usize, line: u64) -> Result<bool> {
    match rec.get(i).map(str::trim) {
        Some("1") => Ok(true),
        Some("0") => Ok(false),
        other => Err(Error::Parse(format!(
            "triad CSV line {line}: expected 0/1 in column `{}`, got {other:?}",
            TRIAD_HEADER[i]
        ))),
    }
}

pub fn read_triads<R: Read>(reader: R) -> Result<Vec<TriadRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().ne(TRIAD_HEADER.iter().copied()) {
        return Err(Error::Parse(format!(
            "unexpected triad CSV header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = k as u64 + 2;
        rows.push(TriadRow {
            run: parse_field(&rec, 0, line)?,
            ev_level: parse_field(&rec, 1, line)?,
            t: parse_field(&rec, 2, line)?,
            c: parse_field(&rec, 3, line)?,
            final_t: parse_field(&rec, 4, line)?,
            final_c: parse_field(&rec, 5, line)?,
            over_budget: parse_bool(&rec, 6, line)?,
            late: parse_bool(&rec, 7, line)?,
        });
    }
    Ok(rows)
}

pub fn level_file_name(ev_level: f64) -> String {
    format!("triads_ev{ev_level:.4}.csv")
}

/// Describes a directory of per-level triad CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub fingerprint: String,
    pub seed: u64,
    pub n_runs: u64,
    pub bac: f64,
    pub pd: f64,
    pub seed_derivation: String,
    pub levels: Vec<LevelFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelFile {
    pub ev_level: f64,
    pub file: String,
    pub rows: u64,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes one CSV per EV level plus `manifest.json` into `dir`.
pub fn write_dataset_dir(dataset: &TriadDataset, dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut levels = Vec::new();
    for &level in &dataset.ev_levels {
        let rows = dataset.rows_at(level);
        let name = level_file_name(level);
        let path = dir.join(&name);
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_triads(&rows, std::io::BufWriter::new(file))?;
        levels.push(LevelFile {
            ev_level: level,
            file: name,
            rows: rows.len() as u64,
        });
    }
    let manifest = Manifest {
        fingerprint: dataset.fingerprint.clone(),
        seed: dataset.seed,
        n_runs: dataset.n_runs,
        bac: dataset.bac,
        pd: dataset.pd,
        seed_derivation: "run i uses ChaCha8 seeded with mix64(mix64(seed) + (i+1)*0x9E3779B97F4A7C15), mix64 = splitmix64 finalizer".into(),
        levels,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Loads the rows stored for `ev_level`, if the directory has that level.
pub fn read_level(dir: &Path, ev_level: f64) -> Result<Option<(Manifest, Vec<TriadRow>)>> {
    let manifest = read_manifest(dir)?;
    let Some(entry) = manifest
        .levels
        .iter()
        .find(|l| (l.ev_level - ev_level).abs() <= LEVEL_MATCH_TOL)
    else {
        return Ok(None);
    };
    let path: PathBuf = dir.join(&entry.file);
    let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let rows = read_triads(std::io::BufReader::new(file))?;
    Ok(Some((manifest, rows)))
}
