//! Image and results I/O.
//!
//! Images travel as binary 8-bit PGM (P5, maxval 255) for viewing and as a
//! lossless raw format (`SGFIELD1` magic, little-endian u32 dims, then
//! little-endian f64 pixels) for exact round trips. All CSV output is
//! deterministic given deterministic inputs.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::admm::AdmmResult;
use crate::error::{Error, Result};
use crate::experiments::metrics::acf;
use crate::experiments::{EstimateBundle, RunOutput};
use crate::field::ImageField;
use crate::samplers::ChainRecord;

const RAW_MAGIC: &[u8; 8] = b"SGFIELD1";

/// Writes a field as binary PGM after clamping to [0, 255] and rounding
/// half-to-even.
pub fn write_pgm(path: &Path, field: &ImageField) -> Result<()> {
    let mut bytes = Vec::with_capacity(field.len() + 32);
    bytes.extend_from_slice(format!("P5\n{} {}\n255\n", field.cols(), field.rows()).as_bytes());
    for &v in field.as_slice() {
        bytes.push(v.clamp(0.0, 255.0).round_ties_even() as u8);
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a binary PGM with maxval 255 exactly; anything else is rejected.
pub fn read_pgm(path: &Path) -> Result<ImageField> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn parse_pgm(bytes: &[u8]) -> Result<ImageField> {
    let mut pos = 0usize;
    let mut token = |what: &str| -> Result<String> {
        // skip whitespace and # comments
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format(format!("truncated header, missing {what}")));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    if token("magic")? != "P5" {
        return Err(Error::Format("not a binary P5 PGM".into()));
    }
    let cols: usize = token("width")?
        .parse()
        .map_err(|_| Error::Format("bad width".into()))?;
    let rows: usize = token("height")?
        .parse()
        .map_err(|_| Error::Format("bad height".into()))?;
    let maxval: usize = token("maxval")?
        .parse()
        .map_err(|_| Error::Format("bad maxval".into()))?;
    if maxval != 255 {
        return Err(Error::Format(format!("maxval {maxval} unsupported, need 255")));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::Format("empty image".into()));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = rows * cols;
    if bytes.len() < pos.saturating_add(need).saturating_sub(1) + 1 {
        return Err(Error::Format("truncated pixel data".into()));
    }
    let values = bytes[pos..pos + need].iter().map(|&b| b as f64).collect();
    ImageField::from_values(rows, cols, values)
}

/// Writes the lossless raw format: magic, u32 rows, u32 cols, f64 pixels,
/// all little-endian.
pub fn write_raw(path: &Path, field: &ImageField) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + 8 * field.len());
    bytes.extend_from_slice(RAW_MAGIC);
    bytes.extend_from_slice(&(field.rows() as u32).to_le_bytes());
    bytes.extend_from_slice(&(field.cols() as u32).to_le_bytes());
    for &v in field.as_slice() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_raw(path: &Path) -> Result<ImageField> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..8] != RAW_MAGIC {
        return Err(Error::Format(format!("{}: bad raw field header", path.display())));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let need = 16 + 8 * rows * cols;
    if bytes.len() != need {
        return Err(Error::Format(format!(
            "{}: expected {need} bytes, found {}",
            path.display(),
            bytes.len()
        )));
    }
    let values = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ImageField::from_values(rows, cols, values)
}

/// Reads either format, keyed on the extension (`.pgm` vs anything else raw).
pub fn read_image(path: &Path) -> Result<ImageField> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => read_pgm(path),
        _ => read_raw(path),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn format_float(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let text = format!("{v}");
    // keep CSV values recognizably floating point ("1.0", not "1")
    if text.contains(['.', 'e', 'n']) {
        text
    } else {
        format!("{text}.0")
    }
}

/// `name,value` rows in key order.
pub fn write_metrics_csv(path: &Path, metrics: &std::collections::BTreeMap<String, f64>) -> Result<()> {
    let mut text = String::from("name,value\n");
    for (name, value) in metrics {
        text.push_str(name);
        text.push(',');
        text.push_str(&format_float(*value));
        text.push('\n');
    }
    write_text(path, &text)
}

/// `sweep,neglog` rows over the full trace.
pub fn write_trace_csv(path: &Path, trace: &[f64]) -> Result<()> {
    let mut text = String::from("sweep,neglog\n");
    for (t, v) in trace.iter().enumerate() {
        text.push_str(&format!("{t},{}\n", format_float(*v)));
    }
    write_text(path, &text)
}

/// `lag,value` rows; row 0 is always `0,1`.
pub fn write_acf_csv(path: &Path, values: &[f64]) -> Result<()> {
    let mut text = String::from("lag,value\n");
    for (lag, v) in values.iter().enumerate() {
        text.push_str(&format!("{lag},{}\n", format_float(*v)));
    }
    write_text(path, &text)
}

/// `iteration,primal,dual` residual rows of an ADMM solve.
pub fn write_residuals_csv(path: &Path, residuals: &[(f64, f64)]) -> Result<()> {
    let mut text = String::from("iteration,primal,dual\n");
    for (t, (p, d)) in residuals.iter().enumerate() {
        text.push_str(&format!("{t},{},{}\n", format_float(*p), format_float(*d)));
    }
    write_text(path, &text)
}

fn write_field_pair(dir: &Path, stem: &str, field: &ImageField) -> Result<()> {
    write_pgm(&dir.join(format!("{stem}.pgm")), field)?;
    write_raw(&dir.join(format!("{stem}.f64")), field)
}

/// Maximum lag exported to `acf.csv`.
const ACF_MAX_LAG: usize = 100;

/// Writes the full report for one run into `dir`: `metrics.csv`, the chain
/// trace and autocorrelation (or ADMM residuals), the estimate images and,
/// when kept samples exist, the credibility bound images.
pub fn write_report(bundle: &EstimateBundle, output: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_metrics_csv(&dir.join("metrics.csv"), &bundle.metrics)?;
    match output {
        RunOutput::Chain(record) => {
            write_chain_files(record, dir)?;
        }
        RunOutput::Admm(result) => {
            write_residuals_csv(&dir.join("residuals.csv"), &result.residuals)?;
        }
    }
    write_field_pair(dir, "mmse_x", &bundle.mmse_x)?;
    write_field_pair(dir, "mmse_z", &bundle.mmse_z)?;
    write_field_pair(dir, "mmse_u", &bundle.mmse_u)?;
    if let (Some(low), Some(high)) = (&bundle.ci_low, &bundle.ci_high) {
        write_field_pair(dir, "ci_low", low)?;
        write_field_pair(dir, "ci_high", high)?;
    }
    Ok(())
}

fn write_chain_files(record: &ChainRecord, dir: &Path) -> Result<()> {
    write_trace_csv(&dir.join("trace.csv"), &record.scalar_trace)?;
    let post_burn_in = &record.scalar_trace[record.scalar_trace.len() - record.kept..];
    if post_burn_in.len() >= 2 {
        if let Ok(values) = acf(post_burn_in, ACF_MAX_LAG) {
            write_acf_csv(&dir.join("acf.csv"), &values)?;
        }
    }
    Ok(())
}

/// Writes `aggregate.csv` with `name,mean,std` rows over per-replicate
/// metric maps (population std over the replicates).
pub fn write_aggregate_csv(
    path: &Path,
    replicates: &[std::collections::BTreeMap<String, f64>],
) -> Result<()> {
    let mut names: Vec<&String> = Vec::new();
    for metrics in replicates {
        for name in metrics.keys() {
            if !names.contains(&name) {
                names.push(name);
            }
        }
    }
    names.sort();
    let mut text = String::from("name,mean,std\n");
    for name in names {
        let values: Vec<f64> =
            replicates.iter().filter_map(|m| m.get(name)).copied().collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        text.push_str(&format!("{name},{},{}\n", format_float(mean), format_float(std)));
    }
    write_text(path, &text)
}

/// Re-exported for the runner: residual trace of an ADMM result.
pub fn admm_residuals(result: &AdmmResult) -> &[(f64, f64)] {
    &result.residuals
}

/// Directory for one replicate of a run.
pub fn replicate_dir(base: &Path, replicate: usize) -> PathBuf {
    base.join(format!("replicate_{replicate:02}"))
}

/// Appends a line to stdout unless quiet output was requested through the
/// `SPLIT_GIBBS_VERBOSE` env var (0 silences, anything else keeps output).
pub fn emit(line: &str) {
    match std::env::var("SPLIT_GIBBS_VERBOSE") {
        Ok(v) if v == "0" => {}
        _ => {
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{line}");
        }
    }
}
