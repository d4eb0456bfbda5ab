//! File formats: point patterns and model specs as JSON, spectra, summary
//! tables and envelopes as CSV, and run manifests.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::envelopes::EnvelopeResult;
use crate::error::{Error, Result};
use crate::models::{ModelSpec, Spectrum};
use crate::sphere::{PointPattern, UnitVector};
use crate::summaries::{PooledTable, SummaryTable};

/// Largest deviation from unit norm accepted in pattern files.
pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<Vec<[f64; 3]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lonlat: Option<Vec<[f64; 2]>>,
}

/// Reads `{"points": [[x,y,z], ...]}` or `{"lonlat": [[lon,lat], ...]}`
/// (degrees, geographic latitude).
pub fn read_pattern<R: Read>(reader: R) -> Result<PointPattern> {
    let file: PatternFile = serde_json::from_reader(reader)?;
    let points = match (file.points, file.lonlat) {
        (Some(p), None) => p
            .into_iter()
            .map(|[x, y, z]| {
                let norm = (x * x + y * y + z * z).sqrt();
                if !((norm - 1.0).abs() <= NORM_TOLERANCE) {
                    return Err(Error::input(format!(
                        "point ({x}, {y}, {z}) has norm {norm}, expected 1"
                    )));
                }
                UnitVector::new(x, y, z)
            })
            .collect::<Result<Vec<_>>>()?,
        (None, Some(ll)) => ll
            .into_iter()
            .map(|[lon, lat]| UnitVector::from_lonlat_degrees(lon, lat))
            .collect::<Result<Vec<_>>>()?,
        (Some(_), Some(_)) => {
            return Err(Error::input("pattern file has both \"points\" and \"lonlat\""))
        }
        (None, None) => {
            return Err(Error::input("pattern file needs \"points\" or \"lonlat\""))
        }
    };
    PointPattern::new(points)
}

pub fn write_pattern<W: Write>(mut writer: W, pattern: &PointPattern) -> Result<()> {
    let file = PatternFile {
        points: Some(pattern.iter().map(|p| p.to_array()).collect()),
        lonlat: None,
    };
    serde_json::to_writer(&mut writer, &file)?;
    writer.write_all(b"\n")?;
    Ok(())
}

/// Reads and validates a model spec such as
/// `{"model": "multiquadric", "tau": 10, "delta": 0.68, "eta": 225}`.
pub fn read_model<R: Read>(reader: R) -> Result<ModelSpec> {
    let spec: ModelSpec = serde_json::from_reader(reader)?;
    spec.validate()?;
    Ok(spec)
}

pub fn write_model<W: Write>(mut writer: W, spec: &ModelSpec) -> Result<()> {
    serde_json::to_writer(&mut writer, spec)?;
    writer.write_all(b"\n")?;
    Ok(())
}

/// `ell,alpha` rows.
pub fn write_spectrum_csv<W: Write>(mut writer: W, spectrum: &Spectrum) -> Result<()> {
    writeln!(writer, "ell,alpha")?;
    for (l, a) in spectrum.alphas().iter().enumerate() {
        writeln!(writer, "{l},{a}")?;
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn distance(t: f64, degrees: bool) -> f64 {
    if degrees {
        t.to_degrees()
    } else {
        t
    }
}

pub const SUMMARY_HEADER: &str = "t,value,statistic,estimator,normalization";

fn write_summary_rows<W: Write>(writer: &mut W, table: &SummaryTable, degrees: bool) -> Result<()> {
    let norm = table.normalization.map_or("NA", |n| n.tag());
    for (t, v) in table.t.iter().zip(&table.values) {
        writeln!(
            writer,
            "{},{},{},{},{}",
            distance(*t, degrees),
            fmt_opt(*v),
            table.statistic,
            table.estimator,
            norm
        )?;
    }
    Ok(())
}

/// Long-format CSV of one or more tables; undefined values are `NA`.
/// With `degrees` the distance column is in degrees.
pub fn write_summary_csv<W: Write>(mut writer: W, tables: &[SummaryTable], degrees: bool) -> Result<()> {
    writeln!(writer, "{SUMMARY_HEADER}")?;
    for table in tables {
        write_summary_rows(&mut writer, table, degrees)?;
    }
    Ok(())
}

/// Pooled mean table with standard error and replicate count columns.
pub fn write_pooled_csv<W: Write>(mut writer: W, pooled: &[PooledTable], degrees: bool) -> Result<()> {
    writeln!(writer, "{SUMMARY_HEADER},se,n")?;
    for p in pooled {
        let table = &p.mean;
        let norm = table.normalization.map_or("NA", |n| n.tag());
        for i in 0..table.len() {
            writeln!(
                writer,
                "{},{},{},{},{},{},{}",
                distance(table.t[i], degrees),
                fmt_opt(table.values[i]),
                table.statistic,
                table.estimator,
                norm,
                fmt_opt(p.standard_error[i]),
                p.count[i]
            )?;
        }
    }
    Ok(())
}

pub fn write_envelope_json<W: Write>(mut writer: W, result: &EnvelopeResult) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, result)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn read_envelope_json<R: Read>(reader: R) -> Result<EnvelopeResult> {
    Ok(serde_json::from_reader(reader)?)
}

/// `t,statistic,data,lower,upper,exit` rows for plotting.
pub fn write_envelope_csv<W: Write>(mut writer: W, result: &EnvelopeResult, degrees: bool) -> Result<()> {
    writeln!(writer, "t,statistic,data,lower,upper,exit")?;
    for i in 0..result.grid.len() {
        let exit = match (result.data[i], result.lower[i], result.upper[i]) {
            (Some(d), Some(lo), Some(hi)) => d < lo || d > hi,
            _ => false,
        };
        writeln!(
            writer,
            "{},{},{},{},{},{}",
            distance(result.grid[i], degrees),
            result.segments[i],
            fmt_opt(result.data[i]),
            fmt_opt(result.lower[i]),
            fmt_opt(result.upper[i]),
            exit
        )?;
    }
    Ok(())
}

/// Realized size of one simulated replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: u64,
    pub n: usize,
    pub path: String,
}

/// Everything needed to rerun a command and reproduce its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    pub seed: u64,
    pub replicates: usize,
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub realized: Vec<ReplicateRecord>,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub created: u64,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, model: Option<ModelSpec>, seed: u64, replicates: usize) -> Self {
        let created = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            command: command.into(),
            model,
            seed,
            replicates,
            outputs: Vec::new(),
            realized: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            created,
        }
    }
}

pub fn write_manifest<W: Write>(mut writer: W, manifest: &RunManifest) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, manifest)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn read_manifest<R: Read>(reader: R) -> Result<RunManifest> {
    Ok(serde_json::from_reader(reader)?)
}
