//! Report envelope, convergence CSV and atomic file output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use etalab::eta::{ConvergenceReport, EtaResult};
use etalab::group::{GrowthConstants, InjectiveRadius, SeparationReport};
use etalab::spectral::{DecayFit, SpectralData};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const SCHEMA: &str = "etalab/1";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportEnvelope {
    pub schema: String,
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub payload: Payload,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case", deny_unknown_fields)]
pub enum Payload {
    Constants(GrowthConstants),
    Distinguish(DistinguishReport),
    Separation(SeparationReport),
    Radius(Vec<RadiusRow>),
    Spectrum(SpectralData),
    Eta(EtaResult),
    Convergence(ConvergenceReport),
    Decay(DecayFit),
    Selftest(Vec<SelfCheck>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistinguishReport {
    pub class: String,
    pub tower: String,
    pub elements: Vec<String>,
    /// First tower index from which every quotient separates the elements
    /// outside the class; `None` if the last quotient does not.
    pub index: Option<usize>,
    pub quotient: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusRow {
    pub index: usize,
    pub label: String,
    pub order: u64,
    pub radius: InjectiveRadius,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    /// The only field that varies between identical runs.
    pub wall_time_secs: f64,
    pub warnings: Vec<String>,
    /// Set when any result exceeds its flag tolerance.
    pub flagged: bool,
    /// Cover degrees of flagged convergence rows.
    pub flagged_rows: Vec<u32>,
}

impl ReportEnvelope {
    pub fn new(config: RunConfig, payload: Payload, diagnostics: Diagnostics) -> Self {
        ReportEnvelope {
            schema: SCHEMA.to_string(),
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            payload,
            diagnostics,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Header of the convergence table.
pub const CSV_HEADER: &str = "n,eta_n,quad_err,tail_bound,trunc_bound,eta_line,abs_diff,eta_n_imag,eta_line_imag";

fn cell(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        // Exponent form of the shortest round-trip representation.
        write!(out, "{v:e}").unwrap();
    }
}

/// The convergence table; empty cells where the line value is absent.
pub fn convergence_csv(rep: &ConvergenceReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let line = rep.line_value.as_ref();
    for row in &rep.rows {
        let e = &row.eta;
        write!(out, "{}", row.n).unwrap();
        for v in [
            Some(e.value),
            Some(e.quadrature_error),
            Some(e.tail_bound),
            Some(e.truncation_bound),
            line.map(|l| l.value),
            row.abs_diff,
            Some(e.imag),
            line.map(|l| l.imag),
        ] {
            out.push(',');
            cell(&mut out, v);
        }
        out.push('\n');
    }
    out
}

/// Writes `contents` to a temporary file next to `path` and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
