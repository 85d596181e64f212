//! Stability reports and their serializations.
//!
//! Floats are written in shortest round-trip form (JSON, CSV and plot data
//! alike), so json → csv → json reproduces every value bit for bit. Missing
//! values are `null` in JSON and empty fields in CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub const SCHEMA: &str = "emot.stability.v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Error,
}

/// One perturbation scale. Gaps compare the perturbed instance with the
/// base instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub scale: f64,
    pub status: RowStatus,
    pub reason: Option<String>,
    /// 𝒲_p between base and perturbed first marginals.
    pub w_mu: Option<f64>,
    /// 𝒲_p between base and repaired second marginals.
    pub w_nu: Option<f64>,
    pub value_base: Option<f64>,
    pub value: Option<f64>,
    pub value_gap: Option<f64>,
    /// Upper bracket for sandwich problems (VIX d_hi).
    pub value_hi_base: Option<f64>,
    pub value_hi: Option<f64>,
    pub value_hi_gap: Option<f64>,
    pub aw_gap: Option<f64>,
    pub hausdorff_lower: Option<f64>,
    pub hausdorff_upper: Option<f64>,
    /// μ̄-mass where |T₁ᵏ − T₁| + |T₂ᵏ − T₂| exceeds the threshold.
    pub barrier_exceedance: Option<f64>,
    /// Total variation between base and perturbed lifts.
    pub lift_tv: Option<f64>,
    pub fw_gap: Option<f64>,
    pub marginal_error: Option<f64>,
    /// min over rearrangements of 2𝒲₁ − cost.
    pub step3_slack: Option<f64>,
    pub timing_ms: Option<f64>,
}

impl StabilityRow {
    pub fn empty(scale: f64) -> Self {
        Self {
            scale,
            status: RowStatus::Ok,
            reason: None,
            w_mu: None,
            w_nu: None,
            value_base: None,
            value: None,
            value_gap: None,
            value_hi_base: None,
            value_hi: None,
            value_hi_gap: None,
            aw_gap: None,
            hausdorff_lower: None,
            hausdorff_upper: None,
            barrier_exceedance: None,
            lift_tv: None,
            fw_gap: None,
            marginal_error: None,
            step3_slack: None,
            timing_ms: None,
        }
    }

    pub fn failed(scale: f64, reason: String) -> Self {
        Self { status: RowStatus::Error, reason: Some(reason), ..Self::empty(scale) }
    }

    /// (name, value) for every numeric series column.
    pub fn series(&self) -> [(&'static str, Option<f64>); 16] {
        [
            ("w_mu", self.w_mu),
            ("w_nu", self.w_nu),
            ("value_base", self.value_base),
            ("value", self.value),
            ("value_gap", self.value_gap),
            ("value_hi_base", self.value_hi_base),
            ("value_hi", self.value_hi),
            ("value_hi_gap", self.value_hi_gap),
            ("aw_gap", self.aw_gap),
            ("hausdorff_lower", self.hausdorff_lower),
            ("hausdorff_upper", self.hausdorff_upper),
            ("barrier_exceedance", self.barrier_exceedance),
            ("lift_tv", self.lift_tv),
            ("fw_gap", self.fw_gap),
            ("marginal_error", self.marginal_error),
            ("step3_slack", self.step3_slack),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub schema: String,
    pub name: String,
    pub problem: String,
    pub family: String,
    pub seed: u64,
    /// Sorted by decreasing scale.
    pub rows: Vec<StabilityRow>,
}

impl StabilityReport {
    pub fn new(name: &str, problem: &str, family: &str, seed: u64, mut rows: Vec<StabilityRow>) -> Self {
        rows.sort_by(|a, b| b.scale.total_cmp(&a.scale));
        Self { schema: SCHEMA.into(), name: name.into(), problem: problem.into(), family: family.into(), seed, rows }
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.status == RowStatus::Error).count()
    }

    /// (scale, value) pairs of one series column, skipping missing values.
    pub fn curve(&self, column: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.series().iter().find(|(n, _)| *n == column).and_then(|(_, v)| *v).map(|v| (r.scale, v)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Plotdata,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Plotdata => "dat",
        }
    }
}

const HEADER: [&str; 20] = [
    "scale",
    "status",
    "reason",
    "w_mu",
    "w_nu",
    "value_base",
    "value",
    "value_gap",
    "value_hi_base",
    "value_hi",
    "value_hi_gap",
    "aw_gap",
    "hausdorff_lower",
    "hausdorff_upper",
    "barrier_exceedance",
    "lift_tv",
    "fw_gap",
    "marginal_error",
    "step3_slack",
    "timing_ms",
];

pub fn to_csv(report: &StabilityReport) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(HEADER)?;
    for r in &report.rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?)?)
}

pub fn rows_from_csv(text: &str) -> Result<Vec<StabilityRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<StabilityRow>, _>>()?;
    Ok(rows)
}

pub fn to_json(report: &StabilityReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

/// Blank-line separated blocks, one per non-empty series: a `# curve`
/// comment then `scale value` lines.
pub fn to_plotdata(report: &StabilityReport) -> String {
    let mut out = format!("# {} {} problem={} family={} seed={}\n", report.schema, report.name, report.problem, report.family, report.seed);
    let names = StabilityRow::empty(0.0).series().map(|(n, _)| n);
    for name in names {
        let c = report.curve(name);
        if c.is_empty() {
            continue;
        }
        let _ = writeln!(out, "\n# curve {name}");
        for (s, v) in c {
            let _ = writeln!(out, "{s:?} {v:?}");
        }
    }
    out
}

/// Writes `<dir>/<name>.<ext>` for each format and returns the paths.
pub fn emit(report: &StabilityReport, formats: &[Format], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut paths = Vec::new();
    for &f in formats {
        let path = dir.join(format!("{}.{}", report.name, f.extension()));
        let text = match f {
            Format::Csv => to_csv(report)?,
            Format::Json => to_json(report)?,
            Format::Plotdata => to_plotdata(report),
        };
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        paths.push(path);
    }
    Ok(paths)
}
