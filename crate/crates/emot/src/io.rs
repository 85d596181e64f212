//! JSON and CSV formats for measures, lifted measures and couplings.
//!
//! Measures are `{"atoms": [...], "weights": [...]}`; lifted measures use
//! `[x, u]` pairs as atoms; couplings carry their first marginal, the shared
//! y-support and one kernel row per first-marginal atom. CSV measures have
//! a header row and columns `x,w` or `x,u,w`.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use emot_core::couplings::DiscreteCoupling;
use emot_core::{DiscreteMeasure, LiftedMeasure};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureDto {
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftedDto {
    pub atoms: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingDto {
    pub first: LiftedDto,
    pub y_support: Vec<f64>,
    pub kernels: Vec<Vec<f64>>,
}

impl From<&DiscreteMeasure> for MeasureDto {
    fn from(m: &DiscreteMeasure) -> Self {
        Self { atoms: m.atoms().to_vec(), weights: m.weights().to_vec() }
    }
}

impl TryFrom<&MeasureDto> for DiscreteMeasure {
    type Error = emot_core::Error;
    fn try_from(d: &MeasureDto) -> emot_core::Result<Self> {
        DiscreteMeasure::new(d.atoms.clone(), d.weights.clone())
    }
}

impl From<&LiftedMeasure> for LiftedDto {
    fn from(m: &LiftedMeasure) -> Self {
        Self { atoms: m.atoms().iter().map(|&(x, u)| [x, u]).collect(), weights: m.weights().to_vec() }
    }
}

impl TryFrom<&LiftedDto> for LiftedMeasure {
    type Error = emot_core::Error;
    fn try_from(d: &LiftedDto) -> emot_core::Result<Self> {
        LiftedMeasure::new(d.atoms.iter().map(|a| (a[0], a[1])).collect(), d.weights.clone())
    }
}

impl From<&DiscreteCoupling> for CouplingDto {
    fn from(c: &DiscreteCoupling) -> Self {
        Self {
            first: c.first_marginal().into(),
            y_support: c.y_support().to_vec(),
            kernels: (0..c.len()).map(|i| c.kernel_row(i).to_vec()).collect(),
        }
    }
}

impl TryFrom<&CouplingDto> for DiscreteCoupling {
    type Error = emot_core::Error;
    fn try_from(d: &CouplingDto) -> emot_core::Result<Self> {
        let first = LiftedMeasure::try_from(&d.first)?;
        if d.kernels.len() != d.first.atoms.len() {
            return Err(emot_core::Error::InvalidArgument(format!(
                "{} kernel rows for {} first-marginal atoms",
                d.kernels.len(),
                d.first.atoms.len()
            )));
        }
        // rows follow the input atom order; the lifted measure is sorted
        let mut order: Vec<usize> = (0..d.first.atoms.len()).collect();
        order.sort_by(|&a, &b| {
            let (p, q) = (d.first.atoms[a], d.first.atoms[b]);
            p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1]))
        });
        if first.len() != order.len() {
            return Err(emot_core::Error::InvalidArgument("coupling atoms must be distinct with positive weight".into()));
        }
        let kernels = order.iter().flat_map(|&i| d.kernels[i].iter().copied()).collect();
        DiscreteCoupling::new(first, d.y_support.clone(), kernels)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn csv_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("{}: line {}", path.display(), k + 2))?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// `x,w` CSV.
pub fn read_measure_csv(path: &Path) -> Result<DiscreteMeasure> {
    let (header, rows) = csv_rows(path)?;
    if header != ["x", "w"] {
        bail!("{}: expected header x,w, got {}", path.display(), header.join(","));
    }
    Ok(DiscreteMeasure::new(rows.iter().map(|r| r[0]).collect(), rows.iter().map(|r| r[1]).collect())?)
}

/// `x,u,w` CSV.
pub fn read_lifted_csv(path: &Path) -> Result<LiftedMeasure> {
    let (header, rows) = csv_rows(path)?;
    if header != ["x", "u", "w"] {
        bail!("{}: expected header x,u,w, got {}", path.display(), header.join(","));
    }
    Ok(LiftedMeasure::new(rows.iter().map(|r| (r[0], r[1])).collect(), rows.iter().map(|r| r[2]).collect())?)
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Measure from a `.csv` or JSON file.
pub fn load_measure(path: &Path) -> Result<DiscreteMeasure> {
    if is_csv(path) {
        read_measure_csv(path)
    } else {
        Ok(DiscreteMeasure::try_from(&read_json::<MeasureDto>(path)?)?)
    }
}

pub fn load_lifted(path: &Path) -> Result<LiftedMeasure> {
    if is_csv(path) {
        read_lifted_csv(path)
    } else {
        Ok(LiftedMeasure::try_from(&read_json::<LiftedDto>(path)?)?)
    }
}

pub fn load_coupling(path: &Path) -> Result<DiscreteCoupling> {
    Ok(DiscreteCoupling::try_from(&read_json::<CouplingDto>(path)?)?)
}
