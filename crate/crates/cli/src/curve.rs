//! Certified-accuracy curves and the CSV formats for curves and round logs.

use std::path::Path;

use fedsmooth::error::{Error, Result};
use fedsmooth::federation::RoundRecord;
use fedsmooth::smoothing::CertificationOutcome;

/// One point of a certified-accuracy curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub radius: f64,
    pub certified_accuracy: f64,
}

/// Builds the certified-accuracy curve over the radius grid: a test point
/// counts at radius r iff it was certified with its true label and its
/// certified radius is at least r.
pub fn certification_curve(
    outcomes: &[(CertificationOutcome, usize)],
    radii: &[f64],
) -> Vec<CurvePoint> {
    let total = outcomes.len().max(1) as f64;
    radii
        .iter()
        .map(|&radius| {
            let hits = outcomes
                .iter()
                .filter(|(outcome, label)| {
                    outcome.certified_class() == Some(*label) && outcome.radius() >= radius
                })
                .count();
            CurvePoint {
                radius,
                certified_accuracy: hits as f64 / total,
            }
        })
        .collect()
}

/// Fraction of points certified with the correct label (the curve value at
/// radius zero).
pub fn correct_certified_fraction(outcomes: &[(CertificationOutcome, usize)]) -> f64 {
    let hits = outcomes
        .iter()
        .filter(|(outcome, label)| outcome.certified_class() == Some(*label))
        .count();
    hits as f64 / outcomes.len().max(1) as f64
}

pub fn is_nonincreasing(curve: &[CurvePoint]) -> bool {
    curve
        .windows(2)
        .all(|w| w[1].certified_accuracy <= w[0].certified_accuracy + 1e-12)
}

/// One row of the certified-accuracy CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub method: String,
    pub ablation: String,
    pub estimator: String,
    pub sigma: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub radius: f64,
    pub certified_accuracy: f64,
}

pub const CURVE_HEADER: &str = "method,ablation,estimator,sigma,epsilon,gamma,radius,certified_accuracy";

pub fn write_curve_csv(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let mut text = String::from(CURVE_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.method,
            r.ablation,
            r.estimator,
            r.sigma,
            r.epsilon,
            r.gamma,
            r.radius,
            r.certified_accuracy
        ));
    }
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<CurveRow>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CURVE_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "{}: bad curve header {other:?}",
                path.display()
            )))
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::Config(format!(
                "{}:{}: expected 8 fields, got {}",
                path.display(),
                lineno + 2,
                fields.len()
            )));
        }
        let parse = |i: usize| -> Result<f64> {
            fields[i].parse().map_err(|_| {
                Error::Config(format!(
                    "{}:{}: field {} is not a number: {:?}",
                    path.display(),
                    lineno + 2,
                    i,
                    fields[i]
                ))
            })
        };
        rows.push(CurveRow {
            method: fields[0].to_string(),
            ablation: fields[1].to_string(),
            estimator: fields[2].to_string(),
            sigma: parse(3)?,
            epsilon: parse(4)?,
            gamma: parse(5)?,
            radius: parse(6)?,
            certified_accuracy: parse(7)?,
        });
    }
    Ok(rows)
}

pub const ROUNDS_HEADER: &str = "round,mode,estimator,mean_loss,seconds";

pub fn write_rounds_csv(path: &Path, records: &[RoundRecord]) -> Result<()> {
    let mut text = String::from(ROUNDS_HEADER);
    text.push('\n');
    for r in records {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.round, r.mode, r.estimator, r.mean_loss, r.seconds
        ));
    }
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parsed round-log row; `mode` and `estimator` come back as owned strings.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRow {
    pub round: usize,
    pub mode: String,
    pub estimator: String,
    pub mean_loss: f64,
    pub seconds: f64,
}

pub fn read_rounds_csv(path: &Path) -> Result<Vec<RoundRow>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == ROUNDS_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "{}: bad rounds header {other:?}",
                path.display()
            )))
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Config(format!(
                "{}:{}: expected 5 fields, got {}",
                path.display(),
                lineno + 2,
                fields.len()
            )));
        }
        let bad = |i: usize| {
            Error::Config(format!(
                "{}:{}: bad field {:?}",
                path.display(),
                lineno + 2,
                fields[i]
            ))
        };
        rows.push(RoundRow {
            round: fields[0].parse().map_err(|_| bad(0))?,
            mode: fields[1].to_string(),
            estimator: fields[2].to_string(),
            mean_loss: fields[3].parse().map_err(|_| bad(3))?,
            seconds: fields[4].parse().map_err(|_| bad(4))?,
        });
    }
    Ok(rows)
}
