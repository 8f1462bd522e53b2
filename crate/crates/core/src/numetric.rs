//! Chordal distance and the nu-metric between two plants.
//!
//! For coprime pairs `(n1, d1)`, `(n2, d2)` the pointwise chordal density is
//!
//! ```text
//! |n1 d2 - n2 d1| / ( sqrt(|n1|^2 + |d1|^2) * sqrt(|n2|^2 + |d2|^2) )
//! ```
//!
//! and `kappa` is its essential supremum over the imaginary axis. The
//! nu-metric equals `kappa` when `conj(n1) n2 + conj(d1) d2` is invertible
//! with index 0, and 1 otherwise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundary::{
    adaptive_extremum, adaptive_inf, AxisGrid, BoundaryError, CircleConfig, Extremum, GridConfig,
    SupEstimate,
};
use crate::expr::{Complex, EvalFailure};
use crate::index::{index_of_pair, pair_function, IndexError, IndexVerdict, WindingReport};
use crate::plants::Factorization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum KappaError {
    #[error(transparent)]
    Eval(#[from] EvalFailure),
    #[error("factors vanish simultaneously (not coprime at this point)")]
    NotCoprimeAtPoint,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NuError {
    #[error("chordal distance: {0}")]
    Kappa(#[from] BoundaryError),
    #[error("index: {0}")]
    Index(#[from] IndexError),
}

/// Everything the nu-metric computation needs to know about resolution.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NuConfig {
    pub grid: GridConfig,
    pub circle: CircleConfig,
    /// Keep the `(y, kappa(y))` grid samples in the report.
    pub record_sweep: bool,
}

pub fn kappa_pointwise(
    f1: &Factorization,
    f2: &Factorization,
    s: Complex,
) -> Result<f64, KappaError> {
    let (n1, d1) = f1.both(s)?;
    let (n2, d2) = f2.both(s)?;
    let norm1 = n1.norm().hypot(d1.norm());
    let norm2 = n2.norm().hypot(d2.norm());
    if norm1 == 0.0 || norm2 == 0.0 {
        return Err(KappaError::NotCoprimeAtPoint);
    }
    // normalise before the cross product so tiny factors don't underflow
    let (n1, d1) = (n1 / norm1, d1 / norm1);
    let (n2, d2) = (n2 / norm2, d2 / norm2);
    Ok((n1 * d2 - n2 * d1).norm())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KappaEstimate {
    pub value: f64,
    pub argmax_y: f64,
    pub estimate: SupEstimate,
    /// Successful grid samples `(y, kappa(y))`, ascending in `y`.
    pub sweep: Option<Vec<(f64, f64)>>,
}

fn axis(y: f64) -> Complex {
    Complex::new(0.0, y)
}

pub fn kappa_on_grid(
    f1: &Factorization,
    f2: &Factorization,
    grid: &AxisGrid,
    iters: usize,
    record_sweep: bool,
) -> Result<KappaEstimate, BoundaryError> {
    let f = |y: f64| kappa_pointwise(f1, f2, axis(y)).ok();
    let (estimate, sweep) = adaptive_extremum(&f, grid, iters, Extremum::Max)?;
    let sweep = record_sweep.then(|| {
        sweep
            .ys
            .iter()
            .zip(&sweep.values)
            .filter_map(|(&y, v)| v.map(|v| (y, v)))
            .collect()
    });
    Ok(KappaEstimate {
        value: estimate.value,
        argmax_y: estimate.argmax,
        estimate,
        sweep,
    })
}

/// Boundary supremum of the chordal density.
pub fn kappa_distance(
    f1: &Factorization,
    f2: &Factorization,
    cfg: &NuConfig,
) -> Result<KappaEstimate, BoundaryError> {
    kappa_on_grid(
        f1,
        f2,
        &cfg.grid.grid()?,
        cfg.grid.refine_iters,
        cfg.record_sweep,
    )
}

/// Grid infimum of `Re(conj(n1) n2 + conj(d1) d2)` on the imaginary axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Positivity {
    pub holds: bool,
    pub min_re: f64,
    pub argmin_y: f64,
    pub failures: usize,
}

pub fn re_positivity_check(
    f1: &Factorization,
    f2: &Factorization,
    grid: &GridConfig,
) -> Result<Positivity, BoundaryError> {
    let est = adaptive_inf(
        |y| pair_function(f1, f2, axis(y)).ok().map(|g| g.re),
        &grid.grid()?,
        grid.refine_iters,
    )?;
    Ok(Positivity {
        holds: est.value > 0.0,
        min_re: est.value,
        argmin_y: est.argmax,
        failures: est.failures,
    })
}

/// Grid infimum of `|n|^2 + |d|^2` on the imaginary axis.
pub fn coprime_margin(f: &Factorization, grid: &GridConfig) -> Result<SupEstimate, BoundaryError> {
    adaptive_inf(|y| f.gram(axis(y)).ok(), &grid.grid()?, grid.refine_iters)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Margins {
    pub p1: Option<f64>,
    pub p2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub index_verdict: IndexVerdict,
    /// How the index condition was decided.
    pub index_method: &'static str,
    pub kappa_samples: usize,
    pub kappa_failures: usize,
    pub kappa_at_contour_end: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuReport {
    pub kappa: Option<f64>,
    pub kappa_argmax_y: Option<f64>,
    pub d: f64,
    pub condition_held: bool,
    pub index: WindingReport,
    pub margins: Margins,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<[f64; 2]>>,
    pub flags: Vec<String>,
    pub diagnostics: Diagnostics,
}

/// `d(p1, p2)`: `kappa` when the index condition holds, else 1.
pub fn nu_metric(
    f1: &Factorization,
    f2: &Factorization,
    cfg: &NuConfig,
) -> Result<NuReport, NuError> {
    let grid = cfg.grid.grid()?;
    let index = index_of_pair(f1, f2, &cfg.circle)?;
    let verdict = index.verdict();
    let condition_held = verdict == IndexVerdict::ZeroIndex;

    let mut flags = Vec::new();
    match verdict {
        IndexVerdict::ZeroIndex => {}
        IndexVerdict::NonzeroIndex => flags.push("nonzero-index".to_string()),
        IndexVerdict::NotInvertible => flags.push("not-invertible".to_string()),
        IndexVerdict::NotStabilized => flags.push("index-unstable".to_string()),
    }

    let kappa = match kappa_on_grid(f1, f2, &grid, cfg.grid.refine_iters, cfg.record_sweep) {
        Ok(k) => Some(k),
        Err(e) if !condition_held => {
            flags.push(format!("kappa-failed: {e}"));
            None
        }
        Err(e) => return Err(e.into()),
    };
    if kappa.as_ref().is_some_and(|k| k.estimate.at_contour_end) {
        flags.push("kappa-unconverged-at-contour-end".to_string());
    }

    let margin = |f: &Factorization| coprime_margin(f, &cfg.grid).ok().map(|m| m.value);
    let margins = Margins {
        p1: margin(f1),
        p2: margin(f2),
    };

    let d = match (&kappa, condition_held) {
        (Some(k), true) => k.value,
        _ => 1.0,
    };
    Ok(NuReport {
        kappa: kappa.as_ref().map(|k| k.value),
        kappa_argmax_y: kappa.as_ref().map(|k| k.argmax_y),
        d,
        condition_held,
        margins,
        sweep: kappa
            .as_ref()
            .and_then(|k| k.sweep.as_ref())
            .map(|s| s.iter().map(|&(y, v)| [y, v]).collect()),
        flags,
        diagnostics: Diagnostics {
            index_verdict: verdict,
            index_method: "radius-stabilization",
            kappa_samples: kappa.as_ref().map_or(0, |k| k.estimate.samples),
            kappa_failures: kappa.as_ref().map_or(0, |k| k.estimate.failures),
            kappa_at_contour_end: kappa.as_ref().is_some_and(|k| k.estimate.at_contour_end),
        },
        index,
    })
}
