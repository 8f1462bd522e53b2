//! Closed-loop stability of the interconnection of a plant `p = nP/dP` and a
//! controller `c = nC/dC`, and an empirical robustness probe around it.
//!
//! With `delta = dP dC - nP nC`, the four closed-loop entries are
//! `nP nC / delta`, `nP dC / delta`, `nC dP / delta` and `dP dC / delta`
//! (signs dropped; only their boundedness matters).

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::boundary::{adaptive_extremum, BoundaryError, Extremum};
use crate::expr::{Complex, EvalFailure, EvalOutcome};
use crate::index::{index_on_halfplane, IndexError, WindingReport};
use crate::numetric::{nu_metric, NuConfig, NuError};
use crate::plants::Factorization;

/// Entry sups at or above this count as unbounded.
pub const ENTRY_SUP_LIMIT: f64 = 1e8;
/// Largest tolerated fraction of failed samples per entry.
pub const ENTRY_FAILURE_LIMIT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
    #[error(transparent)]
    Nu(#[from] NuError),
    #[error("nominal loop is not stable")]
    NominalUnstable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopReport {
    pub stable: bool,
    /// Boundary sups of `nP nC`, `nP dC`, `nC dP`, `dP dC` over `delta`;
    /// `None` where the sweep itself failed.
    pub entry_sups: [Option<f64>; 4],
    pub denominator: WindingReport,
    pub flags: Vec<String>,
}

/// `dP dC - nP nC`.
pub fn loop_denominator(p: &Factorization, c: &Factorization, s: Complex) -> EvalOutcome {
    let (np, dp) = p.both(s)?;
    let (nc, dc) = c.both(s)?;
    Ok(dp * dc - np * nc)
}

fn entries(p: &Factorization, c: &Factorization, s: Complex) -> Result<[f64; 4], EvalFailure> {
    let (np, dp) = p.both(s)?;
    let (nc, dc) = c.both(s)?;
    let delta = dp * dc - np * nc;
    let m = delta.norm();
    if m < crate::expr::POLE_TOLERANCE {
        return Err(EvalFailure::PoleHit);
    }
    Ok([
        (np * nc).norm() / m,
        (np * dc).norm() / m,
        (nc * dp).norm() / m,
        (dp * dc).norm() / m,
    ])
}

pub fn closed_loop_check(
    p: &Factorization,
    c: &Factorization,
    cfg: &NuConfig,
) -> Result<LoopReport, StabilityError> {
    let grid = cfg.grid.grid()?;
    let denominator = index_on_halfplane(&|s| loop_denominator(p, c, s), &cfg.circle)?;
    let mut flags = Vec::new();
    if !denominator.invertible {
        flags.push("denominator-not-invertible".to_string());
    } else if !denominator.stabilized {
        flags.push("index-unstable".to_string());
    } else if denominator.final_index != Some(0) {
        flags.push(format!(
            "denominator-index={}",
            denominator.final_index.unwrap_or_default()
        ));
    }

    let mut entry_sups = [None; 4];
    let mut bounded = true;
    for (k, slot) in entry_sups.iter_mut().enumerate() {
        let f = |y: f64| entries(p, c, Complex::new(0.0, y)).ok().map(|e| e[k]);
        match adaptive_extremum(&f, &grid, cfg.grid.refine_iters, Extremum::Max) {
            Ok((est, _)) => {
                *slot = Some(est.value);
                if est.value >= ENTRY_SUP_LIMIT {
                    bounded = false;
                    flags.push(format!("entry-{k}-unbounded"));
                }
                if est.failure_fraction() > ENTRY_FAILURE_LIMIT {
                    bounded = false;
                    flags.push(format!("entry-{k}-evaluation-failures"));
                }
            }
            Err(e) => {
                bounded = false;
                flags.push(format!("entry-{k}: {e}"));
            }
        }
    }
    Ok(LoopReport {
        stable: denominator.condition_holds() && bounded,
        entry_sups,
        denominator,
        flags,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub label: String,
    pub d: f64,
    pub condition_held: bool,
    pub stable: bool,
}

/// Empirical exhibit, not a certified margin: neighbours sorted by distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessProbe {
    pub kind: &'static str,
    pub results: Vec<ProbeResult>,
    /// Smallest distance at which a probed neighbour lost stability.
    pub first_failure_d: Option<f64>,
    /// Largest probed distance below `first_failure_d` (or overall, if none failed).
    pub stable_radius_observed: Option<f64>,
}

pub fn robustness_probe(
    p: &Factorization,
    c: &Factorization,
    neighbors: &[Factorization],
    cfg: &NuConfig,
) -> Result<RobustnessProbe, StabilityError> {
    if !closed_loop_check(p, c, cfg)?.stable {
        return Err(StabilityError::NominalUnstable);
    }
    let mut results = neighbors
        .par_iter()
        .map(|q| -> Result<ProbeResult, StabilityError> {
            let rep = nu_metric(p, q, cfg)?;
            let lp = closed_loop_check(q, c, cfg)?;
            Ok(ProbeResult {
                label: q.label.clone(),
                d: rep.d,
                condition_held: rep.condition_held,
                stable: lp.stable,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    results.sort_by(|a, b| a.d.total_cmp(&b.d).then_with(|| a.label.cmp(&b.label)));
    let first_failure_d = results.iter().find(|r| !r.stable).map(|r| r.d);
    let stable_radius_observed = results
        .iter()
        .filter(|r| first_failure_d.is_none_or(|f| r.d < f))
        .map(|r| r.d)
        .next_back();
    Ok(RobustnessProbe {
        kind: "empirical",
        results,
        first_failure_d,
        stable_radius_observed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::GridConfig;
    use crate::expr::parse;

    fn expr_plant(n: &str, d: &str) -> Factorization {
        Factorization::from_exprs(parse(n).unwrap(), parse(d).unwrap(), format!("{n};{d}")).unwrap()
    }

    fn quick() -> NuConfig {
        NuConfig {
            grid: GridConfig {
                n: 512,
                refine_iters: 20,
                ..GridConfig::default()
            },
            ..NuConfig::default()
        }
    }

    #[test]
    fn stable_plant_zero_controller() {
        let p = expr_plant("1/(s+1)", "1");
        let c = expr_plant("0", "1");
        let rep = closed_loop_check(&p, &c, &quick()).unwrap();
        assert!(rep.stable, "{:?}", rep.flags);
        assert_eq!(rep.denominator.final_index, Some(0));
        assert_eq!(rep.entry_sups[0], Some(0.0));
    }

    #[test]
    fn unstable_plant_zero_controller() {
        let p = expr_plant("1/(s+1)", "(s-1)/(s+1)");
        let c = expr_plant("0", "1");
        let rep = closed_loop_check(&p, &c, &quick()).unwrap();
        assert!(!rep.stable);
        assert_eq!(rep.denominator.final_index, Some(1));
    }

    #[test]
    fn probe_of_self() {
        let p = expr_plant("1/(s+1)", "1");
        let c = expr_plant("0", "1");
        let probe = robustness_probe(&p, &c, std::slice::from_ref(&p), &quick()).unwrap();
        assert_eq!(probe.results.len(), 1);
        assert_eq!(probe.results[0].d, 0.0);
        assert!(probe.results[0].stable);
        assert_eq!(probe.first_failure_d, None);
    }

    #[test]
    fn probe_requires_stable_nominal() {
        let p = expr_plant("1/(s+1)", "(s-1)/(s+1)");
        let c = expr_plant("0", "1");
        assert_eq!(
            robustness_probe(&p, &c, &[], &quick()).unwrap_err(),
            StabilityError::NominalUnstable
        );
    }
}
