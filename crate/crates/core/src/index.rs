//! Winding numbers on circles `|z| = r` and the index `lim_{r->1} w(f_r)`
//! used to certify the chordal branch of the nu-metric.

use std::f64::consts::{FRAC_PI_2, TAU};

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::boundary::{BoundaryError, CircleConfig, CircleGrid};
use crate::expr::{Complex, EvalFailure, EvalOutcome};
use crate::plants::{mobius_to_halfplane, Factorization};

/// Largest phase step accepted without bisecting.
pub const MAX_PHASE_STEP: f64 = FRAC_PI_2;
pub const MAX_BISECTION_DEPTH: u32 = 20;
pub const WINDING_RESIDUAL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndexError {
    #[error("zero too close to contour: min modulus {min_mod:e} vs max {max_mod:e}")]
    ZeroNearContour { min_mod: f64, max_mod: f64 },
    #[error("phase refinement exhausted near theta = {theta}")]
    PhaseRefinementExhausted { theta: f64 },
    #[error("evaluation failed at theta = {theta}: {failure}")]
    Evaluation { theta: f64, failure: EvalFailure },
    #[error("winding sum {turns} is not an integer")]
    Unresolved { turns: f64 },
    #[error("need at least two strictly increasing radii in (0,1), got {0:?}")]
    BadRadii(Vec<f64>),
    #[error(transparent)]
    Circle(#[from] BoundaryError),
}

/// `max(1e-9, 1e-6 * max_mod)`.
pub fn invertibility_tolerance(max_mod: f64) -> f64 {
    1e-9f64.max(1e-6 * max_mod)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleWinding {
    pub winding: i64,
    pub min_mod: f64,
    pub max_mod: f64,
}

struct Scan<'a, F> {
    f: &'a F,
    radius: f64,
    min_mod: f64,
    max_mod: f64,
}

impl<F> Scan<'_, F>
where
    F: Fn(Complex) -> EvalOutcome + Sync,
{
    fn at(&mut self, theta: f64) -> Result<Complex, IndexError> {
        let v = (self.f)(Complex::from_polar(self.radius, theta))
            .map_err(|failure| IndexError::Evaluation { theta, failure })?;
        self.see(v);
        Ok(v)
    }

    fn see(&mut self, v: Complex) {
        let m = v.norm();
        self.min_mod = self.min_mod.min(m);
        self.max_mod = self.max_mod.max(m);
    }

    /// Phase increment from `ta` to `tb`, bisecting while a step exceeds pi/2.
    fn increment(
        &mut self,
        ta: f64,
        va: Complex,
        tb: f64,
        vb: Complex,
        depth: u32,
    ) -> Result<f64, IndexError> {
        let step = (vb * va.conj()).arg();
        if step.abs() <= MAX_PHASE_STEP {
            return Ok(step);
        }
        if depth >= MAX_BISECTION_DEPTH {
            return Err(IndexError::PhaseRefinementExhausted { theta: ta });
        }
        let tm = 0.5 * (ta + tb);
        let vm = self.at(tm)?;
        Ok(self.increment(ta, va, tm, vm, depth + 1)?
            + self.increment(tm, vm, tb, vb, depth + 1)?)
    }
}

/// Winding number about 0 of `theta -> f(r e^{i theta})`, `theta` in `[0, 2pi)`.
///
/// `f` takes disc coordinates; compose with [`mobius_to_halfplane`] for
/// functions given on the half-plane.
pub fn winding_on_circle<F>(f: &F, r: f64, n: usize) -> Result<CircleWinding, IndexError>
where
    F: Fn(Complex) -> EvalOutcome + Sync,
{
    let grid = CircleGrid::new(r, n)?;
    let thetas = grid.thetas();
    let values = sample_circle(f, r, &thetas)?;
    winding_from_samples(f, r, &thetas, &values)
}

fn sample_circle<F>(f: &F, r: f64, thetas: &[f64]) -> Result<Vec<Complex>, IndexError>
where
    F: Fn(Complex) -> EvalOutcome + Sync,
{
    thetas
        .par_iter()
        .map(|&theta| {
            f(Complex::from_polar(r, theta))
                .map_err(|failure| IndexError::Evaluation { theta, failure })
        })
        .collect()
}

fn winding_from_samples<F>(
    f: &F,
    r: f64,
    thetas: &[f64],
    values: &[Complex],
) -> Result<CircleWinding, IndexError>
where
    F: Fn(Complex) -> EvalOutcome + Sync,
{
    let mut scan = Scan {
        f,
        radius: r,
        min_mod: f64::INFINITY,
        max_mod: 0.0,
    };
    values.iter().for_each(|&v| scan.see(v));
    if scan.min_mod <= invertibility_tolerance(scan.max_mod) {
        return Err(IndexError::ZeroNearContour {
            min_mod: scan.min_mod,
            max_mod: scan.max_mod,
        });
    }
    let n = thetas.len();
    let mut total = 0.0;
    for k in 0..n {
        let (tb, vb) = if k + 1 == n {
            (TAU, values[0])
        } else {
            (thetas[k + 1], values[k + 1])
        };
        total += scan.increment(thetas[k], values[k], tb, vb, 0)?;
    }
    if scan.min_mod <= invertibility_tolerance(scan.max_mod) {
        return Err(IndexError::ZeroNearContour {
            min_mod: scan.min_mod,
            max_mod: scan.max_mod,
        });
    }
    let turns = total / TAU;
    let winding = turns.round();
    if (turns - winding).abs() >= WINDING_RESIDUAL {
        return Err(IndexError::Unresolved { turns });
    }
    Ok(CircleWinding {
        winding: winding as i64,
        min_mod: scan.min_mod,
        max_mod: scan.max_mod,
    })
}

/// Outcome on a single radius.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusResult {
    pub radius: f64,
    pub winding: Option<i64>,
    pub min_mod: f64,
    pub max_mod: f64,
    /// Winding set to 0 because `Re f > 0` at every sample.
    pub positive_real_part: bool,
    pub error: Option<IndexError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexVerdict {
    /// Invertible on the largest radius, stabilized, index 0.
    ZeroIndex,
    NonzeroIndex,
    NotInvertible,
    NotStabilized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindingReport {
    pub per_radius: Vec<RadiusResult>,
    pub stabilized: bool,
    pub final_index: Option<i64>,
    pub invertible: bool,
}

impl WindingReport {
    pub fn verdict(&self) -> IndexVerdict {
        if !self.invertible {
            IndexVerdict::NotInvertible
        } else if !self.stabilized {
            IndexVerdict::NotStabilized
        } else if self.final_index == Some(0) {
            IndexVerdict::ZeroIndex
        } else {
            IndexVerdict::NonzeroIndex
        }
    }

    /// Invertible with stabilized index 0.
    pub fn condition_holds(&self) -> bool {
        self.verdict() == IndexVerdict::ZeroIndex
    }

    pub fn largest(&self) -> &RadiusResult {
        self.per_radius.last().expect("at least two radii")
    }
}

#[derive(Serialize)]
struct WindingReportJson {
    radii: Vec<f64>,
    windings: Vec<Option<i64>>,
    min_mods: Vec<f64>,
    stabilized: bool,
    index: Option<i64>,
    invertible: bool,
}

impl Serialize for WindingReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        WindingReportJson {
            radii: self.per_radius.iter().map(|r| r.radius).collect(),
            windings: self.per_radius.iter().map(|r| r.winding).collect(),
            min_mods: self.per_radius.iter().map(|r| r.min_mod).collect(),
            stabilized: self.stabilized,
            index: self.final_index,
            invertible: self.invertible,
        }
        .serialize(serializer)
    }
}

fn check_radii(radii: &[f64]) -> Result<(), IndexError> {
    let ok = radii.len() >= 2
        && radii.iter().all(|&r| r > 0.0 && r < 1.0)
        && radii.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(IndexError::BadRadii(radii.to_vec()))
    }
}

fn radius_pass<F>(f: &F, r: f64, n: usize) -> RadiusResult
where
    F: Fn(Complex) -> EvalOutcome + Sync,
{
    let thetas: Vec<f64> = (0..n).map(|k| TAU * k as f64 / n as f64).collect();
    let failed = |error: IndexError| RadiusResult {
        radius: r,
        winding: None,
        min_mod: match &error {
            IndexError::ZeroNearContour { min_mod, .. } => *min_mod,
            _ => 0.0,
        },
        max_mod: match &error {
            IndexError::ZeroNearContour { max_mod, .. } => *max_mod,
            _ => 0.0,
        },
        positive_real_part: false,
        error: Some(error),
    };
    let values = match sample_circle(f, r, &thetas) {
        Ok(v) => v,
        Err(e) => return failed(e),
    };
    let (min_mod, max_mod) = values.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
        (lo.min(v.norm()), hi.max(v.norm()))
    });
    // A positive real part rules out encircling the origin.
    if values.iter().all(|v| v.re > 0.0) && min_mod > invertibility_tolerance(max_mod) {
        return RadiusResult {
            radius: r,
            winding: Some(0),
            min_mod,
            max_mod,
            positive_real_part: true,
            error: None,
        };
    }
    match winding_from_samples(f, r, &thetas, &values) {
        Ok(w) => RadiusResult {
            radius: r,
            winding: Some(w.winding),
            min_mod: w.min_mod,
            max_mod: w.max_mod,
            positive_real_part: false,
            error: None,
        },
        Err(e) => failed(e),
    }
}

/// True when the three largest radii share a winding and `min |f|` over them
/// falls at least like `(1 - r)^(1/3)`: the function approaches a zero on the unit circle, so it has
/// no bounded inverse even though every sampled circle clears the tolerance.
pub fn boundary_zero_trend(per_radius: &[RadiusResult]) -> bool {
    let m = per_radius.len();
    if m < 3 {
        return false;
    }
    let tail = &per_radius[m - 3..];
    if tail.iter().any(|r| r.error.is_some() || r.min_mod <= 0.0) {
        return false;
    }
    let same_winding = tail.windows(2).all(|w| w[1].winding == w[0].winding);
    let decreasing = tail.windows(2).all(|w| w[1].min_mod < w[0].min_mod);
    let gap_ratio = (1.0 - tail[2].radius) / (1.0 - tail[0].radius);
    same_winding && decreasing && tail[2].min_mod / tail[0].min_mod <= gap_ratio.cbrt()
}

/// Index report for a function given in disc coordinates.
pub fn index_on_disc<F>(f: &F, cfg: &CircleConfig) -> Result<WindingReport, IndexError>
where
    F: Fn(Complex) -> EvalOutcome + Sync,
{
    check_radii(&cfg.radii)?;
    CircleGrid::new(cfg.radii[0], cfg.n)?;
    let per_radius: Vec<RadiusResult> = cfg
        .radii
        .par_iter()
        .map(|&r| radius_pass(f, r, cfg.n))
        .collect();

    let m = per_radius.len();
    let (outer, inner) = (&per_radius[m - 1], &per_radius[m - 2]);
    let clears =
        |r: &RadiusResult| r.error.is_none() && r.min_mod > invertibility_tolerance(r.max_mod);
    let invertible = clears(outer) && !boundary_zero_trend(&per_radius);
    let stabilized = invertible && clears(inner) && outer.winding == inner.winding;
    Ok(WindingReport {
        final_index: if stabilized { outer.winding } else { None },
        per_radius,
        stabilized,
        invertible,
    })
}

/// Index report for a function on the right half-plane, via `s = (1+z)/(1-z)`.
pub fn index_on_halfplane<F>(f: &F, cfg: &CircleConfig) -> Result<WindingReport, IndexError>
where
    F: Fn(Complex) -> EvalOutcome + Sync,
{
    index_on_disc(&|z| f(mobius_to_halfplane(z)?), cfg)
}

/// `conj(n1) n2 + conj(d1) d2`, conjugating values pointwise.
pub fn pair_function(f1: &Factorization, f2: &Factorization, s: Complex) -> EvalOutcome {
    let (n1, d1) = f1.both(s)?;
    let (n2, d2) = f2.both(s)?;
    Ok(n1.conj() * n2 + d1.conj() * d2)
}

pub fn index_of_pair(
    f1: &Factorization,
    f2: &Factorization,
    cfg: &CircleConfig,
) -> Result<WindingReport, IndexError> {
    index_on_halfplane(&|s| pair_function(f1, f2, s), cfg)
}
