//! Evaluation contours and adaptive extremum search over the imaginary axis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundaryError {
    #[error("bad grid range: need 0 < y_min < y_max, got [{y_min}, {y_max}]")]
    BadRange { y_min: f64, y_max: f64 },
    #[error("grid needs at least {min} points per sign, got {n}")]
    TooFewPoints { n: usize, min: usize },
    #[error("circle radius must lie in (0, 1), got {0}")]
    BadRadius(f64),
    #[error("every sample failed to evaluate")]
    AllPointsFailed,
    #[error("{failed} of {total} samples failed (limit 1%)")]
    ExcessiveFailures { failed: usize, total: usize },
}

pub const MIN_AXIS_POINTS: usize = 64;
pub const MIN_CIRCLE_POINTS: usize = 256;
/// Fraction of failed samples above which a sweep is rejected.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;
const REFINE_CANDIDATES: usize = 8;

/// Log-uniform samples of `y` on `[y_min, y_max]`, mirrored to negative `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisGrid {
    pub y_min: f64,
    pub y_max: f64,
    /// Positive half, strictly increasing, both endpoints exact.
    positive: Vec<f64>,
}

impl AxisGrid {
    pub fn count_per_sign(&self) -> usize {
        self.positive.len()
    }

    pub fn positive(&self) -> &[f64] {
        &self.positive
    }

    /// All sample points in ascending order: `-y_max .. -y_min, y_min .. y_max`.
    pub fn points(&self) -> Vec<f64> {
        self.positive
            .iter()
            .rev()
            .map(|y| -y)
            .chain(self.positive.iter().copied())
            .collect()
    }
}

pub fn make_axis_grid(y_min: f64, y_max: f64, n: usize) -> Result<AxisGrid, BoundaryError> {
    if !(y_min > 0.0 && y_min < y_max && y_max.is_finite()) {
        return Err(BoundaryError::BadRange { y_min, y_max });
    }
    if n < MIN_AXIS_POINTS {
        return Err(BoundaryError::TooFewPoints {
            n,
            min: MIN_AXIS_POINTS,
        });
    }
    let (lo, hi) = (y_min.ln(), y_max.ln());
    let step = (hi - lo) / (n - 1) as f64;
    let mut positive: Vec<f64> = (0..n).map(|k| (lo + step * k as f64).exp()).collect();
    positive[0] = y_min;
    positive[n - 1] = y_max;
    Ok(AxisGrid {
        y_min,
        y_max,
        positive,
    })
}

/// Uniform angles on a circle of radius `r` inside the unit disc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleGrid {
    pub radius: f64,
    pub count: usize,
}

impl CircleGrid {
    pub fn new(radius: f64, count: usize) -> Result<Self, BoundaryError> {
        if !(radius > 0.0 && radius < 1.0) {
            return Err(BoundaryError::BadRadius(radius));
        }
        if count < MIN_CIRCLE_POINTS {
            return Err(BoundaryError::TooFewPoints {
                n: count,
                min: MIN_CIRCLE_POINTS,
            });
        }
        Ok(CircleGrid { radius, count })
    }

    pub fn theta(&self, k: usize) -> f64 {
        std::f64::consts::TAU * k as f64 / self.count as f64
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.theta(k)).collect()
    }
}

/// Axis grid and refinement settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub ymin: f64,
    pub ymax: f64,
    pub n: usize,
    pub refine_iters: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            ymin: 1e-6,
            ymax: 1e6,
            n: 4096,
            refine_iters: 40,
        }
    }
}

impl GridConfig {
    pub fn grid(&self) -> Result<AxisGrid, BoundaryError> {
        make_axis_grid(self.ymin, self.ymax, self.n)
    }

    /// Twice the points and twice the refinement rounds.
    pub fn doubled(&self) -> GridConfig {
        GridConfig {
            n: 2 * self.n,
            refine_iters: 2 * self.refine_iters,
            ..*self
        }
    }
}

/// Disc circles used for winding numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CircleConfig {
    pub radii: Vec<f64>,
    pub n: usize,
}

impl Default for CircleConfig {
    fn default() -> Self {
        CircleConfig {
            radii: vec![0.9, 0.99, 0.999, 0.9999],
            n: 8192,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Extremum {
    Max,
    Min,
}

impl Extremum {
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Extremum::Max => a > b,
            Extremum::Min => a < b,
        }
    }
}

/// Result of an adaptive sup/inf search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupEstimate {
    pub kind: Extremum,
    pub value: f64,
    pub argmax: f64,
    pub refinement_depth: usize,
    pub failures: usize,
    pub samples: usize,
    /// Best value sits on `±y_min` or `±y_max`.
    pub at_contour_end: bool,
}

impl SupEstimate {
    pub fn failure_fraction(&self) -> f64 {
        self.failures as f64 / self.samples.max(1) as f64
    }
}

/// Grid samples plus the search result, for callers that also want the sweep.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub ys: Vec<f64>,
    pub values: Vec<Option<f64>>,
}

struct Tracker {
    kind: Extremum,
    best: Option<(f64, f64)>,
    failures: usize,
    samples: usize,
}

impl Tracker {
    fn offer(&mut self, y: f64, v: Option<f64>) {
        self.samples += 1;
        match v {
            Some(v) if v.is_finite() => {
                if self.best.is_none_or(|(bv, _)| self.kind.better(v, bv)) {
                    self.best = Some((v, y));
                }
            }
            _ => self.failures += 1,
        }
    }
}

pub fn adaptive_sup<F>(f: F, grid: &AxisGrid, iters: usize) -> Result<SupEstimate, BoundaryError>
where
    F: Fn(f64) -> Option<f64> + Sync,
{
    adaptive_extremum(&f, grid, iters, Extremum::Max).map(|(est, _)| est)
}

pub fn adaptive_inf<F>(f: F, grid: &AxisGrid, iters: usize) -> Result<SupEstimate, BoundaryError>
where
    F: Fn(f64) -> Option<f64> + Sync,
{
    adaptive_extremum(&f, grid, iters, Extremum::Min).map(|(est, _)| est)
}

/// Evaluate on the grid (in parallel), then golden-section refine around the
/// best local extrema of each sign. Deterministic for a fixed grid.
pub fn adaptive_extremum<F>(
    f: &F,
    grid: &AxisGrid,
    iters: usize,
    kind: Extremum,
) -> Result<(SupEstimate, Sweep), BoundaryError>
where
    F: Fn(f64) -> Option<f64> + Sync,
{
    let ys = grid.points();
    let values: Vec<Option<f64>> = ys
        .par_iter()
        .map(|&y| f(y).filter(|v| v.is_finite()))
        .collect();

    let mut tracker = Tracker {
        kind,
        best: None,
        failures: 0,
        samples: 0,
    };
    for (&y, &v) in ys.iter().zip(&values) {
        tracker.offer(y, v);
    }
    if tracker.best.is_none() {
        return Err(BoundaryError::AllPointsFailed);
    }
    if tracker.failures as f64 > MAX_FAILURE_FRACTION * tracker.samples as f64 {
        return Err(BoundaryError::ExcessiveFailures {
            failed: tracker.failures,
            total: tracker.samples,
        });
    }

    let m = grid.count_per_sign();
    let (neg, pos) = values.split_at(m);
    // negative half is stored ascending in y, i.e. descending in |y|
    let neg_by_abs: Vec<Option<f64>> = neg.iter().rev().copied().collect();
    for (sign, half) in [(-1.0, neg_by_abs.as_slice()), (1.0, pos)] {
        for idx in candidates(half, kind) {
            refine(f, grid, idx, sign, iters, &mut tracker);
        }
    }

    let (value, argmax) = tracker.best.expect("incumbent exists");
    let at_end = argmax.abs() == grid.y_min || argmax.abs() == grid.y_max;
    Ok((
        SupEstimate {
            kind,
            value,
            argmax,
            refinement_depth: iters,
            failures: tracker.failures,
            samples: tracker.samples,
            at_contour_end: at_end,
        },
        Sweep { ys, values },
    ))
}

/// Indices of the best discrete local extrema in one half of the grid.
fn candidates(half: &[Option<f64>], kind: Extremum) -> Vec<usize> {
    let n = half.len();
    let get = |i: usize| half[i];
    let mut local: Vec<(usize, f64)> = (0..n)
        .filter_map(|i| {
            let v = get(i)?;
            let left = if i == 0 { None } else { get(i - 1) };
            let right = if i + 1 == n { None } else { get(i + 1) };
            let ok = |o: Option<f64>| o.is_none_or(|o| !kind.better(o, v));
            (ok(left) && ok(right)).then_some((i, v))
        })
        .collect();
    local.sort_by(|a, b| {
        let ord = a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal);
        let ord = if kind == Extremum::Max {
            ord.reverse()
        } else {
            ord
        };
        ord.then(a.0.cmp(&b.0))
    });
    local.truncate(REFINE_CANDIDATES);
    local.into_iter().map(|(i, _)| i).collect()
}

/// Golden-section search in `log|y|` on the bracket around grid index `idx`.
fn refine<F>(f: &F, grid: &AxisGrid, idx: usize, sign: f64, iters: usize, tracker: &mut Tracker)
where
    F: Fn(f64) -> Option<f64> + Sync,
{
    if iters == 0 {
        return;
    }
    let pos = grid.positive();
    let lo_idx = idx.saturating_sub(1);
    let hi_idx = (idx + 1).min(pos.len() - 1);
    let (mut a, mut b) = (pos[lo_idx].ln(), pos[hi_idx].ln());
    let kind = tracker.kind;
    // Score so that larger is always better.
    let score = |v: Option<f64>| match (v, kind) {
        (Some(v), Extremum::Max) => v,
        (Some(v), Extremum::Min) => -v,
        (None, _) => f64::NEG_INFINITY,
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let eval = |t: f64, tracker: &mut Tracker| {
        let y = sign * t.exp();
        let v = f(y).filter(|v| v.is_finite());
        tracker.offer(y, v);
        score(v)
    };
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c, tracker);
    let mut fd = eval(d, tracker);
    for _ in 1..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c, tracker);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d, tracker);
        }
    }
}
