//! Built-in plant families, their coprime factorizations over the half-plane
//! Hardy algebra, and the Möbius transplant between half-plane and disc.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{self, principal_sqrt, Complex, EvalFailure, EvalOutcome, Expr};

/// A function on the closed right half-plane.
pub type Evaluator = Arc<dyn Fn(Complex) -> EvalOutcome + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("denominator factor vanishes at every probe point")]
    ZeroDenominator,
    #[error("bad plant spec `{spec}`: {reason}")]
    BadSpec { spec: String, reason: String },
    #[error("in {which} formula: {source}")]
    Formula {
        which: &'static str,
        #[source]
        source: expr::ParseError,
    },
}

/// Interior probe points for structural checks on factor pairs.
pub fn interior_probes() -> [Complex; 16] {
    let mut pts = [Complex::new(0.0, 0.0); 16];
    for (k, p) in pts.iter_mut().enumerate() {
        let re = 0.3 + 0.45 * (k % 4) as f64;
        let im = -3.0 + 2.0 * (k / 4) as f64 + 0.17 * k as f64;
        *p = Complex::new(re, im);
    }
    pts
}

/// A coprime pair `(n, d)` with `p = n/d`, both factors bounded and holomorphic
/// on the right half-plane.
#[derive(Clone)]
pub struct Factorization {
    n: Evaluator,
    d: Evaluator,
    pub label: String,
    pub claims_coprime: bool,
}

impl fmt::Debug for Factorization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Factorization")
            .field("label", &self.label)
            .field("claims_coprime", &self.claims_coprime)
            .finish_non_exhaustive()
    }
}

impl Factorization {
    /// Rejects pairs whose `d` evaluates to zero (or fails) at all 16 probes.
    pub fn new(
        n: Evaluator,
        d: Evaluator,
        label: impl Into<String>,
        claims_coprime: bool,
    ) -> Result<Self, PlantError> {
        let nonzero = interior_probes()
            .iter()
            .any(|&s| d(s).is_ok_and(|v| v.norm() > 0.0));
        if !nonzero {
            return Err(PlantError::ZeroDenominator);
        }
        Ok(Factorization {
            n,
            d,
            label: label.into(),
            claims_coprime,
        })
    }

    pub fn from_exprs(n: Expr, d: Expr, label: impl Into<String>) -> Result<Self, PlantError> {
        let n = Arc::new(n);
        let d = Arc::new(d);
        Factorization::new(
            Arc::new(move |s| n.eval(s)),
            Arc::new(move |s| d.eval(s)),
            label,
            false,
        )
    }

    pub fn n(&self, s: Complex) -> EvalOutcome {
        (self.n)(s)
    }

    pub fn d(&self, s: Complex) -> EvalOutcome {
        (self.d)(s)
    }

    pub fn both(&self, s: Complex) -> Result<(Complex, Complex), EvalFailure> {
        Ok((self.n(s)?, self.d(s)?))
    }

    /// Transfer function `n(s)/d(s)`.
    pub fn plant(&self, s: Complex) -> EvalOutcome {
        let (n, d) = self.both(s)?;
        if d.norm() < expr::POLE_TOLERANCE {
            return Err(EvalFailure::PoleHit);
        }
        Ok(n / d)
    }

    /// `|n(s)|^2 + |d(s)|^2`.
    pub fn gram(&self, s: Complex) -> Result<f64, EvalFailure> {
        let (n, d) = self.both(s)?;
        Ok(n.norm_sqr() + d.norm_sqr())
    }

    /// The same plant with both factors multiplied by `u`.
    pub fn scaled_by(&self, u: Evaluator, label: impl Into<String>) -> Factorization {
        let (n, d) = (self.n.clone(), self.d.clone());
        let u2 = u.clone();
        Factorization {
            n: Arc::new(move |s| Ok(n(s)? * u(s)?)),
            d: Arc::new(move |s| Ok(d(s)? * u2(s)?)),
            label: label.into(),
            claims_coprime: self.claims_coprime,
        }
    }
}

fn one_plus(s: Complex) -> EvalOutcome {
    let den = s + 1.0;
    if den.norm() < expr::POLE_TOLERANCE {
        Err(EvalFailure::PoleHit)
    } else {
        Ok(den)
    }
}

fn finite(v: Complex) -> EvalOutcome {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else if v.re.is_nan() || v.im.is_nan() {
        Err(EvalFailure::Invalid)
    } else {
        Err(EvalFailure::Overflow)
    }
}

/// `exp(w) - 1` without cancellation for small `|w|`.
pub fn expm1(w: Complex) -> Complex {
    let half = (0.5 * w.im).sin();
    let re = w.re.exp_m1() * w.im.cos() - 2.0 * half * half;
    let im = w.re.exp() * w.im.sin();
    Complex::new(re, im)
}

/// Radius below which the diffusion evaluator switches to the Taylor ratio.
pub const SERIES_RADIUS: f64 = 0.25;
/// `Re z` above which the pure exponential forms are used.
pub const EXP_CROSSOVER: f64 = 0.25;

/// `sinh(c z)/z` as a degree-12 Taylor polynomial in `z`.
fn sinhc_series(c: f64, z: Complex) -> Complex {
    let z2 = z * z;
    // c^(2k+1) / (2k+1)! for k = 0..=6, Horner from the top
    let mut coeffs = [0.0; 7];
    let mut term = c;
    coeffs[0] = term;
    for (k, slot) in coeffs.iter_mut().enumerate().skip(1) {
        term *= c * c / ((2 * k) as f64 * (2 * k + 1) as f64);
        *slot = term;
    }
    coeffs
        .iter()
        .rev()
        .fold(Complex::new(0.0, 0.0), |acc, &a| acc * z2 + a)
}

/// `R_a(z) = sinh(a z)/sinh(z)` on `Re z >= 0`, finite at `z = 0`.
pub fn diffusion_ratio(a: f64, z: Complex) -> EvalOutcome {
    if z.norm() <= SERIES_RADIUS {
        return finite(sinhc_series(a, z) / sinhc_series(1.0, z));
    }
    if z.re >= 0.0 {
        // e^{-(1-a) z} (1 - e^{-2az}) / (1 - e^{-2z})
        let num = -expm1(-2.0 * a * z);
        let den = -expm1(-2.0 * z);
        if den.norm() < expr::POLE_TOLERANCE {
            return Err(EvalFailure::PoleHit);
        }
        return finite((-(1.0 - a) * z).exp() * num / den);
    }
    let den = z.sinh();
    if den.norm() < expr::POLE_TOLERANCE {
        return Err(EvalFailure::PoleHit);
    }
    finite((a * z).sinh() / den)
}

/// `tanh(a z)` via `(1 - e^{-2az})/(1 + e^{-2az})` on `Re z >= 0`.
pub fn stable_tanh(a: f64, z: Complex) -> EvalOutcome {
    let w = a * z;
    if z.re >= EXP_CROSSOVER {
        let e = (-2.0 * w).exp();
        return finite(-expm1(-2.0 * w) / (1.0 + e));
    }
    let v = w.tanh();
    finite(v)
}

/// `n_a(s) = R_a(sqrt s)/(sqrt s + 1)`.
pub fn diffusion_n(a: f64, s: Complex) -> EvalOutcome {
    let z = principal_sqrt(s);
    Ok(diffusion_ratio(a, z)? / one_plus(z)?)
}

/// `d_a(s) = sqrt s/(sqrt s + 1) * tanh(a sqrt s)`.
pub fn diffusion_d(a: f64, s: Complex) -> EvalOutcome {
    let z = principal_sqrt(s);
    Ok(z / one_plus(z)? * stable_tanh(a, z)?)
}

/// Diffusion plant `cosh(a sqrt s)/(sqrt s sinh sqrt s)` with point observation at `x = a`.
pub fn diffusion_factorization(a: f64) -> Result<Factorization, PlantError> {
    if !(a > 0.0 && a < 1.0) {
        return Err(PlantError::OutOfRange(format!(
            "diffusion needs 0 < a < 1, got {a}"
        )));
    }
    Factorization::new(
        Arc::new(move |s| diffusion_n(a, s)),
        Arc::new(move |s| diffusion_d(a, s)),
        format!("diffusion:a={a}"),
        true,
    )
}

fn check_delay(t: f64, a: f64) -> Result<(), PlantError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(PlantError::OutOfRange(format!(
            "delay T must be > 0, got {t}"
        )));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(PlantError::OutOfRange(format!(
            "pole a must be > 0, got {a}"
        )));
    }
    Ok(())
}

/// `e^{-sT} s/(s-a)` as `n = e^{-sT} s/(s+1)`, `d = (s-a)/(s+1)`.
pub fn delay_pole_factorization(t: f64, a: f64) -> Result<Factorization, PlantError> {
    check_delay(t, a)?;
    let mut f = delay_zero_factorization(t, a, 0.0)?;
    f.label = format!("delay_pole:T={t},a={a}");
    Ok(f)
}

/// `e^{-sT} (s-b)/(s-a)` as `n = e^{-sT}(s-b)/(s+1)`, `d = (s-a)/(s+1)`.
pub fn delay_zero_factorization(t: f64, a: f64, b: f64) -> Result<Factorization, PlantError> {
    check_delay(t, a)?;
    if !b.is_finite() {
        return Err(PlantError::OutOfRange(format!(
            "zero b must be finite, got {b}"
        )));
    }
    Factorization::new(
        Arc::new(move |s| finite((-s * t).exp() * (s - b) / one_plus(s)?)),
        Arc::new(move |s| Ok((s - a) / one_plus(s)?)),
        format!("delay_zero:T={t},a={a},b={b}"),
        true,
    )
}

/// `1/(s - (1+delta) e^{-s})` as `n = 1/(s+1)`, `d = (s - (1+delta)e^{-s})/(s+1)`.
pub fn retarded_factorization(delta: f64) -> Result<Factorization, PlantError> {
    if delta.is_nan() || delta.abs() >= 1.0 {
        return Err(PlantError::OutOfRange(format!(
            "retarded needs |delta| < 1, got {delta}"
        )));
    }
    Factorization::new(
        Arc::new(move |s| Ok(1.0 / one_plus(s)?)),
        Arc::new(move |s| finite((s - (1.0 + delta) * (-s).exp()) / one_plus(s)?)),
        format!("retarded:delta={delta}"),
        true,
    )
}

/// Disc to half-plane: `s = (1+z)/(1-z)`.
pub fn mobius_to_halfplane(z: Complex) -> EvalOutcome {
    let den = 1.0 - z;
    if den.norm() < expr::POLE_TOLERANCE {
        return Err(EvalFailure::PoleHit);
    }
    Ok((1.0 + z) / den)
}

/// Half-plane to disc: `z = (s-1)/(s+1)`.
pub fn mobius_to_disc(s: Complex) -> EvalOutcome {
    Ok((s - 1.0) / one_plus(s)?)
}

/// A point carried in one or both coordinate systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusPoint {
    pub s: Option<Complex>,
    pub z: Option<Complex>,
}

impl MobiusPoint {
    pub fn from_disc(z: Complex) -> Self {
        MobiusPoint {
            s: mobius_to_halfplane(z).ok(),
            z: Some(z),
        }
    }

    pub fn from_halfplane(s: Complex) -> Self {
        MobiusPoint {
            s: Some(s),
            z: mobius_to_disc(s).ok(),
        }
    }
}

/// Textual plant description, e.g. `diffusion:a=0.5` or `expr:n=1;d=(s-1)/(s+1)`.
#[derive(Debug, Clone, PartialEq)]
pub enum PlantSpec {
    Diffusion { a: f64 },
    DelayPole { t: f64, a: f64 },
    DelayZero { t: f64, a: f64, b: f64 },
    Retarded { delta: f64 },
    Expr { n: String, d: String },
}

impl PlantSpec {
    pub fn build(&self) -> Result<Factorization, PlantError> {
        match self {
            PlantSpec::Diffusion { a } => diffusion_factorization(*a),
            PlantSpec::DelayPole { t, a } => delay_pole_factorization(*t, *a),
            PlantSpec::DelayZero { t, a, b } => delay_zero_factorization(*t, *a, *b),
            PlantSpec::Retarded { delta } => retarded_factorization(*delta),
            PlantSpec::Expr { n, d } => {
                let ne =
                    expr::parse(n).map_err(|source| PlantError::Formula { which: "n", source })?;
                let de =
                    expr::parse(d).map_err(|source| PlantError::Formula { which: "d", source })?;
                Factorization::from_exprs(ne, de, format!("expr:n={n};d={d}"))
            }
        }
    }

    /// Non-fatal notes about parameters close to the edge of their range.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            PlantSpec::Diffusion { a }
                if *a > 0.0 && *a < 1.0 && (*a < 1e-3 || *a > 1.0 - 1e-3) =>
            {
                out.push(format!(
                    "diffusion parameter a={a} is within 1e-3 of the open interval (0,1) boundary; \
                     factor evaluation loses accuracy"
                ));
            }
            PlantSpec::Retarded { delta } if delta.abs() > 1.0 - 1e-3 && delta.abs() < 1.0 => {
                out.push(format!(
                    "retarded parameter delta={delta} is close to |delta| = 1"
                ));
            }
            _ => {}
        }
        out
    }
}

impl fmt::Display for PlantSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlantSpec::Diffusion { a } => write!(f, "diffusion:a={a}"),
            PlantSpec::DelayPole { t, a } => write!(f, "delay_pole:T={t},a={a}"),
            PlantSpec::DelayZero { t, a, b } => write!(f, "delay_zero:T={t},a={a},b={b}"),
            PlantSpec::Retarded { delta } => write!(f, "retarded:delta={delta}"),
            PlantSpec::Expr { n, d } => write!(f, "expr:n={n};d={d}"),
        }
    }
}

fn key_values(spec: &str, body: &str, keys: &[&str]) -> Result<Vec<f64>, PlantError> {
    let bad = |reason: String| PlantError::BadSpec {
        spec: spec.to_string(),
        reason,
    };
    let mut values = vec![None; keys.len()];
    for part in body.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key=value, got `{part}`")))?;
        let idx = keys
            .iter()
            .position(|key| *key == k.trim())
            .ok_or_else(|| bad(format!("unknown key `{}`", k.trim())))?;
        let x: f64 = v
            .trim()
            .parse()
            .map_err(|_| bad(format!("`{}` is not a number", v.trim())))?;
        values[idx] = Some(x);
    }
    keys.iter()
        .zip(values)
        .map(|(k, v)| v.ok_or_else(|| bad(format!("missing `{k}`"))))
        .collect()
}

impl FromStr for PlantSpec {
    type Err = PlantError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let (family, body) = spec.split_once(':').ok_or_else(|| PlantError::BadSpec {
            spec: spec.to_string(),
            reason: "expected `family:params`".into(),
        })?;
        let parsed = match family.trim() {
            "diffusion" => {
                let v = key_values(spec, body, &["a"])?;
                PlantSpec::Diffusion { a: v[0] }
            }
            "delay_pole" => {
                let v = key_values(spec, body, &["T", "a"])?;
                PlantSpec::DelayPole { t: v[0], a: v[1] }
            }
            "delay_zero" => {
                let v = key_values(spec, body, &["T", "a", "b"])?;
                PlantSpec::DelayZero {
                    t: v[0],
                    a: v[1],
                    b: v[2],
                }
            }
            "retarded" => {
                let v = key_values(spec, body, &["delta"])?;
                PlantSpec::Retarded { delta: v[0] }
            }
            "expr" => {
                let (n, d) = body.split_once(';').ok_or_else(|| PlantError::BadSpec {
                    spec: spec.to_string(),
                    reason: "expected `n=<formula>;d=<formula>`".into(),
                })?;
                let strip = |part: &str, key: &str| {
                    part.trim()
                        .strip_prefix(key)
                        .map(|rest| rest.to_string())
                        .ok_or_else(|| PlantError::BadSpec {
                            spec: spec.to_string(),
                            reason: format!("expected `{key}<formula>`"),
                        })
                };
                PlantSpec::Expr {
                    n: strip(n, "n=")?,
                    d: strip(d, "d=")?,
                }
            }
            other => {
                return Err(PlantError::BadSpec {
                    spec: spec.to_string(),
                    reason: format!("unknown family `{other}`"),
                })
            }
        };
        Ok(parsed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn close(a: Complex, b: Complex, rel: f64) -> bool {
        (a - b).norm() <= rel * b.norm().max(1e-300)
    }

    #[test]
    fn diffusion_half_at_one() {
        // sinh(0.5)/(2 sinh 1) and tanh(0.5)/2 to 18 digits.
        let f = diffusion_factorization(0.5).unwrap();
        let (n, d) = f.both(c(1.0, 0.0)).unwrap();
        assert!((n.re - 0.221_704_720_992_518_48).abs() < 1e-15, "{n}");
        assert!((d.re - 0.231_058_578_630_004_88).abs() < 1e-15, "{d}");
    }

    #[test]
    fn diffusion_ratio_is_transfer_function() {
        let a = 0.3;
        let s = c(1.0, 1.0);
        let f = diffusion_factorization(a).unwrap();
        let z = s.sqrt();
        let p = (a * z).cosh() / (z * z.sinh());
        assert!(close(f.plant(s).unwrap(), p, 1e-13));
    }

    #[test]
    fn diffusion_removable_singularity() {
        let f = diffusion_factorization(0.4).unwrap();
        for s in [c(0.0, 0.0), c(1e-9, 0.0), c(0.0, 1e-8), c(0.0, -1e-8)] {
            let (n, d) = f.both(s).unwrap();
            assert!((n - 0.4).norm() < 1e-3, "{s} -> {n}");
            assert!(d.norm() < 1e-4);
        }
        assert_eq!(f.both(c(0.0, 0.0)).unwrap(), (c(0.4, 0.0), c(0.0, 0.0)));
    }

    #[test]
    fn diffusion_series_and_exponential_forms_agree_at_crossover() {
        for a in [0.1, 0.5, 0.9] {
            for k in 0..32 {
                let phase =
                    -std::f64::consts::FRAC_PI_4 + k as f64 * std::f64::consts::FRAC_PI_2 / 31.0;
                let z = Complex::from_polar(SERIES_RADIUS, phase);
                let series = sinhc_series(a, z) / sinhc_series(1.0, z);
                let direct = (a * z).sinh() / z.sinh();
                assert!(close(series, direct, 1e-13), "a={a} z={z}");
            }
        }
    }

    #[test]
    fn diffusion_rejects_out_of_range() {
        for a in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(matches!(
                diffusion_factorization(a),
                Err(PlantError::OutOfRange(_))
            ));
        }
    }

    #[test]
    fn diffusion_far_out_on_the_axis() {
        let f = diffusion_factorization(0.5).unwrap();
        for y in [1e6, 1e10, 1e14, -1e12] {
            let (n, d) = f.both(c(0.0, y)).unwrap();
            assert!(n.norm() < 1e-3);
            assert!((d - 1.0).norm() < 1e-2);
        }
    }

    #[test]
    fn delay_pole_values() {
        let f = delay_pole_factorization(1.0, 2.0).unwrap();
        let (n, d) = f.both(c(1.0, 0.0)).unwrap();
        assert!((n - (-1.0f64).exp() / 2.0).norm() < 1e-16);
        assert!((d - (-0.5)).norm() < 1e-16);
        let g = delay_pole_factorization(1.0, 1.0).unwrap();
        let p = g.plant(c(2.0, 0.0)).unwrap();
        assert!(close(p, c(2.0 * (-2.0f64).exp(), 0.0), 1e-15));
    }

    #[test]
    fn delay_zero_reduces_to_pole_case() {
        let z = delay_zero_factorization(1.3, 0.7, 0.0).unwrap();
        let p = delay_pole_factorization(1.3, 0.7).unwrap();
        for s in interior_probes() {
            assert_eq!(z.n(s).unwrap(), p.n(s).unwrap());
        }
        let f = delay_zero_factorization(1.0, 1.0, 0.1).unwrap();
        let s = c(1.0, 2.0);
        let want = (-s).exp() * (s - 0.1) / (s - 1.0);
        assert!(close(f.plant(s).unwrap(), want, 1e-14));
    }

    #[test]
    fn retarded_values() {
        for delta in [-0.5, 0.0, 0.3] {
            let f = retarded_factorization(delta).unwrap();
            assert!((f.d(c(0.0, 0.0)).unwrap() + (1.0 + delta)).norm() < 1e-15);
        }
        let f = retarded_factorization(0.0).unwrap();
        let want = 1.0 / (1.0 - (-1.0f64).exp());
        assert!((f.plant(c(1.0, 0.0)).unwrap().re - want).abs() < 1e-14);
        assert!(retarded_factorization(1.0).is_err());
    }

    #[test]
    fn mobius_examples() {
        assert_eq!(mobius_to_halfplane(c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert!((mobius_to_disc(c(0.0, 1.0)).unwrap() - c(0.0, 1.0)).norm() < 1e-16);
        assert_eq!(mobius_to_halfplane(c(1.0, 0.0)), Err(EvalFailure::PoleHit));
        assert_eq!(mobius_to_disc(c(-1.0, 0.0)), Err(EvalFailure::PoleHit));
        let p = MobiusPoint::from_disc(c(0.5, 0.0));
        assert_eq!(p.s, Some(c(3.0, 0.0)));
    }

    #[test]
    fn zero_denominator_rejected() {
        let n: Evaluator = Arc::new(|_| Ok(c(1.0, 0.0)));
        let d: Evaluator = Arc::new(|_| Ok(c(0.0, 0.0)));
        assert_eq!(
            Factorization::new(n, d, "bad", false).unwrap_err(),
            PlantError::ZeroDenominator
        );
    }

    #[test]
    fn spec_round_trip() {
        for text in [
            "diffusion:a=0.5",
            "delay_pole:T=1,a=1",
            "delay_zero:T=1,a=1,b=0.1",
            "retarded:delta=0.05",
            "expr:n=1/(s+1);d=(s-1)/(s+1)",
        ] {
            let spec: PlantSpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
            spec.build().unwrap();
        }
    }

    #[test]
    fn spec_errors() {
        assert!("diffusion".parse::<PlantSpec>().is_err());
        assert!("diffusion:b=0.5".parse::<PlantSpec>().is_err());
        assert!("delay_pole:T=1".parse::<PlantSpec>().is_err());
        assert!("nope:a=1".parse::<PlantSpec>().is_err());
        assert!("expr:n=1".parse::<PlantSpec>().is_err());
        let bad: PlantSpec = "expr:n=1+;d=1".parse().unwrap();
        assert!(matches!(
            bad.build(),
            Err(PlantError::Formula { which: "n", .. })
        ));
        let near: PlantSpec = "diffusion:a=0.999999".parse().unwrap();
        assert_eq!(near.warnings().len(), 1);
    }
}
