//! Built-in numerical property suite: coprimeness margins, asymptotics and
//! parameter continuity of the diffusion factors, index axioms on test
//! functions, metric axioms and resolution stability of the estimate.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::expr::{Complex, EvalOutcome};
use crate::index::winding_on_circle;
use crate::numetric::{coprime_margin, kappa_distance, nu_metric, NuConfig};
use crate::plants::{
    diffusion_factorization, diffusion_ratio, stable_tanh, Factorization, PlantSpec,
};

pub const LARGE_S_MARGIN: f64 = 0.45;
pub const ASYMPTOTIC_T: f64 = 1e6;
pub const ASYMPTOTIC_TOL: f64 = 1e-3;
pub const IDENTITY_TOL: f64 = 1e-10;
pub const SYMMETRY_TOL: f64 = 1e-9;
pub const TRIANGLE_SLACK: f64 = 1e-6;
pub const RESOLUTION_TOL: f64 = 1e-4;
const TEST_RADIUS: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub nu: NuConfig,
    /// Diffusion parameter of the nominal plant.
    pub a: f64,
    /// Diffusion parameter of the comparison plant.
    pub a_tilde: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            nu: NuConfig::default(),
            a: 0.5,
            a_tilde: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
    pub warnings: Vec<String>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Fixed-width text table, one row per check.
    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        for c in &self.checks {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("{mark}  {:width$}  {}\n", c.name, c.detail));
        }
        let passed = self.checks.iter().filter(|c| c.passed).count();
        out.push_str(&format!("{passed}/{} checks passed\n", self.checks.len()));
        out
    }
}

fn outcome(name: &'static str, r: Result<(bool, String), String>) -> CheckResult {
    match r {
        Ok((passed, detail)) => CheckResult {
            name,
            passed,
            detail,
        },
        Err(detail) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {detail}"),
        },
    }
}

fn plant(a: f64) -> Result<Factorization, String> {
    diffusion_factorization(a).map_err(|e| e.to_string())
}

fn margins(cfg: &VerifyConfig) -> Result<(bool, String), String> {
    let mut ok = true;
    let mut parts = Vec::new();
    for a in [cfg.a, cfg.a_tilde, 0.1, 0.9] {
        let f = plant(a)?;
        let inf = coprime_margin(&f, &cfg.nu.grid)
            .map_err(|e| e.to_string())?
            .value;
        let far = [1e4, 1e6, 1e8, 1e12]
            .into_iter()
            .flat_map(|y| [y, -y])
            .map(|y| f.gram(Complex::new(0.0, y)).map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        ok &= inf > 0.0 && far >= LARGE_S_MARGIN;
        parts.push(format!("a={a}: inf={inf:.4e} far={far:.4}"));
    }
    Ok((ok, parts.join(", ")))
}

fn asymptotics(cfg: &VerifyConfig) -> Result<(bool, String), String> {
    let z = Complex::from_polar(ASYMPTOTIC_T, PI / 8.0);
    let mut worst = 0.0f64;
    for a in [cfg.a, cfg.a_tilde] {
        let g = z / (z + 1.0) * stable_tanh(a, z).map_err(|e| e.to_string())?;
        let f = diffusion_ratio(a, z).map_err(|e| e.to_string())? / (z + 1.0);
        worst = worst.max((g - 1.0).norm()).max(f.norm());
    }
    Ok((
        worst < ASYMPTOTIC_TOL,
        format!("max |g-1|, |f| at t={ASYMPTOTIC_T:e}: {worst:.3e}"),
    ))
}

fn continuity(cfg: &VerifyConfig) -> Result<(bool, String), String> {
    let ys = cfg.nu.grid.grid().map_err(|e| e.to_string())?.points();
    let base = plant(cfg.a)?;
    let mut gaps = Vec::new();
    for k in 0..5 {
        let other = plant(cfg.a + (cfg.a_tilde - cfg.a) / 2f64.powi(k))?;
        let mut gap = 0.0f64;
        for &y in &ys {
            let s = Complex::new(0.0, y);
            let (n1, d1) = base.both(s).map_err(|e| e.to_string())?;
            let (n2, d2) = other.both(s).map_err(|e| e.to_string())?;
            gap = gap.max((n1 - n2).norm()).max((d1 - d2).norm());
        }
        gaps.push(gap);
    }
    let shrinking = gaps.windows(2).all(|w| w[1] < w[0]);
    let shown: Vec<String> = gaps.iter().map(|g| format!("{g:.3e}")).collect();
    Ok((
        shrinking,
        format!("sup gaps under halving: [{}]", shown.join(", ")),
    ))
}

fn winding<F: Fn(Complex) -> EvalOutcome + Sync>(f: F, n: usize) -> Result<i64, String> {
    winding_on_circle(&f, TEST_RADIUS, n)
        .map(|w| w.winding)
        .map_err(|e| e.to_string())
}

fn p(z: Complex) -> Complex {
    (z - Complex::new(0.3, 0.2)) * (z + 0.5)
}

fn q(z: Complex) -> Complex {
    (z - Complex::new(-0.1, 0.6)) * (z * 0.2 + 1.0)
}

fn index_additivity(n: usize) -> Result<(bool, String), String> {
    let wp = winding(|z| Ok(p(z)), n)?;
    let wq = winding(|z| Ok(q(z)), n)?;
    let wpq = winding(|z| Ok(p(z) * q(z)), n)?;
    Ok((
        wpq == wp + wq,
        format!("w(pq)={wpq}, w(p)+w(q)={}", wp + wq),
    ))
}

fn index_conjugation(n: usize) -> Result<(bool, String), String> {
    let w = winding(|z| Ok(p(z)), n)?;
    let wc = winding(|z| Ok(p(z).conj()), n)?;
    Ok((wc == -w, format!("w(p)={w}, w(conj p)={wc}")))
}

fn index_positivity(n: usize) -> Result<(bool, String), String> {
    let w = winding(|z| Ok(2.0 + z * z * 0.5 + z.exp() * 0.3), n)?;
    Ok((w == 0, format!("w={w} for a positive-real-part function")))
}

fn index_monomials(n: usize) -> Result<(bool, String), String> {
    let got = (-3..=3)
        .map(|k| winding(move |z: Complex| Ok(z.powi(k)), n))
        .collect::<Result<Vec<_>, _>>()?;
    let want: Vec<i64> = (-3..=3).collect();
    Ok((got == want, format!("w(z^k), k=-3..3: {got:?}")))
}

fn metric_axioms(cfg: &VerifyConfig) -> Vec<CheckResult> {
    let run = || -> Result<[f64; 7], String> {
        let mid = 0.5 * (cfg.a + cfg.a_tilde);
        let (x, y, z) = (plant(cfg.a)?, plant(mid)?, plant(cfg.a_tilde)?);
        let d = |f: &Factorization, g: &Factorization| {
            nu_metric(f, g, &cfg.nu)
                .map(|r| r.d)
                .map_err(|e| e.to_string())
        };
        Ok([
            d(&x, &x)?,
            d(&x, &z)?,
            d(&z, &x)?,
            d(&x, &y)?,
            d(&y, &z)?,
            d(&y, &y)?,
            d(&z, &z)?,
        ])
    };
    match run() {
        Ok([xx, xz, zx, xy, yz, yy, zz]) => {
            let id = xx.max(yy).max(zz);
            vec![
                CheckResult {
                    name: "metric-identity",
                    passed: id < IDENTITY_TOL,
                    detail: format!("max d(p,p) = {id:.3e}"),
                },
                CheckResult {
                    name: "metric-symmetry",
                    passed: (xz - zx).abs() < SYMMETRY_TOL,
                    detail: format!("|d(p,q) - d(q,p)| = {:.3e}", (xz - zx).abs()),
                },
                CheckResult {
                    name: "metric-triangle",
                    passed: xz <= xy + yz + TRIANGLE_SLACK,
                    detail: format!("d(p,r)={xz:.6} <= d(p,q)+d(q,r)={:.6}", xy + yz),
                },
            ]
        }
        Err(e) => ["metric-identity", "metric-symmetry", "metric-triangle"]
            .into_iter()
            .map(|name| outcome(name, Err(e.clone())))
            .collect(),
    }
}

fn resolution(cfg: &VerifyConfig) -> Result<(bool, String), String> {
    let (f1, f2) = (plant(cfg.a)?, plant(cfg.a_tilde)?);
    let fine_cfg = NuConfig {
        grid: cfg.nu.grid.doubled(),
        ..cfg.nu.clone()
    };
    let coarse = kappa_distance(&f1, &f2, &cfg.nu).map_err(|e| e.to_string())?;
    let fine = kappa_distance(&f1, &f2, &fine_cfg).map_err(|e| e.to_string())?;
    let change = (coarse.value - fine.value).abs();
    Ok((
        change < RESOLUTION_TOL,
        format!(
            "kappa {:.8} -> {:.8} on doubled grid, change {change:.3e}",
            coarse.value, fine.value
        ),
    ))
}

/// Runs every check; failures are recorded, never raised.
pub fn run_suite(cfg: &VerifyConfig) -> VerifyReport {
    let warnings = [cfg.a, cfg.a_tilde]
        .into_iter()
        .flat_map(|a| PlantSpec::Diffusion { a }.warnings())
        .collect();
    let n = cfg.nu.circle.n;
    let mut checks = vec![
        outcome("coprime-margins", margins(cfg)),
        outcome("asymptotics", asymptotics(cfg)),
        outcome("parameter-continuity", continuity(cfg)),
        outcome("index-additivity", index_additivity(n)),
        outcome("index-conjugation", index_conjugation(n)),
        outcome("index-positivity", index_positivity(n)),
        outcome("index-monomials", index_monomials(n)),
    ];
    checks.extend(metric_axioms(cfg));
    checks.push(outcome("resolution-stability", resolution(cfg)));
    VerifyReport { checks, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let rep = run_suite(&VerifyConfig::default());
        assert!(rep.all_passed(), "{}", rep.table());
        assert!(rep.warnings.is_empty());
    }

    #[test]
    fn coarse_grid_fails_resolution() {
        let mut cfg = VerifyConfig::default();
        cfg.nu.grid.n = 8;
        let rep = run_suite(&cfg);
        assert!(!rep.check("resolution-stability").unwrap().passed);
        assert!(rep.check("index-monomials").unwrap().passed);
        assert!(!rep.all_passed());
    }

    #[test]
    fn near_edge_parameter_warns() {
        let cfg = VerifyConfig {
            a: 0.999999,
            ..VerifyConfig::default()
        };
        let rep = run_suite(&cfg);
        assert_eq!(rep.warnings.len(), 1);
        assert!(rep.warnings[0].contains("0.999999"));
    }

    #[test]
    fn table_lists_every_check() {
        let rep = VerifyReport {
            checks: vec![
                CheckResult {
                    name: "x",
                    passed: true,
                    detail: "ok".into(),
                },
                CheckResult {
                    name: "longer",
                    passed: false,
                    detail: "bad".into(),
                },
            ],
            warnings: vec!["careful".into()],
        };
        let t = rep.table();
        assert!(t.contains("warning: careful"));
        assert!(t.contains("PASS  x       ok"));
        assert!(t.contains("FAIL  longer  bad"));
        assert!(t.ends_with("1/2 checks passed\n"));
    }
}
