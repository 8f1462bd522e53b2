use std::fmt::Write as _;

use nugap_core::boundary::{make_axis_grid, MIN_CIRCLE_POINTS};
use nugap_core::numetric::{coprime_margin, kappa_distance, nu_metric, NuConfig};
use nugap_core::plants::{Factorization, PlantSpec};
use nugap_core::stability::{closed_loop_check, robustness_probe};
use nugap_core::verify::{run_suite, VerifyConfig};
use nugap_core::{index_of_pair, CircleConfig, GridConfig};
use serde_json::json;

use crate::args::{Command, Format, PlantArgs, Settings, VerifyArgs};
use crate::{EXIT_CONDITION, EXIT_NUMERIC, EXIT_OK};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numeric(String),
}

fn numeric(e: impl std::fmt::Display) -> Failure {
    Failure::Numeric(e.to_string())
}

pub fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Compute(a) => compute(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Index(a) => index(&a),
        Command::Margin(a) => margin(&a),
        Command::Stabilize(a) => stabilize(&a),
        Command::Verify(a) => verify(&a),
    }
}

fn nu_config(s: &Settings) -> NuConfig {
    let mut cfg = NuConfig::default();
    let g: &mut GridConfig = &mut cfg.grid;
    g.ymin = s.ymin.unwrap_or(g.ymin);
    g.ymax = s.ymax.unwrap_or(g.ymax);
    g.n = s.grid_n.unwrap_or(g.n);
    g.refine_iters = s.refine_iters.unwrap_or(g.refine_iters);
    let c: &mut CircleConfig = &mut cfg.circle;
    if let Some(r) = &s.radii {
        c.radii = r.clone();
    }
    c.n = s.circle_n.unwrap_or(c.n);
    cfg.record_sweep = s.sweep;
    cfg
}

fn validated(s: &Settings) -> Result<NuConfig, Failure> {
    let cfg = nu_config(s);
    make_axis_grid(cfg.grid.ymin, cfg.grid.ymax, cfg.grid.n)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let radii = &cfg.circle.radii;
    let radii_ok = radii.len() >= 2
        && radii.iter().all(|&r| r > 0.0 && r < 1.0)
        && radii.windows(2).all(|w| w[0] < w[1]);
    if !radii_ok {
        return Err(Failure::Usage(format!(
            "--radii needs at least two increasing values in (0, 1), got {radii:?}"
        )));
    }
    if cfg.circle.n < MIN_CIRCLE_POINTS {
        return Err(Failure::Usage(format!(
            "--circle-n must be at least {MIN_CIRCLE_POINTS}, got {}",
            cfg.circle.n
        )));
    }
    Ok(cfg)
}

struct Plant {
    text: String,
    fact: Factorization,
}

fn build(text: &str) -> Result<Plant, Failure> {
    let spec: PlantSpec = text.parse().map_err(|e| Failure::Usage(format!("{e}")))?;
    for w in spec.warnings() {
        eprintln!("warning: {w}");
    }
    let fact = spec.build().map_err(|e| Failure::Usage(format!("{e}")))?;
    Ok(Plant {
        text: text.to_string(),
        fact,
    })
}

fn plants(a: &PlantArgs, min: usize, max: Option<usize>) -> Result<Vec<Plant>, Failure> {
    let specs = a.specs();
    if specs.len() < min || max.is_some_and(|m| specs.len() > m) {
        let want = match max {
            Some(m) if m == min => format!("{min}"),
            Some(m) => format!("{min} to {m}"),
            None => format!("at least {min}"),
        };
        return Err(Failure::Usage(format!(
            "expected {want} plant spec(s), got {}",
            specs.len()
        )));
    }
    specs.iter().map(|s| build(s)).collect()
}

fn emit(settings: &Settings, text: &str) -> Result<(), Failure> {
    match &settings.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &impl serde::Serialize) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(v).map_err(numeric)?;
    s.push('\n');
    Ok(s)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Shortest round-trip decimal; exponent form outside `[1e-5, 1e16)`.
fn num(x: f64) -> String {
    let m = x.abs();
    if m == 0.0 || (1e-5..1e16).contains(&m) || !m.is_finite() {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn no_csv(settings: &Settings, command: &str) -> Result<(), Failure> {
    if settings.format == Some(Format::Csv) {
        return Err(Failure::Usage(format!("`{command}` has no csv output")));
    }
    Ok(())
}

fn compute(a: &PlantArgs) -> Result<u8, Failure> {
    let cfg = validated(&a.settings)?;
    let p = plants(a, 2, Some(2))?;
    let rep = nu_metric(&p[0].fact, &p[1].fact, &cfg).map_err(numeric)?;
    let text = match a.settings.format.unwrap_or(Format::Json) {
        Format::Json => pretty(&rep)?,
        Format::Csv => format!(
            "d,kappa,condition_held,index\n{},{},{},{}\n",
            num(rep.d),
            opt(rep.kappa),
            rep.condition_held,
            rep.index
                .final_index
                .map(|i| i.to_string())
                .unwrap_or_default()
        ),
    };
    emit(&a.settings, &text)?;
    Ok(if rep.condition_held {
        EXIT_OK
    } else {
        EXIT_CONDITION
    })
}

fn sweep(a: &PlantArgs) -> Result<u8, Failure> {
    let mut cfg = validated(&a.settings)?;
    cfg.record_sweep = true;
    let p = plants(a, 2, Some(2))?;
    let est = kappa_distance(&p[0].fact, &p[1].fact, &cfg).map_err(numeric)?;
    let samples = est.sweep.unwrap_or_default();
    let text = match a.settings.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut out = String::from("y,kappa\n");
            for (y, k) in &samples {
                writeln!(out, "{},{}", num(*y), num(*k)).expect("write to string");
            }
            out
        }
        Format::Json => pretty(&json!({
            "kappa_max": est.value,
            "argmax_y": est.argmax_y,
            "samples": samples.iter().map(|&(y, k)| [y, k]).collect::<Vec<_>>(),
        }))?,
    };
    emit(&a.settings, &text)?;
    Ok(EXIT_OK)
}

fn index(a: &PlantArgs) -> Result<u8, Failure> {
    let cfg = validated(&a.settings)?;
    let p = plants(a, 2, Some(2))?;
    let rep = index_of_pair(&p[0].fact, &p[1].fact, &cfg.circle).map_err(numeric)?;
    let text = match a.settings.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut v = serde_json::to_value(&rep).map_err(numeric)?;
            v["verdict"] = serde_json::to_value(rep.verdict()).map_err(numeric)?;
            pretty(&v)?
        }
        Format::Csv => {
            let mut out = String::from("radius,winding,min_mod\n");
            for r in &rep.per_radius {
                let w = r.winding.map(|w| w.to_string()).unwrap_or_default();
                writeln!(out, "{},{w},{}", num(r.radius), num(r.min_mod)).expect("write to string");
            }
            out
        }
    };
    emit(&a.settings, &text)?;
    Ok(if rep.condition_holds() {
        EXIT_OK
    } else {
        EXIT_CONDITION
    })
}

fn margin(a: &PlantArgs) -> Result<u8, Failure> {
    let cfg = validated(&a.settings)?;
    let p = plants(a, 1, None)?;
    let mut rows = Vec::new();
    for plant in &p {
        let m = coprime_margin(&plant.fact, &cfg.grid).map_err(numeric)?;
        rows.push((plant.text.clone(), m));
    }
    let text = match a.settings.format.unwrap_or(Format::Json) {
        Format::Json => pretty(
            &rows
                .iter()
                .map(|(t, m)| {
                    json!({
                        "plant": t,
                        "margin": m.value,
                        "argmin_y": m.argmax,
                        "samples": m.samples,
                        "failures": m.failures,
                        "at_contour_end": m.at_contour_end,
                    })
                })
                .collect::<Vec<_>>(),
        )?,
        Format::Csv => {
            let mut out = String::from("plant,margin,argmin_y\n");
            for (t, m) in &rows {
                writeln!(out, "{},{},{}", csv_field(t), num(m.value), num(m.argmax))
                    .expect("write to string");
            }
            out
        }
    };
    emit(&a.settings, &text)?;
    Ok(EXIT_OK)
}

fn stabilize(a: &PlantArgs) -> Result<u8, Failure> {
    no_csv(&a.settings, "stabilize")?;
    let cfg = validated(&a.settings)?;
    let controller = a
        .controller
        .as_deref()
        .ok_or_else(|| Failure::Usage("`stabilize` needs --controller".into()))?;
    let c = build(controller)?;
    let p = plants(a, 1, None)?;
    let lp = closed_loop_check(&p[0].fact, &c.fact, &cfg).map_err(numeric)?;
    let probe = if lp.stable && p.len() > 1 {
        let neighbours: Vec<Factorization> = p[1..].iter().map(|q| q.fact.clone()).collect();
        Some(robustness_probe(&p[0].fact, &c.fact, &neighbours, &cfg).map_err(numeric)?)
    } else {
        None
    };
    let text = pretty(&json!({ "loop": lp, "probe": probe }))?;
    emit(&a.settings, &text)?;
    Ok(if lp.stable { EXIT_OK } else { EXIT_CONDITION })
}

fn verify(a: &VerifyArgs) -> Result<u8, Failure> {
    let cfg = VerifyConfig {
        nu: nu_config(&a.settings),
        a: a.a,
        a_tilde: a.a_tilde,
    };
    for x in [cfg.a, cfg.a_tilde] {
        if !(x > 0.0 && x < 1.0) {
            return Err(Failure::Usage(format!(
                "diffusion parameter must lie in (0, 1), got {x}"
            )));
        }
    }
    let rep = run_suite(&cfg);
    let text = match a.settings.format {
        None => rep.table(),
        Some(Format::Json) => pretty(&rep)?,
        Some(Format::Csv) => {
            let mut out = String::from("check,passed,detail\n");
            for c in &rep.checks {
                writeln!(out, "{},{},{}", c.name, c.passed, csv_field(&c.detail))
                    .expect("write to string");
            }
            out
        }
    };
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    emit(&a.settings, &text)?;
    Ok(if rep.all_passed() {
        EXIT_OK
    } else {
        EXIT_NUMERIC
    })
}
