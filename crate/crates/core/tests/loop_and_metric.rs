use nugap_core::boundary::{CircleConfig, GridConfig};
use nugap_core::expr::{parse, Complex};
use nugap_core::numetric::{
    coprime_margin, kappa_distance, kappa_pointwise, nu_metric, re_positivity_check, NuConfig,
};
use nugap_core::plants::{
    delay_pole_factorization, delay_zero_factorization, diffusion_factorization,
    retarded_factorization, Factorization, PlantSpec,
};
use nugap_core::stability::{closed_loop_check, robustness_probe};
use std::sync::Arc;

fn light() -> NuConfig {
    NuConfig {
        grid: GridConfig {
            n: 1024,
            refine_iters: 30,
            ..GridConfig::default()
        },
        circle: CircleConfig {
            n: 4096,
            ..CircleConfig::default()
        },
        record_sweep: false,
    }
}

fn gain(k: f64) -> Factorization {
    Factorization::from_exprs(
        parse(&k.to_string()).unwrap(),
        parse("1").unwrap(),
        format!("gain {k}"),
    )
    .unwrap()
}

fn spec(s: &str) -> Factorization {
    s.parse::<PlantSpec>().unwrap().build().unwrap()
}

#[test]
fn kappa_bounded_by_one_everywhere() {
    let pairs = [
        ("diffusion:a=0.2", "diffusion:a=0.9"),
        ("delay_pole:T=1,a=1", "delay_pole:T=2,a=3"),
        ("retarded:delta=0.3", "delay_zero:T=0.5,a=2,b=-1"),
        ("expr:n=1;d=s+1", "expr:n=-1;d=s+1"),
    ];
    for (a, b) in pairs {
        let (f, g) = (spec(a), spec(b));
        for k in -40..=40 {
            let y = 10f64.powf(k as f64 / 8.0) * if k % 2 == 0 { 1.0 } else { -1.0 };
            let v = kappa_pointwise(&f, &g, Complex::new(0.0, y)).unwrap();
            assert!((0.0..=1.0 + 1e-12).contains(&v), "{a} {b} y={y} kappa={v}");
        }
    }
}

#[test]
fn kappa_invariant_under_unit_multiplier() {
    let cfg = light();
    let f = diffusion_factorization(0.5).unwrap();
    let g = diffusion_factorization(0.75).unwrap();
    let unit = |s: Complex| Ok((s + 3.0) / (s + 1.0) * (-0.5 * s / (s + 4.0)).exp());
    let fu = f.scaled_by(Arc::new(unit), "scaled");
    let base = kappa_distance(&f, &g, &cfg).unwrap().value;
    let scaled = kappa_distance(&fu, &g, &cfg).unwrap().value;
    assert!((base - scaled).abs() < 1e-9, "{base} vs {scaled}");
    let rep = nu_metric(&fu, &g, &cfg).unwrap();
    assert!(rep.condition_held);
}

#[test]
fn delay_mismatch_positivity_holds_with_vanishing_infimum() {
    let f1 = delay_pole_factorization(1.0, 1.0).unwrap();
    let f2 = delay_pole_factorization(2.0, 1.0).unwrap();
    let narrow = re_positivity_check(
        &f1,
        &f2,
        &GridConfig {
            ymax: 1e2,
            n: 1024,
            ..GridConfig::default()
        },
    )
    .unwrap();
    let wide = re_positivity_check(
        &f1,
        &f2,
        &GridConfig {
            ymax: 1e6,
            n: 4096,
            ..GridConfig::default()
        },
    )
    .unwrap();
    assert!(narrow.holds && wide.holds);
    assert!(wide.min_re < narrow.min_re);
    assert!(wide.min_re < 1e-6);
}

#[test]
fn mismatched_delay_distance_is_one() {
    let rep = nu_metric(
        &spec("delay_pole:T=1,a=1"),
        &spec("delay_pole:T=2,a=1"),
        &light(),
    )
    .unwrap();
    assert!((rep.d - 1.0).abs() <= 0.01, "d = {}", rep.d);
}

#[test]
fn distance_between_plants_with_shared_boundary_zero() {
    // p = 1/(s-1) vs p = 1/(s+1): g vanishes at s = 0
    let f1 = spec("expr:n=1/(s+1);d=(s-1)/(s+1)");
    let f2 = spec("expr:n=1/(s+1);d=1");
    let rep = nu_metric(&f1, &f2, &light()).unwrap();
    assert!(!rep.condition_held);
    assert_eq!(rep.d, 1.0);
    assert!(rep.flags.iter().any(|f| f == "not-invertible"));
}

#[test]
fn zero_location_distance_grows_with_b() {
    let cfg = light();
    let base = delay_zero_factorization(1.0, 1.0, 0.0).unwrap();
    let ds: Vec<f64> = [0.02, 0.05, 0.1]
        .into_iter()
        .map(|b| {
            nu_metric(&base, &delay_zero_factorization(1.0, 1.0, b).unwrap(), &cfg)
                .unwrap()
                .d
        })
        .collect();
    assert!(ds.windows(2).all(|w| w[0] < w[1]), "{ds:?}");
}

#[test]
fn margins_reported_for_both_plants() {
    let rep = nu_metric(
        &spec("diffusion:a=0.5"),
        &spec("retarded:delta=0.1"),
        &light(),
    )
    .unwrap();
    assert!(rep.margins.p1.unwrap() > 0.0 && rep.margins.p2.unwrap() > 0.0);
    let m = coprime_margin(&retarded_factorization(0.1).unwrap(), &light().grid).unwrap();
    assert!((m.value - rep.margins.p2.unwrap()).abs() < 1e-12);
}

#[test]
fn report_json_shape() {
    let rep = nu_metric(
        &spec("diffusion:a=0.5"),
        &spec("diffusion:a=0.75"),
        &light(),
    )
    .unwrap();
    let v = serde_json::to_value(&rep).unwrap();
    for key in [
        "kappa",
        "d",
        "condition_held",
        "index",
        "margins",
        "flags",
        "diagnostics",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!(v.get("sweep").is_none());
    assert_eq!(v["diagnostics"]["index_method"], "radius-stabilization");
    assert_eq!(v["diagnostics"]["index_verdict"], "zero-index");
}

#[test]
fn gain_stabilizes_unstable_first_order_plant() {
    let p = retarded_factorization(0.0).unwrap();
    let cfg = light();
    assert!(closed_loop_check(&p, &gain(-2.0), &cfg).unwrap().stable);
    assert!(!closed_loop_check(&p, &gain(-0.5), &cfg).unwrap().stable);
    assert!(!closed_loop_check(&p, &gain(0.0), &cfg).unwrap().stable);
}

#[test]
fn zero_controller_stable_only_for_stable_plants() {
    let cfg = light();
    assert!(
        closed_loop_check(&spec("expr:n=1/(s+1);d=1"), &gain(0.0), &cfg)
            .unwrap()
            .stable
    );
    assert!(
        !closed_loop_check(
            &delay_pole_factorization(1.0, 1.0).unwrap(),
            &gain(0.0),
            &cfg
        )
        .unwrap()
        .stable
    );
    assert!(
        !closed_loop_check(&diffusion_factorization(0.5).unwrap(), &gain(0.0), &cfg)
            .unwrap()
            .stable
    );
}

#[test]
fn negative_gain_stabilizes_diffusion_plant() {
    let p = diffusion_factorization(0.5).unwrap();
    let rep = closed_loop_check(&p, &gain(-1.0), &light()).unwrap();
    assert!(rep.stable, "{:?}", rep.flags);
    assert!(rep.entry_sups.iter().all(|e| e.is_some_and(|v| v < 1e3)));
}

#[test]
fn robustness_probe_around_diffusion_plant() {
    let cfg = light();
    let p = diffusion_factorization(0.5).unwrap();
    let neighbours: Vec<Factorization> = [0.49, 0.51, 0.495, 0.505]
        .into_iter()
        .map(|a| diffusion_factorization(a).unwrap())
        .collect();
    let probe = robustness_probe(&p, &gain(-1.0), &neighbours, &cfg).unwrap();
    assert_eq!(probe.kind, "empirical");
    assert!(probe.results.windows(2).all(|w| w[0].d <= w[1].d));
    assert!(probe
        .results
        .iter()
        .all(|r| r.stable && r.condition_held && r.d < 0.05));
    assert!(probe.first_failure_d.is_none());
    assert_eq!(
        probe.stable_radius_observed,
        probe.results.last().map(|r| r.d)
    );
}

#[test]
fn robustness_probe_rejects_unstable_nominal_loop() {
    let p = retarded_factorization(0.0).unwrap();
    assert!(robustness_probe(&p, &gain(0.0), &[], &light()).is_err());
}

#[test]
fn far_plant_loses_stability_under_fixed_gain() {
    let cfg = light();
    let p = retarded_factorization(0.0).unwrap();
    let far = spec("expr:n=1;d=s-3");
    let near = retarded_factorization(0.05).unwrap();
    let probe = robustness_probe(&p, &gain(-2.0), &[near, far], &cfg).unwrap();
    assert!(probe.results[0].stable);
    assert!(!probe.results[1].stable);
    assert_eq!(probe.first_failure_d, Some(probe.results[1].d));
}
