use nugap_core::boundary::CircleConfig;
use nugap_core::expr::Complex;
use nugap_core::index::{
    boundary_zero_trend, index_of_pair, index_on_disc, winding_on_circle, IndexVerdict,
};
use nugap_core::plants::{delay_pole_factorization, diffusion_factorization};
use proptest::prelude::*;

type Poly = Vec<Complex>;

fn eval_poly(p: &Poly, z: Complex) -> Complex {
    p.iter()
        .rev()
        .fold(Complex::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn coeff() -> impl Strategy<Value = Complex> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| Complex::new(re, im))
}

fn poly() -> impl Strategy<Value = Poly> {
    prop::collection::vec(coeff(), 1..5)
}

const R: f64 = 0.8;
const N: usize = 1024;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn winding_is_additive(p in poly(), q in poly()) {
        let f = |z: Complex| Ok(eval_poly(&p, z));
        let g = |z: Complex| Ok(eval_poly(&q, z).conj());
        let fg = |z: Complex| Ok(eval_poly(&p, z) * eval_poly(&q, z).conj());
        if let (Ok(wf), Ok(wg), Ok(wfg)) = (
            winding_on_circle(&f, R, N),
            winding_on_circle(&g, R, N),
            winding_on_circle(&fg, R, N),
        ) {
            prop_assert_eq!(wfg.winding, wf.winding + wg.winding);
        }
    }

    #[test]
    fn conjugation_flips_sign(p in poly()) {
        let f = |z: Complex| Ok(eval_poly(&p, z));
        let g = |z: Complex| Ok(eval_poly(&p, z).conj());
        if let Ok(wf) = winding_on_circle(&f, R, N) {
            prop_assert_eq!(winding_on_circle(&g, R, N).unwrap().winding, -wf.winding);
        }
    }

    #[test]
    fn locally_constant_under_small_perturbation(p in poly(), h in poly(), t in 0.0f64..1.0) {
        let f = |z: Complex| Ok(eval_poly(&p, z));
        if let Ok(wf) = winding_on_circle(&f, R, N) {
            // |h| <= sum |h_k| on the closed disc
            let h_norm: f64 = h.iter().map(|c| c.norm()).sum::<f64>().max(1e-300);
            let eps = t * 0.49 * wf.min_mod / h_norm;
            let g = |z: Complex| Ok(eval_poly(&p, z) + eps * eval_poly(&h, z));
            prop_assert_eq!(winding_on_circle(&g, R, N).unwrap().winding, wf.winding);
        }
    }

    #[test]
    fn positive_real_part_means_zero(p in poly()) {
        // shift so that Re > 0 on the circle
        let bound: f64 = p.iter().map(|c| c.norm()).sum();
        let f = |z: Complex| Ok(eval_poly(&p, z) + (bound + 0.1));
        prop_assert_eq!(winding_on_circle(&f, R, N).unwrap().winding, 0);
    }

    #[test]
    fn roots_inside_counted(roots in prop::collection::vec((0.0f64..0.7, 0.0f64..std::f64::consts::TAU), 0..5)) {
        let roots: Vec<Complex> = roots.into_iter().map(|(r, t)| Complex::from_polar(r, t)).collect();
        let f = |z: Complex| Ok(roots.iter().fold(Complex::new(1.0, 0.0), |acc, &c| acc * (z - c)));
        prop_assert_eq!(winding_on_circle(&f, 0.9, N).unwrap().winding, roots.len() as i64);
    }
}

#[test]
fn zero_free_function_has_index_zero() {
    // exp of a bounded function: invertible in H-infinity
    let rep = index_on_disc(
        &|z: Complex| Ok((3.0 * z + z * z).exp()),
        &CircleConfig::default(),
    )
    .unwrap();
    assert_eq!(rep.verdict(), IndexVerdict::ZeroIndex);
}

#[test]
fn inner_zero_has_index_one() {
    let rep = index_on_disc(
        &|z: Complex| Ok(z - Complex::new(0.3, -0.4)),
        &CircleConfig::default(),
    )
    .unwrap();
    assert_eq!(rep.final_index, Some(1));
    assert!(!rep.condition_holds());
}

#[test]
fn diffusion_self_pair_is_positive() {
    let f = diffusion_factorization(0.5).unwrap();
    let rep = index_of_pair(&f, &f, &CircleConfig::default()).unwrap();
    assert!(rep.condition_holds());
    assert!(rep.per_radius.iter().all(|r| r.positive_real_part));
}

#[test]
fn diffusion_neighbour_pair_has_index_zero() {
    let rep = index_of_pair(
        &diffusion_factorization(0.5).unwrap(),
        &diffusion_factorization(0.75).unwrap(),
        &CircleConfig::default(),
    )
    .unwrap();
    assert!(rep.invertible && rep.stabilized);
    assert_eq!(rep.final_index, Some(0));
    assert!(rep.per_radius.iter().all(|r| r.winding == Some(0)));
}

#[test]
fn delay_mismatch_pair_verdict() {
    // g has no zero inside and every circle clears the tolerance, but min |g|
    // keeps shrinking as r -> 1 (the infimum 0 is reached at s -> i*infinity)
    let rep = index_of_pair(
        &delay_pole_factorization(1.0, 1.0).unwrap(),
        &delay_pole_factorization(2.0, 1.0).unwrap(),
        &CircleConfig::default(),
    )
    .unwrap();
    let mins: Vec<f64> = rep.per_radius.iter().map(|r| r.min_mod).collect();
    assert!(mins.windows(2).all(|w| w[1] < w[0]), "{mins:?}");
    assert!(mins[3] < 0.1);
    assert!(rep.per_radius.iter().all(|r| r.winding == Some(0)));
    assert!(boundary_zero_trend(&rep.per_radius));
    assert_eq!(rep.verdict(), IndexVerdict::NotInvertible);
}

#[test]
fn radius_results_serialize_in_order() {
    let cfg = CircleConfig {
        radii: vec![0.5, 0.9, 0.99],
        n: 512,
    };
    let rep = index_on_disc(&|z: Complex| Ok(z - 0.7), &cfg).unwrap();
    let v = serde_json::to_value(&rep).unwrap();
    assert_eq!(v["radii"], serde_json::json!([0.5, 0.9, 0.99]));
    assert_eq!(v["windings"], serde_json::json!([0, 1, 1]));
    assert_eq!(v["index"], 1);
    assert_eq!(v["stabilized"], true);
}
