//! Property tests for the invariants of the cone, speed, pinching, surface,
//! flow, monitor and I/O layers.

use curvflow::cone::{cyl_distance, CurvatureTuple, SymmetricCone};
use curvflow::flow::stable_dt;
use curvflow::io::config::parse_config;
use curvflow::io::floats;
use curvflow::io::obj::{format_obj, parse_obj};
use curvflow::monitors::{log_sum_exp, max_rise};
use curvflow::pinching::{
    phi, quadratic_form_q, CylindricalG1, PinchingContext, PinchingKind, PinchingParams, SymTensor3,
};
use curvflow::speed::{indexed_rng, Speed};
use curvflow::surface::{ProfileSurface, Surface, TriMesh};
use curvflow::symmetric::SymmetricFunction;
use proptest::prelude::*;

fn tuple(v: &[f64]) -> CurvatureTuple {
    CurvatureTuple::from_slice(v).unwrap()
}

fn cones(n: usize) -> Vec<SymmetricCone> {
    let mut v: Vec<SymmetricCone> = (0..n).map(|m| SymmetricCone::m_convex(n, m).unwrap()).collect();
    v.push(SymmetricCone::positive(n).shrunken(0.1).unwrap());
    v
}

fn vec_in(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cone_membership_and_distance_are_permutation_invariant(z in vec_in(4), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut rng = indexed_rng(seed, 0);
        let mut p = z.clone();
        p.shuffle(&mut rng);
        let (a, b) = (tuple(&z), tuple(&p));
        for cone in cones(4) {
            prop_assert_eq!(cone.contains(&a).unwrap(), cone.contains(&b).unwrap());
            let (da, db) = (cone.normalized_boundary_distance(&a).unwrap(), cone.normalized_boundary_distance(&b).unwrap());
            prop_assert!((da - db).abs() <= 1e-14);
            for m in 0..4 {
                let (ca, cb) = (cyl_distance(&a, Some(m)).unwrap(), cyl_distance(&b, Some(m)).unwrap());
                prop_assert!((ca - cb).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn cone_is_scale_invariant(z in vec_in(3), lambda in 0.01..100.0f64) {
        prop_assume!(z.iter().map(|x| x * x).sum::<f64>() > 1e-6);
        let (a, b) = (tuple(&z), tuple(&z).scaled(lambda));
        for cone in cones(3) {
            prop_assert_eq!(cone.contains(&a).unwrap(), cone.contains(&b).unwrap());
            let (da, db) = (cone.normalized_boundary_distance(&a).unwrap(), cone.normalized_boundary_distance(&b).unwrap());
            prop_assert!((da - db).abs() <= 1e-12 * da.abs().max(1.0));
        }
    }

    #[test]
    fn cone_distance_sign_matches_membership(z in vec_in(5)) {
        let k = tuple(&z);
        for cone in cones(5) {
            let d = cone.normalized_boundary_distance(&k).unwrap();
            if cone.contains(&k).unwrap() {
                prop_assert!(d > 0.0);
            } else {
                prop_assert!(d <= 0.0);
            }
        }
    }

    #[test]
    fn cones_are_nested(z in vec_in(4)) {
        let k = tuple(&z);
        let inside: Vec<bool> = (0..4).map(|m| SymmetricCone::m_convex(4, m).unwrap().contains(&k).unwrap()).collect();
        for m in 1..4 {
            prop_assert!(!inside[m - 1] || inside[m]);
        }
        prop_assert_eq!(inside[3], z.iter().sum::<f64>() > 0.0);
    }

    #[test]
    fn speeds_satisfy_euler_and_homogeneity(seed in any::<u64>(), lambda in 0.05..20.0f64) {
        for n in [2, 3] {
            for speed in Speed::catalog(n) {
                let k = speed.sample_in(speed.cone(), seed, 0).unwrap();
                let z = k.values();
                let f = speed.evaluate(&k).unwrap();
                let g = speed.gradient(z);
                let euler: f64 = g.iter().zip(z).map(|(a, b)| a * b).sum();
                prop_assert!((euler - f).abs() <= 1e-10 * f.abs(), "{} {:?}", speed.name(), z);
                let fl = speed.evaluate(&k.scaled(lambda)).unwrap();
                prop_assert!((fl - lambda * f).abs() <= 1e-12 * lambda * f, "{}", speed.name());
                prop_assert!(g.iter().all(|d| *d > 0.0), "{} not monotone at {:?}", speed.name(), z);
            }
        }
    }

    #[test]
    fn concave_speeds_are_bounded_by_trace(seed in any::<u64>()) {
        let n = 3;
        for speed in Speed::catalog(n) {
            let k = speed.sample_in(speed.cone(), seed, 1).unwrap();
            let f = speed.evaluate(&k).unwrap();
            let c = speed.evaluate(&CurvatureTuple::ones(n)).unwrap() / n as f64;
            let bound = c * k.trace();
            let cv = speed.convexity();
            if cv.is_concave() {
                prop_assert!(f <= bound * (1.0 + 1e-12), "{}", speed.name());
            }
            if cv.is_convex() {
                prop_assert!(f >= bound * (1.0 - 1e-12), "{}", speed.name());
            }
        }
    }

    #[test]
    fn g_sigma_has_degree_sigma(seed in any::<u64>(), sigma in 0.01..0.49f64, lambda in prop::sample::select(vec![0.5, 2.0, 10.0])) {
        let speed = Speed::mean(3);
        let ctx = PinchingContext::new(speed.clone(), SymmetricCone::positive(3), PinchingParams {
            kind: PinchingKind::Cylindrical, m: 1, epsilon: 0.0, sigma, k_offset: 0.0, p: 2.0, theta_floor: vec![],
        }).unwrap();
        let k = speed.sample_in(&SymmetricCone::positive(3), seed, 2).unwrap();
        let a = ctx.g_sigma(&k, None, None).unwrap();
        let b = ctx.g_sigma(&k.scaled(lambda), None, None).unwrap();
        // d ln φ/dr ~ 2/r³ amplifies last-bit differences in r near the cutoff
        prop_assert!((b - lambda.powf(sigma) * a).abs() <= 1e-9 * b.abs().max(1e-300));
        let g = ctx.g(&k, None, None).unwrap();
        let gl = ctx.g(&k.scaled(lambda), None, None).unwrap();
        prop_assert!((gl - lambda * g).abs() <= 1e-9 * gl.abs().max(1e-300));
    }

    #[test]
    fn cylindrical_g1_vanishes_exactly_below_the_cylinder_ratio(seed in any::<u64>()) {
        let speed = Speed::two_harmonic(3);
        for m in 0..3 {
            let Ok(c) = speed.cylinder_constant(m) else { continue };
            let g1 = CylindricalG1::new(&speed, c);
            let k = speed.sample_in(speed.cone(), seed, m as u64).unwrap();
            let f = speed.evaluate(&k).unwrap();
            let below = k.max() <= c * f;
            let g = g1.value(k.values());
            // e^{-1/r^2} underflows for |r| < 0.0376, so zeros extend slightly past the boundary
            let clear = (c * f - k.max()) / f < -0.04;
            prop_assert!(!below || g == 0.0);
            prop_assert!(!clear || g > 0.0);
        }
    }

    #[test]
    fn q_is_antisymmetric_and_vanishes_on_the_diagonal(seed in any::<u64>()) {
        let mut rng = indexed_rng(seed, 3);
        let n = 3;
        let h = Speed::harmonic_mean(n);
        let nm = Speed::norm(n);
        let k = h.sample_in(h.cone(), seed, 4).unwrap();
        let t = SymTensor3::random_unit(&mut rng, n);
        let a = quadratic_form_q(&h, &nm, k.values(), &t).unwrap();
        let b = quadratic_form_q(&nm, &h, k.values(), &t).unwrap();
        prop_assert!((a + b).abs() <= 1e-12 * a.abs().max(1.0));
        prop_assert!(quadratic_form_q(&h, &h, k.values(), &t).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn phi_is_convex_and_non_increasing(r in -10.0..1.0f64) {
        let (v, d1, d2) = phi(r);
        prop_assert!(v >= 0.0 && d1 <= 0.0 && d2 >= 0.0);
    }

    #[test]
    fn float_text_round_trips(v in any::<f64>()) {
        let back = floats::parse(&floats::format(v)).unwrap();
        prop_assert!(back == v || (back.is_nan() && v.is_nan()));
    }

    #[test]
    fn log_sum_exp_matches_direct_sum(xs in prop::collection::vec(-30.0..30.0f64, 1..20)) {
        let direct = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        prop_assert!((log_sum_exp(&xs) - direct).abs() <= 1e-12 * direct.abs().max(1.0));
    }

    #[test]
    fn max_rise_is_zero_exactly_for_non_increasing(xs in prop::collection::vec(-5.0..5.0f64, 1..30)) {
        let non_increasing = xs.windows(2).all(|w| w[1] <= w[0]);
        prop_assert_eq!(max_rise(&xs) == 0.0, non_increasing);
        let brute = (0..xs.len()).flat_map(|i| (i..xs.len()).map(move |j| (i, j))).map(|(i, j)| xs[j] - xs[i]).fold(0.0, f64::max);
        prop_assert_eq!(max_rise(&xs), brute);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn stable_dt_follows_the_parabolic_scaling(lambda in 0.1..10.0f64) {
        let speed = Speed::harmonic_mean(2);
        let s = Surface::Profile(ProfileSurface::ellipsoid(2, 2.0, 1.0, 40).unwrap());
        let a = stable_dt(&s, &speed, 0.5, None).unwrap();
        let b = stable_dt(&s.scaled(lambda), &speed, 0.5, None).unwrap();
        prop_assert!((b - lambda * lambda * a).abs() <= 1e-10 * b);
    }

    #[test]
    fn obj_text_round_trips(level in 0usize..3, radius in 0.1..10.0f64) {
        let m = TriMesh::icosphere(level, radius).unwrap();
        prop_assert_eq!(parse_obj(&format_obj(&m)).unwrap(), m);
    }

    #[test]
    fn config_echo_round_trips(
        c_cfl in 0.01..0.99f64,
        every in 1usize..100,
        sigma in 0.01..0.49f64,
        m in 0usize..3,
        speed in prop::sample::select(vec!["mean_curvature", "harmonic_mean", "norm", "two_harmonic_mean"]),
    ) {
        let text = format!(r#"{{"command": "simulate", "n": 3, "speed": {{"speed": "{speed}"}},
            "shape": {{"shape": "ellipsoid", "a": 2.0, "b": 1.0, "c": 1.0}},
            "flow": {{"c_cfl": {c_cfl}, "snapshot_every": {every}}},
            "pinching": [{{"kind": "cylindrical", "m": {m}, "epsilon": 0.05, "sigma": {sigma}, "p": 4}}],
            "monitors": [{{"monitor": "lp_pinching", "context": 0}}, {{"monitor": "area_decay"}}]}}"#);
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(parse_config(&cfg.echo()).unwrap(), cfg);
    }
}
