use num_complex::Complex64;
use qgevrey::model::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn default() -> Scenario {
    Scenario::default_scenario().unwrap()
}

/// Constant kernel everywhere: no singularity anywhere, so every pair of
/// directions gives the same function.
fn constant_scenario() -> Scenario {
    let mut sc = default();
    let k = Kernel {
        amp: 1.0,
        constant: c(1.0, 0.5),
        poles: vec![],
        discrepancy: None,
    };
    sc.kernels = vec![k; 4];
    sc
}

#[test]
fn scenario_round_trips_through_json() {
    let sc = default();
    let s = serde_json::to_string(&sc).unwrap();
    let back: Scenario = serde_json::from_str(&s).unwrap();
    assert_eq!(sc, back);
    back.validate().unwrap();
}

#[test]
fn nested_assembly_matches_factorized_product() {
    let sc = default();
    for (p, eps) in [(0, c(0.25, 0.05)), (1, Complex64::from_polar(0.2, 0.7)), (2, c(-0.3, 0.02))] {
        let (t, z) = (c(0.3, 0.01), c(0.4, 0.2));
        let nested = assemble_solution(&sc, p, t, z, eps).unwrap();
        let fact = assemble_factorized(&sc, p, t, z, eps).unwrap();
        let diff = (nested.value - fact.value).norm();
        assert!(diff <= 1e-9 * fact.value.norm().max(1e-300), "p={p}: {diff:e}");
        assert!(nested.error < 1e-8 * fact.value.norm());
    }
}

#[test]
fn pole_free_kernel_is_direction_independent() {
    let sc = constant_scenario();
    let (t, z) = (c(0.3, 0.0), c(0.0, 0.1));
    for p in 0..4 {
        let n = sc.next(p);
        let (lo, hi) = sc.covering.overlap_arc(p);
        let eps = Complex64::from_polar(0.5 * sc.covering.overlap_radius(p), 0.5 * (lo + hi));
        let a = assemble_factorized(&sc, p, t, z, eps).unwrap().value;
        let b = assemble_factorized(&sc, n, t, z, eps).unwrap().value;
        assert!((a - b).norm() <= 1e-8 * a.norm(), "overlap {p}");
    }
}

#[test]
fn entire_kernel_difference_vanishes_on_intersecting_overlap() {
    let sc = constant_scenario();
    let tb = consecutive_difference(&sc, 0, &overlap_grid(&sc, 0)).unwrap();
    assert_eq!(tb.kind, OverlapKind::Intersecting);
    for r in &tb.rows {
        assert!(r.direct.norm() <= r.tolerance, "{:e} > {:e}", r.direct.norm(), r.tolerance);
        assert!(r.decomposed.norm() <= r.tolerance);
    }
}

#[test]
fn zero_kernel_gives_zero_solution() {
    let mut sc = default();
    sc.kernels[1] = Kernel::zero();
    let eps = Complex64::from_polar(0.2, 0.6);
    let v = assemble_solution(&sc, 1, c(0.2, 0.0), c(0.0, 0.0), eps).unwrap();
    assert_eq!(v.value, c(0.0, 0.0));
}

#[test]
fn decomposition_agrees_with_direct_difference() {
    let sc = default();
    for p in 0..sc.len() {
        let tb = consecutive_difference(&sc, p, &overlap_grid(&sc, p)).unwrap();
        assert!(tb.consistent(), "overlap {p}: ratio {}", tb.worst_ratio());
        let names: Vec<&str> = tb.rows[0].pieces.iter().map(|x| x.0.as_str()).collect();
        match tb.kind {
            OverlapKind::Intersecting => assert_eq!(names, ["I1", "I2", "I3"]),
            OverlapKind::Disjoint => assert_eq!(names, ["I1", "I2", "I4", "I5", "I6"]),
        }
    }
}

#[test]
fn points_outside_the_overlap_are_rejected() {
    let sc = default();
    let bad = [(c(0.3, 0.0), c(0.0, 0.0), c(-0.2, 0.0))];
    assert!(consecutive_difference(&sc, 0, &bad).is_err());
}

#[test]
fn kernels_pass_their_certification_grids() {
    let sc = default();
    for p in 0..sc.len() {
        for cert in [certify_kernel(&sc, p).unwrap(), certify_kernel_level1(&sc, p, 1.0).unwrap()] {
            assert_eq!(cert.violations, 0, "{cert:?}");
            assert!(cert.samples > 1000);
        }
    }
    for p in [1, 3] {
        let cert = certify_discrepancy(&sc, p).unwrap();
        assert_eq!(cert.violations, 0, "{cert:?}");
    }
}

#[test]
fn rates_split_by_overlap_kind() {
    let sc = default();
    for r in rate_dichotomy(&sc).unwrap() {
        assert!(r.within, "overlap {}: k_fit {} vs {}", r.overlap, r.fit.k_fit, r.expected_k);
    }
}

#[test]
fn invalid_scenarios_are_rejected() {
    let mut sc = default();
    sc.nu = 0.6;
    assert!(sc.validate().is_err());
    let mut sc = default();
    sc.rho_tilde = 0.6;
    assert!(sc.validate().is_err());
    let mut sc = default();
    sc.kernels[1] = sc.kernels[2].clone();
    assert!(sc.validate().is_err(), "kernels across an intersecting overlap must agree");
    let mut sc = default();
    if let Some(d) = sc.kernels[2].discrepancy.as_mut() {
        d.center = 0.2;
    }
    sc.kernels[3] = sc.kernels[2].clone();
    assert!(sc.validate().is_err(), "cut inside an arc");
}

#[test]
fn two_level_theorem_end_to_end_and_linearity() {
    let sc = default();
    let opts = TheoremOptions::default();
    let rep = verify_two_level_theorem(&sc, &opts).unwrap();
    assert!(!rep.degenerate);
    assert!(rep.split.reconstruction_error <= 1e-7);
    assert_eq!(rep.fits.len(), 2);
    assert!(rep.fits.iter().all(|f| f.fit.certified()));
    assert!(rep.corollary.as_ref().unwrap().holds);
    assert!(rep.certified);

    // every split piece of the scaled problem is ten times the original
    let (a, _, _) = split_solutions(&sc, &opts).unwrap();
    let (b, _, _) = split_solutions(&sc.scaled(10.0), &opts).unwrap();
    for pr in split_probes(&sc, opts.t0, 0.3).iter().step_by(7) {
        let p = a.level1.owner(pr.eps);
        for (x, y) in [
            (a.level1.psi(p, pr.t, pr.eps).unwrap(), b.level1.psi(p, pr.t, pr.eps).unwrap()),
            (a.level2.psi(p, pr.t, pr.eps).unwrap(), b.level2.psi(p, pr.t, pr.eps).unwrap()),
        ] {
            assert!((y - x * 10.0).norm() <= 1e-9 * (1.0 + y.norm()), "{x} {y}");
        }
    }
}

#[test]
fn wide_borel_sectors_degenerate_to_one_level() {
    let mut sc = default();
    sc.u_half_opening = 1.35;
    sc.kernels = vec![sc.kernels[0].clone(); 4];
    sc.validate().unwrap();
    let lv = sc.levels().unwrap();
    assert!(lv.degenerate && lv.i2.is_empty());
    let rep = verify_two_level_theorem(&sc, &TheoremOptions::default()).unwrap();
    assert!(rep.degenerate);
    assert_eq!(rep.fits.len(), 1);
    assert!(rep.split.reconstruction_error <= 1e-7);
}
