//! Runs the ten acceptance criteria and prints one PASS/FAIL line for each.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qgevrey::asymptotics::{corollary_check, fit_q_gevrey, fit_zero_gevrey_relative, sequential_domination, RemainderRow, RemainderTable};
use qgevrey::cocycle::{multilevel_split, SyntheticCocycle};
use qgevrey::equation::{validate_hypotheses, EquationSpec, TermData};
use qgevrey::model::{consecutive_difference, level_remainders, overlap_grid, rate_dichotomy, Scenario};
use qgevrey::poly::Poly;
use qgevrey::qcore::{make_qframe, GevreyScale, Level};
use qgevrey::qlaplace::{monomial_constant, qlaplace, CertifiedFunction, Monomial, QLaplaceSpec};
use qgevrey::special::{theta_lower_bound, theta_qdiff_residual, ThetaSpec};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const PAIRS: [(f64, f64); 3] = [(2.0, 1.0), (2.0, 2.0), (3.0, 0.5)];

fn theta_functional_equation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (q, k) in PAIRS {
        let spec = ThetaSpec::new(q, k, 1e-16).map_err(|e| e.to_string())?;
        let top = q.powf(1.0 / k);
        for _ in 0..50 {
            let z = Complex64::from_polar(rng.gen_range(1.0..top), rng.gen_range(-3.14..3.14));
            for m in -3..=3 {
                let r = theta_qdiff_residual(&spec, z, m).map_err(|e| e.to_string())?;
                worst = worst.max(r.value);
                count += 1;
            }
        }
    }
    check(worst <= 1e-10, format!("{count} checks, worst relative residual {worst:.2e}"))
}

fn theta_growth_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let delta = 0.05;
    let mut violations = 0;
    let mut total = 0;
    for (q, k) in PAIRS {
        let spec = ThetaSpec::new(q, k, 1e-16).and_then(|s| s.calibrated()).map_err(|e| e.to_string())?;
        let mut n = 0;
        while n < 200 {
            // independent of the calibration grid: random points over many annuli
            let z = Complex64::from_polar(rng.gen_range(-12.0f64..12.0).exp(), rng.gen_range(-3.14..3.14));
            match theta_lower_bound(&spec, z, delta) {
                Ok(b) => {
                    n += 1;
                    if !b.margin_ok {
                        violations += 1;
                    }
                }
                Err(qgevrey::Error::SpiralProximity { .. }) => continue,
                Err(e) => return Err(e.to_string()),
            }
        }
        total += n;
    }
    check(violations == 0, format!("{violations} violations on {total} admissible points"))
}

fn domination() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let q = 2.0f64;
    let mut violations = 0;
    for _ in 0..1000 {
        let k = rng.gen_range(0.25..4.0);
        let gamma = rng.gen_range(-3.0..3.0);
        let n = rng.gen_range(0..30u32);
        let abs_t = rng.gen_range(-20.0f64..2.0).exp();
        let big_k = rng.gen_range(0.1..10.0);
        let p = sequential_domination(k, gamma, big_k, q, n, abs_t).map_err(|e| e.to_string())?;
        // independent evaluation of both sides
        let x = abs_t.ln();
        let lhs = big_k.ln() + (gamma - n as f64) * x - k * x * x / (2.0 * q.ln());
        let rhs = big_k.ln() + q.ln() * (gamma - n as f64).powi(2) / (2.0 * k);
        let consistent = (p.log_lhs - lhs).abs() < 1e-9 * (1.0 + lhs.abs()) && (p.log_rhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs());
        if !p.holds() || lhs > rhs + 1e-12 * (1.0 + rhs.abs()) || !consistent {
            violations += 1;
        }
    }
    check(violations == 0, format!("{violations} violations in 1000 samples"))
}

fn qlaplace_power_law() -> Outcome {
    let (q, k, d) = (2.0f64, 1.0f64, 0.0);
    let mut worst_law: f64 = 0.0;
    let mut worst_refine: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut prev: Option<Complex64> = None;
    for n in 0..=5u32 {
        let c_fine = monomial_constant(q, k, d, n, 1e-13).map_err(|e| e.to_string())?;
        let c_coarse = monomial_constant(q, k, d, n, 1e-9).map_err(|e| e.to_string())?;
        worst_refine = worst_refine.max((c_fine / c_coarse - 1.0).norm());
        let f = Monomial { coef: Complex64::new(1.0, 0.0), n, k };
        let r1 = qgevrey::qlaplace::domain_radius(&f.certificate(), q, k).map_err(|e| e.to_string())?;
        // off the ray the nodes no longer line up with the reference point
        for (s, phase) in [(0.01, -0.3), (0.07, 0.1), (0.3, 0.35), (0.8, -0.15)] {
            let t = Complex64::from_polar(s * r1.min(1.0), phase);
            let spec = QLaplaceSpec::new(q, k, d).map_err(|e| e.to_string())?.with_tolerance(1e-13);
            let v = qlaplace(&spec, &f, t).map_err(|e| e.to_string())?.value;
            worst_law = worst_law.max((v / (c_fine * t.powu(n)) - 1.0).norm());
        }
        if let Some(p) = prev {
            // the q-difference relation of the kernel gives c_n / c_{n-1} = q^((n-1)/k)
            let expected = q.powf((n as f64 - 1.0) / k);
            worst_ratio = worst_ratio.max((c_fine / p / expected - 1.0).norm());
        }
        prev = Some(c_fine);
    }
    check(
        worst_law <= 1e-8 && worst_refine <= 1e-8 && worst_ratio <= 1e-8,
        format!("power law {worst_law:.2e}, refinement {worst_refine:.2e}, ratio law {worst_ratio:.2e}"),
    )
}

fn path_deformation(sc: &Scenario) -> Outcome {
    let mut worst: f64 = 0.0;
    for p in 0..sc.len() {
        let tb = consecutive_difference(sc, p, &overlap_grid(sc, p)).map_err(|e| e.to_string())?;
        worst = worst.max(tb.worst_ratio());
    }
    check(worst <= 10.0, format!("worst |direct - decomposed| / composed tolerance = {worst:.2e} (limit 10)"))
}

fn rate_split(sc: &Scenario) -> Outcome {
    let checks = rate_dichotomy(sc).map_err(|e| e.to_string())?;
    let detail = checks
        .iter()
        .map(|c| format!("overlap {} {:?}: k_fit {:.4} vs {}", c.overlap, c.kind, c.fit.k_fit, c.expected_k))
        .collect::<Vec<_>>()
        .join("; ");
    check(checks.iter().all(|c| c.within), detail)
}

fn multilevel_splitting() -> Outcome {
    let syn = SyntheticCocycle::default_with(2.0, 1.0, 2.0).map_err(|e| e.to_string())?;
    let c = syn.cocycle().map_err(|e| e.to_string())?;
    let t = Complex64::new(0.05, 0.01);
    let probes = syn.probes(t);
    let s = multilevel_split(&c, syn.scales(), syn.bounds(t.arg().abs()), &probes, 1e-8).map_err(|e| e.to_string())?;
    let rep = s.report(&probes).map_err(|e| e.to_string())?;
    let mut fits = Vec::new();
    for level in [Level::One, Level::Two] {
        let table = level_remainders(&s, level, 7).map_err(|e| e.to_string())?;
        let scale = match level {
            Level::One => syn.scales().0,
            Level::Two => syn.scales().1,
        };
        fits.push(fit_zero_gevrey_relative(&table, &scale).map_err(|e| e.to_string())?);
    }
    check(
        rep.reconstruction_error <= 1e-7 && rep.difference_error <= 1e-7 && fits.iter().all(|f| f.certified()),
        format!(
            "reconstruction {:.2e}, difference {:.2e}, fit violations {:.2e} / {:.2e}",
            rep.reconstruction_error, rep.difference_error, fits[0].max_violation, fits[1].max_violation
        ),
    )
}

/// Rows `C A^{N+1} shape |eps|^{N+1}` with multiplicative noise in `[0.95, 1.05]`.
fn planted(rng: &mut ChaCha8Rng, c: f64, a: f64, q_factor: Option<(f64, f64)>, scale: &GevreyScale) -> RemainderTable {
    let mut rows = Vec::new();
    for n in 0..=8usize {
        for &r in &[0.05, 0.1, 0.2] {
            let eps = Complex64::from_polar(r, 0.3);
            let shape = q_factor.map_or(1.0, |(k, q)| q.powf((n * (n + 1)) as f64 / (2.0 * k)));
            let noise = rng.gen_range(0.95..1.05);
            let t = Complex64::new(0.5 * scale.radius(n), 0.0);
            rows.push(RemainderRow { n, eps, t: Some(t), norm: c * a.powi(n as i32 + 1) * shape * r.powi(n as i32 + 1) * noise });
        }
    }
    RemainderTable::new(rows)
}

fn planted_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let scale = GevreyScale::new(Level::Two, 2.0, 2.0);
    let mut worst: f64 = 0.0;
    for &(c, a) in &[(1.0, 0.5), (3.0, 2.0), (0.2, 7.0), (10.0, 1.3)] {
        let g = fit_q_gevrey(&planted(&mut rng, c, a, Some((1.0, 2.0)), &scale), 1.0, 2.0).map_err(|e| e.to_string())?;
        let z = fit_zero_gevrey_relative(&planted(&mut rng, c, a, None, &scale), &scale).map_err(|e| e.to_string())?;
        worst = worst.max((g.a / a - 1.0).abs()).max((z.a / a - 1.0).abs());
    }
    check(worst <= 0.1, format!("worst relative error in A {worst:.3}"))
}

fn hypothesis_validator() -> Outcome {
    let base = EquationSpec {
        frame: make_qframe(2.0, 1.0, 2.0, 0.4, 0.4).map_err(|e| e.to_string())?,
        big_d: 3,
        d_d1: 1,
        d_d2: 4,
        terms: vec![TermData { big_delta: 1, d: 1, delta: 1 }, TermData { big_delta: 2, d: 2, delta: 2 }],
        q_poly: Poly::from_real(&[2.0, 0.0, 1.0]),
        r_polys: vec![Poly::from_real(&[1.0, 0.5]), Poly::constant(1.0)],
        r_d1: Poly::from_real(&[1.0, 1.0]),
        r_d2: Poly::from_real(&[2.0, -1.0]),
        mu: 3.0,
        beta: 1.0,
    };
    let edits: Vec<(Option<&str>, Box<dyn Fn(&mut EquationSpec)>)> = vec![
        (None, Box::new(|_| {})),
        (Some("H1.level_gap"), Box::new(|s| s.d_d2 = 2)),
        (Some("H1.Delta_ge_d"), Box::new(|s| s.terms[1].big_delta = 1)),
        (Some("H1.kappa_bound"), Box::new(|s| {
            s.d_d2 = 6;
            s.terms[1].delta = 3;
        })),
        (Some("H1.k1_bound"), Box::new(|s| {
            s.d_d1 = 5;
            s.d_d2 = 12;
            s.terms[1] = TermData { big_delta: 2, d: 1, delta: 3 };
        })),
        (Some("H1.k2_bound"), Box::new(|s| s.terms[1] = TermData { big_delta: 4, d: 4, delta: 3 })),
        (Some("H2.deg_Q"), Box::new(|s| {
            s.r_d1 = Poly::from_real(&[1.0, 0.0, 0.0, 1.0]);
            s.r_d2 = Poly::from_real(&[2.0, 0.0, 0.0, 1.0]);
            s.mu = 5.0;
        })),
        (Some("H2.deg_RD_equal"), Box::new(|s| s.r_d2 = Poly::constant(2.0))),
        (Some("H2.deg_R_l"), Box::new(|s| s.r_polys[1] = Poly::from_real(&[1.0, 0.0, 1.0]))),
        (Some("H2.mu"), Box::new(|s| s.mu = 2.0)),
        (Some("H2.Q_nonzero"), Box::new(|s| s.q_poly = Poly::from_real(&[1.0, 0.0, 1.0]))),
        (Some("H2.RD1_nonzero"), Box::new(|s| s.r_d1 = Poly::from_real(&[0.0, 1.0]))),
    ];
    let grid: Vec<f64> = (0..81).map(|i| -10.0 + 0.25 * i as f64).collect();
    let mut wrong = 0;
    for (expect, edit) in &edits {
        let mut s = base.clone();
        edit(&mut s);
        let rep = validate_hypotheses(&s, &grid).map_err(|e| e.to_string())?;
        let ok = match expect {
            None => rep.passed,
            Some(c) => !rep.passed && rep.clauses().contains(c),
        };
        if !ok {
            wrong += 1;
        }
    }
    // the manufactured-solution residual lives in the equation test suite; it
    // is recomputed here through the same closed-form oracle
    let residual = manufactured::worst_residual(&base).map_err(|e| e.to_string())?;
    check(
        wrong == 0 && residual <= 1e-8,
        format!("{wrong} misclassifications in {} cases, manufactured residual {residual:.2e} on 125 points", edits.len()),
    )
}

mod manufactured {
    use std::sync::Arc;

    use num_complex::Complex64;
    use qgevrey::equation::*;
    use qgevrey::poly::Poly;
    use qgevrey::special::{DecayProfile, HorizontalStrip};

    fn hermite(n: usize, z: Complex64) -> Complex64 {
        let (mut a, mut b) = (Complex64::new(1.0, 0.0), z);
        if n == 0 {
            return a;
        }
        for j in 1..n {
            let c = z * b - a * j as f64;
            a = b;
            b = c;
        }
        b
    }

    fn gaussian_derivative(p: &Poly, z: Complex64) -> Complex64 {
        p.coeffs()
            .iter()
            .enumerate()
            .map(|(j, c)| c * hermite(j, z) * if j % 2 == 0 { 1.0 } else { -1.0 })
            .sum::<Complex64>()
            * (-z * z / 2.0).exp()
    }

    fn amplitude(t: Complex64, eps: Complex64) -> Complex64 {
        t + eps * t * t
    }

    struct Candidate;

    impl FourierCandidate for Candidate {
        fn symbol(&self, t: Complex64, m: f64, eps: Complex64) -> Complex64 {
            amplitude(t, eps) * (-m * m / 2.0).exp()
        }
        fn profile(&self) -> DecayProfile {
            DecayProfile::new(60.0, 3.0, 1.0).unwrap()
        }
        fn t_radius(&self) -> f64 {
            1.0
        }
    }

    pub fn worst_residual(spec: &EquationSpec) -> qgevrey::Result<f64> {
        let q = spec.frame.q();
        let a = [Complex64::new(0.7, 0.0), Complex64::new(-0.3, 0.4)];
        let families: Vec<CoefficientFamily> = a
            .iter()
            .map(|&al| {
                Arc::new(move |p: usize, m: f64, _e: Complex64| if p == 0 { al * (-m * m / 2.0).exp() } else { Complex64::new(0.0, 0.0) })
                    as CoefficientFamily
            })
            .collect();
        let zero: CoefficientFamily = Arc::new(|_, _, _| Complex64::new(0.0, 0.0));
        let cs = CoefficientSeries::new(spec.frame, families, vec![30.0, 30.0], zero, 1.0, 1.0, 3.0, 1.0)?;
        let sp = spec.clone();
        let forcing = Forcing::Manufactured(Arc::new(move |s: Complex64, z: Complex64, eps: Complex64| {
            let t = s / q;
            let u = |tt: Complex64, p: &Poly| amplitude(tt, eps) * gaussian_derivative(p, z);
            let mut v = u(q * t, &sp.q_poly);
            for (dd, k, r) in [(sp.d_d1, sp.frame.k1(), &sp.r_d1), (sp.d_d2, sp.frame.k2(), &sp.r_d2)] {
                v -= (eps * t).powu(dd) * u(q.powf(dd as f64 / k + 1.0) * t, r);
            }
            for (l, term) in sp.terms.iter().enumerate() {
                let ts = q.powi(term.delta as i32) * t;
                v -= eps.powu(term.big_delta) * t.powu(term.d) * a[l] * (-z * z / 2.0).exp() * u(ts, &sp.r_polys[l]);
            }
            v
        }));
        let strip = HorizontalStrip::new(0.5, 1.0)?;
        let mut worst: f64 = 0.0;
        for i in 0..5 {
            let t = Complex64::from_polar(0.02 + 0.02 * i as f64, 0.1 * i as f64 - 0.2);
            for j in 0..5 {
                let z = Complex64::new(-1.0 + 0.5 * j as f64, 0.4 * (j as f64 / 4.0 - 0.5));
                for k in 0..5 {
                    let eps = Complex64::from_polar(0.05 + 0.06 * k as f64, 0.9 * k as f64);
                    let r = apply_equation_operator(spec, &cs, &forcing, &Candidate, t, z, eps, &strip)?;
                    worst = worst.max(r.norm());
                }
            }
        }
        Ok(worst)
    }
}

fn corollary() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let s1 = GevreyScale::new(Level::One, 2.0, 1.0);
    let s2 = GevreyScale::new(Level::Two, 2.0, 2.0);
    let (mut certified, mut counterexamples) = (0, 0);
    for case in 0..40 {
        let c = rng.gen_range(0.1..10.0);
        let a = rng.gen_range(0.2..5.0);
        let mut rows = Vec::new();
        for n in 0..=8usize {
            for _ in 0..4 {
                let eps = Complex64::from_polar(rng.gen_range(0.02..0.4), rng.gen_range(-1.0..1.0));
                // t anywhere in the level-two disc, so some rows leave the level-one disc
                let t = Complex64::new(rng.gen_range(0.01..0.99) * s2.radius(n), 0.0);
                let wobble = if case % 3 == 0 { rng.gen_range(0.3..3.0) } else { rng.gen_range(0.95..1.05) };
                rows.push(RemainderRow { n, eps, t: Some(t), norm: c * (a * eps.norm()).powi(n as i32 + 1) * wobble });
            }
        }
        let rep = corollary_check(&RemainderTable::new(rows), &s1, &s2).map_err(|e| e.to_string())?;
        if rep.level2.certified() {
            certified += 1;
            if !rep.holds {
                counterexamples += 1;
            }
        }
    }
    check(
        counterexamples == 0 && certified > 0,
        format!("{counterexamples} counterexamples among {certified} level-two certified tables"),
    )
}

fn main() {
    let sc = match Scenario::default_scenario() {
        Ok(sc) => sc,
        Err(e) => {
            println!("default scenario failed to build: {e}");
            std::process::exit(1);
        }
    };
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("theta functional equation", Box::new(theta_functional_equation)),
        ("theta growth bound", Box::new(theta_growth_bound)),
        ("log-Gaussian domination", Box::new(domination)),
        ("q-Laplace power law", Box::new(qlaplace_power_law)),
        ("path-deformation consistency", Box::new(|| path_deformation(&sc))),
        ("rate dichotomy", Box::new(|| rate_split(&sc))),
        ("multilevel splitting", Box::new(multilevel_splitting)),
        ("planted-parameter recovery", Box::new(planted_recovery)),
        ("hypothesis validator", Box::new(hypothesis_validator)),
        ("corollary restriction", Box::new(corollary)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(d) => println!("PASS {:>2} {name}: {d} [{secs:.1}s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d} [{secs:.1}s]", i + 1)
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
