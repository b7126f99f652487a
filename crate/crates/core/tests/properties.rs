use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use proptest::prelude::*;

use qgevrey::asymptotics::{fit_q_gevrey, RemainderRow, RemainderTable};
use qgevrey::model::{fit_rate, CascadeRow, Discrepancy, Kernel, Pole};
use qgevrey::qlaplace::monomial_constant;
use qgevrey::special::{theta_lower_bound, theta_qdiff_residual, ThetaSpec};

fn calibrated() -> &'static ThetaSpec {
    static SPEC: OnceLock<ThetaSpec> = OnceLock::new();
    SPEC.get_or_init(|| ThetaSpec::new(2.0, 1.0, 1e-16).unwrap().calibrated().unwrap())
}

fn kernel() -> impl Strategy<Value = Kernel> {
    let pole = (0.5..3.0f64, -PI..PI, -2.0..2.0f64).prop_map(|(r, a, w)| Pole {
        at: Complex64::from_polar(r, a),
        weight: Complex64::new(w, 0.5 * w),
    });
    let disc = prop::option::of((-1.0..1.0f64, -PI..PI, 0.5..2.0f64).prop_map(|(c, center, order)| Discrepancy {
        coef: Complex64::new(c, 0.3 * c),
        center,
        order,
    }));
    (0.2..3.0f64, -1.0..1.0f64, prop::collection::vec(pole, 0..3), disc).prop_map(|(amp, c, poles, discrepancy)| Kernel {
        amp,
        constant: Complex64::new(c, -c / 2.0),
        poles,
        discrepancy,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn theta_satisfies_its_q_difference_equation(
        q in 1.2..6.0f64, k in 0.5..3.0f64, r in -3.0..3.0f64, a in -PI..PI, m in -3i32..=3,
    ) {
        let spec = ThetaSpec::new(q, k, 1e-16).unwrap();
        let z = Complex64::from_polar(r.exp(), a);
        // all coefficients are positive, so theta(|w|) / |theta(w)| is the
        // summation condition number at w
        let cond = |w: Complex64| {
            (spec.eval_scaled(Complex64::new(w.norm(), 0.0)).unwrap().log_abs() - spec.eval_scaled(w).unwrap().log_abs()).exp()
        };
        let shifted = z * (q.ln() * m as f64 / k).exp();
        let tol = 1e-13 * cond(z).max(cond(shifted)).max(1.0);
        let res = theta_qdiff_residual(&spec, z, m).unwrap();
        prop_assert!(res.value <= tol, "residual {:e} above {tol:e}", res.value);
    }

    #[test]
    fn theta_stays_above_its_growth_envelope(r in -8.0..8.0f64, a in -PI..PI, delta in 0.05..0.5f64) {
        let z = Complex64::from_polar(r.exp(), a);
        let spec = calibrated();
        prop_assume!(spec.spiral_distance(z).unwrap() > delta);
        let b = theta_lower_bound(spec, z, delta).unwrap();
        prop_assert!(b.margin_ok, "{b:?}");
    }

    #[test]
    fn kernel_difference_is_antisymmetric_and_exact(a in kernel(), b in kernel(), r in 0.05..4.0f64, t in -3.0..3.0f64) {
        let (q, u) = (2.0, Complex64::from_polar(r, t));
        let ab = a.difference(&b, u, q);
        let ba = b.difference(&a, u, q);
        let scale = 1.0 + a.g(u, q).norm() + b.g(u, q).norm();
        prop_assert!((ab + ba).norm() <= 1e-12 * scale);
        prop_assert!((ab - (b.g(u, q) - a.g(u, q))).norm() <= 1e-10 * scale);
        prop_assert!(a.difference(&a, u, q).norm() <= 1e-14 * scale);
    }

    #[test]
    fn rate_fit_recovers_planted_gaussian_decay(k in 0.5..4.0f64, b in -3.0..3.0f64, c in -5.0..5.0f64, q in 1.5..4.0f64) {
        let a = -k / (2.0 * q.ln());
        let rows: Vec<CascadeRow> = (3..12)
            .map(|j| {
                let x = -(j as f64) * q.ln() / k;
                CascadeRow { j, abs_et: x.exp(), norm: (a * x * x + b * x + c).exp() }
            })
            .collect();
        let fit = fit_rate(&rows, q).unwrap();
        prop_assert!((fit.k_fit - k).abs() <= 1e-6 * k, "{} vs {k}", fit.k_fit);
        prop_assert!(fit.residual_rms <= 1e-8);
    }

    #[test]
    fn laplace_constants_follow_the_ratio_law(q in 1.5..5.0f64, k in 0.5..3.0f64, n in 1u32..5) {
        let cur = monomial_constant(q, k, 0.0, n, 1e-12).unwrap();
        let prev = monomial_constant(q, k, 0.0, n - 1, 1e-12).unwrap();
        let expected = q.powf((n as f64 - 1.0) / k);
        prop_assert!((cur / prev / expected - 1.0).norm() <= 1e-9);
    }

    #[test]
    fn q_gevrey_fit_dominates_its_table(log_c in -3.0..3.0f64, log_a in -1.0..2.0f64, noise in prop::collection::vec(-0.5..0.5f64, 24)) {
        let (q, k) = (2.0f64, 1.5f64);
        let mut rows = Vec::new();
        for n in 0..8usize {
            for (i, &r) in [0.1f64, 0.2, 0.3].iter().enumerate() {
                let nf = n as f64;
                let log = log_c + (nf + 1.0) * (log_a + r.ln()) + nf * (nf + 1.0) / (2.0 * k) * q.ln() + noise[3 * n + i];
                rows.push(RemainderRow { n, eps: Complex64::new(r, 0.0), t: None, norm: log.exp() });
            }
        }
        let table = RemainderTable { rows };
        let fit = fit_q_gevrey(&table, k, q).unwrap();
        prop_assert!(fit.certified());
        prop_assert!(fit.violation(&table) <= 1e-9);
        prop_assert!((fit.a.ln() - log_a).abs() <= 0.5);
    }
}
