//! Jacobi theta function of order `k`:
//! `Theta(z) = sum_p q^(-p(p-1)/(2k)) z^p`.
//!
//! Evaluation is centred at the dominant index of the series, so the
//! truncation window `p0-P..=p0+P` has a relative tail bound that does not
//! depend on `z`. Values are returned in scaled form to survive the
//! `exp(k log^2|z| / (2 log q))` growth.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `|log|z||` accepted. Beyond it the phase `p0 * arg z` loses
/// accuracy and the scale leaves the range where results are meaningful.
pub const MAX_LOG_MODULUS: f64 = 1.0e5;

const SPIRAL_WINDOW: i64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaSpec {
    pub q: f64,
    pub k: f64,
    #[serde(rename = "P")]
    pub truncation: usize,
    pub tail_tol: f64,
    /// Calibrated constant of the lower growth bound, if any.
    #[serde(rename = "Cqk", default, skip_serializing_if = "Option::is_none")]
    pub cqk: Option<f64>,
}

/// A complex number `mantissa * exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub log_scale: f64,
    pub mantissa: Complex64,
}

impl Scaled {
    pub fn to_complex(self) -> Complex64 {
        self.mantissa * self.log_scale.exp()
    }

    pub fn log_abs(self) -> f64 {
        self.log_scale + self.mantissa.norm().ln()
    }

    pub fn mul(self, c: Complex64) -> Scaled {
        Scaled {
            log_scale: self.log_scale,
            mantissa: self.mantissa * c,
        }
    }

    /// `a / b` as an ordinary complex number.
    pub fn ratio(a: Scaled, b: Scaled) -> Complex64 {
        a.mantissa / b.mantissa * (a.log_scale - b.log_scale).exp()
    }
}

/// Relative tail `2 sum_{i>P} q^(-i(i-1)/(2k))` of the centred series.
pub fn tail_bound(q: f64, k: f64, p: usize) -> f64 {
    let a = q.ln() / k;
    let mut s = 0.0;
    let mut i = p as f64 + 1.0;
    loop {
        let t = (-0.5 * a * i * (i - 1.0)).exp();
        s += t;
        if t < 1e-30 * s || t == 0.0 {
            break;
        }
        i += 1.0;
    }
    2.0 * s
}

impl ThetaSpec {
    /// Smallest window half-width whose tail bound meets `tail_tol`.
    pub fn new(q: f64, k: f64, tail_tol: f64) -> Result<Self> {
        if !(q > 1.0 && q.is_finite()) || !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(format!("theta needs q > 1, k > 0 (q={q}, k={k})")));
        }
        if !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(Error::InvalidArgument(format!("tail_tol = {tail_tol} not in (0,1)")));
        }
        let mut p = 1;
        while tail_bound(q, k, p) > tail_tol {
            p += 1;
            if p > 100_000 {
                return Err(Error::InvalidArgument("theta truncation does not converge".into()));
            }
        }
        Ok(ThetaSpec {
            q,
            k,
            truncation: p,
            tail_tol,
            cqk: None,
        })
    }

    pub fn with_truncation(mut self, p: usize) -> Self {
        self.truncation = p.max(1);
        self
    }

    pub fn with_cqk(mut self, c: f64) -> Self {
        self.cqk = Some(c);
        self
    }

    /// Checks a deserialised spec: its stated `P` must meet its `tail_tol`.
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 1.0) || !(self.k > 0.0) || self.truncation == 0 {
            return Err(Error::InvalidArgument("invalid theta spec".into()));
        }
        let tail = tail_bound(self.q, self.k, self.truncation);
        if tail > self.tail_tol {
            return Err(Error::InvalidArgument(format!(
                "P = {} leaves a tail of {tail:e} > tail_tol = {:e}",
                self.truncation, self.tail_tol
            )));
        }
        Ok(())
    }

    fn a(&self) -> f64 {
        self.q.ln() / self.k
    }

    /// Scaled evaluation of the truncated series.
    pub fn eval_scaled(&self, z: Complex64) -> Result<Scaled> {
        if z == Complex64::new(0.0, 0.0) {
            return Err(Error::EssentialSingularity);
        }
        let x = z.norm().ln();
        if !x.is_finite() || x.abs() > MAX_LOG_MODULUS {
            return Err(Error::TruncationDomain { modulus: z.norm() });
        }
        let phi = z.arg();
        let a = self.a();
        let p0 = (x / a + 0.5).round();
        // log|w| with w = z q^(-p0/k), bounded by a/2 in modulus
        let lw = x - p0 * a;
        let n = self.truncation as i64;
        let mut sum = Complex64::new(0.0, 0.0);
        for j in -n..=n {
            let jf = j as f64;
            let lmod = jf * lw - 0.5 * a * jf * (jf - 1.0);
            sum += Complex64::from_polar(lmod.exp(), jf * phi);
        }
        let log_scale = -0.5 * a * p0 * (p0 - 1.0) + p0 * x;
        let phase = Complex64::from_polar(1.0, (p0 * phi) % std::f64::consts::TAU);
        Ok(Scaled {
            log_scale,
            mantissa: sum * phase,
        })
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let s = self.eval_scaled(z)?;
        let v = s.to_complex();
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::TruncationDomain { modulus: z.norm() });
        }
        Ok(v)
    }

    /// Natural log of the growth envelope `exp(k log^2|z| / (2 log q)) |z|^(1/2)`.
    pub fn log_envelope(&self, z: Complex64) -> f64 {
        let x = z.norm().ln();
        0.5 * self.k * x * x / self.q.ln() + 0.5 * x
    }

    /// `inf_m |1 + z q^(m/k)|` over all integers `m`, capped at 1.
    pub fn spiral_distance(&self, z: Complex64) -> Result<f64> {
        if z == Complex64::new(0.0, 0.0) {
            return Err(Error::EssentialSingularity);
        }
        let a = self.a();
        let x = z.norm().ln();
        let m0 = (-x / a).round() as i64;
        let mut best: f64 = 1.0;
        // | |w| - 1 | <= |1 + w| grows monotonically away from m0, so the
        // scan stops once it cannot beat the current best
        for dir in [1i64, -1] {
            let mut i = if dir == 1 { 0 } else { 1 };
            loop {
                let m = m0 + dir * i;
                let lw = x + a * m as f64;
                let w = Complex64::from_polar(lw.exp(), z.arg());
                best = best.min((w + 1.0).norm());
                if (lw.exp() - 1.0).abs() >= best || i > SPIRAL_WINDOW * 1000 {
                    break;
                }
                i += 1;
            }
        }
        Ok(best)
    }
}

/// Result of the q-difference check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QdiffResidual {
    pub value: f64,
    /// False when the shifted value vanished and an absolute residual was
    /// reported instead.
    pub relative: bool,
}

/// `|Theta(q^(m/k) z) - q^(m(m+1)/(2k)) z^m Theta(z)| / |Theta(q^(m/k) z)|`.
pub fn theta_qdiff_residual(spec: &ThetaSpec, z: Complex64, m: i32) -> Result<QdiffResidual> {
    if z == Complex64::new(0.0, 0.0) {
        return Err(Error::EssentialSingularity);
    }
    if m == 0 {
        spec.eval_scaled(z)?;
        return Ok(QdiffResidual {
            value: 0.0,
            relative: true,
        });
    }
    let mf = m as f64;
    let shift = (spec.q.ln() * mf / spec.k).exp();
    let lhs = spec.eval_scaled(z * shift)?;
    let base = spec.eval_scaled(z)?;
    // multiply base by q^(m(m+1)/(2k)) z^m in log form
    let log_factor = spec.q.ln() * mf * (mf + 1.0) / (2.0 * spec.k) + mf * z.norm().ln();
    let rhs = Scaled {
        log_scale: base.log_scale + log_factor,
        mantissa: base.mantissa * Complex64::from_polar(1.0, mf * z.arg()),
    };
    let lhs_abs = lhs.mantissa.norm();
    if lhs_abs == 0.0 {
        let diff = lhs.to_complex() - rhs.to_complex();
        return Ok(QdiffResidual {
            value: diff.norm(),
            relative: false,
        });
    }
    let diff = Complex64::new(1.0, 0.0) - Scaled::ratio(rhs, lhs);
    Ok(QdiffResidual {
        value: diff.norm(),
        relative: true,
    })
}

pub fn theta_eval(spec: &ThetaSpec, z: Complex64) -> Result<Complex64> {
    spec.eval(z)
}

/// Outcome of the lower growth bound at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaBound {
    pub lhs: f64,
    pub rhs: f64,
    pub log_lhs: f64,
    pub log_rhs: f64,
    pub margin_ok: bool,
}

/// `|Theta(z)| >= C_{q,k} delta_t exp(k log^2|z| / (2 log q)) |z|^(1/2)`
/// for `z` at distance more than `delta_t` from the zero spiral.
pub fn theta_lower_bound(spec: &ThetaSpec, z: Complex64, delta_t: f64) -> Result<ThetaBound> {
    let c = spec
        .cqk
        .ok_or_else(|| Error::InvalidArgument("theta spec carries no calibrated Cqk".into()))?;
    if !(delta_t > 0.0 && delta_t < 1.0) {
        return Err(Error::InvalidArgument(format!("delta_t = {delta_t} not in (0,1)")));
    }
    let dist = spec.spiral_distance(z)?;
    if dist <= delta_t {
        return Err(Error::SpiralProximity {
            z: format!("{z}"),
            infimum: dist,
            delta: delta_t,
        });
    }
    let log_lhs = spec.eval_scaled(z)?.log_abs();
    let log_rhs = c.ln() + delta_t.ln() + spec.log_envelope(z);
    Ok(ThetaBound {
        lhs: log_lhs.exp(),
        rhs: log_rhs.exp(),
        log_lhs,
        log_rhs,
        margin_ok: log_lhs >= log_rhs,
    })
}

/// Calibrates `C_{q,k}` as `0.9 * min |Theta(z)| / (dist(z) * envelope(z))`
/// over a polar grid of the fundamental annulus `1 <= |z| < q^(1/k)`.
///
/// The ratio `|Theta| / envelope` and the spiral distance are both invariant
/// under `z -> q^(1/k) z`, so the annulus minimum is the global one up to
/// grid resolution; the safety factor covers the resolution.
pub fn calibrate_cqk(spec: &ThetaSpec, radial: usize, angular: usize) -> Result<f64> {
    if radial == 0 || angular == 0 {
        return Err(Error::InvalidArgument("empty calibration grid".into()));
    }
    let a = spec.a();
    let mut best = f64::INFINITY;
    for i in 0..radial {
        let x = a * (i as f64 + 0.5) / radial as f64;
        for j in 0..angular {
            let phi = -std::f64::consts::PI + std::f64::consts::TAU * (j as f64 + 0.5) / angular as f64;
            let z = Complex64::from_polar(x.exp(), phi);
            let dist = spec.spiral_distance(z)?;
            if dist < 1e-3 {
                continue;
            }
            let ratio = (spec.eval_scaled(z)?.log_abs() - spec.log_envelope(z)).exp();
            best = best.min(ratio / dist);
        }
    }
    if !best.is_finite() || best <= 0.0 {
        return Err(Error::Degenerate("calibration grid produced no usable point".into()));
    }
    Ok(0.9 * best)
}

impl ThetaSpec {
    /// Returns a copy carrying a freshly calibrated constant.
    pub fn calibrated(self) -> Result<Self> {
        let c = calibrate_cqk(&self, 48, 192)?;
        Ok(self.with_cqk(c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct(q: f64, k: f64, z: Complex64, n: i64) -> Complex64 {
        (-n..=n)
            .map(|p| {
                let pf = p as f64;
                z.powi(p as i32) * q.powf(-pf * (pf - 1.0) / (2.0 * k))
            })
            .sum()
    }

    #[test]
    fn matches_direct_summation() {
        let s = ThetaSpec::new(2.0, 1.0, 1e-14).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let v = s.eval(one).unwrap();
        let d = direct(2.0, 1.0, one, 1000);
        assert!((v - d).norm() / d.norm() < 1e-14);
        let z = Complex64::new(0.7, -1.3);
        let v = s.eval(z).unwrap();
        let d = direct(2.0, 1.0, z, 60);
        assert!((v - d).norm() / d.norm() < 1e-13);
    }

    #[test]
    fn functional_equation() {
        let s = ThetaSpec::new(2.0, 1.0, 1e-14).unwrap();
        let z = Complex64::new(1.0, 0.5);
        let lhs = s.eval(z * 2.0).unwrap();
        let rhs = z * 2.0 * s.eval(z).unwrap();
        assert!((lhs - rhs).norm() / lhs.norm() < 1e-10);
        let s = ThetaSpec::new(1.5, 2.0, 1e-14).unwrap();
        let z = Complex64::from_polar(0.3, std::f64::consts::FRAC_PI_4);
        assert!(theta_qdiff_residual(&s, z, -2).unwrap().value < 1e-8);
        assert_eq!(theta_qdiff_residual(&s, z, 0).unwrap().value, 0.0);
    }

    #[test]
    fn zeros_on_negative_spiral() {
        let s = ThetaSpec::new(2.0, 2.0, 1e-15).unwrap();
        let z0 = Complex64::new(-(2.0f64).sqrt(), 0.0);
        let at = s.eval(z0).unwrap().norm();
        let env = s.log_envelope(z0).exp();
        assert!(at / env < 1e-13);
        // scan along the negative axis: the local minimum sits at the zero
        let ratio = |r: f64| {
            let z = Complex64::new(-r, 0.0);
            s.eval(z).unwrap().norm() / s.log_envelope(z).exp()
        };
        assert!(ratio(1.3) > 1e3 * ratio(2.0f64.sqrt()));
        assert!(ratio(1.5) > 1e3 * ratio(2.0f64.sqrt()));
    }

    #[test]
    fn domain_errors() {
        let s = ThetaSpec::new(2.0, 1.0, 1e-12).unwrap();
        assert!(matches!(s.eval(Complex64::new(0.0, 0.0)), Err(Error::EssentialSingularity)));
        assert!(matches!(s.eval(Complex64::new(1e-300, 0.0)), Err(Error::TruncationDomain { .. })));
        assert!(matches!(
            s.eval_scaled(Complex64::new(f64::INFINITY, 0.0)),
            Err(Error::TruncationDomain { .. })
        ));
        // far out the scaled form still works
        assert!(s.eval_scaled(Complex64::new(1e200, 1.0)).unwrap().log_abs().is_finite());
    }

    #[test]
    fn lower_bound_examples() {
        let s = ThetaSpec::new(2.0, 1.0, 1e-14).unwrap().calibrated().unwrap();
        for r in [0.1, 1.0, 10.0] {
            let z = Complex64::from_polar(r, std::f64::consts::FRAC_PI_3);
            assert!(theta_lower_bound(&s, z, 0.5).unwrap().margin_ok);
        }
        let e = theta_lower_bound(&s, Complex64::new(-2.0, 0.0), 0.1).unwrap_err();
        assert!(matches!(e, Error::SpiralProximity { .. }));
        for i in 0..50 {
            let r = 10f64.powf(3.0 * i as f64 / 49.0);
            let z = Complex64::from_polar(r, 1.0);
            let b = theta_lower_bound(&s, z, 0.5).unwrap();
            assert!(b.lhs / b.rhs >= 1.0);
        }
    }

    #[test]
    fn doubling_truncation_is_stable() {
        let s = ThetaSpec::new(3.0, 1.5, 1e-13).unwrap();
        let s2 = s.with_truncation(2 * s.truncation);
        for z in [Complex64::new(0.2, 0.9), Complex64::new(-40.0, 3.0), Complex64::new(1e-3, -1e-3)] {
            let a = s.eval_scaled(z).unwrap();
            let b = s2.eval_scaled(z).unwrap();
            // tail is relative to the dominant term, which is exp(log_scale)
            assert!((a.mantissa - b.mantissa).norm() <= s.tail_tol);
        }
    }

    #[test]
    fn spec_json_round_trip() {
        let s = ThetaSpec::new(2.0, 1.0, 1e-12).unwrap().with_cqk(0.25);
        let j = serde_json::to_value(s).unwrap();
        assert_eq!(j["P"], s.truncation);
        assert_eq!(j["Cqk"], 0.25);
        let back: ThetaSpec = serde_json::from_value(j).unwrap();
        assert_eq!(back, s);
        back.validate().unwrap();
        assert!(s.with_truncation(1).validate().is_err());
    }
}
