//! Global q-parameters and the scalar inequalities every estimate leans on.
//!
//! All logarithms in this crate are natural logarithms; `log(q)` always means
//! `q.ln()`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when checking exact algebraic identities in `f64`.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Relative tolerance used for checks that go through a quadrature.
pub const QUADRATURE_TOL: f64 = 1e-8;

/// The global parameters `q`, `k1 < k2` and the derived gap order `kappa`
/// with `1/kappa = 1/k1 - 1/k2`.
///
/// `kappa` is never read from input; it is always recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QFrameInput", into = "QFrameInput")]
pub struct QFrame {
    q: f64,
    k1: f64,
    k2: f64,
    kappa: f64,
    epsilon0: f64,
    r_t: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct QFrameInput {
    q: f64,
    k1: f64,
    k2: f64,
    epsilon0: f64,
    #[serde(rename = "rT")]
    r_t: f64,
}

impl TryFrom<QFrameInput> for QFrame {
    type Error = Error;

    fn try_from(v: QFrameInput) -> Result<Self> {
        make_qframe(v.q, v.k1, v.k2, v.epsilon0, v.r_t)
    }
}

impl From<QFrame> for QFrameInput {
    fn from(f: QFrame) -> Self {
        QFrameInput {
            q: f.q,
            k1: f.k1,
            k2: f.k2,
            epsilon0: f.epsilon0,
            r_t: f.r_t,
        }
    }
}

/// Builds a frame, rejecting degenerate or out-of-range parameters.
pub fn make_qframe(q: f64, k1: f64, k2: f64, epsilon0: f64, r_t: f64) -> Result<QFrame> {
    let all = [q, k1, k2, epsilon0, r_t];
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidFrame("non-finite parameter".into()));
    }
    if q <= 1.0 {
        return Err(Error::InvalidFrame(format!("q = {q} must exceed 1")));
    }
    if k1 < 1.0 {
        return Err(Error::InvalidFrame(format!("k1 = {k1} must be at least 1")));
    }
    if k2 <= k1 {
        return Err(Error::InvalidFrame(format!(
            "k2 = {k2} must be strictly larger than k1 = {k1}"
        )));
    }
    if !(epsilon0 > 0.0 && epsilon0 < 1.0) {
        return Err(Error::InvalidFrame(format!("epsilon0 = {epsilon0} not in (0,1)")));
    }
    if !(r_t > 0.0 && r_t < 1.0) {
        return Err(Error::InvalidFrame(format!("rT = {r_t} not in (0,1)")));
    }
    let kappa = k1 * k2 / (k2 - k1);
    let frame = QFrame {
        q,
        k1,
        k2,
        kappa,
        epsilon0,
        r_t,
    };
    frame.check_identities()?;
    Ok(frame)
}

impl QFrame {
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn k1(&self) -> f64 {
        self.k1
    }
    pub fn k2(&self) -> f64 {
        self.k2
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn epsilon0(&self) -> f64 {
        self.epsilon0
    }
    pub fn r_t(&self) -> f64 {
        self.r_t
    }
    pub fn log_q(&self) -> f64 {
        self.q.ln()
    }

    /// Order attached to a level: `k1` for level one, `k2` for level two.
    pub fn level_order(&self, level: Level) -> f64 {
        match level {
            Level::One => self.k1,
            Level::Two => self.k2,
        }
    }

    pub fn scale(&self, level: Level) -> GevreyScale {
        GevreyScale::new(level, self.q, self.level_order(level))
    }

    /// Residual of `1/kappa = 1/k1 - 1/k2`, relative to `1/k1`.
    pub fn gap_identity_residual(&self) -> f64 {
        ((1.0 / self.kappa) - (1.0 / self.k1 - 1.0 / self.k2)).abs() * self.k1
    }

    /// Residual of `-k2 + k2^2/(kappa + k2) = -k1`, relative to `k1`.
    pub fn exponent_identity_residual(&self) -> f64 {
        let lhs = -self.k2 + self.k2 * self.k2 / (self.kappa + self.k2);
        (lhs + self.k1).abs() / self.k1
    }

    fn check_identities(&self) -> Result<()> {
        // 8 ulps relative, plus a couple of ulps of slack for the divisions
        let tol = 16.0 * f64::EPSILON;
        let r1 = self.gap_identity_residual();
        let r2 = self.exponent_identity_residual();
        if r1 > tol || r2 > tol {
            return Err(Error::InvalidFrame(format!(
                "identity residuals {r1:e}, {r2:e} exceed round-off"
            )));
        }
        // kappa > k1 always; kappa > k2 only when k2 < 2 k1, which the
        // standard example (k1, k2) = (1, 2) does not satisfy
        if self.kappa <= self.k1 {
            return Err(Error::InvalidFrame(format!(
                "kappa = {} must exceed k1 = {}",
                self.kappa, self.k1
            )));
        }
        Ok(())
    }
}

/// The two decay levels `k1 < k2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    One,
    Two,
}

impl Level {
    pub fn index(self) -> usize {
        match self {
            Level::One => 1,
            Level::Two => 2,
        }
    }
}

/// The shrinking radius sequence `r_p = q^(-p/(2k))` attached to a level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevreyScale {
    pub level: Level,
    pub q: f64,
    pub k: f64,
}

impl GevreyScale {
    pub fn new(level: Level, q: f64, k: f64) -> Self {
        GevreyScale { level, q, k }
    }

    pub fn radius(&self, p: usize) -> f64 {
        self.q.powf(-(p as f64) / (2.0 * self.k))
    }

    pub fn radii(&self, count: usize) -> Vec<f64> {
        (0..count).map(|p| self.radius(p)).collect()
    }

    /// Whether `t` lies in the disc `D(0, r_n)`.
    pub fn admits(&self, n: usize, t_abs: f64) -> bool {
        t_abs < self.radius(n)
    }
}

/// Both sides of the log-Gaussian to sequential domination inequality
///
/// `|T|^(-N) |T|^gamma exp(-(k/2) log^2|T| / log q) <= q^(gamma^2/(2k)) (q^(-gamma/k))^N q^(N^2/(2k))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogBoundPair {
    pub lhs: f64,
    pub rhs: f64,
    pub log_lhs: f64,
    pub log_rhs: f64,
}

impl LogBoundPair {
    /// Domination with a relative slack of a few ulps on the log scale.
    pub fn holds(&self) -> bool {
        self.log_lhs <= self.log_rhs + 1e-12 * (1.0 + self.log_rhs.abs())
    }
}

/// Right-hand side of the domination inequality: the sequential bound at `n`.
pub fn sequential_bound(q: f64, k: f64, gamma: f64, n: u32) -> Result<f64> {
    Ok(sequential_log_bound(q, k, gamma, n)?.exp())
}

/// `log` of [`sequential_bound`].
pub fn sequential_log_bound(q: f64, k: f64, gamma: f64, n: u32) -> Result<f64> {
    if !(k > 0.0) || !(q > 1.0) {
        return Err(Error::InvalidArgument(format!("need k > 0 and q > 1, got k={k}, q={q}")));
    }
    let n = n as f64;
    let lq = q.ln();
    Ok(lq * (gamma * gamma / (2.0 * k) - gamma * n / k + n * n / (2.0 * k)))
}

/// Evaluates both sides of the domination inequality at `|T| = abs_t`.
///
/// The right side is what callers reuse in fits; the left side is only
/// returned so the inequality can be tested.
pub fn seq_bound_from_log_bound(q: f64, k: f64, gamma: f64, n: u32, abs_t: f64) -> Result<LogBoundPair> {
    if !(abs_t > 0.0) {
        return Err(Error::InvalidArgument(format!("|T| = {abs_t} must be positive")));
    }
    let log_rhs = sequential_log_bound(q, k, gamma, n)?;
    let x = abs_t.ln();
    let log_lhs = (gamma - n as f64) * x - 0.5 * k * x * x / q.ln();
    Ok(LogBoundPair {
        lhs: log_lhs.exp(),
        rhs: log_rhs.exp(),
        log_lhs,
        log_rhs,
    })
}

/// Maximiser and maximum of `H(x) = x^m1 exp(-m2 log^2 x)` on `x > 0`.
pub fn log_gaussian_max(m1: f64, m2: f64) -> Result<(f64, f64)> {
    if !(m2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "m2 = {m2} must be positive (profile is not concave in log x)"
        )));
    }
    Ok(((m1 / (2.0 * m2)).exp(), (m1 * m1 / (4.0 * m2)).exp()))
}

/// `H(x) = x^m1 exp(-m2 log^2 x)`.
pub fn log_gaussian(m1: f64, m2: f64, x: f64) -> f64 {
    let l = x.ln();
    (m1 * l - m2 * l * l).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_from_levels() {
        let f = make_qframe(2.0, 1.0, 2.0, 0.5, 0.5).unwrap();
        assert!((f.kappa() - 2.0).abs() < 1e-15);
        let f = make_qframe(3.0, 2.0, 6.0, 0.5, 0.5).unwrap();
        assert!((f.kappa() - 3.0).abs() < 1e-15);
        // -6 + 36/(3+6) = -2
        assert!((-6.0 + 36.0 / (f.kappa() + 6.0) + 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_frames() {
        assert!(make_qframe(2.0, 1.0, 1.0, 0.5, 0.5).is_err());
        assert!(make_qframe(1.0, 1.0, 2.0, 0.5, 0.5).is_err());
        assert!(make_qframe(2.0, 0.5, 2.0, 0.5, 0.5).is_err());
        assert!(make_qframe(2.0, 1.0, 2.0, 1.0, 0.5).is_err());
        assert!(make_qframe(2.0, 1.0, 2.0, 0.5, 0.0).is_err());
        assert!(make_qframe(2.0, 3.0, 2.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn json_recomputes_kappa() {
        let f: QFrame =
            serde_json::from_str(r#"{"q":2,"k1":1,"k2":2,"epsilon0":0.4,"rT":0.4,"kappa":99}"#).unwrap();
        assert!((f.kappa() - 2.0).abs() < 1e-15);
        let s = serde_json::to_string(&f).unwrap();
        assert!(!s.contains("kappa"));
        let back: QFrame = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
        assert!(serde_json::from_str::<QFrame>(r#"{"q":2,"k1":2,"k2":2,"epsilon0":0.4,"rT":0.4}"#).is_err());
    }

    #[test]
    fn sequential_bound_examples() {
        let p = seq_bound_from_log_bound(2.0, 1.0, 0.0, 0, 0.3).unwrap();
        assert!((p.rhs - 1.0).abs() < 1e-15);
        assert!(p.lhs <= 1.0 && p.holds());

        let p = seq_bound_from_log_bound(2.0, 2.0, 1.0, 3, 0.1).unwrap();
        // 2^(1/4) 2^(-3/2) 2^(9/4) = 2
        assert!((p.rhs - 2.0).abs() < 1e-14);
        let x = 0.1f64.ln();
        let direct = 0.1f64.powi(-3) * 0.1 * (-(x * x) / 2.0_f64.ln()).exp();
        assert!((p.lhs - direct).abs() <= 1e-12 * direct);
        assert!(p.holds());
    }

    #[test]
    fn sequential_bound_is_tight_at_the_maximiser() {
        // the log-side maximum is attained at log|T| = (gamma - N) log q / k
        let (q, k, gamma, n) = (2.0f64, 1.5, 0.7, 4u32);
        let t = ((gamma - n as f64) * q.ln() / k).exp();
        let p = seq_bound_from_log_bound(q, k, gamma, n, t).unwrap();
        assert!((p.log_lhs - p.log_rhs).abs() < 1e-12);
    }

    #[test]
    fn log_gaussian_examples() {
        assert_eq!(log_gaussian_max(0.0, 1.0).unwrap(), (1.0, 1.0));
        let (x0, h) = log_gaussian_max(2.0, 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((x0 - e).abs() < 1e-15 && (h - e).abs() < 1e-15);
        let (x0, h) = log_gaussian_max(-3.0, 0.5).unwrap();
        assert!((x0 - (-3.0f64).exp()).abs() < 1e-15);
        assert!((h - 4.5f64.exp()).abs() < 1e-12);
        // grid-max oracle on a log grid
        let grid_max = (0..20001)
            .map(|i| (-10.0 + 20.0 * i as f64 / 20000.0).exp())
            .map(|x| log_gaussian(-3.0, 0.5, x))
            .fold(0.0f64, f64::max);
        assert!(grid_max <= h * (1.0 + 1e-12));
        assert!((grid_max - h).abs() / h < 1e-6);
        assert!(log_gaussian_max(1.0, 0.0).is_err());
    }

    #[test]
    fn scales_are_nested() {
        let f = make_qframe(2.0, 1.0, 2.0, 0.4, 0.4).unwrap();
        let (s1, s2) = (f.scale(Level::One), f.scale(Level::Two));
        for p in 0..1000 {
            assert!(s1.radius(p + 1) < s1.radius(p));
            assert!(s2.radius(p + 1) < s2.radius(p));
            assert!(s1.radius(p) <= s2.radius(p));
        }
        assert!(s1.radius(1000) < 1e-100);
    }
}
