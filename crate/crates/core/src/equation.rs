//! The q-difference-differential equation
//!
//! `Q(dz) s_q u = sum_j (eps t)^{dDj} s_q^{dDj/kj + 1} R_Dj(dz) u
//!              + sum_l eps^{Delta_l} t^{d_l} s_q^{delta_l}(c_l R_l(dz) u) + s_q f`
//!
//! with `s_q^a : t -> q^a t`. Structural hypotheses are checked in exact
//! rational arithmetic; candidate solutions enter through their Fourier
//! symbols so that `dz` is multiplication by `im`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::qcore::QFrame;
use crate::special::{inverse_fourier, DecayProfile, HorizontalStrip, Symbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermData {
    #[serde(rename = "Delta")]
    pub big_delta: u32,
    pub d: u32,
    pub delta: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationSpec {
    pub frame: QFrame,
    #[serde(rename = "D")]
    pub big_d: usize,
    #[serde(rename = "d_D1")]
    pub d_d1: u32,
    #[serde(rename = "d_D2")]
    pub d_d2: u32,
    /// Data for `l = 1..D-1`.
    pub terms: Vec<TermData>,
    #[serde(rename = "Q")]
    pub q_poly: Poly,
    /// `R_1..R_{D-1}`.
    #[serde(rename = "R")]
    pub r_polys: Vec<Poly>,
    #[serde(rename = "R_D1")]
    pub r_d1: Poly,
    #[serde(rename = "R_D2")]
    pub r_d2: Poly,
    pub mu: f64,
    pub beta: f64,
}

/// Exact rational from a finite float.
pub fn rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::InvalidArgument(format!("{x} is not a finite number")))
}

fn int(n: u32) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// One failed clause of the structural hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub clause: String,
    /// Term index `l` (1-based) or the offending `m`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

impl HypothesisReport {
    pub fn clauses(&self) -> Vec<&str> {
        self.violations.iter().map(|v| v.clause.as_str()).collect()
    }
}

/// Checks the ordering of the `delta_l`, hypothesis (H1) in exact rational
/// arithmetic, and (H2): degrees, `mu`, and non-vanishing of `Q(im)`,
/// `R_Dj(im)` on `m_grid`.
pub fn validate_hypotheses(spec: &EquationSpec, m_grid: &[f64]) -> Result<HypothesisReport> {
    let mut v = Vec::new();
    let mut push = |clause: &str, index: Option<usize>, m: Option<f64>, detail: String| {
        v.push(Violation {
            clause: clause.into(),
            index,
            m,
            detail,
        })
    };

    if spec.big_d < 3 {
        push("structure.D", None, None, format!("D = {} must be at least 3", spec.big_d));
    }
    if spec.terms.len() + 1 != spec.big_d || spec.r_polys.len() + 1 != spec.big_d {
        push(
            "structure.term_count",
            None,
            None,
            format!(
                "D = {} needs D-1 term records and R polynomials (got {} and {})",
                spec.big_d,
                spec.terms.len(),
                spec.r_polys.len()
            ),
        );
    }
    if spec.d_d1 == 0 || spec.d_d2 == 0 || spec.terms.iter().any(|t| t.d == 0 || t.delta == 0) {
        push("structure.positive", None, None, "d_D1, d_D2, d_l and delta_l must be positive".into());
    }
    if spec.terms.first().is_some_and(|t| t.delta != 1) {
        push("structure.delta_1", Some(1), None, "delta_1 must equal 1".into());
    }
    for (i, w) in spec.terms.windows(2).enumerate() {
        if w[0].delta >= w[1].delta {
            push(
                "structure.delta_increasing",
                Some(i + 2),
                None,
                format!("delta_{} = {} is not above delta_{} = {}", i + 2, w[1].delta, i + 1, w[0].delta),
            );
        }
    }

    let k1 = rational(spec.frame.k1())?;
    let k2 = rational(spec.frame.k2())?;
    let inv_kappa = k1.recip() - k2.recip();
    let one = BigRational::from_integer(BigInt::from(1));
    let dd1 = int(spec.d_d1);
    let dd2 = int(spec.d_d2);
    for (i, t) in spec.terms.iter().enumerate() {
        let l = i + 1;
        let (dl, delta) = (int(t.d), int(t.delta));
        if t.big_delta < t.d {
            push("H1.Delta_ge_d", Some(l), None, format!("Delta_{l} = {} < d_{l} = {}", t.big_delta, t.d));
        }
        let lhs = (&dd1 - &one) * &inv_kappa + &dl / &k2 + &one;
        if lhs < delta {
            push(
                "H1.kappa_bound",
                Some(l),
                None,
                format!("(d_D1-1)/kappa + d_{l}/k2 + 1 = {lhs} < delta_{l} = {delta}"),
            );
        }
        let lhs = &dl / &k1 + &one;
        if lhs < delta {
            push("H1.k1_bound", Some(l), None, format!("d_{l}/k1 + 1 = {lhs} < delta_{l} = {delta}"));
        }
        let lhs = (&dd2 - &one) / &k2;
        if lhs < &delta - &one {
            push(
                "H1.k2_bound",
                Some(l),
                None,
                format!("(d_D2-1)/k2 = {lhs} < delta_{l} - 1 = {}", &delta - &one),
            );
        }
    }
    let lhs = &k1 * (&dd2 - &one);
    let rhs = &k2 * &dd1;
    if lhs <= rhs {
        push("H1.level_gap", None, None, format!("k1 (d_D2 - 1) = {lhs} is not above k2 d_D1 = {rhs}"));
    }

    let dq = spec.q_poly.degree();
    let (d1, d2) = (spec.r_d1.degree(), spec.r_d2.degree());
    let max_rl = spec.r_polys.iter().map(Poly::degree).max().unwrap_or(0);
    if dq < d1 {
        push("H2.deg_Q", None, None, format!("deg Q = {dq} < deg R_D1 = {d1}"));
    }
    if d1 != d2 {
        push("H2.deg_RD_equal", None, None, format!("deg R_D1 = {d1} differs from deg R_D2 = {d2}"));
    }
    if d1.min(d2) < max_rl {
        push("H2.deg_R_l", None, None, format!("deg R_Dj = {} < max deg R_l = {max_rl}", d1.min(d2)));
    }
    let mu = rational(spec.mu)?;
    for (j, d) in [(1, d1), (2, d2)] {
        if mu <= BigRational::from_integer(BigInt::from(d + 1)) {
            push("H2.mu", Some(j), None, format!("mu = {} is not above deg R_D{j} + 1 = {}", spec.mu, d + 1));
        }
    }
    for &m in m_grid {
        let im = Complex64::new(0.0, m);
        for (name, p) in [("H2.Q_nonzero", &spec.q_poly), ("H2.RD1_nonzero", &spec.r_d1), ("H2.RD2_nonzero", &spec.r_d2)]
        {
            let scale = p.l1() * (1.0 + m.abs()).powi(p.degree() as i32);
            if p.is_zero() || p.eval(im).norm() <= 1e-12 * scale {
                push(name, None, Some(m), format!("polynomial vanishes at i*{m}"));
            }
        }
    }
    Ok(HypothesisReport {
        passed: v.is_empty(),
        violations: v,
    })
}

/// The dilation `t -> q^a t` with an exact rational exponent when possible.
#[derive(Debug, Clone, PartialEq)]
pub enum Dilation {
    Exact(BigRational),
    Float(f64),
}

impl Dilation {
    /// `d / k + 1`, exact when `k` is a float with an exact rational value
    /// (every finite float is), kept as `Float` only for non-finite input.
    pub fn level(d: u32, k: f64) -> Result<Self> {
        let k = rational(k)?;
        if k.is_zero() {
            return Err(Error::InvalidArgument("zero order".into()));
        }
        Ok(Dilation::Exact(int(d) / k + BigRational::from_integer(BigInt::from(1))))
    }

    pub fn integer(a: u32) -> Self {
        Dilation::Exact(int(a))
    }

    pub fn exponent(&self) -> f64 {
        match self {
            Dilation::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Dilation::Float(x) => *x,
        }
    }

    pub fn compose(&self, other: &Dilation) -> Dilation {
        match (self, other) {
            (Dilation::Exact(a), Dilation::Exact(b)) => Dilation::Exact(a + b),
            _ => Dilation::Float(self.exponent() + other.exponent()),
        }
    }

    pub fn apply(&self, q: f64, t: Complex64) -> Complex64 {
        t * q.powf(self.exponent())
    }
}

impl fmt::Display for Dilation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dilation::Exact(r) => write!(f, "{r}"),
            Dilation::Float(x) => write!(f, "{x}"),
        }
    }
}

/// `p -> C_p(m, eps)`.
pub type CoefficientFamily = Arc<dyn Fn(usize, f64, Complex64) -> Complex64 + Send + Sync>;

/// The coefficient families `C_{l,p}` and `F_p` with their bound constants.
#[derive(Clone)]
pub struct CoefficientSeries {
    pub c: Vec<CoefficientFamily>,
    pub f: CoefficientFamily,
    pub delta_c: Vec<f64>,
    pub delta_f: f64,
    pub t0: f64,
    pub frame: QFrame,
    pub mu: f64,
    pub beta: f64,
    certified: Arc<OnceLock<std::result::Result<(), String>>>,
}

impl fmt::Debug for CoefficientSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSeries")
            .field("terms", &self.c.len())
            .field("delta_c", &self.delta_c)
            .field("delta_f", &self.delta_f)
            .field("t0", &self.t0)
            .finish()
    }
}

/// Largest index of the certification grid in `p`.
pub const CERTIFY_P: usize = 12;

impl CoefficientSeries {
    pub fn new(
        frame: QFrame,
        c: Vec<CoefficientFamily>,
        delta_c: Vec<f64>,
        f: CoefficientFamily,
        delta_f: f64,
        t0: f64,
        mu: f64,
        beta: f64,
    ) -> Result<Self> {
        if c.len() != delta_c.len() {
            return Err(Error::InvalidArgument("one Delta_C per coefficient family".into()));
        }
        if !(t0 > 0.0) || !(beta > 0.0) || delta_c.iter().chain([&delta_f]).any(|d| !(*d > 0.0)) {
            return Err(Error::InvalidArgument("T0, beta and the Delta constants must be positive".into()));
        }
        Ok(CoefficientSeries {
            c,
            f,
            delta_c,
            delta_f,
            t0,
            frame,
            mu,
            beta,
            certified: Arc::new(OnceLock::new()),
        })
    }

    /// The q-quadratic damping `q^(-p^2 kappa / (2 k1 k2))`.
    pub fn damping(&self, p: usize) -> f64 {
        let fr = &self.frame;
        let e = (p * p) as f64 * fr.kappa() / (2.0 * fr.k1() * fr.k2());
        fr.q().powf(-e)
    }

    fn profile(&self, m: f64) -> f64 {
        (1.0 + m.abs()).powf(-self.mu) * (-self.beta * m.abs()).exp()
    }

    pub fn c_bound(&self, l: usize, p: usize, m: f64) -> f64 {
        self.delta_c[l] * self.t0.powi(-(p as i32)) * self.damping(p) * self.profile(m)
    }

    pub fn f_bound(&self, p: usize, m: f64) -> f64 {
        self.delta_f * self.t0.powi(-(p as i32)) * self.profile(m)
    }

    /// Checks both coefficient bounds on `p <= CERTIFY_P`, an m-grid on
    /// `[-20, 20]` and a grid of `eps` in the disc of radius `epsilon0`.
    pub fn certify(&self) -> Result<()> {
        let r = self.certified.get_or_init(|| {
            let eps0 = self.frame.epsilon0();
            let mut eps_grid = vec![Complex64::new(0.0, 0.0)];
            for r in [0.5, 0.99] {
                for j in 0..8 {
                    eps_grid.push(Complex64::from_polar(r * eps0, std::f64::consts::TAU * j as f64 / 8.0));
                }
            }
            let m_grid: Vec<f64> = (0..=80).map(|i| -20.0 + 0.5 * i as f64).collect();
            for p in 0..=CERTIFY_P {
                for &m in &m_grid {
                    for &e in &eps_grid {
                        for (l, fam) in self.c.iter().enumerate() {
                            let v = fam(p, m, e).norm();
                            if v > self.c_bound(l, p, m) * (1.0 + 1e-9) {
                                return Err(format!(
                                    "|C_{},{p}({m}, {e})| = {v:e} exceeds {:e}",
                                    l + 1,
                                    self.c_bound(l, p, m)
                                ));
                            }
                        }
                        let v = (self.f)(p, m, e).norm();
                        if v > self.f_bound(p, m) * (1.0 + 1e-9) {
                            return Err(format!("|F_{p}({m}, {e})| = {v:e} exceeds {:e}", self.f_bound(p, m)));
                        }
                    }
                }
            }
            Ok(())
        });
        r.clone().map_err(Error::Certification)
    }
}

/// Smallest truncation with certified tail below `tol`, given the ratio
/// `|eps t| / T0` and whether the q-quadratic damping applies.
fn truncation(series: &CoefficientSeries, ratio: f64, damped: bool, tol: f64) -> (usize, f64) {
    let term = |p: usize| ratio.powi(p as i32) * if damped { series.damping(p) } else { 1.0 };
    for p_max in 0..400 {
        // geometric domination of the tail beyond p_max
        let next = term(p_max + 1);
        let tail = if damped {
            next / (1.0 - ratio * series.damping(1)).max(1e-300)
        } else {
            next / (1.0 - ratio)
        };
        if tail <= tol {
            return (p_max, tail);
        }
    }
    (400, f64::INFINITY)
}

struct SeriesSymbol<'a> {
    family: &'a CoefficientFamily,
    p_max: usize,
    eps: Complex64,
    et: Complex64,
    profile: DecayProfile,
}

impl Symbol for SeriesSymbol<'_> {
    fn eval(&self, m: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut pow = Complex64::new(1.0, 0.0);
        for p in 0..=self.p_max {
            acc += (self.family)(p, m, self.eps) * pow;
            pow *= self.et;
        }
        acc
    }
    fn profile(&self) -> DecayProfile {
        self.profile
    }
}

/// Values of `c_l(t, z, eps)` for every `l` and of `f(t, z, eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledCoefficients {
    pub c: Vec<Complex64>,
    pub f: Complex64,
    /// Bound on the truncation and quadrature error of every entry.
    pub error: f64,
}

/// Tolerance for the truncated p-series.
pub const SERIES_TOL: f64 = 1e-12;

pub fn assemble_coefficients(
    cs: &CoefficientSeries,
    t: Complex64,
    z: Complex64,
    eps: Complex64,
    strip: &HorizontalStrip,
) -> Result<AssembledCoefficients> {
    cs.certify()?;
    let et = eps * t;
    let ratio = et.norm() / cs.t0;
    if ratio >= 0.5 {
        return Err(Error::OutsideDomain(format!(
            "|eps t| = {:e} must stay below T0/2 = {:e}",
            et.norm(),
            cs.t0 / 2.0
        )));
    }
    let fourier_scale = 2.0 / (2.0 * std::f64::consts::PI).sqrt() / (cs.beta - z.im.abs());
    let mut error: f64 = 0.0;
    let mut c = Vec::with_capacity(cs.c.len());
    let (p_c, tail_c) = truncation(cs, ratio, true, SERIES_TOL);
    for (l, fam) in cs.c.iter().enumerate() {
        let profile = DecayProfile::new(cs.delta_c[l] / (1.0 - ratio), cs.mu, cs.beta)?;
        let sym = SeriesSymbol {
            family: fam,
            p_max: p_c,
            eps,
            et,
            profile,
        };
        let v = inverse_fourier(&sym, z, strip, 1e-13)?;
        error = error.max(v.error + cs.delta_c[l] * tail_c * fourier_scale);
        c.push(v.value);
    }
    let (p_f, tail_f) = truncation(cs, ratio, false, SERIES_TOL);
    let profile = DecayProfile::new(cs.delta_f / (1.0 - ratio), cs.mu, cs.beta)?;
    let sym = SeriesSymbol {
        family: &cs.f,
        p_max: p_f,
        eps,
        et,
        profile,
    };
    let fv = inverse_fourier(&sym, z, strip, 1e-13)?;
    error = error.max(fv.error + cs.delta_f * tail_f * fourier_scale);
    Ok(AssembledCoefficients { c, f: fv.value, error })
}

/// A candidate solution given by its Fourier symbol in `z`.
pub trait FourierCandidate: Send + Sync {
    fn symbol(&self, t: Complex64, m: f64, eps: Complex64) -> Complex64;
    /// Bound on `|symbol(t, m, eps)|` uniform in `(t, eps)` on the domain.
    fn profile(&self) -> DecayProfile;
    /// Radius of the disc in `t` where the candidate is defined.
    fn t_radius(&self) -> f64;
}

/// The zero function.
pub struct ZeroCandidate;

impl FourierCandidate for ZeroCandidate {
    fn symbol(&self, _t: Complex64, _m: f64, _eps: Complex64) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
    fn profile(&self) -> DecayProfile {
        DecayProfile {
            c: f64::MIN_POSITIVE,
            mu: 2.0,
            beta: 1.0,
        }
    }
    fn t_radius(&self) -> f64 {
        f64::INFINITY
    }
}

/// `P(im) U(t, m, eps)` as a symbol.
struct Multiplied<'a, C: ?Sized> {
    u: &'a C,
    poly: &'a Poly,
    t: Complex64,
    eps: Complex64,
}

impl<C: FourierCandidate + ?Sized> Symbol for Multiplied<'_, C> {
    fn eval(&self, m: f64) -> Complex64 {
        self.poly.eval(Complex64::new(0.0, m)) * self.u.symbol(self.t, m, self.eps)
    }
    fn profile(&self) -> DecayProfile {
        let p = self.u.profile();
        DecayProfile {
            c: p.c * self.poly.l1().max(f64::MIN_POSITIVE),
            mu: p.mu - self.poly.degree() as f64,
            beta: p.beta,
        }
    }
}

/// The forcing term: either the coefficient series or a closed form.
#[derive(Clone)]
pub enum Forcing {
    Series,
    Manufactured(Arc<dyn Fn(Complex64, Complex64, Complex64) -> Complex64 + Send + Sync>),
}

fn synth<C: FourierCandidate + ?Sized>(
    u: &C,
    poly: &Poly,
    t: Complex64,
    z: Complex64,
    eps: Complex64,
    strip: &HorizontalStrip,
) -> Result<Complex64> {
    if t.norm() >= u.t_radius() {
        return Err(Error::OutsideDomain(format!(
            "dilated t = {t} escapes the candidate's disc of radius {}",
            u.t_radius()
        )));
    }
    Ok(inverse_fourier(&Multiplied { u, poly, t, eps }, z, strip, 1e-13)?.value)
}

/// `LHS - RHS` of the equation at `(t, z, eps)` for the candidate `u`.
pub fn apply_equation_operator<C: FourierCandidate + ?Sized>(
    spec: &EquationSpec,
    cs: &CoefficientSeries,
    forcing: &Forcing,
    u: &C,
    t: Complex64,
    z: Complex64,
    eps: Complex64,
    strip: &HorizontalStrip,
) -> Result<Complex64> {
    let q = spec.frame.q();
    let one = Dilation::integer(1);
    let lhs = synth(u, &spec.q_poly, one.apply(q, t), z, eps, strip)?;
    let et = eps * t;
    let mut rhs = Complex64::new(0.0, 0.0);
    for (dd, k, r) in [
        (spec.d_d1, spec.frame.k1(), &spec.r_d1),
        (spec.d_d2, spec.frame.k2(), &spec.r_d2),
    ] {
        let dil = Dilation::level(dd, k)?;
        rhs += et.powu(dd) * synth(u, r, dil.apply(q, t), z, eps, strip)?;
    }
    for (l, term) in spec.terms.iter().enumerate() {
        let dil = Dilation::integer(term.delta);
        let ts = dil.apply(q, t);
        let cl = assemble_coefficients(cs, ts, z, eps, strip)?.c[l];
        let ru = synth(u, &spec.r_polys[l], ts, z, eps, strip)?;
        rhs += eps.powu(term.big_delta) * t.powu(term.d) * cl * ru;
    }
    let fq = match forcing {
        Forcing::Series => assemble_coefficients(cs, one.apply(q, t), z, eps, strip)?.f,
        Forcing::Manufactured(f) => f(one.apply(q, t), z, eps),
    };
    Ok(lhs - rhs - fq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::make_qframe;

    pub(crate) fn base_spec() -> EquationSpec {
        EquationSpec {
            frame: make_qframe(2.0, 1.0, 2.0, 0.4, 0.4).unwrap(),
            big_d: 3,
            d_d1: 1,
            d_d2: 4,
            terms: vec![
                TermData {
                    big_delta: 1,
                    d: 1,
                    delta: 1,
                },
                TermData {
                    big_delta: 2,
                    d: 2,
                    delta: 2,
                },
            ],
            q_poly: Poly::from_real(&[2.0, 0.0, 1.0]),
            r_polys: vec![Poly::constant(1.0), Poly::constant(1.0)],
            r_d1: Poly::constant(1.0),
            r_d2: Poly::constant(1.0),
            mu: 3.0,
            beta: 1.0,
        }
    }

    #[test]
    fn reference_case_passes() {
        let grid: Vec<f64> = (0..41).map(|i| -10.0 + 0.5 * i as f64).collect();
        let r = validate_hypotheses(&base_spec(), &grid).unwrap();
        assert!(r.passed, "{:?}", r.violations);
    }

    #[test]
    fn level_gap_violation() {
        let mut s = base_spec();
        s.d_d2 = 2;
        let r = validate_hypotheses(&s, &[0.0]).unwrap();
        assert!(r.clauses().contains(&"H1.level_gap"));
    }

    #[test]
    fn vanishing_q_is_caught() {
        let mut s = base_spec();
        s.q_poly = Poly::from_real(&[1.0, 0.0, 1.0]);
        let r = validate_hypotheses(&s, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].clause, "H2.Q_nonzero");
        assert_eq!(r.violations[0].m, Some(1.0));
    }

    #[test]
    fn dilations_compose_exactly() {
        let a = Dilation::level(3, 2.0).unwrap();
        let b = Dilation::level(1, 3.0).unwrap();
        let ab = a.compose(&b);
        match &ab {
            Dilation::Exact(r) => assert_eq!(*r, rational(2.5).unwrap() + BigRational::new(4.into(), 3.into())),
            _ => panic!("expected an exact exponent"),
        }
        let t = Complex64::new(0.1, 0.05);
        let two_step = b.apply(2.0, a.apply(2.0, t));
        assert!((ab.apply(2.0, t) - two_step).norm() <= 4.0 * f64::EPSILON * two_step.norm());
    }

    #[test]
    fn json_round_trip() {
        let s = base_spec();
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"R_D1\"") && j.contains("\"Delta\""));
        let back: EquationSpec = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }
}
