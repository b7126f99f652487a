//! Desk-scale model problems for the two-level theory.
//!
//! Kernels are factorised, `w_p(u, m) = g_p(u) h(m)` with
//! `h(m) = exp(-beta |m|) (1 + |m|)^-mu`, so the solution
//!
//! `u_p(t, z, eps) = (k2 / log q) / sqrt(2 pi) ∫∫ w_p(u, m) / Theta(u / (eps t)) du/u e^{izm} dm`
//!
//! is the order-`k2` q-Laplace transform of `g_p` along `d_p` at
//! `T = eps t`, times the inverse Fourier transform of `h` at `z`.
//!
//! `g_p` is a constant plus simple poles `u / (u - u_j)` outside the disc of
//! radius `rho`, plus (on some directions) a discrepancy that is flat at the
//! origin. Kernels on directions whose Borel sectors `U_{d_p}` meet must be
//! equal; across a gap they may differ by a discrepancy, which is what makes
//! the corresponding overlap decay at the lower level `k1`.

use std::f64::consts::{PI, TAU};
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    corollary_check, default_z_grid, fit_zero_gevrey_relative, functional_to_sequential, CorollaryReport,
    GevreyFit, RemainderRow, RemainderTable,
};
use crate::cocycle::{
    classify_levels, multilevel_split_with, Cocycle, DeltaBound, LevelPartition, SectorFn, SplitOptions,
    SplitProbe, SplitReport, SplitResult,
};
use crate::error::{Error, Result};
use crate::geometry::{
    qspiral_membership, sectors_intersect, validate_good_covering, wrap_angle, GoodCovering, QSpiralDomain,
    Sector,
};
use crate::qcore::{make_qframe, GevreyScale, Level, QFrame};
use crate::qlaplace::{laplace_arc, laplace_ray_segment, qlaplace, GrowthCertificate, QLaplaceSpec, WithCertificate};
use crate::quadrature::QuadOptions;
use crate::special::{inverse_fourier, BuiltinSymbol, DecayProfile, HorizontalStrip, Symbol};

/// Relative tolerance requested from every quadrature of the model.
pub const MODEL_REL_TOL: f64 = 1e-12;
/// Tolerance of the inverse Fourier factor.
pub const FOURIER_TOL: f64 = 1e-13;

fn c0() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn one() -> f64 {
    1.0
}

/// `weight * u / (u - at)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub at: Complex64,
    pub weight: Complex64,
}

/// `coef * exp(-order Log(u e^{-i center})^2 / (2 log q))`.
///
/// Flat at the origin, bounded on `C`, holomorphic off the ray
/// `arg u = center + pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub coef: Complex64,
    pub center: f64,
    pub order: f64,
}

impl Discrepancy {
    pub fn eval(&self, u: Complex64, q: f64) -> Complex64 {
        if u == c0() {
            return c0();
        }
        let l = (u * Complex64::from_polar(1.0, -self.center)).ln();
        self.coef * (-(l * l) * (self.order / (2.0 * q.ln()))).exp()
    }

    /// Direction of the branch cut.
    pub fn cut(&self) -> f64 {
        wrap_angle(self.center + PI)
    }

    /// `|D(u)| <= sup * exp(-order log^2|u| / (2 log q))`.
    pub fn sup(&self, q: f64) -> f64 {
        self.coef.norm() * (self.order * PI * PI / (2.0 * q.ln())).exp()
    }

    /// Whether the closed arc from `a` to `b` (counter-clockwise) avoids
    /// the cut.
    pub fn holomorphic_on(&self, a: f64, b: f64) -> bool {
        let s = (self.cut() - a).rem_euclid(TAU);
        s > (b - a).rem_euclid(TAU) + 1e-9 && s < TAU - 1e-9
    }
}

/// `g(u) = amp (constant + sum_j poles_j(u) + discrepancy(u))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    #[serde(default = "one")]
    pub amp: f64,
    pub constant: Complex64,
    #[serde(default)]
    pub poles: Vec<Pole>,
    #[serde(default)]
    pub discrepancy: Option<Discrepancy>,
}

impl Kernel {
    pub fn zero() -> Self {
        Kernel {
            amp: 1.0,
            constant: c0(),
            poles: Vec::new(),
            discrepancy: None,
        }
    }

    pub fn g(&self, u: Complex64, q: f64) -> Complex64 {
        let mut v = self.constant;
        for p in &self.poles {
            v += p.weight * u / (u - p.at);
        }
        if let Some(d) = &self.discrepancy {
            v += d.eval(u, q);
        }
        v * self.amp
    }

    /// `other(u) - self(u)` with shared terms cancelled before evaluation,
    /// so a flat difference keeps its relative accuracy near the origin.
    pub fn difference(&self, other: &Kernel, u: Complex64, q: f64) -> Complex64 {
        let mut v = other.constant * other.amp - self.constant * self.amp;
        let mut terms: Vec<(Complex64, Complex64)> = Vec::new();
        for (k, s) in [(other, 1.0), (self, -1.0)] {
            for p in &k.poles {
                let w = p.weight * (k.amp * s);
                match terms.iter_mut().find(|t| t.0 == p.at) {
                    Some(t) => t.1 += w,
                    None => terms.push((p.at, w)),
                }
            }
        }
        for (at, w) in terms {
            if w != c0() {
                v += w * u / (u - at);
            }
        }
        let disc = |k: &Kernel| k.discrepancy.map_or(c0(), |d| d.eval(u, q) * k.amp);
        if self.discrepancy != other.discrepancy || self.amp != other.amp {
            v += disc(other) - disc(self);
        }
        v
    }

    pub fn scaled(&self, factor: f64) -> Kernel {
        Kernel {
            amp: self.amp * factor,
            ..self.clone()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.amp == 0.0
            || (self.constant == c0()
                && self.poles.iter().all(|p| p.weight == c0())
                && self.discrepancy.is_none_or(|d| d.coef == c0()))
    }

    /// `sup |g|` off the discs `|u - u_j| < exclusion`.
    pub fn sup_bound(&self, q: f64, exclusion: f64) -> f64 {
        let poles: f64 = self
            .poles
            .iter()
            .map(|p| p.weight.norm() * (1.0 + p.at.norm() / exclusion))
            .sum();
        let disc = self.discrepancy.map_or(0.0, |d| d.sup(q));
        self.amp.abs() * (self.constant.norm() + poles + disc)
    }

    /// Bounded certificate (order 0) on the ray of direction `d`, from the
    /// exact supremum of `|u / (u - u_j)|` along the ray.
    pub fn ray_certificate(&self, d: f64, q: f64) -> Result<GrowthCertificate> {
        let mut k = self.constant.norm();
        for p in &self.poles {
            let psi = wrap_angle(p.at.arg() - d).abs();
            if psi < 1e-6 {
                return Err(Error::InvalidArgument(format!("pole {} lies on the ray of direction {d}", p.at)));
            }
            // sup_r r / |r - |u_j| e^{i psi}|
            let s = if psi < PI / 2.0 { 1.0 / psi.sin() } else { 1.0 };
            k += p.weight.norm() * s;
        }
        k += self.discrepancy.map_or(0.0, |dd| dd.sup(q));
        GrowthCertificate::new((self.amp.abs() * k * (1.0 + 1e-9)).max(f64::MIN_POSITIVE), 0.0, 0.0, 1.0)
    }
}

/// A complete model problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub frame: QFrame,
    /// Directions `d_p` of the q-Laplace rays.
    pub directions: Vec<f64>,
    /// The sectors `E_p` in the `eps` plane.
    pub covering: GoodCovering,
    /// The sector `T` of admissible `t`.
    pub t_sector: Sector,
    /// Half-opening of the Borel-plane sectors `U_{d_p}`.
    pub u_half_opening: f64,
    pub kernels: Vec<Kernel>,
    pub nu: f64,
    #[serde(default)]
    pub alpha: f64,
    pub delta_tilde: f64,
    /// Kernels are holomorphic on `D(0, rho)`.
    pub rho: f64,
    /// Radius of the arcs used by the contour decompositions.
    pub rho_tilde: f64,
    pub beta: f64,
    pub beta_prime: f64,
    pub mu: f64,
    /// Point of the strip at which the splitting is carried out.
    pub z0: Complex64,
    /// Radius of the discs around poles left out of kernel certification.
    #[serde(default = "default_exclusion")]
    pub pole_exclusion: f64,
}

fn default_exclusion() -> f64 {
    0.1
}

/// Which deformation applies to an overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapKind {
    /// `U_{d_p}` and `U_{d_{p+1}}` meet: `I1 - I2 + I3`.
    Intersecting,
    /// They do not: `I1 - I2 - I4 + I5 + I6`.
    Disjoint,
}

impl Scenario {
    /// `q = 2`, `k1 = 1`, `k2 = 2`, four directions `0, 0.6, pi, pi + 0.6`.
    /// Adjacent Borel sectors meet across the two narrow gaps and miss each
    /// other across the wide ones. Every kernel carries the poles at
    /// `0.5 e^{0.3 i}` and `0.5 e^{(pi + 0.3) i}`; the two kernels past the
    /// wide gap starting at `0.6` add a discrepancy of order `kappa`.
    pub fn default_scenario() -> Result<Self> {
        let frame = make_qframe(2.0, 1.0, 2.0, 0.4, 0.4)?;
        let directions = vec![0.0, 0.6, PI, PI + 0.6];
        let sectors = directions
            .iter()
            .map(|&d| Sector::bounded(d, 1.35, frame.epsilon0()))
            .collect::<Result<Vec<_>>>()?;
        let poles = vec![
            Pole {
                at: Complex64::from_polar(0.5, 0.3),
                weight: Complex64::new(1.0, 0.0),
            },
            Pole {
                at: Complex64::from_polar(0.5, PI + 0.3),
                weight: Complex64::new(1.0, 0.0),
            },
        ];
        let base = Kernel {
            amp: 1.0,
            constant: Complex64::new(1.0, 0.0),
            poles,
            discrepancy: None,
        };
        let shifted = Kernel {
            discrepancy: Some(Discrepancy {
                coef: Complex64::new(1.0, 0.0),
                center: PI + 0.3,
                order: frame.kappa(),
            }),
            ..base.clone()
        };
        let sc = Scenario {
            frame,
            directions,
            covering: GoodCovering::new(sectors)?,
            t_sector: Sector::bounded(0.0, 0.1, frame.r_t())?,
            u_half_opening: 0.35,
            kernels: vec![base.clone(), base, shifted.clone(), shifted],
            nu: 0.0,
            alpha: 0.0,
            delta_tilde: 0.3,
            rho: 0.5,
            rho_tilde: 0.4,
            beta: 1.0,
            beta_prime: 0.5,
            mu: 3.0,
            z0: Complex64::new(0.3, 0.1),
            pole_exclusion: 0.1,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn next(&self, p: usize) -> usize {
        (p + 1) % self.len()
    }

    /// Every kernel multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Scenario {
        Scenario {
            kernels: self.kernels.iter().map(|k| k.scaled(factor)).collect(),
            ..self.clone()
        }
    }

    /// `d_{p+1}` unwrapped to lie counter-clockwise after `d_p`.
    fn next_direction(&self, p: usize) -> f64 {
        let a = self.directions[p];
        a + (self.directions[self.next(p)] - a).rem_euclid(TAU)
    }

    pub fn u_sector(&self, p: usize) -> Result<Sector> {
        Sector::unbounded(self.directions[p], self.u_half_opening)
    }

    /// `flags[p]`: whether `U_{d_p}` and `U_{d_{p+1}}` intersect.
    pub fn intersection_flags(&self) -> Result<Vec<bool>> {
        (0..self.len())
            .map(|p| Ok(sectors_intersect(&self.u_sector(p)?, &self.u_sector(self.next(p))?)))
            .collect()
    }

    pub fn overlap_kind(&self, p: usize) -> Result<OverlapKind> {
        Ok(if self.intersection_flags()?[p] {
            OverlapKind::Intersecting
        } else {
            OverlapKind::Disjoint
        })
    }

    pub fn levels(&self) -> Result<LevelPartition> {
        Ok(classify_levels(&self.intersection_flags()?))
    }

    /// `R^b_{d_p}`: the spiral-avoiding domain of direction `d_p`, cut at
    /// `epsilon0 rT`.
    pub fn domain(&self, p: usize) -> Result<QSpiralDomain> {
        QSpiralDomain::bounded(self.directions[p], self.delta_tilde, &self.frame)
    }

    pub fn symbol(&self) -> BuiltinSymbol {
        BuiltinSymbol::exp_decay(self.beta, self.mu)
    }

    pub fn strip(&self) -> Result<HorizontalStrip> {
        HorizontalStrip::new(self.beta_prime, self.beta)
    }

    /// The three smallness conditions on `rT` and `nu < 1/2`.
    pub fn smallness(&self) -> [(String, bool); 4] {
        let f = &self.frame;
        let lq = f.log_q();
        [
            ("nu < 1/2".into(), self.nu < 0.5),
            (
                "nu + (k2 / log q) log rT < 0".into(),
                self.nu + f.k2() / lq * f.r_t().ln() < 0.0,
            ),
            (
                "alpha + (kappa / log q) log(epsilon0 rT) < 0".into(),
                self.alpha + f.kappa() / lq * (f.epsilon0() * f.r_t()).ln() < 0.0,
            ),
            (
                "epsilon0 rT <= q^((1/2 - nu)/k2) / 2".into(),
                f.epsilon0() * f.r_t() <= f.q().powf((0.5 - self.nu) / f.k2()) / 2.0,
            ),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n < 2 || self.covering.len() != n || self.kernels.len() != n {
            return Err(Error::InvalidArgument(
                "need one sector and one kernel per direction, at least two directions".into(),
            ));
        }
        for (name, ok) in self.smallness() {
            if !ok {
                return Err(Error::InvalidArgument(format!("condition `{name}` fails")));
            }
        }
        let rep = validate_good_covering(&self.covering, 720);
        if !rep.valid {
            return Err(Error::InvalidArgument(format!("the sectors E_p are not a good covering: {rep:?}")));
        }
        if !(self.rho_tilde > 0.0 && self.rho_tilde < self.rho) {
            return Err(Error::InvalidArgument("need 0 < rho_tilde < rho".into()));
        }
        if !(self.pole_exclusion > 0.0) || !(self.u_half_opening > 0.0 && self.u_half_opening < PI) {
            return Err(Error::InvalidArgument("bad pole exclusion or U half-opening".into()));
        }
        for (p, k) in self.kernels.iter().enumerate() {
            if k.poles.iter().any(|pl| pl.at.norm() < self.rho) {
                return Err(Error::InvalidArgument(format!("kernel {p} has a pole inside D(0, rho)")));
            }
            k.ray_certificate(self.directions[p], self.frame.q())?;
        }
        let flags = self.intersection_flags()?;
        for p in 0..n {
            let q = self.next(p);
            let (a, b) = (self.directions[p], self.next_direction(p));
            if !(b - a > 1e-9 && b - a < PI) {
                return Err(Error::InvalidArgument(format!(
                    "directions {p} and {q} must be counter-clockwise and less than pi apart"
                )));
            }
            let mid = 0.5 * (a + b);
            let (arc_p, arc_q) = if flags[p] { ((a, b), (a, b)) } else { ((a, mid), (mid, b)) };
            if flags[p] && self.kernels[p] != self.kernels[q] {
                return Err(Error::InvalidArgument(format!(
                    "U_{p} and U_{q} intersect, so kernels {p} and {q} must coincide"
                )));
            }
            for (k, (lo, hi)) in [(p, arc_p), (q, arc_q)] {
                if let Some(d) = &self.kernels[k].discrepancy {
                    if !d.holomorphic_on(lo, hi) {
                        return Err(Error::InvalidArgument(format!(
                            "the discrepancy of kernel {k} is cut inside the deformation region of overlap {p}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn laplace_spec(&self, p: usize) -> Result<QLaplaceSpec> {
        Ok(QLaplaceSpec::new(self.frame.q(), self.frame.k2(), self.directions[p])?.with_tolerance(MODEL_REL_TOL))
    }

    /// `L_p(T)`: the order-`k2` transform of `g_p` along `d_p`.
    pub fn laplace(&self, p: usize, big_t: Complex64) -> Result<(Complex64, f64)> {
        let q = self.frame.q();
        let k = self.kernels[p].clone();
        if k.is_zero() {
            return Ok((c0(), 0.0));
        }
        let f = WithCertificate {
            cert: k.ray_certificate(self.directions[p], q)?,
            f: move |u: Complex64| k.g(u, q),
        };
        let v = qlaplace(&self.laplace_spec(p)?, &f, big_t)?;
        Ok((v.value, v.error_estimate.max(MODEL_REL_TOL * v.value.norm())))
    }

    /// `H(z)`: inverse Fourier transform of `h`.
    pub fn fourier(&self, z: Complex64) -> Result<(Complex64, f64)> {
        let v = inverse_fourier(&self.symbol(), z, &self.strip()?, FOURIER_TOL)?;
        Ok((v.value, v.error))
    }

    /// `sup |H|` over the strip sample of [`default_z_grid`].
    pub fn fourier_sup(&self) -> Result<f64> {
        default_z_grid(self.beta_prime)
            .into_iter()
            .map(|z| Ok(self.fourier(z)?.0.norm()))
            .try_fold(0.0, |a: f64, v: Result<f64>| Ok(a.max(v?)))
    }

    fn check_point(&self, p: usize, t: Complex64, z: Complex64, eps: Complex64) -> Result<Complex64> {
        if p >= self.len() {
            return Err(Error::InvalidArgument(format!("no direction {p}")));
        }
        if !self.t_sector.contains(t) {
            return Err(Error::OutsideDomain(format!("t = {t} is not in the sector T")));
        }
        if !self.covering.sectors[p].contains(eps) {
            return Err(Error::OutsideDomain(format!("eps = {eps} is not in E_{p}")));
        }
        if !self.strip()?.contains(z) {
            return Err(Error::OutsideStrip {
                imag: z.im.abs(),
                beta: self.beta_prime,
            });
        }
        let big_t = eps * t;
        if !qspiral_membership(&self.domain(p)?, big_t)? {
            return Err(Error::OutsideDomain(format!("eps t = {big_t} is not in R^b_{p}")));
        }
        Ok(big_t)
    }
}

/// A value with its composed error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assembled {
    pub value: Complex64,
    pub error: f64,
}

/// The m-integrand of the nested representation: each evaluation is a full
/// q-Laplace transform of `u -> w(u, m)`.
struct NestedSymbol<'a> {
    sc: &'a Scenario,
    p: usize,
    big_t: Complex64,
    h: BuiltinSymbol,
    profile: DecayProfile,
    failure: Mutex<Option<Error>>,
    worst_rel: Mutex<f64>,
}

impl Symbol for NestedSymbol<'_> {
    fn eval(&self, m: f64) -> Complex64 {
        let hm = self.h.eval(m);
        let q = self.sc.frame.q();
        let kernel = &self.sc.kernels[self.p];
        let run = || -> Result<(Complex64, f64)> {
            let cert = kernel.ray_certificate(self.sc.directions[self.p], q)?;
            let f = WithCertificate {
                cert: GrowthCertificate::new((cert.big_k * hm.norm()).max(f64::MIN_POSITIVE), 0.0, 0.0, 1.0)?,
                f: |u: Complex64| kernel.g(u, q) * hm,
            };
            let v = qlaplace(&self.sc.laplace_spec(self.p)?, &f, self.big_t)?;
            Ok((v.value, v.error_estimate))
        };
        match run() {
            Ok((v, e)) => {
                let rel = e / v.norm().max(f64::MIN_POSITIVE);
                let mut w = self.worst_rel.lock().expect("poisoned");
                *w = w.max(rel.min(1.0));
                v
            }
            Err(e) => {
                self.failure.lock().expect("poisoned").get_or_insert(e);
                c0()
            }
        }
    }

    fn profile(&self) -> DecayProfile {
        self.profile
    }
}

/// `u_p(t, z, eps)` by nested quadrature: the outer inverse Fourier integral
/// over `m` calls a q-Laplace ray integral at every node.
pub fn assemble_solution(sc: &Scenario, p: usize, t: Complex64, z: Complex64, eps: Complex64) -> Result<Assembled> {
    let big_t = sc.check_point(p, t, z, eps)?;
    if sc.kernels[p].is_zero() {
        return Ok(Assembled { value: c0(), error: 0.0 });
    }
    let (l0, _) = sc.laplace(p, big_t)?;
    let h = sc.symbol();
    // |w| factorises, so the inner transform is bounded by |L(g)| h(m)
    let profile = DecayProfile::new((l0.norm() * 1.001).max(1e-300), sc.mu, sc.beta)?;
    let sym = NestedSymbol {
        sc,
        p,
        big_t,
        h,
        profile,
        failure: Mutex::new(None),
        worst_rel: Mutex::new(0.0),
    };
    let v = inverse_fourier(&sym, z, &sc.strip()?, FOURIER_TOL * l0.norm().max(1e-300))?;
    if let Some(e) = sym.failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    let inner = sym.worst_rel.into_inner().expect("poisoned");
    // the inner relative errors integrate against |h| <= 1, of mass 2/beta
    let error = v.error + inner * l0.norm() * 2.0 / sc.beta / (2.0 * PI).sqrt();
    Ok(Assembled { value: v.value, error })
}

/// `u_p(t, z, eps)` as the product of the two separate transforms.
pub fn assemble_factorized(sc: &Scenario, p: usize, t: Complex64, z: Complex64, eps: Complex64) -> Result<Assembled> {
    let big_t = sc.check_point(p, t, z, eps)?;
    let (l, el) = sc.laplace(p, big_t)?;
    let (h, eh) = sc.fourier(z)?;
    Ok(Assembled {
        value: l * h,
        error: el * h.norm() + eh * l.norm(),
    })
}

/// One term of a contour decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub name: String,
    /// Sign with which the piece enters the difference.
    pub sign: f64,
    pub value: Complex64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub kind: OverlapKind,
    pub pieces: Vec<Piece>,
    pub value: Complex64,
    pub error: f64,
}

fn piece_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-300,
        rel_tol: MODEL_REL_TOL,
        max_evals: 400_000,
    }
}

/// Half-width in `log(|u| / |T|)` beyond which `1 / Theta(u / T)` is below
/// `e^-800` times the kernel bound.
fn log_window(q: f64, k: f64) -> f64 {
    (2.0 * q.ln() * 800.0 / k).sqrt()
}

/// `L_{p+1}(T) - L_p(T)` by contour deformation through the arc of radius
/// `rho_tilde`. All pieces are small integrals in their own right, so the
/// result keeps its relative accuracy where the direct difference is lost
/// to cancellation.
pub fn decompose(sc: &Scenario, p: usize, big_t: Complex64) -> Result<Decomposition> {
    let (q, k) = (sc.frame.q(), sc.frame.k2());
    let np = sc.next(p);
    let (a, b) = (sc.directions[p], sc.next_direction(p));
    let mid = 0.5 * (a + b);
    let kind = sc.overlap_kind(p)?;
    if big_t == c0() {
        return Err(Error::OutsideDomain("T = 0".into()));
    }
    // the zeros of Theta(u/T) lie on arg u = arg T + pi
    let z_arg = (big_t.arg() + PI - a).rem_euclid(TAU);
    if z_arg <= b - a + 0.05 || z_arg >= TAU - 0.05 {
        return Err(Error::SpiralProximity {
            z: format!("{big_t}"),
            infimum: 0.0,
            delta: 0.05,
        });
    }
    let rt = sc.rho_tilde;
    let far = big_t.norm() * log_window(q, k).exp();
    let near = big_t.norm() * (-log_window(q, k)).exp();
    if near >= rt {
        return Err(Error::OutsideDomain(format!("|T| = {:e} is not small against rho_tilde", big_t.norm())));
    }
    let opts = piece_opts();
    let wp = sc.kernels[p].clone();
    let wn = sc.kernels[np].clone();
    let g = |w: &Kernel| {
        let w = w.clone();
        move |u: Complex64| Ok(w.g(u, q))
    };
    // past `far` the integrand is below e^-800 of its bound
    let ray = |w: &Kernel, d: f64| {
        if far <= rt {
            Ok((c0(), 0.0))
        } else {
            laplace_ray_segment(g(w), q, k, d, big_t, rt, far, &opts)
        }
    };
    let arc = |w: &Kernel, from: f64, to: f64| laplace_arc(g(w), q, k, rt, from, to, big_t, &opts);
    let mut pieces = Vec::new();
    let mut push = |name: &str, sign: f64, r: (Complex64, f64)| {
        pieces.push(Piece {
            name: name.into(),
            sign,
            value: r.0,
            error: r.1.max(MODEL_REL_TOL * r.0.norm()),
        })
    };
    push("I1", 1.0, ray(&wn, b)?);
    push("I2", -1.0, ray(&wp, a)?);
    match kind {
        OverlapKind::Intersecting => push("I3", 1.0, arc(&wp, a, b)?),
        OverlapKind::Disjoint => {
            push("I4", -1.0, arc(&wn, b, mid)?);
            push("I5", 1.0, arc(&wp, a, mid)?);
            let (wn2, wp2) = (wn.clone(), wp.clone());
            let disc = move |u: Complex64| Ok(wp2.difference(&wn2, u, q));
            push("I6", 1.0, laplace_ray_segment(disc, q, k, mid, big_t, near, rt, &opts)?);
        }
    }
    let value = pieces.iter().map(|pc| pc.value * pc.sign).sum();
    let error = pieces.iter().map(|pc| pc.error).sum();
    Ok(Decomposition {
        kind,
        pieces,
        value,
        error,
    })
}

/// One grid point of [`consecutive_difference`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceRow {
    pub t: Complex64,
    pub z: Complex64,
    pub eps: Complex64,
    pub abs_et: f64,
    /// `u_{p+1} - u_p` from the two direct assemblies.
    pub direct: Complex64,
    /// The same difference from the contour decomposition.
    pub decomposed: Complex64,
    /// Composed tolerance of both computations.
    pub tolerance: f64,
    /// Per-piece magnitudes, scaled by `H(z)`.
    pub pieces: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceTable {
    pub overlap: usize,
    pub kind: OverlapKind,
    pub rows: Vec<DifferenceRow>,
}

impl DifferenceTable {
    /// `max |direct - decomposed| / tolerance`.
    pub fn worst_ratio(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.direct - r.decomposed).norm() / r.tolerance.max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    /// Agreement within ten composed tolerances on every row.
    pub fn consistent(&self) -> bool {
        self.worst_ratio() <= 10.0
    }
}

/// Whether `eps` lies in `E_p ∩ E_{p+1}`.
fn in_overlap(sc: &Scenario, p: usize, eps: Complex64) -> bool {
    sc.covering.sectors[p].contains(eps) && sc.covering.sectors[sc.next(p)].contains(eps)
}

/// `u_{p+1} - u_p` on a grid of `(t, z, eps)` in `T x H_{beta'} x (E_p ∩ E_{p+1})`,
/// directly and by deformation.
pub fn consecutive_difference(
    sc: &Scenario,
    p: usize,
    grid: &[(Complex64, Complex64, Complex64)],
) -> Result<DifferenceTable> {
    use rayon::prelude::*;
    if p >= sc.len() {
        return Err(Error::InvalidArgument(format!("no overlap {p}")));
    }
    let np = sc.next(p);
    let rows = grid
        .par_iter()
        .map(|&(t, z, eps)| {
            if !in_overlap(sc, p, eps) {
                return Err(Error::OutsideDomain(format!("eps = {eps} is not in E_{p} ∩ E_{np}")));
            }
            let big_t = sc.check_point(p, t, z, eps)?;
            sc.check_point(np, t, z, eps)?;
            let (lp, ep) = sc.laplace(p, big_t)?;
            let (ln, en) = sc.laplace(np, big_t)?;
            let (h, eh) = sc.fourier(z)?;
            let dec = decompose(sc, p, big_t)?;
            let dl = ln - lp;
            let tol_direct = (ep + en) * h.norm() + dl.norm() * eh;
            let tol_dec = dec.error * h.norm() + dec.value.norm() * eh;
            Ok(DifferenceRow {
                t,
                z,
                eps,
                abs_et: big_t.norm(),
                direct: dl * h,
                decomposed: dec.value * h,
                tolerance: tol_direct + tol_dec,
                pieces: dec.pieces.iter().map(|pc| (pc.name.clone(), pc.value.norm() * h.norm())).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DifferenceTable {
        overlap: p,
        kind: sc.overlap_kind(p)?,
        rows,
    })
}

/// A default grid in `T x H_{beta'} x (E_p ∩ E_{p+1})`: three moduli of `eps`
/// on three rays of the overlap, two values of `t` and two of `z`.
pub fn overlap_grid(sc: &Scenario, p: usize) -> Vec<(Complex64, Complex64, Complex64)> {
    let (lo, hi) = sc.covering.overlap_arc(p);
    let r = sc.covering.overlap_radius(p);
    let mut out = Vec::new();
    for &u in &[0.2, 0.5, 0.8] {
        for &f in &[0.15, 0.45, 0.85] {
            for &t in &[Complex64::from_polar(0.3, 0.05), Complex64::from_polar(0.12, -0.05)] {
                for &z in &[Complex64::new(0.0, 0.0), Complex64::new(0.7, 0.3 * sc.beta_prime)] {
                    out.push((t, z, Complex64::from_polar(f * r, lo + u * (hi - lo))));
                }
            }
        }
    }
    out
}

/// A row of the `|eps t|` cascade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeRow {
    pub j: i32,
    pub abs_et: f64,
    pub norm: f64,
}

/// `sup_z ||u_{p+1} - u_p||` at `|eps t| = 2^-j` along the overlap bisector,
/// with `t` real. Uses the decomposition, the only representation that
/// resolves differences far below the size of `u_p`.
pub fn difference_cascade(sc: &Scenario, p: usize, js: &[i32], t: f64) -> Result<Vec<CascadeRow>> {
    use rayon::prelude::*;
    let theta = sc.covering.overlap_bisector(p);
    let hsup = sc.fourier_sup()?;
    let tc = Complex64::new(t, 0.0);
    js.par_iter()
        .map(|&j| {
            let big_t = Complex64::from_polar(2f64.powi(-j), theta);
            let eps = big_t / tc;
            if !in_overlap(sc, p, eps) {
                return Err(Error::OutsideDomain(format!("eps = {eps} leaves the overlap {p}")));
            }
            sc.check_point(p, tc, Complex64::new(0.0, 0.0), eps)?;
            sc.check_point(sc.next(p), tc, Complex64::new(0.0, 0.0), eps)?;
            let d = decompose(sc, p, big_t)?;
            Ok(CascadeRow {
                j,
                abs_et: big_t.norm(),
                norm: d.value.norm() * hsup,
            })
        })
        .collect()
}

/// `log ||diff|| = a log^2|eps t| + b log|eps t| + c`, with the implied
/// log-Gaussian order `k = -2 a log q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub k_fit: f64,
    pub residual_rms: f64,
}

pub fn fit_rate(rows: &[CascadeRow], q: f64) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.norm > 1e-300)
        .map(|r| (r.abs_et.ln(), r.norm.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::Degenerate("a quadratic rate fit needs at least four positive rows".into()));
    }
    // normal equations for the basis (x^2, x, 1)
    let mut m = [[0.0f64; 3]; 3];
    let mut v = [0.0f64; 3];
    for &(x, y) in &pts {
        let phi = [x * x, x, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += phi[i] * phi[j];
            }
            v[i] += phi[i] * y;
        }
    }
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d.abs() < 1e-300 {
        return Err(Error::Degenerate("rate fit is singular".into()));
    }
    let mut sol = [0.0; 3];
    for (i, s) in sol.iter_mut().enumerate() {
        let mut mi = m;
        for r in 0..3 {
            mi[r][i] = v[r];
        }
        *s = det(&mi) / d;
    }
    let [a, b, c] = sol;
    let rms = (pts.iter().map(|&(x, y)| (a * x * x + b * x + c - y).powi(2)).sum::<f64>() / pts.len() as f64).sqrt();
    Ok(RateFit {
        a,
        b,
        c,
        k_fit: -2.0 * a * q.ln(),
        residual_rms: rms,
    })
}

/// Fitted order of one overlap against the level predicted by its kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCheck {
    pub overlap: usize,
    pub kind: OverlapKind,
    pub expected_k: f64,
    pub fit: RateFit,
    pub relative_error: f64,
    pub within: bool,
    pub rows: Vec<CascadeRow>,
}

/// The `2^-3 .. 2^-12` cascade of every overlap with its rate fit.
pub fn rate_dichotomy(sc: &Scenario) -> Result<Vec<RateCheck>> {
    let js: Vec<i32> = (3..=12).collect();
    let t = 0.35 * sc.frame.r_t() / 0.4;
    (0..sc.len())
        .map(|p| {
            let rows = difference_cascade(sc, p, &js, t)?;
            let fit = fit_rate(&rows, sc.frame.q())?;
            let kind = sc.overlap_kind(p)?;
            let expected_k = match kind {
                OverlapKind::Intersecting => sc.frame.k2(),
                OverlapKind::Disjoint => sc.frame.k1(),
            };
            let relative_error = (fit.k_fit / expected_k - 1.0).abs();
            Ok(RateCheck {
                overlap: p,
                kind,
                expected_k,
                fit,
                relative_error,
                within: relative_error <= 0.15,
                rows,
            })
        })
        .collect()
}

/// Result of checking a kernel bound on a sample grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCertificate {
    pub direction: usize,
    /// Which bound: `level2` or `level1` growth on `U_{d_p}`, or `flatness`
    /// (order-`kappa` decay of a discrepancy at the origin).
    pub bound: String,
    pub constant: f64,
    pub samples: usize,
    pub excluded: usize,
    pub violations: usize,
    /// Largest ratio of the kernel to the bound.
    pub worst_ratio: f64,
}

fn log_radii(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Samples `|w(u, m)| / (C_w (1+|m|)^-mu e^{-beta|m|} env(u))` on `U_{d_p}`,
/// outside the pole exclusion discs. `C_w` is the analytic supremum of
/// `|g_p|` there.
fn certify_on_grid(sc: &Scenario, p: usize, bound: &str, env: impl Fn(Complex64) -> f64) -> Result<KernelCertificate> {
    let q = sc.frame.q();
    let kern = &sc.kernels[p];
    let c_w = kern.sup_bound(q, sc.pole_exclusion).max(f64::MIN_POSITIVE);
    let h = sc.symbol();
    let u_sector = sc.u_sector(p)?;
    let (mut samples, mut excluded, mut violations) = (0, 0, 0);
    let mut worst: f64 = 0.0;
    for i in 0..=16 {
        let arg = u_sector.bisector + (i as f64 / 8.0 - 1.0) * 0.999 * u_sector.half_opening;
        for r in log_radii(1e-4, 1e4, 81) {
            let u = Complex64::from_polar(r, arg);
            if kern.poles.iter().any(|pl| (u - pl.at).norm() < sc.pole_exclusion) {
                excluded += 1;
                continue;
            }
            let e = env(u);
            for &m in &[-10.0, -3.0, -1.0, 0.0, 0.5, 2.0, 7.0] {
                let w = kern.g(u, q) * h.eval(m);
                let b = c_w * (1.0 + f64::abs(m)).powf(-sc.mu) * (-sc.beta * f64::abs(m)).exp() * e;
                let ratio = w.norm() / b;
                samples += 1;
                worst = worst.max(ratio);
                if ratio > 1.0 + 1e-12 {
                    violations += 1;
                }
            }
        }
    }
    Ok(KernelCertificate {
        direction: p,
        bound: bound.into(),
        constant: c_w,
        samples,
        excluded,
        violations,
        worst_ratio: worst,
    })
}

/// Level-two growth: `env(u) = exp(k2 log^2|u| / (2 log q) + nu log|u|)`.
pub fn certify_kernel(sc: &Scenario, p: usize) -> Result<KernelCertificate> {
    let (lq, k2, nu) = (sc.frame.log_q(), sc.frame.k2(), sc.nu);
    certify_on_grid(sc, p, "level2", |u| {
        let x = u.norm().ln();
        (0.5 * k2 * x * x / lq + nu * x).exp()
    })
}

/// Level-one growth with shift `delta`:
/// `env(u) = exp(kappa log^2|u + delta| / (2 log q) + alpha log|u + delta|)`.
pub fn certify_kernel_level1(sc: &Scenario, p: usize, delta: f64) -> Result<KernelCertificate> {
    let (lq, kappa, alpha) = (sc.frame.log_q(), sc.frame.kappa(), sc.alpha);
    certify_on_grid(sc, p, "level1", |u| {
        let x = (u + delta).norm().ln();
        (0.5 * kappa * x * x / lq + alpha * x).exp()
    })
}

/// Checks the flatness template `|w_{p+1} - w_p| <= C exp(-kappa log^2|u| / (2 log q))`
/// on `|u| <= rho_tilde` along the arc between the two directions of a
/// disjoint overlap.
pub fn certify_discrepancy(sc: &Scenario, p: usize) -> Result<KernelCertificate> {
    let q = sc.frame.q();
    let lq = q.ln();
    let kappa = sc.frame.kappa();
    let (wp, wn) = (&sc.kernels[p], &sc.kernels[sc.next(p)]);
    let c = [wp, wn]
        .iter()
        .map(|k| k.amp.abs() * k.discrepancy.map_or(0.0, |d| d.sup(q)))
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let (a, b) = (sc.directions[p], sc.next_direction(p));
    let (mut samples, mut violations) = (0, 0);
    let mut worst: f64 = 0.0;
    for i in 1..16 {
        let arg = a + (b - a) * i as f64 / 16.0;
        for r in log_radii(1e-6, sc.rho_tilde, 61) {
            let u = Complex64::from_polar(r, arg);
            let d = wp.difference(wn, u, q).norm();
            let x = r.ln();
            let ratio = d / (c * (-0.5 * kappa * x * x / lq).exp());
            samples += 1;
            worst = worst.max(ratio);
            if ratio > 1.0 + 1e-9 {
                violations += 1;
            }
        }
    }
    Ok(KernelCertificate {
        direction: p,
        bound: "flatness".into(),
        constant: c,
        samples,
        excluded: 0,
        violations,
        worst_ratio: worst,
    })
}

/// `||Delta_p(T)|| <= K exp(-k log^2|T| / (2 log q)) |T|^gamma` fitted on
/// samples, with `K` raised to dominate every sample by a factor two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalBound {
    pub overlap: usize,
    pub k: f64,
    pub gamma: f64,
    #[serde(rename = "K")]
    pub big_k: f64,
    pub samples: usize,
}

impl FunctionalBound {
    /// The sequential constants `c = K q^{gamma^2/(2k)}`, `h = q^{-gamma/k}`.
    pub fn sequential(&self, q: f64) -> Result<DeltaBound> {
        let row = functional_to_sequential(self.k, self.gamma, self.big_k, q, 0)?[0];
        Ok(DeltaBound {
            c: row.constant,
            h: row.base,
        })
    }
}

/// Difference of consecutive solutions at `z0`, as a function of `T = eps t`.
fn delta_of_t(sc: &Scenario, p: usize, big_t: Complex64, h0: Complex64) -> Result<Complex64> {
    Ok(decompose(sc, p, big_t)?.value * h0)
}

/// Fits the functional bound of overlap `p` at the order of its level over
/// the arguments reachable from `t_arg`.
pub fn functional_bound(sc: &Scenario, p: usize, t_arg: f64) -> Result<FunctionalBound> {
    use rayon::prelude::*;
    let q = sc.frame.q();
    let lq = q.ln();
    let k = match sc.overlap_kind(p)? {
        OverlapKind::Intersecting => sc.frame.k2(),
        OverlapKind::Disjoint => sc.frame.k1(),
    };
    let (h0, _) = sc.fourier(sc.z0)?;
    let (lo, hi) = sc.covering.overlap_arc(p);
    let top = 0.9 * sc.frame.epsilon0() * sc.frame.r_t();
    let mut pts = Vec::new();
    for j in 0..=36 {
        for &u in &[0.02, 0.25, 0.5, 0.75, 0.98] {
            pts.push(Complex64::from_polar(top * 2f64.powf(-0.5 * j as f64), lo + u * (hi - lo) + t_arg));
        }
    }
    let samples = pts
        .par_iter()
        .map(|&bt| Ok((bt.norm().ln(), delta_of_t(sc, p, bt, h0)?.norm())))
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let ys: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.1 > 1e-300)
        .map(|&(x, v)| (x, v.ln() + 0.5 * k * x * x / lq))
        .collect();
    if ys.len() < 2 {
        return Ok(FunctionalBound {
            overlap: p,
            k,
            gamma: 0.0,
            big_k: f64::MIN_POSITIVE,
            samples: samples.len(),
        });
    }
    let n = ys.len() as f64;
    let (mx, my) = (ys.iter().map(|s| s.0).sum::<f64>() / n, ys.iter().map(|s| s.1).sum::<f64>() / n);
    let sxx: f64 = ys.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let sxy: f64 = ys.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    let gamma = sxy / sxx;
    let log_k = ys.iter().map(|&(x, y)| y - gamma * x).fold(f64::NEG_INFINITY, f64::max) + 2f64.ln();
    Ok(FunctionalBound {
        overlap: p,
        k,
        gamma,
        big_k: log_k.exp(),
        samples: samples.len(),
    })
}

/// The cocycle of the solutions at `z = z0`: `G_p(t, eps) = u_p(t, z0, eps)`
/// with differences taken from the deformed representation.
pub fn solution_cocycle(sc: &Scenario) -> Result<Cocycle> {
    let (h0, _) = sc.fourier(sc.z0)?;
    let shared = Arc::new(sc.clone());
    let g = (0..sc.len())
        .map(|p| {
            let sc = shared.clone();
            Arc::new(move |t: Complex64, e: Complex64| Ok(sc.laplace(p, e * t)?.0 * h0)) as SectorFn
        })
        .collect();
    let d = (0..sc.len())
        .map(|p| {
            let sc = shared.clone();
            Arc::new(move |t: Complex64, e: Complex64| delta_of_t(&sc, p, e * t, h0)) as SectorFn
        })
        .collect();
    Cocycle::new(sc.covering.clone(), g, d, sc.levels()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremOptions {
    /// The `t` of the splitting probes.
    pub t0: Complex64,
    /// Largest truncation order in the remainder fits.
    pub n_max: usize,
    pub tolerance: f64,
}

impl Default for TheoremOptions {
    fn default() -> Self {
        TheoremOptions {
            t0: Complex64::new(0.05, 0.002),
            n_max: 7,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelFit {
    pub level: Level,
    pub fit: GevreyFit,
    pub table: RemainderTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelReport {
    pub levels: LevelPartition,
    pub degenerate: bool,
    pub bounds: Vec<FunctionalBound>,
    pub sequential: (DeltaBound, DeltaBound),
    pub consistency: f64,
    pub split: SplitReport,
    pub fits: Vec<LevelFit>,
    pub corollary: Option<CorollaryReport>,
    pub certified: bool,
}

/// Probes for the splitting: four moduli on five rays of every sector.
pub fn split_probes(sc: &Scenario, t0: Complex64, radius: f64) -> Vec<SplitProbe> {
    let mut out = Vec::new();
    for s in &sc.covering.sectors {
        for &f in &[0.15, 0.35, 0.6, 0.85] {
            for &u in &[-0.9, -0.45, 0.0, 0.45, 0.9] {
                out.push(SplitProbe {
                    t: t0,
                    eps: Complex64::from_polar(f * radius, s.bisector + u * s.half_opening),
                });
            }
        }
    }
    out
}

fn split_radius(sc: &Scenario) -> f64 {
    (0..sc.len())
        .map(|p| crate::cocycle::RAY_FRACTION * sc.covering.overlap_radius(p))
        .fold(f64::INFINITY, f64::min)
}

/// Runs the splitting of the solution cocycle with the fitted bounds.
pub fn split_solutions(sc: &Scenario, opts: &TheoremOptions) -> Result<(SplitResult, Vec<FunctionalBound>, (DeltaBound, DeltaBound))> {
    sc.validate()?;
    let q = sc.frame.q();
    let c = solution_cocycle(sc)?;
    let bounds = (0..sc.len())
        .map(|p| functional_bound(sc, p, opts.t0.arg()))
        .collect::<Result<Vec<_>>>()?;
    let mut seq = [DeltaBound { c: f64::MIN_POSITIVE, h: 1.0 }; 2];
    for b in &bounds {
        let s = b.sequential(q)?;
        let slot = &mut seq[c.levels.level_of(b.overlap).index() - 1];
        slot.c = slot.c.max(s.c);
        slot.h = slot.h.max(s.h);
    }
    let scales = (
        GevreyScale::new(Level::One, q, sc.frame.k1()),
        GevreyScale::new(Level::Two, q, sc.frame.k2()),
    );
    let probes = split_probes(sc, opts.t0, split_radius(sc));
    let res = multilevel_split_with(
        &c,
        scales,
        (seq[0], seq[1]),
        &probes,
        opts.tolerance,
        SplitOptions { tabulate: true },
    )?;
    Ok((res, bounds, (seq[0], seq[1])))
}

/// Remainders of the level piece against its coefficients, `N = 0..n_max`,
/// with `t_N = r_N / 2` for each row.
pub fn level_remainders(res: &SplitResult, level: Level, n_max: usize) -> Result<RemainderTable> {
    let ch = match level {
        Level::One => &res.level1,
        Level::Two => &res.level2,
    };
    let scale = ch.scale;
    let radius = res.domain_radius();
    let mut rows = Vec::new();
    for n in 0..=n_max {
        let tn = Complex64::new(0.5 * scale.radius(n), 0.0);
        let phis: Vec<Complex64> = (0..=n).map(|j| ch.phi(j, tn)).collect::<Result<_>>()?;
        for &f in &[1.0 / 6.0, 1.0 / 3.0, 0.55] {
            let e = Complex64::from_polar(f * radius, res.cocycle.covering.sectors[0].bisector + 0.2);
            let p = ch.owner(e);
            let psi = ch.psi(p, tn, e)?;
            let partial: Complex64 = phis.iter().enumerate().map(|(j, c)| c * e.powu(j as u32)).sum();
            rows.push(RemainderRow {
                n,
                eps: e,
                t: Some(tn),
                norm: (psi - partial).norm(),
            });
        }
    }
    Ok(RemainderTable::new(rows))
}

/// The full pipeline: consecutive differences, functional to sequential
/// bounds, multilevel splitting, relative fits per level and the
/// restriction check between the levels.
pub fn verify_two_level_theorem(sc: &Scenario, opts: &TheoremOptions) -> Result<TwoLevelReport> {
    let (res, bounds, sequential) = split_solutions(sc, opts)?;
    let probes = split_probes(sc, opts.t0, split_radius(sc));
    let consistency = res.cocycle.consistency(&probes)?;
    let split = res.report(&probes)?;
    let levels = res.cocycle.levels.clone();
    let mut fits = Vec::new();
    for (level, set) in [(Level::One, &levels.i2), (Level::Two, &levels.i1)] {
        if set.is_empty() {
            continue;
        }
        let table = level_remainders(&res, level, opts.n_max)?;
        let scale = match level {
            Level::One => res.level1.scale,
            Level::Two => res.level2.scale,
        };
        let fit = fit_zero_gevrey_relative(&table, &scale)?;
        fits.push(LevelFit { level, fit, table });
    }
    let corollary = fits
        .iter()
        .find(|f| f.level == Level::Two)
        .map(|f| corollary_check(&f.table, &res.level1.scale, &res.level2.scale))
        .transpose()?;
    let certified = split.reconstruction_error <= 1e-7
        && split.glue_bounded
        && fits.iter().all(|f| f.fit.certified())
        && corollary.as_ref().is_none_or(|c| c.holds);
    Ok(TwoLevelReport {
        degenerate: levels.degenerate,
        levels,
        bounds,
        sequential,
        consistency,
        split,
        fits,
        corollary,
        certified,
    })
}
