//! Cocycles on good coverings and the two-level Ramis–Sibuya splitting.
//!
//! The splitter is the Cauchy–Heine construction. For each overlap
//! `O_p = E_p ∩ E_{p+1}` a cut ray `gamma_p` runs from 0 along the overlap
//! bisector, and
//!
//! `Psi(eps) = sum_p (1/(2 pi i)) ∫_{gamma_p} Delta_p(xi) / (xi - eps) dxi`
//!
//! jumps by `+Delta_p` when `eps` crosses `gamma_p` counter-clockwise.
//! `Psi_p` is the branch of `Psi` that is holomorphic on `E_p`: inside `O_p`
//! it uses the clockwise limit at `gamma_p`, inside `O_{p-1}` the
//! counter-clockwise limit at `gamma_{p-1}`. Hence `Psi_{p+1} - Psi_p =
//! Delta_p` on `O_p`.
//!
//! ```text
//!            E_{p+1}
//!        \   O_p   /
//!         \ gamma_p            Psi_p    : below gamma_p (clockwise side)
//!          \  |  /             Psi_{p+1}: above gamma_p
//!   E_p ----- 0 -----
//! ```
//!
//! Rays stop at a fraction of the overlap radius, so every split object is
//! only defined on the disc of radius [`CauchyHeine::domain_radius`].

use std::collections::HashMap;
use std::f64::consts::{PI, LN_2, TAU};
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, GoodCovering};
use crate::qcore::{GevreyScale, Level};
use crate::quadrature::{integrate, QuadOptions};

/// `(t, eps) -> value`.
pub type SectorFn = Arc<dyn Fn(Complex64, Complex64) -> Result<Complex64> + Send + Sync>;

/// Fraction of the overlap radius covered by each cut ray.
pub const RAY_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelPartition {
    /// Overlaps decaying at level two (nonempty Borel-plane intersection).
    #[serde(rename = "I1")]
    pub i1: Vec<usize>,
    /// Overlaps decaying at level one.
    #[serde(rename = "I2")]
    pub i2: Vec<usize>,
    /// Set when one of the two sets is empty: the splitting is single-level.
    pub degenerate: bool,
}

impl LevelPartition {
    pub fn level_of(&self, p: usize) -> Level {
        if self.i1.contains(&p) {
            Level::Two
        } else {
            Level::One
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &p in self.i1.iter().chain(&self.i2) {
            if p >= n || seen[p] {
                return Err(Error::InvalidArgument(format!("index {p} is repeated or out of range")));
            }
            seen[p] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument("the level sets must cover every overlap".into()));
        }
        Ok(())
    }
}

/// `flags[p]` says whether the Borel-plane sectors attached to `E_p` and
/// `E_{p+1}` intersect.
pub fn classify_levels(flags: &[bool]) -> LevelPartition {
    let i1: Vec<usize> = (0..flags.len()).filter(|&p| flags[p]).collect();
    let i2: Vec<usize> = (0..flags.len()).filter(|&p| !flags[p]).collect();
    let degenerate = i1.is_empty() || i2.is_empty();
    if degenerate {
        eprintln!("warning: one level set is empty, the splitting degenerates to a single level");
    }
    LevelPartition { i1, i2, degenerate }
}

#[derive(Clone)]
pub struct Cocycle {
    pub covering: GoodCovering,
    /// `G_p` on `T x E_p`; absent for a cocycle given only by its differences.
    pub sector_functions: Option<Vec<SectorFn>>,
    /// `Delta_p = G_{p+1} - G_p` on `T x O_p`.
    pub differences: Vec<SectorFn>,
    pub levels: LevelPartition,
}

impl std::fmt::Debug for Cocycle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cocycle")
            .field("covering", &self.covering)
            .field("levels", &self.levels)
            .finish()
    }
}

impl Cocycle {
    pub fn from_sector_functions(covering: GoodCovering, g: Vec<SectorFn>, levels: LevelPartition) -> Result<Self> {
        if g.len() != covering.len() {
            return Err(Error::InvalidArgument("one sector function per sector".into()));
        }
        levels.validate(covering.len())?;
        let differences = (0..g.len())
            .map(|p| {
                let (a, b) = (g[p].clone(), g[covering.next(p)].clone());
                Arc::new(move |t, e| Ok(b(t, e)? - a(t, e)?)) as SectorFn
            })
            .collect();
        Ok(Cocycle {
            covering,
            sector_functions: Some(g),
            differences,
            levels,
        })
    }

    /// Sector functions together with closed-form differences; the two are
    /// checked against each other by [`Cocycle::consistency`].
    pub fn new(covering: GoodCovering, g: Vec<SectorFn>, differences: Vec<SectorFn>, levels: LevelPartition) -> Result<Self> {
        if g.len() != covering.len() || differences.len() != covering.len() {
            return Err(Error::InvalidArgument("one sector function and one difference per sector".into()));
        }
        levels.validate(covering.len())?;
        Ok(Cocycle {
            covering,
            sector_functions: Some(g),
            differences,
            levels,
        })
    }

    /// `max |G_{p+1} - G_p - Delta_p|` over the probes lying in overlaps.
    pub fn consistency(&self, probes: &[SplitProbe]) -> Result<f64> {
        let Some(g) = &self.sector_functions else {
            return Ok(0.0);
        };
        let cov = &self.covering;
        let mut worst: f64 = 0.0;
        for pr in probes {
            for p in 0..cov.len() {
                let q = cov.next(p);
                if cov.sectors[p].contains(pr.eps) && cov.sectors[q].contains(pr.eps) {
                    let v = g[q](pr.t, pr.eps)? - g[p](pr.t, pr.eps)? - self.differences[p](pr.t, pr.eps)?;
                    worst = worst.max(v.norm());
                }
            }
        }
        Ok(worst)
    }

    pub fn from_differences(covering: GoodCovering, differences: Vec<SectorFn>, levels: LevelPartition) -> Result<Self> {
        if differences.len() != covering.len() {
            return Err(Error::InvalidArgument("one difference per overlap".into()));
        }
        levels.validate(covering.len())?;
        Ok(Cocycle {
            covering,
            sector_functions: None,
            differences,
            levels,
        })
    }
}

/// The differences kept by one level; `None` stands for zero.
#[derive(Clone)]
pub struct FilteredCocycle {
    pub covering: GoodCovering,
    pub level: Level,
    pub differences: Vec<Option<SectorFn>>,
}

pub fn level_filter(c: &Cocycle, level: Level) -> FilteredCocycle {
    let keep = match level {
        Level::Two => &c.levels.i1,
        Level::One => &c.levels.i2,
    };
    FilteredCocycle {
        covering: c.covering.clone(),
        level,
        differences: (0..c.differences.len())
            .map(|p| keep.contains(&p).then(|| c.differences[p].clone()))
            .collect(),
    }
}

/// `||Delta_p(t, eps)|| <= c h^N |eps|^N` for `t in D(0, r_N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaBound {
    pub c: f64,
    pub h: f64,
}

/// A `(t, eps)` evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitProbe {
    pub t: Complex64,
    pub eps: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Side {
    Principal,
    Clockwise,
    CounterClockwise,
}

/// `∫_0^R dx / (x - w)` as the branch on the requested side of `[0, R]`.
fn log_term(w: Complex64, r: f64, side: Side) -> Complex64 {
    let side = match side {
        Side::Principal if w.im >= 0.0 => Side::CounterClockwise,
        Side::Principal => Side::Clockwise,
        s => s,
    };
    let log_rw = (Complex64::new(r, 0.0) - w).ln();
    let shift = match side {
        Side::CounterClockwise => -PI,
        _ => PI,
    };
    log_rw - Complex64::new(w.norm().ln(), w.arg() + shift)
}

/// Cut rays for each overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutRays {
    pub angles: Vec<f64>,
    pub lengths: Vec<f64>,
}

impl CutRays {
    /// Overlap bisectors, each cut at `RAY_FRACTION` of the overlap radius.
    pub fn bisecting(cov: &GoodCovering) -> Self {
        CutRays {
            angles: (0..cov.len()).map(|p| cov.overlap_bisector(p)).collect(),
            lengths: (0..cov.len()).map(|p| RAY_FRACTION * cov.overlap_radius(p)).collect(),
        }
    }

    /// Rays rotated by `shift` times the overlap half-width and cut at
    /// `fraction` of the overlap radius.
    pub fn shifted(cov: &GoodCovering, shift: f64, fraction: f64) -> Result<Self> {
        if !(shift.abs() < 1.0) || !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidArgument("need |shift| < 1 and 0 < fraction < 1".into()));
        }
        Ok(CutRays {
            angles: (0..cov.len())
                .map(|p| {
                    let (lo, hi) = cov.overlap_arc(p);
                    0.5 * (lo + hi) + shift * 0.5 * (hi - lo)
                })
                .collect(),
            lengths: (0..cov.len()).map(|p| fraction * cov.overlap_radius(p)).collect(),
        })
    }
}

/// Chebyshev nodes per panel of a ray table.
const TABLE_NODES: usize = 24;
/// Panels per ray table; panel `i` covers `|xi|` in `[R 2^-(i+1), R 2^-i]`.
const TABLE_PANELS: usize = 64;

/// Piecewise Chebyshev interpolant of `Delta_j(t, .)` along a cut ray, in
/// the variable `log |xi|`. Below the last panel the difference is taken to
/// be zero, which is within `R 2^-64` times its supremum for any bounded
/// difference.
struct RayTable {
    log_top: f64,
    panels: Vec<Vec<Complex64>>,
}

fn cheb_node(j: usize) -> f64 {
    ((2 * j + 1) as f64 * PI / (2 * TABLE_NODES) as f64).cos()
}

impl RayTable {
    fn build(delta: &SectorFn, t: Complex64, dir: Complex64, r: f64) -> Result<RayTable> {
        use rayon::prelude::*;
        const CHUNK: usize = 8;
        let log_top = r.ln();
        let at = |i: usize, x: f64| (log_top - LN_2 * (i as f64 + 0.5 - 0.5 * x)).exp();
        let mut table = RayTable {
            log_top,
            panels: Vec::new(),
        };
        // panels are filled outward-in; a chunk that underflows entirely ends
        // the table, the remaining panels being zero to double precision
        while table.panels.len() < TABLE_PANELS {
            let first = table.panels.len();
            let values = (first * TABLE_NODES..(first + CHUNK) * TABLE_NODES)
                .into_par_iter()
                .map(|k| delta(t, dir * at(k / TABLE_NODES, cheb_node(k % TABLE_NODES))))
                .collect::<Result<Vec<_>>>()?;
            let zero = values.iter().all(|v| v.norm() < 1e-300);
            table.panels.extend(values.chunks(TABLE_NODES).map(|c| c.to_vec()));
            if zero {
                break;
            }
        }
        let sup = table.panels.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
        let worst = (0..table.panels.len())
            .into_par_iter()
            .map(|i| {
                let x = at(i, 0.37);
                Ok((delta(t, dir * x)? - table.eval(x)).norm())
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let tolerance = 1e-12 * sup.max(1.0);
        if worst > tolerance {
            return Err(Error::Quadrature {
                estimate: worst,
                tolerance,
                evaluations: table.panels.len() * TABLE_NODES,
            });
        }
        Ok(table)
    }

    /// Value at `|xi| = x` on the ray.
    fn eval(&self, x: f64) -> Complex64 {
        let u = (self.log_top - x.ln()) / LN_2;
        if !(u >= 0.0) || u >= self.panels.len() as f64 {
            return Complex64::new(0.0, 0.0);
        }
        let i = u.floor() as usize;
        let y = 1.0 - 2.0 * (u - i as f64);
        let f = &self.panels[i];
        let (mut num, mut den) = (Complex64::new(0.0, 0.0), 0.0);
        for (j, fj) in f.iter().enumerate() {
            let d = y - cheb_node(j);
            if d == 0.0 {
                return *fj;
            }
            let w = ((2 * j + 1) as f64 * PI / (2 * TABLE_NODES) as f64).sin() / d;
            let w = if j % 2 == 0 { w } else { -w };
            num += fj * w;
            den += w;
        }
        num / den
    }
}

type TableKey = (usize, u64, u64);

/// The Cauchy–Heine functions `Psi_p` and coefficients `phi_n` of a
/// filtered cocycle.
#[derive(Clone)]
pub struct CauchyHeine {
    pub covering: GoodCovering,
    pub differences: Vec<Option<SectorFn>>,
    pub rays: CutRays,
    pub scale: GevreyScale,
    pub quad: QuadOptions,
    /// Read ray values from cached interpolants instead of calling the
    /// differences at every quadrature node.
    pub tabulate: bool,
    tables: Arc<Mutex<HashMap<TableKey, Arc<RayTable>>>>,
}

/// Absolute tolerance of every cut-ray quadrature.
pub const SPLIT_QUAD_TOL: f64 = 1e-12;

impl CauchyHeine {
    pub fn new(f: &FilteredCocycle, rays: CutRays, scale: GevreyScale) -> Result<Self> {
        let n = f.covering.len();
        if rays.angles.len() != n || rays.lengths.len() != n {
            return Err(Error::InvalidArgument("one cut ray per overlap".into()));
        }
        for p in 0..n {
            let (lo, hi) = f.covering.overlap_arc(p);
            let s = wrap_angle(rays.angles[p] - lo);
            if !(s > 0.0 && s < hi - lo) || !(rays.lengths[p] > 0.0 && rays.lengths[p] < f.covering.overlap_radius(p)) {
                return Err(Error::InvalidArgument(format!("cut ray {p} leaves its overlap")));
            }
        }
        Ok(CauchyHeine {
            covering: f.covering.clone(),
            differences: f.differences.clone(),
            rays,
            scale,
            quad: QuadOptions::with_tol(SPLIT_QUAD_TOL, 1e-11),
            tabulate: false,
            tables: Arc::new(Mutex::new(HashMap::new())),
        })
    }

    /// Switches to tabulated ray values; worthwhile when a difference costs
    /// far more than an interpolation.
    pub fn tabulated(mut self) -> Self {
        self.tabulate = true;
        self
    }

    /// `Delta_j(t, .)` on the cut ray `j` as a function of `|xi|`.
    fn ray_values(&self, j: usize, t: Complex64) -> Result<Option<Box<dyn Fn(f64) -> Result<Complex64> + Send + Sync>>> {
        let Some(delta) = self.differences[j].clone() else {
            return Ok(None);
        };
        let dir = Complex64::from_polar(1.0, self.rays.angles[j]);
        if !self.tabulate {
            return Ok(Some(Box::new(move |x: f64| delta(t, dir * x))));
        }
        let key = (j, t.re.to_bits(), t.im.to_bits());
        let cached = self.tables.lock().expect("ray table cache poisoned").get(&key).cloned();
        let table = match cached {
            Some(tb) => tb,
            None => {
                let tb = Arc::new(RayTable::build(&delta, t, dir, self.rays.lengths[j])?);
                self.tables.lock().expect("ray table cache poisoned").insert(key, tb.clone());
                tb
            }
        };
        Ok(Some(Box::new(move |x: f64| Ok(table.eval(x)))))
    }

    /// Radius of the disc on which the `Psi_p` are single-valued.
    pub fn domain_radius(&self) -> f64 {
        self.rays.lengths.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Whether `eps` lies in the overlap `O_j`.
    fn in_overlap(&self, j: usize, eps: Complex64) -> bool {
        let (lo, hi) = self.covering.overlap_arc(j);
        let s = wrap_angle(eps.arg() - lo);
        s > 0.0 && s < hi - lo && eps.norm() < self.covering.overlap_radius(j)
    }

    /// `(1/(2 pi i)) ∫_{gamma_j} Delta_j(t, xi) / (xi - eps) dxi` on `side`.
    fn cauchy_term(&self, j: usize, t: Complex64, eps: Complex64, side: Side) -> Result<Complex64> {
        let Some(on_ray) = self.ray_values(j, t)? else {
            return Ok(Complex64::new(0.0, 0.0));
        };
        let delta = self.differences[j].as_ref().expect("checked by ray_values");
        let (theta, r) = (self.rays.angles[j], self.rays.lengths[j]);
        let dir = Complex64::from_polar(1.0, theta);
        let w = eps * dir.conj();
        let subtract = self.in_overlap(j, eps);
        let d_eps = if subtract { delta(t, eps)? } else { Complex64::new(0.0, 0.0) };
        let mut breaks = vec![0.0];
        if w.re > 0.0 && w.re < r {
            breaks.push(w.re.sqrt());
        }
        breaks.push(r.sqrt());
        // xi = s^2 e^{i theta}
        let res = integrate(
            |s: f64| {
                let xi = dir * (s * s);
                let denom = xi - eps;
                if denom.norm() < 1e-300 {
                    return Ok(Complex64::new(0.0, 0.0));
                }
                Ok((on_ray(s * s)? - d_eps) / denom * dir * (2.0 * s))
            },
            &breaks,
            &self.quad,
        )?;
        let mut v = res.value;
        if subtract {
            v += d_eps * log_term(w, r, side);
        }
        Ok(v / Complex64::new(0.0, TAU))
    }

    fn check_domain(&self, p: usize, eps: Complex64) -> Result<()> {
        if p >= self.covering.len() {
            return Err(Error::InvalidArgument(format!("no sector {p}")));
        }
        if !self.covering.sectors[p].contains(eps) || eps.norm() >= self.domain_radius() {
            return Err(Error::OutsideDomain(format!(
                "eps = {eps} is not in E_{p} within radius {:e}",
                self.domain_radius()
            )));
        }
        Ok(())
    }

    /// `Psi_p(t, eps)` for `eps in E_p` inside the domain radius.
    pub fn psi(&self, p: usize, t: Complex64, eps: Complex64) -> Result<Complex64> {
        self.check_domain(p, eps)?;
        let n = self.covering.len();
        let prev = (p + n - 1) % n;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let side = if j == p {
                Side::Clockwise
            } else if j == prev {
                Side::CounterClockwise
            } else {
                Side::Principal
            };
            acc += self.cauchy_term(j, t, eps, side)?;
        }
        Ok(acc)
    }

    /// `phi_n(t) = sum_j (1/(2 pi i)) ∫_{gamma_j} Delta_j(t, xi) xi^{-n-1} dxi`,
    /// defined for `t in D(0, r_n)` only.
    pub fn phi(&self, n: usize, t: Complex64) -> Result<Complex64> {
        if !self.scale.admits(n, t.norm()) {
            return Err(Error::OutsideDomain(format!(
                "phi_{n} is only defined for |t| < r_{n} = {:e}, got {:e}",
                self.scale.radius(n),
                t.norm()
            )));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.differences.len() {
            let Some(on_ray) = self.ray_values(j, t)? else { continue };
            let dir = Complex64::from_polar(1.0, self.rays.angles[j]);
            let r = self.rays.lengths[j];
            let res = integrate(
                |s: f64| {
                    if s == 0.0 {
                        return Ok(Complex64::new(0.0, 0.0));
                    }
                    let xi = dir * (s * s);
                    let v = on_ray(s * s)?;
                    // |v| xi^{-n-1} in logs so flat values never meet an overflow
                    let log_mag = v.norm().ln() - (n as f64 + 1.0) * xi.norm().ln();
                    if !(log_mag > -745.0) {
                        return Ok(Complex64::new(0.0, 0.0));
                    }
                    Ok(v * xi.powi(-(n as i32) - 1) * dir * (2.0 * s))
                },
                &[0.0, r.sqrt()],
                &self.quad,
            )?;
            acc += res.value;
        }
        Ok(acc / Complex64::new(0.0, TAU))
    }

    /// Index of the sector owning `eps`: the one between the rays
    /// `gamma_{p-1}` and `gamma_p`.
    pub fn owner(&self, eps: Complex64) -> usize {
        let n = self.covering.len();
        for p in 0..n {
            let a = self.rays.angles[(p + n - 1) % n];
            let span = (self.rays.angles[p] - a).rem_euclid(TAU);
            if (eps.arg() - a).rem_euclid(TAU) < span {
                return p;
            }
        }
        0
    }
}

/// Checks `||Delta_p(t, eps)|| <= c h^N |eps|^N` for all `N <= n_max` with
/// `t in D(0, r_N)` on the probes lying in each overlap.
pub fn certify_differences(
    f: &FilteredCocycle,
    scale: &GevreyScale,
    bound: DeltaBound,
    probes: &[SplitProbe],
    n_max: usize,
) -> Result<()> {
    for (p, d) in f.differences.iter().enumerate() {
        let Some(delta) = d else { continue };
        let (lo, hi) = f.covering.overlap_arc(p);
        for pr in probes {
            let s = wrap_angle(pr.eps.arg() - lo);
            if !(s > 0.0 && s < hi - lo && pr.eps.norm() < f.covering.overlap_radius(p)) {
                continue;
            }
            let v = delta(pr.t, pr.eps)?.norm();
            for n in 0..=n_max {
                if !scale.admits(n, pr.t.norm()) {
                    break;
                }
                let b = bound.c * (bound.h * pr.eps.norm()).powi(n as i32);
                if v > b * (1.0 + 1e-12) {
                    return Err(Error::Certification(format!(
                        "|Delta_{p}({}, {})| = {v:e} exceeds the bound {b:e} at N = {n}",
                        pr.t, pr.eps
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Certifies the differences on `probes` and builds the bisecting-ray split.
pub fn cauchy_heine_split(
    f: &FilteredCocycle,
    scale: GevreyScale,
    bound: DeltaBound,
    probes: &[SplitProbe],
) -> Result<CauchyHeine> {
    certify_differences(f, &scale, bound, probes, 12)?;
    CauchyHeine::new(f, CutRays::bisecting(&f.covering), scale)
}

/// How [`multilevel_split_with`] evaluates the cut-ray integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitOptions {
    /// Use cached ray interpolants (see [`CauchyHeine::tabulated`]).
    pub tabulate: bool,
}

/// Result of the two-level splitting `G_p = a + G_p^1 + G_p^2`.
#[derive(Clone)]
pub struct SplitResult {
    pub cocycle: Cocycle,
    pub level1: CauchyHeine,
    pub level2: CauchyHeine,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub reconstruction_error: f64,
    pub difference_error: f64,
    pub glue_mismatch: f64,
    /// Largest radius of the cascade on which the glue stayed bounded.
    pub epsilon1: f64,
    pub glue_sup: f64,
    pub glue_bounded: bool,
    pub evaluations: usize,
}

impl SplitResult {
    pub fn piece(&self, level: Level, p: usize, t: Complex64, eps: Complex64) -> Result<Complex64> {
        match level {
            Level::One => self.level1.psi(p, t, eps),
            Level::Two => self.level2.psi(p, t, eps),
        }
    }

    fn g(&self, p: usize, t: Complex64, eps: Complex64) -> Result<Complex64> {
        match &self.cocycle.sector_functions {
            Some(g) => g[p](t, eps),
            None => Err(Error::InvalidArgument("the cocycle has no sector functions".into())),
        }
    }

    /// `a_p = G_p - Psi_p^1 - Psi_p^2` on `E_p`.
    pub fn glue_on(&self, p: usize, t: Complex64, eps: Complex64) -> Result<Complex64> {
        Ok(self.g(p, t, eps)? - self.level1.psi(p, t, eps)? - self.level2.psi(p, t, eps)?)
    }

    /// The glued function `a`, taken from the sector owning `eps`.
    pub fn glue(&self, t: Complex64, eps: Complex64) -> Result<Complex64> {
        if eps == Complex64::new(0.0, 0.0) {
            // a is holomorphic at 0; the average over a small circle recovers it
            let r = 1e-3 * self.domain_radius();
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..16 {
                acc += self.glue(t, Complex64::from_polar(r, TAU * (i as f64 + 0.5) / 16.0))?;
            }
            return Ok(acc / 16.0);
        }
        let p = self.level1.owner(eps);
        self.glue_on(p, t, eps)
    }

    pub fn domain_radius(&self) -> f64 {
        self.level1.domain_radius().min(self.level2.domain_radius())
    }

    fn sectors_with(&self, eps: Complex64) -> Vec<usize> {
        (0..self.cocycle.covering.len())
            .filter(|&p| self.cocycle.covering.sectors[p].contains(eps))
            .collect()
    }

    /// `max ||G_p - (a + G_p^1 + G_p^2)||` over probes and sectors.
    pub fn reconstruction_error(&self, probes: &[SplitProbe]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for pr in probes {
            let a = self.glue(pr.t, pr.eps)?;
            for p in self.sectors_with(pr.eps) {
                let v = self.g(p, pr.t, pr.eps)?
                    - a
                    - self.level1.psi(p, pr.t, pr.eps)?
                    - self.level2.psi(p, pr.t, pr.eps)?;
                worst = worst.max(v.norm());
            }
        }
        Ok(worst)
    }

    /// `max ||(G_{p+1}^j - G_p^j) - Delta_p^j||` over overlap probes and levels.
    pub fn difference_error(&self, probes: &[SplitProbe]) -> Result<f64> {
        let cov = &self.cocycle.covering;
        let mut worst: f64 = 0.0;
        for pr in probes {
            for p in 0..cov.len() {
                let q = cov.next(p);
                if !(cov.sectors[p].contains(pr.eps) && cov.sectors[q].contains(pr.eps)) {
                    continue;
                }
                for ch in [&self.level1, &self.level2] {
                    let d = match &ch.differences[p] {
                        Some(d) => d(pr.t, pr.eps)?,
                        None => Complex64::new(0.0, 0.0),
                    };
                    let v = ch.psi(q, pr.t, pr.eps)? - ch.psi(p, pr.t, pr.eps)? - d;
                    worst = worst.max(v.norm());
                }
            }
        }
        Ok(worst)
    }

    /// `max |a_{p+1} - a_p|` over overlap probes.
    pub fn glue_mismatch(&self, probes: &[SplitProbe]) -> Result<f64> {
        let cov = &self.cocycle.covering;
        let mut worst: f64 = 0.0;
        for pr in probes {
            for p in 0..cov.len() {
                let q = cov.next(p);
                if cov.sectors[p].contains(pr.eps) && cov.sectors[q].contains(pr.eps) {
                    let v = self.glue_on(q, pr.t, pr.eps)? - self.glue_on(p, pr.t, pr.eps)?;
                    worst = worst.max(v.norm());
                }
            }
        }
        Ok(worst)
    }

    /// Sup of `|a|` on the circles `|eps| = 2^-j`, `j = j0..j0+10`, along every
    /// sector bisector. Bounded means finite with no growth by more than a
    /// factor 10 from the outer half of the cascade to the inner half.
    pub fn glue_cascade(&self, t: Complex64) -> Result<(f64, f64, bool)> {
        let r0 = self.domain_radius();
        let j0 = (-(0.5 * r0).log2()).ceil().max(1.0) as i32;
        let mut outer: f64 = 0.0;
        let mut inner: f64 = 0.0;
        let mut eps1 = 0.0;
        for j in j0..j0 + 10 {
            let r = 2f64.powi(-j);
            for s in &self.cocycle.covering.sectors {
                let v = self.glue(t, Complex64::from_polar(r, s.bisector))?.norm();
                if !v.is_finite() {
                    return Ok((eps1, f64::INFINITY, false));
                }
                if j < j0 + 5 {
                    outer = outer.max(v);
                } else {
                    inner = inner.max(v);
                }
            }
            if eps1 == 0.0 {
                eps1 = r;
            }
        }
        let bounded = inner <= 10.0 * outer + 1e-12;
        Ok((eps1, outer.max(inner), bounded))
    }

    pub fn report(&self, probes: &[SplitProbe]) -> Result<SplitReport> {
        let (epsilon1, glue_sup, glue_bounded) = self.glue_cascade(probes.first().map_or(Complex64::new(0.0, 0.0), |p| p.t))?;
        Ok(SplitReport {
            reconstruction_error: self.reconstruction_error(probes)?,
            difference_error: self.difference_error(probes)?,
            glue_mismatch: self.glue_mismatch(probes)?,
            epsilon1,
            glue_sup,
            glue_bounded,
            evaluations: probes.len(),
        })
    }
}

/// Splits a cocycle with sector functions into its two levels and checks
/// that the local glue functions agree on the overlaps of `probes`.
pub fn multilevel_split(
    c: &Cocycle,
    scales: (GevreyScale, GevreyScale),
    bounds: (DeltaBound, DeltaBound),
    probes: &[SplitProbe],
    tolerance: f64,
) -> Result<SplitResult> {
    multilevel_split_with(c, scales, bounds, probes, tolerance, SplitOptions::default())
}

pub fn multilevel_split_with(
    c: &Cocycle,
    scales: (GevreyScale, GevreyScale),
    bounds: (DeltaBound, DeltaBound),
    probes: &[SplitProbe],
    tolerance: f64,
    opts: SplitOptions,
) -> Result<SplitResult> {
    if c.sector_functions.is_none() {
        return Err(Error::InvalidArgument("splitting needs the sector functions G_p".into()));
    }
    let f1 = level_filter(c, Level::One);
    let f2 = level_filter(c, Level::Two);
    let mut level1 = cauchy_heine_split(&f1, scales.0, bounds.0, probes)?;
    let mut level2 = cauchy_heine_split(&f2, scales.1, bounds.1, probes)?;
    level1.tabulate = opts.tabulate;
    level2.tabulate = opts.tabulate;
    let res = SplitResult {
        cocycle: c.clone(),
        level1,
        level2,
        tolerance,
    };
    let mismatch = res.glue_mismatch(probes)?;
    if !(mismatch <= tolerance) {
        return Err(Error::Gluing(format!(
            "glue functions differ by {mismatch:e} across an overlap (tolerance {tolerance:e})"
        )));
    }
    let (_, sup, bounded) = res.glue_cascade(probes.first().map_or(Complex64::new(0.0, 0.0), |p| p.t))?;
    if !bounded {
        return Err(Error::Gluing(format!("glue grows towards 0 (sup {sup:e})")));
    }
    Ok(res)
}

/// `exp(-k Log(x)^2 / (2 log q))`: flat at 0 and bounded by
/// `exp(k arg(x)^2/(2 log q)) q^{N^2/(2k)} |x|^N` for every `N`.
pub fn flat_profile(x: Complex64, k: f64, q: f64) -> Complex64 {
    if x == Complex64::new(0.0, 0.0) {
        return x;
    }
    let l = x.ln();
    (-(l * l) * (k / (2.0 * q.ln()))).exp()
}

/// A planted two-level cocycle: on overlap `p` the difference is
/// `amp * flat_profile(eps e^{-i theta_p} t, k)` with `k = k2` on `I1` and
/// `k = k1` on `I2`. The sector functions are an entire function `g` plus a
/// Cauchy–Heine primitive built on rays different from the splitter's, so
/// the glue is nontrivial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCocycle {
    pub covering: GoodCovering,
    pub levels: LevelPartition,
    pub q: f64,
    pub k1: f64,
    pub k2: f64,
    pub amp: f64,
}

impl SyntheticCocycle {
    /// Four sectors of radius 1 and half-opening 1.0 around `0, pi/2, pi,
    /// 3pi/2`, alternating levels.
    pub fn default_with(q: f64, k1: f64, k2: f64) -> Result<Self> {
        let sectors = (0..4)
            .map(|p| crate::geometry::Sector::bounded(p as f64 * PI / 2.0, 1.0, 1.0))
            .collect::<Result<Vec<_>>>()?;
        Ok(SyntheticCocycle {
            covering: GoodCovering::new(sectors)?,
            levels: classify_levels(&[true, false, true, false]),
            q,
            k1,
            k2,
            amp: 1.0,
        })
    }

    pub fn order(&self, p: usize) -> f64 {
        match self.levels.level_of(p) {
            Level::Two => self.k2,
            Level::One => self.k1,
        }
    }

    pub fn differences(&self) -> Vec<SectorFn> {
        (0..self.covering.len())
            .map(|p| {
                let rot = Complex64::from_polar(1.0, -self.covering.overlap_bisector(p));
                let (k, q, amp) = (self.order(p), self.q, self.amp);
                Arc::new(move |t: Complex64, e: Complex64| Ok(flat_profile(e * rot * t, k, q) * amp)) as SectorFn
            })
            .collect()
    }

    /// Bound constants per level for `|arg t| <= t_arg`.
    pub fn bounds(&self, t_arg: f64) -> (DeltaBound, DeltaBound) {
        let max_arg = (0..self.covering.len())
            .map(|p| {
                let (lo, hi) = self.covering.overlap_arc(p);
                0.5 * (hi - lo)
            })
            .fold(0.0, f64::max)
            + t_arg;
        let c = |k: f64| self.amp * (k * max_arg * max_arg / (2.0 * self.q.ln())).exp();
        (DeltaBound { c: c(self.k1), h: 1.0 }, DeltaBound { c: c(self.k2), h: 1.0 })
    }

    pub fn scales(&self) -> (GevreyScale, GevreyScale) {
        (
            GevreyScale::new(Level::One, self.q, self.k1),
            GevreyScale::new(Level::Two, self.q, self.k2),
        )
    }

    pub fn cocycle(&self) -> Result<Cocycle> {
        let deltas = self.differences();
        let full = FilteredCocycle {
            covering: self.covering.clone(),
            level: Level::Two,
            differences: deltas.iter().cloned().map(Some).collect(),
        };
        let rays = CutRays::shifted(&self.covering, 0.35, 0.95)?;
        let ch = Arc::new(CauchyHeine::new(&full, rays, self.scales().1)?);
        let g = (0..self.covering.len())
            .map(|p| {
                let ch = ch.clone();
                Arc::new(move |t: Complex64, e: Complex64| Ok((e * 0.5).exp() * (t + 1.0) + ch.psi(p, t, e)?))
                    as SectorFn
            })
            .collect();
        Cocycle::new(self.covering.clone(), g, deltas, self.levels.clone())
    }

    /// Probes inside the split domain: radii `0.1..0.8` on several angles of
    /// every sector, with `t` fixed.
    pub fn probes(&self, t: Complex64) -> Vec<SplitProbe> {
        let mut out = Vec::new();
        for s in &self.covering.sectors {
            for &r in &[0.1, 0.3, 0.55, 0.8] {
                for &u in &[-0.9, -0.45, 0.0, 0.45, 0.9] {
                    out.push(SplitProbe {
                        t,
                        eps: Complex64::from_polar(r, s.bisector + u * s.half_opening),
                    });
                }
            }
        }
        out
    }
}
