//! Sectors, good coverings, q-spiral avoiding domains and direction
//! admissibility with respect to the roots of the characteristic polynomials.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::qcore::{Level, QFrame};

/// Outer radius used to truncate unbounded sectors in point-cloud scans.
pub const DEFAULT_OUTER_RADIUS: f64 = 1e3;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    y
}

/// Open sector `{ inner < |z| < radius, |arg z - bisector| < half_opening }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SectorJson", into = "SectorJson")]
pub struct Sector {
    pub bisector: f64,
    pub half_opening: f64,
    /// `None` for an unbounded sector.
    pub radius: Option<f64>,
    pub inner_radius: f64,
}

/// JSON form; `opening` is the full aperture.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct SectorJson {
    bisector: f64,
    opening: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(default)]
    inner_radius: f64,
}

impl TryFrom<SectorJson> for Sector {
    type Error = Error;
    fn try_from(s: SectorJson) -> Result<Self> {
        Sector::new(s.bisector, 0.5 * s.opening, s.radius, s.inner_radius)
    }
}

impl From<Sector> for SectorJson {
    fn from(s: Sector) -> Self {
        SectorJson {
            bisector: s.bisector,
            opening: 2.0 * s.half_opening,
            radius: s.radius,
            inner_radius: s.inner_radius,
        }
    }
}

impl Sector {
    pub fn new(bisector: f64, half_opening: f64, radius: Option<f64>, inner_radius: f64) -> Result<Self> {
        if !(half_opening > 0.0 && half_opening < PI) {
            return Err(Error::InvalidArgument(format!(
                "half opening {half_opening} must lie in (0, pi)"
            )));
        }
        if let Some(r) = radius {
            if !(r > inner_radius) {
                return Err(Error::InvalidArgument(format!("radius {r} must exceed inner radius {inner_radius}")));
            }
        }
        if !(inner_radius >= 0.0) || !bisector.is_finite() {
            return Err(Error::InvalidArgument("invalid sector".into()));
        }
        Ok(Sector {
            bisector,
            half_opening,
            radius,
            inner_radius,
        })
    }

    pub fn bounded(bisector: f64, half_opening: f64, radius: f64) -> Result<Self> {
        Sector::new(bisector, half_opening, Some(radius), 0.0)
    }

    pub fn unbounded(bisector: f64, half_opening: f64) -> Result<Self> {
        Sector::new(bisector, half_opening, None, 0.0)
    }

    /// Signed angular offset of `arg z` from the bisector, in `(-pi, pi]`.
    pub fn offset(&self, z: Complex64) -> f64 {
        wrap_angle(z.arg() - self.bisector)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        let r = z.norm();
        r > self.inner_radius
            && self.radius.is_none_or(|rad| r < rad)
            && self.offset(z).abs() < self.half_opening
    }

    pub fn outer(&self) -> f64 {
        self.radius.unwrap_or(DEFAULT_OUTER_RADIUS)
    }

    /// Interior sample points: `n_r` radii (log-spaced from `outer * 1e-6`
    /// or the inner radius) times `n_a` angles, pulled inside the boundary by
    /// the relative factor `shrink`.
    pub fn sample(&self, n_r: usize, n_a: usize, shrink: f64) -> Vec<Complex64> {
        let outer = self.outer() * (1.0 - shrink);
        let inner = if self.inner_radius > 0.0 {
            self.inner_radius * (1.0 + shrink)
        } else {
            outer * 1e-6
        };
        let h = self.half_opening * (1.0 - shrink);
        let mut out = Vec::with_capacity(n_r * n_a);
        for i in 0..n_r {
            let s = if n_r == 1 { 1.0 } else { i as f64 / (n_r - 1) as f64 };
            let r = inner * (outer / inner).powf(s);
            for j in 0..n_a {
                let t = if n_a == 1 { 0.0 } else { 2.0 * j as f64 / (n_a - 1) as f64 - 1.0 };
                out.push(Complex64::from_polar(r, self.bisector + h * t));
            }
        }
        out
    }

    /// Closest point of the closure of the sector to `w`.
    pub fn closest_point(&self, w: Complex64) -> Complex64 {
        let outer = self.outer();
        let clamp = |r: f64| r.clamp(self.inner_radius, outer);
        if self.offset(w).abs() <= self.half_opening {
            return Complex64::from_polar(clamp(w.norm()), w.arg());
        }
        let mut best = Complex64::from_polar(clamp(0.0), self.bisector + self.half_opening);
        for e in [self.bisector - self.half_opening, self.bisector + self.half_opening] {
            let dir = Complex64::from_polar(1.0, e);
            let t = clamp((w * dir.conj()).re.max(0.0));
            let c = dir * t;
            if (c - w).norm() < (best - w).norm() {
                best = c;
            }
        }
        best
    }
}

/// Whether two sectors (as open sets) intersect: their arcs overlap and the
/// radial ranges overlap.
pub fn sectors_intersect(a: &Sector, b: &Sector) -> bool {
    let gap = wrap_angle(a.bisector - b.bisector).abs();
    let arcs = gap < a.half_opening + b.half_opening;
    let radial = a.inner_radius.max(b.inner_radius) < a.outer().min(b.outer());
    arcs && radial
}

/// A cyclic family `E_0, ..., E_{n-1}` of bounded sectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodCovering {
    pub sectors: Vec<Sector>,
}

impl GoodCovering {
    pub fn new(sectors: Vec<Sector>) -> Result<Self> {
        if sectors.len() < 2 {
            return Err(Error::InvalidArgument("a good covering needs at least two sectors".into()));
        }
        Ok(GoodCovering { sectors })
    }

    pub fn len(&self) -> usize {
        self.sectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sectors.is_empty()
    }

    /// Index of `p + 1` modulo the number of sectors.
    pub fn next(&self, p: usize) -> usize {
        (p + 1) % self.len()
    }

    /// Radius of `E_p ∩ E_{p+1}`.
    pub fn overlap_radius(&self, p: usize) -> f64 {
        self.sectors[p].outer().min(self.sectors[self.next(p)].outer())
    }

    /// Angular interval `(lo, hi)` of `E_p ∩ E_{p+1}` with `lo` measured
    /// counter-clockwise from the bisector of `E_p`.
    pub fn overlap_arc(&self, p: usize) -> (f64, f64) {
        let a = &self.sectors[p];
        let b = &self.sectors[self.next(p)];
        let d = wrap_angle(b.bisector - a.bisector).rem_euclid(TAU);
        let lo = (d - b.half_opening).max(-a.half_opening);
        let hi = (d + b.half_opening).min(a.half_opening);
        (a.bisector + lo, a.bisector + hi)
    }

    /// Bisecting direction of the overlap `E_p ∩ E_{p+1}`.
    pub fn overlap_bisector(&self, p: usize) -> f64 {
        let (lo, hi) = self.overlap_arc(p);
        0.5 * (lo + hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyViolation {
    pub i: usize,
    pub j: usize,
    /// `missing_overlap` or `unexpected_overlap`.
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub valid: bool,
    pub adjacency_violations: Vec<AdjacencyViolation>,
    /// Endpoints of arcs not strictly covered by another arc.
    pub uncovered_endpoints: Vec<f64>,
    /// Minimum number of arcs covering a point of the arc grid.
    pub min_coverage: usize,
    pub common_radius: f64,
    pub coverage_defect: Option<String>,
}

/// Checks both conditions of a good covering.
///
/// Adjacency and coverage are decided exactly on arcs; the arc grid count is
/// reported as a secondary diagnostic.
pub fn validate_good_covering(cov: &GoodCovering, arc_resolution: usize) -> CoveringReport {
    let n = cov.len();
    let mut adjacency_violations = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j - i == 1 || (i == 0 && j == n - 1);
            let meets = sectors_intersect(&cov.sectors[i], &cov.sectors[j]);
            if adjacent && !meets {
                adjacency_violations.push(AdjacencyViolation {
                    i,
                    j,
                    kind: "missing_overlap".into(),
                });
            } else if !adjacent && meets {
                adjacency_violations.push(AdjacencyViolation {
                    i,
                    j,
                    kind: "unexpected_overlap".into(),
                });
            }
        }
    }

    let strictly_inside = |theta: f64, s: &Sector| wrap_angle(theta - s.bisector).abs() < s.half_opening;
    let mut uncovered_endpoints = Vec::new();
    for (i, s) in cov.sectors.iter().enumerate() {
        for e in [s.bisector - s.half_opening, s.bisector + s.half_opening] {
            let covered = cov
                .sectors
                .iter()
                .enumerate()
                .any(|(j, o)| j != i && strictly_inside(e, o));
            if !covered {
                uncovered_endpoints.push(wrap_angle(e));
            }
        }
    }

    let res = arc_resolution.max(1);
    let min_coverage = (0..res)
        .map(|k| -PI + TAU * (k as f64 + 0.5) / res as f64)
        .map(|th| cov.sectors.iter().filter(|s| strictly_inside(th, s)).count())
        .min()
        .unwrap_or(0);

    let common_radius = cov.sectors.iter().map(|s| s.outer()).fold(f64::INFINITY, f64::min);
    let mut coverage_defect = None;
    if cov.sectors.iter().any(|s| s.inner_radius > 0.0) {
        coverage_defect = Some("a sector has a positive inner radius, so no punctured disc is covered".into());
    } else if !uncovered_endpoints.is_empty() {
        coverage_defect = Some(format!("{} arc endpoint(s) not covered", uncovered_endpoints.len()));
    } else if min_coverage == 0 {
        coverage_defect = Some("arc grid contains an uncovered direction".into());
    }
    CoveringReport {
        valid: adjacency_violations.is_empty() && coverage_defect.is_none() && common_radius > 0.0,
        adjacency_violations,
        uncovered_endpoints,
        min_coverage,
        common_radius,
        coverage_defect,
    }
}

/// `inf_{r >= 0} |1 + r e^{id} / T|` in closed form.
pub fn spiral_infimum(direction: f64, t: Complex64) -> Result<f64> {
    if t == Complex64::new(0.0, 0.0) {
        return Err(Error::InvalidArgument("T = 0 is outside every spiral domain".into()));
    }
    let theta = wrap_angle(direction - t.arg());
    Ok(if theta.cos() >= 0.0 { 1.0 } else { theta.sin().abs() })
}

/// The domain `{T : |1 + r e^{id}/T| > delta for all r >= 0}`, optionally
/// intersected with a disc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QSpiralDomain {
    pub direction: f64,
    pub delta_t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounded_radius: Option<f64>,
}

impl QSpiralDomain {
    pub fn new(direction: f64, delta_t: f64, bounded_radius: Option<f64>) -> Result<Self> {
        if !(delta_t > 0.0 && delta_t < 1.0) {
            return Err(Error::InvalidArgument(format!("delta_t = {delta_t} not in (0,1)")));
        }
        Ok(QSpiralDomain {
            direction,
            delta_t,
            bounded_radius,
        })
    }

    /// The bounded domain with radius `epsilon0 * rT`.
    pub fn bounded(direction: f64, delta_t: f64, frame: &QFrame) -> Result<Self> {
        Self::new(direction, delta_t, Some(frame.epsilon0() * frame.r_t()))
    }
}

pub fn qspiral_membership(dom: &QSpiralDomain, t: Complex64) -> Result<bool> {
    let inf = spiral_infimum(dom.direction, t)?;
    Ok(inf > dom.delta_t && dom.bounded_radius.is_none_or(|r| t.norm() < r))
}

/// Sector `{|z| >= r, |arg z - d| <= nu}` containing `Q(im)/R(im)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioSector {
    pub r: f64,
    pub d: f64,
    pub nu: f64,
}

impl RatioSector {
    pub fn contains(&self, z: Complex64) -> bool {
        z.norm() >= self.r && wrap_angle(z.arg() - self.d).abs() <= self.nu
    }
}

/// Data of one characteristic polynomial `P_{m,j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootConfig {
    pub level: Level,
    #[serde(rename = "Q")]
    pub q_poly: Poly,
    #[serde(rename = "R_D")]
    pub r_poly: Poly,
    pub d_d: u32,
    pub frame: QFrame,
    /// Required margins `(M1, M2)`.
    pub margins: (f64, f64),
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_sector: Option<RatioSector>,
}

impl RootConfig {
    pub fn order(&self) -> f64 {
        self.frame.level_order(self.level)
    }

    /// Verifies `Q(im) != 0`, `R_D(im) != 0` and, if given, that the ratio
    /// stays in its sector. Returns the offending `m` values.
    pub fn check_grid(&self, m_grid: &[f64]) -> Vec<f64> {
        m_grid
            .iter()
            .copied()
            .filter(|&m| {
                let im = Complex64::new(0.0, m);
                let (qv, rv) = (self.q_poly.eval(im), self.r_poly.eval(im));
                let degenerate = qv.norm() <= 1e-12 * self.q_poly.l1() || rv.norm() <= 1e-12 * self.r_poly.l1();
                degenerate || self.ratio_sector.is_some_and(|s| !s.contains(qv / rv))
            })
            .collect()
    }
}

/// Roots of `P_{m,j}`, i.e. the `d_D`-th roots of
/// `Q(im)/R_D(im) (q^(1/k))^((d_D+k)(d_D+k-1)/2 - k(k-1)/2)`, sorted by argument.
pub fn roots_of_p(cfg: &RootConfig, m: f64) -> Result<Vec<Complex64>> {
    if cfg.d_d == 0 {
        return Err(Error::InvalidArgument("d_D must be at least 1".into()));
    }
    let im = Complex64::new(0.0, m);
    let qv = cfg.q_poly.eval(im);
    let rv = cfg.r_poly.eval(im);
    if rv.norm() <= 1e-12 * cfg.r_poly.l1().max(f64::MIN_POSITIVE) {
        return Err(Error::Hypothesis(format!("R_D(im) vanishes at m = {m}")));
    }
    if qv.norm() <= 1e-12 * cfg.q_poly.l1().max(f64::MIN_POSITIVE) {
        return Err(Error::Hypothesis(format!("Q(im) vanishes at m = {m}")));
    }
    let k = cfg.order();
    let d = cfg.d_d as f64;
    let expo = 0.5 * (d + k) * (d + k - 1.0) - 0.5 * k * (k - 1.0);
    let c = qv / rv * cfg.frame.q().powf(expo / k);
    let modulus = c.norm().powf(1.0 / d);
    let mut roots: Vec<Complex64> = (0..cfg.d_d)
        .map(|j| Complex64::from_polar(modulus, (c.arg() + TAU * j as f64) / d))
        .collect();
    roots.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    Ok(roots)
}

/// 257 points on `[-20, 20]`: zero plus 128 geometrically spaced magnitudes
/// from `1e-3` to `20` on each side.
pub fn default_m_grid() -> Vec<f64> {
    let mut pos: Vec<f64> = (0..128).map(|i| 1e-3 * (2e4f64).powf(i as f64 / 127.0)).collect();
    let mut out: Vec<f64> = pos.iter().rev().map(|m| -m).collect();
    out.push(0.0);
    out.append(&mut pos);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub ok: bool,
    #[serde(rename = "M1_est")]
    pub m1_est: f64,
    #[serde(rename = "M2_est")]
    pub m2_est: f64,
}

/// Estimates the margins of conditions a) and b) for the direction `d`.
///
/// The test region is `test_sector` rotated to bisector `d`, together with
/// the closed disc of radius `rho` at level one. It is realised as a point
/// cloud with `tau_grid_size` radii and angles, augmented with the closest
/// point of the region to every root so that a root inside the region is
/// detected exactly.
pub fn direction_admissible(
    cfg: &RootConfig,
    d: f64,
    test_sector: &Sector,
    m_grid: &[f64],
    tau_grid_size: usize,
) -> Result<AdmissibilityReport> {
    if m_grid.is_empty() || tau_grid_size == 0 {
        return Err(Error::InvalidArgument("empty admissibility grid".into()));
    }
    let sector = Sector { bisector: d, ..*test_sector };
    let mut cloud = sector.sample(tau_grid_size, tau_grid_size, 0.0);
    let disc = match cfg.level {
        Level::One => Some(Sector::new(0.0, PI * (1.0 - 1e-12), Some(cfg.rho), 0.0)?),
        Level::Two => None,
    };
    if let (Some(_), true) = (disc, cfg.rho > 0.0) {
        cloud.push(Complex64::new(0.0, 0.0));
        for i in 1..=tau_grid_size {
            let r = cfg.rho * i as f64 / tau_grid_size as f64;
            for j in 0..tau_grid_size {
                cloud.push(Complex64::from_polar(r, TAU * j as f64 / tau_grid_size as f64));
            }
        }
    }
    let per_m: Vec<Result<(f64, f64)>> = m_grid
        .par_iter()
        .map(|&m| {
            let roots = roots_of_p(cfg, m)?;
            let mut m1 = f64::INFINITY;
            let mut m2 = f64::INFINITY;
            let mut visit = |tau: Complex64, root: Complex64| {
                let dist = (tau - root).norm();
                m1 = m1.min(dist / (1.0 + tau.norm()));
                m2 = m2.min(dist / root.norm());
            };
            for root in &roots {
                for tau in &cloud {
                    visit(*tau, *root);
                }
                visit(sector.closest_point(*root), *root);
                if disc.is_some() && root.norm() <= cfg.rho {
                    visit(*root, *root);
                }
            }
            Ok((m1, m2))
        })
        .collect();
    let mut m1 = f64::INFINITY;
    let mut m2 = f64::INFINITY;
    for r in per_m {
        let (a, b) = r?;
        m1 = m1.min(a);
        m2 = m2.min(b);
    }
    Ok(AdmissibilityReport {
        ok: m1 >= cfg.margins.0 && m2 >= cfg.margins.1,
        m1_est: m1,
        m2_est: m2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub ok: bool,
    /// Overlaps `p` for which no sampled point lies in both bounded domains.
    pub empty_intersections: Vec<usize>,
    /// `(p, t, epsilon)` samples with `epsilon t` outside the domain of `p`.
    pub membership_failures: Vec<(usize, Complex64, Complex64)>,
    pub checked_products: usize,
}

/// Verifies that the spiral domains are associated with the covering: each
/// consecutive pair of bounded domains meets, and `epsilon t` lies in the
/// domain of `p` for `t` in the `T` sector and `epsilon` in `E_p`.
pub fn associate_family(
    cov: &GoodCovering,
    domains: &[QSpiralDomain],
    t_sector: &Sector,
    frame: &QFrame,
) -> Result<FamilyReport> {
    let n = cov.len();
    if domains.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} domains supplied for {} sectors",
            domains.len(),
            n
        )));
    }
    let bound = frame.epsilon0() * frame.r_t();
    let bounded: Vec<QSpiralDomain> = domains
        .iter()
        .map(|d| QSpiralDomain {
            bounded_radius: Some(d.bounded_radius.unwrap_or(bound).min(bound)),
            ..*d
        })
        .collect();
    let probe = Sector::new(0.0, PI * (1.0 - 1e-9), Some(bound), 0.0)?.sample(6, 721, 1e-3);
    let mut empty_intersections = Vec::new();
    for p in 0..n {
        let (a, b) = (&bounded[p], &bounded[(p + 1) % n]);
        let meets = probe
            .iter()
            .any(|z| qspiral_membership(a, *z).unwrap_or(false) && qspiral_membership(b, *z).unwrap_or(false));
        if !meets {
            empty_intersections.push(p);
        }
    }
    let ts = t_sector.sample(5, 9, 1e-6);
    let mut membership_failures = Vec::new();
    let mut checked = 0;
    for p in 0..n {
        for eps in cov.sectors[p].sample(5, 17, 1e-6) {
            for t in &ts {
                checked += 1;
                let et = eps * t;
                if !qspiral_membership(&bounded[p], et)? {
                    membership_failures.push((p, *t, eps));
                }
            }
        }
    }
    Ok(FamilyReport {
        ok: empty_intersections.is_empty() && membership_failures.is_empty(),
        empty_intersections,
        membership_failures,
        checked_products: checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::make_qframe;

    fn deg(x: f64) -> f64 {
        x.to_radians()
    }

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn covering_examples() {
        let three = GoodCovering::new(
            [0.0, 120.0, 240.0]
                .iter()
                .map(|b| Sector::bounded(deg(*b), deg(75.0), 1.0).unwrap())
                .collect(),
        )
        .unwrap();
        assert!(validate_good_covering(&three, 3600).valid);

        let four = GoodCovering::new(
            [0.0, 90.0, 180.0, 270.0]
                .iter()
                .map(|b| Sector::bounded(deg(*b), deg(100.0), 1.0).unwrap())
                .collect(),
        )
        .unwrap();
        let r = validate_good_covering(&four, 3600);
        assert!(!r.valid);
        assert!(r.adjacency_violations.iter().any(|v| (v.i, v.j) == (0, 2)));

        let two = GoodCovering::new(vec![
            Sector::bounded(0.0, deg(100.0), 1.0).unwrap(),
            Sector::bounded(PI, deg(100.0), 0.5).unwrap(),
        ])
        .unwrap();
        let r = validate_good_covering(&two, 3600);
        assert!(r.valid);
        assert_eq!(r.common_radius, 0.5);

        // a gap between two arcs
        let gap = GoodCovering::new(vec![
            Sector::bounded(0.0, deg(80.0), 1.0).unwrap(),
            Sector::bounded(PI, deg(95.0), 1.0).unwrap(),
        ])
        .unwrap();
        let r = validate_good_covering(&gap, 3600);
        assert!(!r.valid && r.coverage_defect.is_some());
    }

    #[test]
    fn sector_json_uses_full_opening() {
        let s: Sector = serde_json::from_str(r#"{"bisector":0.5,"opening":1.0,"radius":0.3}"#).unwrap();
        assert_eq!(s.half_opening, 0.5);
        assert_eq!(s.radius, Some(0.3));
        let v = serde_json::to_value(s).unwrap();
        assert_eq!(v["opening"], 1.0);
    }

    #[test]
    fn spiral_membership_examples() {
        let d = 0.4;
        let t = Complex64::from_polar(0.2, d + PI);
        for delta in [1e-6, 0.3, 0.9] {
            let dom = QSpiralDomain::new(d, delta, None).unwrap();
            assert!(!qspiral_membership(&dom, t).unwrap());
        }
        let dom = QSpiralDomain::new(d, 0.9, None).unwrap();
        assert!(qspiral_membership(&dom, Complex64::from_polar(3.0, d)).unwrap());
        // theta = 2 pi / 3
        let t = Complex64::from_polar(1.0, d - 2.0 * PI / 3.0);
        let dom = QSpiralDomain::new(d, 0.8, None).unwrap();
        assert!(qspiral_membership(&dom, t).unwrap());
        let brute = (0..20001)
            .map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / 20000.0))
            .map(|r| (Complex64::new(1.0, 0.0) + Complex64::from_polar(r, d) / t).norm())
            .fold(f64::INFINITY, f64::min);
        assert!((brute - (3.0f64).sqrt() / 2.0).abs() < 1e-6);
        let b = QSpiralDomain::new(d, 0.5, Some(0.1)).unwrap();
        assert!(!qspiral_membership(&b, Complex64::from_polar(0.2, d)).unwrap());
        assert!(qspiral_membership(&b, Complex64::from_polar(0.05, d)).unwrap());
    }

    fn unit_config(d_d: u32, level: Level) -> RootConfig {
        RootConfig {
            level,
            q_poly: Poly::constant(1.0),
            r_poly: Poly::constant(1.0),
            d_d,
            frame: make_qframe(2.0, 1.0, 2.0, 0.4, 0.4).unwrap(),
            margins: (0.05, 0.05),
            rho: 0.5,
            ratio_sector: None,
        }
    }

    #[test]
    fn roots_closed_form() {
        let cfg = unit_config(2, Level::One);
        let r = roots_of_p(&cfg, 3.7).unwrap();
        let s = 2f64.powf(1.5);
        assert!((r[0] - Complex64::new(s, 0.0)).norm() < 1e-12);
        assert!((r[1] - Complex64::new(-s, 0.0)).norm() < 1e-12);
        let cfg1 = unit_config(1, Level::One);
        // d = 1, k = 1: exponent (2*1)/2 - 0 = 1, root q = 2
        assert!((roots_of_p(&cfg1, 0.0).unwrap()[0] - Complex64::new(2.0, 0.0)).norm() < 1e-14);
        let mut bad = unit_config(2, Level::One);
        bad.q_poly = Poly::from_real(&[1.0, 0.0, 1.0]);
        assert!(matches!(roots_of_p(&bad, 1.0), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn admissibility_examples() {
        // roots at +-2^(3/2): directions pi/2 stay away from both
        let cfg = unit_config(2, Level::One);
        let u = Sector::unbounded(0.0, 0.3).unwrap();
        let grid = default_m_grid();
        assert_eq!(grid.len(), 257);
        let r = direction_admissible(&cfg, PI / 2.0, &u, &grid, 40).unwrap();
        assert!(r.ok, "{r:?}");
        // roots of a one-root config sit on arg 0: the ray through them fails
        let cfg1 = unit_config(1, Level::Two);
        let r = direction_admissible(&cfg1, 0.0, &u, &grid, 40).unwrap();
        assert!(!r.ok && r.m2_est < 1e-12);
        let r = direction_admissible(&cfg1, PI, &u, &grid, 40).unwrap();
        assert!(r.ok);
        assert!(r.m2_est >= (PI / 2.0 - 0.3).sin().min(1.0) - 1e-9);
    }

    #[test]
    fn family_association() {
        let frame = make_qframe(2.0, 1.0, 2.0, 0.4, 0.4).unwrap();
        let dirs = [0.0, PI / 2.0, PI, 3.0 * PI / 2.0];
        let cov = GoodCovering::new(dirs.iter().map(|d| Sector::bounded(*d, 1.5, 0.4).unwrap()).collect()).unwrap();
        let tsec = Sector::bounded(0.0, 0.2, 0.4).unwrap();
        let domains: Vec<_> = dirs.iter().map(|d| QSpiralDomain::bounded(*d, 0.3, &frame).unwrap()).collect();
        let r = associate_family(&cov, &domains, &tsec, &frame).unwrap();
        assert!(r.ok, "{r:?}");
        let tight: Vec<_> = dirs.iter().map(|d| QSpiralDomain::bounded(*d, 0.999, &frame).unwrap()).collect();
        let r = associate_family(&cov, &tight, &tsec, &frame).unwrap();
        assert!(!r.membership_failures.is_empty());
    }
}
