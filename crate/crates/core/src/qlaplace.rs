//! The q-Laplace transform of order `k` along a direction `d`:
//! `(k / log q) int_{L_d} f(u) / Theta(u / T) du / u`.
//!
//! On the ray `u = exp(s + i d)` the measure `du/u` becomes `ds`, and the
//! theta lower bound makes the integrand decay like a Gaussian in `s` at the
//! origin end and (at least) exponentially at infinity. The cut-offs are
//! derived from those bounds and the growth certificate of `f`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::spiral_infimum;
use crate::quadrature::{integrate, QuadOptions};
use crate::special::ThetaSpec;

/// Spiral distance below which a direction is perturbed.
pub const SPIRAL_FLOOR: f64 = 0.1;
/// Size of the direction perturbation used to leave the spiral.
pub const DIRECTION_NUDGE: f64 = 1e-3;

/// `||f(u)|| <= K exp(k log^2|u| / (2 log q) + alpha log|u|)` for `|u| >= rho`
/// on the ray and `||f(u)|| <= K` on the closed disc of radius `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthCertificate {
    #[serde(rename = "K")]
    pub big_k: f64,
    pub alpha: f64,
    /// Growth order; may be smaller than the transform order.
    pub k: f64,
    pub rho: f64,
}

impl GrowthCertificate {
    pub fn new(big_k: f64, alpha: f64, k: f64, rho: f64) -> Result<Self> {
        if !(big_k > 0.0) || !(k >= 0.0) || !(rho > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "invalid growth certificate (K={big_k}, alpha={alpha}, k={k}, rho={rho})"
            )));
        }
        Ok(GrowthCertificate { big_k, alpha, k, rho })
    }

    /// Natural log of the certified bound at modulus `r`.
    pub fn log_bound(&self, r: f64, q: f64) -> f64 {
        if r <= self.rho {
            self.big_k.ln()
        } else {
            let x = r.ln();
            self.big_k.ln() + 0.5 * self.k * x * x / q.ln() + self.alpha * x
        }
    }

    pub fn admits(&self, value: Complex64, r: f64, q: f64) -> bool {
        let n = value.norm();
        n == 0.0 || n.ln() <= self.log_bound(r, q) + 1e-9
    }
}

/// A function on a ray and a disc together with its growth certificate.
pub trait CertifiedFunction: Send + Sync {
    fn eval(&self, u: Complex64) -> Result<Complex64>;
    fn certificate(&self) -> GrowthCertificate;
}

impl<F: CertifiedFunction + ?Sized> CertifiedFunction for Arc<F> {
    fn eval(&self, u: Complex64) -> Result<Complex64> {
        (**self).eval(u)
    }
    fn certificate(&self) -> GrowthCertificate {
        (**self).certificate()
    }
}

/// A closure with an explicitly supplied certificate.
pub struct WithCertificate<F> {
    pub f: F,
    pub cert: GrowthCertificate,
}

impl<F> CertifiedFunction for WithCertificate<F>
where
    F: Fn(Complex64) -> Complex64 + Send + Sync,
{
    fn eval(&self, u: Complex64) -> Result<Complex64> {
        Ok((self.f)(u))
    }
    fn certificate(&self) -> GrowthCertificate {
        self.cert
    }
}

/// `coef * u^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: Complex64,
    pub n: u32,
    /// Order used in the certificate (normally the transform order).
    pub k: f64,
}

impl CertifiedFunction for Monomial {
    fn eval(&self, u: Complex64) -> Result<Complex64> {
        Ok(self.coef * u.powu(self.n))
    }
    fn certificate(&self) -> GrowthCertificate {
        // |u|^n <= exp(k log^2|u|/(2 log q) + n log|u|) for |u| >= 1
        GrowthCertificate {
            big_k: self.coef.norm().max(f64::MIN_POSITIVE),
            alpha: self.n as f64,
            k: self.k,
            rho: 1.0,
        }
    }
}

/// Samples `(r, f(r e^{id}))` along a ray, interpolated linearly in `log r`,
/// constant below the first sample and zero beyond the last.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledRay {
    log_r: Vec<f64>,
    values: Vec<Complex64>,
    cert: GrowthCertificate,
}

impl SampledRay {
    /// Builds the samples and the tightest certificate of order `k`,
    /// `alpha = 0`, `rho = 1`.
    pub fn new(mut samples: Vec<(f64, Complex64)>, q: f64, k: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidArgument("a sampled ray needs at least two samples".into()));
        }
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        if samples[0].0 <= 0.0 || samples.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument("ray samples need distinct positive radii".into()));
        }
        let mut cert = GrowthCertificate {
            big_k: f64::MIN_POSITIVE,
            alpha: 0.0,
            k,
            rho: 1.0,
        };
        for (r, v) in &samples {
            let shape = cert.log_bound(*r, q) - cert.big_k.ln();
            cert.big_k = cert.big_k.max(v.norm() / shape.exp());
        }
        let (log_r, values) = samples.into_iter().map(|(r, v)| (r.ln(), v)).unzip();
        Ok(SampledRay { log_r, values, cert })
    }

    pub fn from_csv<R: std::io::Read>(reader: R, q: f64, k: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() < 3 {
                return Err(Error::InvalidArgument(format!("csv row {i}: expected r, re, im")));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>(), rec[2].parse::<f64>()) {
                (Ok(r), Ok(re), Ok(im)) => rows.push((r, Complex64::new(re, im))),
                _ if i == 0 => continue,
                _ => return Err(Error::InvalidArgument(format!("csv row {i}: not numeric"))),
            }
        }
        Self::new(rows, q, k)
    }
}

impl CertifiedFunction for SampledRay {
    fn eval(&self, u: Complex64) -> Result<Complex64> {
        let x = u.norm().ln();
        let n = self.log_r.len();
        if x <= self.log_r[0] {
            return Ok(self.values[0]);
        }
        if x > self.log_r[n - 1] {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let i = self.log_r.partition_point(|&l| l <= x).clamp(1, n - 1);
        let s = (x - self.log_r[i - 1]) / (self.log_r[i] - self.log_r[i - 1]);
        Ok(self.values[i - 1] * (1.0 - s) + self.values[i] * s)
    }
    fn certificate(&self) -> GrowthCertificate {
        self.cert
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadControls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evals: usize,
}

impl Default for QuadControls {
    fn default() -> Self {
        QuadControls {
            rel_tol: 1e-12,
            abs_tol: 1e-300,
            max_evals: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QLaplaceSpec {
    pub q: f64,
    /// Transform order.
    pub k: f64,
    pub direction: f64,
    #[serde(default)]
    pub quad: QuadControls,
}

impl QLaplaceSpec {
    pub fn new(q: f64, k: f64, direction: f64) -> Result<Self> {
        if !(q > 1.0) || !(k > 0.0) || !direction.is_finite() {
            return Err(Error::InvalidArgument(format!("q-Laplace needs q > 1, k > 0 (q={q}, k={k})")));
        }
        Ok(QLaplaceSpec {
            q,
            k,
            direction,
            quad: QuadControls::default(),
        })
    }

    pub fn with_tolerance(mut self, rel_tol: f64) -> Self {
        self.quad.rel_tol = rel_tol;
        self
    }

    pub fn with_direction(mut self, d: f64) -> Self {
        self.direction = d;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QLaplaceValue {
    pub value: Complex64,
    pub error_estimate: f64,
    pub nodes_used: usize,
    pub direction_used: f64,
}

/// Calibrated theta kernels, built once per `(q, k)` and then shared.
pub fn kernel_spec(q: f64, k: f64) -> Result<Arc<ThetaSpec>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), Arc<ThetaSpec>>>> = OnceLock::new();
    let key = (q.to_bits(), k.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(s) = cache.lock().expect("kernel cache poisoned").get(&key) {
        return Ok(s.clone());
    }
    let spec = Arc::new(ThetaSpec::new(q, k, 1e-15)?.calibrated()?);
    cache.lock().expect("kernel cache poisoned").entry(key).or_insert(spec.clone());
    Ok(spec)
}

/// Radius of the disc on which the transform is guaranteed holomorphic.
///
/// For a certificate of the transform order this is `q^((1/2 - alpha)/k) / 2`.
/// A certificate of lower order gives an entire transform; a higher order
/// gives no convergence at all.
pub fn domain_radius(cert: &GrowthCertificate, q: f64, k: f64) -> Result<f64> {
    let tol = 1e-12 * k.max(1.0);
    if cert.k > k + tol {
        return Err(Error::CertificateViolated(format!(
            "certificate order {} exceeds the transform order {k}: the integral diverges",
            cert.k
        )));
    }
    if cert.k < k - tol {
        return Ok(f64::INFINITY);
    }
    Ok(q.powf((0.5 - cert.alpha) / k) / 2.0)
}

/// Largest `S` (searching downward from `start`) with
/// `exp(e(S)) / (-e'(S)) <= target` on a concave or linear exponent, or the
/// smallest such `S` searching upward. `dir` is `+1` for the upper tail and
/// `-1` for the lower tail.
fn tail_cutoff<E, D>(e: E, de: D, start: f64, dir: f64, log_target: f64) -> Result<f64>
where
    E: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    // in the direction of integration the exponent must decrease
    let ok = |s: f64| {
        let slope = dir * de(s);
        slope < 0.0 && e(s) - (-slope).ln() <= log_target
    };
    let mut step = 1.0;
    let mut s = start;
    while !ok(s) {
        s += dir * step;
        step *= 1.5;
        if (s - start).abs() > 1e5 {
            return Err(Error::Degenerate("q-Laplace tail does not decay".into()));
        }
    }
    Ok(s)
}

/// Integration window and tail bound in the variable `sigma = log|u| - log|T|`.
struct Window {
    lo: f64,
    hi: f64,
    tail: f64,
}

struct RayProblem<'a, F: ?Sized> {
    f: &'a F,
    theta: &'a ThetaSpec,
    q: f64,
    k: f64,
    d: f64,
    t: Complex64,
    delta: f64,
}

impl<F: CertifiedFunction + ?Sized> RayProblem<'_, F> {
    fn node(&self, sigma: f64) -> Result<Complex64> {
        let r = self.t.norm() * sigma.exp();
        let u = Complex64::from_polar(r, self.d);
        let fv = self.f.eval(u)?;
        let cert = self.f.certificate();
        if !cert.admits(fv, r, self.q) {
            return Err(Error::CertificateViolated(format!(
                "|f(u)| = {:e} exceeds the certified bound {:e} at |u| = {r:e}",
                fv.norm(),
                cert.log_bound(r, self.q).exp()
            )));
        }
        if fv == Complex64::new(0.0, 0.0) {
            return Ok(fv);
        }
        let th = self.theta.eval_scaled(u / self.t)?;
        let v = fv / th.mantissa * (-th.log_scale).exp();
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Degenerate(format!("non-finite q-Laplace integrand at |u| = {r:e}")));
        }
        Ok(v)
    }

    /// Cut-offs with each tail below `target`.
    fn window(&self, target: f64) -> Result<Window> {
        let cert = self.f.certificate();
        let c = self.theta.cqk.expect("kernel specs are calibrated");
        let lq = self.q.ln();
        let l = self.t.norm().ln();
        let k = self.k;
        // log of K / (C delta), the common prefactor
        let pre = cert.big_k.ln() - c.ln() - self.delta.ln();
        let log_target = target.ln() - pre;
        let sigma_rho = cert.rho.ln() - l;

        let e_lo = |s: f64| -(0.5 * k * s * s / lq + 0.5 * s);
        let de_lo = |s: f64| -(k * s / lq + 0.5);
        let start_lo = sigma_rho.min(-0.5 * lq / k - 1.0);
        let lo = tail_cutoff(e_lo, de_lo, start_lo, -1.0, log_target)?;

        let kc = cert.k;
        let al = cert.alpha;
        let e_hi = move |s: f64| {
            let x = l + s;
            0.5 * kc * x * x / lq + al * x - 0.5 * k * s * s / lq - 0.5 * s
        };
        let de_hi = move |s: f64| kc * (l + s) / lq + al - k * s / lq - 0.5;
        let hi = tail_cutoff(e_hi, de_hi, sigma_rho.max(lo + 1.0), 1.0, log_target)?;

        let t_lo = (e_lo(lo) - (de_lo(lo)).abs().ln() + pre).exp();
        let t_hi = (e_hi(hi) - (de_hi(hi)).abs().ln() + pre).exp();
        Ok(Window {
            lo,
            hi,
            tail: t_lo + t_hi,
        })
    }

    fn opts(&self, c: &QuadControls) -> QuadOptions {
        QuadOptions {
            abs_tol: c.abs_tol,
            rel_tol: c.rel_tol,
            max_evals: c.max_evals,
        }
    }

    fn run(&self, controls: &QuadControls) -> Result<(Complex64, f64, usize)> {
        let cert = self.f.certificate();
        let opts = self.opts(controls);
        let sigma_rho = cert.rho.ln() - self.t.norm().ln();
        let breaks_for = |lo: f64, hi: f64| {
            let mut b = vec![lo];
            for x in [sigma_rho, 0.0] {
                if x > lo && x < hi {
                    b.push(x);
                }
            }
            b.push(hi);
            b.sort_by(f64::total_cmp);
            b.dedup();
            b
        };
        // first pass with a tail comparable to the certificate scale
        let w0 = self.window(1e-16 * cert.big_k)?;
        let core = integrate(|s| self.node(s), &breaks_for(w0.lo, w0.hi), &opts)?;
        let mut value = core.value;
        let mut error = core.error;
        let mut nodes = core.evaluations;
        let target = 0.25 * controls.abs_tol.max(controls.rel_tol * value.norm());
        let mut tail = w0.tail;
        if target < w0.tail {
            let w1 = self.window(target)?;
            for (a, b) in [(w1.lo, w0.lo), (w0.hi, w1.hi)] {
                if b > a {
                    let ext = integrate(
                        |s| self.node(s),
                        &[a, b],
                        &QuadOptions {
                            abs_tol: target.max(controls.abs_tol),
                            ..opts
                        },
                    )?;
                    value += ext.value;
                    error += ext.error;
                    nodes += ext.evaluations;
                }
            }
            tail = w1.tail;
        }
        // scan a decade beyond the window for certificate violations
        let w_hi = self.window(target.min(w0.tail))?.hi;
        for i in 0..=64 {
            self.node(w_hi + (i as f64) * (10f64.ln() + 1.0) / 64.0).map(|_| ())?;
        }
        let factor = self.k / self.q.ln();
        Ok((value * factor, (error + tail) * factor, nodes))
    }
}

/// Transform of `f` at `T`.
pub fn qlaplace<F: CertifiedFunction + ?Sized>(spec: &QLaplaceSpec, f: &F, t: Complex64) -> Result<QLaplaceValue> {
    if t == Complex64::new(0.0, 0.0) {
        return Err(Error::OutsideDomain("T = 0".into()));
    }
    let cert = f.certificate();
    let r1 = domain_radius(&cert, spec.q, spec.k)?;
    if t.norm() >= r1 {
        return Err(Error::OutsideDomain(format!(
            "|T| = {:e} is not below the guaranteed radius {r1:e}",
            t.norm()
        )));
    }
    let mut d = spec.direction;
    let mut delta = spiral_infimum(d, t)?;
    if delta <= SPIRAL_FLOOR {
        let best = [d - DIRECTION_NUDGE, d + DIRECTION_NUDGE]
            .into_iter()
            .map(|dd| (dd, spiral_infimum(dd, t).unwrap_or(0.0)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("two candidates");
        if best.1 <= SPIRAL_FLOOR {
            return Err(Error::SpiralProximity {
                z: format!("{t}"),
                infimum: delta,
                delta: SPIRAL_FLOOR,
            });
        }
        (d, delta) = best;
    }
    let theta = kernel_spec(spec.q, spec.k)?;
    let problem = RayProblem {
        f,
        theta: &theta,
        q: spec.q,
        k: spec.k,
        d,
        t,
        delta: delta * (1.0 - 1e-12),
    };
    let (value, error_estimate, nodes_used) = problem.run(&spec.quad)?;
    Ok(QLaplaceValue {
        value,
        error_estimate,
        nodes_used,
        direction_used: d,
    })
}

/// `(k / log q) int_{r_from}^{r_to} f(r e^{id}) / Theta(r e^{id} / T) dr / r`.
pub fn laplace_ray_segment<F>(
    f: F,
    q: f64,
    k: f64,
    d: f64,
    t: Complex64,
    r_from: f64,
    r_to: f64,
    opts: &QuadOptions,
) -> Result<(Complex64, f64)>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    if !(r_from > 0.0 && r_to > r_from) {
        return Err(Error::InvalidArgument(format!("bad segment [{r_from}, {r_to}]")));
    }
    let theta = kernel_spec(q, k)?;
    let lt = t.norm().ln();
    let (a, b) = (r_from.ln() - lt, r_to.ln() - lt);
    let mut breaks = vec![a];
    if a < 0.0 && b > 0.0 {
        breaks.push(0.0);
    }
    breaks.push(b);
    let r = integrate(
        |s: f64| {
            let u = Complex64::from_polar(t.norm() * s.exp(), d);
            let th = theta.eval_scaled(u / t)?;
            Ok(f(u)? / th.mantissa * (-th.log_scale).exp())
        },
        &breaks,
        opts,
    )?;
    let factor = k / q.ln();
    Ok((r.value * factor, r.error * factor))
}

/// `(k / log q) int f(R e^{i phi}) / Theta(R e^{i phi} / T) i dphi` from
/// `phi_from` to `phi_to` (signed).
pub fn laplace_arc<F>(
    f: F,
    q: f64,
    k: f64,
    radius: f64,
    phi_from: f64,
    phi_to: f64,
    t: Complex64,
    opts: &QuadOptions,
) -> Result<(Complex64, f64)>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let theta = kernel_spec(q, k)?;
    let (a, b, sign) = if phi_to >= phi_from {
        (phi_from, phi_to, 1.0)
    } else {
        (phi_to, phi_from, -1.0)
    };
    if a == b {
        return Ok((Complex64::new(0.0, 0.0), 0.0));
    }
    let n = (((b - a) / (PI / 8.0)).ceil() as usize).max(1);
    let breaks: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    let r = integrate(
        |phi: f64| {
            let u = Complex64::from_polar(radius, phi);
            let th = theta.eval_scaled(u / t)?;
            Ok(f(u)? / th.mantissa * (-th.log_scale).exp() * Complex64::new(0.0, 1.0))
        },
        &breaks,
        opts,
    )?;
    let factor = sign * k / q.ln();
    Ok((r.value * factor, r.error * factor.abs()))
}

/// Measured constant `c_{n,k}` with `L(u^n)(T) = c_{n,k} T^n` on the ray
/// `arg T = d`, cached per `(n, k, q, d, tolerance)`.
pub fn monomial_constant(q: f64, k: f64, d: f64, n: u32, rel_tol: f64) -> Result<Complex64> {
    type Key = (u32, u64, u64, u64, u64);
    static CACHE: OnceLock<Mutex<HashMap<Key, Complex64>>> = OnceLock::new();
    let key = (n, k.to_bits(), q.to_bits(), d.to_bits(), rel_tol.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(c) = cache.lock().expect("monomial cache poisoned").get(&key) {
        return Ok(*c);
    }
    let f = Monomial {
        coef: Complex64::new(1.0, 0.0),
        n,
        k,
    };
    let r1 = domain_radius(&f.certificate(), q, k)?;
    let t = Complex64::from_polar(0.5 * r1.min(1.0), d);
    let spec = QLaplaceSpec::new(q, k, d)?.with_tolerance(rel_tol);
    let v = qlaplace(&spec, &f, t)?;
    let c = v.value / t.powu(n);
    cache.lock().expect("monomial cache poisoned").insert(key, c);
    Ok(c)
}

/// Per-probe comparison between the transform of a level-`kappa` kernel
/// and a level-`k2` kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkReport {
    pub discrepancies: Vec<f64>,
    pub max_discrepancy: f64,
}

/// A kernel family `(u, m, eps) -> w(u, m, eps)` with certificates in `u`.
pub trait KernelFamily: Send + Sync {
    fn eval(&self, u: Complex64, m: f64, eps: Complex64) -> Result<Complex64>;
    fn certificate(&self, m: f64, eps: Complex64) -> GrowthCertificate;
}

struct Slice<'a, K: ?Sized> {
    w: &'a K,
    m: f64,
    eps: Complex64,
}

impl<K: KernelFamily + ?Sized> CertifiedFunction for Slice<'_, K> {
    fn eval(&self, u: Complex64) -> Result<Complex64> {
        self.w.eval(u, self.m, self.eps)
    }
    fn certificate(&self) -> GrowthCertificate {
        self.w.certificate(self.m, self.eps)
    }
}

/// Relative discrepancy between `L^d_{q;1/kappa}(w1)(tau)` and `w2(tau)` at
/// each probe `(tau, m, eps)`.
pub fn verify_laplace_link<K1, K2>(
    w1: &K1,
    w2: &K2,
    spec: &QLaplaceSpec,
    probes: &[(Complex64, f64, Complex64)],
) -> Result<LinkReport>
where
    K1: KernelFamily + ?Sized,
    K2: KernelFamily + ?Sized,
{
    let mut discrepancies = Vec::with_capacity(probes.len());
    for &(tau, m, eps) in probes {
        let lhs = qlaplace(spec, &Slice { w: w1, m, eps }, tau)?.value;
        let rhs = w2.eval(tau, m, eps)?;
        discrepancies.push((lhs - rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE));
    }
    let max_discrepancy = discrepancies.iter().copied().fold(0.0, f64::max);
    Ok(LinkReport {
        discrepancies,
        max_discrepancy,
    })
}
