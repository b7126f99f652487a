//! Globally adaptive Gauss–Kronrod (7/15) quadrature over a generic value type.
//!
//! The integrand may return scalars, complex numbers or vectors of complex
//! numbers (a sampled Banach-space value). It is fallible so that domain
//! errors raised inside the integrand abort the integration cleanly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Values that can be accumulated by the quadrature.
pub trait QuadValue: Clone {
    fn zero_like(&self) -> Self;
    /// `self += a * x`
    fn axpy(&mut self, a: f64, x: &Self);
    fn norm(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += x * a;
    }
    fn norm(&self) -> f64 {
        Complex64::norm(*self)
    }
}

/// Vectors use the sup norm, matching the sampled sup-norm Banach space.
impl QuadValue for Vec<Complex64> {
    fn zero_like(&self) -> Self {
        vec![Complex64::new(0.0, 0.0); self.len()]
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x) {
            *s += v * a;
        }
    }
    fn norm(&self) -> f64 {
        self.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_evals: 200_000,
        }
    }
}

impl QuadOptions {
    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        QuadOptions {
            abs_tol,
            rel_tol,
            ..Default::default()
        }
    }

    fn target(&self, value_norm: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value_norm)
    }
}

#[derive(Debug, Clone)]
pub struct QuadResult<V> {
    pub value: V,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl<V> QuadResult<V> {
    /// Turns a non-converged result into an error.
    pub fn checked(self, tolerance: f64) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::Quadrature {
                estimate: self.error,
                tolerance,
                evaluations: self.evaluations,
            })
        }
    }
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

struct Panel<V> {
    a: f64,
    b: f64,
    value: V,
    error: f64,
    /// The error estimate is the round-off floor; bisecting cannot help.
    at_floor: bool,
}

impl<V> PartialEq for Panel<V> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<V> Eq for Panel<V> {}
impl<V> PartialOrd for Panel<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<V> Ord for Panel<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<V, F>(f: &mut F, a: f64, b: f64) -> Result<Panel<V>>
where
    V: QuadValue,
    F: FnMut(f64) -> Result<V>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kron = fc.zero_like();
    let mut gauss = fc.zero_like();
    kron.axpy(WGK[7], &fc);
    gauss.axpy(WG[3], &fc);
    let mut samples = Vec::with_capacity(15);
    samples.push((WGK[7], fc));
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx)?;
        let f2 = f(c + dx)?;
        kron.axpy(WGK[j], &f1);
        kron.axpy(WGK[j], &f2);
        if j % 2 == 1 {
            gauss.axpy(WG[j / 2], &f1);
            gauss.axpy(WG[j / 2], &f2);
        }
        samples.push((WGK[j], f1));
        samples.push((WGK[j], f2));
    }
    // QUADPACK-style error scaling, with norms in place of absolute values
    let mean = {
        let mut m = kron.zero_like();
        m.axpy(0.5, &kron);
        m
    };
    let mut resasc = 0.0;
    for (w, v) in &samples {
        let mut d = v.clone();
        d.axpy(-1.0, &mean);
        resasc += w * d.norm();
    }
    resasc *= h.abs();
    let mut diff = kron.clone();
    diff.axpy(-1.0, &gauss);
    let raw = diff.norm() * h.abs();
    let mut err = raw;
    if resasc > 0.0 && raw > 0.0 {
        err = resasc * (200.0 * raw / resasc).powf(1.5).min(1.0);
    }
    let resabs: f64 = samples.iter().map(|(w, v)| w * v.norm()).sum::<f64>() * h.abs();
    let round = 50.0 * f64::EPSILON * resabs;
    let at_floor = round >= err;
    if at_floor {
        err = round;
    }
    let mut value = kron.zero_like();
    value.axpy(h, &kron);
    if !value.norm().is_finite() {
        return Err(Error::Degenerate(format!(
            "integrand produced a non-finite value on [{a:e}, {b:e}]"
        )));
    }
    Ok(Panel {
        a,
        b,
        value,
        error: err,
        at_floor,
    })
}

/// Integrates `f` over `[a, b]`, returning the result even if the error
/// target was not met (check `converged`).
pub fn integrate_lenient<V, F>(mut f: F, breaks: &[f64], opts: &QuadOptions) -> Result<QuadResult<V>>
where
    V: QuadValue,
    F: FnMut(f64) -> Result<V>,
{
    if breaks.len() < 2 {
        return Err(Error::InvalidArgument("quadrature needs at least two break points".into()));
    }
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0usize;
    for w in breaks.windows(2) {
        if !(w[0].is_finite() && w[1].is_finite()) {
            return Err(Error::InvalidArgument("quadrature limits must be finite".into()));
        }
        if w[0] == w[1] {
            continue;
        }
        heap.push(gk15(&mut f, w[0], w[1])?);
        evaluations += 15;
    }
    let Some(first) = heap.peek() else {
        let v = f(breaks[0])?;
        return Ok(QuadResult {
            value: v.zero_like(),
            error: 0.0,
            evaluations: 1,
            converged: true,
        });
    };
    let zero = first.value.zero_like();

    // panels whose error is pure round-off are retired from refinement
    let mut retired: Vec<Panel<V>> = Vec::new();
    let total = |heap: &BinaryHeap<Panel<V>>, retired: &[Panel<V>]| -> (V, f64, f64) {
        let mut v = zero.clone();
        let mut e = 0.0;
        let mut floor = 0.0;
        for p in heap.iter().chain(retired.iter()) {
            v.axpy(1.0, &p.value);
            e += p.error;
            if p.at_floor {
                floor += p.error;
            }
        }
        (v, e, floor)
    };

    let (mut value, mut error, _) = total(&heap, &retired);
    let mut steps = 0usize;
    loop {
        if error <= opts.target(value.norm()) || evaluations + 30 > opts.max_evals || heap.is_empty() {
            // the running sums drift, so confirm against a fresh total
            let (v, e, _) = total(&heap, &retired);
            (value, error) = (v, e);
            if error <= opts.target(value.norm()) || evaluations + 30 > opts.max_evals || heap.is_empty() {
                break;
            }
        }
        let Some(worst) = heap.pop() else { break };
        if worst.at_floor {
            retired.push(worst);
            continue;
        }
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // interval exhausted at machine resolution
            retired.push(worst);
            continue;
        }
        let left = gk15(&mut f, worst.a, mid)?;
        let right = gk15(&mut f, mid, worst.b)?;
        evaluations += 30;
        value.axpy(-1.0, &worst.value);
        value.axpy(1.0, &left.value);
        value.axpy(1.0, &right.value);
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        steps += 1;
        if steps.is_multiple_of(64) {
            // resynchronise to avoid drift in the running sums
            (value, error, _) = total(&heap, &retired);
        }
    }
    let (value, error, floor) = total(&heap, &retired);
    let converged = error <= opts.target(value.norm()).max(2.0 * floor);
    Ok(QuadResult {
        value,
        error,
        evaluations,
        converged,
    })
}

/// Integrates `f` over the panels defined by `breaks`, failing if the
/// tolerance is not reached within the evaluation budget.
pub fn integrate<V, F>(f: F, breaks: &[f64], opts: &QuadOptions) -> Result<QuadResult<V>>
where
    V: QuadValue,
    F: FnMut(f64) -> Result<V>,
{
    let r = integrate_lenient(f, breaks, opts)?;
    let tol = opts.target(r.value.norm());
    r.checked(tol)
}
