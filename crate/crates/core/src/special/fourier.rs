//! Inverse Fourier transform `(1/sqrt(2 pi)) int f(m) e^{izm} dm` of symbols
//! with exponential decay, evaluated in a horizontal strip.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};

/// `|f(m)| <= C (1+|m|)^(-mu) exp(-beta |m|)`.
///
/// `mu` may be negative for symbols carrying polynomial multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    #[serde(rename = "C")]
    pub c: f64,
    pub mu: f64,
    pub beta: f64,
}

impl DecayProfile {
    pub fn new(c: f64, mu: f64, beta: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) || !(beta > 0.0 && beta.is_finite()) || !mu.is_finite() {
            return Err(Error::UncertifiedProfile(format!(
                "profile needs C > 0, beta > 0, finite mu (C={c}, mu={mu}, beta={beta})"
            )));
        }
        Ok(DecayProfile { c, mu, beta })
    }

    pub fn bound(&self, m: f64) -> f64 {
        self.c * (1.0 + m.abs()).powf(-self.mu) * (-self.beta * m.abs()).exp()
    }

    /// Bound on `int_M^inf bound(m) e^{|y| m} dm`.
    pub fn tail(&self, big_m: f64, y: f64) -> f64 {
        let b = self.beta - y.abs();
        let base = self.c * (1.0 + big_m).powf(-self.mu) * (-b * big_m).exp();
        if self.mu >= 0.0 {
            base / b
        } else {
            // (1+m)^|mu| e^{-bm} decays at rate at least b - |mu|/(1+M)
            let rate = b + self.mu / (1.0 + big_m);
            if rate <= 0.0 {
                f64::INFINITY
            } else {
                base / rate
            }
        }
    }

    /// Smallest cut-off (to a factor 1.01) with `2 tail / sqrt(2 pi) <= tol`.
    pub fn cutoff(&self, y: f64, tol: f64) -> f64 {
        let ok = |m: f64| 2.0 * self.tail(m, y) / (2.0 * PI).sqrt() <= tol;
        let mut hi = 1.0;
        while !ok(hi) {
            hi *= 2.0;
            if hi > 1e8 {
                return hi;
            }
        }
        let mut lo = 0.0;
        while hi - lo > 0.01 * hi {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// A Fourier-side function with a declared decay profile.
pub trait Symbol: Send + Sync {
    fn eval(&self, m: f64) -> Complex64;
    fn profile(&self) -> DecayProfile;
    /// Largest `|m|` where the symbol can be nonzero, if finite.
    fn support(&self) -> Option<f64> {
        None
    }
}

impl<S: Symbol + ?Sized> Symbol for Arc<S> {
    fn eval(&self, m: f64) -> Complex64 {
        (**self).eval(m)
    }
    fn profile(&self) -> DecayProfile {
        (**self).profile()
    }
    fn support(&self) -> Option<f64> {
        (**self).support()
    }
}

impl<S: Symbol + ?Sized> Symbol for Box<S> {
    fn eval(&self, m: f64) -> Complex64 {
        (**self).eval(m)
    }
    fn profile(&self) -> DecayProfile {
        (**self).profile()
    }
    fn support(&self) -> Option<f64> {
        (**self).support()
    }
}

/// Linear interpolation of samples `(m, f(m))`, zero outside the range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSymbol {
    m: Vec<f64>,
    values: Vec<Complex64>,
    profile: DecayProfile,
}

impl SampledSymbol {
    /// Checks the declared profile on every sample.
    pub fn new(samples: Vec<(f64, Complex64)>, profile: DecayProfile) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidArgument("a sampled symbol needs at least two samples".into()));
        }
        let mut samples = samples;
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in samples.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidArgument(format!("duplicate sample at m = {}", w[0].0)));
            }
        }
        for (i, (m, v)) in samples.iter().enumerate() {
            if !m.is_finite() || !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite sample at row {i}")));
            }
            if v.norm() > profile.bound(*m) * (1.0 + 1e-12) {
                return Err(Error::UncertifiedProfile(format!(
                    "sample m = {m}: |f| = {:e} exceeds bound {:e}",
                    v.norm(),
                    profile.bound(*m)
                )));
            }
        }
        let (m, values) = samples.into_iter().unzip();
        Ok(SampledSymbol { m, values, profile })
    }

    /// Reads `m, re, im` rows, with or without a header line.
    pub fn from_csv<R: std::io::Read>(reader: R, profile: DecayProfile) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() < 3 {
                return Err(Error::InvalidArgument(format!("csv row {i}: expected m, re, im")));
            }
            let parse = |s: &str| s.parse::<f64>();
            match (parse(&rec[0]), parse(&rec[1]), parse(&rec[2])) {
                (Ok(m), Ok(re), Ok(im)) => rows.push((m, Complex64::new(re, im))),
                _ if i == 0 => continue, // header
                _ => return Err(Error::InvalidArgument(format!("csv row {i}: not numeric"))),
            }
        }
        Self::new(rows, profile)
    }

    pub fn from_csv_path(path: &Path, profile: DecayProfile) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?, profile)
    }
}

impl Symbol for SampledSymbol {
    fn eval(&self, m: f64) -> Complex64 {
        let n = self.m.len();
        if m < self.m[0] || m > self.m[n - 1] {
            return Complex64::new(0.0, 0.0);
        }
        let i = self.m.partition_point(|&x| x <= m).clamp(1, n - 1);
        let (m0, m1) = (self.m[i - 1], self.m[i]);
        let s = (m - m0) / (m1 - m0);
        self.values[i - 1] * (1.0 - s) + self.values[i] * s
    }

    fn profile(&self) -> DecayProfile {
        self.profile
    }

    fn support(&self) -> Option<f64> {
        Some(self.m[0].abs().max(self.m[self.m.len() - 1].abs()))
    }
}

/// Closed-form symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BuiltinSymbol {
    /// `amp exp(-beta|m|) (1+|m|)^(-mu)`
    ExpDecay { amp: Complex64, beta: f64, mu: f64 },
    /// `amp m exp(-beta|m|) (1+|m|)^(-mu-1)`, odd in `m`
    OddExpDecay { amp: Complex64, beta: f64, mu: f64 },
    /// `amp exp(-s m^2)`
    Gaussian { amp: Complex64, s: f64 },
    Scaled { factor: Complex64, inner: Box<BuiltinSymbol> },
    Sum { terms: Vec<BuiltinSymbol> },
}

impl BuiltinSymbol {
    pub fn exp_decay(beta: f64, mu: f64) -> Self {
        BuiltinSymbol::ExpDecay {
            amp: Complex64::new(1.0, 0.0),
            beta,
            mu,
        }
    }

    pub fn gaussian(s: f64) -> Self {
        BuiltinSymbol::Gaussian {
            amp: Complex64::new(1.0, 0.0),
            s,
        }
    }

    /// Looks up a named built-in (`expdecay`, `odd`, `gaussian`).
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "expdecay" | "exp_decay" => Ok(Self::exp_decay(1.0, 2.0)),
            "odd" | "odd_exp_decay" => Ok(BuiltinSymbol::OddExpDecay {
                amp: Complex64::new(1.0, 0.0),
                beta: 1.0,
                mu: 2.0,
            }),
            "gaussian" => Ok(Self::gaussian(1.0)),
            other => Err(Error::InvalidArgument(format!("unknown symbol `{other}`"))),
        }
    }
}

/// `max_{m >= 0} (1+m)^mu exp(beta m - s m^2)`, a log-concave maximisation.
fn gaussian_profile_constant(s: f64, mu: f64, beta: f64) -> f64 {
    let g = |m: f64| mu * (1.0 + m).ln() + beta * m - s * m * m;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while g(hi) > g(hi * 0.5) || hi < (beta / s).max(1.0) {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if g(m1) < g(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    g(0.5 * (lo + hi)).max(g(0.0)).exp()
}

impl Symbol for BuiltinSymbol {
    fn eval(&self, m: f64) -> Complex64 {
        match self {
            BuiltinSymbol::ExpDecay { amp, beta, mu } => {
                amp * ((-beta * m.abs()).exp() * (1.0 + m.abs()).powf(-mu))
            }
            BuiltinSymbol::OddExpDecay { amp, beta, mu } => {
                amp * (m * (-beta * m.abs()).exp() * (1.0 + m.abs()).powf(-mu - 1.0))
            }
            BuiltinSymbol::Gaussian { amp, s } => amp * (-s * m * m).exp(),
            BuiltinSymbol::Scaled { factor, inner } => factor * inner.eval(m),
            BuiltinSymbol::Sum { terms } => terms.iter().map(|t| t.eval(m)).sum(),
        }
    }

    fn profile(&self) -> DecayProfile {
        match self {
            BuiltinSymbol::ExpDecay { amp, beta, mu } | BuiltinSymbol::OddExpDecay { amp, beta, mu } => {
                DecayProfile {
                    c: amp.norm().max(f64::MIN_POSITIVE),
                    mu: *mu,
                    beta: *beta,
                }
            }
            BuiltinSymbol::Gaussian { amp, s } => {
                let (mu, beta) = (2.0, 1.0);
                DecayProfile {
                    c: amp.norm().max(f64::MIN_POSITIVE) * gaussian_profile_constant(*s, mu, beta) * (1.0 + 1e-12),
                    mu,
                    beta,
                }
            }
            BuiltinSymbol::Scaled { factor, inner } => {
                let p = inner.profile();
                DecayProfile {
                    c: p.c * factor.norm().max(f64::MIN_POSITIVE),
                    ..p
                }
            }
            BuiltinSymbol::Sum { terms } => combine_profiles(terms.iter().map(|t| t.profile())),
        }
    }
}

/// Profile dominating a sum: weakest decay, summed constants.
pub fn combine_profiles<I: IntoIterator<Item = DecayProfile>>(profiles: I) -> DecayProfile {
    let mut out: Option<DecayProfile> = None;
    for p in profiles {
        out = Some(match out {
            None => p,
            Some(o) => {
                // (1+m)^(-mu) e^{-beta m} is monotone in both parameters
                let mu = o.mu.min(p.mu);
                let beta = o.beta.min(p.beta);
                DecayProfile { c: o.c + p.c, mu, beta }
            }
        });
    }
    out.unwrap_or(DecayProfile {
        c: f64::MIN_POSITIVE,
        mu: 2.0,
        beta: 1.0,
    })
}

impl fmt::Display for DecayProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C={:e}, mu={}, beta={}", self.c, self.mu, self.beta)
    }
}

/// Evaluation strip `|Im z| < beta'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizontalStrip {
    pub beta_prime: f64,
}

impl HorizontalStrip {
    pub fn new(beta_prime: f64, beta: f64) -> Result<Self> {
        if !(beta_prime > 0.0 && beta_prime < beta) {
            return Err(Error::InvalidArgument(format!(
                "strip width beta' = {beta_prime} must lie in (0, beta = {beta})"
            )));
        }
        Ok(HorizontalStrip { beta_prime })
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.im.abs() < self.beta_prime
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FourierValue {
    pub value: Complex64,
    pub error: f64,
    pub cutoff: f64,
    pub evaluations: usize,
}

/// `(1/sqrt(2 pi)) int f(m) e^{izm} dm`, truncated where the profile tail
/// drops below `tol / 2` and integrated adaptively on `[-M, 0] u [0, M]`.
pub fn inverse_fourier<S: Symbol + ?Sized>(
    f: &S,
    z: Complex64,
    strip: &HorizontalStrip,
    tol: f64,
) -> Result<FourierValue> {
    let profile = f.profile();
    if z.im.abs() >= profile.beta {
        return Err(Error::OutsideStrip {
            imag: z.im.abs(),
            beta: profile.beta,
        });
    }
    if !strip.contains(z) && z.im.abs() != 0.0 {
        return Err(Error::OutsideStrip {
            imag: z.im.abs(),
            beta: strip.beta_prime,
        });
    }
    let mut cutoff = profile.cutoff(z.im, 0.5 * tol);
    if let Some(s) = f.support() {
        cutoff = cutoff.min(s);
    }
    if !cutoff.is_finite() || cutoff > 1e6 {
        return Err(Error::UncertifiedProfile(format!(
            "profile {profile} gives no usable truncation at Im z = {}",
            z.im
        )));
    }
    // spot check of the declared profile on the integration range
    for i in 0..=32 {
        let m = cutoff * (i as f64 / 16.0 - 1.0);
        let v = f.eval(m).norm();
        if v > profile.bound(m) * (1.0 + 1e-9) + 1e-300 {
            return Err(Error::UncertifiedProfile(format!(
                "|f({m})| = {v:e} exceeds the declared bound {:e}",
                profile.bound(m)
            )));
        }
    }
    let opts = QuadOptions {
        abs_tol: 0.25 * tol * (2.0 * PI).sqrt(),
        rel_tol: 1e-13,
        max_evals: 400_000,
    };
    let r = integrate(
        |m: f64| Ok(f.eval(m) * (Complex64::new(0.0, m) * z).exp()),
        &[-cutoff, 0.0, cutoff],
        &opts,
    )?;
    let norm = 1.0 / (2.0 * PI).sqrt();
    Ok(FourierValue {
        value: r.value * norm,
        error: r.error * norm + 0.5 * tol,
        cutoff,
        evaluations: r.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip() -> HorizontalStrip {
        HorizontalStrip::new(0.5, 1.0).unwrap()
    }

    #[test]
    fn gaussian_closed_form() {
        let g = BuiltinSymbol::gaussian(1.0);
        for z in [Complex64::new(0.0, 0.0), Complex64::new(1.3, 0.2), Complex64::new(-0.7, -0.45)] {
            let v = inverse_fourier(&g, z, &strip(), 1e-12).unwrap();
            let exact = (-z * z / 4.0).exp() * (2.0f64.sqrt() / 2.0);
            assert!((v.value - exact).norm() < 1e-11, "{z}: {} vs {exact}", v.value);
        }
    }

    #[test]
    fn exp_decay_self_convergence() {
        let f = BuiltinSymbol::exp_decay(1.0, 2.0);
        let z = Complex64::new(0.0, 0.0);
        let a = inverse_fourier(&f, z, &strip(), 1e-9).unwrap();
        let b = inverse_fourier(&f, z, &strip(), 1e-12).unwrap();
        assert!(a.value.re > 0.0 && a.value.im.abs() < 1e-12);
        assert!((a.value - b.value).norm() < 1e-8);
    }

    #[test]
    fn odd_symbol_gives_imaginary_values() {
        let f = BuiltinSymbol::by_name("odd").unwrap();
        let v = inverse_fourier(&f, Complex64::new(0.8, 0.0), &strip(), 1e-11).unwrap();
        assert!(v.value.re.abs() < 1e-11 && v.value.im.abs() > 1e-3);
    }

    #[test]
    fn strip_violations() {
        let f = BuiltinSymbol::exp_decay(1.0, 2.0);
        assert!(matches!(
            inverse_fourier(&f, Complex64::new(0.0, 1.0), &strip(), 1e-10),
            Err(Error::OutsideStrip { .. })
        ));
        assert!(matches!(
            inverse_fourier(&f, Complex64::new(0.0, 0.7), &strip(), 1e-10),
            Err(Error::OutsideStrip { .. })
        ));
    }

    #[test]
    fn sampled_symbol_from_csv() {
        let mut text = String::from("m,re,im\n");
        for i in -400..=400 {
            let m = i as f64 * 0.05;
            text.push_str(&format!("{m},{},0\n", (-m * m).exp()));
        }
        let profile = BuiltinSymbol::gaussian(1.0).profile();
        let s = SampledSymbol::from_csv(text.as_bytes(), profile).unwrap();
        let v = inverse_fourier(&s, Complex64::new(0.3, 0.0), &strip(), 1e-10).unwrap();
        let exact = (-0.09f64 / 4.0).exp() * 2.0f64.sqrt() / 2.0;
        // linear interpolation error h^2/8 |f''| integrated over the line
        assert!((v.value.re - exact).abs() < 2e-4);

        let bad = DecayProfile::new(0.5, 2.0, 1.0).unwrap();
        assert!(matches!(
            SampledSymbol::from_csv(text.as_bytes(), bad),
            Err(Error::UncertifiedProfile(_))
        ));
    }

    #[test]
    fn planted_profile_violation_is_caught() {
        struct Liar;
        impl Symbol for Liar {
            fn eval(&self, m: f64) -> Complex64 {
                Complex64::new((-0.1 * m.abs()).exp(), 0.0)
            }
            fn profile(&self) -> DecayProfile {
                DecayProfile { c: 1.0, mu: 2.0, beta: 1.0 }
            }
        }
        assert!(matches!(
            inverse_fourier(&Liar, Complex64::new(0.0, 0.0), &strip(), 1e-8),
            Err(Error::UncertifiedProfile(_))
        ));
    }
}
