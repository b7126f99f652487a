//! Remainder tables and certification-oriented fits for q-Gevrey expansions
//! of order `1/k` and 0-Gevrey expansions relative to a radius sequence.
//!
//! A fit first regresses the log remainders, then inflates `C` until the
//! bound is a true envelope of every row. Both constants are reported.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{seq_bound_from_log_bound, GevreyScale, LogBoundPair};

/// Remainders at or below this value are clamped before taking logs.
pub const REMAINDER_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemainderRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub eps: Complex64,
    pub t: Option<Complex64>,
    pub norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RemainderTable {
    pub rows: Vec<RemainderRow>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    #[serde(rename = "N")]
    n: usize,
    eps_re: f64,
    eps_im: f64,
    t_re: Option<f64>,
    t_im: Option<f64>,
    norm: f64,
}

impl RemainderTable {
    pub fn new(rows: Vec<RemainderRow>) -> Self {
        RemainderTable { rows }
    }

    pub fn n_max(&self) -> Option<usize> {
        self.rows.iter().map(|r| r.n).max()
    }

    /// Rows whose `t` lies in `D(0, r_N)` for `scale`.
    pub fn restrict(&self, scale: &GevreyScale) -> RemainderTable {
        RemainderTable {
            rows: self
                .rows
                .iter()
                .filter(|r| r.t.is_some_and(|t| scale.admits(r.n, t.norm())))
                .copied()
                .collect(),
        }
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut rows = Vec::new();
        for (i, rec) in rdr.deserialize::<CsvRow>().enumerate() {
            let r = rec?;
            let t = match (r.t_re, r.t_im) {
                (Some(a), Some(b)) => Some(Complex64::new(a, b)),
                (None, None) => None,
                _ => {
                    return Err(Error::RowRejected {
                        row: i,
                        reason: "t needs both a real and an imaginary part".into(),
                    })
                }
            };
            if !(r.norm >= 0.0) {
                return Err(Error::RowRejected {
                    row: i,
                    reason: format!("remainder norm {} is not a nonnegative number", r.norm),
                });
            }
            rows.push(RemainderRow {
                n: r.n,
                eps: Complex64::new(r.eps_re, r.eps_im),
                t,
                norm: r.norm,
            });
        }
        Ok(RemainderTable { rows })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.rows {
            w.serialize(CsvRow {
                n: r.n,
                eps_re: r.eps.re,
                eps_im: r.eps.im,
                t_re: r.t.map(|t| t.re),
                t_im: r.t.map(|t| t.im),
                norm: r.norm,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Where a remainder is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    #[serde(rename = "N")]
    pub n: usize,
    pub eps: Complex64,
    pub t: Option<Complex64>,
}

/// A vector-valued family; entries are samples on a fixed z-grid and the
/// norm is their maximum modulus.
pub type Family<'a> = dyn Fn(Complex64, Option<Complex64>) -> Result<Vec<Complex64>> + Sync + 'a;
pub type Coefficients<'a> = dyn Fn(usize, Option<Complex64>) -> Result<Vec<Complex64>> + Sync + 'a;

/// `||f(eps, t) - sum_{p<=N} f_p(t) eps^p||` for each probe. With a scale,
/// every probe must satisfy `t in D(0, r_N)`.
pub fn remainders(
    f: &Family<'_>,
    coeffs: &Coefficients<'_>,
    probes: &[Probe],
    scale: Option<&GevreyScale>,
) -> Result<RemainderTable> {
    use rayon::prelude::*;
    if let Some(s) = scale {
        for (i, p) in probes.iter().enumerate() {
            match p.t {
                Some(t) if s.admits(p.n, t.norm()) => {}
                Some(t) => {
                    return Err(Error::RowRejected {
                        row: i,
                        reason: format!("|t| = {:e} is not below r_{} = {:e}", t.norm(), p.n, s.radius(p.n)),
                    })
                }
                None => {
                    return Err(Error::RowRejected {
                        row: i,
                        reason: "a relative expansion needs t".into(),
                    })
                }
            }
        }
    }
    let rows = probes
        .par_iter()
        .map(|p| {
            let mut acc = f(p.eps, p.t)?;
            let mut pow = Complex64::new(1.0, 0.0);
            for k in 0..=p.n {
                let c = coeffs(k, p.t)?;
                if c.len() != acc.len() {
                    return Err(Error::InvalidArgument(format!(
                        "coefficient {k} has {} samples, the family has {}",
                        c.len(),
                        acc.len()
                    )));
                }
                for (a, c) in acc.iter_mut().zip(&c) {
                    *a -= c * pow;
                }
                pow *= p.eps;
            }
            Ok(RemainderRow {
                n: p.n,
                eps: p.eps,
                t: p.t,
                norm: acc.iter().map(|v| v.norm()).fold(0.0, f64::max),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RemainderTable { rows })
}

/// 33 points on the segment from `-1 - 0.9 i b'` to `1 + 0.9 i b'` inside
/// the strip `|Im z| < b'`; the sup over them stands in for the strip norm.
pub fn default_z_grid(beta_prime: f64) -> Vec<Complex64> {
    (0..33)
        .map(|i| {
            let s = -1.0 + 2.0 * i as f64 / 32.0;
            Complex64::new(s, 0.9 * beta_prime * s)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitKind {
    /// `C A^{N+1} q^{N(N+1)/(2k)} |eps|^{N+1}`; `k = inf` drops the q-factor.
    QGevrey { k: f64, q: f64 },
    /// `C A^{N+1} |eps|^{N+1}` on `t in D(0, r_N)`.
    ZeroGevreyRelative { scale: GevreyScale },
}

impl FitKind {
    /// `log` of the bound without `C A^{N+1}`.
    fn log_shape(&self, row: &RemainderRow) -> f64 {
        let n = row.n as f64;
        let base = (n + 1.0) * row.eps.norm().ln();
        match *self {
            FitKind::QGevrey { k, q } if k.is_finite() => base + n * (n + 1.0) / (2.0 * k) * q.ln(),
            _ => base,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevreyFit {
    pub kind: FitKind,
    /// Certified constants.
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "A")]
    pub a: f64,
    /// Least-squares constants before inflation.
    #[serde(rename = "C_fit")]
    pub c_fit: f64,
    /// `max_i log(remainder_i / bound_i)` with the certified constants.
    pub max_violation: f64,
    pub residual_rms: f64,
    pub rows: usize,
}

impl GevreyFit {
    pub fn certified(&self) -> bool {
        self.max_violation <= 0.0
    }

    /// Certified bound at one table row.
    pub fn bound(&self, row: &RemainderRow) -> f64 {
        (self.c.ln() + (row.n as f64 + 1.0) * self.a.ln() + self.kind.log_shape(row)).exp()
    }

    /// `max_i log(remainder_i / bound_i)` of these constants on `table`.
    pub fn violation(&self, table: &RemainderTable) -> f64 {
        violation(&self.kind, self.c.ln(), self.a.ln(), table)
    }
}

fn violation(kind: &FitKind, log_c: f64, log_a: f64, table: &RemainderTable) -> f64 {
    table
        .rows
        .iter()
        .map(|r| r.norm.max(REMAINDER_FLOOR).ln() - (log_c + (r.n as f64 + 1.0) * log_a + kind.log_shape(r)))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn fit(kind: FitKind, table: &RemainderTable) -> Result<GevreyFit> {
    if table.rows.is_empty() {
        return Err(Error::Degenerate("empty remainder table".into()));
    }
    let n_max = table.n_max().unwrap_or(0);
    if n_max < 5 {
        return Err(Error::Degenerate(format!("N_max = {n_max} but at least 5 is needed")));
    }
    for (i, r) in table.rows.iter().enumerate() {
        if !(r.eps.norm() > 0.0) {
            return Err(Error::RowRejected {
                row: i,
                reason: "eps must be nonzero".into(),
            });
        }
    }
    // y = log C + (N+1) log A on rows above the floor
    let pts: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter(|r| r.norm > REMAINDER_FLOOR)
        .map(|r| (r.n as f64 + 1.0, r.norm.ln() - kind.log_shape(r)))
        .collect();
    let distinct = {
        let mut ns: Vec<usize> = table.rows.iter().filter(|r| r.norm > REMAINDER_FLOOR).map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        ns.len()
    };
    if distinct < 2 {
        return Err(Error::Degenerate("fewer than two distinct N above the remainder floor".into()));
    }
    let len = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / len;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / len;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let log_a = sxy / sxx;
    let log_c_fit = my - log_a * mx;
    let residual_rms = (pts.iter().map(|p| (p.1 - log_c_fit - log_a * p.0).powi(2)).sum::<f64>() / len).sqrt();
    let excess = violation(&kind, log_c_fit, log_a, table).max(0.0);
    // a hair of extra room absorbs rounding in exp/ln
    let log_c = log_c_fit + excess + 1e-12 * (1.0 + log_c_fit.abs());
    let max_violation = violation(&kind, log_c, log_a, table);
    Ok(GevreyFit {
        kind,
        c: log_c.exp(),
        a: log_a.exp(),
        c_fit: log_c_fit.exp(),
        max_violation,
        residual_rms,
        rows: table.rows.len(),
    })
}

/// Fit of the q-Gevrey bound of order `1/k`. Passing `k = inf` fits a plain
/// geometric bound.
pub fn fit_q_gevrey(table: &RemainderTable, k: f64, q: f64) -> Result<GevreyFit> {
    if !(k > 0.0) || !(q > 1.0) {
        return Err(Error::InvalidArgument(format!("need k > 0 and q > 1, got k={k}, q={q}")));
    }
    fit(FitKind::QGevrey { k, q }, table)
}

/// Fit of the 0-Gevrey bound relative to `scale`; rows outside their disc
/// are rejected by index.
pub fn fit_zero_gevrey_relative(table: &RemainderTable, scale: &GevreyScale) -> Result<GevreyFit> {
    for (i, r) in table.rows.iter().enumerate() {
        match r.t {
            Some(t) if scale.admits(r.n, t.norm()) => {}
            Some(t) => {
                return Err(Error::RowRejected {
                    row: i,
                    reason: format!("|t| = {:e} is not below r_{} = {:e}", t.norm(), r.n, scale.radius(r.n)),
                })
            }
            None => {
                return Err(Error::RowRejected {
                    row: i,
                    reason: "row has no t".into(),
                })
            }
        }
    }
    fit(FitKind::ZeroGevreyRelative { scale: *scale }, table)
}

/// Outcome of restricting a level-two certified table to the level-one discs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorollaryReport {
    pub level2: GevreyFit,
    pub restricted_rows: usize,
    /// The level-two constants evaluated on the restricted rows.
    pub inherited_violation: f64,
    /// A fresh level-one fit when the restricted table supports one.
    pub level1: Option<GevreyFit>,
    pub holds: bool,
}

/// Certifies `table` at level two, restricts it to `D(0, r_N^1)`, and checks
/// that the result is certified at level one. Requires `scale1.k < scale2.k`
/// so that the level-one discs are the smaller ones.
pub fn corollary_check(table: &RemainderTable, scale1: &GevreyScale, scale2: &GevreyScale) -> Result<CorollaryReport> {
    if !(scale1.k < scale2.k) || scale1.q != scale2.q {
        return Err(Error::InvalidArgument("need a common q and k1 < k2".into()));
    }
    let level2 = fit_zero_gevrey_relative(table, scale2)?;
    let restricted = table.restrict(scale1);
    let inherited = FitKind::ZeroGevreyRelative { scale: *scale1 };
    let inherited_violation = violation(&inherited, level2.c.ln(), level2.a.ln(), &restricted);
    let level1 = fit_zero_gevrey_relative(&restricted, scale1).ok();
    let holds = !level2.certified()
        || (inherited_violation <= 0.0 && level1.as_ref().is_none_or(|f| f.certified()));
    Ok(CorollaryReport {
        level2,
        restricted_rows: restricted.rows.len(),
        inherited_violation,
        level1,
        holds,
    })
}

/// One row of a sequential bound derived from a functional bound
/// `K exp(-(k/2) log^2|eps t| / log q) |eps t|^gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequentialRow {
    #[serde(rename = "N")]
    pub n: u32,
    /// `K q^{gamma^2/(2k)}`.
    pub constant: f64,
    /// `q^{-gamma/k}`, raised to the power `N`.
    pub base: f64,
    /// `q^{N^2/(2k)}`.
    pub factor: f64,
    /// `constant * base^N * factor`.
    pub bound: f64,
}

pub fn functional_to_sequential(k: f64, gamma: f64, big_k: f64, q: f64, n_max: u32) -> Result<Vec<SequentialRow>> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("k = {k} must be positive")));
    }
    if !(q > 1.0) || !(big_k >= 0.0) {
        return Err(Error::InvalidArgument("need q > 1 and K >= 0".into()));
    }
    let lq = q.ln();
    let constant = big_k * (lq * gamma * gamma / (2.0 * k)).exp();
    let base = (-lq * gamma / k).exp();
    Ok((0..=n_max)
        .map(|n| {
            let factor = (lq * (n as f64).powi(2) / (2.0 * k)).exp();
            SequentialRow {
                n,
                constant,
                base,
                factor,
                bound: constant * base.powi(n as i32) * factor,
            }
        })
        .collect())
}

/// Both sides of `K |x|^gamma exp(..) <= row.bound |x|^N` at `|x| = abs_et`.
pub fn sequential_domination(k: f64, gamma: f64, big_k: f64, q: f64, n: u32, abs_et: f64) -> Result<LogBoundPair> {
    let mut p = seq_bound_from_log_bound(q, k, gamma, n, abs_et)?;
    let lk = big_k.ln();
    p.log_lhs += lk;
    p.log_rhs += lk;
    p.lhs = p.log_lhs.exp();
    p.rhs = p.log_rhs.exp();
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::Level;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn geometric_series_remainders() {
        let f = |e: Complex64, _t: Option<Complex64>| Ok(vec![1.0 / (1.0 - e)]);
        let coeffs = |_p: usize, _t: Option<Complex64>| Ok(vec![c(1.0)]);
        let probes: Vec<Probe> = (0..6).map(|n| Probe { n, eps: c(0.1), t: None }).collect();
        let tab = remainders(&f, &coeffs, &probes, None).unwrap();
        for r in &tab.rows {
            let exact = 0.1f64.powi(r.n as i32 + 1) / 0.9;
            assert!((r.norm - exact).abs() <= 1e-14 * exact.max(1e-300) + 1e-16, "{r:?}");
        }
    }

    #[test]
    fn partial_sum_has_zero_remainder() {
        let f = |e: Complex64, _t: Option<Complex64>| Ok(vec![c(1.0) + e * 2.0 + e * e * 3.0]);
        let cs = [1.0, 2.0, 3.0];
        let coeffs = |p: usize, _t: Option<Complex64>| Ok(vec![c(*cs.get(p).unwrap_or(&0.0))]);
        let probes: Vec<Probe> = (2..6).map(|n| Probe { n, eps: c(0.3), t: None }).collect();
        let tab = remainders(&f, &coeffs, &probes, None).unwrap();
        assert!(tab.rows.iter().all(|r| r.norm <= 1e-15));
    }

    #[test]
    fn single_n_is_degenerate() {
        let tab = RemainderTable::new(vec![
            RemainderRow {
                n: 5,
                eps: c(0.1),
                t: None,
                norm: 1e-3,
            };
            3
        ]);
        assert!(matches!(fit_q_gevrey(&tab, 1.0, 2.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn out_of_disc_row_is_named() {
        let s = GevreyScale::new(Level::Two, 2.0, 2.0);
        let mut rows: Vec<RemainderRow> = (0..=6)
            .map(|n| RemainderRow {
                n,
                eps: c(0.1),
                t: Some(c(0.5 * s.radius(n))),
                norm: 0.2f64.powi(n as i32 + 1),
            })
            .collect();
        rows[4].t = Some(c(2.0 * s.radius(4)));
        match fit_zero_gevrey_relative(&RemainderTable::new(rows), &s) {
            Err(Error::RowRejected { row, .. }) => assert_eq!(row, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sequential_rows_by_substitution() {
        let rows = functional_to_sequential(1.0, 0.0, 1.0, 2.0, 3).unwrap();
        for r in &rows {
            assert_eq!(r.constant, 1.0);
            assert_eq!(r.base, 1.0);
            assert!((r.factor - 2f64.powf((r.n * r.n) as f64 / 2.0)).abs() <= 1e-14 * r.factor);
        }
        let rows = functional_to_sequential(1.5, 1.5, 1.0, 2.0, 1).unwrap();
        assert!((rows[0].base - 0.5).abs() < 1e-15);
        assert!(functional_to_sequential(0.0, 0.0, 1.0, 2.0, 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let tab = RemainderTable::new(vec![
            RemainderRow {
                n: 0,
                eps: Complex64::new(0.1, 0.2),
                t: None,
                norm: 0.5,
            },
            RemainderRow {
                n: 1,
                eps: c(0.1),
                t: Some(Complex64::new(0.0, 0.3)),
                norm: 0.25,
            },
        ]);
        let mut buf = Vec::new();
        tab.write_csv(&mut buf).unwrap();
        assert_eq!(RemainderTable::read_csv(&buf[..]).unwrap(), tab);
    }
}
