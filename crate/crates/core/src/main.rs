#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Batch front-end. Every subcommand prints a JSON report on stdout and, with
//! `--out`, writes it (plus CSV tables) to the output directory.
//!
//! Exit codes: 0 when every certification in scope passes, 1 when one fails,
//! 2 on bad input or configuration. Errors go to stderr as JSON.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use qgevrey::asymptotics::{fit_q_gevrey, fit_zero_gevrey_relative, RemainderTable};
use qgevrey::cocycle::{multilevel_split, SyntheticCocycle};
use qgevrey::equation::{validate_hypotheses, EquationSpec};
use qgevrey::geometry::{default_m_grid, qspiral_membership, validate_good_covering};
use qgevrey::model::{
    certify_discrepancy, certify_kernel, certify_kernel_level1, consecutive_difference, level_remainders,
    overlap_grid, rate_dichotomy, verify_two_level_theorem, OverlapKind, Scenario, TheoremOptions,
};
use qgevrey::qcore::{GevreyScale, Level, IDENTITY_TOL, QUADRATURE_TOL};
use qgevrey::qlaplace::{domain_radius, monomial_constant, qlaplace, CertifiedFunction, Monomial, QLaplaceSpec};
use qgevrey::special::{inverse_fourier, theta_qdiff_residual, BuiltinSymbol, HorizontalStrip, ThetaSpec};
use qgevrey::{Error, Result};

#[derive(Parser)]
#[command(name = "qgevrey", version, about = "q-Gevrey asymptotics toolkit")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Directory for JSON reports, CSV tables and plot data.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized sample grids.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Tolerance override for the stage's main check.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Also write gnuplot-ready `.dat` columns (needs --out).
    #[arg(long, global = true)]
    emit_plot_data: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate theta and check its q-difference equation on a seeded annulus grid.
    Theta {
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        #[arg(long, default_value_t = 50)]
        points: usize,
    },
    /// Inverse Fourier transform of a built-in symbol on a seeded strip grid.
    Fourier {
        #[arg(long, default_value = "expdecay")]
        symbol: String,
        #[arg(long, default_value_t = 0.5)]
        beta_prime: f64,
        #[arg(long, default_value_t = 8)]
        points: usize,
    },
    /// q-Laplace images of monomials: T-power law and c_{n,k} ratios.
    Qlaplace {
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        #[arg(long, default_value_t = 0.0)]
        direction: f64,
        #[arg(long, default_value_t = 5)]
        n_max: u32,
    },
    /// Covering, smallness conditions and overlap types of a scenario.
    Geometry {
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Check the structural hypotheses of an equation spec.
    Hypotheses {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Consecutive differences, contour decomposition and rate fits.
    Diff {
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Restrict to one overlap.
        #[arg(long)]
        overlap: Option<usize>,
    },
    /// Multilevel splitting of the planted two-level cocycle.
    Split {
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value_t = 1.0)]
        k1: f64,
        #[arg(long, default_value_t = 2.0)]
        k2: f64,
    },
    /// Full two-level pipeline on a scenario.
    Demo {
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Fit a remainder table (CSV with columns N, eps_re, eps_im, t_re, t_im, norm).
    Fit {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, value_enum, default_value_t = FitChoice::ZeroGevrey)]
        kind: FitChoice,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value_t = 2.0)]
        k: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FitChoice {
    QGevrey,
    ZeroGevrey,
}

/// What a subcommand produced.
struct Outcome {
    name: &'static str,
    report: Value,
    certified: bool,
    csv: Vec<(String, String)>,
    plots: Vec<(String, String)>,
}

impl Outcome {
    fn new(name: &'static str, report: Value, certified: bool) -> Self {
        Outcome {
            name,
            report,
            certified,
            csv: Vec::new(),
            plots: Vec::new(),
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn table_csv(t: &RemainderTable) -> Result<String> {
    let mut buf = Vec::new();
    t.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

fn load_scenario(path: &Option<PathBuf>) -> Result<Scenario> {
    let sc: Scenario = match path {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
        None => return Scenario::default_scenario(),
    };
    sc.validate()?;
    Ok(sc)
}

fn theta(c: &Common, q: f64, k: f64, points: usize) -> Result<Outcome> {
    let spec = ThetaSpec::new(q, k, 1e-16)?;
    let tol = c.tol.unwrap_or(IDENTITY_TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let top = q.powf(1.0 / k);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let z = Complex64::from_polar(rng.gen_range(1.0..top), rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
        let value = spec.eval_scaled(z)?;
        let mut res = Vec::new();
        for m in -3..=3 {
            let r = theta_qdiff_residual(&spec, z, m)?;
            worst = worst.max(r.value);
            res.push(r.value);
        }
        rows.push(json!({
            "z": [z.re, z.im],
            "log_abs": value.log_abs(),
            "residuals": res,
        }));
    }
    let certified = worst <= tol;
    let mut out = Outcome::new(
        "theta",
        json!({"q": q, "k": k, "truncation": spec.truncation, "points": rows, "worst_residual": worst, "tolerance": tol, "certified": certified}),
        certified,
    );
    let mut dat = String::from("# r log|theta(r)| log-envelope\n");
    for i in 0..=200 {
        let r = (-6.0 + 12.0 * i as f64 / 200.0f64).exp();
        let z = Complex64::new(r, 0.0);
        dat.push_str(&format!("{r:e} {:e} {:e}\n", spec.eval_scaled(z)?.log_abs(), spec.log_envelope(z)));
    }
    out.plots.push(("theta_ray.dat".into(), dat));
    Ok(out)
}

fn fourier(c: &Common, symbol: &str, beta_prime: f64, points: usize) -> Result<Outcome> {
    let sym = BuiltinSymbol::by_name(symbol)?;
    let strip = HorizontalStrip::new(beta_prime, 1.0)?;
    let tol = c.tol.unwrap_or(1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let z = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-0.9..0.9) * beta_prime);
        let v = inverse_fourier(&sym, z, &strip, tol)?;
        worst = worst.max(v.error);
        rows.push(json!({"z": [z.re, z.im], "value": [v.value.re, v.value.im], "error": v.error, "cutoff": v.cutoff}));
    }
    let certified = worst <= 10.0 * tol;
    Ok(Outcome::new(
        "fourier",
        json!({"symbol": symbol, "beta_prime": beta_prime, "points": rows, "worst_error": worst, "tolerance": tol, "certified": certified}),
        certified,
    ))
}

fn qlaplace_cmd(c: &Common, q: f64, k: f64, d: f64, n_max: u32) -> Result<Outcome> {
    let tol = c.tol.unwrap_or(QUADRATURE_TOL);
    let mut rows = Vec::new();
    let mut certified = true;
    let mut prev: Option<Complex64> = None;
    for n in 0..=n_max {
        let cn = monomial_constant(q, k, d, n, 1e-13)?;
        let coarse = monomial_constant(q, k, d, n, 1e-10)?;
        let f = Monomial {
            coef: Complex64::new(1.0, 0.0),
            n,
            k,
        };
        let spec = QLaplaceSpec::new(q, k, d)?.with_tolerance(1e-13);
        let radius = domain_radius(&f.certificate(), q, k)?;
        let mut law: f64 = 0.0;
        for s in [0.02, 0.2, 0.8] {
            let t = Complex64::from_polar(s * radius, d + 0.1);
            let v = qlaplace(&spec, &f, t)?.value;
            law = law.max((v / (cn * t.powu(n)) - 1.0).norm());
        }
        let ratio = prev.map(|p| (cn / p / q.powf((n as f64 - 1.0) / k) - 1.0).norm());
        let refine = (cn / coarse - 1.0).norm();
        certified &= law <= tol && refine <= tol && ratio.is_none_or(|r| r <= tol);
        rows.push(json!({"n": n, "c": [cn.re, cn.im], "power_law": law, "refinement": refine, "ratio_law": ratio}));
        prev = Some(cn);
    }
    Ok(Outcome::new(
        "qlaplace",
        json!({"q": q, "k": k, "direction": d, "rows": rows, "tolerance": tol, "certified": certified}),
        certified,
    ))
}

fn geometry(path: &Option<PathBuf>) -> Result<Outcome> {
    let sc = load_scenario(path)?;
    let cov = validate_good_covering(&sc.covering, 720);
    let flags = sc.intersection_flags()?;
    let levels = sc.levels()?;
    let smallness: Vec<Value> = sc.smallness().iter().map(|(n, ok)| json!({"condition": n, "holds": ok})).collect();
    // every eps t with eps in E_p (inside the overlap radius) and t in T lands in R^b_p
    let mut domain_ok = true;
    for p in 0..sc.len() {
        let dom = sc.domain(p)?;
        for e in sc.covering.sectors[p].sample(4, 5, 0.95) {
            for t in sc.t_sector.sample(3, 3, 0.95) {
                domain_ok &= qspiral_membership(&dom, e * t)?;
            }
        }
    }
    let certified = cov.valid && smallness.iter().all(|s| s["holds"] == true) && domain_ok;
    Ok(Outcome::new(
        "geometry",
        json!({
            "covering": to_value(&cov)?,
            "smallness": smallness,
            "u_intersections": flags,
            "levels": to_value(&levels)?,
            "domains_contain_products": domain_ok,
            "certified": certified,
        }),
        certified,
    ))
}

fn hypotheses(path: &Path) -> Result<Outcome> {
    let spec: EquationSpec = serde_json::from_str(&fs::read_to_string(path)?)?;
    let rep = validate_hypotheses(&spec, &default_m_grid())?;
    Ok(Outcome::new(
        "hypotheses",
        json!({"passed": rep.passed, "clauses": rep.clauses(), "violations": to_value(&rep.violations)?, "certified": rep.passed}),
        rep.passed,
    ))
}

fn diff(path: &Option<PathBuf>, only: Option<usize>) -> Result<Outcome> {
    let sc = load_scenario(path)?;
    let overlaps: Vec<usize> = match only {
        Some(p) if p < sc.len() => vec![p],
        Some(p) => return Err(Error::InvalidArgument(format!("no overlap {p}"))),
        None => (0..sc.len()).collect(),
    };
    let rates = rate_dichotomy(&sc)?;
    let mut tables = Vec::new();
    let mut out_csv = Vec::new();
    let mut plots = Vec::new();
    let mut certified = true;
    for &p in &overlaps {
        let tb = consecutive_difference(&sc, p, &overlap_grid(&sc, p))?;
        let rate = &rates[p];
        certified &= tb.consistent() && rate.within;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["j", "abs_et", "norm"])?;
        let mut dat = String::from("# abs_et norm\n");
        for r in &rate.rows {
            w.write_record([r.j.to_string(), format!("{:e}", r.abs_et), format!("{:e}", r.norm)])?;
            dat.push_str(&format!("{:e} {:e}\n", r.abs_et, r.norm));
        }
        out_csv.push((format!("cascade_overlap{p}.csv"), String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("csv is utf-8")));
        plots.push((format!("cascade_overlap{p}.dat"), dat));
        tables.push(json!({
            "overlap": p,
            "kind": match tb.kind { OverlapKind::Intersecting => "intersecting", OverlapKind::Disjoint => "disjoint" },
            "worst_ratio": tb.worst_ratio(),
            "consistent": tb.consistent(),
            "rows": tb.rows.iter().map(|r| json!({
                "t": [r.t.re, r.t.im], "z": [r.z.re, r.z.im], "eps": [r.eps.re, r.eps.im],
                "abs_et": r.abs_et, "direct": r.direct.norm(), "decomposed": r.decomposed.norm(),
                "tolerance": r.tolerance,
                "pieces": r.pieces.iter().map(|(n, v)| json!({"name": n, "norm": v})).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "rate": to_value(rate)?,
        }));
    }
    let mut o = Outcome::new("diff", json!({"overlaps": tables, "certified": certified}), certified);
    o.csv = out_csv;
    o.plots = plots;
    Ok(o)
}

fn split(c: &Common, q: f64, k1: f64, k2: f64) -> Result<Outcome> {
    let syn = SyntheticCocycle::default_with(q, k1, k2)?;
    let cocycle = syn.cocycle()?;
    let t = Complex64::new(0.05, 0.01);
    let probes = syn.probes(t);
    let tol = c.tol.unwrap_or(1e-8);
    let res = multilevel_split(&cocycle, syn.scales(), syn.bounds(t.arg().abs()), &probes, tol)?;
    let rep = res.report(&probes)?;
    let mut fits = Vec::new();
    let mut o_csv = Vec::new();
    for (level, scale) in [(Level::One, syn.scales().0), (Level::Two, syn.scales().1)] {
        let table = level_remainders(&res, level, 7)?;
        let fit = fit_zero_gevrey_relative(&table, &scale)?;
        o_csv.push((format!("remainders_level{}.csv", level.index()), table_csv(&table)?));
        fits.push(json!({"level": level.index(), "fit": to_value(&fit)?, "certified": fit.certified()}));
    }
    let mut pieces = Vec::new();
    for pr in &probes {
        let p = res.level1.owner(pr.eps);
        let g1 = res.piece(Level::One, p, pr.t, pr.eps)?;
        let g2 = res.piece(Level::Two, p, pr.t, pr.eps)?;
        let a = res.glue_on(p, pr.t, pr.eps)?;
        pieces.push(json!({"p": p, "eps": [pr.eps.re, pr.eps.im], "level1": [g1.re, g1.im], "level2": [g2.re, g2.im], "glue": [a.re, a.im]}));
    }
    let certified = rep.reconstruction_error <= 1e-7
        && rep.difference_error <= 1e-7
        && fits.iter().all(|f| f["certified"] == true);
    let mut o = Outcome::new(
        "split",
        json!({"report": to_value(&rep)?, "fits": fits, "pieces": pieces, "certified": certified}),
        certified,
    );
    o.csv = o_csv;
    Ok(o)
}

fn demo(c: &Common, path: &Option<PathBuf>) -> Result<Outcome> {
    let sc = load_scenario(path)?;
    let mut kernels = Vec::new();
    for p in 0..sc.len() {
        kernels.push(to_value(&certify_kernel(&sc, p)?)?);
        kernels.push(to_value(&certify_kernel_level1(&sc, p, 1.0)?)?);
        if sc.overlap_kind(p)? == OverlapKind::Disjoint {
            kernels.push(to_value(&certify_discrepancy(&sc, p)?)?);
        }
    }
    let kernels_ok = kernels.iter().all(|k| k["violations"] == 0);
    let rates = rate_dichotomy(&sc)?;
    let mut consistency = Vec::new();
    for p in 0..sc.len() {
        consistency.push(consecutive_difference(&sc, p, &overlap_grid(&sc, p))?.worst_ratio());
    }
    let mut opts = TheoremOptions::default();
    if let Some(t) = c.tol {
        opts.tolerance = t;
    }
    let rep = verify_two_level_theorem(&sc, &opts)?;
    let certified = kernels_ok
        && rates.iter().all(|r| r.within)
        && consistency.iter().all(|&w| w <= 10.0)
        && rep.certified;
    let mut csv_out = Vec::new();
    let mut plots = Vec::new();
    for f in &rep.fits {
        csv_out.push((format!("remainders_level{}.csv", f.level.index()), table_csv(&f.table)?));
        let mut dat = String::from("# N |eps| |t| remainder certified_bound\n");
        for r in &f.table.rows {
            let bound = f.fit.bound(r);
            dat.push_str(&format!("{} {:e} {:e} {:e} {:e}\n", r.n, r.eps.norm(), r.t.map_or(0.0, |t| t.norm()), r.norm, bound));
        }
        plots.push((format!("remainders_level{}.dat", f.level.index()), dat));
    }
    let mut o = Outcome::new(
        "demo",
        json!({
            "kernels": kernels,
            "rates": rates.iter().map(|r| json!({"overlap": r.overlap, "k_fit": r.fit.k_fit, "expected_k": r.expected_k, "within": r.within})).collect::<Vec<_>>(),
            "path_consistency": consistency,
            "theorem": {
                "levels": to_value(&rep.levels)?,
                "degenerate": rep.degenerate,
                "bounds": to_value(&rep.bounds)?,
                "split": to_value(&rep.split)?,
                "fits": rep.fits.iter().map(|f| json!({"level": f.level.index(), "fit": f.fit, "certified": f.fit.certified()})).collect::<Vec<_>>(),
                "corollary": to_value(&rep.corollary)?,
                "certified": rep.certified,
            },
            "certified": certified,
        }),
        certified,
    );
    o.csv = csv_out;
    o.plots = plots;
    Ok(o)
}

fn fit(path: &Path, kind: FitChoice, q: f64, k: f64) -> Result<Outcome> {
    let table = RemainderTable::read_csv(fs::File::open(path)?)?;
    let f = match kind {
        FitChoice::QGevrey => fit_q_gevrey(&table, k, q)?,
        FitChoice::ZeroGevrey => fit_zero_gevrey_relative(&table, &GevreyScale::new(Level::Two, q, k))?,
    };
    let certified = f.certified();
    Ok(Outcome::new("fit", json!({"fit": to_value(&f)?, "certified": certified}), certified))
}

fn run(cli: &Cli) -> Result<Outcome> {
    let c = &cli.common;
    if c.emit_plot_data && c.out.is_none() {
        return Err(Error::InvalidArgument("--emit-plot-data needs --out".into()));
    }
    match &cli.command {
        Command::Theta { q, k, points } => theta(c, *q, *k, *points),
        Command::Fourier {
            symbol,
            beta_prime,
            points,
        } => fourier(c, symbol, *beta_prime, *points),
        Command::Qlaplace { q, k, direction, n_max } => qlaplace_cmd(c, *q, *k, *direction, *n_max),
        Command::Geometry { scenario } => geometry(scenario),
        Command::Hypotheses { spec } => hypotheses(spec),
        Command::Diff { scenario, overlap } => diff(scenario, *overlap),
        Command::Split { q, k1, k2 } => split(c, *q, *k1, *k2),
        Command::Demo { scenario } => demo(c, scenario),
        Command::Fit { table, kind, q, k } => fit(table, *kind, *q, *k),
    }
}

fn write_artifacts(c: &Common, o: &Outcome, text: &str) -> Result<()> {
    let Some(dir) = &c.out else { return Ok(()) };
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{}.json", o.name)), text)?;
    for (name, body) in &o.csv {
        fs::write(dir.join(name), body)?;
    }
    if c.emit_plot_data {
        for (name, body) in &o.plots {
            fs::write(dir.join(name), body)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|o| {
        let text = serde_json::to_string_pretty(&o.report)? + "\n";
        write_artifacts(&cli.common, &o, &text)?;
        print!("{text}");
        Ok(o.certified)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let code = if e.is_certification_failure() { 1 } else { 2 };
            eprintln!("{}", json!({"error": {"kind": e.kind(), "message": e.to_string()}}));
            ExitCode::from(code)
        }
    }
}
