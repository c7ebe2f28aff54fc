//! `hilbert`: runs one experiment per invocation and writes CSV or JSON.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use hilbert_core::automorphism::{axes, classify, is_automorphism, spectral};
use hilbert_core::group::{self, MarkedGroup};
use hilbert_core::metric::distance;
use hilbert_core::rank_one::{
    estimate_contraction, estimate_thinness, is_rank_one, ContractionTarget, ContractionVerdict,
};
use hilbert_core::{
    bundled, Classification, ConvexDomain, DomainSpec, Error, GeodesicLine, ProjMap, ProjPoint,
};

use output::{coords, num, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Command {
    Dist,
    Classify,
    RankOne,
    Thinness,
    Contraction,
    Walk,
    Census,
    LimitSet,
    Validate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Parser, Debug)]
#[command(name = "hilbert", version, about = "Hilbert geometry experiments")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Domain JSON file, or a bundled name (simplex2, disk).
    #[arg(long)]
    domain: Option<String>,
    /// Group JSON file, or a bundled name (z2_simplex, fuchsian, boost_cyclic).
    #[arg(long)]
    group: Option<String>,
    /// Row-major matrix, rows separated by ';' and entries by ','; or diag(a,b,...).
    #[arg(long, allow_hyphen_values = true)]
    matrix: Option<String>,
    /// Point: affine chart coordinates or homogeneous coordinates.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    y: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Word-length radius for census and limit-set.
    #[arg(long)]
    depth: Option<usize>,
    /// Relative tolerance for equal eigenvalue moduli.
    #[arg(long)]
    eps: Option<f64>,
    /// Radius cap for thinness and contraction sampling.
    #[arg(long)]
    cap: Option<f64>,
    /// Largest translation length in the census.
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    threads: Option<usize>,
    /// Treat the domain as divisible (enables the rank-one fast path).
    #[arg(long)]
    cocompact: bool,
}

enum Failure {
    Validation(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

type Res<T> = std::result::Result<T, Failure>;

fn invalid<T>(msg: impl Into<String>) -> Res<T> {
    Err(Failure::Validation(msg.into()))
}

fn read_file(path: &Path) -> Res<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn load_domain(arg: &str, eps: Option<f64>) -> Res<ConvexDomain> {
    let path = Path::new(arg);
    let dom = if path.exists() {
        let text = read_file(path)?;
        ConvexDomain::from_json(&text)
            .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?
    } else {
        let name = arg.trim_end_matches(".json");
        match bundled::domain_by_name(name) {
            Some(d) => d,
            None => return invalid(format!("{arg}: no such file or bundled domain")),
        }
    };
    Ok(with_eps(dom, eps))
}

fn with_eps(dom: ConvexDomain, eps: Option<f64>) -> ConvexDomain {
    match eps {
        Some(e) => {
            let mut tol = *dom.tolerances();
            tol.modulus = e;
            dom.with_tolerances(tol)
        }
        None => dom,
    }
}

fn load_group(arg: &str, eps: Option<f64>, cocompact: bool) -> Res<MarkedGroup> {
    let path = Path::new(arg);
    let mut grp = if path.exists() {
        let text = read_file(path)?;
        MarkedGroup::from_json(&text, path.parent())
            .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?
    } else {
        match bundled::group_by_name(arg.trim_end_matches(".json")) {
            Some(g) => g,
            None => return invalid(format!("{arg}: no such file or bundled group")),
        }
    };
    grp.domain = with_eps(grp.domain, eps);
    grp.cocompact |= cocompact;
    Ok(grp)
}

fn parse_list(s: &str) -> Res<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Validation(format!("not a number: {t:?}")))
        })
        .collect()
}

fn parse_matrix(s: &str) -> Res<ProjMap> {
    let s = s.trim();
    let m = if let Some(inner) = s.strip_prefix("diag(").and_then(|r| r.strip_suffix(')')) {
        let d = parse_list(inner)?;
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))
    } else if s.contains(';') {
        let rows = s.split(';').map(parse_list).collect::<Res<Vec<_>>>()?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return invalid("matrix rows must have equal length matching the row count");
        }
        DMatrix::from_fn(n, n, |i, j| rows[i][j])
    } else {
        let v = parse_list(s)?;
        let n = (v.len() as f64).sqrt().round() as usize;
        if n * n != v.len() {
            return invalid(format!("{} entries do not form a square matrix", v.len()));
        }
        DMatrix::from_row_slice(n, n, &v)
    };
    Ok(ProjMap::new(m)?)
}

fn parse_point(dom: &ConvexDomain, s: &str) -> Res<ProjPoint> {
    let v = parse_list(s)?;
    if v.len() == dom.dim() {
        Ok(dom.chart().from_affine(&v)?)
    } else if v.len() == dom.ambient() {
        Ok(ProjPoint::from_slice(&v)?)
    } else {
        invalid(format!(
            "point has {} coordinates; expected {} (chart) or {} (homogeneous)",
            v.len(),
            dom.dim(),
            dom.ambient()
        ))
    }
}

fn need<'a, T>(v: &'a Option<T>, flag: &str) -> Res<&'a T> {
    match v {
        Some(v) => Ok(v),
        None => invalid(format!("--{flag} is required for this command")),
    }
}

/// Geodesic line from --x/--y (interior points or boundary endpoints) or
/// from the principal axis of --matrix (middle member of an axis family).
fn target_line(cli: &Cli, dom: &ConvexDomain) -> Res<GeodesicLine> {
    if let Some(m) = &cli.matrix {
        let g = parse_matrix(m)?;
        let rep = axes(&g, dom)?;
        let Some(pa) = rep.principal().next() else {
            return Err(Failure::Validation("matrix has no pseudo-axis".into()));
        };
        let (p, q) = match &pa.family {
            Some(f) => f.member(dom, 0.5, 0.5),
            None => (pa.attracting.clone(), pa.repelling.clone()),
        };
        return Ok(GeodesicLine::new(dom, &p, &q)?);
    }
    let x = parse_point(dom, need(&cli.x, "x")?)?;
    let y = parse_point(dom, need(&cli.y, "y")?)?;
    let interior = |p: &ProjPoint| matches!(dom.classify(p), Ok(Classification::Interior));
    if interior(&x) && interior(&y) {
        Ok(GeodesicLine::through(dom, &x, &y)?)
    } else {
        Ok(GeodesicLine::new(dom, &x, &y)?)
    }
}

fn run(cli: &Cli) -> Res<(Table, String)> {
    let eps = cli.eps;
    let domain = || load_domain(need(&cli.domain, "domain")?, eps);
    let group = || load_group(need(&cli.group, "group")?, eps, cli.cocompact);
    match cli.command {
        Command::Dist => {
            let dom = domain()?;
            let x = parse_point(&dom, need(&cli.x, "x")?)?;
            let y = parse_point(&dom, need(&cli.y, "y")?)?;
            let d = distance(&dom, &x, &y)?;
            let mut t = Table::new(&["distance"]);
            t.row(vec![num(d)]);
            Ok((t, format!("distance {d}")))
        }
        Command::Classify => {
            let g = parse_matrix(need(&cli.matrix, "matrix")?)?;
            let eps_mod = eps.unwrap_or(hilbert_core::Tolerances::default().modulus);
            let sd = spectral(&g, eps_mod)?;
            let c = classify(&sd);
            let automorphism = match &cli.domain {
                Some(d) => {
                    let dom = load_domain(d, eps)?;
                    json!(is_automorphism(&g, &dom, 256))
                }
                None => Value::Null,
            };
            let eigs: Vec<String> = sd
                .eigenvalues
                .iter()
                .map(|z| {
                    if z.im == 0.0 {
                        format!("{}", z.re)
                    } else {
                        format!("{}{:+}i", z.re, z.im)
                    }
                })
                .collect();
            let mut t = Table::new(&[
                "tau",
                "bi_semi_proximal",
                "biproximal",
                "loxodromic",
                "lambda_max",
                "lambda_min",
                "eigenvalues",
                "automorphism",
            ]);
            t.row(vec![
                num(c.tau),
                json!(c.bi_semi_proximal),
                json!(c.biproximal),
                json!(c.loxodromic),
                num(sd.lambda_max),
                num(sd.lambda_min),
                json!(eigs.join(";")),
                automorphism,
            ]);
            Ok((
                t,
                format!(
                    "tau {} biproximal {} loxodromic {}",
                    c.tau, c.biproximal, c.loxodromic
                ),
            ))
        }
        Command::RankOne => {
            let dom = domain()?;
            let g = parse_matrix(need(&cli.matrix, "matrix")?)?;
            let v = is_rank_one(&dom, &g, cli.cocompact)?;
            let mut t = Table::new(&[
                "rank_one",
                "reason",
                "tau",
                "biproximal",
                "fast_path",
                "axes_scanned",
                "axes_with_witness",
                "scan_exhaustive",
                "witness",
                "axis_attracting",
                "axis_repelling",
            ]);
            let (a, b) = match &v.axis {
                Some((a, b)) => (coords(a), coords(b)),
                None => (Value::Null, Value::Null),
            };
            t.row(vec![
                json!(v.is_rank_one),
                json!(v.reason.label()),
                num(v.tau),
                json!(v.biproximal),
                json!(v.fast_path_used),
                json!(v.axes_scanned),
                json!(v.axes_with_witness),
                json!(v.scan_exhaustive),
                v.witness.as_ref().map(coords).unwrap_or(Value::Null),
                a,
                b,
            ]);
            Ok((
                t,
                format!("verdict {} (rank-one: {})", v.reason.label(), v.is_rank_one),
            ))
        }
        Command::Thinness => {
            let dom = domain()?;
            let line = target_line(cli, &dom)?;
            let n = cli.samples.unwrap_or(1000);
            let cap = cli.cap.unwrap_or(12.0);
            let r = estimate_thinness(&dom, &line, n, cap, cli.seed)?;
            let mut t = Table::new(&[
                "samples",
                "cap",
                "b_hat",
                "d_hat",
                "b_hat_first_half",
                "thin_violations",
            ]);
            t.row(vec![
                json!(n),
                num(cap),
                num(r.b_hat),
                num(r.d_hat),
                num(r.b_hat_prefix(n / 2)),
                json!(r.thin_violations),
            ]);
            Ok((
                t,
                format!(
                    "B_hat {} D_hat {} violations {}",
                    r.b_hat, r.d_hat, r.thin_violations
                ),
            ))
        }
        Command::Contraction => {
            let dom = domain()?;
            let line = target_line(cli, &dom)?;
            let n = cli.samples.unwrap_or(1000);
            let cap = cli.cap.unwrap_or(16.0);
            let r = estimate_contraction(&dom, &ContractionTarget::Line(line), n, cap, cli.seed)?;
            let series = |v: &[(f64, f64)]| {
                json!(v
                    .iter()
                    .map(|p| output::fmt_f64(p.1))
                    .collect::<Vec<_>>()
                    .join(";"))
            };
            let verdict = match r.verdict {
                ContractionVerdict::Contracting => "Contracting",
                ContractionVerdict::NotContracting { .. } => "NotContracting",
            };
            let mut t = Table::new(&[
                "samples",
                "cap",
                "verdict",
                "sisto_contracting",
                "bf_contracting",
                "sisto_c",
                "bf_c",
                "coarse_gap",
                "morse_gauge",
                "morse_max_excursion",
                "sisto_raw_by_cap",
                "bf_raw_by_cap",
            ]);
            t.row(vec![
                json!(n),
                num(cap),
                json!(verdict),
                json!(r.sisto_contracting),
                json!(r.bf_contracting),
                num(r.sisto_c),
                num(r.bf_c),
                num(r.coarse_gap),
                num(r.morse_gauge),
                num(r.morse.max_excursion),
                series(&r.sisto_raw_by_cap),
                series(&r.bf_raw_by_cap),
            ]);
            Ok((
                t,
                format!("{verdict}: sisto C {} bf C {}", r.sisto_c, r.bf_c),
            ))
        }
        Command::Walk => {
            let grp = group()?;
            let steps = cli.steps.unwrap_or(20);
            let trials = cli.trials.unwrap_or(100);
            if trials == 0 {
                return invalid("--trials must be at least 1");
            }
            let rows = group::random_walk(&grp, steps, trials, cli.seed);
            let hits = rows.iter().filter(|r| r.rank_one).count();
            let fraction = hits as f64 / trials as f64;
            let mut t = Table::new(&["trial", "steps", "word", "tau", "rank_one", "reason"]);
            for r in &rows {
                t.row(vec![
                    json!(r.trial),
                    json!(steps),
                    json!(r.word),
                    num(r.tau),
                    json!(r.rank_one),
                    json!(r.reason),
                ]);
            }
            t.extra("fraction", num(fraction));
            Ok((t, format!("rank-one fraction {fraction} ({hits}/{trials})")))
        }
        Command::Census => {
            let grp = group()?;
            let depth = cli.depth.unwrap_or(10);
            let tmax = cli.tmax.unwrap_or(f64::INFINITY);
            let c = group::geodesic_census(&grp, tmax, depth)?;
            let ce = group::critical_exponent(&grp, usize::MAX, depth);
            let mut t = Table::new(&["class_id", "word", "tau", "class_size"]);
            for e in &c.entries {
                t.row(vec![
                    json!(e.class_id),
                    json!(e.word),
                    num(e.tau),
                    json!(e.class_size),
                ]);
            }
            let slope = c.default_shape_slope();
            t.extra("ball_radius", json!(c.ball_radius));
            t.extra("conj_radius", json!(c.conj_radius));
            t.extra("elements", json!(c.elements));
            t.extra("classes_upper_bound", json!(c.classes));
            t.extra("horizon", num(c.horizon));
            t.extra("shape_slope", slope.map(num).unwrap_or(Value::Null));
            let omega = match &ce {
                Ok(ce) => {
                    t.extra("omega_hat", num(ce.omega_hat));
                    t.extra("orbit_horizon", num(ce.horizon));
                    format!("{}", ce.omega_hat)
                }
                Err(e) => format!("unavailable ({e})"),
            };
            Ok((
                t,
                format!(
                    "classes (upper bound) {} from {} elements; horizon {}; slope of log(t P) {}; omega_hat {omega}",
                    c.classes,
                    c.elements,
                    c.horizon,
                    slope.map(|s| s.to_string()).unwrap_or_else(|| "n/a".into())
                ),
            ))
        }
        Command::LimitSet => {
            let grp = group()?;
            let depth = cli.depth.unwrap_or(6);
            let pts = group::limit_set_sample(&grp, depth)?;
            let mut t = Table::new(&["word", "rank_one", "point"]);
            for p in &pts {
                t.row(vec![json!(p.word), json!(p.rank_one), coords(&p.point)]);
            }
            let inv = group::limit_set_invariance(&grp, depth)?;
            t.extra("invariance_error", num(inv));
            Ok((
                t,
                format!(
                    "{} limit points; invariance error {}",
                    pts.len(),
                    output::fmt_f64(inv)
                ),
            ))
        }
        Command::Validate => {
            let mut t = Table::new(&["kind", "valid", "violations"]);
            let mut ok = true;
            if let Some(d) = &cli.domain {
                let (valid, violations) = validate_domain(d)?;
                ok &= valid;
                t.row(vec![
                    json!("domain"),
                    json!(valid),
                    json!(violations.join("; ")),
                ]);
            }
            if let Some(g) = &cli.group {
                let (valid, msg) = match load_group(g, eps, cli.cocompact) {
                    Ok(_) => (true, String::new()),
                    Err(Failure::Validation(m)) | Err(Failure::Numerical(m)) => (false, m),
                };
                ok &= valid;
                t.row(vec![json!("group"), json!(valid), json!(msg)]);
            }
            if t.is_empty() {
                return invalid("validate needs --domain and/or --group");
            }
            t.failed = !ok;
            Ok((t, if ok { "valid".into() } else { "invalid".into() }))
        }
    }
}

fn validate_domain(arg: &str) -> Res<(bool, Vec<String>)> {
    let path = Path::new(arg);
    let text = if path.exists() {
        read_file(path)?
    } else {
        match bundled::DOMAINS
            .iter()
            .find(|(n, _)| *n == arg.trim_end_matches(".json"))
        {
            Some((_, t)) => t.to_string(),
            None => return invalid(format!("{arg}: no such file or bundled domain")),
        }
    };
    let spec: DomainSpec = match serde_json::from_str(&text) {
        Ok(s) => s,
        Err(e) => return Ok((false, vec![Error::from(e).to_string()])),
    };
    let report = spec.validate();
    if !report.valid {
        return Ok((false, report.violations));
    }
    match spec.build() {
        Ok(dom) => {
            let r = dom.validate();
            Ok((r.valid, r.violations))
        }
        Err(e) => Ok((false, vec![e.to_string()])),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let result = run(&cli).and_then(|(table, summary)| {
        let text = match cli.format {
            Format::Csv => table.to_csv(),
            Format::Json => table.to_json(),
        };
        match &cli.out {
            Some(p) => std::fs::write(p, text)
                .map_err(|e| Failure::Validation(format!("{}: {e}", p.display())))?,
            None => print!("{text}"),
        }
        eprintln!("{summary}");
        Ok(table.failed)
    });
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}
