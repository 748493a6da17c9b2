//! The `avgproc` command line: argument parsing, seeding, and CSV output.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bipartite::{cutoff_time_l1_signed, cutoff_time_l2_signed, exact_l2, profile};
use crate::ehrenfest::{hardy_constant, hypercube_avg_l2_exact, ks_two_sample, BirthDeathChain};
use crate::entropy::{entropy_decay_check, kappa_known};
use crate::error::{Error, Result};
use crate::graph::{Graph, Part};
use crate::mc::run_replicas;
use crate::sim::{mean_lp, Lp, MassConfig};

pub const HEADER: &str = "experiment,graph,n,d,m,t,a,p,statistic,value,stderr,replicas,seed";
pub const SEED_ENV: &str = "AVGPROC_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "avgproc", version, about = "Experiments on the averaging process", args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Master seed; falls back to AVGPROC_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replica parallelism.
    #[arg(long)]
    threads: Option<usize>,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Hypercube,
    #[value(name = "k_bipartite")]
    KBipartite,
    Complete,
}

#[derive(Debug, Args)]
struct GraphArgs {
    #[arg(long, value_enum)]
    graph: FamilyArg,
    /// Hypercube dimension.
    #[arg(long)]
    d: Option<u32>,
    /// Size of the smaller part of K_{m,n-m}.
    #[arg(long)]
    m: Option<usize>,
    /// Total number of vertices (complete and complete bipartite graphs).
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Debug, Args)]
struct Times {
    /// Absolute times: a comma list or start:stop:step.
    #[arg(long, allow_hyphen_values = true)]
    t: Option<String>,
    /// Window offsets a, converted to times by the family's cutoff location.
    #[arg(long = "a-grid", allow_hyphen_values = true)]
    a_grid: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SideArg {
    C1,
    C2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckArg {
    Sandwich,
    Interlacing,
    Spectrum,
    #[value(name = "brown-shao")]
    BrownShao,
    Return,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo mean of the L^p distance.
    #[command(args_override_self = true)]
    Simulate {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        times: Times,
        #[arg(long, default_value_t = 2)]
        p: u32,
        #[arg(long, default_value_t = 1000)]
        replicas: usize,
        /// Starting vertex of the Dirac mass; defaults to a worst-case vertex.
        #[arg(long)]
        start: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Exact L2 distance on K_{m,n-m}.
    #[command(name = "exact-bipartite", args_override_self = true)]
    ExactBipartite {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        times: Times,
        #[arg(long, value_enum, default_value_t = SideArg::C2)]
        side: SideArg,
        #[command(flatten)]
        common: Common,
    },
    /// Exact L2 distance on the hypercube.
    #[command(name = "hypercube-exact", args_override_self = true)]
    HypercubeExact {
        /// Dimensions, comma separated.
        #[arg(long)]
        d: String,
        #[command(flatten)]
        times: Times,
        #[command(flatten)]
        common: Common,
    },
    /// Structural checks on the urn chains.
    #[command(args_override_self = true)]
    Ehrenfest {
        #[arg(long)]
        d: u32,
        #[arg(long, value_enum)]
        check: CheckArg,
        #[arg(long, allow_hyphen_values = true)]
        t: Option<String>,
        /// Largest killing level M; defaults to d/2.
        #[arg(long = "m-max")]
        m_max: Option<usize>,
        /// Killing level for the hitting-time comparison.
        #[arg(long = "level")]
        level: Option<usize>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Entropy decay against its exponential bound.
    #[command(args_override_self = true)]
    Entropy {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, allow_hyphen_values = true)]
        t: String,
        #[arg(long, default_value_t = 1000)]
        replicas: usize,
        /// Entropy constant; defaults to the known value for the family.
        #[arg(long)]
        kappa: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Hardy constants against killed-chain gaps.
    #[command(args_override_self = true)]
    Hardy {
        #[arg(long)]
        d: u32,
        /// Also emit C_M and the gap as separate rows.
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Distance along the cutoff window with the limiting profile.
    #[command(name = "profile-sweep", args_override_self = true)]
    ProfileSweep {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long = "a-grid", allow_hyphen_values = true)]
        a_grid: String,
        #[arg(long, default_value_t = 2)]
        p: u32,
        #[arg(long, default_value_t = 1000)]
        replicas: usize,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate { common, .. }
            | Command::ExactBipartite { common, .. }
            | Command::HypercubeExact { common, .. }
            | Command::Ehrenfest { common, .. }
            | Command::Entropy { common, .. }
            | Command::Hardy { common, .. }
            | Command::ProfileSweep { common, .. } => common,
        }
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub experiment: &'static str,
    pub graph: String,
    pub n: Option<usize>,
    pub d: Option<u32>,
    pub m: Option<usize>,
    pub t: Option<f64>,
    pub a: Option<f64>,
    pub p: Option<u32>,
    pub statistic: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub replicas: Option<usize>,
    pub seed: u64,
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl Record {
    fn new(experiment: &'static str, graph: impl Into<String>, statistic: impl Into<String>, value: f64, seed: u64) -> Self {
        Record {
            experiment,
            graph: graph.into(),
            n: None,
            d: None,
            m: None,
            t: None,
            a: None,
            p: None,
            statistic: statistic.into(),
            value,
            stderr: None,
            replicas: None,
            seed,
        }
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.graph,
            opt(self.n.map(|v| v.to_string())),
            opt(self.d.map(|v| v.to_string())),
            opt(self.m.map(|v| v.to_string())),
            opt(self.t.map(fmt_float)),
            opt(self.a.map(fmt_float)),
            opt(self.p.map(|v| v.to_string())),
            self.statistic,
            fmt_float(self.value),
            opt(self.stderr.map(fmt_float)),
            opt(self.replicas.map(|v| v.to_string())),
            self.seed
        );
        s
    }
}

/// Failure of a CLI run, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Numerical(_) => EXIT_NUMERICAL,
            Error::Parameter(_) | Error::Capability(_) => EXIT_CONFIG,
        };
        CliError { code, message: e.to_string() }
    }
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError { code: EXIT_CONFIG, message: msg.into() }
}

/// Parses `start:stop:step` (both ends included when the step divides the
/// range to within 1e-9) or a comma-separated list.
pub fn parse_grid(key: &str, spec: &str) -> std::result::Result<Vec<f64>, CliError> {
    let bad = || config_error(format!("--{key}: cannot parse '{spec}'"));
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.len() {
        1 => spec.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| bad())).collect(),
        3 => {
            let nums: Vec<f64> = parts.iter().map(|s| s.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
            let (start, stop, step) = (nums[0], nums[1], nums[2]);
            if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
                return Err(config_error(format!("--{key}: need step > 0 and start <= stop in '{spec}'")));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            if count > 1_000_000 {
                return Err(config_error(format!("--{key}: grid '{spec}' too large")));
            }
            Ok((0..count).map(|i| start + i as f64 * step).collect())
        }
        _ => Err(bad()),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, spec: &str) -> std::result::Result<Vec<T>, CliError> {
    spec.split(',').map(|s| s.trim().parse::<T>().map_err(|_| config_error(format!("--{key}: cannot parse '{s}'")))).collect()
}

fn resolve_seed(flag: Option<u64>) -> std::result::Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse::<u64>().map_err(|_| config_error(format!("{SEED_ENV}: not an unsigned 64-bit integer: '{v}'"))),
        Err(_) => Ok(0),
    }
}

/// Reads a flat `key=value` file into flag tokens. Blank lines and lines
/// starting with `#` are skipped; `key=true` becomes a bare switch.
fn config_tokens(path: &str) -> std::result::Result<Vec<OsString>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("--config: cannot read {path}: {e}")))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(config_error(format!("--config: line {} is not key=value", lineno + 1)));
        };
        let key = key.trim().trim_start_matches("--");
        let value = value.trim();
        if key.is_empty() {
            return Err(config_error(format!("--config: empty key on line {}", lineno + 1)));
        }
        if value == "true" {
            out.push(OsString::from(format!("--{key}")));
        } else if value != "false" {
            out.push(OsString::from(format!("--{key}={value}")));
        }
    }
    Ok(out)
}

/// Splices `--config FILE` contents in front of the explicit flags so that
/// flags given on the command line win.
fn expand_config(args: Vec<OsString>) -> std::result::Result<Vec<OsString>, CliError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut iter = args.into_iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy().into_owned();
        if s == "--config" {
            let path = iter.next().ok_or_else(|| config_error("--config needs a file"))?;
            config = Some(path.to_string_lossy().into_owned());
        } else if let Some(path) = s.strip_prefix("--config=") {
            config = Some(path.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let tokens = config_tokens(&path)?;
    let split = rest.len().min(2);
    let mut out: Vec<OsString> = rest[..split].to_vec();
    out.extend(tokens);
    out.extend_from_slice(&rest[split..]);
    Ok(out)
}

fn build_graph(g: &GraphArgs) -> Result<Graph> {
    let need = |v: Option<usize>, key: &str| v.ok_or_else(|| Error::Parameter(format!("--{key} is required for this graph")));
    match g.graph {
        FamilyArg::Hypercube => Graph::hypercube(g.d.ok_or_else(|| Error::Parameter("--d is required for the hypercube".into()))?),
        FamilyArg::KBipartite => {
            let (m, n) = (need(g.m, "m")?, need(g.n, "n")?);
            if n < 2 * m {
                return Err(Error::Parameter(format!("--m={m} must be at most n/2 for --n={n}")));
            }
            Graph::complete_bipartite(m, n - m)
        }
        FamilyArg::Complete => Graph::complete(need(g.n, "n")?),
    }
}

fn graph_fields(g: &Graph, r: &mut Record) {
    r.n = Some(g.n());
    match g.family() {
        crate::graph::Family::Hypercube { d } => r.d = Some(d),
        crate::graph::Family::CompleteBipartite { m, .. } => r.m = Some(m),
        crate::graph::Family::Complete { .. } => {}
    }
}

/// Cutoff time at window offset `a` for the family and norm. Not clamped.
fn window_time(g: &Graph, p: Lp, a: f64) -> Result<f64> {
    match g.family() {
        crate::graph::Family::Hypercube { d } => Ok(0.5 * (d as f64).ln() + a),
        crate::graph::Family::CompleteBipartite { m, k } => match p {
            Lp::L1 => cutoff_time_l1_signed(m, m + k, a),
            Lp::L2 => cutoff_time_l2_signed(m, m + k, a),
        },
        crate::graph::Family::Complete { .. } => {
            Err(Error::Capability("no window parameterization for the complete graph; use --t".into()))
        }
    }
}

fn worst_start(g: &Graph) -> usize {
    match g.family() {
        crate::graph::Family::CompleteBipartite { m, .. } => m,
        _ => 0,
    }
}

/// `(t, a)` points from either `--t` or `--a-grid`. Offsets whose window
/// time falls before zero are evaluated at `t = 0`; the row keeps `a`.
fn time_points(times: &Times, to_time: impl Fn(f64) -> Result<f64>) -> std::result::Result<Vec<(f64, Option<f64>)>, CliError> {
    match (&times.t, &times.a_grid) {
        (Some(_), Some(_)) => Err(config_error("--t and --a-grid are mutually exclusive")),
        (None, None) => Err(config_error("one of --t or --a-grid is required")),
        (Some(t), None) => {
            let ts = parse_grid("t", t)?;
            if ts.iter().any(|&t| !(t >= 0.0)) {
                return Err(config_error("--t: times must be >= 0"));
            }
            Ok(ts.into_iter().map(|t| (t, None)).collect())
        }
        (None, Some(a)) => parse_grid("a-grid", a)?.into_iter().map(|a| Ok((to_time(a)?.max(0.0), Some(a)))).collect(),
    }
}

fn lp_from(p: u32) -> std::result::Result<Lp, CliError> {
    Lp::from_p(p).map_err(|_| config_error(format!("--p must be 1 or 2, got {p}")))
}

fn run_command(cmd: &Command, seed: u64) -> std::result::Result<Vec<Record>, CliError> {
    let mut rows = Vec::new();
    match cmd {
        Command::Simulate { graph, times, p, replicas, start, .. } => {
            let g = build_graph(graph)?;
            let lp = lp_from(*p)?;
            let x0 = start.unwrap_or_else(|| worst_start(&g));
            let xi = MassConfig::dirac(g.n(), x0)?;
            for (t, a) in time_points(times, |a| window_time(&g, lp, a))? {
                let est = mean_lp(&g, &xi, t, lp, *replicas, seed)?;
                let mut r = Record::new("simulate", g.family_name(), "mean_lp", est.mean, seed);
                graph_fields(&g, &mut r);
                (r.t, r.a, r.p, r.stderr, r.replicas) = (Some(t), a, Some(*p), Some(est.stderr), Some(*replicas));
                rows.push(r);
            }
        }
        Command::ExactBipartite { m, n, times, side, .. } => {
            let part = match side {
                SideArg::C1 => Part::C1,
                SideArg::C2 => Part::C2,
            };
            for (t, a) in time_points(times, |a| cutoff_time_l2_signed(*m, *n, a))? {
                let mut r = Record::new("exact-bipartite", "k_bipartite", "exact_l2", exact_l2(*m, *n, part, t)?, seed);
                (r.n, r.m, r.t, r.a, r.p) = (Some(*n), Some(*m), Some(t), a, Some(2));
                rows.push(r);
            }
        }
        Command::HypercubeExact { d, times, .. } => {
            for d in parse_list::<u32>("d", d)? {
                let chain = BirthDeathChain::build_s(d)?;
                for (t, a) in time_points(times, |a| Ok(0.5 * (d as f64).ln() + a))? {
                    let v = crate::ehrenfest::hypercube_avg_l2_with(&chain, t)?;
                    let (stat, value) = if v.value.is_finite() { ("avg_l2", v.value) } else { ("log1p_avg_l2", v.log1p_value) };
                    let mut r = Record::new("hypercube-exact", "hypercube", stat, value, seed);
                    (r.n, r.d, r.t, r.a, r.p) = ((d < 64).then(|| 1usize << d), Some(d), Some(t), a, Some(2));
                    rows.push(r);
                }
            }
        }
        Command::Ehrenfest { d, check, t, m_max, level, samples, .. } => {
            rows.extend(ehrenfest_rows(*d, *check, t.as_deref(), *m_max, *level, *samples, seed)?);
        }
        Command::Entropy { graph, t, replicas, kappa, .. } => {
            let g = build_graph(graph)?;
            let kappa = match kappa {
                Some(k) => *k,
                None => kappa_known(&g)?,
            };
            let xi = MassConfig::dirac(g.n(), worst_start(&g))?;
            for t in parse_grid("t", t)? {
                let (ent, l1) = entropy_decay_check(&g, &xi, t, *replicas, seed, kappa)?;
                for (stat, value, se, p) in [
                    ("mean_entropy", ent.mean.mean, Some(ent.mean.stderr), None),
                    ("entropy_bound", ent.bound, None, None),
                    ("mean_lp", l1.mean.mean, Some(l1.mean.stderr), Some(1)),
                    ("l1_entropy_bound", l1.bound, None, Some(1)),
                ] {
                    let mut r = Record::new("entropy", g.family_name(), stat, value, seed);
                    graph_fields(&g, &mut r);
                    (r.t, r.p, r.stderr) = (Some(t), p, se);
                    r.replicas = se.map(|_| *replicas);
                    rows.push(r);
                }
            }
        }
        Command::Hardy { d, all, .. } => {
            let chain = BirthDeathChain::build_p(*d)?;
            if *d < 2 {
                return Err(config_error("--d must be at least 2"));
            }
            for big_m in 1..=(*d as usize / 2) {
                let c = hardy_constant(*d, big_m)?;
                let lam = chain.killed_eigenvalues(big_m)?[0];
                let mut stats = vec![("lambda_hardy_product", lam * c)];
                if *all {
                    stats.push(("hardy_constant", c));
                    stats.push(("killed_gap_p", lam));
                }
                for (stat, value) in stats {
                    let mut r = Record::new("hardy", "ehrenfest", stat, value, seed);
                    (r.d, r.m) = (Some(*d), Some(big_m));
                    rows.push(r);
                }
            }
        }
        Command::ProfileSweep { graph, a_grid, p, replicas, .. } => {
            let g = build_graph(graph)?;
            let lp = lp_from(*p)?;
            rows.extend(profile_rows(&g, lp, &parse_grid("a-grid", a_grid)?, *replicas, seed)?);
        }
    }
    if let Some(bad) = rows.iter().find(|r| !r.value.is_finite()) {
        return Err(CliError { code: EXIT_NUMERICAL, message: format!("non-finite {} at t={:?}", bad.statistic, bad.t) });
    }
    Ok(rows)
}

fn ehrenfest_rows(
    d: u32,
    check: CheckArg,
    t: Option<&str>,
    m_max: Option<usize>,
    level: Option<usize>,
    samples: usize,
    seed: u64,
) -> std::result::Result<Vec<Record>, CliError> {
    let p = BirthDeathChain::build_p(d)?;
    let s = BirthDeathChain::build_s(d)?;
    let mut rows = Vec::new();
    let mut push = |stat: &str, value: f64, t: Option<f64>, m: Option<usize>, reps: Option<usize>| {
        let mut r = Record::new("ehrenfest", "ehrenfest", stat, value, seed);
        (r.d, r.t, r.m, r.replicas) = (Some(d), t, m, reps);
        rows.push(r);
    };
    let pass = |b: bool| if b { 1.0 } else { 0.0 };
    let times = || t.map(|t| parse_grid("t", t)).transpose().map(|v| v.unwrap_or_default());
    let m_top = m_max.unwrap_or(d as usize / 2).min(d as usize);
    match check {
        CheckArg::Sandwich => {
            for t in times()? {
                let s00 = s.kernel_row(0, t)?[0];
                let ok = p.kernel_row(0, t)?[0] <= s00 + 1e-10 && s00 <= p.kernel_row(0, t / 2.0)?[0] + 1e-10;
                push("sandwich_pass", pass(ok), Some(t), None, None);
            }
        }
        CheckArg::Return => {
            for t in times()? {
                push("P00", p.kernel_row(0, t)?[0], Some(t), None, None);
                push("S00", s.kernel_row(0, t)?[0], Some(t), None, None);
            }
        }
        CheckArg::Interlacing => {
            for big_m in 1..=m_top {
                let lp = p.killed_eigenvalues(big_m)?;
                let ls = s.killed_eigenvalues(big_m)?;
                let interlaced = (0..big_m).all(|i| ls[i] <= lp[i] + 1e-9 && (i == 0 || lp[i - 1] <= ls[i] + 1e-9));
                let ok = interlaced && ls[0] >= lp[0] / 2.0 - 1e-9;
                push("interlacing_pass", pass(ok), None, Some(big_m), None);
            }
        }
        CheckArg::Spectrum => {
            for big_m in 1..=m_top {
                push("killed_gap_p", p.killed_eigenvalues(big_m)?[0], None, Some(big_m), None);
                push("killed_gap_s", s.killed_eigenvalues(big_m)?[0], None, Some(big_m), None);
            }
        }
        CheckArg::BrownShao => {
            let big_m = level.unwrap_or(d as usize / 2).max(1);
            p.killed_eigenvalues(big_m)?;
            let pairs = run_replicas(seed, samples, |rng, _| {
                let direct = p.simulate_hitting(big_m, rng).expect("level validated");
                let sum = p.sample_hitting(big_m, rng).expect("level validated");
                (direct, sum)
            });
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let ks = ks_two_sample(&a, &b)?;
            push("ks_statistic", ks.statistic, None, Some(big_m), Some(samples));
            push("ks_critical_01", ks.critical_01, None, Some(big_m), Some(samples));
            push("ks_pass", pass(ks.passes()), None, Some(big_m), Some(samples));
        }
    }
    Ok(rows)
}

fn profile_rows(g: &Graph, lp: Lp, grid: &[f64], replicas: usize, seed: u64) -> std::result::Result<Vec<Record>, CliError> {
    let mut rows = Vec::new();
    let xi = MassConfig::dirac(g.n(), worst_start(g))?;
    for &a in grid {
        let t = window_time(g, lp, a)?.max(0.0);
        let mut base = Record::new("profile-sweep", g.family_name(), "", 0.0, seed);
        graph_fields(g, &mut base);
        (base.t, base.a, base.p) = (Some(t), Some(a), Some(lp.p()));
        let mut emit = |stat: &str, value: f64, stderr: Option<f64>| {
            let mut r = base.clone();
            (r.statistic, r.value, r.stderr) = (stat.to_string(), value, stderr);
            r.replicas = stderr.map(|_| replicas);
            rows.push(r);
        };
        match (g.family(), lp) {
            (crate::graph::Family::CompleteBipartite { m, k }, Lp::L2) => {
                let pr = profile(m, m + k, a)?;
                emit("exact_l2", pr.exact, None);
                emit("predicted_l2", pr.predicted, None);
            }
            (crate::graph::Family::Hypercube { d }, Lp::L2) => {
                let v = hypercube_avg_l2_exact(d, t)?;
                emit("avg_l2", v.value, None);
                emit("rw_l2", crate::duality::hypercube_rw_l2_dirac(d, t), None);
            }
            _ => {
                let est = mean_lp(g, &xi, t, lp, replicas, seed)?;
                emit("mean_lp", est.mean, Some(est.stderr));
            }
        }
    }
    Ok(rows)
}

/// Parses `args` (program name first), runs the command, and writes CSV to
/// `out` unless `--out` redirects it. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match try_run(args.into_iter().map(Into::into).collect(), out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{}", e.message.trim_end());
            e.code
        }
    }
}

fn try_run(args: Vec<OsString>, out: &mut dyn Write) -> std::result::Result<(), CliError> {
    let args = expand_config(args)?;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            if code == EXIT_OK {
                let _ = write!(out, "{e}");
                return Ok(());
            }
            return Err(CliError { code, message: e.to_string() });
        }
    };
    let common = cli.command.common();
    let seed = resolve_seed(common.seed)?;
    let rows = match common.threads {
        Some(0) => return Err(config_error("--threads must be at least 1")),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| config_error(format!("--threads: {e}")))?;
            pool.install(|| run_command(&cli.command, seed))?
        }
        None => run_command(&cli.command, seed)?,
    };
    let mut text = String::with_capacity(64 * (rows.len() + 1));
    text.push_str(HEADER);
    text.push('\n');
    for r in &rows {
        text.push_str(&r.to_csv());
        text.push('\n');
    }
    let io = |e: std::io::Error| CliError { code: EXIT_CONFIG, message: format!("--out: {e}") };
    match &common.out {
        Some(path) => std::fs::write(path, text).map_err(io),
        None => out.write_all(text.as_bytes()).map_err(io),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let mut full = vec!["avgproc"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("a", "-4:4:1").unwrap().len(), 9);
        assert_eq!(parse_grid("a", "-3:3:0.5").unwrap().len(), 13);
        assert_eq!(parse_grid("a", "0:1:0.3").unwrap(), vec![0.0, 0.3, 0.6, 0.8999999999999999]);
        assert_eq!(parse_grid("t", "0.5,1,2").unwrap(), vec![0.5, 1.0, 2.0]);
        assert!(parse_grid("t", "1:0:1").is_err());
        assert!(parse_grid("t", "x").is_err());
    }

    #[test]
    fn record_format() {
        let mut r = Record::new("x", "hypercube", "avg_l2", 0.1, 3);
        r.d = Some(4);
        assert_eq!(r.to_csv(), "x,hypercube,,4,,,,,avg_l2,1.0000000000000001e-1,,,3");
        assert_eq!(HEADER.split(',').count(), r.to_csv().split(',').count());
    }

    #[test]
    fn exact_bipartite_rows() {
        let (code, out, _) = run_capture(&["exact-bipartite", "--m", "500", "--n", "1000", "--a-grid", "-4:4:1"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], HEADER);
        assert_eq!(lines.len(), 10);
    }

    #[test]
    fn early_offsets_clamp_to_zero() {
        let (code, out, _) = run_capture(&["hypercube-exact", "--d", "8,12,16", "--a-grid", "-3:3:0.5"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 40);
        let first: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
        assert_eq!((first[5], first[6]), ("0.0000000000000000e0", "-3.0000000000000000e0"));
        assert!((first[9].parse::<f64>().unwrap() / 255.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run_capture(&["exact-bipartite", "--m", "0", "--n", "10", "--t", "1"]).0, EXIT_CONFIG);
        assert_eq!(run_capture(&["hypercube-exact", "--d", "8"]).0, EXIT_CONFIG);
        assert_eq!(run_capture(&["hypercube-exact", "--d", "8", "--t", "1", "--a-grid", "0"]).0, EXIT_CONFIG);
        assert_eq!(run_capture(&["simulate", "--graph", "complete", "--n", "5", "--a-grid", "0"]).0, EXIT_CONFIG);
        let (code, _, err) = run_capture(&["hardy", "--d", "10", "--bogus", "1"]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(err.contains("--bogus"));
        assert_eq!(run_capture(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn config_file_and_override() {
        let dir = std::env::temp_dir().join(format!("avgproc-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.txt");
        std::fs::write(&path, "# comment\nd=8\nt=1,2\nseed=5\n").unwrap();
        let cfg = format!("--config={}", path.display());
        let (code, out, _) = run_capture(&["hypercube-exact", &cfg]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 3);
        assert!(out.lines().nth(1).unwrap().ends_with(",5"));
        let (_, out, _) = run_capture(&["hypercube-exact", &cfg, "--seed", "9", "--t", "1"]);
        assert_eq!(out.lines().count(), 2);
        assert!(out.lines().nth(1).unwrap().ends_with(",9"));
        std::fs::write(&path, "nonsense=1\n").unwrap();
        let (code, _, err) = run_capture(&["hardy", "--d", "4", &cfg]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(err.contains("nonsense"));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
