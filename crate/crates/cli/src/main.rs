use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use toml::{Table, Value};

use osclab::expsum::{block_sums, resonance_points, write_block_csv, BlockConfig, Perturbation};
use osclab::kruger::{kruger_report, smallest_passing_k, write_kruger_csv, KrugerParams};
use osclab::operator::BoundaryCondition;
use osclab::pruefer::evolve_spec;
use osclab::spectra::{classify_point, sweep, write_sweep_csv, SweepConfig, SweepNode, SweepRow, SweepStats, Thresholds};
use osclab::{Mode, PhaseSpec, PotentialSpec};

#[derive(Parser, Debug)]
#[command(name = "osclab", version, about = "Discrete Schrödinger operators with decaying oscillating potentials")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,

    /// Potential specification (TOML)
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// Output CSV; the manifest goes to <out>.manifest.toml
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of sites
    #[arg(long = "N", global = true, default_value_t = 1000)]
    n: usize,
    /// Quasi-momentum, E = 2 cos k
    #[arg(long, global = true, default_value_t = 1.0, allow_negative_numbers = true)]
    k: f64,
    /// Boundary parameter, ψ_0 = μ ψ_1
    #[arg(long, global = true, default_value_t = 0.0, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Validated)]
    mode: ModeArg,
    /// Worker threads (default: available cores; OSC_DETERMINISTIC=1 forces 1)
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Validated,
    Exploratory,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Validated => Mode::Validated,
            ModeArg::Exploratory => Mode::Exploratory,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Prüfer trajectory of the spec potential
    Evolve,
    /// Resonance block sums against their predicted bounds
    Expsum(ExpsumArgs),
    /// Resonance points Y_l of πωx^β
    Resonances(ResonanceArgs),
    /// Almost Mathieu approximation intervals on dyadic blocks
    Kruger(KrugerArgs),
    /// Regime label of one parameter point
    Classify(ClassifyArgs),
    /// Regime labels over a grid
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct ExpsumArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    omega: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// Coefficient of the rough perturbation ζ n^{1-γ}/(1-γ)
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    zeta: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// ℓ¹ norm entering the bound
    #[arg(long, default_value_t = 0.0)]
    v_l1: f64,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, default_value_t = 1)]
    l_min: u64,
    #[arg(long)]
    l_max: u64,
}

#[derive(Args, Debug)]
struct ResonanceArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    omega: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 1)]
    l_min: u64,
    #[arg(long)]
    l_max: u64,
}

#[derive(Args, Debug)]
struct KrugerArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    omega: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    omegaprime: f64,
    #[arg(long)]
    k_min: u32,
    #[arg(long)]
    k_max: u32,
    /// Overrides δ = (β-1)/2
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    omega: f64,
    /// Thresholds as TOML (same keys as the sweep `[thresholds]` table)
    #[arg(long)]
    thresholds: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Grid definition (TOML)
    #[arg(long)]
    config: PathBuf,
}

/// A failed run: exit 1 for rejected input, 2 for a failed computation.
enum Failure {
    Input(String),
    Numeric(String),
}

impl From<osclab::Error> for Failure {
    fn from(e: osclab::Error) -> Self {
        if e.is_validation() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numeric(format!("IO: {e}"))
    }
}

type Run<T> = std::result::Result<T, Failure>;

/// Parameters and results recorded next to each output.
struct Manifest {
    params: Table,
    results: Table,
}

impl Manifest {
    fn new() -> Self {
        Self { params: Table::new(), results: Table::new() }
    }

    fn param(&mut self, key: &str, v: impl Into<Value>) {
        self.params.insert(key.into(), v.into());
    }

    fn result(&mut self, key: &str, v: impl Into<Value>) {
        self.results.insert(key.into(), v.into());
    }
}

fn read_text(path: &Path) -> Run<String> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("IO: {}: {e}", path.display())))
}

fn out_path(cli: &Cli) -> Run<&Path> {
    cli.out.as_deref().ok_or_else(|| Failure::Input("MISSING: --out is required".into()))
}

fn create(path: &Path) -> Run<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn load_spec(cli: &Cli, m: &mut Manifest) -> Run<PotentialSpec> {
    let path = cli.spec.as_deref().ok_or_else(|| Failure::Input("MISSING: --spec is required".into()))?;
    let text = read_text(path)?;
    let spec = PotentialSpec::from_toml(&text, cli.mode.into()).map_err(Failure::Input)?;
    m.param("spec", path.display().to_string());
    let raw: Table = toml::from_str(&text).map_err(|e| Failure::Input(format!("PARSE: {e}")))?;
    m.results.insert("potential".into(), Value::Table(raw));
    Ok(spec)
}

fn evolve(cli: &Cli, m: &mut Manifest) -> Run<()> {
    let spec = load_spec(cli, m)?;
    let traj = evolve_spec(&spec, BoundaryCondition::normalized(cli.mu), cli.k, cli.n)?;
    let mut w = create(out_path(cli)?)?;
    traj.write_csv(&mut w)?;
    w.flush()?;
    let summary: Table = toml::from_str(&traj.summary().to_toml()).expect("summary is valid TOML");
    m.results.insert("summary".into(), Value::Table(summary));
    Ok(())
}

fn expsum(cli: &Cli, a: &ExpsumArgs, m: &mut Manifest) -> Run<()> {
    let phase = PhaseSpec::pure(a.omega, a.beta);
    let h = if a.zeta == 0.0 { Perturbation::None } else { Perturbation::Rough { zeta: a.zeta, gamma: a.gamma } };
    if a.l_min == 0 || a.l_max < a.l_min {
        return Err(Failure::Input(format!("RANGE: need 1 <= l_min <= l_max (got {}, {})", a.l_min, a.l_max)));
    }
    let ls: Vec<u64> = (a.l_min..=a.l_max).collect();
    let cfg = BlockConfig { rho: a.rho, gamma: a.gamma, v_l1: a.v_l1, eps: a.eps };
    let rows = block_sums(&phase, &h, &ls, cfg)?;
    let mut w = create(out_path(cli)?)?;
    write_block_csv(&rows, &mut w)?;
    w.flush()?;
    for (k, v) in [("omega", a.omega), ("beta", a.beta), ("rho", a.rho), ("zeta", a.zeta), ("gamma", a.gamma)] {
        m.param(k, v);
    }
    m.param("v_l1", a.v_l1);
    m.param("eps", a.eps);
    m.param("l_min", a.l_min as i64);
    m.param("l_max", a.l_max as i64);
    let worst = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    m.result("max_ratio", worst);
    Ok(())
}

fn resonances(cli: &Cli, a: &ResonanceArgs, m: &mut Manifest) -> Run<()> {
    let pts = resonance_points(&PhaseSpec::pure(a.omega, a.beta), a.l_min, a.l_max)?;
    let mut w = create(out_path(cli)?)?;
    writeln!(w, "l,Y")?;
    for p in &pts {
        writeln!(w, "{},{:.16e}", p.l, p.y)?;
    }
    w.flush()?;
    m.param("omega", a.omega);
    m.param("beta", a.beta);
    m.param("l_min", a.l_min as i64);
    m.param("l_max", a.l_max as i64);
    Ok(())
}

fn kruger(cli: &Cli, a: &KrugerArgs, m: &mut Manifest) -> Run<()> {
    if a.k_max < a.k_min {
        return Err(Failure::Input(format!("RANGE: k_max {} < k_min {}", a.k_max, a.k_min)));
    }
    let p = KrugerParams { delta: a.delta, ..KrugerParams::new(a.lambda, a.omega, a.alpha, a.beta, a.omegaprime) };
    let ks: Vec<u32> = (a.k_min..=a.k_max).collect();
    let rec = kruger_report(&p, &ks);
    let mut w = create(out_path(cli)?)?;
    write_kruger_csv(&rec, &mut w)?;
    w.flush()?;
    for (k, v) in [("lambda", a.lambda), ("omega", a.omega), ("alpha", a.alpha), ("beta", a.beta), ("omegaprime", a.omegaprime)] {
        m.param(k, v);
    }
    m.param("delta", p.delta());
    m.param("eps", p.eps());
    m.param("k_min", a.k_min as i64);
    m.param("k_max", a.k_max as i64);
    let mut failures = Vec::new();
    for r in &rec {
        if let Err(e) = &r.outcome {
            eprintln!("k = {} side {}: {e}", r.k, r.side.as_str());
            failures.push(Value::String(format!("{}{}: {}", r.k, r.side.as_str(), e.code())));
        }
    }
    m.result("failures", failures);
    if let Some(k) = smallest_passing_k(&rec) {
        m.result("smallest_passing_k", k as i64);
    }
    // a report without a single successful build is a failed run
    if let Some(Err(e)) = rec.first().map(|r| &r.outcome) {
        if rec.iter().all(|r| r.outcome.is_err()) {
            return Err(e.clone().into());
        }
    }
    Ok(())
}

fn thresholds_table(th: &Thresholds) -> Value {
    Value::Table(toml::from_str(&toml::to_string(th).expect("thresholds serialize")).expect("valid TOML"))
}

fn classify(cli: &Cli, a: &ClassifyArgs, m: &mut Manifest) -> Run<()> {
    let th: Thresholds = match &a.thresholds {
        Some(p) => toml::from_str(&read_text(p)?).map_err(|e| Failure::Input(format!("PARSE: {e}")))?,
        None => Thresholds::default(),
    };
    let c = classify_point(a.alpha, a.beta, a.lambda, a.omega, cli.k, cli.mu, cli.n, &th)?;
    let node = SweepNode { alpha: a.alpha, beta: a.beta, lambda: a.lambda, omega: a.omega, k: cli.k, mu: cli.mu, n: cli.n };
    let spec = PotentialSpec::canonical(a.lambda, a.omega, a.alpha, a.beta, Mode::Exploratory).map_err(osclab::Error::from)?;
    let subord_ratio = if cli.n >= 10 { osclab::spectra::subordinacy_ratio(&spec, cli.k, cli.n)? } else { f64::NAN };
    let row = SweepRow { node, outcome: Ok(SweepStats { evidence: c.evidence, subord_ratio }) };
    let mut w = create(out_path(cli)?)?;
    write_sweep_csv(&[row], &mut w)?;
    w.flush()?;
    for (k, v) in [("alpha", a.alpha), ("beta", a.beta), ("lambda", a.lambda), ("omega", a.omega)] {
        m.param(k, v);
    }
    m.params.insert("thresholds".into(), thresholds_table(&th));
    m.result("label", c.evidence.label.as_str());
    m.result("decay", c.evidence.decay);
    m.result("monotone", c.evidence.monotone);
    let osc: Vec<Value> = c.report.osc().into_iter().map(Value::from).collect();
    m.result("osc", osc);
    Ok(())
}

fn run_sweep(cli: &Cli, a: &SweepArgs, m: &mut Manifest) -> Run<()> {
    let text = read_text(&a.config)?;
    let cfg = SweepConfig::from_toml(&text).map_err(Failure::Input)?;
    let rows = sweep(&cfg);
    let mut w = create(out_path(cli)?)?;
    write_sweep_csv(&rows, &mut w)?;
    w.flush()?;
    m.param("config", a.config.display().to_string());
    let grid: Table = toml::from_str(&cfg.to_toml()).expect("config is valid TOML");
    m.params.insert("grid".into(), Value::Table(grid));
    m.result("rows", rows.len() as i64);
    m.result("failed_rows", rows.iter().filter(|r| r.outcome.is_err()).count() as i64);
    Ok(())
}

fn jobs(cli: &Cli) -> usize {
    let forced = std::env::var("OSC_DETERMINISTIC").is_ok_and(|v| v == "1");
    if forced {
        return 1;
    }
    cli.jobs
        .filter(|&j| j > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn write_manifest(cli: &Cli, name: &str, jobs: usize, wall: f64, m: Manifest) -> Run<()> {
    let Some(out) = &cli.out else { return Ok(()) };
    let mut run = Table::new();
    run.insert("tool".into(), "osclab".into());
    run.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    run.insert("subcommand".into(), name.into());
    run.insert("output".into(), out.display().to_string().into());
    run.insert("N".into(), (cli.n as i64).into());
    run.insert("k".into(), cli.k.into());
    run.insert("mu".into(), cli.mu.into());
    run.insert("mode".into(), format!("{:?}", cli.mode).to_lowercase().into());
    run.insert("jobs".into(), (jobs as i64).into());
    run.insert("wall_time_s".into(), wall.into());
    let mut doc = Table::new();
    doc.insert("run".into(), Value::Table(run));
    doc.insert("params".into(), Value::Table(m.params));
    doc.insert("results".into(), Value::Table(m.results));
    let mut path = out.clone().into_os_string();
    path.push(".manifest.toml");
    fs::write(PathBuf::from(path), toml::to_string(&doc).expect("manifest serializes"))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = jobs(&cli);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    };
    let start = Instant::now();
    let mut m = Manifest::new();
    let (name, res) = pool.install(|| match &cli.cmd {
        Command::Evolve => ("evolve", evolve(&cli, &mut m)),
        Command::Expsum(a) => ("expsum", expsum(&cli, a, &mut m)),
        Command::Resonances(a) => ("resonances", resonances(&cli, a, &mut m)),
        Command::Kruger(a) => ("kruger", kruger(&cli, a, &mut m)),
        Command::Classify(a) => ("classify", classify(&cli, a, &mut m)),
        Command::Sweep(a) => ("sweep", run_sweep(&cli, a, &mut m)),
    });
    let res = res.and_then(|()| write_manifest(&cli, name, jobs, start.elapsed().as_secs_f64(), m));
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
