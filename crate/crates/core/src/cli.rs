//! Command-line front end: configuration merging, artifact emission and
//! exit codes. The `splitree` binary is a thin wrapper around [`main`].

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::epidemic::{self, FitOptions, OutbreakDataset, StayDistribution};
use crate::error::{config, Error, Result};
use crate::laws::DetectionLaw;
use crate::levy::{LaplaceExponent, LifespanMeasure, LifetimeLaw};
use crate::rng::run_replicates;
use crate::scale::{default_horizon, ScaleTable, DEFAULT_STEP};
use crate::tree::{Caps, DetectionOutcome, RunStatus, TreeSimulator};
use crate::verify::{self, Battery, Report};

pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const FIT_SCHEMA_VERSION: u32 = 1;

// stdout may be a closed pipe; artifacts matter more than the summary
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

pub const SEED_ENV: &str = "SPLITREE_SEED";

pub const EXIT_OK: u8 = 0;
pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_VERIFICATION: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "splitree", version, about = "Splitting trees stopped at the first clock ring")]
pub struct Cli {
    /// JSON file with settings; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed. Falls back to the config file, then SPLITREE_SEED, then the OS.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory for artifacts and the manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate trees until the first clock ring.
    Simulate(SimulateArgs),
    /// Run a statistical verification battery.
    Verify(VerifyArgs),
    /// Tabulate the scale function.
    Scale(ScaleArgs),
    /// Tabulate detection laws.
    Law(LawArgs),
    /// Fit birth and detection rates to outbreak data.
    Fit(FitArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Lifetime law, `exp:<rate>` or `table:<csv>`.
    #[arg(long)]
    lifetime: Option<String>,
    /// Birth rate.
    #[arg(long)]
    b: Option<f64>,
    /// Detection rate.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Grid step of the scale table.
    #[arg(long)]
    h: Option<f64>,
    /// Right end of the scale table.
    #[arg(long)]
    xmax: Option<f64>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Length-of-stay law; switches to the hospital model and derives the lifetime law from it.
    #[arg(long, conflicts_with = "lifetime")]
    los: Option<String>,
    /// Number of independent trees (or outbreaks with `--los`).
    #[arg(long)]
    reps: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum BatteryKind {
    Vervaat,
    Laws,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(value_enum)]
    battery: BatteryKind,
    #[command(flatten)]
    model: ModelArgs,
    /// Trees simulated on each side of the comparison.
    #[arg(long)]
    reps: Option<u64>,
    /// Family-wise significance level.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Debug, Args)]
struct ScaleArgs {
    /// Lifetime law, `exp:<rate>` or `table:<csv>`.
    #[arg(long)]
    lifetime: Option<String>,
    /// Birth rate.
    #[arg(long)]
    b: Option<f64>,
    /// Killing rate of the scale function.
    #[arg(long)]
    q: Option<f64>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum LawKind {
    Nt,
    T,
    Age,
}

#[derive(Debug, Args)]
struct LawArgs {
    #[arg(value_enum)]
    law: LawKind,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Largest count for `nt`.
    #[arg(long)]
    nmax: Option<u64>,
    /// Right end of the time or age grid.
    #[arg(long)]
    ymax: Option<f64>,
    /// Number of grid points for `t` and `age`.
    #[arg(long)]
    points: Option<usize>,
    /// Observation window for `age`; omit for plain detection.
    #[arg(long)]
    window: Option<f64>,
    /// Report joint laws with `{T < ∞}` instead of conditional ones.
    #[arg(long)]
    joint: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Outbreak CSV with columns outbreak_id, y and optionally hospital.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Length-of-stay law, `exp:<rate>` or `table:<csv>`.
    #[arg(long)]
    los: Option<String>,
    /// Fit all outbreaks together (default).
    #[arg(long, conflicts_with = "per_hospital")]
    pooled: bool,
    /// Fit each hospital separately and pool the detection rate.
    #[arg(long)]
    per_hospital: bool,
    /// Skip profile-likelihood intervals.
    #[arg(long)]
    no_intervals: bool,
}

/// Every setting a run can take. The config file uses the same keys; the
/// manifest echoes the resolved values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lifetime: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub los: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xmax: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nmax: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ymax: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_hospital: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intervals: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text).map_err(|e| config(format!("{}: {e}", path.display())))
    }

    /// Field-wise `self` over `base`.
    fn over(self, base: RunConfig) -> RunConfig {
        RunConfig {
            command: self.command.or(base.command),
            lifetime: self.lifetime.or(base.lifetime),
            los: self.los.or(base.los),
            b: self.b.or(base.b),
            delta: self.delta.or(base.delta),
            q: self.q.or(base.q),
            h: self.h.or(base.h),
            xmax: self.xmax.or(base.xmax),
            reps: self.reps.or(base.reps),
            alpha: self.alpha.or(base.alpha),
            nmax: self.nmax.or(base.nmax),
            ymax: self.ymax.or(base.ymax),
            points: self.points.or(base.points),
            window: self.window.or(base.window),
            joint: self.joint.or(base.joint),
            data: self.data.or(base.data),
            per_hospital: self.per_hospital.or(base.per_hospital),
            intervals: self.intervals.or(base.intervals),
            seed: self.seed.or(base.seed),
            threads: self.threads.or(base.threads),
            out: self.out.or(base.out),
        }
    }

    fn lifetime_law(&self) -> Result<LifetimeLaw> {
        LifetimeLaw::parse(self.lifetime.as_deref().unwrap_or("exp:1"))
    }

    fn measure(&self) -> Result<LifespanMeasure> {
        LifespanMeasure::new(self.b.unwrap_or(0.8), self.lifetime_law()?)
    }

    fn delta(&self) -> f64 {
        self.delta.unwrap_or(0.3)
    }

    fn step(&self) -> f64 {
        self.h.unwrap_or(DEFAULT_STEP)
    }

    fn reps(&self) -> u64 {
        self.reps.unwrap_or(100_000)
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("splitree-out"))
    }

    /// Rejects values no command could use.
    fn validate(&self) -> Result<()> {
        let positive = [("b", self.b), ("delta", self.delta), ("h", self.h), ("xmax", self.xmax), ("alpha", self.alpha)];
        for (name, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(config(format!("{name} must be positive and finite, got {v}")));
                }
            }
        }
        if let Some(q) = self.q {
            if !(q >= 0.0 && q.is_finite()) {
                return Err(config(format!("q must be nonnegative and finite, got {q}")));
            }
        }
        if self.alpha.is_some_and(|a| a >= 1.0) {
            return Err(config("alpha must lie in (0, 1)"));
        }
        if self.reps == Some(0) || self.points == Some(0) || self.threads == Some(0) {
            return Err(config("reps, points and threads must be at least 1"));
        }
        Ok(())
    }
}

fn flags_of(cli: &Cli) -> RunConfig {
    let mut c = RunConfig { seed: cli.seed, threads: cli.threads, out: cli.out.clone(), ..Default::default() };
    let model = |c: &mut RunConfig, m: &ModelArgs| {
        c.lifetime = m.lifetime.clone();
        c.b = m.b;
        c.delta = m.delta;
    };
    match &cli.command {
        Command::Simulate(a) => {
            c.command = Some("simulate".into());
            model(&mut c, &a.model);
            c.los = a.los.clone();
            c.reps = a.reps;
        }
        Command::Verify(a) => {
            let name = match a.battery {
                BatteryKind::Vervaat => "verify vervaat",
                BatteryKind::Laws => "verify laws",
            };
            c.command = Some(name.into());
            model(&mut c, &a.model);
            c.reps = a.reps;
            c.alpha = a.alpha;
        }
        Command::Scale(a) => {
            c.command = Some("scale".into());
            c.lifetime = a.lifetime.clone();
            c.b = a.b;
            c.q = a.q;
            c.h = a.grid.h;
            c.xmax = a.grid.xmax;
        }
        Command::Law(a) => {
            let name = match a.law {
                LawKind::Nt => "law nt",
                LawKind::T => "law t",
                LawKind::Age => "law age",
            };
            c.command = Some(name.into());
            model(&mut c, &a.model);
            c.h = a.grid.h;
            c.xmax = a.grid.xmax;
            c.nmax = a.nmax;
            c.ymax = a.ymax;
            c.points = a.points;
            c.window = a.window;
            c.joint = a.joint.then_some(true);
        }
        Command::Fit(a) => {
            c.command = Some("fit".into());
            c.data = a.data.clone();
            c.los = a.los.clone();
            c.per_hospital = if a.per_hospital {
                Some(true)
            } else {
                a.pooled.then_some(false)
            };
            c.intervals = a.no_intervals.then_some(false);
        }
    }
    c
}

/// Flag, then config file, then `SPLITREE_SEED`, then the OS.
fn resolve_seed(settings: &RunConfig) -> Result<u64> {
    if let Some(s) = settings.seed {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| config(format!("{SEED_ENV}={v} is not an unsigned integer"))),
        Err(_) => Ok(rand::random()),
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct Manifest {
    schema_version: u32,
    command: String,
    version: String,
    seed: u64,
    threads: usize,
    config: RunConfig,
    artifacts: Vec<String>,
    wall_time_seconds: f64,
}

/// Result of a command that ran to completion.
struct Outcome {
    artifacts: Vec<String>,
    /// False when a verification battery rejected.
    verified: bool,
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ExitCode::from(run(&cli))
}

/// Runs a parsed command line and returns the exit status.
pub fn run(cli: &Cli) -> u8 {
    match execute(cli) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VERIFICATION,
        Err(e) => {
            let report = serde_json::json!({ "error": { "category": e.category(), "message": e.to_string() } });
            eprintln!("{report}");
            match e {
                Error::Config(_) | Error::Domain(_) => EXIT_USAGE,
                _ => EXIT_RUNTIME,
            }
        }
    }
}

fn execute(cli: &Cli) -> Result<bool> {
    let started = Instant::now();
    let file = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let mut config = flags_of(cli).over(file);
    config.validate()?;
    let seed = resolve_seed(&config)?;
    config.seed = Some(seed);
    say!("seed={seed}");

    let threads = config.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Unsupported(format!("cannot start worker pool: {e}")))?;

    let out = config.out_dir();
    fs::create_dir_all(&out)?;
    let outcome = pool.install(|| match &cli.command {
        Command::Simulate(_) => simulate(&config, seed, &out),
        Command::Verify(a) => verify_cmd(&config, a.battery, seed, &out),
        Command::Scale(_) => scale(&config, &out),
        Command::Law(a) => law(&config, a.law, &out),
        Command::Fit(_) => fit(&config, &out),
    })?;

    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        command: config.command.clone().unwrap_or_default(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        threads,
        config,
        artifacts: outcome.artifacts,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(outcome.verified)
}

/// Writes rows and reads them back, failing if the file does not reproduce them.
pub fn write_csv<T>(path: &Path, rows: &[T]) -> Result<()>
where
    T: Serialize + DeserializeOwned + PartialEq,
{
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    drop(w);
    let back: Vec<T> = csv::Reader::from_path(path)?.deserialize().collect::<std::result::Result<_, _>>()?;
    if back != rows {
        return Err(Error::Integrity(format!("{} does not round-trip", path.display())));
    }
    Ok(())
}

/// JSON counterpart of [`write_csv`].
pub fn write_json<T>(path: &Path, value: &T) -> Result<()>
where
    T: Serialize + DeserializeOwned + PartialEq,
{
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, format!("{text}\n"))?;
    let back: T = serde_json::from_str(&fs::read_to_string(path)?)?;
    if &back != value {
        return Err(Error::Integrity(format!("{} does not round-trip", path.display())));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct ReplicateRow {
    schema_version: u32,
    replicate: u64,
    detected: bool,
    status: String,
    #[serde(rename = "T")]
    time: Option<f64>,
    #[serde(rename = "N_T")]
    count: u64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct CarrierRow {
    schema_version: u32,
    replicate: u64,
    #[serde(rename = "A")]
    age: f64,
    #[serde(rename = "R")]
    residual: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct HospitalCarrierRow {
    schema_version: u32,
    replicate: u64,
    #[serde(rename = "A")]
    age: f64,
    #[serde(rename = "R")]
    residual: f64,
    #[serde(rename = "U")]
    before: f64,
    #[serde(rename = "H")]
    stay: f64,
}

fn status_name(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Detected => "detected",
        RunStatus::Extinct => "extinct",
        RunStatus::HorizonReached => "horizon",
        RunStatus::CappedIndividuals => "capped_individuals",
        RunStatus::CappedTime => "capped_time",
    }
}

fn simulate(config: &RunConfig, seed: u64, out: &Path) -> Result<Outcome> {
    let b = config.b.unwrap_or(0.8);
    let delta = config.delta();
    let reps = config.reps();
    let caps = Caps::default();
    let stay = config.los.as_deref().map(StayDistribution::parse).transpose()?;
    let outcomes: Vec<DetectionOutcome> = match &stay {
        Some(stay) => {
            let sim = TreeSimulator::new(b, stay)?.with_clock(delta)?.with_caps(caps)?;
            run_replicates(seed, 0, reps, |_, rng| sim.run(rng).1)
        }
        None => {
            let law = config.lifetime_law()?;
            let sim = TreeSimulator::new(b, &law)?.with_clock(delta)?.with_caps(caps)?;
            run_replicates(seed, 0, reps, |_, rng| sim.run(rng).1)
        }
    };

    let replicates: Vec<ReplicateRow> = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| ReplicateRow {
            schema_version: CSV_SCHEMA_VERSION,
            replicate: i as u64,
            detected: o.detected(),
            status: status_name(o.status).into(),
            time: o.detected().then_some(o.time),
            count: o.size() as u64,
        })
        .collect();
    write_csv(&out.join("replicates.csv"), &replicates)?;
    let mut artifacts = vec!["replicates.csv".to_string(), "carriers.csv".to_string()];

    let carriers = outcomes.iter().enumerate().flat_map(|(i, o)| o.carriers.iter().map(move |c| (i as u64, c)));
    if stay.is_some() {
        let rows: Vec<HospitalCarrierRow> = carriers
            .map(|(i, c)| {
                let before = c.mark.unwrap_or(0.0);
                HospitalCarrierRow {
                    schema_version: CSV_SCHEMA_VERSION,
                    replicate: i,
                    age: c.age,
                    residual: c.residual,
                    before,
                    stay: before + c.age,
                }
            })
            .collect();
        write_csv(&out.join("carriers.csv"), &rows)?;
        let dataset = OutbreakDataset {
            outbreaks: outcomes
                .iter()
                .enumerate()
                .filter(|(_, o)| o.detected())
                .map(|(i, o)| epidemic::Outbreak {
                    id: i.to_string(),
                    hospital: None,
                    durations: o.carriers.iter().map(|c| c.mark.unwrap_or(0.0) + c.age).collect(),
                })
                .collect(),
        };
        let path = out.join("outbreaks.csv");
        dataset.to_csv(fs::File::create(&path)?)?;
        if !dataset.outbreaks.is_empty() && OutbreakDataset::from_csv(&path)? != dataset {
            return Err(Error::Integrity(format!("{} does not round-trip", path.display())));
        }
        artifacts.push("outbreaks.csv".into());
    } else {
        let rows: Vec<CarrierRow> = carriers
            .map(|(i, c)| CarrierRow { schema_version: CSV_SCHEMA_VERSION, replicate: i, age: c.age, residual: c.residual })
            .collect();
        write_csv(&out.join("carriers.csv"), &rows)?;
    }

    let detected = replicates.iter().filter(|r| r.detected).count();
    let capped = outcomes.iter().filter(|o| o.status.is_capped()).count();
    say!("replicates={reps} detected={detected} capped={capped}");
    Ok(Outcome { artifacts, verified: true })
}

fn verify_cmd(config: &RunConfig, kind: BatteryKind, seed: u64, out: &Path) -> Result<Outcome> {
    let battery = Battery {
        measure: config.measure()?,
        delta: config.delta(),
        replicates: config.reps(),
        seed,
        alpha: config.alpha.unwrap_or(0.01),
        caps: Caps::default(),
    };
    let report: Report = match kind {
        BatteryKind::Vervaat => verify::vervaat_battery(&battery)?,
        BatteryKind::Laws => verify::laws_battery(&battery)?,
    };
    write_json(&out.join("report.json"), &report)?;
    for c in &report.checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        match c.p_value {
            Some(p) => say!("{verdict} {} statistic={:.6} p={:.4} alpha={}", c.name, c.statistic, p, c.threshold),
            None => say!("{verdict} {} z={:.3} limit={}", c.name, c.statistic, c.threshold),
        }
    }
    Ok(Outcome { artifacts: vec!["report.json".into()], verified: report.pass })
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[allow(non_snake_case)]
struct ScaleRow {
    schema_version: u32,
    x: f64,
    W_q: f64,
    int_W_q: f64,
    G_q: f64,
}

fn scale(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let exponent = LaplaceExponent::new(config.measure()?);
    let q = config.q.unwrap_or(0.0);
    let x_max = config.xmax.unwrap_or_else(|| default_horizon(&exponent));
    let table = ScaleTable::build(&exponent, q, config.step(), x_max)?;
    let rows: Vec<ScaleRow> = table
        .grid()
        .map(|x| {
            Ok(ScaleRow {
                schema_version: CSV_SCHEMA_VERSION,
                x,
                W_q: table.w(x)?,
                int_W_q: table.integral(x)?,
                G_q: table.g(x)?,
            })
        })
        .collect::<Result<_>>()?;
    write_csv(&out.join("scale.csv"), &rows)?;
    say!("rows={} x_max={x_max}", rows.len());
    Ok(Outcome { artifacts: vec!["scale.csv".into()], verified: true })
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct CountRow {
    schema_version: u32,
    n: u64,
    pmf: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct TimeRow {
    schema_version: u32,
    y: f64,
    cdf: f64,
    density: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct AgeRow {
    schema_version: u32,
    window: Option<f64>,
    a: f64,
    density: f64,
}

fn grid(end: f64, points: usize) -> impl Iterator<Item = f64> {
    let last = points.saturating_sub(1).max(1) as f64;
    (0..points).map(move |i| end * i as f64 / last)
}

fn law(config: &RunConfig, kind: LawKind, out: &Path) -> Result<Outcome> {
    let exponent = LaplaceExponent::new(config.measure()?);
    let ymax = config.ymax.unwrap_or(10.0);
    let window = config.window.unwrap_or(f64::INFINITY);
    if !(ymax > 0.0) || !(window > 0.0) {
        return Err(config_error("ymax and window must be positive"));
    }
    let reach = if window.is_finite() { ymax.max(window) } else { ymax };
    let x_max = config.xmax.unwrap_or_else(|| default_horizon(&exponent).max(reach));
    if x_max < reach {
        return Err(config_error("xmax must cover the requested grid"));
    }
    let law = DetectionLaw::new(&exponent, config.delta(), config.step(), x_max)?;
    let joint = config.joint.unwrap_or(false);
    let points = config.points.unwrap_or(201);
    let name = match kind {
        LawKind::Nt => {
            let rows: Vec<CountRow> = (1..=config.nmax.unwrap_or(30))
                .map(|n| {
                    let pmf = if joint { law.pmf_nt(n)? } else { law.pmf_nt_given_detection(n)? };
                    Ok(CountRow { schema_version: CSV_SCHEMA_VERSION, n, pmf })
                })
                .collect::<Result<_>>()?;
            write_csv(&out.join("law_nt.csv"), &rows)?;
            "law_nt.csv"
        }
        LawKind::T => {
            let norm = if joint { 1.0 } else { law.detection_probability() };
            let rows: Vec<TimeRow> = grid(ymax, points)
                .map(|y| {
                    Ok(TimeRow {
                        schema_version: CSV_SCHEMA_VERSION,
                        y,
                        cdf: law.cdf_t(y)? / norm,
                        density: law.density_t(y)? / norm,
                    })
                })
                .collect::<Result<_>>()?;
            write_csv(&out.join("law_t.csv"), &rows)?;
            "law_t.csv"
        }
        LawKind::Age => {
            let end = if window.is_finite() { ymax.min(window) } else { ymax };
            let rows: Vec<AgeRow> = grid(end, points)
                .map(|a| {
                    Ok(AgeRow {
                        schema_version: CSV_SCHEMA_VERSION,
                        window: window.is_finite().then_some(window),
                        a,
                        density: law.age_density(window, a)?,
                    })
                })
                .collect::<Result<_>>()?;
            write_csv(&out.join("law_age.csv"), &rows)?;
            "law_age.csv"
        }
    };
    say!("wrote {name}");
    Ok(Outcome { artifacts: vec![name.into()], verified: true })
}

// `config` is shadowed by the run configuration in the command bodies
fn config_error(msg: &str) -> Error {
    Error::Config(msg.into())
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct FitReport {
    schema_version: u32,
    los: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimate: Option<epidemic::EstimationResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_hospital: Option<epidemic::PooledEstimate>,
}

fn fit(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let data_path = config.data.as_ref().ok_or_else(|| config_error("fit needs --data"))?;
    let los = config.los.clone().ok_or_else(|| config_error("fit needs --los"))?;
    let stay = StayDistribution::parse(&los)?;
    let data = OutbreakDataset::from_csv(data_path)?;
    let report = if config.per_hospital.unwrap_or(false) {
        let pooled = epidemic::fit_per_hospital(&data, &stay)?;
        if let Some(d) = pooled.delta_pooled {
            say!("delta_pooled={d:.6} hospitals={}", pooled.hospitals.len());
        }
        FitReport { schema_version: FIT_SCHEMA_VERSION, los, estimate: None, per_hospital: Some(pooled) }
    } else {
        let options = FitOptions { intervals: config.intervals.unwrap_or(true) };
        let r = epidemic::fit(&data, &stay, &options)?;
        say!("b_hat={:.6} delta_hat={:.6} status={:?}", r.b_hat, r.delta_hat, r.status);
        FitReport { schema_version: FIT_SCHEMA_VERSION, los, estimate: Some(r), per_hospital: None }
    };
    write_json(&out.join("fit.json"), &report)?;
    Ok(Outcome { artifacts: vec!["fit.json".into()], verified: true })
}
