use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use resilient_intersection::config::{ConfigError, ConfigFile};
use resilient_intersection::des::{Observer, DEFAULT_BUDGET};
use resilient_intersection::exec::{init_workers, Exec};
use resilient_intersection::numeric::{format_rational, parse_rational, Rational};
use resilient_intersection::sim::{self, run_scenario, Supervision, SweepPoint, SweepRow};
use resilient_intersection::supervisor::ImportedTable;
use resilient_intersection::verify;
use resilient_intersection::{BaselineTable, IntersectionConfig, ResilientTable, ScenarioConfig, SupervisorKind};

#[derive(Parser)]
#[command(name = "risup", version, about = "Resilient intersection supervisor toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration file and report every violated assumption.
    Validate(Common),
    /// Build a supervisor table and write it to the output directory.
    Synthesize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        tune: Tune,
        #[arg(long, default_value = "resilient")]
        supervisor: KindArg,
    },
    /// Simulate one closed-loop run and write its trace.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        tune: Tune,
        #[arg(long, default_value = "resilient")]
        supervisor: KindArg,
        #[arg(long)]
        seed: Option<u64>,
        /// Table written by `synthesize`; synthesized in memory when omitted.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Synthesize and simulate over a grid of T_max and η values.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated T_max values.
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3, 4, 8, 12])]
        tmax: Vec<usize>,
        /// Comma-separated detector thresholds (position units, rationals allowed).
        #[arg(long, value_delimiter = ',', default_values_t = ["0".to_string()])]
        eta: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Simulated runs per grid point.
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Run the acceptance suite; exits 3 if any criterion fails.
    Verify {
        /// Run a single criterion.
        #[arg(long)]
        criterion: Option<u8>,
        /// Use the sequential execution path.
        #[arg(long)]
        sequential: bool,
    },
    /// Write the observer automaton and the normalized configuration.
    Export {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        tune: Tune,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct Tune {
    /// Override the attack-duration bound.
    #[arg(long)]
    tmax: Option<usize>,
    /// Override every detector threshold (position units).
    #[arg(long)]
    eta: Option<String>,
    /// Observer state budget.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Baseline,
    Resilient,
}

impl From<KindArg> for SupervisorKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Baseline => SupervisorKind::Baseline,
            KindArg::Resilient => SupervisorKind::Resilient,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Text,
}

/// Failure with its exit code.
struct Fail(u8, String);

impl Fail {
    fn invalid(msg: impl Into<String>) -> Self {
        Fail(1, msg.into())
    }
    fn fault(msg: impl Into<String>) -> Self {
        Fail(2, msg.into())
    }
}

impl From<ConfigError> for Fail {
    fn from(e: ConfigError) -> Self {
        let mut msg = e.to_string();
        for d in e.diagnostics() {
            write!(msg, "\n  {}: {}", d.key, d.message).unwrap();
        }
        Fail::invalid(msg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_workers(None);
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Fail> {
    match cmd {
        Command::Validate(common) => validate(&common),
        Command::Synthesize { common, tune, supervisor } => synthesize(&common, &tune, supervisor.into()),
        Command::Run {
            common,
            tune,
            supervisor,
            seed,
            table,
            format,
        } => run(&common, &tune, supervisor.into(), seed, table.as_deref(), format),
        Command::Sweep {
            common,
            tmax,
            eta,
            seed,
            runs,
            budget,
            format,
        } => sweep(&common, &tmax, &eta, seed, runs, budget, format),
        Command::Verify { criterion, sequential } => run_verify(criterion, if sequential { Exec::Sequential } else { Exec::Parallel }),
        Command::Export { common, tune } => export(&common, &tune),
    }
}

fn load(common: &Common) -> Result<(ConfigFile, IntersectionConfig, ScenarioConfig), Fail> {
    let file = ConfigFile::load(&common.config)?;
    let (cfg, sc) = file.validate()?;
    Ok((file, cfg, sc))
}

fn parse_eta(s: &str) -> Result<Rational, Fail> {
    parse_rational(s).map_err(|e| Fail::invalid(format!("--eta {s}: {e}")))
}

/// Applies `--tmax`/`--eta` and re-derives the scenario for the new config.
fn tuned(file: &ConfigFile, cfg: IntersectionConfig, tune: &Tune) -> Result<(IntersectionConfig, ScenarioConfig), Fail> {
    let mut cfg = cfg;
    if let Some(eta) = &tune.eta {
        cfg = cfg.with_threshold(parse_eta(eta)?)?;
    }
    if let Some(t) = tune.tmax {
        cfg = cfg.with_t_max(t);
    }
    let sc = file.scenario_for(&cfg)?;
    Ok((cfg, sc))
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Fail> {
    fs::create_dir_all(dir).map_err(|e| Fail::fault(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Fail::fault(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn validate(common: &Common) -> Result<(), Fail> {
    let (_, cfg, sc) = load(common)?;
    println!(
        "ok: {} vehicles, {} controlled inputs, T_max = {}, horizon {} steps, {} attack windows",
        cfg.n(),
        cfg.controls().len(),
        cfg.t_max(),
        sc.horizon,
        sc.attacks.len()
    );
    Ok(())
}

fn histogram(h: &[usize]) -> String {
    h.iter().enumerate().map(|(k, n)| format!("{k}:{n}")).collect::<Vec<_>>().join(" ")
}

fn synth_resilient(cfg: &IntersectionConfig, budget: usize) -> Result<ResilientTable, Fail> {
    let table = ResilientTable::synthesize(cfg, Exec::Parallel, budget).map_err(|e| Fail::invalid(e.to_string()))?;
    if !table.success() {
        return Err(Fail::invalid("no resilient supervisor exists: the initial state is pruned"));
    }
    Ok(table)
}

fn synth_baseline(cfg: &IntersectionConfig) -> Result<BaselineTable, Fail> {
    let table = BaselineTable::synthesize(cfg);
    if !table.success(cfg) {
        return Err(Fail::invalid("no baseline supervisor exists: an initial cell is pruned"));
    }
    Ok(table)
}

fn synthesize(common: &Common, tune: &Tune, kind: SupervisorKind) -> Result<(), Fail> {
    let (file, cfg, _) = load(common)?;
    let (cfg, _) = tuned(&file, cfg, tune)?;
    let (text, stats) = match kind {
        SupervisorKind::Resilient => {
            let t = synth_resilient(&cfg, tune.budget)?;
            (t.to_text(), t.stats())
        }
        SupervisorKind::Baseline => {
            let t = synth_baseline(&cfg)?;
            (t.to_text(), t.stats())
        }
    };
    let path = write_out(&common.out, &format!("{}.table", kind.name()), &text)?;
    println!(
        "{} table: {} states, {} open, {} winning, {} admissible inputs in total",
        kind.name(),
        stats.states,
        stats.open_states,
        stats.winning_states,
        stats.sum_admissible
    );
    println!("admissible-set sizes: {}", histogram(&stats.histogram));
    println!("wrote {}", path.display());
    Ok(())
}

fn read_table(path: &Path) -> Result<ImportedTable, Fail> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Fail::invalid(format!("table {} not found; run `risup synthesize` first", path.display()))
        } else {
            Fail::fault(format!("cannot read {}: {e}", path.display()))
        }
    })?;
    ImportedTable::parse(&text).map_err(|e| Fail::invalid(format!("{}: {e}", path.display())))
}

fn run(common: &Common, tune: &Tune, kind: SupervisorKind, seed: Option<u64>, table: Option<&Path>, format: Format) -> Result<(), Fail> {
    let (file, cfg, _) = load(common)?;
    let (cfg, mut sc) = tuned(&file, cfg, tune)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    let imported = table.map(read_table).transpose()?;
    let mut baseline = BaselineTable::synthesize(&cfg);
    let trace = match kind {
        SupervisorKind::Baseline => {
            if let Some(t) = &imported {
                baseline = baseline.with_imported(t).map_err(Fail::invalid)?;
            }
            let truth = BaselineTable::synthesize(&cfg);
            run_scenario(&cfg, &sc, Supervision::Baseline(&baseline), &truth)
        }
        SupervisorKind::Resilient => {
            let mut res = synth_resilient(&cfg, tune.budget)?;
            if let Some(t) = &imported {
                res = res.with_imported(t).map_err(Fail::invalid)?;
            }
            run_scenario(&cfg, &sc, Supervision::Resilient(&res), &baseline)
        }
    }
    .map_err(|e| Fail::fault(e.to_string()))?;
    let (name, body) = match format {
        Format::Csv => ("trace.csv", sim::trace_csv(&cfg, &trace)),
        Format::Text => ("trace.txt", sim::trace_text(&cfg, &trace)),
    };
    let path = write_out(&common.out, name, &body)?;
    println!("seed {}: {} after {} steps", trace.seed, trace.outcome, trace.steps.len().saturating_sub(1));
    println!("wrote {}", path.display());
    Ok(())
}

fn sweep_text(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    writeln!(out, "{:>5} {:>6} {:>5} {:>8} {:>8} {:>6} {:>8}  outcomes", "T_max", "eta", "ok", "states", "sum_adm", "perm", "pending").unwrap();
    for r in rows {
        let outcomes: Vec<String> = r.outcomes.iter().filter(|(_, &n)| n > 0).map(|(o, n)| format!("{o}={n}")).collect();
        writeln!(
            out,
            "{:>5} {:>6} {:>5} {:>8} {:>8} {:>6} {:>8}  {}",
            r.point.t_max,
            format_rational(r.point.eta),
            r.synthesized,
            r.observer_states,
            r.sum_admissible,
            r.permissiveness,
            r.non_singleton_pending,
            r.error.clone().unwrap_or_else(|| outcomes.join(" "))
        )
        .unwrap();
    }
    out
}

fn sweep(common: &Common, tmax: &[usize], eta: &[String], seed: Option<u64>, runs: usize, budget: usize, format: Format) -> Result<(), Fail> {
    let (_, cfg, mut sc) = load(common)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    let etas = eta.iter().map(|s| parse_eta(s)).collect::<Result<Vec<_>, _>>()?;
    let points: Vec<SweepPoint> = etas.iter().flat_map(|&eta| tmax.iter().map(move |&t_max| SweepPoint { t_max, eta })).collect();
    let rows = sim::sweep(&cfg, &sc, &points, runs, Exec::Parallel, budget);
    let (name, body) = match format {
        Format::Csv => ("sweep.csv", sim::sweep_csv(&rows)),
        Format::Text => ("sweep.txt", sweep_text(&rows)),
    };
    let path = write_out(&common.out, name, &body)?;
    print!("{}", sweep_text(&rows));
    println!("wrote {}", path.display());
    Ok(())
}

fn run_verify(criterion: Option<u8>, exec: Exec) -> Result<(), Fail> {
    let results = match criterion {
        Some(id) => vec![verify::run_check(id, exec).ok_or_else(|| Fail::invalid(format!("no criterion {id}")))?],
        None => verify::run_all(exec),
    };
    for r in &results {
        println!("{r}");
    }
    let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| r.id.to_string()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Fail(3, format!("failed criteria: {}", failed.join(", "))))
    }
}

fn export(common: &Common, tune: &Tune) -> Result<(), Fail> {
    let (file, cfg, _) = load(common)?;
    let (cfg, _) = tuned(&file, cfg, tune)?;
    let obs = Observer::build(&cfg, Exec::Parallel, tune.budget).map_err(|e| Fail::invalid(e.to_string()))?;
    let a = write_out(&common.out, "observer.txt", &obs.to_text(&cfg))?;
    let mut normalized = file.clone();
    normalized.intersection = cfg.spec().clone();
    let b = write_out(&common.out, "config.toml", &normalized.to_toml())?;
    println!("observer: {} states", obs.len());
    println!("wrote {}\nwrote {}", a.display(), b.display());
    Ok(())
}
