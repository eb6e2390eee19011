//! `duty` command line: single evaluations, Monte Carlo runs, the full
//! three-form protocol, ranking verification, scenario batches, humility
//! sweeps, and zone maps.
//!
//! Exit codes: 0 success, 1 verification or runtime failure, 2 usage or
//! input error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};

use duty_core::decision::{
    case_studies, crossover_hi, evaluate_scenario_at, humility_sweep, AuditSink, JsonlSink,
    PolicyThresholds, Recommendation, Scenario,
};
use duty_core::duty::{BaselineHumility, DutyBreakdown, DutyInputs};
use duty_core::monte_carlo::{
    export_protocol, run_protocol, simulate, write_trials_csv, SimulationConfig,
};
use duty_core::signal::SignalFunction;
use duty_core::verification::{
    classify_zone, hi_grid_with_step, run_ranking_suite, write_trajectory_csv, RankingScenario,
    Zone,
};

#[derive(Parser)]
#[command(name = "duty", version, about = "Proportional duty evaluation and validation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum GForm {
    Linear,
    Exponential,
    Logistic,
}

#[derive(Args)]
struct GArgs {
    /// Signal function form
    #[arg(long = "g", value_enum, default_value_t = GForm::Linear)]
    g: GForm,
    /// Gain for the exponential form
    #[arg(long, default_value_t = 1.0)]
    gain: f64,
    /// Steepness for the logistic form
    #[arg(long, default_value_t = 10.0)]
    steepness: f64,
    /// Midpoint for the logistic form
    #[arg(long, default_value_t = 0.5)]
    midpoint: f64,
}

impl GArgs {
    fn build(&self) -> Result<SignalFunction, CliError> {
        match self.g {
            GForm::Linear => Ok(SignalFunction::Linear),
            GForm::Exponential => SignalFunction::exponential(self.gain)
                .map_err(|e| CliError::Usage(format!("--gain: {e}"))),
            GForm::Logistic => SignalFunction::logistic(self.steepness, self.midpoint)
                .map_err(|e| CliError::Usage(format!("--steepness/--midpoint: {e}"))),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the duty equation for one epistemic state
    Eval {
        /// Knowledge magnitude K in [0, 1]
        #[arg(long)]
        k: f64,
        /// Humility index HI in [0, 1]
        #[arg(long)]
        hi: f64,
        /// Contextual signal strength in [0, 1]
        #[arg(long)]
        c: f64,
        #[command(flatten)]
        g: GArgs,
        /// Baseline humility floor
        #[arg(long, default_value_t = BaselineHumility::DEFAULT_LAMBDA)]
        lambda: f64,
        /// Defer when total duty falls below this
        #[arg(long, default_value_t = PolicyThresholds::DEFAULT_DEFER_BELOW)]
        defer_threshold: f64,
        /// Also print the result as JSON
        #[arg(long)]
        json: bool,
        /// Append an audit record to this JSON Lines file
        #[arg(long)]
        audit: Option<PathBuf>,
        /// Fixed RFC 3339 timestamp for audit records (testing)
        #[arg(long)]
        fixed_time: Option<String>,
    },
    /// Run a seeded Monte Carlo simulation and summarize it
    Simulate {
        /// Number of trials
        #[arg(long, default_value_t = 100_000)]
        n: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        g: GArgs,
        #[arg(long, default_value_t = BaselineHumility::DEFAULT_LAMBDA)]
        lambda: f64,
        /// Directory for trials.csv and summary.json
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full three-form validation protocol with divergence report
    Protocol {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Trials per signal form
        #[arg(long, default_value_t = 100_000)]
        n: u64,
        #[arg(long, default_value_t = BaselineHumility::DEFAULT_LAMBDA)]
        lambda: f64,
        /// Directory for per-form CSV/JSON exports
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ranking-preservation suite over generated scenarios
    Ranking {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Humility grid step over [0, 0.95]
        #[arg(long, default_value_t = 0.05)]
        grid_step: f64,
        /// Directory for report.json and the trajectory CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a batch of named scenarios
    Batch {
        /// JSON array of scenarios {id, label, k, hi, c_signal, g, lambda}
        #[arg(long, conflicts_with = "case_studies", required_unless_present = "case_studies")]
        file: Option<PathBuf>,
        /// Use the four built-in case studies
        #[arg(long)]
        case_studies: bool,
        #[arg(long, default_value_t = PolicyThresholds::DEFAULT_DEFER_BELOW)]
        defer_threshold: f64,
        /// Append audit records to this JSON Lines file
        #[arg(long)]
        audit: Option<PathBuf>,
        /// Fixed RFC 3339 timestamp for audit records (testing)
        #[arg(long)]
        fixed_time: Option<String>,
    },
    /// Humility gradient sweep at fixed knowledge and signal
    Sweep {
        #[arg(long)]
        k: f64,
        #[arg(long)]
        c: f64,
        #[command(flatten)]
        g: GArgs,
        #[arg(long, default_value_t = 11)]
        steps: usize,
        /// CSV output file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the zone classification over a (HI, C_signal) grid
    Zones {
        #[arg(long, default_value_t = 0.1)]
        step: f64,
    },
}

enum CliError {
    Usage(String),
    Verification(String),
    Failure(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Verification(_) | CliError::Failure(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Verification(m) | CliError::Failure(m) => m,
        }
    }
}

fn unit_flag(flag: &str, value: f64) -> Result<f64, CliError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(CliError::Usage(format!(
            "{flag} must be within [0, 1], got {value}"
        )))
    }
}

fn baseline_flag(lambda: f64) -> Result<BaselineHumility, CliError> {
    BaselineHumility::new(lambda).map_err(|e| CliError::Usage(format!("--lambda: {e}")))
}

fn thresholds_flag(defer_threshold: f64) -> Result<PolicyThresholds, CliError> {
    PolicyThresholds::new(defer_threshold)
        .map_err(|e| CliError::Usage(format!("--defer-threshold: {e}")))
}

fn parse_fixed_time(fixed_time: &Option<String>) -> Result<DateTime<Utc>, CliError> {
    match fixed_time {
        None => Ok(Utc::now()),
        Some(s) => DateTime::parse_from_rfc3339(s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(|e| CliError::Usage(format!("--fixed-time: {e}"))),
    }
}

fn io_fail(path: &Path, err: std::io::Error) -> CliError {
    CliError::Failure(format!("{}: {err}", path.display()))
}

enum Sink {
    File(JsonlSink<std::fs::File>),
    Discard(JsonlSink<std::io::Sink>),
}

impl AuditSink for Sink {
    fn append(&mut self, record: &duty_core::decision::AuditRecord) -> std::io::Result<()> {
        match self {
            Sink::File(s) => s.append(record),
            Sink::Discard(s) => s.append(record),
        }
    }
}

fn open_sink(audit: &Option<PathBuf>) -> Result<Sink, CliError> {
    match audit {
        Some(path) => JsonlSink::open_append(path)
            .map(Sink::File)
            .map_err(|e| io_fail(path, e)),
        None => Ok(Sink::Discard(JsonlSink::new(std::io::sink()))),
    }
}

fn print_breakdown(b: &DutyBreakdown, rec: Recommendation) {
    println!("D_action  {:.3}", b.action);
    println!("D_repair  {:.3}", b.repair);
    println!("D_total   {:.3}", b.total);
    println!("recommendation  {rec}");
}

fn cmd_eval(
    k: f64,
    hi: f64,
    c: f64,
    g: &GArgs,
    lambda: f64,
    defer_threshold: f64,
    json: bool,
    audit: &Option<PathBuf>,
    fixed_time: &Option<String>,
) -> Result<(), CliError> {
    let inputs = DutyInputs::new(
        unit_flag("--k", k)?,
        unit_flag("--hi", hi)?,
        unit_flag("--c", c)?,
    )
    .expect("flags validated");
    let sf = g.build()?;
    let baseline = baseline_flag(lambda)?;
    let thresholds = thresholds_flag(defer_threshold)?;
    let scenario = Scenario {
        id: "cli-eval".to_string(),
        label: "command-line evaluation".to_string(),
        inputs,
        signal_function: sf,
        baseline,
    };
    let timestamp = parse_fixed_time(fixed_time)?;
    let mut sink = open_sink(audit)?;
    let (breakdown, rec) = evaluate_scenario_at(&scenario, &thresholds, &mut sink, timestamp)
        .map_err(|e| CliError::Failure(e.to_string()))?;
    print_breakdown(&breakdown, rec);
    if json {
        let payload = serde_json::json!({
            "k": inputs.k(),
            "hi": inputs.hi(),
            "c_signal": inputs.c_signal(),
            "g_form": sf.form_name(),
            "lambda": baseline.lambda(),
            "action": breakdown.action,
            "repair": breakdown.repair,
            "total": breakdown.total,
            "recommendation": rec.to_string(),
        });
        println!("{payload}");
    }
    Ok(())
}

fn cmd_simulate(
    n: u64,
    seed: u64,
    g: &GArgs,
    lambda: f64,
    out: &Option<PathBuf>,
) -> Result<(), CliError> {
    let config = SimulationConfig::new(n, seed, g.build()?, baseline_flag(lambda)?)
        .map_err(|e| CliError::Usage(format!("--n: {e}")))?;
    let summary = simulate(&config);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))?;
        let csv_path = dir.join("trials.csv");
        let file = std::fs::File::create(&csv_path).map_err(|e| io_fail(&csv_path, e))?;
        write_trials_csv(&config, std::io::BufWriter::new(file))
            .map_err(|e| io_fail(&csv_path, e))?;
        let json_path = dir.join("summary.json");
        std::fs::write(
            &json_path,
            serde_json::to_string_pretty(&summary).expect("summary serializes"),
        )
        .map_err(|e| io_fail(&json_path, e))?;
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    Ok(())
}

fn cmd_protocol(seed: u64, n: u64, lambda: f64, out: &Option<PathBuf>) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Usage("--n must be at least 1".to_string()));
    }
    let baseline = baseline_flag(lambda)?;
    let report =
        run_protocol(seed, n, baseline).map_err(|e| CliError::Usage(format!("--lambda: {e}")))?;
    for s in &report.summaries {
        println!(
            "form {:<11} mean_total={:.6} var_total={:.6} pearson={} max_residual={:.3e}",
            s.g_form,
            s.mean_total,
            s.var_total,
            s.pearson_k_total
                .map_or_else(|| "n/a".to_string(), |r| format!("{r:.6}")),
            s.max_conservation_residual
        );
    }
    println!(
        "conservation: max residual {:.3e} across {} trials",
        report.max_conservation_residual,
        3 * n
    );
    println!(
        "stability: var(lambda={}) / var(lambda={}) = {:.6} (first-diff ratio {:.6})",
        report.stability.lambda_on,
        report.stability.lambda_off,
        report.stability.variance_ratio,
        report.stability.diff_variance_ratio
    );
    for (gain, mean) in &report.exponential_means {
        println!("exponential mean_total (gain={gain}): {mean:.6}");
    }
    println!("reported vs measured:");
    for row in &report.divergences {
        println!(
            "  {:<42} reported {:<8} measured {:<10.6} {}",
            row.metric, row.reported, row.measured, row.note
        );
    }
    if let Some(dir) = out {
        export_protocol(&report, seed, n, baseline, dir)
            .map_err(|e| CliError::Failure(e.to_string()))?;
        println!("exports written to {}", dir.display());
    }
    Ok(())
}

fn cmd_ranking(n: usize, seed: u64, grid_step: f64, out: &Option<PathBuf>) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Usage("--n must be at least 1".to_string()));
    }
    let grid =
        hi_grid_with_step(grid_step).map_err(|e| CliError::Usage(format!("--grid-step: {e}")))?;
    let report = run_ranking_suite(n, seed, &grid);
    println!(
        "ranking preserved {}/{} scenarios over {} grid points",
        report.preserved_count,
        report.n_scenarios,
        grid.len()
    );
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))?;
        let report_path = dir.join("ranking_report.json");
        std::fs::write(
            &report_path,
            serde_json::to_string_pretty(&report).expect("report serializes"),
        )
        .map_err(|e| io_fail(&report_path, e))?;
        // trajectory export for the reference triple K = 0.80, 0.50, 0.10
        let reference = RankingScenario::new(0.80, 0.50, 0.10, 0.6, SignalFunction::Linear)
            .expect("reference triple is valid");
        let check = duty_core::verification::check_ranking(&reference, &grid)
            .map_err(|e| CliError::Failure(e.to_string()))?;
        let csv_path = dir.join("trajectories.csv");
        let file = std::fs::File::create(&csv_path).map_err(|e| io_fail(&csv_path, e))?;
        write_trajectory_csv(&check.trajectory, std::io::BufWriter::new(file))
            .map_err(|e| io_fail(&csv_path, e))?;
        println!("exports written to {}", dir.display());
    }
    if let Some(v) = &report.first_violation {
        return Err(CliError::Verification(format!(
            "ranking violated at scenario {} hi={}",
            v.scenario_index, v.hi
        )));
    }
    Ok(())
}

fn load_scenarios(path: &Path) -> Result<Vec<Scenario>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_fail(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Usage(format!(
            "{}: invalid scenario file: {e}",
            path.display()
        ))
    })
}

fn cmd_batch(
    file: &Option<PathBuf>,
    use_case_studies: bool,
    defer_threshold: f64,
    audit: &Option<PathBuf>,
    fixed_time: &Option<String>,
) -> Result<(), CliError> {
    let scenarios = if use_case_studies {
        case_studies()
    } else {
        load_scenarios(file.as_ref().expect("clap enforces file or --case-studies"))?
    };
    let mut seen = std::collections::HashSet::new();
    for s in &scenarios {
        if s.id.is_empty() || !seen.insert(s.id.clone()) {
            return Err(CliError::Usage(format!(
                "scenario ids must be non-empty and unique; offending id: {:?}",
                s.id
            )));
        }
    }
    let thresholds = thresholds_flag(defer_threshold)?;
    let timestamp = parse_fixed_time(fixed_time)?;
    let mut sink = open_sink(audit)?;
    println!(
        "{:<24} {:>6} {:>6} {:>6} {:>9} {:>9} {:>8}  {}",
        "id", "k", "hi", "c", "d_action", "d_repair", "d_total", "rec"
    );
    for s in &scenarios {
        let (b, rec) = evaluate_scenario_at(s, &thresholds, &mut sink, timestamp)
            .map_err(|e| CliError::Failure(e.to_string()))?;
        println!(
            "{:<24} {:>6.3} {:>6.3} {:>6.3} {:>9.3} {:>9.3} {:>8.3}  {rec}",
            s.id,
            s.inputs.k(),
            s.inputs.hi(),
            s.inputs.c_signal(),
            b.action,
            b.repair,
            b.total
        );
    }
    Ok(())
}

fn cmd_sweep(
    k: f64,
    c: f64,
    g: &GArgs,
    steps: usize,
    out: &Option<PathBuf>,
) -> Result<(), CliError> {
    let k = unit_flag("--k", k)?;
    let c = unit_flag("--c", c)?;
    let sf = g.build()?;
    let thresholds = PolicyThresholds::default();
    let points = humility_sweep(k, c, &sf, steps, &thresholds)
        .map_err(|e| CliError::Usage(format!("--steps: {e}")))?;
    let hi_star = crossover_hi(&sf, c).expect("c validated");
    let mut csv = String::from("hi,d_action,d_repair,d_total,recommendation,crossover\n");
    let mut crossed = false;
    for p in &points {
        let at_crossover = !crossed && p.breakdown.action <= p.breakdown.repair;
        crossed |= at_crossover;
        csv.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{},{}\n",
            p.hi,
            p.breakdown.action,
            p.breakdown.repair,
            p.breakdown.total,
            p.recommendation,
            u8::from(at_crossover)
        ));
    }
    match out {
        Some(path) => {
            std::fs::write(path, &csv).map_err(|e| io_fail(path, e))?;
            println!("sweep written to {}", path.display());
            println!("crossover hi* = {hi_star:.6}");
        }
        None => {
            print!("{csv}");
            eprintln!("crossover hi* = {hi_star:.6}");
        }
    }
    Ok(())
}

fn cmd_zones(step: f64) -> Result<(), CliError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(CliError::Usage(format!(
            "--step must be in (0, 1], got {step}"
        )));
    }
    let axis: Vec<f64> = {
        let mut v = Vec::new();
        let mut i = 0u32;
        loop {
            let x = i as f64 * step;
            if x > 1.0 + 1e-12 {
                break;
            }
            v.push(x.min(1.0));
            i += 1;
        }
        v
    };
    println!("zone map (rows: HI, columns: C_signal; H=high duty, E=equilibrium, L=low duty, U=unzoned)");
    print!("  hi\\c ");
    for c in &axis {
        print!("{c:>5.2}");
    }
    println!();
    for hi in &axis {
        print!("{hi:>6.2} ");
        for c in &axis {
            let tag = match classify_zone(*hi, *c) {
                Zone::HighDuty => 'H',
                Zone::Equilibrium => 'E',
                Zone::LowDuty => 'L',
                Zone::Unzoned => 'U',
            };
            print!("{tag:>5}");
        }
        println!();
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Eval {
            k,
            hi,
            c,
            g,
            lambda,
            defer_threshold,
            json,
            audit,
            fixed_time,
        } => cmd_eval(*k, *hi, *c, g, *lambda, *defer_threshold, *json, audit, fixed_time),
        Command::Simulate {
            n,
            seed,
            g,
            lambda,
            out,
        } => cmd_simulate(*n, *seed, g, *lambda, out),
        Command::Protocol {
            seed,
            n,
            lambda,
            out,
        } => cmd_protocol(*seed, *n, *lambda, out),
        Command::Ranking {
            n,
            seed,
            grid_step,
            out,
        } => cmd_ranking(*n, *seed, *grid_step, out),
        Command::Batch {
            file,
            case_studies,
            defer_threshold,
            audit,
            fixed_time,
        } => cmd_batch(file, *case_studies, *defer_threshold, audit, fixed_time),
        Command::Sweep { k, c, g, steps, out } => cmd_sweep(*k, *c, g, *steps, out),
        Command::Zones { step } => cmd_zones(*step),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
