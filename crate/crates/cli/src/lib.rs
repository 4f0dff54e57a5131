//! Command-line front end: plan exploration rounds, fuse observation
//! maps, run the Monte Carlo validator, and calibrate the free-cell
//! confidence floor.
//!
//! Exit codes form a stable scripting contract: `0` success, `1` the
//! simulator's empirical accuracies disagreed with the binomial oracle,
//! `2` usage or parameter errors.

pub mod fileconfig;
pub mod parallel;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use gridfuse_core::fuse::{fuse_max_likelihood, fuse_threshold, mean_map};
use gridfuse_core::grid::{parse_map, parse_observation_map, FusedMap, ObservationMap};
use gridfuse_core::plan::{achievable_confidence, make_plan, ConfidenceParams};
use gridfuse_core::sensor::{
    q_floor, ErrorDistribution, Neighborhood, PatternKnowledge, QMode, SensorModel,
};
use gridfuse_core::sim::{FusionRule, Pattern, Rounds, ScenarioConfig, TrialStats};

use fileconfig::Settings;

#[derive(Parser)]
#[command(
    name = "gridfuse",
    version,
    about = "Plan, fuse, and validate probabilistic occupancy-grid mapping runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the required round count N(d) and the fusion threshold.
    Plan(PlanArgs),
    /// Fuse observation map files into one map.
    Fuse(FuseArgs),
    /// Run the seeded Monte Carlo validator and emit statistics JSON.
    Simulate(SimulateArgs),
    /// Best achievable confidence d' for a fixed round budget.
    Degrade(DegradeArgs),
    /// Compute the worst-case free-cell confidence floor q'.
    #[command(name = "calibrate-q")]
    CalibrateQ(CalibrateArgs),
}

#[derive(Args)]
struct PlanArgs {
    /// Obstacle detection probability.
    #[arg(long = "p")]
    p: Option<f64>,
    /// Free-cell confidence floor; derived from --pattern/--map if absent.
    #[arg(long = "qprime")]
    qprime: Option<f64>,
    /// Target per-cell confidence (must exceed 0.5).
    #[arg(long = "d")]
    d: Option<f64>,
    /// Obstacle knowledge: none|lines|random|empty.
    #[arg(long = "pattern")]
    pattern: Option<String>,
    /// Derive q' from this ground-truth map file.
    #[arg(long = "map")]
    map: Option<PathBuf>,
    /// Error combination mode: additive|product.
    #[arg(long = "qmode")]
    qmode: Option<String>,
    /// Machine-readable output.
    #[arg(long = "json")]
    json: bool,
    /// key=value file supplying any of the flags above (flags win).
    #[arg(long = "config")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct FuseArgs {
    /// Observation map files (all with identical dimensions).
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Fusion threshold on the per-cell mean.
    #[arg(long = "c")]
    c: Option<f64>,
    /// Use the maximum-likelihood rule instead of a threshold.
    #[arg(long = "ml")]
    ml: bool,
    #[arg(long = "p")]
    p: Option<f64>,
    /// Free-cell confirmation probability for --ml.
    #[arg(long = "q")]
    q: Option<f64>,
    /// Output path; `.pgm` writes an image, anything else map text.
    #[arg(long = "out")]
    out: Option<PathBuf>,
    #[arg(long = "config")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Obstacle pattern: lines|random|empty.
    #[arg(long = "pattern")]
    pattern: Option<String>,
    /// Obstacle probability per cell for --pattern random.
    #[arg(long = "density")]
    density: Option<f64>,
    /// Column spacing for --pattern lines (at least 3).
    #[arg(long = "spacing")]
    spacing: Option<usize>,
    #[arg(long = "width")]
    width: Option<usize>,
    #[arg(long = "height")]
    height: Option<usize>,
    #[arg(long = "p")]
    p: Option<f64>,
    /// Planning floor override; derived from the pattern if absent.
    #[arg(long = "qprime")]
    qprime: Option<f64>,
    #[arg(long = "d")]
    d: Option<f64>,
    /// Exploration rounds; defaults to the planned N(d).
    #[arg(long = "rounds")]
    rounds: Option<u32>,
    #[arg(long = "trials")]
    trials: Option<u32>,
    /// Master seed; all randomness derives from it.
    #[arg(long = "seed")]
    seed: Option<u64>,
    #[arg(long = "qmode")]
    qmode: Option<String>,
    /// Fuse by maximum likelihood instead of the planned threshold.
    #[arg(long = "ml")]
    ml: bool,
    /// Write the statistics JSON here instead of stdout.
    #[arg(long = "out")]
    out: Option<PathBuf>,
    #[arg(long = "config")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DegradeArgs {
    #[arg(long = "p")]
    p: Option<f64>,
    #[arg(long = "qprime")]
    qprime: Option<f64>,
    /// Available number of rounds.
    #[arg(long = "n")]
    n: Option<u32>,
    #[arg(long = "json")]
    json: bool,
    #[arg(long = "config")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long = "p")]
    p: Option<f64>,
    /// Obstacle knowledge: none|lines|random|empty.
    #[arg(long = "pattern")]
    pattern: Option<String>,
    /// Compute q' exhaustively over this ground-truth map file.
    #[arg(long = "map")]
    map: Option<PathBuf>,
    #[arg(long = "qmode")]
    qmode: Option<String>,
    #[arg(long = "config")]
    config: Option<PathBuf>,
}

/// Parse the command line and run it, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Plan(args) => cmd_plan(args),
        Command::Fuse(args) => cmd_fuse(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Degrade(args) => cmd_degrade(args),
        Command::CalibrateQ(args) => cmd_calibrate_q(args),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            2
        }
    }
}

fn load_settings(path: &Option<PathBuf>) -> Result<Settings, String> {
    match path {
        Some(p) => Settings::load(p),
        None => Ok(Settings::default()),
    }
}

fn parse_qmode(raw: Option<String>) -> Result<QMode, String> {
    match raw.as_deref() {
        None | Some("additive") => Ok(QMode::Additive),
        Some("product") => Ok(QMode::IndependentProduct),
        Some(other) => Err(format!("unknown qmode `{other}` (use additive|product)")),
    }
}

fn parse_neighborhood(raw: Option<String>) -> Result<Neighborhood, String> {
    match raw.as_deref() {
        None | Some("square3") => Ok(Neighborhood::square3()),
        Some(other) => Err(format!("unknown neighborhood keyword `{other}`")),
    }
}

fn knowledge_from_pattern(pattern: &str) -> Result<PatternKnowledge, String> {
    match pattern {
        // Without a known layout the floor falls back to q' = p.
        "none" | "random" | "empty" => Ok(PatternKnowledge::Nothing),
        "lines" => Ok(PatternKnowledge::SeparatedLines),
        other => Err(format!(
            "unknown pattern `{other}` (use none|lines|random|empty)"
        )),
    }
}

/// Shared q' derivation: an explicit --qprime wins, then an explicit map,
/// then pattern knowledge (default: nothing known).
fn derive_q_prime(
    de: &ErrorDistribution,
    qprime: Option<f64>,
    map: Option<&Path>,
    pattern: Option<&str>,
    qmode: QMode,
) -> Result<f64, String> {
    if let Some(q) = qprime {
        if !(q > 0.0 && q < 1.0) {
            return Err("q' must lie in (0,1)".into());
        }
        return Ok(q);
    }
    let knowledge = match map {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read map {}: {e}", path.display()))?;
            PatternKnowledge::ExplicitMap(parse_map(&text).map_err(|e| e.to_string())?)
        }
        None => knowledge_from_pattern(pattern.unwrap_or("none"))?,
    };
    q_floor(de, &knowledge, qmode).map_err(|e| e.to_string())
}

fn cmd_plan(args: PlanArgs) -> Result<i32, String> {
    let cfg = load_settings(&args.config)?;
    cfg.allow_keys(&["p", "qprime", "d", "pattern", "map", "qmode", "json", "nh"])?;
    let p = args.p.or(cfg.f64("p")?).ok_or("missing --p")?;
    let d = args.d.or(cfg.f64("d")?).ok_or("missing --d")?;
    let qprime = args.qprime.or(cfg.f64("qprime")?);
    let pattern = args.pattern.or_else(|| cfg.string("pattern"));
    let map = args.map.or_else(|| cfg.string("map").map(PathBuf::from));
    let qmode = parse_qmode(args.qmode.or_else(|| cfg.string("qmode")))?;
    let nh = parse_neighborhood(cfg.string("nh"))?;
    let json = args.json || cfg.bool("json")?.unwrap_or(false);

    let de = ErrorDistribution::uniform(p, &nh).map_err(|e| e.to_string())?;
    let q_prime = derive_q_prime(&de, qprime, map.as_deref(), pattern.as_deref(), qmode)?;
    let params = ConfidenceParams::new(p, q_prime, d).map_err(|e| e.to_string())?;
    let plan = make_plan(&params).map_err(|e| e.to_string())?;

    if json {
        let payload = serde_json::json!({
            "p": p,
            "q_prime": q_prime,
            "d": d,
            "a": plan.a,
            "b": plan.b,
            "n_required": plan.n_required,
            "c_low": plan.c_low,
            "c_high": plan.c_high,
            "c": plan.c_chosen,
            "count_threshold": plan.count_threshold,
            "exact_obstacle_confidence": plan.exact_confidence_obstacle,
            "exact_free_confidence": plan.exact_confidence_free,
        });
        println!("{}", serde_json::to_string_pretty(&payload).unwrap());
    } else {
        println!("p                 = {p:.6}");
        println!("q'                = {q_prime:.6}");
        println!("d                 = {d:.6}");
        println!("a                 = {:.6}", plan.a);
        println!("b                 = {:.6}", plan.b);
        println!("N(d)              = {}", plan.n_required);
        println!("C interval        = [{:.6}, {:.6}]", plan.c_low, plan.c_high);
        println!("C (midpoint)      = {:.6}", plan.c_chosen);
        println!(
            "count threshold   = {} of {}",
            plan.count_threshold, plan.n_required
        );
        println!(
            "exact P(fused=1 | obstacle)   = {:.6}",
            plan.exact_confidence_obstacle
        );
        println!(
            "exact P(fused=0 | free @ q')  = {:.6}",
            plan.exact_confidence_free
        );
    }
    Ok(0)
}

fn write_fused(fused: &FusedMap, out: Option<&Path>) -> Result<bool, String> {
    match out {
        Some(path) => {
            let payload = if path.extension().is_some_and(|e| e == "pgm") {
                fused.to_pgm()
            } else {
                fused.to_text()
            };
            std::fs::write(path, payload)
                .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            Ok(true)
        }
        None => {
            print!("{}", fused.to_text());
            Ok(false)
        }
    }
}

fn cmd_fuse(args: FuseArgs) -> Result<i32, String> {
    let cfg = load_settings(&args.config)?;
    cfg.allow_keys(&["c", "ml", "p", "q", "out"])?;
    let c = args.c.or(cfg.f64("c")?);
    let ml = args.ml || cfg.bool("ml")?.unwrap_or(false);
    let out = args.out.or_else(|| cfg.string("out").map(PathBuf::from));

    let mut observations: Vec<ObservationMap> = Vec::with_capacity(args.files.len());
    for file in &args.files {
        let text = std::fs::read_to_string(file)
            .map_err(|e| format!("cannot read {}: {e}", file.display()))?;
        observations.push(parse_observation_map(&text).map_err(|e| e.to_string())?);
    }

    let fused = if ml {
        if c.is_some() {
            return Err("--c and --ml are mutually exclusive".into());
        }
        let p = args.p.or(cfg.f64("p")?).ok_or("--ml needs --p")?;
        let q = args.q.or(cfg.f64("q")?).ok_or("--ml needs --q")?;
        fuse_max_likelihood(&observations, p, q).map_err(|e| e.to_string())?
    } else {
        let c = c.ok_or("supply --c or --ml")?;
        let mean = mean_map(&observations).map_err(|e| e.to_string())?;
        fuse_threshold(&mean, c).map_err(|e| e.to_string())?
    };

    let map_went_to_file = write_fused(&fused, out.as_deref())?;

    // Per-cell count histogram: how many cells saw k rounds read 1.
    let n = observations.len();
    let mut histogram = vec![0u64; n + 1];
    let cells = fused.width() * fused.height();
    for i in 0..cells {
        let count = observations
            .iter()
            .filter(|m| m.cells()[i] == 1)
            .count();
        histogram[count] += 1;
    }
    let mut lines = format!("cells by 1-observation count (n = {n}):\n");
    for (k, &cells) in histogram.iter().enumerate() {
        if cells > 0 {
            lines.push_str(&format!("  {k:>3}: {cells}\n"));
        }
    }
    if map_went_to_file {
        print!("{lines}");
    } else {
        eprint!("{lines}");
    }
    Ok(0)
}

fn cmd_simulate(args: SimulateArgs) -> Result<i32, String> {
    let cfg = load_settings(&args.config)?;
    cfg.allow_keys(&[
        "pattern", "density", "spacing", "width", "height", "p", "qprime", "d", "rounds",
        "trials", "seed", "qmode", "ml", "out", "nh",
    ])?;
    let pattern_name = args
        .pattern
        .or_else(|| cfg.string("pattern"))
        .ok_or("missing --pattern (lines|random|empty)")?;
    let density = args.density.or(cfg.f64("density")?).unwrap_or(0.2);
    let spacing = args.spacing.or(cfg.usize("spacing")?).unwrap_or(3);
    let pattern = match pattern_name.as_str() {
        "lines" => Pattern::SeparatedLines { spacing },
        "random" => Pattern::RandomDensity(density),
        "empty" => Pattern::Empty,
        other => return Err(format!("pattern `{other}` cannot be simulated (use lines|random|empty)")),
    };

    let p = args.p.or(cfg.f64("p")?).unwrap_or(0.9);
    let d = args.d.or(cfg.f64("d")?).unwrap_or(0.95);
    let width = args.width.or(cfg.usize("width")?).unwrap_or(20);
    let height = args.height.or(cfg.usize("height")?).unwrap_or(20);
    let trials = args.trials.or(cfg.u32("trials")?).unwrap_or(1000);
    let seed = args.seed.or(cfg.u64("seed")?).unwrap_or(0);
    let rounds = match args.rounds.or(cfg.u32("rounds")?) {
        Some(n) => Rounds::Fixed(n),
        None => Rounds::Auto,
    };
    let qmode = parse_qmode(args.qmode.or_else(|| cfg.string("qmode")))?;
    let nh = parse_neighborhood(cfg.string("nh"))?;
    let ml = args.ml || cfg.bool("ml")?.unwrap_or(false);
    let out = args.out.or_else(|| cfg.string("out").map(PathBuf::from));

    let sensor = SensorModel::uniform(p, nh, qmode).map_err(|e| e.to_string())?;
    let config = ScenarioConfig {
        width,
        height,
        pattern,
        sensor,
        d,
        rounds,
        trials,
        master_seed: seed,
        fusion: if ml {
            FusionRule::MaxLikelihood
        } else {
            FusionRule::Threshold
        },
        q_prime_override: args.qprime.or(cfg.f64("qprime")?),
    };

    let start = Instant::now();
    let mut stats =
        parallel::run_monte_carlo_parallel(&config).map_err(|e| e.to_string())?;
    stats.runtime_ms = Some(start.elapsed().as_millis() as u64);

    let json = stats_to_json(&stats);
    match &out {
        Some(path) => std::fs::write(path, &json)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None => print!("{json}"),
    }
    eprintln!(
        "oracle {}: worst per-cell deviation {:.2} sigma, runtime {} ms",
        if stats.oracle_pass { "pass" } else { "FAIL" },
        stats.worst_deviation_sigmas,
        stats.runtime_ms.unwrap_or(0),
    );
    Ok(if stats.oracle_pass { 0 } else { 1 })
}

fn cmd_degrade(args: DegradeArgs) -> Result<i32, String> {
    let cfg = load_settings(&args.config)?;
    cfg.allow_keys(&["p", "qprime", "n", "json"])?;
    let p = args.p.or(cfg.f64("p")?).ok_or("missing --p")?;
    let q_prime = args.qprime.or(cfg.f64("qprime")?).ok_or("missing --qprime")?;
    let n = args.n.or(cfg.u32("n")?).ok_or("missing --n")?;
    let json = args.json || cfg.bool("json")?.unwrap_or(false);

    let degraded = achievable_confidence(p, q_prime, n).map_err(|e| e.to_string())?;
    if json {
        let payload = serde_json::json!({
            "p": p,
            "q_prime": q_prime,
            "n": n,
            "d_prime": degraded.d_prime,
            "c": degraded.c,
        });
        println!("{}", serde_json::to_string_pretty(&payload).unwrap());
    } else {
        println!("d' = {:.6}", degraded.d_prime);
        println!("C  = {:.6}", degraded.c);
    }
    Ok(0)
}

fn cmd_calibrate_q(args: CalibrateArgs) -> Result<i32, String> {
    let cfg = load_settings(&args.config)?;
    cfg.allow_keys(&["p", "pattern", "map", "qmode", "nh"])?;
    let p = args.p.or(cfg.f64("p")?).ok_or("missing --p")?;
    let pattern = args.pattern.or_else(|| cfg.string("pattern"));
    let map = args.map.or_else(|| cfg.string("map").map(PathBuf::from));
    let qmode = parse_qmode(args.qmode.or_else(|| cfg.string("qmode")))?;
    let nh = parse_neighborhood(cfg.string("nh"))?;

    let de = ErrorDistribution::uniform(p, &nh).map_err(|e| e.to_string())?;
    let q_prime = derive_q_prime(&de, None, map.as_deref(), pattern.as_deref(), qmode)?;
    println!("q' = {q_prime:.6}");
    Ok(0)
}

/// Pretty JSON with a trailing newline; byte-identical for identical runs.
pub fn stats_to_json(stats: &TrialStats) -> String {
    let mut text = serde_json::to_string_pretty(stats).expect("statistics always serialize");
    text.push('\n');
    text
}
