use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use koopman_robots::config::{load_config, RunConfig};
use koopman_robots::estimation::read_checkpoint;
use koopman_robots::harness::{
    compute_metrics, run_control, run_identification, CaseSpec, EstimatorKind,
    IdentificationMetrics, MetricOptions, Surrogate, TrajectoryLog, Variant,
};
use koopman_robots::io::{
    export_plot_data, write_bundle, BundleSummary, ExportKind, CHECKPOINT_FILE,
};
use koopman_robots::{Error, Result};

#[derive(Parser)]
#[command(
    name = "koopctl",
    version,
    about = "Koopman surrogate identification and control runs"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true, env = "KOOPCTL_OUT_DIR")]
    out: Option<PathBuf>,
    /// Recorded in the summary; runs are deterministic
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// linear | bilinear | decentralized-bilinear
    #[arg(long, global = true)]
    variant: Option<String>,
    /// Case id (I..V, or 1..5).
    #[arg(long, global = true)]
    case: Option<String>,
    /// rls | gradient
    #[arg(long, global = true)]
    estimator: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Phase I only.
    Identify,
    /// Phase II for the configured case, starting from an identify bundle.
    Control {
        /// Bundle directory holding a checkpoint; Phase I is rerun when omitted.
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Phase I followed by Phase II for one case.
    Case,
    /// Linear vs bilinear Phase I error comparison.
    Compare,
    /// Plot-ready files from a bundle.
    Export {
        /// Bundle directory to read.
        #[arg(long)]
        from: PathBuf,
        /// error-norm | parameter-norm | trajectory | all
        #[arg(long, default_value = "all")]
        which: String,
    },
}

fn parse_enum<T: serde::de::DeserializeOwned>(field: &str, value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string())).map_err(|_| {
        Error::Config {
            field: field.to_string(),
            message: format!("unknown value `{value}`"),
        }
    })
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &common.variant {
        cfg.variant = parse_enum::<Variant>("variant", v)?;
        if common.case.is_none() && CaseSpec::lookup(cfg.variant, &cfg.case).is_err() {
            cfg.case = "I".into();
        }
    }
    if let Some(e) = &common.estimator {
        cfg.estimator = parse_enum::<EstimatorKind>("estimator", e)?;
    }
    if let Some(c) = &common.case {
        cfg.case = c.clone();
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn metric_options(cfg: &RunConfig) -> MetricOptions {
    MetricOptions {
        reset_interval: cfg.reset_interval(),
        ..MetricOptions::default()
    }
}

fn finish(cfg: &RunConfig, dir: &Path, log: &TrajectoryLog, surrogate: &Surrogate) -> Result<()> {
    let metrics = compute_metrics(log, &metric_options(cfg));
    for w in &metrics.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(id) = &metrics.identification {
        print!(
            "identification: {} steps, max |eps_a| {:.3e}",
            id.steps, id.max_eps_a
        );
        match id.max_eps_a_trimmed {
            Some(t) => println!(", max |eps_a| from step {} {:.3e}", id.trim, t),
            None => println!(),
        }
    }
    for c in &metrics.control {
        println!(
            "case {}: {} steps, arrived {}, terminal distances [{:.3}, {:.3}, {:.3}], min surface distance {:.3}, {:.3} s",
            c.case.as_deref().unwrap_or("-"),
            c.steps,
            c.arrived_at.map_or("no".to_string(), |k| format!("at step {k}")),
            c.terminal_distances[0],
            c.terminal_distances[1],
            c.terminal_distances[2],
            c.min_surface_distance,
            c.duration_s
        );
    }
    let summary = BundleSummary::new(cfg, log, metrics);
    write_bundle(dir, cfg, log, &summary, surrogate)?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn restore(cfg: &RunConfig, dir: &Path) -> Result<Surrogate> {
    let mut surrogate = Surrogate::new(cfg)?;
    let records = read_checkpoint(std::fs::File::open(dir.join(CHECKPOINT_FILE))?)?;
    if records.len() != surrogate.estimators.len() {
        return Err(Error::Checkpoint(format!(
            "{} records for {} estimators",
            records.len(),
            surrogate.estimators.len()
        )));
    }
    for (est, rec) in surrogate.estimators.iter_mut().zip(records) {
        est.restore(rec)?;
    }
    Ok(surrogate)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli.common)?;
    let out = cfg.output_dir.clone();
    match cli.command {
        Command::Identify => {
            let (surrogate, log) = run_identification(&cfg)?;
            finish(&cfg, &out, &log, &surrogate)
        }
        Command::Control { from } => {
            let case = CaseSpec::lookup(cfg.variant, &cfg.case)?;
            let mut surrogate = match from {
                Some(dir) => restore(&cfg, &dir)?,
                None => run_identification(&cfg)?.0,
            };
            let first_k = surrogate.estimators[0].step;
            let log = run_control(&cfg, &mut surrogate, &case, first_k)?;
            finish(&cfg, &out, &log, &surrogate)
        }
        Command::Case => {
            let case = CaseSpec::lookup(cfg.variant, &cfg.case)?;
            let (mut surrogate, mut log) = run_identification(&cfg)?;
            let control = run_control(&cfg, &mut surrogate, &case, cfg.identification_steps)?;
            log.extend(control);
            finish(&cfg, &out, &log, &surrogate)
        }
        Command::Compare => compare(&cfg, &out),
        Command::Export { from, which } => {
            let kinds: Vec<ExportKind> = match which.as_str() {
                "all" => ExportKind::ALL.to_vec(),
                "error-norm" => vec![ExportKind::ErrorNorm],
                "parameter-norm" => vec![ExportKind::ParameterNorm],
                "trajectory" => vec![ExportKind::Trajectory],
                other => {
                    return Err(Error::Config {
                        field: "which".into(),
                        message: format!("unknown export `{other}`"),
                    })
                }
            };
            for path in export_plot_data(&from, &out, &kinds)? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn compare(cfg: &RunConfig, out: &Path) -> Result<()> {
    let mut rows = Vec::new();
    for variant in [Variant::Linear, Variant::Bilinear] {
        let mut vcfg = cfg.clone();
        vcfg.variant = variant;
        vcfg.case = "I".into();
        let (surrogate, log) = run_identification(&vcfg)?;
        finish(&vcfg, &out.join(variant.name()), &log, &surrogate)?;
        let id = compute_metrics(&log, &metric_options(&vcfg))
            .identification
            .expect("identification metrics");
        rows.push((variant, id));
    }
    let (lin, bil) = (&rows[0].1, &rows[1].1);
    let trimmed = |m: &IdentificationMetrics| {
        m.max_eps_a_trimmed.ok_or_else(|| Error::Config {
            field: "identification_steps".into(),
            message: format!("compare needs more than {} steps", m.trim),
        })
    };
    let ratio = trimmed(lin)? / trimmed(bil)?;
    let table = serde_json::json!({
        "linear": { "max_eps_a": lin.max_eps_a, "max_eps_a_trimmed": lin.max_eps_a_trimmed },
        "bilinear": { "max_eps_a": bil.max_eps_a, "max_eps_a_trimmed": bil.max_eps_a_trimmed },
        "trim": bil.trim,
        "ratio": ratio,
    });
    std::fs::create_dir_all(out)?;
    std::fs::write(
        out.join("compare.json"),
        serde_json::to_string_pretty(&table)? + "\n",
    )?;
    println!("linear / bilinear max |eps_a| ratio: {ratio:.1}");
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
