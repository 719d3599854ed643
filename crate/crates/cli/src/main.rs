//! `pwrsim`: Monte-Carlo runner for passive Wi-Fi radar localization.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use pwr_fusion::estimator::MethodRegistry;
use pwr_fusion::harness::{parse_snr_list, run_experiment, write_outputs, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "pwrsim", version, about = "Hybrid NDP/BFF passive radar localization experiments")]
struct Args {
    /// Experiment TOML file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// SNR points in dB: "0,10,20" or "start:stop:step".
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    /// Trials per SNR point.
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run a single noiseless point instead of the SNR sweep.
    #[arg(long)]
    noiseless: bool,
    /// One alternating pass per target instead of iterating to convergence.
    #[arg(long)]
    single_pass: bool,
    /// Hit radius in meters.
    #[arg(long)]
    hit_radius: Option<f64>,
    /// Worker threads (all cores by default).
    #[arg(long)]
    threads: Option<usize>,
    /// List the registered methods and exit.
    #[arg(long)]
    list_methods: bool,
}

fn build_config(args: &Args) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = &args.snr {
        cfg.snr_db = parse_snr_list(s)?;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(m) = &args.methods {
        cfg.methods = m.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    }
    if let Some(o) = &args.out {
        cfg.output = Some(o.clone());
    }
    if let Some(r) = args.hit_radius {
        cfg.hit_radius = r;
    }
    cfg.noiseless |= args.noiseless;
    cfg.search.single_pass |= args.single_pass;
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: Args) -> Result<()> {
    let registry = MethodRegistry::with_defaults();
    if args.list_methods {
        for name in registry.names() {
            println!("{name}");
        }
        return Ok(());
    }
    let cfg = build_config(&args).context("invalid configuration")?;
    let out_dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("pwrsim-out"));
    let output = run_experiment(&cfg, &registry, args.threads)?;
    write_outputs(&output, &out_dir).with_context(|| format!("writing {}", out_dir.display()))?;
    for m in &output.metrics {
        let rmse = m.rmse.map(|r| format!("{r:.3}")).unwrap_or_else(|| "NA".into());
        println!(
            "{:<10} snr={:>5} {:<10} hit_rate={:.3} rmse={} median={:.3}",
            m.method,
            pwr_fusion::harness::format_snr(m.snr_db),
            m.class.as_str(),
            m.hit_rate,
            rmse,
            m.median_error
        );
    }
    eprintln!("wrote {}", out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pwrsim: {e:#}");
            ExitCode::from(2)
        }
    }
}
