//! `rasim`: batch driver for rate-approximation feedback experiments.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ra_core::bounds::{bounds_report, measured_delta, probe_resolution, simplex_quantizer};
use ra_core::codebook::{load_codebook, save_codebook, Codebook};
use ra_core::harness::{self, ExperimentResult, SimConfig};
use ra_core::numerics::SeedSpec;

#[derive(Parser)]
#[command(name = "rasim", version, about = "Rate-approximation limited feedback experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for `result.json` and `curves.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `workers`.
    #[arg(long)]
    workers: Option<usize>,
    /// Print rates in bits instead of nats.
    #[arg(long)]
    bits: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sum-rate experiment over the configured strategies.
    Simulate(RunArgs),
    /// Monte Carlo estimate of the worst-case rate gap with bound columns.
    DeltaRa(RunArgs),
    /// Quantisation error against feedback size.
    Scaling(RunArgs),
    /// Rate loss of fixed-codebook RA and of zeroforcing across SNR.
    Contrast(RunArgs),
    /// Closed-form bounds at one operating point.
    Bounds {
        #[arg(long)]
        n_t: usize,
        /// Feedback bits B.
        #[arg(long = "feedback-bits")]
        feedback_bits: u32,
        #[arg(long, default_value_t = 2)]
        n_s: usize,
        #[arg(long, default_value_t = 10.0)]
        snr_db: f64,
    },
    /// Builds the simplex quantiser and measures its worst-case error.
    Quantizer {
        #[arg(long = "feedback-bits")]
        feedback_bits: u32,
        #[arg(long, default_value_t = 1_000_000)]
        probes: usize,
    },
    /// Codebook files.
    #[command(subcommand)]
    Codebook(CodebookCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    CanonicalOnb,
    Dft,
    RandomUnitary,
    Rvq,
    Simplex,
}

#[derive(Subcommand)]
enum CodebookCmd {
    Gen {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        n_t: usize,
        #[arg(long = "feedback-bits", default_value_t = 4)]
        feedback_bits: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    Check {
        path: PathBuf,
    },
}

fn load_config(args: &RunArgs) -> Result<SimConfig> {
    let mut cfg = SimConfig::load(&args.config).with_context(|| format!("loading {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(result: &ExperimentResult, args: &RunArgs) -> Result<()> {
    let (scale, unit) = if args.bits { (std::f64::consts::LN_2, "bits") } else { (1.0, "nats") };
    println!("# {:?} config {} seed {}", result.kind, &result.metadata.config_hash[..12], result.metadata.master_seed);
    for s in &result.series {
        println!(
            "{:<14} {:<9} snr {:>6.1} dB  B {:>2}  mean {:.6} {unit}  se {:.6}",
            s.strategy,
            s.metric.name(),
            s.snr_db,
            s.bits,
            s.mean / scale,
            s.std_err / scale
        );
    }
    if let Some(sl) = &result.slopes {
        println!("slope d_hat {:?} d_est {:?} target {}", sl.d_hat, sl.d_est, sl.target);
    }
    if let Some(c) = &result.contrast {
        println!("contrast ra_ratio {:?} zf_ratio {:?} zf_monotone {}", c.ra_gap_ratio, c.zf_gap_ratio, c.zf_gap_monotone);
    }
    for n in &result.notes {
        println!("note: {n}");
    }
    if let Some(out) = &args.out {
        harness::emit(result, out)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn generate(kind: Kind, n_t: usize, bits: u32, seed: u64) -> Result<Codebook> {
    let seed = SeedSpec::new(seed, 0);
    Ok(match kind {
        Kind::CanonicalOnb => Codebook::canonical_onb(n_t),
        Kind::Dft => Codebook::dft(n_t),
        Kind::RandomUnitary => Codebook::random_unitary(n_t, seed),
        Kind::Rvq => Codebook::rvq(n_t, bits, seed),
        Kind::Simplex => {
            if n_t != 3 {
                bail!("the simplex quantiser needs --n-t 3");
            }
            simplex_quantizer(bits)?.to_codebook()
        }
    })
}

fn check(path: &Path) -> Result<()> {
    let cb = load_codebook(path)?;
    println!("size {} dim {}", cb.len(), cb.dim());
    match cb.frame_constant() {
        Some(a) => println!("tight frame, constant {a}"),
        None => println!("not a tight frame"),
    }
    println!("unitary {}", cb.is_unitary());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(a) => report(&harness::run_sum_rate_experiment(&load_config(&a)?)?, &a),
        Command::DeltaRa(a) => report(&harness::run_delta_ra_experiment(&load_config(&a)?)?, &a),
        Command::Scaling(a) => report(&harness::run_scaling_experiment(&load_config(&a)?)?, &a),
        Command::Contrast(a) => report(&harness::run_contrast_experiment(&load_config(&a)?)?, &a),
        Command::Bounds { n_t, feedback_bits, n_s, snr_db } => {
            let r = bounds_report(n_t, feedback_bits, n_s, 10f64.powf(snr_db / 10.0))?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            Ok(())
        }
        Command::Quantizer { feedback_bits, probes } => {
            let q = simplex_quantizer(feedback_bits)?;
            let m = probe_resolution(feedback_bits, probes);
            let measured = measured_delta(&q.points, m);
            println!("points {} construction delta {} measured delta {} probe lattice 1/{m}", q.points.len(), q.delta, measured);
            println!("target 2^(-B/2-1) = {}", (-(feedback_bits as f64) / 2.0 - 1.0).exp2());
            Ok(())
        }
        Command::Codebook(CodebookCmd::Gen { kind, n_t, feedback_bits, seed, out }) => {
            let cb = generate(kind, n_t, feedback_bits, seed)?;
            save_codebook(&cb, &out)?;
            println!("wrote {} codewords to {}", cb.len(), out.display());
            Ok(())
        }
        Command::Codebook(CodebookCmd::Check { path }) => check(&path),
    }
}
