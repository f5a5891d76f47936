use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tvdd::harness::{self, ExperimentConfig, ExperimentKind};
use tvdd::Result;

/// Total-variation reconstruction by domain decomposition.
#[derive(Parser)]
#[command(name = "tvdd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Interpolate a 1D signal known only outside an interval.
    Interpolate1d {
        #[command(flatten)]
        common: Common,
        /// Signal CSV, one value per line (a step signal when absent).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Observation mask CSV, nonzero = observed.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Unobserved interval as START END.
        #[arg(long, num_args = 2, value_names = ["START", "END"])]
        gap: Option<Vec<usize>>,
        /// Length of the synthetic signal.
        #[arg(long)]
        length: Option<usize>,
        /// Skip the run without partition-of-unity correction.
        #[arg(long)]
        no_ablation: bool,
    },
    /// Inpaint a grayscale image with four overlapping stripes.
    Inpaint2d {
        #[command(flatten)]
        common: Common,
        /// Image PGM (a synthetic phantom when absent).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Mask PGM, 0 = missing.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Side of the synthetic image.
        #[arg(long)]
        size: Option<usize>,
    },
    /// Reconstruct an image from partial Fourier samples.
    CsFourier {
        #[command(flatten)]
        common: Common,
        /// Ground-truth PGM (a synthetic phantom when absent).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Sampled frequencies, one multi-index per line.
        #[arg(long)]
        frequencies: Option<PathBuf>,
        /// Fraction of sampled frequencies in (0, 1].
        #[arg(long)]
        fraction: Option<f64>,
        /// Side of the always-sampled low-frequency block.
        #[arg(long)]
        low_block: Option<usize>,
        /// Side of the synthetic phantom.
        #[arg(long)]
        size: Option<usize>,
        /// Use the parallel nonoverlapping scheme.
        #[arg(long)]
        parallel: bool,
    },
    /// Run quick internal consistency checks.
    Selftest,
}

#[derive(Args)]
struct Common {
    /// JSON config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    subdomains: Option<usize>,
    /// Grid lines shared by neighbouring subdomains.
    #[arg(long)]
    overlap: Option<usize>,
    #[arg(long)]
    no_partition_correction: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the iterate after every outer iteration.
    #[arg(long)]
    snapshots: bool,
    #[arg(long)]
    outer_iters: Option<usize>,
}

impl Common {
    fn resolve(&self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p, kind)?,
            None => ExperimentConfig::defaults(kind),
        };
        if let Some(a) = self.alpha {
            cfg.alpha = Some(a);
        }
        if let Some(j) = self.subdomains {
            cfg.subdomains = j;
        }
        if let Some(o) = self.overlap {
            cfg.overlap = o;
        }
        if self.no_partition_correction {
            cfg.solver.use_partition_correction = false;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        cfg.snapshots |= self.snapshots;
        if let Some(n) = self.outer_iters {
            cfg.solver.outer_iters = n;
        }
        if let Some(t) = harness::threads_from_env()? {
            cfg.solver.threads = t;
        }
        Ok(cfg)
    }
}

fn build(command: Command) -> Result<Option<ExperimentConfig>> {
    let cfg = match command {
        Command::Selftest => return Ok(None),
        Command::Interpolate1d {
            common,
            input,
            mask,
            gap,
            length,
            no_ablation,
        } => {
            let mut cfg = common.resolve(ExperimentKind::Interpolate1d)?;
            cfg.input = input.or(cfg.input);
            cfg.mask = mask.or(cfg.mask);
            if let Some(g) = gap {
                cfg.gap = Some([g[0], g[1]]);
            }
            cfg.length = length.unwrap_or(cfg.length);
            cfg.ablation &= !no_ablation;
            cfg
        }
        Command::Inpaint2d {
            common,
            input,
            mask,
            size,
        } => {
            let mut cfg = common.resolve(ExperimentKind::Inpaint2d)?;
            cfg.input = input.or(cfg.input);
            cfg.mask = mask.or(cfg.mask);
            cfg.size = size.unwrap_or(cfg.size);
            cfg
        }
        Command::CsFourier {
            common,
            input,
            frequencies,
            fraction,
            low_block,
            size,
            parallel,
        } => {
            let mut cfg = common.resolve(ExperimentKind::CsFourier)?;
            cfg.input = input.or(cfg.input);
            cfg.frequencies = frequencies.or(cfg.frequencies);
            cfg.fraction = fraction.unwrap_or(cfg.fraction);
            cfg.low_block = low_block.unwrap_or(cfg.low_block);
            cfg.size = size.unwrap_or(cfg.size);
            if parallel {
                cfg.algorithm = tvdd::solver::Algorithm::ParallelNonoverlapping;
            }
            cfg
        }
    };
    Ok(Some(cfg))
}

fn run(command: Command) -> Result<bool> {
    let Some(cfg) = build(command)? else {
        let checks = harness::selftest()?;
        let mut ok = true;
        for c in &checks {
            println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            ok &= c.passed;
        }
        return Ok(ok);
    };
    let art = harness::run(&cfg)?;
    let r = &art.report;
    println!(
        "{}: {} outer iterations, final energy {:.6e}, output in {}",
        cfg.experiment.name(),
        r.outer_iterations,
        r.final_energy,
        art.out_dir.display()
    );
    if let Some(e) = r.relative_error {
        println!("relative error {e:.4e}");
    }
    if let Some(a) = &r.ablation {
        println!(
            "without correction: max component norm {:.4e} ({:.2} x data norm){}",
            a.max_component_norm,
            a.max_component_norm / a.data_norm,
            if a.unbounded { ", unbounded" } else { "" }
        );
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
