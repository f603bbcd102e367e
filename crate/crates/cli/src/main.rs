//! `klcond`: command-line driver.
//!
//! Exit status is 0 when every verdict passes, 1 when a verdict fails and 2
//! on an error (bad configuration, I/O, exhausted rejection budget).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use klcond_core::analysis::{exact_norm_tail, SpectrumSummary};
use klcond_core::experiment::{
    build_report, coupling_violations, measure_point, sample_point, write_ensemble_summary,
};
use klcond_core::sampling::{sample_unconditional, write_sample_csv};
use klcond_core::verify::{self, DEFAULT_SEED};
use klcond_core::{run_experiment, ExperimentConfig, MethodChoice, Result, Staging, StreamFactory};

#[derive(Parser, Debug)]
#[command(
    name = "klcond",
    version,
    about = "Gaussian fields conditioned on a large L2 norm"
)]
struct Cli {
    /// More log output (-v info, -vv debug). `RUST_LOG` takes precedence.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Discretize the kernel and write `spectrum.json`.
    Spectrum(Common),
    /// Draw unconditional samples and write `samples.csv`.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Number of samples (default: `samples_per_r` from the config).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Sample conditionally on `||phi||^2 > r` at one threshold.
    Condition {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        r: f64,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Number of samples (default: `samples_per_r` from the config).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Full experiment: every threshold, analysis report and manifest.
    Report(Common),
    /// Run the built-in acceptance suite and write `verify.txt`, `verify.json`.
    Verify {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = "klcond-verify")]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration, or a `manifest.json` from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    Auto,
    Rejection,
    Decomposition,
}

impl From<MethodArg> for MethodChoice {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => MethodChoice::Auto,
            MethodArg::Rejection => MethodChoice::Rejection,
            MethodArg::Decomposition => MethodChoice::Decomposition,
        }
    }
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::from_path(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        Ok(config)
    }
}

/// Stages files for `dest`, committing only if `body` succeeds.
fn staged(dest: &Path, body: impl FnOnce(&mut Staging) -> Result<bool>) -> Result<bool> {
    let mut stage = Staging::new(dest)?;
    match body(&mut stage) {
        Ok(pass) => {
            stage.commit()?;
            Ok(pass)
        }
        Err(e) => {
            stage.abort();
            Err(e)
        }
    }
}

fn spectrum(common: &Common) -> Result<bool> {
    let config = common.load()?;
    let decomp = config.decompose()?;
    staged(&config.output_dir, |out| {
        out.write("spectrum.json", &serde_json::to_vec_pretty(&decomp.to_export())?)?;
        println!(
            "{} modes, kappa_1 = {:.6e} (g_1 = {}), trace = {:.6e}, B = {:.6}",
            decomp.mode_count(),
            decomp.kappa1(),
            decomp.g1(),
            decomp.trace(),
            decomp.b_constant()
        );
        Ok(true)
    })
}

fn sample(common: &Common, n: Option<usize>) -> Result<bool> {
    let config = common.load()?;
    let decomp = config.decompose()?;
    let n = n.unwrap_or(config.samples_per_r);
    let recs = sample_unconditional(&decomp, n, &StreamFactory::new(config.seed).fork(0));
    let violations = coupling_violations(&recs, decomp.kappa1(), decomp.b_constant());
    staged(&config.output_dir, |out| {
        let mut csv = Vec::new();
        write_sample_csv(&mut csv, &recs, None)?;
        out.write("samples.csv", &csv)?;
        let mean = recs.iter().map(|r| r.norm2_sq).sum::<f64>() / n.max(1) as f64;
        println!(
            "{n} samples, mean ||phi||^2 = {mean:.6} (trace {:.6})",
            decomp.trace()
        );
        println!("coupled sup-norm violations: {violations}");
        Ok(violations == 0)
    })
}

fn condition(common: &Common, r: f64, method: Option<MethodArg>, n: Option<usize>) -> Result<bool> {
    let config = common.load()?;
    let decomp = config.decompose()?;
    let summary = SpectrumSummary::from_decomposition(&decomp);
    let n = n.unwrap_or(config.samples_per_r);
    let choice = method.map_or(config.method, MethodChoice::from);
    // same stream as `report` when r is one of the configured thresholds
    let index = config
        .r_values
        .iter()
        .position(|&x| x == r)
        .unwrap_or(config.r_values.len());
    let factory = StreamFactory::new(config.seed).fork(1 + index as u64);
    let p_hint = exact_norm_tail(r, &summary).unwrap_or(0.0);
    let ensemble = sample_point(&decomp, r, n, choice, p_hint, &factory, config.attempt_budget)?;
    let point = measure_point(ensemble, &config.eps_values, &decomp, &summary)?;
    let report = build_report(std::slice::from_ref(&point), &summary, &decomp, &[])?;
    staged(&config.output_dir, |out| {
        let e = &point.ensemble;
        let mut csv = Vec::new();
        write_sample_csv(&mut csv, &e.samples, Some(&e.weights))?;
        out.write(&format!("ensemble_r{r}.csv"), &csv)?;
        let mut row = Vec::new();
        write_ensemble_summary(&mut row, std::slice::from_ref(&point))?;
        out.write("ensembles.csv", &row)?;
        out.write("analysis.txt", report.to_text().as_bytes())?;
        println!(
            "r = {r}: {} samples by {}, ESS {:.1}, P(||phi||^2 > r) = {:.6e} +- {:.2e}",
            e.len(),
            e.method.as_str(),
            e.ess,
            e.p_event,
            e.p_event_se
        );
        print!("{}", report.to_text());
        Ok(report.all_pass())
    })
}

fn report(common: &Common) -> Result<bool> {
    let config = common.load()?;
    let outcome = run_experiment(&config)?;
    print!("{}", outcome.report.to_text());
    println!(
        "wrote {} files to {}",
        outcome.files.len(),
        outcome.output_dir.display()
    );
    Ok(outcome.all_pass())
}

fn run_verify(seed: u64, out: &Path) -> Result<bool> {
    let report = verify::run_all(seed)?;
    staged(out, |stage| {
        stage.write("verify.txt", report.to_text().as_bytes())?;
        stage.write("verify.json", report.to_json().as_bytes())?;
        for c in &report.criteria {
            println!("{}", c.summary_line());
        }
        Ok(report.all_pass())
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Spectrum(c) => spectrum(c),
        Command::Sample { common, n } => sample(common, *n),
        Command::Condition { common, r, method, n } => condition(common, *r, *method, *n),
        Command::Report(c) => report(c),
        Command::Verify { seed, out } => run_verify(*seed, out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
