use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use coupled_oamp::error::{Error, Result};
use coupled_oamp::harness::diag::gaussianity_report;
use coupled_oamp::harness::output::{self, Metadata};
use coupled_oamp::harness::{Ensemble, ExperimentConfig, run_comparison, run_se, run_sweep, with_threads};

#[derive(Parser)]
#[command(name = "coupled-oamp", about = "OAMP for spatially coupled compressed sensing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo sweep over compression rates and damping factors.
    Run {
        #[command(flatten)]
        overrides: Overrides,
        /// Also sweep the uncoupled system at the same overall rates.
        #[arg(long, conflicts_with = "uncoupled")]
        compare: bool,
    },
    /// State evolution only, to the fixed point.
    Se(Overrides),
    /// Statistics of the A→B error vectors at the configured checkpoints.
    Diag(Overrides),
    /// Print the version.
    Version,
}

#[derive(Args)]
struct Overrides {
    /// TOML experiment file; missing fields take the desk-scale defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Per-section compression rates, comma separated.
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<f64>>,
    /// Damping grid, comma separated.
    #[arg(long, value_delimiter = ',')]
    zeta: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    ensemble: Option<Ensemble>,
    /// Force the uncoupled system (L = 1, W = 0).
    #[arg(long)]
    uncoupled: bool,
    #[arg(long)]
    sections: Option<usize>,
    #[arg(long)]
    coupling_width: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Diagnostic checkpoints (0-based iterations), comma separated.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<usize>>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

impl Overrides {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    c.$field = v;
                }
            )*};
        }
        set!(trials, seed, ensemble, sections, coupling_width, n, rho, kappa, snr_db, iterations);
        if let Some(d) = &self.delta {
            c.deltas = d.clone();
        }
        if let Some(z) = &self.zeta {
            c.zeta = z.clone();
        }
        if let Some(cp) = &self.checkpoints {
            c.diagnostics.checkpoints = cp.clone();
        }
        if self.out.is_some() {
            c.out = self.out.clone();
        }
        if self.uncoupled {
            c = c.uncoupled();
        }
        c.validate()?;
        Ok(c)
    }
}

fn settings(c: &ExperimentConfig) -> Vec<(usize, usize)> {
    vec![(c.sections, c.coupling_width)]
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Version => {
            println!("coupled-oamp {}", env!("CARGO_PKG_VERSION"));
        }
        Command::Run { overrides: o, compare } => {
            let c = o.resolve()?;
            let results = if compare {
                with_threads(o.threads, || run_comparison(&c))??.to_vec()
            } else {
                vec![with_threads(o.threads, || run_sweep(&c))??]
            };
            let out = c.out.as_deref();
            let mut w = output::open_output(out)?;
            w.write_all(output::sweep_csv(&results)?.as_bytes())
                .and_then(|_| w.flush())
                .map_err(|source| Error::Io {
                    path: out.map(PathBuf::from).unwrap_or_else(|| "<stdout>".into()),
                    source,
                })?;
            if let Some(p) = out {
                let settings = results.iter().map(|r| (r.sections, r.width)).collect();
                let secs = results.iter().map(|r| r.wall_clock_secs).sum();
                output::write_metadata(&Metadata::new("run", &c, settings, secs), p)?;
            }
            for res in &results {
                for p in &res.points {
                    let best = p.best_result();
                    eprintln!(
                        "L {} W {} delta {:<8.6} rate {:<8.4} best zeta {:<5} mean largest MSE {:<12.4e} SE {:.4e} failed {}",
                        res.sections,
                        res.width,
                        p.delta,
                        p.overall_rate,
                        best.map_or("-".into(), |b| b.zeta.to_string()),
                        p.best_mean().unwrap_or(f64::NAN),
                        p.se_largest,
                        best.map_or(c.trials, |b| b.failed()),
                    );
                }
            }
        }
        Command::Se(o) => {
            let c = o.resolve()?;
            let started = Instant::now();
            let runs = run_se(&c, None)?;
            let out = c.out.as_deref();
            output::write_se_csv(output::open_output(out)?, &runs, out.unwrap_or("<stdout>".as_ref()))?;
            if let Some(p) = out {
                let meta = Metadata::new("se", &c, settings(&c), started.elapsed().as_secs_f64());
                output::write_metadata(&meta, p)?;
            }
            for (d, _, traj) in &runs {
                eprintln!(
                    "delta {:<6} largest v_B {:.4e} after {} steps{}",
                    d,
                    traj.last().largest_v_b(),
                    traj.last().t,
                    if traj.converged_at.is_some() { "" } else { " (not converged)" },
                );
            }
        }
        Command::Diag(o) => {
            let c = o.resolve()?;
            let started = Instant::now();
            let checkpoints = c.diagnostics.checkpoints.clone();
            let report = with_threads(o.threads, || gaussianity_report(&c, &checkpoints))??;
            let out = c.out.as_deref();
            output::write_diag_csv(output::open_output(out)?, &report, out.unwrap_or("<stdout>".as_ref()))?;
            if let Some(p) = out {
                let meta = Metadata::new("diag", &c, settings(&c), started.elapsed().as_secs_f64());
                output::write_metadata(&meta, p)?;
            }
            for r in &report.rows {
                eprintln!(
                    "t {:<3} section {:<3} kurtosis {:+.4} skewness {:+.4} corr {:+.2e} var {:.4e} (SE {:.4e})",
                    r.t, r.section, r.excess_kurtosis, r.skewness, r.correlation, r.empirical_var, r.predicted_var
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
