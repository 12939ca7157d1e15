//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use crate::config::{apply_overrides, load_config, RunConfig, KEYS};
use crate::dris::mean_mu_bar;
use crate::error::{Error, Result};
use crate::experiments::{
    fmt_sig, run_sweep, run_trial_full, trial_stream, verify_prop1, verify_thm1, SweepKind, SweepOverrides,
};
use crate::sensing::write_spectrum_csv;

#[derive(Debug, Parser)]
#[command(
    name = "disco-isac",
    version,
    about = "ISAC downlink simulator under DISCO RIS jamming"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Configuration file (TOML key/value).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output path; stdout when omitted.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override one key, e.g. --set dris.n_h=16 (repeatable, last wins).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Trials per sweep point; samples for `verify prop1`.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Suppress progress and summaries on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte-Carlo sweep and write its CSV.
    Simulate {
        /// Sweep kind; defaults to experiment.kind.
        kind: Option<String>,
    },
    /// Statistical check of the ACA law or the SINR lower bound.
    Verify { which: Verification },
    /// Print the ACA variance scalar of the configured codebook.
    MuBar,
    /// Export one MUSIC spectrum as `angle_deg,value` CSV.
    Spectrum {
        #[arg(value_enum, default_value_t = SpectrumVariant::TradeoffJammed)]
        variant: SpectrumVariant,
        /// Trial index whose stream is used.
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Verification {
    Prop1,
    Thm1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpectrumVariant {
    StrictClean,
    StrictJammed,
    TradeoffClean,
    TradeoffJammed,
}

fn keys_help() -> String {
    let mut s = String::from("Configuration keys (file or --set):\n");
    for (k, unit) in KEYS {
        s.push_str(&format!("  {k:<30} {unit}\n"));
    }
    s.push_str("\nThread count: RAYON_NUM_THREADS.\nExit codes: 0 ok, 1 invalid input, 2 runtime failure.");
    s
}

pub fn command() -> clap::Command {
    Cli::command().after_help(keys_help())
}

fn resolve_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut cfg, &g.set)?;
    if let Some(seed) = g.seed {
        cfg.scenario.master_seed = seed;
    }
    if let Some(t) = g.trials {
        cfg.experiment.trials_per_point = Some(t);
    }
    if let Some(o) = &g.output {
        cfg.experiment.output_path = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Io {
            path: p.display().to_string(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let cfg = resolve_config(g)?;
    let note = |msg: String| {
        if !g.quiet {
            eprintln!("{msg}");
        }
    };
    match cli.command {
        Command::Simulate { kind } => {
            let kind = kind.map(|k| k.parse::<SweepKind>()).transpose()?;
            let mut spec = cfg.sweep_spec(kind)?;
            let out = spec.output_path.take();
            note(format!(
                "{}: {} points x {} trials",
                spec.kind,
                spec.sweep_values.len(),
                spec.trials_per_point
            ));
            let table = run_sweep(&spec)?;
            emit(out.as_deref(), &table.to_csv())?;
        }
        Command::Verify { which } => {
            let text = match which {
                Verification::Prop1 => {
                    let n = g.trials.unwrap_or(100_000);
                    let r = verify_prop1(&cfg.scenario, &cfg.dris, n)?;
                    format!(
                        "samples {}\nn_d {}\nmu_bar {}\nmean_re {}\nmean_im {}\nmean_stderr {}\nvariance {}\n\
                         expected_variance {}\nvariance_ratio {}\nskewness {}\nexcess_kurtosis {}\n\
                         mean_within_3se {}\n",
                        r.n_samples,
                        r.n_d,
                        fmt_sig(r.mu_bar),
                        fmt_sig(r.mean.re),
                        fmt_sig(r.mean.im),
                        fmt_sig(r.mean_stderr),
                        fmt_sig(r.variance),
                        fmt_sig(r.expected_variance),
                        r.variance_ratio.map(fmt_sig).unwrap_or_else(|| "undefined".into()),
                        fmt_sig(r.skewness),
                        fmt_sig(r.excess_kurtosis),
                        r.mean_within(3.0),
                    )
                }
                Verification::Thm1 => {
                    let n = g.trials.unwrap_or(500);
                    let r = verify_thm1(&cfg.scenario, &cfg.dris, n)?;
                    let mut s = String::from("user,mean_sinr,mean_bound,flagged\n");
                    for (u, (m, b)) in r.mean_sinr.iter().zip(&r.mean_bound).enumerate() {
                        s.push_str(&format!(
                            "{u},{},{},{}\n",
                            fmt_sig(*m),
                            fmt_sig(*b),
                            r.flagged.contains(&u)
                        ));
                    }
                    note(format!(
                        "trials {}: jammed rate {} vs bound rate {}, {} flagged",
                        r.trials,
                        fmt_sig(r.mean_jammed_rate),
                        fmt_sig(r.mean_bound_rate),
                        r.flagged.len()
                    ));
                    s
                }
            };
            emit(cfg.experiment.output_path.as_deref(), &text)?;
        }
        Command::MuBar => {
            emit(
                cfg.experiment.output_path.as_deref(),
                &format!("{}\n", fmt_sig(mean_mu_bar(&cfg.dris))),
            )?;
        }
        Command::Spectrum { variant, trial } => {
            let st = trial_stream(cfg.scenario.master_seed, SweepKind::MusicComparison, 0, trial);
            let (_, spectra) = run_trial_full(&cfg.scenario, &cfg.dris, &SweepOverrides::default(), true, &st)
                .map_err(|e| Error::Trial {
                    trial,
                    source: Box::new(e),
                })?;
            let sp = spectra.expect("sensing requested");
            let chosen = match variant {
                SpectrumVariant::StrictClean => &sp.strict_clean,
                SpectrumVariant::StrictJammed => &sp.strict_jammed,
                SpectrumVariant::TradeoffClean => &sp.tradeoff_clean,
                SpectrumVariant::TradeoffJammed => &sp.tradeoff_jammed,
            };
            note(format!("peak at {} deg", fmt_sig(chosen.peak_angle)));
            let mut buf = Vec::new();
            write_spectrum_csv(chosen, &mut buf).map_err(|source| Error::Io {
                path: "<buffer>".into(),
                source,
            })?;
            emit(
                cfg.experiment.output_path.as_deref(),
                std::str::from_utf8(&buf).expect("ascii csv"),
            )?;
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 1;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
