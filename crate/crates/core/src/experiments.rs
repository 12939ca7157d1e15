//! Seeded Monte-Carlo trials, sweeps and statistical verifications.
//!
//! Every trial is a pure function of `(config, profile, overrides, stream)`.
//! Trials of a sweep point run in parallel; their records are collected in
//! trial-index order and reduced sequentially, so output is bit-identical
//! regardless of thread count.
//!
//! CSV schema: header `sweep_value,curve_name,mean,stderr,trials`, one row per
//! (sweep value, curve), numbers printed with 9 significant digits, LF line
//! endings.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::channels::{
    cascaded_gains, compose_aca_channel, draw_channel_set, gen_bs_dris_channel, gen_dris_user_channel, sensing_paths,
};
use crate::comm_metrics::{evaluate, sinr_per_user, sum_rate, upper_bound_rate};
use crate::dris::{mean_mu_bar, sample_reflection, DrisProfile};
use crate::error::{Error, Result};
use crate::linalg::{frob_sq, CMatrix, CVector, C64};
use crate::scene::{derive_stream, place_users, RandomStream, ScenarioConfig, SymbolPower};
use crate::sensing::{
    doa_bias, echo_noise_variance, music_spectrum, peak_loss, sample_covariance, synth_echo, MusicSpectrum,
};
use crate::waveform::{gen_symbols, solve_p1, solve_p2};

/// Stride between sweep points in the per-trial stream index.
pub const POINT_STRIDE: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    SumrateVsPower,
    SumrateVsNd,
    MusicComparison,
    VerifyProp1,
    VerifyThm1,
}

impl SweepKind {
    pub const ALL: [SweepKind; 5] = [
        SweepKind::SumrateVsPower,
        SweepKind::SumrateVsNd,
        SweepKind::MusicComparison,
        SweepKind::VerifyProp1,
        SweepKind::VerifyThm1,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::SumrateVsPower => "sumrate_vs_power",
            SweepKind::SumrateVsNd => "sumrate_vs_nd",
            SweepKind::MusicComparison => "music_comparison",
            SweepKind::VerifyProp1 => "verify_prop1",
            SweepKind::VerifyThm1 => "verify_thm1",
        }
    }

    /// Default sweep grid.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepKind::SumrateVsPower => (0..10).map(|i| -6.0 + 2.0 * i as f64).collect(),
            SweepKind::SumrateVsNd => vec![16.0, 64.0, 256.0, 1024.0],
            SweepKind::MusicComparison => vec![256.0, 1024.0, 4096.0],
            SweepKind::VerifyProp1 | SweepKind::VerifyThm1 => vec![1024.0],
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            SweepKind::SumrateVsPower | SweepKind::SumrateVsNd | SweepKind::VerifyThm1 => 500,
            SweepKind::MusicComparison => 200,
            SweepKind::VerifyProp1 => 100_000,
        }
    }

    fn sweeps_power(self) -> bool {
        self == SweepKind::SumrateVsPower
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config("experiment.kind", format!("unknown sweep kind `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub sweep_values: Vec<f64>,
    pub trials_per_point: usize,
    pub config: ScenarioConfig,
    pub dris: DrisProfile,
    pub output_path: Option<PathBuf>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.dris.validate()?;
        if self.trials_per_point == 0 {
            return Err(Error::config("experiment.trials_per_point", "must be >= 1"));
        }
        if self.sweep_values.is_empty() {
            return Err(Error::config("experiment.sweep_values", "must not be empty"));
        }
        if self.sweep_values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config("experiment.sweep_values", "must be strictly increasing"));
        }
        if self.sweep_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("experiment.sweep_values", "must be finite"));
        }
        if !self.kind.sweeps_power() {
            if let Some(v) = self.sweep_values.iter().find(|v| **v < 0.0 || v.fract() != 0.0) {
                return Err(Error::config(
                    "experiment.sweep_values",
                    format!("element counts must be non-negative integers, got {v}"),
                ));
            }
        }
        if self.kind == SweepKind::VerifyThm1 && self.trials_per_point < 500 {
            return Err(Error::config(
                "experiment.trials_per_point",
                "verify_thm1 needs >= 500 trials",
            ));
        }
        if self.kind == SweepKind::VerifyProp1 && self.trials_per_point < 10_000 {
            return Err(Error::config(
                "experiment.trials_per_point",
                "verify_prop1 needs >= 10000 samples",
            ));
        }
        Ok(())
    }

    fn overrides_for(&self, value: f64) -> SweepOverrides {
        if self.kind.sweeps_power() {
            SweepOverrides {
                p0_dbm: Some(value),
                ..Default::default()
            }
        } else {
            SweepOverrides {
                n_d: Some(value as usize),
                ..Default::default()
            }
        }
    }
}

/// Per-trial parameter overrides applied on top of the scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SweepOverrides {
    pub p0_dbm: Option<f64>,
    pub n_d: Option<usize>,
    /// Value of mu_bar fed to the lower bound only.
    pub bound_mu_bar: Option<f64>,
}

impl SweepOverrides {
    pub fn apply(&self, config: &ScenarioConfig, dris: &DrisProfile) -> (ScenarioConfig, DrisProfile) {
        let mut cfg = config.clone();
        if let Some(p) = self.p0_dbm {
            cfg.p0_dbm = p;
        }
        let prof = match self.n_d {
            Some(n) => dris.with_element_count(n),
            None => dris.clone(),
        };
        (cfg, prof)
    }
}

/// Sum rates of every curve for one trial (bits/s/Hz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRates {
    pub upper_bound: f64,
    pub tradeoff_jam_free: f64,
    pub tradeoff_jammed: f64,
    pub tradeoff_bound: f64,
    pub strict_jam_free: f64,
    pub strict_jammed: f64,
    pub strict_bound: f64,
}

impl CurveRates {
    pub const NAMES: [&'static str; 7] = [
        "upper_bound",
        "tradeoff_jam_free",
        "tradeoff_jammed",
        "tradeoff_bound",
        "strict_jam_free",
        "strict_jammed",
        "strict_bound",
    ];

    pub fn values(&self) -> [f64; 7] {
        [
            self.upper_bound,
            self.tradeoff_jam_free,
            self.tradeoff_jammed,
            self.tradeoff_bound,
            self.strict_jam_free,
            self.strict_jammed,
            self.strict_bound,
        ]
    }
}

/// MUSIC outcome for one waveform with and without the DRIS path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingMetrics {
    pub clean_peak_angle: f64,
    pub jammed_peak_angle: f64,
    pub clean_bias: f64,
    pub jammed_bias: f64,
    pub peak_loss_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingRecord {
    pub strict: SensingMetrics,
    pub tradeoff: SensingMetrics,
}

impl SensingRecord {
    pub const NAMES: [&'static str; 6] = [
        "strict_peak_loss_db",
        "tradeoff_peak_loss_db",
        "strict_bias_clean_deg",
        "strict_bias_jammed_deg",
        "tradeoff_bias_clean_deg",
        "tradeoff_bias_jammed_deg",
    ];

    pub fn values(&self) -> [f64; 6] {
        [
            self.strict.peak_loss_db,
            self.tradeoff.peak_loss_db,
            self.strict.clean_bias,
            self.strict.jammed_bias,
            self.tradeoff.clean_bias,
            self.tradeoff.jammed_bias,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub sweep_value: f64,
    pub rates: CurveRates,
    /// Jammed per-user SINR of the trade-off waveform.
    pub tradeoff_sinr: Vec<f64>,
    pub tradeoff_sinr_bound: Vec<f64>,
    pub tradeoff_sinr_jam_free: Vec<f64>,
    pub strict_sinr: Vec<f64>,
    pub strict_sinr_bound: Vec<f64>,
    pub strict_sinr_jam_free: Vec<f64>,
    pub sensing: Option<SensingRecord>,
}

/// Spectra of one trial, for export.
#[derive(Debug, Clone)]
pub struct TrialSpectra {
    pub strict_clean: MusicSpectrum,
    pub strict_jammed: MusicSpectrum,
    pub tradeoff_clean: MusicSpectrum,
    pub tradeoff_jammed: MusicSpectrum,
}

fn symbol_amplitudes(cfg: &ScenarioConfig, h_pt: &CMatrix) -> Result<Vec<f64>> {
    match cfg.symbol_power {
        SymbolPower::Unit => Ok(vec![1.0; h_pt.nrows()]),
        SymbolPower::Matched => {
            let scale = (cfg.p0_watts() / cfg.n_users as f64).sqrt();
            h_pt.row_iter()
                .map(|r| {
                    let a = scale * r.norm();
                    if a > 0.0 && a.is_finite() {
                        Ok(a)
                    } else {
                        Err(Error::Numerical("user channel has zero norm".into()))
                    }
                })
                .collect()
        }
    }
}

/// One full pipeline pass; see [`run_trial_full`].
pub fn run_trial(
    config: &ScenarioConfig,
    dris: &DrisProfile,
    overrides: &SweepOverrides,
    with_sensing: bool,
    stream: &RandomStream,
) -> Result<TrialRecord> {
    run_trial_full(config, dris, overrides, with_sensing, stream).map(|(r, _)| r)
}

/// Places users, draws channels and both reflection vectors, designs the
/// strict-sensing (P1) and trade-off (P2) waveforms from the pilot-phase
/// channel, evaluates every rate curve under the aged channel, and optionally
/// runs MUSIC on echoes with and without the DRIS sensing path.
pub fn run_trial_full(
    config: &ScenarioConfig,
    dris: &DrisProfile,
    overrides: &SweepOverrides,
    with_sensing: bool,
    stream: &RandomStream,
) -> Result<(TrialRecord, Option<TrialSpectra>)> {
    let (cfg, prof) = overrides.apply(config, dris);
    cfg.validate()?;
    prof.validate()?;

    let placement = place_users(&cfg, &mut stream.fork("place", 0));
    let g = gen_bs_dris_channel(&cfg, &prof)?;
    let set = draw_channel_set(&cfg, &prof, &placement, g, &stream.fork("channels", 0))?;

    let p0 = cfg.p0_watts();
    let sigma2 = cfg.noise_watts()?;
    let amps = symbol_amplitudes(&cfg, &set.h_pt)?;
    let s = gen_symbols(cfg.n_users, cfg.frame_len, &amps, &mut stream.fork("symbols", 0))?;

    let strict = solve_p1(&set.h_pt, &s, p0)?;
    let tradeoff = if cfg.normalize_tradeoff {
        let gain = frob_sq(&set.h_pt) / (set.h_pt.nrows() * set.h_pt.ncols()) as f64;
        let f = 1.0 / gain.sqrt();
        solve_p2(&(&set.h_pt * C64::new(f, 0.0)), &s.scaled(f), &strict.x, cfg.kappa, p0)?
    } else {
        solve_p2(&set.h_pt, &s, &strict.x, cfg.kappa, p0)?
    };

    let n_d = prof.n_d();
    let mu_bar = overrides.bound_mu_bar.unwrap_or_else(|| mean_mu_bar(&prof));
    let no_aca = CMatrix::zeros(set.h_pt.nrows(), set.h_pt.ncols());
    let eval = |x: &CMatrix| -> Result<(crate::comm_metrics::CommReport, Vec<f64>)> {
        let jammed = evaluate(
            &set.h_pt,
            &set.h_aca,
            x,
            &s,
            &set.l_cas_per_user,
            n_d,
            mu_bar,
            p0,
            sigma2,
        )?;
        let free = sinr_per_user(&set.h_pt, &no_aca, x, &s, sigma2)?;
        Ok((jammed, free))
    };
    let (t_rep, t_free) = eval(&tradeoff.x)?;
    let (s_rep, s_free) = eval(&strict.x)?;

    let rates = CurveRates {
        upper_bound: upper_bound_rate(&s.per_user_amplitude, sigma2)?,
        tradeoff_jam_free: sum_rate(&t_free)?,
        tradeoff_jammed: t_rep.sum_rate,
        tradeoff_bound: t_rep.rate_from_bound,
        strict_jam_free: sum_rate(&s_free)?,
        strict_jammed: s_rep.sum_rate,
        strict_bound: s_rep.rate_from_bound,
    };

    let (sensing, spectra) = if with_sensing {
        let (rec, spec) = sensing_pass(&cfg, &prof, &set, &strict.x, &tradeoff.x, stream)?;
        (Some(rec), Some(spec))
    } else {
        (None, None)
    };

    Ok((
        TrialRecord {
            trial_index: 0,
            sweep_value: 0.0,
            rates,
            tradeoff_sinr: t_rep.sinr_per_user,
            tradeoff_sinr_bound: t_rep.sinr_bound_per_user,
            tradeoff_sinr_jam_free: t_free,
            strict_sinr: s_rep.sinr_per_user,
            strict_sinr_bound: s_rep.sinr_bound_per_user,
            strict_sinr_jam_free: s_free,
            sensing,
        },
        spectra,
    ))
}

fn sensing_pass(
    cfg: &ScenarioConfig,
    prof: &DrisProfile,
    set: &crate::channels::ChannelSet,
    x_strict: &CMatrix,
    x_tradeoff: &CMatrix,
    stream: &RandomStream,
) -> Result<(SensingRecord, TrialSpectra)> {
    let blocks = cfg.sensing_redraws;
    let l = cfg.frame_len;
    // block b covers columns [b*l/blocks, (b+1)*l/blocks); block 0 sees phi_DT
    let bounds: Vec<(usize, usize)> = (0..blocks).map(|b| (b * l / blocks, (b + 1) * l / blocks)).collect();
    let mut dris_paths = Vec::with_capacity(blocks);
    let mut direct = CVector::zeros(cfg.n_tx);
    for b in 0..blocks {
        let phi = if b == 0 {
            set.phi_dt.clone()
        } else {
            sample_reflection(prof, &mut stream.fork("sensing_phi", b as u64))
        };
        let p = sensing_paths(cfg, prof, &set.g_bs_dris, &phi)?;
        direct = p.direct;
        dris_paths.push(p.dris);
    }
    let p0 = cfg.p0_watts();
    let sigma2_s = echo_noise_variance(cfg.chi, p0, &direct, cfg.echo_snr_db);
    let theta = cfg.target_angle_rad();
    let zero = CVector::zeros(cfg.n_tx);

    let frame = |x: &CMatrix, tag: &str, jammed: bool| -> Result<CMatrix> {
        let mut y = CMatrix::zeros(cfg.n_tx, l);
        for (b, &(c0, c1)) in bounds.iter().enumerate() {
            let xb = x.columns(c0, c1 - c0).into_owned();
            let h_dris = if jammed { &dris_paths[b] } else { &zero };
            // identical noise for the clean and jammed frames
            let f = synth_echo(
                &direct,
                h_dris,
                cfg.chi,
                &xb,
                sigma2_s,
                theta,
                &mut stream.fork(tag, b as u64),
            )?;
            y.columns_mut(c0, c1 - c0).copy_from(&f.y_s);
        }
        Ok(y)
    };
    let spectrum = |y: &CMatrix| -> Result<MusicSpectrum> {
        music_spectrum(&sample_covariance(y)?, cfg.music_grid_step_deg, 1, cfg.array_spacing)
    };
    let metrics = |x: &CMatrix, tag: &str| -> Result<(SensingMetrics, MusicSpectrum, MusicSpectrum)> {
        let clean = spectrum(&frame(x, tag, false)?)?;
        let jammed = spectrum(&frame(x, tag, true)?)?;
        let m = SensingMetrics {
            clean_peak_angle: clean.peak_angle,
            jammed_peak_angle: jammed.peak_angle,
            clean_bias: doa_bias(&clean, cfg.target_angle_deg),
            jammed_bias: doa_bias(&jammed, cfg.target_angle_deg),
            peak_loss_db: peak_loss(&clean, &jammed)?,
        };
        Ok((m, clean, jammed))
    };
    let (strict, sc, sj) = metrics(x_strict, "echo_noise_strict")?;
    let (tradeoff, tc, tj) = metrics(x_tradeoff, "echo_noise_tradeoff")?;
    Ok((
        SensingRecord { strict, tradeoff },
        TrialSpectra {
            strict_clean: sc,
            strict_jammed: sj,
            tradeoff_clean: tc,
            tradeoff_jammed: tj,
        },
    ))
}

/// Stream of trial `trial` at sweep point `point`.
pub fn trial_stream(master_seed: u64, kind: SweepKind, point: usize, trial: usize) -> RandomStream {
    derive_stream(master_seed, kind.as_str(), point as u64 * POINT_STRIDE + trial as u64)
}

/// Runs `trials` trials in parallel and returns them in index order.
pub fn run_trials(
    config: &ScenarioConfig,
    dris: &DrisProfile,
    overrides: &SweepOverrides,
    with_sensing: bool,
    kind: SweepKind,
    point: usize,
    trials: usize,
) -> Result<Vec<TrialRecord>> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let st = trial_stream(config.master_seed, kind, point, t);
            run_trial(config, dris, overrides, with_sensing, &st)
                .map(|mut r| {
                    r.trial_index = t;
                    r
                })
                .map_err(|e| Error::Trial {
                    trial: t,
                    source: Box::new(e),
                })
        })
        .collect()
}

/// Sample mean and standard error, reduced in slice order.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut sum = 0.0;
    for x in xs {
        sum += x;
    }
    let mean = sum / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let mut ss = 0.0;
    for x in xs {
        ss += (x - mean) * (x - mean);
    }
    (mean, (ss / (n - 1) as f64 / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub sweep_value: f64,
    pub curve: String,
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<CsvRow>,
}

impl SweepTable {
    pub fn get(&self, sweep_value: f64, curve: &str) -> Option<&CsvRow> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == sweep_value && r.curve == curve)
    }

    /// Means of `curve` in sweep order.
    pub fn curve(&self, curve: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.curve == curve).map(|r| r.mean).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sweep_value,curve_name,mean,stderr,trials\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_sig(r.sweep_value),
                r.curve,
                fmt_sig(r.mean),
                fmt_sig(r.stderr),
                r.trials
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    fn push(&mut self, sweep_value: f64, curve: impl Into<String>, samples: &[f64]) {
        let (mean, stderr) = mean_stderr(samples);
        self.rows.push(CsvRow {
            sweep_value,
            curve: curve.into(),
            mean,
            stderr,
            trials: samples.len(),
        });
    }
}

/// `%.9g`-style formatting: 9 significant digits, trailing zeros trimmed.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.8e}", v);
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, v);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{}", trim_zeros(mant), exp)
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Runs every sweep point and, when `output_path` is set, writes the CSV.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    let mut table = SweepTable::default();
    for (point, &value) in spec.sweep_values.iter().enumerate() {
        let ov = spec.overrides_for(value);
        match spec.kind {
            SweepKind::SumrateVsPower | SweepKind::SumrateVsNd => {
                let recs = run_trials(
                    &spec.config,
                    &spec.dris,
                    &ov,
                    false,
                    spec.kind,
                    point,
                    spec.trials_per_point,
                )?;
                for (i, name) in CurveRates::NAMES.iter().enumerate() {
                    let xs: Vec<f64> = recs.iter().map(|r| r.rates.values()[i]).collect();
                    table.push(value, *name, &xs);
                }
            }
            SweepKind::MusicComparison => {
                let recs = run_trials(
                    &spec.config,
                    &spec.dris,
                    &ov,
                    true,
                    spec.kind,
                    point,
                    spec.trials_per_point,
                )?;
                for (i, name) in SensingRecord::NAMES.iter().enumerate() {
                    let xs: Vec<f64> = recs
                        .iter()
                        .map(|r| r.sensing.expect("sensing requested").values()[i])
                        .collect();
                    table.push(value, *name, &xs);
                }
            }
            SweepKind::VerifyProp1 => {
                let (cfg, prof) = ov.apply(&spec.config, &spec.dris);
                let st = derive_stream(cfg.master_seed, spec.kind.as_str(), point as u64 * POINT_STRIDE);
                let rep = verify_prop1_with_stream(&cfg, &prof, spec.trials_per_point, &st)?;
                let n = rep.n_samples;
                let mut row = |curve: &str, mean: f64, stderr: f64| {
                    table.rows.push(CsvRow {
                        sweep_value: value,
                        curve: curve.into(),
                        mean,
                        stderr,
                        trials: n,
                    })
                };
                row(
                    "variance_ratio",
                    rep.variance_ratio.unwrap_or(f64::NAN),
                    rep.variance_ratio_stderr,
                );
                row("mean_re", rep.mean.re, rep.mean_stderr);
                row("mean_im", rep.mean.im, rep.mean_stderr);
                row("skewness", rep.skewness, 0.0);
                row("excess_kurtosis", rep.excess_kurtosis, 0.0);
            }
            SweepKind::VerifyThm1 => {
                let recs = run_trials(
                    &spec.config,
                    &spec.dris,
                    &ov,
                    false,
                    spec.kind,
                    point,
                    spec.trials_per_point,
                )?;
                let k = spec.config.n_users;
                for u in 0..k {
                    let xs: Vec<f64> = recs.iter().map(|r| r.tradeoff_sinr[u]).collect();
                    table.push(value, format!("sinr_user{u}"), &xs);
                    let bs: Vec<f64> = recs.iter().map(|r| r.tradeoff_sinr_bound[u]).collect();
                    table.push(value, format!("bound_user{u}"), &bs);
                }
                let xs: Vec<f64> = recs.iter().map(|r| r.rates.tradeoff_jammed).collect();
                table.push(value, "jammed_rate", &xs);
                let xs: Vec<f64> = recs.iter().map(|r| r.rates.tradeoff_bound).collect();
                table.push(value, "bound_rate", &xs);
            }
        }
    }
    if let Some(path) = &spec.output_path {
        table.write_csv(path)?;
    }
    Ok(table)
}

/// Pooled statistics of aged-channel entries against the large-N_D Gaussian law.
#[derive(Debug, Clone, PartialEq)]
pub struct Prop1Report {
    pub n_samples: usize,
    pub n_d: usize,
    pub mu_bar: f64,
    pub mean: C64,
    /// Standard error of the pooled mean, `sqrt(variance / n)`.
    pub mean_stderr: f64,
    pub variance: f64,
    /// Average of `L_cas,k N_D mu_bar` over the pooled entries.
    pub expected_variance: f64,
    /// `variance / expected_variance`; `None` when the expected variance is 0.
    pub variance_ratio: Option<f64>,
    pub variance_ratio_stderr: f64,
    /// Of the real and imaginary parts after per-user standardization.
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl Prop1Report {
    pub fn mean_within(&self, n_se: f64) -> bool {
        self.mean.norm() <= n_se * self.mean_stderr
    }
}

/// See [`verify_prop1_with_stream`]; stream from `(master_seed, "verify_prop1", 0)`.
pub fn verify_prop1(config: &ScenarioConfig, dris: &DrisProfile, n_samples: usize) -> Result<Prop1Report> {
    let st = derive_stream(config.master_seed, SweepKind::VerifyProp1.as_str(), 0);
    verify_prop1_with_stream(config, dris, n_samples, &st)
}

/// Pools `n_samples` entries of the aged channel. Users are placed once; each
/// draw refreshes `H_I`, `phi_PT` and `phi_DT` and contributes the entries of
/// one antenna row (cycling through rows) for all `K` users. Entries of one
/// row are mutually uncorrelated since the users' `H_I` columns are
/// independent and zero-mean.
pub fn verify_prop1_with_stream(
    config: &ScenarioConfig,
    dris: &DrisProfile,
    n_samples: usize,
    stream: &RandomStream,
) -> Result<Prop1Report> {
    config.validate()?;
    dris.validate()?;
    if n_samples < 10_000 {
        return Err(Error::invalid(format!(
            "verify_prop1 needs >= 10000 samples, got {n_samples}"
        )));
    }
    let k = config.n_users;
    let n_d = dris.n_d();
    let mu_bar = mean_mu_bar(dris);
    let placement = place_users(config, &mut stream.fork("place", 0));
    let l_cas = cascaded_gains(&placement)?;
    let g = gen_bs_dris_channel(config, dris)?;
    let draws = n_samples.div_ceil(k);

    let per_draw: Vec<Vec<(C64, f64)>> = (0..draws)
        .into_par_iter()
        .map(|i| -> Result<Vec<(C64, f64)>> {
            let st = stream.fork("draw", i as u64);
            let h_i = gen_dris_user_channel(&placement, config, dris, &mut st.fork("h_dris_user", 0))?;
            let phi_pt = sample_reflection(dris, &mut st.fork("phi", 0));
            let phi_dt = sample_reflection(dris, &mut st.fork("phi", 1));
            let row = i % config.n_tx;
            let g_row = g.rows(row, 1).into_owned();
            let aca = compose_aca_channel(&g_row, &phi_pt, &phi_dt, &h_i)?;
            Ok((0..k).map(|u| (aca[(u, 0)], l_cas[u] * n_d as f64 * mu_bar)).collect())
        })
        .collect::<Result<_>>()?;

    let samples: Vec<(C64, f64)> = per_draw.into_iter().flatten().take(n_samples).collect();
    let n = samples.len() as f64;
    let mut mean = C64::new(0.0, 0.0);
    let mut expected = 0.0;
    for (z, v) in &samples {
        mean += z;
        expected += v;
    }
    mean /= n;
    expected /= n;
    let mut variance = 0.0;
    let mut m4 = 0.0;
    for (z, _) in &samples {
        let d = (z - mean).norm_sqr();
        variance += d;
        m4 += d * d;
    }
    variance /= n;
    m4 /= n;
    // sampling spread of the variance estimate from |z|^2 moments
    let var_of_var = ((m4 - variance * variance) / n).max(0.0);

    let (mut s3, mut s4, mut cnt) = (0.0, 0.0, 0.0);
    if mu_bar > 0.0 && n_d > 0 {
        for (z, v) in &samples {
            let sd = (v / 2.0).sqrt();
            if sd > 0.0 {
                for part in [z.re / sd, z.im / sd] {
                    s3 += part.powi(3);
                    s4 += part.powi(4);
                    cnt += 1.0;
                }
            }
        }
    }
    let (skewness, excess_kurtosis) = if cnt > 0.0 {
        (s3 / cnt, s4 / cnt - 3.0)
    } else {
        (f64::NAN, f64::NAN)
    };

    let variance_ratio = (expected > 0.0).then(|| variance / expected);
    Ok(Prop1Report {
        n_samples: samples.len(),
        n_d,
        mu_bar,
        mean,
        mean_stderr: (variance / n).sqrt(),
        variance,
        expected_variance: expected,
        variance_ratio,
        variance_ratio_stderr: if expected > 0.0 {
            var_of_var.sqrt() / expected
        } else {
            0.0
        },
        skewness,
        excess_kurtosis,
    })
}

/// Monte-Carlo check of the SINR lower bound for the trade-off waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct Thm1Report {
    pub trials: usize,
    pub mean_sinr: Vec<f64>,
    pub mean_bound: Vec<f64>,
    /// Users whose mean SINR falls below `(1 - slack)` times the mean bound.
    pub flagged: Vec<usize>,
    pub mean_jammed_rate: f64,
    pub mean_bound_rate: f64,
}

pub const THM1_SLACK: f64 = 0.02;

pub fn verify_thm1(config: &ScenarioConfig, dris: &DrisProfile, trials: usize) -> Result<Thm1Report> {
    verify_thm1_with(config, dris, trials, &SweepOverrides::default())
}

/// As [`verify_thm1`] with explicit overrides (e.g. a different `mu_bar` fed to
/// the bound).
pub fn verify_thm1_with(
    config: &ScenarioConfig,
    dris: &DrisProfile,
    trials: usize,
    overrides: &SweepOverrides,
) -> Result<Thm1Report> {
    if trials < 500 {
        return Err(Error::invalid(format!("verify_thm1 needs >= 500 trials, got {trials}")));
    }
    let recs = run_trials(config, dris, overrides, false, SweepKind::VerifyThm1, 0, trials)?;
    let k = config.n_users;
    let mean_sinr: Vec<f64> = (0..k)
        .map(|u| mean_stderr(&recs.iter().map(|r| r.tradeoff_sinr[u]).collect::<Vec<_>>()).0)
        .collect();
    let mean_bound: Vec<f64> = (0..k)
        .map(|u| mean_stderr(&recs.iter().map(|r| r.tradeoff_sinr_bound[u]).collect::<Vec<_>>()).0)
        .collect();
    let flagged = (0..k)
        .filter(|&u| mean_sinr[u] < mean_bound[u] * (1.0 - THM1_SLACK))
        .collect();
    let rates = |f: fn(&TrialRecord) -> f64| mean_stderr(&recs.iter().map(f).collect::<Vec<_>>()).0;
    Ok(Thm1Report {
        trials,
        mean_sinr,
        mean_bound,
        flagged,
        mean_jammed_rate: rates(|r| r.rates.tradeoff_jammed),
        mean_bound_rate: rates(|r| r.rates.tradeoff_bound),
    })
}
