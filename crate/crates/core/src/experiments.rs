//! Monte Carlo experiments, their configuration, and CSV output.
//!
//! Configuration is TOML. Values are resolved in order preset, file, then
//! command-line overrides, each layer replacing keys of the previous one:
//!
//! ```toml
//! experiment = "esd2"      # esd2 | esd3 | alignment-map | benchmark | phase
//! trials = 10
//! master_seed = 42
//! output_dir = "out"
//! bins = 60
//! eta = 1e-6
//! emit_plots = false
//!
//! [general]                # esd2, esd3, alignment-map
//! n1 = 600
//! n2 = 400
//! n3 = 200
//! beta_m = 1.5
//! rho_t = 2.0              # exactly one of beta_t, rho_t, varrho
//!
//! [multiview]              # benchmark
//! p = 150
//! n = 300
//! m = 60
//!
//! [grid]
//! rho_t = { start = 0.05, stop = 5.0, count = 100 }
//! beta_m = { start = 0.05, stop = 3.0, count = 100 }
//! mu_norm = { start = 0.0, stop = 5.0, count = 11 }
//! h_norm = [0.5, 1.5]
//! mc_points = [[2.0, 1.5]] # (rho_t, beta_m) pairs simulated by alignment-map
//! ```
//!
//! Every CSV starts with a `#` comment line carrying the artifact version,
//! the SHA-256 of the resolved config (output location excluded) and the
//! master seed. Per-trial values are written with 17 significant digits,
//! summary columns with 6 decimals. Wall-clock time goes to the log only, so
//! reruns produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::{
    alignment, cluster_accuracy, oracle_estimate, tensor_rank1_estimate, unfolding_estimate, Init,
};
use crate::model::{derive_seed, sample_general, sample_multiview, GeneralParams, MultiViewParams, Snr};
use crate::spectra::{center_scale_coefficients, Centering, EsdSummary};
use crate::stats::{ks_distance, mean, sorted, std_dev};
use crate::tensor::{normalized, Mode};
use crate::theory::{
    accuracy_from_alignment, mode2_alignment_signed, multiview_oracle_alignment, multiview_zeta,
    phase_transition_asymptote, phase_transition_rho, spike2, spike3, Law, ShapeRatios,
    SpikePrediction,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const HOPM_MAX_ITERS: usize = 200;
const HOPM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Esd2,
    Esd3,
    AlignmentMap,
    Benchmark,
    Phase,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Esd2 => "esd2",
            Experiment::Esd3 => "esd3",
            Experiment::AlignmentMap => "alignment-map",
            Experiment::Benchmark => "benchmark",
            Experiment::Phase => "phase",
        }
    }

    /// Preset used when neither a config file nor a preset is given.
    pub fn default_preset(self) -> &'static str {
        match self {
            Experiment::Esd2 => "fig1-left",
            Experiment::Esd3 => "fig1-right",
            Experiment::AlignmentMap => "fig2",
            Experiment::Benchmark => "fig3",
            Experiment::Phase => "phase",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralSection {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub beta_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub varrho: Option<f64>,
}

impl GeneralSection {
    pub fn snr(&self) -> Result<Snr> {
        match (self.beta_t, self.rho_t, self.varrho) {
            (Some(b), None, None) => Ok(Snr::BetaT(b)),
            (None, Some(r), None) => Ok(Snr::RhoT(r)),
            (None, None, Some(v)) => Ok(Snr::Varrho(v)),
            _ => Err(Error::Config(
                "[general] needs exactly one of beta_t, rho_t, varrho".into(),
            )),
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.n1, self.n2, self.n3]
    }

    pub fn params(&self, seed: u64) -> Result<GeneralParams> {
        GeneralParams::new(self.dims(), self.beta_m, self.snr()?, seed)
            .map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiViewSection {
    pub p: usize,
    pub n: usize,
    pub m: usize,
}

/// `count` evenly spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => vec![],
            1 => vec![self.start],
            c => (0..c)
                .map(|k| self.start + (self.stop - self.start) * k as f64 / (c - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_t: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_m: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_norm: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_norm: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mc_points: Vec<[f64; 2]>,
}

fn default_trials() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_bins() -> usize {
    60
}

fn default_eta() -> f64 {
    crate::theory::DEFAULT_ETA
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub emit_plots: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub general: Option<GeneralSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiview: Option<MultiViewSection>,
    #[serde(default)]
    pub grid: GridSection,
}

/// Command-line overrides; `None` leaves the lower layers alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub bins: Option<usize>,
    pub eta: Option<f64>,
    pub emit_plots: bool,
}

// Reference parameter sets.
const PRESET_MODE2_SPECTRUM: &str = r#"
# mode-2 spectrum, rho_T = 2, beta_M = 1.5
experiment = "esd2"
trials = 10
bins = 80
[general]
n1 = 600
n2 = 400
n3 = 200
beta_m = 1.5
rho_t = 2.0
"#;

const PRESET_MODE3_SPECTRUM: &str = r#"
# mode-3 spectrum, varrho = 4, beta_M = 3
experiment = "esd3"
trials = 10
bins = 60
[general]
n1 = 600
n2 = 400
n3 = 200
beta_m = 3.0
varrho = 4.0
"#;

const PRESET_ALIGNMENT_MAP: &str = r#"
# alignment map over (rho_T, beta_M), c = (1/2, 1/3, 1/6)
experiment = "alignment-map"
trials = 10
[general]
n1 = 600
n2 = 400
n3 = 200
beta_m = 1.5
rho_t = 2.0
[grid]
rho_t = { start = 0.05, stop = 5.0, count = 100 }
beta_m = { start = 0.05, stop = 3.0, count = 100 }
"#;

const PRESET_BENCHMARK: &str = r#"
# multi-view clustering benchmark, (p, n, m) = (150, 300, 60)
experiment = "benchmark"
trials = 10
[multiview]
p = 150
n = 300
m = 60
[grid]
mu_norm = { start = 0.0, stop = 5.0, count = 11 }
h_norm = [0.5, 1.5]
"#;

const PRESET_PHASE: &str = r#"
# detectability threshold rho_T*(beta_M), c = (1/2, 1/3, 1/6)
experiment = "phase"
[general]
n1 = 600
n2 = 400
n3 = 200
beta_m = 1.0
rho_t = 1.0
[grid]
beta_m = { start = 0.6, stop = 3.0, count = 241 }
"#;

pub const PRESETS: [&str; 5] = ["fig1-left", "fig1-right", "fig2", "fig3", "phase"];

pub fn preset_source(name: &str) -> Result<&'static str> {
    match name {
        "fig1-left" => Ok(PRESET_MODE2_SPECTRUM),
        "fig1-right" => Ok(PRESET_MODE3_SPECTRUM),
        "fig2" => Ok(PRESET_ALIGNMENT_MAP),
        "fig3" => Ok(PRESET_BENCHMARK),
        "phase" => Ok(PRESET_PHASE),
        other => Err(Error::Config(format!(
            "unknown preset '{other}' (known: {})",
            PRESETS.join(", ")
        ))),
    }
}

fn parse_table(src: &str, origin: &str) -> Result<toml::Table> {
    src.parse::<toml::Table>()
        .map_err(|e| Error::Config(format!("{origin}: {e}")))
}

fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl ExperimentConfig {
    /// Layers preset, config file and overrides for `experiment`.
    ///
    /// With neither a preset nor a file the experiment's default preset is used.
    pub fn resolve(
        experiment: Experiment,
        preset: Option<&str>,
        file: Option<&Path>,
        overrides: &Overrides,
    ) -> Result<Self> {
        let mut table = toml::Table::new();
        let preset = match (preset, file) {
            (None, None) => Some(experiment.default_preset()),
            (p, _) => p,
        };
        if let Some(name) = preset {
            merge(&mut table, parse_table(preset_source(name)?, name)?);
        }
        if let Some(path) = file {
            let src = fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            merge(&mut table, parse_table(&src, &path.display().to_string())?);
        }
        match table.get("experiment").and_then(|v| v.as_str()) {
            Some(name) if name != experiment.name() => {
                return Err(Error::Config(format!(
                    "config is for experiment '{name}' but '{}' was requested",
                    experiment.name()
                )))
            }
            _ => {
                table.insert("experiment".into(), experiment.name().into());
            }
        }
        let mut cfg = Self::from_table(table)?;
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(src: &str) -> Result<Self> {
        let cfg = Self::from_table(parse_table(src, "config")?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(t) = o.trials {
            self.trials = t;
        }
        if let Some(s) = o.seed {
            self.master_seed = s;
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        if let Some(b) = o.bins {
            self.bins = b;
        }
        if let Some(e) = o.eta {
            self.eta = e;
        }
        if o.emit_plots {
            self.emit_plots = true;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.bins == 0 {
            return bad("bins must be at least 1");
        }
        if !(self.eta > 0.0) {
            return bad("eta must be positive");
        }
        let nonempty = |r: &Option<Range>, name: &str| match r {
            Some(r) if r.count > 0 => Ok(()),
            _ => Err(Error::Config(format!("grid.{name} must be a nonempty range"))),
        };
        match self.experiment {
            Experiment::Esd2 | Experiment::Esd3 => {
                self.general()?.params(0)?;
            }
            Experiment::AlignmentMap => {
                self.general()?;
                nonempty(&self.grid.rho_t, "rho_t")?;
                nonempty(&self.grid.beta_m, "beta_m")?;
            }
            Experiment::Phase => {
                self.general()?;
                nonempty(&self.grid.beta_m, "beta_m")?;
            }
            Experiment::Benchmark => {
                let mv = self.multiview()?;
                if mv.p == 0 || mv.m == 0 || mv.n == 0 || mv.n % 2 == 1 {
                    return bad("[multiview] needs positive p, m and even n");
                }
                nonempty(&self.grid.mu_norm, "mu_norm")?;
                match &self.grid.h_norm {
                    Some(h) if !h.is_empty() => {}
                    _ => return bad("grid.h_norm must be a nonempty list"),
                }
            }
        }
        Ok(())
    }

    pub fn general(&self) -> Result<&GeneralSection> {
        self.general
            .as_ref()
            .ok_or_else(|| Error::Config("missing [general] section".into()))
    }

    pub fn multiview(&self) -> Result<&MultiViewSection> {
        self.multiview
            .as_ref()
            .ok_or_else(|| Error::Config("missing [multiview] section".into()))
    }

    /// SHA-256 of the canonical TOML of everything that affects the data.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.output_dir = PathBuf::new();
        canon.emit_plots = false;
        let text = toml::to_string(&canon).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

// ---------------------------------------------------------------------------
// CSV

/// A CSV table with the provenance comment line.
struct Csv {
    text: String,
}

impl Csv {
    fn new(cfg: &ExperimentConfig, header: &[&str]) -> Csv {
        let mut text = format!(
            "# nested-spectra {VERSION} config_sha256={} master_seed={}\n",
            cfg.hash(),
            cfg.master_seed
        );
        text.push_str(&header.join(","));
        text.push('\n');
        Csv { text }
    }

    fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    fn write(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, &self.text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Per-trial value: 17 significant digits.
fn v(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

/// Summary value: 6 decimals.
fn s6(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.6}")
    }
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

// ---------------------------------------------------------------------------
// spectrum experiments

/// One Monte Carlo draw of a spectrum experiment.
#[derive(Debug, Clone, Serialize)]
pub struct SpikeTrial {
    pub trial: usize,
    pub seed: u64,
    pub top_eigenvalue: f64,
    pub second_eigenvalue: f64,
    pub alignment: f64,
}

/// Result of `esd2` / `esd3`.
#[derive(Debug, Clone)]
pub struct SpectrumOutcome {
    pub trials: Vec<SpikeTrial>,
    /// Every centered-and-scaled eigenvalue, pooled over trials.
    pub pooled: Vec<f64>,
    /// Pooled eigenvalues with each trial's largest removed.
    pub bulk: Vec<f64>,
    pub law: Law,
    pub prediction: Option<SpikePrediction>,
    /// KS distance of the pooled bulk to the limiting law.
    pub ks: f64,
}

impl SpectrumOutcome {
    pub fn mean_top(&self) -> f64 {
        mean(&self.trials.iter().map(|t| t.top_eigenvalue).collect::<Vec<_>>())
    }

    pub fn mean_alignment(&self) -> f64 {
        mean(&self.trials.iter().map(|t| t.alignment).collect::<Vec<_>>())
    }
}

/// Simulates the centered-and-scaled Gram spectrum of the mode-2 (`esd2`)
/// or mode-3 (`esd3`) unfolding.
pub fn simulate_spectrum(cfg: &ExperimentConfig, mode: Mode) -> Result<SpectrumOutcome> {
    let section = cfg.general()?;
    let base = section.params(0)?;
    let dims = base.dims();
    let (scale, shift) = center_scale_coefficients(dims, mode);
    let centering = if mode == Mode::Two {
        Centering::Mode2
    } else {
        Centering::Mode3
    };

    let mut trials = Vec::with_capacity(cfg.trials);
    let mut pooled = Vec::new();
    let mut bulk = Vec::new();
    for trial in 0..cfg.trials {
        let started = Instant::now();
        let seed = derive_seed(cfg.master_seed, trial as u64);
        let sample = sample_general(&base.with_seed(seed))?;
        let (est, sr) = unfolding_estimate(&sample.tensor, mode)?;
        let sr = sr.with_affine(scale, shift, centering);
        let truth = if mode == Mode::Two {
            &sample.signals.y
        } else {
            &sample.signals.z
        };
        let n = sr.len();
        trials.push(SpikeTrial {
            trial,
            seed,
            top_eigenvalue: sr.largest(),
            second_eigenvalue: if n >= 2 { sr.eigenvalues[n - 2] } else { f64::NAN },
            alignment: alignment(&est.vector, truth)?,
        });
        pooled.extend_from_slice(&sr.eigenvalues);
        bulk.extend_from_slice(&sr.eigenvalues[..n - 1]);
        log::info!(
            "{} trial {trial} seed {seed:#x}: {:.2?}",
            if mode == Mode::Two { "esd2" } else { "esd3" },
            started.elapsed()
        );
    }

    let (law, prediction) = if mode == Mode::Two {
        let rho = base.rho_t();
        let law = Law::cubic(rho, base.ratios(), cfg.eta)?;
        let pred = if rho > 0.0 && base.beta_m > 0.0 {
            Some(spike2(rho, base.beta_m, base.ratios())?)
        } else {
            None
        };
        (law, pred)
    } else {
        let varrho = base.varrho();
        (Law::semicircle(), (varrho > 0.0).then(|| spike3(varrho)).transpose()?)
    };
    let bulk = sorted(bulk);
    let ks = ks_distance(&bulk, |x| law.cdf(x));
    Ok(SpectrumOutcome {
        trials,
        pooled,
        bulk,
        law,
        prediction,
        ks,
    })
}

fn write_spectrum(cfg: &ExperimentConfig, out: &SpectrumOutcome, stem: &str) -> Result<Vec<PathBuf>> {
    let dir = &cfg.output_dir;
    prepare_dir(dir)?;
    let mut files = Vec::new();

    let hist = EsdSummary::from_values(&out.pooled, cfg.bins)?;
    let mut csv = Csv::new(cfg, &["bin_lo", "bin_hi", "mass", "density"]);
    for ((e, m), d) in hist.edges.windows(2).zip(&hist.masses).zip(hist.densities()) {
        csv.row(&[v(e[0]), v(e[1]), v(*m), v(d)]);
    }
    files.push(csv.write(dir, &format!("{stem}_histogram.csv"))?);

    let mut csv = Csv::new(cfg, &["x", "density"]);
    for (x, d) in out.law.grid().iter().zip(out.law.density()) {
        csv.row(&[v(*x), v(*d)]);
    }
    files.push(csv.write(dir, &format!("{stem}_theory.csv"))?);

    let (loc, align, det) = match out.prediction {
        Some(p) => (p.location, p.alignment, p.detectable.to_string()),
        None => (f64::NAN, 0.0, "false".into()),
    };
    let mut csv = Csv::new(
        cfg,
        &[
            "trial",
            "seed",
            "top_eigenvalue",
            "second_eigenvalue",
            "predicted_location",
            "alignment",
            "predicted_alignment",
            "detectable",
        ],
    );
    for t in &out.trials {
        csv.row(&[
            t.trial.to_string(),
            t.seed.to_string(),
            v(t.top_eigenvalue),
            v(t.second_eigenvalue),
            v(loc),
            v(t.alignment),
            v(align),
            det.clone(),
        ]);
    }
    files.push(csv.write(dir, &format!("{stem}_spikes.csv"))?);

    let (lo, hi) = out.law.edges();
    let mut csv = Csv::new(cfg, &["metric", "simulated", "predicted"]);
    csv.row(&["top_eigenvalue".into(), s6(out.mean_top()), s6(loc)]);
    csv.row(&["alignment".into(), s6(out.mean_alignment()), s6(align)]);
    csv.row(&["ks_bulk".into(), s6(out.ks), s6(0.0)]);
    csv.row(&["lower_edge".into(), s6(out.bulk.first().copied().unwrap_or(f64::NAN)), s6(lo)]);
    csv.row(&["upper_edge".into(), s6(out.bulk.last().copied().unwrap_or(f64::NAN)), s6(hi)]);
    files.push(csv.write(dir, &format!("{stem}_summary.csv"))?);
    Ok(files)
}

/// Files written by a run, plus the in-memory outcome when there is one.
#[derive(Debug)]
pub struct RunOutput<T> {
    pub files: Vec<PathBuf>,
    pub outcome: T,
}

pub fn run_esd2(cfg: &ExperimentConfig) -> Result<RunOutput<SpectrumOutcome>> {
    let outcome = simulate_spectrum(cfg, Mode::Two)?;
    let mut files = write_spectrum(cfg, &outcome, "esd2")?;
    files.extend(maybe_plot(cfg)?);
    Ok(RunOutput { files, outcome })
}

pub fn run_esd3(cfg: &ExperimentConfig) -> Result<RunOutput<SpectrumOutcome>> {
    let outcome = simulate_spectrum(cfg, Mode::Three)?;
    let mut files = write_spectrum(cfg, &outcome, "esd3")?;
    files.extend(maybe_plot(cfg)?);
    Ok(RunOutput { files, outcome })
}

// ---------------------------------------------------------------------------
// alignment map and phase curve

#[derive(Debug, Clone, Serialize)]
pub struct MapCell {
    pub rho_t: f64,
    pub beta_m: f64,
    pub zeta_plus: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct McPoint {
    pub rho_t: f64,
    pub beta_m: f64,
    pub predicted: f64,
    pub mean_alignment: f64,
    pub std_alignment: f64,
}

#[derive(Debug, Clone)]
pub struct MapOutcome {
    pub cells: Vec<MapCell>,
    pub curve: Vec<(f64, f64)>,
    pub asymptote: f64,
    pub mc: Vec<McPoint>,
}

fn zeta_plus(rho: f64, beta: f64, c: ShapeRatios) -> f64 {
    if rho > 0.0 && beta > 0.0 {
        mode2_alignment_signed(rho, beta, c).max(0.0)
    } else {
        0.0
    }
}

/// Mean mode-2 alignment over `trials` draws at `(ρ_T, β_M)`.
pub fn simulate_mode2_alignment(
    dims: [usize; 3],
    rho_t: f64,
    beta_m: f64,
    trials: usize,
    master_seed: u64,
) -> Result<Vec<f64>> {
    let base = GeneralParams::new(dims, beta_m, Snr::RhoT(rho_t), 0)?;
    (0..trials)
        .map(|trial| {
            let seed = derive_seed(master_seed, trial as u64);
            let s = sample_general(&base.with_seed(seed))?;
            let (est, _) = unfolding_estimate(&s.tensor, Mode::Two)?;
            alignment(&est.vector, &s.signals.y)
        })
        .collect()
}

pub fn simulate_alignment_map(cfg: &ExperimentConfig) -> Result<MapOutcome> {
    let g = cfg.general()?;
    let c = ShapeRatios::from_dims(g.dims());
    let rhos = cfg.grid.rho_t.as_ref().map(Range::values).unwrap_or_default();
    let betas = cfg.grid.beta_m.as_ref().map(Range::values).unwrap_or_default();
    let cells = betas
        .iter()
        .flat_map(|&beta_m| {
            rhos.iter().map(move |&rho_t| MapCell {
                rho_t,
                beta_m,
                zeta_plus: zeta_plus(rho_t, beta_m, c),
            })
        })
        .collect();
    let curve = betas
        .iter()
        .filter_map(|&b| phase_transition_rho(b, c).ok().map(|r| (b, r)))
        .collect();
    let mut mc = Vec::new();
    for (k, &[rho_t, beta_m]) in cfg.grid.mc_points.iter().enumerate() {
        let seed = derive_seed(cfg.master_seed, 1_000_000 + k as u64);
        let a = simulate_mode2_alignment(g.dims(), rho_t, beta_m, cfg.trials, seed)?;
        mc.push(McPoint {
            rho_t,
            beta_m,
            predicted: zeta_plus(rho_t, beta_m, c),
            mean_alignment: mean(&a),
            std_alignment: std_dev(&a),
        });
    }
    Ok(MapOutcome {
        cells,
        curve,
        asymptote: phase_transition_asymptote(c),
        mc,
    })
}

pub fn run_alignment_map(cfg: &ExperimentConfig) -> Result<RunOutput<MapOutcome>> {
    let out = simulate_alignment_map(cfg)?;
    let dir = &cfg.output_dir;
    prepare_dir(dir)?;
    let mut files = Vec::new();

    let mut csv = Csv::new(cfg, &["rho_t", "beta_m", "zeta_plus"]);
    for c in &out.cells {
        csv.row(&[v(c.rho_t), v(c.beta_m), v(c.zeta_plus)]);
    }
    files.push(csv.write(dir, "alignment_map.csv")?);

    let mut csv = Csv::new(cfg, &["beta_m", "rho_t_star", "asymptote"]);
    for &(b, r) in &out.curve {
        csv.row(&[v(b), v(r), v(out.asymptote)]);
    }
    files.push(csv.write(dir, "alignment_map_curve.csv")?);

    if !out.mc.is_empty() {
        let mut csv = Csv::new(
            cfg,
            &["rho_t", "beta_m", "predicted", "mean_alignment", "std_alignment", "trials"],
        );
        for p in &out.mc {
            csv.row(&[
                v(p.rho_t),
                v(p.beta_m),
                s6(p.predicted),
                s6(p.mean_alignment),
                s6(p.std_alignment),
                cfg.trials.to_string(),
            ]);
        }
        files.push(csv.write(dir, "alignment_map_mc.csv")?);
    }
    files.extend(maybe_plot(cfg)?);
    Ok(RunOutput { files, outcome: out })
}

#[derive(Debug, Clone, Serialize)]
pub struct PhasePoint {
    pub beta_m: f64,
    /// `None` at or below the asymptote.
    pub rho_t_star: Option<f64>,
}

pub fn run_phase(cfg: &ExperimentConfig) -> Result<RunOutput<Vec<PhasePoint>>> {
    let c = ShapeRatios::from_dims(cfg.general()?.dims());
    let asymptote = phase_transition_asymptote(c);
    let points: Vec<PhasePoint> = cfg
        .grid
        .beta_m
        .as_ref()
        .map(Range::values)
        .unwrap_or_default()
        .into_iter()
        .map(|beta_m| PhasePoint {
            beta_m,
            rho_t_star: phase_transition_rho(beta_m, c).ok(),
        })
        .collect();
    let dir = &cfg.output_dir;
    prepare_dir(dir)?;
    let mut csv = Csv::new(cfg, &["beta_m", "rho_t_star", "asymptote", "note"]);
    for p in &points {
        let (r, note) = match p.rho_t_star {
            Some(r) => (r, "ok"),
            None => (f64::NAN, "below_asymptote"),
        };
        csv.row(&[v(p.beta_m), v(r), v(asymptote), note.into()]);
    }
    let mut files = vec![csv.write(dir, "phase.csv")?];
    files.extend(maybe_plot(cfg)?);
    Ok(RunOutput { files, outcome: points })
}

// ---------------------------------------------------------------------------
// multi-view benchmark

/// Accuracies of the three estimators on one draw.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BenchmarkTrial {
    pub unfolding: f64,
    pub oracle: f64,
    pub tensor: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkPoint {
    pub mu_norm: f64,
    pub h_norm: f64,
    pub acc_u_th: f64,
    pub acc_o_th: f64,
    /// Signed alignment of the unfolding estimator predicted by theory.
    pub zeta_u: f64,
    pub trials: Vec<BenchmarkTrial>,
}

fn column(trials: &[BenchmarkTrial], f: impl Fn(&BenchmarkTrial) -> f64) -> Vec<f64> {
    trials.iter().map(f).collect()
}

impl BenchmarkPoint {
    pub fn mean_u(&self) -> f64 {
        mean(&column(&self.trials, |t| t.unfolding))
    }

    pub fn mean_o(&self) -> f64 {
        mean(&column(&self.trials, |t| t.oracle))
    }

    pub fn mean_t(&self) -> f64 {
        mean(&column(&self.trials, |t| t.tensor))
    }
}

/// Accuracies of unfolding, oracle and rank-one estimators on one draw.
pub fn benchmark_trial(p: &MultiViewParams) -> Result<BenchmarkTrial> {
    let sample = sample_multiview(p)?;
    let t = &sample.tensor;
    let (u1, _) = unfolding_estimate(t, Mode::One)?;
    let (u2, _) = unfolding_estimate(t, Mode::Two)?;
    let (u3, _) = unfolding_estimate(t, Mode::Three)?;
    let unfolding = cluster_accuracy(&u2.vector, &sample.labels)?.accuracy;

    let z = normalized(&p.h).ok_or_else(|| Error::arg("oracle needs a nonzero h"))?;
    let (o, _) = oracle_estimate(t, &z)?;
    let oracle = cluster_accuracy(&o.vector, &sample.labels)?.accuracy;

    let init = Init::Provided {
        u: u1.vector,
        v: u2.vector,
        w: u3.vector,
    };
    let r = tensor_rank1_estimate(t, &init, HOPM_MAX_ITERS, HOPM_TOL)?;
    let tensor = cluster_accuracy(&r.y.vector, &sample.labels)?.accuracy;
    Ok(BenchmarkTrial {
        unfolding,
        oracle,
        tensor,
    })
}

pub fn simulate_benchmark(cfg: &ExperimentConfig) -> Result<Vec<BenchmarkPoint>> {
    let mv = cfg.multiview()?;
    let mus = cfg.grid.mu_norm.as_ref().map(Range::values).unwrap_or_default();
    let hs = cfg.grid.h_norm.clone().unwrap_or_default();
    let mut points = Vec::new();
    for (hi, &h) in hs.iter().enumerate() {
        for (mi, &mu) in mus.iter().enumerate() {
            let started = Instant::now();
            let point_seed = derive_seed(cfg.master_seed, (hi * mus.len() + mi) as u64);
            let params = MultiViewParams::with_norms(mv.p, mv.n, mv.m, mu, h, 0)?;
            let trials = (0..cfg.trials)
                .into_par_iter()
                .map(|k| benchmark_trial(&params.with_seed(derive_seed(point_seed, k as u64))))
                .collect::<Result<Vec<_>>>()?;
            let zeta_u = if mu > 0.0 && h > 0.0 {
                multiview_zeta(&params)?
            } else {
                0.0
            };
            let acc_o_th = if mu > 0.0 && h > 0.0 {
                accuracy_from_alignment(multiview_oracle_alignment(&params)?)
            } else {
                0.5
            };
            log::info!("benchmark |h|={h} |mu|={mu}: {:.2?}", started.elapsed());
            points.push(BenchmarkPoint {
                mu_norm: mu,
                h_norm: h,
                acc_u_th: if zeta_u > 0.0 { accuracy_from_alignment(zeta_u) } else { 0.5 },
                acc_o_th,
                zeta_u,
                trials,
            });
        }
    }
    Ok(points)
}

pub const BENCHMARK_COLUMNS: [&str; 11] = [
    "mu_norm",
    "h_norm",
    "acc_U_th",
    "acc_O_th",
    "acc_U_sim_mean",
    "acc_U_sim_std",
    "acc_O_sim_mean",
    "acc_O_sim_std",
    "acc_T_sim_mean",
    "acc_T_sim_std",
    "trials",
];

pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<RunOutput<Vec<BenchmarkPoint>>> {
    let points = simulate_benchmark(cfg)?;
    let dir = &cfg.output_dir;
    prepare_dir(dir)?;
    let mut csv = Csv::new(cfg, &BENCHMARK_COLUMNS);
    for p in &points {
        let u = column(&p.trials, |t| t.unfolding);
        let o = column(&p.trials, |t| t.oracle);
        let t = column(&p.trials, |t| t.tensor);
        csv.row(&[
            v(p.mu_norm),
            v(p.h_norm),
            s6(p.acc_u_th),
            s6(p.acc_o_th),
            s6(mean(&u)),
            s6(std_dev(&u)),
            s6(mean(&o)),
            s6(std_dev(&o)),
            s6(mean(&t)),
            s6(std_dev(&t)),
            p.trials.len().to_string(),
        ]);
    }
    let mut files = vec![csv.write(dir, "benchmark.csv")?];
    files.extend(maybe_plot(cfg)?);
    Ok(RunOutput { files, outcome: points })
}

// ---------------------------------------------------------------------------
// plots

const PLOT_PRELUDE: &str = "import csv, os, sys\nimport matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\nHERE = os.path.dirname(os.path.abspath(__file__))\n\n\ndef read(name):\n    with open(os.path.join(HERE, name)) as f:\n        rows = [r for r in csv.reader(l for l in f if not l.startswith(\"#\"))]\n    head, body = rows[0], rows[1:]\n    return {h: [r[i] for r in body] for i, h in enumerate(head)}\n\n\ndef num(xs):\n    return [float(x) for x in xs]\n\n\n";

fn plot_body(e: Experiment) -> &'static str {
    match e {
        Experiment::Esd2 | Experiment::Esd3 => {
            "stem = STEM\nh = read(stem + \"_histogram.csv\")\nt = read(stem + \"_theory.csv\")\nlo, hi = num(h[\"bin_lo\"]), num(h[\"bin_hi\"])\nplt.bar(lo, num(h[\"density\"]), width=[b - a for a, b in zip(lo, hi)], align=\"edge\", alpha=0.5, label=\"ESD\")\nplt.plot(num(t[\"x\"]), num(t[\"density\"]), \"r\", label=\"LSD\")\nplt.legend()\nplt.savefig(os.path.join(HERE, stem + \".png\"), dpi=150)\n"
        }
        Experiment::AlignmentMap => {
            "m = read(\"alignment_map.csv\")\nc = read(\"alignment_map_curve.csv\")\nplt.tricontourf(num(m[\"rho_t\"]), num(m[\"beta_m\"]), num(m[\"zeta_plus\"]), levels=20)\nplt.colorbar()\nplt.plot(num(c[\"rho_t_star\"]), num(c[\"beta_m\"]), \"w\")\nif c[\"asymptote\"]:\n    plt.axhline(float(c[\"asymptote\"][0]), color=\"r\", ls=\"--\")\nplt.xlabel(\"rho_T\")\nplt.ylabel(\"beta_M\")\nplt.savefig(os.path.join(HERE, \"alignment_map.png\"), dpi=150)\n"
        }
        Experiment::Benchmark => {
            "b = read(\"benchmark.csv\")\nfor h in sorted(set(b[\"h_norm\"])):\n    idx = [i for i, x in enumerate(b[\"h_norm\"]) if x == h]\n    mu = [float(b[\"mu_norm\"][i]) for i in idx]\n    for col, style in [(\"acc_U_th\", \"b--\"), (\"acc_O_th\", \"k--\"), (\"acc_U_sim_mean\", \"bo\"), (\"acc_O_sim_mean\", \"ko\"), (\"acc_T_sim_mean\", \"g^\")]:\n        plt.plot(mu, [float(b[col][i]) for i in idx], style, label=col + \" h=\" + str(float(h)))\nplt.xlabel(\"|mu|\")\nplt.ylabel(\"accuracy\")\nplt.legend(fontsize=6)\nplt.savefig(os.path.join(HERE, \"benchmark.png\"), dpi=150)\n"
        }
        Experiment::Phase => {
            "p = read(\"phase.csv\")\nok = [i for i, n in enumerate(p[\"note\"]) if n == \"ok\"]\nplt.plot([float(p[\"rho_t_star\"][i]) for i in ok], [float(p[\"beta_m\"][i]) for i in ok])\nplt.axhline(float(p[\"asymptote\"][0]), color=\"r\", ls=\"--\")\nplt.xscale(\"log\")\nplt.xlabel(\"rho_T*\")\nplt.ylabel(\"beta_M\")\nplt.savefig(os.path.join(HERE, \"phase.png\"), dpi=150)\n"
        }
    }
}

fn maybe_plot(cfg: &ExperimentConfig) -> Result<Option<PathBuf>> {
    if !cfg.emit_plots {
        return Ok(None);
    }
    let stem = cfg.experiment.name().replace('-', "_");
    let mut script = String::from(PLOT_PRELUDE);
    script.push_str(&format!("STEM = {:?}\n", cfg.experiment.name()));
    script.push_str(plot_body(cfg.experiment));
    let path = cfg.output_dir.join(format!("plot_{stem}.py"));
    fs::write(&path, script).map_err(|e| Error::io(&path, e))?;
    Ok(Some(path))
}

/// Runs the configured experiment and returns the files written.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    Ok(match cfg.experiment {
        Experiment::Esd2 => run_esd2(cfg)?.files,
        Experiment::Esd3 => run_esd3(cfg)?.files,
        Experiment::AlignmentMap => run_alignment_map(cfg)?.files,
        Experiment::Benchmark => run_benchmark(cfg)?.files,
        Experiment::Phase => run_phase(cfg)?.files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_esd(tmp: &Path) -> ExperimentConfig {
        let src = format!(
            "experiment = \"esd2\"\ntrials = 2\nmaster_seed = 7\noutput_dir = {:?}\n\
             [general]\nn1 = 12\nn2 = 10\nn3 = 8\nbeta_m = 1.5\nrho_t = 2.0\n",
            tmp.display().to_string()
        );
        ExperimentConfig::from_toml(&src).unwrap()
    }

    #[test]
    fn presets_parse_and_validate() {
        for (name, e) in PRESETS.iter().zip([
            Experiment::Esd2,
            Experiment::Esd3,
            Experiment::AlignmentMap,
            Experiment::Benchmark,
            Experiment::Phase,
        ]) {
            let cfg = ExperimentConfig::resolve(e, Some(name), None, &Overrides::default()).unwrap();
            assert_eq!(cfg.experiment, e);
        }
        assert!(preset_source("nope").is_err());
    }

    #[test]
    fn layering_and_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.toml");
        fs::write(&file, "trials = 3\n[general]\nn1 = 600\nn2 = 400\nn3 = 200\nbeta_m = 2.0\nrho_t = 1.0\n").unwrap();
        let o = Overrides {
            trials: Some(5),
            seed: Some(9),
            ..Default::default()
        };
        let cfg = ExperimentConfig::resolve(Experiment::Esd2, Some("fig1-left"), Some(&file), &o).unwrap();
        assert_eq!(cfg.trials, 5);
        assert_eq!(cfg.master_seed, 9);
        assert_eq!(cfg.bins, 80);
        assert_eq!(cfg.general.unwrap().beta_m, 2.0);
        let err = ExperimentConfig::resolve(Experiment::Esd3, Some("fig1-left"), None, &o).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = ExperimentConfig::resolve(Experiment::Esd2, None, Some(&dir.path().join("missing.toml")), &o)
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(ExperimentConfig::from_toml("experiment = \"esd2\"\n").is_err());
        assert!(ExperimentConfig::from_toml(
            "experiment = \"esd2\"\ntrials = 0\n[general]\nn1=2\nn2=2\nn3=2\nbeta_m=1\nrho_t=1\n"
        )
        .is_err());
        assert!(ExperimentConfig::from_toml(
            "experiment = \"esd2\"\n[general]\nn1=2\nn2=2\nn3=2\nbeta_m=1\nrho_t=1\nbeta_t=1\n"
        )
        .is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"esd2\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = small_esd(Path::new("/tmp/a"));
        let mut b = small_esd(Path::new("/tmp/b"));
        assert_eq!(a.hash(), b.hash());
        b.master_seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn esd2_rerun_is_byte_identical() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let f1 = run(&small_esd(d1.path())).unwrap();
        let f2 = run(&small_esd(d2.path())).unwrap();
        assert_eq!(f1.len(), 4);
        for (a, b) in f1.iter().zip(&f2) {
            assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
        }
        let text = fs::read_to_string(&f1[2]).unwrap();
        assert!(text.starts_with("# nested-spectra "));
        assert!(text.lines().nth(1).unwrap().starts_with("trial,seed,top_eigenvalue"));
    }

    #[test]
    fn alignment_map_rows_are_monotone() {
        let cfg = ExperimentConfig::resolve(Experiment::AlignmentMap, Some("fig2"), None, &Overrides::default())
            .unwrap();
        let out = simulate_alignment_map(&cfg).unwrap();
        let n_rho = cfg.grid.rho_t.unwrap().count;
        for row in out.cells.chunks(n_rho) {
            for w in row.windows(2) {
                assert!(w[1].zeta_plus >= w[0].zeta_plus);
            }
            if row[0].beta_m <= 0.66874 {
                assert!(row.iter().all(|c| c.zeta_plus == 0.0));
            }
        }
        let c = ShapeRatios::from_dims([600, 400, 200]);
        for &(b, r) in &out.curve {
            assert!(mode2_alignment_signed(r, b, c).abs() < 1e-8);
        }
    }

    #[test]
    fn phase_diverges_near_asymptote() {
        let c = ShapeRatios::from_dims([600, 400, 200]);
        let a = phase_transition_asymptote(c);
        let near = phase_transition_rho(a * 1.001, c).unwrap();
        let far = phase_transition_rho(a * 1.5, c).unwrap();
        assert!(near >= 10.0 * far);
    }

    #[test]
    fn benchmark_columns_and_theory() {
        let dir = tempfile::tempdir().unwrap();
        let src = format!(
            "experiment = \"benchmark\"\ntrials = 2\noutput_dir = {:?}\n[multiview]\np = 10\nn = 12\nm = 6\n\
             [grid]\nmu_norm = {{ start = 0.0, stop = 4.0, count = 2 }}\nh_norm = [1.5]\n",
            dir.path().display().to_string()
        );
        let cfg = ExperimentConfig::from_toml(&src).unwrap();
        let out = run_benchmark(&cfg).unwrap();
        let text = fs::read_to_string(&out.files[0]).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), BENCHMARK_COLUMNS.join(","));
        assert_eq!(out.outcome[0].acc_u_th, 0.5);
        for p in &out.outcome {
            for t in &p.trials {
                for a in [t.unfolding, t.oracle, t.tensor] {
                    assert!((0.5..=1.0).contains(&a));
                }
            }
        }
        let mut more = cfg.clone();
        more.trials = 3;
        let again = simulate_benchmark(&more).unwrap();
        assert_eq!(again[1].acc_u_th, out.outcome[1].acc_u_th);
        assert_eq!(again[1].acc_o_th, out.outcome[1].acc_o_th);
    }
}
