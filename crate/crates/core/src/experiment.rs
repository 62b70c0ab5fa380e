//! Declarative sweeps, CSV tables and canned figure reproductions.
//!
//! A spec is a small TOML document:
//!
//! ```toml
//! experiment = "snr-sweep"
//! seed = 7
//! trials = 100
//!
//! [grid]
//! values = [-10, -5, 0, 5, 10, 15, 20]   # SNR in dB
//!
//! [channel]
//! gains = [0.9, 0.1]
//!
//! [mc]
//! enabled = true
//! n_samples = 100000
//! ```
//!
//! Every trial redraws the path angles; a trial's angles depend only on the
//! seed and the trial index, so all grid points see the same channels. Rows
//! are ordered by grid point, then series, then method.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Deserialize;

use crate::beamforming::{build_abf, effective_channel, pattern_alphabet, EffectiveChannelMode};
use crate::capacity::{
    covariances, dirichlet_gain, i_app, i_app_swapped, i_mmwave, i_spim_general, CovarianceSource,
    Method, SteeredPath,
};
use crate::channel::{
    sample_channel, AngleRange, GainModel, DEFAULT_AOA_RANGE, DEFAULT_AOD_RANGE, DEFAULT_N_RX,
    DEFAULT_N_TX,
};
use crate::conditions::{spim_margin, MarginQuery, DEFAULT_B_MAX};
use crate::error::{Error, Result};
use crate::montecarlo::{
    mc_mutual_information, MonteCarloSpec, DEFAULT_BATCH, DEFAULT_MC_SAMPLES, MIN_MC_SAMPLES,
};
use crate::numerics::{derive_seed, Rng};

pub const CSV_HEADER: &str = "experiment,axis,series,method,value,std,stderr,seed,trials";
pub const DEFAULT_TRIALS: usize = 100;

// domain tags mixed into derived seeds
const CHANNEL_STREAM: u64 = 1;
const MC_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// SE against SNR (dB) for fixed path gains.
    SnrSweep,
    /// SE against `w_1` with `w_2 = 1 - w_1`.
    W1Sweep,
    /// SE against the decay exponent for several path counts.
    GammaSweep,
    /// SPIM margin against the decay exponent for several noise powers.
    MarginMap,
    /// Receive-beam overlap against angle difference.
    QFunction,
}

impl ExperimentKind {
    pub fn tag(self) -> &'static str {
        match self {
            ExperimentKind::SnrSweep => "snr-sweep",
            ExperimentKind::W1Sweep => "w1-sweep",
            ExperimentKind::GammaSweep => "gamma-sweep",
            ExperimentKind::MarginMap => "margin-map",
            ExperimentKind::QFunction => "q-function",
        }
    }

    fn axis_label(self) -> &'static str {
        match self {
            ExperimentKind::SnrSweep => "SNR (dB)",
            ExperimentKind::W1Sweep => "w1",
            ExperimentKind::GammaSweep | ExperimentKind::MarginMap => "gamma",
            ExperimentKind::QFunction => "delta theta",
        }
    }

    fn uses_trials(self) -> bool {
        matches!(
            self,
            ExperimentKind::SnrSweep | ExperimentKind::W1Sweep | ExperimentKind::GammaSweep
        )
    }
}

/// Method identifier written to the `method` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowMethod {
    Se(Method),
    /// Conventional SE in closed form, `log2(1 + w_1 N_t / N_0)`.
    ClosedForm,
    /// Conventional SE of the strongest beam on the simulated channel.
    Shannon,
    SpimMargin,
    QFunction,
}

impl RowMethod {
    pub const ALL: [RowMethod; 8] = [
        RowMethod::Se(Method::ClosedFormLb),
        RowMethod::Se(Method::ClosedFormSwapped),
        RowMethod::Se(Method::GeneralM),
        RowMethod::Se(Method::MonteCarlo),
        RowMethod::ClosedForm,
        RowMethod::Shannon,
        RowMethod::SpimMargin,
        RowMethod::QFunction,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            RowMethod::Se(m) => m.tag(),
            RowMethod::ClosedForm => "closed-form",
            RowMethod::Shannon => "shannon",
            RowMethod::SpimMargin => "spim-margin",
            RowMethod::QFunction => "q-function",
        }
    }
}

impl fmt::Display for RowMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSpec {
    pub n_tx: usize,
    pub n_rx: usize,
    /// Path gains for `snr-sweep`.
    pub gains: Option<Vec<f64>>,
    /// Path counts compared by `gamma-sweep`.
    pub m_values: Vec<usize>,
    /// Receive array sizes traced by `q-function`.
    pub n_rx_values: Vec<usize>,
    pub aod_range: [f64; 2],
    pub aoa_range: [f64; 2],
    /// Use the large-array effective channel instead of the exact product.
    pub asymptotic: bool,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            n_tx: DEFAULT_N_TX,
            n_rx: DEFAULT_N_RX,
            gains: None,
            m_values: vec![1, 2, 4, 8],
            n_rx_values: vec![2, 4, 8],
            aod_range: [DEFAULT_AOD_RANGE.lo, DEFAULT_AOD_RANGE.hi],
            aoa_range: [DEFAULT_AOA_RANGE.lo, DEFAULT_AOA_RANGE.hi],
            asymptotic: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Fixed noise power for `w1-sweep` and `gamma-sweep`.
    pub n0: Option<f64>,
    /// Noise powers traced by `margin-map`.
    pub n0_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSpec {
    pub enabled: bool,
    pub n_samples: usize,
    pub batch: usize,
}

impl Default for McSpec {
    fn default() -> Self {
        Self {
            enabled: false,
            n_samples: DEFAULT_MC_SAMPLES,
            batch: DEFAULT_BATCH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarginSpec {
    pub b_max: u32,
    pub relax_integer: bool,
    /// Array gain of the strongest path; defaults to `n_tx`.
    pub g1: Option<f64>,
}

impl Default for MarginSpec {
    fn default() -> Self {
        Self {
            b_max: DEFAULT_B_MAX,
            relax_integer: false,
            g1: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub csv: Option<PathBuf>,
    pub plot_script: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub grid: GridSpec,
    #[serde(default)]
    pub channel: ChannelSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub mc: McSpec,
    #[serde(default)]
    pub margin: MarginSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn spec_err(field: &str, message: impl Into<String>) -> Error {
    Error::Spec {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Command-line overrides applied on top of a spec.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub mc_samples: Option<usize>,
    pub asymptotic: bool,
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de =
            toml::Deserializer::parse(text).map_err(|e| spec_err("<document>", e.to_string()))?;
        let spec: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            spec_err(
                if path == "." { "<document>" } else { &path },
                e.into_inner().message(),
            )
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(trials) = o.trials {
            self.trials = trials;
        }
        if let Some(n) = o.mc_samples {
            self.mc.n_samples = n;
        }
        if o.asymptotic {
            self.channel.asymptotic = true;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let grid = &self.grid.values;
        if grid.is_empty() {
            return Err(spec_err("grid.values", "grid must not be empty"));
        }
        if grid.iter().any(|v| !v.is_finite()) {
            return Err(spec_err("grid.values", "grid values must be finite"));
        }
        if grid.windows(2).any(|p| p[1] <= p[0]) {
            return Err(spec_err("grid.values", "grid must be strictly increasing"));
        }
        if self.trials == 0 {
            return Err(spec_err("trials", "need at least one trial"));
        }
        let ch = &self.channel;
        if ch.n_tx == 0 {
            return Err(spec_err("channel.n_tx", "must be positive"));
        }
        if ch.n_rx == 0 {
            return Err(spec_err("channel.n_rx", "must be positive"));
        }
        AngleRange::new(ch.aod_range[0], ch.aod_range[1])
            .map_err(|e| spec_err("channel.aod_range", e.to_string()))?;
        AngleRange::new(ch.aoa_range[0], ch.aoa_range[1])
            .map_err(|e| spec_err("channel.aoa_range", e.to_string()))?;
        if self.mc.enabled && self.mc.n_samples < MIN_MC_SAMPLES {
            return Err(spec_err(
                "mc.n_samples",
                format!("need at least {MIN_MC_SAMPLES}"),
            ));
        }
        if self.mc.batch == 0 {
            return Err(spec_err("mc.batch", "must be positive"));
        }
        let unit_interval = |field: &str| {
            if grid.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
                Err(spec_err(field, "values must lie strictly inside (0, 1)"))
            } else {
                Ok(())
            }
        };
        let positive_n0 = || match self.noise.n0 {
            Some(n0) if n0 > 0.0 && n0.is_finite() => Ok(()),
            Some(n0) => Err(spec_err("noise.n0", format!("must be positive, got {n0}"))),
            None => Err(spec_err("noise.n0", "required for this experiment")),
        };
        match self.experiment {
            ExperimentKind::SnrSweep => {
                let gains = ch
                    .gains
                    .as_ref()
                    .ok_or_else(|| spec_err("channel.gains", "required for snr-sweep"))?;
                if gains.is_empty() || gains.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                    return Err(spec_err("channel.gains", "need finite gains >= 0"));
                }
                if !gains.iter().any(|w| *w > 0.0) {
                    return Err(spec_err(
                        "channel.gains",
                        "at least one gain must be positive",
                    ));
                }
            }
            ExperimentKind::W1Sweep => {
                unit_interval("grid.values")?;
                positive_n0()?;
            }
            ExperimentKind::GammaSweep => {
                unit_interval("grid.values")?;
                positive_n0()?;
                if ch.m_values.is_empty() || ch.m_values.contains(&0) {
                    return Err(spec_err("channel.m_values", "need positive path counts"));
                }
            }
            ExperimentKind::MarginMap => {
                unit_interval("grid.values")?;
                let n0s = self
                    .noise
                    .n0_values
                    .as_ref()
                    .ok_or_else(|| spec_err("noise.n0_values", "required for margin-map"))?;
                if n0s.is_empty() || n0s.iter().any(|n| !(*n >= 0.0) || !n.is_finite()) {
                    return Err(spec_err("noise.n0_values", "need finite noise powers >= 0"));
                }
                if self.margin.b_max > 30 {
                    return Err(spec_err("margin.b_max", "at most 30"));
                }
                if let Some(g1) = self.margin.g1 {
                    if !(g1 > 0.0) {
                        return Err(spec_err("margin.g1", "must be positive"));
                    }
                }
            }
            ExperimentKind::QFunction => {
                if ch.n_rx_values.is_empty() || ch.n_rx_values.contains(&0) {
                    return Err(spec_err("channel.n_rx_values", "need positive array sizes"));
                }
            }
        }
        Ok(())
    }

    fn mode(&self) -> (EffectiveChannelMode, CovarianceSource) {
        if self.channel.asymptotic {
            (
                EffectiveChannelMode::Asymptotic,
                CovarianceSource::Asymptotic,
            )
        } else {
            (EffectiveChannelMode::Exact, CovarianceSource::Exact)
        }
    }

    fn series_names(&self) -> Vec<String> {
        match self.experiment {
            ExperimentKind::SnrSweep | ExperimentKind::W1Sweep => {
                vec!["spim".into(), "conventional".into()]
            }
            ExperimentKind::GammaSweep => self
                .channel
                .m_values
                .iter()
                .map(|m| format!("M={m}"))
                .collect(),
            ExperimentKind::MarginMap => self
                .noise
                .n0_values
                .iter()
                .flatten()
                .map(|n| format!("n0={n}"))
                .collect(),
            ExperimentKind::QFunction => self
                .channel
                .n_rx_values
                .iter()
                .map(|n| format!("n_r={n}"))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub experiment: ExperimentKind,
    pub axis: f64,
    pub series: String,
    pub method: RowMethod,
    /// Mean over trials.
    pub value: f64,
    /// Standard deviation over trials.
    pub std: f64,
    /// Monte-Carlo standard error of the mean; `None` for closed forms.
    pub stderr: Option<f64>,
    pub seed: u64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<Row>,
}

impl ResultTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let stderr = r.stderr.map(|s| s.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.experiment.tag(),
                r.axis,
                r.series,
                r.method,
                r.value,
                r.std,
                stderr,
                r.seed,
                r.trials
            ));
        }
        out
    }

    /// Rows of one series and method, in grid order.
    pub fn curve(&self, series: &str, method: RowMethod) -> Vec<&Row> {
        self.rows
            .iter()
            .filter(|r| r.series == series && r.method == method)
            .collect()
    }
}

struct Sample {
    series: usize,
    method: RowMethod,
    value: f64,
    stderr: Option<f64>,
}

impl Sample {
    fn new(series: usize, method: impl Into<RowMethod>, value: f64) -> Self {
        Self {
            series,
            method: method.into(),
            value,
            stderr: None,
        }
    }
}

impl From<Method> for RowMethod {
    fn from(m: Method) -> Self {
        RowMethod::Se(m)
    }
}

fn snr_db_to_n0(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Evaluates a spec. Pure: nothing is written.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let grid = &spec.grid.values;
    let trials = if spec.experiment.uses_trials() {
        spec.trials
    } else {
        1
    };
    let units: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|a| (0..trials).map(move |t| (a, t)))
        .collect();
    let per_unit: Vec<Vec<Sample>> = units
        .par_iter()
        .map(|&(a, t)| unit_samples(spec, a, t))
        .collect::<Result<_>>()?;

    // (axis, series, method) -> per-trial (value, stderr), in trial order
    type Key = (usize, usize, RowMethod);
    let mut groups: BTreeMap<Key, Vec<(f64, Option<f64>)>> = BTreeMap::new();
    for (&(a, _), samples) in units.iter().zip(per_unit) {
        for s in samples {
            groups
                .entry((a, s.series, s.method))
                .or_default()
                .push((s.value, s.stderr));
        }
    }
    let names = spec.series_names();
    let rows = groups
        .into_iter()
        .map(|((a, series, method), vals)| {
            let n = vals.len() as f64;
            let mean = vals.iter().map(|v| v.0).sum::<f64>() / n;
            let std = if vals.len() > 1 {
                (vals.iter().map(|v| (v.0 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let stderr = vals
                .iter()
                .map(|v| v.1)
                .collect::<Option<Vec<f64>>>()
                .map(|se| se.iter().map(|s| s * s).sum::<f64>().sqrt() / n);
            Row {
                experiment: spec.experiment,
                axis: grid[a],
                series: names[series].clone(),
                method,
                value: mean,
                std,
                stderr,
                seed: spec.seed,
                trials: vals.len(),
            }
        })
        .collect();
    Ok(ResultTable { rows })
}

fn unit_samples(spec: &ExperimentSpec, axis_idx: usize, trial: usize) -> Result<Vec<Sample>> {
    let x = spec.grid.values[axis_idx];
    match spec.experiment {
        ExperimentKind::SnrSweep => {
            let gains = spec.channel.gains.clone().unwrap_or_default();
            beam_comparison(spec, axis_idx, trial, gains, snr_db_to_n0(x))
        }
        ExperimentKind::W1Sweep => beam_comparison(
            spec,
            axis_idx,
            trial,
            vec![x, 1.0 - x],
            spec.noise.n0.unwrap_or(1.0),
        ),
        ExperimentKind::GammaSweep => path_count_comparison(spec, axis_idx, trial, x),
        ExperimentKind::MarginMap => {
            let n0s = spec.noise.n0_values.as_deref().unwrap_or_default();
            n0s.iter()
                .enumerate()
                .map(|(i, &n0)| {
                    let q = MarginQuery {
                        gamma: x,
                        n0,
                        g1: spec.margin.g1.unwrap_or(spec.channel.n_tx as f64),
                        b_max: spec.margin.b_max,
                        relax_integer: spec.margin.relax_integer,
                    };
                    Ok(Sample::new(i, RowMethod::SpimMargin, spim_margin(&q)?))
                })
                .collect()
        }
        ExperimentKind::QFunction => Ok(spec
            .channel
            .n_rx_values
            .iter()
            .enumerate()
            .map(|(i, &n_r)| Sample::new(i, RowMethod::QFunction, dirichlet_gain(x, n_r)))
            .collect()),
    }
}

fn trial_rng(spec: &ExperimentSpec, trial: usize) -> Rng {
    Rng::new(derive_seed(spec.seed, &[CHANNEL_STREAM, trial as u64]), 0)
}

fn mc_spec(
    spec: &ExperimentSpec,
    axis_idx: usize,
    trial: usize,
    series: usize,
) -> Result<MonteCarloSpec> {
    let seed = derive_seed(
        spec.seed,
        &[MC_STREAM, axis_idx as u64, trial as u64, series as u64],
    );
    MonteCarloSpec::new(spec.mc.n_samples, seed)?.with_batch(spec.mc.batch)
}

fn ranges(spec: &ExperimentSpec) -> Result<(AngleRange, AngleRange)> {
    let c = &spec.channel;
    Ok((
        AngleRange::new(c.aod_range[0], c.aod_range[1])?,
        AngleRange::new(c.aoa_range[0], c.aoa_range[1])?,
    ))
}

/// SPIM over all given paths against the strongest beam alone.
fn beam_comparison(
    spec: &ExperimentSpec,
    axis_idx: usize,
    trial: usize,
    gains: Vec<f64>,
    n0: f64,
) -> Result<Vec<Sample>> {
    let c = &spec.channel;
    let (aod, aoa) = ranges(spec)?;
    let n_paths = gains.len();
    let ch = sample_channel(
        &mut trial_rng(spec, trial),
        c.n_tx,
        c.n_rx,
        n_paths,
        &GainModel::Explicit(gains),
        aod,
        aoa,
    )?;
    let (mode, source) = spec.mode();
    let config = build_abf(&ch, n_paths, 1)?;
    let alphabet = pattern_alphabet(n_paths, 1)?;
    let ha = effective_channel(&ch, &config, mode)?;
    let covs = covariances(&ha, &config.dbf, &alphabet, n0, source)?;
    let g = c.n_tx as f64;

    let mut out = vec![
        Sample::new(0, Method::ClosedFormLb, i_app(&covs)),
        Sample::new(0, Method::ClosedFormSwapped, i_app_swapped(&covs)),
    ];
    // the closed form needs strictly positive gains
    let steered: Vec<SteeredPath> = (0..alphabet.k())
        .map(|i| SteeredPath::new(ch.gains()[i], g, ch.aoa()[i]))
        .collect();
    if steered.iter().all(|p| p.gain > 0.0) {
        out.push(Sample::new(
            0,
            Method::GeneralM,
            i_spim_general(&steered, c.n_rx, n0)?,
        ));
    }
    if spec.mc.enabled {
        let e = mc_mutual_information(&covs, &mc_spec(spec, axis_idx, trial, 0)?)?;
        out.push(Sample {
            series: 0,
            method: Method::MonteCarlo.into(),
            value: e.estimate,
            stderr: Some(e.stderr),
        });
    }
    out.push(Sample::new(
        1,
        RowMethod::ClosedForm,
        i_mmwave(ch.gains()[0], g, n0)?,
    ));
    let strongest: f64 = ha.column(0).iter().map(|z| z.norm_sqr()).sum();
    out.push(Sample::new(
        1,
        RowMethod::Shannon,
        (1.0 + strongest / n0).log2(),
    ));
    Ok(out)
}

/// SPIM with `M` paths under exponentially decaying gains, for each `M`.
fn path_count_comparison(
    spec: &ExperimentSpec,
    axis_idx: usize,
    trial: usize,
    gamma: f64,
) -> Result<Vec<Sample>> {
    let c = &spec.channel;
    let n0 = spec.noise.n0.unwrap_or(1.0);
    let (aod, aoa) = ranges(spec)?;
    let n_paths = c.m_values.iter().copied().max().unwrap_or(1);
    let ch = sample_channel(
        &mut trial_rng(spec, trial),
        c.n_tx,
        c.n_rx,
        n_paths,
        &GainModel::ExponentialDecay { gamma },
        aod,
        aoa,
    )?;
    let (mode, source) = spec.mode();
    let g = c.n_tx as f64;
    let mut out = Vec::new();
    for (si, &m) in c.m_values.iter().enumerate() {
        let config = build_abf(&ch, m, 1)?;
        let alphabet = pattern_alphabet(m, 1)?;
        let ha = effective_channel(&ch, &config, mode)?;
        let covs = covariances(&ha, &config.dbf, &alphabet, n0, source)?;
        let steered: Vec<SteeredPath> = (0..alphabet.k())
            .map(|i| SteeredPath::new(ch.gains()[i], g, ch.aoa()[i]))
            .collect();
        out.push(Sample::new(si, Method::ClosedFormLb, i_app(&covs)));
        out.push(Sample::new(
            si,
            Method::GeneralM,
            i_spim_general(&steered, c.n_rx, n0)?,
        ));
        if spec.mc.enabled {
            let e = mc_mutual_information(&covs, &mc_spec(spec, axis_idx, trial, si)?)?;
            out.push(Sample {
                series: si,
                method: Method::MonteCarlo.into(),
                value: e.estimate,
                stderr: Some(e.stderr),
            });
        }
    }
    Ok(out)
}

/// Writes the CSV and plot script named in `spec.outputs`, if any.
pub fn write_outputs(spec: &ExperimentSpec, table: &ResultTable) -> Result<()> {
    if let Some(csv) = &spec.outputs.csv {
        write_file(csv, &table.to_csv())?;
        if let Some(script) = &spec.outputs.plot_script {
            write_file(
                script,
                &plot_script(
                    spec,
                    csv,
                    script,
                    &format!("{} sweep", spec.experiment.tag()),
                ),
            )?;
        }
    } else if spec.outputs.plot_script.is_some() {
        return Err(spec_err("outputs.plot_script", "needs outputs.csv"));
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn plot_script(spec: &ExperimentSpec, csv: &Path, script: &Path, title: &str) -> String {
    // reference the CSV relative to the script when they share a directory
    let csv_ref = match (csv.parent(), script.parent(), csv.file_name()) {
        (Some(a), Some(b), Some(name)) if a == b => name.to_string_lossy().into_owned(),
        _ => csv.to_string_lossy().into_owned(),
    };
    let (ylabel, log2) = match spec.experiment {
        ExperimentKind::MarginMap => ("log2 M_margin", "True"),
        ExperimentKind::QFunction => ("Q(delta theta)", "False"),
        _ => ("spectral efficiency (bits/s/Hz)", "False"),
    };
    format!(
        r#"# Plots {csv_ref}. Usage: python3 {script_name}
import csv
import math
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
CSV = os.path.join(HERE, {csv_ref:?})
LOG2 = {log2}

curves = defaultdict(lambda: ([], []))
with open(CSV, newline="") as f:
    for row in csv.DictReader(f):
        xs, ys = curves[(row["series"], row["method"])]
        y = float(row["value"])
        xs.append(float(row["axis"]))
        ys.append(math.log2(y) if LOG2 else y)

fig, ax = plt.subplots(figsize=(6, 4))
for (series, method), (xs, ys) in sorted(curves.items()):
    style = "o" if method == "monte-carlo" else "-"
    ax.plot(xs, ys, style, label=f"{{series}} / {{method}}")
ax.set_xlabel({xlabel:?})
ax.set_ylabel({ylabel:?})
ax.set_title({title:?})
ax.grid(True, alpha=0.3)
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(os.path.splitext(CSV)[0] + ".png", dpi=150)
"#,
        script_name = script
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        xlabel = spec.experiment.axis_label(),
    )
}

/// Figures with canned reproductions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
}

impl FigureId {
    pub const ALL: [FigureId; 7] = [
        FigureId::Fig2,
        FigureId::Fig3,
        FigureId::Fig4,
        FigureId::Fig5,
        FigureId::Fig6,
        FigureId::Fig7,
        FigureId::Fig8,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6 => "fig6",
            FigureId::Fig7 => "fig7",
            FigureId::Fig8 => "fig8",
        }
    }

    fn title(self) -> &'static str {
        match self {
            FigureId::Fig2 => "SPIM margin vs decay exponent (b_max = 6, relaxed M)",
            FigureId::Fig3 => "SE vs SNR, (w1, w2) = (0.9, 0.1)",
            FigureId::Fig4 => "SE vs SNR, (w1, w2) = (0.6, 0.4)",
            FigureId::Fig5 => "SE vs w1, w1 + w2 = 1, N0 = 0.1",
            FigureId::Fig6 => "SE vs w1, w1 + w2 = 1, N0 = 1.0",
            FigureId::Fig7 => "SE vs decay exponent, M in {1, 2, 4, 8}, N0 = 0.1",
            FigureId::Fig8 => "Receive-beam overlap Q vs angle difference",
        }
    }

    /// The pinned experiment behind the figure.
    pub fn spec(self) -> ExperimentSpec {
        let steps = |lo: f64, hi: f64, step: f64| -> Vec<f64> {
            let n = ((hi - lo) / step).round() as usize;
            // rounded to keep grid values short in the CSV
            (0..=n)
                .map(|i| ((lo + i as f64 * step) * 1e6).round() / 1e6)
                .collect()
        };
        let mut spec = ExperimentSpec {
            experiment: ExperimentKind::SnrSweep,
            seed: 2020,
            trials: DEFAULT_TRIALS,
            grid: GridSpec { values: vec![] },
            channel: ChannelSpec::default(),
            noise: NoiseSpec::default(),
            mc: McSpec {
                enabled: true,
                ..McSpec::default()
            },
            margin: MarginSpec::default(),
            outputs: OutputSpec::default(),
        };
        match self {
            FigureId::Fig2 => {
                spec.experiment = ExperimentKind::MarginMap;
                spec.grid.values = steps(0.01, 0.99, 0.01);
                spec.noise.n0_values = Some(vec![0.01, 0.05, 0.1, 0.5, 1.0]);
                spec.margin.relax_integer = true;
                spec.mc.enabled = false;
            }
            FigureId::Fig3 | FigureId::Fig4 => {
                spec.grid.values = steps(-10.0, 20.0, 2.0);
                spec.channel.gains = Some(if self == FigureId::Fig3 {
                    vec![0.9, 0.1]
                } else {
                    vec![0.6, 0.4]
                });
            }
            FigureId::Fig5 | FigureId::Fig6 => {
                spec.experiment = ExperimentKind::W1Sweep;
                spec.grid.values = steps(0.05, 0.95, 0.05);
                spec.noise.n0 = Some(if self == FigureId::Fig5 { 0.1 } else { 1.0 });
            }
            FigureId::Fig7 => {
                spec.experiment = ExperimentKind::GammaSweep;
                spec.grid.values = steps(0.05, 0.95, 0.05);
                spec.noise.n0 = Some(0.1);
            }
            FigureId::Fig8 => {
                spec.experiment = ExperimentKind::QFunction;
                spec.grid.values = steps(-1.0, 1.0, 0.005);
                spec.mc.enabled = false;
            }
        }
        spec
    }
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureId::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = FigureId::ALL.iter().map(|f| f.name()).collect();
                crate::error::param(format!(
                    "unknown figure `{s}`; valid ids: {}",
                    valid.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureOutput {
    pub csv: PathBuf,
    pub plot_script: PathBuf,
    pub table: ResultTable,
}

/// Runs a figure's pinned experiment and writes `<id>.csv` and `<id>_plot.py`
/// into `out_dir`.
pub fn reproduce_figure(
    id: FigureId,
    out_dir: &Path,
    overrides: &Overrides,
) -> Result<FigureOutput> {
    let mut spec = id.spec();
    spec.apply(overrides)?;
    let table = run_experiment(&spec)?;
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let csv = out_dir.join(format!("{}.csv", id.name()));
    let script = out_dir.join(format!("{}_plot.py", id.name()));
    write_file(&csv, &table.to_csv())?;
    write_file(&script, &plot_script(&spec, &csv, &script, id.title()))?;
    Ok(FigureOutput {
        csv,
        plot_script: script,
        table,
    })
}
