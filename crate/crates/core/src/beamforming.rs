//! Analog/digital beamformers and the spatial-pattern alphabet.
//!
//! A pattern connects the `n_s` RF-chain outputs to `n_s` distinct taps of
//! the analog beamformer, which has `m` taps steered at the `m` strongest
//! paths. Which pattern is active carries `log2 K` extra bits per symbol.

use itertools::Itertools;

use crate::channel::{steering_vector, ChannelRealization};
use crate::error::{param, Error, Result};
use crate::numerics::{ComplexMatrix, C64};

/// One spatial pattern: the (0-based) tap each RF chain is connected to.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pattern {
    m: usize,
    taps: Vec<usize>,
}

impl Pattern {
    pub fn new(m: usize, taps: Vec<usize>) -> Result<Self> {
        if taps.is_empty() || taps.len() > m {
            return Err(param(format!(
                "pattern needs 1..={m} taps, got {}",
                taps.len()
            )));
        }
        if taps.iter().any(|&t| t >= m) || taps.iter().duplicates().next().is_some() {
            return Err(param(format!(
                "pattern taps {taps:?} must be distinct and < {m}"
            )));
        }
        Ok(Self { m, taps })
    }

    pub fn taps(&self) -> &[usize] {
        &self.taps
    }

    pub fn n_s(&self) -> usize {
        self.taps.len()
    }

    /// The `m × n_s` selection matrix `[e_{i_1}, …, e_{i_ns}]`.
    pub fn selection_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.m, self.taps.len(), |r, c| {
            if self.taps[c] == r {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternAlphabet {
    m: usize,
    n_s: usize,
    patterns: Vec<Pattern>,
}

impl PatternAlphabet {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    /// Alphabet size `K`.
    pub fn k(&self) -> usize {
        self.patterns.len()
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    /// Spatial bits carried per symbol, `log2 K`.
    pub fn spatial_bits(&self) -> u32 {
        self.k().trailing_zeros()
    }
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// `K = 2^⌊log2 C(m, n_s)⌋`.
pub fn alphabet_size(m: usize, n_s: usize) -> u128 {
    let c = binomial(m, n_s);
    if c == 0 {
        0
    } else {
        1u128 << (127 - c.leading_zeros())
    }
}

/// The lexicographically first `K` tap combinations.
pub fn pattern_alphabet(m: usize, n_s: usize) -> Result<PatternAlphabet> {
    if n_s == 0 || n_s > m {
        return Err(param(format!(
            "need 1 <= n_s <= m, got n_s = {n_s}, m = {m}"
        )));
    }
    let k = alphabet_size(m, n_s);
    // anything this large is not enumerable anyway
    let k = usize::try_from(k).map_err(|_| param("pattern alphabet too large"))?;
    let patterns = (0..m)
        .combinations(n_s)
        .take(k)
        .map(|taps| Pattern { m, taps })
        .collect();
    Ok(PatternAlphabet { m, n_s, patterns })
}

/// Hybrid beamformer steered at the strongest paths of a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerConfig {
    /// `N_t × M`, unit-modulus entries.
    pub abf: ComplexMatrix,
    /// `N_s × N_s`, `Tr(D D^H) = 1`.
    pub dbf: ComplexMatrix,
    /// Array gain per steered path (`N_t` for a fully steered column).
    pub array_gains: Vec<f64>,
    /// Channel path index behind each beamformer column.
    pub steered_paths: Vec<usize>,
}

/// Steers column `j` of the analog beamformer at the `j`-th strongest path:
/// `√N_t · a_T(φ_j)`. The digital beamformer is `I / √n_s`, which spends the
/// whole power budget.
pub fn build_abf(channel: &ChannelRealization, m: usize, n_s: usize) -> Result<BeamformerConfig> {
    if m == 0 || m > channel.n_paths() {
        return Err(param(format!(
            "cannot steer {m} beams over {} paths",
            channel.n_paths()
        )));
    }
    if n_s == 0 || n_s > m {
        return Err(param(format!(
            "need 1 <= n_s <= m, got n_s = {n_s}, m = {m}"
        )));
    }
    let n_tx = channel.n_tx();
    let scale = (n_tx as f64).sqrt();
    // channel paths are already sorted by descending gain (ties by index)
    let steered_paths: Vec<usize> = (0..m).collect();
    let columns = steered_paths
        .iter()
        .map(|&p| {
            steering_vector(channel.aod()[p], n_tx)
                .map(|v| v.into_iter().map(|z| z * scale).collect())
        })
        .collect::<Result<Vec<Vec<C64>>>>()?;
    Ok(BeamformerConfig {
        abf: ComplexMatrix::from_columns(&columns)?,
        dbf: ComplexMatrix::identity(n_s).scale(1.0 / (n_s as f64).sqrt()),
        array_gains: vec![n_tx as f64; m],
        steered_paths,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectiveChannelMode {
    /// Full product `H A`.
    Exact,
    /// Large-array limit: column `j` is `√(w_j g_j) a_R(θ_j)`.
    Asymptotic,
}

/// Receive-side view `H A` of the steered beams (`N_r × M`).
pub fn effective_channel(
    channel: &ChannelRealization,
    config: &BeamformerConfig,
    mode: EffectiveChannelMode,
) -> Result<ComplexMatrix> {
    match mode {
        EffectiveChannelMode::Exact => crate::channel::build_channel(channel).matmul(&config.abf),
        EffectiveChannelMode::Asymptotic => {
            let columns = config
                .steered_paths
                .iter()
                .zip(&config.array_gains)
                .map(|(&p, &g)| {
                    let amp = (channel.gains()[p] * g).sqrt();
                    steering_vector(channel.aoa()[p], channel.n_rx())
                        .map(|v| v.into_iter().map(|z| z * amp).collect())
                })
                .collect::<Result<Vec<Vec<C64>>>>()?;
            ComplexMatrix::from_columns(&columns)
        }
    }
}

/// `s = A B_i D x`.
pub fn transmit(config: &BeamformerConfig, pattern: &Pattern, x: &[C64]) -> Result<Vec<C64>> {
    if pattern.m != config.abf.cols() {
        return Err(Error::Dimension(format!(
            "pattern over {} taps applied to a {}-column beamformer",
            pattern.m,
            config.abf.cols()
        )));
    }
    if pattern.n_s() != config.dbf.rows() {
        return Err(Error::Dimension(format!(
            "pattern with {} RF chains applied to a {}x{} digital beamformer",
            pattern.n_s(),
            config.dbf.rows(),
            config.dbf.cols()
        )));
    }
    let rf = config.dbf.matvec(x)?;
    // B_i just routes RF chain t onto tap taps[t]
    let mut taps = vec![C64::new(0.0, 0.0); pattern.m];
    for (t, &tap) in pattern.taps.iter().enumerate() {
        taps[tap] = rf[t];
    }
    config.abf.matvec(&taps)
}
