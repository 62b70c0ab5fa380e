//! Closed-form spectral-efficiency quantities.
//!
//! Two families live here:
//!
//! * functions of a [`CovarianceSet`] (any effective channel, any alphabet):
//!   the conditional Shannon term, the spatial lower bound and the mixture
//!   approximation built from pairwise determinants `|Σ_n + Σ_t|`;
//! * functions of steered-path parameters `(w, g, θ)` for a single RF chain,
//!   where every determinant has a Dirichlet-kernel closed form.
//!
//! Everything is accumulated in natural logs and converted to bits on return.
//!
//! The approximation deletes a constant `N_r (1 - log2 e)` from the sum of the
//! Shannon term and the spatial bound, so
//! `i_app = i_shannon_conditional + i_lb_spatial - N_r (1 - log2 e)`.

use std::f64::consts::{LN_2, LOG2_E, PI};
use std::fmt;

use crate::beamforming::PatternAlphabet;
use crate::channel::steering_vector;
use crate::error::{param, Error, Result};
use crate::numerics::{Cholesky, ComplexMatrix, C64};

const HERMITIAN_TOL: f64 = 1e-12;
/// Below this angle difference (mod 1) the Dirichlet kernel uses its series.
const DIRICHLET_SERIES_CUTOFF: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceSource {
    Exact,
    Asymptotic,
}

/// Received-signal covariances `Σ_k = N_0 I + (H A B_k D)(H A B_k D)^H`, one per
/// pattern, with their log-determinants and those of all pairwise sums.
#[derive(Debug, Clone)]
pub struct CovarianceSet {
    n0: f64,
    sigmas: Vec<ComplexMatrix>,
    source: CovarianceSource,
    factors: Vec<Cholesky>,
    // row-major K×K, symmetric; diagonal holds ln|2Σ_k|
    ln_pair_dets: Vec<f64>,
}

impl CovarianceSet {
    pub fn new(n0: f64, sigmas: Vec<ComplexMatrix>, source: CovarianceSource) -> Result<Self> {
        if !(n0 > 0.0) || !n0.is_finite() {
            return Err(param(format!("noise power must be positive, got {n0}")));
        }
        let n_r = sigmas
            .first()
            .ok_or_else(|| param("covariance set needs at least one pattern"))?
            .rows();
        for s in &sigmas {
            if s.rows() != n_r || s.cols() != n_r {
                return Err(Error::Dimension(format!(
                    "covariance of shape {}x{} in a set of {n_r}x{n_r}",
                    s.rows(),
                    s.cols()
                )));
            }
            if !s.is_hermitian(HERMITIAN_TOL) {
                return Err(param("covariance is not Hermitian"));
            }
        }
        let factors = sigmas
            .iter()
            .map(Cholesky::new)
            .collect::<Result<Vec<_>>>()?;
        let k = sigmas.len();
        let mut ln_pair_dets = vec![0.0; k * k];
        for n in 0..k {
            ln_pair_dets[n * k + n] = factors[n].ln_det() + n_r as f64 * LN_2;
            for t in (n + 1)..k {
                let d = Cholesky::new(&sigmas[n].add(&sigmas[t])?)?.ln_det();
                ln_pair_dets[n * k + t] = d;
                ln_pair_dets[t * k + n] = d;
            }
        }
        Ok(Self {
            n0,
            sigmas,
            source,
            factors,
            ln_pair_dets,
        })
    }

    /// Single-RF-chain covariances `N_0 I + w g a_R(θ) a_R(θ)^H` in the
    /// large-array limit, one pattern per path.
    pub fn from_steered_paths(paths: &[SteeredPath], n_r: usize, n0: f64) -> Result<Self> {
        let sigmas = paths
            .iter()
            .map(|p| {
                let a = steering_vector(p.aoa, n_r)?;
                let amp = (p.gain * p.array_gain).sqrt();
                let h: Vec<C64> = a.into_iter().map(|z| z * amp).collect();
                Ok(rank_one_plus_noise(&h, n0))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n0, sigmas, CovarianceSource::Asymptotic)
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    pub fn n_r(&self) -> usize {
        self.sigmas[0].rows()
    }

    pub fn k(&self) -> usize {
        self.sigmas.len()
    }

    pub fn sigmas(&self) -> &[ComplexMatrix] {
        &self.sigmas
    }

    pub fn source(&self) -> CovarianceSource {
        self.source
    }

    pub fn factors(&self) -> &[Cholesky] {
        &self.factors
    }

    /// `ln|Σ_k|`.
    pub fn ln_det(&self, k: usize) -> f64 {
        self.factors[k].ln_det()
    }

    /// `ln|Σ_n + Σ_t|`.
    pub fn ln_det_sum(&self, n: usize, t: usize) -> f64 {
        self.ln_pair_dets[n * self.k() + t]
    }
}

fn rank_one_plus_noise(h: &[C64], n0: f64) -> ComplexMatrix {
    ComplexMatrix::from_fn(h.len(), h.len(), |r, c| h[r] * h[c].conj()).add_diagonal(n0)
}

/// Builds `Σ_k` for every pattern of the alphabet from an effective channel
/// `H A` (`N_r × M`) and digital beamformer `D` (`N_s × N_s`).
pub fn covariances(
    effective_channel: &ComplexMatrix,
    dbf: &ComplexMatrix,
    alphabet: &PatternAlphabet,
    n0: f64,
    source: CovarianceSource,
) -> Result<CovarianceSet> {
    if !(n0 > 0.0) {
        return Err(param(format!("noise power must be positive, got {n0}")));
    }
    if effective_channel.cols() != alphabet.m() {
        return Err(Error::Dimension(format!(
            "effective channel has {} columns, alphabet expects {}",
            effective_channel.cols(),
            alphabet.m()
        )));
    }
    let n_r = effective_channel.rows();
    let sigmas = alphabet
        .patterns()
        .iter()
        .map(|p| {
            let g = effective_channel
                .matmul(&p.selection_matrix())?
                .matmul(dbf)?;
            // Σ = N_0 I + G G^H, summed entrywise so the result is exactly Hermitian
            Ok(ComplexMatrix::from_fn(n_r, n_r, |r, c| {
                (0..g.cols()).map(|s| g[(r, s)] * g[(c, s)].conj()).sum()
            })
            .add_diagonal(n0))
        })
        .collect::<Result<Vec<_>>>()?;
    CovarianceSet::new(n0, sigmas, source)
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Gap removed from the bound-based sum: `N_r (1 - log2 e)` (negative).
pub fn deleted_gap(n_r: usize) -> f64 {
    n_r as f64 * (1.0 - LOG2_E)
}

/// `(1/K) Σ_k log2|Σ_k / N_0|`, the symbol-domain information given the pattern.
pub fn i_shannon_conditional(covs: &CovarianceSet) -> f64 {
    let n_r = covs.n_r() as f64;
    let ln_n0 = covs.n0.ln();
    let mean = (0..covs.k())
        .map(|k| covs.ln_det(k) - n_r * ln_n0)
        .sum::<f64>()
        / covs.k() as f64;
    mean / LN_2
}

/// Closed-form lower bound on the spatial information `I(y; B)`:
/// `log2 K - N_r log2 e - (1/K) Σ_n log2 Σ_t |Σ_n| / |Σ_n + Σ_t|`.
/// It is a bound, and can be negative.
pub fn i_lb_spatial(covs: &CovarianceSet) -> f64 {
    let k = covs.k();
    let inner = (0..k)
        .map(|n| log_sum_exp((0..k).map(move |t| covs.ln_det(n) - covs.ln_det_sum(n, t))))
        .sum::<f64>()
        / k as f64;
    (k as f64).log2() - covs.n_r() as f64 * LOG2_E - inner / LN_2
}

/// Mixture MI approximation
/// `log2(K / (2N_0)^{N_r}) - (1/K) Σ_n log2 Σ_t |Σ_n + Σ_t|^{-1}`.
pub fn i_app(covs: &CovarianceSet) -> f64 {
    let k = covs.k();
    let inner = (0..k)
        .map(|n| log_sum_exp((0..k).map(move |t| -covs.ln_det_sum(n, t))))
        .sum::<f64>()
        / k as f64;
    ((k as f64).ln() - covs.n_r() as f64 * (2.0 * covs.n0).ln() - inner) / LN_2
}

/// Variant of [`i_app`] whose pairwise ratio uses the *second* index in the
/// numerator, `|Σ_t| / |Σ_n + Σ_t|`:
/// `I_shannon + log2 K - N_r - (1/K) Σ_n log2 Σ_t |Σ_t| / |Σ_n + Σ_t|`.
///
/// For `K <= 2` the two forms coincide exactly (the off-diagonal ratios swap
/// between the two outer terms); they can differ for larger alphabets.
pub fn i_app_swapped(covs: &CovarianceSet) -> f64 {
    let k = covs.k();
    let inner = (0..k)
        .map(|n| log_sum_exp((0..k).map(move |t| covs.ln_det(t) - covs.ln_det_sum(n, t))))
        .sum::<f64>()
        / k as f64;
    i_shannon_conditional(covs) + (k as f64).log2() - covs.n_r() as f64 - inner / LN_2
}

/// A beam steered along one channel path, as seen by a single RF chain in the
/// large-array limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeredPath {
    /// Path power gain `w`.
    pub gain: f64,
    /// Transmit array gain `g` (`N_t` when fully steered).
    pub array_gain: f64,
    /// Normalized angle of arrival `θ`.
    pub aoa: f64,
}

impl SteeredPath {
    pub fn new(gain: f64, array_gain: f64, aoa: f64) -> Self {
        Self {
            gain,
            array_gain,
            aoa,
        }
    }

    fn power(&self) -> f64 {
        self.gain * self.array_gain
    }
}

/// Squared normalized inner product of two receive steering vectors,
/// `Q(Δθ) = sin²(π N_r Δθ) / (N_r² sin²(π Δθ))`, with the removable
/// singularities at integer `Δθ` filled by the limit 1.
pub fn dirichlet_gain(delta_theta: f64, n_r: usize) -> f64 {
    let n = n_r as f64;
    // the squared kernel has period 1
    let d = delta_theta - delta_theta.round();
    if d.abs() < DIRICHLET_SERIES_CUTOFF {
        let x = PI * d;
        return (1.0 - (n * n - 1.0) * x * x / 3.0).clamp(0.0, 1.0);
    }
    let ratio = (PI * n * d).sin() / (n * (PI * d).sin());
    (ratio * ratio).clamp(0.0, 1.0)
}

/// `|Σ_n + Σ_t| / (2N_0)^{N_r}` in closed form:
/// `(1 + a_n)(1 + a_t) - a_n a_t Q(θ_t - θ_n)` with `a = w g / 2N_0`.
fn pair_bracket(pn: &SteeredPath, pt: &SteeredPath, n_r: usize, n0: f64) -> f64 {
    let an = pn.power() / (2.0 * n0);
    let at = pt.power() / (2.0 * n0);
    let q = dirichlet_gain(pt.aoa - pn.aoa, n_r);
    1.0 + an + at + an * at * (1.0 - q)
}

/// `ln|Σ_n + Σ_t|` from path parameters.
pub fn ln_det_sum_closed_form(pn: &SteeredPath, pt: &SteeredPath, n_r: usize, n0: f64) -> f64 {
    n_r as f64 * (2.0 * n0).ln() + pair_bracket(pn, pt, n_r, n0).ln()
}

/// `|Σ_n + Σ_t|` from path parameters (may under/overflow for large `N_r`;
/// prefer [`ln_det_sum_closed_form`]).
pub fn det_sum_closed_form(pn: &SteeredPath, pt: &SteeredPath, n_r: usize, n0: f64) -> f64 {
    ln_det_sum_closed_form(pn, pt, n_r, n0).exp()
}

fn check_paths(paths: &[SteeredPath], n_r: usize, n0: f64) -> Result<()> {
    if paths.is_empty() {
        return Err(param("need at least one steered path"));
    }
    if n_r == 0 {
        return Err(param("need at least one receive antenna"));
    }
    if !(n0 > 0.0) || !n0.is_finite() {
        return Err(param(format!("noise power must be positive, got {n0}")));
    }
    if let Some(p) = paths.iter().find(|p| {
        !(p.gain > 0.0 && p.array_gain > 0.0) || !p.gain.is_finite() || !p.array_gain.is_finite()
    }) {
        return Err(param(format!(
            "path and array gains must be positive, got {p:?}"
        )));
    }
    Ok(())
}

/// Conventional single-beam SE `log2(1 + w_1 g_1 / N_0)`.
pub fn i_mmwave(w1: f64, g1: f64, n0: f64) -> Result<f64> {
    if !(n0 > 0.0) {
        return Err(param(format!("noise power must be positive, got {n0}")));
    }
    if !(w1 >= 0.0 && g1 >= 0.0) {
        return Err(param("gains must be non-negative"));
    }
    Ok((1.0 + w1 * g1 / n0).ln() / LN_2)
}

/// SPIM with `M` steered paths and one RF chain:
/// `log2 M - (1/M) Σ_n log2 Σ_t [(1 + a_n)(1 + a_t) - Q_{n,t}]^{-1}`.
///
/// Equal to [`i_app`] on the large-array covariances; reduces to
/// [`i_mmwave`] for `M = 1`.
pub fn i_spim_general(paths: &[SteeredPath], n_r: usize, n0: f64) -> Result<f64> {
    check_paths(paths, n_r, n0)?;
    let m = paths.len();
    let ln_bracket = |n: usize, t: usize| {
        if n == t {
            // (1 + a)^2 - a^2 exactly
            (1.0 + paths[n].gain * paths[n].array_gain / n0).ln()
        } else {
            pair_bracket(&paths[n], &paths[t], n_r, n0).ln()
        }
    };
    let inner = (0..m)
        .map(|n| log_sum_exp((0..m).map(|t| -ln_bracket(n, t))))
        .sum::<f64>()
        / m as f64;
    Ok(((m as f64).ln() - inner) / LN_2)
}

/// The two-path form
/// `½ Σ_i log2(1 + w_i g_i / N_0) + 1 - N_r - ½ Σ_n log2 Σ_t |Σ_n| / |Σ_n + Σ_t|`
/// with every determinant in closed form.
pub fn i_spim_m2(p1: &SteeredPath, p2: &SteeredPath, n_r: usize, n0: f64) -> Result<f64> {
    spim_m2(p1, p2, n_r, n0, false)
}

/// [`i_spim_m2`] with `|Σ_t|` in the numerator of the pairwise ratio.
pub fn i_spim_m2_swapped(p1: &SteeredPath, p2: &SteeredPath, n_r: usize, n0: f64) -> Result<f64> {
    spim_m2(p1, p2, n_r, n0, true)
}

fn spim_m2(p1: &SteeredPath, p2: &SteeredPath, n_r: usize, n0: f64, alt: bool) -> Result<f64> {
    let paths = [*p1, *p2];
    check_paths(&paths, n_r, n0)?;
    let nr = n_r as f64;
    // ln(|Σ_k| / N_0^{N_r}) = ln(1 + w g / N_0)
    let ln_snr = |p: &SteeredPath| (1.0 + p.power() / n0).ln();
    let shannon = 0.5 * (ln_snr(p1) + ln_snr(p2));
    let ln_ratio = |n: usize, t: usize| {
        let num = if alt {
            ln_snr(&paths[t])
        } else {
            ln_snr(&paths[n])
        };
        let den = if n == t {
            nr * LN_2 + ln_snr(&paths[n])
        } else {
            nr * LN_2 + pair_bracket(&paths[n], &paths[t], n_r, n0).ln()
        };
        num - den
    };
    let spatial = 0.5
        * (0..2)
            .map(|n| log_sum_exp((0..2).map(|t| ln_ratio(n, t))))
            .sum::<f64>();
    Ok((shannon - spatial) / LN_2 + 1.0 - nr)
}

/// Which formula produced an SE value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Bound-based approximation with `|Σ_n|` in the pairwise ratio.
    ClosedFormLb,
    /// Same with `|Σ_t|` in the pairwise ratio.
    ClosedFormSwapped,
    /// Path-parameter closed form for `M` steered paths.
    GeneralM,
    /// Mixture-entropy Monte Carlo.
    MonteCarlo,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::ClosedFormLb,
        Method::ClosedFormSwapped,
        Method::GeneralM,
        Method::MonteCarlo,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::ClosedFormLb => "closed-form-lb",
            Method::ClosedFormSwapped => "closed-form-swapped",
            Method::GeneralM => "general-M",
            Method::MonteCarlo => "monte-carlo",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Paired SPIM / conventional SE values.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEfficiencyReport {
    pub i_spim: f64,
    pub i_mmwave: f64,
    pub method: Method,
    pub parameters: Vec<(String, f64)>,
}

impl SpectralEfficiencyReport {
    pub fn new(
        i_spim: f64,
        i_mmwave: f64,
        method: Method,
        parameters: Vec<(String, f64)>,
    ) -> Result<Self> {
        for (name, v) in [("SPIM", i_spim), ("conventional", i_mmwave)] {
            // tiny negative values are rounding noise around zero
            if !v.is_finite() || v < -1e-9 {
                return Err(param(format!(
                    "{name} SE must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(Self {
            i_spim: i_spim.max(0.0),
            i_mmwave: i_mmwave.max(0.0),
            method,
            parameters,
        })
    }

    /// Closed-form comparison for steered paths ordered strongest first.
    pub fn closed_form(paths: &[SteeredPath], n_r: usize, n0: f64, method: Method) -> Result<Self> {
        check_paths(paths, n_r, n0)?;
        let i_spim = match method {
            Method::GeneralM => i_spim_general(paths, n_r, n0)?,
            Method::ClosedFormLb => i_app(&CovarianceSet::from_steered_paths(paths, n_r, n0)?),
            Method::ClosedFormSwapped => {
                i_app_swapped(&CovarianceSet::from_steered_paths(paths, n_r, n0)?)
            }
            Method::MonteCarlo => {
                return Err(param(
                    "Monte-Carlo reports are produced by the montecarlo module",
                ))
            }
        };
        let mut parameters = vec![("n0".to_string(), n0), ("n_r".to_string(), n_r as f64)];
        for (i, p) in paths.iter().enumerate() {
            parameters.push((format!("w{}", i + 1), p.gain));
            parameters.push((format!("g{}", i + 1), p.array_gain));
            parameters.push((format!("theta{}", i + 1), p.aoa));
        }
        Self::new(
            i_spim,
            i_mmwave(paths[0].gain, paths[0].array_gain, n0)?,
            method,
            parameters,
        )
    }

    /// `i_spim - i_mmwave`.
    pub fn advantage(&self) -> f64 {
        self.i_spim - self.i_mmwave
    }
}
