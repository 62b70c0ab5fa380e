//! When does switching between beams beat always using the strongest one?
//!
//! All predicates are sufficient conditions with strict inequalities; a tie
//! counts as "no guarantee".

use crate::capacity::{i_mmwave, i_spim_m2, SteeredPath};
use crate::error::{param, Error, Result};

pub const DEFAULT_B_MAX: u32 = 6;
/// Step in `M` when the power-of-two restriction is relaxed.
pub const RELAXED_GRID_STEP: f64 = 0.01;
const CROSSOVER_EPS: f64 = 1e-6;
const BISECTION_TOL: f64 = 1e-10;

/// Two-path high-SNR margin `4 w_2 - w_1`; positive means SPIM wins.
pub fn two_path_margin(w1: f64, w2: f64) -> Result<f64> {
    if !(w2 > 0.0) || !w2.is_finite() {
        return Err(param(format!(
            "second path gain must be positive, got {w2}"
        )));
    }
    if !(w1 >= w2) || !w1.is_finite() {
        return Err(param(format!(
            "gains must be ordered w1 >= w2, got ({w1}, {w2})"
        )));
    }
    Ok(4.0 * w2 - w1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricMeanVerdict {
    /// `τ` at the caller's noise power.
    pub tau: f64,
    /// Geometric mean of `w_2 .. w_M`.
    pub geo_mean: f64,
    /// `geo_mean > τ w_1`.
    pub holds: bool,
    /// Same test with `N_0 = 0`.
    pub holds_noiseless: bool,
}

fn check_gains(w: &[f64]) -> Result<()> {
    if w.len() < 2 {
        return Err(param(format!(
            "need at least two path gains, got {}",
            w.len()
        )));
    }
    if let Some(x) = w.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        return Err(param(format!("path gains must be positive, got {x}")));
    }
    Ok(())
}

fn geometric_mean_tail(w: &[f64]) -> f64 {
    let tail = &w[1..];
    let exponent = 1.0 / tail.len() as f64;
    let product: f64 = tail.iter().product();
    if product.is_normal() {
        product.powf(exponent)
    } else {
        (tail.iter().map(|x| x.ln()).sum::<f64>() * exponent).exp()
    }
}

/// `M^{-M/(M-1)}`.
fn base_tau(m: usize) -> f64 {
    let m = m as f64;
    m.powf(-m / (m - 1.0))
}

/// Geometric-mean condition for `M` paths:
/// `(Π_{n>=2} w_n)^{1/(M-1)} > τ w_1`,
/// `τ = M^{-M/(M-1)} exp(4 N_0 Σ_n 1/(w_n g_n))`.
pub fn geometric_mean_condition(w: &[f64], g: &[f64], n0: f64) -> Result<GeometricMeanVerdict> {
    check_gains(w)?;
    if g.len() != w.len() {
        return Err(param(format!(
            "{} array gains for {} paths",
            g.len(),
            w.len()
        )));
    }
    if let Some(x) = g.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        return Err(param(format!("array gains must be positive, got {x}")));
    }
    if !(n0 >= 0.0) || !n0.is_finite() {
        return Err(param(format!("noise power must be >= 0, got {n0}")));
    }
    let tau0 = base_tau(w.len());
    let penalty: f64 = w.iter().zip(g).map(|(wi, gi)| 1.0 / (wi * gi)).sum();
    let tau = tau0 * (4.0 * n0 * penalty).exp();
    let geo_mean = geometric_mean_tail(w);
    Ok(GeometricMeanVerdict {
        tau,
        geo_mean,
        holds: geo_mean > tau * w[0],
        holds_noiseless: geo_mean > tau0 * w[0],
    })
}

/// The geometric-mean condition in the high-SNR limit.
pub fn high_snr_condition(w: &[f64]) -> Result<bool> {
    check_gains(w)?;
    Ok(geometric_mean_tail(w) > base_tau(w.len()) * w[0])
}

/// Logarithmic form of [`high_snr_condition`]:
/// `(1/(M-1)) Σ_{n>=2} ln w_n > C + ln w_1`, `C = -(M/(M-1)) ln M`.
pub fn log_form_condition(w: &[f64]) -> Result<bool> {
    check_gains(w)?;
    let m = w.len() as f64;
    let lhs = w[1..].iter().map(|x| x.ln()).sum::<f64>() / (m - 1.0);
    let c = -(m / (m - 1.0)) * m.ln();
    Ok(lhs > c + w[0].ln())
}

/// Natural log of [`decay_condition_value`].
pub fn ln_decay_condition_value(m: f64, gamma: f64, n0: f64, g1: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(param(format!(
            "decay exponent must lie in (0, 1), got {gamma}"
        )));
    }
    if !(m >= 1.0) || !m.is_finite() {
        return Err(param(format!("path count must be >= 1, got {m}")));
    }
    if !(n0 >= 0.0) || !(g1 > 0.0) {
        return Err(param("need n0 >= 0 and g1 > 0"));
    }
    if m == 1.0 {
        return Ok(0.0);
    }
    // Σ_{n=1}^{M} γ^{1-n} = (γ^{1-M} - γ) / (1 - γ)
    let inv_sum = (gamma.powf(1.0 - m) - gamma) / (1.0 - gamma);
    Ok((m / (m - 1.0)) * m.ln() + 0.5 * m * gamma.ln() - 4.0 * n0 * inv_sum / g1)
}

/// Geometric-mean condition under `w_n = γ^{n-1}`, `g_n = g_1`, rearranged as
/// `value > 1`:
/// `M^{M/(M-1)} γ^{M/2} exp[-4 N_0 (γ^{1-M} - γ) / (g_1 (1 - γ))]`.
/// `M = 1` gives exactly 1.
pub fn decay_condition_value(m: f64, gamma: f64, n0: f64, g1: f64) -> Result<f64> {
    Ok(ln_decay_condition_value(m, gamma, n0, g1)?.exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginQuery {
    pub gamma: f64,
    pub n0: f64,
    pub g1: f64,
    pub b_max: u32,
    /// Search `M` on a fine grid instead of powers of two.
    pub relax_integer: bool,
}

impl MarginQuery {
    pub fn new(gamma: f64, n0: f64, g1: f64) -> Result<Self> {
        let q = Self {
            gamma,
            n0,
            g1,
            b_max: DEFAULT_B_MAX,
            relax_integer: false,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(param(format!(
                "decay exponent must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.n0 >= 0.0) || !(self.g1 > 0.0) {
            return Err(param("need n0 >= 0 and g1 > 0"));
        }
        if self.b_max > 62 {
            return Err(param(format!("b_max too large: {}", self.b_max)));
        }
        Ok(())
    }

    /// Candidate path counts above 1, ascending.
    pub fn candidates(&self) -> Vec<f64> {
        let top = (1u64 << self.b_max) as f64;
        if self.relax_integer {
            let steps = ((top - 1.0) / RELAXED_GRID_STEP).round() as usize;
            (1..=steps)
                .map(|i| 1.0 + i as f64 * RELAXED_GRID_STEP)
                .collect()
        } else {
            (1..=self.b_max).map(|b| (1u64 << b) as f64).collect()
        }
    }
}

/// Largest candidate `M` with decay condition value above 1, or 1 when none
/// qualifies.
pub fn spim_margin(q: &MarginQuery) -> Result<f64> {
    q.validate()?;
    let mut best = 1.0;
    for m in q.candidates() {
        if ln_decay_condition_value(m, q.gamma, q.n0, q.g1)? > 0.0 {
            best = m;
        }
    }
    Ok(best)
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect(mut f: impl FnMut(f64) -> Result<f64>, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() && !fb.is_finite() {
        return Err(Error::NoRoot {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }
    let a_negative = fa < 0.0;
    while b - a > tol {
        let mid = 0.5 * (a + b);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == a_negative {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Smallest decay exponent at which `M` paths beat one: the root of
/// [`decay_condition_value`] `= 1` in `(0, 1)`.
pub fn gamma_crossover(m: usize, n0: f64, g1: f64) -> Result<f64> {
    if m < 2 {
        return Err(param(format!("crossover needs M >= 2, got {m}")));
    }
    bisect(
        |gamma| ln_decay_condition_value(m as f64, gamma, n0, g1),
        CROSSOVER_EPS,
        1.0 - CROSSOVER_EPS,
        BISECTION_TOL,
    )
}

/// Strongest-path gain `w_1` (with `w_2 = 1 - w_1`) at which two-path SPIM and
/// the conventional beam tie, searched over `(lo, hi)` with the receive beams
/// `delta_theta` apart.
pub fn pair_crossover_w1(
    n_r: usize,
    g: f64,
    n0: f64,
    delta_theta: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    if !(0.5 <= lo && lo < hi && hi < 1.0) {
        return Err(param(format!(
            "search interval must lie in [0.5, 1), got ({lo}, {hi})"
        )));
    }
    bisect(
        |w1| {
            let p1 = SteeredPath::new(w1, g, 0.0);
            let p2 = SteeredPath::new(1.0 - w1, g, delta_theta);
            Ok(i_spim_m2(&p1, &p2, n_r, n0)? - i_mmwave(w1, g, n0)?)
        },
        lo,
        hi,
        1e-9,
    )
}
