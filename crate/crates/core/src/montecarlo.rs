//! Monte-Carlo mutual information of the received Gaussian mixture.
//!
//! `y` is an equiprobable mixture of `CN(0, Σ_k)`. Its differential entropy is
//! estimated by sampling; the conditional entropies are Gaussian and exact.
//! Sampling is stratified (the same number of draws from every component) and
//! split into batches, each with its own RNG stream, so results do not depend
//! on thread scheduling.

use std::f64::consts::{E, LN_2, PI};

use rayon::prelude::*;

use crate::capacity::CovarianceSet;
use crate::error::{param, Result};
use crate::numerics::{Rng, C64};

pub const DEFAULT_MC_SAMPLES: usize = 100_000;
pub const MIN_MC_SAMPLES: usize = 1_000;
pub const DEFAULT_BATCH: usize = 4_096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarloSpec {
    pub n_samples: usize,
    pub seed: u64,
    /// Samples per work unit.
    pub batch: usize,
}

impl MonteCarloSpec {
    pub fn new(n_samples: usize, seed: u64) -> Result<Self> {
        let spec = Self {
            n_samples,
            seed,
            batch: DEFAULT_BATCH,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_batch(mut self, batch: usize) -> Result<Self> {
        self.batch = batch;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < MIN_MC_SAMPLES {
            return Err(param(format!(
                "need at least {MIN_MC_SAMPLES} Monte-Carlo samples, got {}",
                self.n_samples
            )));
        }
        if self.batch == 0 {
            return Err(param("batch size must be positive"));
        }
        Ok(())
    }
}

impl Default for MonteCarloSpec {
    fn default() -> Self {
        Self {
            n_samples: DEFAULT_MC_SAMPLES,
            seed: 0,
            batch: DEFAULT_BATCH,
        }
    }
}

/// A Monte-Carlo value in bits with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub estimate: f64,
    pub stderr: f64,
}

// running mean and sum of squared deviations
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Self {
            n,
            mean: self.mean + d * other.n as f64 / n as f64,
            m2: self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64,
        }
    }

    fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

/// `ln p(y)` of the equiprobable mixture.
fn mixture_ln_density(covs: &CovarianceSet, y: &[C64]) -> f64 {
    let k = covs.k();
    let mut terms = [0.0f64; 64];
    let mut heap;
    let terms: &mut [f64] = if k <= terms.len() {
        &mut terms[..k]
    } else {
        heap = vec![0.0; k];
        &mut heap
    };
    for (i, f) in covs.factors().iter().enumerate() {
        terms[i] = -f.quad_form(y) - f.ln_det();
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
    lse - (k as f64).ln() - covs.n_r() as f64 * PI.ln()
}

/// Differential entropy `h(y)` of the mixture in bits.
pub fn mixture_entropy(covs: &CovarianceSet, spec: &MonteCarloSpec) -> Result<Estimate> {
    spec.validate()?;
    let k = covs.k();
    let n_r = covs.n_r();
    let per_component = (spec.n_samples / k).max(1);
    let batches_per_component = per_component.div_ceil(spec.batch);

    let units: Vec<(usize, usize)> = (0..k)
        .flat_map(|c| (0..batches_per_component).map(move |b| (c, b)))
        .collect();
    let moments: Vec<Moments> = units
        .par_iter()
        .map(|&(c, b)| {
            let stream = ((c as u64) << 32) | b as u64;
            let mut rng = Rng::new(spec.seed, stream);
            let count = spec.batch.min(per_component - b * spec.batch);
            let factor = &covs.factors()[c];
            let mut acc = Moments::default();
            let mut x = vec![C64::new(0.0, 0.0); n_r];
            for _ in 0..count {
                x.iter_mut().for_each(|v| *v = rng.complex_normal());
                let y = factor.color(&x);
                acc.push(-mixture_ln_density(covs, &y) / LN_2);
            }
            acc
        })
        .collect();

    // strata are equiprobable: mean of stratum means, variance Σ s_k² / (K² n_k)
    let mut estimate = 0.0;
    let mut var = 0.0;
    for c in 0..k {
        let m = moments[c * batches_per_component..(c + 1) * batches_per_component]
            .iter()
            .fold(Moments::default(), |a, &b| a.merge(b));
        estimate += m.mean / k as f64;
        var += m.variance() / (m.n as f64 * (k * k) as f64);
    }
    Ok(Estimate {
        estimate,
        stderr: var.sqrt(),
    })
}

/// `I(y; x, B) = h(y) - N_r log2(πe N_0)`.
pub fn mc_mutual_information(covs: &CovarianceSet, spec: &MonteCarloSpec) -> Result<Estimate> {
    let h = mixture_entropy(covs, spec)?;
    let noise = covs.n_r() as f64 * (PI * E * covs.n0()).log2();
    Ok(Estimate {
        estimate: h.estimate - noise,
        stderr: h.stderr,
    })
}

/// `I(y; B) = h(y) - (1/K) Σ_k log2((πe)^{N_r} |Σ_k|)`.
pub fn mc_spatial_information(covs: &CovarianceSet, spec: &MonteCarloSpec) -> Result<Estimate> {
    let h = mixture_entropy(covs, spec)?;
    let k = covs.k();
    let n_r = covs.n_r() as f64;
    let conditional = (0..k)
        .map(|i| n_r * (PI * E).log2() + covs.ln_det(i) / LN_2)
        .sum::<f64>()
        / k as f64;
    Ok(Estimate {
        estimate: h.estimate - conditional,
        stderr: h.stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::{i_shannon_conditional, CovarianceSource, SteeredPath};
    use crate::channel::steering_vector;
    use crate::numerics::ComplexMatrix;

    fn spec(n: usize, seed: u64) -> MonteCarloSpec {
        MonteCarloSpec::new(n, seed).unwrap()
    }

    fn rank_one(p: f64, theta: f64, n_r: usize, n0: f64) -> ComplexMatrix {
        let h = steering_vector(theta, n_r).unwrap();
        ComplexMatrix::from_fn(n_r, n_r, |r, c| h[r] * h[c].conj() * p).add_diagonal(n0)
    }

    #[test]
    fn spec_validation() {
        assert!(MonteCarloSpec::new(999, 0).is_err());
        assert!(MonteCarloSpec::new(1000, 0).is_ok());
        assert!(spec(1000, 0).with_batch(0).is_err());
        assert_eq!(MonteCarloSpec::default().n_samples, 100_000);
    }

    #[test]
    fn noise_only_carries_nothing() {
        let covs = CovarianceSet::new(
            0.4,
            vec![ComplexMatrix::identity(4).scale(0.4)],
            CovarianceSource::Exact,
        )
        .unwrap();
        let e = mc_mutual_information(&covs, &spec(20_000, 1)).unwrap();
        assert!(e.estimate.abs() <= 3.0 * e.stderr + 1e-9, "{e:?}");
    }

    #[test]
    fn single_component_matches_gaussian_capacity() {
        let (p, n0) = (6.0, 0.5);
        let covs =
            CovarianceSet::new(n0, vec![rank_one(p, 0.2, 8, n0)], CovarianceSource::Exact).unwrap();
        let e = mc_mutual_information(&covs, &spec(50_000, 2)).unwrap();
        let exact = (1.0 + p / n0).log2();
        assert!(
            (e.estimate - exact).abs() <= 3.0 * e.stderr,
            "{e:?} vs {exact}"
        );
        let s = mc_spatial_information(&covs, &spec(50_000, 2)).unwrap();
        assert!(s.estimate.abs() <= 3.0 * s.stderr + 1e-9);
    }

    #[test]
    fn identical_components_carry_no_spatial_bits() {
        let s = rank_one(3.0, 0.1, 8, 0.2);
        let covs = CovarianceSet::new(0.2, vec![s.clone(), s], CovarianceSource::Exact).unwrap();
        let e = mc_spatial_information(&covs, &spec(40_000, 3)).unwrap();
        assert!(e.estimate.abs() <= 3.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn separated_patterns_saturate_one_bit() {
        let paths = [
            SteeredPath::new(0.6, 64.0, 0.0),
            SteeredPath::new(0.4, 64.0, 0.125),
        ];
        let covs = CovarianceSet::from_steered_paths(&paths, 8, 0.01).unwrap();
        let e = mc_spatial_information(&covs, &spec(40_000, 4)).unwrap();
        assert!((e.estimate - 1.0).abs() < 0.05, "{e:?}");
    }

    #[test]
    fn estimate_respects_bounds() {
        let paths = [
            SteeredPath::new(0.5, 64.0, -0.05),
            SteeredPath::new(0.3, 64.0, 0.0),
            SteeredPath::new(0.15, 64.0, 0.04),
            SteeredPath::new(0.05, 64.0, 0.3),
        ];
        for n0 in [0.03, 0.3, 3.0] {
            let covs = CovarianceSet::from_steered_paths(&paths, 8, n0).unwrap();
            let e = mc_mutual_information(&covs, &spec(20_000, 5)).unwrap();
            let shannon = i_shannon_conditional(&covs);
            assert!(e.estimate >= shannon - 3.0 * e.stderr);
            assert!(e.estimate <= shannon + 2.0 + 3.0 * e.stderr);
            let s = mc_spatial_information(&covs, &spec(20_000, 5)).unwrap();
            assert!(s.estimate >= -3.0 * s.stderr && s.estimate <= 2.0 + 3.0 * s.stderr);
        }
    }

    #[test]
    fn deterministic_and_batch_sensitive_only_through_streams() {
        let paths = [
            SteeredPath::new(0.7, 64.0, 0.0),
            SteeredPath::new(0.3, 64.0, 0.05),
        ];
        let covs = CovarianceSet::from_steered_paths(&paths, 8, 0.1).unwrap();
        let a = mc_mutual_information(&covs, &spec(10_000, 9)).unwrap();
        let b = mc_mutual_information(&covs, &spec(10_000, 9)).unwrap();
        assert_eq!(a, b);
        let c = mc_mutual_information(&covs, &spec(10_000, 10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn stderr_shrinks_like_root_n() {
        let paths = [
            SteeredPath::new(0.7, 64.0, 0.0),
            SteeredPath::new(0.3, 64.0, 0.05),
        ];
        let covs = CovarianceSet::from_steered_paths(&paths, 8, 0.3).unwrap();
        let mean_stderr = |n: usize| {
            (0..5)
                .map(|s| {
                    mc_mutual_information(&covs, &spec(n, 100 + s))
                        .unwrap()
                        .stderr
                })
                .sum::<f64>()
                / 5.0
        };
        let ratio = mean_stderr(20_000) / mean_stderr(40_000);
        let root2 = 2f64.sqrt();
        assert!((ratio - root2).abs() <= 0.2 * root2, "ratio {ratio}");
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..101)
            .map(|i| ((i * 37) % 17) as f64 * 0.3 - 1.0)
            .collect();
        let mut whole = Moments::default();
        xs.iter().for_each(|&x| whole.push(x));
        let (a, b) = xs.split_at(40);
        let mut ma = Moments::default();
        a.iter().for_each(|&x| ma.push(x));
        let mut mb = Moments::default();
        b.iter().for_each(|&x| mb.push(x));
        let merged = ma.merge(mb);
        assert!((merged.mean - whole.mean).abs() < 1e-12);
        assert!((merged.variance() - whole.variance()).abs() < 1e-12);
    }
}
