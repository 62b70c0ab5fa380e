//! Narrow-band geometric channel `H = P Λ Q^H` over uniform linear arrays.
//!
//! Angles are stored in normalized form `φ = ½ sin φ̂`, so a steering phase
//! advances by `2πφ` per element. Physical angles only appear through
//! [`normalized_angle`].

use std::f64::consts::PI;

use crate::error::{param, Result};
use crate::numerics::{ComplexMatrix, Rng, C64};

/// Transmit antennas used throughout the reference setup.
pub const DEFAULT_N_TX: usize = 64;
/// Receive antennas used throughout the reference setup.
pub const DEFAULT_N_RX: usize = 8;
pub const DEFAULT_AOD_RANGE: AngleRange = AngleRange {
    lo: -0.35,
    hi: 0.35,
};
pub const DEFAULT_AOA_RANGE: AngleRange = AngleRange {
    lo: -0.25,
    hi: 0.25,
};

const MAX_RESAMPLE_ATTEMPTS: usize = 100_000;

/// Maps a physical angle in radians to the normalized angle `½ sin(angle)`.
pub fn normalized_angle(radians: f64) -> f64 {
    0.5 * radians.sin()
}

/// Unit-norm ULA response with entries `exp(-j2πφ(k - (n-1)/2)) / √n`.
pub fn steering_vector(angle: f64, n: usize) -> Result<Vec<C64>> {
    if n == 0 {
        return Err(param("array must have at least one element"));
    }
    if !angle.is_finite() {
        return Err(param(format!("angle must be finite, got {angle}")));
    }
    let center = (n as f64 - 1.0) / 2.0;
    let amp = 1.0 / (n as f64).sqrt();
    Ok((0..n)
        .map(|k| C64::from_polar(amp, -2.0 * PI * angle * (k as f64 - center)))
        .collect())
}

pub fn steering_vector_tx(phi: f64, n_tx: usize) -> Result<Vec<C64>> {
    steering_vector(phi, n_tx)
}

pub fn steering_vector_rx(theta: f64, n_rx: usize) -> Result<Vec<C64>> {
    steering_vector(theta, n_rx)
}

/// One channel draw: per-path departure/arrival angles and linear power gains.
///
/// Paths are kept ordered by non-increasing gain, so index 0 is always the
/// strongest path.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    n_tx: usize,
    n_rx: usize,
    aod: Vec<f64>,
    aoa: Vec<f64>,
    gains: Vec<f64>,
}

impl ChannelRealization {
    /// Validates the inputs and reorders paths by descending gain (stable, so
    /// equal gains keep their original order).
    pub fn new(
        n_tx: usize,
        n_rx: usize,
        aod: Vec<f64>,
        aoa: Vec<f64>,
        gains: Vec<f64>,
    ) -> Result<Self> {
        if n_tx == 0 || n_rx == 0 {
            return Err(param("antenna counts must be positive"));
        }
        if gains.is_empty() {
            return Err(param("channel needs at least one path"));
        }
        if aod.len() != gains.len() || aoa.len() != gains.len() {
            return Err(param(format!(
                "path lists disagree: {} AoDs, {} AoAs, {} gains",
                aod.len(),
                aoa.len(),
                gains.len()
            )));
        }
        if let Some(w) = gains.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(param(format!(
                "path gains must be finite and >= 0, got {w}"
            )));
        }
        if let Some(a) = aod.iter().chain(&aoa).find(|a| !(a.abs() <= 0.5)) {
            return Err(param(format!("normalized angle {a} outside [-0.5, 0.5]")));
        }
        let mut order: Vec<usize> = (0..gains.len()).collect();
        order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
        Ok(Self {
            n_tx,
            n_rx,
            aod: order.iter().map(|&i| aod[i]).collect(),
            aoa: order.iter().map(|&i| aoa[i]).collect(),
            gains: order.iter().map(|&i| gains[i]).collect(),
        })
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    pub fn n_paths(&self) -> usize {
        self.gains.len()
    }

    pub fn aod(&self) -> &[f64] {
        &self.aod
    }

    pub fn aoa(&self) -> &[f64] {
        &self.aoa
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }
}

/// `H = Σ_i √w_i a_R(θ_i) a_T(φ_i)^H`, an `n_rx × n_tx` matrix.
pub fn build_channel(real: &ChannelRealization) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(real.n_rx, real.n_tx);
    for ((&phi, &theta), &w) in real.aod.iter().zip(&real.aoa).zip(&real.gains) {
        if w == 0.0 {
            continue;
        }
        // angles were validated at construction
        let ar = steering_vector(theta, real.n_rx).expect("validated angle");
        let at = steering_vector(phi, real.n_tx).expect("validated angle");
        let amp = w.sqrt();
        for (r, a) in ar.iter().enumerate() {
            let ra = a * amp;
            for (c, t) in at.iter().enumerate() {
                h[(r, c)] += ra * t.conj();
            }
        }
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleRange {
    pub lo: f64,
    pub hi: f64,
}

impl AngleRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let r = Self { lo, hi };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo >= -0.5 && self.hi <= 0.5 && self.lo <= self.hi) {
            return Err(param(format!(
                "angle range ({}, {}) must be ordered and within [-0.5, 0.5]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GainModel {
    /// Gains used as given (then sorted descending).
    Explicit(Vec<f64>),
    /// Gains rescaled to sum to one.
    Normalized(Vec<f64>),
    /// `w_n = γ^(n-1)`.
    ExponentialDecay { gamma: f64 },
}

impl GainModel {
    pub fn gains(&self, n_paths: usize) -> Result<Vec<f64>> {
        match self {
            GainModel::Explicit(w) | GainModel::Normalized(w) => {
                if w.len() != n_paths {
                    return Err(param(format!(
                        "{} gains given for {n_paths} paths",
                        w.len()
                    )));
                }
                if let Some(x) = w.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
                    return Err(param(format!(
                        "path gains must be finite and >= 0, got {x}"
                    )));
                }
                if let GainModel::Normalized(_) = self {
                    let total: f64 = w.iter().sum();
                    if total <= 0.0 {
                        return Err(param("cannot normalize all-zero gains"));
                    }
                    return Ok(w.iter().map(|x| x / total).collect());
                }
                Ok(w.clone())
            }
            GainModel::ExponentialDecay { gamma } => {
                if !(*gamma > 0.0 && *gamma < 1.0) {
                    return Err(param(format!(
                        "decay exponent must lie in (0, 1), got {gamma}"
                    )));
                }
                Ok((0..n_paths).map(|n| gamma.powi(n as i32)).collect())
            }
        }
    }
}

/// Minimum pairwise separation enforced between sampled angles.
pub fn angle_separation_floor(n_tx: usize, n_rx: usize) -> f64 {
    1.0 / (4.0 * n_tx.max(n_rx) as f64)
}

/// Draws uniform angles from the given ranges, redrawing until every pair of
/// departure angles and every pair of arrival angles is separated by at least
/// [`angle_separation_floor`].
pub fn sample_channel(
    rng: &mut Rng,
    n_tx: usize,
    n_rx: usize,
    n_paths: usize,
    gain_model: &GainModel,
    aod_range: AngleRange,
    aoa_range: AngleRange,
) -> Result<ChannelRealization> {
    if n_paths == 0 {
        return Err(param("channel needs at least one path"));
    }
    if n_tx == 0 || n_rx == 0 {
        return Err(param("antenna counts must be positive"));
    }
    aod_range.validate()?;
    aoa_range.validate()?;
    let gains = gain_model.gains(n_paths)?;
    let floor = angle_separation_floor(n_tx, n_rx);
    let need = (n_paths - 1) as f64 * floor;
    for (name, r) in [("AoD", aod_range), ("AoA", aoa_range)] {
        if need > r.width() {
            return Err(param(format!(
                "{name} range of width {} cannot hold {n_paths} paths {floor} apart",
                r.width()
            )));
        }
    }
    let aod = draw_separated(rng, n_paths, aod_range, floor)?;
    let aoa = draw_separated(rng, n_paths, aoa_range, floor)?;
    ChannelRealization::new(n_tx, n_rx, aod, aoa, gains)
}

fn draw_separated(rng: &mut Rng, n: usize, range: AngleRange, floor: f64) -> Result<Vec<f64>> {
    for _ in 0..MAX_RESAMPLE_ATTEMPTS {
        let angles: Vec<f64> = (0..n).map(|_| rng.uniform(range.lo, range.hi)).collect();
        let ok = angles
            .iter()
            .enumerate()
            .all(|(i, a)| angles[i + 1..].iter().all(|b| (a - b).abs() >= floor));
        if ok {
            return Ok(angles);
        }
    }
    Err(param(format!(
        "could not draw {n} angles separated by {floor} in ({}, {})",
        range.lo, range.hi
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use proptest::prelude::*;

    fn norm(v: &[C64]) -> f64 {
        v.iter().map(C64::norm_sqr).sum::<f64>().sqrt()
    }

    fn inner(a: &[C64], b: &[C64]) -> C64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    }

    #[test]
    fn steering_zero_angle_is_flat() {
        let v = steering_vector_tx(0.0, 4).unwrap();
        assert!(v.iter().all(|z| (z - C64::new(0.5, 0.0)).norm() < 1e-15));
        let r = steering_vector_rx(0.0, 8).unwrap();
        let expect = 1.0 / 8f64.sqrt();
        assert!(r.iter().all(|z| (z - C64::new(expect, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn steering_quarter_angle_two_elements() {
        let v = steering_vector_tx(0.25, 2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // k=0: exp(-j2π·0.25·(-0.5)) = e^{jπ/4}; k=1: e^{-jπ/4}
        assert!((v[0] - C64::from_polar(s, PI / 4.0)).norm() < 1e-15);
        assert!((v[1] - C64::from_polar(s, -PI / 4.0)).norm() < 1e-15);
    }

    #[test]
    fn steering_rejects_empty_array() {
        assert!(steering_vector(0.1, 0).is_err());
        assert!(steering_vector(f64::NAN, 4).is_err());
    }

    #[test]
    fn single_path_channel_has_unit_frobenius_norm() {
        let real = ChannelRealization::new(16, 4, vec![0.1], vec![-0.2], vec![1.0]).unwrap();
        assert!((build_channel(&real).frobenius_norm() - 1.0).abs() < 1e-12);
        let zero = ChannelRealization::new(16, 4, vec![0.1, 0.3], vec![-0.2, 0.0], vec![0.0, 0.0])
            .unwrap();
        assert_eq!(build_channel(&zero).frobenius_norm(), 0.0);
    }

    #[test]
    fn two_path_frobenius_matches_brute_force() {
        let (w1, w2) = (0.7, 0.3);
        let real =
            ChannelRealization::new(8, 4, vec![0.1, -0.3], vec![0.2, -0.05], vec![w1, w2]).unwrap();
        let h = build_channel(&real);
        // elementwise oracle written straight from the exponent formula
        let mut fro = 0.0;
        for r in 0..4 {
            for c in 0..8 {
                let mut e = C64::new(0.0, 0.0);
                for (w, phi, theta) in [(w1, 0.1, 0.2), (w2, -0.3, -0.05)] {
                    let ph =
                        -2.0 * PI * theta * (r as f64 - 1.5) + 2.0 * PI * phi * (c as f64 - 3.5);
                    e += C64::from_polar(f64::sqrt(w) / (32f64).sqrt(), ph);
                }
                assert!((h[(r, c)] - e).norm() < 1e-14);
                fro += e.norm_sqr();
            }
        }
        assert!((h.frobenius_norm().powi(2) - fro).abs() < 1e-12);
        let cross = 2.0
            * (w1 * w2).sqrt()
            * (inner(
                &steering_vector(0.2, 4).unwrap(),
                &steering_vector(-0.05, 4).unwrap(),
            ) * inner(
                &steering_vector(-0.3, 8).unwrap(),
                &steering_vector(0.1, 8).unwrap(),
            ))
            .re;
        assert!((fro - (w1 + w2 + cross)).abs() < 1e-12);
    }

    #[test]
    fn gains_are_sorted_descending_with_angles() {
        let real = ChannelRealization::new(
            4,
            4,
            vec![0.1, 0.2, 0.3],
            vec![-0.1, -0.2, -0.3],
            vec![0.2, 0.5, 0.2],
        )
        .unwrap();
        assert_eq!(real.gains(), &[0.5, 0.2, 0.2]);
        assert_eq!(real.aod(), &[0.2, 0.1, 0.3]);
        assert_eq!(real.aoa(), &[-0.2, -0.1, -0.3]);
    }

    #[test]
    fn realization_validation() {
        assert!(ChannelRealization::new(4, 4, vec![0.1], vec![0.1, 0.2], vec![1.0]).is_err());
        assert!(ChannelRealization::new(4, 4, vec![0.6], vec![0.1], vec![1.0]).is_err());
        assert!(ChannelRealization::new(4, 4, vec![0.1], vec![0.1], vec![-1.0]).is_err());
        assert!(ChannelRealization::new(4, 4, vec![], vec![], vec![]).is_err());
    }

    #[test]
    fn decay_gains() {
        let g = GainModel::ExponentialDecay { gamma: 0.5 }.gains(3).unwrap();
        assert_eq!(g, vec![1.0, 0.5, 0.25]);
        assert_eq!(
            GainModel::ExponentialDecay { gamma: 0.3 }.gains(1).unwrap(),
            vec![1.0]
        );
        assert!(GainModel::ExponentialDecay { gamma: 1.0 }.gains(2).is_err());
        assert!(GainModel::ExponentialDecay { gamma: 0.0 }.gains(2).is_err());
        assert_eq!(
            GainModel::Normalized(vec![3.0, 1.0]).gains(2).unwrap(),
            vec![0.75, 0.25]
        );
    }

    #[test]
    fn sampled_channel_respects_ranges_and_floor() {
        assert_eq!(DEFAULT_N_TX, 64);
        assert_eq!(DEFAULT_N_RX, 8);
        let mut rng = Rng::new(5, 0);
        let floor = angle_separation_floor(64, 8);
        for _ in 0..200 {
            let real = sample_channel(
                &mut rng,
                DEFAULT_N_TX,
                DEFAULT_N_RX,
                8,
                &GainModel::ExponentialDecay { gamma: 0.7 },
                DEFAULT_AOD_RANGE,
                DEFAULT_AOA_RANGE,
            )
            .unwrap();
            assert!(real.aod().iter().all(|a| a.abs() < 0.35));
            assert!(real.aoa().iter().all(|a| a.abs() < 0.25));
            for list in [real.aod(), real.aoa()] {
                for i in 0..list.len() {
                    for j in i + 1..list.len() {
                        assert!((list[i] - list[j]).abs() >= floor);
                    }
                }
            }
        }
        let bad = AngleRange { lo: 0.3, hi: -0.3 };
        assert!(sample_channel(
            &mut rng,
            8,
            8,
            2,
            &GainModel::Explicit(vec![1.0, 0.5]),
            bad,
            DEFAULT_AOA_RANGE
        )
        .is_err());
        let narrow = AngleRange { lo: 0.0, hi: 0.01 };
        assert!(sample_channel(
            &mut rng,
            8,
            8,
            3,
            &GainModel::Explicit(vec![1.0, 0.5, 0.2]),
            narrow,
            narrow
        )
        .is_err());
    }

    #[test]
    fn beams_decorrelate_as_the_array_grows() {
        let mut rng = Rng::new(77, 0);
        let mut mean = [0.0; 3];
        let trials = 400;
        for _ in 0..trials {
            let (a, b) = loop {
                let a = rng.uniform(-0.5, 0.5);
                let b = rng.uniform(-0.5, 0.5);
                if (a - b).abs() >= 0.02 && (a - b).abs() <= 0.98 {
                    break (a, b);
                }
            };
            for (slot, n) in [16, 64, 256].iter().enumerate() {
                let x = inner(
                    &steering_vector(a, *n).unwrap(),
                    &steering_vector(b, *n).unwrap(),
                );
                mean[slot] += x.norm() / trials as f64;
            }
        }
        assert!(mean[0] > mean[1] && mean[1] > mean[2], "{mean:?}");
    }

    proptest! {
        #[test]
        fn steering_vectors_are_unit_norm(angle in -0.5f64..=0.5, n in 1usize..=64) {
            let v = steering_vector(angle, n).unwrap();
            prop_assert!((norm(&v) - 1.0).abs() < 1e-12);
            prop_assert!((inner(&v, &v).re - 1.0).abs() < 1e-12);
        }

        #[test]
        fn channel_matches_outer_product_sum(seed in any::<u64>(), paths in 1usize..=8) {
            let mut rng = Rng::new(seed, 0);
            let aod: Vec<f64> = (0..paths).map(|_| rng.uniform(-0.5, 0.5)).collect();
            let aoa: Vec<f64> = (0..paths).map(|_| rng.uniform(-0.5, 0.5)).collect();
            let gains: Vec<f64> = (0..paths).map(|_| rng.uniform(0.0, 2.0)).collect();
            let real = ChannelRealization::new(12, 5, aod, aoa, gains).unwrap();
            let h = build_channel(&real);
            // P diag(√w) Q^H built from explicit matrices
            let p = ComplexMatrix::from_columns(&real.aoa().iter().map(|t| steering_vector(*t, 5).unwrap()).collect::<Vec<_>>()).unwrap();
            let q = ComplexMatrix::from_columns(&real.aod().iter().map(|t| steering_vector(*t, 12).unwrap()).collect::<Vec<_>>()).unwrap();
            let mut lam = ComplexMatrix::zeros(paths, paths);
            for (i, w) in real.gains().iter().enumerate() {
                lam[(i, i)] = C64::new(w.sqrt(), 0.0);
            }
            let oracle = p.matmul(&lam).unwrap().matmul(&q.adjoint()).unwrap();
            let diff = h.add(&oracle.scale(-1.0)).unwrap().frobenius_norm();
            prop_assert!(diff <= 1e-12 * oracle.frobenius_norm().max(1e-300));
        }
    }
}
