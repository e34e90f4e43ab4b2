//! Feature-noise protocol: x'_u = x_u + ε·n_u with white or
//! signal-dependent Gaussian noise, and the metric-vs-ε sweep.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::Checkpoint;
use crate::training::{evaluate, Dataset, TestMetric};

use super::VerifyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    White,
    /// Scaled by the mean feature magnitude μ(x).
    SignalDependent,
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::SignalDependent => "signal_dependent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Noise level ε ≥ 0.
    pub epsilon: f64,
    pub kind: NoiseKind,
    pub seed: u64,
    /// Read μ(x) per feature column instead of one scalar over all entries.
    pub per_column: bool,
}

impl NoiseSpec {
    pub fn new(epsilon: f64, kind: NoiseKind, seed: u64) -> Self {
        NoiseSpec { epsilon, kind, seed, per_column: false }
    }
}

/// Perturbed copy of an n×l feature matrix. ε = 0 returns the input
/// bit-identically.
pub fn perturb(x: &[f64], cols: usize, spec: &NoiseSpec) -> Vec<f64> {
    assert!(spec.epsilon >= 0.0, "noise level must be nonnegative");
    if spec.epsilon == 0.0 {
        return x.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let scale_for: Vec<f64> = match (spec.kind, spec.per_column) {
        (NoiseKind::White, _) => vec![1.0; cols],
        (NoiseKind::SignalDependent, false) => {
            let mu = x.iter().map(|v| v.abs()).sum::<f64>() / x.len().max(1) as f64;
            vec![mu; cols]
        }
        (NoiseKind::SignalDependent, true) => {
            let rows = x.len() / cols.max(1);
            (0..cols)
                .map(|c| {
                    (0..rows).map(|r| x[r * cols + c].abs()).sum::<f64>() / rows.max(1) as f64
                })
                .collect()
        }
    };
    x.iter()
        .enumerate()
        .map(|(i, &v)| v + spec.epsilon * normal(&mut rng) * scale_for[i % cols.max(1)])
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessRow {
    pub kind: NoiseKind,
    pub epsilon: f64,
    pub loss: f64,
    pub metric: TestMetric,
}

/// Evaluates a trained checkpoint on the test split under each noise level
/// and kind. The ε = 0 row is computed on the untouched dataset, so it is
/// bit-identical to a clean evaluation.
pub fn robustness_sweep(
    ckpt: &Checkpoint<f64>,
    dataset: &Dataset,
    epsilons: &[f64],
    kinds: &[NoiseKind],
    seed: u64,
) -> Result<Vec<RobustnessRow>, VerifyError> {
    let mut rows = Vec::new();
    for &kind in kinds {
        for &eps in epsilons {
            let perturbed = if eps == 0.0 {
                dataset.clone()
            } else {
                let features: Vec<Vec<f64>> = dataset
                    .graphs
                    .iter()
                    .enumerate()
                    .map(|(gi, g)| {
                        let spec = NoiseSpec::new(eps, kind, mix(seed, gi as u64));
                        perturb(g.features(), g.feature_dim(), &spec)
                    })
                    .collect();
                dataset.with_features(features)?
            };
            let eval =
                evaluate(&ckpt.params, &ckpt.config, &perturbed, &perturbed.split.test)?;
            rows.push(RobustnessRow { kind, epsilon: eps, loss: eval.loss, metric: eval.metric });
        }
    }
    Ok(rows)
}

pub(crate) fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_epsilon_is_bit_identical() {
        let x = vec![0.1, -0.2, 0.3, 0.4];
        let spec = NoiseSpec::new(0.0, NoiseKind::White, 9);
        let y = perturb(&x, 2, &spec);
        assert_eq!(
            x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            y.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn signal_dependent_noise_vanishes_on_zero_features() {
        let x = vec![0.0; 6];
        let spec = NoiseSpec::new(0.3, NoiseKind::SignalDependent, 4);
        assert_eq!(perturb(&x, 2, &spec), x);
    }

    #[test]
    fn fixed_seed_reproducible() {
        let x = vec![1.0; 8];
        let spec = NoiseSpec::new(0.3, NoiseKind::White, 42);
        assert_eq!(perturb(&x, 2, &spec), perturb(&x, 2, &spec));
        let other = NoiseSpec::new(0.3, NoiseKind::White, 43);
        assert_ne!(perturb(&x, 2, &spec), perturb(&x, 2, &other));
    }

    #[test]
    fn white_noise_scale_matches_epsilon() {
        let x = vec![0.0; 10_000];
        let spec = NoiseSpec::new(0.3, NoiseKind::White, 1);
        let y = perturb(&x, 1, &spec);
        let var = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        assert!((var.sqrt() - 0.3).abs() < 0.01);
    }

    #[test]
    fn per_column_variant_scales_each_column() {
        let x = vec![1.0, 100.0, 1.0, 100.0, 1.0, 100.0, 1.0, 100.0];
        let mut spec = NoiseSpec::new(0.5, NoiseKind::SignalDependent, 3);
        spec.per_column = true;
        let y = perturb(&x, 2, &spec);
        let d0: f64 = (0..4).map(|r| (y[r * 2] - 1.0).abs()).sum();
        let d1: f64 = (0..4).map(|r| (y[r * 2 + 1] - 100.0).abs()).sum();
        assert!(d1 > 10.0 * d0);
    }
}
