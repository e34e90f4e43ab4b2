//! Empirical Lipschitz probes in feature and eigenvalue space, plus the
//! Weyl bound on eigenvalues under symmetric perturbation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::Graph;
use crate::model::{init_params, Forward, LayerConfig, ParamStore};
use crate::numerics::{Tape, Tensor};
use crate::spectral::{laplacian, Normalization, SpectralCache};

use super::robustness::mix;
use super::{PropertyReport, VerifyError};

/// Ratio families from one probe run.
#[derive(Debug, Clone)]
pub struct StabilityOutcome {
    pub report: PropertyReport,
    /// (seed, magnitude, ratio) triples for the feature probe.
    pub feature_ratios: Vec<(u64, f64, f64)>,
    pub spectral_ratios: Vec<(u64, f64, f64)>,
}

fn forward(
    config: &LayerConfig,
    params: &ParamStore<f64>,
    cache: &SpectralCache<f64>,
    x: &[f64],
    n: usize,
) -> Result<Vec<f64>, VerifyError> {
    let mut tape = Tape::new();
    let xid =
        tape.input(Tensor::from_vec(&[n, config.l], x.to_vec()).map_err(VerifyError::Numerics)?);
    let mut fwd = Forward::new(&mut tape, params, config);
    let sc = fwd.spectral_consts(cache);
    let out = fwd.gmn_forward(0, &sc, xid)?;
    Ok(tape.value(out).data().to_vec())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn unit_direction(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut dir: Vec<f64> = (0..len).map(|_| rng.gen::<f64>() - 0.5).collect();
    let n = norm(&dir).max(f64::MIN_POSITIVE);
    for d in dir.iter_mut() {
        *d /= n;
    }
    dir
}

/// Probes ‖ΔH‖/‖ΔX‖ and ‖ΔH‖/‖ΔΛ‖ over perturbation magnitudes, one random
/// direction and parameter draw per seed. Each seed's ratio family must stay
/// within a ×`band` spread. Zero perturbation must change nothing —
/// asserted on the first seed.
pub fn stability_probe(
    config: &LayerConfig,
    graph: &Graph,
    cache: &SpectralCache<f64>,
    magnitudes: &[f64],
    seeds: &[u64],
    band: f64,
) -> Result<StabilityOutcome, VerifyError> {
    let n = graph.n();
    let mut report = PropertyReport::new("lipschitz_stability");
    report.seeds = seeds.to_vec();
    report.trials = seeds.len() * magnitudes.len();
    let mut feature_ratios = Vec::new();
    let mut spectral_ratios = Vec::new();
    let mut worst_family_spread: f64 = 0.0;

    for (si, &seed) in seeds.iter().enumerate() {
        let params = init_params::<f64>(config, seed)?;
        let base = forward(config, &params, cache, graph.features(), n)?;
        if si == 0 {
            let again = forward(config, &params, cache, graph.features(), n)?;
            let dev = base.iter().zip(&again).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            report.measure("zero_perturbation_dev", dev);
            report.require(dev == 0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0xFEA7));
        let dir = unit_direction(graph.features().len(), &mut rng);
        let mut family = Vec::new();
        for &mag in magnitudes {
            let x: Vec<f64> = graph
                .features()
                .iter()
                .zip(&dir)
                .map(|(&v, &d)| v + mag * d)
                .collect();
            let out = forward(config, &params, cache, &x, n)?;
            let dh = norm(&out.iter().zip(&base).map(|(a, b)| a - b).collect::<Vec<_>>());
            let ratio = dh / mag;
            feature_ratios.push((seed, mag, ratio));
            family.push(ratio);
        }
        worst_family_spread = worst_family_spread.max(spread(&family));

        // eigenvalue probe: perturb Λ on the non-pad slots only
        let real = cache.d - cache.pad_count;
        let lam_dir = unit_direction(real, &mut rng);
        let mut family = Vec::new();
        for &mag in magnitudes {
            let mut pert = cache.clone();
            let mut vals = pert.eigenvalues.clone();
            for (j, v) in vals.iter_mut().take(real).enumerate() {
                *v += mag * lam_dir[j];
            }
            pert.eigenvalues = vals;
            let out = forward(config, &params, &pert, graph.features(), n)?;
            let dh = norm(&out.iter().zip(&base).map(|(a, b)| a - b).collect::<Vec<_>>());
            let ratio = dh / mag;
            spectral_ratios.push((seed, mag, ratio));
            family.push(ratio);
        }
        worst_family_spread = worst_family_spread.max(spread(&family));
    }
    report.measure("worst_family_spread", worst_family_spread);
    report.require(worst_family_spread <= band);
    Ok(StabilityOutcome { report, feature_ratios, spectral_ratios })
}

fn spread(family: &[f64]) -> f64 {
    let max = family.iter().cloned().fold(f64::MIN, f64::max);
    let min = family.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// |λ_i(L + E) − λ_i(L)| ≤ ‖E‖₂ (+ tolerance) over random symmetric
/// perturbations of a graph Laplacian.
pub fn weyl_bound_check(
    graph: &Graph,
    trials: usize,
    seed: u64,
    tolerance: f64,
) -> Result<PropertyReport, VerifyError> {
    let n = graph.n();
    let l = laplacian::<f64>(graph, Normalization::SymLaplacian);
    let mut dense = vec![0.0f64; n * n];
    for (r, c, v) in l.entries() {
        dense[r * n + c] = v;
    }
    let (base_vals, _) = crate::spectral::dense_eigen_rowmajor(dense.clone(), n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_excess = f64::MIN;
    for _ in 0..trials {
        let scale = 10f64.powf(rng.gen_range(-3.0..0.0));
        let mut e = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = (rng.gen::<f64>() - 0.5) * scale;
                e[i * n + j] = v;
                e[j * n + i] = v;
            }
        }
        let (evals, _) = crate::spectral::dense_eigen_rowmajor(e.clone(), n);
        let e_norm = evals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let perturbed: Vec<f64> = dense.iter().zip(&e).map(|(a, b)| a + b).collect();
        let (pvals, _) = crate::spectral::dense_eigen_rowmajor(perturbed, n);
        for (a, b) in pvals.iter().zip(&base_vals) {
            worst_excess = worst_excess.max((a - b).abs() - e_norm);
        }
    }
    let mut report = PropertyReport::new("weyl_eigenvalue_bound");
    report.trials = trials;
    report.seeds = vec![seed];
    report.measure("worst_excess", worst_excess);
    report.require(worst_excess <= tolerance);
    Ok(report)
}
