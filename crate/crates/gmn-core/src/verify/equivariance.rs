//! Permutation equivariance: f(QX, Q·cache) must equal Q·f(X, cache).
//! Permutations are applied to the cache with `permute_cache` (the same
//! fixed eigenbasis, rows reordered), matching how the property is proved.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::Graph;
use crate::model::{Forward, LayerConfig, ParamStore};
use crate::numerics::{Tape, Tensor};
use crate::spectral::{permute_cache, SpectralCache};

use super::{PropertyReport, VerifyError};

fn layer_output(
    config: &LayerConfig,
    params: &ParamStore<f64>,
    cache: &SpectralCache<f64>,
    x: &[f64],
    n: usize,
) -> Result<Vec<f64>, VerifyError> {
    let mut tape = Tape::new();
    let xid = tape.input(Tensor::from_vec(&[n, config.l], x.to_vec()).map_err(VerifyError::Numerics)?);
    let mut fwd = Forward::new(&mut tape, params, config);
    let sc = fwd.spectral_consts(cache);
    let out = fwd.gmn_forward(0, &sc, xid)?;
    Ok(tape.value(out).data().to_vec())
}

/// Max ∞-norm deviation over `trials` random permutations. With
/// `permute_inputs_only` the cache is deliberately left unpermuted — the
/// negative control, which must show a large deviation.
pub fn check_equivariance(
    config: &LayerConfig,
    params: &ParamStore<f64>,
    graph: &Graph,
    cache: &SpectralCache<f64>,
    trials: usize,
    seed: u64,
    permute_inputs_only: bool,
) -> Result<PropertyReport, VerifyError> {
    let n = graph.n();
    let l = config.l;
    let base = layer_output(config, params, cache, graph.features(), n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        let pgraph = graph.permute(&perm)?;
        let pcache = if permute_inputs_only {
            cache.clone()
        } else {
            permute_cache(cache, &perm)?
        };
        let out = layer_output(config, params, &pcache, pgraph.features(), n)?;
        // expected: rows of the base output moved by the permutation
        let mut dev: f64 = 0.0;
        for u in 0..n {
            for c in 0..l {
                dev = dev.max((out[perm[u] * l + c] - base[u * l + c]).abs());
            }
        }
        worst = worst.max(dev);
    }
    let name = if permute_inputs_only {
        "equivariance_negative_control"
    } else {
        "permutation_equivariance"
    };
    let mut report = PropertyReport::new(name);
    report.trials = trials;
    report.seeds = vec![seed];
    report.measure("max_deviation", worst);
    if permute_inputs_only {
        report.require(worst > 1e-6);
    } else {
        report.require(worst <= 1e-6);
    }
    Ok(report)
}
