//! Adam with decoupled weight decay; the decay multiplies parameters before
//! the moment update. Setagg φ weights are clipped afterwards to keep the
//! Lipschitz bound the stability analysis relies on.

use crate::model::{LayerConfig, ParamStore, PhiMode};
use crate:: numerics::Tensor;
use crate::scalar::Scalar;

use super::TrainConfig;

#[derive(Debug, Clone)]
pub struct AdamState<T> {
    t: u64,
    m: Vec<(String, Vec<T>)>,
    v: Vec<(String, Vec<T>)>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParamStore<T>) -> Self {
        let zeros: Vec<(String, Vec<T>)> = params
            .iter()
            .map(|(n, t)| (n.to_string(), vec![T::zero(); t.len()]))
            .collect();
        AdamState { t: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One optimizer step. `grads` maps parameter names to gradient tensors;
/// missing names mean zero gradient (the decay still applies).
pub fn adam_step<T: Scalar>(
    params: &mut ParamStore<T>,
    grads: &[(String, Tensor<T>)],
    state: &mut AdamState<T>,
    tc: &TrainConfig,
    layer_config: &LayerConfig,
) {
    state.t += 1;
    let lr = T::from_f64(tc.lr);
    let wd = T::from_f64(tc.weight_decay);
    let b1 = T::from_f64(tc.beta1);
    let b2 = T::from_f64(tc.beta2);
    let eps = T::from_f64(tc.eps);
    let bc1 = T::one() - T::from_f64(tc.beta1.powi(state.t as i32));
    let bc2 = T::one() - T::from_f64(tc.beta2.powi(state.t as i32));
    let clip = match layer_config.phi.mode {
        PhiMode::SetAgg { clip, .. } => Some(T::from_f64(clip)),
        _ => None,
    };

    let names = params.names();
    for (idx, name) in names.iter().enumerate() {
        let current = params.get(name).expect("state tracks the store").clone();
        let grad = grads.iter().find(|(n, _)| n == name).map(|(_, g)| g.clone());
        debug_assert_eq!(state.m[idx].0, *name);
        let (mslot, vslot) = (&mut state.m[idx].1, &mut state.v[idx].1);
        let mut out = Vec::with_capacity(current.len());
        for i in 0..current.len() {
            // decoupled decay first
            let mut p = current.data()[i] * (T::one() - lr * wd);
            let g = grad.as_ref().map(|g| g.data()[i]).unwrap_or_else(T::zero);
            mslot[i] = b1 * mslot[i] + (T::one() - b1) * g;
            vslot[i] = b2 * vslot[i] + (T::one() - b2) * g * g;
            let mhat = mslot[i] / bc1;
            let vhat = vslot[i] / bc2;
            p = p - lr * mhat / (vhat.sqrt() + eps);
            if let Some(c) = clip {
                if name.contains(".phi") {
                    p = p.max(-c).min(c);
                }
            }
            out.push(p);
        }
        params
            .set(name, Tensor::from_vec(current.shape(), out).expect("same shape"))
            .expect("name exists");
    }
}

/// True when every setagg φ weight is within the clip bound.
pub(crate) fn phi_clip_holds<T: Scalar>(params: &ParamStore<T>, layer_config: &LayerConfig) -> bool {
    let PhiMode::SetAgg { clip, .. } = layer_config.phi.mode else {
        return true;
    };
    let c = T::from_f64(clip);
    params
        .iter()
        .filter(|(n, _)| n.contains(".phi"))
        .all(|(_, t)| t.data().iter().all(|&v| v >= -c && v <= c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    fn tiny() -> (ParamStore<f64>, LayerConfig) {
        let mut config = LayerConfig::base();
        config.l_in = 2;
        config.l = 2;
        config.d = 2;
        config.m = 2;
        config.phi = crate::model::PhiSpec::power(vec![1, 2]);
        config.local = crate::model::LocalKind::None;
        config.use_ffn = false;
        config.layer_norm = false;
        config.use_input_embed = false;
        (init_params(&config, 0).unwrap(), config)
    }

    #[test]
    fn first_step_is_lr_sized() {
        let (mut params, config) = tiny();
        let before = params.get("layers.0.gmn.w").unwrap().clone();
        let mut state = AdamState::new(&params);
        let mut tc = TrainConfig::base();
        tc.lr = 1e-3;
        tc.weight_decay = 0.0;
        let g = Tensor::ones(&[2, 2]);
        adam_step(
            &mut params,
            &[("layers.0.gmn.w".to_string(), g)],
            &mut state,
            &tc,
            &config,
        );
        let after = params.get("layers.0.gmn.w").unwrap();
        for (b, a) in before.data().iter().zip(after.data()) {
            // bias-corrected m̂/√v̂ = 1 on the first step
            assert!((b - a - 1e-3).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_grad_zero_decay_is_identity() {
        let (mut params, config) = tiny();
        let before = params.clone();
        let mut state = AdamState::new(&params);
        let mut tc = TrainConfig::base();
        tc.weight_decay = 0.0;
        adam_step(&mut params, &[], &mut state, &tc, &config);
        assert_eq!(params, before);
    }

    #[test]
    fn decoupled_decay_scales_params() {
        let (mut params, config) = tiny();
        let before = params.get("layers.0.gmn.w").unwrap().clone();
        let mut state = AdamState::new(&params);
        let mut tc = TrainConfig::base();
        tc.lr = 0.01;
        tc.weight_decay = 0.1;
        adam_step(&mut params, &[], &mut state, &tc, &config);
        let after = params.get("layers.0.gmn.w").unwrap();
        for (b, a) in before.data().iter().zip(after.data()) {
            assert!((a - b * 0.999).abs() < 1e-15);
        }
    }

    #[test]
    fn phi_weights_clipped_after_step() {
        let mut config = LayerConfig::base();
        config.phi = crate::model::PhiSpec::setagg(4, crate::model::PoolKind::Mean, 0.05);
        let mut params = init_params::<f64>(&config, 1).unwrap();
        let mut state = AdamState::new(&params);
        let mut tc = TrainConfig::base();
        tc.lr = 10.0; // huge step to force clipping
        let g = Tensor::ones(&[config.m, 4]);
        adam_step(
            &mut params,
            &[("layers.0.gmn.phi.m1w1".to_string(), g)],
            &mut state,
            &tc,
            &config,
        );
        assert!(phi_clip_holds(&params, &config));
    }
}
