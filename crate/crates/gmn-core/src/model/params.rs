//! Parameter registry: one catalog drives initialization, counting,
//! optimizer iteration, and checkpoints, so they can never disagree.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numerics::Tensor;
use crate::scalar::Scalar;

use super::{GateMode, LayerConfig, LocalKind, ModelError, PhiMode, WbMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Init {
    /// Normal with variance 2 / (fan_in + fan_out).
    Xavier,
    Zero,
    One,
}

struct ParamDef {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

fn def(name: String, shape: &[usize], init: Init) -> ParamDef {
    ParamDef { name, shape: shape.to_vec(), init }
}

/// Weight layouts: right-multiplied maps are (in, out) and applied with
/// "ij,jk->ik"; per-column maps over d×m encodings are (out, in) and applied
/// with "ik,ukj->uij".
fn catalog(config: &LayerConfig) -> Vec<ParamDef> {
    let LayerConfig { l_in, l, d, m, .. } = *config;
    let mut defs = Vec::new();
    if config.use_input_embed {
        defs.push(def("embed.w".into(), &[l_in, l], Init::Xavier));
        defs.push(def("embed.b".into(), &[l], Init::Zero));
    }
    for i in 0..config.num_layers {
        let p = format!("layers.{i}");
        match config.wb_mode {
            WbMode::Linear => {
                defs.push(def(format!("{p}.gmn.w"), &[l, d], Init::Xavier));
                defs.push(def(format!("{p}.gmn.b"), &[l, d], Init::Xavier));
            }
            WbMode::Nonlinear => {
                defs.push(def(format!("{p}.gmn.w1"), &[l, d], Init::Xavier));
                defs.push(def(format!("{p}.gmn.w2"), &[d, d], Init::Xavier));
                defs.push(def(format!("{p}.gmn.b1"), &[l, d], Init::Xavier));
                defs.push(def(format!("{p}.gmn.b2"), &[l, l], Init::Xavier));
            }
        }
        match config.gate_mode {
            GateMode::Lp => {
                defs.push(def(format!("{p}.gmn.zw"), &[l, l], Init::Xavier));
                defs.push(def(format!("{p}.gmn.zb"), &[l], Init::Zero));
                defs.push(def(format!("{p}.gmn.hw"), &[l, l], Init::Xavier));
                defs.push(def(format!("{p}.gmn.hb"), &[l], Init::Zero));
            }
            GateMode::Nlp => {
                for gate in ["z", "h"] {
                    defs.push(def(format!("{p}.gmn.{gate}w1"), &[l, l], Init::Xavier));
                    defs.push(def(format!("{p}.gmn.{gate}b1"), &[l], Init::Zero));
                    defs.push(def(format!("{p}.gmn.{gate}w2"), &[l, l], Init::Xavier));
                    defs.push(def(format!("{p}.gmn.{gate}b2"), &[l], Init::Zero));
                }
            }
        }
        if let PhiMode::SetAgg { hidden, .. } = config.phi.mode {
            let mut sides = vec!["phi"];
            if !config.phi.shared {
                sides = vec!["phia", "phic"];
            }
            if config.phi.zero_phi_c {
                sides.retain(|s| *s != "phic");
            }
            for side in sides {
                for mlp in ["m1", "m2"] {
                    defs.push(def(format!("{p}.gmn.{side}.{mlp}w1"), &[m, hidden], Init::Xavier));
                    defs.push(def(format!("{p}.gmn.{side}.{mlp}b1"), &[m, hidden], Init::Zero));
                    defs.push(def(format!("{p}.gmn.{side}.{mlp}w2"), &[m, hidden], Init::Xavier));
                    defs.push(def(format!("{p}.gmn.{side}.{mlp}b2"), &[m], Init::Zero));
                }
            }
        }
        if config.self_term {
            defs.push(def(format!("{p}.gmn.beta_raw"), &[], Init::Zero));
            defs.push(def(format!("{p}.gmn.ws1"), &[d, d], Init::Xavier));
            defs.push(def(format!("{p}.gmn.ws2"), &[d, d], Init::Xavier));
        }
        match config.local {
            LocalKind::None => {}
            LocalKind::GcnLite => {
                defs.push(def(format!("{p}.local.w1"), &[l, l], Init::Xavier));
                defs.push(def(format!("{p}.local.w2"), &[l, l], Init::Xavier));
            }
            LocalKind::GatedGcnLite => {
                for w in ["w1", "w2", "w3", "w4"] {
                    defs.push(def(format!("{p}.local.{w}"), &[l, l], Init::Xavier));
                }
            }
        }
        if config.use_ffn {
            let e = config.ffn_expansion * l;
            defs.push(def(format!("{p}.ffn.w1"), &[l, e], Init::Xavier));
            defs.push(def(format!("{p}.ffn.b1"), &[e], Init::Zero));
            defs.push(def(format!("{p}.ffn.w2"), &[e, l], Init::Xavier));
            defs.push(def(format!("{p}.ffn.b2"), &[l], Init::Zero));
        }
        if config.layer_norm {
            defs.push(def(format!("{p}.ln1.g"), &[l], Init::One));
            defs.push(def(format!("{p}.ln1.b"), &[l], Init::Zero));
            if config.use_ffn {
                defs.push(def(format!("{p}.ln2.g"), &[l], Init::One));
                defs.push(def(format!("{p}.ln2.b"), &[l], Init::Zero));
            }
        }
    }
    if config.out_dim > 0 {
        defs.push(def("head.w".into(), &[l, config.out_dim], Init::Xavier));
        defs.push(def("head.b".into(), &[config.out_dim], Init::Zero));
    }
    defs
}

/// Ordered name → tensor map for all learnable state.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    entries: Vec<(String, Tensor<T>)>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn from_entries(entries: Vec<(String, Tensor<T>)>) -> Self {
        ParamStore { entries }
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>, ModelError> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| ModelError::UnknownParam(name.to_string()))
    }

    pub fn set(&mut self, name: &str, value: Tensor<T>) -> Result<(), ModelError> {
        let slot = self
            .entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .ok_or_else(|| ModelError::UnknownParam(name.to_string()))?;
        slot.1 = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total learnable scalars.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }
}

/// Seeded initialization. Gate biases start at zero so the initial gate is
/// 0.5 everywhere; setagg φ weights respect the clip bound from the start.
pub fn init_params<T: Scalar>(config: &LayerConfig, seed: u64) -> Result<ParamStore<T>, ModelError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clip = match config.phi.mode {
        PhiMode::SetAgg { clip, .. } => clip,
        _ => f64::INFINITY,
    };
    let entries = catalog(config)
        .into_iter()
        .map(|pd| {
            let len: usize = pd.shape.iter().product();
            let data: Vec<T> = match pd.init {
                Init::Zero => vec![T::zero(); len],
                Init::One => vec![T::one(); len],
                Init::Xavier => {
                    let (fi, fo) = fans(&pd.shape);
                    let std = (2.0 / (fi + fo) as f64).sqrt();
                    let bound = if pd.name.contains(".phi") { clip } else { f64::INFINITY };
                    (0..len)
                        .map(|_| T::from_f64((normal(&mut rng) * std).clamp(-bound, bound)))
                        .collect()
                }
            };
            (pd.name, Tensor::from_vec(&pd.shape, data).expect("catalog shapes are consistent"))
        })
        .collect();
    Ok(ParamStore { entries })
}

fn fans(shape: &[usize]) -> (usize, usize) {
    match shape.len() {
        0 => (1, 1),
        1 => (shape[0], shape[0]),
        _ => (shape[shape.len() - 2], shape[shape.len() - 1]),
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniforms per draw keeps the stream simple.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Exact number of learnable scalars for a config.
pub fn param_count(config: &LayerConfig) -> usize {
    catalog(config).iter().map(|pd| pd.shape.iter().product::<usize>()).sum()
}

/// Scalar counts grouped by component ("embed", "layers.3.gmn", "head", ...).
pub fn param_breakdown(config: &LayerConfig) -> Vec<(String, usize)> {
    let mut groups: Vec<(String, usize)> = Vec::new();
    for pd in catalog(config) {
        let group = pd
            .name
            .rsplit_once('.')
            .map(|(g, _)| g.to_string())
            .unwrap_or_else(|| pd.name.clone());
        let len: usize = pd.shape.iter().product();
        match groups.iter_mut().find(|(g, _)| *g == group) {
            Some((_, c)) => *c += len,
            None => groups.push((group, len)),
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InnerType, PhiSpec};

    fn minimal() -> LayerConfig {
        let mut c = LayerConfig::base();
        c.l_in = 1;
        c.l = 1;
        c.d = 1;
        c.m = 1;
        c.inner_type = InnerType::T1;
        c.local = LocalKind::None;
        c.use_ffn = false;
        c.layer_norm = false;
        c.use_input_embed = false;
        c.out_dim = 0;
        c.phi = PhiSpec::power(vec![1]);
        c
    }

    #[test]
    fn hand_counted_minimal_config() {
        // W(1) + B(1) + z weight+bias (2) + h weight+bias (2) = 6
        assert_eq!(param_count(&minimal()), 6);
    }

    #[test]
    fn doubling_layers_doubles_per_layer_counts() {
        let mut one = LayerConfig::base();
        one.out_dim = 3;
        let mut two = one.clone();
        two.num_layers = 2;
        let fixed = |c: &LayerConfig| {
            param_breakdown(c)
                .iter()
                .filter(|(g, _)| g.starts_with("embed") || g.starts_with("head"))
                .map(|(_, n)| n)
                .sum::<usize>()
        };
        let per_layer_one = param_count(&one) - fixed(&one);
        let per_layer_two = param_count(&two) - fixed(&two);
        assert_eq!(per_layer_two, 2 * per_layer_one);
    }

    #[test]
    fn init_matches_catalog_and_is_seeded() {
        let config = LayerConfig::base();
        let a = init_params::<f64>(&config, 5).unwrap();
        let b = init_params::<f64>(&config, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.scalar_count(), param_count(&config));
        let c = init_params::<f64>(&config, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn gate_bias_zero_at_init() {
        let config = LayerConfig::base();
        let params = init_params::<f64>(&config, 0).unwrap();
        assert!(params.get("layers.0.gmn.zb").unwrap().data().iter().all(|&v| v == 0.0));
    }
}
