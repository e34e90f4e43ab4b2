//! Named configuration presets.
//!
//! The dataset-named entries mirror published hyperparameter tables (hidden
//! width, layer count, spectral dimension, batch, learning rate, weight
//! decay, dropout sites) as *shape presets* — they configure a comparable
//! model, they do not claim to reproduce benchmark results. `toy-sbm` is the
//! fully runnable task used by the verification harness.

use crate::model::{
    AggKind, DropoutRates, InnerType, LayerConfig, LocalKind, PhiMode, PhiSpec, PoolKind,
    ReadoutKind,
};
use crate::training::TrainConfig;

pub const PRESET_NAMES: &[&str] = &[
    "toy-sbm",
    "zinc-like",
    "molhiv-like",
    "mnist-like",
    "cifar10-like",
    "pattern-like",
    "cluster-like",
    "malnet-like",
    "peptides-like",
    "peptides-struct-like",
    "pascalvoc-like",
];

/// Returns (layer config, train config) for a preset name.
pub fn preset(name: &str) -> Option<(LayerConfig, TrainConfig)> {
    let mut layer = LayerConfig::base();
    let mut tc = TrainConfig::base();
    let drops = |ffn: f64, local: f64, residual: f64, gmn: f64| DropoutRates {
        ffn,
        local,
        residual,
        gmn,
    };
    match name {
        "toy-sbm" => {
            layer.l_in = 5;
            layer.l = 16;
            layer.d = 8;
            layer.m = 4;
            layer.num_layers = 1;
            layer.inner_type = InnerType::T4;
            layer.local = LocalKind::GcnLite;
            layer.out_dim = 4;
            layer.phi = PhiSpec::setagg(8, PoolKind::Mean, 1.0);
            layer.dropout = drops(0.1, 0.0, 0.0, 0.1);
            tc.epochs = 40;
            tc.batch_size = 32;
            tc.lr = 3e-3;
            tc.weight_decay = 0.0;
        }
        "zinc-like" => {
            layer.l_in = 28;
            layer.l = 64;
            layer.d = 16;
            layer.m = 8;
            layer.num_layers = 10;
            layer.local = LocalKind::GcnLite;
            layer.out_dim = 1;
            layer.readout = ReadoutKind::Sum;
            layer.phi = PhiSpec::setagg(16, PoolKind::Mean, 1.0);
            layer.dropout = drops(0.1, 0.0, 0.6, 0.0);
            tc.batch_size = 32;
            tc.lr = 0.001;
            tc.weight_decay = 1e-5;
        }
        "molhiv-like" => {
            layer.l_in = 9;
            layer.l = 64;
            layer.d = 16;
            layer.m = 8;
            layer.num_layers = 6;
            layer.local = LocalKind::GatedGcnLite;
            layer.out_dim = 1;
            layer.self_term = true;
            layer.phi = PhiSpec::setagg(16, PoolKind::Mean, 1.0);
            layer.dropout = drops(0.1, 0.3, 0.1, 0.1);
            tc.batch_size = 128;
            tc.lr = 0.002;
            tc.weight_decay = 0.001;
        }
        "mnist-like" => {
            layer.l_in = 3;
            layer.l = 52;
            layer.d = 32;
            layer.m = 8;
            layer.num_layers = 3;
            layer.local = LocalKind::GatedGcnLite;
            layer.out_dim = 10;
            layer.phi = PhiSpec::setagg(16, PoolKind::Mean, 1.0);
            layer.dropout = drops(0.1, 0.1, 0.1, 0.4);
            tc.batch_size = 16;
            tc.lr = 0.005;
            tc.weight_decay = 0.01;
        }
        "cifar10-like" => {
            layer.l_in = 5;
            layer.l = 52;
            layer.d = 32;
            layer.m = 8;
            layer.num_layers = 3;
            layer.local = LocalKind::GatedGcnLite;
            layer.out_dim = 10;
            layer.phi = PhiSpec::setagg(16, PoolKind::Mean, 1.0);
            layer.dropout = drops(0.1, 0.1, 0.1, 0.0);
            tc.batch_size = 16;
            tc.lr = 0.005;
            tc.weight_decay = 0.01;
        }
        "pattern-like" => {
            layer.l_in = 3;
            layer.l = 36;
            layer.d = 32;
            layer.m = 8;
            layer.num_layers = 24;
            layer.local = LocalKind::GatedGcnLite;
            layer.out_dim = 2;
            layer.phi = PhiSpec::setagg(16, PoolKind::Mean, 1.0);
            layer.dropout = drops(0.1, 0.1, 0.5, 0.0);
            tc.batch_size = 32;
            tc.lr = 0.001;
            tc.weight_decay = 0.1;
        }
        "cluster-like" => {
            layer.l_in = 7;
            layer.l = 36;
            layer.d = 32;
            layer.m = 8;
            layer.num_layers = 24;
            layer.local = LocalKind::GatedGcnLite;
            layer.out_dim = 6;
            layer.phi = PhiSpec::setagg(16, PoolKind::Mean, 1.0);
            layer.dropout = drops(0.1, 0.3, 0.3, 0.0);
            tc.batch_size = 16;
            tc.lr = 0.001;
            tc.weight_decay = 0.1;
        }
        "malnet-like" => {
            // structure-only graphs: zeroth-power φ on A, φ on C off, ⊕₁ = add
            layer.l_in = 1;
            layer.l = 64;
            layer.d = 1;
            layer.m = 4;
            layer.num_layers = 5;
            layer.local = LocalKind::GatedGcnLite;
            layer.out_dim = 5;
            layer.agg = AggKind::Add;
            layer.phi = PhiSpec {
                mode: PhiMode::Power { exponents: vec![0; 4] },
                shared: true,
                zero_phi_c: true,
            };
            layer.dropout = drops(0.1, 0.1, 0.35, 0.05);
            tc.batch_size = 16;
            tc.lr = 0.0015;
            tc.weight_decay = 1e-5;
        }
        "peptides-like" => {
            layer.l_in = 9;
            layer.l = 100;
            layer.d = 31;
            layer.m = 8;
            layer.num_layers = 3;
            layer.local = LocalKind::GatedGcnLite;
            layer.out_dim = 10;
            layer.phi = PhiSpec::setagg(16, PoolKind::Mean, 1.0);
            layer.dropout = drops(0.0, 0.1, 0.1, 0.3);
            tc.batch_size = 256;
            tc.lr = 0.003;
            tc.weight_decay = 0.1;
        }
        "peptides-struct-like" => {
            layer.l_in = 9;
            layer.l = 100;
            layer.d = 31;
            layer.m = 8;
            layer.num_layers = 3;
            layer.local = LocalKind::GatedGcnLite;
            layer.out_dim = 11;
            layer.phi = PhiSpec::setagg(16, PoolKind::Mean, 1.0);
            layer.dropout = drops(0.0, 0.1, 0.1, 0.5);
            tc.batch_size = 128;
            tc.lr = 0.003;
            tc.weight_decay = 0.1;
        }
        "pascalvoc-like" => {
            layer.l_in = 14;
            layer.l = 96;
            layer.d = 63;
            layer.m = 8;
            layer.num_layers = 4;
            layer.local = LocalKind::GatedGcnLite;
            layer.out_dim = 21;
            layer.phi = PhiSpec::setagg(16, PoolKind::Mean, 1.0);
            layer.dropout = drops(0.0, 0.0, 0.5, 0.0);
            tc.batch_size = 16;
            tc.lr = 0.002;
            tc.weight_decay = 0.1;
        }
        _ => return None,
    }
    Some((layer, tc))
}
