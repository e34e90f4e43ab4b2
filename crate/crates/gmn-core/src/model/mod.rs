//! The GraphMinNet layer and its surrounding block.
//!
//! A layer turns node features X and a spectral cache (Λ_d, P) into new node
//! states: eigenvalue maps φ build the feature encoding A_u and positional
//! encoding C_u, their combination is reduced against the global sum by one
//! of four inner-product types, and a sigmoid gate modulates the result. The
//! hybrid block wraps that with an optional local message-passing branch,
//! residuals, layer norm, an FFN, and the four dropout sites.

mod checkpoint;
mod layer;
mod mingru;
mod params;
mod phi;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use layer::{local_block, model_forward, readout, Forward, GraphAux};
pub use mingru::{mingru_scan, mingru_seq, MinGruParams, SeqMode};
pub use params::{init_params, param_breakdown, param_count, ParamStore};
pub use phi::phi_eval_values;

use thiserror::Error;

use crate::spectral::Normalization;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("numerics: {0}")]
    Numerics(#[from] crate::numerics::NumericsError),
    #[error("layer config violation: {0}")]
    TypeConstraintViolation(String),
    #[error("unknown parameter '{0}'")]
    UnknownParam(String),
    #[error("config field {key}: invalid value '{value}'")]
    InvalidValue { key: String, value: String },
    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("unsupported checkpoint version {found:?} (expected v1)")]
    VersionMismatch { found: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerType {
    T1,
    T2,
    T3,
    T4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggKind {
    Mul,
    Add,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateMode {
    Lp,
    Nlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WbMode {
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalKind {
    None,
    GcnLite,
    GatedGcnLite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadoutKind {
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Gelu,
    Silu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Single,
    Double,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Mean,
    Sum,
}

/// Dropout rates by site, in the order: feedforward network, local method,
/// residual, GraphMinNet branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutRates {
    pub ffn: f64,
    pub local: f64,
    pub residual: f64,
    pub gmn: f64,
}

impl DropoutRates {
    pub const ZERO: DropoutRates = DropoutRates { ffn: 0.0, local: 0.0, residual: 0.0, gmn: 0.0 };
}

/// The eigenvalue maps φ_1..φ_m.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiMode {
    /// φ_i(λ) = λ^{s_i}; exponents fixed, not learned. s = 0 is the constant
    /// map (padded eigenvalue slots are masked to keep padding inert).
    Power { exponents: Vec<u32> },
    /// Per-eigenvalue scalar MLP plus a pooled-context MLP (DeepSets style);
    /// weights are clipped to [-clip, clip] after every optimizer step, which
    /// is what makes the map Lipschitz.
    SetAgg { hidden: usize, pool: PoolKind, clip: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiSpec {
    pub mode: PhiMode,
    /// One φ set shared by the A and C encodings (the default), or separate
    /// parameter sets per side.
    pub shared: bool,
    /// φ on the positional side identically zero (pairs with agg = add).
    pub zero_phi_c: bool,
}

impl PhiSpec {
    pub fn power(exponents: Vec<u32>) -> Self {
        PhiSpec { mode: PhiMode::Power { exponents }, shared: true, zero_phi_c: false }
    }

    pub fn setagg(hidden: usize, pool: PoolKind, clip: f64) -> Self {
        PhiSpec { mode: PhiMode::SetAgg { hidden, pool, clip }, shared: true, zero_phi_c: false }
    }
}

/// Everything that determines the model's shape and wiring.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerConfig {
    /// Raw input feature dimension.
    pub l_in: usize,
    /// Hidden dimension l.
    pub l: usize,
    /// Spectral dimension d (eigenpairs used).
    pub d: usize,
    /// Encoding columns m.
    pub m: usize,
    pub num_layers: usize,
    pub inner_type: InnerType,
    pub agg: AggKind,
    pub self_term: bool,
    pub gate_mode: GateMode,
    pub wb_mode: WbMode,
    pub local: LocalKind,
    pub readout: ReadoutKind,
    pub dropout: DropoutRates,
    pub precision: Precision,
    pub phi: PhiSpec,
    pub normalization: Normalization,
    pub skip_zero: bool,
    pub use_ffn: bool,
    pub ffn_expansion: usize,
    pub layer_norm: bool,
    pub activation: Activation,
    /// Task head width; 0 means no head (raw node states come out).
    pub out_dim: usize,
    /// Affine embed from l_in to l; without it l_in must equal l.
    pub use_input_embed: bool,
}

impl LayerConfig {
    /// A small, fully-featured default; presets and files override from here.
    pub fn base() -> Self {
        LayerConfig {
            l_in: 1,
            l: 16,
            d: 8,
            m: 4,
            num_layers: 1,
            inner_type: InnerType::T4,
            agg: AggKind::Mul,
            self_term: false,
            gate_mode: GateMode::Lp,
            wb_mode: WbMode::Linear,
            local: LocalKind::GcnLite,
            readout: ReadoutKind::Mean,
            dropout: DropoutRates::ZERO,
            precision: Precision::Double,
            phi: PhiSpec::setagg(8, PoolKind::Mean, 1.0),
            normalization: Normalization::SymLaplacian,
            skip_zero: true,
            use_ffn: true,
            ffn_expansion: 2,
            layer_norm: true,
            activation: Activation::Relu,
            out_dim: 0,
            use_input_embed: true,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::TypeConstraintViolation(msg));
        if self.l == 0 || self.d == 0 || self.m == 0 || self.num_layers == 0 {
            return bad("l, d, m, num_layers must be positive".into());
        }
        if self.inner_type == InnerType::T2 && self.m != self.l {
            return bad(format!("inner type T2 requires m = l (got m={}, l={})", self.m, self.l));
        }
        if let PhiMode::Power { exponents } = &self.phi.mode {
            if exponents.len() != self.m {
                return bad(format!(
                    "power φ needs {} exponents, got {}",
                    self.m,
                    exponents.len()
                ));
            }
        }
        if self.phi.zero_phi_c && self.agg == AggKind::Mul {
            return bad("zero φ on C with multiplicative ⊕₁ collapses the embedding".into());
        }
        if !self.use_input_embed && self.l_in != self.l {
            return bad("without an input embed, l_in must equal l".into());
        }
        if self.use_ffn && self.ffn_expansion == 0 {
            return bad("ffn_expansion must be >= 1".into());
        }
        for (name, r) in [
            ("ffn", self.dropout.ffn),
            ("local", self.dropout.local),
            ("residual", self.dropout.residual),
            ("gmn", self.dropout.gmn),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("dropout rate {name}={r} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

impl LayerConfig {
    /// Flat key=value view used by checkpoints, run manifests, and the CLI
    /// config format.
    pub fn to_kv(&self) -> Vec<(String, String)> {
        let b = |v: bool| if v { "1" } else { "0" }.to_string();
        let mut kv: Vec<(String, String)> = vec![
            ("l_in".into(), self.l_in.to_string()),
            ("l".into(), self.l.to_string()),
            ("d".into(), self.d.to_string()),
            ("m".into(), self.m.to_string()),
            ("num_layers".into(), self.num_layers.to_string()),
            (
                "inner_type".into(),
                match self.inner_type {
                    InnerType::T1 => "t1",
                    InnerType::T2 => "t2",
                    InnerType::T3 => "t3",
                    InnerType::T4 => "t4",
                }
                .into(),
            ),
            ("agg".into(), if self.agg == AggKind::Mul { "mul" } else { "add" }.into()),
            ("self_term".into(), b(self.self_term)),
            ("gate_mode".into(), if self.gate_mode == GateMode::Lp { "lp" } else { "nlp" }.into()),
            (
                "wb_mode".into(),
                if self.wb_mode == WbMode::Linear { "linear" } else { "nonlinear" }.into(),
            ),
            (
                "local".into(),
                match self.local {
                    LocalKind::None => "none",
                    LocalKind::GcnLite => "gcn_lite",
                    LocalKind::GatedGcnLite => "gatedgcn_lite",
                }
                .into(),
            ),
            (
                "readout".into(),
                if self.readout == ReadoutKind::Mean { "mean" } else { "sum" }.into(),
            ),
            ("dropout_ffn".into(), self.dropout.ffn.to_string()),
            ("dropout_local".into(), self.dropout.local.to_string()),
            ("dropout_residual".into(), self.dropout.residual.to_string()),
            ("dropout_gmn".into(), self.dropout.gmn.to_string()),
            (
                "precision".into(),
                if self.precision == Precision::Single { "single" } else { "double" }.into(),
            ),
            ("normalization".into(), self.normalization.as_str().into()),
            ("skip_zero".into(), b(self.skip_zero)),
            ("use_ffn".into(), b(self.use_ffn)),
            ("ffn_expansion".into(), self.ffn_expansion.to_string()),
            ("layer_norm".into(), b(self.layer_norm)),
            (
                "activation".into(),
                match self.activation {
                    Activation::Relu => "relu",
                    Activation::Gelu => "gelu",
                    Activation::Silu => "silu",
                }
                .into(),
            ),
            ("out_dim".into(), self.out_dim.to_string()),
            ("use_input_embed".into(), b(self.use_input_embed)),
            ("phi_shared".into(), b(self.phi.shared)),
            ("phi_zero_c".into(), b(self.phi.zero_phi_c)),
        ];
        match &self.phi.mode {
            PhiMode::Power { exponents } => {
                kv.push(("phi_mode".into(), "power".into()));
                let s: Vec<String> = exponents.iter().map(|e| e.to_string()).collect();
                kv.push(("phi_exponents".into(), s.join(",")));
            }
            PhiMode::SetAgg { hidden, pool, clip } => {
                kv.push(("phi_mode".into(), "setagg".into()));
                kv.push(("phi_hidden".into(), hidden.to_string()));
                kv.push((
                    "phi_pool".into(),
                    if *pool == PoolKind::Mean { "mean" } else { "sum" }.into(),
                ));
                kv.push(("phi_clip".into(), clip.to_string()));
            }
        }
        kv
    }

    /// Applies one key; unknown keys and bad values are errors.
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<(), ModelError> {
        let invalid = || ModelError::InvalidValue { key: key.to_string(), value: value.to_string() };
        let parse_usize = |v: &str| v.parse::<usize>().map_err(|_| invalid());
        let parse_f64 = |v: &str| v.parse::<f64>().map_err(|_| invalid());
        let parse_bool = |v: &str| match v {
            "0" | "false" => Ok(false),
            "1" | "true" => Ok(true),
            _ => Err(invalid()),
        };
        match key {
            "l_in" => self.l_in = parse_usize(value)?,
            "l" => self.l = parse_usize(value)?,
            "d" => self.d = parse_usize(value)?,
            "m" => self.m = parse_usize(value)?,
            "num_layers" => self.num_layers = parse_usize(value)?,
            "inner_type" => {
                self.inner_type = match value {
                    "t1" => InnerType::T1,
                    "t2" => InnerType::T2,
                    "t3" => InnerType::T3,
                    "t4" => InnerType::T4,
                    _ => return Err(invalid()),
                }
            }
            "agg" => {
                self.agg = match value {
                    "mul" => AggKind::Mul,
                    "add" => AggKind::Add,
                    _ => return Err(invalid()),
                }
            }
            "self_term" => self.self_term = parse_bool(value)?,
            "gate_mode" => {
                self.gate_mode = match value {
                    "lp" => GateMode::Lp,
                    "nlp" => GateMode::Nlp,
                    _ => return Err(invalid()),
                }
            }
            "wb_mode" => {
                self.wb_mode = match value {
                    "linear" => WbMode::Linear,
                    "nonlinear" => WbMode::Nonlinear,
                    _ => return Err(invalid()),
                }
            }
            "local" => {
                self.local = match value {
                    "none" => LocalKind::None,
                    "gcn_lite" => LocalKind::GcnLite,
                    "gatedgcn_lite" => LocalKind::GatedGcnLite,
                    _ => return Err(invalid()),
                }
            }
            "readout" => {
                self.readout = match value {
                    "mean" => ReadoutKind::Mean,
                    "sum" => ReadoutKind::Sum,
                    _ => return Err(invalid()),
                }
            }
            "dropout_ffn" => self.dropout.ffn = parse_f64(value)?,
            "dropout_local" => self.dropout.local = parse_f64(value)?,
            "dropout_residual" => self.dropout.residual = parse_f64(value)?,
            "dropout_gmn" => self.dropout.gmn = parse_f64(value)?,
            "precision" => {
                self.precision = match value {
                    "single" => Precision::Single,
                    "double" => Precision::Double,
                    _ => return Err(invalid()),
                }
            }
            "normalization" => {
                self.normalization = Normalization::parse(value).ok_or_else(invalid)?
            }
            "skip_zero" => self.skip_zero = parse_bool(value)?,
            "use_ffn" => self.use_ffn = parse_bool(value)?,
            "ffn_expansion" => self.ffn_expansion = parse_usize(value)?,
            "layer_norm" => self.layer_norm = parse_bool(value)?,
            "activation" => {
                self.activation = match value {
                    "relu" => Activation::Relu,
                    "gelu" => Activation::Gelu,
                    "silu" => Activation::Silu,
                    _ => return Err(invalid()),
                }
            }
            "out_dim" => self.out_dim = parse_usize(value)?,
            "use_input_embed" => self.use_input_embed = parse_bool(value)?,
            "phi_shared" => self.phi.shared = parse_bool(value)?,
            "phi_zero_c" => self.phi.zero_phi_c = parse_bool(value)?,
            "phi_mode" => {
                self.phi.mode = match value {
                    "power" => PhiMode::Power { exponents: vec![1; self.m] },
                    "setagg" => PhiMode::SetAgg { hidden: 8, pool: PoolKind::Mean, clip: 1.0 },
                    _ => return Err(invalid()),
                }
            }
            "phi_exponents" => {
                let exps: Result<Vec<u32>, _> =
                    value.split(',').map(|s| s.trim().parse::<u32>()).collect();
                self.phi.mode = PhiMode::Power { exponents: exps.map_err(|_| invalid())? };
            }
            "phi_hidden" => {
                let h = parse_usize(value)?;
                match &mut self.phi.mode {
                    PhiMode::SetAgg { hidden, .. } => *hidden = h,
                    _ => {
                        self.phi.mode = PhiMode::SetAgg { hidden: h, pool: PoolKind::Mean, clip: 1.0 }
                    }
                }
            }
            "phi_pool" => {
                let p = match value {
                    "mean" => PoolKind::Mean,
                    "sum" => PoolKind::Sum,
                    _ => return Err(invalid()),
                };
                match &mut self.phi.mode {
                    PhiMode::SetAgg { pool, .. } => *pool = p,
                    _ => self.phi.mode = PhiMode::SetAgg { hidden: 8, pool: p, clip: 1.0 },
                }
            }
            "phi_clip" => {
                let c = parse_f64(value)?;
                match &mut self.phi.mode {
                    PhiMode::SetAgg { clip, .. } => *clip = c,
                    _ => {
                        self.phi.mode = PhiMode::SetAgg { hidden: 8, pool: PoolKind::Mean, clip: c }
                    }
                }
            }
            _ => return Err(ModelError::UnknownParam(key.to_string())),
        }
        Ok(())
    }

    pub fn from_kv(pairs: &[(String, String)]) -> Result<Self, ModelError> {
        let mut config = LayerConfig::base();
        // phi_mode first so phi_* refinements land in the right variant
        for (k, v) in pairs.iter().filter(|(k, _)| k == "phi_mode") {
            config.set_key(k, v)?;
        }
        for (k, v) in pairs.iter().filter(|(k, _)| k != "phi_mode") {
            config.set_key(k, v)?;
        }
        Ok(config)
    }
}

#[cfg(test)]
mod config_tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        let mut config = LayerConfig::base();
        config.inner_type = InnerType::T2;
        config.m = config.l;
        config.phi = PhiSpec::power(vec![0; config.l]);
        config.self_term = true;
        config.dropout.residual = 0.25;
        let kv = config.to_kv();
        let back = LayerConfig::from_kv(&kv).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut config = LayerConfig::base();
        assert!(matches!(
            config.set_key("lerning_rate", "0.1"),
            Err(ModelError::UnknownParam(_))
        ));
        assert!(matches!(
            config.set_key("agg", "prod"),
            Err(ModelError::InvalidValue { .. })
        ));
    }

    #[test]
    fn t2_requires_square() {
        let mut config = LayerConfig::base();
        config.inner_type = InnerType::T2;
        assert!(config.validate().is_err());
        config.m = config.l;
        config.validate().unwrap();
    }
}
