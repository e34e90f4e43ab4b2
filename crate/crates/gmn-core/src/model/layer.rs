//! Forward-pass construction on the tape: encodings, inner products, gates,
//! the GraphMinNet layer, the hybrid block, local message passing, readout.

use std::sync::Arc;

use crate::graph::Graph;
use crate::numerics::{ReduceOp, Tape, Tensor, UnaryOp, Vid};
use crate::scalar::Scalar;
use crate::spectral::{laplacian, Normalization, SparseMatrix, SpectralCache};

use super::params::ParamStore;
use super::phi::{phi_eval_values, phi_setagg_on_tape};
use super::{
    Activation, AggKind, GateMode, InnerType, LayerConfig, LocalKind, ModelError, PhiMode,
    ReadoutKind, WbMode,
};

/// Per-graph constants used by the local blocks.
pub struct GraphAux<T> {
    pub n: usize,
    /// D^{-1/2} A D^{-1/2} of the graph as-is.
    pub adj_norm: Arc<SparseMatrix<T>>,
    /// Directed edge endpoints (both orientations of each undirected edge):
    /// `src[e]` receives a message from `dst[e]`.
    pub src: Arc<Vec<u32>>,
    pub dst: Arc<Vec<u32>>,
}

impl<T: Scalar> GraphAux<T> {
    pub fn new(graph: &Graph) -> Self {
        let mut src = Vec::new();
        let mut dst = Vec::new();
        for &(u, v) in graph.edges() {
            src.push(u);
            dst.push(v);
            if u != v {
                src.push(v);
                dst.push(u);
            }
        }
        GraphAux {
            n: graph.n(),
            adj_norm: Arc::new(laplacian(graph, Normalization::NormAdjacency)),
            src: Arc::new(src),
            dst: Arc::new(dst),
        }
    }
}

/// Spectral cache constants registered on a tape.
pub struct SpectralConsts {
    /// (d,) eigenvalues.
    pub lambda: Vid,
    /// (n, d) eigenvector rows p_u.
    pub p: Vid,
    /// (d, 1) mask: 1 for real eigenpairs, 0 for pad slots.
    pub pad_mask: Vid,
    pub real_count: usize,
}

const SITE_FFN: u64 = 0;
const SITE_LOCAL: u64 = 1;
const SITE_RESIDUAL: u64 = 2;
const SITE_GMN: u64 = 3;

/// Builds one forward pass over a tape, binding parameters on first use so
/// gradients can be routed back by name.
pub struct Forward<'a, T: Scalar> {
    pub tape: &'a mut Tape<T>,
    params: &'a ParamStore<T>,
    config: &'a LayerConfig,
    bound: Vec<(String, Vid)>,
    dropout_key: Option<u64>,
}

impl<'a, T: Scalar> Forward<'a, T> {
    /// Evaluation mode: dropout sites are identity.
    pub fn new(tape: &'a mut Tape<T>, params: &'a ParamStore<T>, config: &'a LayerConfig) -> Self {
        Forward { tape, params, config, bound: Vec::new(), dropout_key: None }
    }

    /// Training mode: masks are a pure function of (seed, layer, site, epoch)
    /// plus a unit id (the graph's index) so graphs in a batch decorrelate.
    pub fn with_dropout(mut self, seed: u64, epoch: u32, unit: u64) -> Self {
        self.dropout_key = Some(mix(mix(seed, epoch as u64), unit));
        self
    }

    pub fn config(&self) -> &LayerConfig {
        self.config
    }

    /// Parameters bound so far, in first-use order.
    pub fn bound_params(&self) -> &[(String, Vid)] {
        &self.bound
    }

    pub fn param_vid(&self, name: &str) -> Option<Vid> {
        self.bound.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    fn p(&mut self, name: String) -> Result<Vid, ModelError> {
        if let Some(id) = self.param_vid(&name) {
            return Ok(id);
        }
        let t = self.params.get(&name)?.clone();
        let id = self.tape.input(t);
        self.bound.push((name, id));
        Ok(id)
    }

    fn act(&mut self, v: Vid) -> Result<Vid, ModelError> {
        let op = match self.config.activation {
            Activation::Relu => UnaryOp::Relu,
            Activation::Gelu => UnaryOp::Gelu,
            Activation::Silu => UnaryOp::Silu,
        };
        Ok(self.tape.unary(op, v)?)
    }

    fn affine(&mut self, w: &str, b: &str, x: Vid) -> Result<Vid, ModelError> {
        let w = self.p(w.to_string())?;
        let b = self.p(b.to_string())?;
        let y = self.tape.contract("ij,jk->ik", x, w)?;
        Ok(self.tape.add(y, b)?)
    }

    fn drop_site(&mut self, v: Vid, rate: f64, layer: usize, site: u64) -> Result<Vid, ModelError> {
        match self.dropout_key {
            Some(key) if rate > 0.0 => {
                let k = mix(key, (layer as u64) << 8 | site);
                Ok(self.tape.dropout(v, rate, k)?)
            }
            _ => Ok(v),
        }
    }

    /// Registers Λ_d, P, and the pad mask as tape constants.
    pub fn spectral_consts(&mut self, cache: &SpectralCache<T>) -> SpectralConsts {
        let d = cache.d;
        let real = d - cache.pad_count;
        let lambda = self.tape.constant(
            Tensor::from_vec(&[d], cache.eigenvalues.clone()).expect("cache shape"),
        );
        let p = self
            .tape
            .constant(Tensor::from_vec(&[cache.n, d], cache.vectors.clone()).expect("cache shape"));
        let mut mask = vec![T::zero(); d];
        for slot in mask.iter_mut().take(real) {
            *slot = T::one();
        }
        let pad_mask = self.tape.constant(Tensor::from_vec(&[d, 1], mask).expect("mask shape"));
        SpectralConsts { lambda, p, pad_mask, real_count: real }
    }

    /// Φ for one side ("phi" shared, "phia"/"phic" separate); (d, m).
    fn phi(&mut self, layer: usize, side: &str, sc: &SpectralConsts) -> Result<Vid, ModelError> {
        match &self.config.phi.mode {
            PhiMode::Power { exponents } => {
                let lam = self.tape.value(sc.lambda).data().to_vec();
                let d = lam.len();
                let phi = phi_eval_values(exponents, &lam, d - sc.real_count);
                Ok(self.tape.constant(phi))
            }
            PhiMode::SetAgg { pool, .. } => {
                let pool = *pool;
                let pfx = format!("layers.{layer}.gmn.{side}");
                let m1 = [
                    self.p(format!("{pfx}.m1w1"))?,
                    self.p(format!("{pfx}.m1b1"))?,
                    self.p(format!("{pfx}.m1w2"))?,
                    self.p(format!("{pfx}.m1b2"))?,
                ];
                let m2 = [
                    self.p(format!("{pfx}.m2w1"))?,
                    self.p(format!("{pfx}.m2b1"))?,
                    self.p(format!("{pfx}.m2w2"))?,
                    self.p(format!("{pfx}.m2b2"))?,
                ];
                Ok(phi_setagg_on_tape(
                    self.tape,
                    m1,
                    m2,
                    sc.lambda,
                    sc.pad_mask,
                    sc.real_count,
                    pool,
                )?)
            }
        }
    }

    /// W-side map: (n, l) → (n, d).
    fn w_map(&mut self, layer: usize, x: Vid) -> Result<Vid, ModelError> {
        match self.config.wb_mode {
            WbMode::Linear => {
                let w = self.p(format!("layers.{layer}.gmn.w"))?;
                Ok(self.tape.contract("ij,jk->ik", x, w)?)
            }
            WbMode::Nonlinear => {
                let w1 = self.p(format!("layers.{layer}.gmn.w1"))?;
                let w2 = self.p(format!("layers.{layer}.gmn.w2"))?;
                let h = self.tape.contract("ij,jk->ik", x, w1)?;
                let h = self.act(h)?;
                Ok(self.tape.contract("ij,jk->ik", h, w2)?)
            }
        }
    }

    /// B-side map applied per column of a (n, d, m) encoding → (n, l, m).
    fn b_map(&mut self, layer: usize, enc: Vid) -> Result<Vid, ModelError> {
        match self.config.wb_mode {
            WbMode::Linear => {
                let b = self.p(format!("layers.{layer}.gmn.b"))?;
                Ok(self.tape.contract("ik,ukj->uij", b, enc)?)
            }
            WbMode::Nonlinear => {
                let b1 = self.p(format!("layers.{layer}.gmn.b1"))?;
                let b2 = self.p(format!("layers.{layer}.gmn.b2"))?;
                let h = self.tape.contract("ik,ukj->uij", b1, enc)?;
                let h = self.act(h)?;
                Ok(self.tape.contract("ik,ukj->uij", b2, h)?)
            }
        }
    }

    /// Gate z ∈ (0,1)^{n×l} and candidate h̃ ∈ R^{n×l} from the layer input.
    pub fn gate(&mut self, layer: usize, x: Vid) -> Result<(Vid, Vid), ModelError> {
        let pfx = format!("layers.{layer}.gmn");
        match self.config.gate_mode {
            GateMode::Lp => {
                let zpre = self.affine(&format!("{pfx}.zw"), &format!("{pfx}.zb"), x)?;
                let z = self.tape.sigmoid(zpre)?;
                let h = self.affine(&format!("{pfx}.hw"), &format!("{pfx}.hb"), x)?;
                Ok((z, h))
            }
            GateMode::Nlp => {
                let z1 = self.affine(&format!("{pfx}.zw1"), &format!("{pfx}.zb1"), x)?;
                let z1 = self.act(z1)?;
                let zpre = self.affine(&format!("{pfx}.zw2"), &format!("{pfx}.zb2"), z1)?;
                let z = self.tape.sigmoid(zpre)?;
                let h1 = self.affine(&format!("{pfx}.hw1"), &format!("{pfx}.hb1"), x)?;
                let h1 = self.act(h1)?;
                let h = self.affine(&format!("{pfx}.hw2"), &format!("{pfx}.hb2"), h1)?;
                Ok((z, h))
            }
        }
    }

    /// One GraphMinNet layer: x (n, l) → (n, l).
    pub fn gmn_forward(
        &mut self,
        layer: usize,
        sc: &SpectralConsts,
        x: Vid,
    ) -> Result<Vid, ModelError> {
        let config = self.config;
        let n = self.tape.shape(x)[0];
        let (d, m, l) = (config.d, config.m, config.l);

        let side_a = if config.phi.shared { "phi" } else { "phia" };
        let phi_a = self.phi(layer, side_a, sc)?;
        let phi_c = if config.phi.zero_phi_c {
            self.tape.constant(Tensor::zeros(&[d, m]))
        } else if config.phi.shared {
            phi_a
        } else {
            self.phi(layer, "phic", sc)?
        };

        let wx = self.w_map(layer, x)?; // (n, d)
        let a_enc = self.tape.contract("uk,ki->uki", wx, phi_a)?; // (n, d, m)
        let c_enc = self.tape.contract("uk,ki->uki", sc.p, phi_c)?; // (n, d, m)

        let (z, h_tilde) = self.gate(layer, x)?;
        let zh = self.tape.mul(z, h_tilde)?;

        let s = match config.inner_type {
            InnerType::T1 | InnerType::T2 | InnerType::T3 => {
                let combined = match config.agg {
                    AggKind::Mul => self.tape.mul(a_enc, c_enc)?,
                    AggKind::Add => self.tape.add(a_enc, c_enc)?,
                };
                let a_emb = self.b_map(layer, combined)?; // (n, l, m)
                let a_bar = self.tape.reduce(ReduceOp::Sum, a_emb, Some(0), false)?; // (l, m)
                match config.inner_type {
                    InnerType::T1 => self.tape.contract("uij,ij->ui", a_emb, a_bar)?,
                    InnerType::T2 => self.tape.contract("uij,ij->uj", a_emb, a_bar)?,
                    InnerType::T3 => {
                        let s0 = self.tape.contract("uij,ij->u", a_emb, a_bar)?;
                        let ones = self.tape.constant(Tensor::ones(&[l]));
                        self.tape.contract("u,i->ui", s0, ones)?
                    }
                    InnerType::T4 => unreachable!(),
                }
            }
            InnerType::T4 => {
                // S[u] = Σ_v T1(B A_u, B A_v) · ⟨vec C_u, vec C_v⟩, factored
                // through the moment tensor Σ_v (B A_v) ⊗ vec(C_v) so the
                // cost stays linear in n.
                let ba = self.b_map(layer, a_enc)?; // (n, l, m)
                let vec_c = self.tape.reshape(c_enc, &[n, d * m])?;
                let moment = self.tape.contract("vij,vp->ijp", ba, vec_c)?; // (l, m, d·m)
                let k = self.tape.contract("up,ijp->uij", vec_c, moment)?; // (n, l, m)
                self.tape.contract("uij,uij->ui", ba, k)?
            }
        };

        if config.self_term {
            let beta_raw = self.p(format!("layers.{layer}.gmn.beta_raw"))?;
            let beta_sig = self.tape.sigmoid(beta_raw)?;
            let beta = self.tape.scale(T::from_f64(2.0), beta_sig)?; // in (0, 2)
            let ws1 = self.p(format!("layers.{layer}.gmn.ws1"))?;
            let ws2 = self.p(format!("layers.{layer}.gmn.ws2"))?;
            let w1c = self.tape.contract("ik,ukj->uij", ws1, c_enc)?;
            let w2c = self.tape.contract("ik,ukj->uij", ws2, c_enc)?;
            let q = self.tape.contract("uij,uij->u", w1c, w2c)?; // (n,)
            let ones = self.tape.constant(Tensor::ones(&[l]));
            let q1 = self.tape.contract("u,i->ui", q, ones)?;
            let two = self.tape.constant(Tensor::scalar(T::from_f64(2.0)));
            let rest = self.tape.sub(two, beta)?;
            let bs = self.tape.mul(s, beta)?;
            let qs = self.tape.mul(q1, rest)?;
            let mixed = self.tape.add(bs, qs)?;
            Ok(self.tape.mul(zh, mixed)?)
        } else {
            Ok(self.tape.mul(zh, s)?)
        }
    }

    /// Simplified local message passing.
    pub fn local_block(
        &mut self,
        layer: usize,
        aux: &GraphAux<T>,
        h: Vid,
    ) -> Result<Vid, ModelError> {
        let pfx = format!("layers.{layer}.local");
        match self.config.local {
            LocalKind::None => Err(ModelError::TypeConstraintViolation(
                "local_block called with local = none".into(),
            )),
            LocalKind::GcnLite => {
                let w1 = self.p(format!("{pfx}.w1"))?;
                let w2 = self.p(format!("{pfx}.w2"))?;
                let own = self.tape.contract("ij,jk->ik", h, w1)?;
                let prop = self.tape.contract("ij,jk->ik", h, w2)?;
                let agg = self.tape.spmm(Arc::clone(&aux.adj_norm), prop)?;
                Ok(self.tape.add(own, agg)?)
            }
            LocalKind::GatedGcnLite => {
                let w1 = self.p(format!("{pfx}.w1"))?;
                let w2 = self.p(format!("{pfx}.w2"))?;
                let w3 = self.p(format!("{pfx}.w3"))?;
                let w4 = self.p(format!("{pfx}.w4"))?;
                let own = self.tape.contract("ij,jk->ik", h, w1)?;
                if aux.src.is_empty() {
                    return Ok(own);
                }
                let h3 = self.tape.contract("ij,jk->ik", h, w3)?;
                let h4 = self.tape.contract("ij,jk->ik", h, w4)?;
                let h2 = self.tape.contract("ij,jk->ik", h, w2)?;
                let gs = self.tape.gather_rows(h3, Arc::clone(&aux.src))?;
                let gd = self.tape.gather_rows(h4, Arc::clone(&aux.dst))?;
                let pre = self.tape.add(gs, gd)?;
                let gate = self.tape.sigmoid(pre)?;
                let msg_in = self.tape.gather_rows(h2, Arc::clone(&aux.dst))?;
                let msg = self.tape.mul(gate, msg_in)?;
                let agg = self.tape.scatter_add_rows(msg, Arc::clone(&aux.src), aux.n)?;
                Ok(self.tape.add(own, agg)?)
            }
        }
    }

    fn layer_norm(&mut self, prefix: &str, h: Vid) -> Result<Vid, ModelError> {
        let g = self.p(format!("{prefix}.g"))?;
        let b = self.p(format!("{prefix}.b"))?;
        let mean = self.tape.reduce(ReduceOp::Mean, h, Some(1), true)?;
        let centered = self.tape.sub(h, mean)?;
        let sq = self.tape.unary(UnaryOp::Square, centered)?;
        let var = self.tape.reduce(ReduceOp::Mean, sq, Some(1), true)?;
        let eps = self.tape.constant(Tensor::scalar(T::from_f64(1e-5)));
        let var = self.tape.add(var, eps)?;
        let std = self.tape.unary(UnaryOp::Sqrt, var)?;
        let inv = self.tape.unary(UnaryOp::Reciprocal, std)?;
        let norm = self.tape.mul(centered, inv)?;
        let scaled = self.tape.mul(norm, g)?;
        Ok(self.tape.add(scaled, b)?)
    }

    /// Residual block around the GraphMinNet and local branches, then FFN.
    pub fn hybrid_layer(
        &mut self,
        layer: usize,
        aux: &GraphAux<T>,
        sc: &SpectralConsts,
        h_in: Vid,
    ) -> Result<Vid, ModelError> {
        let rates = self.config.dropout;
        let gmn = self.gmn_forward(layer, sc, h_in)?;
        let gmn = self.drop_site(gmn, rates.gmn, layer, SITE_GMN)?;
        let skip = self.drop_site(h_in, rates.residual, layer, SITE_RESIDUAL)?;
        let mut sum = self.tape.add(skip, gmn)?;
        if self.config.local != LocalKind::None {
            let local = self.local_block(layer, aux, h_in)?;
            let local = self.drop_site(local, rates.local, layer, SITE_LOCAL)?;
            sum = self.tape.add(sum, local)?;
        }
        let y = if self.config.layer_norm {
            self.layer_norm(&format!("layers.{layer}.ln1"), sum)?
        } else {
            sum
        };
        if !self.config.use_ffn {
            return Ok(y);
        }
        let pfx = format!("layers.{layer}.ffn");
        let f = self.affine(&format!("{pfx}.w1"), &format!("{pfx}.b1"), y)?;
        let f = self.act(f)?;
        let f = self.affine(&format!("{pfx}.w2"), &format!("{pfx}.b2"), f)?;
        let f = self.drop_site(f, rates.ffn, layer, SITE_FFN)?;
        let out = self.tape.add(y, f)?;
        if self.config.layer_norm {
            self.layer_norm(&format!("layers.{layer}.ln2"), out)
        } else {
            Ok(out)
        }
    }

    /// Permutation-invariant pooling over nodes: (n, l) → (1, l).
    pub fn readout(&mut self, h: Vid, kind: ReadoutKind) -> Result<Vid, ModelError> {
        let op = match kind {
            ReadoutKind::Mean => ReduceOp::Mean,
            ReadoutKind::Sum => ReduceOp::Sum,
        };
        Ok(self.tape.reduce(op, h, Some(0), true)?)
    }

    /// Embed → stacked hybrid layers → head. Graph-level tasks pool before
    /// the head; node-level tasks apply it per node.
    pub fn model_forward(
        &mut self,
        aux: &GraphAux<T>,
        cache: &SpectralCache<T>,
        x: Vid,
        graph_level: bool,
    ) -> Result<Vid, ModelError> {
        let sc = self.spectral_consts(cache);
        let mut h = if self.config.use_input_embed {
            self.affine("embed.w", "embed.b", x)?
        } else {
            x
        };
        for layer in 0..self.config.num_layers {
            h = self.hybrid_layer(layer, aux, &sc, h)?;
        }
        if self.config.out_dim == 0 {
            return Ok(h);
        }
        if graph_level {
            let pooled = self.readout(h, self.config.readout)?;
            self.affine("head.w", "head.b", pooled)
        } else {
            self.affine("head.w", "head.b", h)
        }
    }
}

/// Standalone wrappers matching the operation names used elsewhere.
pub fn local_block<T: Scalar>(
    tape: &mut Tape<T>,
    params: &ParamStore<T>,
    config: &LayerConfig,
    aux: &GraphAux<T>,
    h: Vid,
) -> Result<Vid, ModelError> {
    Forward::new(tape, params, config).local_block(0, aux, h)
}

pub fn readout<T: Scalar>(
    tape: &mut Tape<T>,
    h: Vid,
    kind: ReadoutKind,
) -> Result<Vid, ModelError> {
    let op = match kind {
        ReadoutKind::Mean => ReduceOp::Mean,
        ReadoutKind::Sum => ReduceOp::Sum,
    };
    Ok(tape.reduce(op, h, Some(0), true)?)
}

/// Full forward for a graph in one call: inputs features, runs the model,
/// returns (output id, input id, forward context's bound params).
pub fn model_forward<T: Scalar>(
    tape: &mut Tape<T>,
    params: &ParamStore<T>,
    config: &LayerConfig,
    graph: &Graph,
    cache: &SpectralCache<T>,
    graph_level: bool,
) -> Result<(Vid, Vid, Vec<(String, Vid)>), ModelError> {
    let aux = GraphAux::new(graph);
    let x = tape.input(
        Tensor::from_f64_slice(&[graph.n(), graph.feature_dim()], graph.features())
            .map_err(ModelError::Numerics)?,
    );
    let mut fwd = Forward::new(tape, params, config);
    let out = fwd.model_forward(&aux, cache, x, graph_level)?;
    let bound = fwd.bound.clone();
    Ok((out, x, bound))
}

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x85EB_CA77_C2B2_AE63);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
