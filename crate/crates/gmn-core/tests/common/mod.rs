//! Shared test support: the explicit O(n²) double-sum evaluation of the
//! layer (no ā factoring, no moment tensor) used as the independent oracle,
//! plus small helpers.
#![allow(dead_code)]

use gmn_core::model::{AggKind, InnerType, LayerConfig, ParamStore};
use gmn_core::spectral::SpectralCache;

/// Plain-loop evaluation of the layer for linear W/B and LP gates, summing
/// explicitly over node pairs. Mirrors the recurrence-derived form
/// h_u = Σ_v ⟨a_u, a_v⟩ ⊙ z_u ⊙ h̃_u rather than the factored computation.
pub fn gmn_double_sum_oracle(
    config: &LayerConfig,
    params: &ParamStore<f64>,
    layer: usize,
    cache: &SpectralCache<f64>,
    x: &[f64], // n×l row-major
    phi: &[f64], // d×m, already pad-masked
    phi_c: &[f64], // d×m
) -> Vec<f64> {
    let n = cache.n;
    let (l, d, m) = (config.l, config.d, config.m);
    let g = |name: &str| params.get(&format!("layers.{layer}.gmn.{name}")).unwrap().data().to_vec();
    let w = g("w"); // (l, d), y = x · w
    let b = g("b"); // (l, d) as (out, in)
    let zw = g("zw");
    let zb = g("zb");
    let hw = g("hw");
    let hb = g("hb");

    let mat = |x: &[f64], w: &[f64], rows: usize, inner: usize, out: usize| -> Vec<f64> {
        let mut y = vec![0.0; rows * out];
        for r in 0..rows {
            for c in 0..out {
                let mut acc = 0.0;
                for k in 0..inner {
                    acc += x[r * inner + k] * w[k * out + c];
                }
                y[r * out + c] = acc;
            }
        }
        y
    };

    let wx = mat(x, &w, n, l, d); // (n, d)
    // encodings (n, d, m)
    let mut a_enc = vec![0.0; n * d * m];
    let mut c_enc = vec![0.0; n * d * m];
    for u in 0..n {
        for k in 0..d {
            for i in 0..m {
                a_enc[(u * d + k) * m + i] = phi[k * m + i] * wx[u * d + k];
                c_enc[(u * d + k) * m + i] = phi_c[k * m + i] * cache.vectors[u * d + k];
            }
        }
    }
    // a_u = B (A ⊕ C), (n, l, m)
    let mut a_emb = vec![0.0; n * l * m];
    for u in 0..n {
        for i in 0..l {
            for j in 0..m {
                let mut acc = 0.0;
                for k in 0..d {
                    let dd = match config.agg {
                        AggKind::Mul => {
                            a_enc[(u * d + k) * m + j] * c_enc[(u * d + k) * m + j]
                        }
                        AggKind::Add => {
                            a_enc[(u * d + k) * m + j] + c_enc[(u * d + k) * m + j]
                        }
                    };
                    acc += b[i * d + k] * dd;
                }
                a_emb[(u * l + i) * m + j] = acc;
            }
        }
    }
    // gates
    let zpre = mat(x, &zw, n, l, l);
    let hpre = mat(x, &hw, n, l, l);
    let mut z = vec![0.0; n * l];
    let mut ht = vec![0.0; n * l];
    for u in 0..n {
        for i in 0..l {
            z[u * l + i] = 1.0 / (1.0 + (-(zpre[u * l + i] + zb[i])).exp());
            ht[u * l + i] = hpre[u * l + i] + hb[i];
        }
    }

    // inner products, explicit double sum over v
    let mut s = vec![0.0; n * l];
    match config.inner_type {
        InnerType::T1 => {
            for u in 0..n {
                for v in 0..n {
                    for i in 0..l {
                        let mut acc = 0.0;
                        for j in 0..m {
                            acc += a_emb[(u * l + i) * m + j] * a_emb[(v * l + i) * m + j];
                        }
                        s[u * l + i] += acc;
                    }
                }
            }
        }
        InnerType::T2 => {
            assert_eq!(m, l);
            for u in 0..n {
                for v in 0..n {
                    for j in 0..m {
                        let mut acc = 0.0;
                        for i in 0..l {
                            acc += a_emb[(u * l + i) * m + j] * a_emb[(v * l + i) * m + j];
                        }
                        s[u * l + j] += acc;
                    }
                }
            }
        }
        InnerType::T3 => {
            for u in 0..n {
                let mut total = 0.0;
                for v in 0..n {
                    for i in 0..l {
                        for j in 0..m {
                            total += a_emb[(u * l + i) * m + j] * a_emb[(v * l + i) * m + j];
                        }
                    }
                }
                for i in 0..l {
                    s[u * l + i] = total;
                }
            }
        }
        InnerType::T4 => {
            // S[u] = Σ_v T1(B A_u, B A_v) · ⟨vec C_u, vec C_v⟩
            let mut ba = vec![0.0; n * l * m];
            for u in 0..n {
                for i in 0..l {
                    for j in 0..m {
                        let mut acc = 0.0;
                        for k in 0..d {
                            acc += b[i * d + k] * a_enc[(u * d + k) * m + j];
                        }
                        ba[(u * l + i) * m + j] = acc;
                    }
                }
            }
            for u in 0..n {
                for v in 0..n {
                    let mut cdot = 0.0;
                    for k in 0..d {
                        for j in 0..m {
                            cdot += c_enc[(u * d + k) * m + j] * c_enc[(v * d + k) * m + j];
                        }
                    }
                    for i in 0..l {
                        let mut adot = 0.0;
                        for j in 0..m {
                            adot += ba[(u * l + i) * m + j] * ba[(v * l + i) * m + j];
                        }
                        s[u * l + i] += adot * cdot;
                    }
                }
            }
        }
    }

    let mut h = vec![0.0; n * l];
    if config.self_term {
        let beta_raw = g("beta_raw")[0];
        let beta = 2.0 / (1.0 + (-beta_raw).exp());
        let ws1 = g("ws1"); // (d, d) out,in
        let ws2 = g("ws2");
        for u in 0..n {
            let mut q = 0.0;
            for a_row in 0..d {
                for j in 0..m {
                    let mut p1 = 0.0;
                    let mut p2 = 0.0;
                    for k in 0..d {
                        p1 += ws1[a_row * d + k] * c_enc[(u * d + k) * m + j];
                        p2 += ws2[a_row * d + k] * c_enc[(u * d + k) * m + j];
                    }
                    q += p1 * p2;
                }
            }
            for i in 0..l {
                let idx = u * l + i;
                h[idx] = z[idx] * ht[idx] * (beta * s[idx] + (2.0 - beta) * q);
            }
        }
    } else {
        for idx in 0..n * l {
            h[idx] = z[idx] * ht[idx] * s[idx];
        }
    }
    h
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn random_permutation(n: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    perm
}
