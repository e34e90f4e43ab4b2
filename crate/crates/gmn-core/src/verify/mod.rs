//! Executable property checks: permutation equivariance, long-range
//! gradient profiles, 1-WL expressiveness, robustness under feature noise,
//! Lipschitz stability probes, and the linear-cost benchmark.
//!
//! Every check returns a [`PropertyReport`] whose measurements are
//! reproducible bit-for-bit from its seeds.

mod bench;
mod equivariance;
mod expressive;
mod lrd;
mod robustness;
mod stability;
mod wl;

pub use bench::{bench_scaling, BenchRow, BenchTable};
pub use equivariance::check_equivariance;
pub use expressive::{expressiveness_suite, wl_equivalent_corpus, CorpusPair};
pub use lrd::{grad_profile_lrd, LrdProfile};
pub use robustness::{perturb, robustness_sweep, NoiseKind, NoiseSpec, RobustnessRow};
pub use stability::{stability_probe, weyl_bound_check, StabilityOutcome};
pub use wl::{wl_refine, ColorHistogram};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("model: {0}")]
    Model(#[from] crate::model::ModelError),
    #[error("numerics: {0}")]
    Numerics(#[from] crate::numerics::NumericsError),
    #[error("graph: {0}")]
    Graph(#[from] crate::graph::GraphError),
    #[error("spectral: {0}")]
    Spectral(#[from] crate::spectral::SpectralError),
    #[error("training: {0}")]
    Training(#[from] crate::training::TrainError),
    #[error("corpus pair '{0}' is not 1-WL equivalent")]
    PairNotWLEquivalent(String),
}

/// Outcome of one property check.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub name: String,
    pub pass: bool,
    pub measurements: Vec<(String, f64)>,
    pub trials: usize,
    pub seeds: Vec<u64>,
}

impl PropertyReport {
    pub fn new(name: &str) -> Self {
        PropertyReport {
            name: name.to_string(),
            pass: true,
            measurements: Vec::new(),
            trials: 0,
            seeds: Vec::new(),
        }
    }

    pub fn measure(&mut self, key: &str, value: f64) {
        self.measurements.push((key.to_string(), value));
    }

    pub fn require(&mut self, ok: bool) {
        self.pass &= ok;
    }

    /// One human-readable line: `PASS name (k=v, ...)`.
    pub fn to_line(&self) -> String {
        let body: Vec<String> = self
            .measurements
            .iter()
            .map(|(k, v)| format!("{k}={v:.6e}"))
            .collect();
        format!(
            "{} {} ({})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            body.join(", ")
        )
    }

    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.measurements {
            out.push_str(&format!(
                "{},{},{},{:.12e}\n",
                self.name,
                if self.pass { "pass" } else { "fail" },
                k,
                v
            ));
        }
        out
    }
}
