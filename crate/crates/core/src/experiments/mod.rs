//! Experiment drivers: variational entangled-state generation, MaxCut
//! QAOA, and the random-circuit truncation-fidelity sweep.

pub mod device;
pub mod emit;
pub mod entangler;
pub mod maxcut;
pub mod optimizer;
pub mod sweep;

pub use device::SyntheticDevice;
pub use entangler::{build_entangler_circuit, run_variational, IsingSpec, VariationalOutcome};
pub use maxcut::{build_maxcut_circuit, maxcut_objective, run_maxcut, MaxCutGraph, MaxCutOutcome};
pub use optimizer::{
    AngleExpr, CircuitTemplate, EpochRecord, GradientMethod, LossKind, OptimizerConfig,
    TemplateGate,
};
pub use sweep::{truncation_sweep, SweepConfig, SweepRow, SweepTable};

use crate::circuit::{prepare_circuit, Circuit, NoisePolicy};
use crate::error::Result;
use crate::mpdo::{run_circuit, MpdoState, TruncationConfig};

/// Bundles how a logical circuit becomes an MPDO simulation: the noise
/// policy, truncation caps, and the seed driving crosstalk injection.
#[derive(Debug, Clone)]
pub struct Runner {
    pub policy: NoisePolicy,
    pub trunc: TruncationConfig,
    pub seed: u64,
}

impl Runner {
    pub fn ideal() -> Self {
        Self {
            policy: NoisePolicy::ideal(),
            trunc: TruncationConfig::lossless_desk_scale(),
            seed: 0,
        }
    }

    pub fn new(policy: NoisePolicy, trunc: TruncationConfig, seed: u64) -> Self {
        Self { policy, trunc, seed }
    }

    /// Prepare (decompose, route, inject, attach) and simulate.
    pub fn simulate(&self, circuit: &Circuit) -> Result<MpdoState> {
        let prepared = prepare_circuit(circuit, &self.policy, self.seed)?;
        run_circuit(&prepared, self.trunc)
    }
}
