//! Variational generation of entangled states: a target qubit probed by
//! an even number of measurement qubits, evolved by alternating layers of
//! nearest-neighbor RZZ couplings and RX mixers, optimized against a
//! target distribution by gradient descent.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::optimizer::{
    minimize, AngleExpr, CircuitTemplate, EpochRecord, LossKind, OptimizerConfig, TemplateGate,
};
use super::Runner;
use crate::circuit::{Circuit, GateKind};
use crate::error::{CoreError, Result};
use crate::metrics::{fidelity, jsd};
use crate::tensor::ComplexTensor;

/// Layout of the probe system: 2N measurement qubits around one target
/// qubit in the middle of the chain.
#[derive(Debug, Clone)]
pub struct IsingSpec {
    /// Number of measurement qubits (2N, even, >= 2).
    pub n_measure: usize,
    /// ZZ coupling strength to the target; scales initial angles of
    /// target-adjacent RZZ gates.
    pub j_sm: f64,
    /// Coupling between measurement qubits; scales initial angles of the
    /// remaining RZZ gates (0 starts them at identity, still trainable).
    pub j_mn: f64,
    /// Initial pure state of the target qubit (real amplitudes).
    pub target_state: Vec<C64>,
}

impl IsingSpec {
    pub fn new(n_measure: usize, target_state: Vec<C64>) -> Result<Self> {
        let spec = Self { n_measure, j_sm: 1.0, j_mn: 0.0, target_state };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_measure < 2 || self.n_measure % 2 != 0 {
            return Err(CoreError::Parameter(format!(
                "n_measure must be even and >= 2, got {}",
                self.n_measure
            )));
        }
        if self.target_state.len() != 2 {
            return Err(CoreError::Parameter("target state must be a qubit".into()));
        }
        let norm: f64 = self.target_state.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(CoreError::Parameter(format!("target state norm {norm} deviates from 1")));
        }
        if self.target_state.iter().any(|a| a.im.abs() > 1e-12) {
            return Err(CoreError::Parameter(
                "target state must have real amplitudes (RY preparation)".into(),
            ));
        }
        Ok(())
    }

    /// Total register size 2N + 1.
    pub fn n_qubits(&self) -> usize {
        self.n_measure + 1
    }

    /// Chain position of the target qubit (middle of the register).
    pub fn target_index(&self) -> usize {
        self.n_measure / 2
    }

    /// Preparation angle: RY(θ)|0⟩ = (cos θ, −sin θ) reproduces the target
    /// amplitudes.
    pub fn preparation_angle(&self) -> f64 {
        let a = self.target_state[0].re;
        let b = self.target_state[1].re;
        (-b).atan2(a)
    }

    /// Parameters required for depth `p`: one preparation angle plus, per
    /// layer, one RZZ angle per adjacent pair (2N of them) and one RX
    /// angle per measurement qubit (2N of them).
    pub fn param_count(&self, depth: usize) -> usize {
        1 + depth * 2 * self.n_measure
    }
}

/// Parametrized entangler circuit for depth `p`.
///
/// Parameter layout: `params[0]` is the target preparation RY angle;
/// then for each layer the RZZ angles on pairs (0,1)…(2N-1,2N) followed
/// by the RX angles on the measurement qubits in ascending order.
pub fn entangler_template(spec: &IsingSpec, depth: usize) -> Result<CircuitTemplate> {
    spec.validate()?;
    let n = spec.n_qubits();
    let target = spec.target_index();
    let mut gates = Vec::new();
    let mut param = 0usize;
    gates.push(TemplateGate {
        kind: GateKind::RY,
        qubits: vec![target],
        angle: Some(AngleExpr::Param { index: param, coeff: 1.0 }),
    });
    param += 1;
    for _ in 0..depth {
        for i in 0..n - 1 {
            gates.push(TemplateGate {
                kind: GateKind::RZZ,
                qubits: vec![i, i + 1],
                angle: Some(AngleExpr::Param { index: param, coeff: 1.0 }),
            });
            param += 1;
        }
        for q in 0..n {
            if q == target {
                continue;
            }
            gates.push(TemplateGate {
                kind: GateKind::RX,
                qubits: vec![q],
                angle: Some(AngleExpr::Param { index: param, coeff: 1.0 }),
            });
            param += 1;
        }
    }
    debug_assert_eq!(param, spec.param_count(depth));
    CircuitTemplate::new(n, gates, param)
}

/// Instantiate the entangler circuit at explicit parameters.
pub fn build_entangler_circuit(spec: &IsingSpec, depth: usize, params: &[f64]) -> Result<Circuit> {
    let template = entangler_template(spec, depth)?;
    if params.len() != template.n_params() {
        return Err(CoreError::Parameter(format!(
            "depth {depth} wants {} parameters, got {}",
            template.n_params(),
            params.len()
        )));
    }
    template.build(params)
}

/// Initial parameter vector: the exact preparation angle, then small
/// seeded random angles scaled by the couplings.
pub fn initial_params(spec: &IsingSpec, depth: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = spec.n_qubits();
    let target = spec.target_index();
    let mut params = Vec::with_capacity(spec.param_count(depth));
    params.push(spec.preparation_angle());
    for _ in 0..depth {
        for i in 0..n - 1 {
            let touches_target = i == target || i + 1 == target;
            let scale = if touches_target { spec.j_sm } else { spec.j_mn.max(0.05) };
            params.push(scale * rng.gen_range(-0.5..0.5));
        }
        for q in 0..n {
            if q != target {
                params.push(rng.gen_range(-0.5..0.5));
            }
        }
    }
    params
}

/// Optimization target: the distribution to match and, optionally, the
/// density matrix used for the fidelity column of the trace.
#[derive(Debug, Clone)]
pub struct VariationalTarget {
    pub distribution: Vec<f64>,
    pub density: Option<ComplexTensor>,
}

/// Result of a variational run.
#[derive(Debug, Clone)]
pub struct VariationalOutcome {
    pub final_params: Vec<f64>,
    pub trace: Vec<EpochRecord>,
    pub final_distribution: Vec<f64>,
    pub final_loss: f64,
    pub final_fidelity: Option<f64>,
}

/// Gradient-descent optimization of the entangler circuit against a
/// target. Deterministic for a fixed seed.
pub fn run_variational(
    template: &CircuitTemplate,
    initial: &[f64],
    target: &VariationalTarget,
    runner: &Runner,
    opt: &OptimizerConfig,
    loss_kind: LossKind,
) -> Result<VariationalOutcome> {
    let expected = 1usize << template.n_qubits();
    if target.distribution.len() != expected {
        return Err(CoreError::Parameter(format!(
            "target distribution length {} does not match {} qubits",
            target.distribution.len(),
            template.n_qubits()
        )));
    }
    if matches!(loss_kind, LossKind::NegativeCutExpectation) {
        return Err(CoreError::Parameter(
            "cut-expectation loss belongs to the MaxCut driver".into(),
        ));
    }
    let track_fidelity = target.density.is_some() && template.n_qubits() <= 12;

    let mut loss = |circ: &Circuit| -> Result<f64> {
        let state = runner.simulate(circ)?;
        match loss_kind {
            LossKind::JsdToTarget => {
                let probs = state.probabilities()?;
                jsd(&probs.values, &target.distribution)
            }
            LossKind::Infidelity => {
                let rho = state.full_density_matrix()?;
                let density = target.density.as_ref().ok_or_else(|| {
                    CoreError::Parameter("infidelity loss needs a target density".into())
                })?;
                Ok(1.0 - fidelity(&normalize(&rho), density)?)
            }
            LossKind::NegativeCutExpectation => unreachable!(),
        }
    };
    let mut observer = |circ: &Circuit| -> Result<Option<f64>> {
        if !track_fidelity {
            return Ok(None);
        }
        let state = runner.simulate(circ)?;
        let rho = state.full_density_matrix()?;
        Ok(Some(fidelity(&normalize(&rho), target.density.as_ref().unwrap())?))
    };

    let (final_params, trace) = minimize(template, initial, opt, &mut loss, &mut observer)?;
    let final_state = runner.simulate(&template.build(&final_params)?)?;
    let final_distribution = final_state.probabilities()?.values;
    let last = trace.last().expect("trace is never empty");
    Ok(VariationalOutcome {
        final_params,
        final_loss: last.loss,
        final_fidelity: last.fidelity,
        trace,
        final_distribution,
    })
}

fn normalize(rho: &ComplexTensor) -> ComplexTensor {
    let t = rho.trace().map(|z| z.re).unwrap_or(1.0);
    if (t - 1.0).abs() > 1e-12 && t > 0.0 {
        rho.scale(C64::new(1.0 / t, 0.0))
    } else {
        rho.clone()
    }
}
