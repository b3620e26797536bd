//! A synthetic "device" whose two-qubit gates carry a hidden non-trivial
//! process. It can export exact χ records of that process, so the
//! measured-gateset pipeline can be exercised end to end and compared
//! against best-fit standard noise models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::channels::{depolarizing, KrausChannel};
use crate::circuit::{attach_noise, Circuit, Gate, GateNoise, NoisePolicy, StandardNoiseParams};
use crate::dense::simulate_dense;
use crate::error::{CoreError, Result};
use crate::metrics::jsd;
use crate::qpt::{synthetic_record, QptRecord};

/// Hidden full CZ process of the synthetic device.
#[derive(Debug, Clone)]
pub struct SyntheticDevice {
    hidden: KrausChannel,
}

impl SyntheticDevice {
    /// Device whose CZ gates suffer a coherent controlled-phase
    /// overrotation followed by weak two-sided depolarization. The
    /// coherent part cannot be expressed by depolarizing/relaxation
    /// models, which is the point.
    pub fn with_default_hidden_noise() -> Result<Self> {
        Self::new(0.25, 0.03)
    }

    /// Device with CP(`overrotation`) ∘ dep(p)⊗dep(p) after the ideal CZ.
    pub fn new(overrotation: f64, dep_p: f64) -> Result<Self> {
        let cz = KrausChannel::from_operators(2, vec![Gate::cz(0, 1).unitary()?])?;
        let cp = KrausChannel::from_operators(2, vec![Gate::cp(0, 1, overrotation).unitary()?])?;
        let dep = depolarizing(dep_p)?;
        let dep2 = dep.tensor_product(&dep)?;
        let hidden = cz.then(&cp)?.then(&dep2)?;
        Ok(Self { hidden })
    }

    /// The complete hidden process for one CZ gate.
    pub fn hidden_process(&self) -> &KrausChannel {
        &self.hidden
    }

    /// Export exact χ records of the hidden CZ process for the given
    /// physical pairs.
    pub fn export_records(&self, pairs: &[(usize, usize)], timestamp: &str) -> Result<Vec<QptRecord>> {
        pairs
            .iter()
            .map(|&(a, b)| synthetic_record("CZ", &[a, b], &self.hidden, timestamp))
            .collect()
    }

    /// Ground-truth output distribution: the circuit with every CZ
    /// replaced by the hidden process, simulated densely.
    pub fn ground_truth_distribution(&self, circuit: &Circuit) -> Result<Vec<f64>> {
        let mut noisy = circuit.clone();
        for g in noisy.gates.iter_mut() {
            if g.is_two_qubit() {
                if g.kind != crate::circuit::GateKind::CZ {
                    return Err(CoreError::Parameter(
                        "synthetic device circuits must use CZ two-qubit gates".into(),
                    ));
                }
                g.noise = Some(GateNoise::Replace(self.hidden.clone()));
            }
        }
        Ok(simulate_dense(&noisy)?.probabilities())
    }
}

/// A probe circuit in hardware form: seeded random RY/RX single-qubit
/// layers interleaved with CZ gates on adjacent pairs.
pub fn probe_circuit(n_qubits: usize, layers: usize, seed: u64) -> Result<Circuit> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut circ = Circuit::new(n_qubits);
    for q in 0..n_qubits {
        circ.push(Gate::ry(q, rng.gen_range(-1.5..1.5)))?;
    }
    for layer in 0..layers {
        let start = layer % 2;
        let mut q = start;
        while q + 1 < n_qubits {
            circ.push(Gate::cz(q, q + 1))?;
            q += 2;
        }
        for q in 0..n_qubits {
            circ.push(Gate::rx(q, rng.gen_range(-1.5..1.5)))?;
        }
    }
    Ok(circ)
}

/// Best-fit outcome of a scalar standard noise model.
#[derive(Debug, Clone)]
pub struct StandardFit {
    pub depolarizing_p: f64,
    pub jsd: f64,
    pub epochs: usize,
}

/// Fit the single depolarizing strength of the General model to a target
/// distribution by the same plain gradient descent used elsewhere
/// (central finite differences on the scalar), and report the best JSD
/// reached.
pub fn fit_standard_model(
    circuit: &Circuit,
    truth: &[f64],
    epochs: usize,
    learning_rate: f64,
    initial_p: f64,
) -> Result<StandardFit> {
    if epochs == 0 {
        return Err(CoreError::Parameter("epochs must be >= 1".into()));
    }
    let eval = |p: f64| -> Result<f64> {
        let params = StandardNoiseParams::depolarizing_only(p.clamp(0.0, 0.999));
        let noisy = attach_noise(circuit, &NoisePolicy::general(params))?;
        let probs = simulate_dense(&noisy)?.probabilities();
        jsd(&probs, truth)
    };
    let h = 1e-4;
    let mut p = initial_p.clamp(0.0, 0.999);
    let mut best_p = p;
    let mut best = eval(p)?;
    for _ in 0..epochs {
        let plus = eval((p + h).min(0.999))?;
        let minus = eval((p - h).max(0.0))?;
        let grad = (plus - minus) / (2.0 * h);
        p = (p - learning_rate * grad).clamp(0.0, 0.999);
        let value = eval(p)?;
        if !value.is_finite() {
            return Err(CoreError::Diverged { epoch: 0, reason: format!("jsd = {value}") });
        }
        if value < best {
            best = value;
            best_p = p;
        }
    }
    Ok(StandardFit { depolarizing_p: best_p, jsd: best, epochs })
}
