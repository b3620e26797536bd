//! Parametrized circuit templates and plain gradient descent with
//! finite-difference or parameter-shift gradients.

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, GateKind};
use crate::error::{CoreError, Result};

/// Angle of a template gate: fixed, or an affine function of one
/// parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AngleExpr {
    Const(f64),
    /// `coeff * params[index]`.
    Param { index: usize, coeff: f64 },
}

/// One gate of a parametrized circuit.
#[derive(Debug, Clone)]
pub struct TemplateGate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub angle: Option<AngleExpr>,
}

/// A circuit whose rotation angles are affine in a parameter vector.
#[derive(Debug, Clone)]
pub struct CircuitTemplate {
    n_qubits: usize,
    gates: Vec<TemplateGate>,
    n_params: usize,
}

impl CircuitTemplate {
    pub fn new(n_qubits: usize, gates: Vec<TemplateGate>, n_params: usize) -> Result<Self> {
        for g in &gates {
            match g.angle {
                Some(AngleExpr::Param { index, .. }) if index >= n_params => {
                    return Err(CoreError::Parameter(format!(
                        "gate references parameter {index} but only {n_params} exist"
                    )));
                }
                Some(_) if g.kind.param_count() != 1 => {
                    return Err(CoreError::Parameter(format!(
                        "{} takes no angle",
                        g.kind.label()
                    )));
                }
                None if g.kind.param_count() == 1 => {
                    return Err(CoreError::Parameter(format!(
                        "{} needs an angle",
                        g.kind.label()
                    )));
                }
                _ => {}
            }
        }
        Ok(Self { n_qubits, gates, n_params })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn gates(&self) -> &[TemplateGate] {
        &self.gates
    }

    fn build_inner(&self, params: &[f64], shift: Option<(usize, f64)>) -> Result<Circuit> {
        if params.len() != self.n_params {
            return Err(CoreError::Parameter(format!(
                "expected {} parameters, got {}",
                self.n_params,
                params.len()
            )));
        }
        let mut circ = Circuit::new(self.n_qubits);
        for (gi, g) in self.gates.iter().enumerate() {
            let angle = g.angle.map(|expr| {
                let base = match expr {
                    AngleExpr::Const(v) => v,
                    AngleExpr::Param { index, coeff } => coeff * params[index],
                };
                match shift {
                    Some((idx, delta)) if idx == gi => base + delta,
                    _ => base,
                }
            });
            let gate = match (g.kind, angle) {
                (GateKind::H, None) => Gate::h(g.qubits[0]),
                (GateKind::RX, Some(a)) => Gate::rx(g.qubits[0], a),
                (GateKind::RY, Some(a)) => Gate::ry(g.qubits[0], a),
                (GateKind::RZ, Some(a)) => Gate::rz(g.qubits[0], a),
                (GateKind::CZ, None) => Gate::cz(g.qubits[0], g.qubits[1]),
                (GateKind::CP, Some(a)) => Gate::cp(g.qubits[0], g.qubits[1], a),
                (GateKind::CNOT, None) => Gate::cnot(g.qubits[0], g.qubits[1]),
                (GateKind::RZZ, Some(a)) => Gate::rzz(g.qubits[0], g.qubits[1], a),
                (GateKind::SWAP, None) => Gate::swap(g.qubits[0], g.qubits[1]),
                (kind, _) => {
                    return Err(CoreError::Parameter(format!(
                        "template cannot instantiate {}",
                        kind.label()
                    )))
                }
            };
            circ.push(gate)?;
        }
        Ok(circ)
    }

    /// Instantiate the circuit at a parameter point.
    pub fn build(&self, params: &[f64]) -> Result<Circuit> {
        self.build_inner(params, None)
    }

    /// Instantiate with the angle of one gate (by template position)
    /// shifted by `delta`; used by the parameter-shift rule.
    pub fn build_with_gate_shift(
        &self,
        params: &[f64],
        gate_index: usize,
        delta: f64,
    ) -> Result<Circuit> {
        self.build_inner(params, Some((gate_index, delta)))
    }

    /// Gate kinds of the form exp(iθG) with G² = I, for which the shift
    /// rule is exact.
    fn shift_rule_applies(kind: GateKind) -> bool {
        matches!(kind, GateKind::RX | GateKind::RY | GateKind::RZ | GateKind::RZZ)
    }
}

/// Gradient estimation method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GradientMethod {
    /// Central finite differences with step `h` (radians).
    FiniteDifference { h: f64 },
    /// Exact shift rule for gates exp(iθG) with G² = I; valid for losses
    /// that are linear in the evolved density matrix.
    ParameterShift,
}

impl Default for GradientMethod {
    fn default() -> Self {
        GradientMethod::FiniteDifference { h: 1e-3 }
    }
}

/// Optimization loss selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    /// Jensen-Shannon divergence of the output distribution to a target.
    JsdToTarget,
    /// −C for MaxCut, from Pauli-ZZ expectations.
    NegativeCutExpectation,
    /// 1 − F against a target density matrix.
    Infidelity,
}

/// Plain gradient-descent configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub gradient: GradientMethod,
    pub seed: u64,
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(CoreError::Parameter("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(CoreError::Parameter("learning rate must be positive".into()));
        }
        if let GradientMethod::FiniteDifference { h } = self.gradient {
            if !(h > 0.0) {
                return Err(CoreError::Parameter("finite-difference step must be positive".into()));
            }
        }
        Ok(())
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.2,
            gradient: GradientMethod::default(),
            seed: 0,
        }
    }
}

/// One row of an optimization trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub fidelity: Option<f64>,
}

/// Gradient of `loss` at `params` for the given method. The closure
/// evaluates the loss on an instantiated circuit.
pub fn gradient(
    template: &CircuitTemplate,
    params: &[f64],
    method: GradientMethod,
    loss: &mut dyn FnMut(&Circuit) -> Result<f64>,
) -> Result<Vec<f64>> {
    match method {
        GradientMethod::FiniteDifference { h } => {
            let mut grad = vec![0.0; params.len()];
            let mut work = params.to_vec();
            for i in 0..params.len() {
                work[i] = params[i] + h;
                let plus = loss(&template.build(&work)?)?;
                work[i] = params[i] - h;
                let minus = loss(&template.build(&work)?)?;
                work[i] = params[i];
                grad[i] = (plus - minus) / (2.0 * h);
            }
            Ok(grad)
        }
        GradientMethod::ParameterShift => {
            let mut grad = vec![0.0; params.len()];
            for (gi, g) in template.gates().iter().enumerate() {
                let Some(AngleExpr::Param { index, coeff }) = g.angle else {
                    continue;
                };
                if !CircuitTemplate::shift_rule_applies(g.kind) {
                    return Err(CoreError::Config(format!(
                        "parameter-shift does not apply to {}",
                        g.kind.label()
                    )));
                }
                let plus = loss(&template.build_with_gate_shift(
                    params,
                    gi,
                    std::f64::consts::FRAC_PI_4,
                )?)?;
                let minus = loss(&template.build_with_gate_shift(
                    params,
                    gi,
                    -std::f64::consts::FRAC_PI_4,
                )?)?;
                // d/dθ of a + b cos2θ + c sin2θ equals the ±π/4 difference;
                // the chain rule adds the affine coefficient.
                grad[index] += coeff * (plus - minus);
            }
            Ok(grad)
        }
    }
}

/// Minimize `loss` by plain gradient descent, recording the trace. The
/// optional `observer` computes the per-epoch fidelity column.
pub fn minimize(
    template: &CircuitTemplate,
    initial: &[f64],
    opt: &OptimizerConfig,
    loss: &mut dyn FnMut(&Circuit) -> Result<f64>,
    observer: &mut dyn FnMut(&Circuit) -> Result<Option<f64>>,
) -> Result<(Vec<f64>, Vec<EpochRecord>)> {
    opt.validate()?;
    let mut params = initial.to_vec();
    let mut trace = Vec::with_capacity(opt.epochs + 1);
    for epoch in 0..=opt.epochs {
        let circuit = template.build(&params)?;
        let value = loss(&circuit)?;
        if !value.is_finite() {
            return Err(CoreError::Diverged { epoch, reason: format!("loss = {value}") });
        }
        let fid = observer(&circuit)?;
        trace.push(EpochRecord { epoch, loss: value, fidelity: fid });
        if epoch == opt.epochs {
            break;
        }
        let grad = gradient(template, &params, opt.gradient, loss)?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(CoreError::Diverged { epoch, reason: "non-finite gradient".into() });
        }
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= opt.learning_rate * g;
        }
    }
    Ok((params, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_rx_template() -> CircuitTemplate {
        CircuitTemplate::new(
            1,
            vec![TemplateGate {
                kind: GateKind::RX,
                qubits: vec![0],
                angle: Some(AngleExpr::Param { index: 0, coeff: 1.0 }),
            }],
            1,
        )
        .unwrap()
    }

    /// <Z> after RX(θ) on |0> equals cos(2θ) in the exp(iθX) convention.
    fn z_expectation(circ: &Circuit) -> Result<f64> {
        let st = crate::mpdo::run_circuit(circ, crate::mpdo::TruncationConfig::default())?;
        st.expectation("Z")
    }

    #[test]
    fn finite_difference_matches_analytic_derivative() {
        let t = single_rx_template();
        let theta = 0.37;
        let grad = gradient(
            &t,
            &[theta],
            GradientMethod::FiniteDifference { h: 1e-4 },
            &mut z_expectation,
        )
        .unwrap();
        let want = -2.0 * (2.0 * theta).sin();
        assert!((grad[0] - want).abs() < 1e-6);
    }

    #[test]
    fn parameter_shift_is_exact() {
        let t = single_rx_template();
        let theta = 0.37;
        let grad = gradient(&t, &[theta], GradientMethod::ParameterShift, &mut z_expectation)
            .unwrap();
        let want = -2.0 * (2.0 * theta).sin();
        assert!((grad[0] - want).abs() < 1e-12);
    }

    #[test]
    fn shared_parameter_gradients_accumulate() {
        // Two RX gates on different qubits sharing one parameter:
        // loss = <Z0> + <Z1> = 2 cos(2θ).
        let t = CircuitTemplate::new(
            2,
            vec![
                TemplateGate {
                    kind: GateKind::RX,
                    qubits: vec![0],
                    angle: Some(AngleExpr::Param { index: 0, coeff: 1.0 }),
                },
                TemplateGate {
                    kind: GateKind::RX,
                    qubits: vec![1],
                    angle: Some(AngleExpr::Param { index: 0, coeff: 1.0 }),
                },
            ],
            1,
        )
        .unwrap();
        let mut loss = |c: &Circuit| -> Result<f64> {
            let st = crate::mpdo::run_circuit(c, crate::mpdo::TruncationConfig::default())?;
            Ok(st.expectation("ZI")? + st.expectation("IZ")?)
        };
        let theta = 0.61;
        let ps = gradient(&t, &[theta], GradientMethod::ParameterShift, &mut loss).unwrap();
        let fd = gradient(
            &t,
            &[theta],
            GradientMethod::FiniteDifference { h: 1e-4 },
            &mut loss,
        )
        .unwrap();
        let want = -4.0 * (2.0 * theta).sin();
        assert!((ps[0] - want).abs() < 1e-12);
        assert!((fd[0] - want).abs() < 1e-5);
    }

    #[test]
    fn scaled_parameter_uses_chain_rule() {
        // RZZ angle = 0.5 * β as in the MaxCut edge unitary.
        let t = CircuitTemplate::new(
            2,
            vec![
                TemplateGate { kind: GateKind::H, qubits: vec![0], angle: None },
                TemplateGate {
                    kind: GateKind::RZZ,
                    qubits: vec![0, 1],
                    angle: Some(AngleExpr::Param { index: 0, coeff: 0.5 }),
                },
                TemplateGate {
                    kind: GateKind::RX,
                    qubits: vec![0],
                    angle: Some(AngleExpr::Const(0.3)),
                },
            ],
            1,
        )
        .unwrap();
        let mut loss = |c: &Circuit| -> Result<f64> {
            let st = crate::mpdo::run_circuit(c, crate::mpdo::TruncationConfig::default())?;
            st.expectation("ZZ")
        };
        let beta = 0.83;
        let ps = gradient(&t, &[beta], GradientMethod::ParameterShift, &mut loss).unwrap();
        let fd = gradient(
            &t,
            &[beta],
            GradientMethod::FiniteDifference { h: 1e-5 },
            &mut loss,
        )
        .unwrap();
        assert!((ps[0] - fd[0]).abs() < 1e-7, "ps {} fd {}", ps[0], fd[0]);
    }

    #[test]
    fn minimize_descends_simple_landscape() {
        // Minimize <Z> = cos 2θ starting near 0; optimum -1 at θ = π/2.
        let t = single_rx_template();
        let opt = OptimizerConfig {
            epochs: 100,
            learning_rate: 0.1,
            gradient: GradientMethod::ParameterShift,
            seed: 0,
        };
        let (params, trace) =
            minimize(&t, &[0.3], &opt, &mut z_expectation, &mut |_| Ok(None)).unwrap();
        assert!(trace.last().unwrap().loss < -0.999);
        assert!(((params[0] - std::f64::consts::FRAC_PI_2).abs() < 0.05)
            || ((params[0] + std::f64::consts::FRAC_PI_2).abs() < 0.05));
        assert!(trace.last().unwrap().loss <= trace[0].loss);
    }

    #[test]
    fn fixed_point_has_zero_gradient() {
        let t = single_rx_template();
        // θ = π/2 is a stationary point of cos 2θ... gradient -2 sin(π) = 0.
        let grad = gradient(
            &t,
            &[std::f64::consts::FRAC_PI_2],
            GradientMethod::ParameterShift,
            &mut z_expectation,
        )
        .unwrap();
        assert!(grad[0].abs() < 1e-12);
    }

    #[test]
    fn invalid_config_rejected() {
        let bad = OptimizerConfig { epochs: 0, ..OptimizerConfig::default() };
        assert!(bad.validate().is_err());
        let bad = OptimizerConfig { learning_rate: 0.0, ..OptimizerConfig::default() };
        assert!(bad.validate().is_err());
    }
}
