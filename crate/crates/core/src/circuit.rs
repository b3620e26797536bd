//! Circuit representation: gates, CNOT→CZ compilation, SWAP routing onto a
//! 1D chain, crosstalk injection, and noise-attachment policies.
//!
//! Rotation conventions: `RX(θ) = exp(iθX)`, `RY(θ) = exp(iθY)`,
//! `RZ(θ) = exp(iθZ)`, `RZZ(γ) = exp(iγ Z⊗Z)`. In a two-qubit gate the
//! first listed qubit is the most significant index of the 4×4 matrix;
//! for controlled gates it is the control.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channels::{bit_flip, depolarizing, thermal_relaxation, KrausChannel};
use crate::error::{CoreError, Result};
use crate::tensor::{C64, ComplexTensor};

/// Lower bound (exclusive) of the default crosstalk angle range, in rad.
pub const CROSSTALK_RANGE_LO: f64 = 1e-5 * std::f64::consts::PI;
/// Upper bound (inclusive) of the default crosstalk angle range, in rad.
pub const CROSSTALK_RANGE_HI: f64 = 1e-3 * std::f64::consts::PI;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    H,
    RX,
    RY,
    RZ,
    CZ,
    CP,
    CNOT,
    RZZ,
    SWAP,
    CustomUnitary,
}

impl GateKind {
    pub fn arity(&self) -> usize {
        match self {
            GateKind::H | GateKind::RX | GateKind::RY | GateKind::RZ => 1,
            GateKind::CZ | GateKind::CP | GateKind::CNOT | GateKind::RZZ | GateKind::SWAP => 2,
            GateKind::CustomUnitary => 0, // determined by the matrix
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            GateKind::RX | GateKind::RY | GateKind::RZ | GateKind::CP | GateKind::RZZ => 1,
            _ => 0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::RX => "RX",
            GateKind::RY => "RY",
            GateKind::RZ => "RZ",
            GateKind::CZ => "CZ",
            GateKind::CP => "CP",
            GateKind::CNOT => "CNOT",
            GateKind::RZZ => "RZZ",
            GateKind::SWAP => "SWAP",
            GateKind::CustomUnitary => "CUSTOM",
        }
    }

    /// Symmetric two-qubit gates may match gateset records in either qubit
    /// order.
    pub fn is_symmetric(&self) -> bool {
        matches!(self, GateKind::CZ | GateKind::CP | GateKind::RZZ | GateKind::SWAP)
    }
}

/// How a noise channel modifies a gate during simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum GateNoise {
    /// Channel applied after the ideal unitary.
    After(KrausChannel),
    /// Measured process that replaces the gate entirely (the channel
    /// already contains the gate action).
    Replace(KrausChannel),
}

/// Distinguishes executed gates from injected crosstalk phases, which
/// never receive noise of their own.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateTag {
    Physical,
    Crosstalk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub params: Vec<f64>,
    pub qubits: Vec<usize>,
    pub noise: Option<GateNoise>,
    pub matrix: Option<ComplexTensor>,
    pub tag: GateTag,
}

impl Gate {
    fn bare(kind: GateKind, params: Vec<f64>, qubits: Vec<usize>) -> Self {
        Self { kind, params, qubits, noise: None, matrix: None, tag: GateTag::Physical }
    }

    pub fn h(q: usize) -> Self {
        Self::bare(GateKind::H, vec![], vec![q])
    }
    pub fn rx(q: usize, theta: f64) -> Self {
        Self::bare(GateKind::RX, vec![theta], vec![q])
    }
    pub fn ry(q: usize, theta: f64) -> Self {
        Self::bare(GateKind::RY, vec![theta], vec![q])
    }
    pub fn rz(q: usize, theta: f64) -> Self {
        Self::bare(GateKind::RZ, vec![theta], vec![q])
    }
    pub fn cz(a: usize, b: usize) -> Self {
        Self::bare(GateKind::CZ, vec![], vec![a, b])
    }
    pub fn cp(a: usize, b: usize, phi: f64) -> Self {
        Self::bare(GateKind::CP, vec![phi], vec![a, b])
    }
    pub fn cnot(control: usize, target: usize) -> Self {
        Self::bare(GateKind::CNOT, vec![], vec![control, target])
    }
    pub fn rzz(a: usize, b: usize, gamma: f64) -> Self {
        Self::bare(GateKind::RZZ, vec![gamma], vec![a, b])
    }
    pub fn swap(a: usize, b: usize) -> Self {
        Self::bare(GateKind::SWAP, vec![], vec![a, b])
    }
    pub fn custom(qubits: Vec<usize>, matrix: ComplexTensor) -> Self {
        Self {
            kind: GateKind::CustomUnitary,
            params: vec![],
            qubits,
            noise: None,
            matrix: Some(matrix),
            tag: GateTag::Physical,
        }
    }

    pub fn arity(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_two_qubit(&self) -> bool {
        self.qubits.len() == 2
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.kind != GateKind::CustomUnitary {
            if self.qubits.len() != self.kind.arity() {
                return Err(CoreError::Parameter(format!(
                    "{} expects {} qubits, got {}",
                    self.kind.label(),
                    self.kind.arity(),
                    self.qubits.len()
                )));
            }
            if self.params.len() != self.kind.param_count() {
                return Err(CoreError::Parameter(format!(
                    "{} expects {} parameters, got {}",
                    self.kind.label(),
                    self.kind.param_count(),
                    self.params.len()
                )));
            }
        } else {
            let m = self
                .matrix
                .as_ref()
                .ok_or_else(|| CoreError::Parameter("custom gate needs a matrix".into()))?;
            let d = 1usize << self.qubits.len();
            if m.shape() != [d, d] {
                return Err(CoreError::Shape(format!(
                    "custom gate matrix shape {:?} does not match {} qubits",
                    m.shape(),
                    self.qubits.len()
                )));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for &q in &self.qubits {
            if q >= n_qubits {
                return Err(CoreError::Parameter(format!(
                    "qubit {q} out of range for {n_qubits}-qubit circuit"
                )));
            }
            if !seen.insert(q) {
                return Err(CoreError::Parameter(format!("duplicate qubit {q} in gate")));
            }
        }
        Ok(())
    }

    /// The exact unitary of this gate in its own qubit ordering.
    pub fn unitary(&self) -> Result<ComplexTensor> {
        let u = match self.kind {
            GateKind::H => {
                let s = 0.5f64.sqrt();
                ComplexTensor::matrix_from_rows(&[
                    &[c(s, 0.0), c(s, 0.0)],
                    &[c(s, 0.0), c(-s, 0.0)],
                ])?
            }
            GateKind::RX => {
                let t = self.params[0];
                ComplexTensor::matrix_from_rows(&[
                    &[c(t.cos(), 0.0), c(0.0, t.sin())],
                    &[c(0.0, t.sin()), c(t.cos(), 0.0)],
                ])?
            }
            GateKind::RY => {
                let t = self.params[0];
                ComplexTensor::matrix_from_rows(&[
                    &[c(t.cos(), 0.0), c(t.sin(), 0.0)],
                    &[c(-t.sin(), 0.0), c(t.cos(), 0.0)],
                ])?
            }
            GateKind::RZ => {
                let t = self.params[0];
                ComplexTensor::matrix_from_rows(&[
                    &[C64::from_polar(1.0, t), c(0.0, 0.0)],
                    &[c(0.0, 0.0), C64::from_polar(1.0, -t)],
                ])?
            }
            GateKind::CZ => {
                let mut m = ComplexTensor::identity(4);
                m.set(&[3, 3], c(-1.0, 0.0));
                m
            }
            GateKind::CP => {
                let mut m = ComplexTensor::identity(4);
                m.set(&[3, 3], C64::from_polar(1.0, self.params[0]));
                m
            }
            GateKind::CNOT => {
                let mut m = ComplexTensor::zeros(vec![4, 4]);
                m.set(&[0, 0], c(1.0, 0.0));
                m.set(&[1, 1], c(1.0, 0.0));
                m.set(&[2, 3], c(1.0, 0.0));
                m.set(&[3, 2], c(1.0, 0.0));
                m
            }
            GateKind::RZZ => {
                let g = self.params[0];
                let mut m = ComplexTensor::zeros(vec![4, 4]);
                m.set(&[0, 0], C64::from_polar(1.0, g));
                m.set(&[1, 1], C64::from_polar(1.0, -g));
                m.set(&[2, 2], C64::from_polar(1.0, -g));
                m.set(&[3, 3], C64::from_polar(1.0, g));
                m
            }
            GateKind::SWAP => {
                let mut m = ComplexTensor::zeros(vec![4, 4]);
                m.set(&[0, 0], c(1.0, 0.0));
                m.set(&[1, 2], c(1.0, 0.0));
                m.set(&[2, 1], c(1.0, 0.0));
                m.set(&[3, 3], c(1.0, 0.0));
                m
            }
            GateKind::CustomUnitary => self
                .matrix
                .clone()
                .ok_or_else(|| CoreError::Parameter("custom gate without matrix".into()))?,
        };
        Ok(u)
    }
}

/// An ordered gate list over a register of qubits, with optional SPAM
/// channels at preparation and measurement.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
    pub prep_noise: Vec<Option<KrausChannel>>,
    pub meas_noise: Vec<Option<KrausChannel>>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
            prep_noise: vec![None; n_qubits],
            meas_noise: vec![None; n_qubits],
        }
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn with_gates(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut circ = Self::new(n_qubits);
        for g in gates {
            circ.push(g)?;
        }
        Ok(circ)
    }

    /// Count of two-qubit gates.
    pub fn two_qubit_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_two_qubit()).count()
    }
}

/// Embed a (2^k)×(2^k) operator acting on `qubits` into the full
/// 2^n-dimensional space. Qubit 0 is the most significant bit.
pub fn expand_to_full(op: &ComplexTensor, qubits: &[usize], n_qubits: usize) -> Result<ComplexTensor> {
    let k = qubits.len();
    let dk = 1usize << k;
    if op.shape() != [dk, dk] {
        return Err(CoreError::Shape(format!(
            "operator shape {:?} does not match {k} qubits",
            op.shape()
        )));
    }
    let n = n_qubits;
    let rest: Vec<usize> = (0..n).filter(|q| !qubits.contains(q)).collect();
    let d = 1usize << n;
    let mut full = ComplexTensor::zeros(vec![d, d]);
    let assemble = |gate_bits: usize, rest_bits: usize| -> usize {
        let mut out = 0usize;
        for (pos, &q) in qubits.iter().enumerate() {
            let bit = (gate_bits >> (k - 1 - pos)) & 1;
            out |= bit << (n - 1 - q);
        }
        for (pos, &q) in rest.iter().enumerate() {
            let bit = (rest_bits >> (rest.len() - 1 - pos)) & 1;
            out |= bit << (n - 1 - q);
        }
        out
    };
    for rg in 0..dk {
        for cg in 0..dk {
            let v = op.get(&[rg, cg]);
            if v.norm() == 0.0 {
                continue;
            }
            for rest_bits in 0..(1usize << rest.len()) {
                full.set(&[assemble(rg, rest_bits), assemble(cg, rest_bits)], v);
            }
        }
    }
    Ok(full)
}

/// Dense unitary of an ideal circuit (ignores attached noise). Guarded to
/// small registers; used for semantic-preservation checks.
pub fn dense_unitary(circuit: &Circuit) -> Result<ComplexTensor> {
    if circuit.n_qubits > 10 {
        return Err(CoreError::Resource(format!(
            "dense unitary limited to 10 qubits, got {}",
            circuit.n_qubits
        )));
    }
    let d = 1usize << circuit.n_qubits;
    let mut u = ComplexTensor::identity(d);
    for g in &circuit.gates {
        let full = expand_to_full(&g.unitary()?, &g.qubits, circuit.n_qubits)?;
        u = full.matmul(&u)?;
    }
    Ok(u)
}

/// Replace every CNOT(c,t) by RY(π/4) on t, CZ(c,t), RY(−π/4) on t. The
/// composite equals CNOT exactly.
pub fn compile_cnot(circuit: &Circuit) -> Circuit {
    let mut out = Circuit::new(circuit.n_qubits);
    out.prep_noise = circuit.prep_noise.clone();
    out.meas_noise = circuit.meas_noise.clone();
    for g in &circuit.gates {
        if g.kind == GateKind::CNOT {
            let (ctrl, tgt) = (g.qubits[0], g.qubits[1]);
            out.gates.push(Gate::ry(tgt, std::f64::consts::FRAC_PI_4));
            let mut cz = Gate::cz(ctrl, tgt);
            cz.noise = g.noise.clone();
            out.gates.push(cz);
            out.gates.push(Gate::ry(tgt, -std::f64::consts::FRAC_PI_4));
        } else {
            out.gates.push(g.clone());
        }
    }
    out
}

/// Rewrite RZZ and SWAP into CNOT-based forms so that, combined with
/// [`compile_cnot`], every two-qubit gate becomes a CZ. Used before
/// attaching a measured gateset.
pub fn decompose_to_cnot_basis(circuit: &Circuit) -> Circuit {
    let mut out = Circuit::new(circuit.n_qubits);
    out.prep_noise = circuit.prep_noise.clone();
    out.meas_noise = circuit.meas_noise.clone();
    for g in &circuit.gates {
        match g.kind {
            GateKind::RZZ => {
                let (a, b) = (g.qubits[0], g.qubits[1]);
                out.gates.push(Gate::cnot(a, b));
                out.gates.push(Gate::rz(b, g.params[0]));
                out.gates.push(Gate::cnot(a, b));
            }
            GateKind::SWAP => {
                let (a, b) = (g.qubits[0], g.qubits[1]);
                out.gates.push(Gate::cnot(a, b));
                out.gates.push(Gate::cnot(b, a));
                out.gates.push(Gate::cnot(a, b));
            }
            _ => out.gates.push(g.clone()),
        }
    }
    out
}

/// Route every two-qubit gate onto adjacent sites by moving the lower
/// qubit up with a SWAP chain and moving it back afterwards.
pub fn route_to_adjacent(circuit: &Circuit) -> Circuit {
    let mut out = Circuit::new(circuit.n_qubits);
    out.prep_noise = circuit.prep_noise.clone();
    out.meas_noise = circuit.meas_noise.clone();
    for g in &circuit.gates {
        if !g.is_two_qubit() {
            out.gates.push(g.clone());
            continue;
        }
        let (a, b) = (g.qubits[0], g.qubits[1]);
        let (lo, hi) = (a.min(b), a.max(b));
        if hi - lo == 1 {
            out.gates.push(g.clone());
            continue;
        }
        for k in lo..hi - 1 {
            out.gates.push(Gate::swap(k, k + 1));
        }
        let mut moved = g.clone();
        moved.qubits = if a < b { vec![hi - 1, hi] } else { vec![hi, hi - 1] };
        out.gates.push(moved);
        for k in (lo..hi - 1).rev() {
            out.gates.push(Gate::swap(k, k + 1));
        }
    }
    out
}

/// Append a small random RZ after each two-qubit gate onto every existing
/// nearest neighbor of the gate's sites. Angles are drawn uniformly from
/// `(range.0, range.1]`; the draw order is gate order, neighbors
/// ascending, so a fixed seed reproduces the circuit exactly.
pub fn inject_crosstalk(circuit: &Circuit, seed: u64, range: (f64, f64)) -> Result<Circuit> {
    use rand::{Rng, SeedableRng};
    let (lo, hi) = range;
    if !(lo >= 0.0) || !(hi > lo) {
        return Err(CoreError::Parameter(format!(
            "crosstalk range must satisfy 0 <= lo < hi, got ({lo}, {hi})"
        )));
    }
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut out = Circuit::new(circuit.n_qubits);
    out.prep_noise = circuit.prep_noise.clone();
    out.meas_noise = circuit.meas_noise.clone();
    for g in &circuit.gates {
        out.gates.push(g.clone());
        if !g.is_two_qubit() || g.tag == GateTag::Crosstalk {
            continue;
        }
        let mut neighbors: Vec<usize> = Vec::new();
        for &q in &g.qubits {
            if q > 0 && !g.qubits.contains(&(q - 1)) {
                neighbors.push(q - 1);
            }
            if q + 1 < circuit.n_qubits && !g.qubits.contains(&(q + 1)) {
                neighbors.push(q + 1);
            }
        }
        neighbors.sort_unstable();
        neighbors.dedup();
        for q in neighbors {
            // Uniform on (lo, hi]: map u in [0,1) to hi - (hi-lo)*u.
            let u: f64 = rng.gen();
            let alpha = hi - (hi - lo) * u;
            let mut rz = Gate::rz(q, alpha);
            rz.tag = GateTag::Crosstalk;
            out.gates.push(rz);
        }
    }
    Ok(out)
}

/// Gate durations used by the duration-dependent thermal relaxation
/// channel, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateDurations {
    pub single: f64,
    pub two: f64,
}

impl Default for GateDurations {
    fn default() -> Self {
        Self { single: 30e-9, two: 60e-9 }
    }
}

/// Parameters of the standard (non-measured) noise models.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StandardNoiseParams {
    /// Depolarizing probability applied per gate.
    pub depolarizing_p: f64,
    /// Per-pair overrides (keys sorted), e.g. derived from calibration
    /// pair fidelities.
    pub pair_depolarizing: BTreeMap<(usize, usize), f64>,
    /// Per-qubit (t1, t2) in seconds; qubits absent from the map get no
    /// relaxation channel.
    pub relaxation: BTreeMap<usize, (f64, f64)>,
    /// Gate durations for the relaxation channel.
    pub durations: GateDurations,
    /// SPAM bit-flip probability at preparation and measurement.
    pub p_spam: f64,
    /// Per-qubit SPAM overrides (e.g. from per-qubit readout fidelity).
    pub spam_overrides: BTreeMap<usize, f64>,
}

impl StandardNoiseParams {
    pub fn depolarizing_only(p: f64) -> Self {
        Self { depolarizing_p: p, durations: GateDurations::default(), ..Self::default() }
    }

    fn pair_p(&self, a: usize, b: usize) -> f64 {
        let key = (a.min(b), a.max(b));
        self.pair_depolarizing.get(&key).copied().unwrap_or(self.depolarizing_p)
    }

    fn spam_p(&self, q: usize) -> f64 {
        self.spam_overrides.get(&q).copied().unwrap_or(self.p_spam)
    }
}

/// Key for measured gate records: (gate label, physical qubits).
pub type GatesetKey = (String, Vec<usize>);

/// Measured channels per (gate, qubit pair).
pub type Gateset = BTreeMap<GatesetKey, KrausChannel>;

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseMode {
    Ideal,
    Unified(StandardNoiseParams),
    General(StandardNoiseParams),
    QptGateset(Gateset),
}

/// Complete noise policy: a channel model plus optional crosstalk
/// injection range.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePolicy {
    pub mode: NoiseMode,
    pub crosstalk: Option<(f64, f64)>,
}

impl NoisePolicy {
    pub fn ideal() -> Self {
        Self { mode: NoiseMode::Ideal, crosstalk: None }
    }

    pub fn unified(params: StandardNoiseParams) -> Self {
        Self { mode: NoiseMode::Unified(params), crosstalk: None }
    }

    pub fn general(params: StandardNoiseParams) -> Self {
        Self { mode: NoiseMode::General(params), crosstalk: None }
    }

    pub fn qpt_gateset(gateset: Gateset) -> Self {
        Self { mode: NoiseMode::QptGateset(gateset), crosstalk: None }
    }

    pub fn with_crosstalk(mut self, range: (f64, f64)) -> Self {
        self.crosstalk = Some(range);
        self
    }

    pub fn is_ideal(&self) -> bool {
        matches!(self.mode, NoiseMode::Ideal)
    }
}

fn relaxation_channel(params: &StandardNoiseParams, qubit: usize, duration: f64) -> Result<Option<KrausChannel>> {
    match params.relaxation.get(&qubit) {
        Some(&(t1, t2)) => Ok(Some(thermal_relaxation(t1, t2, duration)?)),
        None => Ok(None),
    }
}

fn compose_opt(a: Option<KrausChannel>, b: Option<KrausChannel>) -> Result<Option<KrausChannel>> {
    match (a, b) {
        (Some(x), Some(y)) => Ok(Some(x.then(&y)?)),
        (Some(x), None) => Ok(Some(x)),
        (None, Some(y)) => Ok(Some(y)),
        (None, None) => Ok(None),
    }
}

fn lookup_gateset<'a>(gs: &'a Gateset, gate: &Gate) -> Option<&'a KrausChannel> {
    let key = (gate.kind.label().to_string(), gate.qubits.clone());
    if let Some(ch) = gs.get(&key) {
        return Some(ch);
    }
    if gate.kind.is_symmetric() && gate.qubits.len() == 2 {
        let rev = (gate.kind.label().to_string(), vec![gate.qubits[1], gate.qubits[0]]);
        return gs.get(&rev);
    }
    None
}

/// Attach per-gate channels according to the policy. Crosstalk-tagged
/// gates always stay ideal.
pub fn attach_noise(circuit: &Circuit, policy: &NoisePolicy) -> Result<Circuit> {
    let mut out = circuit.clone();
    out.prep_noise.resize(circuit.n_qubits, None);
    out.meas_noise.resize(circuit.n_qubits, None);
    match &policy.mode {
        NoiseMode::Ideal => return Ok(out),
        NoiseMode::Unified(params) | NoiseMode::General(params) => {
            let both_lines = matches!(policy.mode, NoiseMode::General(_));
            for q in 0..circuit.n_qubits {
                let p = params.spam_p(q);
                if p > 0.0 {
                    let spam = bit_flip(p)?;
                    out.prep_noise[q] = Some(spam.clone());
                    out.meas_noise[q] = Some(spam);
                }
            }
            for g in out.gates.iter_mut() {
                if g.tag == GateTag::Crosstalk {
                    continue;
                }
                let noise = match g.qubits.len() {
                    1 => {
                        let q = g.qubits[0];
                        let trc = relaxation_channel(params, q, params.durations.single)?;
                        let dep = if params.depolarizing_p > 0.0 {
                            Some(depolarizing(params.depolarizing_p)?)
                        } else {
                            None
                        };
                        compose_opt(trc, dep)?
                    }
                    2 => {
                        let (a, b) = (g.qubits[0], g.qubits[1]);
                        let trc_a = relaxation_channel(params, a, params.durations.two)?
                            .unwrap_or_else(|| KrausChannel::identity(1));
                        let trc_b = relaxation_channel(params, b, params.durations.two)?
                            .unwrap_or_else(|| KrausChannel::identity(1));
                        let trc = trc_a.tensor_product(&trc_b)?;
                        let p = params.pair_p(a, b);
                        let dep = if p > 0.0 {
                            let d1 = depolarizing(p)?;
                            // Unified: depolarizing on the target line only;
                            // General: on both lines.
                            Some(if both_lines {
                                d1.tensor_product(&d1)?
                            } else {
                                KrausChannel::identity(1).tensor_product(&d1)?
                            })
                        } else {
                            None
                        };
                        let composed = compose_opt(Some(trc), dep)?.unwrap();
                        if composed.rank() == 1
                            && composed.operators()[0].dist(&ComplexTensor::identity(4)) < 1e-15
                        {
                            None
                        } else {
                            Some(composed)
                        }
                    }
                    _ => None,
                };
                g.noise = noise.map(GateNoise::After);
            }
        }
        NoiseMode::QptGateset(gs) => {
            for g in out.gates.iter_mut() {
                if g.tag == GateTag::Crosstalk || !g.is_two_qubit() {
                    continue;
                }
                match lookup_gateset(gs, g) {
                    Some(ch) => g.noise = Some(GateNoise::Replace(ch.clone())),
                    None => {
                        return Err(CoreError::Config(format!(
                            "no measured record for gate {} on qubits {:?}",
                            g.kind.label(),
                            g.qubits
                        )))
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Full preparation pipeline: decompose to the hardware basis when a
/// measured gateset is in play, route to the chain, inject crosstalk, and
/// attach channels.
pub fn prepare_circuit(circuit: &Circuit, policy: &NoisePolicy, seed: u64) -> Result<Circuit> {
    let gateset_mode = matches!(policy.mode, NoiseMode::QptGateset(_));
    let mut c = circuit.clone();
    if gateset_mode {
        c = decompose_to_cnot_basis(&c);
    }
    c = route_to_adjacent(&c);
    if gateset_mode {
        // Routing may have introduced SWAPs; bring them into CZ form too.
        c = decompose_to_cnot_basis(&c);
        c = compile_cnot(&c);
    }
    if let Some(range) = policy.crosstalk {
        c = inject_crosstalk(&c, seed, range)?;
    }
    attach_noise(&c, policy)
}

/// Serialized circuit schema (version 1): gate kinds by name, angles in
/// radians, qubit indices with 0 the most significant bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CircuitFile {
    pub schema_version: u32,
    pub n_qubits: usize,
    pub gates: Vec<GateEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateEntry {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
    pub qubits: Vec<usize>,
}

impl CircuitFile {
    pub fn to_circuit(&self) -> Result<Circuit> {
        if self.schema_version != 1 {
            return Err(CoreError::Schema(format!(
                "unsupported circuit schema version {}",
                self.schema_version
            )));
        }
        let mut circ = Circuit::new(self.n_qubits);
        for e in &self.gates {
            let kind = match e.kind.as_str() {
                "H" => GateKind::H,
                "RX" => GateKind::RX,
                "RY" => GateKind::RY,
                "RZ" => GateKind::RZ,
                "CZ" => GateKind::CZ,
                "CP" => GateKind::CP,
                "CNOT" => GateKind::CNOT,
                "RZZ" => GateKind::RZZ,
                "SWAP" => GateKind::SWAP,
                other => {
                    return Err(CoreError::Schema(format!("unknown gate kind {other:?}")))
                }
            };
            circ.push(Gate::bare(kind, e.params.clone(), e.qubits.clone()))?;
        }
        Ok(circ)
    }

    pub fn from_circuit(circuit: &Circuit, seed: Option<u64>) -> Result<Self> {
        let mut gates = Vec::with_capacity(circuit.gates.len());
        for g in &circuit.gates {
            if g.kind == GateKind::CustomUnitary {
                return Err(CoreError::Schema("custom gates are not serializable".into()));
            }
            gates.push(GateEntry {
                kind: g.kind.label().to_string(),
                params: g.params.clone(),
                qubits: g.qubits.clone(),
            });
        }
        Ok(Self { schema_version: 1, n_qubits: circuit.n_qubits, gates, seed })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| CoreError::Parse(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CoreError::Parse(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}
