//! Brute-force full density-matrix simulator. Deliberately the slow,
//! obviously-correct path: it serves as ground truth for the MPDO engine
//! and the channel conversions, and as the classical MaxCut reference.

use crate::channels::KrausChannel;
use crate::circuit::{Circuit, GateNoise};
use crate::error::{CoreError, Result};
use crate::tensor::{contract, C64, ComplexTensor};

/// Hard cap on dense density matrices (4^n entries).
pub const DENSE_QUBIT_CAP: usize = 10;

/// A full 2^n × 2^n density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    n_qubits: usize,
    rho: ComplexTensor,
}

impl DenseState {
    /// |0…0⟩⟨0…0|.
    pub fn ground(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > DENSE_QUBIT_CAP {
            return Err(CoreError::Resource(format!(
                "dense simulation supports 1..={DENSE_QUBIT_CAP} qubits, got {n_qubits}"
            )));
        }
        let d = 1usize << n_qubits;
        let mut rho = ComplexTensor::zeros(vec![d, d]);
        rho.set(&[0, 0], C64::new(1.0, 0.0));
        Ok(Self { n_qubits, rho })
    }

    /// Product state from per-qubit amplitudes (each normalized).
    pub fn from_product(local_states: &[Vec<C64>]) -> Result<Self> {
        let n = local_states.len();
        if n == 0 || n > DENSE_QUBIT_CAP {
            return Err(CoreError::Resource(format!(
                "dense simulation supports 1..={DENSE_QUBIT_CAP} qubits, got {n}"
            )));
        }
        let mut amp = vec![C64::new(1.0, 0.0)];
        for local in local_states {
            if local.len() != 2 {
                return Err(CoreError::Parameter("local states must be qubit amplitudes".into()));
            }
            let norm: f64 = local.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(CoreError::Parameter(format!(
                    "local state norm {norm} deviates from 1"
                )));
            }
            let mut next = Vec::with_capacity(amp.len() * 2);
            for a in &amp {
                for l in local {
                    next.push(a * l);
                }
            }
            amp = next;
        }
        let d = amp.len();
        let mut rho = ComplexTensor::zeros(vec![d, d]);
        for r in 0..d {
            for s in 0..d {
                rho.set(&[r, s], amp[r] * amp[s].conj());
            }
        }
        Ok(Self { n_qubits: n, rho })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn rho(&self) -> &ComplexTensor {
        &self.rho
    }

    pub fn into_rho(self) -> ComplexTensor {
        self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().unwrap().re
    }

    /// Diagonal of ρ, clipped at zero.
    pub fn probabilities(&self) -> Vec<f64> {
        let d = 1usize << self.n_qubits;
        (0..d).map(|i| self.rho.get(&[i, i]).re.max(0.0)).collect()
    }

    /// Apply one Kraus operator set on a subset of qubits:
    /// `ρ ← Σ_i K_i ρ K_i†`.
    pub fn apply_channel(&mut self, channel: &KrausChannel, qubits: &[usize]) -> Result<()> {
        if channel.n_qubits() != qubits.len() {
            return Err(CoreError::Shape(format!(
                "channel acts on {} qubits but {} indices were given",
                channel.n_qubits(),
                qubits.len()
            )));
        }
        let n = self.n_qubits;
        let d = 1usize << n;
        let mut acc = ComplexTensor::zeros(vec![d, d]);
        for k in channel.operators() {
            let term = apply_two_sided(&self.rho, k, qubits, n)?;
            acc = acc.add(&term)?;
        }
        self.rho = acc;
        Ok(())
    }

    /// Apply a unitary on a subset of qubits.
    pub fn apply_unitary(&mut self, u: &ComplexTensor, qubits: &[usize]) -> Result<()> {
        self.rho = apply_two_sided(&self.rho, u, qubits, self.n_qubits)?;
        Ok(())
    }
}

/// Compute `M ρ M†` for a k-local operator via tensor contraction, without
/// materializing the 2^n × 2^n embedding.
fn apply_two_sided(
    rho: &ComplexTensor,
    op: &ComplexTensor,
    qubits: &[usize],
    n: usize,
) -> Result<ComplexTensor> {
    let k = qubits.len();
    let d = 1usize << n;
    let op_t = op.clone().reshape(vec![2; 2 * k])?;
    let rho_t = rho.clone().reshape(vec![2; 2 * n])?;

    // Row side: contract op input axes with the row axes of rho.
    let op_in: Vec<usize> = (k..2 * k).collect();
    let rows: Vec<usize> = qubits.to_vec();
    let mut out = contract(&op_t, &op_in, &rho_t, &rows)?;
    out = restore_axes(out, &rows, 2 * n, k)?;

    // Column side: contract conj(op) input axes with the column axes.
    let cols: Vec<usize> = qubits.iter().map(|&q| n + q).collect();
    let mut out2 = contract(&op_t.conj(), &op_in, &out, &cols)?;
    out2 = restore_axes(out2, &cols, 2 * n, k)?;

    out2.reshape(vec![d, d])
}

/// After a contraction that removed `removed` axes and prepended `k` new
/// ones, permute so the new axes sit where the removed ones were.
fn restore_axes(t: ComplexTensor, removed: &[usize], total: usize, k: usize) -> Result<ComplexTensor> {
    let remaining: Vec<usize> = (0..total).filter(|a| !removed.contains(a)).collect();
    // Current order: new axes (k of them) then `remaining`. Build the
    // permutation that reads each original position from the current one.
    let mut perm = Vec::with_capacity(total);
    for orig in 0..total {
        if let Some(j) = removed.iter().position(|&r| r == orig) {
            perm.push(j);
        } else {
            let j = remaining.iter().position(|&r| r == orig).unwrap();
            perm.push(k + j);
        }
    }
    t.permute(&perm)
}

/// Simulate a circuit whose gates may carry attached channels. Ideal gates
/// act as a single unitary Kraus operator; preparation and measurement
/// channels are applied before and after the gate list.
pub fn simulate_dense(circuit: &Circuit) -> Result<DenseState> {
    simulate_dense_from(circuit, DenseState::ground(circuit.n_qubits)?)
}

/// Same as [`simulate_dense`] but starting from an explicit state.
pub fn simulate_dense_from(circuit: &Circuit, mut state: DenseState) -> Result<DenseState> {
    if state.n_qubits() != circuit.n_qubits {
        return Err(CoreError::Shape("initial state does not match circuit".into()));
    }
    for (q, ch) in circuit.prep_noise.iter().enumerate() {
        if let Some(ch) = ch {
            state.apply_channel(ch, &[q])?;
        }
    }
    for gate in &circuit.gates {
        match &gate.noise {
            None => state.apply_unitary(&gate.unitary()?, &gate.qubits)?,
            Some(GateNoise::After(ch)) => {
                state.apply_unitary(&gate.unitary()?, &gate.qubits)?;
                state.apply_channel(ch, &gate.qubits)?;
            }
            Some(GateNoise::Replace(ch)) => {
                state.apply_channel(ch, &gate.qubits)?;
            }
        }
    }
    for (q, ch) in circuit.meas_noise.iter().enumerate() {
        if let Some(ch) = ch {
            state.apply_channel(ch, &[q])?;
        }
    }
    Ok(state)
}

/// Result of exhaustive MaxCut enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaxCutResult {
    pub max_cut: usize,
    /// All optimal partitions as basis indices of the bitstring z (vertex
    /// 0 is the most significant bit; z_j = 0 puts vertex j in set A).
    pub optimal: Vec<usize>,
}

/// Enumerate all 2^n partitions and evaluate the cut count.
pub fn maxcut_bruteforce(n_vertices: usize, edges: &[(usize, usize)]) -> Result<MaxCutResult> {
    if n_vertices == 0 || n_vertices > 20 {
        return Err(CoreError::Resource(format!(
            "brute-force MaxCut supports 1..=20 vertices, got {n_vertices}"
        )));
    }
    let mut seen = std::collections::BTreeSet::new();
    for &(i, k) in edges {
        if i >= n_vertices || k >= n_vertices || i == k {
            return Err(CoreError::Parameter(format!("invalid edge ({i}, {k})")));
        }
        if !seen.insert((i.min(k), i.max(k))) {
            return Err(CoreError::Parameter(format!("duplicate edge ({i}, {k})")));
        }
    }
    let bit = |z: usize, v: usize| (z >> (n_vertices - 1 - v)) & 1;
    let mut max_cut = 0usize;
    let mut optimal = Vec::new();
    for z in 0..(1usize << n_vertices) {
        let cut = edges.iter().filter(|&&(i, k)| bit(z, i) != bit(z, k)).count();
        if cut > max_cut {
            max_cut = cut;
            optimal.clear();
            optimal.push(z);
        } else if cut == max_cut {
            optimal.push(z);
        }
    }
    Ok(MaxCutResult { max_cut, optimal })
}

/// Classical cut value of one partition.
pub fn cut_value(n_vertices: usize, edges: &[(usize, usize)], z: usize) -> usize {
    let bit = |v: usize| (z >> (n_vertices - 1 - v)) & 1;
    edges.iter().filter(|&&(i, k)| bit(i) != bit(k)).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{self, depolarizing, kraus_to_choi, chi_to_choi, kraus_to_chi, choi_to_kraus};
    use crate::circuit::Gate;
    use crate::metrics::trace_distance;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn empty_circuit_leaves_ground_state() {
        let circ = Circuit::new(3);
        let out = simulate_dense(&circ).unwrap();
        let mut want = ComplexTensor::zeros(vec![8, 8]);
        want.set(&[0, 0], c(1.0, 0.0));
        assert!(out.rho().dist(&want) < 1e-15);
    }

    #[test]
    fn bell_state_construction() {
        let circ = Circuit::with_gates(2, vec![Gate::h(0), Gate::cnot(0, 1)]).unwrap();
        let out = simulate_dense(&circ).unwrap();
        let mut want = ComplexTensor::zeros(vec![4, 4]);
        for &r in &[0usize, 3] {
            for &s in &[0usize, 3] {
                want.set(&[r, s], c(0.5, 0.0));
            }
        }
        assert!(out.rho().dist(&want) < 1e-14);
    }

    #[test]
    fn ghz3_probabilities() {
        let circ =
            Circuit::with_gates(3, vec![Gate::h(0), Gate::cnot(0, 1), Gate::cnot(1, 2)]).unwrap();
        let probs = simulate_dense(&circ).unwrap().probabilities();
        assert!((probs[0] - 0.5).abs() < 1e-12);
        assert!((probs[7] - 0.5).abs() < 1e-12);
        assert!(probs[1..7].iter().all(|&p| p < 1e-12));
    }

    #[test]
    fn trace_preserved_per_gate() {
        let mut circ = Circuit::with_gates(
            3,
            vec![Gate::h(0), Gate::rx(1, 0.7), Gate::cnot(0, 2), Gate::rzz(1, 2, 0.3)],
        )
        .unwrap();
        for g in circ.gates.iter_mut() {
            if g.is_two_qubit() {
                let d = depolarizing(0.1).unwrap();
                g.noise = Some(GateNoise::After(
                    d.tensor_product(&depolarizing(0.05).unwrap()).unwrap(),
                ));
            }
        }
        let mut state = DenseState::ground(3).unwrap();
        for g in &circ.gates {
            state.apply_unitary(&g.unitary().unwrap(), &g.qubits).unwrap();
            if let Some(GateNoise::After(ch)) = &g.noise {
                state.apply_channel(ch, &g.qubits).unwrap();
            }
            assert!((state.trace() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn oracle_self_consistency_through_chi_roundtrip() {
        // Replace every channel by its chi -> Choi -> Kraus round-trip and
        // compare end states.
        let mut circ = Circuit::with_gates(
            3,
            vec![Gate::h(0), Gate::cnot(0, 1), Gate::rx(2, 0.5), Gate::cz(1, 2)],
        )
        .unwrap();
        let noise1 = channels::thermal_relaxation(20e-6, 25e-6, 50e-9).unwrap();
        let noise2 = depolarizing(0.08)
            .unwrap()
            .tensor_product(&depolarizing(0.03).unwrap())
            .unwrap();
        circ.gates[2].noise = Some(GateNoise::After(noise1));
        circ.gates[3].noise = Some(GateNoise::After(noise2));

        let direct = simulate_dense(&circ).unwrap();

        let mut replaced = circ.clone();
        for g in replaced.gates.iter_mut() {
            if let Some(GateNoise::After(ch)) = &g.noise {
                let chi = kraus_to_chi(ch).unwrap();
                let conv = choi_to_kraus(&chi_to_choi(&chi).unwrap(), None, 1e-6).unwrap();
                g.noise = Some(GateNoise::After(conv.channel));
            }
        }
        let roundtrip = simulate_dense(&replaced).unwrap();
        let dist = trace_distance(direct.rho(), roundtrip.rho()).unwrap();
        assert!(dist <= 1e-9, "trace distance {dist}");
    }

    #[test]
    fn replace_noise_matches_manual_channel() {
        // A Replace channel is applied as the full process.
        let ch = kraus_to_choi(&depolarizing(0.2).unwrap()).unwrap();
        let conv = choi_to_kraus(&ch, None, 1e-6).unwrap();
        let mut circ = Circuit::with_gates(1, vec![Gate::h(0)]).unwrap();
        circ.gates[0].noise = Some(GateNoise::Replace(conv.channel.clone()));
        let out = simulate_dense(&circ).unwrap();
        let mut manual = DenseState::ground(1).unwrap();
        manual.apply_channel(&conv.channel, &[0]).unwrap();
        assert!(out.rho().dist(manual.rho()) < 1e-12);
    }

    #[test]
    fn product_state_initialization() {
        let s = DenseState::from_product(&[
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0)],
        ])
        .unwrap();
        // |01>
        let probs = s.probabilities();
        assert!((probs[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn maxcut_four_cycle() {
        let res = maxcut_bruteforce(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert_eq!(res.max_cut, 4);
        assert_eq!(res.optimal, vec![0b0101, 0b1010]);
    }

    #[test]
    fn maxcut_five_vertex_graph_has_three_partitions() {
        // Triangle on {0,1,2} plus the path 1-3-4: max cut 4 reached by
        // exactly the partitions {2,3}, {0,3}, {1,4} and complements.
        let edges = [(0, 1), (0, 2), (1, 2), (1, 3), (3, 4)];
        let res = maxcut_bruteforce(5, &edges).unwrap();
        assert_eq!(res.max_cut, 4);
        let want = vec![0b00110, 0b01001, 0b01101, 0b10010, 0b10110, 0b11001];
        assert_eq!(res.optimal, want);
    }

    #[test]
    fn maxcut_single_edge() {
        let res = maxcut_bruteforce(2, &[(0, 1)]).unwrap();
        assert_eq!(res.max_cut, 1);
        assert_eq!(res.optimal, vec![0b01, 0b10]);
    }

    #[test]
    fn maxcut_rejects_bad_edges() {
        assert!(maxcut_bruteforce(3, &[(0, 0)]).is_err());
        assert!(maxcut_bruteforce(3, &[(0, 4)]).is_err());
        assert!(maxcut_bruteforce(3, &[(0, 1), (1, 0)]).is_err());
    }

    #[test]
    fn qubit_cap_enforced() {
        assert!(DenseState::ground(11).is_err());
        assert!(DenseState::ground(10).is_ok());
    }
}
