//! MaxCut via QAOA: Hadamard layer, then alternating edge phase layers
//! exp(−iβ(1−ZZ)/2) and RX mixers, optimized to maximize the cut
//! objective C = Σ ½(1 − ⟨Z_iZ_k⟩).

use serde::{Deserialize, Serialize};

use super::optimizer::{
    minimize, AngleExpr, CircuitTemplate, EpochRecord, OptimizerConfig, TemplateGate,
};
use super::Runner;
use crate::circuit::{Circuit, GateKind};
use crate::dense::{cut_value, maxcut_bruteforce, MaxCutResult};
use crate::error::{CoreError, Result};
use crate::mpdo::MpdoState;

/// A simple undirected graph for MaxCut.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaxCutGraph {
    pub n_vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

/// Serialized graph schema: `{"n": 4, "edges": [[0,1], ...]}`.
#[derive(Debug, Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl MaxCutGraph {
    pub fn new(n_vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for &(i, k) in &edges {
            if i >= n_vertices || k >= n_vertices || i == k {
                return Err(CoreError::Parameter(format!("invalid edge ({i}, {k})")));
            }
            if !seen.insert((i.min(k), i.max(k))) {
                return Err(CoreError::Parameter(format!("duplicate edge ({i}, {k})")));
            }
        }
        Ok(Self { n_vertices, edges })
    }

    /// The 4-vertex cycle whose optimal partitions are |0101⟩ and |1010⟩.
    pub fn four_cycle() -> Self {
        Self::new(4, vec![(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap()
    }

    /// The bundled five-vertex demo graph (a triangle on {0,1,2} plus the
    /// path 1-3-4). Its maximum cut of 4 is reached by exactly three
    /// partitions: {2,3}, {0,3} and {1,4} against their complements.
    pub fn five_vertex_demo() -> Self {
        Self::new(5, vec![(0, 1), (0, 2), (1, 2), (1, 3), (3, 4)]).unwrap()
    }

    pub fn bruteforce(&self) -> Result<MaxCutResult> {
        maxcut_bruteforce(self.n_vertices, &self.edges)
    }

    pub fn cut_value(&self, z: usize) -> usize {
        cut_value(self.n_vertices, &self.edges, z)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: GraphFile = serde_json::from_str(&text)
            .map_err(|e| CoreError::Parse(format!("{}: {e}", path.display())))?;
        Self::new(file.n, file.edges.iter().map(|&[i, k]| (i, k)).collect())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = GraphFile {
            n: self.n_vertices,
            edges: self.edges.iter().map(|&(i, k)| [i, k]).collect(),
        };
        let text =
            serde_json::to_string_pretty(&file).map_err(|e| CoreError::Parse(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Cut objective C = Σ_edges ½(1 − ⟨Z_i Z_k⟩) evaluated on an MPDO state.
pub fn maxcut_objective(state: &MpdoState, graph: &MaxCutGraph) -> Result<f64> {
    if state.n_qubits() != graph.n_vertices {
        return Err(CoreError::Parameter(format!(
            "state has {} qubits but the graph has {} vertices",
            state.n_qubits(),
            graph.n_vertices
        )));
    }
    let mut total = 0.0;
    for &(i, k) in &graph.edges {
        let mut string: Vec<char> = vec!['I'; graph.n_vertices];
        string[i] = 'Z';
        string[k] = 'Z';
        let zz = state.expectation(&string.iter().collect::<String>())?;
        total += 0.5 * (1.0 - zz);
    }
    Ok(total)
}

/// QAOA template of depth `p`. Parameter layout: `[β_1, α_1, …, β_p, α_p]`
/// with the edge layer exp(−iβ_l(1−ZZ)/2) realized as RZZ(β_l/2) (the
/// scalar phase drops from the density matrix) and the mixer as RX(α_l)
/// on every vertex.
pub fn maxcut_template(graph: &MaxCutGraph, depth: usize) -> Result<CircuitTemplate> {
    let n = graph.n_vertices;
    let mut gates = Vec::new();
    for q in 0..n {
        gates.push(TemplateGate { kind: GateKind::H, qubits: vec![q], angle: None });
    }
    for layer in 0..depth {
        let beta_idx = 2 * layer;
        let alpha_idx = 2 * layer + 1;
        for &(i, k) in &graph.edges {
            gates.push(TemplateGate {
                kind: GateKind::RZZ,
                qubits: vec![i, k],
                angle: Some(AngleExpr::Param { index: beta_idx, coeff: 0.5 }),
            });
        }
        for q in 0..n {
            gates.push(TemplateGate {
                kind: GateKind::RX,
                qubits: vec![q],
                angle: Some(AngleExpr::Param { index: alpha_idx, coeff: 1.0 }),
            });
        }
    }
    CircuitTemplate::new(n, gates, 2 * depth)
}

/// Instantiate the QAOA circuit from explicit per-layer angles.
pub fn build_maxcut_circuit(
    graph: &MaxCutGraph,
    depth: usize,
    alphas: &[f64],
    betas: &[f64],
) -> Result<Circuit> {
    if alphas.len() != depth || betas.len() != depth {
        return Err(CoreError::Parameter(format!(
            "depth {depth} wants {depth} alphas and betas, got {} and {}",
            alphas.len(),
            betas.len()
        )));
    }
    let template = maxcut_template(graph, depth)?;
    let mut params = Vec::with_capacity(2 * depth);
    for l in 0..depth {
        params.push(betas[l]);
        params.push(alphas[l]);
    }
    template.build(&params)
}

/// Result of a QAOA MaxCut run.
#[derive(Debug, Clone)]
pub struct MaxCutOutcome {
    pub final_params: Vec<f64>,
    pub trace: Vec<EpochRecord>,
    pub distribution: Vec<f64>,
    /// Final cut objective C.
    pub cut_expectation: f64,
    /// The |optimal| highest-probability bitstrings, most probable first.
    pub best_bitstrings: Vec<usize>,
    /// Classical cut values of `best_bitstrings`.
    pub best_cut_values: Vec<usize>,
    /// Brute-force reference.
    pub reference: MaxCutResult,
}

/// Optimize −C by gradient descent and report the top outcomes against
/// the brute-force reference. Initial angles are seeded-random.
pub fn run_maxcut(
    graph: &MaxCutGraph,
    depth: usize,
    runner: &Runner,
    opt: &OptimizerConfig,
) -> Result<MaxCutOutcome> {
    use rand::{Rng, SeedableRng};
    let template = maxcut_template(graph, depth)?;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(opt.seed);
    let initial: Vec<f64> = (0..template.n_params()).map(|_| rng.gen_range(0.05..0.5)).collect();
    run_maxcut_from(graph, depth, &initial, runner, opt)
}

/// As [`run_maxcut`] with explicit initial parameters.
pub fn run_maxcut_from(
    graph: &MaxCutGraph,
    depth: usize,
    initial: &[f64],
    runner: &Runner,
    opt: &OptimizerConfig,
) -> Result<MaxCutOutcome> {
    let template = maxcut_template(graph, depth)?;
    let mut loss = |circ: &Circuit| -> Result<f64> {
        let state = runner.simulate(circ)?;
        Ok(-maxcut_objective(&state, graph)?)
    };
    let (final_params, trace) = minimize(&template, initial, opt, &mut loss, &mut |_| Ok(None))?;

    let final_state = runner.simulate(&template.build(&final_params)?)?;
    let distribution = final_state.probabilities()?.values;
    let cut_expectation = maxcut_objective(&final_state, graph)?;
    let reference = graph.bruteforce()?;
    // Rank outcomes by probability, ties broken by index.
    let mut order: Vec<usize> = (0..distribution.len()).collect();
    order.sort_by(|&a, &b| {
        distribution[b]
            .partial_cmp(&distribution[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let top = reference.optimal.len().min(order.len());
    let best_bitstrings: Vec<usize> = order[..top].to_vec();
    let best_cut_values: Vec<usize> =
        best_bitstrings.iter().map(|&z| graph.cut_value(z)).collect();
    Ok(MaxCutOutcome {
        final_params,
        trace,
        distribution,
        cut_expectation,
        best_bitstrings,
        best_cut_values,
        reference,
    })
}
