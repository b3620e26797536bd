//! Random-circuit truncation-fidelity sweeps: how hard can the noise and
//! entanglement bonds be capped before the simulated state diverges from
//! the untruncated reference.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{prepare_circuit, Circuit, Gate, NoisePolicy};
use crate::dense::simulate_dense;
use crate::error::{CoreError, Result};
use crate::metrics::fidelity;
use crate::mpdo::{run_circuit, TruncationConfig};
use crate::tensor::C64;

/// One random circuit layer set: single-qubit gates drawn from
/// {RX, RY, RZ} with angles uniform on (0, 2π], then a CNOT entangling
/// layer pairing (even, odd) qubits on even layers and (odd, even) on odd
/// layers; a final single-qubit layer closes the circuit.
pub fn random_circuit(n_qubits: usize, depth: usize, rng: &mut ChaCha12Rng) -> Result<Circuit> {
    let mut circ = Circuit::new(n_qubits);
    let two_pi = 2.0 * std::f64::consts::PI;
    let single_layer = |circ: &mut Circuit, rng: &mut ChaCha12Rng| -> Result<()> {
        for q in 0..n_qubits {
            // Uniform on (0, 2π]: map u in [0,1) to 2π(1-u).
            let angle = two_pi * (1.0 - rng.gen::<f64>());
            let gate = match rng.gen_range(0..3) {
                0 => Gate::rx(q, angle),
                1 => Gate::ry(q, angle),
                _ => Gate::rz(q, angle),
            };
            circ.push(gate)?;
        }
        Ok(())
    };
    for layer in 0..depth {
        single_layer(&mut circ, rng)?;
        let start = layer % 2;
        let mut q = start;
        while q + 1 < n_qubits {
            circ.push(Gate::cnot(q, q + 1))?;
            q += 2;
        }
    }
    single_layer(&mut circ, rng)?;
    Ok(circ)
}

/// Sweep configuration.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub n_qubits: usize,
    pub depths: Vec<usize>,
    pub trials: usize,
    pub chi_grid: Vec<usize>,
    pub kappa_grid: Vec<usize>,
    pub policy: NoisePolicy,
    pub base_seed: u64,
}

/// One sweep grid point with its per-trial fidelities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_qubits: usize,
    pub depth: usize,
    pub chi: usize,
    pub kappa: usize,
    pub trials: usize,
    pub mean_fidelity: f64,
    pub std_err: f64,
    pub fidelities: Vec<f64>,
}

/// Complete sweep output, row order fixed by (depth, chi, kappa).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn row(&self, depth: usize, chi: usize, kappa: usize) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.depth == depth && r.chi == chi && r.kappa == kappa)
    }
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Run the sweep: per trial, draw a random circuit, prepare it once under
/// the policy (crosstalk seeded by `base_seed + trial`), compute the
/// untruncated reference by the dense oracle, and measure the fidelity of
/// every (χ, κ) truncated MPDO run against it. Trials execute in parallel
/// and deterministically.
pub fn truncation_sweep(cfg: &SweepConfig) -> Result<SweepTable> {
    if cfg.n_qubits == 0 || cfg.n_qubits > 8 {
        return Err(CoreError::Resource(format!(
            "sweeps support 1..=8 qubits at desk scale, got {}",
            cfg.n_qubits
        )));
    }
    if cfg.trials == 0 || cfg.chi_grid.is_empty() || cfg.kappa_grid.is_empty() {
        return Err(CoreError::Parameter("sweep needs trials and non-empty grids".into()));
    }
    let mut rows = Vec::new();
    for &depth in &cfg.depths {
        // fidelities[trial][grid_index]
        let per_trial: Result<Vec<Vec<f64>>> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let seed = cfg.base_seed + trial as u64;
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                let circuit = random_circuit(cfg.n_qubits, depth, &mut rng)?;
                let prepared = prepare_circuit(&circuit, &cfg.policy, seed)?;
                let reference = simulate_dense(&prepared)?.into_rho();
                let mut fids = Vec::with_capacity(cfg.chi_grid.len() * cfg.kappa_grid.len());
                for &chi in &cfg.chi_grid {
                    for &kappa in &cfg.kappa_grid {
                        let trunc = TruncationConfig::new(chi, kappa)?;
                        let state = run_circuit(&prepared, trunc)?;
                        let mut rho = state.full_density_matrix()?;
                        let tr = rho.trace()?.re;
                        if tr > 0.0 && (tr - 1.0).abs() > 1e-12 {
                            rho = rho.scale(C64::new(1.0 / tr, 0.0));
                        }
                        fids.push(fidelity(&reference, &rho)?);
                    }
                }
                Ok(fids)
            })
            .collect();
        let per_trial = per_trial?;
        for (ci, &chi) in cfg.chi_grid.iter().enumerate() {
            for (ki, &kappa) in cfg.kappa_grid.iter().enumerate() {
                let idx = ci * cfg.kappa_grid.len() + ki;
                let fidelities: Vec<f64> = per_trial.iter().map(|t| t[idx]).collect();
                let (mean_fidelity, std_err) = mean_and_stderr(&fidelities);
                rows.push(SweepRow {
                    n_qubits: cfg.n_qubits,
                    depth,
                    chi,
                    kappa,
                    trials: cfg.trials,
                    mean_fidelity,
                    std_err,
                    fidelities,
                });
            }
        }
    }
    Ok(SweepTable { rows })
}

/// Paired mean difference `b − a` with its standard error, for trend
/// checks on sweep rows sharing trial circuits.
pub fn paired_difference(a: &SweepRow, b: &SweepRow) -> (f64, f64) {
    let diffs: Vec<f64> = b
        .fidelities
        .iter()
        .zip(&a.fidelities)
        .map(|(x, y)| x - y)
        .collect();
    mean_and_stderr(&diffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{depolarizing, KrausChannel};
    use crate::circuit::{Gateset, GateKind};
    use crate::qpt::{build_noisy_gateset, synthetic_record};

    fn demo_gateset(n_qubits: usize, p: f64) -> Gateset {
        let cz = KrausChannel::from_operators(2, vec![Gate::cz(0, 1).unitary().unwrap()]).unwrap();
        let dep2 = depolarizing(p).unwrap().tensor_product(&depolarizing(p).unwrap()).unwrap();
        let noisy = cz.then(&dep2).unwrap();
        let mut records = Vec::new();
        for q in 0..n_qubits - 1 {
            records.push(
                synthetic_record("CZ", &[q, q + 1], &noisy, "2026-01-01T00:00:00Z").unwrap(),
            );
        }
        build_noisy_gateset(&records, None, 1e-6).unwrap()
    }

    #[test]
    fn random_circuit_structure() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let circ = random_circuit(4, 3, &mut rng).unwrap();
        // depth layers of 4 single-qubit gates + final layer, plus CNOTs:
        // even layers pair (0,1),(2,3); odd layers pair (1,2).
        let singles = circ.gates.iter().filter(|g| !g.is_two_qubit()).count();
        let cnots = circ.gates.iter().filter(|g| g.kind == GateKind::CNOT).count();
        assert_eq!(singles, 4 * 4);
        assert_eq!(cnots, 2 + 1 + 2);
        for g in &circ.gates {
            if !g.is_two_qubit() {
                let a = g.params[0];
                assert!(a > 0.0 && a <= 2.0 * std::f64::consts::PI);
            }
        }
        // Deterministic regeneration.
        let mut rng2 = ChaCha12Rng::seed_from_u64(1);
        assert_eq!(random_circuit(4, 3, &mut rng2).unwrap(), circ);
    }

    #[test]
    fn full_caps_give_unit_fidelity() {
        let policy = NoisePolicy::qpt_gateset(demo_gateset(3, 0.02))
            .with_crosstalk((1e-5 * std::f64::consts::PI, 1e-3 * std::f64::consts::PI));
        let cfg = SweepConfig {
            n_qubits: 3,
            depths: vec![2],
            trials: 4,
            chi_grid: vec![64],
            kappa_grid: vec![64],
            policy,
            base_seed: 11,
        };
        let table = truncation_sweep(&cfg).unwrap();
        let row = table.row(2, 64, 64).unwrap();
        for &f in &row.fidelities {
            assert!((f - 1.0).abs() < 1e-8, "fidelity {f}");
        }
    }

    #[test]
    fn sweep_fidelities_lie_in_unit_interval() {
        let policy = NoisePolicy::qpt_gateset(demo_gateset(3, 0.05));
        let cfg = SweepConfig {
            n_qubits: 3,
            depths: vec![2],
            trials: 5,
            chi_grid: vec![2, 4],
            kappa_grid: vec![1, 2],
            policy,
            base_seed: 3,
        };
        let table = truncation_sweep(&cfg).unwrap();
        assert_eq!(table.rows.len(), 4);
        for row in &table.rows {
            assert_eq!(row.fidelities.len(), 5);
            for &f in &row.fidelities {
                assert!((0.0..=1.0 + 1e-8).contains(&f), "fidelity {f}");
            }
            assert!(row.std_err >= 0.0);
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let policy = NoisePolicy::qpt_gateset(demo_gateset(3, 0.05));
        let cfg = SweepConfig {
            n_qubits: 3,
            depths: vec![1, 2],
            trials: 4,
            chi_grid: vec![2, 4],
            kappa_grid: vec![1, 2],
            policy,
            base_seed: 21,
        };
        let a = truncation_sweep(&cfg).unwrap();
        let b = truncation_sweep(&cfg).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.fidelities, rb.fidelities);
        }
    }

    #[test]
    fn paired_difference_of_identical_rows_is_zero() {
        let row = SweepRow {
            n_qubits: 3,
            depth: 1,
            chi: 2,
            kappa: 1,
            trials: 3,
            mean_fidelity: 0.9,
            std_err: 0.01,
            fidelities: vec![0.89, 0.9, 0.91],
        };
        let (d, se) = paired_difference(&row, &row);
        assert_eq!(d, 0.0);
        assert_eq!(se, 0.0);
    }
}
