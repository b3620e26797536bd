//! Scratch pilot runs used to freeze acceptance thresholds. Not shipped.

use mpdosim_core::channels::{depolarizing, KrausChannel};
use mpdosim_core::circuit::{Gate, Gateset, NoisePolicy, CROSSTALK_RANGE_HI, CROSSTALK_RANGE_LO};
use mpdosim_core::experiments::entangler::{entangler_template, initial_params, VariationalTarget};
use mpdosim_core::experiments::optimizer::{GradientMethod, LossKind, OptimizerConfig};
use mpdosim_core::experiments::sweep::{paired_difference, truncation_sweep, SweepConfig};
use mpdosim_core::experiments::{run_maxcut, run_variational, IsingSpec, MaxCutGraph, Runner};
use mpdosim_core::mpdo::TruncationConfig;
use mpdosim_core::qpt::{build_noisy_gateset, synthetic_record};
use num_complex::Complex64 as C64;

fn uniform_cz_gateset(n: usize, p: f64) -> Gateset {
    let cz = KrausChannel::from_operators(2, vec![Gate::cz(0, 1).unitary().unwrap()]).unwrap();
    let dep2 = depolarizing(p).unwrap().tensor_product(&depolarizing(p).unwrap()).unwrap();
    let noisy = cz.then(&dep2).unwrap();
    let mut records = Vec::new();
    for q in 0..n - 1 {
        records.push(synthetic_record("CZ", &[q, q + 1], &noisy, "2026-01-01T00:00:00Z").unwrap());
    }
    build_noisy_gateset(&records, None, 1e-6).unwrap()
}

fn pilot_maxcut() {
    println!("=== maxcut pilots ===");
    for (graph, name, depth) in [
        (MaxCutGraph::four_cycle(), "C4", 2usize),
        (MaxCutGraph::five_vertex_demo(), "G5", 3usize),
    ] {
        for seed in [1u64, 2, 3, 4, 5] {
            for lr in [0.05, 0.1] {
                for epochs in [150usize, 300] {
                    let opt = OptimizerConfig {
                        epochs,
                        learning_rate: lr,
                        gradient: GradientMethod::ParameterShift,
                        seed,
                    };
                    let t0 = std::time::Instant::now();
                    let out = run_maxcut(&graph, depth, &Runner::ideal(), &opt).unwrap();
                    let top: std::collections::BTreeSet<usize> =
                        out.best_bitstrings.iter().copied().collect();
                    let want: std::collections::BTreeSet<usize> =
                        out.reference.optimal.iter().copied().collect();
                    let probs_of_best: Vec<f64> =
                        out.best_bitstrings.iter().map(|&z| out.distribution[z]).collect();
                    println!(
                        "{name} seed={seed} lr={lr} ep={epochs}: C={:.4} match={} best_p={:?} t={:?}",
                        out.cut_expectation,
                        top == want,
                        probs_of_best.iter().map(|p| (p * 1e4).round() / 1e4).collect::<Vec<_>>(),
                        t0.elapsed()
                    );
                }
            }
        }
    }
}

fn pilot_entangler() {
    println!("=== entangler pilot ===");
    let t = std::f64::consts::PI / 8.0;
    let spec = IsingSpec::new(2, vec![C64::new(t.sin(), 0.0), C64::new(t.cos(), 0.0)]).unwrap();
    let template = entangler_template(&spec, 1).unwrap();
    // Target from a known parameter point.
    let mut star = initial_params(&spec, 1, 1000);
    star[1] = 0.45;
    star[2] = -0.35;
    star[3] = 0.25;
    star[4] = 0.6;
    let runner = Runner::ideal();
    let star_state = runner.simulate(&template.build(&star).unwrap()).unwrap();
    let target = VariationalTarget {
        distribution: star_state.probabilities().unwrap().values,
        density: Some(star_state.full_density_matrix().unwrap()),
    };
    for seed in [1u64, 2, 3] {
        for lr in [0.3, 0.6, 1.0] {
            let opt = OptimizerConfig {
                epochs: 200,
                learning_rate: lr,
                gradient: GradientMethod::FiniteDifference { h: 1e-3 },
                seed,
            };
            let init = initial_params(&spec, 1, seed);
            let t0 = std::time::Instant::now();
            let out =
                run_variational(&template, &init, &target, &runner, &opt, LossKind::JsdToTarget)
                    .unwrap();
            println!(
                "seed={seed} lr={lr}: jsd {:.3e} -> {:.3e}, fid {:.6}, t={:?}",
                out.trace[0].loss,
                out.final_loss,
                out.final_fidelity.unwrap_or(-1.0),
                t0.elapsed()
            );
        }
    }
}

fn pilot_sweep() {
    println!("=== sweep pilot ===");
    for p in [0.002f64] {
        for q in [3usize, 6] {
            let policy = NoisePolicy::qpt_gateset(uniform_cz_gateset(q, p))
                .with_crosstalk((CROSSTALK_RANGE_LO, CROSSTALK_RANGE_HI));
            let cfg = SweepConfig {
                n_qubits: q,
                depths: vec![1, 2, 3],
                trials: 100,
                chi_grid: vec![2, 4, 8],
                kappa_grid: vec![1, 2, 4],
                policy,
                base_seed: 10_000,
            };
            let t0 = std::time::Instant::now();
            let table = truncation_sweep(&cfg).unwrap();
            println!("Q={q} p={p}: {:?}", t0.elapsed());
            let mut min_mean = 1.0f64;
            for row in &table.rows {
                if row.mean_fidelity < min_mean {
                    min_mean = row.mean_fidelity;
                }
                println!(
                    "  d={} chi={} kappa={}: {:.5} +- {:.5}",
                    row.depth, row.chi, row.kappa, row.mean_fidelity, row.std_err
                );
            }
            println!("  min mean = {min_mean:.5}");
            // Monotonicity check within one paired stderr.
            let mut violations = 0;
            for &d in &[1usize, 2, 3] {
                for &chi in &[2usize, 4, 8] {
                    for w in [[1usize, 2], [2, 4]] {
                        let a = table.row(d, chi, w[0]).unwrap();
                        let b = table.row(d, chi, w[1]).unwrap();
                        let (diff, se) = paired_difference(a, b);
                        if diff < -se {
                            violations += 1;
                            println!(
                                "  kappa violation d={d} chi={chi} {}->{}: {diff:.5} se {se:.5}",
                                w[0], w[1]
                            );
                        }
                    }
                }
                for &kappa in &[1usize, 2, 4] {
                    for w in [[2usize, 4], [4, 8]] {
                        let a = table.row(d, w[0], kappa).unwrap();
                        let b = table.row(d, w[1], kappa).unwrap();
                        let (diff, se) = paired_difference(a, b);
                        if diff < -se {
                            violations += 1;
                            println!(
                                "  chi violation d={d} kappa={kappa} {}->{}: {diff:.5} se {se:.5}",
                                w[0], w[1]
                            );
                        }
                    }
                }
            }
            println!("  violations: {violations}");
        }
    }
}

fn pilot_oracle_runtime() {
    println!("=== oracle-equivalence runtime pilot ===");
    use mpdosim_core::dense::simulate_dense;
    use mpdosim_core::metrics::trace_distance;
    use mpdosim_core::mpdo::run_circuit;
    use rand::{Rng, SeedableRng};
    let t0 = std::time::Instant::now();
    let mut worst = 0.0f64;
    let mut count = 0;
    for n in 2..=5usize {
        for trial in 0..50u64 {
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(777 + trial + 100 * n as u64);
            let depth = rng.gen_range(1..=6);
            let circ = acceptance_random_noisy_circuit(n, depth, &mut rng);
            let st = run_circuit(&circ, TruncationConfig::lossless_desk_scale()).unwrap();
            let rho = st.full_density_matrix().unwrap();
            let dense = simulate_dense(&circ).unwrap();
            let d = trace_distance(&rho, dense.rho()).unwrap();
            if d > worst {
                worst = d;
            }
            count += 1;
        }
    }
    println!("{count} circuits, worst trace distance {worst:.3e}, t={:?}", t0.elapsed());
}

fn acceptance_random_noisy_circuit(
    n: usize,
    depth: usize,
    rng: &mut rand_chacha::ChaCha12Rng,
) -> mpdosim_core::circuit::Circuit {
    use mpdosim_core::channels::{bit_flip, thermal_relaxation};
    use mpdosim_core::circuit::{Circuit, GateNoise};
    use rand::Rng;
    let mut circ = Circuit::new(n);
    let hidden = mpdosim_core::experiments::SyntheticDevice::with_default_hidden_noise().unwrap();
    for _ in 0..depth {
        // One random single-qubit gate with a random channel.
        let q = rng.gen_range(0..n);
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let mut g = match rng.gen_range(0..3) {
            0 => Gate::rx(q, angle),
            1 => Gate::ry(q, angle),
            _ => Gate::rz(q, angle),
        };
        let ch = match rng.gen_range(0..3) {
            0 => depolarizing(rng.gen_range(0.0..0.3)).unwrap(),
            1 => thermal_relaxation(20e-6, 25e-6, rng.gen_range(0.0..200e-9)).unwrap(),
            _ => bit_flip(rng.gen_range(0.0..0.3)).unwrap(),
        };
        g.noise = Some(GateNoise::After(ch));
        circ.push(g).unwrap();
        if n >= 2 {
            let a = rng.gen_range(0..n - 1);
            let mut g2 = match rng.gen_range(0..3) {
                0 => Gate::cz(a, a + 1),
                1 => Gate::cnot(a, a + 1),
                _ => Gate::rzz(a, a + 1, rng.gen_range(0.0..std::f64::consts::TAU)),
            };
            if rng.gen_bool(0.5) {
                let d1 = depolarizing(rng.gen_range(0.0..0.2)).unwrap();
                let d2 = thermal_relaxation(20e-6, 25e-6, rng.gen_range(0.0..100e-9)).unwrap();
                g2.noise = Some(GateNoise::After(d1.tensor_product(&d2).unwrap()));
            } else if g2.kind == mpdosim_core::circuit::GateKind::CZ {
                g2.noise = Some(GateNoise::Replace(hidden.hidden_process().clone()));
            }
            circ.push(g2).unwrap();
        }
    }
    circ
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".into());
    match which.as_str() {
        "maxcut" => pilot_maxcut(),
        "entangler" => pilot_entangler(),
        "sweep" => pilot_sweep(),
        "oracle" => pilot_oracle_runtime(),
        _ => {
            pilot_oracle_runtime();
            pilot_entangler();
            pilot_maxcut();
            pilot_sweep();
        }
    }
}
