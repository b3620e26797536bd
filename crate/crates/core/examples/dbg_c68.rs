use mpdosim_core::channels::{depolarizing, KrausChannel};
use mpdosim_core::circuit::{Gate, Gateset, NoisePolicy};
use mpdosim_core::experiments::device::{fit_standard_model, probe_circuit, SyntheticDevice};
use mpdosim_core::experiments::optimizer::{GradientMethod, OptimizerConfig};
use mpdosim_core::experiments::{run_maxcut, MaxCutGraph, Runner};
use mpdosim_core::metrics::jsd;
use mpdosim_core::mpdo::TruncationConfig;
use mpdosim_core::qpt::{build_noisy_gateset, synthetic_record};

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

fn main() {
    // Criterion 6 pilot: degradation of optimal-state probabilities.
    for (graph, depth, name) in [
        (MaxCutGraph::four_cycle(), 2usize, "C4"),
        (MaxCutGraph::five_vertex_demo(), 3usize, "G5"),
    ] {
        for seed in [1u64, 2, 3, 4, 5] {
            let opt = OptimizerConfig {
                epochs: 300,
                learning_rate: 0.05,
                gradient: GradientMethod::ParameterShift,
                seed,
            };
            let ideal = Runner::ideal();
            let out = run_maxcut(&graph, depth, &ideal, &opt).unwrap();
            let gs = uniform_cz_gateset(graph.n_vertices, 0.02);
            let noisy_runner = Runner::new(
                NoisePolicy::qpt_gateset(gs),
                TruncationConfig::lossless_desk_scale(),
                0,
            );
            let circ = mpdosim_core::experiments::maxcut::build_maxcut_circuit(
                &graph,
                depth,
                &out.final_params.iter().skip(1).step_by(2).copied().collect::<Vec<_>>(),
                &out.final_params.iter().step_by(2).copied().collect::<Vec<_>>(),
            )
            .unwrap();
            let noisy_probs = noisy_runner.simulate(&circ).unwrap().probabilities().unwrap().values;
            let ok = out
                .reference
                .optimal
                .iter()
                .all(|&z| noisy_probs[z] < out.distribution[z]);
            let worst: f64 = out
                .reference
                .optimal
                .iter()
                .map(|&z| out.distribution[z] - noisy_probs[z])
                .fold(f64::INFINITY, f64::min);
            println!("{name} seed {seed}: all optimal degraded: {ok}, min gap {worst:.4}");
        }
    }
    // Criterion 8 pilot: ranking over 5 seeds.
    let device = SyntheticDevice::with_default_hidden_noise().unwrap();
    for seed in [11u64, 12, 13, 14, 15] {
        let circuit = probe_circuit(3, 2, seed).unwrap();
        let truth = device.ground_truth_distribution(&circuit).unwrap();
        let records = device.export_records(&[(0, 1), (1, 2)], "2026-01-01T00:00:00Z").unwrap();
        let gs = build_noisy_gateset(&records, None, 1e-6).unwrap();
        let runner = Runner::new(
            NoisePolicy::qpt_gateset(gs),
            TruncationConfig::lossless_desk_scale(),
            0,
        );
        let qpt_probs = runner.simulate(&circuit).unwrap().probabilities().unwrap().values;
        let qpt_jsd = jsd(&qpt_probs, &truth).unwrap();
        let fit = fit_standard_model(&circuit, &truth, 60, 2.0, 0.05).unwrap();
        println!(
            "seed {seed}: qpt jsd {qpt_jsd:.3e} vs std fit {:.3e} (p={:.4}) -> {}",
            fit.jsd,
            fit.depolarizing_p,
            qpt_jsd < fit.jsd
        );
    }
}
