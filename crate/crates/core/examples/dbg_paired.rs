use mpdosim_core::circuit::{NoisePolicy, StandardNoiseParams};
use mpdosim_core::experiments::entangler::{entangler_template, initial_params, VariationalTarget};
use mpdosim_core::experiments::optimizer::{GradientMethod, LossKind, OptimizerConfig};
use mpdosim_core::experiments::{run_variational, IsingSpec, Runner};
use mpdosim_core::mpdo::TruncationConfig;
use num_complex::Complex64 as C64;

fn main() {
    let t = std::f64::consts::PI / 8.0;
    let spec = IsingSpec::new(2, vec![C64::new(t.sin(), 0.0), C64::new(t.cos(), 0.0)]).unwrap();
    let template = entangler_template(&spec, 1).unwrap();
    for seed in [1u64, 2, 3, 4, 5] {
        let star = initial_params(&spec, 1, 1000 + seed);
        let ideal = Runner::ideal();
        let star_state = ideal.simulate(&template.build(&star).unwrap()).unwrap();
        let target = VariationalTarget {
            distribution: star_state.probabilities().unwrap().values,
            density: Some(star_state.full_density_matrix().unwrap()),
        };
        // Perturbed init.
        let init: Vec<f64> = star.iter().enumerate().map(|(i, &p)| p + 0.05 * ((i + 1) as f64)).collect();
        let opt = OptimizerConfig {
            epochs: 200,
            learning_rate: 0.4,
            gradient: GradientMethod::FiniteDifference { h: 1e-3 },
            seed,
        };
        let out_ideal = run_variational(&template, &init, &target, &ideal, &opt, LossKind::JsdToTarget).unwrap();
        let mut params = StandardNoiseParams::depolarizing_only(0.01);
        params.relaxation.insert(0, (20e-6, 25e-6));
        params.relaxation.insert(1, (30e-6, 22e-6));
        params.relaxation.insert(2, (25e-6, 28e-6));
        params.p_spam = 0.01;
        let noisy = Runner::new(NoisePolicy::general(params), TruncationConfig::lossless_desk_scale(), 0);
        let out_noisy = run_variational(&template, &init, &target, &noisy, &opt, LossKind::JsdToTarget).unwrap();
        println!(
            "seed {seed}: ideal jsd {:.2e} fid {:.6} | noisy jsd {:.2e} fid {:.6} | fid_noisy < fid_ideal: {}",
            out_ideal.final_loss,
            out_ideal.final_fidelity.unwrap(),
            out_noisy.final_loss,
            out_noisy.final_fidelity.unwrap(),
            out_noisy.final_fidelity.unwrap() < out_ideal.final_fidelity.unwrap()
        );
    }
}
