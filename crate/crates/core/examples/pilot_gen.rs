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
