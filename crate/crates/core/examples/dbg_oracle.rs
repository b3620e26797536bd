use mpdosim_core::channels::depolarizing;
use mpdosim_core::circuit::{Circuit, Gate};
use mpdosim_core::linalg::svd;
use mpdosim_core::mpdo::{run_circuit, TruncationConfig};
use mpdosim_core::tensor::{contract, ComplexTensor};
use rand::{Rng, SeedableRng};

include!("pilot_gen.rs");

fn main() {
    let (n, trial) = (4usize, 2u64);
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(777 + trial + 100 * n as u64);
    let depth = rng.gen_range(1..=6);
    let circ = acceptance_random_noisy_circuit(n, depth, &mut rng);
    let mut partial = Circuit::new(n);
    partial.gates = circ.gates[..9].to_vec();
    let st = run_circuit(&partial, TruncationConfig::lossless_desk_scale()).unwrap();
    for i in 0..n {
        println!("site {i}: {:?}", st.site(i).data().shape());
    }
    // Reproduce the merge+apply for gate 9 = ideal CNOT on (0,1).
    let ta = st.site(0).data();
    let tb = st.site(1).data();
    let (l, na) = (ta.shape()[0], ta.shape()[2]);
    let (nb, r) = (tb.shape()[2], tb.shape()[3]);
    let merged = contract(ta, &[3], tb, &[0]).unwrap();
    let gate = Gate::cnot(0, 1).unitary().unwrap();
    let g = {
        let mut data = Vec::new();
        data.extend_from_slice(gate.data());
        ComplexTensor::new(vec![1, 4, 4], data).unwrap().reshape(vec![1, 2, 2, 2, 2]).unwrap()
    };
    let applied = contract(&g, &[3, 4], &merged, &[1, 3]).unwrap();
    let arranged = applied.permute(&[3, 1, 4, 0, 2, 5, 6]).unwrap();
    let rows = l * 2 * na;
    let cols = 2 * nb * r;
    let mat = arranged.reshape(vec![rows, cols]).unwrap();
    println!("split matrix {}x{}, norm {:.6}", rows, cols, mat.norm());
    let s = svd(&mat).unwrap();
    // Reconstruction check.
    let mut us = s.u.clone();
    for i in 0..rows {
        for j in 0..s.sigma.len() {
            let v = us.get(&[i, j]) * s.sigma[j];
            us.set(&[i, j], v);
        }
    }
    let rec = us.matmul(&s.vh).unwrap();
    println!("svd reconstruction err {:.3e} (rel {:.3e})", rec.dist(&mat), rec.dist(&mat) / mat.norm());
    println!("sigma head {:?}", &s.sigma[..s.sigma.len().min(6)]);
    println!("sigma tail {:?}", &s.sigma[s.sigma.len().saturating_sub(4)..]);
    let utu = s.u.dagger().unwrap().matmul(&s.u).unwrap();
    println!("U^H U defect {:.3e}", utu.dist(&ComplexTensor::identity(utu.shape()[0])));
    let vvh = s.vh.matmul(&s.vh.dagger().unwrap()).unwrap();
    println!("Vh Vh^H defect {:.3e}", vvh.dist(&ComplexTensor::identity(vvh.shape()[0])));
}
