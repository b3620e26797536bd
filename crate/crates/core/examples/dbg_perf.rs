use mpdosim_core::linalg::{qr, svd, hermitian_eig};
use mpdosim_core::tensor::{C64, ComplexTensor};
use rand::{Rng, SeedableRng};
use std::time::Instant;

fn rnd(rng: &mut rand_chacha::ChaCha12Rng, r: usize, c: usize) -> ComplexTensor {
    let data: Vec<C64> = (0..r * c)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    ComplexTensor::new(vec![r, c], data).unwrap()
}

fn main() {
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
    for &(r, c) in &[(32usize, 64usize), (64, 256), (128, 512), (256, 1024), (512, 2048), (64, 64), (128, 128)] {
        let m = rnd(&mut rng, r, c);
        let t0 = Instant::now();
        let s = svd(&m).unwrap();
        let t_svd = t0.elapsed();
        let t0 = Instant::now();
        let _ = qr(&m).unwrap();
        let t_qr = t0.elapsed();
        println!("{r}x{c}: svd {t_svd:?} (k={}), qr {t_qr:?}", s.sigma.len());
    }
    let h = {
        let g = rnd(&mut rng, 64, 64);
        g.matmul(&g.dagger().unwrap()).unwrap()
    };
    let t0 = Instant::now();
    let _ = hermitian_eig(&h).unwrap();
    println!("eig 64: {:?}", t0.elapsed());
}
