//! State and distribution metrics: quantum fidelity, Jensen-Shannon
//! divergence, and trace distance.

use crate::error::{CoreError, Result};
use crate::linalg::hermitian_eig_with_tol;
use crate::tensor::{C64, ComplexTensor};

/// Eigenvalues below this (negative) floor mark an input as non-PSD;
/// anything in `[-floor, 0)` is treated as truncation round-off and
/// clipped to zero.
pub const PSD_FLOOR: f64 = 1e-8;

/// Relative floor under which eigenvalues are treated as exact zeros
/// before a square root. Solver round-off sits near 1e-16 of the largest
/// eigenvalue; without the floor it would surface as ~1e-8 after sqrt.
const SQRT_REL_FLOOR: f64 = 1e-13;

fn psd_sqrt(rho: &ComplexTensor) -> Result<ComplexTensor> {
    let (eta, psi) = hermitian_eig_with_tol(rho, 1e-6)?;
    if let Some(&lowest) = eta.last() {
        if lowest < -PSD_FLOOR {
            return Err(CoreError::Validation(format!(
                "density matrix has eigenvalue {lowest:.3e} below the -{PSD_FLOOR:.0e} floor"
            )));
        }
    }
    let floor = SQRT_REL_FLOOR * eta.first().copied().unwrap_or(0.0).max(0.0);
    let d = rho.shape()[0];
    let mut out = ComplexTensor::zeros(vec![d, d]);
    for j in 0..d {
        let w = if eta[j] > floor { eta[j].sqrt() } else { 0.0 };
        if w == 0.0 {
            continue;
        }
        for r in 0..d {
            for s in 0..d {
                let v = out.get(&[r, s]) + psi.get(&[r, j]) * psi.get(&[s, j]).conj() * w;
                out.set(&[r, s], v);
            }
        }
    }
    Ok(out)
}

/// Check a density matrix is Hermitian and unit trace within loose
/// tolerances before using it in a metric.
fn check_density(rho: &ComplexTensor, what: &str) -> Result<()> {
    if rho.rank() != 2 || rho.shape()[0] != rho.shape()[1] {
        return Err(CoreError::Shape(format!("{what} must be a square matrix")));
    }
    let herm = rho.sub(&rho.dagger()?)?.norm();
    if herm > 1e-6 {
        return Err(CoreError::NonHermitian { defect: herm, tol: 1e-6 });
    }
    let tr = rho.trace()?;
    if (tr.re - 1.0).abs() > 1e-6 || tr.im.abs() > 1e-8 {
        return Err(CoreError::Validation(format!(
            "{what} trace {tr} is not 1 within tolerance"
        )));
    }
    Ok(())
}

/// Quantum fidelity `(tr sqrt(sqrt(ρ) σ sqrt(ρ)))²`, computed through
/// Hermitian eigendecompositions with the PSD floor applied.
pub fn fidelity(rho: &ComplexTensor, sigma: &ComplexTensor) -> Result<f64> {
    check_density(rho, "rho")?;
    check_density(sigma, "sigma")?;
    if rho.shape() != sigma.shape() {
        return Err(CoreError::Shape("fidelity requires equal dimensions".into()));
    }
    let sr = psd_sqrt(rho)?;
    let inner = sr.matmul(sigma)?.matmul(&sr)?;
    // inner is Hermitian PSD up to round-off; symmetrize and take sqrt
    // eigenvalues.
    let sym = inner.add(&inner.dagger()?)?.scale(C64::new(0.5, 0.0));
    let (eta, _) = hermitian_eig_with_tol(&sym, 1e-6)?;
    let floor = SQRT_REL_FLOOR * eta.first().copied().unwrap_or(0.0).max(0.0);
    let root_sum: f64 = eta
        .iter()
        .map(|&e| if e > floor { e.sqrt() } else { 0.0 })
        .sum();
    Ok(root_sum * root_sum)
}

/// Trace distance `½ ‖ρ − σ‖₁`.
pub fn trace_distance(rho: &ComplexTensor, sigma: &ComplexTensor) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(CoreError::Shape("trace distance requires equal dimensions".into()));
    }
    let diff = rho.sub(sigma)?;
    let sym = diff.add(&diff.dagger()?)?.scale(C64::new(0.5, 0.0));
    let (eta, _) = hermitian_eig_with_tol(&sym, 1e-6)?;
    Ok(0.5 * eta.iter().map(|e| e.abs()).sum::<f64>())
}

/// Jensen-Shannon divergence with natural logarithm:
/// `½ Σ P_i ln(P_i/M_i) + ½ Σ Q_i ln(Q_i/M_i)` where `M = (P+Q)/2` and
/// `0·ln(0/x) ≡ 0`.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(CoreError::Parameter(format!(
            "distribution lengths differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    for (name, dist) in [("P", p), ("Q", q)] {
        let mut sum = 0.0;
        for &x in dist {
            if x < -1e-12 || !x.is_finite() {
                return Err(CoreError::Parameter(format!("{name} has invalid entry {x}")));
            }
            sum += x;
        }
        if (sum - 1.0).abs() > 1e-8 {
            return Err(CoreError::Parameter(format!("{name} sums to {sum}, not 1")));
        }
    }
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let pi = pi.max(0.0);
        let qi = qi.max(0.0);
        let m = 0.5 * (pi + qi);
        if pi > 0.0 {
            acc += 0.5 * pi * (pi / m).ln();
        }
        if qi > 0.0 {
            acc += 0.5 * qi * (qi / m).ln();
        }
    }
    Ok(acc.max(0.0))
}
