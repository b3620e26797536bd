//! Quantum channel representations (Kraus, χ, Choi), conversions between
//! them, CPTP validation, and the built-in noise-model constructors.
//!
//! Conventions:
//! - vectorization is column-stacking, `vec(M)[c*d + r] = M[r][c]`;
//! - the Choi matrix of a channel with Kraus operators `K_i` is
//!   `Λ = Σ_i |K_i⟩⟩⟨⟨K_i|`, so `tr Λ = d` for trace-preserving maps;
//! - the χ basis is the unnormalized Pauli strings `{I,X,Y,Z}^⊗n` in
//!   lexicographic order, with qubit 0 the most significant digit.

use crate::error::{CoreError, Result};
use crate::linalg::{hermitian_eig_with_tol, unitarity_defect};
use crate::tensor::{C64, ComplexTensor};

/// Completeness tolerance required of channel constructors.
pub const CONSTRUCTOR_CPTP_TOL: f64 = 1e-10;
/// Completeness tolerance required of conversion outputs.
pub const CONVERSION_CPTP_TOL: f64 = 1e-8;
/// Default floor under which slightly negative Choi eigenvalues are
/// clipped to zero; anything more negative is treated as corrupt data.
pub const DEFAULT_EIG_FLOOR: f64 = 1e-6;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// The four single-qubit Pauli matrices `[I, X, Y, Z]`.
pub fn pauli_matrices() -> [ComplexTensor; 4] {
    let i = ComplexTensor::identity(2);
    let x = ComplexTensor::new(
        vec![2, 2],
        vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
    )
    .unwrap();
    let y = ComplexTensor::new(
        vec![2, 2],
        vec![c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)],
    )
    .unwrap();
    let z = ComplexTensor::new(
        vec![2, 2],
        vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
    )
    .unwrap();
    [i, x, y, z]
}

/// The 4^n Pauli strings for `n` qubits in lexicographic order.
pub fn pauli_basis(n_qubits: usize) -> Vec<ComplexTensor> {
    let singles = pauli_matrices();
    let mut basis = vec![ComplexTensor::identity(1)];
    for _ in 0..n_qubits {
        let mut next = Vec::with_capacity(basis.len() * 4);
        for b in &basis {
            for s in &singles {
                next.push(b.kron(s).unwrap());
            }
        }
        basis = next;
    }
    basis
}

/// Column-stacking vectorization of a d×d matrix.
pub fn vectorize(m: &ComplexTensor) -> ComplexTensor {
    let d = m.shape()[0];
    let mut data = Vec::with_capacity(d * d);
    for col in 0..d {
        for row in 0..d {
            data.push(m.get(&[row, col]));
        }
    }
    ComplexTensor::new(vec![d * d], data).unwrap()
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &[C64]) -> Result<ComplexTensor> {
    let d2 = v.len();
    let d = (d2 as f64).sqrt().round() as usize;
    if d * d != d2 {
        return Err(CoreError::Shape(format!("vector length {d2} is not a square")));
    }
    let mut m = ComplexTensor::zeros(vec![d, d]);
    for col in 0..d {
        for row in 0..d {
            m.set(&[row, col], v[col * d + row]);
        }
    }
    Ok(m)
}

/// CPTP validation report. The headline `defect` is the Frobenius norm of
/// `Σ K_i†K_i − I` normalized by √d so a fully missing half of the
/// identity reads as 0.5 regardless of dimension.
#[derive(Debug, Clone)]
pub struct CptpReport {
    pub defect: f64,
    pub frobenius_defect: f64,
    pub trace_defect: f64,
    pub tol: f64,
    pub pass: bool,
}

/// A channel in Kraus form: `ρ ↦ Σ_i K_i ρ K_i†`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    n_qubits: usize,
    operators: Vec<ComplexTensor>,
}

impl KrausChannel {
    /// Build from explicit operators. Requires at least one operator, all
    /// square with dimension 2^n_qubits; completeness is not enforced here
    /// (use [`KrausChannel::validate_cptp`]).
    pub fn from_operators(n_qubits: usize, operators: Vec<ComplexTensor>) -> Result<Self> {
        if operators.is_empty() {
            return Err(CoreError::Parameter("channel needs at least one operator".into()));
        }
        let d = 1usize << n_qubits;
        for op in &operators {
            if op.rank() != 2 || op.shape() != [d, d] {
                return Err(CoreError::Shape(format!(
                    "Kraus operator shape {:?} does not match {} qubits",
                    op.shape(),
                    n_qubits
                )));
            }
            if !op.all_finite() {
                return Err(CoreError::NumericInput("Kraus operator has non-finite entries".into()));
            }
        }
        Ok(Self { n_qubits, operators })
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            operators: vec![ComplexTensor::identity(1 << n_qubits)],
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// Number of Kraus operators.
    pub fn rank(&self) -> usize {
        self.operators.len()
    }

    pub fn operators(&self) -> &[ComplexTensor] {
        &self.operators
    }

    /// `Σ K_i† K_i`.
    pub fn completeness_sum(&self) -> ComplexTensor {
        let d = self.dim();
        let mut acc = ComplexTensor::zeros(vec![d, d]);
        for k in &self.operators {
            acc = acc.add(&k.dagger().unwrap().matmul(k).unwrap()).unwrap();
        }
        acc
    }

    /// Report completeness defects against `tol` (applied to the
    /// normalized defect).
    pub fn validate_cptp(&self, tol: f64) -> CptpReport {
        let d = self.dim();
        let sum = self.completeness_sum();
        let id = ComplexTensor::identity(d);
        let frob = sum.sub(&id).unwrap().norm();
        let defect = frob / (d as f64).sqrt();
        let trace_defect = (d as f64 - sum.trace().unwrap().re) / d as f64;
        CptpReport {
            defect,
            frobenius_defect: frob,
            trace_defect,
            tol,
            pass: defect <= tol,
        }
    }

    /// Apply the channel to a dense density matrix of matching dimension.
    pub fn apply_dense(&self, rho: &ComplexTensor) -> Result<ComplexTensor> {
        let d = self.dim();
        if rho.shape() != [d, d] {
            return Err(CoreError::Shape(format!(
                "density matrix shape {:?} does not match channel dimension {d}",
                rho.shape()
            )));
        }
        let mut acc = ComplexTensor::zeros(vec![d, d]);
        for k in &self.operators {
            acc = acc.add(&k.matmul(rho)?.matmul(&k.dagger()?)?)?;
        }
        Ok(acc)
    }

    /// The channel that applies `self` first and `after` second.
    pub fn then(&self, after: &KrausChannel) -> Result<KrausChannel> {
        if self.n_qubits != after.n_qubits {
            return Err(CoreError::Shape("channel composition needs equal qubit counts".into()));
        }
        let mut ops = Vec::with_capacity(self.rank() * after.rank());
        for a in &after.operators {
            for b in &self.operators {
                ops.push(a.matmul(b)?);
            }
        }
        KrausChannel::from_operators(self.n_qubits, ops)
    }

    /// Tensor product acting on the concatenation of both qubit sets, with
    /// `self` on the most significant block.
    pub fn tensor_product(&self, other: &KrausChannel) -> Result<KrausChannel> {
        let mut ops = Vec::with_capacity(self.rank() * other.rank());
        for a in &self.operators {
            for b in &other.operators {
                ops.push(a.kron(b)?);
            }
        }
        KrausChannel::from_operators(self.n_qubits + other.n_qubits, ops)
    }

    /// Drop operators that are numerically zero.
    fn pruned(self) -> Self {
        let scale: f64 = self
            .operators
            .iter()
            .map(|k| k.norm())
            .fold(0.0, f64::max)
            .max(1e-300);
        let kept: Vec<ComplexTensor> = self
            .operators
            .into_iter()
            .filter(|k| k.norm() > 1e-15 * scale)
            .collect();
        Self { n_qubits: self.n_qubits, operators: kept }
    }
}

/// Single-qubit depolarizing channel with operators
/// `sqrt(1−3p/4)·I`, `sqrt(p/4)·{X, Y, Z}`.
pub fn depolarizing(p: f64) -> Result<KrausChannel> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(CoreError::Parameter(format!("depolarizing probability {p} outside [0,1]")));
    }
    let [i, x, y, z] = pauli_matrices();
    let k0 = i.scale(c((1.0 - 0.75 * p).sqrt(), 0.0));
    let w = c((p / 4.0).sqrt(), 0.0);
    let ops = vec![k0, x.scale(w), y.scale(w), z.scale(w)];
    Ok(KrausChannel::from_operators(1, ops)?.pruned())
}

/// Single-qubit bit-flip channel `{sqrt(1−p)·I, sqrt(p)·X}`, used for
/// state-preparation and measurement (SPAM) errors.
pub fn bit_flip(p: f64) -> Result<KrausChannel> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(CoreError::Parameter(format!("bit-flip probability {p} outside [0,1]")));
    }
    let [i, x, _, _] = pauli_matrices();
    let ops = vec![i.scale(c((1.0 - p).sqrt(), 0.0)), x.scale(c(p.sqrt(), 0.0))];
    Ok(KrausChannel::from_operators(1, ops)?.pruned())
}

/// Thermal relaxation over `duration`: amplitude damping at rate 1/t1
/// composed with pure dephasing chosen so the total coherence decay is
/// `exp(−duration/t2)`. Zero excited-state thermal population.
pub fn thermal_relaxation(t1: f64, t2: f64, duration: f64) -> Result<KrausChannel> {
    if !(t1 > 0.0) || !(t2 > 0.0) || !duration.is_finite() || duration < 0.0 {
        return Err(CoreError::Parameter(format!(
            "thermal relaxation needs t1>0, t2>0, duration>=0 (got t1={t1}, t2={t2}, duration={duration})"
        )));
    }
    if t2 > 2.0 * t1 + 1e-12 * t1 {
        return Err(CoreError::Unphysical(format!("t2 = {t2} exceeds 2*t1 = {}", 2.0 * t1)));
    }
    let gamma = 1.0 - (-duration / t1).exp();
    // Residual dephasing beyond what amplitude damping already causes.
    let phi_rate = (1.0 / t2 - 0.5 / t1).max(0.0);
    let lambda = 1.0 - (-2.0 * duration * phi_rate).exp();

    let a0 = ComplexTensor::matrix_from_rows(&[
        &[c(1.0, 0.0), c(0.0, 0.0)],
        &[c(0.0, 0.0), c((1.0 - gamma).sqrt(), 0.0)],
    ])?;
    let a1 = ComplexTensor::matrix_from_rows(&[
        &[c(0.0, 0.0), c(gamma.sqrt(), 0.0)],
        &[c(0.0, 0.0), c(0.0, 0.0)],
    ])?;
    let damping = KrausChannel::from_operators(1, vec![a0, a1])?.pruned();

    let p0 = ComplexTensor::matrix_from_rows(&[
        &[c(1.0, 0.0), c(0.0, 0.0)],
        &[c(0.0, 0.0), c((1.0 - lambda).sqrt(), 0.0)],
    ])?;
    let p1 = ComplexTensor::matrix_from_rows(&[
        &[c(0.0, 0.0), c(0.0, 0.0)],
        &[c(0.0, 0.0), c(lambda.sqrt(), 0.0)],
    ])?;
    let dephasing = KrausChannel::from_operators(1, vec![p0, p1])?.pruned();

    Ok(damping.then(&dephasing)?.pruned())
}

/// Process (χ) matrix in the fixed Pauli-string basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiMatrix {
    n_qubits: usize,
    entries: ComplexTensor,
}

impl ChiMatrix {
    pub fn new(n_qubits: usize, entries: ComplexTensor) -> Result<Self> {
        Self::with_tolerance(n_qubits, entries, 1e-8)
    }

    /// Looser Hermiticity tolerance for measured data.
    pub fn with_tolerance(n_qubits: usize, entries: ComplexTensor, tol: f64) -> Result<Self> {
        let d2 = 1usize << (2 * n_qubits);
        if entries.shape() != [d2, d2] {
            return Err(CoreError::Shape(format!(
                "chi matrix shape {:?} does not match {} qubits (want {d2}x{d2})",
                entries.shape(),
                n_qubits
            )));
        }
        let defect = entries.sub(&entries.dagger()?)?.norm();
        if defect > tol {
            return Err(CoreError::NonHermitian { defect, tol });
        }
        Ok(Self { n_qubits, entries })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn entries(&self) -> &ComplexTensor {
        &self.entries
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.entries.sub(&self.entries.dagger().unwrap()).unwrap().norm()
    }

    /// Apply the process directly by Σ_mn χ_mn σ_m ρ σ_n. Exponential in
    /// qubit count; used as the independent reference route in tests.
    pub fn apply_dense(&self, rho: &ComplexTensor) -> Result<ComplexTensor> {
        let d = 1usize << self.n_qubits;
        if rho.shape() != [d, d] {
            return Err(CoreError::Shape("density matrix does not match chi dimension".into()));
        }
        let basis = pauli_basis(self.n_qubits);
        let mut acc = ComplexTensor::zeros(vec![d, d]);
        for (m, sm) in basis.iter().enumerate() {
            for (n, sn) in basis.iter().enumerate() {
                let w = self.entries.get(&[m, n]);
                if w.norm() < 1e-300 {
                    continue;
                }
                let term = sm.matmul(rho)?.matmul(&sn.dagger()?)?;
                acc = acc.add(&term.scale(w))?;
            }
        }
        Ok(acc)
    }
}

/// Choi matrix `Λ = Σ_i |K_i⟩⟩⟨⟨K_i|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    n_qubits: usize,
    entries: ComplexTensor,
}

impl ChoiMatrix {
    pub fn new(n_qubits: usize, entries: ComplexTensor) -> Result<Self> {
        let d2 = 1usize << (2 * n_qubits);
        if entries.shape() != [d2, d2] {
            return Err(CoreError::Shape(format!(
                "Choi matrix shape {:?} does not match {} qubits",
                entries.shape(),
                n_qubits
            )));
        }
        let defect = entries.sub(&entries.dagger()?)?.norm();
        if defect > 1e-8 {
            return Err(CoreError::NonHermitian { defect, tol: 1e-8 });
        }
        Ok(Self { n_qubits, entries })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn entries(&self) -> &ComplexTensor {
        &self.entries
    }

    /// |tr Λ − d| for trace-preserving channels.
    pub fn trace_defect(&self) -> f64 {
        let d = 1usize << self.n_qubits;
        let t = self.entries.trace().unwrap();
        ((t.re - d as f64).powi(2) + t.im.powi(2)).sqrt()
    }
}

/// Basis matrix whose columns are the vectorized Pauli strings.
fn pauli_vec_basis(n_qubits: usize) -> ComplexTensor {
    let d2 = 1usize << (2 * n_qubits);
    let basis = pauli_basis(n_qubits);
    let mut b = ComplexTensor::zeros(vec![d2, d2]);
    for (m, sigma) in basis.iter().enumerate() {
        let v = vectorize(sigma);
        for r in 0..d2 {
            b.set(&[r, m], v.data()[r]);
        }
    }
    b
}

/// χ → Choi: `Λ = Σ_mn χ_mn |σ_m⟩⟩⟨⟨σ_n|`.
pub fn chi_to_choi(chi: &ChiMatrix) -> Result<ChoiMatrix> {
    let b = pauli_vec_basis(chi.n_qubits);
    // Symmetrize so mild measured non-Hermiticity cannot leak through.
    let sym = chi
        .entries
        .add(&chi.entries.dagger()?)?
        .scale(c(0.5, 0.0));
    let lambda = b.matmul(&sym)?.matmul(&b.dagger()?)?;
    ChoiMatrix::new(chi.n_qubits, lambda)
}

/// Choi → χ, the inverse basis change (columns of the Pauli vec basis are
/// orthogonal with norm² = d, hence the d² normalization).
pub fn choi_to_chi(choi: &ChoiMatrix) -> Result<ChiMatrix> {
    let d2 = 1usize << (2 * choi.n_qubits);
    let b = pauli_vec_basis(choi.n_qubits);
    let raw = b.dagger()?.matmul(&choi.entries)?.matmul(&b)?;
    let chi = raw.scale(c(1.0 / d2 as f64, 0.0));
    ChiMatrix::new(choi.n_qubits, chi)
}

/// Kraus → Choi.
pub fn kraus_to_choi(channel: &KrausChannel) -> Result<ChoiMatrix> {
    let d = channel.dim();
    let d2 = d * d;
    let mut lambda = ComplexTensor::zeros(vec![d2, d2]);
    for k in channel.operators() {
        let v = vectorize(k);
        for a in 0..d2 {
            for b in 0..d2 {
                let cur = lambda.get(&[a, b]);
                lambda.set(&[a, b], cur + v.data()[a] * v.data()[b].conj());
            }
        }
    }
    ChoiMatrix::new(channel.n_qubits, lambda)
}

/// Kraus → χ via the Choi form.
pub fn kraus_to_chi(channel: &KrausChannel) -> Result<ChiMatrix> {
    choi_to_chi(&kraus_to_choi(channel)?)
}

/// Outcome of a Choi → Kraus conversion, including the η spectrum and
/// pruning diagnostics.
#[derive(Debug, Clone)]
pub struct KrausConversion {
    pub channel: KrausChannel,
    /// Full Choi eigenvalue spectrum, descending.
    pub eigenvalues: Vec<f64>,
    /// Operators kept after clipping and the optional rank cutoff.
    pub kept: usize,
    /// Trace-normalized completeness defect before rescaling,
    /// `Σ discarded η / d`.
    pub trace_defect_before_rescale: f64,
    /// Global factor applied to restore `tr(Σ K†K)/d = 1` (1.0 when no
    /// positive weight was discarded).
    pub rescale_factor: f64,
}

/// Rotate eigenvector columns inside clusters of (numerically) equal Choi
/// eigenvalues. The basis of a degenerate subspace is arbitrary, which
/// would make pruning depend on solver round-off; we fix it by choosing,
/// greedily per column, the combination whose Kraus operator is closest
/// to trace-preserving in isolation (smallest traceless part of K†K).
/// Pruning then discards the least trace-preserving directions first and
/// the global rescale stays a small correction.
fn canonicalize_degenerate_clusters(
    n_qubits: usize,
    eta: &[f64],
    psi: &mut ComplexTensor,
) -> Result<()> {
    let d = 1usize << n_qubits;
    let d2 = d * d;
    let eta_scale = eta.iter().fold(0.0f64, |m, e| m.max(e.abs())).max(1e-300);
    let mut start = 0;
    while start < eta.len() {
        let mut end = start + 1;
        while end < eta.len() && (eta[start] - eta[end]).abs() <= 1e-9 * eta_scale {
            end += 1;
        }
        let k = end - start;
        if k > 1 && eta[start] > 0.0 {
            // Cluster operators B_i = unvec(psi column).
            let ops: Result<Vec<ComplexTensor>> = (start..end)
                .map(|col| {
                    let v: Vec<C64> = (0..d2).map(|r| psi.get(&[r, col])).collect();
                    unvectorize(&v)
                })
                .collect();
            let mut ops = ops?;

            let defect = |op: &ComplexTensor| -> f64 {
                let g = op.dagger().unwrap().matmul(op).unwrap();
                let tr = g.trace().unwrap() / d as f64;
                let traceless = g
                    .sub(&ComplexTensor::identity(d).scale(tr))
                    .unwrap();
                traceless.norm()
            };

            // Pairwise sweeps: rotate each column pair by the (θ, φ) grid
            // point minimizing the summed individual defects, refined once
            // on a finer local grid. Deterministic by construction.
            for _sweep in 0..3 {
                for p in 0..k {
                    for q in p + 1..k {
                        let bp = ops[p].clone();
                        let bq = ops[q].clone();
                        let eval = |theta: f64, phi: f64| -> f64 {
                            let (ct, st) = (theta.cos(), theta.sin());
                            let e = C64::from_polar(1.0, phi);
                            let cp = bp.scale(c(ct, 0.0)).add(&bq.scale(e * st)).unwrap();
                            let cq =
                                bp.scale(c(-st, 0.0)).add(&bq.scale(e * ct)).unwrap();
                            defect(&cp) + defect(&cq)
                        };
                        let mut best = (0.0f64, 0.0f64, eval(0.0, 0.0));
                        let scan = |t_lo: f64, t_hi: f64, p_lo: f64, p_hi: f64,
                                        steps: usize,
                                        best: &mut (f64, f64, f64)| {
                            for ti in 0..=steps {
                                let theta =
                                    t_lo + (t_hi - t_lo) * ti as f64 / steps as f64;
                                for pi in 0..steps {
                                    let phi =
                                        p_lo + (p_hi - p_lo) * pi as f64 / steps as f64;
                                    let v = eval(theta, phi);
                                    if v < best.2 - 1e-15 {
                                        *best = (theta, phi, v);
                                    }
                                }
                            }
                        };
                        scan(
                            -std::f64::consts::FRAC_PI_4,
                            std::f64::consts::FRAC_PI_4,
                            0.0,
                            2.0 * std::f64::consts::PI,
                            24,
                            &mut best,
                        );
                        let dt = std::f64::consts::FRAC_PI_4 / 12.0;
                        let dp = std::f64::consts::PI / 12.0;
                        scan(best.0 - dt, best.0 + dt, best.1 - dp, best.1 + dp, 16, &mut best);
                        scan(
                            best.0 - dt / 8.0,
                            best.0 + dt / 8.0,
                            best.1 - dp / 8.0,
                            best.1 + dp / 8.0,
                            16,
                            &mut best,
                        );
                        let (theta, phi, _) = best;
                        if theta != 0.0 || phi != 0.0 {
                            let (ct, st) = (theta.cos(), theta.sin());
                            let e = C64::from_polar(1.0, phi);
                            let cp = bp.scale(c(ct, 0.0)).add(&bq.scale(e * st))?;
                            let cq = bp.scale(c(-st, 0.0)).add(&bq.scale(e * ct))?;
                            ops[p] = cp;
                            ops[q] = cq;
                        }
                    }
                }
            }
            // Keep the most trace-preserving directions first.
            let mut order: Vec<usize> = (0..k).collect();
            let defects: Vec<f64> = ops.iter().map(&defect).collect();
            order.sort_by(|&a, &b| {
                defects[a].partial_cmp(&defects[b]).unwrap_or(std::cmp::Ordering::Equal)
            });
            for (slot, &src) in order.iter().enumerate() {
                let v = vectorize(&ops[src]);
                // Dominant-entry phase gauge.
                let mut best_row = 0usize;
                let mut best_mag = -1.0f64;
                for r in 0..d2 {
                    let mag = v.data()[r].norm();
                    if mag > best_mag {
                        best_row = r;
                        best_mag = mag;
                    }
                }
                let pivot = v.data()[best_row];
                let adj = if pivot.norm() > 0.0 {
                    (pivot / pivot.norm()).conj()
                } else {
                    c(1.0, 0.0)
                };
                for r in 0..d2 {
                    psi.set(&[r, start + slot], v.data()[r] * adj);
                }
            }
        }
        start = end;
    }
    Ok(())
}

/// Choi → Kraus: eigendecompose, keep positive modes (descending η),
/// clip eigenvalues in `(−eig_floor, 0]` to zero, and optionally prune to
/// `rank_cutoff` with a global rescale restoring trace preservation.
pub fn choi_to_kraus(
    choi: &ChoiMatrix,
    rank_cutoff: Option<usize>,
    eig_floor: f64,
) -> Result<KrausConversion> {
    let d = 1usize << choi.n_qubits;
    let (eta, mut psi) = hermitian_eig_with_tol(&choi.entries, 1e-6)?;
    canonicalize_degenerate_clusters(choi.n_qubits, &eta, &mut psi)?;
    if let Some(&lowest) = eta.last() {
        if lowest < -eig_floor {
            return Err(CoreError::NonCompletelyPositive { eigenvalue: lowest, floor: eig_floor });
        }
    }
    // Numerical rank: treat eigenvalues at round-off scale as zeros.
    let eta_max = eta.first().copied().unwrap_or(0.0).max(0.0);
    let rank_floor = 1e-12 * eta_max;
    let positive: Vec<(usize, f64)> = eta
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, e)| e > rank_floor)
        .collect();
    if positive.is_empty() {
        return Err(CoreError::Validation("Choi matrix has no positive eigenvalues".into()));
    }
    let keep = rank_cutoff.map_or(positive.len(), |k| k.max(1).min(positive.len()));
    let kept_weight: f64 = positive[..keep].iter().map(|&(_, e)| e).sum();
    let dropped_weight: f64 = positive[keep..].iter().map(|&(_, e)| e).sum();
    let trace_defect_before_rescale = dropped_weight / d as f64;
    let rescale = if dropped_weight > 0.0 && keep < positive.len() {
        (d as f64 / kept_weight).sqrt()
    } else {
        1.0
    };

    let d2 = d * d;
    let mut ops = Vec::with_capacity(keep);
    for &(col, e) in &positive[..keep] {
        let mut v = Vec::with_capacity(d2);
        for r in 0..d2 {
            v.push(psi.get(&[r, col]));
        }
        let a = unvectorize(&v)?;
        ops.push(a.scale(c(e.sqrt() * rescale, 0.0)));
    }
    let channel = KrausChannel::from_operators(choi.n_qubits, ops)?;
    Ok(KrausConversion {
        channel,
        eigenvalues: eta,
        kept: keep,
        trace_defect_before_rescale,
        rescale_factor: rescale,
    })
}

/// A noisy operation factored as ideal gate times per-slice noise
/// operators, stacked along a trailing noise axis:
/// axes are (out_0..out_{n-1}, in_0..in_{n-1}, noise).
#[derive(Debug, Clone)]
pub struct NoiseTensor {
    n_qubits: usize,
    data: ComplexTensor,
}

impl NoiseTensor {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Extent of the noise axis.
    pub fn noise_rank(&self) -> usize {
        *self.data.shape().last().unwrap()
    }

    pub fn data(&self) -> &ComplexTensor {
        &self.data
    }

    /// The d×d noise operator at one noise index.
    pub fn slice(&self, i: usize) -> Result<ComplexTensor> {
        let d = 1usize << self.n_qubits;
        let last = self.data.rank() - 1;
        self.data.slice_axis(last, i)?.reshape(vec![d, d])
    }
}

/// Factor a noisy channel as `K_i = N_i·K̃` for a unitary ideal gate `K̃`,
/// returning the `N_i` stacked along the noise axis.
pub fn factor_noise(channel: &KrausChannel, ideal_gate: &ComplexTensor) -> Result<NoiseTensor> {
    let d = channel.dim();
    if ideal_gate.shape() != [d, d] {
        return Err(CoreError::Shape("ideal gate dimension does not match channel".into()));
    }
    let defect = unitarity_defect(ideal_gate)?;
    if defect > 1e-8 {
        return Err(CoreError::Parameter(format!(
            "ideal gate is not unitary (defect {defect:.3e})"
        )));
    }
    let gate_dag = ideal_gate.dagger()?;
    let r = channel.rank();
    // Build as (noise, out, in), then move the noise axis last.
    let mut stacked = Vec::with_capacity(r * d * d);
    for k in channel.operators() {
        let n = k.matmul(&gate_dag)?;
        stacked.extend_from_slice(n.data());
    }
    let t = ComplexTensor::new(vec![r, d, d], stacked)?
        .permute(&[1, 2, 0])?;
    let n = channel.n_qubits();
    let mut shape = vec![2usize; 2 * n];
    shape.push(r);
    Ok(NoiseTensor { n_qubits: n, data: t.reshape(shape)? })
}

/// Stack a channel's Kraus operators along a leading noise axis, producing
/// the (noise, out, in) tensor contracted into site tensors by the MPDO
/// engine.
pub fn stacked_kraus_tensor(channel: &KrausChannel) -> ComplexTensor {
    let d = channel.dim();
    let r = channel.rank();
    let mut data = Vec::with_capacity(r * d * d);
    for k in channel.operators() {
        data.extend_from_slice(k.data());
    }
    ComplexTensor::new(vec![r, d, d], data).unwrap()
}


#[cfg(test)]
mod tests {
    use super::test_support::{random_channel, random_density};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn ket0_density() -> ComplexTensor {
        ComplexTensor::matrix_from_rows(&[
            &[c(1.0, 0.0), c(0.0, 0.0)],
            &[c(0.0, 0.0), c(0.0, 0.0)],
        ])
        .unwrap()
    }

    fn ket1_density() -> ComplexTensor {
        ComplexTensor::matrix_from_rows(&[
            &[c(0.0, 0.0), c(0.0, 0.0)],
            &[c(0.0, 0.0), c(1.0, 0.0)],
        ])
        .unwrap()
    }

    #[test]
    fn depolarizing_zero_probability_is_identity() {
        let ch = depolarizing(0.0).unwrap();
        assert_eq!(ch.rank(), 1);
        assert!(ch.operators()[0].dist(&ComplexTensor::identity(2)) < 1e-15);
    }

    #[test]
    fn depolarizing_leading_prefactor() {
        let ch = depolarizing(0.2).unwrap();
        let want = 0.85f64.sqrt();
        assert!((ch.operators()[0].get(&[0, 0]).re - want).abs() < 1e-15);
    }

    #[test]
    fn depolarizing_action_matches_closed_form() {
        // (1-p)ρ + p I/2 on |0><0| gives diag(1-p/2, p/2).
        let ch = depolarizing(0.1).unwrap();
        let out = ch.apply_dense(&ket0_density()).unwrap();
        assert!((out.get(&[0, 0]).re - 0.95).abs() < 1e-14);
        assert!((out.get(&[1, 1]).re - 0.05).abs() < 1e-14);
        assert!(out.get(&[0, 1]).norm() < 1e-14);
    }

    #[test]
    fn depolarizing_rejects_bad_probability() {
        assert!(depolarizing(-0.1).is_err());
        assert!(depolarizing(1.5).is_err());
    }

    #[test]
    fn depolarizing_matches_mixing_formula_many_p() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for _ in 0..50 {
            let p: f64 = rand::Rng::gen_range(&mut rng, 0.0..1.0);
            let ch = depolarizing(p).unwrap();
            let rho = random_density(&mut rng, 2);
            let out = ch.apply_dense(&rho).unwrap();
            let want = rho
                .scale(c(1.0 - p, 0.0))
                .add(&ComplexTensor::identity(2).scale(c(p / 2.0, 0.0)))
                .unwrap();
            assert!(out.dist(&want) < 1e-12);
            assert!(ch.validate_cptp(1e-10).pass);
        }
    }

    #[test]
    fn bit_flip_examples() {
        assert_eq!(bit_flip(0.0).unwrap().rank(), 1);
        let full = bit_flip(1.0).unwrap();
        let out = full.apply_dense(&ket0_density()).unwrap();
        assert!(out.dist(&ket1_density()) < 1e-14);
        let partial = bit_flip(0.3).unwrap();
        let out = partial.apply_dense(&ket0_density()).unwrap();
        assert!((out.get(&[0, 0]).re - 0.7).abs() < 1e-14);
        assert!((out.get(&[1, 1]).re - 0.3).abs() < 1e-14);
    }

    #[test]
    fn thermal_relaxation_zero_duration_is_identity() {
        let ch = thermal_relaxation(17.01e-6, 22.58e-6, 0.0).unwrap();
        assert_eq!(ch.rank(), 1);
        assert!(ch.operators()[0].dist(&ComplexTensor::identity(2)) < 1e-12);
    }

    #[test]
    fn thermal_relaxation_accepts_table_parameters() {
        let ch = thermal_relaxation(17.01e-6, 22.58e-6, 60e-9).unwrap();
        assert!(ch.validate_cptp(1e-10).pass);
    }

    #[test]
    fn thermal_relaxation_full_decay() {
        let ch = thermal_relaxation(1.0, 1.2, 1e9).unwrap();
        let out = ch.apply_dense(&ket1_density()).unwrap();
        assert!(out.dist(&ket0_density()) < 1e-6);
    }

    #[test]
    fn thermal_relaxation_rejects_unphysical_t2() {
        assert!(matches!(
            thermal_relaxation(1.0, 2.5, 0.1),
            Err(CoreError::Unphysical(_))
        ));
    }

    #[test]
    fn chi_of_identity_process_converts_to_bell_choi() {
        let d2 = 4;
        let mut chi = ComplexTensor::zeros(vec![d2, d2]);
        chi.set(&[0, 0], c(1.0, 0.0));
        let chi = ChiMatrix::new(1, chi).unwrap();
        let choi = chi_to_choi(&chi).unwrap();
        // d·|Φ+><Φ+| in vec basis: |I⟩⟩⟨⟨I| with |I⟩⟩ = (1,0,0,1).
        let mut want = ComplexTensor::zeros(vec![4, 4]);
        for &a in &[0usize, 3] {
            for &b in &[0usize, 3] {
                want.set(&[a, b], c(1.0, 0.0));
            }
        }
        assert!(choi.entries().dist(&want) < 1e-12);
        assert!((choi.entries().trace().unwrap().re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn chi_roundtrip_matches_direct_choi() {
        let ch = depolarizing(0.3).unwrap();
        let direct = kraus_to_choi(&ch).unwrap();
        let via_chi = chi_to_choi(&kraus_to_chi(&ch).unwrap()).unwrap();
        assert!(direct.entries().dist(via_chi.entries()) < 1e-10);
    }

    #[test]
    fn chi_of_pauli_x_process() {
        let mut chi = ComplexTensor::zeros(vec![4, 4]);
        chi.set(&[1, 1], c(1.0, 0.0));
        let choi = chi_to_choi(&ChiMatrix::new(1, chi).unwrap()).unwrap();
        let [_, x, _, _] = pauli_matrices();
        let vx = vectorize(&x);
        let mut want = ComplexTensor::zeros(vec![4, 4]);
        for a in 0..4 {
            for b in 0..4 {
                want.set(&[a, b], vx.data()[a] * vx.data()[b].conj());
            }
        }
        assert!(choi.entries().dist(&want) < 1e-12);
    }

    #[test]
    fn choi_to_kraus_identity_channel() {
        let choi = kraus_to_choi(&KrausChannel::identity(1)).unwrap();
        let conv = choi_to_kraus(&choi, None, DEFAULT_EIG_FLOOR).unwrap();
        assert_eq!(conv.channel.rank(), 1);
        // Up to global phase; the eigenvector gauge makes it exactly I.
        assert!(conv.channel.operators()[0].dist(&ComplexTensor::identity(2)) < 1e-10);
    }

    #[test]
    fn choi_to_kraus_depolarizing_action() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let ch = depolarizing(0.2).unwrap();
        let conv = choi_to_kraus(&kraus_to_choi(&ch).unwrap(), None, DEFAULT_EIG_FLOOR).unwrap();
        assert_eq!(conv.channel.rank(), 4);
        for _ in 0..5 {
            let rho = random_density(&mut rng, 2);
            let a = ch.apply_dense(&rho).unwrap();
            let b = conv.channel.apply_dense(&rho).unwrap();
            assert!(a.dist(&b) < 1e-10);
        }
    }

    #[test]
    fn rank_cutoff_prunes_and_rescales() {
        let ch = depolarizing(0.01).unwrap();
        let choi = kraus_to_choi(&ch).unwrap();
        let conv = choi_to_kraus(&choi, Some(1), DEFAULT_EIG_FLOOR).unwrap();
        assert_eq!(conv.channel.rank(), 1);
        assert!((conv.trace_defect_before_rescale - 0.0075).abs() < 1e-12);
        // After the global rescale the channel is complete again.
        assert!(conv.channel.validate_cptp(1e-8).pass);
    }

    #[test]
    fn pruning_defect_monotone_in_cutoff() {
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        let ch = random_channel(&mut rng, 1, 4);
        let choi = kraus_to_choi(&ch).unwrap();
        let mut last = f64::INFINITY;
        for cutoff in 1..=4 {
            let conv = choi_to_kraus(&choi, Some(cutoff), DEFAULT_EIG_FLOOR).unwrap();
            assert!(conv.trace_defect_before_rescale <= last + 1e-15);
            last = conv.trace_defect_before_rescale;
        }
    }

    #[test]
    fn choi_to_kraus_rejects_strong_negativity() {
        let ch = KrausChannel::identity(1);
        let mut entries = kraus_to_choi(&ch).unwrap().entries().clone();
        // Push one diagonal entry negative well past the floor.
        entries.set(&[1, 1], c(-0.1, 0.0));
        let choi = ChoiMatrix::new(1, entries).unwrap();
        assert!(matches!(
            choi_to_kraus(&choi, None, DEFAULT_EIG_FLOOR),
            Err(CoreError::NonCompletelyPositive { .. })
        ));
    }

    #[test]
    fn kraus_to_choi_fully_mixing() {
        let choi = kraus_to_choi(&depolarizing(1.0).unwrap()).unwrap();
        let want = ComplexTensor::identity(4).scale(c(0.5, 0.0));
        assert!(choi.entries().dist(&want) < 1e-12);
    }

    #[test]
    fn roundtrip_action_equality_random_channels() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..10 {
            let ch = random_channel(&mut rng, 1, 3);
            let conv =
                choi_to_kraus(&kraus_to_choi(&ch).unwrap(), None, DEFAULT_EIG_FLOOR).unwrap();
            assert!(conv.channel.validate_cptp(1e-8).pass);
            for _ in 0..10 {
                let rho = random_density(&mut rng, 2);
                let a = ch.apply_dense(&rho).unwrap();
                let b = conv.channel.apply_dense(&rho).unwrap();
                assert!(a.dist(&b) < 1e-10);
            }
        }
    }

    #[test]
    fn representation_equivalence_on_random_states() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let ch = random_channel(&mut rng, 1, 4);
        let chi = kraus_to_chi(&ch).unwrap();
        let conv = choi_to_kraus(&chi_to_choi(&chi).unwrap(), None, DEFAULT_EIG_FLOOR).unwrap();
        for _ in 0..20 {
            let rho = random_density(&mut rng, 2);
            let via_kraus = ch.apply_dense(&rho).unwrap();
            let via_chi = chi.apply_dense(&rho).unwrap();
            let via_choi = conv.channel.apply_dense(&rho).unwrap();
            assert!(via_kraus.dist(&via_chi) < 1e-10);
            assert!(via_kraus.dist(&via_choi) < 1e-10);
        }
    }

    #[test]
    fn validate_cptp_reports() {
        let ok = depolarizing(0.37).unwrap().validate_cptp(1e-10);
        assert!(ok.pass);
        let half = KrausChannel::from_operators(
            1,
            vec![ComplexTensor::identity(2).scale(c(0.5f64.sqrt(), 0.0))],
        )
        .unwrap();
        let rep = half.validate_cptp(1e-10);
        assert!(!rep.pass);
        assert!((rep.defect - 0.5).abs() < 1e-12);
        assert!((rep.trace_defect - 0.5).abs() < 1e-12);
    }

    #[test]
    fn factor_noise_identity_factorization() {
        let gate = pauli_matrices()[1].clone(); // X
        let ch = KrausChannel::from_operators(1, vec![gate.clone()]).unwrap();
        let nt = factor_noise(&ch, &gate).unwrap();
        assert_eq!(nt.noise_rank(), 1);
        assert!(nt.slice(0).unwrap().dist(&ComplexTensor::identity(2)) < 1e-12);
    }

    #[test]
    fn factor_noise_depolarized_x_gate() {
        let [i, x, y, z] = pauli_matrices();
        let gate = x.clone();
        let dep = depolarizing(0.2).unwrap();
        // Channel = depolarizing after X.
        let gate_ch = KrausChannel::from_operators(1, vec![gate.clone()]).unwrap();
        let ch = gate_ch.then(&dep).unwrap();
        let nt = factor_noise(&ch, &gate).unwrap();
        assert_eq!(nt.noise_rank(), 4);
        let protos = [i, x, y, z];
        for (idx, proto) in protos.iter().enumerate() {
            let slice = nt.slice(idx).unwrap();
            // Each slice is proportional to a Pauli.
            let overlap = proto.dagger().unwrap().matmul(&slice).unwrap().trace().unwrap();
            let scale = overlap / c(2.0, 0.0);
            assert!(slice.dist(&proto.scale(scale)) < 1e-10);
        }
        // Round trip: slices times the gate rebuild the Kraus operators.
        for (idx, k) in ch.operators().iter().enumerate() {
            let rebuilt = nt.slice(idx).unwrap().matmul(&gate).unwrap();
            assert!(rebuilt.dist(k) < 1e-10);
        }
        // Completeness of the factored form.
        let mut acc = ComplexTensor::zeros(vec![2, 2]);
        for idx in 0..nt.noise_rank() {
            let nk = nt.slice(idx).unwrap().matmul(&gate).unwrap();
            acc = acc.add(&nk.dagger().unwrap().matmul(&nk).unwrap()).unwrap();
        }
        assert!(acc.dist(&ComplexTensor::identity(2)) < 1e-8);
    }

    #[test]
    fn factor_noise_rejects_non_unitary_gate() {
        let bad = ComplexTensor::identity(2).scale(c(0.5, 0.0));
        let ch = KrausChannel::identity(1);
        assert!(factor_noise(&ch, &bad).is_err());
    }

    #[test]
    fn constructors_pass_strict_cptp() {
        for p in [0.0, 0.1, 0.37, 0.99, 1.0] {
            assert!(depolarizing(p).unwrap().validate_cptp(1e-10).pass);
            assert!(bit_flip(p).unwrap().validate_cptp(1e-10).pass);
        }
        for dur in [0.0, 10e-9, 100e-9, 1e-6] {
            assert!(thermal_relaxation(20e-6, 25e-6, dur).unwrap().validate_cptp(1e-10).pass);
        }
    }

    #[test]
    fn choi_positivity_of_cptp_channels() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..10 {
            let ch = random_channel(&mut rng, 1, 3);
            let choi = kraus_to_choi(&ch).unwrap();
            let (eta, _) = hermitian_eig_with_tol(choi.entries(), 1e-8).unwrap();
            assert!(eta.iter().all(|&e| e >= -1e-8));
        }
    }
}
