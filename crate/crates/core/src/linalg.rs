//! Dense complex decompositions with deterministic gauge conventions.
//!
//! All three kernels are implemented here directly: Householder QR,
//! one-sided Jacobi SVD (QR-reduced to a square core first), and
//! two-sided Jacobi Hermitian eigendecomposition. Jacobi methods trade a
//! constant factor of speed for accuracy and robustness, which is the
//! right trade at the matrix sizes produced by the tensor engine.
//!
//! Conventions fixed here and relied on by golden tests elsewhere:
//! - singular values and eigenvalues are returned in descending order;
//! - the largest-magnitude entry of each U column (first such entry on
//!   ties) is made real and non-negative, with the compensating phase
//!   pushed into Vh;
//! - QR is gauged so the diagonal of R is real and non-negative.

use crate::error::{CoreError, Result};
use crate::tensor::{C64, ComplexTensor};

/// Default absolute Frobenius tolerance accepted before a matrix is
/// rejected as non-Hermitian. Measured process matrices carry noise at
/// roughly this level.
pub const DEFAULT_HERMITICITY_TOL: f64 = 1e-8;

const MAX_JACOBI_SWEEPS: usize = 64;

/// Full singular value decomposition `m = U diag(sigma) Vh`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: ComplexTensor,
    pub sigma: Vec<f64>,
    pub vh: ComplexTensor,
}

/// Rank-limited SVD along with the exact Frobenius error of the discarded
/// tail, `sqrt(sigma_{k+1}^2 + ... + sigma_m^2)`.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: ComplexTensor,
    pub sigma: Vec<f64>,
    pub vh: ComplexTensor,
    pub err: f64,
}

fn require_matrix(m: &ComplexTensor, what: &str) -> Result<(usize, usize)> {
    if m.rank() != 2 {
        return Err(CoreError::Shape(format!("{what} requires a 2-axis tensor")));
    }
    if !m.all_finite() {
        return Err(CoreError::NumericInput(format!("{what} input has non-finite entries")));
    }
    Ok((m.shape()[0], m.shape()[1]))
}

/// Column-major scratch matrix used by the kernels.
#[derive(Clone)]
struct ColMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ColMat {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    fn from_tensor(t: &ComplexTensor) -> Self {
        let (rows, cols) = (t.shape()[0], t.shape()[1]);
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[c * rows + r] = t.data()[r * cols + c];
            }
        }
        m
    }

    fn to_tensor(&self) -> ComplexTensor {
        let mut data = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                data.push(self.data[c * self.rows + r]);
            }
        }
        ComplexTensor::new(vec![self.rows, self.cols], data).expect("consistent dims")
    }

    fn at(&self, r: usize, c: usize) -> C64 {
        self.data[c * self.rows + r]
    }

    fn col(&self, c: usize) -> &[C64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    fn col_mut(&mut self, c: usize) -> &mut [C64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    /// Conjugate transpose.
    fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for c in 0..self.cols {
            for r in 0..self.rows {
                out.data[r * self.cols + c] = self.at(r, c).conj();
            }
        }
        out
    }

    /// self * other.
    fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            for k in 0..self.cols {
                let w = other.at(k, j);
                if w.re == 0.0 && w.im == 0.0 {
                    continue;
                }
                let src = self.col(k);
                let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
                for r in 0..self.rows {
                    dst[r] += src[r] * w;
                }
            }
        }
        out
    }
}

/// Householder QR of a column-major matrix. Returns (thin Q, R) with
/// k = min(rows, cols): Q is rows×k with orthonormal columns, R is k×cols
/// upper trapezoidal.
fn householder_qr(a: &ColMat) -> (ColMat, ColMat) {
    let (m, n) = (a.rows, a.cols);
    let k = m.min(n);
    let mut r = a.clone();
    // Store the reflectors to build the thin Q afterwards.
    let mut reflectors: Vec<Vec<C64>> = Vec::with_capacity(k);
    for j in 0..k {
        // x = R[j.., j]
        let mut v: Vec<C64> = r.col(j)[j..].to_vec();
        let xnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            reflectors.push(vec![C64::new(0.0, 0.0); m - j]);
            continue;
        }
        // alpha = -e^{i arg(x0)} * ||x||, v = x - alpha e1.
        let x0 = v[0];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { C64::new(1.0, 0.0) };
        let alpha = -phase * xnorm;
        v[0] -= alpha;
        let vnorm_sq = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if vnorm_sq > 0.0 {
            // Apply H = I - 2 v v^H / (v^H v) to R[j.., j..].
            for c in j..n {
                let col = &mut r.col_mut(c)[j..];
                let dot: C64 =
                    v.iter().zip(col.iter()).map(|(vi, ci)| vi.conj() * ci).sum();
                let factor = dot * (2.0 / vnorm_sq);
                for (vi, ci) in v.iter().zip(col.iter_mut()) {
                    *ci -= factor * vi;
                }
            }
        }
        reflectors.push(v);
    }
    // Thin Q: apply the reflectors in reverse to the first k identity
    // columns.
    let mut q = ColMat::zeros(m, k);
    for c in 0..k {
        q.col_mut(c)[c] = C64::new(1.0, 0.0);
    }
    for j in (0..k).rev() {
        let v = &reflectors[j];
        let vnorm_sq = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if vnorm_sq == 0.0 {
            continue;
        }
        for c in 0..k {
            let col = &mut q.col_mut(c)[j..];
            let dot: C64 = v.iter().zip(col.iter()).map(|(vi, ci)| vi.conj() * ci).sum();
            let factor = dot * (2.0 / vnorm_sq);
            for (vi, ci) in v.iter().zip(col.iter_mut()) {
                *ci -= factor * vi;
            }
        }
    }
    // R: top k rows, zero below the diagonal explicitly.
    let mut rk = ColMat::zeros(k, n);
    for c in 0..n {
        for row in 0..k.min(c + 1).max(0) {
            rk.data[c * k + row] = r.at(row, c);
        }
        // Entries below the diagonal stay zero.
        if c < k {
            rk.data[c * k + c] = r.at(c, c);
        }
    }
    (q, rk)
}

/// One-sided Jacobi SVD of a square matrix: returns (U, sigma, V) with
/// `a = U diag(sigma) V^H`, sigma descending.
fn jacobi_svd_square(a: &ColMat) -> Result<(ColMat, Vec<f64>, ColMat)> {
    let n = a.rows;
    debug_assert_eq!(n, a.cols);
    let mut w = a.clone();
    let mut v = ColMat::identity(n);
    let mut converged = false;
    // The pairwise threshold must sit above the rounding noise of the
    // freshly computed inner product (~eps·sqrt(rows)).
    let pair_tol = 1e-13;
    let mut norms_sq: Vec<f64> =
        (0..n).map(|c| w.col(c).iter().map(|z| z.norm_sqr()).sum()).collect();
    for _sweep in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (gpp, gqq) = (norms_sq[p], norms_sq[q]);
                if gpp == 0.0 || gqq == 0.0 {
                    continue;
                }
                let gpq: C64 = {
                    let cp = w.col(p);
                    let cq = w.col(q);
                    cp.iter().zip(cq.iter()).map(|(x, y)| x.conj() * y).sum()
                };
                let off = gpq.norm();
                if off <= pair_tol * (gpp * gqq).sqrt() {
                    continue;
                }
                rotated = true;
                // Diagonalize [[gpp, gpq], [conj(gpq), gqq]] with
                // R = diag(1, e^{-iφ}) · [[c, -s], [s, c]].
                let phase = gpq / off;
                let tau = (gpp - gqq) / (2.0 * off);
                let t = {
                    let sign = if tau >= 0.0 { 1.0 } else { -1.0 };
                    sign / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let ph = phase.conj();
                // Columns: cp' = c·cp + s·e^{-iφ}·cq ; cq' = -s·cp + c·e^{-iφ}·cq
                let rotate = |mat: &mut ColMat| {
                    let rows = mat.rows;
                    let (lo, hi) = if p < q { (p, q) } else { (q, p) };
                    let (head, tail) = mat.data.split_at_mut(hi * rows);
                    let cp = &mut head[lo * rows..lo * rows + rows];
                    let cq = &mut tail[..rows];
                    for i in 0..rows {
                        let xp = cp[i];
                        let xq = cq[i] * ph;
                        cp[i] = xp * c + xq * s;
                        cq[i] = -xp * s + xq * c;
                    }
                };
                rotate(&mut w);
                rotate(&mut v);
                // When the pair was numerically rank one, the rotation
                // sends one column to zero up to round-off; flush the
                // remnant so it cannot stay exactly parallel to the
                // survivor and cycle forever.
                let mut npp: f64 = w.col(p).iter().map(|z| z.norm_sqr()).sum();
                let mut nqq: f64 = w.col(q).iter().map(|z| z.norm_sqr()).sum();
                let floor = 1e-28 * npp.max(nqq);
                if npp < floor {
                    w.col_mut(p).fill(C64::new(0.0, 0.0));
                    npp = 0.0;
                }
                if nqq < floor {
                    w.col_mut(q).fill(C64::new(0.0, 0.0));
                    nqq = 0.0;
                }
                norms_sq[p] = npp;
                norms_sq[q] = nqq;
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        // Accept a stalled iteration only if every pair is orthogonal to
        // a still-safe looser tolerance.
        let mut worst = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                let cp = w.col(p);
                let cq = w.col(q);
                let gpp: f64 = cp.iter().map(|z| z.norm_sqr()).sum();
                let gqq: f64 = cq.iter().map(|z| z.norm_sqr()).sum();
                if gpp == 0.0 || gqq == 0.0 {
                    continue;
                }
                let gpq: C64 = cp.iter().zip(cq.iter()).map(|(x, y)| x.conj() * y).sum();
                worst = worst.max(gpq.norm() / (gpp * gqq).sqrt());
            }
        }
        if worst > 1e-10 {
            return Err(CoreError::NoConvergence(format!(
                "jacobi svd stalled with relative off-diagonal {worst:.3e}"
            )));
        }
    }
    // Singular values are the column norms; U the normalized columns.
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n)
        .map(|c| w.col(c).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap_or(std::cmp::Ordering::Equal));
    let sigma: Vec<f64> = order.iter().map(|&c| norms[c]).collect();
    let sig_max = sigma.first().copied().unwrap_or(0.0);
    let mut u = ColMat::zeros(n, n);
    let mut v_sorted = ColMat::zeros(n, n);
    for (new_c, &old_c) in order.iter().enumerate() {
        for r in 0..n {
            v_sorted.data[new_c * n + r] = v.at(r, old_c);
        }
        if norms[old_c] > sig_max * 1e-300 && norms[old_c] > 0.0 {
            let inv = 1.0 / norms[old_c];
            for r in 0..n {
                u.data[new_c * n + r] = w.at(r, old_c) * inv;
            }
        }
    }
    // Orthonormal completion for numerically zero columns.
    for c in 0..n {
        let norm: f64 = u.col(c).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.5 {
            continue;
        }
        'candidates: for cand in 0..n {
            let mut col = vec![C64::new(0.0, 0.0); n];
            col[cand] = C64::new(1.0, 0.0);
            for _pass in 0..2 {
                for other in 0..n {
                    if other == c {
                        continue;
                    }
                    let oc = u.col(other);
                    let onorm: f64 = oc.iter().map(|z| z.norm_sqr()).sum();
                    if onorm < 0.5 {
                        continue;
                    }
                    let dot: C64 = oc.iter().zip(col.iter()).map(|(a, b)| a.conj() * b).sum();
                    for (o, x) in oc.iter().zip(col.iter_mut()) {
                        *x -= o * dot;
                    }
                }
            }
            let nn: f64 = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if nn > 1e-3 {
                let inv = 1.0 / nn;
                for (dst, x) in u.col_mut(c).iter_mut().zip(col.iter()) {
                    *dst = x * inv;
                }
                break 'candidates;
            }
        }
    }
    Ok((u, sigma, v_sorted))
}

/// Index of the largest-magnitude entry of a tensor column (first on
/// ties).
fn dominant_row_tensor(m: &ComplexTensor, col: usize) -> usize {
    let rows = m.shape()[0];
    let mut best = 0usize;
    let mut best_mag = -1.0f64;
    for i in 0..rows {
        let mag = m.get(&[i, col]).norm();
        if mag > best_mag {
            best = i;
            best_mag = mag;
        }
    }
    best
}

/// Singular value decomposition with descending singular values and the
/// column-phase gauge described in the module docs.
pub fn svd(m: &ComplexTensor) -> Result<Svd> {
    let (rows, cols) = require_matrix(m, "svd")?;
    let k = rows.min(cols);
    if k == 0 {
        return Ok(Svd {
            u: ComplexTensor::zeros(vec![rows, 0]),
            sigma: vec![],
            vh: ComplexTensor::zeros(vec![0, cols]),
        });
    }
    let a = ColMat::from_tensor(m);
    let (mut u, sigma, mut vh) = if rows >= cols {
        // a = Q R, R = Ur Σ V^H  =>  U = Q Ur, Vh = V^H.
        let (q, r) = householder_qr(&a);
        let (ur, sigma, v) = jacobi_svd_square(&r)?;
        (q.mul(&ur).to_tensor(), sigma, v.adjoint().to_tensor())
    } else {
        // a^H = Q R, R = Ur Σ V^H  =>  a = V Σ (Q Ur)^H.
        let (q, r) = householder_qr(&a.adjoint());
        let (ur, sigma, v) = jacobi_svd_square(&r)?;
        (v.to_tensor(), sigma, q.mul(&ur).adjoint().to_tensor())
    };

    // Phase gauge: dominant entry of each U column real non-negative.
    for j in 0..k {
        let pivot = u.get(&[dominant_row_tensor(&u, j), j]);
        let mag = pivot.norm();
        if mag > 0.0 {
            let phase = pivot / mag;
            let adj = phase.conj();
            for i in 0..rows {
                let v = u.get(&[i, j]) * adj;
                u.set(&[i, j], v);
            }
            for i in 0..cols {
                let v = vh.get(&[j, i]) * phase;
                vh.set(&[j, i], v);
            }
        }
    }
    Ok(Svd { u, sigma, vh })
}

/// Keep the `max_rank` largest singular values; `err` is the exact
/// Frobenius norm of the discarded tail.
pub fn truncated_svd(m: &ComplexTensor, max_rank: usize) -> Result<TruncatedSvd> {
    if max_rank == 0 {
        return Err(CoreError::Parameter("max_rank must be at least 1".into()));
    }
    let full = svd(m)?;
    truncate_svd_parts(full, max_rank, 0.0)
}

/// Shared truncation logic: keep at most `max_rank` values, additionally
/// dropping values below `rel_floor * sigma_max`.
pub(crate) fn truncate_svd_parts(full: Svd, max_rank: usize, rel_floor: f64) -> Result<TruncatedSvd> {
    let total = full.sigma.len();
    let sig_max = full.sigma.first().copied().unwrap_or(0.0);
    let mut keep = total.min(max_rank);
    if rel_floor > 0.0 && sig_max > 0.0 {
        while keep > 1 && full.sigma[keep - 1] < rel_floor * sig_max {
            keep -= 1;
        }
    }
    let err = full.sigma[keep..].iter().map(|s| s * s).sum::<f64>().sqrt();
    let rows = full.u.shape()[0];
    let cols = full.vh.shape()[1];
    let u_data: Vec<C64> = {
        let mut v = Vec::with_capacity(rows * keep);
        for i in 0..rows {
            for j in 0..keep {
                v.push(full.u.get(&[i, j]));
            }
        }
        v
    };
    let vh_data: Vec<C64> = {
        let mut v = Vec::with_capacity(keep * cols);
        for i in 0..keep {
            for j in 0..cols {
                v.push(full.vh.get(&[i, j]));
            }
        }
        v
    };
    Ok(TruncatedSvd {
        u: ComplexTensor::new(vec![rows, keep], u_data)?,
        sigma: full.sigma[..keep].to_vec(),
        vh: ComplexTensor::new(vec![keep, cols], vh_data)?,
        err,
    })
}

/// Thin QR with the diagonal of R gauged real non-negative.
pub fn qr(m: &ComplexTensor) -> Result<(ComplexTensor, ComplexTensor)> {
    let (rows, cols) = require_matrix(m, "qr")?;
    let k = rows.min(cols);
    let a = ColMat::from_tensor(m);
    let (mut q, mut r) = householder_qr(&a);
    for i in 0..k {
        let d = r.at(i, i);
        let mag = d.norm();
        if mag > 0.0 {
            let phase = d / mag;
            let adj = phase.conj();
            for j in i..cols {
                let v = r.at(i, j) * adj;
                r.data[j * k + i] = v;
            }
            for j in 0..rows {
                let v = q.at(j, i) * phase;
                q.data[i * rows + j] = v;
            }
        }
    }
    Ok((q.to_tensor(), r.to_tensor()))
}

/// Eigendecomposition of a Hermitian matrix using the default tolerance.
pub fn hermitian_eig(m: &ComplexTensor) -> Result<(Vec<f64>, ComplexTensor)> {
    hermitian_eig_with_tol(m, DEFAULT_HERMITICITY_TOL)
}

/// Eigendecomposition of a Hermitian matrix: eigenvalues descending,
/// eigenvector columns gauged like U columns of [`svd`].
///
/// The input is checked against `tol` (absolute Frobenius) and then
/// symmetrized internally before the two-sided Jacobi iteration.
pub fn hermitian_eig_with_tol(m: &ComplexTensor, tol: f64) -> Result<(Vec<f64>, ComplexTensor)> {
    let (rows, cols) = require_matrix(m, "hermitian_eig")?;
    if rows != cols {
        return Err(CoreError::Shape("hermitian_eig requires a square matrix".into()));
    }
    let defect = m.sub(&m.dagger()?)?.norm();
    if defect > tol {
        return Err(CoreError::NonHermitian { defect, tol });
    }
    let n = rows;
    // Symmetrize into column-major scratch.
    let mut a = ColMat::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let v = (m.get(&[r, c]) + m.get(&[c, r]).conj()) * 0.5;
            a.data[c * n + r] = v;
        }
    }
    let mut v = ColMat::identity(n);
    let scale = a.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
    let mut converged = false;
    let mut last_off = f64::INFINITY;
    for _sweep in 0..MAX_JACOBI_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off += a.at(p, q).norm_sqr();
            }
        }
        let off = (2.0 * off).sqrt();
        if off <= 1e-14 * scale || (off <= 1e-11 * scale && off >= last_off) {
            converged = true;
            break;
        }
        last_off = off;
        for p in 0..n {
            for q in p + 1..n {
                let g = a.at(p, q);
                let gn = g.norm();
                let app = a.at(p, p).re;
                let aqq = a.at(q, q).re;
                if gn <= 1e-18 * scale {
                    continue;
                }
                // R = diag(1, e^{-iφ}) · [[c, -s], [s, c]] zeroing the
                // (p,q) entry of R^H A R.
                let phase = g / gn;
                let tau = (app - aqq) / (2.0 * gn);
                let t = {
                    let sign = if tau >= 0.0 { 1.0 } else { -1.0 };
                    sign / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let ph = phase.conj();
                // Column update: A ← A R, V ← V R.
                let col_rotate = |mat: &mut ColMat| {
                    let rows = mat.rows;
                    let (lo, hi) = (p.min(q), p.max(q));
                    let (head, tail) = mat.data.split_at_mut(hi * rows);
                    let (cp_slice, cq_slice) = if p < q {
                        (&mut head[lo * rows..lo * rows + rows], &mut tail[..rows])
                    } else {
                        unreachable!("p < q by loop construction")
                    };
                    for i in 0..rows {
                        let xp = cp_slice[i];
                        let xq = cq_slice[i] * ph;
                        cp_slice[i] = xp * c + xq * s;
                        cq_slice[i] = -xp * s + xq * c;
                    }
                };
                col_rotate(&mut a);
                col_rotate(&mut v);
                // Row update: A ← R^H A, with R^H = [[c, e^{iφ}s], [−s, e^{iφ}c]].
                for j in 0..n {
                    let xp = a.at(p, j);
                    let xq = a.at(q, j) * phase;
                    a.data[j * n + p] = xp * c + xq * s;
                    a.data[j * n + q] = -xp * s + xq * c;
                }
            }
        }
    }
    if !converged {
        return Err(CoreError::NoConvergence("jacobi hermitian eigendecomposition".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.at(i, i).re).collect();
    order.sort_by(|&x, &y| diag[y].partial_cmp(&diag[x]).unwrap_or(std::cmp::Ordering::Equal));
    let eta: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut psi = ComplexTensor::zeros(vec![n, n]);
    for (new_c, &old_c) in order.iter().enumerate() {
        for r in 0..n {
            psi.set(&[r, new_c], v.at(r, old_c));
        }
    }
    for j in 0..n {
        let pivot = psi.get(&[dominant_row_tensor(&psi, j), j]);
        let mag = pivot.norm();
        if mag > 0.0 {
            let adj = (pivot / mag).conj();
            for i in 0..n {
                let v = psi.get(&[i, j]) * adj;
                psi.set(&[i, j], v);
            }
        }
    }
    Ok((eta, psi))
}

/// Frobenius defect of `u` from unitarity.
pub fn unitarity_defect(u: &ComplexTensor) -> Result<f64> {
    let (rows, cols) = require_matrix(u, "unitarity_defect")?;
    if rows != cols {
        return Err(CoreError::Shape("unitarity check requires a square matrix".into()));
    }
    let prod = u.dagger()?.matmul(u)?;
    Ok(prod.sub(&ComplexTensor::identity(rows))?.norm())
}
