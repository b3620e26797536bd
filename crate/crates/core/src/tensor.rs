//! Dense multi-axis complex tensors, the numeric carrier for every other
//! module.
//!
//! Entries are stored in row-major order; a reshape never touches the data,
//! so entry order is preserved bit-exactly. Axis/basis conventions used
//! throughout the crate: qubit 0 is the most significant bit of a
//! computational-basis index.

use num_complex::Complex64;

use crate::error::{CoreError, Result};

/// Shorthand used across the crate.
pub type C64 = Complex64;

/// Row-major strides of a shape.
fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// A dense complex tensor with an arbitrary number of axes.
#[derive(Clone, PartialEq)]
pub struct ComplexTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl std::fmt::Debug for ComplexTensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ComplexTensor(shape={:?}, data={:?})", self.shape, self.data)
    }
}

impl ComplexTensor {
    /// Build a tensor from a shape and row-major entries.
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(CoreError::Shape(format!(
                "shape {:?} wants {} entries, got {}",
                shape,
                n,
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    /// All-zero tensor of the given shape.
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Self { shape, data: vec![C64::new(0.0, 0.0); n] }
    }

    /// Rank-0 tensor holding a single value.
    pub fn scalar(value: C64) -> Self {
        Self { shape: vec![], data: vec![value] }
    }

    /// d×d identity matrix.
    pub fn identity(d: usize) -> Self {
        let mut t = Self::zeros(vec![d, d]);
        for i in 0..d {
            t.data[i * d + i] = C64::new(1.0, 0.0);
        }
        t
    }

    /// Square matrix from row-major real/imag pairs.
    pub fn matrix_from_rows(rows: &[&[C64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(CoreError::Shape("ragged rows".into()));
            }
            data.extend_from_slice(row);
        }
        Self::new(vec![r, c], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    /// True when every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Entry at a multi-index.
    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: C64) {
        let k = self.flat_index(idx);
        self.data[k] = value;
    }

    fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let st = strides(&self.shape);
        idx.iter().zip(&st).map(|(i, s)| i * s).sum()
    }

    /// Reinterpret the entries under a new shape with the same total size.
    /// The data is untouched, so entry order is preserved bit-exactly.
    pub fn reshape(mut self, new_shape: Vec<usize>) -> Result<Self> {
        let n: usize = new_shape.iter().product();
        if n != self.data.len() {
            return Err(CoreError::Shape(format!(
                "cannot reshape {:?} ({} entries) to {:?} ({})",
                self.shape,
                self.data.len(),
                new_shape,
                n
            )));
        }
        self.shape = new_shape;
        Ok(self)
    }

    /// Reorder axes; `perm[k]` names the old axis that becomes axis `k`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let r = self.shape.len();
        if perm.len() != r {
            return Err(CoreError::Shape(format!(
                "permutation {:?} does not match rank {}",
                perm, r
            )));
        }
        let mut seen = vec![false; r];
        for &p in perm {
            if p >= r || seen[p] {
                return Err(CoreError::Shape(format!("invalid permutation {:?}", perm)));
            }
            seen[p] = true;
        }
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let old_strides = strides(&self.shape);
        let gather: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        if self.data.is_empty() {
            return Self::new(new_shape, data);
        }
        // Odometer over the new index space; accumulate the old flat offset.
        let mut counter = vec![0usize; r];
        let mut offset = 0usize;
        loop {
            data.push(self.data[offset]);
            let mut axis = r;
            loop {
                if axis == 0 {
                    return Self::new(new_shape, data);
                }
                axis -= 1;
                counter[axis] += 1;
                offset += gather[axis];
                if counter[axis] < new_shape[axis] {
                    break;
                }
                offset -= gather[axis] * new_shape[axis];
                counter[axis] = 0;
            }
        }
    }

    /// Elementwise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    /// Conjugate transpose of a 2-axis tensor.
    pub fn dagger(&self) -> Result<Self> {
        if self.rank() != 2 {
            return Err(CoreError::Shape("dagger requires a matrix".into()));
        }
        Ok(self.permute(&[1, 0])?.conj())
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius distance to another tensor of the same shape.
    pub fn dist(&self, other: &Self) -> f64 {
        assert_eq!(self.shape, other.shape, "dist requires equal shapes");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(CoreError::Shape("add requires equal shapes".into()));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(self.add(&other.scale(C64::new(-1.0, 0.0)))?)
    }

    /// Trace of a square matrix.
    pub fn trace(&self) -> Result<C64> {
        if self.rank() != 2 || self.shape[0] != self.shape[1] {
            return Err(CoreError::Shape("trace requires a square matrix".into()));
        }
        let d = self.shape[0];
        Ok((0..d).map(|i| self.data[i * d + i]).sum())
    }

    /// Kronecker product of two matrices (qubit 0 = most significant block).
    pub fn kron(&self, other: &Self) -> Result<Self> {
        if self.rank() != 2 || other.rank() != 2 {
            return Err(CoreError::Shape("kron requires matrices".into()));
        }
        let (ra, ca) = (self.shape[0], self.shape[1]);
        let (rb, cb) = (other.shape[0], other.shape[1]);
        let mut out = Self::zeros(vec![ra * rb, ca * cb]);
        for i in 0..ra {
            for j in 0..ca {
                let a = self.data[i * ca + j];
                for k in 0..rb {
                    for l in 0..cb {
                        out.data[(i * rb + k) * (ca * cb) + (j * cb + l)] =
                            a * other.data[k * cb + l];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Matrix product of two 2-axis tensors.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.rank() != 2 || other.rank() != 2 {
            return Err(CoreError::Shape("matmul requires matrices".into()));
        }
        let (m, k) = (self.shape[0], self.shape[1]);
        let (k2, n) = (other.shape[0], other.shape[1]);
        if k != k2 {
            return Err(CoreError::Shape(format!(
                "matmul inner extents differ: {} vs {}",
                k, k2
            )));
        }
        let mut out = Self::zeros(vec![m, n]);
        if m == 0 || n == 0 || k == 0 {
            return Ok(out);
        }
        // num_complex::Complex64 is repr(C) { re: f64, im: f64 }, layout
        // compatible with [f64; 2] as required by matrixmultiply.
        unsafe {
            matrixmultiply::zgemm(
                matrixmultiply::CGemmOption::Standard,
                matrixmultiply::CGemmOption::Standard,
                m,
                k,
                n,
                [1.0, 0.0],
                self.data.as_ptr() as *const [f64; 2],
                k as isize,
                1,
                other.data.as_ptr() as *const [f64; 2],
                n as isize,
                1,
                [0.0, 0.0],
                out.data.as_mut_ptr() as *mut [f64; 2],
                n as isize,
                1,
            );
        }
        Ok(out)
    }

    /// Slice the tensor at a fixed index of one axis, dropping that axis.
    pub fn slice_axis(&self, axis: usize, index: usize) -> Result<Self> {
        if axis >= self.rank() || index >= self.shape[axis] {
            return Err(CoreError::Shape(format!(
                "slice axis {} index {} out of range for {:?}",
                axis, index, self.shape
            )));
        }
        let st = strides(&self.shape);
        let mut new_shape = self.shape.clone();
        new_shape.remove(axis);
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = st[axis];
        let mut data = Vec::with_capacity(self.data.len() / self.shape[axis]);
        for o in 0..outer {
            let block = o * self.shape[axis] * inner + index * inner;
            data.extend_from_slice(&self.data[block..block + inner]);
        }
        Self::new(new_shape, data)
    }
}

/// Contract `a` and `b` over the paired axes. The output carries the
/// remaining axes of `a` (in order) followed by the remaining axes of `b`.
pub fn contract(
    a: &ComplexTensor,
    axes_a: &[usize],
    b: &ComplexTensor,
    axes_b: &[usize],
) -> Result<ComplexTensor> {
    if axes_a.len() != axes_b.len() {
        return Err(CoreError::Shape(format!(
            "contract pairs {} axes of a with {} of b",
            axes_a.len(),
            axes_b.len()
        )));
    }
    for (&ia, &ib) in axes_a.iter().zip(axes_b) {
        if ia >= a.rank() || ib >= b.rank() {
            return Err(CoreError::Shape("contract axis out of range".into()));
        }
        if a.shape[ia] != b.shape[ib] {
            return Err(CoreError::Shape(format!(
                "contract extent mismatch: a axis {} has {}, b axis {} has {}",
                ia, a.shape[ia], ib, b.shape[ib]
            )));
        }
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|i| !axes_a.contains(i)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|i| !axes_b.contains(i)).collect();

    let mut perm_a = free_a.clone();
    perm_a.extend_from_slice(axes_a);
    let mut perm_b = axes_b.to_vec();
    perm_b.extend_from_slice(&free_b);

    let m: usize = free_a.iter().map(|&i| a.shape[i]).product();
    let k: usize = axes_a.iter().map(|&i| a.shape[i]).product();
    let n: usize = free_b.iter().map(|&i| b.shape[i]).product();

    let a2 = a.permute(&perm_a)?.reshape(vec![m, k])?;
    let b2 = b.permute(&perm_b)?.reshape(vec![k, n])?;
    let prod = a2.matmul(&b2)?;

    let mut out_shape: Vec<usize> = free_a.iter().map(|&i| a.shape[i]).collect();
    out_shape.extend(free_b.iter().map(|&i| b.shape[i]));
    prod.reshape(out_shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pauli_x() -> ComplexTensor {
        ComplexTensor::new(
            vec![2, 2],
            vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn reshape_preserves_entry_order() {
        let data: Vec<C64> = (0..24).map(|k| c(k as f64, -(k as f64))).collect();
        let t = ComplexTensor::new(vec![2, 3, 4], data.clone()).unwrap();
        let r = t.reshape(vec![4, 6]).unwrap();
        assert_eq!(r.data(), data.as_slice());
        let back = r.reshape(vec![2, 3, 4]).unwrap();
        assert_eq!(back.data(), data.as_slice());
    }

    #[test]
    fn shape_size_mismatch_rejected() {
        assert!(ComplexTensor::new(vec![2, 3], vec![c(0.0, 0.0); 5]).is_err());
    }

    #[test]
    fn permute_matches_manual_transpose() {
        let t = ComplexTensor::new(
            vec![2, 3],
            (0..6).map(|k| c(k as f64, 0.0)).collect(),
        )
        .unwrap();
        let tt = t.permute(&[1, 0]).unwrap();
        assert_eq!(tt.shape(), &[3, 2]);
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(t.get(&[i, j]), tt.get(&[j, i]));
            }
        }
    }

    #[test]
    fn contract_with_identity_is_identity_map() {
        let m = ComplexTensor::new(
            vec![2, 2],
            vec![c(1.0, 2.0), c(3.0, -1.0), c(0.5, 0.0), c(-2.0, 4.0)],
        )
        .unwrap();
        let id = ComplexTensor::identity(2);
        let out = contract(&m, &[1], &id, &[0]).unwrap();
        assert!(out.dist(&m) == 0.0);
    }

    #[test]
    fn contract_basis_flip() {
        let v = ComplexTensor::new(vec![2], vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        // X acting on |0> gives |1>: contract X row axis with the vector.
        let out = contract(&pauli_x(), &[1], &v, &[0]).unwrap();
        assert_eq!(out.shape(), &[2]);
        assert!((out.get(&[0]) - c(0.0, 0.0)).norm() < 1e-15);
        assert!((out.get(&[1]) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn contract_matches_flattened_matrix_multiply() {
        // rank-3 x rank-3 over two shared axes, against the reshape oracle.
        let mut a = ComplexTensor::zeros(vec![2, 3, 4]);
        let mut b = ComplexTensor::zeros(vec![3, 4, 5]);
        let mut seed = 1u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64) / (1u64 << 53) as f64 - 0.5
        };
        for z in a.data_mut() {
            *z = c(next(), next());
        }
        for z in b.data_mut() {
            *z = c(next(), next());
        }
        let out = contract(&a, &[1, 2], &b, &[0, 1]).unwrap();
        // Oracle: flatten a to (2, 12), b to (12, 5) and multiply.
        let a2 = a.clone().reshape(vec![2, 12]).unwrap();
        let b2 = b.clone().reshape(vec![12, 5]).unwrap();
        let oracle = a2.matmul(&b2).unwrap().reshape(vec![2, 5]).unwrap();
        assert!(out.dist(&oracle) < 1e-12);
    }

    #[test]
    fn contract_extent_mismatch_is_shape_error() {
        let a = ComplexTensor::zeros(vec![2, 3]);
        let b = ComplexTensor::zeros(vec![4, 2]);
        assert!(contract(&a, &[1], &b, &[0]).is_err());
    }

    #[test]
    fn kron_of_paulis() {
        let xz = pauli_x().kron(&ComplexTensor::new(
            vec![2, 2],
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
        ).unwrap()).unwrap();
        // X (x) Z has |10><00| block structure: entry ((1,0),(0,0)) = 1.
        assert_eq!(xz.get(&[2, 0]), c(1.0, 0.0));
        assert_eq!(xz.get(&[3, 1]), c(-1.0, 0.0));
        assert_eq!(xz.get(&[0, 2]), c(1.0, 0.0));
        assert_eq!(xz.get(&[1, 3]), c(-1.0, 0.0));
    }

    #[test]
    fn slice_axis_drops_axis() {
        let t = ComplexTensor::new(
            vec![2, 3],
            (0..6).map(|k| c(k as f64, 0.0)).collect(),
        )
        .unwrap();
        let row1 = t.slice_axis(0, 1).unwrap();
        assert_eq!(row1.shape(), &[3]);
        assert_eq!(row1.data()[0], c(3.0, 0.0));
        let col2 = t.slice_axis(1, 2).unwrap();
        assert_eq!(col2.shape(), &[2]);
        assert_eq!(col2.data()[0], c(2.0, 0.0));
        assert_eq!(col2.data()[1], c(5.0, 0.0));
    }
}
