//! Truncated Hilbert-space linear algebra.
//!
//! Operators are dense complex matrices tagged with the dimensions of their
//! tensor factors. Hamiltonians are stored in angular-frequency units
//! (energy / ħ, rad/s), so eigenvalues come out directly in rad/s.

use nalgebra::{ComplexField, DMatrix, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Dense operator on a tensor-product Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator<T: Real = f64> {
    dims: Vec<usize>,
    data: DMatrix<Complex<T>>,
}

fn total_dim(dims: &[usize]) -> usize {
    dims.iter().product()
}

impl<T: Real> Operator<T> {
    pub fn new(dims: Vec<usize>, data: DMatrix<Complex<T>>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidDimension(format!("factor dimensions {dims:?}")));
        }
        let n = total_dim(&dims);
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::Shape(format!(
                "matrix is {}x{}, dims {:?} require {n}x{n}",
                data.nrows(),
                data.ncols(),
                dims
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let n = total_dim(dims);
        Self { dims: dims.to_vec(), data: DMatrix::zeros(n, n) }
    }

    pub fn identity(dims: &[usize]) -> Self {
        let n = total_dim(dims);
        Self { dims: dims.to_vec(), data: DMatrix::identity(n, n) }
    }

    /// Single-factor operator with the given real diagonal.
    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        let mut data = DMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            data[(i, i)] = Complex::new(d, T::zero());
        }
        Self { dims: vec![n], data }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Side length of the matrix.
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex<T>> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<Complex<T>> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex<T> {
        self.data[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self { dims: self.dims.clone(), data: self.data.adjoint() }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!("dims {:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { dims: self.dims.clone(), data: &self.data + &other.data })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { dims: self.dims.clone(), data: &self.data - &other.data })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { dims: self.dims.clone(), data: &self.data * &other.data })
    }

    pub fn scale(&self, s: T) -> Self {
        let c = Complex::new(s, T::zero());
        Self { dims: self.dims.clone(), data: self.data.map(|z| z * c) }
    }

    /// `self + c·I`.
    pub fn shift(&self, c: T) -> Self {
        let mut out = self.clone();
        for i in 0..out.dim() {
            out.data[(i, i)].re += c;
        }
        out
    }

    /// Submatrix on the basis states `indices`, as a single flat factor.
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        let n = self.dim();
        if indices.is_empty() || indices.iter().any(|&i| i >= n) {
            return Err(Error::Shape(format!("restriction indices outside dimension {n}")));
        }
        let data = DMatrix::from_fn(indices.len(), indices.len(), |r, c| self.data[(indices[r], indices[c])]);
        Ok(Self { dims: vec![indices.len()], data })
    }

    /// `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            dims: self.dims.clone(),
            data: &self.data * &other.data - &other.data * &self.data,
        })
    }

    /// Tensor product `self ⊗ other`; factor lists are concatenated.
    pub fn kron(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { dims, data: self.data.kronecker(&other.data) }
    }

    pub fn trace(&self) -> Complex<T> {
        self.data.trace()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.modulus()))
    }

    /// `max|H − H†|`.
    pub fn hermiticity_error(&self) -> T {
        let n = self.dim();
        let mut err = T::zero();
        for i in 0..n {
            for j in i..n {
                let d = self.data[(i, j)] - self.data[(j, i)].conj();
                err = err.max(d.modulus());
            }
        }
        err
    }

    /// Hermitian within `exact_tol · max|H|`.
    pub fn is_hermitian(&self) -> bool {
        let scale = self.max_abs();
        self.hermiticity_error() <= T::exact_tol() * scale
    }

    /// Matrix-vector product.
    pub fn apply(&self, state: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if state.len() != self.dim() {
            return Err(Error::Shape(format!("state length {} vs dim {}", state.len(), self.dim())));
        }
        let n = self.dim();
        Ok((0..n)
            .map(|i| (0..n).fold(Complex::new(T::zero(), T::zero()), |acc, j| acc + self.data[(i, j)] * state[j]))
            .collect())
    }
}

/// Annihilation and creation operators on a Fock space truncated at `dim` levels.
pub fn ladder<T: Real>(dim: usize) -> Result<(Operator<T>, Operator<T>)> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!("ladder needs dim >= 2, got {dim}")));
    }
    let mut a = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = Complex::new(lit::<T>(n as f64).sqrt(), T::zero());
    }
    let a = Operator { dims: vec![dim], data: a };
    let adag = a.adjoint();
    Ok((a, adag))
}

/// Number operator `a†a`.
pub fn number<T: Real>(dim: usize) -> Result<Operator<T>> {
    let (a, adag) = ladder::<T>(dim)?;
    adag.matmul(&a)
}

/// Projector-style transition `|to⟩⟨from|` on a `dim`-level system.
pub fn transition<T: Real>(dim: usize, to: usize, from: usize) -> Result<Operator<T>> {
    if to >= dim || from >= dim {
        return Err(Error::InvalidDimension(format!("level {to}/{from} outside dim {dim}")));
    }
    let mut m = DMatrix::zeros(dim, dim);
    m[(to, from)] = Complex::new(T::one(), T::zero());
    Ok(Operator { dims: vec![dim], data: m })
}

// Two-level convention: index 0 = |g⟩ (σz = −1), index 1 = |e⟩ (σz = +1).

pub fn sigma_z<T: Real>() -> Operator<T> {
    Operator::from_diagonal(&[-T::one(), T::one()])
}

/// `σ− = |g⟩⟨e|`.
pub fn sigma_minus<T: Real>() -> Operator<T> {
    transition(2, 0, 1).expect("two-level")
}

/// `σ+ = |e⟩⟨g|`.
pub fn sigma_plus<T: Real>() -> Operator<T> {
    transition(2, 1, 0).expect("two-level")
}

/// Places `op` at position `slot` of the tensor product described by `dims`,
/// with identities on every other factor.
pub fn embed<T: Real>(op: &Operator<T>, slot: usize, dims: &[usize]) -> Result<Operator<T>> {
    if slot >= dims.len() {
        return Err(Error::Shape(format!("slot {slot} outside {} factors", dims.len())));
    }
    if op.dims != [dims[slot]] {
        return Err(Error::Shape(format!(
            "operator dims {:?} do not match factor {slot} of {dims:?}",
            op.dims
        )));
    }
    let left = Operator::<T>::identity(&[total_dim(&dims[..slot])]);
    let right = Operator::<T>::identity(&[total_dim(&dims[slot + 1..])]);
    let data = left.data.kronecker(&op.data).kronecker(&right.data);
    Ok(Operator { dims: dims.to_vec(), data })
}

/// Tensor product of single-factor operators, identity on unnamed slots.
/// Factors sharing a slot are multiplied in the order given.
///
/// Cheaper than multiplying embedded operators: only the small factors are
/// ever multiplied.
pub fn embed_product<T: Real>(factors: &[(&Operator<T>, usize)], dims: &[usize]) -> Result<Operator<T>> {
    let mut slots: Vec<Operator<T>> = dims.iter().map(|&d| Operator::identity(&[d])).collect();
    for &(op, slot) in factors {
        if slot >= dims.len() {
            return Err(Error::Shape(format!("slot {slot} outside {} factors", dims.len())));
        }
        slots[slot] = slots[slot].matmul(op)?;
    }
    let data = slots
        .iter()
        .skip(1)
        .fold(slots[0].data.clone(), |acc, op| acc.kronecker(&op.data));
    Ok(Operator { dims: dims.to_vec(), data })
}

/// Occupation labels of the product basis in row-major order (last factor fastest).
pub fn product_basis(dims: &[usize]) -> Vec<Vec<usize>> {
    let n = total_dim(dims);
    (0..n)
        .map(|mut idx| {
            let mut label = vec![0; dims.len()];
            for k in (0..dims.len()).rev() {
                label[k] = idx % dims[k];
                idx /= dims[k];
            }
            label
        })
        .collect()
}

/// Row index of a product-basis label.
pub fn basis_index(dims: &[usize], label: &[usize]) -> Option<usize> {
    if label.len() != dims.len() || label.iter().zip(dims).any(|(l, d)| l >= d) {
        return None;
    }
    Some(label.iter().zip(dims).fold(0, |acc, (l, d)| acc * d + l))
}

/// Bare-state to dressed-state assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment<T: Real = f64> {
    pub label: Vec<usize>,
    /// Column of the eigenvector matrix with maximal overlap.
    pub index: usize,
    /// `|⟨bare|eigvec⟩|` for that column.
    pub overlap: T,
    pub ambiguous: bool,
}

#[derive(Clone, Debug)]
pub struct EigenResult<T: Real = f64> {
    /// Ascending, rad/s.
    pub eigenvalues: Vec<T>,
    /// Column k belongs to eigenvalue k.
    pub eigenvectors: DMatrix<Complex<T>>,
    /// One entry per bare label, in input order.
    pub assignments: Vec<Assignment<T>>,
}

impl<T: Real> EigenResult<T> {
    /// Dressed energy assigned to `label` and whether the assignment is ambiguous.
    pub fn energy_of(&self, label: &[usize]) -> Option<(T, bool)> {
        self.assignments
            .iter()
            .find(|a| a.label == label)
            .map(|a| (self.eigenvalues[a.index], a.ambiguous))
    }

    pub fn ambiguous_labels(&self) -> Vec<&[usize]> {
        self.assignments.iter().filter(|a| a.ambiguous).map(|a| a.label.as_slice()).collect()
    }

    pub fn is_unambiguous(&self) -> bool {
        self.assignments.iter().all(|a| !a.ambiguous)
    }

    /// `max|H − V Λ V†|`.
    pub fn reconstruction_error(&self, h: &Operator<T>) -> T {
        let v = &self.eigenvectors;
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&e| Complex::new(e, T::zero())),
        ));
        let rec = v * lambda * v.adjoint();
        (h.matrix() - rec).iter().fold(T::zero(), |m, z| m.max(z.modulus()))
    }

    /// `max|V†V − I|`.
    pub fn unitarity_error(&self) -> T {
        let v = &self.eigenvectors;
        let n = v.ncols();
        let g = v.adjoint() * v - DMatrix::<Complex<T>>::identity(n, n);
        g.iter().fold(T::zero(), |m, z| m.max(z.modulus()))
    }
}

/// Full Hermitian eigendecomposition with bare-state bookkeeping.
///
/// `bare_labels[i]` names row `i` of the matrix (see [`product_basis`]). Each label
/// is assigned the eigenvector with the largest `|⟨bare|v⟩|`; labels whose best
/// overlap falls below `1/√2`, or that share an eigenvector with another label,
/// are flagged ambiguous.
pub fn eig_hermitian<T: Real>(h: &Operator<T>, bare_labels: &[Vec<usize>]) -> Result<EigenResult<T>> {
    if !h.is_hermitian() {
        return Err(Error::Contract(format!(
            "matrix is not Hermitian: max|H - H^dag| = {:e}",
            crate::scalar::to_f64(h.hermiticity_error())
        )));
    }
    let n = h.dim();
    if bare_labels.len() != n {
        return Err(Error::Shape(format!("{} labels for dimension {n}", bare_labels.len())));
    }

    // Symmetrize so rounding asymmetries do not leak into the solver.
    let half = lit::<T>(0.5);
    let sym = (h.matrix() + h.matrix().adjoint()).map(|z| z * Complex::new(half, T::zero()));
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues: Vec<T> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let norm = col.norm();
        eigenvectors.set_column(k, &(col / Complex::new(norm, T::zero())));
    }

    let threshold = lit::<T>(std::f64::consts::FRAC_1_SQRT_2);
    let mut assignments: Vec<Assignment<T>> = bare_labels
        .iter()
        .enumerate()
        .map(|(row, label)| {
            let (index, overlap) = (0..n)
                .map(|k| (k, eigenvectors[(row, k)].modulus()))
                .fold((0, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            Assignment { label: label.clone(), index, overlap, ambiguous: overlap < threshold }
        })
        .collect();

    let mut claimed = vec![0usize; n];
    for a in &assignments {
        claimed[a.index] += 1;
    }
    for a in &mut assignments {
        if claimed[a.index] > 1 {
            a.ambiguous = true;
        }
    }

    Ok(EigenResult { eigenvalues, eigenvectors, assignments })
}
