//! Hermitian positive-definite helpers shared by the state and probability
//! code.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) type CMatrix = DMatrix<Complex64>;

/// Lower Cholesky factor that grows and shrinks one row at a time.
///
/// Appending an index to the factored principal submatrix costs O(d²) instead
/// of refactoring from scratch, which is what makes a depth-first walk over
/// all principal minors cheap.
pub(crate) struct CholeskyStack {
    cap: usize,
    lower: Vec<Complex64>,
    diag: Vec<f64>,
    rows: Vec<usize>,
    logdets: Vec<f64>,
}

impl CholeskyStack {
    pub(crate) fn new(cap: usize) -> Self {
        Self {
            cap,
            lower: vec![Complex64::new(0.0, 0.0); cap * cap],
            diag: vec![0.0; cap],
            rows: Vec::with_capacity(cap),
            logdets: vec![0.0],
        }
    }

    pub(crate) fn logdet(&self) -> f64 {
        *self.logdets.last().unwrap()
    }

    /// Appends matrix index `row`. Returns the squared pivot on failure.
    pub(crate) fn push(&mut self, m: &CMatrix, row: usize) -> std::result::Result<(), f64> {
        let d = self.rows.len();
        debug_assert!(d < self.cap);
        let mut norm = 0.0;
        for i in 0..d {
            let mut y = m[(self.rows[i], row)];
            for j in 0..i {
                y -= self.lower[i * self.cap + j] * self.lower[d * self.cap + j].conj();
            }
            let y = y / self.diag[i];
            norm += y.norm_sqr();
            self.lower[d * self.cap + i] = y.conj();
        }
        let pivot = m[(row, row)].re - norm;
        if !(pivot > 0.0) {
            return Err(pivot);
        }
        self.diag[d] = pivot.sqrt();
        self.rows.push(row);
        let ld = self.logdet() + pivot.ln();
        self.logdets.push(ld);
        Ok(())
    }

    pub(crate) fn pop(&mut self) {
        self.rows.pop();
        self.logdets.pop();
    }
}

/// Walks every non-empty subset of `units` depth first, calling `visit` with
/// the subset mask (bit `t` set when `units[t]` is included) and the log
/// determinant of the principal submatrix of `m` on the rows of those units.
///
/// The empty subset (log determinant 0) is not visited.
pub(crate) fn for_each_principal_logdet<F>(m: &CMatrix, units: &[[usize; 2]], mut visit: F) -> Result<()>
where
    F: FnMut(u64, f64),
{
    assert!(units.len() < 64, "subset masks are 64-bit");
    let mut stack = CholeskyStack::new(2 * units.len());
    walk(m, units, 0, 0, &mut stack, &mut visit)
}

fn walk<F>(m: &CMatrix, units: &[[usize; 2]], start: usize, mask: u64, stack: &mut CholeskyStack, visit: &mut F) -> Result<()>
where
    F: FnMut(u64, f64),
{
    for t in start..units.len() {
        let next = mask | (1 << t);
        for (pushed, &row) in units[t].iter().enumerate() {
            if let Err(pivot) = stack.push(m, row) {
                for _ in 0..pushed {
                    stack.pop();
                }
                return Err(Error::NonPositiveMinor {
                    subset: mask_positions(next),
                    pivot,
                });
            }
        }
        visit(next, stack.logdet());
        walk(m, units, t + 1, next, stack, visit)?;
        stack.pop();
        stack.pop();
    }
    Ok(())
}

pub(crate) fn mask_positions(mask: u64) -> Vec<usize> {
    (0..64).filter(|t| mask >> t & 1 == 1).collect()
}

/// Log determinant and inverse of a Hermitian positive-definite matrix.
pub(crate) fn hermitian_logdet_inverse(m: &CMatrix) -> Option<(f64, CMatrix)> {
    let chol = Cholesky::new(m.clone())?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.re.ln()).sum::<f64>();
    let inv = chol.inverse();
    Some((logdet, hermitize(&inv)))
}

pub(crate) fn hermitian_logdet(m: &CMatrix) -> Option<f64> {
    let chol = Cholesky::new(m.clone())?;
    Some(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.re.ln()).sum::<f64>())
}

pub(crate) fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub(crate) fn min_hermitian_eigenvalue(m: &CMatrix) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}
