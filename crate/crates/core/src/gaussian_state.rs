//! Gaussian covariance matrices of the interferometer output.
//!
//! Matrices live in the doubled basis where mode `j` of an `n`-mode state
//! owns rows and columns `j` and `j + n`. The normalisation is such that the
//! vacuum has `sigma == I` and the probability of observing no click at all is
//! `1 / sqrt(det sigma)`.

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::seed;

const HERMITIAN_TOL: f64 = 1e-10;
const EIGEN_TOL: f64 = 1e-9;
const DET_TOL: f64 = 1e-9;
const SINGULAR_VALUE_TOL: f64 = 1e-8;

/// Interferometer description: an `n_output x n_input` transformation matrix
/// (lossy, so sub-unitary) and one squeezing parameter per pair of inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct GbsInstance {
    squeezing: Vec<f64>,
    transformation: CMatrix,
}

impl GbsInstance {
    pub fn new(squeezing: Vec<f64>, transformation: CMatrix) -> Result<Self> {
        let (n, k) = transformation.shape();
        if n == 0 {
            return Err(Error::Invariant {
                invariant: "n_output > 0",
                detail: "transformation has no rows".into(),
            });
        }
        if k == 0 || k % 2 != 0 {
            return Err(Error::Invariant {
                invariant: "n_input even and positive",
                detail: format!("transformation has {k} columns"),
            });
        }
        if squeezing.len() != k / 2 {
            return Err(Error::Invariant {
                invariant: "len(squeezing) == n_input / 2",
                detail: format!("{} squeezing parameters for {k} inputs", squeezing.len()),
            });
        }
        if let Some(r) = squeezing.iter().find(|r| !r.is_finite() || **r < 0.0) {
            return Err(Error::Invariant {
                invariant: "squeezing finite and non-negative",
                detail: format!("found {r}"),
            });
        }
        if transformation.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
            return Err(Error::Invariant {
                invariant: "transformation finite",
                detail: "non-finite entry".into(),
            });
        }
        let instance = Self {
            squeezing,
            transformation,
        };
        let s = instance.max_singular_value();
        if s > 1.0 + SINGULAR_VALUE_TOL {
            return Err(Error::Invariant {
                invariant: "singular values of T <= 1",
                detail: format!("largest singular value {s}"),
            });
        }
        if s > 1.0 {
            warn!("transformation matrix has singular value {s} slightly above 1; accepted as round-off");
        }
        Ok(instance)
    }

    pub fn n_output(&self) -> usize {
        self.transformation.nrows()
    }

    pub fn n_input(&self) -> usize {
        self.transformation.ncols()
    }

    pub fn squeezing(&self) -> &[f64] {
        &self.squeezing
    }

    pub fn transformation(&self) -> &CMatrix {
        &self.transformation
    }

    pub fn max_singular_value(&self) -> f64 {
        let gram = self.transformation.adjoint() * &self.transformation;
        let top = SymmetricEigen::new(gram).eigenvalues.iter().cloned().fold(0.0, f64::max);
        top.max(0.0).sqrt()
    }
}

/// Parameters of a randomly drawn instance: Haar-random interferometer with
/// uniform transmission and squeezing drawn uniformly from a range.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomInstance {
    pub n_output: usize,
    pub n_input: usize,
    pub squeezing_min: f64,
    pub squeezing_max: f64,
    pub transmission: f64,
}

impl RandomInstance {
    pub fn new(n_output: usize, n_input: usize) -> Self {
        Self {
            n_output,
            n_input,
            squeezing_min: 0.5,
            squeezing_max: 1.5,
            transmission: 0.5,
        }
    }

    pub fn squeezing(mut self, min: f64, max: f64) -> Self {
        self.squeezing_min = min;
        self.squeezing_max = max;
        self
    }

    pub fn transmission(mut self, transmission: f64) -> Self {
        self.transmission = transmission;
        self
    }

    pub fn generate(&self, seed: u64) -> Result<GbsInstance> {
        if !(0.0..=1.0).contains(&self.transmission) {
            return Err(Error::Domain(format!("transmission {} outside [0, 1]", self.transmission)));
        }
        if !(0.0 <= self.squeezing_min && self.squeezing_min <= self.squeezing_max) {
            return Err(Error::Domain("squeezing range must satisfy 0 <= min <= max".into()));
        }
        let mut rng = seed::rng_from_seed(seed);
        let dim = self.n_output.max(self.n_input);
        let u = haar_unitary(dim, &mut rng);
        let t = u.view((0, 0), (self.n_output, self.n_input)).into_owned() * Complex64::new(self.transmission.sqrt(), 0.0);
        let squeezing = (0..self.n_input / 2)
            .map(|_| self.squeezing_min + (self.squeezing_max - self.squeezing_min) * rand::Rng::random::<f64>(&mut rng))
            .collect();
        GbsInstance::new(squeezing, t)
    }
}

fn haar_unitary<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            u[(i, j)] *= phase;
        }
    }
    u
}

/// An `n`-mode Gaussian state with its inverse and log determinant cached.
/// Immutable once built.
#[derive(Debug, Clone)]
pub struct GaussianState {
    n_modes: usize,
    sigma: CMatrix,
    logdet: f64,
    inverse: CMatrix,
}

impl GaussianState {
    /// Validates `sigma` against the physicality invariants and caches its
    /// factorization.
    pub fn from_covariance(sigma: CMatrix) -> Result<Self> {
        let (rows, cols) = sigma.shape();
        if rows != cols || rows % 2 != 0 || rows == 0 {
            return Err(Error::Dimension(format!("covariance must be 2n x 2n, got {rows} x {cols}")));
        }
        let n = rows / 2;
        let scale = sigma.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let tol = HERMITIAN_TOL * scale;

        let herm_err = (&sigma - sigma.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_err > tol {
            return Err(Error::Conditioning {
                invariant: "hermitian",
                detail: format!("max |sigma - sigma^H| = {herm_err:e}"),
            });
        }
        let mut block_err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                block_err = block_err
                    .max((sigma[(i + n, j + n)] - sigma[(i, j)].conj()).norm())
                    .max((sigma[(i + n, j)] - sigma[(i, j + n)].conj()).norm());
            }
        }
        if block_err > tol {
            return Err(Error::Conditioning {
                invariant: "conjugate block structure",
                detail: format!("max deviation {block_err:e}"),
            });
        }
        let sigma = linalg::hermitize(&sigma);
        let min_eig = linalg::min_hermitian_eigenvalue(&sigma);
        if min_eig < 0.5 - EIGEN_TOL {
            return Err(Error::Conditioning {
                invariant: "sigma - I/2 positive semidefinite",
                detail: format!("smallest eigenvalue {min_eig}"),
            });
        }
        let state = Self::factorize(sigma)?;
        if state.logdet < (1.0 - DET_TOL).ln() {
            return Err(Error::Conditioning {
                invariant: "det(sigma) >= 1",
                detail: format!("log det = {}", state.logdet),
            });
        }
        Ok(state)
    }

    fn factorize(sigma: CMatrix) -> Result<Self> {
        let n_modes = sigma.nrows() / 2;
        let (logdet, inverse) = linalg::hermitian_logdet_inverse(&sigma).ok_or(Error::Conditioning {
            invariant: "positive definite",
            detail: "Cholesky factorization failed".into(),
        })?;
        Ok(Self {
            n_modes,
            sigma,
            logdet,
            inverse,
        })
    }

    pub fn vacuum(n_modes: usize) -> Self {
        let id = CMatrix::identity(2 * n_modes, 2 * n_modes);
        Self {
            n_modes,
            sigma: id.clone(),
            logdet: 0.0,
            inverse: id,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn sigma(&self) -> &CMatrix {
        &self.sigma
    }

    pub fn inverse(&self) -> &CMatrix {
        &self.inverse
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// Probability that no detector clicks.
    pub fn vacuum_probability(&self) -> f64 {
        (-0.5 * self.logdet).exp()
    }

    /// Doubled-basis rows `[j, j + n]` of each mode.
    pub(crate) fn mode_rows(&self, modes: &[usize]) -> Vec<[usize; 2]> {
        modes.iter().map(|&j| [j, j + self.n_modes]).collect()
    }

    pub fn reduce(&self, modes: &[usize]) -> Result<Self> {
        reduce_state(self, modes)
    }
}

/// Input covariance `S (I/2) S^T` of `k` inputs squeezed pairwise: the
/// squeezing matrix is `[Ch | Sh; Sh | Ch]` with `Ch`, `Sh` block diagonal in
/// 2x2 blocks `cosh(r) I`, `sinh(r) I`, one block per parameter.
pub fn build_input_covariance(squeezing: &[f64], k: usize) -> Result<DMatrix<f64>> {
    if k % 2 != 0 || squeezing.len() * 2 != k {
        return Err(Error::Dimension(format!(
            "{} squeezing parameters cannot describe {k} inputs",
            squeezing.len()
        )));
    }
    if let Some(r) = squeezing.iter().find(|r| !r.is_finite() || **r < 0.0) {
        return Err(Error::Domain(format!("squeezing parameter {r} must be finite and non-negative")));
    }
    let mut s = DMatrix::<f64>::zeros(2 * k, 2 * k);
    for i in 0..k {
        let r = squeezing[i / 2];
        s[(i, i)] = r.cosh();
        s[(i + k, i + k)] = r.cosh();
        s[(i, i + k)] = r.sinh();
        s[(i + k, i)] = r.sinh();
    }
    Ok(&s * s.transpose() * 0.5)
}

/// Output covariance `I + D (sigma_in - I/2) D^H` with `D = diag(T, T*)`.
///
/// Written this way, zero squeezing gives exactly the identity.
pub fn build_output_covariance(instance: &GbsInstance) -> Result<GaussianState> {
    let t = instance.transformation();
    let (n, k) = t.shape();
    let sigma_in = build_input_covariance(instance.squeezing(), k)?;
    let mut excess = sigma_in.map(|x| Complex64::new(x, 0.0));
    for i in 0..2 * k {
        excess[(i, i)] -= Complex64::new(0.5, 0.0);
    }
    let mut d = CMatrix::zeros(2 * n, 2 * k);
    d.view_mut((0, 0), (n, k)).copy_from(t);
    d.view_mut((n, k), (n, k)).copy_from(&t.map(|z| z.conj()));
    let sigma = CMatrix::identity(2 * n, 2 * n) + &d * excess * d.adjoint();
    GaussianState::from_covariance(sigma)
}

/// Restricts a state to `modes` (in the given order), i.e. traces out every
/// other mode.
pub fn reduce_state(state: &GaussianState, modes: &[usize]) -> Result<GaussianState> {
    validate_modes(modes, state.n_modes)?;
    let rows: Vec<usize> = modes.iter().copied().chain(modes.iter().map(|&j| j + state.n_modes)).collect();
    let sigma = state.sigma.select_rows(&rows).select_columns(&rows);
    if modes.is_empty() {
        return Ok(GaussianState::vacuum(0));
    }
    GaussianState::factorize(sigma)
}

pub(crate) fn validate_modes(modes: &[usize], n_modes: usize) -> Result<()> {
    for (i, &m) in modes.iter().enumerate() {
        if m >= n_modes {
            return Err(Error::Index(format!("mode {m} out of range for {n_modes} modes")));
        }
        if modes[..i].contains(&m) {
            return Err(Error::Index(format!("mode {m} listed twice")));
        }
    }
    Ok(())
}
