//! Finite-dimensional models: commuting Hermitian tuples built on a shared
//! eigenbasis, iterated commutators, resolvent-type kernels and weights.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiindex::MultiIndex;

pub type Operator = DMatrix<Complex64>;

const HERMITIAN_TOL: f64 = 1e-12;

/// `⟨x⟩ = (1 + |x|²)^{1/2}`.
pub fn japanese_bracket(x: &[f64]) -> f64 {
    (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// `nu` commuting Hermitian `d×d` matrices `A_j = U diag(spectrum[·][j]) U*`.
#[derive(Clone, Debug)]
pub struct CommutingTuple {
    basis: Operator,
    spectrum: Vec<Vec<f64>>,
    components: Vec<Operator>,
}

impl CommutingTuple {
    /// Builds the tuple from a unitary basis and the joint spectrum
    /// (`spectrum[k]` is the k-th joint eigenvalue, a point in `R^nu`).
    pub fn from_parts(basis: Operator, spectrum: Vec<Vec<f64>>) -> Result<Self> {
        let d = basis.nrows();
        if d == 0 || basis.ncols() != d || spectrum.len() != d {
            return Err(Error::Precondition("basis must be d×d with d spectral points".into()));
        }
        let nu = spectrum[0].len();
        if nu == 0 || spectrum.iter().any(|p| p.len() != nu || p.iter().any(|x| !x.is_finite())) {
            return Err(Error::Precondition("spectral points must be finite with a common dimension".into()));
        }
        let unitarity = (basis.adjoint() * &basis - Operator::identity(d, d)).norm();
        if unitarity > 1e-10 {
            return Err(Error::Precondition(format!("basis is not unitary (defect {unitarity:e})")));
        }
        let components = (0..nu)
            .map(|j| {
                let diag = Operator::from_diagonal(&nalgebra::DVector::from_iterator(
                    d,
                    spectrum.iter().map(|p| Complex64::new(p[j], 0.0)),
                ));
                &basis * diag * basis.adjoint()
            })
            .collect();
        Ok(CommutingTuple {
            basis,
            spectrum,
            components,
        })
    }

    /// Tuple that is diagonal in the standard basis.
    pub fn diagonal(spectrum: Vec<Vec<f64>>) -> Result<Self> {
        let d = spectrum.len();
        Self::from_parts(Operator::identity(d, d), spectrum)
    }

    /// Seeded random tuple: Haar-distributed basis (QR of a complex Gaussian
    /// matrix with phase correction) and joint spectrum uniform in
    /// `[-scale, scale]^nu`.
    pub fn random(seed: u64, nu: usize, d: usize, scale: f64) -> Result<Self> {
        if nu == 0 || d == 0 || !(scale >= 0.0) {
            return Err(Error::Precondition(format!(
                "need nu >= 1, d >= 1, scale >= 0 (got {nu}, {d}, {scale})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = random_unitary(&mut rng, d);
        let spectrum = (0..d)
            .map(|_| {
                (0..nu)
                    .map(|_| if scale > 0.0 { rng.random_range(-scale..=scale) } else { 0.0 })
                    .collect()
            })
            .collect();
        Self::from_parts(basis, spectrum)
    }

    pub fn nu(&self) -> usize {
        self.spectrum[0].len()
    }

    pub fn dim(&self) -> usize {
        self.spectrum.len()
    }

    pub fn component(&self, j: usize) -> &Operator {
        &self.components[j]
    }

    pub fn components(&self) -> &[Operator] {
        &self.components
    }

    pub fn basis(&self) -> &Operator {
        &self.basis
    }

    pub fn spectrum(&self) -> &[Vec<f64>] {
        &self.spectrum
    }

    /// Largest `|λ_j|` over the joint spectrum and all axes.
    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.spectrum
            .iter()
            .flat_map(|p| p.iter().map(|x| x.abs()))
            .fold(0.0, f64::max)
    }

    /// `U* M U`.
    pub fn to_eigenbasis(&self, m: &Operator) -> Operator {
        self.basis.adjoint() * m * &self.basis
    }

    /// `U M U*`.
    pub fn from_eigenbasis(&self, m: &Operator) -> Operator {
        &self.basis * m * self.basis.adjoint()
    }

    /// `U diag(values) U*`.
    pub fn from_diagonal_values(&self, values: &[Complex64]) -> Operator {
        let mut scaled = self.basis.clone();
        for (k, v) in values.iter().enumerate() {
            let mut col = scaled.column_mut(k);
            col *= *v;
        }
        scaled * self.basis.adjoint()
    }

    /// `f(A) = U diag(f(λ_k)) U*`.
    pub fn spectral_apply<F>(&self, mut f: F) -> Result<Operator>
    where
        F: FnMut(&[f64]) -> Result<Complex64>,
    {
        let values = self
            .spectrum
            .iter()
            .map(|p| f(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.from_diagonal_values(&values))
    }

    /// Real-valued convenience form of [`spectral_apply`](Self::spectral_apply).
    pub fn spectral_apply_real<F>(&self, mut f: F) -> Operator
    where
        F: FnMut(&[f64]) -> f64,
    {
        self.spectral_apply(|x| Ok(Complex64::new(f(x), 0.0)))
            .expect("infallible evaluation")
    }

    /// `|A − z|^{−2} = (Σ_j (A_j − Re z_j)² + (Im z_j)²)^{−1}`.
    pub fn resolvent_kernel(&self, z: &[Complex64]) -> Result<Operator> {
        self.check_point(z)?;
        self.spectral_apply(|x| {
            let q = squared_distance(x, z);
            if q == 0.0 {
                return Err(Error::Singular(format!("joint eigenvalue {x:?} coincides with z")));
            }
            Ok(Complex64::new(1.0 / q, 0.0))
        })
    }

    /// `⟨A⟩^t = (I + Σ_j A_j²)^{t/2}`.
    pub fn weight(&self, t: f64) -> WeightPower {
        WeightPower {
            exponent: t,
            matrix: self.spectral_apply_real(|x| japanese_bracket(x).powf(t)),
        }
    }

    fn check_point(&self, z: &[Complex64]) -> Result<()> {
        if z.len() != self.nu() {
            return Err(Error::Precondition(format!(
                "z has {} components, tuple has {}",
                z.len(),
                self.nu()
            )));
        }
        Ok(())
    }

    /// Checks Hermiticity, pairwise commutation and spectral reconstruction.
    pub fn check_invariants(&self) -> Result<()> {
        for (j, a) in self.components.iter().enumerate() {
            let na = op_norm(a).max(1e-300);
            if op_norm(&(a - a.adjoint())) > HERMITIAN_TOL * na {
                return Err(Error::Domain(format!("A_{j} is not Hermitian")));
            }
        }
        for (i, a) in self.components.iter().enumerate() {
            for (j, b) in self.components.iter().enumerate().skip(i + 1) {
                let c = op_norm(&(a * b - b * a));
                if c > HERMITIAN_TOL * op_norm(a).max(1.0) * op_norm(b).max(1.0) {
                    return Err(Error::Domain(format!("A_{i} and A_{j} do not commute ({c:e})")));
                }
            }
        }
        Ok(())
    }
}

/// `⟨A⟩^t` as a matrix.
#[derive(Clone, Debug)]
pub struct WeightPower {
    pub exponent: f64,
    pub matrix: Operator,
}

pub fn squared_distance(x: &[f64], z: &[Complex64]) -> f64 {
    x.iter()
        .zip(z)
        .map(|(xj, zj)| {
            let r = xj - zj.re;
            r * r + zj.im * zj.im
        })
        .sum()
}

fn random_unitary(rng: &mut ChaCha8Rng, d: usize) -> Operator {
    let g = random_gaussian_matrix(rng, d);
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for k in 0..d {
        let rk = r[(k, k)];
        let phase = if rk.norm() > 0.0 { rk / rk.norm() } else { Complex64::new(1.0, 0.0) };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    q
}

fn random_gaussian_matrix(rng: &mut ChaCha8Rng, d: usize) -> Operator {
    Operator::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    })
}

/// Seeded complex Gaussian matrix scaled to unit spectral norm.
pub fn random_operator(seed: u64, d: usize) -> Operator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_gaussian_matrix(&mut rng, d);
    let n = op_norm(&g);
    g.unscale(n)
}

/// Seeded Hermitian matrix with unit spectral norm.
pub fn random_hermitian(seed: u64, d: usize) -> Operator {
    let g = random_operator(seed, d);
    let h = (&g + g.adjoint()).scale(0.5);
    let n = op_norm(&h);
    h.unscale(n)
}

/// `[X, Y] = XY − YX`.
pub fn commutator(x: &Operator, y: &Operator) -> Operator {
    x * y - y * x
}

/// `ad_A^α(B)`, applying the axes of `α` in increasing order.
pub fn iterated_commutator(a: &CommutingTuple, b: &Operator, alpha: &MultiIndex) -> Operator {
    iterated_commutator_along(a, b, &alpha.axis_sequence())
}

/// Iterated commutator `[...[[B, A_{j1}], A_{j2}]..., A_{jk}]`.
pub fn iterated_commutator_along(a: &CommutingTuple, b: &Operator, axes: &[usize]) -> Operator {
    axes.iter()
        .fold(b.clone(), |x, &j| commutator(&x, a.component(j)))
}

/// Spectral norm.
pub fn op_norm(m: &Operator) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// `‖X − Y‖ / max(scale, tiny)`.
pub fn relative_residual(x: &Operator, y: &Operator, scale: f64) -> f64 {
    op_norm(&(x - y)) / scale.max(f64::MIN_POSITIVE)
}

/// Row-major JSON layout with `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl From<&Operator> for MatrixJson {
    fn from(m: &Operator) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

impl TryFrom<&MatrixJson> for Operator {
    type Error = Error;
    fn try_from(j: &MatrixJson) -> Result<Operator> {
        if j.data.len() != j.rows * j.cols {
            return Err(Error::Config(format!(
                "matrix data has {} entries, expected {}×{}",
                j.data.len(),
                j.rows,
                j.cols
            )));
        }
        if j.data.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Config("matrix entries must be finite".into()));
        }
        Ok(Operator::from_fn(j.rows, j.cols, |r, c| {
            let [re, im] = j.data[r * j.cols + c];
            Complex64::new(re, im)
        }))
    }
}
