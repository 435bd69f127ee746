//! Sampling from `N(μ, (A ⊗ G)^{-1})` with factor-sized linear algebra only.
//!
//! With eigendecompositions `A = E_A Λ_A E_Aᵀ` and `G = E_G Λ_G E_Gᵀ` define
//! `B_A = E_A Λ_A^{-1/2}` and `B_G = E_G Λ_G^{-1/2}`. Then
//! `(B_A ⊗ B_G)(B_A ⊗ B_G)ᵀ = A^{-1} ⊗ G^{-1} = (A ⊗ G)^{-1}`, and the
//! product with a standard normal vector is `vec(B_G mat(z) B_Aᵀ)`, where
//! `vec` stacks columns and `mat` reshapes a length `a·g` vector into a
//! `g × a` matrix column by column.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct KroneckerBlock {
    a: DMatrix<f64>,
    g: DMatrix<f64>,
    eig_a: SymmetricEigen<f64, nalgebra::Dyn>,
    eig_g: SymmetricEigen<f64, nalgebra::Dyn>,
    b_a: DMatrix<f64>,
    b_g: DMatrix<f64>,
}

impl KroneckerBlock {
    /// Decomposes both factors once; fails if either is not symmetric positive definite.
    pub fn new(a: DMatrix<f64>, g: DMatrix<f64>) -> Result<Self> {
        let eig_a = decompose(&a, "A")?;
        let eig_g = decompose(&g, "G")?;
        let b_a = inverse_sqrt_factor(&eig_a);
        let b_g = inverse_sqrt_factor(&eig_g);
        Ok(KroneckerBlock {
            a,
            g,
            eig_a,
            eig_g,
            b_a,
            b_g,
        })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// `(a, g)`: the sample dimension is `a * g`.
    pub fn dims(&self) -> (usize, usize) {
        (self.a.nrows(), self.g.nrows())
    }

    pub fn eigenvalues_a(&self) -> &DVector<f64> {
        &self.eig_a.eigenvalues
    }

    pub fn eigenvalues_g(&self) -> &DVector<f64> {
        &self.eig_g.eigenvalues
    }

    pub fn b_a(&self) -> &DMatrix<f64> {
        &self.b_a
    }

    pub fn b_g(&self) -> &DMatrix<f64> {
        &self.b_g
    }

    /// `A^{-1} ⊗ G^{-1}` assembled from the per-factor inverses.
    pub fn covariance(&self) -> DMatrix<f64> {
        let inv_a = &self.b_a * self.b_a.transpose();
        let inv_g = &self.b_g * self.b_g.transpose();
        inv_a.kronecker(&inv_g)
    }

    /// `(A ⊗ G) x = vec(G mat(x) Aᵀ)`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (a, g) = self.dims();
        if x.len() != a * g {
            return Err(Error::Contract(format!(
                "vector of length {} for a {a}x{g} Kronecker block",
                x.len()
            )));
        }
        let x = DMatrix::from_column_slice(g, a, x);
        Ok((&self.g * x * self.a.transpose()).as_slice().to_vec())
    }

    /// `μ + vec(B_G mat(z) B_Aᵀ)` with `z ~ N(0, I)`.
    pub fn sample<R: Rng + ?Sized>(&self, mean: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let (a, g) = self.dims();
        if mean.len() != a * g {
            return Err(Error::Contract(format!(
                "mean of length {} for a {a}x{g} Kronecker block",
                mean.len()
            )));
        }
        let z = DMatrix::from_fn(g, a, |_, _| rng.sample::<f64, _>(StandardNormal));
        let offset = &self.b_g * z * self.b_a.transpose();
        Ok(mean
            .iter()
            .zip(offset.as_slice())
            .map(|(m, o)| m + o)
            .collect())
    }
}

fn decompose(m: &DMatrix<f64>, name: &str) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::Decomposition(format!(
            "factor {name} must be square and nonempty"
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Decomposition(format!(
            "factor {name} has non-finite entries"
        )));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > SYMMETRY_TOLERANCE * scale {
        return Err(Error::Decomposition(format!(
            "factor {name} is not symmetric"
        )));
    }
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::Decomposition(format!(
            "factor {name} is not positive definite (min eigenvalue {})",
            eig.eigenvalues.min()
        )));
    }
    Ok(eig)
}

fn inverse_sqrt_factor(eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> DMatrix<f64> {
    let mut b = eig.eigenvectors.clone();
    for (mut col, &l) in b.column_iter_mut().zip(eig.eigenvalues.iter()) {
        col /= l.sqrt();
    }
    b
}
