//! Symmetric positive-definite matrices and whitening.
//!
//! Everything goes through one symmetric eigendecomposition `A = V Λ Vᵀ`,
//! which then serves the symmetric square root, the inverse square root,
//! the log-determinant and the conditioning report.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{GofError, Result};
use crate::sample::Sample;
use crate::tolerances::{MAX_CONDITION, SYMMETRY_REL_TOL};

/// A validated symmetric positive-definite matrix with its spectral factorization.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    matrix: DMatrix<f64>,
    /// Eigenvalues in descending order.
    eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors, columns aligned with `eigenvalues`.
    eigenvectors: DMatrix<f64>,
    sqrt: OnceLock<DMatrix<f64>>,
    inv_sqrt: OnceLock<DMatrix<f64>>,
    inverse: OnceLock<DMatrix<f64>>,
}

/// Spectrum endpoints of an [`SpdMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub condition_number: f64,
}

impl SpdMatrix {
    /// Validate symmetry, factorize, and reject non-positive spectra.
    pub fn factorize(a: &DMatrix<f64>) -> Result<Self> {
        let (r, c) = a.shape();
        if r != c {
            return Err(GofError::DimensionMismatch {
                expected: r,
                found: c,
            });
        }
        if r == 0 {
            return Err(GofError::InvalidParameter("empty matrix".into()));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(GofError::NonFinite("matrix entry".into()));
        }
        let scale = a.amax();
        let mut asym = 0.0_f64;
        for i in 0..r {
            for j in (i + 1)..r {
                asym = asym.max((a[(i, j)] - a[(j, i)]).abs());
            }
        }
        if asym > SYMMETRY_REL_TOL * scale {
            return Err(GofError::NotSymmetric {
                max_asymmetry: asym,
            });
        }
        let sym = (a + a.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());

        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let eigenvalues = DVector::from_iterator(r, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut eigenvectors = DMatrix::zeros(r, r);
        for (dst, &src) in order.iter().enumerate() {
            eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
        }

        let lambda_min = eigenvalues[r - 1];
        if !(lambda_min > 0.0) {
            return Err(GofError::NotPositiveDefinite { lambda_min });
        }
        Ok(Self {
            matrix: sym,
            eigenvalues,
            eigenvectors,
            sqrt: OnceLock::new(),
            inv_sqrt: OnceLock::new(),
            inverse: OnceLock::new(),
        })
    }

    pub fn identity(m: usize) -> Self {
        Self::factorize(&DMatrix::identity(m, m)).expect("identity is SPD")
    }

    /// Diagonal matrix with the given positive entries.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::factorize(&DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// `log |A| = Σ log λᵢ`.
    pub fn log_det(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.ln()).sum()
    }

    pub fn condition_diagnostics(&self) -> ConditionReport {
        let lambda_max = self.eigenvalues[0];
        let lambda_min = self.eigenvalues[self.dim() - 1];
        ConditionReport {
            lambda_min,
            lambda_max,
            condition_number: lambda_max / lambda_min,
        }
    }

    fn check_conditioning(&self) -> Result<()> {
        let condition = self.condition_diagnostics().condition_number;
        if condition > MAX_CONDITION {
            return Err(GofError::IllConditioned { condition });
        }
        Ok(())
    }

    fn spectral_map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[j]);
        }
        let out = scaled * v.transpose();
        (&out + out.transpose()) * 0.5
    }

    /// Symmetric square root `V Λ^{1/2} Vᵀ`, cached after the first call.
    pub fn sqrt(&self) -> Result<&DMatrix<f64>> {
        self.check_conditioning()?;
        Ok(self.sqrt.get_or_init(|| self.spectral_map(f64::sqrt)))
    }

    /// Symmetric inverse square root `V Λ^{-1/2} Vᵀ`, cached after the first call.
    pub fn inv_sqrt(&self) -> Result<&DMatrix<f64>> {
        self.check_conditioning()?;
        Ok(self.inv_sqrt.get_or_init(|| self.spectral_map(|l| 1.0 / l.sqrt())))
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        self.inverse.get_or_init(|| self.spectral_map(|l| 1.0 / l))
    }

    /// `c · A` without refactorizing.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(GofError::InvalidParameter(format!(
                "scale factor must be positive, got {c}"
            )));
        }
        Ok(Self {
            matrix: &self.matrix * c,
            eigenvalues: &self.eigenvalues * c,
            eigenvectors: self.eigenvectors.clone(),
            sqrt: OnceLock::new(),
            inv_sqrt: OnceLock::new(),
            inverse: OnceLock::new(),
        })
    }

    /// Squared Mahalanobis distance `(x−μ)ᵀ A⁻¹ (x−μ)` via the eigenbasis.
    pub fn mahalanobis_sq(&self, centered: &[f64]) -> f64 {
        let v = &self.eigenvectors;
        let m = self.dim();
        let mut q = 0.0;
        for j in 0..m {
            let proj: f64 = v.column(j).iter().zip(centered).map(|(a, b)| a * b).sum();
            q += proj * proj / self.eigenvalues[j];
        }
        q
    }
}

/// Relative Frobenius distance `‖a − b‖_F / ‖b‖_F`.
pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// The affine standardisation `x ↦ Σ̂^{-1/2}(x − μ̂)` and its inverse.
#[derive(Debug, Clone)]
pub struct WhiteningMap {
    mu_hat: DVector<f64>,
    sigma_inv_sqrt: DMatrix<f64>,
    sigma_sqrt: DMatrix<f64>,
}

impl WhiteningMap {
    pub fn new(mu_hat: DVector<f64>, sigma: &SpdMatrix) -> Result<Self> {
        if mu_hat.len() != sigma.dim() {
            return Err(GofError::DimensionMismatch {
                expected: sigma.dim(),
                found: mu_hat.len(),
            });
        }
        Ok(Self {
            mu_hat,
            sigma_inv_sqrt: sigma.inv_sqrt()?.clone(),
            sigma_sqrt: sigma.sqrt()?.clone(),
        })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            mu_hat: DVector::zeros(m),
            sigma_inv_sqrt: DMatrix::identity(m, m),
            sigma_sqrt: DMatrix::identity(m, m),
        }
    }

    pub fn mu_hat(&self) -> &DVector<f64> {
        &self.mu_hat
    }

    pub fn sigma_inv_sqrt(&self) -> &DMatrix<f64> {
        &self.sigma_inv_sqrt
    }

    pub fn dim(&self) -> usize {
        self.mu_hat.len()
    }

    /// Row-wise `Σ̂^{-1/2}(xᵢ − μ̂)`.
    pub fn whiten(&self, x: &Sample) -> Result<Sample> {
        if x.m() != self.dim() {
            return Err(GofError::DimensionMismatch {
                expected: self.dim(),
                found: x.m(),
            });
        }
        // Rows are row vectors, so the map is (x − μ̂)ᵀ W with W symmetric.
        let shift = -(self.mu_hat.transpose() * &self.sigma_inv_sqrt).transpose();
        x.affine(&self.sigma_inv_sqrt, &shift)
    }

    /// Row-wise `Σ̂^{1/2} zᵢ + μ̂`.
    pub fn unwhiten(&self, z: &Sample) -> Result<Sample> {
        if z.m() != self.dim() {
            return Err(GofError::DimensionMismatch {
                expected: self.dim(),
                found: z.m(),
            });
        }
        z.affine(&self.sigma_sqrt, &self.mu_hat)
    }
}
