//! Dense symmetric matrices of tiny dimension (k ≤ 8) with a cyclic Jacobi
//! eigensolver. Enough linear algebra to standardize covariances; nothing
//! more.

use serde::Serialize;

use crate::error::{Error, Result};

/// Off-diagonal magnitude below which the Jacobi sweep stops.
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 64;

/// Eigenvalues below this are treated as a degenerate covariance.
pub const MIN_COVARIANCE_EIGENVALUE: f64 = 1e-10;

/// Symmetric k×k matrix, dense row-major storage.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymMat {
    k: usize,
    a: Vec<f64>,
}

impl SymMat {
    pub fn zeros(k: usize) -> Self {
        SymMat {
            k,
            a: vec![0.0; k * k],
        }
    }

    pub fn identity(k: usize) -> Self {
        let mut m = Self::zeros(k);
        for i in 0..k {
            m.a[i * k + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        let mut m = Self::zeros(k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: row.len(),
                });
            }
            m.a[i * k..(i + 1) * k].copy_from_slice(row);
        }
        for i in 0..k {
            for j in 0..i {
                if (m.get(i, j) - m.get(j, i)).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.k + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.k + j] = v;
        self.a[j * self.k + i] = v;
    }

    pub fn add_assign_scaled(&mut self, other: &SymMat, s: f64) {
        debug_assert_eq!(self.k, other.k);
        for (x, y) in self.a.iter_mut().zip(&other.a) {
            *x += s * y;
        }
    }

    pub fn sub(&self, other: &SymMat) -> SymMat {
        debug_assert_eq!(self.k, other.k);
        SymMat {
            k: self.k,
            a: self.a.iter().zip(&other.a).map(|(x, y)| x - y).collect(),
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.k);
        (0..self.k)
            .map(|i| (0..self.k).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// ⟨v, A v⟩.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        self.mul_vec(v).iter().zip(v).map(|(x, y)| x * y).sum()
    }

    /// Eigendecomposition A = V diag(λ) Vᵀ by cyclic Jacobi rotations.
    ///
    /// Returns eigenvalues (ascending) and the matching eigenvectors as
    /// columns of a row-major k×k matrix.
    pub fn jacobi_eigen(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let k = self.k;
        let mut a = self.a.clone();
        let mut v = vec![0.0; k * k];
        for i in 0..k {
            v[i * k + i] = 1.0;
        }
        let scale = 1.0 + self.a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut converged = false;
        for _sweep in 0..JACOBI_MAX_SWEEPS {
            let off: f64 = {
                let mut s = 0.0;
                for p in 0..k {
                    for q in (p + 1)..k {
                        s += a[p * k + q] * a[p * k + q];
                    }
                }
                s.sqrt()
            };
            if off <= JACOBI_TOL * scale {
                converged = true;
                break;
            }
            for p in 0..k {
                for q in (p + 1)..k {
                    let apq = a[p * k + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[q * k + q] - a[p * k + p]) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (theta * theta + 1.0).sqrt())
                    } else {
                        -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                    };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    let tau = s / (1.0 + c);
                    let h = t * apq;
                    a[p * k + p] -= h;
                    a[q * k + q] += h;
                    a[p * k + q] = 0.0;
                    a[q * k + p] = 0.0;
                    for i in 0..k {
                        if i != p && i != q {
                            let aip = a[i * k + p];
                            let aiq = a[i * k + q];
                            a[i * k + p] = aip - s * (aiq + tau * aip);
                            a[i * k + q] = aiq + s * (aip - tau * aiq);
                            a[p * k + i] = a[i * k + p];
                            a[q * k + i] = a[i * k + q];
                        }
                    }
                    for i in 0..k {
                        let vip = v[i * k + p];
                        let viq = v[i * k + q];
                        v[i * k + p] = vip - s * (viq + tau * vip);
                        v[i * k + q] = viq + s * (vip - tau * viq);
                    }
                }
            }
        }
        if !converged {
            return Err(Error::EigenNoConvergence(JACOBI_MAX_SWEEPS));
        }
        let mut vals: Vec<f64> = (0..k).map(|i| a[i * k + i]).collect();
        // Sort eigenpairs ascending for a deterministic layout.
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
        let sorted_vals: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
        let mut sorted_vecs = vec![0.0; k * k];
        for (new_col, &old_col) in order.iter().enumerate() {
            for row in 0..k {
                sorted_vecs[row * k + new_col] = v[row * k + old_col];
            }
        }
        vals = sorted_vals;
        Ok((vals, sorted_vecs))
    }

    /// Spectral map: V f(λ) Vᵀ.
    fn spectral_map(&self, f: impl Fn(f64) -> f64) -> Result<SymMat> {
        let k = self.k;
        let (vals, vecs) = self.jacobi_eigen()?;
        let mut out = SymMat::zeros(k);
        for i in 0..k {
            for j in i..k {
                let mut s = 0.0;
                for (m, &lam) in vals.iter().enumerate() {
                    s += vecs[i * k + m] * f(lam) * vecs[j * k + m];
                }
                out.set(i, j, s);
            }
        }
        Ok(out)
    }

    /// Symmetric inverse square root A^{-1/2}.
    ///
    /// Fails with a degenerate-covariance error when the smallest eigenvalue
    /// drops below [`MIN_COVARIANCE_EIGENVALUE`].
    pub fn inverse_sqrt(&self) -> Result<SymMat> {
        Ok(self.inverse_sqrt_with_eigenvalues()?.0)
    }

    /// [`SymMat::inverse_sqrt`] plus the ascending eigenvalues of the input.
    pub fn inverse_sqrt_with_eigenvalues(&self) -> Result<(SymMat, Vec<f64>)> {
        let (vals, _) = self.jacobi_eigen()?;
        let min = vals[0];
        if min < MIN_COVARIANCE_EIGENVALUE {
            return Err(Error::DegenerateCovariance(min));
        }
        Ok((self.spectral_map(|lam| 1.0 / lam.sqrt())?, vals))
    }

    /// Symmetric square root A^{1/2} (requires positive semidefinite input).
    pub fn sqrt_psd(&self) -> Result<SymMat> {
        self.spectral_map(|lam| lam.max(0.0).sqrt())
    }

    /// Operator norm (largest |eigenvalue|).
    pub fn operator_norm(&self) -> Result<f64> {
        let (vals, _) = self.jacobi_eigen()?;
        Ok(vals.iter().fold(0.0f64, |m, &v| m.max(v.abs())))
    }

    pub fn matmul(&self, other: &SymMat) -> Vec<f64> {
        let k = self.k;
        let mut out = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                let mut s = 0.0;
                for m in 0..k {
                    s += self.get(i, m) * other.get(m, j);
                }
                out[i * k + j] = s;
            }
        }
        out
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.k)
            .map(|i| self.a[i * self.k..(i + 1) * self.k].to_vec())
            .collect()
    }
}
