//! Two-qubit density matrices and Bell fidelity.
//!
//! Fidelity is carried as a scalar attribute on connections; this module is
//! a validation utility for states whose fidelity needs to be evaluated.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const EIGEN_TOL: f64 = -1e-10;

/// A validated 4x4 density matrix (Hermitian, unit trace, PSD).
#[derive(Debug, Clone)]
pub struct DensityMatrix4 {
    entries: [[Complex64; 4]; 4],
}

impl DensityMatrix4 {
    pub fn new(entries: [[Complex64; 4]; 4]) -> Result<Self> {
        for i in 0..4 {
            for j in 0..4 {
                let d = entries[i][j] - entries[j][i].conj();
                if d.norm() > HERMITIAN_TOL {
                    return Err(Error::InvalidState(format!(
                        "not Hermitian at ({i},{j}): asymmetry {}",
                        d.norm()
                    )));
                }
            }
        }
        let trace: Complex64 = (0..4).map(|i| entries[i][i]).sum();
        if (trace - Complex64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {} != 1", trace.re)));
        }
        let min = min_eigenvalue(&entries);
        if min < EIGEN_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min}"
            )));
        }
        Ok(Self { entries })
    }

    /// The projector onto the Bell state (|00> + |11>)/sqrt(2).
    pub fn bell_projector() -> Self {
        let h = Complex64::new(0.5, 0.0);
        let z = Complex64::new(0.0, 0.0);
        let mut e = [[z; 4]; 4];
        e[0][0] = h;
        e[0][3] = h;
        e[3][0] = h;
        e[3][3] = h;
        Self { entries: e }
    }

    /// The maximally mixed state I/4.
    pub fn maximally_mixed() -> Self {
        let q = Complex64::new(0.25, 0.0);
        let z = Complex64::new(0.0, 0.0);
        let mut e = [[z; 4]; 4];
        for (i, row) in e.iter_mut().enumerate() {
            row[i] = q;
        }
        Self { entries: e }
    }

    /// Convex mixture p*self + (1-p)*other.
    pub fn mix(&self, other: &Self, p: f64) -> Result<Self> {
        let mut e = [[Complex64::new(0.0, 0.0); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                e[i][j] = self.entries[i][j] * p + other.entries[i][j] * (1.0 - p);
            }
        }
        Self::new(e)
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i][j]
    }
}

/// Smallest eigenvalue of a Hermitian 4x4, via the real symmetric embedding
/// [[X, -Y], [Y, X]] of X + iY.
fn min_eigenvalue(entries: &[[Complex64; 4]; 4]) -> f64 {
    let mut real = DMatrix::<f64>::zeros(8, 8);
    for i in 0..4 {
        for j in 0..4 {
            real[(i, j)] = entries[i][j].re;
            real[(i + 4, j + 4)] = entries[i][j].re;
            real[(i, j + 4)] = -entries[i][j].im;
            real[(i + 4, j)] = entries[i][j].im;
        }
    }
    let eig = real.symmetric_eigen();
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Fidelity <beta00| sigma |beta00> of a state with the target Bell pair,
/// clamped to [0, 1].
pub fn bell_fidelity(sigma: &DensityMatrix4) -> f64 {
    // <beta00|s|beta00> = (s00 + s03 + s30 + s33) / 2
    let v = (sigma.entry(0, 0) + sigma.entry(0, 3) + sigma.entry(3, 0) + sigma.entry(3, 3)).re
        / 2.0;
    v.clamp(0.0, 1.0)
}
