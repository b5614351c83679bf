//! Orthonormal pixel-to-coefficient transforms.
//!
//! Interval-constrained certificates express their optimality conditions on
//! the coefficients of an orthonormal basis.  The trait below is the slot the
//! certifier plugs into; the two shipped implementations are the identity
//! (coefficients = pixel values) and a blockwise 8x8 type-II cosine transform
//! in the layout used by block codecs.

use std::sync::Arc;

use crate::grid::{GridDomain, ScalarField};
use crate::{Error, Result};

/// Orthonormal change of basis between pixel values and coefficients.
///
/// `forward` computes the plain (unweighted) coefficient vector
/// `c_n = sum_p u(p) e_n(p)`; `inverse` reconstructs `u = sum_n c_n e_n`.
/// Orthonormality makes the two exact mutual inverses and preserves the
/// Euclidean norm, which is what the certificate arithmetic relies on: the
/// grid L2 pairing against the n-th basis vector is simply
/// `h^2 * forward(f)[n]`.
pub trait OrthonormalBasis {
    /// Grid the transform is attached to.
    fn domain(&self) -> &Arc<GridDomain>;

    /// Number of coefficients (= number of grid pixels).
    fn len(&self) -> usize {
        self.domain().len()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Analysis: coefficients of `u` in this basis.
    fn forward(&self, u: &ScalarField) -> Result<Vec<f64>>;

    /// Synthesis: the field whose coefficient vector is `coeffs`.
    fn inverse(&self, coeffs: &[f64]) -> Result<ScalarField>;
}

fn check_domain(basis: &Arc<GridDomain>, u: &ScalarField) -> Result<()> {
    if !Arc::ptr_eq(basis, u.domain()) {
        return Err(Error::DomainMismatch(
            "field domain differs from the transform's domain".into(),
        ));
    }
    Ok(())
}

fn check_len(basis: &Arc<GridDomain>, coeffs: &[f64]) -> Result<()> {
    if coeffs.len() != basis.len() {
        return Err(Error::InvalidParameter {
            name: "coeffs",
            message: format!(
                "expected {} coefficients for a {}x{} grid, got {}",
                basis.len(),
                basis.height(),
                basis.width(),
                coeffs.len()
            ),
        });
    }
    Ok(())
}

/// The trivial basis: coefficient `n` is the value of pixel `n`.
///
/// Useful as the degenerate transform (interval constraints become pixelwise
/// bounds) and as the reference implementation in tests.
#[derive(Debug, Clone)]
pub struct IdentityBasis {
    domain: Arc<GridDomain>,
}

impl IdentityBasis {
    pub fn new(domain: Arc<GridDomain>) -> Self {
        Self { domain }
    }
}

impl OrthonormalBasis for IdentityBasis {
    fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    fn forward(&self, u: &ScalarField) -> Result<Vec<f64>> {
        check_domain(&self.domain, u)?;
        Ok(u.values().to_vec())
    }

    fn inverse(&self, coeffs: &[f64]) -> Result<ScalarField> {
        check_len(&self.domain, coeffs)?;
        ScalarField::new(self.domain.clone(), coeffs.to_vec())
    }
}

const BLOCK: usize = 8;

/// Row `k` of the orthonormal 8-point DCT-II matrix:
/// `C[k][n] = s_k cos(pi (2n+1) k / 16)` with `s_0 = sqrt(1/8)`,
/// `s_k = 1/2` otherwise, so that `C C^T = I` exactly.
fn dct8_matrix() -> [[f64; BLOCK]; BLOCK] {
    let mut c = [[0.0; BLOCK]; BLOCK];
    for (k, row) in c.iter_mut().enumerate() {
        let scale = if k == 0 {
            (1.0 / BLOCK as f64).sqrt()
        } else {
            (2.0 / BLOCK as f64).sqrt()
        };
        for (n, entry) in row.iter_mut().enumerate() {
            let angle = std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / (2 * BLOCK) as f64;
            *entry = scale * angle.cos();
        }
    }
    c
}

/// Blockwise two-dimensional 8x8 DCT-II on a full-rectangle grid whose sides
/// are multiples of 8.
///
/// Coefficients keep the pixel layout: within each 8x8 block, position
/// `(k, l)` holds the `(vertical, horizontal)` frequency-`(k, l)` coefficient
/// of that block, and blocks tile the grid in place.  The separable transform
/// with the orthonormal matrix above is its own exact inverse pair — no
/// scaling or level-shift conventions from codec practice are applied.
#[derive(Debug, Clone)]
pub struct BlockDct8 {
    domain: Arc<GridDomain>,
    matrix: [[f64; BLOCK]; BLOCK],
}

impl BlockDct8 {
    pub fn new(domain: Arc<GridDomain>) -> Result<Self> {
        if !domain.is_full_rectangle() {
            return Err(Error::UnsupportedMask);
        }
        if domain.height() % BLOCK != 0 || domain.width() % BLOCK != 0 {
            return Err(Error::InvalidParameter {
                name: "domain",
                message: format!(
                    "blockwise transform needs sides divisible by {}, got {}x{}",
                    BLOCK,
                    domain.height(),
                    domain.width()
                ),
            });
        }
        Ok(Self {
            domain,
            matrix: dct8_matrix(),
        })
    }

    /// Applies the separable block transform; `transpose` = true runs the
    /// synthesis direction (multiplication by `C^T` on both sides).
    fn apply_blocks(&self, src: &[f64], transpose: bool) -> Vec<f64> {
        let (height, width) = (self.domain.height(), self.domain.width());
        let c = &self.matrix;
        let mut out = vec![0.0; src.len()];
        let mut tmp = [[0.0; BLOCK]; BLOCK];
        for bi in (0..height).step_by(BLOCK) {
            for bj in (0..width).step_by(BLOCK) {
                // Rows first: tmp = (C or C^T) * block.
                for k in 0..BLOCK {
                    for m in 0..BLOCK {
                        let mut acc = 0.0;
                        for n in 0..BLOCK {
                            let w = if transpose { c[n][k] } else { c[k][n] };
                            acc += w * src[(bi + n) * width + bj + m];
                        }
                        tmp[k][m] = acc;
                    }
                }
                // Then columns: out = tmp * (C or C^T)^T.
                for k in 0..BLOCK {
                    for l in 0..BLOCK {
                        let mut acc = 0.0;
                        for m in 0..BLOCK {
                            let w = if transpose { c[m][l] } else { c[l][m] };
                            acc += tmp[k][m] * w;
                        }
                        out[(bi + k) * width + bj + l] = acc;
                    }
                }
            }
        }
        out
    }
}

impl OrthonormalBasis for BlockDct8 {
    fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    fn forward(&self, u: &ScalarField) -> Result<Vec<f64>> {
        check_domain(&self.domain, u)?;
        Ok(self.apply_blocks(u.values(), false))
    }

    fn inverse(&self, coeffs: &[f64]) -> Result<ScalarField> {
        check_len(&self.domain, coeffs)?;
        ScalarField::new(self.domain.clone(), self.apply_blocks(coeffs, true))
    }
}
