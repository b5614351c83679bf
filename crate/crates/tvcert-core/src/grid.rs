//! Grid domains, fields, and the discrete BV calculus.
//!
//! A domain is an H×W pixel grid with spacing `h` and a boolean mask Ω. All
//! integrals use the quadrature weight h² per pixel. The gradient ∇_h is the
//! forward difference with homogeneous Neumann truncation: a component is zero
//! whenever its forward edge would cross ∂Ω. The divergence div_h is the
//! backward difference on exactly the same edge set, which makes the pair
//! adjoint to machine precision:
//!
//! ```text
//!   ⟨∇_h u, g⟩ = −⟨u, div_h g⟩      (exact algebra, any u and g)
//! ```
//!
//! The isotropic total variation is TV_h(u) = Σ h² |∇_h u| with the Euclidean
//! pixel norm, and the discrete gradient measure carries weight h²|∇_h u| and
//! direction σ_u = ∇_h u / |∇_h u| wherever the weight is positive.

use crate::sum::{pairwise_map_sum, pairwise_sum};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Outward direction of a mask transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    PosX,
    NegX,
    PosY,
    NegY,
}

/// One mask transition: `index` is inside Ω, its `outward` neighbour is not.
/// The inward normal is the opposite of `outward`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub index: usize,
    pub outward: Direction,
}

/// Rectangular pixel grid with spacing and mask.
///
/// Invariants: `h > 0`, `mask.len() == height * width`, and the mask contains
/// at least one interior pixel (all four neighbours inside). `boundary_edges`
/// is derived in the constructor and lists every mask transition.
#[derive(Debug)]
pub struct GridDomain {
    height: usize,
    width: usize,
    h: f64,
    mask: Vec<bool>,
    /// Forward x-edge exists: pixel and its +x neighbour are both in Ω.
    has_xp: Vec<bool>,
    /// Forward y-edge exists: pixel and its +y neighbour are both in Ω.
    has_yp: Vec<bool>,
    boundary_edges: Vec<BoundaryEdge>,
    mask_count: usize,
}

impl GridDomain {
    pub fn new(height: usize, width: usize, h: f64, mask: Vec<bool>) -> Result<Arc<Self>> {
        if height == 0 || width == 0 {
            return Err(Error::DomainMismatch(format!(
                "grid must be non-empty, got {height}x{width}"
            )));
        }
        if mask.len() != height * width {
            return Err(Error::DomainMismatch(format!(
                "mask length {} does not match {height}x{width}",
                mask.len()
            )));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParameter {
                name: "h",
                message: format!("spacing must be positive and finite, got {h}"),
            });
        }

        let idx = |i: usize, j: usize| i * width + j;
        let inside = |i: isize, j: isize| {
            i >= 0
                && j >= 0
                && (i as usize) < height
                && (j as usize) < width
                && mask[i as usize * width + j as usize]
        };

        let mut has_xp = vec![false; mask.len()];
        let mut has_yp = vec![false; mask.len()];
        let mut boundary_edges = Vec::new();
        let mut has_interior = false;
        let mut mask_count = 0usize;

        for i in 0..height {
            for j in 0..width {
                if !mask[idx(i, j)] {
                    continue;
                }
                mask_count += 1;
                let ii = i as isize;
                let jj = j as isize;
                let nxp = inside(ii, jj + 1);
                let nxm = inside(ii, jj - 1);
                let nyp = inside(ii + 1, jj);
                let nym = inside(ii - 1, jj);
                has_xp[idx(i, j)] = nxp;
                has_yp[idx(i, j)] = nyp;
                if nxp && nxm && nyp && nym {
                    has_interior = true;
                }
                if !nxp {
                    boundary_edges.push(BoundaryEdge {
                        index: idx(i, j),
                        outward: Direction::PosX,
                    });
                }
                if !nxm {
                    boundary_edges.push(BoundaryEdge {
                        index: idx(i, j),
                        outward: Direction::NegX,
                    });
                }
                if !nyp {
                    boundary_edges.push(BoundaryEdge {
                        index: idx(i, j),
                        outward: Direction::PosY,
                    });
                }
                if !nym {
                    boundary_edges.push(BoundaryEdge {
                        index: idx(i, j),
                        outward: Direction::NegY,
                    });
                }
            }
        }

        if !has_interior {
            return Err(Error::NoInteriorPixel);
        }

        Ok(Arc::new(Self {
            height,
            width,
            h,
            mask,
            has_xp,
            has_yp,
            boundary_edges,
            mask_count,
        }))
    }

    /// Full-rectangle mask.
    pub fn full(height: usize, width: usize, h: f64) -> Result<Arc<Self>> {
        Self::new(height, width, h, vec![true; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn spacing(&self) -> f64 {
        self.h
    }
    pub fn len(&self) -> usize {
        self.height * self.width
    }
    pub fn is_empty(&self) -> bool {
        false // constructor rejects empty grids
    }
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
    pub fn mask_count(&self) -> usize {
        self.mask_count
    }
    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + j
    }

    #[inline]
    pub fn in_mask(&self, i: usize, j: usize) -> bool {
        self.mask[self.idx(i, j)]
    }

    /// Forward x-edge from (i, j) stays inside Ω.
    #[inline]
    pub fn has_x_edge(&self, index: usize) -> bool {
        self.has_xp[index]
    }

    /// Forward y-edge from (i, j) stays inside Ω.
    #[inline]
    pub fn has_y_edge(&self, index: usize) -> bool {
        self.has_yp[index]
    }

    /// Physical coordinates of a pixel centre; x runs along columns.
    #[inline]
    pub fn pixel_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((j as f64 + 0.5) * self.h, (i as f64 + 0.5) * self.h)
    }

    /// True if the mask is the complete rectangle.
    pub fn is_full_rectangle(&self) -> bool {
        self.mask_count == self.len()
    }

    /// True if the pixel lies in Ω with at least one 4-neighbour outside.
    pub fn is_boundary_pixel(&self, i: usize, j: usize) -> bool {
        if !self.in_mask(i, j) {
            return false;
        }
        let outside = |oi: isize, oj: isize| {
            oi < 0
                || oj < 0
                || oi as usize >= self.height
                || oj as usize >= self.width
                || !self.mask[oi as usize * self.width + oj as usize]
        };
        let (ii, jj) = (i as isize, j as isize);
        outside(ii + 1, jj) || outside(ii - 1, jj) || outside(ii, jj + 1) || outside(ii, jj - 1)
    }

    /// Chebyshev distance (in pixels) to the nearest pixel outside Ω,
    /// measured over the full grid. Boundary-adjacent pixels have depth 1.
    pub fn depth_map(&self) -> Vec<u32> {
        let (hgt, wid) = (self.height, self.width);
        let big = (hgt + wid) as u32 + 2;
        let mut d = vec![0u32; self.len()];
        for idx in 0..self.len() {
            d[idx] = if self.mask[idx] { big } else { 0 };
        }
        // Two-pass chamfer sweep with 8-neighbourhood, plus grid border.
        for i in 0..hgt {
            for j in 0..wid {
                let k = self.idx(i, j);
                if !self.mask[k] {
                    continue;
                }
                let mut best = d[k];
                let border = (i.min(hgt - 1 - i).min(j).min(wid - 1 - j) as u32) + 1;
                best = best.min(border);
                if i > 0 {
                    best = best.min(d[k - wid] + 1);
                    if j > 0 {
                        best = best.min(d[k - wid - 1] + 1);
                    }
                    if j + 1 < wid {
                        best = best.min(d[k - wid + 1] + 1);
                    }
                }
                if j > 0 {
                    best = best.min(d[k - 1] + 1);
                }
                d[k] = best;
            }
        }
        for i in (0..hgt).rev() {
            for j in (0..wid).rev() {
                let k = self.idx(i, j);
                if !self.mask[k] {
                    continue;
                }
                let mut best = d[k];
                if i + 1 < hgt {
                    best = best.min(d[k + wid] + 1);
                    if j > 0 {
                        best = best.min(d[k + wid - 1] + 1);
                    }
                    if j + 1 < wid {
                        best = best.min(d[k + wid + 1] + 1);
                    }
                }
                if j + 1 < wid {
                    best = best.min(d[k + 1] + 1);
                }
                d[k] = best;
            }
        }
        d
    }
}

fn check_finite(domain: &GridDomain, values: &[f64], context: &'static str) -> Result<()> {
    for i in 0..domain.height() {
        for j in 0..domain.width() {
            let k = domain.idx(i, j);
            if domain.mask()[k] && !values[k].is_finite() {
                return Err(Error::NonFinite {
                    context,
                    row: i,
                    col: j,
                });
            }
        }
    }
    Ok(())
}

/// Scalar field on a grid. Entries outside the mask are stored as 0.
#[derive(Debug, Clone)]
pub struct ScalarField {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(domain: Arc<GridDomain>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::DomainMismatch(format!(
                "field length {} does not match grid {}x{}",
                values.len(),
                domain.height(),
                domain.width()
            )));
        }
        check_finite(&domain, &values, "scalar field")?;
        for (k, m) in domain.mask().iter().enumerate() {
            if !m {
                values[k] = 0.0;
            }
        }
        Ok(Self { domain, values })
    }

    pub fn zeros(domain: Arc<GridDomain>) -> Self {
        let n = domain.len();
        Self {
            domain,
            values: vec![0.0; n],
        }
    }

    pub fn constant(domain: Arc<GridDomain>, c: f64) -> Result<Self> {
        let values = vec![c; domain.len()];
        Self::new(domain, values)
    }

    /// Builds from `f(i, j)`; evaluated on mask pixels only.
    pub fn from_fn<F: FnMut(usize, usize) -> f64>(
        domain: Arc<GridDomain>,
        mut f: F,
    ) -> Result<Self> {
        let mut values = vec![0.0; domain.len()];
        for i in 0..domain.height() {
            for j in 0..domain.width() {
                let k = domain.idx(i, j);
                if domain.mask()[k] {
                    values[k] = f(i, j);
                }
            }
        }
        Self::new(domain, values)
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.domain.idx(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (k, &m) in self.domain.mask().iter().enumerate() {
            if m {
                lo = lo.min(self.values[k]);
                hi = hi.max(self.values[k]);
            }
        }
        (lo, hi)
    }
}

/// Vector field on a grid, stored as two component planes.
///
/// Entries outside the mask are 0. The optional divergence cache, when
/// present, is exactly `discrete_divergence` of the components.
#[derive(Debug, Clone)]
pub struct VectorField {
    domain: Arc<GridDomain>,
    x: Vec<f64>,
    y: Vec<f64>,
    divergence_cache: Option<Vec<f64>>,
}

impl VectorField {
    pub fn new(domain: Arc<GridDomain>, mut x: Vec<f64>, mut y: Vec<f64>) -> Result<Self> {
        if x.len() != domain.len() || y.len() != domain.len() {
            return Err(Error::DomainMismatch(format!(
                "vector field planes ({}, {}) do not match grid {}x{}",
                x.len(),
                y.len(),
                domain.height(),
                domain.width()
            )));
        }
        check_finite(&domain, &x, "vector field x-component")?;
        check_finite(&domain, &y, "vector field y-component")?;
        for (k, m) in domain.mask().iter().enumerate() {
            if !m {
                x[k] = 0.0;
                y[k] = 0.0;
            }
        }
        Ok(Self {
            domain,
            x,
            y,
            divergence_cache: None,
        })
    }

    pub fn zeros(domain: Arc<GridDomain>) -> Self {
        let n = domain.len();
        Self {
            domain,
            x: vec![0.0; n],
            y: vec![0.0; n],
            divergence_cache: None,
        }
    }

    pub fn from_fn<F: FnMut(usize, usize) -> (f64, f64)>(
        domain: Arc<GridDomain>,
        mut f: F,
    ) -> Result<Self> {
        let mut x = vec![0.0; domain.len()];
        let mut y = vec![0.0; domain.len()];
        for i in 0..domain.height() {
            for j in 0..domain.width() {
                let k = domain.idx(i, j);
                if domain.mask()[k] {
                    let (vx, vy) = f(i, j);
                    x[k] = vx;
                    y[k] = vy;
                }
            }
        }
        Self::new(domain, x, y)
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }
    pub fn x(&self) -> &[f64] {
        &self.x
    }
    pub fn y(&self) -> &[f64] {
        &self.y
    }
    pub(crate) fn planes_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        self.divergence_cache = None;
        (&mut self.x, &mut self.y)
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> (f64, f64) {
        let k = self.domain.idx(i, j);
        (self.x[k], self.y[k])
    }

    /// Pointwise Euclidean sup norm ‖g‖∞ = max_p |g(p)|.
    pub fn sup_norm(&self) -> f64 {
        let mut m = 0.0f64;
        for k in 0..self.x.len() {
            m = m.max((self.x[k] * self.x[k] + self.y[k] * self.y[k]).sqrt());
        }
        m
    }

    /// Caches div_h g on the field; the cache is dropped by any mutation.
    pub fn cache_divergence(&mut self) {
        let d = discrete_divergence(self);
        self.divergence_cache = Some(d.values);
    }

    pub fn divergence_cache(&self) -> Option<&[f64]> {
        self.divergence_cache.as_deref()
    }
}

/// Whether g qualifies as a zero-extension (boundary-compatible) field:
/// every component whose forward-difference edge crosses ∂Ω vanishes.
///
/// Equivalently, extending g by zero to the whole plane leaves its
/// backward-difference divergence supported in Ω and equal to div_h g there —
/// the discrete counterpart of membership in W^q_0(div).
pub fn is_zero_extension_compatible(g: &VectorField) -> bool {
    let d = g.domain();
    for k in 0..d.len() {
        if !d.mask()[k] {
            continue;
        }
        if !d.has_x_edge(k) && g.x()[k] != 0.0 {
            return false;
        }
        if !d.has_y_edge(k) && g.y()[k] != 0.0 {
            return false;
        }
    }
    true
}

/// Forward-difference gradient with Neumann truncation at ∂Ω.
pub fn discrete_gradient(u: &ScalarField) -> VectorField {
    let d = u.domain().clone();
    let (hgt, wid, h) = (d.height(), d.width(), d.spacing());
    let v = u.values();
    let mut x = vec![0.0; d.len()];
    let mut y = vec![0.0; d.len()];
    for i in 0..hgt {
        for j in 0..wid {
            let k = d.idx(i, j);
            if d.has_x_edge(k) {
                x[k] = (v[k + 1] - v[k]) / h;
            }
            if d.has_y_edge(k) {
                y[k] = (v[k + wid] - v[k]) / h;
            }
        }
    }
    VectorField {
        domain: d,
        x,
        y,
        divergence_cache: None,
    }
}

/// Backward-difference divergence on the gradient's edge set: the exact
/// negative adjoint of `discrete_gradient` under the h²-weighted pairing.
pub fn discrete_divergence(g: &VectorField) -> ScalarField {
    let d = g.domain().clone();
    let (hgt, wid, h) = (d.height(), d.width(), d.spacing());
    let mut out = vec![0.0; d.len()];
    for i in 0..hgt {
        for j in 0..wid {
            let k = d.idx(i, j);
            if !d.mask()[k] {
                continue;
            }
            let mut acc = 0.0;
            if d.has_x_edge(k) {
                acc += g.x()[k];
            }
            if j > 0 && d.has_x_edge(k - 1) {
                acc -= g.x()[k - 1];
            }
            if d.has_y_edge(k) {
                acc += g.y()[k];
            }
            if i > 0 && d.has_y_edge(k - wid) {
                acc -= g.y()[k - wid];
            }
            out[k] = acc / h;
        }
    }
    ScalarField {
        domain: d,
        values: out,
    }
}

/// Backward-difference divergence of the zero extension of g, restricted to Ω.
///
/// Differs from `discrete_divergence` only at pixels whose forward edge
/// crosses ∂Ω, where the component itself enters as a boundary spike; the two
/// agree exactly on zero-extension-compatible fields.
pub fn divergence_zero_extension(g: &VectorField) -> ScalarField {
    let d = g.domain().clone();
    let (hgt, wid, h) = (d.height(), d.width(), d.spacing());
    let mut out = vec![0.0; d.len()];
    for i in 0..hgt {
        for j in 0..wid {
            let k = d.idx(i, j);
            if !d.mask()[k] {
                continue;
            }
            let mut acc = g.x()[k] + g.y()[k];
            if j > 0 && d.mask()[k - 1] {
                acc -= g.x()[k - 1];
            }
            if i > 0 && d.mask()[k - wid] {
                acc -= g.y()[k - wid];
            }
            out[k] = acc / h;
        }
    }
    ScalarField {
        domain: d,
        values: out,
    }
}

/// Discrete boundary pairing B = h · Σ u(p) g_d(p) over forward transitions
/// (pixels whose +x or +y neighbour leaves Ω). Zero, exactly, for
/// zero-extension-compatible g. This is the boundary term of the discrete
/// Gauss–Green identity ⟨u, div⁰ g⟩ + ⟨∇_h u, g⟩ = B.
pub fn boundary_term(u: &ScalarField, g: &VectorField) -> f64 {
    let d = u.domain();
    assert!(Arc::ptr_eq(d, g.domain()), "boundary_term: domain mismatch");
    let h = d.spacing();
    let edges = d.boundary_edges();
    h * pairwise_map_sum(edges.len(), |e| {
        let be = edges[e];
        match be.outward {
            Direction::PosX => u.values()[be.index] * g.x()[be.index],
            Direction::PosY => u.values()[be.index] * g.y()[be.index],
            _ => 0.0,
        }
    })
}

/// L²(h²) inner product of scalar fields.
pub fn scalar_inner(a: &ScalarField, b: &ScalarField) -> f64 {
    assert!(
        Arc::ptr_eq(a.domain(), b.domain()),
        "scalar_inner: domain mismatch"
    );
    let h2 = a.domain().spacing() * a.domain().spacing();
    h2 * pairwise_map_sum(a.values.len(), |k| a.values[k] * b.values[k])
}

/// L²(h²) inner product of vector fields (Σ h² g·w).
pub fn field_inner(a: &VectorField, b: &VectorField) -> f64 {
    assert!(
        Arc::ptr_eq(a.domain(), b.domain()),
        "field_inner: domain mismatch"
    );
    let h2 = a.domain().spacing() * a.domain().spacing();
    h2 * pairwise_map_sum(a.x.len(), |k| a.x[k] * b.x[k] + a.y[k] * b.y[k])
}

/// L²(h²) norm of a scalar field.
pub fn l2_norm(a: &ScalarField) -> f64 {
    scalar_inner(a, a).sqrt()
}

/// Isotropic discrete total variation TV_h(u) = Σ h² |∇_h u|.
pub fn discrete_tv(u: &ScalarField) -> f64 {
    let g = discrete_gradient(u);
    let h2 = u.domain().spacing() * u.domain().spacing();
    h2 * pairwise_map_sum(g.x.len(), |k| (g.x[k] * g.x[k] + g.y[k] * g.y[k]).sqrt())
}

/// Discrete gradient measure of u: per-pixel mass and unit direction.
///
/// `weight = h²|∇_h u|` where `|∇_h u| > eps_zero`, zero elsewhere; the
/// direction σ_u is unit wherever the weight is positive. `total_mass`
/// equals TV_h(u) exactly when `eps_zero = 0` (identical summation tree).
#[derive(Debug, Clone)]
pub struct GradientMeasure {
    pub weight: Vec<f64>,
    pub dir_x: Vec<f64>,
    pub dir_y: Vec<f64>,
    pub total_mass: f64,
    pub eps_zero: f64,
}

impl GradientMeasure {
    /// Pixels carrying positive mass.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.weight
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(k, _)| k)
    }
}

/// Default `eps_zero`: 1e-9 · max |∇_h u|.
pub fn default_eps_zero(u: &ScalarField) -> f64 {
    discrete_gradient(u).sup_norm() * 1e-9
}

pub fn gradient_measure(u: &ScalarField, eps_zero: f64) -> GradientMeasure {
    let g = discrete_gradient(u);
    let h2 = u.domain().spacing() * u.domain().spacing();
    let n = g.x.len();
    let mut weight = vec![0.0; n];
    let mut dir_x = vec![0.0; n];
    let mut dir_y = vec![0.0; n];
    for k in 0..n {
        let norm = (g.x[k] * g.x[k] + g.y[k] * g.y[k]).sqrt();
        if norm > eps_zero && norm > 0.0 {
            weight[k] = h2 * norm;
            dir_x[k] = g.x[k] / norm;
            dir_y[k] = g.y[k] / norm;
        }
    }
    let total_mass = pairwise_sum(&weight);
    GradientMeasure {
        weight,
        dir_x,
        dir_y,
        total_mass,
        eps_zero,
    }
}

/// Result of maximizing −⟨u, div_h g⟩ over the compatible unit ball.
#[derive(Debug)]
pub struct DualTvResult {
    /// Attained objective value −⟨u, div_h g⟩ = ⟨∇_h u, g⟩.
    pub value: f64,
    /// TV_h(u) minus the attained value; nonnegative up to roundoff.
    pub gap: f64,
    pub iterations: usize,
    pub g: VectorField,
}

/// Solves the dual definition of TV_h by projected ascent:
/// maximize −⟨u, div_h g⟩ over ‖g‖∞ ≤ 1, g zero-extension compatible.
///
/// The ascent step doubles each iteration, so saturation |g| = 1 on the
/// support of ∇_h u is reached geometrically; the returned gap certifies
/// optimality against TV_h(u).
pub fn dual_tv_sup(u: &ScalarField, tol_gap: f64, max_iter: usize) -> Result<DualTvResult> {
    let grad = discrete_gradient(u);
    let tv = discrete_tv(u);
    let mut g = VectorField::zeros(u.domain().clone());
    let mut step = 1.0f64;
    let mut gap = tv;
    for it in 0..max_iter {
        for k in 0..g.x.len() {
            let vx = g.x[k] + step * grad.x[k];
            let vy = g.y[k] + step * grad.y[k];
            let norm = (vx * vx + vy * vy).sqrt();
            let scale = if norm > 1.0 { 1.0 / norm } else { 1.0 };
            g.x[k] = vx * scale;
            g.y[k] = vy * scale;
        }
        let value = field_inner(&grad, &g);
        gap = tv - value;
        if gap <= tol_gap * tv.max(1.0) {
            return Ok(DualTvResult {
                value,
                gap,
                iterations: it + 1,
                g,
            });
        }
        step *= 2.0;
    }
    Err(Error::IterationLimit {
        iterations: max_iter,
        gap,
    })
}
