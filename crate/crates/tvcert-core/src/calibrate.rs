//! Shapes, Cheeger ratios, and numerical calibrability checks.
//!
//! A bounded convex set G with C^{1,1} boundary is calibrable — its
//! indicator decays self-similarly under the TV flow — exactly when the
//! boundary curvature nowhere exceeds the Cheeger ratio λ_G = P(G)/|G|.
//! This module evaluates that analytic condition on parametric shapes
//! (discs, convex polygons, rounded rectangles), builds the vector field ξ
//! that witnesses calibrability (‖ξ‖∞ ≤ 1, −div ξ = λ_G χ_G, trace aligned
//! with the inner normal on ∂G), and compares the analytic verdict with a
//! numerical certificate of the witness field on a pixel grid: sup-norm
//! feasibility, the divergence identity away from the boundary layers, and
//! the trace alignment in L¹(|Dχ|).

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::certify::{solve_rof, Tolerances};
use crate::dual::MollifierSpec;
use crate::grid::{
    default_eps_zero, discrete_divergence, discrete_tv, gradient_measure,
    is_zero_extension_compatible, scalar_inner, GridDomain, ScalarField, VectorField,
};
use crate::sum::pairwise_map_sum;
use crate::trace::full_trace;
use crate::{Error, Result};

/// Gap tolerance and iteration cap for the numerically-optimized witness
/// fields of non-disc shapes.
const WITNESS_TOL_GAP: f64 = 1e-9;
const WITNESS_MAX_ITER: usize = 500_000;

/// Anti-aliasing band of the rasterizer, in pixels: the soft indicator
/// ramps from 1 to 0 over `BAND_PIXELS · h` centered on ∂G.
const BAND_PIXELS: f64 = 3.0;

/// A parametric planar shape with closed-form perimeter and area.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Disc {
        center: [f64; 2],
        radius: f64,
    },
    /// Convex, listed counter-clockwise or clockwise, no three collinear.
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
    /// Axis-aligned rectangle of full side lengths `width` × `height`
    /// with corners rounded at `corner_radius` ∈ (0, min(width, height)/2];
    /// at the upper limit this is the classic two-semicircle stadium.
    Stadium {
        center: [f64; 2],
        width: f64,
        height: f64,
        corner_radius: f64,
    },
}

/// Whether ess sup κ_∂G ≤ P(G)/|G| holds, fails, or is meaningless because
/// the boundary is not C^{1,1} (sharp corners carry unbounded curvature).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureCondition {
    Holds,
    Fails,
    Undefined,
}

fn bad_shape(message: String) -> Error {
    Error::InvalidParameter {
        name: "shape",
        message,
    }
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            Shape::Disc { center, radius } => {
                if !finite(center) || !radius.is_finite() || *radius <= 0.0 {
                    return Err(bad_shape(format!("disc needs a positive radius, got {radius}")));
                }
            }
            Shape::Polygon { vertices } => {
                if vertices.len() < 3 || vertices.iter().any(|v| !finite(v)) {
                    return Err(bad_shape("polygon needs at least three finite vertices".into()));
                }
                // Strict convexity: all turns in one direction, none straight.
                let n = vertices.len();
                let mut sign = 0.0f64;
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let c = vertices[(i + 2) % n];
                    let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
                    if cross == 0.0 || (sign != 0.0 && cross.signum() != sign) {
                        return Err(bad_shape("polygon must be strictly convex".into()));
                    }
                    sign = cross.signum();
                }
            }
            Shape::Stadium {
                center,
                width,
                height,
                corner_radius,
            } => {
                let ok = finite(center)
                    && width.is_finite()
                    && height.is_finite()
                    && *width > 0.0
                    && *height > 0.0
                    && corner_radius.is_finite()
                    && *corner_radius > 0.0
                    && *corner_radius <= 0.5 * width.min(*height);
                if !ok {
                    return Err(bad_shape(format!(
                        "stadium needs positive sides and 0 < corner_radius ≤ min(side)/2, \
                         got {width}x{height} with radius {corner_radius}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Analytic perimeter.
    pub fn perimeter(&self) -> f64 {
        match self {
            Shape::Disc { radius, .. } => 2.0 * PI * radius,
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                (0..n)
                    .map(|i| {
                        let a = vertices[i];
                        let b = vertices[(i + 1) % n];
                        (b[0] - a[0]).hypot(b[1] - a[1])
                    })
                    .sum()
            }
            Shape::Stadium {
                width,
                height,
                corner_radius,
                ..
            } => 2.0 * (width + height) - 8.0 * corner_radius + 2.0 * PI * corner_radius,
        }
    }

    /// Analytic area.
    pub fn area(&self) -> f64 {
        match self {
            Shape::Disc { radius, .. } => PI * radius * radius,
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                let twice: f64 = (0..n)
                    .map(|i| {
                        let a = vertices[i];
                        let b = vertices[(i + 1) % n];
                        a[0] * b[1] - b[0] * a[1]
                    })
                    .sum();
                0.5 * twice.abs()
            }
            Shape::Stadium {
                width,
                height,
                corner_radius,
                ..
            } => width * height - (4.0 - PI) * corner_radius * corner_radius,
        }
    }

    /// Signed distance to ∂G: negative inside, positive outside.
    pub fn signed_distance(&self, x: f64, y: f64) -> f64 {
        match self {
            Shape::Disc { center, radius } => {
                (x - center[0]).hypot(y - center[1]) - radius
            }
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                let mut dist = f64::INFINITY;
                let mut pos = 0usize; // count of half-planes the point is outside of
                let mut neg = 0usize;
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
                    let (px, py) = (x - a[0], y - a[1]);
                    let t = ((px * ex + py * ey) / (ex * ex + ey * ey)).clamp(0.0, 1.0);
                    dist = dist.min((px - t * ex).hypot(py - t * ey));
                    let cross = ex * py - ey * px;
                    if cross > 0.0 {
                        pos += 1;
                    } else if cross < 0.0 {
                        neg += 1;
                    }
                }
                // Inside a convex loop iff on one side of every edge.
                if pos == n || neg == n {
                    -dist
                } else {
                    dist
                }
            }
            Shape::Stadium {
                center,
                width,
                height,
                corner_radius,
            } => {
                let qx = (x - center[0]).abs() - (0.5 * width - corner_radius);
                let qy = (y - center[1]).abs() - (0.5 * height - corner_radius);
                let outside = (qx.max(0.0)).hypot(qy.max(0.0));
                outside + qx.max(qy).min(0.0) - corner_radius
            }
        }
    }

    /// The shape scaled by `t > 0` about the origin.
    pub fn scale(&self, t: f64) -> Shape {
        match self {
            Shape::Disc { center, radius } => Shape::Disc {
                center: [center[0] * t, center[1] * t],
                radius: radius * t,
            },
            Shape::Polygon { vertices } => Shape::Polygon {
                vertices: vertices.iter().map(|v| [v[0] * t, v[1] * t]).collect(),
            },
            Shape::Stadium {
                center,
                width,
                height,
                corner_radius,
            } => Shape::Stadium {
                center: [center[0] * t, center[1] * t],
                width: width * t,
                height: height * t,
                corner_radius: corner_radius * t,
            },
        }
    }
}

/// λ_G = P(G)/|G| from the closed forms: 2/R for a disc, 4 for the unit
/// square, and the rounded-rectangle expressions for stadiums.
pub fn cheeger_ratio(shape: &Shape) -> Result<f64> {
    shape.validate()?;
    Ok(shape.perimeter() / shape.area())
}

/// The corner radius at which a `width` × `height` rounded rectangle has
/// 1/ρ = λ_G exactly: the positive root of (π−4)ρ² + 2(w+h)ρ − wh. Corners
/// rounded tighter than this make the curvature condition fail.
pub fn stadium_corner_threshold(width: f64, height: f64) -> f64 {
    let b = 2.0 * (width + height);
    let disc = b * b - 4.0 * (4.0 - PI) * width * height;
    (b - disc.sqrt()) / (2.0 * (4.0 - PI))
}

/// Evaluates ess sup κ_∂G ≤ λ_G analytically. Discs always pass (1/R ≤ 2/R);
/// sharp-corner polygons are `Undefined` (the curvature is not essentially
/// bounded, so the C^{1,1} requirement already fails); rounded rectangles
/// compare 1/ρ against λ_G in closed form.
pub fn curvature_condition(shape: &Shape) -> Result<CurvatureCondition> {
    shape.validate()?;
    Ok(match shape {
        Shape::Disc { .. } => CurvatureCondition::Holds,
        Shape::Polygon { .. } => CurvatureCondition::Undefined,
        Shape::Stadium { corner_radius, .. } => {
            let lambda = shape.perimeter() / shape.area();
            if 1.0 / corner_radius <= lambda {
                CurvatureCondition::Holds
            } else {
                CurvatureCondition::Fails
            }
        }
    })
}

/// Soft indicator of the shape: 1 on the interior, 0 outside, a smooth
/// ramp of the signed distance over a three-pixel band centered on ∂G.
/// The band is symmetric, so the mass h²Σχ converges to |G| at second
/// order; sharp binary masks would bias the anisotropic discrete TV and
/// poison every trace computation.
pub fn rasterize(shape: &Shape, domain: &Arc<GridDomain>) -> Result<ScalarField> {
    shape.validate()?;
    let h = domain.spacing();
    ScalarField::from_fn(domain.clone(), |i, j| {
        let x = (j as f64 + 0.5) * h;
        let y = (i as f64 + 0.5) * h;
        let t = (0.5 - shape.signed_distance(x, y) / (BAND_PIXELS * h)).clamp(0.0, 1.0);
        t * t * (3.0 - 2.0 * t)
    })
}

/// TV_h(χ)/⟨χ, 1⟩ — the discrete counterpart of λ_G evaluated on a
/// rasterized (or any nonnegative) indicator.
pub fn discrete_cheeger_ratio(chi: &ScalarField) -> f64 {
    let ones = ScalarField::constant(chi.domain().clone(), 1.0)
        .expect("constant field on an existing domain");
    discrete_tv(chi) / scalar_inner(chi, &ones)
}

fn check_containment(shape: &Shape, domain: &Arc<GridDomain>) -> Result<()> {
    let h = domain.spacing();
    for be in domain.boundary_edges() {
        let (i, j) = (be.index / domain.width(), be.index % domain.width());
        let x = (j as f64 + 0.5) * h;
        let y = (i as f64 + 0.5) * h;
        if shape.signed_distance(x, y) <= h {
            return Err(bad_shape(
                "shape must sit strictly inside the domain, clear of its boundary".into(),
            ));
        }
    }
    Ok(())
}

/// The witness field for the calibrability of `shape` on `domain`. For a
/// disc the analytic field is used: ξ = −(x−c)/R inside, the divergence-
/// free inversion −R(x−c)/|x−c|² outside. Other shapes get the dual field
/// of the quadratic-fidelity solve on χ_G at λ = λ_G, whose divergence is
/// −λ_G χ_G at the solution when the shape is calibrable. Either way the
/// result is clipped to the unit ball and zeroed on components without a
/// forward edge, so it is feasible and zero-extension compatible.
///
/// Shapes touching the domain boundary are rejected: the field must vanish
/// near ∂Ω for the zero extension to stay divergence-admissible.
pub fn calibration_field(shape: &Shape, domain: &Arc<GridDomain>) -> Result<VectorField> {
    shape.validate()?;
    check_containment(shape, domain)?;

    let raw = match shape {
        Shape::Disc { center, radius } => {
            let h = domain.spacing();
            VectorField::from_fn(domain.clone(), |i, j| {
                let dx = (j as f64 + 0.5) * h - center[0];
                let dy = (i as f64 + 0.5) * h - center[1];
                let r = dx.hypot(dy);
                if r == 0.0 {
                    (0.0, 0.0)
                } else if r <= *radius {
                    (-dx / radius, -dy / radius)
                } else {
                    (-radius * dx / (r * r), -radius * dy / (r * r))
                }
            })?
        }
        _ => {
            let chi = rasterize(shape, domain)?;
            let lambda = shape.perimeter() / shape.area();
            solve_rof(&chi, lambda, WITNESS_TOL_GAP, WITNESS_MAX_ITER)?.g
        }
    };

    let mut x = raw.x().to_vec();
    let mut y = raw.y().to_vec();
    for k in 0..domain.len() {
        let nrm = (x[k] * x[k] + y[k] * y[k]).sqrt();
        if nrm > 1.0 {
            x[k] /= nrm;
            y[k] /= nrm;
        }
        if !domain.has_x_edge(k) {
            x[k] = 0.0;
        }
        if !domain.has_y_edge(k) {
            y[k] = 0.0;
        }
    }
    VectorField::new(domain.clone(), x, y)
}

/// How well −div_h ξ = λ_G χ_G holds away from the boundary layers.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CalibrationIdentity {
    /// ‖−div_h ξ − λ_G χ‖ / ‖λ_G χ‖ in L²(h²) over pixels further than
    /// three pixels from ∂G and two from ∂Ω.
    pub residual: f64,
    /// max |div_h ξ| over exterior pixels further than two pixels from ∂G
    /// and two from ∂Ω, where the witness should be divergence-free.
    pub exterior_div_max: f64,
    /// Pixels entering the residual.
    pub count: usize,
}

/// Evaluates the divergence identity of a witness field against the
/// analytic λ_G and the rasterized indicator. Only full-rectangle domains
/// are supported: the ∂Ω margins are measured in rows and columns.
pub fn calibration_identity(shape: &Shape, xi: &VectorField) -> Result<CalibrationIdentity> {
    shape.validate()?;
    let domain = xi.domain();
    if domain.mask_count() != domain.len() {
        return Err(Error::UnsupportedMask);
    }
    let lambda = shape.perimeter() / shape.area();
    let chi = rasterize(shape, domain)?;
    let div = discrete_divergence(xi);
    let h = domain.spacing();
    let (hh, ww) = (domain.height(), domain.width());

    let mut num = 0.0;
    let mut den = 0.0;
    let mut count = 0usize;
    let mut exterior_div_max = 0.0f64;
    for i in 0..hh {
        for j in 0..ww {
            let border = i.min(j).min(hh - 1 - i).min(ww - 1 - j);
            if border < 2 {
                continue;
            }
            let k = domain.idx(i, j);
            let sd = shape.signed_distance((j as f64 + 0.5) * h, (i as f64 + 0.5) * h);
            if sd.abs() > 3.0 * h {
                let r = -div.values()[k] - lambda * chi.values()[k];
                num += r * r;
                den += (lambda * chi.values()[k]).powi(2);
                count += 1;
            }
            if sd > 2.0 * h {
                exterior_div_max = exterior_div_max.max(div.values()[k].abs());
            }
        }
    }
    if den == 0.0 {
        return Err(Error::InvalidParameter {
            name: "domain",
            message: "no interior pixels clear of the boundary layers".into(),
        });
    }
    Ok(CalibrationIdentity {
        residual: (num / den).sqrt(),
        exterior_div_max,
        count,
    })
}

/// The analytic and numerical sides of a calibrability check, reported
/// together; disagreements are data, not errors.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub shape: Shape,
    /// Analytic λ_G = P(G)/|G|.
    pub lambda: f64,
    /// Discrete λ_h = TV_h(χ)/⟨χ, 1⟩ of the rasterized indicator.
    pub lambda_h: f64,
    pub curvature: CurvatureCondition,
    /// The analytic verdict; `None` when the curvature condition is
    /// undefined and the closed-form criterion is silent.
    pub analytic_calibrable: Option<bool>,
    /// max(0, ‖ξ‖∞ − 1) of the witness field.
    pub feasibility: f64,
    pub zero_ext_ok: bool,
    pub identity: CalibrationIdentity,
    /// L¹(|Dχ|)-averaged |Tξ·ν_G − 1| over the rasterized boundary band.
    pub trace_alignment_error: f64,
    /// Cauchy diagnosis of the trace behind the alignment error.
    pub trace_converged: bool,
    pub numerically_calibrable: bool,
    /// `analytic == numerical`, where the analytic side speaks.
    pub agreement: Option<bool>,
    pub tolerances: Tolerances,
}

/// Runs the full calibrability check: the closed-form curvature condition
/// against the numerical certificate of the witness field (feasibility,
/// divergence identity, trace alignment with the inner normal ν_G on the
/// rasterized reduced boundary). The divergence and trace residuals are
/// judged against `tols.full_trace` — the alignment scale of certificates
/// at this spacing — and feasibility against `tols.feasibility`.
pub fn calibrability_verdict(
    shape: &Shape,
    domain: &Arc<GridDomain>,
    tols: Tolerances,
) -> Result<CalibrationReport> {
    let xi = calibration_field(shape, domain)?;
    calibrability_verdict_for(shape, domain, tols, &xi)
}

/// [`calibrability_verdict`] judging a caller-supplied witness field
/// instead of building one — the numerical side then certifies exactly
/// that field, which also spares the non-disc shapes a second solve when
/// the field is wanted as an artifact.
pub fn calibrability_verdict_for(
    shape: &Shape,
    domain: &Arc<GridDomain>,
    tols: Tolerances,
    xi: &VectorField,
) -> Result<CalibrationReport> {
    shape.validate()?;
    check_containment(shape, domain)?;
    if !Arc::ptr_eq(xi.domain(), domain) {
        return Err(Error::DomainMismatch(
            "witness field lives on a different grid".into(),
        ));
    }
    let chi = rasterize(shape, domain)?;
    let lambda = shape.perimeter() / shape.area();
    let lambda_h = discrete_cheeger_ratio(&chi);

    let feasibility = (xi.sup_norm() - 1.0).max(0.0);
    let zero_ext_ok = is_zero_extension_compatible(xi);
    let identity = calibration_identity(shape, xi)?;

    let mu = gradient_measure(&chi, default_eps_zero(&chi));
    let moll = MollifierSpec::default_for_rectangle(domain)?;
    let trace = full_trace(xi, &mu, &moll)?;
    let (tx, ty) = trace.components();
    let err = pairwise_map_sum(domain.len(), |k| {
        mu.weight[k] * (tx[k] * mu.dir_x[k] + ty[k] * mu.dir_y[k] - 1.0).abs()
    });
    let trace_alignment_error = err / mu.total_mass;

    let curvature = curvature_condition(shape)?;
    let analytic_calibrable = match curvature {
        CurvatureCondition::Holds => Some(true),
        CurvatureCondition::Fails => Some(false),
        CurvatureCondition::Undefined => None,
    };
    let numerically_calibrable = feasibility <= tols.feasibility
        && zero_ext_ok
        && identity.residual <= tols.full_trace
        && trace_alignment_error <= tols.full_trace;

    Ok(CalibrationReport {
        shape: shape.clone(),
        lambda,
        lambda_h,
        curvature,
        analytic_calibrable,
        feasibility,
        zero_ext_ok,
        identity,
        trace_alignment_error,
        trace_converged: trace.converged,
        numerically_calibrable,
        agreement: analytic_calibrable.map(|a| a == numerically_calibrable),
        tolerances: tols,
    })
}
