//! Verification of the limiting Euler–Lagrange system on a solved curve.
//!
//! With `φ_p = K_p^{1−p} κ^{p−2} ∇_T T` the limit equations read
//!
//! * `∇_T²φ + R(φ,T)T = Lλ ∇_T T − 2∇_T(⟨φ, ∇_T T⟩ T)`,
//! * `|φ| ∇_T T = K φ`,
//!
//! and the curvature takes only the values `0` and `K` up to null sets.

mod arc_chain;

pub use arc_chain::{arc_chain_oracle, ArcChainSolution, ChainPiece, PieceKind, PlanarBoundary};

use serde::{Deserialize, Serialize};

use crate::curve::{
    covariant_derivative, curvature_profile, curvature_vector, tangent_field, CurvatureProfile,
    DiscreteCurve, VectorFieldAlongCurve,
};
use crate::error::{ElasticaError, Result};
use crate::functionals::kp_energy;

/// Below this magnitude `K` (or `K_p`) is treated as zero.
pub const GEODESIC_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Arclength fraction excluded at each end of the curve.
    pub boundary_layer: f64,
    /// Nodes within `jump_mask · h` of a curvature jump are excluded.
    pub jump_mask: f64,
    /// Relative band used by the two-value classification.
    pub eps_rel: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            boundary_layer: 0.1,
            jump_mask: 3.0,
            eps_rel: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoValueFractions {
    pub near_zero: f64,
    #[serde(rename = "near_K")]
    pub near_k: f64,
    pub other: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoValueClassification {
    pub fractions: TwoValueFractions,
    pub jump_locations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub el1_residual_rel: f64,
    pub el2_residual_rel: f64,
    pub lambda_used: f64,
    #[serde(rename = "K_used")]
    pub k_used: f64,
    pub fractions: TwoValueFractions,
    pub boundary_layer: f64,
    pub jump_locations: Vec<f64>,
}

/// Pointwise residual of the first limit equation.
#[derive(Debug, Clone, PartialEq)]
pub struct El1Residual {
    pub field: VectorFieldAlongCurve,
    pub rel_norm: f64,
    pub jump_locations: Vec<f64>,
    /// Interior nodes at which the residual was evaluated.
    pub evaluated: Vec<usize>,
}

/// `φ̂_p = κ^{p−2} ∇_T T`, zero where `κ = 0`.
pub fn phi_hat(curve: &DiscreteCurve, p: f64) -> VectorFieldAlongCurve {
    scaled_curvature_field(curve, |kappa| ((p - 2.0) * kappa.ln()).exp())
}

/// `φ_p = K_p^{1−p} κ^{p−2} ∇_T T`, evaluated in log space.
pub fn phi_normalized(curve: &DiscreteCurve, p: f64, k_p: f64) -> Result<VectorFieldAlongCurve> {
    if !(k_p > GEODESIC_THRESHOLD) {
        return Err(ElasticaError::GeodesicDegenerate(
            "K_p vanishes, so the normalised field is undefined",
        ));
    }
    let log_k = k_p.ln();
    Ok(scaled_curvature_field(curve, |kappa| {
        ((p - 2.0) * kappa.ln() - (p - 1.0) * log_k).exp()
    }))
}

fn scaled_curvature_field(curve: &DiscreteCurve, factor: impl Fn(f64) -> f64) -> VectorFieldAlongCurve {
    let mut acc = curvature_vector(curve);
    for i in 0..curve.num_nodes() {
        let kappa = curve.model().norm(curve.node(i), acc.value(i));
        let c = if kappa > 0.0 { factor(kappa) } else { 0.0 };
        for v in acc.value_mut(i) {
            *v *= c;
        }
    }
    acc
}

/// Arclength positions where the profile crosses `K/2`.
pub fn jump_locations(profile: &CurvatureProfile, k: f64, h: f64) -> Vec<f64> {
    let half = 0.5 * k;
    let kappa = &profile.kappa;
    let mut out = Vec::new();
    for j in 0..kappa.len().saturating_sub(1) {
        let (a, b) = (kappa[j] - half, kappa[j + 1] - half);
        if a * b < 0.0 || (a == 0.0 && b != 0.0) {
            // profile entry j sits at node j + 1
            let t = a / (a - b);
            out.push((j as f64 + 1.0 + t) * h);
        }
    }
    out
}

/// Curvature jumps of a curve: crossings of `K/2` by the profile together
/// with reversals of the curvature direction between neighbouring nodes,
/// where `κ` can stay close to `K` while the normal flips. Sorted;
/// detections closer than `2h` (the support of the curvature stencil)
/// are merged into one jump.
pub fn curve_jump_locations(curve: &DiscreteCurve, k: f64) -> Vec<f64> {
    let h = curve.spacing();
    let model = curve.model();
    let acc = curvature_vector(curve);
    let mut out = jump_locations(&curvature_profile(curve), k, h);
    for i in 1..curve.num_nodes() - 2 {
        let (a, b) = (acc.value(i), acc.value(i + 1));
        // inner product at the midpoint metric is sign-equivalent for
        // conformal charts, so the chart dot product suffices
        let dot: f64 = a.iter().zip(b).map(|(u, v)| u * v).sum();
        if dot < 0.0 {
            let (ka, kb) = (model.norm(curve.node(i), a), model.norm(curve.node(i + 1), b));
            let t = ka / (ka + kb);
            out.push((i as f64 + t) * h);
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|later, earlier| (*later - *earlier).abs() < 2.0 * h);
    out
}

/// Interior nodes outside the boundary layers and away from jumps.
fn evaluation_mask(curve: &DiscreteCurve, jumps: &[f64], opts: &VerifyOptions) -> Vec<usize> {
    let h = curve.spacing();
    let l = curve.target_length();
    let lo = opts.boundary_layer * l;
    let hi = (1.0 - opts.boundary_layer) * l;
    (1..curve.num_nodes() - 1)
        .filter(|&i| {
            let s = curve.arclength(i);
            s >= lo - 1e-12 * l
                && s <= hi + 1e-12 * l
                && jumps.iter().all(|j| (s - j).abs() > opts.jump_mask * h)
        })
        .collect()
}

/// Terms of the first limit equation that do not involve `λ`:
/// `A = ∇_T²φ + R(φ,T)T + 2∇_T(⟨φ,∇_T T⟩T)`, together with `∇_T²φ`
/// and `∇_T T`.
pub(crate) struct El1Terms {
    pub lhs: VectorFieldAlongCurve,
    pub second: VectorFieldAlongCurve,
    pub acc: VectorFieldAlongCurve,
}

pub(crate) fn el1_terms(curve: &DiscreteCurve, phi: &VectorFieldAlongCurve) -> Result<El1Terms> {
    phi.check_along(curve)?;
    let model = curve.model();
    let n = curve.dim();
    let count = curve.num_nodes();
    let tangent = tangent_field(curve)?;
    let acc = curvature_vector(curve);
    let second = covariant_derivative(&covariant_derivative(phi, curve)?, curve)?;
    let coupling = VectorFieldAlongCurve::from_fn(count, n, |i| {
        let x = curve.node(i);
        let c = model.inner(x, phi.value(i), acc.value(i));
        tangent.value(i).iter().map(|t| c * t).collect()
    });
    let coupling_d = covariant_derivative(&coupling, curve)?;
    let mut lhs = VectorFieldAlongCurve::zeros(count, n);
    let mut curv = vec![0.0; n];
    for i in 0..count {
        let x = curve.node(i);
        let t = tangent.value(i);
        model.riemann_raw(x, phi.value(i), t, t, &mut curv);
        let out = lhs.value_mut(i);
        for k in 0..n {
            out[k] = second.value(i)[k] + curv[k] + 2.0 * coupling_d.value(i)[k];
        }
    }
    Ok(El1Terms { lhs, second, acc })
}

fn masked_lambda_fit(curve: &DiscreteCurve, terms: &El1Terms, nodes: &[usize]) -> Result<f64> {
    let model = curve.model();
    let l = curve.target_length();
    let mut ab = 0.0;
    let mut bb = 0.0;
    for &i in nodes {
        let x = curve.node(i);
        let b: Vec<f64> = terms.acc.value(i).iter().map(|v| l * v).collect();
        ab += model.inner(x, terms.lhs.value(i), &b);
        bb += model.inner(x, &b, &b);
    }
    if bb < 1e-12 {
        return Err(ElasticaError::GeodesicDegenerate(
            "the length multiplier is undefined on a geodesic",
        ));
    }
    Ok(ab / bb)
}

/// Least-squares `λ` for the first limit equation over the evaluated nodes.
pub fn fit_lambda(
    curve: &DiscreteCurve,
    phi: &VectorFieldAlongCurve,
    k: f64,
    opts: &VerifyOptions,
) -> Result<f64> {
    let terms = el1_terms(curve, phi)?;
    let jumps = curve_jump_locations(curve, k);
    let nodes = evaluation_mask(curve, &jumps, opts);
    masked_lambda_fit(curve, &terms, &nodes)
}

/// Residual of the first limit equation with relative scale
/// `max(Lλ·K, max |∇_T²φ|, 1e−12)`.
pub fn el1_residual(
    curve: &DiscreteCurve,
    phi: &VectorFieldAlongCurve,
    lambda: f64,
    k: f64,
    opts: &VerifyOptions,
) -> Result<El1Residual> {
    let terms = el1_terms(curve, phi)?;
    Ok(el1_from_terms(curve, &terms, lambda, k, opts))
}

fn el1_from_terms(
    curve: &DiscreteCurve,
    terms: &El1Terms,
    lambda: f64,
    k: f64,
    opts: &VerifyOptions,
) -> El1Residual {
    let model = curve.model();
    let n = curve.dim();
    let l = curve.target_length();
    let jumps = curve_jump_locations(curve, k);
    let nodes = evaluation_mask(curve, &jumps, opts);
    let mut field = VectorFieldAlongCurve::zeros(curve.num_nodes(), n);
    let mut worst = 0.0f64;
    let mut second_max = 0.0f64;
    for &i in &nodes {
        let x = curve.node(i);
        let r = field.value_mut(i);
        for c in 0..n {
            r[c] = terms.lhs.value(i)[c] - l * lambda * terms.acc.value(i)[c];
        }
        worst = worst.max(model.norm(x, r));
        second_max = second_max.max(model.norm(x, terms.second.value(i)));
    }
    let scale = (l * lambda * k).abs().max(second_max).max(1e-12);
    El1Residual {
        field,
        rel_norm: worst / scale,
        jump_locations: jumps,
        evaluated: nodes,
    }
}

/// Relative first-equation residual for each `λ` in `lambdas`.
pub fn el1_lambda_sweep(
    curve: &DiscreteCurve,
    phi: &VectorFieldAlongCurve,
    k: f64,
    lambdas: &[f64],
    opts: &VerifyOptions,
) -> Result<Vec<(f64, f64)>> {
    let terms = el1_terms(curve, phi)?;
    Ok(lambdas
        .iter()
        .map(|&lam| (lam, el1_from_terms(curve, &terms, lam, k, opts).rel_norm))
        .collect())
}

/// `max_i | |φ_i| κ⃗_i − K φ_i | / (K max_i |φ_i|)` over interior nodes.
pub fn el2_residual(curve: &DiscreteCurve, phi: &VectorFieldAlongCurve, k: f64) -> Result<f64> {
    phi.check_along(curve)?;
    let model = curve.model();
    let acc = curvature_vector(curve);
    let interior = 1..curve.num_nodes() - 1;
    let phi_max = interior
        .clone()
        .map(|i| model.norm(curve.node(i), phi.value(i)))
        .fold(0.0, f64::max);
    if phi_max == 0.0 {
        return Ok(0.0);
    }
    if !(k > GEODESIC_THRESHOLD) {
        return Err(ElasticaError::GeodesicDegenerate(
            "K vanishes while the field does not",
        ));
    }
    let mut worst = 0.0f64;
    let mut r = vec![0.0; curve.dim()];
    for i in interior {
        let x = curve.node(i);
        let norm_phi = model.norm(x, phi.value(i));
        for c in 0..r.len() {
            r[c] = norm_phi * acc.value(i)[c] - k * phi.value(i)[c];
        }
        worst = worst.max(model.norm(x, &r));
    }
    Ok(worst / (k * phi_max))
}

/// Fractions of interior nodes with `κ ≈ 0`, `κ ≈ K` or neither.
pub fn classify_two_value(profile: &CurvatureProfile, k: f64, eps_rel: f64, h: f64) -> TwoValueClassification {
    let jumps = jump_locations(profile, k, h);
    let all: Vec<usize> = (0..profile.kappa.len()).collect();
    TwoValueClassification {
        fractions: fractions_over(profile, k, eps_rel, &all),
        jump_locations: jumps,
    }
}

fn fractions_over(profile: &CurvatureProfile, k: f64, eps_rel: f64, entries: &[usize]) -> TwoValueFractions {
    let band = eps_rel * k;
    let (mut zero, mut near) = (0usize, 0usize);
    for &j in entries {
        let kappa = profile.kappa[j];
        if kappa <= band {
            zero += 1;
        } else if (kappa - k).abs() <= band {
            near += 1;
        }
    }
    let total = entries.len().max(1) as f64;
    let near_zero = zero as f64 / total;
    let near_k = near as f64 / total;
    TwoValueFractions {
        near_zero,
        near_k,
        other: 1.0 - near_zero - near_k,
    }
}

/// Two-value fractions over the interior nodes that are not within the
/// jump mask.
pub fn classify_masked(curve: &DiscreteCurve, k: f64, opts: &VerifyOptions) -> TwoValueClassification {
    let profile = curvature_profile(curve);
    let h = curve.spacing();
    let jumps = curve_jump_locations(curve, k);
    let entries: Vec<usize> = (0..profile.kappa.len())
        .filter(|&j| {
            let s = (j + 1) as f64 * h;
            jumps.iter().all(|x| (s - x).abs() > opts.jump_mask * h)
        })
        .collect();
    TwoValueClassification {
        fractions: fractions_over(&profile, k, opts.eps_rel, &entries),
        jump_locations: jumps,
    }
}

/// Full verification of a curve solved at exponent `p`.
///
/// `φ` is normalised by `K_p`; the limit value `K` is taken as the largest
/// nodal curvature of the curve. `λ` defaults to the least-squares fit.
pub fn verify_curve(
    curve: &DiscreteCurve,
    p: f64,
    lambda: Option<f64>,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    let k_p = kp_energy(curve, p)?;
    let phi = phi_normalized(curve, p, k_p)?;
    let k = curvature_profile(curve).max();
    let terms = el1_terms(curve, &phi)?;
    let lambda = match lambda {
        Some(l) => l,
        None => {
            let jumps = curve_jump_locations(curve, k);
            masked_lambda_fit(curve, &terms, &evaluation_mask(curve, &jumps, opts))?
        }
    };
    let el1 = el1_from_terms(curve, &terms, lambda, k, opts);
    let el2 = el2_residual(curve, &phi, k)?;
    let classes = classify_masked(curve, k, opts);
    Ok(VerificationReport {
        el1_residual_rel: el1.rel_norm,
        el2_residual_rel: el2,
        lambda_used: lambda,
        k_used: k,
        fractions: classes.fractions,
        boundary_layer: 2.0 * opts.boundary_layer,
        jump_locations: classes.jump_locations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::test_curves::{circle_arc, line};
    use crate::manifold::ManifoldModel;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e2() -> ManifoldModel {
        ManifoldModel::euclidean(2).unwrap()
    }

    fn max_gap(a: &VectorFieldAlongCurve, b: &VectorFieldAlongCurve) -> f64 {
        a.as_flat()
            .iter()
            .zip(b.as_flat())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Chart circle `|x − (1/4, 0)| = 1/4` from the origin to `(1/4, 1/4)`,
    /// sampled at exact arclength. In both curved models it is a geodesic
    /// circle of curvature 2.
    fn chart_circle(model: ManifoldModel, segments: usize) -> DiscreteCurve {
        let s = model.curvature_sign();
        let (a, b) = (1.0 + s / 8.0, s / 8.0);
        let w = (a * a - b * b).sqrt();
        let q = ((a + b) / (a - b)).sqrt();
        // arclength from the origin: atan(q tan(t/2)) / w
        let len = (q * (std::f64::consts::FRAC_PI_4).tan()).atan() / w;
        let mut flat = Vec::new();
        for i in 0..=segments {
            let arc = len * i as f64 / segments as f64;
            let t = 2.0 * ((arc * w).tan() / q).atan();
            flat.push(0.25 - 0.25 * t.cos());
            flat.push(0.25 * t.sin());
        }
        DiscreteCurve::from_flat(model, flat, len).unwrap()
    }

    /// Two unit arcs of opposite orientation joined at `s = π/2`.
    fn two_arc_s(segments: usize) -> DiscreteCurve {
        let len = std::f64::consts::PI;
        let mut flat = Vec::new();
        for i in 0..=segments {
            let s = len * i as f64 / segments as f64;
            let (x, y) = if s <= len / 2.0 {
                (s.sin(), 1.0 - s.cos())
            } else {
                let u = s - len / 2.0;
                (1.0 + u.cos(), 1.0 + u.sin())
            };
            flat.push(x);
            flat.push(y);
        }
        DiscreteCurve::from_flat(e2(), flat, len).unwrap()
    }

    #[test]
    fn phi_hat_vanishes_on_a_line() {
        let c = line(e2(), &[0.0, 0.0], &[1.0, 2.0], 40);
        assert!(phi_hat(&c, 6.0).as_flat().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn phi_hat_on_the_unit_circle_is_the_curvature_vector() {
        let c = circle_arc(1.0, 0.0, 2.0, 400);
        let acc = curvature_vector(&c);
        assert!(max_gap(&phi_hat(&c, 2.0), &acc) < 1e-15);
        // κ = 1 up to stencil error, so κ² barely rescales the field
        assert!(max_gap(&phi_hat(&c, 4.0), &acc) < 1e-5);
    }

    #[test]
    fn phi_normalized_has_unit_size_where_the_curvature_equals_k_p() {
        let c = circle_arc(1.0, 0.3, 2.0, 400);
        let k = curvature_profile(&c);
        for p in [2.0, 8.0, 32.0] {
            let phi = phi_normalized(&c, p, k.kappa[100]).unwrap();
            assert_relative_eq!(c.model().norm(c.node(101), phi.value(101)), 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn phi_normalized_is_small_off_the_plateau() {
        // κ_i = K_p / 2 at p = 12 gives |φ_i| = (κ/K_p)^{p−1} = 2^{−11}
        let c = circle_arc(1.0, 0.0, 2.0, 400);
        let kappa = curvature_profile(&c).kappa[200];
        let phi = phi_normalized(&c, 12.0, 2.0 * kappa).unwrap();
        let size = c.model().norm(c.node(201), phi.value(201));
        assert_relative_eq!(size, 0.5f64.powi(11), max_relative = 1e-12);
    }

    #[test]
    fn phi_normalized_rejects_a_vanishing_k_p() {
        let c = line(e2(), &[0.0, 0.0], &[1.0, 0.0], 20);
        assert!(matches!(phi_normalized(&c, 4.0, 0.0), Err(ElasticaError::GeodesicDegenerate(_))));
    }

    #[test]
    fn el2_holds_on_a_circle() {
        let k = 2.0;
        let c = circle_arc(1.0 / k, 0.0, 2.5, 400);
        let phi = curvature_vector(&c).scaled(1.0 / k);
        assert!(el2_residual(&c, &phi, k).unwrap() <= 1e-3);
    }

    #[test]
    fn el2_of_a_zero_field_is_zero() {
        let c = circle_arc(1.0, 0.0, 2.0, 100);
        let phi = VectorFieldAlongCurve::zeros(c.num_nodes(), 2);
        assert_eq!(el2_residual(&c, &phi, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn el2_flags_curvature_below_k() {
        // κ ≡ 1 with K = 2 and φ = ∇_T T: |κ − K| / K = 1/2
        let c = circle_arc(1.0, 0.0, 2.0, 400);
        let phi = curvature_vector(&c);
        assert_relative_eq!(el2_residual(&c, &phi, 2.0).unwrap(), 0.5, max_relative = 1e-4);
    }

    #[test]
    fn classification_of_a_constant_profile() {
        let profile = CurvatureProfile { kappa: vec![1.3; 99] };
        let c = classify_two_value(&profile, 1.3, 0.05, 0.01);
        assert_eq!(c.fractions, TwoValueFractions { near_zero: 0.0, near_k: 1.0, other: 0.0 });
        assert!(c.jump_locations.is_empty());
    }

    #[test]
    fn classification_of_a_zero_profile() {
        let profile = CurvatureProfile { kappa: vec![0.0; 99] };
        let c = classify_two_value(&profile, 1.0, 0.05, 0.01);
        assert_eq!(c.fractions, TwoValueFractions { near_zero: 1.0, near_k: 0.0, other: 0.0 });
    }

    /// Arc–segment–arc profile with linear transitions three spacings wide.
    fn arc_segment_arc(segments: usize, k: f64) -> CurvatureProfile {
        let (a, b) = (segments / 3, 2 * segments / 3);
        let ramp = |d: f64| (d / 3.0).clamp(0.0, 1.0);
        let kappa = (1..segments)
            .map(|i| {
                let i = i as f64;
                let down = ramp(a as f64 - i);
                let up = ramp(i - b as f64);
                k * down.max(up)
            })
            .collect();
        CurvatureProfile { kappa }
    }

    #[test]
    fn classification_of_an_arc_segment_arc_profile() {
        let segments = 300;
        let l = 3.0;
        let h = l / segments as f64;
        let k = 1.7;
        let c = classify_two_value(&arc_segment_arc(segments, k), k, 0.05, h);
        assert!(c.fractions.other <= 6.0 * h / l, "{:?}", c.fractions);
        assert!(c.fractions.near_zero > 0.3 && c.fractions.near_k > 0.6);
        assert_eq!(c.jump_locations.len(), 2);
        assert!((c.jump_locations[0] - (1.0 - 1.5 * h)).abs() < h);
        assert!((c.jump_locations[1] - (2.0 + 1.5 * h)).abs() < h);
    }

    #[test]
    fn classification_is_scale_invariant() {
        let profile = arc_segment_arc(240, 1.0);
        let base = classify_two_value(&profile, 1.0, 0.05, 0.01);
        for scale in [0.25, 2.0, 8.0] {
            let scaled = CurvatureProfile {
                kappa: profile.kappa.iter().map(|k| k * scale).collect(),
            };
            assert_eq!(classify_two_value(&scaled, scale, 0.05, 0.01).fractions, base.fractions);
        }
    }

    #[test]
    fn a_normal_reversal_is_a_jump() {
        let c = two_arc_s(400);
        // |κ| stays at 1 across the joint, so only the reversal is visible
        let jumps = curve_jump_locations(&c, 1.0);
        assert_eq!(jumps.len(), 1, "{jumps:?}");
        assert!((jumps[0] - std::f64::consts::FRAC_PI_2).abs() < c.spacing());
    }

    #[test]
    fn lambda_on_a_euclidean_circle() {
        // on a circle φ = −n, ∇_T²φ = K²n and 2∇_T(⟨φ,∇_T T⟩T) = 2K²(−n)·(−1),
        // so the first equation holds with Lλ = K
        let k = 2.0;
        let len = 2.5;
        let c = circle_arc(1.0 / k, 0.0, len, 400);
        let phi = curvature_vector(&c).scaled(1.0 / k);
        let opts = VerifyOptions::default();
        let lambda = fit_lambda(&c, &phi, k, &opts).unwrap();
        assert_relative_eq!(lambda, k / len, max_relative = 1e-3);
        let res = el1_residual(&c, &phi, lambda, k, &opts).unwrap();
        assert!(res.rel_norm <= 5e-2, "{}", res.rel_norm);
        assert!(!res.evaluated.is_empty());
    }

    #[test]
    fn lambda_on_geodesic_circles_of_the_curved_models() {
        // the curvature term adds s·φ, so Lλ K = K² + s
        let k = 2.0;
        for model in [ManifoldModel::sphere(2).unwrap(), ManifoldModel::hyperbolic(2).unwrap()] {
            let c = chart_circle(model, 400);
            let kappa = curvature_profile(&c);
            assert!((kappa.max() - k).abs() < 1e-3, "{}", kappa.max());
            let phi = curvature_vector(&c).scaled(1.0 / k);
            let opts = VerifyOptions::default();
            let lambda = fit_lambda(&c, &phi, k, &opts).unwrap();
            let s = model.curvature_sign();
            let expected = (k * k + s) / (c.target_length() * k);
            assert_relative_eq!(lambda, expected, max_relative = 1e-3);
            assert!(el1_residual(&c, &phi, lambda, k, &opts).unwrap().rel_norm <= 5e-2);
        }
    }

    #[test]
    fn lambda_fit_recovers_a_proportional_left_side() {
        let c = circle_arc(1.0, 0.0, 2.0, 200);
        let acc = curvature_vector(&c);
        let nodes: Vec<usize> = (20..180).collect();
        let terms = El1Terms {
            lhs: acc.scaled(0.7 * c.target_length()),
            second: VectorFieldAlongCurve::zeros(c.num_nodes(), 2),
            acc: acc.clone(),
        };
        assert_relative_eq!(masked_lambda_fit(&c, &terms, &nodes).unwrap(), 0.7, max_relative = 1e-12);
        // a left side orthogonal to ∇_T T needs no multiplier
        let tangent = tangent_field(&c).unwrap();
        let terms = El1Terms { lhs: tangent, ..terms };
        assert!(masked_lambda_fit(&c, &terms, &nodes).unwrap().abs() < 1e-12);
    }

    #[test]
    fn zero_field_on_a_geodesic_has_no_residual() {
        let c = line(e2(), &[0.0, 0.0], &[2.0, 1.0], 100);
        let phi = VectorFieldAlongCurve::zeros(c.num_nodes(), 2);
        let res = el1_residual(&c, &phi, 0.0, 0.0, &VerifyOptions::default()).unwrap();
        assert_eq!(res.rel_norm, 0.0);
    }

    /// Plain planar finite differences, written out independently of the
    /// curve module: central interior stencil, one-sided second order at
    /// the ends.
    fn fd(values: &[[f64; 2]], h: f64) -> Vec<[f64; 2]> {
        let m = values.len();
        (0..m)
            .map(|i| {
                let mut out = [0.0; 2];
                for k in 0..2 {
                    out[k] = match i {
                        0 => (-3.0 * values[0][k] + 4.0 * values[1][k] - values[2][k]) / (2.0 * h),
                        _ if i == m - 1 => {
                            (3.0 * values[i][k] - 4.0 * values[i - 1][k] + values[i - 2][k]) / (2.0 * h)
                        }
                        _ => (values[i + 1][k] - values[i - 1][k]) / (2.0 * h),
                    };
                }
                out
            })
            .collect()
    }

    #[test]
    fn first_equation_terms_match_an_independent_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = circle_arc(0.8, 0.2, 2.0, 200);
        let h = c.spacing();
        let m = c.num_nodes();
        // random smooth field: a few low Fourier modes per component
        let coeffs: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let field = |s: f64, k: usize| -> f64 {
            (0..3)
                .map(|j| {
                    let w = (j + 1) as f64;
                    coeffs[6 * k + 2 * j] * (w * s).sin() + coeffs[6 * k + 2 * j + 1] * (w * s).cos()
                })
                .sum()
        };
        let phi_raw: Vec<[f64; 2]> = (0..m).map(|i| [field(c.arclength(i), 0), field(c.arclength(i), 1)]).collect();
        let phi = VectorFieldAlongCurve::from_fn(m, 2, |i| phi_raw[i].to_vec());

        let nodes: Vec<[f64; 2]> = (0..m).map(|i| [c.node(i)[0], c.node(i)[1]]).collect();
        let t = fd(&nodes, h);
        let mut acc = vec![[0.0; 2]; m];
        for i in 1..m - 1 {
            for k in 0..2 {
                acc[i][k] = (nodes[i + 1][k] - 2.0 * nodes[i][k] + nodes[i - 1][k]) / (h * h);
            }
        }
        let second = fd(&fd(&phi_raw, h), h);
        let coupling: Vec<[f64; 2]> = (0..m)
            .map(|i| {
                let dot = phi_raw[i][0] * acc[i][0] + phi_raw[i][1] * acc[i][1];
                [dot * t[i][0], dot * t[i][1]]
            })
            .collect();
        let coupling_d = fd(&coupling, h);

        let terms = el1_terms(&c, &phi).unwrap();
        let scale = terms.lhs.as_flat().iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for i in 0..m {
            for k in 0..2 {
                let expected = second[i][k] + 2.0 * coupling_d[i][k];
                assert!((terms.lhs.value(i)[k] - expected).abs() <= 1e-8 * scale, "node {i}");
                assert!((terms.second.value(i)[k] - second[i][k]).abs() <= 1e-8 * scale);
            }
        }
    }
}
