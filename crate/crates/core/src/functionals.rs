//! Curvature functionals, the distance penalty and their node gradients.
//!
//! `K_p[γ] = ((1/L) Σ κ_i^p h)^{1/p}` over interior nodes, evaluated in log
//! space so that `p` in the hundreds does not overflow. The penalty is
//! `(σ / 2L) Σ w_i d_i²` with trapezoid weights `w_i` and `d_i` the geodesic
//! distance from node `i` to the reference polyline.

use std::f64::consts::PI;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::curve::{curvature_profile, nearest_point, DiscreteCurve};
use crate::error::{ElasticaError, Result};

/// Which part of the reference a node is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyWindow {
    /// Distance to the whole image of the reference.
    FullImage,
    /// Distance to the reference restricted to `|s_ref − s| < half_width`.
    HalfWidth(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpec {
    sigma: f64,
    reference: Option<DiscreteCurve>,
    window: PenaltyWindow,
}

impl PenaltySpec {
    /// No penalty (`σ = 0`).
    pub fn none() -> Self {
        PenaltySpec {
            sigma: 0.0,
            reference: None,
            window: PenaltyWindow::FullImage,
        }
    }

    pub fn new(sigma: f64, reference: Option<DiscreteCurve>, window: PenaltyWindow) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(ElasticaError::InvalidPenalty(format!(
                "sigma must be finite and non-negative, got {sigma}"
            )));
        }
        if sigma > 0.0 && reference.is_none() {
            return Err(ElasticaError::MissingReference);
        }
        if let PenaltyWindow::HalfWidth(w) = window {
            if !(w > 0.0) {
                return Err(ElasticaError::InvalidPenalty(format!(
                    "window half-width must be positive, got {w}"
                )));
            }
        }
        Ok(PenaltySpec {
            sigma,
            reference,
            window,
        })
    }

    /// Segment window of half-width `min(c/4, L/4)` with the Euclidean loop
    /// scale `c = 2π / K`.
    pub fn segment_window(reference: &DiscreteCurve, k_estimate: f64) -> PenaltyWindow {
        let l = reference.target_length();
        let loop_scale = if k_estimate > 0.0 {
            2.0 * PI / k_estimate
        } else {
            f64::INFINITY
        };
        PenaltyWindow::HalfWidth((loop_scale / 4.0).min(l / 4.0))
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn reference(&self) -> Option<&DiscreteCurve> {
        self.reference.as_ref()
    }

    pub fn window(&self) -> PenaltyWindow {
        self.window
    }

    fn active_reference(&self) -> Option<&DiscreteCurve> {
        if self.sigma > 0.0 {
            self.reference.as_ref()
        } else {
            None
        }
    }
}

/// `J = K_p + P_σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub kp: f64,
    pub penalty: f64,
    pub total: f64,
}

fn check_p(p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 2.0) {
        return Err(ElasticaError::InvalidConfig(format!(
            "exponent p must be finite and at least 2, got {p}"
        )));
    }
    Ok(())
}

/// `((1/L) Σ κ_i^p h)^{1/p}` by max-shifted log-sum-exp; zero curvatures drop out.
pub fn kp_from_profile(kappa: &[f64], h: f64, length: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    if kappa.iter().any(|k| !k.is_finite()) {
        return Err(ElasticaError::NonFiniteInput("curvature"));
    }
    let offset = h.ln() - length.ln();
    let logs: Vec<f64> = kappa
        .iter()
        .filter(|k| **k > 0.0)
        .map(|k| p * k.ln() + offset)
        .collect();
    if logs.is_empty() {
        return Ok(0.0);
    }
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    Ok(((max + sum.ln()) / p).exp())
}

pub fn kp_energy(curve: &DiscreteCurve, p: f64) -> Result<f64> {
    let prof = curvature_profile(curve);
    kp_from_profile(&prof.kappa, curve.spacing(), curve.target_length(), p)
}

/// Maximum interior curvature.
pub fn kinf_energy(curve: &DiscreteCurve) -> f64 {
    curvature_profile(curve).max()
}

pub(crate) fn trapezoid_weight(i: usize, segments: usize, h: f64) -> f64 {
    if i == 0 || i == segments {
        0.5 * h
    } else {
        h
    }
}

/// Reference node window for a node at arclength `s`.
fn reference_window(reference: &DiscreteCurve, s: f64, window: PenaltyWindow) -> Range<usize> {
    let count = reference.num_nodes();
    match window {
        PenaltyWindow::FullImage => 0..count,
        PenaltyWindow::HalfWidth(w) => {
            let h = reference.spacing();
            let lo = ((s - w) / h).ceil().max(0.0) as usize;
            let hi = (((s + w) / h).floor().max(0.0) as usize + 1).min(count);
            if lo < hi {
                lo..hi
            } else {
                let nearest = ((s / h).round().max(0.0) as usize).min(count - 1);
                nearest..nearest + 1
            }
        }
    }
}

/// Distance from node `i` to the reference together with `log_x(foot)`.
fn node_distance(
    curve: &DiscreteCurve,
    reference: &DiscreteCurve,
    i: usize,
    window: PenaltyWindow,
) -> Result<(f64, Vec<f64>)> {
    let x = curve.node(i);
    let range = reference_window(reference, curve.arclength(i), window);
    let np = nearest_point(reference, x, range)?;
    match curve.model().log_raw(x, &np.foot) {
        Some(v) => Ok((np.distance, v)),
        None => {
            log::warn!("node {i}: foot point beyond injectivity radius, using chart distance");
            let v: Vec<f64> = np.foot.iter().zip(x).map(|(f, a)| f - a).collect();
            let d = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            Ok((d, v))
        }
    }
}

pub fn penalty(curve: &DiscreteCurve, spec: &PenaltySpec) -> Result<f64> {
    let Some(reference) = spec.active_reference() else {
        return Ok(0.0);
    };
    let segments = curve.segments();
    let h = curve.spacing();
    let mut sum = 0.0;
    for i in 0..=segments {
        let (d, _) = node_distance(curve, reference, i, spec.window)?;
        sum += trapezoid_weight(i, segments, h) * d * d;
    }
    Ok(spec.sigma / (2.0 * curve.target_length()) * sum)
}

pub fn objective(curve: &DiscreteCurve, p: f64, spec: &PenaltySpec) -> Result<ObjectiveValue> {
    let kp = kp_energy(curve, p)?;
    let pen = penalty(curve, spec)?;
    Ok(ObjectiveValue {
        kp,
        penalty: pen,
        total: kp + pen,
    })
}

/// Gradient of the discrete objective with respect to the chart coordinates
/// of every node. Nodes `0, 1, N−1, N` carry the boundary data and are
/// flagged frozen; their entries are still reported.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveGradient {
    dim: usize,
    values: Vec<f64>,
}

impl ObjectiveGradient {
    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn num_nodes(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        let last = self.num_nodes() - 1;
        i <= 1 || i + 1 >= last
    }

    /// Largest absolute entry over the free nodes.
    pub fn free_max_abs(&self) -> f64 {
        (2..self.num_nodes() - 2)
            .flat_map(|i| self.node(i).iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Contribution of interior node `i` to the first variation of `K_p`:
/// `∂K_p = weight · ½∂(κ_i²)` with `½∂(κ_i²)` split over nodes `i−1, i, i+1`.
pub(crate) struct KpTerm<'a> {
    pub node: usize,
    pub weight: f64,
    pub kappa: f64,
    pub metric_factor: f64,
    pub half_dq: [&'a [f64]; 3],
}

/// Gradient of `K_p` computed as `(1/p) K_p^{1−p} ∇(K_p^p)`.
pub(crate) fn kp_gradient(curve: &DiscreteCurve, p: f64, out: &mut [f64]) -> Result<f64> {
    let n = curve.dim();
    kp_terms(curve, p, |term| {
        let i = term.node;
        for (slot, part) in [i - 1, i, i + 1].into_iter().zip(term.half_dq) {
            for m in 0..n {
                out[slot * n + m] += term.weight * part[m];
            }
        }
    })
}

/// Visits every interior node with non-zero curvature; returns `K_p`.
pub(crate) fn kp_terms(
    curve: &DiscreteCurve,
    p: f64,
    mut visit: impl FnMut(KpTerm<'_>),
) -> Result<f64> {
    let model = curve.model();
    let n = curve.dim();
    let count = curve.num_nodes();
    let h = curve.spacing();
    let length = curve.target_length();

    let prof = curvature_profile(curve);
    let k = kp_from_profile(&prof.kappa, h, length, p)?;
    if k == 0.0 {
        return Ok(0.0);
    }
    let log_k = k.ln();

    let mut t = vec![0.0; n];
    let mut a = vec![0.0; n];
    let mut du = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    let mut gam = vec![0.0; n];
    let mut g_t = vec![0.0; n];
    let mut g_x = vec![0.0; n];
    let mut parts = vec![0.0; 3 * n];
    for i in 1..count - 1 {
        let kappa = prof.kappa[i - 1];
        if kappa == 0.0 {
            continue;
        }
        // dK_p/dκ_i² = (h/L) (κ_i/K)^{p−2} / (2K)
        let weight = (h / length) * ((p - 2.0) * (kappa.ln() - log_k) - log_k).exp();
        let (xm, x0, xp) = (curve.node(i - 1), curve.node(i), curve.node(i + 1));
        for c in 0..n {
            t[c] = (xp[c] - xm[c]) / (2.0 * h);
        }
        model.gamma_contract(x0, &t, &t, &mut gam);
        for c in 0..n {
            a[c] = (xp[c] - 2.0 * x0[c] + xm[c]) / (h * h) + gam[c];
        }
        let lam = model.conformal_factor(x0);
        let lam2 = lam * lam;
        model.log_factor_grad(x0, &mut du);
        model.log_factor_hessian(x0, &mut hess);

        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
        let t_du = dot(&t, &du);
        let a_du = dot(&a, &du);
        let a_t = dot(&a, &t);
        let t_t = dot(&t, &t);
        let a_a = dot(&a, &a);
        // (∂Γ(t,t)/∂t)ᵀ a
        for m in 0..n {
            g_t[m] = 2.0 * a[m] * t_du + 2.0 * a_t * du[m] - 2.0 * t[m] * a_du;
        }
        // (∂Γ(t,t)/∂x)ᵀ a
        for m in 0..n {
            let mut ht = 0.0;
            let mut ha = 0.0;
            for c in 0..n {
                ht += hess[c * n + m] * t[c];
                ha += hess[c * n + m] * a[c];
            }
            g_x[m] = 2.0 * a_t * ht - t_t * ha;
        }
        for m in 0..n {
            let prev = lam2 * (a[m] / (h * h) - g_t[m] / (2.0 * h));
            let next = lam2 * (a[m] / (h * h) + g_t[m] / (2.0 * h));
            let mid = lam2 * (a_a * du[m] - 2.0 * a[m] / (h * h) + g_x[m]);
            parts[m] = prev;
            parts[n + m] = mid;
            parts[2 * n + m] = next;
        }
        let (prev, rest) = parts.split_at(n);
        let (mid, next) = rest.split_at(n);
        visit(KpTerm {
            node: i,
            weight,
            kappa,
            metric_factor: lam2,
            half_dq: [prev, mid, next],
        });
    }
    Ok(k)
}

/// Gradient of `P_σ`: node `i` contributes `−(σ/2L) w_i · 2 g(log_x(foot))`.
pub(crate) fn penalty_gradient(curve: &DiscreteCurve, spec: &PenaltySpec, out: &mut [f64]) -> Result<()> {
    let Some(reference) = spec.active_reference() else {
        return Ok(());
    };
    let model = curve.model();
    let n = curve.dim();
    let segments = curve.segments();
    let h = curve.spacing();
    let scale = spec.sigma / (2.0 * curve.target_length());
    for i in 0..=segments {
        let (d, v) = node_distance(curve, reference, i, spec.window)?;
        if d == 0.0 {
            continue;
        }
        let x = curve.node(i);
        let lam = model.conformal_factor(x);
        let w = trapezoid_weight(i, segments, h);
        for m in 0..n {
            out[i * n + m] -= scale * w * 2.0 * lam * lam * v[m];
        }
    }
    Ok(())
}

pub fn objective_gradient(
    curve: &DiscreteCurve,
    p: f64,
    spec: &PenaltySpec,
) -> Result<ObjectiveGradient> {
    let n = curve.dim();
    let mut values = vec![0.0; curve.num_nodes() * n];
    kp_gradient(curve, p, &mut values)?;
    penalty_gradient(curve, spec, &mut values)?;
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(ElasticaError::NonFiniteGradient { node: pos / n });
    }
    Ok(ObjectiveGradient { dim: n, values })
}
