//! Discrete arclength-parametrised curves and vector fields along them.
//!
//! A curve with `N` segments stores `N + 1` chart points at nominal spacing
//! `h = L / N`. Derivatives use second-order central differences on the
//! interior and second-order one-sided stencils at the two end nodes.

use std::ops::Range;

use crate::error::{ElasticaError, Result};
use crate::manifold::{ChartPoint, ManifoldModel};

/// Minimum number of segments accepted by [`DiscreteCurve`].
pub const MIN_SEGMENTS: usize = 8;
/// Default number of segments used by the solver.
pub const DEFAULT_SEGMENTS: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCurve {
    model: ManifoldModel,
    nodes: Vec<f64>,
    target_length: f64,
}

impl DiscreteCurve {
    /// Builds a curve from a flat coordinate buffer of `(N + 1) · dim` values.
    pub fn from_flat(model: ManifoldModel, nodes: Vec<f64>, target_length: f64) -> Result<Self> {
        let n = model.dim();
        if nodes.len() % n != 0 {
            return Err(ElasticaError::DimensionMismatch {
                expected: n,
                got: nodes.len() % n,
            });
        }
        let count = nodes.len() / n;
        if count < MIN_SEGMENTS + 1 {
            return Err(ElasticaError::CurveTooCoarse {
                segments: count.saturating_sub(1),
            });
        }
        if !(target_length.is_finite() && target_length > 0.0) {
            return Err(ElasticaError::NonFiniteInput("target length"));
        }
        for p in nodes.chunks(n) {
            model.check_domain(p)?;
        }
        Ok(DiscreteCurve {
            model,
            nodes,
            target_length,
        })
    }

    pub fn new(model: ManifoldModel, nodes: &[ChartPoint], target_length: f64) -> Result<Self> {
        let mut flat = Vec::with_capacity(nodes.len() * model.dim());
        for p in nodes {
            if p.dim() != model.dim() {
                return Err(ElasticaError::DimensionMismatch {
                    expected: model.dim(),
                    got: p.dim(),
                });
            }
            flat.extend_from_slice(&p.coords);
        }
        Self::from_flat(model, flat, target_length)
    }

    /// Replaces the node buffer, keeping model and target length.
    pub fn with_nodes(&self, nodes: Vec<f64>) -> Result<Self> {
        Self::from_flat(self.model, nodes, self.target_length)
    }

    pub fn model(&self) -> &ManifoldModel {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// Number of segments `N`.
    pub fn segments(&self) -> usize {
        self.nodes.len() / self.dim() - 1
    }

    pub fn num_nodes(&self) -> usize {
        self.segments() + 1
    }

    pub fn target_length(&self) -> f64 {
        self.target_length
    }

    /// Nominal spacing `h = L / N`.
    pub fn spacing(&self) -> f64 {
        self.target_length / self.segments() as f64
    }

    pub fn node(&self, i: usize) -> &[f64] {
        let n = self.dim();
        &self.nodes[i * n..(i + 1) * n]
    }

    pub fn chart_point(&self, i: usize) -> ChartPoint {
        ChartPoint::new(self.node(i).to_vec())
    }

    pub fn nodes_flat(&self) -> &[f64] {
        &self.nodes
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.nodes
    }

    /// Nominal arclength of node `i`.
    pub fn arclength(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }
}

/// Per-node tangent vectors; value `i` is based at node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldAlongCurve {
    dim: usize,
    values: Vec<f64>,
}

impl VectorFieldAlongCurve {
    pub fn zeros(num_nodes: usize, dim: usize) -> Self {
        VectorFieldAlongCurve {
            dim,
            values: vec![0.0; num_nodes * dim],
        }
    }

    pub fn from_flat(dim: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len() % dim, 0, "flat field length not a multiple of dim");
        VectorFieldAlongCurve { dim, values }
    }

    pub fn from_fn(num_nodes: usize, dim: usize, mut f: impl FnMut(usize) -> Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(num_nodes * dim);
        for i in 0..num_nodes {
            let v = f(i);
            assert_eq!(v.len(), dim);
            values.extend(v);
        }
        VectorFieldAlongCurve { dim, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn value_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, c: f64) -> Self {
        VectorFieldAlongCurve {
            dim: self.dim,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn added(&self, other: &Self) -> Self {
        assert_eq!(self.values.len(), other.values.len());
        VectorFieldAlongCurve {
            dim: self.dim,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Riemannian norm of each value along `curve`.
    pub fn norms(&self, curve: &DiscreteCurve) -> Vec<f64> {
        (0..self.len())
            .map(|i| curve.model().norm(curve.node(i), self.value(i)))
            .collect()
    }

    pub(crate) fn check_along(&self, curve: &DiscreteCurve) -> Result<()> {
        if self.len() != curve.num_nodes() || self.dim != curve.dim() {
            return Err(ElasticaError::FieldCurveMismatch {
                field: self.len(),
                nodes: curve.num_nodes(),
            });
        }
        Ok(())
    }
}

/// Unsigned curvature at the interior nodes `1..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureProfile {
    pub kappa: Vec<f64>,
}

impl CurvatureProfile {
    pub fn max(&self) -> f64 {
        self.kappa.iter().copied().fold(0.0, f64::max)
    }
}

/// Finite-difference derivative of a nodal sequence at node `i` (spacing `h`).
fn nodal_derivative(values: &[f64], dim: usize, count: usize, i: usize, h: f64, out: &mut [f64]) {
    let at = |j: usize, k: usize| values[j * dim + k];
    for k in 0..dim {
        out[k] = if i == 0 {
            (-3.0 * at(0, k) + 4.0 * at(1, k) - at(2, k)) / (2.0 * h)
        } else if i == count - 1 {
            (3.0 * at(i, k) - 4.0 * at(i - 1, k) + at(i - 2, k)) / (2.0 * h)
        } else {
            (at(i + 1, k) - at(i - 1, k)) / (2.0 * h)
        };
    }
}

/// Unit tangent `T = γ'` from chart coordinates.
pub fn tangent_field(curve: &DiscreteCurve) -> Result<VectorFieldAlongCurve> {
    if curve.segments() < MIN_SEGMENTS {
        return Err(ElasticaError::CurveTooCoarse {
            segments: curve.segments(),
        });
    }
    let n = curve.dim();
    let count = curve.num_nodes();
    let h = curve.spacing();
    let mut field = VectorFieldAlongCurve::zeros(count, n);
    for i in 0..count {
        nodal_derivative(curve.nodes_flat(), n, count, i, h, field.value_mut(i));
    }
    Ok(field)
}

/// Covariant derivative `∇_T X` of a field along the curve.
///
/// `(∇_T X)^k = (X^k)' + Γ^k_ij Tⁱ Xʲ`; the two end values use one-sided
/// differences and are less accurate.
pub fn covariant_derivative(
    field: &VectorFieldAlongCurve,
    curve: &DiscreteCurve,
) -> Result<VectorFieldAlongCurve> {
    field.check_along(curve)?;
    let tangent = tangent_field(curve)?;
    let n = curve.dim();
    let count = curve.num_nodes();
    let h = curve.spacing();
    let model = curve.model();
    let mut out = VectorFieldAlongCurve::zeros(count, n);
    let mut gam = vec![0.0; n];
    for i in 0..count {
        let slot = out.value_mut(i);
        nodal_derivative(field.as_flat(), n, count, i, h, slot);
        model.gamma_contract(curve.node(i), tangent.value(i), field.value(i), &mut gam);
        for k in 0..n {
            slot[k] += gam[k];
        }
    }
    Ok(out)
}

/// Curvature vector `∇_T T` at the interior nodes from the compact stencil
/// `(γ_{i+1} − 2γ_i + γ_{i−1}) / h² + Γ(γ_i)(T_i, T_i)`. End values are zero.
pub fn curvature_vector(curve: &DiscreteCurve) -> VectorFieldAlongCurve {
    let n = curve.dim();
    let count = curve.num_nodes();
    let h = curve.spacing();
    let model = curve.model();
    let mut out = VectorFieldAlongCurve::zeros(count, n);
    let mut t = vec![0.0; n];
    let mut gam = vec![0.0; n];
    for i in 1..count - 1 {
        let (a, b, c) = (curve.node(i - 1), curve.node(i), curve.node(i + 1));
        for k in 0..n {
            t[k] = (c[k] - a[k]) / (2.0 * h);
        }
        model.gamma_contract(b, &t, &t, &mut gam);
        let slot = out.value_mut(i);
        for k in 0..n {
            slot[k] = (c[k] - 2.0 * b[k] + a[k]) / (h * h) + gam[k];
        }
    }
    out
}

/// `κ_i = |∇_T T|_g` at interior nodes.
pub fn curvature_profile(curve: &DiscreteCurve) -> CurvatureProfile {
    let acc = curvature_vector(curve);
    let kappa = (1..curve.num_nodes() - 1)
        .map(|i| curve.model().norm(curve.node(i), acc.value(i)))
        .collect();
    CurvatureProfile { kappa }
}

/// Riemannian length of one chord: the geodesic distance between its ends.
#[inline]
pub(crate) fn chord_length(model: &ManifoldModel, a: &[f64], b: &[f64]) -> f64 {
    model.distance_raw(a, b)
}

pub fn segment_lengths(curve: &DiscreteCurve) -> Vec<f64> {
    (0..curve.segments())
        .map(|j| chord_length(curve.model(), curve.node(j), curve.node(j + 1)))
        .collect()
}

/// Total length of the piecewise-geodesic curve through the nodes.
pub fn length(curve: &DiscreteCurve) -> f64 {
    segment_lengths(curve).iter().sum()
}

/// Largest relative deviation of a segment length from the mean.
pub fn spacing_nonuniformity(curve: &DiscreteCurve) -> f64 {
    let seg = segment_lengths(curve);
    let mean = seg.iter().sum::<f64>() / seg.len() as f64;
    seg.iter()
        .map(|l| (l - mean).abs() / mean)
        .fold(0.0, f64::max)
}

fn resample_pass(nodes: &[f64], n: usize, seg: &[f64]) -> Vec<f64> {
    let count = nodes.len() / n;
    let segs = count - 1;
    let mut cum = Vec::with_capacity(count);
    cum.push(0.0);
    for l in seg {
        cum.push(cum.last().unwrap() + l);
    }
    let total = cum[segs];
    let at = |j: usize| &nodes[j * n..(j + 1) * n];

    // node derivatives with respect to arclength (three-point, non-uniform)
    let mut deriv = vec![0.0; nodes.len()];
    for j in 0..count {
        for k in 0..n {
            deriv[j * n + k] = if j == 0 {
                (at(1)[k] - at(0)[k]) / seg[0]
            } else if j == segs {
                (at(segs)[k] - at(segs - 1)[k]) / seg[segs - 1]
            } else {
                let (d0, d1) = (seg[j - 1], seg[j]);
                let s0 = (at(j)[k] - at(j - 1)[k]) / d0;
                let s1 = (at(j + 1)[k] - at(j)[k]) / d1;
                (s0 * d1 + s1 * d0) / (d0 + d1)
            };
        }
    }

    let mut out = Vec::with_capacity(nodes.len());
    out.extend_from_slice(at(0));
    let mut j = 0;
    for i in 1..segs {
        let target = total * i as f64 / segs as f64;
        while j + 1 < segs && cum[j + 1] < target {
            j += 1;
        }
        let d = seg[j];
        let t = ((target - cum[j]) / d).clamp(0.0, 1.0);
        // cubic Hermite basis
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        for k in 0..n {
            out.push(
                h00 * at(j)[k]
                    + h10 * d * deriv[j * n + k]
                    + h01 * at(j + 1)[k]
                    + h11 * d * deriv[(j + 1) * n + k],
            );
        }
    }
    out.extend_from_slice(at(segs));
    out
}

/// Resamples the nodes so that consecutive segment lengths are equal.
///
/// Endpoints are kept; interior nodes are placed by cubic Hermite
/// interpolation of the chart coordinates against cumulative arclength,
/// repeated until the spacing is uniform to `1e-12` (relative).
pub fn reparametrize_arclength(curve: &DiscreteCurve) -> Result<DiscreteCurve> {
    let total = length(curve);
    let target = curve.target_length();
    if (total - target).abs() > 0.1 * target {
        return Err(ElasticaError::LengthMismatch {
            actual: total,
            target,
        });
    }
    resample_uniform(curve)
}

/// [`reparametrize_arclength`] without the length precondition.
pub(crate) fn resample_uniform(curve: &DiscreteCurve) -> Result<DiscreteCurve> {
    let n = curve.dim();
    let model = *curve.model();
    let mut nodes = curve.nodes_flat().to_vec();
    for _ in 0..40 {
        let seg: Vec<f64> = nodes
            .chunks(n)
            .zip(nodes.chunks(n).skip(1))
            .map(|(a, b)| chord_length(&model, a, b))
            .collect();
        let total: f64 = seg.iter().sum();
        if let Some(j) = seg.iter().position(|l| !(*l > total * 1e-14)) {
            return Err(ElasticaError::DegenerateCurve { index: j });
        }
        let mean = total / seg.len() as f64;
        let dev = seg
            .iter()
            .map(|l| (l - mean).abs() / mean)
            .fold(0.0, f64::max);
        if dev < 1e-12 {
            break;
        }
        nodes = resample_pass(&nodes, n, &seg);
    }
    curve.with_nodes(nodes)
}

/// Result of a nearest-point query against a polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestPoint {
    /// Segment index plus fraction along that segment.
    pub param: f64,
    pub foot: Vec<f64>,
    pub distance: f64,
}

/// Closest point to `x` on the piecewise-geodesic polyline through the nodes
/// with indices in `window`.
pub fn nearest_point(curve: &DiscreteCurve, x: &[f64], window: Range<usize>) -> Result<NearestPoint> {
    curve.model().check_domain(x)?;
    let end = window.end.min(curve.num_nodes());
    if window.start >= end {
        return Err(ElasticaError::EmptyWindow);
    }
    let model = curve.model();
    if end - window.start == 1 {
        let p = curve.node(window.start);
        return Ok(NearestPoint {
            param: window.start as f64,
            foot: p.to_vec(),
            distance: model.distance_raw(x, p),
        });
    }
    let mut best = NearestPoint {
        param: f64::NAN,
        foot: Vec::new(),
        distance: f64::INFINITY,
    };
    for j in window.start..end - 1 {
        let (t, foot, d) = model.nearest_on_segment(x, curve.node(j), curve.node(j + 1));
        if d < best.distance {
            best = NearestPoint {
                param: j as f64 + t,
                foot,
                distance: d,
            };
        }
    }
    Ok(best)
}

#[cfg(test)]
pub(crate) mod test_curves {
    use super::*;

    pub fn line(model: ManifoldModel, from: &[f64], to: &[f64], segments: usize) -> DiscreteCurve {
        let mut flat = Vec::new();
        for i in 0..=segments {
            let t = i as f64 / segments as f64;
            flat.extend(model.geodesic_interpolate(from, to, t));
        }
        let l = model.distance_raw(from, to);
        DiscreteCurve::from_flat(model, flat, l).unwrap()
    }

    /// Euclidean circle arc of radius `r` centred at the origin, from angle
    /// `a0` through arclength `len`.
    pub fn circle_arc(r: f64, a0: f64, len: f64, segments: usize) -> DiscreteCurve {
        let model = ManifoldModel::euclidean(2).unwrap();
        let mut flat = Vec::new();
        for i in 0..=segments {
            let a = a0 + len / r * i as f64 / segments as f64;
            flat.push(r * a.cos());
            flat.push(r * a.sin());
        }
        DiscreteCurve::from_flat(model, flat, len).unwrap()
    }
}
