//! Built-in constant-curvature manifolds described in a single conformal chart.
//!
//! All three models share the form `g = λ(x)² δ` with `λ = e^u`:
//!
//! * euclidean: `λ = 1`
//! * sphere (stereographic from the south pole): `λ = 2 / (1 + |x|²)`
//! * hyperbolic (Poincaré ball): `λ = 2 / (1 − |x|²)`
//!
//! Geodesic maps go through the standard embeddings (unit sphere in ℝⁿ⁺¹,
//! hyperboloid in Minkowski space), whose inner product we write as
//! `⟨X, Y⟩ₛ = Σ_{i<n} XᵢYᵢ + s XₙYₙ` with `s` the curvature sign.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ElasticaError, Result};

/// Largest chart radius admitted by the stereographic sphere chart.
pub const SPHERE_CHART_RADIUS_GUARD: f64 = 10.0;
/// Distance from the ideal boundary kept by the Poincaré ball chart.
pub const HYPERBOLIC_BOUNDARY_GUARD: f64 = 1e-6;
/// Sphere log map refuses pairs closer than this to being antipodal.
const ANTIPODAL_GUARD: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Euclidean,
    Sphere,
    Hyperbolic,
}

impl ModelKind {
    pub fn id(self) -> &'static str {
        match self {
            ModelKind::Euclidean => "euclidean",
            ModelKind::Sphere => "sphere",
            ModelKind::Hyperbolic => "hyperbolic",
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "euclidean" => Ok(ModelKind::Euclidean),
            "sphere" => Ok(ModelKind::Sphere),
            "hyperbolic" => Ok(ModelKind::Hyperbolic),
            other => Err(ElasticaError::InvalidConfig(format!(
                "unknown model id {other:?} (expected euclidean, sphere or hyperbolic)"
            ))),
        }
    }
}

/// A point given by its chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub coords: Vec<f64>,
}

impl ChartPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        ChartPoint { coords }
    }

    pub fn origin(dim: usize) -> Self {
        ChartPoint { coords: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl From<Vec<f64>> for ChartPoint {
    fn from(coords: Vec<f64>) -> Self {
        ChartPoint { coords }
    }
}

/// A tangent vector in chart components, attached to its base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub base: ChartPoint,
    pub components: Vec<f64>,
}

impl TangentVector {
    pub fn new(base: ChartPoint, components: Vec<f64>) -> Self {
        TangentVector { base, components }
    }
}

/// Christoffel symbols `Γ^k_{ij}` stored densely, index order `(k, i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }
}

/// One of the built-in chart models together with its dimension.
///
/// Values are plain data; every operation is a pure function of its inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ManifoldModel {
    kind: ModelKind,
    dim: usize,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

impl ManifoldModel {
    pub fn new(kind: ModelKind, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(ElasticaError::InvalidConfig(format!(
                "manifold dimension must be at least 2, got {dim}"
            )));
        }
        Ok(ManifoldModel { kind, dim })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(ModelKind::Euclidean, dim)
    }

    pub fn sphere(dim: usize) -> Result<Self> {
        Self::new(ModelKind::Sphere, dim)
    }

    pub fn hyperbolic(dim: usize) -> Result<Self> {
        Self::new(ModelKind::Hyperbolic, dim)
    }

    pub fn from_id(id: &str, dim: usize) -> Result<Self> {
        Self::new(ModelKind::from_id(id)?, dim)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn id(&self) -> &'static str {
        self.kind.id()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Constant sectional curvature: -1, 0 or +1.
    pub fn curvature_sign(&self) -> f64 {
        match self.kind {
            ModelKind::Euclidean => 0.0,
            ModelKind::Sphere => 1.0,
            ModelKind::Hyperbolic => -1.0,
        }
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        if x.len() != self.dim || x.iter().any(|c| !c.is_finite()) {
            return false;
        }
        let r = norm2(x).sqrt();
        match self.kind {
            ModelKind::Euclidean => true,
            ModelKind::Sphere => r < SPHERE_CHART_RADIUS_GUARD,
            ModelKind::Hyperbolic => r <= 1.0 - HYPERBOLIC_BOUNDARY_GUARD,
        }
    }

    pub fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(ElasticaError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if self.in_domain(x) {
            Ok(())
        } else {
            Err(ElasticaError::OutOfChartDomain {
                model: self.id(),
                coords: x.to_vec(),
            })
        }
    }

    #[inline]
    fn q(&self, x: &[f64]) -> f64 {
        1.0 + self.curvature_sign() * norm2(x)
    }

    /// Conformal factor `λ(x)`.
    #[inline]
    pub fn conformal_factor(&self, x: &[f64]) -> f64 {
        match self.kind {
            ModelKind::Euclidean => 1.0,
            _ => 2.0 / self.q(x),
        }
    }

    /// Writes `∇u` for `u = log λ`.
    #[inline]
    pub fn log_factor_grad(&self, x: &[f64], out: &mut [f64]) {
        match self.kind {
            ModelKind::Euclidean => out.iter_mut().for_each(|o| *o = 0.0),
            _ => {
                let s = self.curvature_sign();
                let c = -2.0 * s / self.q(x);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = c * xi;
                }
            }
        }
    }

    /// Writes the Hessian of `u = log λ`, row-major `n × n`.
    pub fn log_factor_hessian(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim;
        match self.kind {
            ModelKind::Euclidean => out.iter_mut().for_each(|o| *o = 0.0),
            _ => {
                let s = self.curvature_sign();
                let q = self.q(x);
                for i in 0..n {
                    for j in 0..n {
                        let diag = if i == j { -2.0 * s / q } else { 0.0 };
                        out[i * n + j] = diag + 4.0 * x[i] * x[j] / (q * q);
                    }
                }
            }
        }
    }

    /// `g_x(a, b)`.
    #[inline]
    pub fn inner(&self, x: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let l = self.conformal_factor(x);
        l * l * dot(a, b)
    }

    #[inline]
    pub fn norm(&self, x: &[f64], a: &[f64]) -> f64 {
        self.inner(x, a, a).max(0.0).sqrt()
    }

    /// Metric matrix `g_ij(x)`.
    pub fn metric(&self, x: &ChartPoint) -> Result<DMatrix<f64>> {
        self.check_domain(&x.coords)?;
        let l = self.conformal_factor(&x.coords);
        Ok(DMatrix::identity(self.dim, self.dim) * (l * l))
    }

    /// Closed-form Christoffel symbols `Γ^k_ij = δ^k_i ∂_j u + δ^k_j ∂_i u − δ_ij ∂_k u`.
    pub fn christoffel(&self, x: &ChartPoint) -> Result<Christoffel> {
        self.check_domain(&x.coords)?;
        let n = self.dim;
        let mut du = vec![0.0; n];
        self.log_factor_grad(&x.coords, &mut du);
        let mut data = vec![0.0; n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut v = 0.0;
                    if k == i {
                        v += du[j];
                    }
                    if k == j {
                        v += du[i];
                    }
                    if i == j {
                        v -= du[k];
                    }
                    data[(k * n + i) * n + j] = v;
                }
            }
        }
        Ok(Christoffel { dim: n, data })
    }

    /// Contraction `Γ(a, b)^k = Γ^k_ij aⁱ bʲ` at `x`.
    #[inline]
    pub fn gamma_contract(&self, x: &[f64], a: &[f64], b: &[f64], out: &mut [f64]) {
        if self.kind == ModelKind::Euclidean {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let s = self.curvature_sign();
        let c = -2.0 * s / self.q(x);
        // ∇u = c x
        let a_du = c * dot(a, x);
        let b_du = c * dot(b, x);
        let ab = dot(a, b);
        for k in 0..self.dim {
            out[k] = a[k] * b_du + b[k] * a_du - ab * c * x[k];
        }
    }

    /// `R(X, Y)Z = s (⟨Y, Z⟩ X − ⟨X, Z⟩ Y)` on raw components at `x`.
    #[inline]
    pub fn riemann_raw(&self, x: &[f64], vx: &[f64], vy: &[f64], vz: &[f64], out: &mut [f64]) {
        let s = self.curvature_sign();
        if s == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let yz = self.inner(x, vy, vz);
        let xz = self.inner(x, vx, vz);
        for k in 0..self.dim {
            out[k] = s * (yz * vx[k] - xz * vy[k]);
        }
    }

    /// Riemann curvature `R(X, Y)Z`.
    pub fn riemann(
        &self,
        vx: &TangentVector,
        vy: &TangentVector,
        vz: &TangentVector,
    ) -> Result<TangentVector> {
        if vx.base != vy.base || vx.base != vz.base {
            return Err(ElasticaError::MismatchedBasePoints);
        }
        self.check_domain(&vx.base.coords)?;
        let mut out = vec![0.0; self.dim];
        self.riemann_raw(
            &vx.base.coords,
            &vx.components,
            &vy.components,
            &vz.components,
            &mut out,
        );
        Ok(TangentVector::new(vx.base.clone(), out))
    }

    /// Geodesic distance on raw coordinates; no domain check.
    pub fn distance_raw(&self, x: &[f64], y: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        match self.kind {
            ModelKind::Euclidean => d2.sqrt(),
            ModelKind::Sphere => {
                let arg = (d2 / (self.q(x) * self.q(y))).sqrt();
                2.0 * arg.min(1.0).asin()
            }
            ModelKind::Hyperbolic => {
                let arg = (d2 / (self.q(x) * self.q(y))).sqrt();
                2.0 * arg.asinh()
            }
        }
    }

    /// Distance `d(x, y)` and its chart gradient with respect to `x`
    /// (written into `grad`); no domain check. The gradient is zero when
    /// the points coincide.
    pub fn distance_grad_raw(&self, x: &[f64], y: &[f64], grad: &mut [f64]) -> f64 {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 == 0.0 {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return 0.0;
        }
        match self.kind {
            ModelKind::Euclidean => {
                let d = d2.sqrt();
                for (g, (a, b)) in grad.iter_mut().zip(x.iter().zip(y)) {
                    *g = (a - b) / d;
                }
                d
            }
            _ => {
                // d = 2 F(r), r² = |x − y|² / (q(x) q(y)), F = asin or asinh
                let s = self.curvature_sign();
                let (qx, qy) = (self.q(x), self.q(y));
                let r2 = d2 / (qx * qy);
                let r = r2.sqrt();
                let scale = 2.0 / ((1.0 - s * r2).max(f64::MIN_POSITIVE).sqrt() * r * qx * qy);
                for (g, (a, b)) in grad.iter_mut().zip(x.iter().zip(y)) {
                    *g = scale * ((a - b) - s * d2 * a / qx);
                }
                if s > 0.0 {
                    2.0 * r.min(1.0).asin()
                } else {
                    2.0 * r.asinh()
                }
            }
        }
    }

    pub fn distance(&self, x: &ChartPoint, y: &ChartPoint) -> Result<f64> {
        self.check_domain(&x.coords)?;
        self.check_domain(&y.coords)?;
        Ok(self.distance_raw(&x.coords, &y.coords))
    }

    // Embedding helpers (non-Euclidean models only). The extra coordinate is last.

    fn embed(&self, x: &[f64]) -> Vec<f64> {
        let s = self.curvature_sign();
        let r2 = norm2(x);
        let q = 1.0 + s * r2;
        let mut e: Vec<f64> = x.iter().map(|c| 2.0 * c / q).collect();
        e.push((1.0 - s * r2) / q);
        e
    }

    fn unembed(&self, e: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let denom = 1.0 + e[n];
        e[..n].iter().map(|c| c / denom).collect()
    }

    fn ambient_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.dim;
        dot(&a[..n], &b[..n]) + self.curvature_sign() * a[n] * b[n]
    }

    fn push_forward(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let s = self.curvature_sign();
        let q = self.q(x);
        let xv = dot(x, v);
        let mut out: Vec<f64> = x
            .iter()
            .zip(v)
            .map(|(xi, vi)| 2.0 * vi / q - 4.0 * s * xv * xi / (q * q))
            .collect();
        out.push(-4.0 * s * xv / (q * q));
        out
    }

    fn pull_back(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let s = self.curvature_sign();
        let q = self.q(x);
        let l = 2.0 / q;
        let xw = dot(x, &w[..n]);
        (0..n)
            .map(|m| {
                let t = 2.0 * w[m] / q - 4.0 * s * x[m] * xw / (q * q) - 4.0 * x[m] * w[n] / (q * q);
                t / (l * l)
            })
            .collect()
    }

    /// Ambient tangent at `p` pointing to `r`, scaled to have length equal to the
    /// geodesic distance, together with that distance.
    fn ambient_log(&self, p: &[f64], r: &[f64]) -> (Vec<f64>, f64) {
        let s = self.curvature_sign();
        let delta: Vec<f64> = r.iter().zip(p).map(|(a, b)| a - b).collect();
        let d2 = self.ambient_inner(&delta, &delta).max(0.0);
        let theta = if s > 0.0 {
            2.0 * (d2.sqrt() / 2.0).min(1.0).asin()
        } else {
            2.0 * (d2.sqrt() / 2.0).asinh()
        };
        let w: Vec<f64> = delta
            .iter()
            .zip(p)
            .map(|(d, pi)| d + 0.5 * s * d2 * pi)
            .collect();
        let wn = self.ambient_inner(&w, &w).max(0.0).sqrt();
        if wn == 0.0 {
            return (vec![0.0; w.len()], theta);
        }
        (w.iter().map(|c| c * theta / wn).collect(), theta)
    }

    /// Exponential map on raw coordinates; no domain check on the input.
    pub fn exp_raw(&self, x: &[f64], v: &[f64], t: f64) -> Vec<f64> {
        match self.kind {
            ModelKind::Euclidean => x.iter().zip(v).map(|(a, b)| a + t * b).collect(),
            _ => {
                let p = self.embed(x);
                let w = self.push_forward(x, v);
                let wn = self.ambient_inner(&w, &w).max(0.0).sqrt();
                if wn == 0.0 || t == 0.0 {
                    return x.to_vec();
                }
                let theta = t * wn;
                let (c, sn) = if self.curvature_sign() > 0.0 {
                    (theta.cos(), theta.sin())
                } else {
                    (theta.cosh(), theta.sinh())
                };
                let e: Vec<f64> = p
                    .iter()
                    .zip(&w)
                    .map(|(pi, wi)| pi * c + wi / wn * sn)
                    .collect();
                self.unembed(&e)
            }
        }
    }

    pub fn exp_map(&self, v: &TangentVector, t: f64) -> Result<ChartPoint> {
        self.check_domain(&v.base.coords)?;
        if v.components.len() != self.dim {
            return Err(ElasticaError::DimensionMismatch {
                expected: self.dim,
                got: v.components.len(),
            });
        }
        let y = self.exp_raw(&v.base.coords, &v.components, t);
        self.check_domain(&y)?;
        Ok(ChartPoint::new(y))
    }

    /// Log map on raw coordinates; `None` for (near-)antipodal sphere pairs.
    pub fn log_raw(&self, x: &[f64], y: &[f64]) -> Option<Vec<f64>> {
        match self.kind {
            ModelKind::Euclidean => Some(y.iter().zip(x).map(|(a, b)| a - b).collect()),
            _ => {
                let p = self.embed(x);
                let r = self.embed(y);
                let (w, theta) = self.ambient_log(&p, &r);
                if self.kind == ModelKind::Sphere && theta > std::f64::consts::PI - ANTIPODAL_GUARD
                {
                    return None;
                }
                Some(self.pull_back(x, &w))
            }
        }
    }

    pub fn log_map(&self, x: &ChartPoint, y: &ChartPoint) -> Result<TangentVector> {
        self.check_domain(&x.coords)?;
        self.check_domain(&y.coords)?;
        match self.log_raw(&x.coords, &y.coords) {
            Some(v) => Ok(TangentVector::new(x.clone(), v)),
            None => Err(ElasticaError::BeyondInjectivityRadius {
                distance: self.distance_raw(&x.coords, &y.coords),
            }),
        }
    }

    /// Closest point to `x` on the minimal geodesic segment `[a, b]`.
    ///
    /// Returns the fraction along the segment in `[0, 1]`, the foot point and
    /// the distance from `x` to it.
    pub fn nearest_on_segment(&self, x: &[f64], a: &[f64], b: &[f64]) -> (f64, Vec<f64>, f64) {
        match self.kind {
            ModelKind::Euclidean => {
                let ab: Vec<f64> = b.iter().zip(a).map(|(p, q)| p - q).collect();
                let ax: Vec<f64> = x.iter().zip(a).map(|(p, q)| p - q).collect();
                let len2 = norm2(&ab);
                let t = if len2 > 0.0 {
                    (dot(&ax, &ab) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let foot: Vec<f64> = a.iter().zip(&ab).map(|(p, d)| p + t * d).collect();
                let dist = self.distance_raw(x, &foot);
                (t, foot, dist)
            }
            _ => {
                let s = self.curvature_sign();
                let pa = self.embed(a);
                let pb = self.embed(b);
                let px = self.embed(x);
                let (w, theta) = self.ambient_log(&pa, &pb);
                if theta == 0.0 {
                    return (0.0, a.to_vec(), self.distance_raw(x, a));
                }
                let e2: Vec<f64> = w.iter().map(|c| c / theta).collect();
                let cx1 = self.ambient_inner(&px, &pa);
                let cx2 = self.ambient_inner(&px, &e2);
                let at = |t: f64| -> Vec<f64> {
                    let (c, sn) = if s > 0.0 {
                        (t.cos(), t.sin())
                    } else {
                        (t.cosh(), t.sinh())
                    };
                    let e: Vec<f64> = pa.iter().zip(&e2).map(|(p, q)| p * c + q * sn).collect();
                    self.unembed(&e)
                };
                let t_star = if s > 0.0 {
                    cx2.atan2(cx1)
                } else {
                    // minimise a cosh t − b sinh t with a = −⟨x, e1⟩, b = ⟨x, e2⟩
                    (cx2 / -cx1).atanh()
                };
                if t_star >= 0.0 && t_star <= theta {
                    let foot = at(t_star);
                    let dist = self.distance_raw(x, &foot);
                    (t_star / theta, foot, dist)
                } else {
                    let da = self.distance_raw(x, a);
                    let db = self.distance_raw(x, b);
                    if da <= db {
                        (0.0, a.to_vec(), da)
                    } else {
                        (1.0, b.to_vec(), db)
                    }
                }
            }
        }
    }

    /// Point at fraction `t` along the minimal geodesic from `a` to `b`.
    pub fn geodesic_interpolate(&self, a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
        match self.log_raw(a, b) {
            Some(v) => self.exp_raw(a, &v, t),
            None => a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn models(dim: usize) -> Vec<ManifoldModel> {
        vec![
            ManifoldModel::euclidean(dim).unwrap(),
            ManifoldModel::sphere(dim).unwrap(),
            ManifoldModel::hyperbolic(dim).unwrap(),
        ]
    }

    fn random_point(m: &ManifoldModel, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let r = match m.kind() {
            ModelKind::Hyperbolic => 0.9,
            ModelKind::Sphere => 1.5,
            ModelKind::Euclidean => 3.0,
        };
        loop {
            let x: Vec<f64> = (0..m.dim()).map(|_| rng.gen_range(-r..r)).collect();
            if norm2(&x).sqrt() < r {
                return x;
            }
        }
    }

    #[test]
    fn metric_at_origin() {
        let o = ChartPoint::origin(2);
        let e = ManifoldModel::euclidean(2).unwrap().metric(&o).unwrap();
        assert_eq!(e, DMatrix::identity(2, 2));
        let s = ManifoldModel::sphere(2).unwrap().metric(&o).unwrap();
        assert_eq!(s, DMatrix::identity(2, 2) * 4.0);
        let h = ManifoldModel::hyperbolic(2).unwrap().metric(&o).unwrap();
        assert_eq!(h, DMatrix::identity(2, 2) * 4.0);
    }

    #[test]
    fn metric_is_spd_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in models(3) {
            for _ in 0..1000 {
                let x = ChartPoint::new(random_point(&m, &mut rng));
                let g = m.metric(&x).unwrap();
                let eig = g.symmetric_eigenvalues();
                assert!(eig.min() > 0.0);
            }
        }
    }

    #[test]
    fn domain_guards() {
        let h = ManifoldModel::hyperbolic(2).unwrap();
        assert!(matches!(
            h.metric(&ChartPoint::new(vec![1.0, 0.0])),
            Err(ElasticaError::OutOfChartDomain { .. })
        ));
        let s = ManifoldModel::sphere(2).unwrap();
        assert!(s.check_domain(&[9.9, 0.0]).is_ok());
        assert!(s.check_domain(&[10.0, 0.0]).is_err());
        let e = ManifoldModel::euclidean(2).unwrap();
        assert!(e.check_domain(&[1e6, -1e6]).is_ok());
        assert!(matches!(
            e.check_domain(&[1.0]),
            Err(ElasticaError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn christoffel_zero_cases() {
        let e = ManifoldModel::euclidean(2).unwrap();
        let c = e.christoffel(&ChartPoint::new(vec![0.4, -2.0])).unwrap();
        assert!(c.data.iter().all(|v| *v == 0.0));
        let s = ManifoldModel::sphere(2).unwrap();
        let c = s.christoffel(&ChartPoint::origin(2)).unwrap();
        assert!(c.data.iter().all(|v| *v == 0.0));
    }

    /// Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij) by central differences of the metric.
    fn christoffel_from_metric(m: &ManifoldModel, x: &[f64]) -> Vec<f64> {
        let n = m.dim();
        let step = 1e-5;
        let mut dg = vec![DMatrix::<f64>::zeros(n, n); n];
        for (l, slot) in dg.iter_mut().enumerate() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[l] += step;
            xm[l] -= step;
            let gp = m.metric(&ChartPoint::new(xp)).unwrap();
            let gm = m.metric(&ChartPoint::new(xm)).unwrap();
            *slot = (gp - gm) / (2.0 * step);
        }
        let ginv = m
            .metric(&ChartPoint::new(x.to_vec()))
            .unwrap()
            .try_inverse()
            .unwrap();
        let mut out = vec![0.0; n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut v = 0.0;
                    for l in 0..n {
                        v += 0.5
                            * ginv[(k, l)]
                            * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                    }
                    out[(k * n + i) * n + j] = v;
                }
            }
        }
        out
    }

    #[test]
    fn christoffel_matches_metric_differences() {
        let s = ManifoldModel::sphere(2).unwrap();
        let x = [0.3, 0.1];
        let c = s.christoffel(&ChartPoint::new(x.to_vec())).unwrap();
        let fd = christoffel_from_metric(&s, &x);
        for (a, b) in c.data.iter().zip(&fd) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in models(3) {
            for _ in 0..20 {
                let x = random_point(&m, &mut rng);
                let c = m.christoffel(&ChartPoint::new(x.clone())).unwrap();
                let fd = christoffel_from_metric(&m, &x);
                for (a, b) in c.data.iter().zip(&fd) {
                    assert!((a - b).abs() <= 1e-5 * (1.0 + b.abs()), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn christoffel_symmetric_in_lower_indices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in models(3) {
            for _ in 0..50 {
                let c = m
                    .christoffel(&ChartPoint::new(random_point(&m, &mut rng)))
                    .unwrap();
                for k in 0..3 {
                    for i in 0..3 {
                        for j in 0..3 {
                            assert_eq!(c.get(k, i, j), c.get(k, j, i));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn gamma_contract_matches_symbols() {
        let m = ManifoldModel::hyperbolic(3).unwrap();
        let x = [0.2, -0.4, 0.1];
        let a = [1.0, 0.5, -0.3];
        let b = [0.2, -1.0, 0.7];
        let c = m.christoffel(&ChartPoint::new(x.to_vec())).unwrap();
        let mut out = [0.0; 3];
        m.gamma_contract(&x, &a, &b, &mut out);
        for k in 0..3 {
            let mut v = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    v += c.get(k, i, j) * a[i] * b[j];
                }
            }
            assert_abs_diff_eq!(out[k], v, epsilon = 1e-14);
        }
    }

    #[test]
    fn riemann_sectional_examples() {
        let e = ManifoldModel::euclidean(2).unwrap();
        let b = ChartPoint::new(vec![0.3, 0.3]);
        let vx = TangentVector::new(b.clone(), vec![1.0, 0.0]);
        let vy = TangentVector::new(b.clone(), vec![0.0, 1.0]);
        let r = e.riemann(&vx, &vy, &vy).unwrap();
        assert_eq!(r.components, vec![0.0, 0.0]);

        for (m, sign) in [
            (ManifoldModel::sphere(2).unwrap(), 1.0),
            (ManifoldModel::hyperbolic(2).unwrap(), -1.0),
        ] {
            let l = m.conformal_factor(&b.coords);
            let vx = TangentVector::new(b.clone(), vec![1.0 / l, 0.0]);
            let vy = TangentVector::new(b.clone(), vec![0.0, 1.0 / l]);
            let r = m.riemann(&vx, &vy, &vy).unwrap();
            assert_abs_diff_eq!(r.components[0], sign * vx.components[0], epsilon = 1e-14);
            assert_abs_diff_eq!(r.components[1], 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn riemann_rejects_mismatched_bases() {
        let m = ManifoldModel::sphere(2).unwrap();
        let a = TangentVector::new(ChartPoint::new(vec![0.0, 0.0]), vec![1.0, 0.0]);
        let b = TangentVector::new(ChartPoint::new(vec![0.1, 0.0]), vec![1.0, 0.0]);
        assert_eq!(
            m.riemann(&a, &b, &a),
            Err(ElasticaError::MismatchedBasePoints)
        );
    }

    /// R^l_{kij} = ∂_i Γ^l_jk − ∂_j Γ^l_ik + Γ^l_im Γ^m_jk − Γ^l_jm Γ^m_ik via differences.
    #[test]
    fn riemann_closed_form_matches_christoffel_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 3;
        for m in models(n) {
            for _ in 0..10 {
                let x = random_point(&m, &mut rng);
                let step = 1e-5;
                let gam = m.christoffel(&ChartPoint::new(x.clone())).unwrap();
                let dgam: Vec<Christoffel> = (0..n)
                    .map(|i| {
                        let mut xp = x.clone();
                        let mut xm = x.clone();
                        xp[i] += step;
                        xm[i] -= step;
                        let gp = m.christoffel(&ChartPoint::new(xp)).unwrap();
                        let gm = m.christoffel(&ChartPoint::new(xm)).unwrap();
                        Christoffel {
                            dim: n,
                            data: gp
                                .data
                                .iter()
                                .zip(&gm.data)
                                .map(|(a, b)| (a - b) / (2.0 * step))
                                .collect(),
                        }
                    })
                    .collect();
                let vx: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let vy: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let vz: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut closed = vec![0.0; n];
                m.riemann_raw(&x, &vx, &vy, &vz, &mut closed);
                for l in 0..n {
                    let mut v = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            for k in 0..n {
                                let mut r = dgam[i].get(l, j, k) - dgam[j].get(l, i, k);
                                for mm in 0..n {
                                    r += gam.get(l, i, mm) * gam.get(mm, j, k)
                                        - gam.get(l, j, mm) * gam.get(mm, i, k);
                                }
                                v += r * vx[i] * vy[j] * vz[k];
                            }
                        }
                    }
                    assert!(
                        (v - closed[l]).abs() < 1e-6 * (1.0 + v.abs()),
                        "{} {v} vs {}",
                        m.id(),
                        closed[l]
                    );
                }
            }
        }
    }

    #[test]
    fn distance_examples() {
        let e = ManifoldModel::euclidean(2).unwrap();
        let d = e
            .distance(&ChartPoint::new(vec![0.0, 0.0]), &ChartPoint::new(vec![3.0, 4.0]))
            .unwrap();
        assert_eq!(d, 5.0);

        let s = ManifoldModel::sphere(2).unwrap();
        let d = s
            .distance(&ChartPoint::origin(2), &ChartPoint::new(vec![0.6, 0.8]))
            .unwrap();
        assert_abs_diff_eq!(d, PI / 2.0, epsilon = 1e-14);
        let d = s
            .distance(&ChartPoint::origin(2), &ChartPoint::new(vec![9.0, 0.0]))
            .unwrap();
        assert!(d > 2.9 && d < PI);

        let h = ManifoldModel::hyperbolic(2).unwrap();
        for r in [0.1, 0.5, 0.9, 0.99] {
            let d = h
                .distance(&ChartPoint::origin(2), &ChartPoint::new(vec![0.0, r]))
                .unwrap();
            assert_abs_diff_eq!(d, 2.0 * f64::atanh(r), epsilon = 1e-12);
        }
    }

    #[test]
    fn distance_metric_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in models(2) {
            for _ in 0..500 {
                let x = random_point(&m, &mut rng);
                let y = random_point(&m, &mut rng);
                let z = random_point(&m, &mut rng);
                let dxy = m.distance_raw(&x, &y);
                assert_eq!(dxy, m.distance_raw(&y, &x));
                assert_eq!(m.distance_raw(&x, &x), 0.0);
                assert!(dxy > 0.0);
                assert!(dxy <= m.distance_raw(&x, &z) + m.distance_raw(&z, &y) + 1e-9);
            }
        }
    }

    #[test]
    fn distance_gradient_matches_log_map_and_differences() {
        // grad_x d(x, y) is the covector of −log_x(y)/d: −λ(x)² log_x(y)/d
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in models(3) {
            for _ in 0..100 {
                let x = random_point(&m, &mut rng);
                let y = random_point(&m, &mut rng);
                let mut grad = vec![0.0; 3];
                let d = m.distance_grad_raw(&x, &y, &mut grad);
                assert_abs_diff_eq!(d, m.distance_raw(&x, &y), epsilon = 1e-12 * (1.0 + d));
                let log = m.log_raw(&x, &y).unwrap();
                let lam2 = m.conformal_factor(&x).powi(2);
                for k in 0..3 {
                    let expected = -lam2 * log[k] / d;
                    assert_abs_diff_eq!(grad[k], expected, epsilon = 1e-8 * (1.0 + expected.abs()));
                    let eps = 1e-6;
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += eps;
                    xm[k] -= eps;
                    let fd = (m.distance_raw(&xp, &y) - m.distance_raw(&xm, &y)) / (2.0 * eps);
                    assert_abs_diff_eq!(grad[k], fd, epsilon = 1e-6 * (1.0 + fd.abs()));
                }
            }
            let mut grad = vec![1.0; 3];
            assert_eq!(m.distance_grad_raw(&[0.1, 0.2, 0.3], &[0.1, 0.2, 0.3], &mut grad), 0.0);
            assert_eq!(grad, vec![0.0; 3]);
        }
    }

    #[test]
    fn exp_examples() {
        let e = ManifoldModel::euclidean(2).unwrap();
        let v = TangentVector::new(ChartPoint::new(vec![1.0, 2.0]), vec![0.5, -1.0]);
        assert_eq!(e.exp_map(&v, 2.0).unwrap().coords, vec![2.0, 0.0]);

        let s = ManifoldModel::sphere(2).unwrap();
        // unit speed at the origin has chart components of norm 1/2
        let v = TangentVector::new(ChartPoint::origin(2), vec![0.3, 0.4]);
        let y = s.exp_map(&v, PI / 2.0).unwrap();
        assert_abs_diff_eq!(norm2(&y.coords).sqrt(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn exp_log_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for m in models(3) {
            let mut worst: f64 = 0.0;
            for _ in 0..100 {
                let x = random_point(&m, &mut rng);
                let y = random_point(&m, &mut rng);
                let v = m
                    .log_map(&ChartPoint::new(x.clone()), &ChartPoint::new(y.clone()))
                    .unwrap();
                let back = m.exp_map(&v, 1.0).unwrap();
                let err = back
                    .coords
                    .iter()
                    .zip(&y)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                worst = worst.max(err);
                let len = m.norm(&x, &v.components);
                assert!((len - m.distance_raw(&x, &y)).abs() < 1e-8);
            }
            assert!(worst <= 1e-8, "{}: {worst}", m.id());
        }
    }

    #[test]
    fn sphere_log_rejects_antipodes() {
        let s = ManifoldModel::sphere(2).unwrap();
        // the antipode of x sits at -x/|x|²
        let x = ChartPoint::new(vec![0.5, 0.0]);
        let y = ChartPoint::new(vec![-2.0, 0.0]);
        assert!(matches!(
            s.log_map(&x, &y),
            Err(ElasticaError::BeyondInjectivityRadius { .. })
        ));
    }

    #[test]
    fn nearest_on_segment_matches_dense_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in models(2) {
            for _ in 0..30 {
                let a = random_point(&m, &mut rng);
                let b: Vec<f64> = a.iter().map(|c| c * 0.7 + rng.gen_range(-0.2..0.2)).collect();
                let x: Vec<f64> = a.iter().map(|c| c * 0.8 + rng.gen_range(-0.3..0.3)).collect();
                let (_, _, d) = m.nearest_on_segment(&x, &a, &b);
                let mut best = f64::INFINITY;
                for k in 0..=20000 {
                    let p = m.geodesic_interpolate(&a, &b, k as f64 / 20000.0);
                    best = best.min(m.distance_raw(&x, &p));
                }
                assert!(d <= best + 1e-12);
                assert!(best - d < 1e-6, "{}: {d} vs {best}", m.id());
            }
        }
    }
}
