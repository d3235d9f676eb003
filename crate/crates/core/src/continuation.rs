//! p-continuation: solve for `p = 2, 4, 8, …` with warm starts, track `K_p`
//! and `λ_p`, and estimate the limit `K = lim K_p`.
//!
//! The estimate fits `K_p ≈ K (1 − a/p)` to the last three records. When the
//! fit is poor (relative residual above 10 %) or unavailable, the largest
//! nodal curvature of the final curve is used instead; either way the
//! estimate never drops below the last computed `K_p`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::curve::DiscreteCurve;
use crate::error::{ElasticaError, Result};
use crate::functionals::{kinf_energy, PenaltySpec, PenaltyWindow};
use crate::manifold::ManifoldModel;
use crate::optimizer::{initial_curve, solve_p, BoundaryConditions, PSolveResult, SolverConfig};

/// Default schedule `p = 2, 4, …, 64`.
pub const DEFAULT_SCHEDULE: [f64; 6] = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0];

/// Slack of the monotonicity check `K_{p_i} ≤ K_{p_{i+1}} + 1e−8`.
pub const MONOTONE_SLACK: f64 = 1e-8;

/// Largest relative residual accepted from the `K (1 − a/p)` fit.
pub const EXTRAPOLATION_MAX_RESIDUAL: f64 = 0.1;

/// One solved exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PRecord {
    pub p: f64,
    #[serde(rename = "K_p")]
    pub k_p: f64,
    pub lambda_p: Option<f64>,
    pub penalty_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub geodesic: bool,
    /// Largest node-to-node distance to the tracked reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_distance: Option<f64>,
}

impl PRecord {
    fn from_result(result: &PSolveResult, reference: Option<&DiscreteCurve>) -> Self {
        PRecord {
            p: result.p,
            k_p: result.k_p,
            lambda_p: result.lambda_p,
            penalty_value: result.penalty_value,
            iterations: result.iterations,
            converged: result.converged,
            geodesic: result.geodesic,
            reference_distance: reference.map(|r| max_node_distance(&result.curve, r)),
        }
    }
}

/// How `K_estimate` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KEstimateMethod {
    /// Intercept of the `K (1 − a/p)` fit.
    Extrapolated,
    /// Largest nodal curvature of the final curve.
    FinalCurvature,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationReport {
    /// Sorted by increasing `p`.
    pub records: Vec<PRecord>,
    #[serde(rename = "K_estimate")]
    pub k_estimate: f64,
    pub estimate_method: KEstimateMethod,
    /// Intercept of the tail fit, when the fit was possible.
    #[serde(rename = "K_extrapolated")]
    pub k_extrapolated: Option<f64>,
    /// Relative residual of the tail fit.
    pub extrapolation_residual: Option<f64>,
    /// `max κ` of the final curve.
    #[serde(rename = "K_inf_final")]
    pub kinf_final: f64,
    pub monotone_ok: bool,
    /// `false` when a solve failed and the remaining exponents were skipped.
    pub complete: bool,
    pub failure: Option<String>,
    pub sigma: f64,
    /// For tracking runs: the reference distance did not increase over the
    /// last three records.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracking_ok: Option<bool>,
    #[serde(skip)]
    pub final_result: Option<PSolveResult>,
}

impl ContinuationReport {
    pub fn final_curve(&self) -> Option<&DiscreteCurve> {
        self.final_result.as_ref().map(|r| &r.curve)
    }
}

fn check_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(ElasticaError::InvalidConfig("p schedule is empty".into()));
    }
    if !(schedule[0] >= 2.0) {
        return Err(ElasticaError::InvalidConfig(format!(
            "p schedule must start at p >= 2, got {}",
            schedule[0]
        )));
    }
    if schedule.iter().any(|p| !p.is_finite()) || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ElasticaError::InvalidConfig(
            "p schedule must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// `K_{p_i} ≤ K_{p_{i+1}} + 1e−8` for all consecutive records.
pub fn is_monotone(records: &[PRecord]) -> bool {
    records
        .windows(2)
        .all(|w| w[0].k_p <= w[1].k_p + MONOTONE_SLACK)
}

/// Least-squares fit of `K_p = K − b/p` on the last three records; returns
/// `(K, relative residual)` with the residual measured against the spread
/// of the fitted values.
pub fn extrapolate_k(records: &[PRecord]) -> Option<(f64, f64)> {
    if records.len() < 3 {
        return None;
    }
    let tail = &records[records.len() - 3..];
    let xs: Vec<f64> = tail.iter().map(|r| 1.0 / r.p).collect();
    let ys: Vec<f64> = tail.iter().map(|r| r.k_p).collect();
    let mx = xs.iter().sum::<f64>() / 3.0;
    let my = ys.iter().sum::<f64>() / 3.0;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let residual = if syy > 0.0 { (rss / syy).sqrt() } else { 0.0 };
    intercept.is_finite().then_some((intercept, residual))
}

struct Estimate {
    value: f64,
    method: KEstimateMethod,
    extrapolated: Option<f64>,
    residual: Option<f64>,
    kinf: f64,
}

fn estimate_k(records: &[PRecord], final_curve: Option<&DiscreteCurve>) -> Estimate {
    let kinf = final_curve.map(kinf_energy).unwrap_or(0.0);
    let last = records.last().map(|r| r.k_p).unwrap_or(0.0);
    let fit = extrapolate_k(records);
    let geodesic = records.last().is_some_and(|r| r.geodesic);
    let (value, method) = match fit {
        // K_p must not decrease towards the limit, so a negative `a` is a
        // failed fit as well
        Some((k, res)) if !geodesic && res <= EXTRAPOLATION_MAX_RESIDUAL && k >= last => {
            (k, KEstimateMethod::Extrapolated)
        }
        _ => (kinf, KEstimateMethod::FinalCurvature),
    };
    Estimate {
        value: value.max(last),
        method,
        extrapolated: fit.map(|f| f.0),
        residual: fit.map(|f| f.1),
        kinf,
    }
}

/// Largest distance between corresponding nodes of two curves.
pub fn max_node_distance(a: &DiscreteCurve, b: &DiscreteCurve) -> f64 {
    let model = a.model();
    (0..a.num_nodes().min(b.num_nodes()))
        .map(|i| model.distance_raw(a.node(i), b.node(i)))
        .fold(0.0, f64::max)
}

/// Heuristic penalty weight `σ = 10 K² L` (the theory only asks for "σ
/// sufficiently large"); falls back to `10 L` for `K = 0`.
pub fn default_sigma(k_estimate: f64, length: f64) -> f64 {
    let k = if k_estimate > 0.0 { k_estimate } else { 1.0 };
    10.0 * k * k * length
}

fn run(
    start: DiscreteCurve,
    bc: &BoundaryConditions,
    spec: &PenaltySpec,
    config: &SolverConfig,
    schedule: &[f64],
    observer: &mut dyn FnMut(&PRecord),
) -> Result<ContinuationReport> {
    config.validate()?;
    check_schedule(schedule)?;
    let reference = spec.reference().filter(|_| spec.sigma() > 0.0);
    let warm = SolverConfig {
        perturbation: 0.0,
        ..*config
    };
    let mut records = Vec::with_capacity(schedule.len());
    let mut current = start;
    let mut last: Option<PSolveResult> = None;
    let mut failure = None;
    for (idx, &p) in schedule.iter().enumerate() {
        let cfg = if idx == 0 { config } else { &warm };
        match solve_p(&current, bc, p, spec, cfg) {
            Ok(result) => {
                let record = PRecord::from_result(&result, reference);
                log::info!(
                    "p = {p}: K_p = {:.10}, iterations = {}, converged = {}",
                    record.k_p,
                    record.iterations,
                    record.converged
                );
                observer(&record);
                records.push(record);
                current = result.curve.clone();
                last = Some(result);
            }
            Err(e) => {
                log::warn!("p = {p}: solve failed: {e}");
                failure = Some(format!("p = {p}: {e}"));
                break;
            }
        }
    }
    let estimate = estimate_k(&records, last.as_ref().map(|r| &r.curve));
    let tracking_ok = reference.map(|_| {
        let d: Vec<f64> = records.iter().filter_map(|r| r.reference_distance).collect();
        d.len() >= 3 && d[d.len() - 3..].windows(2).all(|w| w[1] <= w[0] + 1e-12)
    });
    Ok(ContinuationReport {
        monotone_ok: is_monotone(&records),
        complete: failure.is_none(),
        failure,
        records,
        k_estimate: estimate.value,
        estimate_method: estimate.method,
        k_extrapolated: estimate.extrapolated,
        extrapolation_residual: estimate.residual,
        kinf_final: estimate.kinf,
        sigma: spec.sigma(),
        tracking_ok,
        final_result: last,
    })
}

/// Runs the schedule from the default seed curve with `segments` segments.
pub fn run_schedule(
    bc: &BoundaryConditions,
    model: &ManifoldModel,
    segments: usize,
    spec: &PenaltySpec,
    config: &SolverConfig,
    p_schedule: &[f64],
) -> Result<ContinuationReport> {
    run_schedule_with(bc, model, segments, spec, config, p_schedule, &mut |_| {})
}

/// [`run_schedule`] calling `observer` after every completed exponent.
pub fn run_schedule_with(
    bc: &BoundaryConditions,
    model: &ManifoldModel,
    segments: usize,
    spec: &PenaltySpec,
    config: &SolverConfig,
    p_schedule: &[f64],
    observer: &mut dyn FnMut(&PRecord),
) -> Result<ContinuationReport> {
    let start = initial_curve(bc, model, segments)?;
    run(start, bc, spec, config, p_schedule, observer)
}

/// Penalised continuation towards `reference`, which must satisfy `bc`.
/// Each record carries the largest node distance to the reference.
pub fn track_reference(
    bc: &BoundaryConditions,
    model: &ManifoldModel,
    reference: &DiscreteCurve,
    sigma: f64,
    window: PenaltyWindow,
    config: &SolverConfig,
    p_schedule: &[f64],
) -> Result<ContinuationReport> {
    if !(sigma > 0.0) {
        return Err(ElasticaError::InvalidPenalty(format!(
            "reference tracking needs sigma > 0, got {sigma}"
        )));
    }
    check_reference(bc, model, reference)?;
    let spec = PenaltySpec::new(sigma, Some(reference.clone()), window)?;
    let start = initial_curve(bc, model, reference.segments())?;
    run(start, bc, &spec, config, p_schedule, &mut |_| {})
}

fn check_reference(bc: &BoundaryConditions, model: &ManifoldModel, reference: &DiscreteCurve) -> Result<()> {
    if reference.model() != model {
        return Err(ElasticaError::InvalidBoundary(
            "reference curve lives on a different model".into(),
        ));
    }
    let l = bc.length();
    if (reference.target_length() - l).abs() > 1e-12 * l {
        return Err(ElasticaError::LengthMismatch {
            actual: reference.target_length(),
            target: l,
        });
    }
    let last = reference.segments();
    for (name, node, x) in [("x1", 0, bc.x1()), ("x2", last, bc.x2())] {
        let gap = model.distance_raw(reference.node(node), x);
        if gap > 1e-9 * (1.0 + l) {
            return Err(ElasticaError::InvalidBoundary(format!(
                "reference misses {name} by {gap:e}"
            )));
        }
    }
    Ok(())
}

/// Writes the record table `p, K_p, lambda_p, penalty, iters, converged`.
pub fn write_records_csv<W: Write>(records: &[PRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| ElasticaError::Io(e.to_string());
    w.write_record(["p", "K_p", "lambda_p", "penalty", "iters", "converged"])
        .map_err(io)?;
    for r in records {
        w.write_record([
            r.p.to_string(),
            format!("{:.17e}", r.k_p),
            r.lambda_p.map(|l| format!("{l:.17e}")).unwrap_or_default(),
            format!("{:.17e}", r.penalty_value),
            r.iterations.to_string(),
            r.converged.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| ElasticaError::Io(e.to_string()))?;
    Ok(())
}
