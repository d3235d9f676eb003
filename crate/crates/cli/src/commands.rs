use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::Serialize;

use elastica_core::continuation::{
    default_sigma, run_schedule_with, track_reference, write_records_csv, ContinuationReport, PRecord,
};
use elastica_core::curve::DiscreteCurve;
use elastica_core::functionals::{kinf_energy, kp_energy, PenaltySpec, PenaltyWindow};
use elastica_core::io::{read_curve_csv, write_curve_csv};
use elastica_core::verifier::{arc_chain_oracle, verify_curve, ArcChainSolution, VerificationReport, VerifyOptions};
use elastica_core::{ElasticaError, ManifoldModel};

use crate::scenario::{LoadedScenario, Thresholds};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success = 0,
    Partial = 2,
    Failure = 1,
}

impl Outcome {
    pub fn code(self) -> i32 {
        self as i32
    }

    /// Failure dominates partial, partial dominates success.
    pub fn worst(self, other: Outcome) -> Outcome {
        let rank = |o: Outcome| match o {
            Outcome::Success => 0,
            Outcome::Partial => 1,
            Outcome::Failure => 2,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_curve(path: &Path, curve: &DiscreteCurve) -> Result<()> {
    write_curve_csv(curve, create(path)?).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Serialize)]
struct SolveReport<'a> {
    scenario: &'a str,
    model: &'static str,
    dimension: usize,
    #[serde(rename = "N")]
    n: usize,
    p_final: Option<f64>,
    /// `σ` was chosen by the `10 K² L` rule rather than given.
    sigma_heuristic: bool,
    #[serde(flatten)]
    continuation: &'a ContinuationReport,
    #[serde(flatten)]
    verification: Option<VerificationReport>,
    verification_note: Option<String>,
}

/// Summary of one solve, used by mesh studies.
#[derive(Debug, Clone)]
pub struct SolveSummary {
    pub k_estimate: f64,
    pub lambda_final: Option<f64>,
    pub el1: Option<f64>,
    pub el2: Option<f64>,
    pub outcome: Outcome,
}

fn progress_line(name: &str, n: usize, r: &PRecord) -> String {
    let lambda = r
        .lambda_p
        .map(|l| format!("{l:.6}"))
        .unwrap_or_else(|| "-".into());
    format!(
        "[{name} N={n}] p={} K_p={:.10} lambda_p={lambda} iters={} converged={}",
        r.p, r.k_p, r.iterations, r.converged
    )
}

/// Runs the continuation for `sc` with `n` segments and writes the solve
/// artefacts into `dir`.
pub fn solve_into(sc: &LoadedScenario, n: usize, dir: &Path) -> Result<SolveSummary> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let name = sc.name();
    let schedule = &sc.scenario.p_schedule;
    let window = sc.scenario.window.unwrap_or(PenaltyWindow::FullImage);
    let mut sigma_heuristic = false;
    let report = match sc.reference_path() {
        Some(path) => {
            let file = File::open(&path).with_context(|| format!("cannot open reference {}", path.display()))?;
            let reference = read_curve_csv(sc.model, file)
                .with_context(|| format!("reading reference {}", path.display()))?;
            let sigma = match sc.scenario.sigma {
                Some(s) if s > 0.0 => s,
                _ => {
                    sigma_heuristic = true;
                    default_sigma(kinf_energy(&reference), sc.bc.length())
                }
            };
            let report = track_reference(&sc.bc, &sc.model, &reference, sigma, window, &sc.solver, schedule)?;
            for r in &report.records {
                println!("{}", progress_line(name, reference.segments(), r));
            }
            report
        }
        None => {
            let spec = PenaltySpec::new(0.0, None, window)?;
            run_schedule_with(&sc.bc, &sc.model, n, &spec, &sc.solver, schedule, &mut |r| {
                println!("{}", progress_line(name, n, r))
            })?
        }
    };
    write_records_csv(&report.records, create(&dir.join("records.csv"))?)?;
    let last = report.records.last();
    let (verification, note) = match (report.final_curve(), last) {
        (Some(curve), Some(rec)) if rec.geodesic => {
            write_curve(&dir.join("curve_final.csv"), curve)?;
            (None, Some("geodesic solution, verification skipped".to_string()))
        }
        (Some(curve), Some(rec)) => {
            write_curve(&dir.join("curve_final.csv"), curve)?;
            match verify_curve(curve, rec.p, None, &sc.verify) {
                Ok(v) => (Some(v), None),
                Err(ElasticaError::GeodesicDegenerate(why)) => {
                    (None, Some(format!("geodesic solution, verification skipped ({why})")))
                }
                Err(e) => (None, Some(format!("verification failed: {e}"))),
            }
        }
        _ => (None, Some("no exponent was solved".to_string())),
    };
    let out = SolveReport {
        scenario: name,
        model: sc.model.id(),
        dimension: sc.model.dim(),
        n: report.final_curve().map_or(n, |c| c.segments()),
        p_final: last.map(|r| r.p),
        sigma_heuristic,
        continuation: &report,
        verification: verification.clone(),
        verification_note: note,
    };
    write_json(&dir.join("report.json"), &out)?;
    if let Some(msg) = &report.failure {
        eprintln!("[{name}] schedule stopped early: {msg}");
    }
    Ok(SolveSummary {
        k_estimate: report.k_estimate,
        lambda_final: last.and_then(|r| r.lambda_p),
        el1: verification.as_ref().map(|v| v.el1_residual_rel),
        el2: verification.as_ref().map(|v| v.el2_residual_rel),
        outcome: if report.complete { Outcome::Success } else { Outcome::Partial },
    })
}

/// `solve`: one run at the scenario's `N`, or one run per mesh size with a
/// `mesh.csv` summary.
pub fn cmd_solve(sc: &LoadedScenario, root: Option<&Path>, mesh: Option<&[usize]>) -> Result<Outcome> {
    let dir = sc.output_dir(root);
    let Some(sizes) = mesh else {
        return Ok(solve_into(sc, sc.scenario.n, &dir)?.outcome);
    };
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut outcome = Outcome::Success;
    let mut table = csv_writer(&dir.join("mesh.csv"))?;
    table.write_record(["N", "K_estimate", "lambda_final", "el1_residual_rel", "el2_residual_rel"])?;
    for &n in sizes {
        let s = solve_into(sc, n, &dir.join(format!("N{n}")))?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        table.write_record([n.to_string(), s.k_estimate.to_string(), opt(s.lambda_final), opt(s.el1), opt(s.el2)])?;
        outcome = outcome.worst(s.outcome);
    }
    table.flush()?;
    Ok(outcome)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

#[derive(Debug, Serialize)]
pub struct VerifyOutput {
    pub curve: PathBuf,
    pub model: &'static str,
    pub p: f64,
    #[serde(rename = "K_p")]
    pub k_p: f64,
    pub geodesic: bool,
    #[serde(flatten)]
    pub report: Option<VerificationReport>,
    pub thresholds: Thresholds,
    pub passed: bool,
}

/// `verify`: recompute the residuals of a curve CSV; succeeds iff both are
/// below the thresholds.
pub fn cmd_verify(
    curve_path: &Path,
    model: ManifoldModel,
    p: f64,
    lambda: Option<f64>,
    thresholds: Thresholds,
    out_dir: &Path,
) -> Result<Outcome> {
    if !(p >= 2.0) {
        return Err(anyhow!("--p must be at least 2, got {p}"));
    }
    let file = File::open(curve_path).with_context(|| format!("cannot open {}", curve_path.display()))?;
    let curve = read_curve_csv(model, file).with_context(|| format!("reading {}", curve_path.display()))?;
    let k_p = kp_energy(&curve, p)?;
    let (report, geodesic) = match verify_curve(&curve, p, lambda, &VerifyOptions::default()) {
        Ok(r) => (Some(r), false),
        Err(ElasticaError::GeodesicDegenerate(_)) => (None, true),
        Err(e) => return Err(e.into()),
    };
    let passed = report
        .as_ref()
        .map_or(true, |r| r.el1_residual_rel <= thresholds.el1 && r.el2_residual_rel <= thresholds.el2);
    if let Some(r) = &report {
        println!(
            "K_used={:.10} lambda={:.6} el1={:.3e} el2={:.3e} near_K={:.3} -> {}",
            r.k_used,
            r.lambda_used,
            r.el1_residual_rel,
            r.el2_residual_rel,
            r.fractions.near_k,
            if passed { "pass" } else { "fail" }
        );
    } else {
        println!("geodesic curve (K_p = {k_p:e}); residuals vanish");
    }
    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    write_json(
        &out_dir.join("verify.json"),
        &VerifyOutput {
            curve: curve_path.to_path_buf(),
            model: model.id(),
            p,
            k_p,
            geodesic,
            report,
            thresholds,
            passed,
        },
    )?;
    Ok(if passed { Outcome::Success } else { Outcome::Failure })
}

/// Arc chains with more pieces are not searched.
pub const ORACLE_MAX_PIECES: usize = 3;

/// `oracle`: planar arc-chain ground truth.
pub fn cmd_oracle(sc: &LoadedScenario, root: Option<&Path>) -> Result<Outcome> {
    let planar = sc
        .bc
        .to_planar(&sc.model)
        .ok_or_else(|| anyhow!("oracle requires euclidean n=2"))?;
    let solution: ArcChainSolution = arc_chain_oracle(&planar, ORACLE_MAX_PIECES)?;
    let dir = sc.output_dir(root);
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    write_json(&dir.join("oracle.json"), &solution)?;
    let n = sc.scenario.n;
    let flat: Vec<f64> = solution.sample(n).into_iter().flatten().collect();
    let curve = DiscreteCurve::from_flat(sc.model, flat, solution.total_length())?;
    write_curve(&dir.join("oracle_curve.csv"), &curve)?;
    println!(
        "[{}] oracle K_max={:.12} pieces={}",
        sc.name(),
        solution.k_max,
        solution.pieces.len()
    );
    Ok(Outcome::Success)
}
