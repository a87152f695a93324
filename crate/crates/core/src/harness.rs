//! Weak-error ladders, convergence-rate fits and the one-step diagnostic.

use crate::euler::{EulerOptions, EulerScheme, PathBatch};
use crate::error::{Error, Result};
use crate::model::{halton_points, Model, ModelSpec};
use crate::oracle::Symbol;
use crate::rng::RngStream;
use crate::stats::{weighted_line_fit, McEstimate};
use crate::testfn::TestFunction;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Points whose error is below this many standard errors are left out of
/// the fit.
pub const NOISE_FLOOR: f64 = 5.0;

/// Margin below the predicted order that still counts as consistent.
pub const SLOPE_MARGIN: f64 = 0.15;

/// `kappa(alpha, beta)`: `beta / alpha` below `alpha`, 1 above.
pub fn predicted_kappa(alpha: f64, beta: f64) -> Result<f64> {
    crate::error::check_alpha(alpha)?;
    if !(beta > 0.0) || (beta.is_finite() && beta.fract() == 0.0) || beta == alpha {
        return Err(Error::Domain {
            name: "beta",
            value: beta,
            range: "(0, inf) without integers and alpha",
        });
    }
    Ok(if beta < alpha { beta / alpha } else { 1.0 })
}

/// What the ladder means are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Reference {
    /// Fourier oracle; constant coefficients and trigonometric `g` only.
    Oracle,
    /// Euler on a grid `refinement` times finer than the finest rung, driven
    /// by the same noise.
    FineGrid { refinement: usize },
}

impl Default for Reference {
    fn default() -> Self {
        Self::FineGrid { refinement: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderPoint {
    pub delta: f64,
    pub n_steps: usize,
    /// `E g(Y_T)` at this step size.
    pub estimate: McEstimate,
    /// `|estimate - reference|`
    pub error: f64,
    pub error_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ladder {
    pub horizon: f64,
    pub points: Vec<LadderPoint>,
    pub reference: Reference,
    /// Oracle value, or the fine-grid estimate.
    pub reference_value: f64,
    pub reference_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub deltas: Vec<f64>,
    pub errors: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// Whether each point cleared the noise floor.
    pub used: Vec<bool>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    /// `slope -+ 1.96 slope_stderr`
    pub slope_ci95: (f64, f64),
    pub predicted_kappa: f64,
    /// `slope >= predicted_kappa - SLOPE_MARGIN`
    pub pass: bool,
}

/// Step counts for `deltas`, each of which must be `horizon / n`.
pub fn ladder_steps(horizon: f64, deltas: &[f64]) -> Result<Vec<usize>> {
    if deltas.is_empty() {
        return Err(Error::InvalidParameter("empty ladder".into()));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(format!("ladder must decrease: {deltas:?}")));
    }
    deltas
        .iter()
        .map(|&d| {
            let n = (horizon / d).round();
            if !(n >= 1.0) || ((horizon / n - d).abs() > 1e-9 * d) {
                return Err(Error::InvalidParameter(format!(
                    "step {d} does not divide the horizon {horizon}"
                )));
            }
            Ok(n as usize)
        })
        .collect()
}

/// `E g(X_T)` for a constant-coefficient model without Lévy part and a
/// trigonometric `g`.
pub fn oracle_value(spec: &ModelSpec, g: &TestFunction) -> Result<f64> {
    let terms = g
        .trig_terms(spec.dim)
        .ok_or_else(|| Error::Unsupported("oracle reference needs a trigonometric test function".into()))?;
    let symbol = Symbol::from_model(spec)?;
    let mut total = 0.0;
    for t in terms {
        let psi = symbol.eval(&t.freq)?;
        let phase: f64 = t.freq.iter().zip(&spec.x0).map(|(a, b)| a * b).sum::<f64>() + t.phase;
        total += t.amp * (spec.horizon * psi.re).exp() * (spec.horizon * psi.im + phase).cos();
    }
    Ok(total)
}

/// Runs all rungs of the ladder on common random numbers and measures each
/// against the reference.
pub fn run_ladder(
    spec: &ModelSpec,
    g: &TestFunction,
    deltas: &[f64],
    n_paths: usize,
    reference: Reference,
    master_seed: u64,
) -> Result<Ladder> {
    g.check(spec.dim)?;
    let mut steps = ladder_steps(spec.horizon, deltas)?;
    let oracle = match reference {
        Reference::Oracle => Some(oracle_value(spec, g)?),
        Reference::FineGrid { refinement } => {
            if refinement < 8 {
                return Err(Error::InvalidParameter(format!(
                    "fine-grid refinement {refinement} below 8"
                )));
            }
            steps.push(steps.last().expect("non-empty ladder") * refinement);
            None
        }
    };
    let finest = *steps.iter().max().expect("non-empty ladder");
    let n_fine = steps.iter().fold(1usize, |acc, &n| lcm(acc, n));
    if n_fine != finest {
        return Err(Error::InvalidParameter(format!(
            "every step count must divide the finest one: {steps:?}"
        )));
    }
    let scheme = EulerScheme::new(
        Model::new(spec.clone())?,
        spec.horizon / finest as f64,
        EulerOptions::default(),
    )?;
    let values = scheme.simulate_coupled(spec.horizon, &steps, n_paths, master_seed, |y| g.value(y))?;

    let mut points = Vec::with_capacity(deltas.len());
    let (reference_value, reference_steps) = match oracle {
        Some(v) => (v, None),
        None => (McEstimate::from_samples(&values[deltas.len()]).mean, Some(finest)),
    };
    for (l, &delta) in deltas.iter().enumerate() {
        let estimate = McEstimate::from_samples(&values[l]);
        let (error, error_stderr) = match oracle {
            Some(v) => ((estimate.mean - v).abs(), estimate.stderr),
            None => {
                let diffs: Vec<f64> = values[l]
                    .iter()
                    .zip(&values[deltas.len()])
                    .map(|(a, b)| a - b)
                    .collect();
                let e = McEstimate::from_samples(&diffs);
                (e.mean.abs(), e.stderr)
            }
        };
        points.push(LadderPoint {
            delta,
            n_steps: steps[l],
            estimate,
            error,
            error_stderr,
        });
    }
    Ok(Ladder {
        horizon: spec.horizon,
        points,
        reference,
        reference_value,
        reference_steps,
    })
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// Weighted least squares of `log error` on `log delta` over the points
/// above the noise floor. Weights are the inverse squared relative errors.
pub fn fit_rate(deltas: &[f64], errors: &[f64], stderrs: &[f64], predicted_kappa: f64) -> Result<RateFit> {
    if deltas.len() != errors.len() || deltas.len() != stderrs.len() {
        return Err(Error::InvalidParameter("ladder columns differ in length".into()));
    }
    let used: Vec<bool> = errors
        .iter()
        .zip(stderrs)
        .map(|(e, s)| *e > 0.0 && *e >= NOISE_FLOOR * s)
        .collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for i in 0..deltas.len() {
        if used[i] {
            xs.push(deltas[i].ln());
            ys.push(errors[i].ln());
            let rel = stderrs[i] / errors[i];
            ws.push(1.0 / rel.powi(2).max(1e-12));
        }
    }
    if xs.len() < 2 {
        return Err(Error::Inconclusive(format!(
            "{} of {} ladder points above {NOISE_FLOOR} standard errors",
            xs.len(),
            deltas.len()
        )));
    }
    let fit = weighted_line_fit(&xs, &ys, &ws)
        .ok_or_else(|| Error::Inconclusive("degenerate ladder".into()))?;
    Ok(RateFit {
        deltas: deltas.to_vec(),
        errors: errors.to_vec(),
        stderrs: stderrs.to_vec(),
        used,
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        slope_stderr: fit.slope_stderr,
        slope_ci95: (fit.slope - 1.96 * fit.slope_stderr, fit.slope + 1.96 * fit.slope_stderr),
        predicted_kappa,
        pass: fit.slope >= predicted_kappa - SLOPE_MARGIN,
    })
}

impl Ladder {
    pub fn fit(&self, predicted_kappa: f64) -> Result<RateFit> {
        let deltas: Vec<f64> = self.points.iter().map(|p| p.delta).collect();
        let errors: Vec<f64> = self.points.iter().map(|p| p.error).collect();
        let stderrs: Vec<f64> = self.points.iter().map(|p| p.error_stderr).collect();
        fit_rate(&deltas, &errors, &stderrs, predicted_kappa)
    }
}

/// Ladder plus fit against `kappa(alpha, beta)` of the model.
pub fn weak_error_study(
    spec: &ModelSpec,
    g: &TestFunction,
    deltas: &[f64],
    n_paths: usize,
    reference: Reference,
    master_seed: u64,
) -> Result<(Ladder, RateFit)> {
    let kappa = predicted_kappa(spec.alpha, spec.beta())?;
    let ladder = run_ladder(spec, g, deltas, n_paths, reference, master_seed)?;
    let fit = ladder.fit(kappa)?;
    Ok((ladder, fit))
}

/// Default start points of the one-step check: `x0` and seven Halton points
/// in the unit box around it.
pub fn default_probes(spec: &ModelSpec) -> Vec<Vec<f64>> {
    let mut probes = vec![spec.x0.clone()];
    for p in halton_points(spec.dim, 7, 1.0) {
        probes.push(p.iter().zip(&spec.x0).map(|(a, b)| a + b).collect());
    }
    probes
}

/// `sup_x |E f(Y_delta) - f(x)|` over `probes` for one Euler step from `x`,
/// with the standard error at the maximizing probe, for every `delta`.
pub fn one_step_errors(
    spec: &ModelSpec,
    f: &TestFunction,
    deltas: &[f64],
    probes: &[Vec<f64>],
    n_paths: usize,
    master_seed: u64,
) -> Result<Vec<(f64, f64)>> {
    f.check(spec.dim)?;
    if n_paths == 0 || probes.is_empty() {
        return Err(Error::InvalidParameter("need paths and probe points".into()));
    }
    if deltas.iter().any(|&d| !(d > 0.0 && d <= spec.horizon)) {
        return Err(Error::InvalidParameter(format!("steps must lie in (0, T]: {deltas:?}")));
    }
    let model = Model::new(spec.clone())?;
    let mut out = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let scheme = EulerScheme::new(model.clone(), delta, EulerOptions::default())?;
        let mut worst = (0.0f64, 0.0f64);
        for x in probes {
            let fx = f.value(x);
            let samples: Vec<Result<f64>> = (0..n_paths)
                .into_par_iter()
                .map(|p| {
                    let mut rng = RngStream::new(master_seed, p as u64);
                    Ok(f.value(&scheme.step(x, delta, &mut rng)?) - fx)
                })
                .collect();
            let samples = samples.into_iter().collect::<Result<Vec<f64>>>()?;
            let e = McEstimate::from_samples(&samples);
            if e.mean.abs() > worst.0 {
                worst = (e.mean.abs(), e.stderr);
            }
        }
        out.push(worst);
    }
    Ok(out)
}

/// Decay exponent of the one-step error, compared with `kappa(alpha, beta)`
/// for the smoothness `beta` of `f`.
pub fn one_step_check(
    spec: &ModelSpec,
    f: &TestFunction,
    deltas: &[f64],
    probes: &[Vec<f64>],
    n_paths: usize,
    master_seed: u64,
) -> Result<RateFit> {
    let kappa = predicted_kappa(spec.alpha, f.smoothness())?;
    let errs = one_step_errors(spec, f, deltas, probes, n_paths, master_seed)?;
    let errors: Vec<f64> = errs.iter().map(|e| e.0).collect();
    let stderrs: Vec<f64> = errs.iter().map(|e| e.1).collect();
    fit_rate(deltas, &errors, &stderrs, kappa)
}

/// Path average of the left-endpoint sum `sum_i f(Y_{t_i}) (t_{i+1} - t_i)`.
pub fn estimate_functional(batch: &PathBatch, f: &TestFunction) -> Result<McEstimate> {
    if batch.n_paths() == 0 {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    f.check(batch.dim())?;
    let grid = batch.grid();
    let sums: Vec<f64> = (0..batch.n_paths())
        .map(|p| {
            (0..grid.n_steps())
                .map(|i| f.value(batch.state(p, i)) * grid.step(i))
                .sum()
        })
        .collect();
    Ok(McEstimate::from_samples(&sums))
}

/// Ladder table: `delta,n_steps,estimate,estimate_stderr,error,stderr,n_paths,used`.
pub fn write_ladder_csv<W: Write>(ladder: &Ladder, fit: Option<&RateFit>, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "delta",
        "n_steps",
        "estimate",
        "estimate_stderr",
        "error",
        "stderr",
        "n_paths",
        "used",
    ])?;
    for (i, p) in ladder.points.iter().enumerate() {
        let used = fit.map(|f| f.used[i]).unwrap_or(false);
        out.write_record([
            p.delta.to_string(),
            p.n_steps.to_string(),
            p.estimate.mean.to_string(),
            p.estimate.stderr.to_string(),
            p.error.to_string(),
            p.error_stderr.to_string(),
            p.estimate.n_paths.to_string(),
            used.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One-step table: `delta,error,stderr,n_paths,used`.
pub fn write_fit_csv<W: Write>(fit: &RateFit, n_paths: usize, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["delta", "error", "stderr", "n_paths", "used"])?;
    for i in 0..fit.deltas.len() {
        out.write_record([
            fit.deltas[i].to_string(),
            fit.errors[i].to_string(),
            fit.stderrs[i].to_string(),
            n_paths.to_string(),
            fit.used[i].to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// JSON summary of a study. Carries the resolved configuration and no
/// timestamps, so equal inputs give equal bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub schema_version: u32,
    pub command: String,
    pub config: serde_json::Value,
    pub predicted_kappa: f64,
    pub verdict: Verdict,
    pub slope: Option<f64>,
    pub slope_ci95: Option<(f64, f64)>,
    pub pass: Option<bool>,
    /// The test function is rougher than the rate statement assumes.
    pub exploratory: bool,
    pub message: Option<String>,
    pub fit: Option<RateFit>,
    pub ladder: Option<Ladder>,
}

impl StudyReport {
    /// Report for a finished fit; an [`Error::Inconclusive`] fit becomes an
    /// inconclusive verdict, any other error is returned.
    pub fn new(
        command: &str,
        config: serde_json::Value,
        predicted_kappa: f64,
        exploratory: bool,
        ladder: Option<Ladder>,
        fit: Result<RateFit>,
    ) -> Result<Self> {
        let (verdict, fit, message) = match fit {
            Ok(f) => (if f.pass { Verdict::Pass } else { Verdict::Fail }, Some(f), None),
            Err(Error::Inconclusive(m)) => (Verdict::Inconclusive, None, Some(m)),
            Err(e) => return Err(e),
        };
        Ok(Self {
            schema_version: REPORT_SCHEMA_VERSION,
            command: command.to_string(),
            config,
            predicted_kappa,
            verdict,
            slope: fit.as_ref().map(|f| f.slope),
            slope_ci95: fit.as_ref().map(|f| f.slope_ci95),
            pass: fit.as_ref().map(|f| f.pass),
            exploratory,
            message,
            fit,
            ladder,
        })
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }
}
