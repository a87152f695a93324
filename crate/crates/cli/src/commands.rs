use crate::config::{self, ExperimentConfig, ModelConfig, OracleMode, ReportFormat};
use crate::{CliError, Law, SampleArgs, StudyArgs};
use rayon::prelude::*;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use sweuler::euler::EulerScheme;
use sweuler::harness::{
    self, fit_rate, one_step_errors, predicted_kappa, run_ladder, StudyReport, Verdict, NOISE_FLOOR,
    REPORT_SCHEMA_VERSION,
};
use sweuler::linalg;
use sweuler::model::ModelSpec;
use sweuler::oracle::{Symbol, SymbolGrid};
use sweuler::stable::{self, AnisotropicSampler, SmallJumps};
use sweuler::stats::{ecf_vector, McEstimate};
use sweuler::{Error, RngStream, SphereFunction, StableLaw, TestFunction};

/// Order-preserving parallel map over `0..n`.
fn par_map<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    (0..n).into_par_iter().map(f).collect()
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn as_config(e: Error) -> CliError {
    CliError::Config(e.to_string())
}

pub fn sample(a: &SampleArgs) -> Result<(), CliError> {
    if a.n == 0 {
        return Err(CliError::Config("--n must be >= 1".into()));
    }
    if !(a.dt > 0.0) {
        return Err(CliError::Config(format!("--dt = {} must be positive", a.dt)));
    }
    let d = a.dim;
    let mut law = StableLaw::isotropic(a.alpha, d, stable::default_cut_eps(a.dt, a.alpha));
    law.validate().map_err(as_config)?;
    let modulation = match &a.h_slope {
        Some(s) if a.law == Law::Truncated => {
            if s.len() != d {
                return Err(CliError::Config(format!("--h-slope needs {d} entries")));
            }
            SphereFunction::Affine {
                base: 1.0,
                slope: s.clone(),
            }
        }
        Some(_) => return Err(CliError::Config("--h-slope applies to --law truncated".into())),
        None => SphereFunction::one(),
    };

    let rows: Vec<Result<Vec<f64>, Error>> = match a.law {
        Law::Isotropic => {
            let scale = a.dt.powf(1.0 / a.alpha);
            par_map(a.n, |i| {
                let mut rng = RngStream::new(a.seed, i as u64);
                let mut v = stable::isotropic_stable_vector(a.alpha, d, &mut rng)?;
                v.iter_mut().for_each(|x| *x *= scale);
                Ok(v)
            })
        }
        Law::Truncated => {
            if a.alpha >= 2.0 {
                return Err(CliError::Config("--law truncated needs alpha < 2".into()));
            }
            law.small_jumps = SmallJumps::Gaussian;
            let sampler = AnisotropicSampler::new(law.clone(), modulation.clone()).map_err(as_config)?;
            let id = linalg::identity(d);
            let regime = sweuler::AlphaRegime::of(a.alpha);
            par_map(a.n, |i| {
                let mut rng = RngStream::new(a.seed, i as u64);
                let inc = sampler.increment(&id, a.dt, regime, &mut rng)?;
                Ok(inc.jump_sum.iter().zip(&inc.compensator).map(|(j, c)| j + c).collect())
            })
        }
    };
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut w = csv::Writer::from_writer(create(&a.out)?);
    let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    w.write_record(&header).map_err(Error::from)?;
    for r in &rows {
        w.write_record(r.iter().map(|v| v.to_string())).map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;

    // Empirical characteristic function at 8 probe frequencies.
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let symbol = Symbol {
        alpha: a.alpha,
        dim: d,
        density: SphereFunction::Pushforward {
            map: linalg::identity(d),
            modulation: Box::new(modulation),
            alpha: a.alpha,
        },
        drift: vec![0.0; d],
        b: vec![0.0; d * d],
    };
    let bound = 3.0 / (a.n as f64).sqrt();
    let cf_path = a.cf_out.clone().unwrap_or_else(|| {
        let stem = a.out.file_stem().and_then(|s| s.to_str()).unwrap_or("samples");
        a.out.with_file_name(format!("{stem}_cf.csv"))
    });
    let mut cf = csv::Writer::from_writer(create(&cf_path)?);
    let mut head: Vec<String> = (1..=d).map(|i| format!("xi{i}")).collect();
    head.extend(
        ["ecf_re", "ecf_im", "cf_re", "cf_im", "abs_err", "bound", "within"]
            .iter()
            .map(|s| s.to_string()),
    );
    cf.write_record(&head).map_err(Error::from)?;
    let mut worst = 0.0f64;
    for r in [0.25, 0.5, 1.0, 2.0] {
        for dir in 0..2 {
            let mut xi = vec![0.0; d];
            if d == 1 {
                xi[0] = if dir == 0 { r } else { -r };
            } else {
                let s = r / 2f64.sqrt();
                xi[0] = if dir == 0 { r } else { s };
                if dir == 1 {
                    xi[1] = s;
                }
            }
            let (re, im) = ecf_vector(&flat, d, &xi);
            let (ere, eim) = match a.law {
                Law::Isotropic => ((-a.dt * linalg::norm(&xi).powf(a.alpha)).exp(), 0.0),
                Law::Truncated => {
                    let psi = symbol.eval(&xi)?;
                    let m = (a.dt * psi.re).exp();
                    (m * (a.dt * psi.im).cos(), m * (a.dt * psi.im).sin())
                }
            };
            let err = (re - ere).hypot(im - eim);
            worst = worst.max(err);
            let mut rec: Vec<String> = xi.iter().map(|v| v.to_string()).collect();
            rec.extend([
                re.to_string(),
                im.to_string(),
                ere.to_string(),
                eim.to_string(),
                err.to_string(),
                bound.to_string(),
                (err <= bound).to_string(),
            ]);
            cf.write_record(&rec).map_err(Error::from)?;
        }
    }
    cf.flush().map_err(Error::from)?;
    println!(
        "wrote {} draws to {}; max |ecf - cf| = {worst:.3e} (3/sqrt(N) = {bound:.3e})",
        a.n,
        a.out.display()
    );
    Ok(())
}

fn build_config(a: &StudyArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&a.config, &a.preset) {
        (Some(path), _) => config::load(path)?,
        (None, Some(_)) => ExperimentConfig {
            model: ModelConfig::default(),
            study: Default::default(),
            oracle: Default::default(),
            output: Default::default(),
        },
        (None, None) => {
            return Err(CliError::Config(
                "at `model`: pass --config FILE or --preset NAME".into(),
            ))
        }
    };
    if let Some(p) = &a.preset {
        cfg.model.preset = Some(p.clone());
        cfg.model.spec = None;
    }
    if a.alpha.is_some() {
        cfg.model.alpha = a.alpha;
    }
    if a.beta.is_some() {
        cfg.model.beta = a.beta;
    }
    if a.dim.is_some() {
        cfg.model.dim = a.dim;
    }
    if let Some(n) = a.n_paths {
        cfg.study.n_paths = n;
    }
    if let Some(s) = a.seed {
        cfg.study.seed = s;
    }
    if let Some(o) = &a.out {
        cfg.output.dir = o.clone();
    }
    Ok(cfg)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
    w.write_all(b"\n").map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    finish(w, path)
}

fn finish_study(report: &StudyReport) -> Result<(), CliError> {
    match report.verdict {
        Verdict::Inconclusive => Err(CliError::Inconclusive(
            report.message.clone().unwrap_or_default(),
        )),
        _ => Ok(()),
    }
}

/// Whether `g` is rougher than `C^{alpha + beta}`.
fn exploratory(spec: &ModelSpec, g: &TestFunction) -> bool {
    g.smoothness() < spec.alpha + spec.beta()
}

pub fn rate_study(a: &StudyArgs) -> Result<(), CliError> {
    let (cfg, spec) = build_config(a)?.resolved()?;
    let study = &cfg.study;
    let g = study.test_function.clone().expect("resolved");
    let deltas = study.deltas.clone().expect("resolved");
    let kappa = predicted_kappa(spec.alpha, spec.beta()).map_err(as_config)?;
    harness::ladder_steps(spec.horizon, &deltas).map_err(as_config)?;
    let ladder = run_ladder(&spec, &g, &deltas, study.n_paths, study.reference, study.seed)?;
    let fit = ladder.fit(kappa);
    let config = serde_json::to_value(&cfg).map_err(Error::from)?;
    let report = StudyReport::new("rate-study", config, kappa, exploratory(&spec, &g), Some(ladder), fit)?;
    let dir = &cfg.output.dir;
    if cfg.output.wants(ReportFormat::Csv) {
        let path = dir.join("rate_study.csv");
        let ladder = report.ladder.as_ref().expect("set above");
        harness::write_ladder_csv(ladder, report.fit.as_ref(), create(&path)?)?;
    }
    if cfg.output.wants(ReportFormat::Json) {
        write_json(&report, &dir.join("rate_study.json"))?;
    }
    println!(
        "rate-study: slope {} predicted_kappa {kappa} verdict {:?}",
        report.slope.map_or("n/a".into(), |s| format!("{s:.4}")),
        report.verdict
    );
    finish_study(&report)
}

pub fn one_step(a: &StudyArgs) -> Result<(), CliError> {
    let (cfg, spec) = build_config(a)?.resolved()?;
    let study = &cfg.study;
    let f = study.test_function.clone().expect("resolved");
    let deltas = study.deltas.clone().expect("resolved");
    let probes = study.probes.clone().expect("resolved");
    let kappa = predicted_kappa(spec.alpha, f.smoothness()).map_err(as_config)?;
    let errs = one_step_errors(&spec, &f, &deltas, &probes, study.n_paths, study.seed)?;
    let errors: Vec<f64> = errs.iter().map(|e| e.0).collect();
    let stderrs: Vec<f64> = errs.iter().map(|e| e.1).collect();
    let fit = fit_rate(&deltas, &errors, &stderrs, kappa);
    let config = serde_json::to_value(&cfg).map_err(Error::from)?;
    let report = StudyReport::new("one-step", config, kappa, false, None, fit)?;
    let dir = &cfg.output.dir;
    if cfg.output.wants(ReportFormat::Csv) {
        let path = dir.join("one_step.csv");
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record(["delta", "error", "stderr", "n_paths", "used"])
            .map_err(Error::from)?;
        for i in 0..deltas.len() {
            let used = errors[i] > 0.0 && errors[i] >= NOISE_FLOOR * stderrs[i];
            w.write_record([
                deltas[i].to_string(),
                errors[i].to_string(),
                stderrs[i].to_string(),
                study.n_paths.to_string(),
                used.to_string(),
            ])
            .map_err(Error::from)?;
        }
        w.flush().map_err(Error::from)?;
    }
    if cfg.output.wants(ReportFormat::Json) {
        write_json(&report, &dir.join("one_step.json"))?;
    }
    println!(
        "one-step: slope {} predicted_kappa {kappa} verdict {:?}",
        report.slope.map_or("n/a".into(), |s| format!("{s:.4}")),
        report.verdict
    );
    finish_study(&report)
}

#[derive(Serialize)]
struct OracleReport {
    schema_version: u32,
    command: &'static str,
    config: serde_json::Value,
    mode: OracleMode,
    rows: usize,
    aliasing_suspected: Option<bool>,
    shell_ratio: Option<f64>,
    max_abs_z: Option<f64>,
}

pub fn oracle(a: &StudyArgs) -> Result<(), CliError> {
    let (cfg, spec) = build_config(a)?.resolved()?;
    let oc = &cfg.oracle;
    let f = oc.function.clone().expect("resolved");
    let t = oc.t.expect("resolved");
    if !(t >= 0.0) {
        return Err(CliError::Config(format!("at `oracle.t`: {t} must be >= 0")));
    }
    let d = spec.dim;
    let symbol = Symbol::from_model(&spec).map_err(as_config)?;
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut report = OracleReport {
        schema_version: REPORT_SCHEMA_VERSION,
        command: "oracle",
        config: serde_json::to_value(&cfg).map_err(Error::from)?,
        mode: oc.mode,
        rows: 0,
        aliasing_suspected: None,
        shell_ratio: None,
        max_abs_z: None,
    };
    match oc.mode {
        OracleMode::Grid => {
            if d > 2 {
                return Err(CliError::Config(format!(
                    "at `oracle.mode`: grid mode supports d <= 2, model has d = {d}"
                )));
            }
            let hw = oc
                .half_width
                .unwrap_or_else(|| SymbolGrid::default_half_width(spec.alpha, t, &spec.x0));
            let grid = SymbolGrid::new(symbol, hw, oc.grid_n).map_err(as_config)?;
            let g = grid.sample(|x| f.value(x));
            let p = grid.semigroup_apply(&g, t)?;
            report.aliasing_suspected = Some(p.aliasing_suspected());
            report.shell_ratio = Some(p.shell_ratio);
            header.extend(["g".to_string(), "value".to_string()]);
            for (i, (gv, v)) in g.iter().zip(&p.values).enumerate() {
                let mut r = grid.point(i);
                r.extend([*gv, *v]);
                rows.push(r);
            }
        }
        OracleMode::Points | OracleMode::CrossCheck => {
            let points = oc.points.clone().expect("resolved");
            header.push("oracle".into());
            if oc.mode == OracleMode::CrossCheck {
                header.extend(["mc_mean", "mc_stderr", "z"].map(String::from));
            }
            let mut max_z = 0.0f64;
            for x in &points {
                if x.len() != d {
                    return Err(CliError::Config(format!(
                        "at `oracle.points`: point {x:?} is not {d}-dimensional"
                    )));
                }
                let mut started = spec.clone();
                started.x0 = x.clone();
                started.horizon = t;
                let exact = harness::oracle_value(&started, &f).map_err(as_config)?;
                let mut r = x.clone();
                r.push(exact);
                if oc.mode == OracleMode::CrossCheck {
                    if !(t > 0.0) || oc.cross_check_steps == 0 {
                        return Err(CliError::Config(
                            "at `oracle`: cross-check needs t > 0 and cross_check_steps >= 1".into(),
                        ));
                    }
                    let n = oc.cross_check_steps;
                    let scheme = EulerScheme::from_spec(&started, t / n as f64)?;
                    let v = scheme.simulate_coupled(t, &[n], oc.cross_check_paths, cfg.study.seed, |y| f.value(y))?;
                    let e = McEstimate::from_samples(&v[0]);
                    let z = if e.stderr > 0.0 { (e.mean - exact) / e.stderr } else { 0.0 };
                    max_z = max_z.max(z.abs());
                    r.extend([e.mean, e.stderr, z]);
                }
                rows.push(r);
            }
            if oc.mode == OracleMode::CrossCheck {
                report.max_abs_z = Some(max_z);
            }
        }
    }
    report.rows = rows.len();
    let dir = &cfg.output.dir;
    if cfg.output.wants(ReportFormat::Csv) {
        let path = dir.join("oracle.csv");
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record(&header).map_err(Error::from)?;
        for r in &rows {
            w.write_record(r.iter().map(|v| v.to_string())).map_err(Error::from)?;
        }
        w.flush().map_err(Error::from)?;
    }
    if cfg.output.wants(ReportFormat::Json) {
        write_json(&report, &dir.join("oracle.json"))?;
    }
    println!("oracle: {} rows ({:?})", report.rows, oc.mode);
    Ok(())
}
