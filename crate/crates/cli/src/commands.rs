use crate::args::*;
use crate::failure::CliError;
use crate::manifest::{self, Manifest};
use rmint::asymptotics::{self, AsymptoticSpec, Design, Propensity};
use rmint::bandwidth::{cross_validate, CvConfig, CvCriterion};
use rmint::data::{format_float, read_covariates, read_csv_auto, Dataset, EvaluationGrid};
use rmint::integration::{
    estimate_component, estimate_derivative, fit_additive, predict, AdditiveConfig, ComponentEstimate,
    IntegrationMeasure,
};
use rmint::kernels::{moment_matrix, moment_vector, variance_matrix, BandwidthSpec, Kernel};
use rmint::losses::{LossFamily, LossSpec};
use rmint::scale::{ScaleConfig, ScaleEstimate, ScaleMode};
use rmint::simulate::{
    run_study, summary_table, write_components_csv, write_report_json, write_summary_csv, BandwidthChoice,
    Contamination, DesignKind, Missing, ScenarioConfig, StudyConfig,
};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

type Result<T> = std::result::Result<T, CliError>;

fn parse_with<T: std::str::FromStr<Err = rmint::Error>>(s: &str) -> Result<T> {
    s.parse().map_err(CliError::from)
}

fn loss_from(name: &str, c: Option<f64>) -> Result<LossSpec> {
    let family: LossFamily = parse_with(name)?;
    Ok(LossSpec::new(family, c.unwrap_or(family.default_c()))?)
}

/// `lo:hi[,lo:hi...]`; a single pair is repeated for every coordinate.
fn parse_box(s: &str, d: usize) -> Result<Vec<(f64, f64)>> {
    let pairs = s
        .split(',')
        .map(|p| {
            let (lo, hi) = p
                .split_once(':')
                .ok_or_else(|| CliError::validation(format!("bad range `{p}`, expected lo:hi")))?;
            let lo: f64 = lo
                .trim()
                .parse()
                .map_err(|_| CliError::validation(format!("bad number `{lo}`")))?;
            let hi: f64 = hi
                .trim()
                .parse()
                .map_err(|_| CliError::validation(format!("bad number `{hi}`")))?;
            if !(lo < hi) {
                return Err(CliError::validation(format!("empty range {lo}:{hi}")));
            }
            Ok((lo, hi))
        })
        .collect::<Result<Vec<_>>>()?;
    match pairs.len() {
        1 => Ok(vec![pairs[0]; d]),
        k if k == d => Ok(pairs),
        k => Err(CliError::validation(format!("{k} ranges given for {d} coordinates"))),
    }
}

fn render_box(b: &[(f64, f64)]) -> String {
    b.iter()
        .map(|(lo, hi)| format!("{}:{}", format_float(*lo), format_float(*hi)))
        .collect::<Vec<_>>()
        .join(",")
}

fn per_coordinate(values: &[f64], d: usize, what: &str) -> Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; d]),
        k if k == d => Ok(values.to_vec()),
        k => Err(CliError::validation(format!(
            "{k} values of {what} for {d} coordinates"
        ))),
    }
}

/// Everything derived from the shared estimator flags.
struct Setup {
    data: Dataset,
    cfg: AdditiveConfig,
    scale_cfg: ScaleConfig,
    measure: IntegrationMeasure,
}

fn setup(est: &EstimatorArgs, bw: BandwidthSpec, seed: u64) -> Result<Setup> {
    let path = est.data.as_ref().ok_or_else(|| CliError::usage("--data is required"))?;
    // Validate cheap settings before touching the file.
    let loss = loss_from(&est.loss, est.c)?;
    let kernel_alpha: Kernel = parse_with(&est.kernel)?;
    let kernel_nuisance: Kernel = match &est.kernel_nuisance {
        Some(k) => parse_with(k)?,
        None => kernel_alpha,
    };
    let mode: ScaleMode = parse_with(&est.scale_mode)?;
    if !matches!(est.measure.as_str(), "uniform" | "tensor") {
        return Err(CliError::validation(format!("unknown measure `{}`", est.measure)));
    }

    let data = read_csv_auto(path)?;
    let d = data.d();
    let support = match &est.support {
        Some(s) => parse_box(s, d)?,
        None => (0..d)
            .map(|j| {
                let (lo, hi) = data.coordinate_range(j).ok_or(rmint::Error::Empty("dataset"))?;
                if lo < hi {
                    Ok((lo, hi))
                } else {
                    Err(CliError::validation(format!("coordinate x{} is constant", j + 1)))
                }
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let scale_bw = match &est.scale_bandwidth {
        Some(v) => per_coordinate(v, d, "--scale-bandwidth")?,
        None => support.iter().map(|(lo, hi)| 0.1 * (hi - lo)).collect(),
    };
    let mut cfg = AdditiveConfig::new(est.q, bw, loss, support.clone());
    cfg.kernel_alpha = kernel_alpha;
    cfg.kernel_nuisance = kernel_nuisance;
    cfg.grid_points = est.grid_points;
    cfg.max_iter = est.max_iter;
    cfg.tol = est.tol;
    if let Some(ms) = est.min_support {
        cfg.min_support = ms;
    }
    cfg.local(0).validate(d)?;
    let measure = match est.measure.as_str() {
        "uniform" => IntegrationMeasure::uniform_box(support, est.m, seed)?,
        _ => IntegrationMeasure::tensor_grid(support, est.per_axis)?,
    };
    Ok(Setup {
        data,
        cfg,
        scale_cfg: ScaleConfig {
            bandwidth: scale_bw,
            mode,
        },
        measure,
    })
}

fn out_dir(out: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = out.clone().ok_or_else(|| CliError::usage("--out is required"))?;
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

/// Writes to stdout; a closed pipe (as with `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io(Path::new("<stdout>"), e)),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn component_file(alpha: usize) -> String {
    format!("component_{}.csv", alpha + 1)
}

fn component_csv(c: &ComponentEstimate) -> String {
    let mut out = String::from("x,value,n_failed\n");
    for ((x, v), k) in c.grid.points.iter().zip(&c.values).zip(&c.n_failed) {
        let v = if v.is_nan() { "NA".to_string() } else { format_float(*v) };
        let _ = writeln!(out, "{},{v},{k}", format_float(*x));
    }
    out
}

fn read_component(path: &Path, alpha: usize, offset: f64) -> Result<ComponentEstimate> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |line: usize| CliError::validation(format!("{}:{line}: malformed component row", path.display()));
    let mut points = Vec::new();
    let mut values = Vec::new();
    let mut n_failed = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(bad(i + 1));
        }
        points.push(f[0].parse::<f64>().map_err(|_| bad(i + 1))?);
        values.push(if f[1] == "NA" {
            f64::NAN
        } else {
            f[1].parse::<f64>().map_err(|_| bad(i + 1))?
        });
        n_failed.push(f[2].parse::<usize>().map_err(|_| bad(i + 1))?);
    }
    let failures = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.is_nan().then_some(i))
        .collect();
    Ok(ComponentEstimate {
        alpha,
        nu: 0,
        grid: EvaluationGrid::new(alpha, points)?,
        values,
        n_failed,
        failures,
        offset,
        nonconverged: 0,
        fits: 0,
    })
}

fn predictions_csv(d: usize, x: &[f64], predict_row: impl Fn(&[f64]) -> rmint::Result<f64>) -> String {
    let mut out: String = (1..=d).map(|j| format!("x{j},")).collect();
    out.push_str("fitted\n");
    for row in x.chunks(d) {
        for v in row {
            out.push_str(&format_float(*v));
            out.push(',');
        }
        // Points outside a component grid get NA rather than failing the file.
        let p = predict_row(row).map(format_float).unwrap_or_else(|_| "NA".into());
        out.push_str(&p);
        out.push('\n');
    }
    out
}

fn describe_scale(s: &ScaleEstimate) -> String {
    match s.value() {
        Some(v) => format_float(v),
        None => "local".into(),
    }
}

fn base_manifest(s: &Setup, seed: u64, scale: &ScaleEstimate) -> Manifest {
    let cfg = &s.cfg;
    let mut m = Manifest::default();
    m.set("format", manifest::FORMAT);
    m.set("d", s.data.d());
    m.set("n", s.data.n());
    m.set("n_observed", s.data.n_observed());
    m.set("loss", cfg.loss.family.name());
    m.set("c", format_float(cfg.loss.c));
    m.set("q", cfg.q);
    m.set("kernel", cfg.kernel_alpha.name());
    m.set("kernel_nuisance", cfg.kernel_nuisance.name());
    m.set("h", format_float(cfg.bw.h_alpha));
    m.set("htilde", format_float(cfg.bw.h_tilde));
    m.set("max_iter", cfg.max_iter);
    m.set("tol", format_float(cfg.tol));
    m.set("min_support", cfg.min_support);
    m.set("support", render_box(&cfg.support));
    m.set("grid_points", cfg.grid_points);
    match &s.measure {
        IntegrationMeasure::UniformBox { m: draws, seed, .. } => {
            m.set("measure", "uniform");
            m.set("m", draws);
            m.set("measure_seed", seed);
        }
        IntegrationMeasure::TensorGrid { per_axis, .. } => {
            m.set("measure", "tensor");
            m.set("per_axis", per_axis);
        }
        IntegrationMeasure::ExplicitSample { .. } => m.set("measure", "explicit"),
    }
    m.set("seed", seed);
    m.set(
        "scale_mode",
        match s.scale_cfg.mode {
            ScaleMode::Global => "global",
            ScaleMode::Local => "local",
        },
    );
    m.set(
        "scale_bandwidth",
        s.scale_cfg
            .bandwidth
            .iter()
            .map(|v| format_float(*v))
            .collect::<Vec<_>>()
            .join(","),
    );
    m.set("sigma", describe_scale(scale));
    m
}

pub fn fit(a: &FitArgs, verbose: u8) -> Result<()> {
    let h = a.h.ok_or_else(|| CliError::usage("--h is required"))?;
    let ht = a.htilde.ok_or_else(|| CliError::usage("--htilde is required"))?;
    if a.nu > 0 && a.alpha.is_none() {
        return Err(CliError::usage("--nu > 0 requires --alpha"));
    }
    if a.alpha == Some(0) {
        return Err(CliError::usage("--alpha is 1-based"));
    }
    if !(0.0..=1.0).contains(&a.max_nonconverged) {
        return Err(CliError::validation("--max-nonconverged must lie in [0, 1]"));
    }
    let bw = BandwidthSpec::new(h, ht)?;
    let dir = out_dir(&a.out)?;
    let s = setup(&a.est, bw, a.seed)?;
    let d = s.data.d();
    let scale = s.scale_cfg.for_loss(&s.data, &s.cfg.loss)?;
    let mut m = base_manifest(&s, a.seed, &scale);
    m.set("nu", a.nu);

    let (components, nonconverged) = match a.alpha {
        Some(alpha) => {
            let alpha = alpha - 1;
            if alpha >= d {
                return Err(CliError::validation(format!("--alpha {} exceeds d = {d}", alpha + 1)));
            }
            let local = s.cfg.local(alpha);
            let grid = s.cfg.grid(alpha)?;
            let c = if a.nu == 0 {
                estimate_component(&s.data, &local, &scale, &s.measure, &grid)?
            } else {
                estimate_derivative(&s.data, &local, &scale, &s.measure, &grid, a.nu)?
            };
            m.set("model", "component");
            let frac = c.nonconverged_fraction();
            (vec![c], frac)
        }
        None => {
            let fit = fit_additive(&s.data, &s.cfg, &scale, &s.measure)?;
            m.set("model", "additive");
            m.set("mu", format_float(fit.mu));
            m.set("intercept", format_float(fit.intercept));
            let fitted = predictions_csv(d, s.data.x_flat(), |x| fit.predict(x));
            write_file(&dir.join("fitted.csv"), &fitted)?;
            m.set("fitted", "fitted.csv");
            let frac = fit.nonconverged_fraction();
            (fit.components, frac)
        }
    };
    for c in &components {
        let name = component_file(c.alpha);
        write_file(&dir.join(&name), &component_csv(c))?;
        m.set(&format!("component_{}", c.alpha + 1), name);
        m.set(&format!("offset_{}", c.alpha + 1), format_float(c.offset));
        m.set(&format!("failed_points_{}", c.alpha + 1), c.failures.len());
    }
    m.set("nonconverged_fraction", format_float(nonconverged));
    m.write(&dir.join(manifest::FILE_NAME))?;
    if verbose > 0 {
        eprintln!(
            "fit: d={d} n={} observed={} sigma={} nonconverged={:.4}",
            s.data.n(),
            s.data.n_observed(),
            describe_scale(&scale),
            nonconverged
        );
    }
    if nonconverged > a.max_nonconverged {
        return Err(CliError {
            code: "no_convergence",
            kind: rmint::ErrorKind::Numerical,
            message: format!(
                "{:.4} of local fits hit the iteration cap (limit {})",
                nonconverged, a.max_nonconverged
            ),
        });
    }
    Ok(())
}

pub fn predict_cmd(a: &PredictArgs) -> Result<()> {
    let model = a.model.as_ref().ok_or_else(|| CliError::usage("--model is required"))?;
    let input = a.input.as_ref().ok_or_else(|| CliError::usage("--input is required"))?;
    let (dir, path) = if model.is_dir() {
        (model.clone(), model.join(manifest::FILE_NAME))
    } else {
        (model.parent().map(Path::to_path_buf).unwrap_or_default(), model.clone())
    };
    let m = Manifest::read(&path)?;
    if m.require("format")? != manifest::FORMAT {
        return Err(CliError::validation(format!(
            "{} is not a model manifest",
            path.display()
        )));
    }
    if m.require("model")? != "additive" {
        return Err(CliError::validation(
            "manifest holds a single component; refit without --alpha",
        ));
    }
    let d: usize = m.parse("d")?;
    let intercept: f64 = m.parse("intercept")?;
    let components = (0..d)
        .map(|alpha| {
            let file = m.require(&format!("component_{}", alpha + 1))?;
            let offset: f64 = m.parse(&format!("offset_{}", alpha + 1))?;
            read_component(&dir.join(file), alpha, offset)
        })
        .collect::<Result<Vec<_>>>()?;
    let (x, dx) = read_covariates(input)?;
    if dx != d {
        return Err(CliError::validation(format!(
            "input has {dx} covariates, model has {d}"
        )));
    }
    let text = predictions_csv(d, &x, |row| predict(&components, intercept, row));
    match &a.output {
        Some(p) => write_file(p, &text),
        None => emit(&text),
    }
}

pub fn cv(a: &CvArgs, verbose: u8) -> Result<()> {
    let seed = a.seed.ok_or_else(|| CliError::usage("--seed is required for cv"))?;
    let grid_h = a
        .grid_h
        .clone()
        .ok_or_else(|| CliError::usage("--grid-h is required"))?;
    let grid_ht = a
        .grid_htilde
        .clone()
        .ok_or_else(|| CliError::usage("--grid-htilde is required"))?;
    let criterion: CvCriterion = parse_with(&a.cv)?;
    let mut cv = CvConfig::new(criterion, grid_h, grid_ht, seed);
    cv.folds = a.folds;
    cv.extend_grid = a.extend_grid;
    cv.validate()?;
    // Placeholder bandwidths; every grid pair overrides them.
    let bw = BandwidthSpec::new(cv.grid_h[0], cv.grid_htilde[0])?;
    let s = setup(&a.est, bw, seed)?;
    let result = cross_validate(&s.data, &s.cfg, &s.scale_cfg, &s.measure, &cv)?;
    if verbose > 0 {
        eprintln!(
            "cv: best h={} h_tilde={} value={}",
            result.best.0, result.best.1, result.best_value
        );
    }
    let text = serde_json::to_string_pretty(&result)
        .map_err(|e| CliError::validation(format!("cannot serialize result: {e}")))?;
    match &a.out {
        Some(p) => write_file(p, &(text + "\n")),
        None => emit(&(text + "\n")),
    }
}

fn parse_propensity(s: &str) -> Result<Propensity> {
    if let Some(rest) = s.strip_prefix("cos2:") {
        let f: Vec<&str> = rest.split(':').collect();
        let bad = || CliError::validation(format!("bad propensity `{s}`, expected cos2:a:b:shift:coord"));
        if f.len() != 4 {
            return Err(bad());
        }
        let num = |t: &str| t.parse::<f64>().map_err(|_| bad());
        let coord: usize = f[3].parse().map_err(|_| bad())?;
        if coord == 0 {
            return Err(bad());
        }
        return Ok(Propensity::CosSquared {
            a: num(f[0])?,
            b: num(f[1])?,
            shift: num(f[2])?,
            coord: coord - 1,
        });
    }
    let p: f64 = s
        .parse()
        .map_err(|_| CliError::validation(format!("bad propensity `{s}`")))?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(CliError::validation(format!("propensity {p} outside (0, 1]")));
    }
    Ok(Propensity::Constant { p })
}

pub fn theory(a: &TheoryArgs) -> Result<()> {
    let x = a.x.ok_or_else(|| CliError::usage("--x is required"))?;
    if a.alpha == 0 {
        return Err(CliError::usage("--alpha is 1-based"));
    }
    let design = match (a.design_integral, &a.design_box) {
        (Some(value), _) => Design::Value { value },
        (None, Some(b)) => {
            let d = b.split(',').count();
            let bounds = parse_box(b, d)?;
            if a.alpha > d {
                return Err(CliError::validation(format!(
                    "--alpha {} exceeds box dimension {d}",
                    a.alpha
                )));
            }
            Design::uniform(bounds, parse_propensity(&a.propensity)?)
        }
        (None, None) => return Err(CliError::usage("one of --design-box or --design-integral is required")),
    };
    let spec = AsymptoticSpec {
        q: a.q,
        nu: a.nu,
        kernel_alpha: parse_with(&a.kernel)?,
        loss: loss_from(&a.loss, a.c)?,
        sigma: a.sigma,
        beta_rate: a.beta,
        alpha: a.alpha - 1,
        design,
    };
    let report = asymptotics::report(&spec, x, a.g_deriv, a.n)?;
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::validation(format!("cannot serialize report: {e}")))?;
    emit(&(text + "\n"))
}

fn scenario(tokens: &[String], n: usize, seed: u64) -> Result<ScenarioConfig> {
    let (design, cont, missing) = match tokens {
        [d, c] => (d, c, None),
        [d, c, m] => (d, c, Some(m)),
        _ => return Err(CliError::usage("scenario must be `<d2|d4> <c0|c1|c2|c3> [full|p2]`")),
    };
    let design: DesignKind = parse_with(design)?;
    let cont: Contamination = parse_with(cont)?;
    let missing: Missing = match missing {
        Some(m) => parse_with(m)?,
        None => Missing::Full,
    };
    Ok(ScenarioConfig::new(design, n, cont, missing, seed)?)
}

pub fn simulate(a: &SimulateArgs, verbose: u8) -> Result<()> {
    let seed = a
        .seed
        .ok_or_else(|| CliError::usage("--seed is required for simulate"))?;
    let sc = scenario(&a.scenario, a.n, seed)?;
    let (h0, ht0) = match sc.design {
        DesignKind::D2 => (0.1, 0.1),
        DesignKind::D4 => (2.11 * (a.n as f64).powf(-0.2), 2.11 * (a.n as f64).powf(-0.12)),
    };
    let bw = BandwidthSpec::new(a.h.unwrap_or(h0), a.htilde.unwrap_or(ht0))?;
    let mut study = StudyConfig::classical_vs_robust(sc, a.reps, seed, bw);
    study.estimators[1].loss = LossSpec::huber(a.c);
    if a.cv {
        let grid_h = a
            .grid_h
            .clone()
            .ok_or_else(|| CliError::usage("--cv requires --grid-h"))?;
        let grid_ht = a
            .grid_htilde
            .clone()
            .ok_or_else(|| CliError::usage("--cv requires --grid-htilde"))?;
        for (est, criterion) in study
            .estimators
            .iter_mut()
            .zip([CvCriterion::Classical, CvCriterion::Robust])
        {
            let mut cv = CvConfig::new(criterion, grid_h.clone(), grid_ht.clone(), seed);
            cv.folds = a.folds;
            cv.validate()?;
            est.bandwidth = BandwidthChoice::Cv { cv };
        }
    }
    if let Some(m) = a.m {
        study.fit.m = m;
    }
    if let Some(ms) = a.min_support {
        study.fit.min_support = ms;
    }
    if let Some(t) = &a.trims {
        study.trims = t.clone();
    }
    study.record_components = a.components;

    let report = run_study(&study)?;
    if verbose > 0 {
        eprintln!(
            "simulate: {} replications, {} failed fits, observed fraction {:.4}",
            report.replications.len(),
            report.failures.len(),
            report.mean_observed_fraction()
        );
    }
    if let Some(out) = &a.out {
        fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        write_report_json(&report, out.join("report.json"))?;
        write_summary_csv(std::slice::from_ref(&report), out.join("summary.csv"))?;
        if a.components {
            write_components_csv(&report, out.join("components.csv"))?;
        }
    }
    emit(&summary_table(std::slice::from_ref(&report)))
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn kernel_info(a: &KernelInfoArgs) -> Result<()> {
    let k: Kernel = parse_with(&a.kernel)?;
    let moments: Vec<f64> = (0..=2 * a.q + 2).map(|p| k.moment(p, false)).collect();
    let squared: Vec<f64> = (0..=2 * a.q).map(|p| k.moment(p, true)).collect();
    let json = serde_json::json!({
        "kernel": k.name(),
        "order": k.order(),
        "nonnegative": k.is_nonnegative(),
        "q": a.q,
        "moments": moments,
        "squared_moments": squared,
        "moment_matrix": moment_matrix(k, a.q).ok().map(|m| matrix_rows(&m)),
        "variance_matrix": variance_matrix(k, a.q).ok().map(|m| matrix_rows(&m)),
        "moment_vector": moment_vector(k, a.q).ok().map(|v| v.iter().copied().collect::<Vec<_>>()),
    });
    emit(&(serde_json::to_string_pretty(&json).expect("json values are finite") + "\n"))
}
