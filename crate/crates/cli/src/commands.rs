//! The subcommands. Each takes resolved [`Settings`], writes its outputs and
//! a manifest into the output directory and returns the manifest path.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use carma_field::estimate::{
    aic, axis_lags, empirical_variogram, fit, model_select, EmpiricalVariogram, FitConfig, FitResult,
    ModelStructure, WeightScheme,
};
use carma_field::identify::{axis_ordinates, check_identifiability, recover, AxisOrdinates};
use carma_field::simulate::{
    mse_discretization, mse_truncation_cp, simulate_compound_poisson, simulate_truncated_discretized, JumpLaw,
    LatticeGrid, LevyBasisSpec,
};
use carma_field::study::{run_study, standard_cases, StudyConfig};
use carma_field::{CarmaSpec, LatticeField};
use rayon::prelude::*;

use crate::config::{format_complex, key, parse_config, Key, Settings};
use crate::diagnose::{diagnose, Diagnosis};
use crate::error::{CliError, Result, StageContext};
use crate::io::{load_input, Run};
use crate::plot::{heat_map, line_plot, Series};

const COMMON: [Key; 2] = [
    key("output", None, "output directory"),
    key("threads", None, "worker threads (capped by CARMA_FIELD_THREADS)"),
];

const MODEL: [Key; 2] = [
    key("b", None, "moving-average coefficients b0,b1,..."),
    key("eigenvalues", None, "eigenvalues per axis: axes separated by ';', complex as a+bi"),
];

const NOISE: [Key; 6] = [
    key("noise", Some("gaussian"), "gaussian, compound-poisson or variance-gamma"),
    key("noise_variance", Some("1"), "variance per unit volume (gaussian, variance-gamma)"),
    key("vg_shape", Some("1"), "variance of the gamma subordinator per unit volume"),
    key("cp_intensity", Some("1"), "compound-Poisson jump intensity"),
    key("cp_jumps", Some("normal"), "compound-Poisson jump law: normal or symmetric"),
    key("cp_jump_scale", Some("1"), "jump standard deviation (normal) or size (symmetric)"),
];

const GRID_INPUT: [Key; 5] = [
    key("input", None, "input grid (CARF, carf-csv or plain matrix)"),
    key("format", Some("auto"), "auto, carf, carf-csv or matrix"),
    key("delta", None, "spacing for inputs that carry none"),
    key("thin", Some("1"), "keep every k-th point per axis"),
    key("plots", Some("false"), "also write SVG plots"),
];

const SIMULATE: [Key; 8] = [
    key("algorithm", Some("discretized"), "discretized or compound-poisson"),
    key("n", Some("100"), "points per axis"),
    key("delta", Some("0.04"), "grid spacing"),
    key("truncation", None, "kernel truncation: grid steps (discretized) or box radius (compound-poisson)"),
    key("thin", Some("1"), "keep every k-th point per axis after simulation"),
    key("seed", Some("1"), "random seed"),
    key("output_format", Some("carf"), "carf or csv"),
    key("plots", Some("false"), "also write an SVG heat map (two axes only)"),
];

const VARIOGRAM: [Key; 2] = [
    key("normalize", Some("false"), "standardize the field first"),
    key("lags", Some("50"), "lags per axis"),
];

const FIT: [Key; 7] = [
    key("normalize", Some("true"), "standardize the field first"),
    key("lags", Some("50"), "lags per axis"),
    key("weights", Some("quadratic"), "quadratic or exponential"),
    key("models", Some("car1,car2,carma21,carma31"), "model menu"),
    key("kappa2", Some("1"), "known variance of the driving noise"),
    key("seed", Some("1"), "optimizer seed"),
    key("generations", Some("300"), "differential-evolution generations"),
];

const RECOVER: [Key; 6] = [
    key("input", None, "variogram CSV with axis lags; omit to use exact ordinates of the given model"),
    key("p", None, "autoregressive order"),
    key("q", Some("0"), "moving-average order"),
    key("kappa2", Some("1"), "known variance of the driving noise"),
    key("delta", Some("0.04"), "spacing per axis for exact ordinates"),
    key("b", None, "moving-average coefficients of the model"),
];

const SELECT: [Key; 1] = [key("fits", None, "fit result files written by `fit`, comma separated")];

const DIAGNOSE: [Key; 2] = [
    key("normalize", Some("false"), "standardize the field first"),
    key("bins", Some("100"), "histogram bins"),
];

const STUDY: [Key; 10] = [
    key("b", Some("4.8940,-1.1432"), "moving-average coefficients"),
    key("eigenvalues", Some("-1.7776,-2.0948;-1.3057,-2.5142"), "eigenvalues per axis"),
    key("n", Some("500"), "points per axis after thinning"),
    key("fine_delta", Some("0.02"), "spacing of the simulation lattice"),
    key("thin", Some("2"), "thinning factor"),
    key("truncation", Some("300"), "kernel truncation in fine grid steps"),
    key("replications", Some("50"), "number of simulated fields"),
    key("seed", Some("2024"), "random seed"),
    key("cases", Some("case1,case2,case3,case4"), "estimator settings to run"),
    key("generations", Some("300"), "differential-evolution generations"),
];

/// Subcommand names with their one-line descriptions.
pub const COMMANDS: [(&str, &str); 7] = [
    ("simulate", "simulate a CARMA field on a lattice"),
    ("variogram", "empirical variogram on the principal axes"),
    ("fit", "fit a model menu by weighted least squares and rank by AIC"),
    ("recover", "recover parameters in closed form from axis variogram ordinates"),
    ("select", "rank saved fit results by AIC"),
    ("diagnose", "marginal means and histogram of a gridded field"),
    ("study", "Monte-Carlo study of the estimator"),
];

/// Every key a subcommand accepts; later entries override earlier ones.
pub fn keys(command: &str) -> Vec<Key> {
    let mut out: Vec<Key> = COMMON.to_vec();
    let parts: Vec<&[Key]> = match command {
        "simulate" => vec![&MODEL, &NOISE, &SIMULATE],
        "variogram" => vec![&GRID_INPUT, &VARIOGRAM],
        "fit" => vec![&GRID_INPUT, &FIT],
        "recover" => vec![&MODEL[1..], &RECOVER],
        "select" => vec![&SELECT],
        "diagnose" => vec![&GRID_INPUT, &DIAGNOSE],
        "study" => vec![&NOISE, &STUDY, &GRID_INPUT[4..]],
        _ => vec![],
    };
    for part in parts {
        for k in part {
            out.retain(|o| o.name != k.name);
            out.push(*k);
        }
    }
    out
}

pub fn dispatch(settings: &Settings) -> Result<PathBuf> {
    match settings.command.as_str() {
        "simulate" => simulate(settings),
        "variogram" => variogram(settings),
        "fit" => fit_command(settings),
        "recover" => recover_command(settings),
        "select" => select(settings),
        "diagnose" => diagnose_command(settings),
        "study" => study(settings),
        other => Err(CliError::Validation(format!("unknown subcommand `{other}`"))),
    }
}

fn basis(settings: &Settings) -> Result<LevyBasisSpec> {
    let basis = match settings.str("noise")? {
        "gaussian" => LevyBasisSpec::gaussian(settings.positive("noise_variance")?),
        "variance-gamma" => LevyBasisSpec::variance_gamma(settings.positive("noise_variance")?, settings.positive("vg_shape")?),
        "compound-poisson" => {
            let scale = settings.positive("cp_jump_scale")?;
            let jumps = match settings.str("cp_jumps")? {
                "normal" => JumpLaw::Normal { std: scale },
                "symmetric" => JumpLaw::Symmetric { value: scale },
                other => return Err(CliError::Validation(format!("unknown jump law `{other}`"))),
            };
            LevyBasisSpec::compound_poisson(settings.positive("cp_intensity")?, jumps)
        }
        other => return Err(CliError::Validation(format!("unknown noise `{other}`"))),
    };
    Ok(basis?)
}

fn model(settings: &Settings, kappa2: f64) -> Result<CarmaSpec> {
    Ok(CarmaSpec::new(settings.floats("b")?, settings.eigenvalues("eigenvalues")?, kappa2)?)
}

/// `car1`, `carma21`, `CAR(1)` or `CARMA(2,1)` as `(p, q)`.
pub fn parse_model(token: &str) -> Result<(usize, usize)> {
    let t = token.to_ascii_lowercase().replace(['(', ')', ',', ' '], "");
    let digits = t
        .strip_prefix("carma")
        .or_else(|| t.strip_prefix("car"))
        .ok_or_else(|| CliError::Validation(format!("unknown model `{token}`")))?;
    let is_carma = t.starts_with("carma");
    let nums: Vec<usize> = digits.chars().map(|c| c.to_digit(10).map(|d| d as usize)).collect::<Option<_>>().unwrap_or_default();
    match (is_carma, nums.as_slice()) {
        (false, [p]) if *p > 0 => Ok((*p, 0)),
        (true, [p, q]) if *p > 0 && q < p => Ok((*p, *q)),
        _ => Err(CliError::Validation(format!("unknown model `{token}`"))),
    }
}

fn weight_scheme(name: &str) -> Result<WeightScheme> {
    match name {
        "quadratic" => Ok(WeightScheme::Quadratic),
        "exponential" => Ok(WeightScheme::Exponential),
        other => Err(CliError::Validation(format!("unknown weight scheme `{other}`"))),
    }
}

fn csv_line(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

// ---------------------------------------------------------------- simulate

fn simulate(settings: &Settings) -> Result<PathBuf> {
    let basis = basis(settings)?;
    let spec = model(settings, basis.kappa2())?;
    let d = spec.d();
    let n = settings.count("n")?;
    let delta = settings.positive("delta")?;
    let seed: u64 = settings.parse("seed")?;
    let thin = settings.count("thin")?;
    let grid = LatticeGrid::cubic(d, delta, n);
    let mut run = Run::new(settings.output_dir()?);
    let mut field = match settings.str("algorithm")? {
        "discretized" => {
            let m = settings.opt::<usize>("truncation")?.unwrap_or(300);
            run.note("truncation_steps", m.to_string());
            run.note("mse_bound", mse_discretization(&spec, delta, m)?.to_string());
            let mut f = simulate_truncated_discretized(&spec, &basis, m, &grid, seed)?;
            f.provenance.insert("algorithm".into(), "discretized".into());
            f
        }
        "compound-poisson" => {
            // kernel below e^-10 of its peak outside the box by default
            let radius = match settings.opt::<f64>("truncation")? {
                Some(r) => r,
                None => n as f64 * delta + 10.0 / spec.lambda_max().abs(),
            };
            run.note("truncation_radius", radius.to_string());
            run.note("mse_bound", mse_truncation_cp(&spec, radius)?.to_string());
            simulate_compound_poisson(&spec, &basis, radius, &grid, seed)?
        }
        other => return Err(CliError::Validation(format!("unknown algorithm `{other}`"))),
    };
    if thin > 1 {
        let provenance = field.provenance.clone();
        field = field.thin(thin)?;
        field.provenance = provenance;
    }
    for (k, v) in &field.provenance {
        run.note(&format!("provenance.{k}"), v.clone());
    }
    match settings.str("output_format")? {
        "carf" => run.write_with("field.carf", |b| field.write_carf(b))?,
        "csv" => run.write_with("field.csv", |b| field.write_csv(b))?,
        other => return Err(CliError::Validation(format!("unknown output format `{other}`"))),
    }
    if settings.flag("plots")? && field.d() == 2 {
        let svg = heat_map("simulated field", field.n()[0], field.n()[1], field.values());
        run.write("field.svg", svg.as_bytes())?;
    }
    run.finish(settings)
}

// ---------------------------------------------------------------- variogram

fn axis_series(emp: &EmpiricalVariogram, values: &[f64], axis: usize) -> Vec<(f64, f64)> {
    (0..emp.len())
        .filter(|&j| emp.lags()[j].iter().enumerate().all(|(i, &h)| (i == axis) == (h != 0)))
        .map(|j| (emp.lag_vector(j)[axis], values[j]))
        .collect()
}

fn variogram(settings: &Settings) -> Result<PathBuf> {
    let mut run = Run::new(settings.output_dir()?);
    let field = load_input(settings, &mut run).stage("ingest")?;
    let lags = axis_lags(field.d(), settings.count("lags")?);
    let emp = empirical_variogram(&field, &lags).stage("variogram")?;
    run.write_with("variogram.csv", |b| emp.write_csv(b))?;
    if settings.flag("plots")? {
        let series: Vec<Series> = (0..field.d())
            .map(|axis| Series {
                name: format!("axis {}", axis + 1),
                points: axis_series(&emp, emp.ordinates(), axis),
                markers: true,
            })
            .collect();
        run.write("variogram.svg", line_plot("empirical variogram", "lag", "variogram", &series).as_bytes())?;
    }
    run.finish(settings)
}

// ---------------------------------------------------------------- fit

/// Settings of the fit workflow.
#[derive(Debug, Clone, PartialEq)]
pub struct FitWorkflow {
    pub lags_per_axis: usize,
    pub weights: WeightScheme,
    /// `(p, q)` per model, in menu order.
    pub models: Vec<(usize, usize)>,
    pub kappa2: f64,
    pub seed: u64,
    pub generations: usize,
}

pub struct WorkflowOutput {
    pub variogram: EmpiricalVariogram,
    /// Fits ordered by increasing AIC.
    pub ranked: Vec<FitResult>,
}

/// Variogram on the principal axes, one fit per menu entry (in parallel)
/// and AIC ranking. Errors name the stage that failed.
pub fn run_fit_workflow(field: &LatticeField, wf: &FitWorkflow) -> Result<WorkflowOutput> {
    if wf.models.is_empty() {
        return Err(CliError::Validation("the model menu is empty".into()));
    }
    if wf.lags_per_axis == 0 {
        return Err(CliError::Validation("at least one lag per axis is required".into()));
    }
    let d = field.d();
    let structures = wf
        .models
        .iter()
        .map(|&(p, q)| ModelStructure::new(d, p, q, wf.kappa2))
        .collect::<carma_field::Result<Vec<_>>>()
        .stage("model menu")?;
    let emp = empirical_variogram(field, &axis_lags(d, wf.lags_per_axis)).stage("variogram")?;
    let fits = structures
        .into_par_iter()
        .map(|s| {
            let label = s.label();
            let mut config = FitConfig::new(s).with_seed(wf.seed);
            config.weights = wf.weights.clone();
            config.de.generations = wf.generations;
            fit(&emp, &config).stage(format!("fit {label}"))
        })
        .collect::<Result<Vec<_>>>()?;
    let ranked = model_select(&fits).stage("select")?;
    Ok(WorkflowOutput { variogram: emp, ranked })
}

fn slug(label: &str) -> String {
    label.to_ascii_lowercase().replace(['(', ')', ','], "")
}

fn fit_file(f: &FitResult, per_axis: usize) -> String {
    let mut s = f.to_key_value();
    let _ = writeln!(s, "d = {}", f.structure.d);
    let _ = writeln!(s, "lags_per_axis = {per_axis}");
    s
}

fn summary_csv(ranked: &[FitResult]) -> String {
    let mut s = String::from("rank,model,wss,parameters,lags,aic\n");
    for (i, f) in ranked.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},\"{}\",{},{},{},{}",
            i + 1,
            f.structure.label(),
            f.wss,
            f.parameter_count(),
            f.lag_count(),
            f.aic
        );
    }
    s
}

fn fit_command(settings: &Settings) -> Result<PathBuf> {
    let models = settings
        .list("models")?
        .iter()
        .map(|m| parse_model(m))
        .collect::<Result<Vec<_>>>()?;
    let wf = FitWorkflow {
        lags_per_axis: settings.count("lags")?,
        weights: weight_scheme(settings.str("weights")?)?,
        models,
        kappa2: settings.positive("kappa2")?,
        seed: settings.parse("seed")?,
        generations: settings.count("generations")?,
    };
    if wf.models.is_empty() {
        return Err(CliError::Validation("the model menu is empty".into()));
    }
    let mut run = Run::new(settings.output_dir()?);
    let field = load_input(settings, &mut run).stage("ingest")?;
    let out = run_fit_workflow(&field, &wf)?;
    let emp = &out.variogram;
    run.write_with("variogram.csv", |b| emp.write_csv(b))?;
    // per-model files and overlays in menu order, independent of the ranking
    let mut menu: Vec<&FitResult> = out.ranked.iter().collect();
    menu.sort_by_key(|f| wf.models.iter().position(|&m| m == (f.structure.p, f.structure.q)));
    let mut fitted = Vec::new();
    for f in &menu {
        run.write(&format!("fit_{}.txt", slug(&f.structure.label())), fit_file(f, wf.lags_per_axis).as_bytes())?;
        fitted.push(f.fitted_ordinates().stage(format!("overlay {}", f.structure.label()))?);
    }
    run.write("summary.csv", summary_csv(&out.ranked).as_bytes())?;
    let plots = settings.flag("plots")?;
    for axis in 0..field.d() {
        let empirical = axis_series(emp, emp.ordinates(), axis);
        let curves: Vec<Vec<(f64, f64)>> = fitted.iter().map(|v| axis_series(emp, v, axis)).collect();
        let mut s = String::from("lag,empirical");
        for f in &menu {
            let _ = write!(s, ",\"{}\"", f.structure.label());
        }
        s.push('\n');
        for (k, &(lag, value)) in empirical.iter().enumerate() {
            let row: Vec<f64> = std::iter::once(value).chain(curves.iter().map(|c| c[k].1)).collect();
            let _ = writeln!(s, "{lag},{}", csv_line(&row));
        }
        run.write(&format!("overlay_axis{}.csv", axis + 1), s.as_bytes())?;
        if plots {
            let mut series = vec![Series {
                name: "empirical".into(),
                points: empirical.clone(),
                markers: true,
            }];
            for (f, c) in menu.iter().zip(curves) {
                series.push(Series {
                    name: f.structure.label(),
                    points: c,
                    markers: false,
                });
            }
            let title = format!("variogram fits on axis {}", axis + 1);
            run.write(&format!("overlay_axis{}.svg", axis + 1), line_plot(&title, "lag", "variogram", &series).as_bytes())?;
        }
    }
    run.note("best_model", out.ranked[0].structure.label());
    run.finish(settings)
}

// ---------------------------------------------------------------- recover

/// Axis ordinates `j = 0..=j_max` from a variogram CSV whose lags lie on the
/// principal axes.
pub fn ordinates_from_csv(text: &str, j_max: usize) -> Result<Vec<AxisOrdinates>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| CliError::Validation("empty variogram file".into()))?
        .split(',')
        .collect();
    let d = header.iter().filter(|h| h.starts_with("lag_")).count();
    let col = header
        .iter()
        .position(|h| *h == "ordinate")
        .ok_or_else(|| CliError::Validation("variogram file has no `ordinate` column".into()))?;
    if d == 0 {
        return Err(CliError::Validation("variogram file has no lag columns".into()));
    }
    let mut per_axis: Vec<Vec<(f64, f64)>> = vec![Vec::new(); d];
    for (row, line) in lines.enumerate() {
        let cells: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| CliError::Validation(format!("variogram row {}: not numeric", row + 1)))?;
        if cells.len() != header.len() {
            return Err(CliError::Validation(format!("variogram row {}: wrong number of cells", row + 1)));
        }
        let nonzero: Vec<usize> = (0..d).filter(|&i| cells[i] != 0.0).collect();
        if let [axis] = nonzero[..] {
            per_axis[axis].push((cells[axis].abs(), cells[col]));
        }
    }
    per_axis
        .into_iter()
        .enumerate()
        .map(|(axis, points)| {
            let delta = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let mut values = vec![None; j_max + 1];
            values[0] = Some(0.0);
            for (lag, v) in points {
                let j = (lag / delta).round() as usize;
                if j <= j_max && (lag - j as f64 * delta).abs() <= 1e-9 * lag {
                    values[j] = Some(v);
                }
            }
            let values = values
                .into_iter()
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| CliError::Validation(format!("axis {} needs lags j = 1..={j_max}", axis + 1)))?;
            Ok(AxisOrdinates::new(axis, delta, values)?)
        })
        .collect()
}

fn recover_command(settings: &Settings) -> Result<PathBuf> {
    let p = settings.count("p")?;
    let q: usize = settings.parse("q")?;
    let kappa2 = settings.positive("kappa2")?;
    let mut run = Run::new(settings.output_dir()?);
    let mut out = String::new();
    let (ords, truth) = if settings.has("input") {
        let path = settings.path("input")?;
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        run.input(&path, crate::io::sha256_hex(text.as_bytes()));
        (ordinates_from_csv(&text, 2 * p + 1).stage("ordinates")?, None)
    } else {
        let spec = model(settings, kappa2)?;
        if spec.p() != p || spec.q() != q {
            return Err(CliError::Validation(format!(
                "model has orders ({}, {}), but p = {p}, q = {q} were requested",
                spec.p(),
                spec.q()
            )));
        }
        let mut delta = settings.floats("delta")?;
        if delta.len() == 1 {
            delta = vec![delta[0]; spec.d()];
        }
        let report = check_identifiability(&spec, &delta)?;
        let _ = writeln!(out, "input_verdict = {:?}", report.verdict);
        (axis_ordinates(&spec, &delta, 2 * p + 1).stage("ordinates")?, Some(spec))
    };
    let rec = recover(&ords, p, q, kappa2).stage("recover")?;
    for (i, b) in rec.spec.b().iter().enumerate() {
        let _ = writeln!(out, "b{i} = {b}");
    }
    for (axis, eigs) in rec.spec.eigenvalues().iter().enumerate() {
        let list: Vec<String> = eigs.iter().map(|z| format_complex(*z)).collect();
        let _ = writeln!(out, "eigenvalues.axis{} = {}", axis + 1, list.join(","));
    }
    for (axis, c) in rec.hankel_conditions.iter().enumerate() {
        let _ = writeln!(out, "hankel_condition.axis{} = {c}", axis + 1);
    }
    let delta: Vec<f64> = ords.iter().map(AxisOrdinates::delta).collect();
    let report = check_identifiability(&rec.spec, &delta)?;
    let _ = writeln!(out, "verdict = {:?}", report.verdict);
    if let Some(spec) = truth {
        let _ = writeln!(out, "max_b_error = {}", max_gap(spec.b(), rec.spec.b()));
    }
    run.write("recovered.txt", out.as_bytes())?;
    run.finish(settings)
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------- select

fn read_fit_file(path: &Path) -> Result<FitResult> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let map = parse_config(&text)?;
    let get = |k: &str| {
        map.get(k)
            .ok_or_else(|| CliError::Validation(format!("{}: missing `{k}`", path.display())))
    };
    let num = |k: &str| -> Result<f64> {
        get(k)?
            .parse()
            .map_err(|_| CliError::Validation(format!("{}: bad `{k}`", path.display())))
    };
    let (p, q) = parse_model(get("model")?)?;
    let d = num("d")? as usize;
    let per_axis = num("lags_per_axis")? as usize;
    let kappa2 = map.get("kappa2").map_or(Ok(1.0), |_| num("kappa2"))?;
    let structure = ModelStructure::new(d, p, q, kappa2)?;
    let theta = structure
        .parameter_names()
        .iter()
        .map(|n| map.get(n).and_then(|v| v.parse().ok()))
        .collect::<Option<Vec<f64>>>()
        .unwrap_or_default();
    let wss = num("wss")?;
    let lags = axis_lags(d, per_axis);
    Ok(FitResult {
        aic: aic(wss, structure.parameter_count(), lags.len()),
        structure,
        theta,
        wss,
        lags,
        weights: Vec::new(),
        delta: Vec::new(),
        n: Vec::new(),
        sigma: None,
        diagnostics: Default::default(),
    })
}

fn select(settings: &Settings) -> Result<PathBuf> {
    let mut run = Run::new(settings.output_dir()?);
    let mut fits = Vec::new();
    for name in settings.list("fits")? {
        let path = PathBuf::from(&name);
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        run.input(&path, crate::io::sha256_hex(&bytes));
        fits.push(read_fit_file(&path).stage(format!("read {name}"))?);
    }
    let ranked = model_select(&fits).stage("select")?;
    let best = ranked[0].aic;
    let mut s = String::from("rank,model,wss,parameters,lags,aic,delta_aic\n");
    for (i, f) in ranked.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},\"{}\",{},{},{},{},{}",
            i + 1,
            f.structure.label(),
            f.wss,
            f.parameter_count(),
            f.lag_count(),
            f.aic,
            f.aic - best
        );
    }
    run.write("selection.csv", s.as_bytes())?;
    run.note("best_model", ranked[0].structure.label());
    run.finish(settings)
}

// ---------------------------------------------------------------- diagnose

fn diagnose_command(settings: &Settings) -> Result<PathBuf> {
    let mut run = Run::new(settings.output_dir()?);
    let field = load_input(settings, &mut run).stage("ingest")?;
    let report = diagnose(&field, settings.count("bins")?)?;
    run.write("diagnose.txt", report.summary().as_bytes())?;
    if field.d() >= 2 {
        run.write("row_means.csv", Diagnosis::means_csv(&report.row_means, "row").as_bytes())?;
        run.write("column_means.csv", Diagnosis::means_csv(&report.column_means, "column").as_bytes())?;
    }
    run.write("histogram.csv", report.histogram_csv().as_bytes())?;
    if settings.flag("plots")? {
        let bins = &report.histogram;
        let series = [
            Series {
                name: "sample".into(),
                points: bins.iter().map(|b| (0.5 * (b.lower + b.upper), b.density)).collect(),
                markers: true,
            },
            Series {
                name: "standard normal".into(),
                points: bins.iter().map(|b| (0.5 * (b.lower + b.upper), b.normal)).collect(),
                markers: false,
            },
        ];
        run.write("histogram.svg", line_plot("standardized values", "value", "density", &series).as_bytes())?;
        if field.d() >= 2 {
            let index = |v: &[f64]| v.iter().enumerate().map(|(i, &m)| ((i + 1) as f64, m)).collect();
            let series = [
                Series {
                    name: "row means".into(),
                    points: index(&report.row_means),
                    markers: false,
                },
                Series {
                    name: "column means".into(),
                    points: index(&report.column_means),
                    markers: false,
                },
            ];
            run.write("means.svg", line_plot("marginal means", "index", "mean", &series).as_bytes())?;
        }
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    run.finish(settings)
}

// ---------------------------------------------------------------- study

fn study(settings: &Settings) -> Result<PathBuf> {
    let basis = basis(settings)?;
    let spec = model(settings, basis.kappa2())?;
    let mut config = StudyConfig::desk_scale(spec, basis, settings.parse("seed")?);
    config.n = settings.count("n")?;
    config.fine_delta = settings.positive("fine_delta")?;
    config.thin = settings.count("thin")?;
    config.truncation = settings.count("truncation")?;
    config.replications = settings.parse("replications")?;
    config.de.generations = settings.count("generations")?;
    let wanted = settings.list("cases")?;
    let all: BTreeMap<String, _> = standard_cases().into_iter().map(|c| (c.name.clone(), c)).collect();
    config.cases = wanted
        .iter()
        .map(|name| {
            all.get(name)
                .cloned()
                .ok_or_else(|| CliError::Validation(format!("unknown case `{name}`")))
        })
        .collect::<Result<_>>()?;
    let mut run = Run::new(settings.output_dir()?);
    let report = run_study(&config).stage("study")?;
    let names = config.structure().parameter_names();
    let plots = settings.flag("plots")?;
    for case in &report.cases {
        let name = &case.case.name;
        run.write_with(&format!("study_{name}.csv"), |b| case.write_csv(b))?;
        let mut s = format!("replication,{}\n", names.join(","));
        for (r, theta) in case.estimates.iter().enumerate() {
            let _ = writeln!(s, "{},{}", r + 1, csv_line(theta));
        }
        run.write(&format!("estimates_{name}.csv"), s.as_bytes())?;
        run.note(&format!("failures.{name}"), case.failures.len().to_string());
        if !case.failures.is_empty() {
            let mut f = String::new();
            for (r, e) in &case.failures {
                let _ = writeln!(f, "{} = {e}", r + 1);
            }
            run.write(&format!("failures_{name}.txt"), f.as_bytes())?;
        }
        if plots {
            let series: Vec<Series> = case
                .rows
                .iter()
                .enumerate()
                .map(|(k, row)| Series {
                    name: row.parameter.clone(),
                    points: case
                        .estimates
                        .iter()
                        .enumerate()
                        .map(|(r, t)| ((r + 1) as f64, t[k] - row.true_value))
                        .collect(),
                    markers: true,
                })
                .collect();
            let title = format!("{name}: estimate minus true value");
            run.write(&format!("study_{name}.svg"), line_plot(&title, "replication", "error", &series).as_bytes())?;
        }
    }
    run.finish(settings)
}
