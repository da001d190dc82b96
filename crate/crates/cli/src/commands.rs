use serde_json::{json, Map, Value};

use moyal_core::feynman_kac::star_exp_at;
use moyal_core::oracle::{eigen_ground, oracle_for, DEFAULT_EIGENPAIRS};
use moyal_core::{
    closed_form, default_schedule, ground_energy as fit_ground_energy, ground_energy_complex, partition_trace, phase_space_trace,
    real_time_spectrum, sample_real, star_kernel_route, star_series, weyl_kernel, FitStatus, Function,
    Grid, Hamiltonian, HermitianSpectrum, Quantization, Route, SeriesOrder, SpectrumEstimate, TimeMode,
    TraceCurve, C64,
};

use crate::config::RunConfig;
use crate::output::{fmt, function_csv, kernel_csv, num, path, write_json, Csv};
use crate::{expr, CliError, Report};

fn status_code(s: FitStatus) -> u8 {
    match s {
        FitStatus::Converged => 0,
        FitStatus::DivergentTrace => 3,
        FitStatus::UnboundedBelow => 4,
        FitStatus::ContinuousSpectrumSuspected => 5,
    }
}

fn cnum(z: C64) -> Value {
    json!({ "re": num(z.re), "im": num(z.im) })
}

fn parse_factor(name: &str, src: &str, grid: &Grid) -> Result<Function, CliError> {
    let e = expr::parse(src).map_err(|e| CliError::Config(format!("{name} = \"{src}\": {e}")))?;
    Ok(sample_real(grid, |x, p| e.eval(x, p))?)
}

fn product(route: Route, f: &Function, g: &Function, q: Quantization, order: usize) -> Result<Function, CliError> {
    match route {
        Route::Kernel => Ok(star_kernel_route(f, g, q)?),
        Route::Series => Ok(star_series(f, g, q, SeriesOrder::new(order))?),
        r => Err(CliError::Config(format!("star-prod supports the kernel and series routes, not {r}"))),
    }
}

pub fn star_prod(c: &RunConfig, f: Option<&str>, g: Option<&str>) -> Result<Report, CliError> {
    let q = c.quantization()?;
    let grid = c.grid()?;
    let sp = c.star_prod.as_ref();
    let f_src = f
        .map(str::to_string)
        .or_else(|| sp.and_then(|s| s.f.clone()))
        .ok_or_else(|| CliError::Config("no left factor: pass --f or set star_prod.f".into()))?;
    let g_src = g
        .map(str::to_string)
        .or_else(|| sp.and_then(|s| s.g.clone()))
        .ok_or_else(|| CliError::Config("no right factor: pass --g or set star_prod.g".into()))?;
    let order = sp.map_or(8, |s| s.order);
    let fv = parse_factor("f", &f_src, &grid)?;
    let gv = parse_factor("g", &g_src, &grid)?;
    let route = c.route().unwrap_or(Route::Series);
    let prod = product(route, &fv, &gv, q, order)?;

    let corr = prod.sub(&fv.mul(&gv)?)?.values();
    let fold = |sel: fn(&C64) -> f64| {
        corr.iter().map(sel).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (re_lo, re_hi) = fold(|z| z.re);
    let (im_lo, im_hi) = fold(|z| z.im);
    let mut report = Map::new();
    report.insert("route".into(), json!(route.name()));
    report.insert("f".into(), json!(f_src));
    report.insert("g".into(), json!(g_src));
    report.insert("hbar".into(), num(q.hbar));
    report.insert(
        "correction".into(),
        json!({ "re_min": num(re_lo), "re_max": num(re_hi), "im_min": num(im_lo), "im_max": num(im_hi) }),
    );
    let mut lines = vec![
        format!("route {}: f⋆g − fg has real part in [{}, {}]", route, fmt(re_lo), fmt(re_hi)),
        format!("route {}: f⋆g − fg has imaginary part in [{}, {}]", route, fmt(im_lo), fmt(im_hi)),
    ];
    if c.verify {
        let other = if route == Route::Kernel { Route::Series } else { Route::Kernel };
        let alt = product(other, &fv, &gv, q, order)?;
        let diff = alt.max_abs_diff(&prod)?;
        report.insert("agreement".into(), json!({ "route": other.name(), "max_abs_diff": num(diff) }));
        lines.push(format!("max |{route} − {other}| = {}", fmt(diff)));
    }
    let dir = &c.output.dir;
    if c.output.format.csv() {
        function_csv(&prod).write(&path(dir, "product.csv"))?;
    }
    if c.output.format.json() {
        write_json(&path(dir, "star_prod.json"), &Value::Object(report))?;
    }
    Ok(Report { code: 0, lines })
}

pub fn star_exp(c: &RunConfig, dump_kernel: bool) -> Result<Report, CliError> {
    let q = c.quantization()?;
    let grid = c.grid()?;
    let spec = c.hamiltonian()?;
    let se = c
        .star_exp
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [star_exp] table with tau".into()))?;
    let default_route = if spec.damping().is_some() { Route::Ode } else { Route::Kernel };
    let route = c.route().unwrap_or(default_route);
    let e = star_exp_at(&spec, q, &grid, se.tau, route, se.substeps)?;
    let z = phase_space_trace(&e, q);
    let mut summary = Map::new();
    summary.insert("family".into(), json!(spec.family_name()));
    summary.insert("route".into(), json!(route.name()));
    summary.insert("tau".into(), num(se.tau));
    summary.insert("trace".into(), cnum(z));
    summary.insert("max_imag".into(), num(e.max_imag_abs()));
    let mut lines = vec![format!("Z({}) = {} + {}i via {route}", se.tau, fmt(z.re), fmt(z.im))];
    if c.verify {
        match closed_form(&spec, q, &grid, C64::new(se.tau, 0.0)) {
            Ok(exact) => {
                let d = exact.max_abs_diff(&e)?;
                summary.insert("closed_form_max_abs_diff".into(), num(d));
                lines.push(format!("max |{route} − closed form| = {}", fmt(d)));
            }
            Err(err) => {
                summary.insert("closed_form_max_abs_diff".into(), Value::Null);
                lines.push(format!("no closed form: {err}"));
            }
        }
    }
    let dir = &c.output.dir;
    if c.output.format.csv() {
        function_csv(&e).write(&path(dir, "star_exp.csv"))?;
        if dump_kernel {
            kernel_csv(&weyl_kernel(&spec.sample(&grid)?, q)).write(&path(dir, "kernel.csv"))?;
        }
    }
    if c.output.format.json() {
        write_json(&path(dir, "star_exp.json"), &Value::Object(summary))?;
    }
    Ok(Report { code: 0, lines })
}

fn trace_csv(curve: &TraceCurve<f64>) -> Csv {
    let mut csv = Csv::new(&["tau", "re_z", "im_z", "diagnostic"]);
    for ((t, z), d) in curve.times().iter().zip(curve.values()).zip(curve.diagnostics()) {
        csv.nums(&[*t, z.re, z.im, *d]);
    }
    csv
}

fn estimate_json(spec: &Hamiltonian, route: Route, est: &SpectrumEstimate<f64>) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("family".into(), json!(spec.family_name()));
    m.insert("route".into(), json!(route.name()));
    m.insert("e0".into(), cnum(est.e0));
    m.insert("degeneracy".into(), num(est.degeneracy));
    m.insert("window".into(), json!([num(est.fit_window.0), num(est.fit_window.1)]));
    m.insert("residual".into(), num(est.residual));
    m.insert("uncertainty".into(), num(est.uncertainty));
    m.insert("slope_drift".into(), num(est.slope_drift));
    m.insert("points".into(), json!(est.points));
    m.insert("status".into(), json!(est.status.name()));
    m
}

/// Oracle vs engine levels; `None` when the family has no oracle.
fn verify_levels(spec: &Hamiltonian, grid: &Grid, q: Quantization) -> Result<Option<Vec<(f64, f64)>>, CliError> {
    let h = match oracle_for(spec, grid, q, 3) {
        Ok(h) => h,
        Err(moyal_core::Error::Unsupported(_)) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let k = DEFAULT_EIGENPAIRS.min(grid.n_x());
    let oracle = eigen_ground(&h, k)?;
    let engine = HermitianSpectrum::new(&weyl_kernel(&spec.sample(grid)?, q))?;
    Ok(Some(oracle.iter().enumerate().map(|(n, (e, _))| (*e, engine.eigenvalues()[n])).collect()))
}

fn verify_csv(levels: &[(f64, f64)]) -> Csv {
    let mut csv = Csv::new(&["n", "oracle", "engine", "abs_diff"]);
    for (n, (o, e)) in levels.iter().enumerate() {
        csv.row(&[n.to_string(), fmt(*o), fmt(*e), fmt((o - e).abs())]);
    }
    csv
}

pub fn ground_energy(c: &RunConfig) -> Result<Report, CliError> {
    let q = c.quantization()?;
    let grid = c.grid()?;
    let spec = c.hamiltonian()?;
    let schedule = match c.schedule {
        Some(_) => c.schedule(TimeMode::Imaginary)?,
        None => default_schedule(),
    };
    let damped = spec.damping().is_some();
    let route = c.route().unwrap_or(if damped { Route::ClosedForm } else { Route::Kernel });
    // the damped closed form is traced over the whole plane rather than the box
    let curve = if damped && route == Route::ClosedForm {
        TraceCurve::exact(&spec, schedule.samples())?
    } else {
        partition_trace(&spec, q, &grid, &schedule, route)?
    };
    let dir = &c.output.dir;
    if c.output.format.csv() {
        trace_csv(&curve).write(&path(dir, "trace.csv"))?;
    }
    if let Some(err) = curve.failure() {
        return Err(CliError::Runtime(format!(
            "trace stopped after {} of {} points: {err}",
            curve.len(),
            schedule.samples().len()
        )));
    }
    let window = c.fit_window();
    let est = if damped { ground_energy_complex(&curve, q, window)? } else { fit_ground_energy(&curve, q, window)? };
    let mut summary = estimate_json(&spec, route, &est);
    let mut lines = vec![
        format!("e0 = {} + {}i ± {}", fmt(est.e0.re), fmt(est.e0.im), fmt(est.uncertainty)),
        format!("status: {}", est.status),
    ];
    if c.verify {
        match verify_levels(&spec, &grid, q)? {
            Some(levels) => {
                let d = (levels[0].0 - est.e0.re).abs();
                summary.insert("verify".into(), json!({ "oracle_e0": num(levels[0].0), "abs_diff": num(d) }));
                lines.push(format!("oracle E0 = {} (|Δ| = {})", fmt(levels[0].0), fmt(d)));
                if c.output.format.csv() {
                    verify_csv(&levels).write(&path(dir, "verify.csv"))?;
                }
            }
            None => {
                summary.insert("verify".into(), json!({ "unsupported": spec.family_name() }));
                lines.push(format!("no position-space oracle for the {} family", spec.family_name()));
            }
        }
    }
    if c.output.format.json() {
        write_json(&path(dir, "summary.json"), &Value::Object(summary))?;
    }
    Ok(Report { code: status_code(est.status), lines })
}

pub fn spectrum(c: &RunConfig) -> Result<Report, CliError> {
    let q = c.quantization()?;
    let grid = c.grid()?;
    let spec = c.hamiltonian()?;
    let schedule = c.schedule(TimeMode::Real)?;
    let range = c.spectrum.as_ref().map(|s| (s.energy_min, s.energy_max));
    let s = real_time_spectrum(&spec, q, &grid, &schedule, range)?;
    let dir = &c.output.dir;
    let mut lines: Vec<String> =
        s.peaks.iter().map(|p| format!("peak E = {} weight {}", fmt(p.energy), fmt(p.weight))).collect();
    let mut summary = Map::new();
    summary.insert("family".into(), json!(spec.family_name()));
    summary.insert("resolution".into(), num(s.resolution));
    summary.insert("unresolved".into(), json!(s.unresolved));
    summary.insert("aliased".into(), json!(s.aliased));
    summary.insert(
        "peaks".into(),
        Value::Array(s.peaks.iter().map(|p| json!({ "energy": num(p.energy), "weight": num(p.weight) })).collect()),
    );
    if c.verify {
        if let Some(levels) = verify_levels(&spec, &grid, q)? {
            let oracle: Vec<Value> = levels.iter().map(|l| num(l.0)).collect();
            summary.insert("oracle_levels".into(), Value::Array(oracle));
            if c.output.format.csv() {
                verify_csv(&levels).write(&path(dir, "verify.csv"))?;
            }
        }
    }
    if c.output.format.csv() {
        let mut peaks = Csv::new(&["energy", "weight"]);
        for p in &s.peaks {
            peaks.nums(&[p.energy, p.weight]);
        }
        peaks.write(&path(dir, "peaks.csv"))?;
        let mut amp = Csv::new(&["energy", "amplitude"]);
        for (e, a) in s.energies.iter().zip(&s.amplitude) {
            amp.nums(&[*e, *a]);
        }
        amp.write(&path(dir, "amplitude.csv"))?;
    }
    if c.output.format.json() {
        write_json(&path(dir, "peaks.json"), &Value::Object(summary))?;
    }
    let code = if s.unresolved > 0 {
        lines.push(format!("warning: {} levels closer than the resolution {}", s.unresolved, fmt(s.resolution)));
        6
    } else {
        0
    };
    Ok(Report { code, lines })
}
