use std::fs;
use std::path::{Path, PathBuf};

use lipext_core::energy::{
    check_extension_energy, check_restriction_monotonicity, EnergyReport, ExtensionEnergyRow, MeasureData,
    INTEGRAND_NOTE,
};
use lipext_core::extension::{mcshane_samples, truncate_bounded, ExtensionEngine, ExtensionField};
use lipext_core::instances::unit_interval_grid;
use lipext_core::io::InstanceFile;
use lipext_core::metric::{validate_instance, MetricInstance, RadiusProfile};
use lipext_core::schedule::{plan_schedule, ScheduleRequest};
use lipext_core::verification::{cutoff_field, run_battery, BatteryConfig, CheckResult, PairSampling};
use serde::Serialize;

use crate::error::{CliError, SCHEMA_VERSION};
use crate::{DemoArgs, EnergyArgs, ExtendArgs, VerifyArgs};

fn load(path: &Path) -> Result<(MetricInstance, Option<Vec<f64>>), CliError> {
    let text = fs::read_to_string(path)?;
    let file: InstanceFile = serde_json::from_str(&text)?;
    let (raw, masses) = file.into_raw();
    Ok((validate_instance(raw)?, masses))
}

fn emit<T: Serialize>(value: &T, output: Option<&PathBuf>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match output {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::param(name, format!("{name} must be positive and finite, got {v}")))
    }
}

fn parse_list<T: std::str::FromStr>(name: &str, text: &str) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| CliError::param(name, format!("cannot parse {s:?} in --{name}"))))
        .collect()
}

fn parse_radii(name: &str, text: &str) -> Result<Vec<f64>, CliError> {
    let radii: Vec<f64> = parse_list(name, text)?;
    radii.into_iter().map(|r| positive(name, r)).collect()
}

fn queries(inst: &MetricInstance, spec: Option<&str>) -> Result<Vec<usize>, CliError> {
    let q = match spec.map(str::trim) {
        None => inst.complement(),
        Some("all") => inst.all_points(),
        Some(list) => parse_list("queries", list)?,
    };
    if let Some(&bad) = q.iter().find(|&&i| i >= inst.len()) {
        let mut e = CliError::param("queries", format!("query {bad} out of range for {} points", inst.len()));
        e.witness = vec![bad];
        return Err(e);
    }
    Ok(q)
}

#[derive(Serialize)]
struct Validated {
    schema_version: u32,
    ok: bool,
    points: usize,
    subset_size: usize,
    lipschitz: f64,
    computed_lipschitz: f64,
    diameter: f64,
    has_masses: bool,
}

pub fn validate(path: &Path) -> Result<(), CliError> {
    let (inst, masses) = load(path)?;
    let has_masses = masses.is_some();
    if let Some(m) = masses {
        MeasureData::new(&inst, m, 1.0)?;
    }
    emit(
        &Validated {
            schema_version: SCHEMA_VERSION,
            ok: true,
            points: inst.len(),
            subset_size: inst.subset().len(),
            lipschitz: inst.lipschitz(),
            computed_lipschitz: inst.computed_lipschitz(),
            diameter: inst.diameter(),
            has_masses,
        },
        None,
    )
}

#[derive(Serialize)]
struct Versioned<'a, T> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

fn versioned<T>(body: &T) -> Versioned<'_, T> {
    Versioned { schema_version: SCHEMA_VERSION, body }
}

pub fn extend(a: &ExtendArgs) -> Result<(), CliError> {
    let (inst, _) = load(&a.input.input)?;
    let epsilon = positive("epsilon", a.epsilon)?;
    let anchor = a.anchor.map(|v| positive("anchor", v)).transpose()?;
    let q = queries(&inst, a.queries.as_deref())?;
    let field: ExtensionField = if a.cutoff {
        cutoff_field(&inst, epsilon, anchor, a.bounded, &q)?
    } else {
        let req = ScheduleRequest { epsilon, anchor, radii: Vec::new(), xi: None };
        let engine = ExtensionEngine::new(&inst, plan_schedule(&inst, &q, &req)?)?;
        let mut field = engine.extend(&q)?;
        field.epsilon = epsilon;
        match a.bounded {
            Some(b) => truncate_bounded(&field, &inst, b)?,
            None => field,
        }
    };
    emit(&versioned(&field), a.output.as_ref())
}

fn status_line(c: &CheckResult) -> String {
    let tag = match c.status {
        lipext_core::Status::Pass => "PASS",
        lipext_core::Status::Fail => "FAIL",
        lipext_core::Status::PreconditionViolated => "PRECONDITION",
    };
    format!("{tag} {}", c.name)
}

pub fn verify(a: &VerifyArgs) -> Result<(), CliError> {
    let (inst, _) = load(&a.input.input)?;
    let epsilon = positive("epsilon", a.epsilon)?;
    let xi = positive("xi", a.xi)?;
    let r_bars = a.rbar.as_deref().map(|s| parse_radii("rbar", s)).transpose()?.unwrap_or_default();
    let cfg = BatteryConfig {
        epsilon,
        xi,
        r_bars,
        anchor: a.anchor.map(|v| positive("anchor", v)).transpose()?,
        sampling: PairSampling { seed: a.seed, ..PairSampling::default() },
        inject_fault: a.inject_fault,
    };
    let report = run_battery(&inst, &cfg)?;
    emit(&report, a.output.as_ref())?;
    if a.output.is_some() {
        for c in &report.checks {
            println!("{}", status_line(c));
        }
    }
    if report.all_passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
        Err(CliError::property(format!("failed checks: {}", failed.join(", "))))
    }
}

#[derive(Serialize)]
struct MonotonicitySide {
    check: CheckResult,
    reports: Vec<EnergyReport>,
}

#[derive(Serialize)]
struct ExtensionEnergy {
    check: CheckResult,
    rows: Vec<ExtensionEnergyRow>,
}

#[derive(Serialize)]
struct EnergyOut {
    schema_version: u32,
    note: &'static str,
    p: f64,
    xi: f64,
    epsilon: f64,
    radii: Vec<f64>,
    masses: Vec<f64>,
    /// `h` = McShane upper envelope at slope `L`
    mcshane: MonotonicitySide,
    /// `h` = the constant-preserving extension
    extension: MonotonicitySide,
    extension_energy: ExtensionEnergy,
    all_passed: bool,
}

pub fn energy(a: &EnergyArgs) -> Result<(), CliError> {
    let (inst, masses) = load(&a.input.input)?;
    let radii = parse_radii("radii", &a.radii)?;
    let xi = positive("xi", a.xi)?;
    let masses = masses.unwrap_or_else(|| {
        let mut m = vec![0.0; inst.len()];
        for &c in inst.subset() {
            m[c] = 1.0;
        }
        m
    });
    let measure = MeasureData::new(&inst, masses, a.p)?;
    let l = inst.lipschitz();
    let epsilon = positive("epsilon", a.epsilon.unwrap_or(if l > 0.0 { l } else { 1.0 }))?;
    let all = inst.all_points();

    let mc = mcshane_samples(&inst, l, &all, true)?;
    let (check, reports) = check_restriction_monotonicity(&inst, &mc, &measure, &radii)?;
    let mcshane = MonotonicitySide { check, reports };

    let req = ScheduleRequest { epsilon, anchor: None, radii: radii.clone(), xi: Some(xi) };
    let engine = ExtensionEngine::new(&inst, plan_schedule(&inst, &all, &req)?)?;
    let f = engine.extend(&all)?.samples_with(&inst);
    let (check, reports) = check_restriction_monotonicity(&inst, &f, &measure, &radii)?;
    let extension = MonotonicitySide { check, reports };
    let (check, rows) = check_extension_energy(&engine, &measure, &radii, xi)?;
    let extension_energy = ExtensionEnergy { check, rows };

    let all_passed = mcshane.check.passed() && extension.check.passed() && extension_energy.check.passed();
    let out = EnergyOut {
        schema_version: SCHEMA_VERSION,
        note: INTEGRAND_NOTE,
        p: a.p,
        xi,
        epsilon,
        radii,
        masses: measure.masses().to_vec(),
        mcshane,
        extension,
        extension_energy,
        all_passed,
    };
    emit(&out, a.output.as_ref())?;
    if all_passed {
        Ok(())
    } else {
        Err(CliError::property("energy comparison failed"))
    }
}

#[derive(Serialize)]
struct DemoOut {
    schema_version: u32,
    n: usize,
    epsilon: f64,
    xi: f64,
    r_bar: f64,
    scheduled_k: i64,
    scheduled_r: f64,
    lip_g_bar: f64,
    lip_extension_at_r: f64,
    mcshane: RadiusProfile,
    extension: RadiusProfile,
    pass: bool,
}

pub fn demo(a: &DemoArgs) -> Result<(), CliError> {
    let xi = positive("xi", a.xi)?;
    let epsilon = positive("epsilon", a.epsilon)?;
    let r_bar = positive("rbar", a.rbar)?;
    if a.n < 2 {
        return Err(CliError::param("n", "n must be at least 2"));
    }
    let inst = validate_instance(unit_interval_grid(a.n))?;
    let h = 1.0 / (a.n - 1) as f64;
    let all = inst.all_points();
    let req = ScheduleRequest { epsilon, anchor: None, radii: vec![r_bar], xi: Some(xi) };
    let schedule = plan_schedule(&inst, &all, &req)?.expect("g = id is not constant");
    let (k, r) = schedule.locality_radius(r_bar, xi, inst.lipschitz())?;
    let engine = ExtensionEngine::new(&inst, Some(schedule))?;
    let f = engine.extend(&all)?.samples_with(&inst);
    let mc = mcshane_samples(&inst, inst.lipschitz(), &all, true)?;

    let mut radii = vec![r, 0.005, 0.01, 0.1, 0.25, 0.5, 1.0];
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    // McShane balls hold at least two grid points
    let mut mc_radii: Vec<f64> = radii.iter().map(|&x| x.max(1.5 * h)).collect();
    mc_radii.dedup();
    let mcshane = inst.lipa_profile(&mc, 0, &mc_radii);
    let extension = inst.lipa_profile(&f, 0, &radii);

    let lip_g_bar = inst.lip_constant(&inst.restrict_to_ball(&inst.g(), 0, r_bar));
    let lip_at_r = inst.lip_constant(&inst.restrict_to_ball(&f, 0, r));
    let mc_one = mcshane.constants.iter().all(|&c| (c - 1.0).abs() <= 1e-12);
    let pass = mc_one && lip_at_r <= lip_g_bar + xi;

    println!("grid n = {}, eps = {epsilon}, xi = {xi}, r_bar = {r_bar}", a.n);
    println!("scheduled k = {k}, r = {r:e}, bound Lip(g, C∩B_r_bar(0)) + xi = {}", lip_g_bar + xi);
    println!("{:>14} {:>14} {:>14} {:>14}", "r", "ext Lip(f,B_r)", "McShane r", "McShane Lip");
    for (i, &rad) in radii.iter().enumerate() {
        let mr = rad.max(1.5 * h);
        let j = mc_radii.iter().position(|&x| x == mr).unwrap();
        println!("{:>14.6e} {:>14.6} {:>14.6e} {:>14.6}", rad, extension.constants[i], mr, mcshane.constants[j]);
    }
    println!("{}", if pass { "PASS" } else { "FAIL" });

    if let Some(out) = &a.output {
        let body = DemoOut {
            schema_version: SCHEMA_VERSION,
            n: a.n,
            epsilon,
            xi,
            r_bar,
            scheduled_k: k,
            scheduled_r: r,
            lip_g_bar,
            lip_extension_at_r: lip_at_r,
            mcshane,
            extension,
            pass,
        };
        emit(&body, Some(out))?;
    }
    if pass {
        Ok(())
    } else {
        Err(CliError::property("demo comparison failed"))
    }
}
