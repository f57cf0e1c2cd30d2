//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use lipext_core::energy::{check_extension_energy, MeasureData};
use lipext_core::extension::{mcshane_samples, ExtensionEngine, Localization, PenalizationProfile};
use lipext_core::instances::{random_cloud, random_lipschitz, random_masses, unit_interval_grid, CloudShape};
use lipext_core::metric::{validate_instance, Geometry, MetricInstance, Samples};
use lipext_core::schedule::{build_schedule, plan_schedule, ScaleSchedule, ScheduleRequest};
use lipext_core::verification::{check_localization, cutoff_field};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// ---- independent oracles ----

fn lip_brute(inst: &MetricInstance, dom: &[usize], vals: &[f64]) -> f64 {
    let mut best: f64 = 0.0;
    for a in 0..dom.len() {
        for b in 0..dom.len() {
            if dom[a] != dom[b] {
                best = best.max((vals[a] - vals[b]).abs() / inst.distance(dom[a], dom[b]));
            }
        }
    }
    best
}

fn mcshane_brute(inst: &MetricInstance, slope: f64, y: usize) -> (f64, f64) {
    let mut up = f64::INFINITY;
    let mut lo = f64::NEG_INFINITY;
    for (&x, &g) in inst.subset().iter().zip(inst.values()) {
        up = up.min(g + slope * inst.distance(x, y));
        lo = lo.max(g - slope * inst.distance(x, y));
    }
    (lo, up)
}

/// `k` with `ε_{k-1} ≤ d < ε_k`, by linear scan.
fn bracket_scan(s: &ScaleSchedule, d: f64) -> Option<i64> {
    ((s.k_min() + 1)..=s.k_max()).find(|&k| s.eps(k - 1) <= d && d < s.eps(k))
}

fn value_scale(inst: &MetricInstance) -> f64 {
    1.0 + inst.max_abs_g() + inst.lipschitz() * inst.diameter_of(inst.subset())
}

fn cloud_instances(count: u64, seed0: u64) -> Vec<MetricInstance> {
    (0..count)
        .map(|i| {
            let seed = seed0 + i;
            validate_instance(random_cloud(seed, CloudShape::random(seed, 200, 50, 5))).unwrap()
        })
        .collect()
}

fn engine<'a>(inst: &'a MetricInstance, eps: f64, queries: &[usize]) -> ExtensionEngine<'a> {
    let s = plan_schedule(inst, queries, &ScheduleRequest::new(eps)).unwrap();
    ExtensionEngine::new(inst, s).unwrap()
}

fn values_at(e: &ExtensionEngine, points: &[usize]) -> Vec<f64> {
    let f = e.extend(points).unwrap();
    f.entries.iter().map(|x| x.value).collect()
}

// ---- criteria ----

fn criterion_1(insts: &[MetricInstance]) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for inst in insts {
        let all = inst.all_points();
        let f = values_at(&engine(inst, inst.lipschitz(), &all), &all);
        let tol = 1e-12 * (1.0 + inst.max_abs_g());
        for (&c, &g) in inst.subset().iter().zip(inst.values()) {
            let err = (f[c] - g).abs();
            worst = worst.max(err / tol);
            ok &= err <= tol;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(ok && secs < 10.0, format!("max |f-g|/tol = {worst:.3e}, {secs:.2} s"))
}

fn criterion_2(insts: &[MetricInstance]) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for inst in insts {
        let all = inst.all_points();
        let l = inst.lipschitz();
        for eps in [l, l / 2.0, l / 10.0] {
            let f = values_at(&engine(inst, eps, &all), &all);
            let lip = lip_brute(inst, &all, &f);
            worst = worst.max(lip - (l + eps));
        }
    }
    outcome(worst <= 1e-9, format!("max Lip(f) - (L+eps) = {worst:.3e}"))
}

fn criterion_3() -> Outcome {
    let inst = validate_instance(unit_interval_grid(1001)).unwrap();
    let all = inst.all_points();
    let (xi, r_bar) = (0.1, 0.5);
    let radii = [0.0015, 0.01, 0.1, 0.25, 0.5, 1.0];

    let start = Instant::now();
    let mc = mcshane_samples(&inst, 1.0, &all, true).unwrap();
    let mc_profile = inst.lipa_profile(&mc, 0, &radii);
    let req = ScheduleRequest { epsilon: 1.0, anchor: None, radii: vec![r_bar], xi: Some(xi) };
    let s = plan_schedule(&inst, &all, &req).unwrap().unwrap();
    let (k, r) = s.locality_radius(r_bar, xi, 1.0).unwrap();
    let e = ExtensionEngine::new(&inst, Some(s)).unwrap();
    let f = Samples { domain: all.clone(), values: values_at(&e, &all) };
    let lip_f_lib = inst.lip_constant(&inst.restrict_to_ball(&f, 0, r));
    let secs = start.elapsed().as_secs_f64();

    // f⁺(t) = min(t, 2 - t) = t on [0,1]
    let mut mc_dev: f64 = 0.0;
    for (j, &rad) in radii.iter().enumerate() {
        let ball = inst.restrict_to_ball(&mc, 0, rad);
        let oracle: Vec<f64> = ball.domain.iter().map(|&i| i as f64 / 1000.0).collect();
        mc_dev = mc_dev.max((mc_profile.constants[j] - 1.0).abs());
        mc_dev = mc_dev.max((lip_brute(&inst, &ball.domain, &oracle) - 1.0).abs());
    }
    let g_bar = inst.lip_constant(&inst.restrict_to_ball(&inst.g(), 0, r_bar));
    let ball = inst.restrict_to_ball(&f, 0, r);
    let lip_f = lip_brute(&inst, &ball.domain, &ball.values);
    let pass = mc_dev <= 1e-12 && g_bar == 0.0 && lip_f <= g_bar + xi && lip_f == lip_f_lib && secs < 1.0;
    outcome(
        pass,
        format!(
            "McShane |Lip-1| = {mc_dev:.1e}; scheduled k = {k}, r = {r:.3e} ({} grid points in ball), Lip(f,B_r(0)) = {lip_f} <= {xi}; {secs:.2} s",
            ball.len()
        ),
    )
}

fn criterion_4() -> Outcome {
    let insts = cloud_instances(20, 1000);
    let mut worst = f64::NEG_INFINITY;
    let mut pairs = 0u64;
    for inst in &insts {
        let e = engine(inst, inst.lipschitz() / 2.0, &inst.all_points());
        let s = e.schedule().unwrap();
        let tol = 1e-9 * value_scale(inst);
        let l = inst.lipschitz();
        for (px, &x) in inst.subset().iter().enumerate() {
            let gx = inst.values()[px];
            let pen = &e.profiles()[px];
            for (py, &y) in inst.subset().iter().enumerate() {
                if x == y {
                    continue;
                }
                let d = inst.distance(x, y);
                let Some(k) = bracket_scan(s, d) else {
                    return outcome(false, format!("no bracket for d({x},{y}) = {d}"));
                };
                let phi = gx + pen.eval(d);
                worst = worst.max(inst.values()[py] + s.eps(k - 2) * l - tol - phi);
                pairs += 1;
            }
        }
    }
    outcome(worst <= 0.0, format!("{pairs} ordered pairs, max violation = {worst:.3e}"))
}

fn criterion_5(insts: &[MetricInstance]) -> Outcome {
    let mut mismatches = 0;
    let mut queries = 0;
    let mut balls = 0;
    let mut margin_ok = true;
    for inst in insts {
        let all = inst.all_points();
        let e = engine(inst, inst.lipschitz(), &all);
        let f = e.extend(&all).unwrap();
        for entry in &f.entries {
            let (v, _, loc) = e.extend_localized(entry.index, e.nearest_anchor(entry.index)).unwrap();
            mismatches += usize::from(v.to_bits() != entry.value.to_bits());
            balls += usize::from(matches!(loc, Localization::Ball { .. }));
            queries += 1;
        }
        let [_, margin] = check_localization(&e, &all, false).unwrap();
        margin_ok &= margin.passed();
    }
    outcome(
        mismatches == 0 && margin_ok,
        format!("{queries} queries ({balls} localized to a ball), {mismatches} bit mismatches, exclusion margin {}", if margin_ok { "held" } else { "violated" }),
    )
}

fn criterion_6(insts: &[MetricInstance]) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for inst in insts {
        let all = inst.all_points();
        let l = inst.lipschitz();
        for eps in [l, l / 10.0] {
            let f = values_at(&engine(inst, eps, &all), &all);
            let slack = 1e-12 * value_scale(inst);
            for &y in &all {
                let (lo, up) = mcshane_brute(inst, l + eps, y);
                worst = worst.max(lo - f[y] - slack).max(f[y] - up - slack);
            }
        }
    }
    outcome(worst <= 0.0, format!("max envelope excess = {worst:.3e}"))
}

fn profile_ok(p: &PenalizationProfile, budget: f64) -> bool {
    let mut slopes = vec![p.base_slope];
    slopes.extend(&p.slopes);
    let monotone = slopes.windows(2).all(|w| w[0] <= w[1]) && p.slopes.last().map_or(true, |&s| s <= p.tail_slope);
    let range = slopes.iter().chain([&p.tail_slope]).all(|&s| (0.0..=budget).contains(&s));
    let mut acc = p.base_slope * p.breakpoints.first().copied().unwrap_or(0.0);
    let mut prefix = p.cumulative.first().map_or(true, |&c| c == acc);
    for i in 1..p.breakpoints.len() {
        acc += p.slopes[i - 1] * (p.breakpoints[i] - p.breakpoints[i - 1]);
        prefix &= p.cumulative[i] == acc;
    }
    monotone && range && prefix && p.eval(0.0) == 0.0
}

fn criterion_7(insts: &[MetricInstance]) -> Outcome {
    let mut count = 0;
    let mut bad = 0;
    for inst in insts {
        let l = inst.lipschitz();
        for eps in [l, l / 2.0, l / 10.0] {
            let e = engine(inst, eps, &inst.all_points());
            for p in e.profiles() {
                count += 1;
                bad += usize::from(!profile_ok(p, e.budget()) || p.check_legal(e.budget()).is_err());
            }
        }
    }
    outcome(bad == 0, format!("{count} profiles, {bad} illegal"))
}

/// A cloud plus a ray of points leaving the unit cube, so the cutoff
/// region is populated.
fn cloud_with_ray(seed: u64) -> MetricInstance {
    let mut raw = random_cloud(seed, CloudShape { n: 60, subset_size: 10, dim: 2 });
    let Geometry::Euclidean { coords } = &mut raw.geometry else { unreachable!() };
    for j in 1..=40 {
        let t = 1.0 + 0.5 * j as f64;
        coords.push(vec![t, 0.5 * t]);
    }
    validate_instance(raw).unwrap()
}

fn criterion_8() -> Outcome {
    let mut worst_lip = f64::NEG_INFINITY;
    let mut worst_restr: f64 = 0.0;
    let mut nonzero_far = 0;
    let mut far = 0;
    for seed in 0..10 {
        let inst = cloud_with_ray(500 + seed);
        let all = inst.all_points();
        let l = inst.lipschitz();
        for eps in [l, l / 4.0] {
            let field = cutoff_field(&inst, eps, None, None, &all).unwrap();
            let f: Vec<f64> = field.entries.iter().map(|e| e.value).collect();
            let m = inst.max_abs_g();
            let outer = 4.0 * m / eps;
            for &y in &all {
                if inst.distance_to_subset(y) >= outer {
                    far += 1;
                    nonzero_far += usize::from(f[y] != 0.0);
                }
            }
            for (&c, &g) in inst.subset().iter().zip(inst.values()) {
                worst_restr = worst_restr.max((f[c] - g).abs());
            }
            worst_lip = worst_lip.max(lip_brute(&inst, &all, &f) - (l + eps));
        }
    }
    outcome(
        nonzero_far == 0 && far > 0 && worst_restr <= 1e-12 && worst_lip <= 1e-9,
        format!("{far} far points all zero: {}, max |f-g| on C = {worst_restr:.1e}, max Lip - (L+eps) = {worst_lip:.3e}", nonzero_far == 0),
    )
}

fn energy_brute(inst: &MetricInstance, dom: &[usize], vals: &[f64], masses: &[f64], p: f64, r: f64) -> f64 {
    let mut total = 0.0;
    for (i, &m) in masses.iter().enumerate() {
        if m > 0.0 {
            let ball: Vec<usize> = (0..dom.len()).filter(|&a| inst.distance(i, dom[a]) < r).collect();
            let d: Vec<usize> = ball.iter().map(|&a| dom[a]).collect();
            let v: Vec<f64> = ball.iter().map(|&a| vals[a]).collect();
            total += m * lip_brute(inst, &d, &v).powf(p);
        }
    }
    total
}

fn criterion_9() -> Outcome {
    let insts = cloud_instances(20, 2000);
    let radii: Vec<f64> = (1..=10).map(|i| 0.05 * i as f64 * 3f64.sqrt()).collect();
    let r_bars = [0.2, 0.5, 1.0];
    let xi = 0.05;
    let mut mono_bad = 0;
    let mut ext_bad = 0;
    let mut checks = 0;
    for (s, inst) in insts.iter().enumerate() {
        let masses = random_masses(inst, s as u64);
        let all = inst.all_points();
        let h = random_lipschitz(inst, 77 + s as u64);
        let sub: Vec<usize> = inst.subset().to_vec();
        let h_c: Vec<f64> = sub.iter().map(|&c| h[c]).collect();
        let req = ScheduleRequest { epsilon: inst.lipschitz(), anchor: None, radii: r_bars.to_vec(), xi: Some(xi) };
        let sched = plan_schedule(inst, &all, &req).unwrap();
        let e = ExtensionEngine::new(inst, sched).unwrap();
        let f = values_at(&e, &all);
        for p in [1.0, 2.0] {
            for &r in &radii {
                let ex = energy_brute(inst, &all, &h, &masses, p, r);
                let ec = energy_brute(inst, &sub, &h_c, &masses, p, r);
                mono_bad += usize::from(ec > ex + 1e-9);
                checks += 1;
            }
            let measure = MeasureData::new(inst, masses.clone(), p).unwrap();
            let (res, rows) = check_extension_energy(&e, &measure, &r_bars, xi).unwrap();
            ext_bad += usize::from(!res.passed());
            for row in rows {
                let ex = energy_brute(inst, &all, &f, &masses, p, row.scheduled_r);
                let mut bound = 0.0;
                for (i, &m) in masses.iter().enumerate() {
                    if m > 0.0 {
                        let ball: Vec<usize> = sub.iter().copied().filter(|&c| inst.distance(i, c) < row.r_bar).collect();
                        let v: Vec<f64> = ball.iter().map(|&c| inst.g_at(c).unwrap()).collect();
                        bound += m * (lip_brute(inst, &ball, &v) + xi).powf(p);
                    }
                }
                ext_bad += usize::from(ex > bound + 1e-9 * (1.0 + bound));
                checks += 1;
            }
        }
    }
    outcome(
        mono_bad == 0 && ext_bad == 0,
        format!("{checks} comparisons, {mono_bad} monotonicity and {ext_bad} extension-energy failures (integrand level)"),
    )
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut bad = 0;
    let mut scales = 0;
    for _ in 0..100 {
        let l = 10f64.powf(rng.gen_range(-3.0..3.0));
        let eps = 10f64.powf(rng.gen_range(-3.0..3.0));
        let anchor = 10f64.powf(rng.gen_range(-2.0..2.0));
        let hi = anchor * 10f64.powf(rng.gen_range(0.0..2.0));
        let lo = hi * 10f64.powf(rng.gen_range(-8.0..-1.0));
        let s = build_schedule(l, eps, anchor, lo, hi).unwrap();
        let e = eps.min(l);
        let bound = e / (3.0 * (l + e));
        for k in (s.k_min() + 1)..=s.k_max() {
            scales += 1;
            let r = s.eps(k - 1) / s.eps(k);
            let mut ok = s.ratio(k) <= bound && s.eps(k - 1) == s.ratio(k) * s.eps(k) && r <= bound * (1.0 + 1e-15);
            if k >= s.k_min() + 2 {
                ok &= s.ratio(k - 1) <= s.ratio(k) && 3.0 * s.eps(k - 2) <= s.eps(k - 1);
            }
            bad += usize::from(!ok);
        }
    }
    outcome(bad == 0, format!("100 (L, eps) pairs, {scales} scales, {bad} violations"))
}

fn main() -> ExitCode {
    let insts = cloud_instances(50, 0);
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("extension identity", Box::new(|| criterion_1(&insts))),
        ("global budget", Box::new(|| criterion_2(&insts))),
        ("unit interval counterexample", Box::new(criterion_3)),
        ("separation inequality", Box::new(criterion_4)),
        ("localization equivalence", Box::new(|| criterion_5(&insts))),
        ("envelope sandwich", Box::new(|| criterion_6(&insts))),
        ("profile legality", Box::new(|| criterion_7(&insts))),
        ("bounded-support composition", Box::new(criterion_8)),
        ("energy integrand checks", Box::new(criterion_9)),
        ("schedule laws", Box::new(criterion_10)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failed += usize::from(!o.pass);
        println!("criterion {:>2} {:<28} {}  {}", i + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
