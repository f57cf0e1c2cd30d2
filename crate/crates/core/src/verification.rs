//! Executable checks of the quantitative properties of the extension.
//!
//! Every check returns a [`CheckResult`] carrying the worst case it saw; a
//! failing check always carries a witness. Pair scans are exhaustive up to
//! [`PairSampling::max_pairs`] pairs and uniformly subsampled beyond that,
//! in which case the result is labeled statistical through its coverage.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::extension::{
    cutoff_support, mcshane_lower, mcshane_samples, mcshane_upper, truncate_bounded, EngineError, ExtensionEngine,
    ExtensionField, Localization,
};
use crate::metric::{MetricInstance, RadiusProfile, Samples};
use crate::schedule::{plan_schedule, ScaleEntry, ScaleSchedule, ScheduleError, ScheduleRequest, TAIL_RTOL};

/// Tolerance for identities, relative to the value scale.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Tolerance for inequalities.
pub const INEQUALITY_TOL: f64 = 1e-9;
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("invalid parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    PreconditionViolated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub points: Vec<usize>,
    pub measured: f64,
    pub allowed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coverage {
    pub checked: u64,
    pub total: u64,
    pub exhaustive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    pub witness: Option<Witness>,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<Coverage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Tracks the item with the largest `measured - allowed`.
struct Worst {
    excess: f64,
    witness: Option<Witness>,
}

impl Worst {
    fn new() -> Self {
        Self { excess: f64::NEG_INFINITY, witness: None }
    }

    fn observe(&mut self, points: impl FnOnce() -> Vec<usize>, measured: f64, allowed: f64) {
        let excess = measured - allowed;
        // NaN counts as the worst possible outcome
        if excess > self.excess || excess.is_nan() && !self.excess.is_nan() {
            self.excess = excess;
            self.witness = Some(Witness { points: points(), measured, allowed });
        }
    }

    fn finish(self, name: impl Into<String>, tolerance: f64, coverage: Option<Coverage>) -> CheckResult {
        let failed = self.excess.is_nan() || self.excess > tolerance;
        CheckResult {
            name: name.into(),
            status: if failed { Status::Fail } else { Status::Pass },
            witness: self.witness,
            tolerance,
            coverage,
            note: None,
        }
    }
}

/// Limits for pair scans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSampling {
    pub max_pairs: u64,
    pub seed: u64,
}

impl Default for PairSampling {
    fn default() -> Self {
        Self { max_pairs: 500_000, seed: 0 }
    }
}

/// Calls `f(a, b)` for index pairs `a < b` below `n`: all of them, or
/// `max_pairs` uniform samples.
pub fn for_pairs(n: usize, sampling: PairSampling, mut f: impl FnMut(usize, usize)) -> Coverage {
    let total = (n as u64) * (n.saturating_sub(1) as u64) / 2;
    if total <= sampling.max_pairs {
        for a in 0..n {
            for b in (a + 1)..n {
                f(a, b);
            }
        }
        return Coverage { checked: total, total, exhaustive: true };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    for _ in 0..sampling.max_pairs {
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        f(a.min(b), a.max(b));
    }
    Coverage { checked: sampling.max_pairs, total, exhaustive: false }
}

/// `1 + sup|g| + L·diam(C)`, the scale of values the checks compare.
pub fn value_scale(instance: &MetricInstance) -> f64 {
    1.0 + instance.max_abs_g() + instance.lipschitz() * instance.diameter_of(instance.subset())
}

/// Sampled Lipschitz constant with the pair that attains it.
pub fn sampled_lipschitz(instance: &MetricInstance, s: &Samples, sampling: PairSampling) -> (f64, Option<(usize, usize)>, Coverage) {
    let mut best = (0.0, None);
    let cov = for_pairs(s.len(), sampling, |a, b| {
        let (i, j) = (s.domain[a], s.domain[b]);
        let ratio = (s.values[a] - s.values[b]).abs() / instance.distance(i, j);
        if ratio > best.0 || ratio.is_nan() {
            best = (ratio, Some((i, j)));
        }
    });
    (best.0, best.1, cov)
}

/// `f = g` on every point of `C` the field covers.
pub fn check_restriction(field: &ExtensionField, instance: &MetricInstance) -> CheckResult {
    let tol = IDENTITY_TOL * (1.0 + instance.max_abs_g());
    let mut worst = Worst::new();
    let mut seen = 0;
    for e in &field.entries {
        if let Some(g) = instance.g_at(e.index) {
            seen += 1;
            worst.observe(|| vec![e.index], (e.value - g).abs(), 0.0);
        }
    }
    let r = worst.finish("restriction", tol, None);
    if seen == 0 {
        r.with_note("field covers no point of C")
    } else {
        r
    }
}

/// Every pair ratio of the field (plus `g` on `C`) is at most `budget`.
pub fn check_global_lipschitz(
    field: &ExtensionField,
    instance: &MetricInstance,
    budget: f64,
    sampling: PairSampling,
) -> CheckResult {
    let s = field.samples_with(instance);
    let mut worst = Worst::new();
    let cov = for_pairs(s.len(), sampling, |a, b| {
        let (i, j) = (s.domain[a], s.domain[b]);
        let ratio = (s.values[a] - s.values[b]).abs() / instance.distance(i, j);
        worst.observe(|| vec![i, j], ratio, budget);
    });
    worst.finish("global_lipschitz", INEQUALITY_TOL, Some(cov))
}

/// `mcshane_lower ≤ f ≤ mcshane_upper` at slope `budget`.
pub fn check_envelope_sandwich(
    field: &ExtensionField,
    instance: &MetricInstance,
    budget: f64,
) -> Result<CheckResult, VerifyError> {
    let mut worst = Worst::new();
    for e in &field.entries {
        let up = mcshane_upper(instance, budget, e.index)?;
        let lo = mcshane_lower(instance, budget, e.index)?;
        worst.observe(|| vec![e.index], e.value, up);
        worst.observe(|| vec![e.index], lo, e.value);
    }
    Ok(worst.finish("envelope_sandwich", IDENTITY_TOL * value_scale(instance), None))
}

/// Convexity, slopes in `[0, budget]`, `pen(0) = 0`, exact prefix sums.
pub fn check_profile_legality(engine: &ExtensionEngine) -> CheckResult {
    let budget = engine.budget();
    let mut worst = Worst::new();
    let mut note = None;
    for p in engine.profiles() {
        match p.check_legal(budget) {
            Ok(()) => worst.observe(|| vec![p.anchor], p.eval(0.0), 0.0),
            Err(v) => {
                worst.observe(|| vec![p.anchor], 1.0, 0.0);
                note.get_or_insert_with(|| v.to_string());
            }
        }
    }
    let r = worst.finish("profile_legality", 0.0, None);
    match note {
        Some(n) => r.with_note(n),
        None => r,
    }
}

/// `ε_k` for any `k ≥ k_min - 1`, continuing the recursion one step down.
fn eps_any(s: &ScaleSchedule, k: i64) -> f64 {
    if k >= s.k_min() {
        s.eps(k)
    } else {
        s.ratio(k + 1) * s.eps(k + 1)
    }
}

/// For `x ≠ y ∈ C` with `ε_{k-1} ≤ d(x,y) < ε_k`:
/// `φ_x(y) ≥ g(y) + ε_{k-2}·L`.
pub fn check_separation(engine: &ExtensionEngine) -> CheckResult {
    let inst = engine.instance();
    let Some(s) = engine.schedule().filter(|_| !engine.is_constant()) else {
        return Worst::new().finish("separation", 0.0, None).with_note("constant extension");
    };
    let tol = INEQUALITY_TOL * value_scale(inst);
    let l = s.l_eff();
    let (subset, values) = (inst.subset(), inst.values());
    let mut worst = Worst::new();
    for (px, &x) in subset.iter().enumerate() {
        for (py, &y) in subset.iter().enumerate() {
            if x == y {
                continue;
            }
            let d = inst.distance(x, y);
            match s.bracket(d) {
                Some(k) => {
                    let need = values[py] + eps_any(s, k - 2) * l;
                    worst.observe(|| vec![x, y], need, engine.phi(px, y));
                }
                None => worst.observe(|| vec![x, y], f64::INFINITY, 0.0),
            }
        }
    }
    worst.finish("separation", tol, None)
}

/// Localized evaluation around `xbar` equals the full minimum bit for bit,
/// and anchors outside the ball clear the exclusion margin `ε_{k-1}·L/3`.
/// `xbar` is the nearest anchor of each query, or every anchor of `C` when
/// `all_anchors` is set.
pub fn check_localization(
    engine: &ExtensionEngine,
    queries: &[usize],
    all_anchors: bool,
) -> Result<[CheckResult; 2], VerifyError> {
    let inst = engine.instance();
    let mut equal = Worst::new();
    let mut margin = Worst::new();
    let l = inst.lipschitz();
    let mut localized = 0u64;
    for &y in queries {
        let (full, _) = engine.eval_full(y);
        let nearest = [engine.nearest_anchor(y)];
        let centers = if all_anchors { inst.subset() } else { &nearest[..] };
        for &xbar in centers {
            let (v, _, loc) = engine.extend_localized(y, xbar)?;
            equal.observe(|| vec![y, xbar], if v.to_bits() == full.to_bits() { 0.0 } else { 1.0 }, 0.0);
            let (Localization::Ball { k, .. }, Some(s)) = (loc, engine.schedule()) else {
                continue;
            };
            localized += 1;
            let radius = s.eps(k);
            for (pos, &x) in inst.subset().iter().enumerate() {
                if inst.distance(x, xbar) >= radius {
                    margin.observe(|| vec![y, xbar, x], full + s.eps(k - 1) * l / 3.0, engine.phi(pos, y));
                }
            }
        }
    }
    let eq = equal.finish("localization_equivalence", 0.0, None);
    let m = margin
        .finish("localization_exclusion_margin", INEQUALITY_TOL * value_scale(inst), None)
        .with_note(format!("{localized} localized evaluations"));
    Ok([eq, m])
}

/// `Lip(f, B_r(xbar)) ≤ Lip(g, C ∩ B_{r_bar}(xbar)) + xi` at the scheduled
/// radius `r = ε_{k-2}`.
pub fn check_locality_preservation(
    engine: &ExtensionEngine,
    field: &ExtensionField,
    xbar: usize,
    r_bar: f64,
    xi: f64,
) -> Result<CheckResult, VerifyError> {
    let mut worst = Worst::new();
    let note = observe_locality(engine, &field.samples_with(engine.instance()), xbar, r_bar, xi, &mut worst)?;
    Ok(worst.finish(format!("locality_preservation[xbar={xbar},r_bar={r_bar}]"), INEQUALITY_TOL, None).with_note(note))
}

/// The scheduled radius for `(r_bar, xi)`; `r_bar` itself when no schedule
/// exists (constant extension).
pub fn scheduled_radius(engine: &ExtensionEngine, r_bar: f64, xi: f64) -> Result<(Option<i64>, f64), VerifyError> {
    if !(xi > 0.0) {
        return Err(VerifyError::InvalidParameter { name: "xi", value: xi });
    }
    match engine.schedule() {
        Some(s) => {
            let (k, r) = s.locality_radius(r_bar, xi, engine.instance().lipschitz())?;
            Ok((Some(k), r))
        }
        None => Ok((None, r_bar)),
    }
}

fn observe_locality(
    engine: &ExtensionEngine,
    f: &Samples,
    xbar: usize,
    r_bar: f64,
    xi: f64,
    worst: &mut Worst,
) -> Result<String, VerifyError> {
    let inst = engine.instance();
    if !inst.in_subset(xbar) {
        return Err(EngineError::NotInSubset(xbar).into());
    }
    let (k, r) = scheduled_radius(engine, r_bar, xi)?;
    let lhs = inst.lip_constant(&inst.restrict_to_ball(f, xbar, r));
    let rhs = inst.lip_constant(&inst.restrict_to_ball(&inst.g(), xbar, r_bar)) + xi;
    worst.observe(|| vec![xbar], lhs, rhs);
    Ok(match k {
        Some(k) => format!("k = {k}, r = {r:e}"),
        None => "constant extension".to_string(),
    })
}

/// Side-by-side ball profiles of the McShane extension (slope `L`) and of
/// the penalized extension at one center.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CenterComparison {
    pub center: usize,
    pub mcshane: RadiusProfile,
    pub extension: RadiusProfile,
    /// `mcshane - extension`, per radius.
    pub gap: Vec<f64>,
}

pub fn mcshane_comparison(
    engine: &ExtensionEngine,
    centers: &[usize],
    radii: &[f64],
) -> Result<Vec<CenterComparison>, VerifyError> {
    let inst = engine.instance();
    let all = inst.all_points();
    let mc = mcshane_samples(inst, inst.lipschitz(), &all, true)?;
    let ext = engine.extend(&all)?.samples_with(inst);
    Ok(centers
        .iter()
        .map(|&c| {
            let mcshane = inst.lipa_profile(&mc, c, radii);
            let extension = inst.lipa_profile(&ext, c, radii);
            let gap = mcshane.constants.iter().zip(&extension.constants).map(|(a, b)| a - b).collect();
            CenterComparison { center: c, mcshane, extension, gap }
        })
        .collect())
}

/// The pointwise minimum of arrays that are each `L`-Lipschitz on `domain`
/// is `L`-Lipschitz there.
pub fn check_inf_family(
    instance: &MetricInstance,
    domain: &[usize],
    family: &[Vec<f64>],
    lipschitz: f64,
    sampling: PairSampling,
) -> CheckResult {
    for (m, member) in family.iter().enumerate() {
        let s = Samples { domain: domain.to_vec(), values: member.clone() };
        let (lip, pair, _) = sampled_lipschitz(instance, &s, sampling);
        if !(lip <= lipschitz + INEQUALITY_TOL) {
            let (i, j) = pair.unwrap_or((0, 0));
            return CheckResult {
                name: "inf_family".into(),
                status: Status::PreconditionViolated,
                witness: Some(Witness { points: vec![i, j], measured: lip, allowed: lipschitz }),
                tolerance: INEQUALITY_TOL,
                coverage: None,
                note: Some(format!("member {m} is not {lipschitz}-Lipschitz")),
            };
        }
    }
    let min: Vec<f64> = (0..domain.len())
        .map(|i| family.iter().map(|m| m[i]).fold(f64::INFINITY, f64::min))
        .collect();
    let s = Samples { domain: domain.to_vec(), values: min };
    let mut worst = Worst::new();
    let cov = for_pairs(s.len(), sampling, |a, b| {
        let (i, j) = (s.domain[a], s.domain[b]);
        worst.observe(|| vec![i, j], (s.values[a] - s.values[b]).abs() / instance.distance(i, j), lipschitz);
    });
    worst.finish("inf_family", INEQUALITY_TOL, Some(cov))
}

/// The `φ_x` family on `points`, one array per anchor.
pub fn phi_family(engine: &ExtensionEngine, points: &[usize]) -> Vec<Vec<f64>> {
    (0..engine.profiles().len())
        .map(|pos| points.iter().map(|&y| engine.phi(pos, y)).collect())
        .collect()
}

/// Ratio bound, monotone ratios, doubling decay below the reference index,
/// `3ε_{k-2} ≤ ε_{k-1}`, the exact reconstruction identity and the slope cap
/// `L + 3L·r_k ≤ L + ε`.
pub fn check_schedule_laws(s: &ScaleSchedule) -> CheckResult {
    let mut worst = Worst::new();
    let l = s.l_eff();
    for k in (s.k_min() + 1)..=s.k_max() {
        let r = s.ratio(k);
        worst.observe(Vec::new, r, s.r_star());
        worst.observe(Vec::new, if s.eps(k - 1) == r * s.eps(k) { 0.0 } else { 1.0 }, 0.0);
        worst.observe(Vec::new, if s.eps(k - 1) < s.eps(k) { 0.0 } else { 1.0 }, 0.0);
        worst.observe(Vec::new, l + 3.0 * l * r, s.budget());
        if k >= s.k_min() + 2 {
            worst.observe(Vec::new, s.ratio(k - 1), r);
            worst.observe(Vec::new, 3.0 * s.eps(k - 2), s.eps(k - 1));
            let expect = if k <= s.k_ref() { 0.5 } else { 1.0 };
            worst.observe(Vec::new, if s.ratio(k - 1) / r == expect { 0.0 } else { 1.0 }, 0.0);
        }
    }
    let decay = s.r_star() * 2f64.powi(-((s.k_ref() - s.k_min() - 1) as i32));
    worst.observe(Vec::new, s.ratio(s.k_min() + 1), decay);
    worst.finish("schedule_laws", 0.0, None).with_note(format!("k in [{}, {}]", s.k_min(), s.k_max()))
}

/// The base-slope truncation raises each `pen_x` by at most
/// `TAIL_RTOL·L·diam`.
pub fn check_truncation_tail(engine: &ExtensionEngine, diameter: f64) -> CheckResult {
    let allowed = TAIL_RTOL * engine.instance().lipschitz() * diameter;
    let mut worst = Worst::new();
    for p in engine.profiles() {
        worst.observe(|| vec![p.anchor], p.tail_bound(), allowed);
    }
    worst.finish("truncation_tail", 0.0, None)
}

/// Bounded-support composition: extend at `ε/2`, clamp to `sup|g|`, multiply
/// by the cutoff. Checks restriction, support and the `L + ε` budget.
pub fn check_cutoff_composition(
    instance: &MetricInstance,
    epsilon: f64,
    anchor: Option<f64>,
    sampling: PairSampling,
) -> Result<(Vec<CheckResult>, ExtensionField), VerifyError> {
    let all = instance.all_points();
    let field = cutoff_field(instance, epsilon, anchor, None, &all)?;
    let info = field.cutoff.clone();
    let mut support = Worst::new();
    if let Some(info) = &info {
        for e in &field.entries {
            if instance.distance_to_subset(e.index) >= info.outer_radius {
                support.observe(|| vec![e.index], e.value.abs(), 0.0);
            }
        }
    }
    let eff = epsilon.min(instance.lipschitz());
    let mut lip = check_global_lipschitz(&field, instance, instance.lipschitz() + eff, sampling);
    lip.name = "cutoff_global_lipschitz".into();
    let mut restr = check_restriction(&field, instance);
    restr.name = "cutoff_restriction".into();
    let supp = support.finish("cutoff_support", 0.0, None);
    Ok((vec![restr, lip, supp], field))
}

/// The bounded-support extension evaluated on `queries`, clamped to `bound`
/// (default `sup|g|`) before the cutoff.
pub fn cutoff_field(
    instance: &MetricInstance,
    epsilon: f64,
    anchor: Option<f64>,
    bound: Option<f64>,
    queries: &[usize],
) -> Result<ExtensionField, VerifyError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(VerifyError::InvalidParameter { name: "epsilon", value: epsilon });
    }
    // budget L + ε/2 before the cutoff adds ε/2
    let eff = epsilon.min(instance.lipschitz());
    let half = if eff > 0.0 { eff / 2.0 } else { epsilon / 2.0 };
    let req = ScheduleRequest { epsilon: half, anchor, radii: Vec::new(), xi: None };
    let schedule = plan_schedule(instance, queries, &req)?;
    let engine = ExtensionEngine::new(instance, schedule)?;
    let mut field = engine.extend(queries)?;
    let sup = bound.unwrap_or(instance.max_abs_g());
    if sup > 0.0 {
        field = truncate_bounded(&field, instance, sup)?;
    }
    let cut_eps = if eff > 0.0 { eff } else { epsilon };
    let mut out = cutoff_support(&field, instance, cut_eps)?;
    out.epsilon = epsilon;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryConfig {
    pub epsilon: f64,
    pub xi: f64,
    /// Radii for the locality checks; quartiles of the pairwise distances
    /// when empty.
    pub r_bars: Vec<f64>,
    pub anchor: Option<f64>,
    pub sampling: PairSampling,
    /// Perturbs the field before checking; exercises the failure path.
    #[doc(hidden)]
    pub inject_fault: bool,
}

impl BatteryConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            xi: 0.1,
            r_bars: Vec::new(),
            anchor: None,
            sampling: PairSampling::default(),
            inject_fault: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub points: usize,
    pub subset_size: usize,
    pub lipschitz: f64,
    pub epsilon: f64,
    pub eps_eff: f64,
    pub xi: f64,
    pub r_bars: Vec<f64>,
    pub identity_tolerance: f64,
    pub inequality_tolerance: f64,
    pub schedule: Vec<ScaleEntry>,
    pub checks: Vec<CheckResult>,
    pub comparison: Vec<CenterComparison>,
    pub all_passed: bool,
}

/// Quartiles of the pairwise distances of all points.
pub fn distance_quartiles(instance: &MetricInstance) -> Vec<f64> {
    let n = instance.len();
    let mut ds: Vec<f64> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            ds.push(instance.distance(i, j));
        }
    }
    if ds.is_empty() {
        return vec![1.0];
    }
    ds.sort_by(f64::total_cmp);
    let mut q: Vec<f64> = [0.25, 0.5, 0.75].iter().map(|&p| ds[((ds.len() - 1) as f64 * p).round() as usize]).collect();
    q.dedup();
    q
}

/// Runs every check on the extension of `instance` evaluated at all points.
pub fn run_battery(instance: &MetricInstance, cfg: &BatteryConfig) -> Result<VerificationReport, VerifyError> {
    if !(cfg.epsilon > 0.0 && cfg.epsilon.is_finite()) {
        return Err(VerifyError::InvalidParameter { name: "epsilon", value: cfg.epsilon });
    }
    if !(cfg.xi > 0.0) {
        return Err(VerifyError::InvalidParameter { name: "xi", value: cfg.xi });
    }
    let r_bars = if cfg.r_bars.is_empty() { distance_quartiles(instance) } else { cfg.r_bars.clone() };
    let all = instance.all_points();
    let req = ScheduleRequest { epsilon: cfg.epsilon, anchor: cfg.anchor, radii: r_bars.clone(), xi: Some(cfg.xi) };
    let schedule = plan_schedule(instance, &all, &req)?;
    let engine = ExtensionEngine::new(instance, schedule)?;
    let mut field = engine.extend(&all)?;
    if cfg.inject_fault {
        let c = instance.subset()[0];
        if let Some(e) = field.entries.iter_mut().find(|e| e.index == c) {
            e.value += 1.0;
        }
    }
    let budget = engine.budget();
    let diameter = instance.diameter();

    let mut checks = Vec::new();
    if let Some(s) = engine.schedule() {
        checks.push(check_schedule_laws(s));
    }
    checks.push(check_profile_legality(&engine));
    checks.push(check_truncation_tail(&engine, diameter));
    checks.push(check_restriction(&field, instance));
    checks.push(check_global_lipschitz(&field, instance, budget, cfg.sampling));
    checks.push(check_envelope_sandwich(&field, instance, budget)?);
    checks.push(check_separation(&engine));
    checks.extend(check_localization(&engine, &all, all.len() <= 400)?);
    if !engine.is_constant() {
        let fam = phi_family(&engine, &all);
        checks.push(check_inf_family(instance, &all, &fam, budget, cfg.sampling));
    }
    let f = field.samples_with(instance);
    for &r_bar in &r_bars {
        let mut worst = Worst::new();
        let mut note = String::new();
        for &xbar in instance.subset() {
            note = observe_locality(&engine, &f, xbar, r_bar, cfg.xi, &mut worst)?;
        }
        checks.push(
            worst
                .finish(format!("locality_preservation[r_bar={r_bar}]"), INEQUALITY_TOL, None)
                .with_note(note),
        );
    }
    let (cut, _) = check_cutoff_composition(instance, cfg.epsilon, cfg.anchor, cfg.sampling)?;
    checks.extend(cut);

    let mut radii = r_bars.clone();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let centers: Vec<usize> = instance.subset().iter().copied().take(4).collect();
    let comparison = mcshane_comparison(&engine, &centers, &radii)?;

    let all_passed = checks.iter().all(CheckResult::passed);
    Ok(VerificationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        points: instance.len(),
        subset_size: instance.subset().len(),
        lipschitz: instance.lipschitz(),
        epsilon: cfg.epsilon,
        eps_eff: engine.schedule().map_or(0.0, |s| s.eps_eff()),
        xi: cfg.xi,
        r_bars,
        identity_tolerance: IDENTITY_TOL,
        inequality_tolerance: INEQUALITY_TOL,
        schedule: engine.schedule().map(|s| s.entries()).unwrap_or_default(),
        checks,
        comparison,
        all_passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{random_cloud, unit_interval_grid, CloudShape};
    use crate::metric::validate_instance;

    fn engine_for(inst: &MetricInstance, eps: f64) -> ExtensionEngine<'_> {
        let s = plan_schedule(inst, &inst.all_points(), &ScheduleRequest::new(eps)).unwrap();
        ExtensionEngine::new(inst, s).unwrap()
    }

    #[test]
    fn restriction_detects_corruption() {
        let inst = validate_instance(unit_interval_grid(11)).unwrap();
        let e = engine_for(&inst, 1.0);
        let mut f = e.extend(&inst.all_points()).unwrap();
        assert!(check_restriction(&f, &inst).passed());
        f.entries[10].value = 0.5;
        let r = check_restriction(&f, &inst);
        assert_eq!(r.status, Status::Fail);
        assert_eq!(r.witness.unwrap().points, vec![10]);
    }

    #[test]
    fn constant_g_passes_restriction() {
        let mut raw = unit_interval_grid(5);
        raw.values = vec![2.0, 2.0];
        let inst = validate_instance(raw).unwrap();
        let e = ExtensionEngine::new(&inst, None).unwrap();
        let f = e.extend(&inst.all_points()).unwrap();
        assert!(check_restriction(&f, &inst).passed());
    }

    #[test]
    fn global_lipschitz_budgets() {
        let inst = validate_instance(unit_interval_grid(11)).unwrap();
        let all = inst.all_points();
        let mc = ExtensionEngine::with_linear_profiles(&inst, 1.0).unwrap().extend(&all).unwrap();
        assert!(check_global_lipschitz(&mc, &inst, 1.0, PairSampling::default()).passed());
        let r = check_global_lipschitz(&mc, &inst, 0.9, PairSampling::default());
        assert_eq!(r.status, Status::Fail);
        assert!((r.witness.unwrap().measured - 1.0).abs() < 1e-12);
        let e = engine_for(&inst, 1.0);
        let f = e.extend(&all).unwrap();
        assert!(check_global_lipschitz(&f, &inst, 2.0, PairSampling::default()).passed());
    }

    #[test]
    fn separation_on_two_points() {
        let inst = validate_instance(unit_interval_grid(2)).unwrap();
        let e = engine_for(&inst, 1.0);
        let s = e.schedule().unwrap();
        let k = s.bracket(1.0).unwrap();
        // φ_0(1) straight from the profile
        let phi = 0.0 + e.profiles()[0].eval(1.0);
        assert!(phi >= 1.0 + s.eps(k - 2) * 1.0);
        assert!(check_separation(&e).passed());
    }

    #[test]
    fn separation_on_random_clouds() {
        for seed in 0..5 {
            let inst = validate_instance(random_cloud(seed, CloudShape { n: 40, subset_size: 12, dim: 2 })).unwrap();
            let e = engine_for(&inst, inst.lipschitz() / 2.0);
            let r = check_separation(&e);
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn locality_on_unit_interval_grid() {
        let inst = validate_instance(unit_interval_grid(1001)).unwrap();
        let req = ScheduleRequest { epsilon: 1.0, anchor: None, radii: vec![0.5], xi: Some(0.1) };
        let s = plan_schedule(&inst, &inst.all_points(), &req).unwrap();
        let e = ExtensionEngine::new(&inst, s).unwrap();
        let f = e.extend(&inst.all_points()).unwrap();
        let r = check_locality_preservation(&e, &f, 0, 0.5, 0.1).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.witness.unwrap().allowed, 0.1);
    }

    #[test]
    fn inf_family_cases() {
        let inst = validate_instance(unit_interval_grid(5)).unwrap();
        let all = inst.all_points();
        let xs: Vec<f64> = (0..5).map(|i| i as f64 / 4.0).collect();
        let a: Vec<f64> = xs.iter().map(|x| 0.5 * x).collect();
        let b: Vec<f64> = xs.iter().map(|x| 0.4 - 0.8 * x).collect();
        assert!(check_inf_family(&inst, &all, &[a.clone(), b], 0.8, PairSampling::default()).passed());
        let spike = vec![0.0, 5.0, 0.0, 0.0, 0.0];
        let r = check_inf_family(&inst, &all, &[a, spike], 0.8, PairSampling::default());
        assert_eq!(r.status, Status::PreconditionViolated);
    }

    #[test]
    fn sampled_pairs_are_labeled() {
        let cov = for_pairs(100, PairSampling { max_pairs: 10, seed: 3 }, |a, b| assert!(a < b));
        assert!(!cov.exhaustive);
        assert_eq!(cov.checked, 10);
        assert_eq!(cov.total, 4950);
    }

    #[test]
    fn comparison_on_constant_g() {
        let mut raw = unit_interval_grid(11);
        raw.values = vec![1.0, 1.0];
        let inst = validate_instance(raw).unwrap();
        let e = ExtensionEngine::new(&inst, None).unwrap();
        let c = mcshane_comparison(&e, &[0], &[0.15, 0.35]).unwrap();
        assert_eq!(c[0].mcshane.constants, vec![0.0, 0.0]);
        assert_eq!(c[0].extension.constants, vec![0.0, 0.0]);
    }

    #[test]
    fn battery_passes_and_fault_fails() {
        let inst = validate_instance(random_cloud(7, CloudShape { n: 30, subset_size: 8, dim: 2 })).unwrap();
        let mut cfg = BatteryConfig::new(inst.lipschitz());
        let rep = run_battery(&inst, &cfg).unwrap();
        for c in &rep.checks {
            assert!(c.passed(), "{c:?}");
        }
        assert!(rep.all_passed);
        cfg.inject_fault = true;
        let bad = run_battery(&inst, &cfg).unwrap();
        assert!(!bad.all_passed);
        for c in bad.checks.iter().filter(|c| !c.passed()) {
            assert!(c.witness.is_some());
        }
    }
}
