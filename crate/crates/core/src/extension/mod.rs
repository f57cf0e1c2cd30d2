//! Extensions of `g` from `C` to the whole space.
//!
//! [`ExtensionEngine`] evaluates `f(y) = min_{x ∈ C} g(x) + pen_x(d(x, y))`
//! with one [`PenalizationProfile`] per anchor. The profiles are built once;
//! queries are evaluated independently (in parallel) and in index order.

pub mod penalty;

use rayon::prelude::*;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::metric::{MetricInstance, Samples};
use crate::schedule::{ScaleSchedule, ScheduleError};
pub use penalty::{approx_slopes, build_penalization, ApproxSlopes, PenalizationProfile, ProfileViolation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("Lipschitz constant {given} is below Lip(g, C) = {required}")]
    LipschitzTooSmall { given: f64, required: f64 },
    #[error("point {0} is not in the subset C")]
    NotInSubset(usize),
    #[error("query {index} out of range for {n} points")]
    QueryOutOfRange { index: usize, n: usize },
    #[error("schedule was built for L = {schedule} but the instance has L = {instance}")]
    LipschitzMismatch { schedule: f64, instance: f64 },
    #[error("schedule too narrow: eps_k_max = {have} must exceed diam(C) = {need}")]
    ScheduleTooNarrow { have: f64, need: f64 },
    #[error("schedule too shallow: eps_(k_min+1) = {have} exceeds the smallest distance in C, {need}")]
    ScheduleTooShallow { have: f64, need: f64 },
    #[error("a schedule is required when L > 0")]
    MissingSchedule,
    #[error("bound {bound} is below sup|g| = {sup}")]
    BoundTooSmall { bound: f64, sup: f64 },
    #[error("invalid parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Which part of `C` the value of a query was taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Localization {
    /// `C ∩ B_{ε_k}(xbar)`, with the query inside `B_{ε_{k-2}}(xbar)`.
    Ball { k: i64, xbar: usize },
    Full,
}

impl Serialize for Localization {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            Localization::Full => s.serialize_str("full"),
            Localization::Ball { k, xbar } => {
                let mut m = s.serialize_map(Some(2))?;
                m.serialize_entry("k", &k)?;
                m.serialize_entry("xbar", &xbar)?;
                m.end()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldEntry {
    pub index: usize,
    pub value: f64,
    pub argmin_anchor: usize,
    pub localization: Localization,
}

/// Post-processing applied to a field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffInfo {
    pub epsilon: f64,
    /// `sup |f|` used in the cutoff slope `ε/(2M)`.
    pub sup_abs: f64,
    /// `χ = 1` within this distance of `C`.
    pub inner_radius: f64,
    /// `χ = 0` beyond this distance of `C`.
    pub outer_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtensionField {
    pub epsilon: f64,
    pub eps_eff: f64,
    pub lipschitz: f64,
    pub schedule_id: String,
    pub entries: Vec<FieldEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounded: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<CutoffInfo>,
}

impl ExtensionField {
    pub fn value_at(&self, index: usize) -> Option<f64> {
        self.entries.iter().find(|e| e.index == index).map(|e| e.value)
    }

    /// Field values together with `g` on the points of `C` the field does not
    /// cover, sorted by point index.
    pub fn samples_with(&self, instance: &MetricInstance) -> Samples {
        let mut pairs: Vec<(usize, f64)> = self.entries.iter().map(|e| (e.index, e.value)).collect();
        let covered: std::collections::BTreeSet<usize> = pairs.iter().map(|p| p.0).collect();
        pairs.extend(
            instance
                .subset()
                .iter()
                .zip(instance.values())
                .filter(|(c, _)| !covered.contains(c))
                .map(|(&c, &v)| (c, v)),
        );
        pairs.sort_by_key(|p| p.0);
        let (domain, values) = pairs.into_iter().unzip();
        Samples { domain, values }
    }

    /// Lipschitz budget the field was built for.
    pub fn budget(&self) -> f64 {
        self.lipschitz + self.eps_eff
    }
}

fn check_slope(instance: &MetricInstance, slope: f64) -> Result<(), EngineError> {
    if !slope.is_finite() {
        return Err(EngineError::InvalidParameter { name: "L", value: slope });
    }
    let required = instance.computed_lipschitz();
    if slope < required {
        return Err(EngineError::LipschitzTooSmall { given: slope, required });
    }
    Ok(())
}

/// McShane upper envelope `min_{x ∈ C} g(x) + L'·d(x, y)`.
pub fn mcshane_upper(instance: &MetricInstance, slope: f64, y: usize) -> Result<f64, EngineError> {
    check_slope(instance, slope)?;
    Ok(instance
        .subset()
        .iter()
        .zip(instance.values())
        .map(|(&x, &g)| g + slope * instance.distance(x, y))
        .fold(f64::INFINITY, f64::min))
}

/// McShane lower envelope `max_{x ∈ C} g(x) - L'·d(x, y)`.
pub fn mcshane_lower(instance: &MetricInstance, slope: f64, y: usize) -> Result<f64, EngineError> {
    check_slope(instance, slope)?;
    Ok(instance
        .subset()
        .iter()
        .zip(instance.values())
        .map(|(&x, &g)| g - slope * instance.distance(x, y))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// An envelope sampled on `points`.
pub fn mcshane_samples(
    instance: &MetricInstance,
    slope: f64,
    points: &[usize],
    upper: bool,
) -> Result<Samples, EngineError> {
    check_slope(instance, slope)?;
    let values = points
        .iter()
        .map(|&y| if upper { mcshane_upper(instance, slope, y) } else { mcshane_lower(instance, slope, y) })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Samples { domain: points.to_vec(), values })
}

#[derive(Debug, Clone)]
enum Kind {
    /// `Lip(g, C) = 0`: `f ≡ g`.
    Constant(f64),
    Profiles(Vec<PenalizationProfile>),
}

/// Profiles for every anchor of `C`, ready to evaluate `f` anywhere.
#[derive(Debug, Clone)]
pub struct ExtensionEngine<'a> {
    instance: &'a MetricInstance,
    schedule: Option<ScaleSchedule>,
    kind: Kind,
    epsilon: f64,
}

impl<'a> ExtensionEngine<'a> {
    /// Builds the profiles. `schedule` may be `None` only when `L = 0`.
    pub fn new(instance: &'a MetricInstance, schedule: Option<ScaleSchedule>) -> Result<Self, EngineError> {
        let l = instance.lipschitz();
        let Some(schedule) = schedule else {
            if l > 0.0 {
                return Err(EngineError::MissingSchedule);
            }
            return Ok(Self {
                instance,
                schedule: None,
                kind: Kind::Constant(instance.values()[0]),
                epsilon: 0.0,
            });
        };
        if schedule.l_eff() != l {
            return Err(EngineError::LipschitzMismatch { schedule: schedule.l_eff(), instance: l });
        }
        let subset = instance.subset();
        let diam_c = instance.diameter_of(subset);
        if schedule.eps(schedule.k_max()) <= diam_c {
            return Err(EngineError::ScheduleTooNarrow { have: schedule.eps(schedule.k_max()), need: diam_c });
        }
        if let Some(sep) = instance.min_separation_of(subset) {
            let have = schedule.eps(schedule.k_min() + 1);
            if have > sep {
                return Err(EngineError::ScheduleTooShallow { have, need: sep });
            }
        }
        let epsilon = schedule.epsilon();
        let kind = if instance.computed_lipschitz() == 0.0 {
            Kind::Constant(instance.values()[0])
        } else {
            let profiles = subset
                .par_iter()
                .map(|&x| build_penalization(&approx_slopes(instance, x, &schedule), &schedule, l))
                .collect();
            Kind::Profiles(profiles)
        };
        Ok(Self { instance, schedule: Some(schedule), kind, epsilon })
    }

    /// Every anchor penalized by the cone `slope·t`: the McShane upper envelope.
    pub fn with_linear_profiles(instance: &'a MetricInstance, slope: f64) -> Result<Self, EngineError> {
        check_slope(instance, slope)?;
        let profiles = instance.subset().iter().map(|&x| PenalizationProfile::linear(x, slope)).collect();
        Ok(Self { instance, schedule: None, kind: Kind::Profiles(profiles), epsilon: 0.0 })
    }

    pub fn instance(&self) -> &MetricInstance {
        self.instance
    }

    pub fn schedule(&self) -> Option<&ScaleSchedule> {
        self.schedule.as_ref()
    }

    /// Profiles aligned with `instance.subset()`; empty for the constant case.
    pub fn profiles(&self) -> &[PenalizationProfile] {
        match &self.kind {
            Kind::Profiles(p) => p,
            Kind::Constant(_) => &[],
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, Kind::Constant(_))
    }

    /// `L + min(ε, L)` for the penalized construction, `L` otherwise.
    pub fn budget(&self) -> f64 {
        match &self.schedule {
            Some(s) => s.budget(),
            None => self.instance.lipschitz().max(self.profiles().iter().map(|p| p.max_slope()).fold(0.0, f64::max)),
        }
    }

    /// `φ_x(y) = g(x) + pen_x(d(x, y))` for the anchor at position `pos` of `C`.
    #[inline]
    pub fn phi(&self, pos: usize, y: usize) -> f64 {
        match &self.kind {
            Kind::Constant(c) => *c,
            Kind::Profiles(p) => {
                let x = self.instance.subset()[pos];
                self.instance.values()[pos] + p[pos].eval(self.instance.distance(x, y))
            }
        }
    }

    /// Minimum of `φ_x(y)` over the anchor positions yielded by `positions`;
    /// ties go to the lowest point index.
    fn min_over(&self, y: usize, positions: impl Iterator<Item = usize>) -> (f64, usize) {
        let subset = self.instance.subset();
        let mut best = (f64::INFINITY, usize::MAX);
        for pos in positions {
            let v = self.phi(pos, y);
            if v < best.0 || (v == best.0 && subset[pos] < best.1) {
                best = (v, subset[pos]);
            }
        }
        best
    }

    fn check_query(&self, y: usize) -> Result<(), EngineError> {
        let n = self.instance.len();
        if y >= n {
            return Err(EngineError::QueryOutOfRange { index: y, n });
        }
        Ok(())
    }

    fn lowest_anchor(&self) -> usize {
        *self.instance.subset().iter().min().unwrap()
    }

    /// Nearest point of `C` to `y`, lowest index on ties.
    pub fn nearest_anchor(&self, y: usize) -> usize {
        let mut best = (f64::INFINITY, usize::MAX);
        for &c in self.instance.subset() {
            let d = self.instance.distance(c, y);
            if d < best.0 || (d == best.0 && c < best.1) {
                best = (d, c);
            }
        }
        best.1
    }

    /// `f(y)` over all of `C`, with the minimizing anchor.
    pub fn eval_full(&self, y: usize) -> (f64, usize) {
        match &self.kind {
            Kind::Constant(c) => (*c, self.lowest_anchor()),
            Kind::Profiles(p) => self.min_over(y, 0..p.len()),
        }
    }

    fn entry(&self, y: usize) -> FieldEntry {
        let (value, argmin_anchor) = self.eval_full(y);
        let localization = match (&self.kind, &self.schedule) {
            (Kind::Profiles(_), Some(s)) => {
                let xbar = self.nearest_anchor(y);
                match s.admissible_k(self.instance.distance(y, xbar)) {
                    Some(k) => Localization::Ball { k, xbar },
                    None => Localization::Full,
                }
            }
            _ => Localization::Full,
        };
        FieldEntry { index: y, value, argmin_anchor, localization }
    }

    /// Evaluates `f` on `queries` (order kept). The localization recorded per
    /// query is the ball around its nearest anchor that certifies the value.
    pub fn extend(&self, queries: &[usize]) -> Result<ExtensionField, EngineError> {
        for &y in queries {
            self.check_query(y)?;
        }
        let entries = queries.par_iter().map(|&y| self.entry(y)).collect();
        Ok(ExtensionField {
            epsilon: self.epsilon,
            eps_eff: self.schedule.as_ref().map_or(0.0, |s| s.eps_eff()),
            lipschitz: self.instance.lipschitz(),
            schedule_id: self.schedule.as_ref().map_or_else(|| "none".to_string(), |s| s.id()),
            entries,
            bounded: None,
            cutoff: None,
        })
    }

    /// `f(y)` computed over `C ∩ B_{ε_k}(xbar)` only, for the smallest `k`
    /// with `d(y, xbar) < ε_{k-2}`. Falls back to the full minimum when the
    /// stored range has no such `k`.
    pub fn extend_localized(&self, y: usize, xbar: usize) -> Result<(f64, usize, Localization), EngineError> {
        self.check_query(y)?;
        if !self.instance.in_subset(xbar) {
            return Err(EngineError::NotInSubset(xbar));
        }
        let (Kind::Profiles(p), Some(s)) = (&self.kind, &self.schedule) else {
            let (v, a) = self.eval_full(y);
            return Ok((v, a, Localization::Full));
        };
        let Some(k) = s.admissible_k(self.instance.distance(y, xbar)) else {
            let (v, a) = self.eval_full(y);
            return Ok((v, a, Localization::Full));
        };
        let radius = s.eps(k);
        let subset = self.instance.subset();
        let inside = (0..p.len()).filter(|&pos| self.instance.distance(subset[pos], xbar) < radius);
        let (v, a) = self.min_over(y, inside);
        Ok((v, a, Localization::Ball { k, xbar }))
    }
}

/// Clamps values to `[-bound, bound]`.
pub fn truncate_bounded(
    field: &ExtensionField,
    instance: &MetricInstance,
    bound: f64,
) -> Result<ExtensionField, EngineError> {
    let sup = instance.max_abs_g();
    if bound.is_nan() || bound < sup {
        return Err(EngineError::BoundTooSmall { bound, sup });
    }
    let mut out = field.clone();
    for e in &mut out.entries {
        e.value = e.value.clamp(-bound, bound);
    }
    out.bounded = Some(bound);
    Ok(out)
}

/// Multiplies by `χ(x) = clamp(2 - ε/(2M)·d(x, C), 0, 1)` with
/// `M = sup |f|` over the field and `g`.
///
/// If `f` is `(L + ε/2)`-Lipschitz the product is `(L + ε)`-Lipschitz and
/// vanishes at distance `4M/ε` from `C`.
pub fn cutoff_support(
    field: &ExtensionField,
    instance: &MetricInstance,
    epsilon: f64,
) -> Result<ExtensionField, EngineError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(EngineError::InvalidParameter { name: "epsilon", value: epsilon });
    }
    let sup_abs = field.entries.iter().fold(instance.max_abs_g(), |m, e| m.max(e.value.abs()));
    if sup_abs == 0.0 {
        return Ok(field.clone());
    }
    let slope = epsilon / (2.0 * sup_abs);
    let mut out = field.clone();
    for e in &mut out.entries {
        let chi = (2.0 - slope * instance.distance_to_subset(e.index)).clamp(0.0, 1.0);
        e.value *= chi;
    }
    out.cutoff = Some(CutoffInfo {
        epsilon,
        sup_abs,
        inner_radius: 2.0 * sup_abs / epsilon,
        outer_radius: 4.0 * sup_abs / epsilon,
    });
    Ok(out)
}
