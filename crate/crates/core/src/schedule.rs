//! The doubly-infinite scale sequence `ε_k`, truncated to the finitely many
//! scales an instance needs.
//!
//! The ratio `r_k = ε_{k-1}/ε_k` is `r*·2^{min(k-k_ref, 0)}` with
//! `r* = ε/(3(L+ε))`: constant above the reference index and halving at each
//! step below it, so the ratios are non-decreasing in `k`, never exceed `r*`
//! and tend to zero toward `-∞`.
//!
//! Values are generated top-down, `ε_{k-1} = r_k·ε_k`, so the reconstruction
//! identity holds bit-for-bit on the stored range.

use serde::Serialize;
use thiserror::Error;

use crate::metric::MetricInstance;

/// Indices kept below the one needed by the smallest requested radius.
pub const DEPTH_CUSHION: i64 = 6;
/// Budget for the base-slope truncation, relative to `L·diameter`.
pub const TAIL_RTOL: f64 = 1e-12;
/// Scales below this are not generated.
pub const MIN_SCALE: f64 = 1e-280;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("trivial instance: L = 0, use the constant extension")]
    Trivial,
    #[error("invalid parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("extend schedule: need k_min <= {needed_k_min:?}, have {k_min}")]
    ExtendSchedule { k_min: i64, needed_k_min: Option<i64> },
}

/// One stored scale, as written to reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleEntry {
    pub k: i64,
    pub eps_k: f64,
    /// `ε_{k-1}/ε_k`; absent at `k_min`.
    pub ratio_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSchedule {
    k_min: i64,
    k_max: i64,
    /// `eps[k - k_min]`
    eps: Vec<f64>,
    r_star: f64,
    l_eff: f64,
    eps_eff: f64,
    epsilon: f64,
    anchor: f64,
}

fn positive(name: &'static str, value: f64) -> Result<f64, ScheduleError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ScheduleError::InvalidParameter { name, value })
    }
}

/// `r*·2^{min(k, 0)}` with the reference index at 0.
fn ratio_formula(r_star: f64, k: i64) -> f64 {
    if k >= 0 {
        r_star
    } else {
        r_star * 2f64.powi(k as i32)
    }
}

/// Builds a schedule with `ε_{k_max-2} ≥ span_high` and `ε_{k_min} ≤ span_low`.
///
/// `ε_0 ≈ anchor` (the reference index is 0). Below the index needed for
/// `span_low`, [`DEPTH_CUSHION`] more scales are kept, and more still until
/// `ε_{k_min}·(L+ε) < TAIL_RTOL·L·span_high/2`.
pub fn build_schedule(
    lipschitz: f64,
    epsilon: f64,
    anchor: f64,
    span_low: f64,
    span_high: f64,
) -> Result<ScaleSchedule, ScheduleError> {
    if !lipschitz.is_finite() || lipschitz < 0.0 {
        return Err(ScheduleError::InvalidParameter { name: "L", value: lipschitz });
    }
    let epsilon = positive("epsilon", epsilon)?;
    if lipschitz == 0.0 {
        return Err(ScheduleError::Trivial);
    }
    let anchor = positive("anchor", anchor)?;
    let span_low = positive("span_low", span_low)?;
    let span_high = positive("span_high", span_high)?;
    if span_low >= span_high {
        return Err(ScheduleError::InvalidParameter { name: "span_low", value: span_low });
    }

    let eps_eff = epsilon.min(lipschitz);
    let r_star = eps_eff / (3.0 * (lipschitz + eps_eff));

    let mut top = anchor;
    let mut k_max = 0i64;
    while k_max < 3 || top * r_star * r_star < span_high {
        top /= r_star;
        k_max += 1;
    }

    // eps[0] is ε_{k_max}; reversed at the end
    let mut desc = vec![top];
    let mut k = k_max;
    let tail_target = TAIL_RTOL * lipschitz * span_high / 2.0;
    let mut k_need: Option<i64> = None;
    loop {
        let cur = *desc.last().unwrap();
        if k_need.is_none() && cur <= span_low {
            k_need = Some(k);
        }
        if let Some(kn) = k_need {
            if k <= kn - DEPTH_CUSHION && k <= 0 && cur * (lipschitz + eps_eff) < tail_target {
                break;
            }
        }
        let next = ratio_formula(r_star, k) * cur;
        if next < MIN_SCALE {
            return Err(ScheduleError::ExtendSchedule {
                k_min: k,
                needed_k_min: k_need.map(|kn| kn - DEPTH_CUSHION),
            });
        }
        desc.push(next);
        k -= 1;
    }
    desc.reverse();
    Ok(ScaleSchedule {
        k_min: k,
        k_max,
        eps: desc,
        r_star,
        l_eff: lipschitz,
        eps_eff,
        epsilon,
        anchor,
    })
}

impl ScaleSchedule {
    pub fn k_min(&self) -> i64 {
        self.k_min
    }

    pub fn k_max(&self) -> i64 {
        self.k_max
    }

    /// Index whose scale was seeded from the anchor.
    pub fn k_ref(&self) -> i64 {
        0
    }

    pub fn r_star(&self) -> f64 {
        self.r_star
    }

    pub fn l_eff(&self) -> f64 {
        self.l_eff
    }

    /// `min(ε, L)`.
    pub fn eps_eff(&self) -> f64 {
        self.eps_eff
    }

    /// The tolerance as requested, before the `min(ε, L)` reduction.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    /// Lipschitz budget of the extension built on this schedule.
    pub fn budget(&self) -> f64 {
        self.l_eff + self.eps_eff
    }

    pub fn contains(&self, k: i64) -> bool {
        (self.k_min..=self.k_max).contains(&k)
    }

    /// `ε_k`; panics outside the stored range.
    pub fn eps(&self, k: i64) -> f64 {
        assert!(self.contains(k), "scale index {k} outside [{}, {}]", self.k_min, self.k_max);
        self.eps[(k - self.k_min) as usize]
    }

    /// `r_k = ε_{k-1}/ε_k` for `k ∈ (k_min, k_max]`, extended by the same
    /// formula to any `k`.
    pub fn ratio(&self, k: i64) -> f64 {
        ratio_formula(self.r_star, k)
    }

    pub fn scales(&self) -> &[f64] {
        &self.eps
    }

    pub fn entries(&self) -> Vec<ScaleEntry> {
        (self.k_min..=self.k_max)
            .map(|k| ScaleEntry {
                k,
                eps_k: self.eps(k),
                ratio_k: (k > self.k_min).then(|| self.ratio(k)),
            })
            .collect()
    }

    /// Stable identifier derived from the parameters and stored range.
    pub fn id(&self) -> String {
        format!(
            "L={:e};eps={:e};anchor={:e};k=[{},{}]",
            self.l_eff, self.eps_eff, self.anchor, self.k_min, self.k_max
        )
    }

    /// The unique `k ∈ (k_min, k_max]` with `ε_{k-1} ≤ d < ε_k`.
    pub fn bracket(&self, d: f64) -> Option<i64> {
        let pos = self.eps.partition_point(|&e| e <= d);
        if pos == 0 || pos == self.eps.len() {
            None
        } else {
            Some(self.k_min + pos as i64)
        }
    }

    /// Smallest `k ∈ [k_min+2, k_max]` with `d < ε_{k-2}`.
    pub fn admissible_k(&self, d: f64) -> Option<i64> {
        let pos = self.eps.partition_point(|&e| e <= d);
        let k = (self.k_min + pos as i64 + 2).max(self.k_min + 2);
        (k <= self.k_max).then_some(k)
    }

    /// Same parameters, stored range extended down to `k_min`.
    pub fn deepen(&self, k_min: i64) -> Result<ScaleSchedule, ScheduleError> {
        if k_min >= self.k_min {
            return Ok(self.clone());
        }
        let mut below = Vec::with_capacity((self.k_min - k_min) as usize);
        let mut cur = self.eps[0];
        for k in ((k_min + 1)..=self.k_min).rev() {
            cur *= self.ratio(k);
            if cur < MIN_SCALE {
                return Err(ScheduleError::ExtendSchedule { k_min: self.k_min, needed_k_min: None });
            }
            below.push(cur);
        }
        below.reverse();
        below.extend_from_slice(&self.eps);
        Ok(ScaleSchedule { k_min, eps: below, ..self.clone() })
    }

    /// Locality radius: the largest `k` with `ε_{k+3} < r_bar` and
    /// `3L·ε_k/ε_{k+1} < xi`, and `r = ε_{k-2}`.
    pub fn locality_radius(&self, r_bar: f64, xi: f64, lipschitz: f64) -> Result<(i64, f64), ScheduleError> {
        positive("r_bar", r_bar)?;
        if !(xi > 0.0) {
            return Err(ScheduleError::InvalidParameter { name: "xi", value: xi });
        }
        let ok = |k: i64, eps_k3: f64| eps_k3 < r_bar && 3.0 * lipschitz * self.ratio(k + 1) < xi;
        let mut k = self.k_max - 3;
        while k >= self.k_min + 2 {
            if ok(k, self.eps(k + 3)) {
                return Ok((k, self.eps(k - 2)));
            }
            k -= 1;
        }
        // continue the recursion below the stored range to report the depth needed
        let mut ext = self.eps.clone();
        let mut ext_k_min = self.k_min;
        let needed = loop {
            while k - 2 < ext_k_min {
                let next = ext[0] * self.ratio(ext_k_min);
                if next < MIN_SCALE {
                    break;
                }
                ext.insert(0, next);
                ext_k_min -= 1;
            }
            if k - 2 < ext_k_min {
                break None;
            }
            if ok(k, ext[(k + 3 - ext_k_min) as usize]) {
                break Some(k - 2);
            }
            k -= 1;
        };
        Err(ScheduleError::ExtendSchedule { k_min: self.k_min, needed_k_min: needed })
    }
}

/// What a schedule must support beyond spanning the instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleRequest {
    pub epsilon: f64,
    /// Defaults to the diameter of `C ∪ queries`.
    pub anchor: Option<f64>,
    /// Radii that verification will probe.
    pub radii: Vec<f64>,
    /// When set, every radius must admit a locality radius at this `ξ`.
    pub xi: Option<f64>,
}

impl ScheduleRequest {
    pub fn new(epsilon: f64) -> Self {
        Self { epsilon, anchor: None, radii: Vec::new(), xi: None }
    }
}

/// Chooses spans for `instance` and builds the schedule, deepening it until
/// every requested locality radius exists. `Ok(None)` when `L = 0`.
pub fn plan_schedule(
    instance: &MetricInstance,
    queries: &[usize],
    req: &ScheduleRequest,
) -> Result<Option<ScaleSchedule>, ScheduleError> {
    positive("epsilon", req.epsilon)?;
    let l = instance.lipschitz();
    if l == 0.0 {
        return Ok(None);
    }
    let mut points: Vec<usize> = instance.subset().to_vec();
    points.extend(queries.iter().copied().filter(|&q| !instance.in_subset(q)));
    points.sort_unstable();
    points.dedup();

    let diam = match instance.diameter_of(&points) {
        d if d > 0.0 => d,
        _ => 1.0,
    };
    let anchor = match req.anchor {
        Some(a) => positive("anchor", a)?,
        None => diam,
    };
    let span_high = 2.0 * diam;
    let mut smallest = instance.min_separation_of(&points).unwrap_or(diam);
    for &r in &req.radii {
        smallest = smallest.min(positive("radius", r)?);
    }
    let span_low = (smallest / 64.0).min(span_high / 128.0);
    let mut schedule = build_schedule(l, req.epsilon, anchor, span_low, span_high)?;
    if let Some(xi) = req.xi {
        for &r in &req.radii {
            match schedule.locality_radius(r, xi, l) {
                Ok(_) => {}
                Err(ScheduleError::ExtendSchedule { needed_k_min: Some(k), .. }) => {
                    schedule = schedule.deepen(k)?;
                    schedule.locality_radius(r, xi, l)?;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(Some(schedule))
}
