//! Per-anchor penalization: a convex, increasing, piecewise-linear function of
//! the distance to the anchor, replacing the linear cone `L·t` of the McShane
//! envelope.

use serde::Serialize;
use thiserror::Error;

use crate::metric::MetricInstance;
use crate::schedule::ScaleSchedule;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileViolation {
    #[error("negative argument t = {0}")]
    NegativeArgument(f64),
    #[error("slope {slope} of interval {interval} outside [0, {budget}]")]
    SlopeOutOfRange { interval: usize, slope: f64, budget: f64 },
    #[error("slope decreases at breakpoint {at}: {left} > {right}")]
    NotConvex { at: usize, left: f64, right: f64 },
    #[error("prefix sum broken at breakpoint {at}")]
    Discontinuous { at: usize },
    #[error("breakpoints not strictly increasing at {at}")]
    Unordered { at: usize },
}

/// `S_k(x) = Lip(g, C ∩ B_{ε_k}(x))` for `k ∈ [k_min, k_max + 1]`.
///
/// The entry at `k_max + 1` is `Lip(g, C)`: the ball of radius `ε_{k_max}`
/// already holds all of `C`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxSlopes {
    pub anchor: usize,
    pub k_min: i64,
    pub values: Vec<f64>,
}

impl ApproxSlopes {
    pub fn get(&self, k: i64) -> f64 {
        self.values[(k - self.k_min) as usize]
    }

    pub fn k_max(&self) -> i64 {
        self.k_min + self.values.len() as i64 - 1
    }
}

/// Computes `S_k(x)` on the schedule range.
///
/// Members of `C` are sorted by distance from `x` and the Lipschitz constant
/// of every prefix is accumulated once, so each `S_k` is a lookup of the
/// prefix that fits in the open ball.
pub fn approx_slopes(instance: &MetricInstance, x: usize, schedule: &ScaleSchedule) -> ApproxSlopes {
    let mut members: Vec<(f64, usize, f64)> = instance
        .subset()
        .iter()
        .zip(instance.values())
        .map(|(&c, &v)| (instance.distance(x, c), c, v))
        .collect();
    members.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    // prefix_lip[m] = Lip(g, first m members)
    let mut prefix_lip = Vec::with_capacity(members.len() + 1);
    prefix_lip.push(0.0);
    let mut best: f64 = 0.0;
    for (m, &(_, cj, vj)) in members.iter().enumerate() {
        for &(_, ci, vi) in &members[..m] {
            let ratio = (vi - vj).abs() / instance.distance(ci, cj);
            if ratio > best {
                best = ratio;
            }
        }
        prefix_lip.push(best);
    }

    let mut values: Vec<f64> = (schedule.k_min()..=schedule.k_max())
        .map(|k| {
            let r = schedule.eps(k);
            let inside = members.partition_point(|m| m.0 < r);
            prefix_lip[inside]
        })
        .collect();
    values.push(*prefix_lip.last().unwrap());
    ApproxSlopes { anchor: x, k_min: schedule.k_min(), values }
}

/// Piecewise-linear convex `pen_x` with `pen_x(0) = 0`.
///
/// On `(0, b_0]` the slope is `base_slope`; on `(b_i, b_{i+1}]` it is
/// `slopes[i]`; beyond the last breakpoint it is `tail_slope`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenalizationProfile {
    pub anchor: usize,
    pub breakpoints: Vec<f64>,
    pub slopes: Vec<f64>,
    pub base_slope: f64,
    pub tail_slope: f64,
    /// `pen_x(b_i)`
    pub cumulative: Vec<f64>,
}

/// Slope on `(ε_{k-2}, ε_{k-1})` is `S_k + 3L·r_{k-1}` for
/// `k ∈ [k_min+2, k_max+1]`.
///
/// Below `ε_{k_min}` the infinitely many remaining intervals are replaced by
/// the first interval's slope, which over-estimates `pen_x` there by at most
/// `ε_{k_min}·base_slope` and keeps convexity.
pub fn build_penalization(slopes: &ApproxSlopes, schedule: &ScaleSchedule, lipschitz: f64) -> PenalizationProfile {
    let (k_min, k_max) = (schedule.k_min(), schedule.k_max());
    assert_eq!(slopes.k_min, k_min, "slopes and schedule disagree on k_min");
    assert!(slopes.k_max() > k_max, "slopes must reach k_max + 1");
    let breakpoints = schedule.scales().to_vec();
    let interval_slopes: Vec<f64> = ((k_min + 2)..=(k_max + 1))
        .map(|k| slopes.get(k) + 3.0 * lipschitz * schedule.ratio(k - 1))
        .collect();
    let base_slope = interval_slopes[0];
    let tail_slope = slopes.get(k_max + 1) + 3.0 * lipschitz * schedule.r_star();

    let mut cumulative = Vec::with_capacity(breakpoints.len());
    cumulative.push(base_slope * breakpoints[0]);
    for i in 0..interval_slopes.len() {
        let next = cumulative[i] + interval_slopes[i] * (breakpoints[i + 1] - breakpoints[i]);
        cumulative.push(next);
    }
    PenalizationProfile {
        anchor: slopes.anchor,
        breakpoints,
        slopes: interval_slopes,
        base_slope,
        tail_slope,
        cumulative,
    }
}

impl PenalizationProfile {
    /// The cone `t ↦ slope·t`; with it the extension is the McShane upper envelope.
    pub fn linear(anchor: usize, slope: f64) -> Self {
        Self {
            anchor,
            breakpoints: Vec::new(),
            slopes: Vec::new(),
            base_slope: slope,
            tail_slope: slope,
            cumulative: Vec::new(),
        }
    }

    /// `pen_x(t)`. Panics on negative `t`; see [`try_eval`](Self::try_eval).
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        assert!(t >= 0.0, "pen evaluated at negative t = {t}");
        let bp = &self.breakpoints;
        let Some(&first) = bp.first() else {
            return self.tail_slope * t;
        };
        if t <= first {
            return self.base_slope * t;
        }
        let last = bp.len() - 1;
        if t > bp[last] {
            return self.cumulative[last] + self.tail_slope * (t - bp[last]);
        }
        let i = bp.partition_point(|&b| b < t) - 1;
        self.cumulative[i] + self.slopes[i] * (t - bp[i])
    }

    pub fn try_eval(&self, t: f64) -> Result<f64, ProfileViolation> {
        if t >= 0.0 {
            Ok(self.eval(t))
        } else {
            Err(ProfileViolation::NegativeArgument(t))
        }
    }

    /// Largest slope in use, i.e. the Lipschitz constant of `pen_x`.
    pub fn max_slope(&self) -> f64 {
        self.slopes.iter().copied().fold(self.base_slope.max(self.tail_slope), f64::max)
    }

    /// Upper bound on how much the base-slope truncation raises `pen_x`.
    pub fn tail_bound(&self) -> f64 {
        self.cumulative.first().copied().unwrap_or(0.0)
    }

    /// Convexity, slope range `[0, budget]` and exact prefix sums.
    pub fn check_legal(&self, budget: f64) -> Result<(), ProfileViolation> {
        let all: Vec<f64> = std::iter::once(self.base_slope)
            .chain(self.slopes.iter().copied())
            .chain(std::iter::once(self.tail_slope))
            .collect();
        for (interval, &slope) in all.iter().enumerate() {
            if !(0.0..=budget).contains(&slope) {
                return Err(ProfileViolation::SlopeOutOfRange { interval, slope, budget });
            }
        }
        for (at, w) in all.windows(2).enumerate() {
            if w[0] > w[1] {
                return Err(ProfileViolation::NotConvex { at, left: w[0], right: w[1] });
            }
        }
        let bp = &self.breakpoints;
        for at in 1..bp.len() {
            if bp[at - 1] >= bp[at] {
                return Err(ProfileViolation::Unordered { at });
            }
        }
        if let Some(&b0) = bp.first() {
            if self.cumulative[0] != self.base_slope * b0 || self.eval(b0) != self.cumulative[0] {
                return Err(ProfileViolation::Discontinuous { at: 0 });
            }
        }
        for at in 1..bp.len() {
            let from_left = self.cumulative[at - 1] + self.slopes[at - 1] * (bp[at] - bp[at - 1]);
            if from_left != self.cumulative[at] || self.eval(bp[at]) != self.cumulative[at] {
                return Err(ProfileViolation::Discontinuous { at });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{validate_instance, Geometry, RawInstance};
    use crate::schedule::build_schedule;

    fn line(xs: &[f64], subset: Vec<usize>, values: Vec<f64>) -> MetricInstance {
        validate_instance(RawInstance {
            geometry: Geometry::Euclidean { coords: xs.iter().map(|&x| vec![x]).collect() },
            subset,
            values,
            lipschitz: None,
            labels: None,
        })
        .unwrap()
    }

    fn unit_schedule() -> ScaleSchedule {
        build_schedule(1.0, 1.0, 1.0, 1e-6, 10.0).unwrap()
    }

    #[test]
    fn slopes_on_two_point_line() {
        let inst = line(&[0.0, 1.0], vec![0, 1], vec![0.0, 1.0]);
        let s = unit_schedule();
        let sl = approx_slopes(&inst, 0, &s);
        for k in s.k_min()..=s.k_max() {
            let expect = if s.eps(k) <= 1.0 { 0.0 } else { 1.0 };
            assert_eq!(sl.get(k), expect, "k = {k}, eps = {}", s.eps(k));
        }
        assert_eq!(sl.get(s.k_max() + 1), 1.0);
    }

    #[test]
    fn slopes_of_constant_g_vanish() {
        let inst = line(&[0.0, 0.3, 1.0], vec![0, 1, 2], vec![2.0; 3]);
        let sl = approx_slopes(&inst, 1, &unit_schedule());
        assert!(sl.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn slopes_match_brute_force_ball() {
        let inst = line(&[0.0, 0.5, 1.0], vec![0, 1, 2], vec![0.0, 1.0, 1.0]);
        let s = build_schedule(1.0, 1.0, 0.7, 1e-6, 10.0).unwrap();
        let sl = approx_slopes(&inst, 0, &s);
        // ball of radius 0.7 around 0 holds {0, 0.5}: |1-0|/0.5
        let k = (s.k_min()..=s.k_max()).find(|&k| (s.eps(k) - 0.7).abs() < 1e-12).unwrap();
        assert_eq!(sl.get(k), 2.0);
        for k in s.k_min()..=s.k_max() {
            let ball = inst.restrict_to_ball(&inst.g(), 0, s.eps(k));
            assert_eq!(sl.get(k), inst.lip_constant(&ball));
        }
    }

    #[test]
    fn constant_g_profile_slopes() {
        let inst = line(&[0.0, 1.0], vec![0, 1], vec![0.0, 0.0]);
        let s = unit_schedule();
        let p = build_penalization(&approx_slopes(&inst, 0, &s), &s, 1.0);
        for (i, &slope) in p.slopes.iter().enumerate() {
            let k = s.k_min() + i as i64 + 2;
            assert_eq!(slope, 3.0 * s.ratio(k - 1));
            assert!(slope <= 0.5);
        }
        p.check_legal(2.0).unwrap();
    }

    #[test]
    fn eval_examples() {
        let inst = line(&[0.0, 1.0], vec![0, 1], vec![0.0, 1.0]);
        let s = unit_schedule();
        let p = build_penalization(&approx_slopes(&inst, 0, &s), &s, 1.0);
        assert_eq!(p.eval(0.0), 0.0);
        let last = p.breakpoints.len() - 1;
        let b = p.breakpoints[last];
        assert_eq!(p.eval(b + 3.0), p.cumulative[last] + p.tail_slope * 3.0);
        let i = 4;
        let mid = 0.5 * (p.breakpoints[i] + p.breakpoints[i + 1]);
        assert_eq!(p.eval(mid), p.cumulative[i] + p.slopes[i] * (mid - p.breakpoints[i]));
        assert!(p.try_eval(-1.0).is_err());
        assert_eq!(p.tail_slope, p.slopes[p.slopes.len() - 1]);
        assert!(p.max_slope() <= 2.0);
    }

    #[test]
    fn linear_profile_is_a_cone() {
        let p = PenalizationProfile::linear(0, 1.5);
        assert_eq!(p.eval(2.0), 3.0);
        p.check_legal(1.5).unwrap();
    }

    #[test]
    fn corrupted_profile_is_flagged() {
        let inst = line(&[0.0, 1.0], vec![0, 1], vec![0.0, 1.0]);
        let s = unit_schedule();
        let mut p = build_penalization(&approx_slopes(&inst, 0, &s), &s, 1.0);
        p.cumulative[3] += 1e-9;
        assert!(matches!(p.check_legal(2.0), Err(ProfileViolation::Discontinuous { .. })));
        let mut q = build_penalization(&approx_slopes(&inst, 0, &s), &s, 1.0);
        q.slopes[2] = q.slopes[3] + 0.1;
        assert!(q.check_legal(5.0).is_err());
    }
}
