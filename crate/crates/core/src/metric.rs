//! Finite metric spaces, a distinguished subset `C` carrying samples of `g`,
//! and the elementary Lipschitz quantities computed on them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance for the triangle inequality on explicit matrices.
pub const TRIANGLE_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error("instance has no points")]
    NoPoints,
    #[error("coordinate row {row} has length {len}, expected {expected}")]
    RaggedCoords { row: usize, len: usize, expected: usize },
    #[error("distance matrix row {row} has length {len}, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("non-finite number in `{field}` at index {index}")]
    NonFinite { field: &'static str, index: usize },
    #[error("negative distance d({i},{j}) = {value}")]
    NegativeDistance { i: usize, j: usize, value: f64 },
    #[error("nonzero diagonal entry d({i},{i}) = {value}")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("asymmetric distance: d({i},{j}) = {dij} but d({j},{i}) = {dji}")]
    Asymmetric { i: usize, j: usize, dij: f64, dji: f64 },
    #[error("distinct points {i} and {j} are at distance zero")]
    Coincident { i: usize, j: usize },
    #[error("triangle inequality violated at ({i},{j},{k}): d({i},{k}) = {direct} > {via}")]
    TriangleViolation { i: usize, j: usize, k: usize, direct: f64, via: f64 },
    #[error("subset is empty")]
    EmptySubset,
    #[error("subset index {index} out of range for {n} points")]
    SubsetOutOfRange { index: usize, n: usize },
    #[error("subset index {index} appears more than once")]
    DuplicateSubsetIndex { index: usize },
    #[error("subset has {subset} entries but values has {values}")]
    LengthMismatch { subset: usize, values: usize },
    #[error("labels has {labels} entries for {n} points")]
    LabelsLength { labels: usize, n: usize },
    #[error("supplied Lipschitz constant {supplied} is below Lip(g, C) = {required}")]
    LipschitzTooSmall { supplied: f64, required: f64 },
    #[error("invalid Lipschitz constant {0}")]
    InvalidLipschitz(f64),
    #[error("samples reference point {index} outside the instance ({n} points)")]
    SampleOutOfRange { index: usize, n: usize },
}

impl InstanceError {
    /// Offending indices, for machine-readable error reports.
    pub fn witness(&self) -> Vec<usize> {
        use InstanceError::*;
        match *self {
            RaggedCoords { row, .. } | NotSquare { row, .. } => vec![row],
            NonFinite { index, .. } => vec![index],
            NegativeDistance { i, j, .. } | Asymmetric { i, j, .. } | Coincident { i, j } => {
                vec![i, j]
            }
            NonzeroDiagonal { i, .. } => vec![i],
            TriangleViolation { i, j, k, .. } => vec![i, j, k],
            SubsetOutOfRange { index, .. }
            | DuplicateSubsetIndex { index }
            | SampleOutOfRange { index, .. } => vec![index],
            _ => Vec::new(),
        }
    }

    /// Name of the input field the error refers to.
    pub fn field(&self) -> &'static str {
        use InstanceError::*;
        match self {
            NoPoints | RaggedCoords { .. } | NotSquare { .. } | NegativeDistance { .. }
            | NonzeroDiagonal { .. } | Asymmetric { .. } | Coincident { .. }
            | TriangleViolation { .. } => "points",
            NonFinite { field, .. } => field,
            EmptySubset | SubsetOutOfRange { .. } | DuplicateSubsetIndex { .. } => "subset",
            LengthMismatch { .. } => "values",
            LabelsLength { .. } => "labels",
            LipschitzTooSmall { .. } | InvalidLipschitz(_) => "lipschitz",
            SampleOutOfRange { .. } => "samples",
        }
    }
}

/// How distances between points are obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Geometry {
    /// Points in `R^dim`, distances from the Euclidean norm.
    Euclidean { coords: Vec<Vec<f64>> },
    /// Explicit symmetric distance matrix.
    Matrix { d: Vec<Vec<f64>> },
}

impl Geometry {
    fn len(&self) -> usize {
        match self {
            Geometry::Euclidean { coords } => coords.len(),
            Geometry::Matrix { d } => d.len(),
        }
    }
}

/// Unvalidated instance as read from external input.
#[derive(Debug, Clone, PartialEq)]
pub struct RawInstance {
    pub geometry: Geometry,
    pub subset: Vec<usize>,
    pub values: Vec<f64>,
    pub lipschitz: Option<f64>,
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone)]
enum Distances {
    Euclidean { dim: usize, coords: Vec<f64> },
    Matrix { n: usize, d: Vec<f64> },
}

/// A validated finite metric space with samples of `g` on the subset `C`.
///
/// Immutable after [`validate_instance`]; every query is a pure function of it.
#[derive(Debug, Clone)]
pub struct MetricInstance {
    n: usize,
    dist: Distances,
    labels: Option<Vec<String>>,
    subset: Vec<usize>,
    values: Vec<f64>,
    /// position of each point in `subset`, if any
    subset_pos: Vec<Option<usize>>,
    lipschitz: f64,
    computed_lipschitz: f64,
}

/// Values of a function sampled on a set of point indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Samples {
    pub domain: Vec<usize>,
    pub values: Vec<f64>,
}

impl Samples {
    pub fn new(domain: Vec<usize>, values: Vec<f64>) -> Result<Self, InstanceError> {
        if domain.len() != values.len() {
            return Err(InstanceError::LengthMismatch { subset: domain.len(), values: values.len() });
        }
        Ok(Self { domain, values })
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.domain.iter().copied().zip(self.values.iter().copied())
    }

    /// Keeps the entries whose point index satisfies `keep`, order preserved.
    pub fn filter(&self, mut keep: impl FnMut(usize) -> bool) -> Samples {
        let (domain, values) = self.iter().filter(|&(i, _)| keep(i)).unzip();
        Samples { domain, values }
    }

    /// Value at point `index`, if sampled there.
    pub fn get(&self, index: usize) -> Option<f64> {
        self.domain.iter().position(|&i| i == index).map(|p| self.values[p])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Samples {
        Samples { domain: self.domain.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }
}

/// Lipschitz constants of a function restricted to balls of increasing radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusProfile {
    pub radii: Vec<f64>,
    pub constants: Vec<f64>,
}

fn check_finite(field: &'static str, xs: impl IntoIterator<Item = f64>) -> Result<(), InstanceError> {
    for (index, x) in xs.into_iter().enumerate() {
        if !x.is_finite() {
            return Err(InstanceError::NonFinite { field, index });
        }
    }
    Ok(())
}

fn check_matrix(d: &[Vec<f64>]) -> Result<Vec<f64>, InstanceError> {
    let n = d.len();
    for (row, r) in d.iter().enumerate() {
        if r.len() != n {
            return Err(InstanceError::NotSquare { row, len: r.len(), expected: n });
        }
        check_finite("points", r.iter().copied()).map_err(|_| InstanceError::NonFinite {
            field: "points",
            index: row,
        })?;
    }
    let mut scale: f64 = 0.0;
    for i in 0..n {
        if d[i][i] != 0.0 {
            return Err(InstanceError::NonzeroDiagonal { i, value: d[i][i] });
        }
        for j in 0..n {
            let v = d[i][j];
            if v < 0.0 {
                return Err(InstanceError::NegativeDistance { i, j, value: v });
            }
            if v != d[j][i] {
                return Err(InstanceError::Asymmetric { i, j, dij: v, dji: d[j][i] });
            }
            if i != j && v == 0.0 {
                return Err(InstanceError::Coincident { i: i.min(j), j: i.max(j) });
            }
            scale = scale.max(v);
        }
    }
    let tol = TRIANGLE_RTOL * scale;
    for i in 0..n {
        for k in (i + 1)..n {
            for j in 0..n {
                if j == i || j == k {
                    continue;
                }
                let via = d[i][j] + d[j][k];
                if d[i][k] > via + tol {
                    return Err(InstanceError::TriangleViolation { i, j, k, direct: d[i][k], via });
                }
            }
        }
    }
    Ok(d.iter().flatten().copied().collect())
}

fn check_euclidean(coords: &[Vec<f64>]) -> Result<(usize, Vec<f64>), InstanceError> {
    let dim = coords[0].len();
    for (row, c) in coords.iter().enumerate() {
        if c.len() != dim {
            return Err(InstanceError::RaggedCoords { row, len: c.len(), expected: dim });
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(InstanceError::NonFinite { field: "points", index: row });
        }
    }
    let flat: Vec<f64> = coords.iter().flatten().copied().collect();
    let dist = Distances::Euclidean { dim, coords: flat.clone() };
    let n = coords.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if dist.get(i, j) == 0.0 {
                return Err(InstanceError::Coincident { i, j });
            }
        }
    }
    Ok((dim, flat))
}

impl Distances {
    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Distances::Euclidean { dim, coords } => {
                let a = &coords[i * dim..(i + 1) * dim];
                let b = &coords[j * dim..(j + 1) * dim];
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
            }
            Distances::Matrix { n, d } => d[i * n + j],
        }
    }
}

/// Checks every [`MetricInstance`] invariant and attaches the Lipschitz constant.
///
/// Euclidean inputs are metric by construction and only checked for shape,
/// finiteness and coincident points; explicit matrices get the full axiom
/// check including the triangle inequality (relative tolerance
/// [`TRIANGLE_RTOL`] times the largest entry).
pub fn validate_instance(raw: RawInstance) -> Result<MetricInstance, InstanceError> {
    let n = raw.geometry.len();
    if n == 0 {
        return Err(InstanceError::NoPoints);
    }
    let dist = match &raw.geometry {
        Geometry::Euclidean { coords } => {
            let (dim, coords) = check_euclidean(coords)?;
            Distances::Euclidean { dim, coords }
        }
        Geometry::Matrix { d } => Distances::Matrix { n, d: check_matrix(d)? },
    };
    if let Some(labels) = &raw.labels {
        if labels.len() != n {
            return Err(InstanceError::LabelsLength { labels: labels.len(), n });
        }
    }
    if raw.subset.is_empty() {
        return Err(InstanceError::EmptySubset);
    }
    let mut subset_pos = vec![None; n];
    for (pos, &index) in raw.subset.iter().enumerate() {
        if index >= n {
            return Err(InstanceError::SubsetOutOfRange { index, n });
        }
        if subset_pos[index].is_some() {
            return Err(InstanceError::DuplicateSubsetIndex { index });
        }
        subset_pos[index] = Some(pos);
    }
    if raw.values.len() != raw.subset.len() {
        return Err(InstanceError::LengthMismatch {
            subset: raw.subset.len(),
            values: raw.values.len(),
        });
    }
    check_finite("values", raw.values.iter().copied())?;

    let mut inst = MetricInstance {
        n,
        dist,
        labels: raw.labels,
        subset: raw.subset,
        values: raw.values,
        subset_pos,
        lipschitz: 0.0,
        computed_lipschitz: 0.0,
    };
    let computed = inst.lip_constant(&inst.g());
    inst.computed_lipschitz = computed;
    inst.lipschitz = match raw.lipschitz {
        None => computed,
        Some(l) if !l.is_finite() || l < 0.0 => return Err(InstanceError::InvalidLipschitz(l)),
        Some(l) if l < computed => {
            return Err(InstanceError::LipschitzTooSmall { supplied: l, required: computed })
        }
        Some(l) => l,
    };
    Ok(inst)
}

impl MetricInstance {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.dist.get(i, j)
        }
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Indices of `C`, in input order.
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    /// Values of `g`, aligned with [`subset`](Self::subset).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `g` as samples on `C`.
    pub fn g(&self) -> Samples {
        Samples { domain: self.subset.clone(), values: self.values.clone() }
    }

    pub fn in_subset(&self, i: usize) -> bool {
        self.subset_pos.get(i).is_some_and(|p| p.is_some())
    }

    /// `g(i)` if `i ∈ C`.
    pub fn g_at(&self, i: usize) -> Option<f64> {
        self.subset_pos.get(i).copied().flatten().map(|p| self.values[p])
    }

    /// The constant `L` in force: user supplied, or `Lip(g, C)`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `Lip(g, C)` as computed from the samples.
    pub fn computed_lipschitz(&self) -> f64 {
        self.computed_lipschitz
    }

    pub fn all_points(&self) -> Vec<usize> {
        (0..self.n).collect()
    }

    /// Points outside `C`, ascending.
    pub fn complement(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| !self.in_subset(i)).collect()
    }

    pub fn max_abs_g(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest distance between two points of `set`.
    pub fn diameter_of(&self, set: &[usize]) -> f64 {
        let mut best: f64 = 0.0;
        for (a, &i) in set.iter().enumerate() {
            for &j in &set[a + 1..] {
                best = best.max(self.distance(i, j));
            }
        }
        best
    }

    pub fn diameter(&self) -> f64 {
        self.diameter_of(&self.all_points())
    }

    /// Smallest positive distance between two points of `set`, `None` if `|set| < 2`.
    pub fn min_separation_of(&self, set: &[usize]) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (a, &i) in set.iter().enumerate() {
            for &j in &set[a + 1..] {
                let d = self.distance(i, j);
                best = Some(best.map_or(d, |b: f64| b.min(d)));
            }
        }
        best
    }

    /// `d(i, C)`.
    pub fn distance_to_subset(&self, i: usize) -> f64 {
        self.subset.iter().map(|&c| self.distance(i, c)).fold(f64::INFINITY, f64::min)
    }

    /// Rejects samples that reference points outside the instance.
    pub fn check_samples(&self, s: &Samples) -> Result<(), InstanceError> {
        match s.domain.iter().find(|&&i| i >= self.n) {
            Some(&index) => Err(InstanceError::SampleOutOfRange { index, n: self.n }),
            None => Ok(()),
        }
    }

    /// `Lip(v, A)`: supremum of `|v(a)-v(b)| / d(a,b)` over distinct pairs of
    /// the sampled domain; 0 for fewer than two points.
    pub fn lip_constant(&self, s: &Samples) -> f64 {
        let mut best: f64 = 0.0;
        for a in 0..s.len() {
            let (i, vi) = (s.domain[a], s.values[a]);
            for b in (a + 1)..s.len() {
                let j = s.domain[b];
                if i == j {
                    continue;
                }
                let ratio = (vi - s.values[b]).abs() / self.distance(i, j);
                if ratio > best {
                    best = ratio;
                }
            }
        }
        best
    }

    /// `{i ∈ within : d(center, i) < r}` (open ball), order of `within` preserved.
    pub fn ball_members(&self, center: usize, r: f64, within: &[usize]) -> Vec<usize> {
        within.iter().copied().filter(|&i| self.distance(center, i) < r).collect()
    }

    /// Samples restricted to the open ball `B_r(center)`.
    pub fn restrict_to_ball(&self, s: &Samples, center: usize, r: f64) -> Samples {
        s.filter(|i| self.distance(center, i) < r)
    }

    /// Lipschitz constant of `s` on each open ball `B_r(x)`, `r ∈ radii`.
    pub fn lipa_profile(&self, s: &Samples, x: usize, radii: &[f64]) -> RadiusProfile {
        debug_assert!(radii.windows(2).all(|w| w[0] < w[1]), "radii must increase");
        let constants = radii
            .iter()
            .map(|&r| self.lip_constant(&self.restrict_to_ball(s, x, r)))
            .collect();
        RadiusProfile { radii: radii.to_vec(), constants }
    }
}
