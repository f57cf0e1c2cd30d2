//! JSON instance files.

use serde::{Deserialize, Serialize};

use crate::metric::{Geometry, RawInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub points: Geometry,
    pub subset: Vec<usize>,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl InstanceFile {
    pub fn from_raw(raw: RawInstance, masses: Option<Vec<f64>>) -> Self {
        Self {
            points: raw.geometry,
            subset: raw.subset,
            values: raw.values,
            lipschitz: raw.lipschitz,
            masses,
            labels: raw.labels,
        }
    }

    /// Splits off the masses.
    pub fn into_raw(self) -> (RawInstance, Option<Vec<f64>>) {
        let raw = RawInstance {
            geometry: self.points,
            subset: self.subset,
            values: self.values,
            lipschitz: self.lipschitz,
            labels: self.labels,
        };
        (raw, self.masses)
    }
}
