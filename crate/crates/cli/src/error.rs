use lipext_core::energy::{EnergyError, ExtensionEnergyError};
use lipext_core::extension::EngineError;
use lipext_core::metric::InstanceError;
use lipext_core::schedule::ScheduleError;
use lipext_core::verification::VerifyError;
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

/// Input or parameter error (exit 1) or failed property check (exit 2).
#[derive(Debug, Serialize)]
pub struct CliError {
    #[serde(skip)]
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub witness: Vec<usize>,
}

impl CliError {
    pub fn input(kind: &'static str, message: impl Into<String>) -> Self {
        Self { code: 1, kind, message: message.into(), field: None, witness: Vec::new() }
    }

    pub fn param(name: &str, message: impl Into<String>) -> Self {
        Self { field: Some(name.to_string()), ..Self::input("invalid_parameter", message) }
    }

    pub fn property(message: impl Into<String>) -> Self {
        Self { code: 2, ..Self::input("property_check_failed", message) }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            schema_version: u32,
            ok: bool,
            error: &'a CliError,
        }
        serde_json::to_string_pretty(&Body { schema_version: SCHEMA_VERSION, ok: false, error: self }).unwrap()
    }
}

impl From<InstanceError> for CliError {
    fn from(e: InstanceError) -> Self {
        Self {
            field: Some(e.field().to_string()),
            witness: e.witness(),
            ..Self::input("invalid_instance", e.to_string())
        }
    }
}

impl From<ScheduleError> for CliError {
    fn from(e: ScheduleError) -> Self {
        Self::input("schedule", e.to_string())
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Schedule(s) => s.into(),
            EngineError::NotInSubset(i) | EngineError::QueryOutOfRange { index: i, .. } => {
                Self { witness: vec![i], ..Self::input("invalid_parameter", e.to_string()) }
            }
            other => Self::input("extension", other.to_string()),
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Schedule(s) => s.into(),
            VerifyError::Engine(s) => s.into(),
            VerifyError::InvalidParameter { name, .. } => Self::param(name, e.to_string()),
        }
    }
}

impl From<EnergyError> for CliError {
    fn from(e: EnergyError) -> Self {
        let field = match e {
            EnergyError::InvalidExponent(_) => "p",
            EnergyError::InvalidRadius(_) => "radii",
            _ => "masses",
        };
        let witness = match e {
            EnergyError::NegativeMass { index }
            | EnergyError::MassOffSubset { index }
            | EnergyError::DomainMissesSupport { index } => vec![index],
            _ => Vec::new(),
        };
        Self { field: Some(field.into()), witness, ..Self::input("invalid_measure", e.to_string()) }
    }
}

impl From<ExtensionEnergyError> for CliError {
    fn from(e: ExtensionEnergyError) -> Self {
        match e {
            ExtensionEnergyError::Energy(e) => e.into(),
            ExtensionEnergyError::Verify(e) => e.into(),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        let msg = e.to_string();
        // serde names the offending field between backticks
        let field = msg
            .strip_prefix("missing field `")
            .or_else(|| msg.strip_prefix("unknown field `"))
            .and_then(|rest| rest.split('`').next())
            .unwrap_or("input");
        Self { field: Some(field.to_string()), ..Self::input("parse", msg) }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::input("io", e.to_string())
    }
}
