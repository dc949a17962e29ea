//! JSON model files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tsvar_core::identify::FitReport;
use tsvar_core::{Error, GammaReversionMeasure, Result, Station, SupOUModel, TemperedStableLevy};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub station: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_start: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_end: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acf_lag_cutoff: Option<usize>,
    /// Relative errors of mean, variance, skewness, kurtosis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residuals: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
}

/// On-disk model. Floats are written in shortest round-trip form, so a
/// load/save cycle reproduces the file byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub shift: f64,
    #[serde(default)]
    pub metadata: Metadata,
}

impl ModelFile {
    pub fn from_model(m: &SupOUModel, metadata: Metadata) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            alpha: m.reversion.alpha(),
            beta: m.reversion.beta(),
            a: m.levy.intensity(),
            b: m.levy.tempering(),
            c: m.levy.stability(),
            shift: m.shift(),
            metadata,
        }
    }

    pub fn from_fit(report: &FitReport, metadata: Metadata) -> Self {
        let metadata = Metadata {
            acf_lag_cutoff: Some(report.acf_lag_cutoff),
            residuals: Some(report.residuals),
            objective: Some(report.objective_value),
            ..metadata
        };
        ModelFile::from_model(&report.model, metadata)
    }

    /// Re-validates every model invariant.
    pub fn to_model(&self) -> Result<SupOUModel> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported model format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let reversion = GammaReversionMeasure::new(self.alpha, self.beta)?;
        let levy = TemperedStableLevy::new(self.a, self.b, self.c)?;
        SupOUModel::new(reversion, levy, self.shift)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model file serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse { row: e.line(), message: e.to_string() })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Resolves `builtin:<station>` or a JSON path.
pub fn resolve_model(spec: &str) -> Result<(SupOUModel, Option<Station>)> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        let station = Station::from_name(name).ok_or_else(|| {
            let known: Vec<_> = Station::ALL.iter().map(|s| s.name()).collect();
            Error::InvalidParameter(format!("unknown station '{name}' (known: {})", known.join(", ")))
        })?;
        return Ok((station.model(), Some(station)));
    }
    let file = ModelFile::load(Path::new(spec))?;
    let station = file.metadata.station.as_deref().and_then(Station::from_name);
    Ok((file.to_model()?, station))
}
