//! JSON documents read by the harness: architecture, response catalog and
//! scenario files. Every document carries a `schema_version`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use react_core::engine::{AdaptationConfig, Effects, FeedbackVerdict};
use react_core::model::{
    Asset, AssetId, HeavensLevel, HeavensVector, IntrusionEvent, IntrusionResult, ResponseSpec,
    VehicleState,
};
use react_core::precondition::Facts;
use react_core::response::{Catalog, NO_ACTION_INDEX};
use react_core::selectors::SawConfig;

use crate::error::{HarnessError, Result};

/// The only schema version this build reads and writes.
pub const SCHEMA_VERSION: u32 = 1;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureFile {
    pub schema_version: u32,
    pub name: String,
    pub assets: Vec<Asset>,
}

impl ArchitectureFile {
    pub fn validate(&self, path: &Path) -> Result<()> {
        check_version(path, self.schema_version)?;
        let mut seen = BTreeSet::new();
        for asset in &self.assets {
            if !seen.insert(&asset.id) {
                return Err(HarnessError::invalid(
                    path,
                    format!("duplicate asset id `{}`", asset.id),
                ));
            }
        }
        Ok(())
    }

    pub fn contains(&self, id: &AssetId) -> bool {
        self.assets.iter().any(|a| &a.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogFile {
    pub schema_version: u32,
    pub name: String,
    /// Set when parameter values are reconstructed rather than given.
    #[serde(default)]
    pub inferred: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub responses: Vec<ResponseSpec>,
}

impl CatalogFile {
    pub fn validate(&self, path: &Path) -> Result<Catalog> {
        check_version(path, self.schema_version)?;
        for spec in &self.responses {
            if !spec.is_general && spec.applicable_results.is_empty() {
                return Err(HarnessError::invalid(
                    path,
                    format!(
                        "response {} is not general and lists no intrusion results",
                        spec.index
                    ),
                ));
            }
        }
        Catalog::new(self.responses.clone()).map_err(|e| HarnessError::invalid(path, e.to_string()))
    }
}

/// Bounds of the success prefactor; the seed comes from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrefactorRange {
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for PrefactorRange {
    fn default() -> Self {
        let d = AdaptationConfig::default();
        Self {
            r_min: d.r_min,
            r_max: d.r_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Resolved relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub architecture_ref: Option<PathBuf>,
    /// Resolved relative to the scenario file.
    pub catalog_ref: PathBuf,
    pub infected_asset: AssetId,
    pub affected_asset: AssetId,
    pub intrusion_result: IntrusionResult,
    pub velocity_kmh: f64,
    pub impact_params: HeavensVector,
    #[serde(default = "one")]
    pub env_weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env_override: Option<HeavensLevel>,
    /// Names of fields whose values are reconstructed rather than given.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inferred: Vec<String>,
    #[serde(default)]
    pub facts: Facts,
    /// Facts set when a response with the given index is executed.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub effects: Effects,
    #[serde(default)]
    pub saw: SawConfig,
    #[serde(default)]
    pub adaptation: PrefactorRange,
    /// Catalog indices left out of this scenario.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub excluded_responses: BTreeSet<u32>,
    #[serde(default)]
    pub feedback_script: Vec<FeedbackVerdict>,
}

impl ScenarioFile {
    /// The intrusion event at the given velocity.
    pub fn event_at(&self, velocity_kmh: f64) -> Result<IntrusionEvent> {
        Ok(IntrusionEvent {
            infected_asset: self.infected_asset.clone(),
            affected_asset: self.affected_asset.clone(),
            result: self.intrusion_result,
            impact_params: self.impact_params,
            env_weight: self.env_weight,
            env_override: self.env_override,
            vehicle: VehicleState::new(velocity_kmh, self.facts.clone())?,
        })
    }

    pub fn event(&self) -> Result<IntrusionEvent> {
        self.event_at(self.velocity_kmh)
    }

    pub fn adaptation(&self, seed: u64) -> AdaptationConfig {
        AdaptationConfig {
            r_min: self.adaptation.r_min,
            r_max: self.adaptation.r_max,
            rng_seed: seed,
        }
    }

    fn validate(&self, path: &Path, architecture: Option<&ArchitectureFile>) -> Result<()> {
        let invalid = |msg: String| HarnessError::invalid(path, msg);
        check_version(path, self.schema_version)?;
        self.event().map_err(|e| invalid(e.to_string()))?;
        if !(self.env_weight.is_finite() && self.env_weight >= 0.0) {
            return Err(invalid(format!(
                "env_weight must be non-negative, got {}",
                self.env_weight
            )));
        }
        self.saw.validate().map_err(|e| invalid(e.to_string()))?;
        self.adaptation(0)
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        if self.excluded_responses.contains(&NO_ACTION_INDEX) {
            return Err(invalid("\"No Action\" cannot be excluded".into()));
        }
        if let Some(arch) = architecture {
            let mut events = vec![self.event()?];
            for verdict in &self.feedback_script {
                if let FeedbackVerdict::NewIntrusion { event } = verdict {
                    events.push(IntrusionEvent::clone(event));
                }
            }
            for event in &events {
                for id in [&event.infected_asset, &event.affected_asset] {
                    if !arch.contains(id) {
                        return Err(invalid(format!("unknown asset `{id}`")));
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_version(path: &Path, version: u32) -> Result<()> {
    if version == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(HarnessError::invalid(
            path,
            format!("unsupported schema_version {version}, expected {SCHEMA_VERSION}"),
        ))
    }
}

/// Reads and deserializes a JSON document.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Read {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Parse {
        path: path.to_owned(),
        source,
    })
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("document types serialize");
    text.push('\n');
    text
}

pub fn load_architecture(path: &Path) -> Result<ArchitectureFile> {
    let file: ArchitectureFile = read_json(path)?;
    file.validate(path)?;
    Ok(file)
}

pub fn load_catalog(path: &Path) -> Result<(CatalogFile, Catalog)> {
    let file: CatalogFile = read_json(path)?;
    let catalog = file.validate(path)?;
    Ok((file, catalog))
}

/// A scenario with its referenced documents loaded and validated.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub path: PathBuf,
    pub file: ScenarioFile,
    pub architecture: Option<ArchitectureFile>,
    pub catalog_file: CatalogFile,
    /// The referenced catalog without the excluded responses.
    pub catalog: Catalog,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let file: ScenarioFile = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let architecture = file
            .architecture_ref
            .as_ref()
            .map(|r| load_architecture(&base.join(r)))
            .transpose()?;
        file.validate(path, architecture.as_ref())?;
        let (catalog_file, full) = load_catalog(&base.join(&file.catalog_ref))?;
        let catalog = full
            .without(&file.excluded_responses)
            .map_err(|e| HarnessError::invalid(path, e.to_string()))?;
        Ok(Self {
            path: path.to_owned(),
            file,
            architecture,
            catalog_file,
            catalog,
        })
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }
}

/// Kinds of document `validate` recognizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentKind {
    Architecture,
    Catalog,
    Scenario,
}

impl DocumentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DocumentKind::Architecture => "architecture",
            DocumentKind::Catalog => "catalog",
            DocumentKind::Scenario => "scenario",
        }
    }
}

/// Detects the document kind from its top-level keys and validates it,
/// following references for scenarios.
pub fn validate_document(path: &Path) -> Result<DocumentKind> {
    let value: serde_json::Value = read_json(path)?;
    let has = |key: &str| value.get(key).is_some();
    if has("catalog_ref") {
        Scenario::load(path)?;
        Ok(DocumentKind::Scenario)
    } else if has("responses") {
        load_catalog(path)?;
        Ok(DocumentKind::Catalog)
    } else if has("assets") {
        load_architecture(path)?;
        Ok(DocumentKind::Architecture)
    } else {
        Err(HarnessError::invalid(
            path,
            "not an architecture, catalog or scenario document",
        ))
    }
}
