//! Domain types shared by the risk, response, selection and engine modules.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precondition::{Facts, PreconditionExpr};

/// Identifier of an asset in the vehicle architecture.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssetId(pub String);

impl AssetId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AssetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AssetId {
    fn from(id: &str) -> Self {
        Self(id.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetKind {
    Sensor,
    Ecu,
    Gateway,
    Bus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Asset {
    pub id: AssetId,
    pub name: String,
    pub kind: AssetKind,
}

/// Outcome class of an intrusion as reported by the IDS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntrusionResult {
    FalsifyAlterInformation,
    FalsifyAlterTiming,
    InformationDisclosure,
    SystemUnavailability,
    FalsifyAlterBehavior,
}

impl IntrusionResult {
    pub const ALL: [IntrusionResult; 5] = [
        IntrusionResult::FalsifyAlterInformation,
        IntrusionResult::FalsifyAlterTiming,
        IntrusionResult::InformationDisclosure,
        IntrusionResult::SystemUnavailability,
        IntrusionResult::FalsifyAlterBehavior,
    ];
}

/// A HEAVENS rating. Only 0, 1, 10 and 100 are representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct HeavensLevel(u32);

impl HeavensLevel {
    pub const ZERO: HeavensLevel = HeavensLevel(0);
    pub const ONE: HeavensLevel = HeavensLevel(1);
    pub const TEN: HeavensLevel = HeavensLevel(10);
    pub const HUNDRED: HeavensLevel = HeavensLevel(100);
    pub const ALL: [HeavensLevel; 4] = [Self::ZERO, Self::ONE, Self::TEN, Self::HUNDRED];

    pub fn new(value: u32) -> Result<Self> {
        match value {
            0 | 1 | 10 | 100 => Ok(Self(value)),
            other => Err(Error::InvalidLevel(other)),
        }
    }

    pub fn value(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0)
    }

    /// One step down the scale: 100 → 10 → 1 → 0, with 0 fixed.
    pub fn downgrade(self) -> Self {
        Self(self.0 / 10)
    }
}

impl TryFrom<u32> for HeavensLevel {
    type Error = Error;

    fn try_from(value: u32) -> Result<Self> {
        Self::new(value)
    }
}

impl From<HeavensLevel> for u32 {
    fn from(level: HeavensLevel) -> u32 {
        level.0
    }
}

impl fmt::Display for HeavensLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The four HEAVENS impact categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeavensMetric {
    Safety,
    Financial,
    Operational,
    Privacy,
}

impl HeavensMetric {
    pub const ALL: [HeavensMetric; 4] = [
        HeavensMetric::Safety,
        HeavensMetric::Financial,
        HeavensMetric::Operational,
        HeavensMetric::Privacy,
    ];

    fn slot(self) -> usize {
        self as usize
    }

    fn weight_name(self) -> &'static str {
        match self {
            HeavensMetric::Safety => "w_s",
            HeavensMetric::Financial => "w_f",
            HeavensMetric::Operational => "w_o",
            HeavensMetric::Privacy => "w_p",
        }
    }
}

pub(crate) fn check_weight(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidWeight { name, value })
    }
}

fn unit_weight() -> f64 {
    1.0
}

/// Safety, financial, operational and privacy levels with their weights.
///
/// Used both for intrusion impact parameters and for response benefit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HeavensVectorRepr", into = "HeavensVectorRepr")]
pub struct HeavensVector {
    levels: [HeavensLevel; 4],
    weights: [f64; 4],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeavensVectorRepr {
    s: HeavensLevel,
    f: HeavensLevel,
    o: HeavensLevel,
    p: HeavensLevel,
    #[serde(default = "unit_weight")]
    w_s: f64,
    #[serde(default = "unit_weight")]
    w_f: f64,
    #[serde(default = "unit_weight")]
    w_o: f64,
    #[serde(default = "unit_weight")]
    w_p: f64,
}

impl TryFrom<HeavensVectorRepr> for HeavensVector {
    type Error = Error;

    fn try_from(r: HeavensVectorRepr) -> Result<Self> {
        Self::new([r.s, r.f, r.o, r.p], [r.w_s, r.w_f, r.w_o, r.w_p])
    }
}

impl From<HeavensVector> for HeavensVectorRepr {
    fn from(v: HeavensVector) -> Self {
        let [s, f, o, p] = v.levels;
        let [w_s, w_f, w_o, w_p] = v.weights;
        Self {
            s,
            f,
            o,
            p,
            w_s,
            w_f,
            w_o,
            w_p,
        }
    }
}

impl HeavensVector {
    /// Levels and weights in S, F, O, P order.
    pub fn new(levels: [HeavensLevel; 4], weights: [f64; 4]) -> Result<Self> {
        for metric in HeavensMetric::ALL {
            check_weight(metric.weight_name(), weights[metric.slot()])?;
        }
        Ok(Self { levels, weights })
    }

    pub fn with_unit_weights(levels: [HeavensLevel; 4]) -> Self {
        Self {
            levels,
            weights: [1.0; 4],
        }
    }

    /// Builds a unit-weight vector from raw integers, rejecting invalid levels.
    pub fn from_values(s: u32, f: u32, o: u32, p: u32) -> Result<Self> {
        Ok(Self::with_unit_weights([
            HeavensLevel::new(s)?,
            HeavensLevel::new(f)?,
            HeavensLevel::new(o)?,
            HeavensLevel::new(p)?,
        ]))
    }

    pub fn zero() -> Self {
        Self::with_unit_weights([HeavensLevel::ZERO; 4])
    }

    pub fn level(&self, metric: HeavensMetric) -> HeavensLevel {
        self.levels[metric.slot()]
    }

    pub fn weight(&self, metric: HeavensMetric) -> f64 {
        self.weights[metric.slot()]
    }

    pub fn levels(&self) -> [HeavensLevel; 4] {
        self.levels
    }

    pub fn weights(&self) -> [f64; 4] {
        self.weights
    }

    pub fn with_levels(self, levels: [HeavensLevel; 4]) -> Self {
        Self { levels, ..self }
    }

    pub fn with_weights(self, weights: [f64; 4]) -> Result<Self> {
        Self::new(self.levels, weights)
    }

    /// Weighted terms `w_m · v_m` in S, F, O, P order.
    pub fn weighted_terms(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.weights[i] * self.levels[i].as_f64())
    }
}

/// The dynamic environment contribution to the impact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentTerm {
    pub e: HeavensLevel,
    pub w_e: f64,
}

/// Run-time state of the vehicle.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub velocity_kmh: f64,
    #[serde(default)]
    pub facts: Facts,
}

impl VehicleState {
    pub fn new(velocity_kmh: f64, facts: Facts) -> Result<Self> {
        if !(velocity_kmh.is_finite() && velocity_kmh >= 0.0) {
            return Err(Error::NegativeVelocity(velocity_kmh));
        }
        Ok(Self {
            velocity_kmh,
            facts,
        })
    }
}

/// A single intrusion report together with the vehicle state it occurred in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrusionEvent {
    pub infected_asset: AssetId,
    pub affected_asset: AssetId,
    pub result: IntrusionResult,
    pub impact_params: HeavensVector,
    /// Weight of the environment term.
    #[serde(default = "unit_weight")]
    pub env_weight: f64,
    /// Replaces the velocity-derived environment level when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env_override: Option<HeavensLevel>,
    pub vehicle: VehicleState,
}

impl IntrusionEvent {
    /// The environment term: the override if present, else the velocity band.
    pub fn environment(&self) -> Result<EnvironmentTerm> {
        check_weight("w_e", self.env_weight)?;
        let e = match self.env_override {
            Some(level) => level,
            None => crate::risk::environment_from_velocity(self.vehicle.velocity_kmh)?,
        };
        Ok(EnvironmentTerm {
            e,
            w_e: self.env_weight,
        })
    }

    /// Assets touched by the intrusion, infected first, without repeats.
    pub fn assets(&self) -> Vec<&AssetId> {
        if self.infected_asset == self.affected_asset {
            vec![&self.affected_asset]
        } else {
            vec![&self.infected_asset, &self.affected_asset]
        }
    }
}

/// Availability and performance penalty of applying a response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CostVectorRepr", into = "CostVectorRepr")]
pub struct CostVector {
    a: HeavensLevel,
    perf: HeavensLevel,
    w_a: f64,
    w_perf: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostVectorRepr {
    a: HeavensLevel,
    perf: HeavensLevel,
    #[serde(default = "unit_weight")]
    w_a: f64,
    #[serde(default = "unit_weight")]
    w_perf: f64,
}

impl TryFrom<CostVectorRepr> for CostVector {
    type Error = Error;

    fn try_from(r: CostVectorRepr) -> Result<Self> {
        Self::new(r.a, r.perf, r.w_a, r.w_perf)
    }
}

impl From<CostVector> for CostVectorRepr {
    fn from(c: CostVector) -> Self {
        Self {
            a: c.a,
            perf: c.perf,
            w_a: c.w_a,
            w_perf: c.w_perf,
        }
    }
}

impl CostVector {
    pub fn new(a: HeavensLevel, perf: HeavensLevel, w_a: f64, w_perf: f64) -> Result<Self> {
        Ok(Self {
            a,
            perf,
            w_a: check_weight("w_a", w_a)?,
            w_perf: check_weight("w_perf", w_perf)?,
        })
    }

    pub fn with_unit_weights(a: HeavensLevel, perf: HeavensLevel) -> Self {
        Self {
            a,
            perf,
            w_a: 1.0,
            w_perf: 1.0,
        }
    }

    pub fn from_values(a: u32, perf: u32) -> Result<Self> {
        Ok(Self::with_unit_weights(
            HeavensLevel::new(a)?,
            HeavensLevel::new(perf)?,
        ))
    }

    pub fn a(&self) -> HeavensLevel {
        self.a
    }

    pub fn perf(&self) -> HeavensLevel {
        self.perf
    }

    pub fn w_a(&self) -> f64 {
        self.w_a
    }

    pub fn w_perf(&self) -> f64 {
        self.w_perf
    }
}

/// Where a response is applied relative to the intrusion path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Place {
    /// The infected asset.
    Source,
    /// The affected asset.
    Destination,
    /// One instance per distinct asset on the path.
    Both,
}

/// When an applied response is lifted. Recorded, not enforced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StopCondition {
    AfterDuration { seconds: f64 },
    PolicyReestablished,
    Persistent,
}

/// One catalog entry.
///
/// `original_benefit` is captured when the entry is built or loaded and is
/// never modified afterwards. It is not serialized; a reloaded entry takes
/// its stored benefit as the new original.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ResponseSpecRepr")]
pub struct ResponseSpec {
    pub index: u32,
    pub action: String,
    #[serde(default)]
    pub applicable_results: BTreeSet<IntrusionResult>,
    #[serde(default)]
    pub is_general: bool,
    pub precondition: PreconditionExpr,
    pub place: Place,
    pub stop: StopCondition,
    pub cost: CostVector,
    pub benefit: HeavensVector,
    #[serde(skip_serializing)]
    original_benefit: HeavensVector,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ResponseSpecRepr {
    index: u32,
    action: String,
    #[serde(default)]
    applicable_results: BTreeSet<IntrusionResult>,
    #[serde(default)]
    is_general: bool,
    precondition: PreconditionExpr,
    place: Place,
    stop: StopCondition,
    cost: CostVector,
    benefit: HeavensVector,
}

impl From<ResponseSpecRepr> for ResponseSpec {
    fn from(r: ResponseSpecRepr) -> Self {
        Self {
            index: r.index,
            action: r.action,
            applicable_results: r.applicable_results,
            is_general: r.is_general,
            precondition: r.precondition,
            place: r.place,
            stop: r.stop,
            cost: r.cost,
            benefit: r.benefit,
            original_benefit: r.benefit,
        }
    }
}

impl ResponseSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        index: u32,
        action: impl Into<String>,
        applicable_results: impl IntoIterator<Item = IntrusionResult>,
        is_general: bool,
        precondition: PreconditionExpr,
        place: Place,
        stop: StopCondition,
        cost: CostVector,
        benefit: HeavensVector,
    ) -> Self {
        Self {
            index,
            action: action.into(),
            applicable_results: applicable_results.into_iter().collect(),
            is_general,
            precondition,
            place,
            stop,
            cost,
            benefit,
            original_benefit: benefit,
        }
    }

    pub fn original_benefit(&self) -> &HeavensVector {
        &self.original_benefit
    }

    pub fn applies_to(&self, result: IntrusionResult) -> bool {
        self.is_general || self.applicable_results.contains(&result)
    }
}

/// Which end of the intrusion path a candidate instance targets.
///
/// Ordered so that the infected asset sorts first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetRole {
    Infected,
    Affected,
}

/// Identity of a candidate instance within a set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InstanceKey {
    pub index: u32,
    pub target_asset: AssetId,
}

/// A response bound to the asset it would be applied to, with its
/// evaluated cost and benefit.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateInstance {
    pub response: Arc<ResponseSpec>,
    pub target_asset: AssetId,
    pub role: TargetRole,
    /// Set for the "No Action" entry.
    pub terminal: bool,
    /// Benefit parameters in effect for this instance.
    pub benefit_params: HeavensVector,
    pub cost: f64,
    pub benefit: f64,
}

impl CandidateInstance {
    pub fn index(&self) -> u32 {
        self.response.index
    }

    pub fn key(&self) -> InstanceKey {
        InstanceKey {
            index: self.response.index,
            target_asset: self.target_asset.clone(),
        }
    }

    /// Tie-break rank: lower sorts first.
    pub fn rank(&self) -> (u32, TargetRole) {
        (self.response.index, self.role)
    }

    /// Replaces the benefit parameters and recomputes the benefit value.
    pub fn set_benefit_params(&mut self, params: HeavensVector) {
        self.benefit_params = params;
        self.benefit = crate::response::response_benefit(&params);
    }

    pub fn summary(&self) -> CandidateSummary {
        CandidateSummary {
            index: self.response.index,
            target_asset: self.target_asset.clone(),
            cost: self.cost,
            benefit: self.benefit,
        }
    }
}

/// Serializable snapshot of a candidate instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub index: u32,
    pub target_asset: AssetId,
    pub cost: f64,
    pub benefit: f64,
}

/// Ordered candidate instances; each `(index, target_asset)` occurs once.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CandidateSet {
    items: Vec<CandidateInstance>,
}

impl CandidateSet {
    /// Builds a set, rejecting duplicate instance keys.
    pub fn new(items: Vec<CandidateInstance>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(items.len());
        for item in &items {
            if !seen.insert((item.index(), &item.target_asset)) {
                return Err(Error::DuplicateCandidate {
                    index: item.index(),
                    target: item.target_asset.to_string(),
                });
            }
        }
        Ok(Self { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, CandidateInstance> {
        self.items.iter()
    }

    pub fn as_slice(&self) -> &[CandidateInstance] {
        &self.items
    }

    pub fn get(&self, position: usize) -> Option<&CandidateInstance> {
        self.items.get(position)
    }

    pub fn get_mut(&mut self, position: usize) -> Option<&mut CandidateInstance> {
        self.items.get_mut(position)
    }

    pub fn iter_mut(&mut self) -> std::slice::IterMut<'_, CandidateInstance> {
        self.items.iter_mut()
    }

    /// Removes and returns the instance at `position`, keeping the order of the rest.
    pub fn remove(&mut self, position: usize) -> CandidateInstance {
        self.items.remove(position)
    }

    pub fn position(&self, key: &InstanceKey) -> Option<usize> {
        self.items.iter().position(|c| c.key() == *key)
    }

    pub fn has_terminal(&self) -> bool {
        self.items.iter().any(|c| c.terminal)
    }

    pub fn summaries(&self) -> Vec<CandidateSummary> {
        self.items.iter().map(CandidateInstance::summary).collect()
    }
}

impl<'a> IntoIterator for &'a CandidateSet {
    type Item = &'a CandidateInstance;
    type IntoIter = std::slice::Iter<'a, CandidateInstance>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}
