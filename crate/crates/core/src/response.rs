//! Response cost and benefit, the validated catalog, and candidate generation.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{
    CandidateInstance, CandidateSet, CostVector, HeavensVector, IntrusionEvent, Place,
    ResponseSpec, TargetRole,
};
use crate::precondition::PreconditionExpr;
use crate::risk::ImpactScore;

/// Catalog index of the "No Action" response.
pub const NO_ACTION_INDEX: u32 = 31;

/// `w_A·A + w_Perf·Perf`.
pub fn response_cost(cost: &CostVector) -> f64 {
    cost.w_a() * cost.a().as_f64() + cost.w_perf() * cost.perf().as_f64()
}

/// `w_S·S + w_F·F + w_O·O + w_P·P`.
pub fn response_benefit(benefit: &HeavensVector) -> f64 {
    benefit.weighted_terms().iter().sum()
}

/// A response catalog with unique indices and a usable "No Action" entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    responses: Vec<Arc<ResponseSpec>>,
}

impl Catalog {
    pub fn new(responses: Vec<ResponseSpec>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for spec in &responses {
            if !seen.insert(spec.index) {
                return Err(Error::DuplicateResponseIndex(spec.index));
            }
        }
        let no_action = responses
            .iter()
            .find(|r| r.index == NO_ACTION_INDEX)
            .ok_or(Error::MissingNoAction {
                index: NO_ACTION_INDEX,
            })?;
        if no_action.precondition != PreconditionExpr::TRUE {
            return Err(Error::NoActionPrecondition(
                no_action.precondition.to_string(),
            ));
        }
        Ok(Self {
            responses: responses.into_iter().map(Arc::new).collect(),
        })
    }

    pub fn responses(&self) -> &[Arc<ResponseSpec>] {
        &self.responses
    }

    pub fn get(&self, index: u32) -> Option<&Arc<ResponseSpec>> {
        self.responses.iter().find(|r| r.index == index)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    /// A copy without the given indices. "No Action" cannot be removed.
    pub fn without(&self, excluded: &BTreeSet<u32>) -> Result<Self> {
        Self::new(
            self.responses
                .iter()
                .filter(|r| !excluded.contains(&r.index))
                .map(|r| ResponseSpec::clone(r))
                .collect(),
        )
    }
}

/// Builds the candidate set for an event.
///
/// Every applicable or general response is instantiated on its target asset;
/// `Place::Both` yields one instance per distinct asset on the intrusion path.
/// The "No Action" cost is pegged to `impact`. Order: specific responses
/// before general ones, then by index, then infected before affected.
pub fn generate_candidates(
    event: &IntrusionEvent,
    catalog: &Catalog,
    impact: ImpactScore,
) -> Result<CandidateSet> {
    let mut items = Vec::with_capacity(catalog.len() + 4);
    for spec in catalog.responses() {
        if !spec.applies_to(event.result) {
            continue;
        }
        let terminal = spec.index == NO_ACTION_INDEX;
        let cost = if terminal {
            impact.value()
        } else {
            response_cost(&spec.cost)
        };
        let mut push = |target: &crate::model::AssetId, role: TargetRole| {
            items.push(CandidateInstance {
                response: Arc::clone(spec),
                target_asset: target.clone(),
                role,
                terminal,
                benefit_params: spec.benefit,
                cost,
                benefit: response_benefit(&spec.benefit),
            });
        };
        let distinct = event.infected_asset != event.affected_asset;
        match spec.place {
            Place::Source if distinct => push(&event.infected_asset, TargetRole::Infected),
            Place::Both if distinct => {
                push(&event.infected_asset, TargetRole::Infected);
                push(&event.affected_asset, TargetRole::Affected);
            }
            _ => push(&event.affected_asset, TargetRole::Affected),
        }
    }
    items.sort_by_key(|c| (c.response.is_general, c.response.index, c.role));
    CandidateSet::new(items)
}
