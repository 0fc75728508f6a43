//! The inner response loop (select, then check the precondition) and the
//! outer loop (execute, collect feedback, adapt parameters).

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    AssetId, CandidateInstance, CandidateSet, CandidateSummary, HeavensLevel, HeavensVector,
    InstanceKey, IntrusionEvent, IntrusionResult, ResponseSpec, StopCondition,
};
use crate::precondition::Facts;
use crate::response::{generate_candidates, Catalog};
use crate::risk::{event_impact, ImpactScore};
use crate::selectors::{impact_alphas, impact_terms, Algorithm, SelectionContext, Selector};

/// Default bound on outer-loop iterations.
pub const DEFAULT_MAX_ITERATIONS: usize = 10;

/// IDS assessment of an executed response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum FeedbackVerdict {
    Success,
    Failure,
    NewIntrusion { event: Box<IntrusionEvent> },
}

impl FeedbackVerdict {
    pub fn kind(&self) -> VerdictKind {
        match self {
            FeedbackVerdict::Success => VerdictKind::Success,
            FeedbackVerdict::Failure => VerdictKind::Failure,
            FeedbackVerdict::NewIntrusion { .. } => VerdictKind::NewIntrusion,
        }
    }
}

/// Verdict without its payload, as recorded in traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Success,
    Failure,
    NewIntrusion,
}

/// Supplies the IDS verdict after each executed response.
pub trait FeedbackSource {
    fn verdict(&mut self, iteration: usize, applied: &CandidateInstance) -> FeedbackVerdict;
}

/// Reports every response as successful.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysSuccess;

impl FeedbackSource for AlwaysSuccess {
    fn verdict(&mut self, _: usize, _: &CandidateInstance) -> FeedbackVerdict {
        FeedbackVerdict::Success
    }
}

/// Reports every response as unsuccessful.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysFailure;

impl FeedbackSource for AlwaysFailure {
    fn verdict(&mut self, _: usize, _: &CandidateInstance) -> FeedbackVerdict {
        FeedbackVerdict::Failure
    }
}

/// Replays a fixed list of verdicts, then reports success.
#[derive(Debug, Clone, Default)]
pub struct ScriptedFeedback {
    script: Vec<FeedbackVerdict>,
    next: usize,
}

impl ScriptedFeedback {
    pub fn new(script: Vec<FeedbackVerdict>) -> Self {
        Self { script, next: 0 }
    }
}

impl FeedbackSource for ScriptedFeedback {
    fn verdict(&mut self, _: usize, _: &CandidateInstance) -> FeedbackVerdict {
        let verdict = self
            .script
            .get(self.next)
            .cloned()
            .unwrap_or(FeedbackVerdict::Success);
        self.next += 1;
        verdict
    }
}

/// Range of the random weight prefactor applied after a success.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptationConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub rng_seed: u64,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self {
            r_min: 0.8,
            r_max: 1.2,
            rng_seed: 0,
        }
    }
}

impl AdaptationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_min.is_finite() && self.r_max.is_finite()) {
            return Err(Error::InvalidAdaptationConfig(
                "r_min and r_max must be finite".into(),
            ));
        }
        if !(0.0 < self.r_min && self.r_min <= self.r_max) {
            return Err(Error::InvalidAdaptationConfig(format!(
                "expected 0 < r_min <= r_max, got r_min = {}, r_max = {}",
                self.r_min, self.r_max
            )));
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.rng_seed)
    }
}

/// Lowers every benefit level one step; weights are kept.
pub fn downgrade_benefit(benefit: &HeavensVector) -> HeavensVector {
    benefit.with_levels(benefit.levels().map(HeavensLevel::downgrade))
}

/// Restores `original` levels and multiplies each of the current weights by
/// an independent draw from `[r_min, r_max]`.
pub fn rescale_benefit(
    original: &HeavensVector,
    current: &HeavensVector,
    cfg: &AdaptationConfig,
    rng: &mut impl Rng,
) -> Result<HeavensVector> {
    cfg.validate()?;
    let weights = current
        .weights()
        .map(|w| w * rng.gen_range(cfg.r_min..=cfg.r_max));
    current.with_levels(original.levels()).with_weights(weights)
}

/// Failure adaptation of a catalog entry.
pub fn adapt_on_failure(spec: &ResponseSpec) -> ResponseSpec {
    let mut adapted = spec.clone();
    adapted.benefit = downgrade_benefit(&spec.benefit);
    adapted
}

/// Success adaptation of a catalog entry.
pub fn adapt_on_success(
    spec: &ResponseSpec,
    cfg: &AdaptationConfig,
    rng: &mut impl Rng,
) -> Result<ResponseSpec> {
    let mut adapted = spec.clone();
    adapted.benefit = rescale_benefit(spec.original_benefit(), &spec.benefit, cfg, rng)?;
    Ok(adapted)
}

/// How the inner loop decides whether a selected response is applicable.
#[derive(Debug, Clone, Copy)]
pub enum PreconditionCheck<'a> {
    /// Evaluate preconditions against these facts.
    Facts(&'a Facts),
    /// Reject every response except "No Action".
    RejectAll,
}

impl PreconditionCheck<'_> {
    fn passes(&self, candidate: &CandidateInstance) -> bool {
        if candidate.terminal {
            return true;
        }
        match self {
            PreconditionCheck::Facts(facts) => candidate.response.precondition.evaluate(facts),
            PreconditionCheck::RejectAll => false,
        }
    }
}

/// One select-and-check step of the inner loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub index: u32,
    pub target_asset: AssetId,
    pub cost: f64,
    pub benefit: f64,
    pub score: f64,
    pub feasible_count: usize,
    pub fallback: bool,
    pub precondition_passed: bool,
    pub selection_time_ms: f64,
}

/// Result of running the inner loop to completion.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerLoopOutcome {
    pub chosen: CandidateInstance,
    pub steps: Vec<SelectionStep>,
}

fn elapsed_ms(start: Option<Instant>) -> f64 {
    start.map_or(0.0, |t| t.elapsed().as_secs_f64() * 1e3)
}

/// Selects, checks the precondition, and on rejection removes the instance
/// and selects again. Returns the first instance that passes.
///
/// Selection times are recorded only when `measure_time` is set; otherwise
/// they are zero so that traces are reproducible byte for byte.
pub fn inner_loop(
    mut candidates: CandidateSet,
    selector: &Selector,
    ctx: &SelectionContext,
    check: PreconditionCheck<'_>,
    measure_time: bool,
) -> Result<InnerLoopOutcome> {
    let mut steps = Vec::new();
    loop {
        if candidates.is_empty() {
            return Err(Error::EmptyCandidateSet);
        }
        let start = measure_time.then(Instant::now);
        let outcome = selector.select(&candidates, ctx)?;
        let selection_time_ms = elapsed_ms(start);
        let passed = check.passes(&outcome.chosen);
        steps.push(SelectionStep {
            index: outcome.chosen.index(),
            target_asset: outcome.chosen.target_asset.clone(),
            cost: outcome.chosen.cost,
            benefit: outcome.chosen.benefit,
            score: outcome.score,
            feasible_count: outcome.feasible_count,
            fallback: outcome.fallback,
            precondition_passed: passed,
            selection_time_ms,
        });
        if passed {
            return Ok(InnerLoopOutcome {
                chosen: outcome.chosen,
                steps,
            });
        }
        candidates.remove(outcome.position);
    }
}

/// The response executed in an iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedResponse {
    pub index: u32,
    pub action: String,
    pub target_asset: AssetId,
    pub cost: f64,
    pub benefit: f64,
    pub stop: StopCondition,
}

/// Everything that happened in one outer-loop iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub result: IntrusionResult,
    pub infected_asset: AssetId,
    pub affected_asset: AssetId,
    pub velocity_kmh: f64,
    pub impact: f64,
    /// Normalized impact per metric, S, F, O, P, E order.
    pub alphas: [f64; 5],
    pub candidates: Vec<CandidateSummary>,
    pub list_generation_time_ms: f64,
    pub selections: Vec<SelectionStep>,
    pub applied: AppliedResponse,
    pub verdict: VerdictKind,
    /// Benefit parameters of the applied instance after adaptation.
    pub adapted_benefit: HeavensVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Success,
    MaxIterations,
}

/// Record of one outer-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineTrace {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub iterations: Vec<IterationRecord>,
    pub stop_reason: StopReason,
}

/// Engine settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub selector: Selector,
    pub adaptation: AdaptationConfig,
    pub max_iterations: usize,
    pub measure_time: bool,
}

/// Fact assignments made when a response with the given index is executed.
pub type Effects = BTreeMap<u32, Facts>;

/// Runs response loops against one catalog.
///
/// Adapted benefit parameters are kept per `(index, target_asset)` for the
/// lifetime of the engine; the catalog itself is never modified.
#[derive(Debug, Clone)]
pub struct Engine {
    catalog: Catalog,
    config: EngineConfig,
    effects: Effects,
    rng: ChaCha8Rng,
    adapted: BTreeMap<InstanceKey, HeavensVector>,
}

impl Engine {
    pub fn new(catalog: Catalog, config: EngineConfig) -> Result<Self> {
        config.adaptation.validate()?;
        if config.max_iterations == 0 {
            return Err(Error::ZeroIterations);
        }
        if let Selector::Saw(saw) = &config.selector {
            saw.validate()?;
        }
        Ok(Self {
            rng: config.adaptation.rng(),
            catalog,
            config,
            effects: Effects::new(),
            adapted: BTreeMap::new(),
        })
    }

    pub fn with_effects(mut self, effects: Effects) -> Self {
        self.effects = effects;
        self
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Benefit parameters currently in effect for an instance, if adapted.
    pub fn adapted_benefit(&self, key: &InstanceKey) -> Option<&HeavensVector> {
        self.adapted.get(key)
    }

    /// Candidate set for `event` with adapted parameters applied.
    pub fn candidates(&self, event: &IntrusionEvent, impact: ImpactScore) -> Result<CandidateSet> {
        let mut set = generate_candidates(event, &self.catalog, impact)?;
        for candidate in set.iter_mut() {
            if let Some(params) = self.adapted.get(&candidate.key()) {
                candidate.set_benefit_params(*params);
            }
        }
        Ok(set)
    }

    /// Runs the outer loop from `initial_event` until success or the
    /// iteration bound.
    pub fn outer_loop(
        &mut self,
        initial_event: &IntrusionEvent,
        feedback: &mut dyn FeedbackSource,
    ) -> Result<EngineTrace> {
        let mut event = initial_event.clone();
        // Events not yet resolved by a success; their impact terms share the
        // normalization of the current event.
        let mut active_terms = vec![impact_terms(&event.impact_params, &event.environment()?)];
        let mut current_slot = 0;
        let mut iterations = Vec::new();
        let mut stop_reason = StopReason::MaxIterations;

        for iteration in 1..=self.config.max_iterations {
            let env = event.environment()?;
            let impact = event_impact(&event)?;
            let terms = impact_terms(&event.impact_params, &env);
            active_terms[current_slot] = terms;
            let ctx = SelectionContext {
                impact,
                alphas: impact_alphas(&terms, &active_terms),
            };

            let start = self.config.measure_time.then(Instant::now);
            let candidates = self.candidates(&event, impact)?;
            let list_generation_time_ms = elapsed_ms(start);
            let snapshot = candidates.summaries();

            let facts = event.vehicle.facts.clone();
            let inner = inner_loop(
                candidates,
                &self.config.selector,
                &ctx,
                PreconditionCheck::Facts(&facts),
                self.config.measure_time,
            )?;
            let chosen = inner.chosen;

            if let Some(changes) = self.effects.get(&chosen.index()) {
                for (fact, value) in changes {
                    event.vehicle.facts.insert(fact.clone(), *value);
                }
            }

            let verdict = feedback.verdict(iteration, &chosen);
            let adapted_benefit = match &verdict {
                FeedbackVerdict::Failure => downgrade_benefit(&chosen.benefit_params),
                FeedbackVerdict::Success => rescale_benefit(
                    chosen.response.original_benefit(),
                    &chosen.benefit_params,
                    &self.config.adaptation,
                    &mut self.rng,
                )?,
                FeedbackVerdict::NewIntrusion { .. } => chosen.benefit_params,
            };
            self.adapted.insert(chosen.key(), adapted_benefit);

            iterations.push(IterationRecord {
                iteration,
                result: event.result,
                infected_asset: event.infected_asset.clone(),
                affected_asset: event.affected_asset.clone(),
                velocity_kmh: event.vehicle.velocity_kmh,
                impact: impact.value(),
                alphas: ctx.alphas,
                candidates: snapshot,
                list_generation_time_ms,
                selections: inner.steps,
                applied: AppliedResponse {
                    index: chosen.index(),
                    action: chosen.response.action.clone(),
                    target_asset: chosen.target_asset.clone(),
                    cost: chosen.cost,
                    benefit: chosen.benefit,
                    stop: chosen.response.stop,
                },
                verdict: verdict.kind(),
                adapted_benefit,
            });

            match verdict {
                FeedbackVerdict::Success => {
                    stop_reason = StopReason::Success;
                    break;
                }
                FeedbackVerdict::Failure => {}
                FeedbackVerdict::NewIntrusion { event: next } => {
                    event = *next;
                    let env = event.environment()?;
                    active_terms.push(impact_terms(&event.impact_params, &env));
                    current_slot = active_terms.len() - 1;
                }
            }
        }

        Ok(EngineTrace {
            algorithm: self.config.selector.algorithm(),
            seed: self.config.adaptation.rng_seed,
            iterations,
            stop_reason,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CostVector, Place, VehicleState};
    use crate::response::NO_ACTION_INDEX;
    use crate::selectors::SawConfig;
    use proptest::prelude::*;

    fn level(v: u32) -> HeavensLevel {
        HeavensLevel::new(v).unwrap()
    }

    fn spec(index: u32, precondition: &str, cost: (u32, u32), benefit: [u32; 4]) -> ResponseSpec {
        ResponseSpec::new(
            index,
            format!("response {index}"),
            [],
            true,
            precondition.parse().unwrap(),
            Place::Destination,
            StopCondition::Persistent,
            CostVector::from_values(cost.0, cost.1).unwrap(),
            HeavensVector::from_values(benefit[0], benefit[1], benefit[2], benefit[3]).unwrap(),
        )
    }

    fn no_action() -> ResponseSpec {
        spec(NO_ACTION_INDEX, "true", (100, 100), [0, 0, 0, 0])
    }

    fn event(facts: &[(&str, bool)]) -> IntrusionEvent {
        IntrusionEvent {
            infected_asset: AssetId::new("cam"),
            affected_asset: AssetId::new("acc"),
            result: IntrusionResult::FalsifyAlterBehavior,
            impact_params: HeavensVector::from_values(100, 0, 100, 0).unwrap(),
            env_weight: 1.0,
            env_override: None,
            vehicle: VehicleState::new(
                70.0,
                facts.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            )
            .unwrap(),
        }
    }

    fn config(selector: Selector, max_iterations: usize) -> EngineConfig {
        EngineConfig {
            selector,
            adaptation: AdaptationConfig {
                rng_seed: 7,
                ..AdaptationConfig::default()
            },
            max_iterations,
            measure_time: false,
        }
    }

    fn ctx(impact: f64) -> SelectionContext {
        SelectionContext {
            impact: ImpactScore::new(impact).unwrap(),
            alphas: [1.0, 0.0, 1.0, 0.0, 1.0],
        }
    }

    #[test]
    fn failure_mapping_table() {
        let v = HeavensVector::from_values(100, 10, 1, 0).unwrap();
        assert_eq!(
            downgrade_benefit(&v).levels(),
            [level(10), level(1), level(0), level(0)]
        );
        let zero = HeavensVector::zero();
        assert_eq!(downgrade_benefit(&zero), zero);
        let top = HeavensVector::from_values(100, 100, 100, 100).unwrap();
        assert_eq!(
            downgrade_benefit(&downgrade_benefit(&top)).levels(),
            [level(1); 4]
        );
    }

    #[test]
    fn failure_keeps_weights() {
        let s = spec(5, "true", (10, 10), [100, 10, 1, 0]);
        let mut weighted = s.clone();
        weighted.benefit = s.benefit.with_weights([0.5, 2.0, 1.0, 3.0]).unwrap();
        let adapted = adapt_on_failure(&weighted);
        assert_eq!(adapted.benefit.weights(), [0.5, 2.0, 1.0, 3.0]);
        assert_eq!(adapted.original_benefit(), s.original_benefit());
    }

    #[test]
    fn success_restores_levels() {
        let s = spec(17, "true", (10, 10), [100, 10, 100, 10]);
        let downgraded = adapt_on_failure(&adapt_on_failure(&s));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let restored =
            adapt_on_success(&downgraded, &AdaptationConfig::default(), &mut rng).unwrap();
        assert_eq!(restored.benefit.levels(), s.original_benefit().levels());
    }

    #[test]
    fn degenerate_prefactor_keeps_weights() {
        let s = spec(17, "true", (10, 10), [100, 10, 100, 10]);
        let cfg = AdaptationConfig {
            r_min: 1.0,
            r_max: 1.0,
            rng_seed: 3,
        };
        let mut rng = cfg.rng();
        let adapted = adapt_on_success(&s, &cfg, &mut rng).unwrap();
        assert_eq!(adapted.benefit, s.benefit);
    }

    #[test]
    fn adaptation_config_validation() {
        for (lo, hi) in [(0.0, 1.0), (1.2, 0.8), (-1.0, 1.0), (f64::NAN, 1.0)] {
            let cfg = AdaptationConfig {
                r_min: lo,
                r_max: hi,
                rng_seed: 0,
            };
            assert!(cfg.validate().is_err(), "{lo}..{hi}");
        }
    }

    fn set_of(specs: Vec<ResponseSpec>, impact: f64) -> CandidateSet {
        let ev = event(&[]);
        let catalog = Catalog::new(specs).unwrap();
        generate_candidates(&ev, &catalog, ImpactScore::new(impact).unwrap()).unwrap()
    }

    #[test]
    fn inner_loop_returns_first_pass() {
        let set = set_of(
            vec![spec(1, "true", (0, 0), [100, 100, 100, 10]), no_action()],
            210.0,
        );
        let facts = Facts::new();
        let out = inner_loop(
            set,
            &Selector::LpMaxBenefit,
            &ctx(210.0),
            PreconditionCheck::Facts(&facts),
            false,
        )
        .unwrap();
        assert_eq!(out.chosen.index(), 1);
        assert_eq!(out.steps.len(), 1);
        assert_eq!(out.steps[0].selection_time_ms, 0.0);
    }

    #[test]
    fn inner_loop_exhausts_to_no_action() {
        let set = set_of(
            vec![
                spec(1, "a", (0, 0), [100, 100, 100, 10]),
                spec(2, "b && c", (1, 0), [10, 10, 10, 1]),
                spec(3, "!true", (1, 1), [1, 1, 1, 1]),
                no_action(),
            ],
            210.0,
        );
        let facts = Facts::new();
        for selector in [
            Selector::LpMaxBenefit,
            Selector::LpMinCost,
            Selector::Saw(SawConfig::default()),
        ] {
            let out = inner_loop(
                set.clone(),
                &selector,
                &ctx(210.0),
                PreconditionCheck::Facts(&facts),
                false,
            )
            .unwrap();
            assert_eq!(out.chosen.index(), NO_ACTION_INDEX, "{selector:?}");
            assert!(out.steps.len() <= set.len());
            assert!(out.steps.last().unwrap().precondition_passed);
        }
    }

    #[test]
    fn max_iterations_bounds_the_trace() {
        let catalog =
            Catalog::new(vec![spec(1, "true", (0, 0), [10, 0, 0, 0]), no_action()]).unwrap();
        let mut engine = Engine::new(catalog.clone(), config(Selector::LpMaxBenefit, 1)).unwrap();
        let trace = engine.outer_loop(&event(&[]), &mut AlwaysFailure).unwrap();
        assert_eq!(trace.iterations.len(), 1);
        assert_eq!(trace.stop_reason, StopReason::MaxIterations);
        assert_eq!(
            Engine::new(catalog, config(Selector::LpMaxBenefit, 0)).err(),
            Some(Error::ZeroIterations)
        );
    }

    #[test]
    fn failures_move_to_the_next_best_instance() {
        let catalog = Catalog::new(vec![
            spec(17, "true", (10, 10), [100, 10, 100, 10]),
            spec(20, "true", (100, 1), [100, 10, 10, 0]),
            no_action(),
        ])
        .unwrap();
        let mut engine = Engine::new(catalog, config(Selector::LpMaxBenefit, 4)).unwrap();
        let trace = engine.outer_loop(&event(&[]), &mut AlwaysFailure).unwrap();
        let picked: Vec<(u32, f64)> = trace
            .iterations
            .iter()
            .map(|r| (r.applied.index, r.applied.benefit))
            .collect();
        // 17 (220) fails and drops to 22; 20 (120) fails and drops to 12.
        assert_eq!(
            picked,
            vec![(17, 220.0), (20, 120.0), (17, 22.0), (20, 12.0)]
        );
    }

    #[test]
    fn success_stops_and_rescales_within_bounds() {
        let catalog = Catalog::new(vec![
            spec(17, "true", (10, 10), [100, 10, 100, 10]),
            no_action(),
        ])
        .unwrap();
        let mut engine = Engine::new(catalog, config(Selector::LpMaxBenefit, 10)).unwrap();
        let ev = event(&[]);
        let mut previous = [1.0; 4];
        for _ in 0..5 {
            let trace = engine.outer_loop(&ev, &mut AlwaysSuccess).unwrap();
            assert_eq!(trace.iterations.len(), 1);
            assert_eq!(trace.stop_reason, StopReason::Success);
            let weights = trace.iterations[0].adapted_benefit.weights();
            for (new, old) in weights.iter().zip(previous) {
                assert!(*new >= 0.8 * old && *new <= 1.2 * old);
            }
            previous = weights;
        }
    }

    #[test]
    fn effects_update_facts_between_iterations() {
        let catalog = Catalog::new(vec![
            spec(20, "!isolated", (10, 10), [100, 10, 10, 0]),
            spec(30, "true", (0, 0), [10, 10, 1, 1]),
            no_action(),
        ])
        .unwrap();
        let effects = Effects::from([(20, Facts::from([("isolated".to_string(), true)]))]);
        let mut engine = Engine::new(catalog, config(Selector::LpMaxBenefit, 2))
            .unwrap()
            .with_effects(effects);
        let trace = engine.outer_loop(&event(&[]), &mut AlwaysFailure).unwrap();
        let picked: Vec<u32> = trace.iterations.iter().map(|r| r.applied.index).collect();
        assert_eq!(picked, vec![20, 30]);
    }

    #[test]
    fn new_intrusion_switches_the_event() {
        let catalog =
            Catalog::new(vec![spec(30, "true", (0, 0), [10, 10, 1, 1]), no_action()]).unwrap();
        let mut next = event(&[]);
        next.result = IntrusionResult::InformationDisclosure;
        next.infected_asset = AssetId::new("gw");
        let mut feedback = ScriptedFeedback::new(vec![
            FeedbackVerdict::NewIntrusion {
                event: Box::new(next),
            },
            FeedbackVerdict::Failure,
        ]);
        let mut engine =
            Engine::new(catalog, config(Selector::Saw(SawConfig::default()), 10)).unwrap();
        let trace = engine.outer_loop(&event(&[]), &mut feedback).unwrap();
        let kinds: Vec<_> = trace
            .iterations
            .iter()
            .map(|r| (r.result, r.verdict))
            .collect();
        assert_eq!(
            kinds,
            vec![
                (
                    IntrusionResult::FalsifyAlterBehavior,
                    VerdictKind::NewIntrusion
                ),
                (IntrusionResult::InformationDisclosure, VerdictKind::Failure),
                (IntrusionResult::InformationDisclosure, VerdictKind::Success),
            ]
        );
        // Both events carry the same impact terms, so each alpha is halved.
        assert_eq!(trace.iterations[1].alphas, [0.5, 0.0, 0.5, 0.0, 0.5]);
    }

    #[test]
    fn verdict_serde_shape() {
        let json = serde_json::to_string(&FeedbackVerdict::Failure).unwrap();
        assert_eq!(json, r#"{"verdict":"failure"}"#);
        let back: FeedbackVerdict = serde_json::from_str(r#"{"verdict":"success"}"#).unwrap();
        assert_eq!(back, FeedbackVerdict::Success);
    }

    #[test]
    fn traces_are_deterministic() {
        let catalog = Catalog::new(vec![
            spec(17, "true", (10, 10), [100, 10, 100, 10]),
            spec(20, "true", (100, 1), [100, 10, 10, 0]),
            no_action(),
        ])
        .unwrap();
        let run = || {
            let mut engine =
                Engine::new(catalog.clone(), config(Selector::LpMaxBenefit, 5)).unwrap();
            let mut feedback =
                ScriptedFeedback::new(vec![FeedbackVerdict::Failure, FeedbackVerdict::Failure]);
            let mut out = Vec::new();
            for _ in 0..3 {
                let trace = engine.outer_loop(&event(&[]), &mut feedback).unwrap();
                out.push(serde_json::to_string(&trace).unwrap());
            }
            out
        };
        assert_eq!(run(), run());
    }

    fn arb_level() -> impl Strategy<Value = HeavensLevel> {
        prop::sample::select(HeavensLevel::ALL.to_vec())
    }

    proptest! {
        #[test]
        fn downgrade_preserves_order(a in arb_level(), b in arb_level()) {
            if a >= b {
                prop_assert!(a.downgrade() >= b.downgrade());
            }
        }

        #[test]
        fn downgrade_strictly_lowers_nonzero_totals(levels in prop::array::uniform4(arb_level())) {
            let v = HeavensVector::with_unit_weights(levels);
            let before = crate::response::response_benefit(&v);
            let after = crate::response::response_benefit(&downgrade_benefit(&v));
            if before > 0.0 {
                prop_assert!(after < before);
            } else {
                prop_assert_eq!(after, 0.0);
            }
        }

        #[test]
        fn rescaled_weights_stay_in_band(
            weights in prop::array::uniform4(0.0f64..10.0),
            seed in any::<u64>(),
        ) {
            let current = HeavensVector::from_values(100, 10, 1, 0).unwrap().with_weights(weights).unwrap();
            let cfg = AdaptationConfig { rng_seed: seed, ..AdaptationConfig::default() };
            let a = rescale_benefit(&current, &current, &cfg, &mut cfg.rng()).unwrap();
            let b = rescale_benefit(&current, &current, &cfg, &mut cfg.rng()).unwrap();
            prop_assert_eq!(a, b);
            for (new, old) in a.weights().iter().zip(weights) {
                prop_assert!(*new >= 0.8 * old && *new <= 1.2 * old);
            }
        }

        #[test]
        fn inner_loop_terminates(
            rows in prop::collection::vec((1u32..30, any::<bool>(), 0u32..4, 0u32..4), 0..30),
            selector_kind in 0u8..3,
        ) {
            let mut seen = std::collections::BTreeSet::new();
            let mut specs = vec![no_action()];
            let scale = [0, 1, 10, 100];
            for (index, pass, c, b) in rows {
                if seen.insert(index) {
                    let pre = if pass { "true" } else { "false" };
                    specs.push(spec(index, pre, (scale[c as usize], 0), [scale[b as usize], 0, 0, 0]));
                }
            }
            let set = set_of(specs, 50.0);
            let n = set.len();
            let selector = match selector_kind {
                0 => Selector::LpMaxBenefit,
                1 => Selector::LpMinCost,
                _ => Selector::Saw(SawConfig::default()),
            };
            let facts = Facts::new();
            let out = inner_loop(set, &selector, &ctx(50.0), PreconditionCheck::Facts(&facts), false).unwrap();
            prop_assert!(out.steps.len() <= n);
            prop_assert!(out.chosen.terminal || out.chosen.response.precondition.evaluate(&facts));
        }

        #[test]
        fn outer_loop_is_bounded(max in 1usize..8, script in prop::collection::vec(any::<bool>(), 0..10)) {
            let catalog = Catalog::new(vec![spec(17, "true", (10, 10), [100, 10, 100, 10]), no_action()]).unwrap();
            let verdicts = script.into_iter()
                .map(|ok| if ok { FeedbackVerdict::Success } else { FeedbackVerdict::Failure })
                .collect();
            let mut engine = Engine::new(catalog, config(Selector::LpMaxBenefit, max)).unwrap();
            let trace = engine.outer_loop(&event(&[]), &mut ScriptedFeedback::new(verdicts)).unwrap();
            prop_assert!(trace.iterations.len() <= max);
            prop_assert!(!trace.iterations.is_empty());
        }
    }

    #[test]
    fn instance_roles_are_tracked_separately() {
        let mut both = spec(20, "true", (100, 1), [100, 10, 10, 0]);
        both.place = Place::Both;
        let catalog = Catalog::new(vec![both, no_action()]).unwrap();
        let mut engine = Engine::new(catalog, config(Selector::LpMaxBenefit, 3)).unwrap();
        let trace = engine.outer_loop(&event(&[]), &mut AlwaysFailure).unwrap();
        let picked: Vec<(&str, f64)> = trace
            .iterations
            .iter()
            .map(|r| (r.applied.target_asset.as_str(), r.applied.benefit))
            .collect();
        assert_eq!(picked, vec![("cam", 120.0), ("acc", 120.0), ("cam", 12.0)]);
        let key = InstanceKey {
            index: 20,
            target_asset: AssetId::new("acc"),
        };
        assert_eq!(
            engine
                .adapted_benefit(&key)
                .map(crate::response::response_benefit),
            Some(12.0)
        );
    }
}
