//! Optimal response selection: adapted SAW, the two 0/1 LP objectives, and
//! an exhaustive oracle for the LP objectives.
//!
//! All selectors break ties by lowest catalog index, then infected-asset
//! instance before affected-asset instance.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CandidateInstance, CandidateSet, EnvironmentTerm, HeavensVector};
use crate::risk::ImpactScore;

/// Parameters of the adapted SAW method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SawConfig {
    /// Scales the impact bound `ρ·Σα` that preferences must stay below.
    pub rho: f64,
    /// Substituted for zero criterion values before division.
    pub epsilon: f64,
    pub w_cost: f64,
    pub w_benefit: f64,
}

impl Default for SawConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            epsilon: 1e-6,
            w_cost: 0.5,
            w_benefit: 0.5,
        }
    }
}

impl SawConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSawConfig(msg));
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        for (name, w) in [("w_cost", self.w_cost), ("w_benefit", self.w_benefit)] {
            if !(w.is_finite() && w >= 0.0) {
                return bad(format!("{name} must be non-negative, got {w}"));
            }
        }
        if ((self.w_cost + self.w_benefit) - 1.0).abs() > 1e-9 {
            return bad(format!(
                "w_cost + w_benefit must equal 1, got {}",
                self.w_cost + self.w_benefit
            ));
        }
        Ok(())
    }
}

/// Which objective an LP selection optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MaxBenefit,
    MinCost,
}

/// The result of one selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    /// Position of the chosen instance in the input set.
    pub position: usize,
    pub chosen: CandidateInstance,
    /// Preference for SAW, objective value for LP.
    pub score: f64,
    /// Candidates that satisfied the selector's bound or constraint.
    pub feasible_count: usize,
    /// Set when no candidate satisfied the bound and a fallback was taken.
    pub fallback: bool,
}

/// Weighted impact terms `w_m·v_m` in S, F, O, P, E order.
pub fn impact_terms(params: &HeavensVector, env: &EnvironmentTerm) -> [f64; 5] {
    let [s, f, o, p] = params.weighted_terms();
    [s, f, o, p, env.w_e * env.e.as_f64()]
}

/// Normalized impact per metric: the current event's term divided by the sum
/// of that term over all active events, or 0 when that sum is 0.
///
/// `active` is expected to include `current`.
pub fn impact_alphas(current: &[f64; 5], active: &[[f64; 5]]) -> [f64; 5] {
    std::array::from_fn(|m| {
        let total: f64 = active.iter().map(|terms| terms[m]).sum();
        if total != 0.0 {
            current[m] / total
        } else {
            0.0
        }
    })
}

/// SAW preference of each candidate, aligned with the set order.
pub fn saw_preferences(candidates: &CandidateSet, cfg: &SawConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if candidates.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }
    let eps = |v: f64| if v == 0.0 { cfg.epsilon } else { v };
    let max_benefit = candidates
        .iter()
        .map(|c| eps(c.benefit))
        .fold(f64::NEG_INFINITY, f64::max);
    let min_cost = candidates
        .iter()
        .map(|c| eps(c.cost))
        .fold(f64::INFINITY, f64::min);
    Ok(candidates
        .iter()
        .map(|c| {
            let alpha_benefit = eps(c.benefit) / max_benefit;
            let alpha_cost = min_cost / eps(c.cost);
            cfg.w_benefit * alpha_benefit + cfg.w_cost * alpha_cost
        })
        .collect())
}

/// Highest-preference candidate whose preference lies below `ρ·Σα`.
///
/// When no candidate qualifies, the overall highest-preference candidate is
/// returned with `fallback` set.
pub fn saw_select(
    candidates: &CandidateSet,
    impact_alphas: &[f64],
    cfg: &SawConfig,
) -> Result<SelectionOutcome> {
    let prefs = saw_preferences(candidates, cfg)?;
    let bound = cfg.rho * impact_alphas.iter().sum::<f64>();
    let feasible: Vec<usize> = (0..prefs.len()).filter(|&i| prefs[i] < bound).collect();
    let fallback = feasible.is_empty();
    let pool: Vec<usize> = if fallback {
        (0..prefs.len()).collect()
    } else {
        feasible.clone()
    };
    let position = best(candidates, &pool, |i| prefs[i]).expect("pool is non-empty");
    Ok(outcome(
        candidates,
        position,
        prefs[position],
        feasible.len(),
        fallback,
    ))
}

/// Maximum benefit subject to `cost < impact`; "No Action" if nothing is feasible.
pub fn lp_select_max_benefit(
    candidates: &CandidateSet,
    impact: ImpactScore,
) -> Result<SelectionOutcome> {
    lp_select(candidates, impact, Objective::MaxBenefit)
}

/// Minimum cost subject to `cost < impact`; "No Action" if nothing is feasible.
pub fn lp_select_min_cost(
    candidates: &CandidateSet,
    impact: ImpactScore,
) -> Result<SelectionOutcome> {
    lp_select(candidates, impact, Objective::MinCost)
}

fn lp_select(
    candidates: &CandidateSet,
    impact: ImpactScore,
    objective: Objective,
) -> Result<SelectionOutcome> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }
    let feasible: Vec<usize> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.cost < impact.value())
        .map(|(i, _)| i)
        .collect();
    let value = |i: usize| ranking_value(candidates.as_slice(), i, objective);
    match best(candidates, &feasible, value) {
        Some(position) => Ok(outcome(
            candidates,
            position,
            objective_value(candidates.as_slice(), position, objective),
            feasible.len(),
            false,
        )),
        None => terminal_fallback(candidates, objective),
    }
}

/// Exhaustive solution of the 0/1 program over selection vectors `s`:
/// optimize `s·b` (or `s·c`) subject to `s·c < I` and `Σs = 1`.
///
/// Independent of the filtered-argmax route; used as a test oracle.
pub fn brute_force_oracle(
    candidates: &CandidateSet,
    impact: ImpactScore,
    objective: Objective,
) -> Result<SelectionOutcome> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }
    let n = candidates.len();
    let costs: Vec<f64> = candidates.iter().map(|c| c.cost).collect();
    let benefits: Vec<f64> = candidates.iter().map(|c| c.benefit).collect();
    let dot =
        |s: &[u8], v: &[f64]| -> f64 { s.iter().zip(v).map(|(&si, &vi)| f64::from(si) * vi).sum() };

    let mut best: Option<(usize, f64)> = None;
    let mut feasible_count = 0;
    for k in 0..n {
        // Σs = 1 admits exactly the unit vectors.
        let mut s = vec![0u8; n];
        s[k] = 1;
        if dot(&s, &costs) >= impact.value() {
            continue;
        }
        feasible_count += 1;
        let value = match objective {
            Objective::MaxBenefit => dot(&s, &benefits),
            Objective::MinCost => dot(&s, &costs),
        };
        let replace = match best {
            None => true,
            Some((j, incumbent)) => {
                let improves = match objective {
                    Objective::MaxBenefit => value > incumbent,
                    Objective::MinCost => value < incumbent,
                };
                let ties = value == incumbent;
                let candidate = candidates.get(k).expect("k < n");
                let holder = candidates.get(j).expect("j < n");
                improves || (ties && candidate.rank() < holder.rank())
            }
        };
        if replace {
            best = Some((k, value));
        }
    }
    match best {
        Some((position, value)) => Ok(outcome(candidates, position, value, feasible_count, false)),
        None => terminal_fallback(candidates, objective),
    }
}

/// Value maximized by the objective: benefit, or negated cost.
fn ranking_value(items: &[CandidateInstance], i: usize, objective: Objective) -> f64 {
    match objective {
        Objective::MaxBenefit => items[i].benefit,
        Objective::MinCost => -items[i].cost,
    }
}

/// Objective value as reported: benefit or cost.
fn objective_value(items: &[CandidateInstance], i: usize, objective: Objective) -> f64 {
    match objective {
        Objective::MaxBenefit => items[i].benefit,
        Objective::MinCost => items[i].cost,
    }
}

fn terminal_fallback(candidates: &CandidateSet, objective: Objective) -> Result<SelectionOutcome> {
    let position = candidates
        .iter()
        .position(|c| c.terminal)
        .ok_or(Error::NoFeasibleCandidate)?;
    let value = objective_value(candidates.as_slice(), position, objective);
    Ok(outcome(candidates, position, value, 0, true))
}

/// Index in `pool` maximizing `score`, ties to the lowest rank.
fn best(candidates: &CandidateSet, pool: &[usize], score: impl Fn(usize) -> f64) -> Option<usize> {
    let items = candidates.as_slice();
    pool.iter().copied().max_by(|&a, &b| {
        score(a)
            .partial_cmp(&score(b))
            .unwrap_or(Ordering::Equal)
            .then_with(|| items[b].rank().cmp(&items[a].rank()))
    })
}

fn outcome(
    candidates: &CandidateSet,
    position: usize,
    score: f64,
    feasible_count: usize,
    fallback: bool,
) -> SelectionOutcome {
    SelectionOutcome {
        position,
        chosen: candidates.get(position).expect("position in range").clone(),
        score,
        feasible_count,
        fallback,
    }
}

/// Name of a selection algorithm as used on the command line and in traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "saw")]
    Saw,
    #[serde(rename = "lp-max")]
    LpMax,
    #[serde(rename = "lp-min")]
    LpMin,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::LpMax, Algorithm::LpMin, Algorithm::Saw];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Saw => "saw",
            Algorithm::LpMax => "lp-max",
            Algorithm::LpMin => "lp-min",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}` (expected saw, lp-max or lp-min)"))
    }
}

/// Inputs a selector needs beyond the candidate set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionContext {
    pub impact: ImpactScore,
    /// Normalized impact per metric, S, F, O, P, E order.
    pub alphas: [f64; 5],
}

/// A configured selection strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selector {
    Saw(SawConfig),
    LpMaxBenefit,
    LpMinCost,
}

impl Selector {
    pub fn new(algorithm: Algorithm, saw: SawConfig) -> Self {
        match algorithm {
            Algorithm::Saw => Selector::Saw(saw),
            Algorithm::LpMax => Selector::LpMaxBenefit,
            Algorithm::LpMin => Selector::LpMinCost,
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Selector::Saw(_) => Algorithm::Saw,
            Selector::LpMaxBenefit => Algorithm::LpMax,
            Selector::LpMinCost => Algorithm::LpMin,
        }
    }

    pub fn select(
        &self,
        candidates: &CandidateSet,
        ctx: &SelectionContext,
    ) -> Result<SelectionOutcome> {
        match self {
            Selector::Saw(cfg) => saw_select(candidates, &ctx.alphas, cfg),
            Selector::LpMaxBenefit => lp_select_max_benefit(candidates, ctx.impact),
            Selector::LpMinCost => lp_select_min_cost(candidates, ctx.impact),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        AssetId, CostVector, HeavensLevel, Place, ResponseSpec, StopCondition, TargetRole,
    };
    use crate::precondition::PreconditionExpr;
    use crate::response::NO_ACTION_INDEX;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn instance(index: u32, role: TargetRole, cost: f64, benefit: f64) -> CandidateInstance {
        let spec = ResponseSpec::new(
            index,
            format!("r{index}"),
            [],
            true,
            PreconditionExpr::TRUE,
            Place::Both,
            StopCondition::Persistent,
            CostVector::from_values(0, 0).unwrap(),
            HeavensVector::zero(),
        );
        CandidateInstance {
            response: Arc::new(spec),
            target_asset: AssetId::new(match role {
                TargetRole::Infected => "src",
                TargetRole::Affected => "dst",
            }),
            role,
            terminal: index == NO_ACTION_INDEX,
            benefit_params: HeavensVector::zero(),
            cost,
            benefit,
        }
    }

    fn set(entries: &[(u32, f64, f64)]) -> CandidateSet {
        CandidateSet::new(
            entries
                .iter()
                .map(|&(i, c, b)| instance(i, TargetRole::Affected, c, b))
                .collect(),
        )
        .unwrap()
    }

    fn impact(v: f64) -> ImpactScore {
        ImpactScore::new(v).unwrap()
    }

    #[test]
    fn saw_preferences_hand_computed() {
        let cfg = SawConfig::default();
        let prefs = saw_preferences(&set(&[(1, 10.0, 100.0), (2, 10.0, 50.0)]), &cfg).unwrap();
        assert_eq!(prefs, vec![1.0, 0.75]);
        assert_eq!(
            saw_preferences(&set(&[(1, 7.0, 3.0)]), &cfg).unwrap(),
            vec![1.0]
        );
    }

    #[test]
    fn saw_substitutes_epsilon_for_zeros() {
        let cfg = SawConfig::default();
        let prefs = saw_preferences(&set(&[(1, 0.0, 0.0), (2, 100.0, 100.0)]), &cfg).unwrap();
        // Reference evaluation with the substitution written out.
        let eps = 1e-6;
        let (b1, c1, b2, c2) = (eps, eps, 100.0, 100.0);
        let bmax = f64::max(b1, b2);
        let cmin = f64::min(c1, c2);
        let p1 = 0.5 * (b1 / bmax) + 0.5 * (cmin / c1);
        let p2 = 0.5 * (b2 / bmax) + 0.5 * (cmin / c2);
        assert_eq!(prefs, vec![p1, p2]);
        assert!((prefs[0] - 0.5).abs() < 1e-7);
    }

    #[test]
    fn saw_rejects_bad_config_and_empty_sets() {
        let cfg = SawConfig {
            w_cost: 0.7,
            ..SawConfig::default()
        };
        assert!(matches!(
            saw_preferences(&set(&[(1, 1.0, 1.0)]), &cfg),
            Err(Error::InvalidSawConfig(_))
        ));
        assert_eq!(
            saw_preferences(&CandidateSet::default(), &SawConfig::default()),
            Err(Error::EmptyCandidateSet)
        );
    }

    #[test]
    fn saw_bound_and_fallback() {
        let candidates = set(&[(1, 10.0, 100.0), (2, 10.0, 50.0), (3, 20.0, 10.0)]);
        let cfg = SawConfig::default();
        // Preferences: 1.0, 0.75, 0.3. Bound 0.8 excludes the first.
        let picked = saw_select(&candidates, &[0.8], &cfg).unwrap();
        assert_eq!(picked.chosen.index(), 2);
        assert_eq!(picked.feasible_count, 2);
        assert!(!picked.fallback);
        // Bound 0.1 excludes everything.
        let fallback = saw_select(&candidates, &[0.1], &cfg).unwrap();
        assert_eq!(fallback.chosen.index(), 1);
        assert!(fallback.fallback);
        // Single candidate.
        let single = saw_select(&set(&[(9, 3.0, 3.0)]), &[0.0], &cfg).unwrap();
        assert_eq!(single.chosen.index(), 9);
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(impact_alphas(&[0.0; 5], &[[0.0; 5]]), [0.0; 5]);
        let single = [100.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(impact_alphas(&single, &[single]), [1.0, 0.0, 0.0, 0.0, 0.0]);
        let other = [100.0, 10.0, 0.0, 0.0, 0.0];
        assert_eq!(impact_alphas(&single, &[single, other])[0], 0.5);
        assert_eq!(impact_alphas(&single, &[single, other])[1], 0.0);
    }

    #[test]
    fn impact_terms_include_environment() {
        let params = HeavensVector::from_values(100, 0, 100, 0).unwrap();
        let env = EnvironmentTerm {
            e: HeavensLevel::TEN,
            w_e: 1.0,
        };
        assert_eq!(impact_terms(&params, &env), [100.0, 0.0, 100.0, 0.0, 10.0]);
    }

    #[test]
    fn lp_examples() {
        let candidates = set(&[
            (1, 5.0, 9.0),
            (2, 50.0, 100.0),
            (NO_ACTION_INDEX, 10.0, 0.0),
        ]);
        let max = lp_select_max_benefit(&candidates, impact(10.0)).unwrap();
        assert_eq!((max.chosen.cost, max.chosen.benefit), (5.0, 9.0));
        assert_eq!(max.feasible_count, 1);

        let candidates = set(&[(1, 5.0, 9.0), (2, 3.0, 1.0), (NO_ACTION_INDEX, 10.0, 0.0)]);
        let min = lp_select_min_cost(&candidates, impact(10.0)).unwrap();
        assert_eq!((min.chosen.cost, min.chosen.benefit), (3.0, 1.0));
        assert_eq!(min.score, 3.0);
    }

    #[test]
    fn lp_falls_back_to_no_action() {
        let candidates = set(&[(1, 50.0, 9.0), (NO_ACTION_INDEX, 10.0, 0.0)]);
        for objective in [Objective::MaxBenefit, Objective::MinCost] {
            let got = lp_select(&candidates, impact(10.0), objective).unwrap();
            assert!(got.chosen.terminal && got.fallback);
            let oracle = brute_force_oracle(&candidates, impact(10.0), objective).unwrap();
            assert_eq!(oracle.position, got.position);
        }
        let no_terminal = set(&[(1, 50.0, 9.0)]);
        assert_eq!(
            lp_select_max_benefit(&no_terminal, impact(10.0)),
            Err(Error::NoFeasibleCandidate)
        );
    }

    #[test]
    fn ties_prefer_lowest_index_then_infected() {
        let candidates = CandidateSet::new(vec![
            instance(20, TargetRole::Affected, 1.0, 5.0),
            instance(20, TargetRole::Infected, 1.0, 5.0),
            instance(26, TargetRole::Infected, 1.0, 5.0),
        ])
        .unwrap();
        let got = lp_select_max_benefit(&candidates, impact(10.0)).unwrap();
        assert_eq!(
            (got.chosen.index(), got.chosen.role),
            (20, TargetRole::Infected)
        );
        let saw = saw_select(&candidates, &[5.0], &SawConfig::default()).unwrap();
        assert_eq!(
            (saw.chosen.index(), saw.chosen.role),
            (20, TargetRole::Infected)
        );
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
            assert_eq!(serde_json::to_string(&a).unwrap(), format!("\"{a}\""));
        }
        assert!("simplex".parse::<Algorithm>().is_err());
    }

    fn arb_set(max: usize) -> impl Strategy<Value = CandidateSet> {
        let level = prop::sample::select(vec![0.0, 1.0, 10.0, 100.0]);
        let pair = (level.clone(), level.clone()).prop_map(|(a, b)| a + b);
        let quad = (level.clone(), level.clone(), level.clone(), level)
            .prop_map(|(a, b, c, d)| a + b + c + d);
        prop::collection::vec((1u32..40, any::<bool>(), pair, quad), 1..max).prop_map(|rows| {
            let mut seen = std::collections::BTreeSet::new();
            let mut items = Vec::new();
            for (index, infected, cost, benefit) in rows {
                let role = if infected {
                    TargetRole::Infected
                } else {
                    TargetRole::Affected
                };
                if seen.insert((index, role)) {
                    items.push(instance(index, role, cost, benefit));
                }
            }
            CandidateSet::new(items).unwrap()
        })
    }

    proptest! {
        #[test]
        fn lp_matches_oracle(candidates in arb_set(24), bound in 0.0f64..250.0) {
            let i = impact(bound);
            for objective in [Objective::MaxBenefit, Objective::MinCost] {
                let fast = lp_select(&candidates, i, objective);
                let slow = brute_force_oracle(&candidates, i, objective);
                match (fast, slow) {
                    (Ok(a), Ok(b)) => {
                        prop_assert_eq!(a.position, b.position);
                        prop_assert_eq!(a.score, b.score);
                        prop_assert_eq!(a.feasible_count, b.feasible_count);
                    }
                    (a, b) => prop_assert_eq!(a.err(), b.err()),
                }
            }
        }

        #[test]
        fn lp_selections_satisfy_the_constraint(candidates in arb_set(24), bound in 0.0f64..250.0) {
            for objective in [Objective::MaxBenefit, Objective::MinCost] {
                if let Ok(out) = lp_select(&candidates, impact(bound), objective) {
                    prop_assert!(out.chosen.cost < bound || out.chosen.terminal);
                }
            }
        }

        #[test]
        fn scaling_keeps_the_argmax(candidates in arb_set(24), bound in 1.0f64..250.0, k in 0.1f64..10.0) {
            let scaled = CandidateSet::new(
                candidates.iter().cloned().map(|mut c| { c.benefit *= k; c }).collect()
            ).unwrap();
            let a = lp_select_max_benefit(&candidates, impact(bound));
            let b = lp_select_max_benefit(&scaled, impact(bound));
            if let (Ok(a), Ok(b)) = (a, b) {
                prop_assert_eq!(a.position, b.position);
            }
            let costs = CandidateSet::new(
                candidates.iter().cloned().map(|mut c| { c.cost *= k; c }).collect()
            ).unwrap();
            let a = lp_select_min_cost(&candidates, impact(bound));
            let b = lp_select_min_cost(&costs, impact(bound * k));
            if let (Ok(a), Ok(b)) = (a, b) {
                prop_assert_eq!(a.chosen.index(), b.chosen.index());
            }
        }

        #[test]
        fn repeated_rejection_is_monotone(candidates in arb_set(24), bound in 0.0f64..250.0) {
            for objective in [Objective::MaxBenefit, Objective::MinCost] {
                let mut remaining = candidates.clone();
                let mut last: Option<f64> = None;
                while let Ok(out) = lp_select(&remaining, impact(bound), objective) {
                    if out.fallback { break; }
                    if let Some(prev) = last {
                        match objective {
                            Objective::MaxBenefit => prop_assert!(out.score <= prev),
                            Objective::MinCost => prop_assert!(out.score >= prev),
                        }
                    }
                    last = Some(out.score);
                    remaining.remove(out.position);
                    if remaining.is_empty() { break; }
                }
            }
        }
    }
}
