//! Evaluation modes: static drain, dynamic feedback runs and velocity sweeps.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use react_core::engine::{
    inner_loop, AlwaysFailure, AlwaysSuccess, Engine, EngineConfig, EngineTrace, FeedbackSource,
    PreconditionCheck, ScriptedFeedback, VerdictKind,
};
use react_core::model::AssetId;
use react_core::response::generate_candidates;
use react_core::risk::event_impact;
use react_core::selectors::{impact_alphas, impact_terms, Algorithm, SelectionContext, Selector};

use crate::error::{HarnessError, Result};
use crate::files::Scenario;
use crate::memory::peak_memory_bytes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Every precondition rejected; the candidate set is drained.
    Static,
    /// Every executed response reported successful.
    DynamicSuccess,
    /// Every executed response reported unsuccessful.
    DynamicFail,
    /// Verdicts taken from the scenario's feedback script.
    Scripted,
    /// Impact and applied response at several velocities.
    VelocitySweep,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Static,
        Mode::DynamicSuccess,
        Mode::DynamicFail,
        Mode::Scripted,
        Mode::VelocitySweep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Static => "static",
            Mode::DynamicSuccess => "dynamic-success",
            Mode::DynamicFail => "dynamic-fail",
            Mode::Scripted => "scripted",
            Mode::VelocitySweep => "velocity-sweep",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

/// Feedback used by [`run_dynamic`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdicts {
    AlwaysSuccess,
    AlwaysFailure,
    Scripted,
}

/// One selected response in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub step: usize,
    pub response_index: u32,
    pub target_asset: AssetId,
    pub cost: f64,
    pub benefit: f64,
    pub impact: f64,
    pub selection_time_ms: f64,
    pub velocity_kmh: f64,
    /// Feedback on the executed response; absent in static runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<VerdictKind>,
}

/// Outcome of one harness run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub mode: Mode,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub impact: f64,
    pub selections: Vec<SelectionRecord>,
    pub list_generation_time_ms: f64,
    /// Engine traces of dynamic runs, one per outer loop.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub traces: Vec<EngineTrace>,
    /// Best-effort peak resident memory. Not written to output files.
    #[serde(skip)]
    pub peak_memory_bytes: Option<u64>,
}

/// Settings shared by all modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Record wall-clock times; otherwise times are reported as zero.
    pub measure_time: bool,
}

impl RunOptions {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            seed: 0,
            measure_time: false,
        }
    }
}

fn selector(scenario: &Scenario, algorithm: Algorithm) -> Selector {
    Selector::new(algorithm, scenario.file.saw)
}

fn elapsed_ms(start: Option<Instant>) -> f64 {
    start.map_or(0.0, |t| t.elapsed().as_secs_f64() * 1e3)
}

/// Rejects every precondition except "No Action" and records the full
/// selection order until "No Action" is reached.
pub fn run_static_quality(scenario: &Scenario, opts: RunOptions) -> Result<RunReport> {
    let event = scenario.file.event()?;
    let impact = event_impact(&event)?;
    let terms = impact_terms(&event.impact_params, &event.environment()?);
    let ctx = SelectionContext {
        impact,
        alphas: impact_alphas(&terms, &[terms]),
    };

    let start = opts.measure_time.then(Instant::now);
    let candidates = generate_candidates(&event, &scenario.catalog, impact)?;
    let list_generation_time_ms = elapsed_ms(start);

    let outcome = inner_loop(
        candidates,
        &selector(scenario, opts.algorithm),
        &ctx,
        PreconditionCheck::RejectAll,
        opts.measure_time,
    )?;
    let selections = outcome
        .steps
        .into_iter()
        .enumerate()
        .map(|(i, s)| SelectionRecord {
            step: i + 1,
            response_index: s.index,
            target_asset: s.target_asset,
            cost: s.cost,
            benefit: s.benefit,
            impact: impact.value(),
            selection_time_ms: s.selection_time_ms,
            velocity_kmh: event.vehicle.velocity_kmh,
            verdict: None,
        })
        .collect();
    Ok(RunReport {
        scenario: scenario.name().to_owned(),
        mode: Mode::Static,
        algorithm: opts.algorithm,
        seed: opts.seed,
        impact: impact.value(),
        selections,
        list_generation_time_ms,
        traces: Vec::new(),
        peak_memory_bytes: peak_memory_bytes(),
    })
}

/// Runs the outer loop with scripted feedback for `iterations` executions.
///
/// A success ends an incident, so under [`Verdicts::AlwaysSuccess`] the same
/// intrusion is reported again for each iteration while the engine keeps
/// its adapted parameters.
pub fn run_dynamic(
    scenario: &Scenario,
    opts: RunOptions,
    verdicts: Verdicts,
    iterations: usize,
) -> Result<RunReport> {
    if iterations == 0 {
        return Err(HarnessError::Argument(
            "iterations must be at least 1".into(),
        ));
    }
    let event = scenario.file.event()?;
    let config = EngineConfig {
        selector: selector(scenario, opts.algorithm),
        adaptation: scenario.file.adaptation(opts.seed),
        max_iterations: iterations,
        measure_time: opts.measure_time,
    };
    let mut engine =
        Engine::new(scenario.catalog.clone(), config)?.with_effects(scenario.file.effects.clone());

    let mut traces = Vec::new();
    match verdicts {
        Verdicts::AlwaysSuccess => {
            for _ in 0..iterations {
                traces.push(engine.outer_loop(&event, &mut AlwaysSuccess)?);
            }
        }
        Verdicts::AlwaysFailure => traces.push(engine.outer_loop(&event, &mut AlwaysFailure)?),
        Verdicts::Scripted => {
            let mut feedback = ScriptedFeedback::new(scenario.file.feedback_script.clone());
            traces.push(engine.outer_loop(&event, &mut feedback as &mut dyn FeedbackSource)?);
        }
    }

    let mut selections = Vec::new();
    let mut list_generation_time_ms = 0.0;
    for record in traces.iter().flat_map(|t| &t.iterations) {
        list_generation_time_ms += record.list_generation_time_ms;
        selections.push(SelectionRecord {
            step: selections.len() + 1,
            response_index: record.applied.index,
            target_asset: record.applied.target_asset.clone(),
            cost: record.applied.cost,
            benefit: record.applied.benefit,
            impact: record.impact,
            selection_time_ms: record.selections.iter().map(|s| s.selection_time_ms).sum(),
            velocity_kmh: record.velocity_kmh,
            verdict: Some(record.verdict),
        });
    }
    let mode = match verdicts {
        Verdicts::AlwaysSuccess => Mode::DynamicSuccess,
        Verdicts::AlwaysFailure => Mode::DynamicFail,
        Verdicts::Scripted => Mode::Scripted,
    };
    Ok(RunReport {
        scenario: scenario.name().to_owned(),
        mode,
        algorithm: opts.algorithm,
        seed: opts.seed,
        impact: event_impact(&event)?.value(),
        selections,
        list_generation_time_ms,
        traces,
        peak_memory_bytes: peak_memory_bytes(),
    })
}

/// One report per velocity with the impact and the response applied under
/// the scenario facts.
pub fn run_velocity_sweep(
    scenario: &Scenario,
    opts: RunOptions,
    velocities: &[f64],
) -> Result<Vec<RunReport>> {
    if velocities.is_empty() {
        return Err(HarnessError::Argument(
            "at least one velocity is required".into(),
        ));
    }
    velocities
        .iter()
        .map(|&v| {
            let event = scenario.file.event_at(v)?;
            let impact = event_impact(&event)?;
            let terms = impact_terms(&event.impact_params, &event.environment()?);
            let ctx = SelectionContext {
                impact,
                alphas: impact_alphas(&terms, &[terms]),
            };
            let start = opts.measure_time.then(Instant::now);
            let candidates = generate_candidates(&event, &scenario.catalog, impact)?;
            let list_generation_time_ms = elapsed_ms(start);
            let outcome = inner_loop(
                candidates,
                &selector(scenario, opts.algorithm),
                &ctx,
                PreconditionCheck::Facts(&event.vehicle.facts),
                opts.measure_time,
            )?;
            let chosen = &outcome.chosen;
            Ok(RunReport {
                scenario: scenario.name().to_owned(),
                mode: Mode::VelocitySweep,
                algorithm: opts.algorithm,
                seed: opts.seed,
                impact: impact.value(),
                selections: vec![SelectionRecord {
                    step: 1,
                    response_index: chosen.index(),
                    target_asset: chosen.target_asset.clone(),
                    cost: chosen.cost,
                    benefit: chosen.benefit,
                    impact: impact.value(),
                    selection_time_ms: outcome.steps.iter().map(|s| s.selection_time_ms).sum(),
                    velocity_kmh: v,
                    verdict: None,
                }],
                list_generation_time_ms,
                traces: Vec::new(),
                peak_memory_bytes: peak_memory_bytes(),
            })
        })
        .collect()
}

/// Joins per-velocity reports into one report with consecutive steps.
pub fn merge_sweep(reports: Vec<RunReport>) -> Option<RunReport> {
    let mut iter = reports.into_iter();
    let mut merged = iter.next()?;
    for report in iter {
        merged.list_generation_time_ms += report.list_generation_time_ms;
        for mut s in report.selections {
            s.step = merged.selections.len() + 1;
            merged.selections.push(s);
        }
        merged.peak_memory_bytes = merged.peak_memory_bytes.max(report.peak_memory_bytes);
    }
    Some(merged)
}

/// Dispatches on `mode`. `iterations` applies to dynamic modes and
/// `velocities` to the sweep.
pub fn run_mode(
    scenario: &Scenario,
    opts: RunOptions,
    mode: Mode,
    iterations: usize,
    velocities: &[f64],
) -> Result<RunReport> {
    match mode {
        Mode::Static => run_static_quality(scenario, opts),
        Mode::DynamicSuccess => run_dynamic(scenario, opts, Verdicts::AlwaysSuccess, iterations),
        Mode::DynamicFail => run_dynamic(scenario, opts, Verdicts::AlwaysFailure, iterations),
        Mode::Scripted => run_dynamic(scenario, opts, Verdicts::Scripted, iterations),
        Mode::VelocitySweep => {
            let reports = run_velocity_sweep(scenario, opts, velocities)?;
            Ok(merge_sweep(reports).expect("sweep has at least one velocity"))
        }
    }
}
