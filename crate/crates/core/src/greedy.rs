//! Iterative greedy choice of offloading ratios.
//!
//! Every task starts at `init_ratio`. While the summed energy keeps strictly
//! dropping, the task currently burning the most energy has its ratio raised
//! by `step`. Ratios only ever go up, so the search settles in a local
//! minimum; it makes no global-optimality claim.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, device_spectral_efficiencies, OffloadRatio, Scenario};
use crate::spectral::SeProvider;

/// Ratios this close to 1.0 snap to exactly 1.0.
const PIN_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreedyConfig {
    pub init_ratio: f64,
    pub step: f64,
    /// Cap on ratio increments. `None` means `ceil(10 · tasks / step)`.
    pub max_iters: Option<usize>,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        GreedyConfig {
            init_ratio: 0.5,
            step: 0.01,
            max_iters: None,
        }
    }
}

impl GreedyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.init_ratio) {
            return Err(Error::domain(format!(
                "greedy.init_ratio must lie in [0, 1], got {}",
                self.init_ratio
            )));
        }
        if !(self.step > 0.0 && self.step <= 1.0) {
            return Err(Error::domain(format!(
                "greedy.step must lie in (0, 1], got {}",
                self.step
            )));
        }
        Ok(())
    }

    fn iteration_cap(&self, tasks: usize) -> usize {
        self.max_iters
            .unwrap_or_else(|| (10.0 * tasks as f64 / self.step).ceil() as usize)
    }

    /// Ratio after `steps` increments from the start, snapped to 1.0 near the top.
    fn ratio_after(&self, steps: u32) -> (f64, bool) {
        let r = self.init_ratio + f64::from(steps) * self.step;
        if r >= 1.0 - PIN_EPS {
            (1.0, true)
        } else {
            (r, false)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Every task reached ratio 1.0; no move is left.
    Converged,
    /// The last probe did not strictly lower the total energy.
    Saturated,
    /// `max_iters` increments were spent.
    IterCapped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub total_energy: f64,
    /// Task whose ratio was raised to reach this state; `None` for the start.
    pub task_index: Option<usize>,
    /// Whether this state became the new best.
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffloadSolution {
    pub offload_ratios: Vec<f64>,
    pub per_task_energy: Vec<f64>,
    pub total_energy: f64,
    pub initial_energy: f64,
    pub evaluations: usize,
    pub termination: Termination,
    pub trace: Vec<TraceEntry>,
}

impl OffloadSolution {
    pub fn ratios(&self) -> Vec<OffloadRatio> {
        self.offload_ratios
            .iter()
            .map(|&r| OffloadRatio::saturating(r))
            .collect()
    }

    /// Convergence trace as CSV: `iteration,total_energy,task_index,accepted`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "total_energy", "task_index", "accepted"])?;
        for e in &self.trace {
            w.write_record([
                e.iteration.to_string(),
                e.total_energy.to_string(),
                e.task_index.map(|i| i.to_string()).unwrap_or_default(),
                e.accepted.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("trace csv", e))?;
        Ok(())
    }
}

/// Per-task total energy (local + offload) for the given ratios.
pub fn get_total_energy(ratios: &[f64], scenario: &Scenario, se: &dyn SeProvider) -> Result<Vec<f64>> {
    if ratios.len() != scenario.tasks().len() {
        return Err(Error::Shape(format!(
            "{} ratios for {} tasks",
            ratios.len(),
            scenario.tasks().len()
        )));
    }
    let ratios = ratios
        .iter()
        .map(|&r| OffloadRatio::new(r))
        .collect::<Result<Vec<_>>>()?;
    let se_per_device = device_spectral_efficiencies(scenario, se)?;
    let eval = Evaluator {
        scenario,
        se_per_device: &se_per_device,
    };
    ratios
        .iter()
        .enumerate()
        .map(|(i, &r)| eval.task_energy(i, r))
        .collect()
}

struct Evaluator<'a> {
    scenario: &'a Scenario,
    se_per_device: &'a [f64],
}

impl Evaluator<'_> {
    fn task_energy(&self, index: usize, ratio: OffloadRatio) -> Result<f64> {
        let task = self.scenario.tasks()[index].with_ratio(ratio);
        model::total_energy(
            &task,
            self.scenario.device_of(&task),
            self.scenario.channel_of(&task),
            self.se_per_device[task.device_id],
        )
    }
}

fn argmax_unpinned(energies: &[f64], pinned: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &e) in energies.iter().enumerate() {
        if pinned[i] {
            continue;
        }
        match best {
            Some(b) if !(e > energies[b]) => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Runs the greedy search and returns the best ratios it saw.
pub fn optimize(scenario: &Scenario, config: &GreedyConfig, se: &dyn SeProvider) -> Result<OffloadSolution> {
    config.validate()?;
    let n = scenario.tasks().len();
    if n == 0 {
        return Err(Error::InsufficientData("scenario has no tasks".into()));
    }
    let se_per_device = device_spectral_efficiencies(scenario, se)?;
    let eval = Evaluator {
        scenario,
        se_per_device: &se_per_device,
    };
    let cap = config.iteration_cap(n);

    let (start, start_pinned) = config.ratio_after(0);
    let mut steps = vec![0u32; n];
    let mut ratios = vec![start; n];
    let mut pinned = vec![start_pinned; n];
    let mut energies = ratios
        .iter()
        .enumerate()
        .map(|(i, &r)| eval.task_energy(i, OffloadRatio::saturating(r)))
        .collect::<Result<Vec<_>>>()?;
    let mut evaluations = 1;

    let mut best = f64::INFINITY;
    let mut best_ratios = ratios.clone();
    let mut best_energies = energies.clone();
    let mut trace = Vec::new();
    let mut iteration = 0;
    let mut adjusted = None;

    let termination = loop {
        let total: f64 = energies.iter().sum();
        if !(total < best) {
            trace.push(TraceEntry {
                iteration,
                total_energy: total,
                task_index: adjusted,
                accepted: false,
            });
            break Termination::Saturated;
        }
        best = total;
        best_ratios.clone_from(&ratios);
        best_energies.clone_from(&energies);
        trace.push(TraceEntry {
            iteration,
            total_energy: total,
            task_index: adjusted,
            accepted: true,
        });

        let Some(i) = argmax_unpinned(&energies, &pinned) else {
            break Termination::Converged;
        };
        if iteration >= cap {
            break Termination::IterCapped;
        }
        steps[i] += 1;
        let (r, at_top) = config.ratio_after(steps[i]);
        ratios[i] = r;
        pinned[i] = at_top;
        energies[i] = eval.task_energy(i, OffloadRatio::saturating(r))?;
        evaluations += 1;
        iteration += 1;
        adjusted = Some(i);
    };

    Ok(OffloadSolution {
        total_energy: best_energies.iter().sum(),
        initial_energy: trace[0].total_energy,
        offload_ratios: best_ratios,
        per_task_energy: best_energies,
        evaluations,
        termination,
        trace,
    })
}
