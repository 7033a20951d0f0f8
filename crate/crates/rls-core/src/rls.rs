//! The restarting level-set solver.
//!
//! A run keeps `K + 1` subroutine instances, one per level parameter of a
//! level-set sequence, and advances them in lockstep. Whenever some instance
//! reduces its subproblem objective below the trigger fraction `B` of its
//! restart-scoped start value, the smallest such index restarts: it adopts
//! its reported solution as the new start point, the level parameters above
//! it are recomputed through the chain rule, and those instances reset. The
//! best epsilon-feasible solution seen at restarts is the output.
//!
//! [`reference_run`] implements the sequential oracle variant that needs the
//! true optimal value; it exists for tests and diagnostics.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fom::{method_for, FomConfig, FomMode, FomState};
use crate::levelset::{
    compute_surrogates, eval_p_parts, init_level_sequence, LevelSequence, SurrogateBundle,
};
use crate::passes::{pass_increment, EvalEvent, PassMeter};
use crate::problem::ProblemInstance;
use crate::trace::{TraceRecord, TraceSink};

/// Full solver configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, Serialize)]
#[serde(default)]
pub struct SolverConfig {
    pub fom: FomConfig,
    /// Target accuracy; also the feasibility tolerance of the output guard.
    pub epsilon: f64,
    pub mode: FomMode,
    /// Advance the instances of one outer iteration across worker threads.
    /// Results are bitwise identical to the sequential path.
    pub parallel: bool,
    /// Optional cap on cumulative data passes; checked between outer
    /// iterations.
    pub pass_budget: Option<u64>,
    /// Pass count carried in from preparatory work (e.g. a warm start).
    pub pass_offset: u64,
    /// Stop once the best solution is feasible and the last instance's
    /// subproblem value is below epsilon. Off by default: without the true
    /// optimal value the optimality half is not certifiable.
    pub early_exit: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            fom: FomConfig::default(),
            epsilon: 1e-3,
            mode: FomMode::Sgd,
            parallel: false,
            pass_budget: None,
            pass_offset: 0,
            early_exit: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.fom.validate()?;
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {} must be positive",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// One restart event, kept for diagnostics and tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RestartEvent {
    pub outer_iter: u64,
    pub k_prime: usize,
    /// `P(x0; r)` of the restarted instance before and after the reset.
    pub p0_before: f64,
    pub p0_after: f64,
    /// How many restarts this index has now seen.
    pub epoch: u64,
}

/// Mutable run state: the instances, their levels, and the counters.
#[derive(Debug, Clone)]
pub struct RlsState {
    pub instances: Vec<FomState>,
    /// `r_0..r_K`; `r_0` is never rewritten.
    pub levels: Vec<f64>,
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub g_best: f64,
    pub outer_iters: u64,
    pub fom_iters: u64,
    pub passes: u64,
    pub restarts_per_index: Vec<u64>,
    pub total_restarts: u64,
    /// Instances that satisfied the trigger across all scans (the scan stops
    /// at the smallest, so this can exceed the restart count).
    pub trigger_events: u64,
    pub last_kprime: Option<usize>,
    pub restart_log: Vec<RestartEvent>,
    pub surrogates: SurrogateBundle,
}

impl RlsState {
    /// Sizes the run from the surrogates at `(x_ini, r_ini)` and builds the
    /// initial chain with every instance bound to `x_ini`.
    pub fn init(
        inst: &ProblemInstance,
        x_ini: &[f64],
        r_ini: f64,
        cfg: &SolverConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let x0 = inst.project(x_ini)?;
        let surrogates =
            compute_surrogates(inst, &x0, r_ini, cfg.fom.alpha, cfg.epsilon)?;
        let k = surrogates.k_tilde;

        let mut meter = PassMeter::new(inst.metadata.pass_model);
        meter.count = cfg.pass_offset;
        let seq = init_level_sequence(inst, &x0, r_ini, cfg.fom.alpha, k)?;
        let parts = eval_p_parts(inst, &x0, r_ini)?;
        meter.bump(EvalEvent::PValue);

        let method = method_for(cfg.mode);
        let levels: Vec<f64> = seq.entries.iter().map(|(_, r)| *r).collect();
        let instances: Vec<FomState> = levels
            .iter()
            .map(|&r_k| {
                let p0 = (parts.objective_value - r_k).max(parts.constraint_value);
                method.reset_from_value(inst, x0.clone(), &cfg.fom, p0)
            })
            .collect();

        Ok(RlsState {
            instances,
            levels,
            x_best: x0,
            f_best: parts.objective_value,
            g_best: parts.constraint_value,
            outer_iters: 0,
            fom_iters: 0,
            passes: meter.count,
            restarts_per_index: vec![0; k + 1],
            total_restarts: 0,
            trigger_events: 0,
            last_kprime: None,
            restart_log: Vec::new(),
            surrogates,
        })
    }

    /// Advances every instance one subroutine iteration, then executes a
    /// restart at the smallest triggered index, if any. Returns that index.
    pub fn outer_iteration(
        &mut self,
        inst: &ProblemInstance,
        cfg: &SolverConfig,
    ) -> Result<Option<usize>> {
        let method = method_for(cfg.mode);
        let model = inst.metadata.pass_model;
        let fom_cfg = cfg.fom;

        // instance updates are independent; pass counts are collected per
        // instance and summed in index order so both paths agree bitwise
        let pass_counts: Vec<Result<u64>> = if cfg.parallel {
            self.instances
                .par_iter_mut()
                .zip(self.levels.par_iter())
                .map(|(state, &r)| {
                    let mut m = PassMeter::new(model);
                    method.iterate(state, inst, r, &fom_cfg, &mut m)?;
                    Ok(m.count)
                })
                .collect()
        } else {
            self.instances
                .iter_mut()
                .zip(self.levels.iter())
                .map(|(state, &r)| {
                    let mut m = PassMeter::new(model);
                    method.iterate(state, inst, r, &fom_cfg, &mut m)?;
                    Ok(m.count)
                })
                .collect()
        };
        for c in pass_counts {
            self.passes += c?;
        }
        self.fom_iters += self.instances.len() as u64;
        self.outer_iters += 1;

        let big_b = cfg.fom.big_b;
        let mut k_prime = None;
        for (k, st) in self.instances.iter().enumerate() {
            if st.p0 >= 0.0 && st.best_p <= big_b * st.p0 {
                self.trigger_events += 1;
                if k_prime.is_none() {
                    k_prime = Some(k);
                }
            }
        }
        if let Some(kp) = k_prime {
            self.execute_restart(inst, kp, cfg)?;
        }
        Ok(k_prime)
    }

    /// Smallest index whose instance currently satisfies the restart
    /// trigger, scanning from zero.
    pub fn first_triggered(&self, big_b: f64) -> Option<usize> {
        self.instances
            .iter()
            .position(|st| st.p0 >= 0.0 && st.best_p <= big_b * st.p0)
    }

    /// Executes a restart at `k_prime`: the reported solution becomes that
    /// instance's start point, levels above `k_prime` are rebuilt through the
    /// chain rule, instances from `k_prime` up reset, and the best-solution
    /// guard considers the reported solution. `r_{k_prime}` itself and all
    /// instances below are untouched.
    pub fn execute_restart(
        &mut self,
        inst: &ProblemInstance,
        k_prime: usize,
        cfg: &SolverConfig,
    ) -> Result<()> {
        let method = method_for(cfg.mode);
        let model = inst.metadata.pass_model;
        let last = self.levels.len() - 1;

        let candidate = self.instances[k_prime].best_x.clone();
        let p0_before = self.instances[k_prime].p0;
        let parts = eval_p_parts(inst, &candidate, self.levels[k_prime])?;
        self.passes += pass_increment(model, EvalEvent::PValue);
        let p0_after = parts.value;

        if parts.constraint_value <= cfg.epsilon && parts.objective_value < self.f_best {
            self.x_best = candidate.clone();
            self.f_best = parts.objective_value;
            self.g_best = parts.constraint_value;
        }

        let mut p0_prev = p0_after;
        for k in k_prime..=last {
            let p0_k = if k == k_prime {
                p0_after
            } else {
                self.levels[k] = self.levels[k - 1] + cfg.fom.alpha * p0_prev;
                let parts_k = eval_p_parts(inst, &self.instances[k].x0, self.levels[k])?;
                self.passes += pass_increment(model, EvalEvent::PValue);
                parts_k.value
            };
            let x0_k = if k == k_prime {
                candidate.clone()
            } else {
                self.instances[k].x0.clone()
            };
            self.instances[k] = method.reset_from_value(inst, x0_k, &cfg.fom, p0_k);
            p0_prev = p0_k;
        }

        self.restarts_per_index[k_prime] += 1;
        self.total_restarts += 1;
        self.last_kprime = Some(k_prime);
        self.restart_log.push(RestartEvent {
            outer_iter: self.outer_iters,
            k_prime,
            p0_before,
            p0_after,
            epoch: self.restarts_per_index[k_prime],
        });
        Ok(())
    }

    /// View of the current `(x_k0, r_k)` chain.
    pub fn level_sequence(&self, alpha: f64) -> LevelSequence {
        LevelSequence {
            alpha,
            entries: self
                .instances
                .iter()
                .zip(&self.levels)
                .map(|(st, &r)| (st.x0.clone(), r))
                .collect(),
        }
    }

    /// Smallest index with `r_k < f*` but the sufficient-progress condition
    /// `alpha P(x_k0; r_k) < f* - r_k` violated. Needs the true optimal
    /// value; diagnostic only.
    pub fn critical_index(
        &self,
        inst: &ProblemInstance,
        f_star: f64,
        alpha: f64,
    ) -> Result<Option<usize>> {
        for (k, (st, &r)) in self.instances.iter().zip(&self.levels).enumerate() {
            if r < f_star {
                let p = eval_p_parts(inst, &st.x0, r)?.value;
                if alpha * p >= f_star - r {
                    return Ok(Some(k));
                }
            }
        }
        Ok(None)
    }

    pub fn trace_record(&self, inst: &ProblemInstance) -> TraceRecord {
        TraceRecord {
            outer_iter: self.outer_iters,
            fom_iters: self.fom_iters,
            data_passes: self.passes,
            f_best: self.f_best,
            g_best: self.g_best,
            p_at_fstar: inst
                .metadata
                .f_star
                .map(|fs| (self.f_best - fs).max(self.g_best)),
            restarts: self.total_restarts,
            last_kprime: self.last_kprime,
            r0: self.levels[0],
        }
    }

    fn zero_steps(&self) -> u64 {
        self.instances.iter().map(|s| s.zero_steps).sum()
    }
}

/// Final report of a run.
#[derive(Debug, Clone, Serialize)]
pub struct SolverReport {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub g_best: f64,
    pub outer_iters: u64,
    pub fom_iters: u64,
    pub data_passes: u64,
    pub restarts: u64,
    pub trigger_events: u64,
    pub zero_steps: u64,
    /// Number of subroutine instances (K + 1).
    pub num_instances: usize,
    pub surrogates: SurrogateBundle,
    pub restart_log: Vec<RestartEvent>,
    pub trace_rows: u64,
}

/// Runs the solver for `ceil(budget_i / (K + 1))` outer iterations, emitting
/// one trace row per outer iteration. A configured pass budget stops the run
/// early once cumulative passes reach it.
pub fn run(
    inst: &ProblemInstance,
    x_ini: &[f64],
    r_ini: f64,
    cfg: &SolverConfig,
    budget_i: u64,
    sink: &mut dyn TraceSink,
) -> Result<SolverReport> {
    let mut state = RlsState::init(inst, x_ini, r_ini, cfg)?;
    let per_outer = state.instances.len() as u64;
    let outer_budget = budget_i.div_ceil(per_outer);

    let mut rows = 0u64;
    for _ in 0..outer_budget {
        if let Some(pb) = cfg.pass_budget {
            if state.passes >= pb {
                break;
            }
        }
        state.outer_iteration(inst, cfg)?;
        sink.record(&state.trace_record(inst))?;
        rows += 1;
        if cfg.early_exit
            && state.g_best <= cfg.epsilon
            && state.instances[state.instances.len() - 1].best_p <= cfg.epsilon
        {
            break;
        }
    }

    Ok(SolverReport {
        x_best: state.x_best.clone(),
        f_best: state.f_best,
        g_best: state.g_best,
        outer_iters: state.outer_iters,
        fom_iters: state.fom_iters,
        data_passes: state.passes,
        restarts: state.total_restarts,
        trigger_events: state.trigger_events,
        zero_steps: state.zero_steps(),
        num_instances: state.instances.len(),
        surrogates: state.surrogates,
        restart_log: state.restart_log,
        trace_rows: rows,
    })
}

/// Report of the sequential oracle solver.
#[derive(Debug, Clone)]
pub struct ReferenceReport {
    pub x: Vec<f64>,
    pub f: f64,
    pub g: f64,
    /// Level parameters `r_0, r_1, ...` including the final update.
    pub levels: Vec<f64>,
    pub outer_iters: u64,
    pub inner_iters: u64,
    pub data_passes: u64,
}

/// Sequential level-set method that uses the true optimal value to decide
/// when each subproblem is solved well enough. Subgradient descent solves
/// the subproblems, warm-started across levels. Oracle mode, for tests.
pub fn reference_run(
    inst: &ProblemInstance,
    x_ini: &[f64],
    r0: f64,
    alpha: f64,
    epsilon: f64,
    f_star: f64,
    fom_cfg: &FomConfig,
    inner_cap: u64,
) -> Result<ReferenceReport> {
    fom_cfg.validate()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if r0 >= f_star {
        return Err(Error::InvalidParameter(format!(
            "r0 = {r0} must be below f_star = {f_star}"
        )));
    }
    const OUTER_SAFETY_CAP: u64 = 100_000;

    let method = method_for(FomMode::Sgd);
    let mut meter = PassMeter::new(inst.metadata.pass_model);
    let mut x = inst.project(x_ini)?;
    let mut r = r0;
    let mut levels = vec![r0];
    let mut outer = 0u64;
    let mut inner = 0u64;

    loop {
        outer += 1;
        if outer > OUTER_SAFETY_CAP {
            return Err(Error::InnerCapExceeded { cap: OUTER_SAFETY_CAP, r });
        }
        let mut st = method.reset(inst, x.clone(), r, fom_cfg, &mut meter)?;
        while !(alpha * st.best_p < f_star - r) {
            if st.t >= inner_cap {
                return Err(Error::InnerCapExceeded { cap: inner_cap, r });
            }
            method.iterate(&mut st, inst, r, fom_cfg, &mut meter)?;
            inner += 1;
        }
        let p_k = st.best_p;
        x = st.best_x;
        r += alpha * p_k;
        levels.push(r);
        if p_k <= epsilon {
            let parts = eval_p_parts(inst, &x, r)?;
            return Ok(ReferenceReport {
                x,
                f: parts.objective_value,
                g: parts.constraint_value,
                levels,
                outer_iters: outer,
                inner_iters: inner,
                data_passes: meter.count,
            });
        }
    }
}
