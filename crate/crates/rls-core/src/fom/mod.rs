//! Restartable first-order subroutines.
//!
//! Each subroutine minimizes `P(.; r)` for a fixed level parameter and is
//! restartable: a reset rebinds it to a new start point and level, and all
//! step-size and smoothing constants are derived from `P(x0; r)` captured at
//! that reset. The two variants live behind [`FirstOrderMethod`] and are
//! selected by name at runtime.

mod agm;
mod sgd;

pub use agm::{apg_step, SmoothedAccelerated};
pub use sgd::SubgradientDescent;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::levelset::{eval_p_parts, PBreakdown};
use crate::passes::{EvalEvent, PassMeter};
use crate::problem::ProblemInstance;

/// Which subroutine family a state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FomMode {
    /// Projected subgradient descent (non-smooth problems).
    Sgd,
    /// Accelerated gradient on the exponentially smoothed function.
    Agm,
}

impl fmt::Display for FomMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FomMode::Sgd => "sgd",
            FomMode::Agm => "agm",
        })
    }
}

impl FromStr for FomMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(FomMode::Sgd),
            "agm" => Ok(FomMode::Agm),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

/// Shared subroutine parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FomConfig {
    pub alpha: f64,
    /// Restart trigger factor B in (alpha, 1).
    pub big_b: f64,
    /// Line-search growth factor.
    pub gamma: f64,
    /// Per-iteration shrink factor of the local smoothness estimate.
    pub gamma_d: f64,
    /// Maximum line-search growth steps before giving up.
    pub line_search_cap: u32,
    /// Floor applied to `P(x0; r)` in step-size and smoothing denominators.
    pub epsilon_floor: f64,
}

impl Default for FomConfig {
    fn default() -> Self {
        FomConfig {
            alpha: 0.5,
            big_b: 0.95,
            gamma: 2.0,
            gamma_d: 2.0,
            line_search_cap: 64,
            epsilon_floor: 1e-12,
        }
    }
}

impl FomConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < self.big_b && self.big_b < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < alpha < B < 1, got alpha = {}, B = {}",
                self.alpha, self.big_b
            )));
        }
        if !(self.gamma > 1.0 && self.gamma_d > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need gamma > 1 and gamma_d > 1, got {} and {}",
                self.gamma, self.gamma_d
            )));
        }
        if !(self.epsilon_floor > 0.0) {
            return Err(Error::InvalidParameter("epsilon_floor must be positive".into()));
        }
        Ok(())
    }
}

/// Accelerated-method extras carried between iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct AgmState {
    /// Smoothing parameter fixed at the last reset.
    pub sigma: f64,
    /// Current local smoothness estimate.
    pub l_hat: f64,
    /// Accumulated step weights `A = sum a_s`.
    pub a_sum: f64,
    /// Prox-center iterate.
    pub v: Vec<f64>,
    /// `sum a_s grad P_sigma(x_s; r)`.
    pub grad_accum: Vec<f64>,
}

/// Per-instance subroutine state, rebuilt at every restart.
#[derive(Debug, Clone, PartialEq)]
pub struct FomState {
    pub mode: FomMode,
    /// Start point of the current restart epoch.
    pub x0: Vec<f64>,
    /// Latest raw iterate.
    pub x_cur: Vec<f64>,
    /// Iterations since the last reset.
    pub t: u64,
    /// `P(x0; r)` captured at the reset.
    pub p0: f64,
    /// Historically best iterate of this epoch; this is the solution the
    /// subroutine reports outward.
    pub best_x: Vec<f64>,
    /// `P(best_x; r)`.
    pub best_p: f64,
    /// Iterations that hit a zero subgradient (current point minimizes P).
    pub zero_steps: u64,
    pub agm: Option<AgmState>,
}

impl FomState {
    fn fresh(mode: FomMode, x0: Vec<f64>, p0: f64, agm: Option<AgmState>) -> Self {
        FomState {
            mode,
            x_cur: x0.clone(),
            best_x: x0.clone(),
            x0,
            t: 0,
            p0,
            best_p: p0,
            zero_steps: 0,
            agm,
        }
    }

    fn record_candidate(&mut self, x: &[f64], p: f64) {
        if p < self.best_p {
            self.best_p = p;
            self.best_x = x.to_vec();
        }
    }
}

/// A restartable first-order subroutine.
pub trait FirstOrderMethod: Send + Sync {
    /// Registry name ("sgd" or "agm").
    fn name(&self) -> &'static str;

    fn mode(&self) -> FomMode;

    /// Binds the subroutine to `(x0, r)`, evaluating `P(x0; r)` once.
    fn reset(
        &self,
        inst: &ProblemInstance,
        x0: Vec<f64>,
        r: f64,
        cfg: &FomConfig,
        meter: &mut PassMeter,
    ) -> Result<FomState> {
        let parts: PBreakdown = eval_p_parts(inst, &x0, r)?;
        meter.bump(EvalEvent::PValue);
        Ok(self.reset_from_value(inst, x0, cfg, parts.value))
    }

    /// Reset with a precomputed `P(x0; r)`; used when the caller already has
    /// the value in hand.
    fn reset_from_value(
        &self,
        inst: &ProblemInstance,
        x0: Vec<f64>,
        cfg: &FomConfig,
        p0: f64,
    ) -> FomState;

    /// Advances the state by one iteration at the fixed level `r`.
    fn iterate(
        &self,
        state: &mut FomState,
        inst: &ProblemInstance,
        r: f64,
        cfg: &FomConfig,
        meter: &mut PassMeter,
    ) -> Result<()>;
}

/// All registered subroutines.
pub fn registered_methods() -> &'static [&'static dyn FirstOrderMethod] {
    static METHODS: [&dyn FirstOrderMethod; 2] = [&SubgradientDescent, &SmoothedAccelerated];
    &METHODS
}

/// Looks a subroutine up by its registry name.
pub fn method_by_name(name: &str) -> Result<&'static dyn FirstOrderMethod> {
    registered_methods()
        .iter()
        .copied()
        .find(|m| m.name() == name)
        .ok_or_else(|| Error::UnknownMethod(name.to_string()))
}

pub fn method_for(mode: FomMode) -> &'static dyn FirstOrderMethod {
    registered_methods()
        .iter()
        .copied()
        .find(|m| m.mode() == mode)
        .expect("every mode has a registered method")
}

/// Restart trigger: `P(x0; r) >= 0` and the reported solution satisfies
/// `P <= B P(x0; r)`. The reported solution is the historically best iterate,
/// whose `P` value the state maintains.
pub fn check_restart_trigger(state: &FomState, big_b: f64) -> bool {
    state.p0 >= 0.0 && state.best_p <= big_b * state.p0
}
