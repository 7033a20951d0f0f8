//! Projected subgradient descent with the restart-scoped step rule
//! `eta_t = (B - alpha) P(x0; r) / ||xi_t||^2`.

use super::{FirstOrderMethod, FomConfig, FomMode, FomState};
use crate::error::Result;
use crate::levelset::{eval_p, subgrad_p};
use crate::passes::{EvalEvent, PassMeter};
use crate::problem::{norm_sq, ProblemInstance};

pub struct SubgradientDescent;

impl FirstOrderMethod for SubgradientDescent {
    fn name(&self) -> &'static str {
        "sgd"
    }

    fn mode(&self) -> FomMode {
        FomMode::Sgd
    }

    fn reset_from_value(
        &self,
        _inst: &ProblemInstance,
        x0: Vec<f64>,
        _cfg: &FomConfig,
        p0: f64,
    ) -> FomState {
        FomState::fresh(FomMode::Sgd, x0, p0, None)
    }

    fn iterate(
        &self,
        state: &mut FomState,
        inst: &ProblemInstance,
        r: f64,
        cfg: &FomConfig,
        meter: &mut PassMeter,
    ) -> Result<()> {
        let xi = subgrad_p(inst, &state.x_cur, r)?;
        meter.bump(EvalEvent::PSubgrad);
        let nsq = norm_sq(&xi);
        if nsq == 0.0 {
            // current point minimizes P(.; r); hold position
            state.zero_steps += 1;
            state.t += 1;
            return Ok(());
        }
        // the floor keeps the step finite when the level overshoots f* and
        // P(x0; r) is no longer positive; such instances idle until an
        // upstream restart rewrites their level
        let eta = (cfg.big_b - cfg.alpha) * state.p0.max(cfg.epsilon_floor) / nsq;
        let stepped: Vec<f64> =
            state.x_cur.iter().zip(&xi).map(|(x, g)| x - eta * g).collect();
        let x_new = inst.project(&stepped)?;
        let p_new = eval_p(inst, &x_new, r)?;
        meter.bump(EvalEvent::PValue);
        state.record_candidate(&x_new, p_new);
        state.x_cur = x_new;
        state.t += 1;
        Ok(())
    }
}
