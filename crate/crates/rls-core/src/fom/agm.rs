//! Accelerated gradient on the exponentially smoothed level-set function,
//! with a growth line search for the local smoothness estimate.

use super::{AgmState, FirstOrderMethod, FomConfig, FomMode, FomState};
use crate::error::{Error, Result};
use crate::levelset::{eval_and_grad_p_sigma, eval_p};
use crate::passes::{EvalEvent, PassMeter};
use crate::problem::{dot, FeasibleSet, ProblemInstance};

pub struct SmoothedAccelerated;

/// One accelerated projected-gradient step with line search.
///
/// Starting from the shrunk estimate `l_hat / gamma`, the estimate grows by
/// `gamma` per trial. Each trial solves `a^2 / (A + a) = 2 / l_hat` for the
/// positive root, forms `y = (A x + a v) / (A + a)`, takes a projected
/// gradient step from `y`, and exits once
/// `l_hat <grad(x) - grad(y), x - y> >= ||grad(x) - grad(y)||^2`.
///
/// Returns `(x_hat, l_hat, a)` for the accepted trial, or an error when the
/// growth cap is exhausted.
pub fn apg_step<G>(
    mut grad: G,
    x: &[f64],
    v: &[f64],
    l_hat: f64,
    a_sum: f64,
    gamma: f64,
    set: &FeasibleSet,
    cap: u32,
) -> Result<(Vec<f64>, f64, f64)>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let grad_x = grad(x)?;
    let mut l = l_hat / gamma;
    for _ in 0..=cap {
        l *= gamma;
        // positive root of a^2/(A + a) = 2/l, written without cancellation
        let a = 1.0 / l + (1.0 / (l * l) + 2.0 * a_sum / l).sqrt();
        let denom = a_sum + a;
        let y: Vec<f64> = x
            .iter()
            .zip(v)
            .map(|(xi, vi)| (a_sum * xi + a * vi) / denom)
            .collect();
        let grad_y = grad(&y)?;
        let stepped: Vec<f64> = y.iter().zip(&grad_y).map(|(yi, gi)| yi - gi / l).collect();
        let x_hat = set.project(&stepped)?;

        let dg: Vec<f64> = grad_x.iter().zip(&grad_y).map(|(a, b)| a - b).collect();
        let dx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        if l * dot(&dg, &dx) >= dot(&dg, &dg) {
            return Ok((x_hat, l, a));
        }
    }
    Err(Error::LineSearchDiverged { l_hat: l })
}

impl SmoothedAccelerated {
    fn smoothing_parameter(inst: &ProblemInstance, cfg: &FomConfig, p0: f64) -> f64 {
        // sigma = 3 ln(m+1) / ((B - alpha) P(x0; r)); the numerator keeps its
        // m = 1 value for unconstrained instances (the smoothing is exact
        // there anyway) and the denominator is floored near convergence
        let m = inst.num_constraints().max(1) as f64;
        3.0 * (m + 1.0).ln() / ((cfg.big_b - cfg.alpha) * p0.max(cfg.epsilon_floor))
    }
}

impl FirstOrderMethod for SmoothedAccelerated {
    fn name(&self) -> &'static str {
        "agm"
    }

    fn mode(&self) -> FomMode {
        FomMode::Agm
    }

    fn reset_from_value(
        &self,
        inst: &ProblemInstance,
        x0: Vec<f64>,
        cfg: &FomConfig,
        p0: f64,
    ) -> FomState {
        let sigma = Self::smoothing_parameter(inst, cfg, p0);
        let agm = AgmState {
            sigma,
            l_hat: sigma,
            a_sum: 0.0,
            v: x0.clone(),
            grad_accum: vec![0.0; x0.len()],
        };
        FomState::fresh(FomMode::Agm, x0, p0, Some(agm))
    }

    fn iterate(
        &self,
        state: &mut FomState,
        inst: &ProblemInstance,
        r: f64,
        cfg: &FomConfig,
        meter: &mut PassMeter,
    ) -> Result<()> {
        let agm = state.agm.as_mut().expect("agm state present in agm mode");
        let sigma = agm.sigma;

        let mut grad = |pt: &[f64]| -> Result<Vec<f64>> {
            meter.bump(EvalEvent::SmoothedValueGrad);
            Ok(eval_and_grad_p_sigma(inst, pt, r, sigma)?.1)
        };

        let (x_new, l_new, a) = apg_step(
            &mut grad,
            &state.x_cur,
            &agm.v,
            agm.l_hat,
            agm.a_sum,
            cfg.gamma,
            inst.set(),
            cfg.line_search_cap,
        )?;

        // prox-center update: v = Proj(x0 - sum a_s grad_s), with the new
        // iterate's gradient included
        let grad_new = grad(&x_new)?;
        for (acc, g) in agm.grad_accum.iter_mut().zip(&grad_new) {
            *acc += a * g;
        }
        let shifted: Vec<f64> =
            state.x0.iter().zip(&agm.grad_accum).map(|(x0i, gi)| x0i - gi).collect();
        agm.v = inst.project(&shifted)?;
        agm.a_sum += a;
        agm.l_hat = l_new / cfg.gamma_d;

        // restart bookkeeping compares true P values, not smoothed ones
        let p_new = eval_p(inst, &x_new, r)?;
        meter.bump(EvalEvent::PValue);
        state.record_candidate(&x_new, p_new);
        state.x_cur = x_new;
        state.t += 1;
        Ok(())
    }
}
