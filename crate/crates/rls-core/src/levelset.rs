//! Level-set machinery.
//!
//! The level-set function of an instance is `P(x; r) = max(f0(x) - r, g(x))`.
//! A point with `P(x; r) <= eps` for some `r < f*` is eps-optimal and
//! eps-feasible, so the solvers drive `r` toward `f*` while first-order
//! subroutines reduce `P(.; r)`. This module provides `P`, its subgradient,
//! the exponentially smoothed variant used by the accelerated subroutine,
//! level-parameter chains, and the computable surrogates that size a run.

use crate::error::{Error, Result};
use crate::problem::ProblemInstance;

/// Which term of the max achieves `P(x; r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PTerm {
    Objective,
    Constraint(usize),
}

/// Value of `P(x; r)` together with the pieces it was built from.
#[derive(Debug, Clone, Copy)]
pub struct PBreakdown {
    pub value: f64,
    /// `f0(x)`
    pub objective_value: f64,
    /// `g(x)`, `-inf` when there are no constraints
    pub constraint_value: f64,
    pub constraint_index: Option<usize>,
    pub achiever: PTerm,
}

/// `P(x; r)` and its parts. Ties between the objective term and the best
/// constraint go to the objective; constraint ties go to the smallest index.
pub fn eval_p_parts(inst: &ProblemInstance, x: &[f64], r: f64) -> Result<PBreakdown> {
    let f0 = inst.eval_objective(x)?;
    let (g, gi) = inst.eval_max_constraint(x)?;
    let shifted = f0 - r;
    let (value, achiever) = if shifted >= g {
        (shifted, PTerm::Objective)
    } else {
        (g, PTerm::Constraint(gi.expect("g > -inf implies a constraint")))
    };
    Ok(PBreakdown { value, objective_value: f0, constraint_value: g, constraint_index: gi, achiever })
}

/// `P(x; r) = max(f0(x) - r, g(x))`; reduces to `f0(x) - r` when `m = 0`.
pub fn eval_p(inst: &ProblemInstance, x: &[f64], r: f64) -> Result<f64> {
    Ok(eval_p_parts(inst, x, r)?.value)
}

/// A subgradient of `P(.; r)` at `x`: the subgradient of the achieving term.
pub fn subgrad_p(inst: &ProblemInstance, x: &[f64], r: f64) -> Result<Vec<f64>> {
    let parts = eval_p_parts(inst, x, r)?;
    Ok(match parts.achiever {
        PTerm::Objective => inst.objective().subgradient(x),
        PTerm::Constraint(i) => inst.constraints()[i].subgradient(x),
    })
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("sigma = {sigma} must be positive")))
    }
}

fn smoothed_terms(inst: &ProblemInstance, x: &[f64], r: f64) -> Result<Vec<f64>> {
    let f0 = inst.eval_objective(x)?;
    let mut terms = Vec::with_capacity(inst.num_constraints() + 1);
    terms.push(f0 - r);
    for c in inst.constraints() {
        terms.push(c.value(x));
    }
    Ok(terms)
}

/// Exponentially smoothed level-set function
/// `(1/sigma) ln(exp(sigma (f0(x)-r)) + sum_i exp(sigma f_i(x)))`,
/// computed with the max subtracted before exponentiation.
pub fn eval_p_sigma(inst: &ProblemInstance, x: &[f64], r: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    let terms = smoothed_terms(inst, x, r)?;
    let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (sigma * (t - mx)).exp()).sum();
    Ok(mx + sum.ln() / sigma)
}

/// Gradient of the smoothed function: the softmax-weighted combination of the
/// component (sub)gradients. Piecewise-linear components fall back to the same
/// deterministic subgradient rule as [`subgrad_p`] at their kinks.
pub fn grad_p_sigma(inst: &ProblemInstance, x: &[f64], r: f64, sigma: f64) -> Result<Vec<f64>> {
    Ok(eval_and_grad_p_sigma(inst, x, r, sigma)?.1)
}

/// Smoothed value and gradient in one evaluation.
pub fn eval_and_grad_p_sigma(
    inst: &ProblemInstance,
    x: &[f64],
    r: f64,
    sigma: f64,
) -> Result<(f64, Vec<f64>)> {
    check_sigma(sigma)?;
    let terms = smoothed_terms(inst, x, r)?;
    let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = terms.iter().map(|t| (sigma * (t - mx)).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let value = mx + sum.ln() / sigma;

    let mut grad = vec![0.0; x.len()];
    for (j, &e) in exps.iter().enumerate() {
        let w = e / sum;
        if w == 0.0 {
            continue;
        }
        let sub = if j == 0 {
            inst.objective().subgradient(x)
        } else {
            inst.constraints()[j - 1].subgradient(x)
        };
        for (g, s) in grad.iter_mut().zip(&sub) {
            *g += w * s;
        }
    }
    Ok((value, grad))
}

/// Level-parameter chain `r_{k+1} = r_k + alpha P(x_k0; r_k)` with the points
/// it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSequence {
    pub alpha: f64,
    /// `(x_k0, r_k)` for `k = 0..=K`
    pub entries: Vec<(Vec<f64>, f64)>,
}

impl LevelSequence {
    /// Largest `|r_{k+1} - r_k - alpha P(x_k0; r_k)|` over the chain.
    pub fn max_chain_residual(&self, inst: &ProblemInstance) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for w in self.entries.windows(2) {
            let (ref x, r) = w[0];
            let (_, r_next) = w[1];
            let p = eval_p(inst, x, r)?;
            worst = worst.max((r_next - r - self.alpha * p).abs());
        }
        Ok(worst)
    }
}

/// Computable surrogates for the condition measure and the instance count,
/// built from a strictly feasible point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SurrogateBundle {
    /// `r_tilde = f(x_tilde) - g(x_tilde)`, an upper bound on `f*`.
    pub r_tilde: f64,
    /// `theta_tilde = g(x_tilde) / (r_ini - r_tilde)`, a lower bound on theta.
    pub theta_tilde: f64,
    /// Number of level parameters beyond index zero; the run keeps
    /// `k_tilde + 1` subroutine instances.
    pub k_tilde: usize,
}

fn check_alpha_eps(alpha: f64, epsilon: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be positive")));
    }
    Ok(())
}

/// Surrogates `(r_tilde, theta_tilde, K_tilde)` from a strictly feasible
/// point. Requires at least one constraint, `g(x_tilde) < 0`, and
/// `r_ini < r_tilde`.
pub fn compute_surrogates(
    inst: &ProblemInstance,
    x_tilde: &[f64],
    r_ini: f64,
    alpha: f64,
    epsilon: f64,
) -> Result<SurrogateBundle> {
    check_alpha_eps(alpha, epsilon)?;
    if inst.num_constraints() == 0 {
        return Err(Error::InvalidParameter(
            "surrogates need at least one constraint (g is -inf without any)".into(),
        ));
    }
    let f = inst.eval_objective(x_tilde)?;
    let (g, _) = inst.eval_max_constraint(x_tilde)?;
    if !(g < 0.0) {
        return Err(Error::NotStrictlyFeasible { g });
    }
    let r_tilde = f - g;
    if r_ini >= r_tilde {
        return Err(Error::LevelTooLarge { r_ini, r_tilde });
    }
    let theta_tilde = g / (r_ini - r_tilde);
    let raw = (1.0 / (alpha * theta_tilde)) * ((r_tilde - r_ini) / (alpha * epsilon)).ln();
    let k_tilde = ceil_at_least_one(raw);
    Ok(SurrogateBundle { r_tilde, theta_tilde, k_tilde })
}

fn ceil_at_least_one(raw: f64) -> usize {
    if !raw.is_finite() || raw <= 1.0 {
        1
    } else {
        raw.ceil() as usize
    }
}

/// Builds the initial chain: all points equal to `x_ini` and
/// `r_{k+1} = r_k + alpha P(x_ini; r_k)` for `k < K`.
pub fn init_level_sequence(
    inst: &ProblemInstance,
    x_ini: &[f64],
    r_ini: f64,
    alpha: f64,
    k: usize,
) -> Result<LevelSequence> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    // f0 and g do not depend on r, so one evaluation covers the whole chain
    let parts = eval_p_parts(inst, x_ini, r_ini)?;
    let mut entries = Vec::with_capacity(k + 1);
    let mut r = r_ini;
    for _ in 0..=k {
        entries.push((x_ini.to_vec(), r));
        let p = (parts.objective_value - r).max(parts.constraint_value);
        r += alpha * p;
    }
    Ok(LevelSequence { alpha, entries })
}

/// Outer-iteration bound of the oracle level-set method,
/// `ceil(ln((f* - r0)/(alpha eps)) / (alpha theta))`, clamped to at least 1.
/// Diagnostic; requires the true condition measure.
pub fn compute_hat_k(theta: f64, f_star: f64, r0: f64, alpha: f64, epsilon: f64) -> Result<u64> {
    check_alpha_eps(alpha, epsilon)?;
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidParameter(format!("theta = {theta} must lie in (0, 1]")));
    }
    if r0 >= f_star {
        return Err(Error::InvalidParameter(format!(
            "r0 = {r0} must be below f_star = {f_star}"
        )));
    }
    let raw = ((f_star - r0) / (alpha * epsilon)).ln() / (alpha * theta);
    Ok(ceil_at_least_one(raw) as u64)
}

fn check_nfom_common(m_bound: f64, growth: f64, d: f64, alpha: f64, big_b: f64, epsilon: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < big_b && big_b < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < alpha < B < 1, got alpha = {alpha}, B = {big_b}"
        )));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be positive")));
    }
    if !(m_bound > 0.0 && growth > 0.0 && d >= 1.0) {
        return Err(Error::InvalidParameter(
            "need M > 0, G > 0 and d >= 1 for the iteration cap".into(),
        ));
    }
    Ok(())
}

/// Per-restart iteration cap of the subgradient subroutine:
/// `ceil(M^2 G^(2/d) / ((B - alpha)^2 eps^(2 - 2/d))) - 1`. Diagnostic.
pub fn compute_nfom_nonsmooth(
    m_bound: f64,
    growth: f64,
    d: f64,
    alpha: f64,
    big_b: f64,
    epsilon: f64,
) -> Result<u64> {
    check_nfom_common(m_bound, growth, d, alpha, big_b, epsilon)?;
    let raw = m_bound.powi(2) * growth.powf(2.0 / d)
        / ((big_b - alpha).powi(2) * epsilon.powf(2.0 - 2.0 / d));
    Ok((raw.ceil() as u64).saturating_sub(1))
}

/// Per-restart iteration cap of the smoothed accelerated subroutine:
/// the larger of the smoothing-driven and curvature-driven terms. Diagnostic.
#[allow(clippy::too_many_arguments)]
pub fn compute_nfom_smooth(
    m_bound: f64,
    growth: f64,
    d: f64,
    smooth_l: f64,
    alpha: f64,
    big_b: f64,
    epsilon: f64,
    gamma: f64,
    num_constraints: usize,
) -> Result<u64> {
    check_nfom_common(m_bound, growth, d, alpha, big_b, epsilon)?;
    if !(gamma > 1.0) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must exceed 1")));
    }
    if !(smooth_l >= 0.0) {
        return Err(Error::InvalidParameter(format!("L = {smooth_l} must be >= 0")));
    }
    let ln_m1 = ((num_constraints as f64) + 1.0).ln();
    let first = 3.0 * (gamma * ln_m1).sqrt() * m_bound * growth.powf(1.0 / d)
        / ((big_b - alpha) * epsilon.powf(1.0 - 1.0 / d));
    let second =
        (3.0 * gamma * smooth_l * growth.powf(2.0 / d) / ((big_b - alpha) * epsilon.powf(1.0 - 2.0 / d)))
            .sqrt();
    Ok(first.max(second).ceil() as u64)
}
