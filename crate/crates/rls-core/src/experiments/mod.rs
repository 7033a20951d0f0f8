//! Experiment builders, brute-force oracles, and trace metrics.

mod fairness;

pub use fairness::{
    build_fairness_instance, build_fairness_instance_with, build_fairness_from_splits,
    generate_synthetic_fairness, load_fairness_csv, split_dataset, CsvSchema, FairnessDataset,
    FairnessOptions, Group,
};

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fom::FomConfig;
use crate::levelset::eval_p;
use crate::passes::{pass_increment, EvalEvent, PassMeter, PassModel};
use crate::problem::{
    norm_sq, ConvexFunction, FeasibleSet, InstanceMetadata, ProblemInstance,
};
use crate::trace::TraceRecord;

/// Feasibility threshold used when estimating the optimal value from a trace.
pub const FSTAR_FEASIBILITY_TOL: f64 = 1e-5;

/// The simulated linear program: minimize `-x1` over a regular 20-gon whose
/// constraints are scaled by `rho`. Scaling leaves the feasible set and the
/// optimum alone but moves the error-bound constant, `G = 2 / rho`.
pub fn build_ring_lp(rho: f64) -> Result<ProblemInstance> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidParameter(format!("rho = {rho} must be positive")));
    }
    let constraints = (0..20)
        .map(|i| {
            let theta = (i as f64) * PI / 10.0;
            ConvexFunction::linear(vec![rho * theta.cos(), rho * theta.sin()], -rho)
        })
        .collect();
    ProblemInstance::new(
        ConvexFunction::linear(vec![-1.0, 0.0], 0.0),
        constraints,
        FeasibleSet::AllSpace,
        2,
        InstanceMetadata {
            f_star: Some(-1.0),
            x_star: Some(vec![1.0, 0.0]),
            ebc_d: Some(1.0),
            ebc_g: Some(2.0 / rho),
            subgrad_bound: Some(rho.max(1.0)),
            smooth_l: Some(0.0),
            strictly_feasible_point: Some(vec![0.0, 0.0]),
            pass_model: PassModel::PerEvaluation,
        },
    )
}

/// Rectangular evaluation grid for the 2-D brute-force oracles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x1_range: (f64, f64),
    pub x2_range: (f64, f64),
    pub points_per_axis: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { x1_range: (-2.0, 2.0), x2_range: (-2.0, 2.0), points_per_axis: 2001 }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if self.points_per_axis < 2
            || !(self.x1_range.0 < self.x1_range.1)
            || !(self.x2_range.0 < self.x2_range.1)
        {
            return Err(Error::InvalidParameter("degenerate grid specification".into()));
        }
        Ok(())
    }

    fn coord(range: (f64, f64), i: usize, n: usize) -> f64 {
        range.0 + (i as f64) * (range.1 - range.0) / ((n - 1) as f64)
    }
}

/// Minimizes `f` over the grid. Rows are scanned in parallel but reduced in
/// index order; ties keep the first point in row-major scan order.
pub fn grid_minimize<F>(f: F, spec: &GridSpec) -> (f64, [f64; 2])
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let n = spec.points_per_axis;
    let rows: Vec<(f64, [f64; 2])> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x1 = GridSpec::coord(spec.x1_range, i, n);
            let mut best = f64::INFINITY;
            let mut arg = [x1, GridSpec::coord(spec.x2_range, 0, n)];
            for j in 0..n {
                let x2 = GridSpec::coord(spec.x2_range, j, n);
                let v = f(x1, x2);
                if v < best {
                    best = v;
                    arg = [x1, x2];
                }
            }
            (best, arg)
        })
        .collect();
    let mut best = f64::INFINITY;
    let mut arg = [0.0, 0.0];
    for (v, a) in rows {
        if v < best {
            best = v;
            arg = a;
        }
    }
    (best, arg)
}

/// Grid approximation of the level-set function `H(r) = min_x P(x; r)` for a
/// 2-D instance. Accuracy is bounded by the grid step times the local
/// Lipschitz constant, and by how much of the true minimizer's neighborhood
/// the grid covers.
pub fn brute_force_h(inst: &ProblemInstance, r: f64, spec: &GridSpec) -> Result<f64> {
    Ok(brute_force_h_batch(inst, &[r], spec)?[0])
}

/// Evaluates the grid oracle for several level parameters in one sweep;
/// `f0` and `g` do not depend on `r`, so the sweep is shared.
pub fn brute_force_h_batch(
    inst: &ProblemInstance,
    rs: &[f64],
    spec: &GridSpec,
) -> Result<Vec<f64>> {
    if inst.dimension() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: inst.dimension() });
    }
    spec.validate()?;
    let n = spec.points_per_axis;
    let objective = inst.objective();
    let constraints = inst.constraints();
    let row_mins: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x1 = GridSpec::coord(spec.x1_range, i, n);
            let mut mins = vec![f64::INFINITY; rs.len()];
            for j in 0..n {
                let x2 = GridSpec::coord(spec.x2_range, j, n);
                let pt = [x1, x2];
                let f0 = objective.value(&pt);
                let mut g = f64::NEG_INFINITY;
                for c in constraints {
                    g = g.max(c.value(&pt));
                }
                for (m, &r) in mins.iter_mut().zip(rs) {
                    *m = m.min((f0 - r).max(g));
                }
            }
            mins
        })
        .collect();
    let mut out = vec![f64::INFINITY; rs.len()];
    for row in row_mins {
        for (o, v) in out.iter_mut().zip(row) {
            *o = o.min(v);
        }
    }
    Ok(out)
}

/// Grid minimizer of `P(.; r)` with its attaining point.
pub fn grid_minimizer_p(
    inst: &ProblemInstance,
    r: f64,
    spec: &GridSpec,
) -> Result<(f64, [f64; 2])> {
    if inst.dimension() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: inst.dimension() });
    }
    spec.validate()?;
    Ok(grid_minimize(
        |x1, x2| eval_p(inst, &[x1, x2], r).expect("grid point evaluation"),
        spec,
    ))
}

/// Runs subgradient descent on the constraint bundle `g` for a fixed number
/// of iterations and returns the best iterate found. The step rule mirrors
/// the solver's, scaled by `|g|` at the start point. The caller must verify
/// strict feasibility of the result before relying on it.
pub fn warm_start_feasible(
    inst: &ProblemInstance,
    x_start: &[f64],
    iterations: u64,
    cfg: &FomConfig,
    meter: &mut PassMeter,
) -> Result<Vec<f64>> {
    if inst.num_constraints() == 0 {
        return Err(Error::InvalidParameter(
            "warm start needs at least one constraint".into(),
        ));
    }
    cfg.validate()?;
    let mut x = inst.project(x_start)?;
    let (g0, _) = inst.eval_max_constraint(&x)?;
    meter.bump(EvalEvent::ConstraintValue);
    let scale = (cfg.big_b - cfg.alpha) * g0.abs().max(cfg.epsilon_floor);
    let mut best_x = x.clone();
    let mut best_g = g0;
    for _ in 0..iterations {
        let (_, idx) = inst.eval_max_constraint(&x)?;
        let xi = inst.constraints()[idx.expect("m >= 1")].subgradient(&x);
        meter.bump(EvalEvent::ConstraintSubgrad);
        let nsq = norm_sq(&xi);
        if nsq == 0.0 {
            break;
        }
        let eta = scale / nsq;
        let stepped: Vec<f64> = x.iter().zip(&xi).map(|(v, s)| v - eta * s).collect();
        x = inst.project(&stepped)?;
        let (g, _) = inst.eval_max_constraint(&x)?;
        meter.bump(EvalEvent::ConstraintValue);
        if g < best_g {
            best_g = g;
            best_x = x.clone();
        }
    }
    Ok(best_x)
}

/// Smallest objective value among trace rows whose solution was feasible to
/// within [`FSTAR_FEASIBILITY_TOL`].
pub fn estimate_fstar(records: &[TraceRecord]) -> Result<f64> {
    let mut best: Option<f64> = None;
    for rec in records {
        if rec.g_best <= FSTAR_FEASIBILITY_TOL {
            best = Some(best.map_or(rec.f_best, |b: f64| b.min(rec.f_best)));
        }
    }
    best.ok_or(Error::NoFeasibleCandidates { tol: FSTAR_FEASIBILITY_TOL })
}

/// Pass increment of one evaluation event; see [`crate::passes`] for the
/// conventions.
pub fn count_data_pass(model: PassModel, event: EvalEvent) -> u64 {
    pass_increment(model, event)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_scaling() {
        for (rho, g) in [(1.0, 2.0), (2.0, 1.0), (5.0, 0.4)] {
            let inst = build_ring_lp(rho).unwrap();
            assert_eq!(inst.metadata.ebc_g, Some(g));
            assert_eq!(inst.num_constraints(), 20);
            // the strictly feasible origin has margin exactly -rho
            let (gv, _) = inst.eval_max_constraint(&[0.0, 0.0]).unwrap();
            assert_eq!(gv, -rho);
        }
        assert!(build_ring_lp(0.0).is_err());
        assert!(build_ring_lp(-1.0).is_err());
    }

    #[test]
    fn ring_boundary_constraint() {
        let inst = build_ring_lp(1.0).unwrap();
        // constraint 5 is active at (0, 1)
        let v = inst.constraints()[5].value(&[0.0, 1.0]);
        assert!(v.abs() <= 1e-12);
    }

    #[test]
    fn grid_oracle_root_and_balance() {
        let ring = build_ring_lp(1.0).unwrap();
        let spec = GridSpec::default();
        let hs = brute_force_h_batch(&ring, &[-1.0, -2.0], &spec).unwrap();
        assert!(hs[0].abs() <= 2e-3, "H(f*) = {}", hs[0]);
        assert!((hs[1] - 0.5).abs() <= 2e-3, "H(-2) = {}", hs[1]);
    }

    #[test]
    fn grid_oracle_condition_ratio() {
        // the balance point (1 - r)/2 must lie on the grid, so widen the
        // sweep for the far-out levels
        let ring = build_ring_lp(1.0).unwrap();
        let spec = GridSpec {
            x1_range: (-2.0, 6.0),
            x2_range: (-2.0, 2.0),
            points_per_axis: 4001,
        };
        let rs = [-11.0, -8.0, -5.0, -3.0, -2.0];
        let hs = brute_force_h_batch(&ring, &rs, &spec).unwrap();
        for (&r, &h) in rs.iter().zip(&hs) {
            let ratio = h / (-1.0 - r);
            assert!((ratio - 0.5).abs() <= 1e-3, "ratio at r = {r}: {ratio}");
        }
    }

    #[test]
    fn grid_oracle_levelset_properties() {
        let ring = build_ring_lp(1.0).unwrap();
        let spec =
            GridSpec { x1_range: (-2.0, 6.0), x2_range: (-2.0, 2.0), points_per_axis: 1601 };
        let rs = [-3.0, -2.0, -1.5, -1.0, -0.5, 0.0, 1.0];
        let hs = brute_force_h_batch(&ring, &rs, &spec).unwrap();
        // non-increasing in r, positive below f*, negative above
        for w in hs.windows(2) {
            assert!(w[1] <= w[0] + 1e-3);
        }
        for (&r, &h) in rs.iter().zip(&hs) {
            if r < -1.0 {
                assert!(h > 0.0);
            }
            if r > -1.0 {
                assert!(h < 0.0);
            }
        }
        // 1-Lipschitz bracket H(r) - delta <= H(r + delta) <= H(r)
        for (i, w) in rs.windows(2).enumerate() {
            let delta = w[1] - w[0];
            assert!(hs[i + 1] >= hs[i] - delta - 1e-3);
            assert!(hs[i + 1] <= hs[i] + 1e-3);
        }
    }

    #[test]
    fn grid_minimizer_returns_argmin() {
        let ring = build_ring_lp(1.0).unwrap();
        let spec =
            GridSpec { x1_range: (-2.0, 2.0), x2_range: (-2.0, 2.0), points_per_axis: 401 };
        let (h, x) = grid_minimizer_p(&ring, -2.0, &spec).unwrap();
        assert!((h - 0.5).abs() <= 5e-3);
        // the minimum is attained on a segment of the x1 = 1.5 line
        assert!((x[0] - 1.5).abs() <= 5e-2, "argmin {x:?}");
        assert!(x[1].abs() <= 0.24, "argmin {x:?}");
        let p_at = eval_p(&ring, &x, -2.0).unwrap();
        assert!((p_at - h).abs() <= 1e-12);
    }

    #[test]
    fn surrogate_bounds_against_grid_theta() {
        use crate::levelset::compute_surrogates;
        let ring = build_ring_lp(1.0).unwrap();
        let s = compute_surrogates(&ring, &[0.0, 0.0], -11.0, 0.5, 1.0).unwrap();
        let theta_est = 0.5;
        assert!(s.theta_tilde <= theta_est + 1e-3);
        assert!(s.r_tilde > -1.0);
    }

    #[test]
    fn warm_start_on_ring() {
        let ring = build_ring_lp(1.0).unwrap();
        let cfg = FomConfig::default();
        let mut meter = PassMeter::new(PassModel::PerEvaluation);
        let x = warm_start_feasible(&ring, &[3.0, 0.0], 40, &cfg, &mut meter).unwrap();
        let (g, _) = ring.eval_max_constraint(&x).unwrap();
        assert!(g < 0.0, "g = {g}");
        assert!(meter.count > 0);

        // already strictly feasible: best tracking cannot lose ground
        let x2 = warm_start_feasible(&ring, &[0.0, 0.0], 40, &cfg, &mut meter).unwrap();
        let (g2, _) = ring.eval_max_constraint(&x2).unwrap();
        assert!(g2 <= -1.0);
    }

    #[test]
    fn warm_start_needs_constraints() {
        let inst = ProblemInstance::new(
            ConvexFunction::linear(vec![1.0], 0.0),
            vec![],
            FeasibleSet::AllSpace,
            1,
            InstanceMetadata::default(),
        )
        .unwrap();
        let mut meter = PassMeter::new(PassModel::PerEvaluation);
        assert!(warm_start_feasible(&inst, &[0.0], 40, &FomConfig::default(), &mut meter)
            .is_err());
    }

    fn record(f: f64, g: f64) -> TraceRecord {
        TraceRecord {
            outer_iter: 0,
            fom_iters: 0,
            data_passes: 0,
            f_best: f,
            g_best: g,
            p_at_fstar: None,
            restarts: 0,
            last_kprime: None,
            r0: 0.0,
        }
    }

    #[test]
    fn fstar_estimate_filters_and_minimizes() {
        let recs = vec![record(1.0, 1e-6), record(0.9, 1e-4), record(0.95, 0.0)];
        assert_eq!(estimate_fstar(&recs).unwrap(), 0.95);
        let infeasible = vec![record(1.0, 0.1), record(0.5, 1e-3)];
        assert!(matches!(
            estimate_fstar(&infeasible),
            Err(Error::NoFeasibleCandidates { .. })
        ));
    }
}
