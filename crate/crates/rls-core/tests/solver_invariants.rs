//! Whole-run invariants of the restarting solver on the ring LP, where the
//! optimal value is known.

use rls_core::experiments::build_ring_lp;
use rls_core::levelset::eval_p;
use rls_core::rls::{RlsState, SolverConfig};

fn run_checked(rho: f64, epsilon: f64, budget: u64) -> RlsState {
    let ring = build_ring_lp(rho).unwrap();
    let f_star = ring.metadata.f_star.unwrap();
    let cfg = SolverConfig { epsilon, ..SolverConfig::default() };
    let alpha = cfg.fom.alpha;

    let mut state = RlsState::init(&ring, &[0.0, 0.0], -11.0, &cfg).unwrap();
    let k_last = state.levels.len() - 1;
    let outer_budget = budget.div_ceil(state.instances.len() as u64);

    let mut prev_critical: Option<usize> = None;
    let mut prev_f_best = state.f_best;
    for _ in 0..outer_budget {
        let pre_levels = state.levels.clone();
        let pre_x0: Vec<Vec<f64>> = state.instances.iter().map(|s| s.x0.clone()).collect();
        let pre_t: Vec<u64> = state.instances.iter().map(|s| s.t).collect();

        let restarted = state.outer_iteration(&ring, &cfg).unwrap();

        if let Some(kp) = restarted {
            // the restarted level and everything below it are bitwise intact
            assert_eq!(&state.levels[..=kp], &pre_levels[..=kp]);
            for k in 0..kp {
                assert_eq!(state.instances[k].x0, pre_x0[k], "x0 moved below k' = {kp}");
                assert_eq!(state.instances[k].t, pre_t[k] + 1);
            }
            for k in kp..=k_last {
                assert_eq!(state.instances[k].t, 0, "instance {k} not reset");
            }

            // the chain identity survives every restart
            let seq = state.level_sequence(alpha);
            let residual = seq.max_chain_residual(&ring).unwrap();
            assert!(residual <= 1e-9, "chain residual {residual} after restart at {kp}");

            // critical index is non-decreasing; when it disappears the last
            // instance's subproblem is solved to tolerance
            let critical = state.critical_index(&ring, f_star, alpha).unwrap();
            match (prev_critical, critical) {
                (Some(a), Some(b)) => assert!(b >= a, "critical index fell from {a} to {b}"),
                (Some(_), None) | (None, None) => {
                    let p_last =
                        eval_p(&ring, &state.instances[k_last].x0, state.levels[k_last]).unwrap();
                    assert!(
                        p_last <= epsilon,
                        "no critical index but P(x_K0; r_K) = {p_last} > eps"
                    );
                }
                (None, Some(_)) => {
                    // the index can only appear this way before the first
                    // time it exists; afterwards dichotomy keeps it present
                }
            }
            if critical.is_some() {
                prev_critical = critical;
            }
        }

        // r_0 is never rewritten
        assert_eq!(state.levels[0], -11.0);

        // the output guard keeps the best objective monotone and feasible
        assert!(state.f_best <= prev_f_best);
        prev_f_best = state.f_best;
        if state.x_best != vec![0.0, 0.0] {
            assert!(state.g_best <= epsilon);
        }
    }
    state
}

#[test]
fn ring_run_preserves_level_sequence_and_critical_index() {
    let state = run_checked(1.0, 1.0, 10_000);
    assert!(state.total_restarts > 0, "run never restarted");
    assert!(state.f_best + 1.0 <= 1.0);
    assert!(state.g_best <= 1.0);
}

#[test]
fn ring_run_tighter_epsilon() {
    let state = run_checked(3.0, 0.25, 10_000);
    assert!(state.f_best + 1.0 <= 0.25, "gap = {}", state.f_best + 1.0);
    assert!(state.g_best <= 0.25);
}
