//! Data-pass accounting.
//!
//! Experiment traces measure work in equivalent data passes. Instances built
//! from a dataset (the fairness problems) count one pass per full sweep of the
//! objective split and one per full sweep of the constraint split, so an
//! evaluation of the level-set function or its subgradient costs two passes.
//! Tiny analytic instances (the ring LP) count one pass per evaluation.

use serde::{Deserialize, Serialize};

/// How evaluations of a problem instance translate into data passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PassModel {
    /// Every value/subgradient evaluation costs one pass.
    #[default]
    PerEvaluation,
    /// Objective and constraint bundles each sweep their own data split.
    SplitBased,
}

/// An evaluation event against a problem instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalEvent {
    ObjectiveValue,
    ObjectiveSubgrad,
    ConstraintValue,
    ConstraintSubgrad,
    /// Value of P(x; r) (objective and constraints together).
    PValue,
    /// Subgradient of P(x; r).
    PSubgrad,
    /// Smoothed value and gradient evaluated together.
    SmoothedValueGrad,
}

/// Pass increment for one evaluation event under the given model.
pub fn pass_increment(model: PassModel, event: EvalEvent) -> u64 {
    match model {
        PassModel::PerEvaluation => 1,
        PassModel::SplitBased => match event {
            EvalEvent::ObjectiveValue
            | EvalEvent::ObjectiveSubgrad
            | EvalEvent::ConstraintValue
            | EvalEvent::ConstraintSubgrad => 1,
            EvalEvent::PValue | EvalEvent::PSubgrad | EvalEvent::SmoothedValueGrad => 2,
        },
    }
}

/// Running pass counter bound to one instance's pass model.
#[derive(Debug, Clone)]
pub struct PassMeter {
    model: PassModel,
    pub count: u64,
}

impl PassMeter {
    pub fn new(model: PassModel) -> Self {
        PassMeter { model, count: 0 }
    }

    pub fn bump(&mut self, event: EvalEvent) {
        self.count += pass_increment(self.model, event);
    }
}
