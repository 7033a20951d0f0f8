//! Constrained convex problem instances.
//!
//! A problem is `min f0(x) s.t. max_i f_i(x) <= 0, x in X` where every `f_i`
//! is a convex component function with exact value and subgradient oracles
//! and `X` is a simple set with a closed-form Euclidean projection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::passes::PassModel;

/// One weighted hinge term `w * max(0, a.x + b)` with `w >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HingeTerm {
    pub weight: f64,
    pub direction: Vec<f64>,
    pub offset: f64,
}

/// One weighted part of a scaled sum, `w * f(x)` with `w >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledPart {
    pub weight: f64,
    pub function: ConvexFunction,
}

/// Convex component function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConvexFunction {
    /// `c.x + b`
    Linear { coeffs: Vec<f64>, offset: f64 },
    /// `sum_j w_j * max(0, a_j.x + b_j)`
    HingeAggregate { terms: Vec<HingeTerm> },
    /// `sum_j w_j * f_j(x)`
    ScaledSum { parts: Vec<ScaledPart> },
}

impl ConvexFunction {
    pub fn linear(coeffs: Vec<f64>, offset: f64) -> Self {
        ConvexFunction::Linear { coeffs, offset }
    }

    pub fn hinge_aggregate(terms: Vec<HingeTerm>) -> Self {
        ConvexFunction::HingeAggregate { terms }
    }

    pub fn scaled_sum(parts: Vec<ScaledPart>) -> Self {
        ConvexFunction::ScaledSum { parts }
    }

    /// Exact function value at `x`. Assumes `x` has the right dimension.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ConvexFunction::Linear { coeffs, offset } => dot(coeffs, x) + offset,
            ConvexFunction::HingeAggregate { terms } => terms
                .iter()
                .map(|t| {
                    let z = dot(&t.direction, x) + t.offset;
                    if z > 0.0 {
                        t.weight * z
                    } else {
                        0.0
                    }
                })
                .sum(),
            ConvexFunction::ScaledSum { parts } => {
                parts.iter().map(|p| p.weight * p.function.value(x)).sum()
            }
        }
    }

    /// A valid subgradient at `x`.
    ///
    /// Hinge terms with `a.x + b = 0` contribute the zero branch, which keeps
    /// the oracle deterministic.
    pub fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.add_subgradient(x, 1.0, &mut out);
        out
    }

    fn add_subgradient(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        match self {
            ConvexFunction::Linear { coeffs, .. } => {
                for (o, c) in out.iter_mut().zip(coeffs) {
                    *o += scale * c;
                }
            }
            ConvexFunction::HingeAggregate { terms } => {
                for t in terms {
                    let z = dot(&t.direction, x) + t.offset;
                    if z > 0.0 {
                        let w = scale * t.weight;
                        for (o, d) in out.iter_mut().zip(&t.direction) {
                            *o += w * d;
                        }
                    }
                }
            }
            ConvexFunction::ScaledSum { parts } => {
                for p in parts {
                    p.function.add_subgradient(x, scale * p.weight, out);
                }
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            ConvexFunction::Linear { coeffs, offset } => {
                check_dim(coeffs.len(), dim)?;
                check_finite(coeffs, "linear coefficients")?;
                if !offset.is_finite() {
                    return Err(Error::NonFinite { context: "linear offset" });
                }
            }
            ConvexFunction::HingeAggregate { terms } => {
                for t in terms {
                    check_dim(t.direction.len(), dim)?;
                    check_finite(&t.direction, "hinge direction")?;
                    if !t.weight.is_finite() || !t.offset.is_finite() {
                        return Err(Error::NonFinite { context: "hinge term" });
                    }
                    if t.weight < 0.0 {
                        return Err(Error::InvalidParameter(format!(
                            "hinge weight {} is negative",
                            t.weight
                        )));
                    }
                }
            }
            ConvexFunction::ScaledSum { parts } => {
                for p in parts {
                    if !p.weight.is_finite() {
                        return Err(Error::NonFinite { context: "scaled-sum weight" });
                    }
                    if p.weight < 0.0 {
                        return Err(Error::InvalidParameter(format!(
                            "scaled-sum weight {} is negative",
                            p.weight
                        )));
                    }
                    p.function.validate(dim)?;
                }
            }
        }
        Ok(())
    }
}

/// Simple feasible set with an exact Euclidean projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeasibleSet {
    AllSpace,
    Box { lower: Vec<f64>, upper: Vec<f64> },
    EuclideanBall { center: Vec<f64>, radius: f64 },
}

impl FeasibleSet {
    /// Euclidean-nearest point of the set.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_finite(x, "projection input")?;
        match self {
            FeasibleSet::AllSpace => Ok(x.to_vec()),
            FeasibleSet::Box { lower, upper } => {
                check_dim(x.len(), lower.len())?;
                Ok(x.iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(&v, (&lo, &hi))| v.max(lo).min(hi))
                    .collect())
            }
            FeasibleSet::EuclideanBall { center, radius } => {
                check_dim(x.len(), center.len())?;
                let mut d: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                let norm = dot(&d, &d).sqrt();
                // the relative slack keeps boundary points fixed, so the
                // projection is exactly idempotent
                if norm <= radius * (1.0 + 4.0 * f64::EPSILON) {
                    Ok(x.to_vec())
                } else {
                    let s = radius / norm;
                    for (di, c) in d.iter_mut().zip(center) {
                        *di = c + s * *di;
                    }
                    Ok(d)
                }
            }
        }
    }

    /// Membership up to `tol` in the natural metric of the set.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            FeasibleSet::AllSpace => true,
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(&v, (&lo, &hi))| v >= lo - tol && v <= hi + tol),
            FeasibleSet::EuclideanBall { center, radius } => {
                let n2: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                n2.sqrt() <= radius + tol
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            FeasibleSet::AllSpace => Ok(()),
            FeasibleSet::Box { lower, upper } => {
                check_dim(lower.len(), dim)?;
                check_dim(upper.len(), dim)?;
                check_finite(lower, "box lower bound")?;
                check_finite(upper, "box upper bound")?;
                if lower.iter().zip(upper).any(|(lo, hi)| lo > hi) {
                    return Err(Error::InvalidParameter(
                        "box lower bound exceeds upper bound".into(),
                    ));
                }
                Ok(())
            }
            FeasibleSet::EuclideanBall { center, radius } => {
                check_dim(center.len(), dim)?;
                check_finite(center, "ball center")?;
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "ball radius {radius} must be positive"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Optional ground-truth and conditioning metadata attached to an instance.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct InstanceMetadata {
    pub f_star: Option<f64>,
    pub x_star: Option<Vec<f64>>,
    /// Error bound exponent d >= 1.
    pub ebc_d: Option<f64>,
    /// Error bound scale G > 0.
    pub ebc_g: Option<f64>,
    /// Upper bound on component subgradient norms.
    pub subgrad_bound: Option<f64>,
    /// Smoothness constant of the components (0 for piecewise linear builds
    /// that are in fact linear).
    pub smooth_l: Option<f64>,
    pub strictly_feasible_point: Option<Vec<f64>>,
    pub pass_model: PassModel,
}

/// A constrained convex problem instance. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    objective: ConvexFunction,
    constraints: Vec<ConvexFunction>,
    set: FeasibleSet,
    dimension: usize,
    #[serde(default)]
    pub metadata: InstanceMetadata,
}

impl ProblemInstance {
    pub fn new(
        objective: ConvexFunction,
        constraints: Vec<ConvexFunction>,
        set: FeasibleSet,
        dimension: usize,
        metadata: InstanceMetadata,
    ) -> Result<Self> {
        let inst = ProblemInstance { objective, constraints, set, dimension, metadata };
        inst.validate()?;
        Ok(inst)
    }

    /// Re-checks all construction invariants; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        self.objective.validate(self.dimension)?;
        for c in &self.constraints {
            c.validate(self.dimension)?;
        }
        self.set.validate(self.dimension)?;

        let md = &self.metadata;
        if let Some(d) = md.ebc_d {
            if !(d.is_finite() && d >= 1.0) {
                return Err(Error::InvalidParameter(format!("ebc_d {d} must be >= 1")));
            }
        }
        if let Some(g) = md.ebc_g {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::InvalidParameter(format!("ebc_g {g} must be > 0")));
            }
        }
        if let Some(m) = md.subgrad_bound {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "subgrad_bound {m} must be > 0"
                )));
            }
        }
        if let Some(l) = md.smooth_l {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::InvalidParameter(format!("smooth_l {l} must be >= 0")));
            }
        }
        if let Some(xt) = &md.strictly_feasible_point {
            let proj = self.set.project(xt)?;
            if proj != *xt {
                return Err(Error::InvalidParameter(
                    "strictly feasible point lies outside the feasible set".into(),
                ));
            }
            let (g, _) = self.eval_max_constraint(xt)?;
            if !(g < 0.0) {
                return Err(Error::NotStrictlyFeasible { g });
            }
        }
        if let (Some(xs), Some(fs)) = (&md.x_star, md.f_star) {
            let f = self.eval_objective(xs)?;
            if (f - fs).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "f0(x_star) = {f} differs from f_star = {fs}"
                )));
            }
            let (g, _) = self.eval_max_constraint(xs)?;
            if g > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "x_star violates the constraints: g(x_star) = {g}"
                )));
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of constraint functions m.
    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective(&self) -> &ConvexFunction {
        &self.objective
    }

    pub fn constraints(&self) -> &[ConvexFunction] {
        &self.constraints
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(x.len(), self.dimension)?;
        self.set.project(x)
    }

    /// `f0(x)`.
    pub fn eval_objective(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.objective.value(x))
    }

    /// `g(x) = max_i f_i(x)` with the smallest achieving index, or
    /// `(-inf, None)` when the instance has no constraints.
    pub fn eval_max_constraint(&self, x: &[f64]) -> Result<(f64, Option<usize>)> {
        self.check_point(x)?;
        let mut best = f64::NEG_INFINITY;
        let mut idx = None;
        for (i, c) in self.constraints.iter().enumerate() {
            let v = c.value(x);
            if v > best {
                best = v;
                idx = Some(i);
            }
        }
        Ok((best, idx))
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        check_dim(x.len(), self.dimension)?;
        check_finite(x, "evaluation point")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let inst: ProblemInstance = serde_json::from_str(s)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

fn check_dim(got: usize, expected: usize) -> Result<()> {
    if got != expected {
        Err(Error::DimensionMismatch { expected, got })
    } else {
        Ok(())
    }
}

fn check_finite(x: &[f64], context: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { context })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::build_ring_lp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ball(center: Vec<f64>, radius: f64) -> FeasibleSet {
        FeasibleSet::EuclideanBall { center, radius }
    }

    #[test]
    fn projection_examples() {
        let b = ball(vec![0.0, 0.0], 1.0);
        assert_eq!(b.project(&[2.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(b.project(&[0.3, 0.4]).unwrap(), vec![0.3, 0.4]);
        let all = FeasibleSet::AllSpace;
        assert_eq!(all.project(&[-7.0, 3.0]).unwrap(), vec![-7.0, 3.0]);
    }

    #[test]
    fn projection_dimension_mismatch() {
        let b = ball(vec![0.0, 0.0], 1.0);
        assert!(matches!(
            b.project(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn projection_idempotent_and_nonexpansive() {
        let sets = [
            FeasibleSet::AllSpace,
            FeasibleSet::Box { lower: vec![-1.0, -0.5, 0.0], upper: vec![1.0, 2.0, 0.25] },
            ball(vec![0.5, -0.25, 1.0], 0.75),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for set in &sets {
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
                let y: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
                let px = set.project(&x).unwrap();
                let py = set.project(&y).unwrap();
                assert_eq!(set.project(&px).unwrap(), px, "idempotence failed for {set:?}");
                let d_in: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
                let d_out: f64 = px.iter().zip(&py).map(|(a, b)| (a - b) * (a - b)).sum();
                assert!(d_out.sqrt() <= d_in.sqrt() + 1e-12);
            }
        }
    }

    #[test]
    fn objective_examples() {
        let ring = build_ring_lp(1.0).unwrap();
        assert_eq!(ring.eval_objective(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(ring.eval_objective(&[1.0, 0.0]).unwrap(), -1.0);

        let h = ConvexFunction::hinge_aggregate(vec![HingeTerm {
            weight: 2.0,
            direction: vec![1.0],
            offset: 0.5,
        }]);
        assert_eq!(h.value(&[0.0]), 1.0);
    }

    #[test]
    fn objective_rejects_non_finite() {
        let ring = build_ring_lp(1.0).unwrap();
        assert!(matches!(
            ring.eval_objective(&[f64::NAN, 0.0]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn max_constraint_examples() {
        let ring1 = build_ring_lp(1.0).unwrap();
        let (g, i) = ring1.eval_max_constraint(&[0.0, 0.0]).unwrap();
        assert_eq!((g, i), (-1.0, Some(0)));

        let ring2 = build_ring_lp(2.0).unwrap();
        let (g, i) = ring2.eval_max_constraint(&[1.0, 0.0]).unwrap();
        assert_eq!((g, i), (0.0, Some(0)));

        let (g, i) = ring1.eval_max_constraint(&[2.0, 0.0]).unwrap();
        assert_eq!((g, i), (1.0, Some(0)));
    }

    #[test]
    fn max_constraint_empty_is_neg_infinity() {
        let inst = ProblemInstance::new(
            ConvexFunction::linear(vec![1.0], 0.0),
            vec![],
            FeasibleSet::AllSpace,
            1,
            InstanceMetadata::default(),
        )
        .unwrap();
        let (g, i) = inst.eval_max_constraint(&[3.0]).unwrap();
        assert_eq!(g, f64::NEG_INFINITY);
        assert_eq!(i, None);
    }

    fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect()
    }

    fn subgradient_inequality_holds(f: &ConvexFunction, dim: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10_000 {
            let x = random_point(&mut rng, dim);
            let y = random_point(&mut rng, dim);
            let fx = f.value(&x);
            let fy = f.value(&y);
            let xi = f.subgradient(&x);
            let lin: f64 = xi.iter().zip(x.iter().zip(&y)).map(|(g, (a, b))| g * (b - a)).sum();
            let scale = 1.0 + fx.abs() + fy.abs() + lin.abs();
            assert!(
                fy >= fx + lin - 1e-12 * scale,
                "subgradient inequality violated for {f:?} at x={x:?}, y={y:?}"
            );
        }
    }

    #[test]
    fn subgradient_inequality_linear() {
        let f = ConvexFunction::linear(vec![1.5, -2.0, 0.25], 0.7);
        subgradient_inequality_holds(&f, 3, 11);
    }

    #[test]
    fn subgradient_inequality_hinge() {
        let f = ConvexFunction::hinge_aggregate(vec![
            HingeTerm { weight: 0.5, direction: vec![1.0, -1.0, 2.0], offset: 0.1 },
            HingeTerm { weight: 2.0, direction: vec![-0.3, 0.8, 0.0], offset: -0.4 },
            HingeTerm { weight: 0.0, direction: vec![1.0, 1.0, 1.0], offset: 0.0 },
        ]);
        subgradient_inequality_holds(&f, 3, 13);
    }

    #[test]
    fn subgradient_inequality_scaled_sum() {
        let f = ConvexFunction::scaled_sum(vec![
            ScaledPart {
                weight: 1.0,
                function: ConvexFunction::hinge_aggregate(vec![HingeTerm {
                    weight: 1.0,
                    direction: vec![1.0, 0.5, -1.0],
                    offset: 0.2,
                }]),
            },
            ScaledPart { weight: 2.5, function: ConvexFunction::linear(vec![0.0, 0.0, 1.0], -1.0) },
        ]);
        subgradient_inequality_holds(&f, 3, 17);
    }

    #[test]
    fn hinge_negative_weight_rejected() {
        let f = ConvexFunction::hinge_aggregate(vec![HingeTerm {
            weight: -1.0,
            direction: vec![1.0],
            offset: 0.0,
        }]);
        let err = ProblemInstance::new(
            f,
            vec![],
            FeasibleSet::AllSpace,
            1,
            InstanceMetadata::default(),
        );
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn ring_metadata_consistent() {
        let ring = build_ring_lp(1.0).unwrap();
        let xs = ring.metadata.x_star.clone().unwrap();
        let fs = ring.metadata.f_star.unwrap();
        assert_eq!(ring.eval_objective(&xs).unwrap(), fs);
        let (g, _) = ring.eval_max_constraint(&xs).unwrap();
        assert!(g.abs() <= 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let ring = build_ring_lp(2.0).unwrap();
        let s = ring.to_json_string().unwrap();
        let back = ProblemInstance::from_json_str(&s).unwrap();
        assert_eq!(back, ring);
    }

    #[test]
    fn strictly_feasible_point_is_checked() {
        let inst = ProblemInstance::new(
            ConvexFunction::linear(vec![1.0], 0.0),
            vec![ConvexFunction::linear(vec![1.0], 0.0)],
            FeasibleSet::AllSpace,
            1,
            InstanceMetadata {
                strictly_feasible_point: Some(vec![1.0]), // g(1) = 1 >= 0
                ..InstanceMetadata::default()
            },
        );
        assert!(matches!(inst, Err(Error::NotStrictlyFeasible { .. })));
    }
}
