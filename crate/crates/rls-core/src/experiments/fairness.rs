//! Fairness-constrained binary classification at desk scale.
//!
//! The convex formulation minimizes a mean hinge loss over one data split
//! subject to two piecewise-linear fairness constraints built from the other
//! split: each group's positive-prediction surrogate must stay within a
//! factor `kappa` of the other's. Real datasets arrive through CSV ingestion;
//! a seeded synthetic generator stands in for them in tests and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::passes::PassModel;
use crate::problem::{
    ConvexFunction, FeasibleSet, HingeTerm, InstanceMetadata, ProblemInstance, ScaledPart,
};

/// Sensitive group tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    M,
    F,
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Group::M => "M",
            Group::F => "F",
        })
    }
}

/// Labeled, group-tagged feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessDataset {
    pub features: Vec<Vec<f64>>,
    /// Class labels, restricted to +1 / -1.
    pub labels: Vec<i8>,
    pub groups: Vec<Group>,
}

impl FairnessDataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, |f| f.len())
    }

    pub fn count(&self, group: Group) -> usize {
        self.groups.iter().filter(|&&g| g == group).count()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.labels.len() != n || self.groups.len() != n {
            return Err(Error::InvalidParameter(
                "features, labels and groups must have equal length".into(),
            ));
        }
        if self.labels.iter().any(|&b| b != 1 && b != -1) {
            return Err(Error::InvalidParameter("labels must be +1 or -1".into()));
        }
        let p = self.feature_dim();
        if self.features.iter().any(|row| row.len() != p) {
            return Err(Error::InvalidParameter("ragged feature rows".into()));
        }
        if self.features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "dataset features" });
        }
        if self.count(Group::M) == 0 || self.count(Group::F) == 0 {
            return Err(Error::InvalidParameter("both groups must be non-empty".into()));
        }
        Ok(())
    }

    fn subset(&self, indices: &[usize]) -> FairnessDataset {
        FairnessDataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            groups: indices.iter().map(|&i| self.groups[i]).collect(),
        }
    }
}

/// Deterministic synthetic dataset: features from a planted linear rule with
/// label noise, and a group-dependent mean shift along the planted direction
/// so that the fairness constraints bind.
pub fn generate_synthetic_fairness(n: usize, p: usize, seed: u64) -> Result<FairnessDataset> {
    if n < 4 || p < 1 {
        return Err(Error::InvalidParameter(format!(
            "need n >= 4 and p >= 1, got n = {n}, p = {p}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut planted: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    let norm = planted.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut planted {
        *v /= norm.max(1e-12);
    }

    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for _ in 0..n {
        let group = if rng.random::<f64>() < 0.5 { Group::M } else { Group::F };
        let shift = match group {
            Group::M => 0.4,
            Group::F => -0.4,
        };
        let mut a: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for (ai, wi) in a.iter_mut().zip(&planted) {
            *ai += shift * wi;
        }
        let margin: f64 = a.iter().zip(&planted).map(|(x, w)| x * w).sum();
        let noise: f64 = rng.sample(StandardNormal);
        labels.push(if margin + 0.5 * noise >= 0.0 { 1 } else { -1 });
        features.push(a);
        groups.push(group);
    }
    // n >= 4 leaves room to force one row per group deterministically
    if !groups.contains(&Group::M) {
        groups[0] = Group::M;
    }
    if !groups.contains(&Group::F) {
        groups[n - 1] = Group::F;
    }
    let ds = FairnessDataset { features, labels, groups };
    ds.validate()?;
    Ok(ds)
}

/// Splits into (objective, constraint) halves, stratified by group so that
/// neither half loses a group by chance.
pub fn split_dataset(ds: &FairnessDataset, seed: u64) -> (FairnessDataset, FairnessDataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obj_idx = Vec::new();
    let mut con_idx = Vec::new();
    for group in [Group::M, Group::F] {
        let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.groups[i] == group).collect();
        idx.shuffle(&mut rng);
        let half = idx.len() / 2;
        obj_idx.extend_from_slice(&idx[..half]);
        con_idx.extend_from_slice(&idx[half..]);
    }
    obj_idx.sort_unstable();
    con_idx.sort_unstable();
    (ds.subset(&obj_idx), ds.subset(&con_idx))
}

/// Formulation switches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FairnessOptions {
    /// Use the margin-increasing hinge `(1 + b a.x)_+` instead of the
    /// standard `(1 - b a.x)_+` in the objective.
    pub literal_hinge: bool,
}

/// Splits the dataset by `split_seed` and builds the constrained instance
/// with the standard hinge objective.
pub fn build_fairness_instance(
    ds: &FairnessDataset,
    kappa: f64,
    lambda: f64,
    split_seed: u64,
) -> Result<ProblemInstance> {
    build_fairness_instance_with(ds, kappa, lambda, split_seed, FairnessOptions::default())
}

pub fn build_fairness_instance_with(
    ds: &FairnessDataset,
    kappa: f64,
    lambda: f64,
    split_seed: u64,
    opts: FairnessOptions,
) -> Result<ProblemInstance> {
    ds.validate()?;
    let (obj, con) = split_dataset(ds, split_seed);
    build_fairness_from_splits(&obj, &con, kappa, lambda, opts)
}

/// Builds the instance from explicit objective/constraint splits.
///
/// Both fairness constraints are stored as (left side - 1) so they follow
/// the `g(x) <= 0` convention.
pub fn build_fairness_from_splits(
    obj: &FairnessDataset,
    con: &FairnessDataset,
    kappa: f64,
    lambda: f64,
    opts: FairnessOptions,
) -> Result<ProblemInstance> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::InvalidParameter(format!("kappa = {kappa} must lie in (0, 1]")));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be positive")));
    }
    for (split, part) in [(obj, "objective"), (con, "constraint")] {
        for group in [Group::M, Group::F] {
            if split.count(group) == 0 {
                return Err(Error::DegenerateSplit {
                    group: if group == Group::M { "M" } else { "F" },
                    part,
                });
            }
        }
    }
    let p = obj.feature_dim();
    if con.feature_dim() != p {
        return Err(Error::DimensionMismatch { expected: p, got: con.feature_dim() });
    }

    // objective: mean hinge loss over the objective split
    let w_obj = 1.0 / (obj.len() as f64);
    let sign = if opts.literal_hinge { 1.0 } else { -1.0 };
    let objective = ConvexFunction::hinge_aggregate(
        obj.features
            .iter()
            .zip(&obj.labels)
            .map(|(a, &b)| HingeTerm {
                weight: w_obj,
                direction: a.iter().map(|v| sign * (b as f64) * v).collect(),
                offset: 1.0,
            })
            .collect(),
    );

    let n_m = con.count(Group::M) as f64;
    let n_f = con.count(Group::F) as f64;
    let fairness_constraint = |favored: Group| -> ConvexFunction {
        let (w_pos, w_neg) = match favored {
            // kappa-weighted positive-surrogate of M against F
            Group::M => (kappa / n_m, 1.0 / n_f),
            Group::F => (kappa / n_f, 1.0 / n_m),
        };
        let mut terms = Vec::with_capacity(con.len());
        for (a, &g) in con.features.iter().zip(&con.groups) {
            let (weight, sign) = if g == favored { (w_pos, 1.0) } else { (w_neg, -1.0) };
            terms.push(HingeTerm {
                weight,
                direction: a.iter().map(|v| sign * v).collect(),
                offset: 0.5,
            });
        }
        ConvexFunction::scaled_sum(vec![
            ScaledPart { weight: 1.0, function: ConvexFunction::hinge_aggregate(terms) },
            ScaledPart {
                weight: 1.0,
                function: ConvexFunction::linear(vec![0.0; p], -1.0),
            },
        ])
    };

    ProblemInstance::new(
        objective,
        vec![fairness_constraint(Group::M), fairness_constraint(Group::F)],
        FeasibleSet::EuclideanBall { center: vec![0.0; p], radius: lambda },
        p,
        InstanceMetadata { pass_model: PassModel::SplitBased, ..InstanceMetadata::default() },
    )
}

/// Column mappings for CSV ingestion. All columns other than the label and
/// group columns must be numeric features.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub label_col: String,
    /// Exact value -> label entries; unmatched values fall back to
    /// `label_default` when set.
    pub label_map: Vec<(String, i8)>,
    pub label_default: Option<i8>,
    pub group_col: String,
    pub group_map: Vec<(String, Group)>,
    pub group_default: Option<Group>,
}

/// Reads a header-first CSV into a dataset using the schema's column
/// mappings. Errors carry the offending column name.
pub fn load_fairness_csv<R: std::io::Read>(
    reader: R,
    schema: &CsvSchema,
) -> Result<FairnessDataset> {
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::CsvFormat(format!("column '{name}' not found in header")))
    };
    let label_idx = find(&schema.label_col)?;
    let group_idx = find(&schema.group_col)?;
    if label_idx == group_idx {
        return Err(Error::CsvFormat("label and group columns coincide".into()));
    }
    let feature_cols: Vec<usize> =
        (0..headers.len()).filter(|&i| i != label_idx && i != group_idx).collect();
    if feature_cols.is_empty() {
        return Err(Error::CsvFormat("no feature columns left".into()));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    for (row_no, record) in csv_reader.records().enumerate() {
        let record = record?;
        let raw_label = record.get(label_idx).unwrap_or("");
        let label = schema
            .label_map
            .iter()
            .find(|(v, _)| v == raw_label)
            .map(|&(_, b)| b)
            .or(schema.label_default)
            .ok_or_else(|| {
                Error::CsvFormat(format!(
                    "row {}: unmapped value '{raw_label}' in label column '{}'",
                    row_no + 2,
                    schema.label_col
                ))
            })?;
        let raw_group = record.get(group_idx).unwrap_or("");
        let group = schema
            .group_map
            .iter()
            .find(|(v, _)| v == raw_group)
            .map(|&(_, g)| g)
            .or(schema.group_default)
            .ok_or_else(|| {
                Error::CsvFormat(format!(
                    "row {}: unmapped value '{raw_group}' in group column '{}'",
                    row_no + 2,
                    schema.group_col
                ))
            })?;
        let mut row = Vec::with_capacity(feature_cols.len());
        for &ci in &feature_cols {
            let raw = record.get(ci).unwrap_or("");
            let v: f64 = raw.trim().parse().map_err(|_| {
                Error::CsvFormat(format!(
                    "row {}: non-numeric value '{raw}' in feature column '{}'",
                    row_no + 2,
                    &headers[ci]
                ))
            })?;
            row.push(v);
        }
        features.push(row);
        labels.push(label);
        groups.push(group);
    }
    let ds = FairnessDataset { features, labels, groups };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn synthetic_is_deterministic() {
        let a = generate_synthetic_fairness(200, 5, 42).unwrap();
        let b = generate_synthetic_fairness(200, 5, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_fairness(200, 5, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synthetic_shape_guarantees() {
        for seed in 0..20 {
            let ds = generate_synthetic_fairness(4 + (seed as usize % 13), 3, seed).unwrap();
            assert!(ds.count(Group::M) >= 1);
            assert!(ds.count(Group::F) >= 1);
            assert!(ds.labels.iter().all(|&b| b == 1 || b == -1));
        }
        assert!(generate_synthetic_fairness(3, 5, 0).is_err());
        assert!(generate_synthetic_fairness(10, 0, 0).is_err());
    }

    fn toy_splits() -> (FairnessDataset, FairnessDataset) {
        // objective split: one point per group; constraint split: one M at
        // e1, one F at e2
        let obj = FairnessDataset {
            features: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            labels: vec![1, -1],
            groups: vec![Group::M, Group::F],
        };
        let con = FairnessDataset {
            features: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            labels: vec![1, 1],
            groups: vec![Group::M, Group::F],
        };
        (obj, con)
    }

    #[test]
    fn toy_constraint_value_at_origin() {
        let (obj, con) = toy_splits();
        let inst =
            build_fairness_from_splits(&obj, &con, 0.9, 10.0, FairnessOptions::default())
                .unwrap();
        // each constraint at x = 0 is kappa * 0.5 + 0.5 - 1 = -0.05
        let c0 = inst.constraints()[0].value(&[0.0, 0.0]);
        let c1 = inst.constraints()[1].value(&[0.0, 0.0]);
        assert!((c0 + 0.05).abs() < 1e-15);
        assert!((c1 + 0.05).abs() < 1e-15);
        // the origin is feasible for any kappa <= 1
        let (g, _) = inst.eval_max_constraint(&[0.0, 0.0]).unwrap();
        assert!(g < 0.0);
    }

    #[test]
    fn hinge_sign_flag() {
        let (obj, con) = toy_splits();
        let standard =
            build_fairness_from_splits(&obj, &con, 0.9, 10.0, FairnessOptions::default())
                .unwrap();
        let literal = build_fairness_from_splits(
            &obj,
            &con,
            0.9,
            10.0,
            FairnessOptions { literal_hinge: true },
        )
        .unwrap();
        // first objective point has b = +1, a = e1: standard loss falls with
        // the margin, the literal variant grows with it
        let x = [2.0, 0.0];
        let f_std = standard.eval_objective(&x).unwrap();
        let f_lit = literal.eval_objective(&x).unwrap();
        assert!((f_std - 0.5 * ((1.0f64 - 2.0).max(0.0) + 1.0)).abs() < 1e-15);
        assert!((f_lit - 0.5 * ((1.0f64 + 2.0).max(0.0) + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_split_detected() {
        // a 2-point set leaves one half of each group empty
        let ds = FairnessDataset {
            features: vec![vec![1.0], vec![-1.0]],
            labels: vec![1, -1],
            groups: vec![Group::M, Group::F],
        };
        let err = build_fairness_instance(&ds, 0.9, 10.0, 0);
        assert!(matches!(err, Err(Error::DegenerateSplit { .. })), "{err:?}");
    }

    #[test]
    fn split_is_stratified_and_deterministic() {
        let ds = generate_synthetic_fairness(101, 4, 7).unwrap();
        let (o1, c1) = split_dataset(&ds, 9);
        let (o2, c2) = split_dataset(&ds, 9);
        assert_eq!(o1, o2);
        assert_eq!(c1, c2);
        assert_eq!(o1.len() + c1.len(), ds.len());
        for part in [&o1, &c1] {
            assert!(part.count(Group::M) >= 1);
            assert!(part.count(Group::F) >= 1);
        }
    }

    #[test]
    fn constraints_satisfy_subgradient_inequality() {
        let ds = generate_synthetic_fairness(60, 4, 11).unwrap();
        let inst = build_fairness_instance(&ds, 0.9, 10.0, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for c in inst.constraints() {
            for _ in 0..500 {
                let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
                let y: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
                let cx = c.value(&x);
                let cy = c.value(&y);
                let xi = c.subgradient(&x);
                let lin: f64 =
                    xi.iter().zip(x.iter().zip(&y)).map(|(g, (a, b))| g * (b - a)).sum();
                assert!(cy >= cx + lin - 1e-10);
            }
        }
    }

    #[test]
    fn csv_ingestion() {
        let csv_text = "\
age,income,status,sex
25,50.5,good,male
40,72.0,bad,female
31,40.25,good,female
55,90.0,bad,male
";
        let schema = CsvSchema {
            label_col: "status".into(),
            label_map: vec![("good".into(), 1), ("bad".into(), -1)],
            label_default: None,
            group_col: "sex".into(),
            group_map: vec![("male".into(), Group::M)],
            group_default: Some(Group::F),
        };
        let ds = load_fairness_csv(csv_text.as_bytes(), &schema).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.feature_dim(), 2);
        assert_eq!(ds.labels, vec![1, -1, 1, -1]);
        assert_eq!(ds.groups, vec![Group::M, Group::F, Group::F, Group::M]);
        assert_eq!(ds.features[2], vec![31.0, 40.25]);
    }

    #[test]
    fn csv_errors_name_columns() {
        let schema = CsvSchema {
            label_col: "status".into(),
            label_map: vec![("good".into(), 1), ("bad".into(), -1)],
            label_default: None,
            group_col: "sex".into(),
            group_map: vec![("male".into(), Group::M)],
            group_default: Some(Group::F),
        };
        let missing = load_fairness_csv("a,b\n1,2\n".as_bytes(), &schema);
        assert!(matches!(&missing, Err(Error::CsvFormat(m)) if m.contains("status")));

        let non_numeric =
            load_fairness_csv("age,status,sex\nyoung,good,male\nold,bad,female\n".as_bytes(), &schema);
        assert!(matches!(&non_numeric, Err(Error::CsvFormat(m)) if m.contains("age")));

        let unmapped =
            load_fairness_csv("age,status,sex\n3,ok,male\n".as_bytes(), &schema);
        assert!(matches!(&unmapped, Err(Error::CsvFormat(m)) if m.contains("status")));
    }
}
