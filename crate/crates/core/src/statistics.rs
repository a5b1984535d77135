//! Data matrices and the test statistics computed from them.
//!
//! Rows are observations, columns are features (one hypothesis per column).
//! Two-group data carries a label per row; the first label encountered in
//! row order is the first group, so `T_j > 0` means the first group has the
//! larger mean.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::{HypothesisShape, StatisticVector};

/// Row labels splitting a matrix into two groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupLabels {
    names: [String; 2],
    in_first: Vec<bool>,
}

impl GroupLabels {
    /// Builds labels from one string per row. Exactly two distinct labels
    /// are required.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let first = labels.first().ok_or(Error::Empty)?.as_ref().to_owned();
        let mut second: Option<String> = None;
        let mut in_first = Vec::with_capacity(labels.len());
        for label in labels {
            let label = label.as_ref();
            if label == first {
                in_first.push(true);
                continue;
            }
            match &second {
                None => second = Some(label.to_owned()),
                Some(s) if s != label => {
                    return Err(Error::Data(format!(
                        "group column has more than two labels: {first:?}, {s:?}, {label:?}"
                    )))
                }
                Some(_) => {}
            }
            in_first.push(false);
        }
        let second = second.ok_or_else(|| {
            Error::Data(format!("group column has a single label {first:?}"))
        })?;
        Ok(Self {
            names: [first, second],
            in_first,
        })
    }

    pub(crate) fn from_membership(names: [String; 2], in_first: Vec<bool>) -> Self {
        Self { names, in_first }
    }

    pub fn names(&self) -> &[String; 2] {
        &self.names
    }

    pub fn in_first(&self) -> &[bool] {
        &self.in_first
    }

    pub fn sizes(&self) -> (usize, usize) {
        let first = self.in_first.iter().filter(|&&b| b).count();
        (first, self.in_first.len() - first)
    }

    /// The labels with the two groups exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            names: [self.names[1].clone(), self.names[0].clone()],
            in_first: self.in_first.iter().map(|b| !b).collect(),
        }
    }
}

/// Rectangular matrix of observations, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
    column_names: Vec<String>,
    groups: Option<GroupLabels>,
}

impl DataMatrix {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::Empty);
        }
        if values.len() != n_rows * n_cols {
            return Err(Error::Data(format!(
                "expected {} values for a {n_rows}x{n_cols} matrix, got {}",
                n_rows * n_cols,
                values.len()
            )));
        }
        if let Some((k, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value {v} at row {}, column {}",
                k / n_cols + 1,
                k % n_cols + 1
            )));
        }
        Ok(Self {
            n_rows,
            n_cols,
            values,
            column_names: (1..=n_cols).map(|j| format!("x{j}")).collect(),
            groups: None,
        })
    }

    /// Builds a matrix from columns of equal length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let n_cols = columns.len();
        let n_rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n_rows) {
            return Err(Error::Data("columns have different lengths".into()));
        }
        let mut values = Vec::with_capacity(n_rows * n_cols);
        for i in 0..n_rows {
            values.extend(columns.iter().map(|c| c[i]));
        }
        Self::new(n_rows, n_cols, values)
    }

    pub fn with_groups(mut self, groups: GroupLabels) -> Result<Self> {
        if groups.in_first.len() != self.n_rows {
            return Err(Error::Data(format!(
                "{} group labels for {} rows",
                groups.in_first.len(),
                self.n_rows
            )));
        }
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_cols {
            return Err(Error::Data(format!(
                "{} column names for {} columns",
                names.len(),
                self.n_cols
            )));
        }
        self.column_names = names;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn groups(&self) -> Option<&GroupLabels> {
        self.groups.as_ref()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_rows).map(move |i| self.get(i, col))
    }

    /// Reads a CSV with a header row. A column named `group` holds two-group
    /// labels; every other column must be numeric. Missing values are
    /// rejected with the offending line number.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let group_col = headers.iter().position(|h| h == "group");
        let feature_cols: Vec<usize> = (0..headers.len()).filter(|&k| Some(k) != group_col).collect();
        if feature_cols.is_empty() {
            return Err(Error::Data("no numeric columns in header".into()));
        }
        let mut values = Vec::new();
        let mut labels = Vec::new();
        let mut n_rows = 0;
        for (k, record) in rdr.records().enumerate() {
            let record = record?;
            let line = k + 2;
            for &c in &feature_cols {
                let raw = record.get(c).unwrap_or("");
                let v: f64 = raw.parse().map_err(|_| {
                    Error::Data(format!(
                        "line {line}, column '{}': cannot parse {raw:?} as a number",
                        &headers[c]
                    ))
                })?;
                if !v.is_finite() {
                    return Err(Error::Data(format!(
                        "line {line}, column '{}': missing or non-finite value {raw:?}",
                        &headers[c]
                    )));
                }
                values.push(v);
            }
            if let Some(g) = group_col {
                let label = record.get(g).unwrap_or("");
                if label.is_empty() {
                    return Err(Error::Data(format!("line {line}: empty group label")));
                }
                labels.push(label.to_owned());
            }
            n_rows += 1;
        }
        let names = feature_cols.iter().map(|&c| headers[c].to_owned()).collect();
        let dm = Self::new(n_rows, feature_cols.len(), values)?.with_column_names(names)?;
        match group_col {
            Some(_) => dm.with_groups(GroupLabels::from_labels(&labels)?),
            None => Ok(dm),
        }
    }

    fn require_groups(&self, min_size: usize) -> Result<&GroupLabels> {
        let groups = self
            .groups
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("two-group statistic needs group labels".into()))?;
        let (a, b) = groups.sizes();
        if a < min_size || b < min_size {
            return Err(Error::InvalidArgument(format!(
                "each group needs at least {min_size} observations, got {a} and {b}"
            )));
        }
        Ok(groups)
    }

    fn equal_groups(&self) -> Result<(&GroupLabels, usize)> {
        let groups = self.require_groups(1)?;
        let (a, b) = groups.sizes();
        if a != b {
            return Err(Error::InvalidArgument(format!(
                "groups must be equally large, got {a} and {b}"
            )));
        }
        Ok((groups, a))
    }
}

/// Margin specification: one shared value or one per hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Margins {
    Common(f64),
    PerHypothesis(Vec<f64>),
}

impl Margins {
    pub fn resolve(&self, m: usize) -> Result<Vec<f64>> {
        match self {
            Margins::Common(d) => Ok(vec![*d; m]),
            Margins::PerHypothesis(ds) if ds.len() == m => Ok(ds.clone()),
            Margins::PerHypothesis(ds) => Err(Error::LengthMismatch {
                stats: m,
                margins: ds.len(),
            }),
        }
    }
}

/// Column means, `T_j = n^-1 1'X^j`.
pub fn column_mean_statistics(
    dm: &DataMatrix,
    margins: &Margins,
    shape: HypothesisShape,
) -> Result<StatisticVector> {
    if dm.groups.is_some() {
        return Err(Error::InvalidArgument(
            "column means are for one-sample data; drop the group column".into(),
        ));
    }
    let n = dm.n_rows as f64;
    let stats = column_sums(dm).into_iter().map(|s| s / n).collect();
    StatisticVector::new(stats, margins.resolve(dm.n_cols)?, shape)
}

/// `n^-1/2 1'X^j`, the sign-flip test statistic of each column.
pub fn scaled_column_sums(dm: &DataMatrix) -> Vec<f64> {
    let scale = 1.0 / (dm.n_rows as f64).sqrt();
    column_sums(dm).into_iter().map(|s| s * scale).collect()
}

fn column_sums(dm: &DataMatrix) -> Vec<f64> {
    let mut sums = vec![0.0; dm.n_cols];
    for i in 0..dm.n_rows {
        for (acc, &x) in sums.iter_mut().zip(dm.row(i)) {
            *acc += x;
        }
    }
    sums
}

/// Scaled mean differences `T_j = n^1/2 (Zbar_j - Ybar_j)` for two equally
/// large groups of size `n`.
///
/// The mean of `T_j` is `n^1/2` times the difference of group means, so
/// margins must be given on the statistic scale.
pub fn two_group_statistics(
    dm: &DataMatrix,
    margins: &Margins,
    shape: HypothesisShape,
) -> Result<StatisticVector> {
    let (groups, n) = dm.equal_groups()?;
    let stats = group_mean_differences(dm, groups.in_first(), n);
    StatisticVector::new(stats, margins.resolve(dm.n_cols)?, shape)
}

pub(crate) fn group_mean_differences(dm: &DataMatrix, in_first: &[bool], n: usize) -> Vec<f64> {
    let mut diff = vec![0.0; dm.n_cols];
    for (i, &first) in in_first.iter().enumerate() {
        let sign = if first { 1.0 } else { -1.0 };
        for (acc, &x) in diff.iter_mut().zip(dm.row(i)) {
            *acc += sign * x;
        }
    }
    let nf = n as f64;
    diff.into_iter().map(|d| d / nf.sqrt()).collect()
}

/// Welch statistics for the columns that have them.
#[derive(Debug, Clone, PartialEq)]
pub struct WelchStatistics {
    pub statistics: StatisticVector,
    /// Welch-Satterthwaite degrees of freedom, for reference only.
    pub df: Vec<f64>,
    /// 0-based source column of each statistic.
    pub kept_columns: Vec<usize>,
    /// 0-based columns with zero variance in both groups.
    pub excluded_columns: Vec<usize>,
}

/// Welch t-statistic per column, `(mean_1 - mean_2) / sqrt(s1^2/n1 + s2^2/n2)`
/// with the `n - 1` variance divisor. Columns with zero variance in both
/// groups have no statistic; they are dropped with a warning.
pub fn welch_t_statistics(
    dm: &DataMatrix,
    margins: &Margins,
    shape: HypothesisShape,
) -> Result<WelchStatistics> {
    let groups = dm.require_groups(2)?;
    let all_margins = margins.resolve(dm.n_cols)?;
    let (n1, n2) = groups.sizes();
    let (n1f, n2f) = (n1 as f64, n2 as f64);

    let mut stats = Vec::with_capacity(dm.n_cols);
    let mut df = Vec::with_capacity(dm.n_cols);
    let mut kept = Vec::with_capacity(dm.n_cols);
    let mut excluded = Vec::new();
    for j in 0..dm.n_cols {
        let (mut s1, mut s2) = (0.0, 0.0);
        for (x, &first) in dm.column(j).zip(groups.in_first()) {
            if first {
                s1 += x;
            } else {
                s2 += x;
            }
        }
        let (m1, m2) = (s1 / n1f, s2 / n2f);
        let (mut ss1, mut ss2) = (0.0, 0.0);
        for (x, &first) in dm.column(j).zip(groups.in_first()) {
            if first {
                ss1 += (x - m1) * (x - m1);
            } else {
                ss2 += (x - m2) * (x - m2);
            }
        }
        let (v1, v2) = (ss1 / (n1f - 1.0) / n1f, ss2 / (n2f - 1.0) / n2f);
        let se2 = v1 + v2;
        if se2 == 0.0 {
            log::warn!(
                "column {} ('{}') has zero variance in both groups; excluded",
                j + 1,
                dm.column_names[j]
            );
            excluded.push(j);
            continue;
        }
        stats.push((m1 - m2) / se2.sqrt());
        df.push(se2 * se2 / (v1 * v1 / (n1f - 1.0) + v2 * v2 / (n2f - 1.0)));
        kept.push(j);
    }
    if stats.is_empty() {
        return Err(Error::Data("every column has zero variance".into()));
    }
    let kept_margins = kept.iter().map(|&j| all_margins[j]).collect();
    Ok(WelchStatistics {
        statistics: StatisticVector::new(stats, kept_margins, shape)?,
        df,
        kept_columns: kept,
        excluded_columns: excluded,
    })
}

/// Rewrites statistic/margin pairs without changing what is rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginShift {
    /// Turns left-sided hypotheses `mu_j >= delta_j` at these 0-based indices
    /// into right-sided ones by negating both the statistic and the margin.
    /// Applying it twice is the identity.
    FlipSides(Vec<usize>),
    /// Translates every statistic by `delta - delta_j` so all hypotheses
    /// share the margin `delta`. Directional only.
    ToCommon(f64),
    /// Translates statistics onto new per-hypothesis margins. Directional
    /// only.
    ToMargins(Vec<f64>),
}

pub fn apply_margin_shift(sv: &StatisticVector, shift: &MarginShift) -> Result<StatisticVector> {
    let mut stats = sv.stats().to_vec();
    let mut margins = sv.margins().to_vec();
    match shift {
        MarginShift::FlipSides(indices) => {
            sv.expect_shape(HypothesisShape::DirectionalRight)?;
            for &j in indices {
                if j >= stats.len() {
                    return Err(Error::InvalidArgument(format!(
                        "index {j} out of range for {} hypotheses",
                        stats.len()
                    )));
                }
                stats[j] = -stats[j];
                margins[j] = -margins[j];
            }
        }
        MarginShift::ToCommon(delta) => {
            sv.expect_shape(HypothesisShape::DirectionalRight)?;
            for (t, d) in stats.iter_mut().zip(margins.iter_mut()) {
                *t += delta - *d;
                *d = *delta;
            }
        }
        MarginShift::ToMargins(new) => {
            sv.expect_shape(HypothesisShape::DirectionalRight)?;
            if new.len() != stats.len() {
                return Err(Error::LengthMismatch {
                    stats: stats.len(),
                    margins: new.len(),
                });
            }
            for ((t, d), &nd) in stats.iter_mut().zip(margins.iter_mut()).zip(new) {
                *t += nd - *d;
                *d = nd;
            }
        }
    }
    StatisticVector::new(stats, margins, sv.shape())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::build_profile;
    use proptest::prelude::*;

    fn labeled(columns: &[Vec<f64>], labels: &[&str]) -> DataMatrix {
        DataMatrix::from_columns(columns)
            .unwrap()
            .with_groups(GroupLabels::from_labels(labels).unwrap())
            .unwrap()
    }

    const DIR: HypothesisShape = HypothesisShape::DirectionalRight;

    #[test]
    fn column_means() {
        let dm = DataMatrix::from_columns(&[vec![1.0, 1.0, 1.0], vec![1.0, 2.0, 3.0]]).unwrap();
        let sv = column_mean_statistics(&dm, &Margins::Common(0.0), DIR).unwrap();
        assert_eq!(sv.stats(), &[1.0, 2.0]);
        let labeled = dm.with_groups(GroupLabels::from_labels(&["a", "b", "a"]).unwrap()).unwrap();
        assert!(column_mean_statistics(&labeled, &Margins::Common(0.0), DIR).is_err());
    }

    #[test]
    fn two_group_examples() {
        let dm = labeled(&[vec![1.0, 2.0, 1.0, 2.0]], &["a", "a", "b", "b"]);
        let sv = two_group_statistics(&dm, &Margins::Common(0.0), DIR).unwrap();
        assert_eq!(sv.stats(), &[0.0]);

        // Group means 1.5 and 0.5 with n = 4: T = 2 * 1 = 2.
        let dm = labeled(
            &[vec![1.0, 2.0, 1.0, 2.0, 0.0, 1.0, 0.0, 1.0]],
            &["z", "z", "z", "z", "y", "y", "y", "y"],
        );
        let sv = two_group_statistics(&dm, &Margins::Common(0.0), DIR).unwrap();
        assert_eq!(sv.stats(), &[2.0]);

        let uneven = labeled(&[vec![1.0, 2.0, 3.0]], &["a", "a", "b"]);
        assert!(two_group_statistics(&uneven, &Margins::Common(0.0), DIR).is_err());
    }

    #[test]
    fn welch_example() {
        let dm = labeled(
            &[vec![0.0, 0.0, 2.0, 2.0, 1.0, 1.0, 3.0, 3.0]],
            &["a", "a", "a", "a", "b", "b", "b", "b"],
        );
        let w = welch_t_statistics(&dm, &Margins::Common(2.0), HypothesisShape::Equivalence).unwrap();
        // Recomputed by hand: variances 4/3 each, se = sqrt(4/3/4 + 4/3/4).
        let expected = -1.0 / (2.0f64 / 3.0).sqrt();
        assert!((w.statistics.stats()[0] - expected).abs() < 1e-14);
        assert!((w.df[0] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn welch_excludes_constant_columns() {
        let dm = labeled(
            &[vec![1.0, 1.0, 2.0, 2.0], vec![0.0, 1.0, 0.0, 2.0], vec![5.0; 4]],
            &["a", "a", "b", "b"],
        );
        let w = welch_t_statistics(&dm, &Margins::PerHypothesis(vec![1.0, 2.0, 3.0]), HypothesisShape::Equivalence)
            .unwrap();
        assert_eq!(w.kept_columns, vec![1]);
        assert_eq!(w.excluded_columns, vec![0, 2]);
        assert_eq!(w.statistics.margins(), &[2.0]);
    }

    #[test]
    fn welch_identical_groups_is_zero() {
        let dm = labeled(&[vec![1.0, 3.0, 1.0, 3.0]], &["a", "a", "b", "b"]);
        let w = welch_t_statistics(&dm, &Margins::Common(1.0), DIR).unwrap();
        assert_eq!(w.statistics.stats(), &[0.0]);
    }

    #[test]
    fn csv_ingestion() {
        let text = "g1,group,g2\n1.0,ctrl,2\n2.0,ctrl,3\n3,trt,4\n4,trt,5\n";
        let dm = DataMatrix::read_csv(text.as_bytes()).unwrap();
        assert_eq!((dm.n_rows(), dm.n_cols()), (4, 2));
        assert_eq!(dm.column_names(), &["g1".to_string(), "g2".to_string()]);
        assert_eq!(dm.groups().unwrap().names(), &["ctrl".to_string(), "trt".to_string()]);
        assert_eq!(dm.get(2, 1), 4.0);
    }

    #[test]
    fn csv_missing_value_names_line_and_column() {
        let text = "a,b\n1,2\n3,\n";
        let err = DataMatrix::read_csv(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("'b'"), "{err}");
        let err = DataMatrix::read_csv("a\nNA\n".as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(DataMatrix::read_csv("a,group\n1,x\n2,y\n3,z\n".as_bytes()).is_err());
    }

    #[test]
    fn flip_sides_mirror_and_involution() {
        let left = StatisticVector::new(vec![-1.0], vec![0.0], DIR).unwrap();
        let right = StatisticVector::new(vec![1.0], vec![0.0], DIR).unwrap();
        let converted = apply_margin_shift(&left, &MarginShift::FlipSides(vec![0])).unwrap();
        assert_eq!(converted, right);

        let sv = StatisticVector::new(vec![1.5, -0.5, 2.0], vec![0.5, 1.0, -1.0], DIR).unwrap();
        let flip = MarginShift::FlipSides(vec![0, 2]);
        let twice = apply_margin_shift(&apply_margin_shift(&sv, &flip).unwrap(), &flip).unwrap();
        assert_eq!(twice, sv);
    }

    #[test]
    fn shifts_are_directional_only() {
        let sv = StatisticVector::with_common_margin(vec![0.1], 1.0, HypothesisShape::Equivalence).unwrap();
        assert!(apply_margin_shift(&sv, &MarginShift::ToCommon(2.0)).is_err());
    }

    proptest! {
        #[test]
        fn common_margin_preserves_rejection_sets(
            pairs in prop::collection::vec((-50i32..50, -20i32..20), 1..30),
            delta in -2.0f64..2.0,
            tk in 0i32..20,
        ) {
            // Quarter-integer lattice keeps the translated comparisons exact.
            let stats: Vec<f64> = pairs.iter().map(|p| p.0 as f64 * 0.25).collect();
            let margins: Vec<f64> = pairs.iter().map(|p| p.1 as f64 * 0.25).collect();
            let delta = (delta * 4.0).round() / 4.0;
            let t = tk as f64 * 0.25;
            let sv = StatisticVector::new(stats, margins, DIR).unwrap();
            let shifted = apply_margin_shift(&sv, &MarginShift::ToCommon(delta)).unwrap();
            let (a, b) = (build_profile(&sv), build_profile(&shifted));
            prop_assert_eq!(a.rejected(t).unwrap(), b.rejected(t).unwrap());
            prop_assert_eq!(a.reflected(t).unwrap(), b.reflected(t).unwrap());
        }

        #[test]
        fn row_order_within_groups_does_not_matter(
            values in prop::collection::vec(-10.0f64..10.0, 12),
            rot in 0usize..3,
        ) {
            let col: Vec<f64> = values[..6].to_vec();
            let col2: Vec<f64> = values[6..].to_vec();
            let labels = ["a", "a", "a", "b", "b", "b"];
            let dm = labeled(&[col.clone(), col2.clone()], &labels);
            let mut c1 = col.clone();
            let mut c2 = col2.clone();
            c1[..3].rotate_left(rot);
            c2[..3].rotate_left(rot);
            let dm2 = labeled(&[c1, c2], &labels);
            let a = two_group_statistics(&dm, &Margins::Common(0.0), DIR).unwrap();
            let b = two_group_statistics(&dm2, &Margins::Common(0.0), DIR).unwrap();
            for (x, y) in a.stats().iter().zip(b.stats()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn label_swap_negates(values in prop::collection::vec(-10.0f64..10.0, 8)) {
            let dm = labeled(&[values], &["a", "b", "a", "b", "a", "b", "a", "b"]);
            let swapped = dm.clone().with_groups(dm.groups().unwrap().swapped()).unwrap();
            let a = two_group_statistics(&dm, &Margins::Common(0.0), DIR).unwrap();
            let b = two_group_statistics(&swapped, &Margins::Common(0.0), DIR).unwrap();
            prop_assert_eq!(a.stats()[0], -b.stats()[0]);
        }

        #[test]
        fn welch_location_invariant(values in prop::collection::vec(-10.0f64..10.0, 8), shift in -5i32..5) {
            let labels = ["a", "a", "a", "a", "b", "b", "b", "b"];
            let shifted: Vec<f64> = values.iter().map(|v| v + shift as f64).collect();
            let a = welch_t_statistics(&labeled(&[values], &labels), &Margins::Common(1.0), DIR);
            let b = welch_t_statistics(&labeled(&[shifted], &labels), &Margins::Common(1.0), DIR);
            if let (Ok(a), Ok(b)) = (a, b) {
                prop_assert!((a.statistics.stats()[0] - b.statistics.stats()[0]).abs() < 1e-8);
            }
        }
    }
}
