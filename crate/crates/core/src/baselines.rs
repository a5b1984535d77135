//! Competitor methods: permutation-based SAM bounds, Benjamini-Hochberg,
//! the Lehmann-Romano step-down, and exact single-hypothesis tests.
//!
//! SAM bounds here are for margins of zero. A transformed statistic vector
//! `T(gX)` is counted as `R(gX, t) = #{j : T_j(gX) > t}`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::PValueVector;
use crate::ct_oracle::{run_closure, LocalTestFamily, MAX_ORACLE_M};
use crate::error::{check_gamma, check_threshold, Error, Result};
use crate::estimators::{FdpEstimate, Guarantee};
use crate::exec::Execution;
use crate::statistics::{group_mean_differences, DataMatrix, GroupLabels};

/// Largest full sign-flip group, `2^20` elements.
pub const MAX_SIGN_FLIP_ROWS: usize = 20;
/// Largest fully enumerated two-group split set.
pub const MAX_SPLITS: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum GroupKind {
    /// All `2^n` sign flips of `n` rows.
    SignFlipFull { n: usize },
    /// Identity plus `b - 1` random sign flips drawn with replacement. With
    /// `b = 2` the second element is the global negation instead.
    SignFlipSubsample { n: usize, b: usize, seed: u64 },
    /// All `C(2n, n)` splits of two groups of `n` rows.
    CaseControlSwap { n: usize },
    /// Identity plus `b - 1` random balanced splits drawn with replacement.
    /// With `b = 2` the second element swaps the two groups.
    PermutationSubsample { n: usize, b: usize, seed: u64 },
}

#[derive(Debug, Clone)]
enum Elements {
    AllFlips,
    Masks(Vec<u64>),
    Explicit(Vec<Vec<bool>>),
}

/// A set of data transformations whose first element is the identity.
///
/// Sign-flip elements mark the rows to negate. Two-group elements mark the
/// positions assigned to the first group, where positions list the first
/// group's rows followed by the second group's rows, both in row order.
#[derive(Debug, Clone)]
pub struct TransformationGroup {
    kind: GroupKind,
    elements: Elements,
    len: usize,
}

impl TransformationGroup {
    pub fn new(kind: GroupKind) -> Result<Self> {
        let (elements, len) = match kind {
            GroupKind::SignFlipFull { n } => {
                if n == 0 {
                    return Err(Error::Empty);
                }
                if n > MAX_SIGN_FLIP_ROWS {
                    return Err(Error::Infeasible(format!(
                        "full sign-flip group needs 2^{n} elements; use a subsampled group for n > {MAX_SIGN_FLIP_ROWS}"
                    )));
                }
                (Elements::AllFlips, 1usize << n)
            }
            GroupKind::CaseControlSwap { n } => {
                let masks = balanced_masks(n)?;
                let len = masks.len();
                (Elements::Masks(masks), len)
            }
            GroupKind::SignFlipSubsample { n, b, seed } => {
                check_subsample(n, b)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut elems = vec![vec![false; n]];
                if b == 2 {
                    elems.push(vec![true; n]);
                } else {
                    for _ in 1..b {
                        elems.push((0..n).map(|_| rng.random::<bool>()).collect());
                    }
                }
                (Elements::Explicit(elems), b)
            }
            GroupKind::PermutationSubsample { n, b, seed } => {
                check_subsample(n, b)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let identity: Vec<bool> = (0..2 * n).map(|p| p < n).collect();
                let mut elems = vec![identity.clone()];
                if b == 2 {
                    elems.push(identity.iter().map(|x| !x).collect());
                } else {
                    for _ in 1..b {
                        let mut e = identity.clone();
                        e.shuffle(&mut rng);
                        elems.push(e);
                    }
                }
                (Elements::Explicit(elems), b)
            }
        };
        Ok(Self { kind, elements, len })
    }

    /// The two-element group `{id, -id}` on `n` rows.
    pub fn sign_flip_pair(n: usize) -> Result<Self> {
        Self::new(GroupKind::SignFlipSubsample { n, b: 2, seed: 0 })
    }

    /// The two-element group `{id, swap}` on two groups of `n` rows.
    pub fn swap_pair(n: usize) -> Result<Self> {
        Self::new(GroupKind::PermutationSubsample { n, b: 2, seed: 0 })
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_sign_flip(&self) -> bool {
        matches!(
            self.kind,
            GroupKind::SignFlipFull { .. } | GroupKind::SignFlipSubsample { .. }
        )
    }

    /// Rows of the data the group acts on.
    pub fn n_rows(&self) -> usize {
        match self.kind {
            GroupKind::SignFlipFull { n } | GroupKind::SignFlipSubsample { n, .. } => n,
            GroupKind::CaseControlSwap { n } | GroupKind::PermutationSubsample { n, .. } => 2 * n,
        }
    }

    /// Element `k` as a boolean mask; element 0 is the identity.
    pub fn element(&self, k: usize) -> Vec<bool> {
        let n = self.n_rows();
        match &self.elements {
            Elements::AllFlips => (0..n).map(|i| k >> i & 1 == 1).collect(),
            Elements::Masks(masks) => (0..n).map(|i| masks[k] >> i & 1 == 1).collect(),
            Elements::Explicit(elems) => elems[k].clone(),
        }
    }
}

fn check_subsample(n: usize, b: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Empty);
    }
    if b < 2 {
        return Err(Error::InvalidArgument(
            "a transformation group needs at least the identity and one other element".into(),
        ));
    }
    Ok(())
}

/// All `n`-subsets of `2n` positions as bitmasks, identity `(1 << n) - 1`
/// first, in increasing numeric order.
fn balanced_masks(n: usize) -> Result<Vec<u64>> {
    if n == 0 {
        return Err(Error::Empty);
    }
    let count = binomial(2 * n, n);
    if count.is_none_or(|c| c > MAX_SPLITS as u128) {
        return Err(Error::Infeasible(format!(
            "C({}, {n}) splits exceed {MAX_SPLITS}; use a subsampled permutation group",
            2 * n
        )));
    }
    let limit = 1u64 << (2 * n);
    let mut masks = Vec::with_capacity(count.unwrap_or(0) as usize);
    let mut v: u64 = (1 << n) - 1;
    while v < limit {
        masks.push(v);
        // Next integer with the same number of set bits.
        let c = v & v.wrapping_neg();
        let r = v + c;
        v = (((r ^ v) >> 2) / c) | r;
    }
    Ok(masks)
}

fn binomial(n: usize, k: usize) -> Option<u128> {
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        acc = acc.checked_mul(n as u128 - i)? / (i + 1);
    }
    Some(acc)
}

/// 1-based index `ceil((1 - alpha) * size)` of the upper order statistic,
/// at least 1. The small offset keeps exact products such as
/// `(1 - 1/6) * 6` from rounding up.
pub fn upper_order_index(alpha: f64, size: usize) -> usize {
    (((1.0 - alpha) * size as f64 - 1e-9).ceil() as usize).clamp(1, size)
}

fn check_alpha(alpha: f64) -> Result<f64> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(alpha)
    } else {
        Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Statistic applied to each transformed data matrix.
#[derive(Clone, Copy)]
pub enum SamStatistic<'a> {
    /// `n^-1/2 1'X^j` on one-sample data, for sign-flip groups.
    ScaledColumnSums,
    /// `n^1/2 (Zbar_j - Ybar_j)` on two-group data, for permutation groups.
    GroupMeanDifference,
    /// Any statistic of the transformed matrix. Sign-flip groups pass the
    /// matrix with rows negated; permutation groups pass it relabeled.
    Custom(&'a (dyn Fn(&DataMatrix) -> Result<Vec<f64>> + Sync)),
}

impl std::fmt::Debug for SamStatistic<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SamStatistic::ScaledColumnSums => f.write_str("ScaledColumnSums"),
            SamStatistic::GroupMeanDifference => f.write_str("GroupMeanDifference"),
            SamStatistic::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Split point and per-pattern column sums of the low and high row halves.
type HalfSums = (usize, Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Statistic vectors of every group element, computed on demand.
struct Transformed<'a> {
    dm: &'a DataMatrix,
    stat: SamStatistic<'a>,
    group: &'a TransformationGroup,
    /// Rows in position order, for two-group elements.
    order: Vec<usize>,
    names: [String; 2],
    /// Partial sums over the two row halves for all sign patterns.
    halves: Option<HalfSums>,
}

impl<'a> Transformed<'a> {
    fn new(dm: &'a DataMatrix, stat: SamStatistic<'a>, group: &'a TransformationGroup) -> Result<Self> {
        if group.n_rows() != dm.n_rows() {
            return Err(Error::InvalidArgument(format!(
                "group acts on {} rows, data has {}",
                group.n_rows(),
                dm.n_rows()
            )));
        }
        let mut order = Vec::new();
        let mut names = [String::new(), String::new()];
        if group.is_sign_flip() {
            if matches!(stat, SamStatistic::GroupMeanDifference) {
                return Err(Error::InvalidArgument(
                    "mean differences need a permutation group".into(),
                ));
            }
        } else {
            if matches!(stat, SamStatistic::ScaledColumnSums) {
                return Err(Error::InvalidArgument(
                    "column sums need a sign-flip group".into(),
                ));
            }
            let labels = dm.groups().ok_or_else(|| {
                Error::InvalidArgument("permutation groups need group labels".into())
            })?;
            let (a, b) = labels.sizes();
            if a != b {
                return Err(Error::InvalidArgument(format!(
                    "groups must be equally large, got {a} and {b}"
                )));
            }
            let first = labels.in_first();
            order.extend((0..dm.n_rows()).filter(|&i| first[i]));
            order.extend((0..dm.n_rows()).filter(|&i| !first[i]));
            names = labels.names().clone();
        }
        let halves = match (group.kind(), stat) {
            (GroupKind::SignFlipFull { n }, SamStatistic::ScaledColumnSums) => {
                let h = n / 2;
                Some((h, half_sums(dm, 0, h), half_sums(dm, h, *n)))
            }
            _ => None,
        };
        Ok(Self {
            dm,
            stat,
            group,
            order,
            names,
            halves,
        })
    }

    fn statistics(&self, k: usize) -> Result<Vec<f64>> {
        let m = self.dm.n_cols();
        if let Some((h, lo, hi)) = &self.halves {
            let (a, b) = (&lo[k & ((1 << h) - 1)], &hi[k >> h]);
            let scale = 1.0 / (self.dm.n_rows() as f64).sqrt();
            return Ok((0..m).map(|j| (a[j] + b[j]) * scale).collect());
        }
        let g = self.group.element(k);
        if self.group.is_sign_flip() {
            match self.stat {
                SamStatistic::ScaledColumnSums => Ok(flipped_scaled_sums(self.dm, &g)),
                SamStatistic::Custom(f) => f(&flip_rows(self.dm, &g)?),
                SamStatistic::GroupMeanDifference => unreachable!(),
            }
        } else {
            let mut in_first = vec![false; self.dm.n_rows()];
            for (p, &row) in self.order.iter().enumerate() {
                in_first[row] = g[p];
            }
            match self.stat {
                SamStatistic::GroupMeanDifference => {
                    Ok(group_mean_differences(self.dm, &in_first, self.dm.n_rows() / 2))
                }
                SamStatistic::Custom(f) => {
                    let labels = GroupLabels::from_membership(self.names.clone(), in_first);
                    f(&self.dm.clone().with_groups(labels)?)
                }
                SamStatistic::ScaledColumnSums => unreachable!(),
            }
        }
    }
}

/// Signed column sums over rows `from..to` for every sign pattern of those
/// rows, each accumulated in row order.
fn half_sums(dm: &DataMatrix, from: usize, to: usize) -> Vec<Vec<f64>> {
    let rows = to - from;
    (0..1usize << rows)
        .map(|mask| {
            let mut acc = vec![0.0; dm.n_cols()];
            for i in from..to {
                let s = if mask >> (i - from) & 1 == 1 { -1.0 } else { 1.0 };
                for (a, &x) in acc.iter_mut().zip(dm.row(i)) {
                    *a += s * x;
                }
            }
            acc
        })
        .collect()
}

fn flipped_scaled_sums(dm: &DataMatrix, flips: &[bool]) -> Vec<f64> {
    let mut acc = vec![0.0; dm.n_cols()];
    for (i, &flip) in flips.iter().enumerate() {
        let s = if flip { -1.0 } else { 1.0 };
        for (a, &x) in acc.iter_mut().zip(dm.row(i)) {
            *a += s * x;
        }
    }
    let scale = 1.0 / (dm.n_rows() as f64).sqrt();
    acc.into_iter().map(|a| a * scale).collect()
}

fn flip_rows(dm: &DataMatrix, flips: &[bool]) -> Result<DataMatrix> {
    let mut values = dm.values().to_vec();
    for (i, &flip) in flips.iter().enumerate() {
        if flip {
            for v in &mut values[i * dm.n_cols()..(i + 1) * dm.n_cols()] {
                *v = -*v;
            }
        }
    }
    let out = DataMatrix::new(dm.n_rows(), dm.n_cols(), values)?
        .with_column_names(dm.column_names().to_vec())?;
    match dm.groups() {
        Some(g) => out.with_groups(g.clone()),
        None => Ok(out),
    }
}

/// `R(gX, t)` for every element `g`, in element order.
pub fn rejection_counts(
    dm: &DataMatrix,
    stat: SamStatistic<'_>,
    group: &TransformationGroup,
    t: f64,
    exec: Execution,
) -> Result<Vec<usize>> {
    check_threshold(t)?;
    let tr = Transformed::new(dm, stat, group)?;
    let m = dm.n_cols();
    exec.map_indexed(group.len(), |k| {
        let stats = tr.statistics(k)?;
        if stats.len() != m {
            return Err(Error::InvalidArgument(format!(
                "statistic returned {} values for {m} columns",
                stats.len()
            )));
        }
        Ok(stats.iter().filter(|&&x| x > t).count())
    })
    .into_iter()
    .collect()
}

/// SAM bound `V-bar(t) = min(R^(k), R(X, t))` with `k = ceil((1 - alpha)|G|)`.
///
/// The returned estimate carries `R^(k)` in `r_minus`.
pub fn sam_bound(
    dm: &DataMatrix,
    stat: SamStatistic<'_>,
    group: &TransformationGroup,
    t: f64,
    alpha: f64,
    exec: Execution,
) -> Result<FdpEstimate> {
    check_alpha(alpha)?;
    let tr = Transformed::new(dm, stat, group)?;
    let identity = tr.statistics(0)?;
    let mut counts = rejection_counts(dm, stat, group, t, exec)?;
    let k = upper_order_index(alpha, counts.len());
    let (_, quantile, _) = counts.select_nth_unstable(k - 1);
    let rejected = (0..identity.len()).filter(|&j| identity[j] > t).collect();
    Ok(FdpEstimate::from_counts(t, rejected, *quantile, Guarantee::GroupInvariance))
}

/// SAM with the two-element group `{id, h}`, where `h` negates all rows of
/// one-sample data or swaps the groups of two-group data.
pub fn sam_two_transform(
    dm: &DataMatrix,
    stat: SamStatistic<'_>,
    t: f64,
    exec: Execution,
) -> Result<FdpEstimate> {
    let two_group = match stat {
        SamStatistic::ScaledColumnSums => false,
        SamStatistic::GroupMeanDifference => true,
        SamStatistic::Custom(_) => dm.groups().is_some(),
    };
    let group = if two_group {
        TransformationGroup::swap_pair(dm.n_rows() / 2)?
    } else {
        TransformationGroup::sign_flip_pair(dm.n_rows())?
    };
    sam_bound(dm, stat, &group, t, 0.5, exec)
}

/// Rejection sets of every group element as bitmasks over at most
/// `MAX_ORACLE_M` hypotheses; element 0 is the identity.
pub fn rejection_masks(
    dm: &DataMatrix,
    stat: SamStatistic<'_>,
    group: &TransformationGroup,
    t: f64,
    exec: Execution,
) -> Result<Vec<u32>> {
    check_threshold(t)?;
    if dm.n_cols() > MAX_ORACLE_M {
        return Err(Error::Infeasible(format!(
            "closed testing enumerates 2^m subsets; m = {} exceeds {MAX_ORACLE_M}",
            dm.n_cols()
        )));
    }
    let tr = Transformed::new(dm, stat, group)?;
    exec.map_indexed(group.len(), |k| {
        let stats = tr.statistics(k)?;
        Ok(stats
            .iter()
            .enumerate()
            .filter(|(_, &x)| x > t)
            .fold(0u32, |acc, (j, _)| acc | 1 << j))
    })
    .into_iter()
    .collect()
}

/// SAM improved by closed testing over all subsets, for `m <= 12`. The
/// bound is `t_alpha(R(t))` of the closure of the subset-restricted SAM
/// local tests.
pub fn sam_ct(
    dm: &DataMatrix,
    stat: SamStatistic<'_>,
    group: &TransformationGroup,
    t: f64,
    alpha: f64,
    exec: Execution,
) -> Result<FdpEstimate> {
    check_alpha(alpha)?;
    let masks = rejection_masks(dm, stat, group, t, exec)?;
    let identity = masks[0];
    let family = LocalTestFamily::sam_subset(dm.n_cols(), masks, alpha)?;
    let closure = run_closure(&family)?;
    let bound = closure.t_alpha(identity);
    let rejected = (0..dm.n_cols()).filter(|&j| identity >> j & 1 == 1).collect();
    Ok(FdpEstimate::from_counts(t, rejected, bound, Guarantee::GroupInvariance))
}

fn sorted_order(pvals: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pvals.len()).collect();
    order.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]));
    order
}

/// Benjamini-Hochberg step-up at level `gamma`. Returns sorted 0-based
/// indices.
pub fn benjamini_hochberg(pvals: &PValueVector, gamma: f64) -> Result<Vec<usize>> {
    check_gamma(gamma)?;
    let p = &pvals.pvals;
    let m = p.len() as f64;
    let order = sorted_order(p);
    let k = (1..=order.len())
        .rev()
        .find(|&i| p[order[i - 1]] <= i as f64 * gamma / m)
        .unwrap_or(0);
    let mut out = order[..k].to_vec();
    out.sort_unstable();
    Ok(out)
}

/// Critical values `alpha (floor(gamma i) + 1) / (m + floor(gamma i) + 1 - i)`
/// for `i = 1..m`.
pub fn lehmann_romano_critical_values(m: usize, gamma: f64, alpha: f64) -> Vec<f64> {
    (1..=m)
        .map(|i| {
            let fl = (gamma * i as f64 + 1e-9).floor();
            alpha * (fl + 1.0) / (m as f64 + fl + 1.0 - i as f64)
        })
        .collect()
}

/// Lehmann-Romano step-down controlling `P(FDP > gamma) <= alpha`.
/// Returns sorted 0-based indices.
pub fn lehmann_romano_stepdown(pvals: &PValueVector, gamma: f64, alpha: f64) -> Result<Vec<usize>> {
    check_gamma(gamma)?;
    check_alpha(alpha)?;
    let p = &pvals.pvals;
    let order = sorted_order(p);
    let crit = lehmann_romano_critical_values(p.len(), gamma, alpha);
    let k = order
        .iter()
        .zip(&crit)
        .take_while(|(&j, &c)| p[j] <= c)
        .count();
    let mut out = order[..k].to_vec();
    out.sort_unstable();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactTestResult {
    pub reject: bool,
    pub statistic: f64,
    /// The `ceil((1 - alpha) N)`-th smallest transformed statistic.
    pub critical_value: f64,
    pub transformations: usize,
    /// Seed of the random transformations, when sampled.
    pub seed: Option<u64>,
}

fn exact_decision(mut stats: Vec<f64>, alpha: f64, seed: Option<u64>) -> ExactTestResult {
    let statistic = stats[0];
    let k = upper_order_index(alpha, stats.len());
    let (_, critical, _) = stats.select_nth_unstable_by(k - 1, f64::total_cmp);
    ExactTestResult {
        reject: statistic > *critical,
        statistic,
        critical_value: *critical,
        transformations: stats.len(),
        seed,
    }
}

/// Sign-flip test of `H0: theta <= 0` over all `2^n` sign patterns.
pub fn sign_flip_test(x: &[f64], alpha: f64) -> Result<ExactTestResult> {
    check_alpha(alpha)?;
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite observation {v}")));
    }
    let group = TransformationGroup::new(GroupKind::SignFlipFull { n: x.len() })?;
    let scale = 1.0 / (x.len() as f64).sqrt();
    let stats = (0..group.len())
        .map(|k| {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &v)| if k >> i & 1 == 1 { -v } else { v })
                .sum();
            s * scale
        })
        .collect();
    Ok(exact_decision(stats, alpha, None))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermutationMode {
    /// All `C(2n, n)` splits.
    Full,
    /// Identity plus `b - 1` random splits.
    Sampled { b: usize, seed: u64 },
}

/// Two-group permutation test of `H0: theta_z - theta_y <= 0` with the
/// statistic `n^1/2 (Zbar - Ybar)`.
pub fn two_group_permutation_test(
    z: &[f64],
    y: &[f64],
    alpha: f64,
    mode: PermutationMode,
) -> Result<ExactTestResult> {
    check_alpha(alpha)?;
    if z.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "groups must be equally large, got {} and {}",
            z.len(),
            y.len()
        )));
    }
    let n = z.len();
    let pooled: Vec<f64> = z.iter().chain(y).copied().collect();
    if let Some(v) = pooled.iter().find(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite observation {v}")));
    }
    let (kind, seed) = match mode {
        PermutationMode::Full => (GroupKind::CaseControlSwap { n }, None),
        PermutationMode::Sampled { b, seed } => (GroupKind::PermutationSubsample { n, b, seed }, Some(seed)),
    };
    let group = TransformationGroup::new(kind)?;
    let scale = 1.0 / (n as f64).sqrt();
    let stats = (0..group.len())
        .map(|k| {
            let g = group.element(k);
            let s: f64 = pooled
                .iter()
                .zip(&g)
                .map(|(&v, &first)| if first { v } else { -v })
                .sum();
            s * scale
        })
        .collect();
    Ok(exact_decision(stats, alpha, seed))
}
