//! Monte Carlo scenarios with known truth, and studies comparing the
//! estimators and procedures on them.
//!
//! Data are `X_ij = sqrt(1 - rho) e_ij + sqrt(rho) eta_i + mu_j / sqrt(n)`
//! with unit-variance symmetric noise, so `T_j = n^-1/2 sum_i X_ij` has mean
//! `mu_j`, unit variance, and correlation `rho` between columns sharing a
//! row effect.
//!
//! Every replicate draws from its own stream of a seeded generator and the
//! per-replicate results are summed in replicate order, so results do not
//! depend on the number of threads.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::baselines::{
    benjamini_hochberg, lehmann_romano_stepdown, sam_bound, sam_ct, sam_two_transform, GroupKind, SamStatistic,
    TransformationGroup, MAX_SIGN_FLIP_ROWS,
};
use crate::control::{control_mfdp, directional_pvalues, equivalence_pvalues, NullDensity, NullModel, PValueVector};
use crate::ct_oracle::MAX_ORACLE_M;
use crate::error::{check_gamma, check_threshold, Error, Result};
use crate::estimators::{estimate_directional_randomized, estimate_equivalence_windowed, plain_estimate, CoinSource};
use crate::exec::Execution;
use crate::hypothesis::{HypothesisShape, StatisticVector};
use crate::profile::build_profile;
use crate::statistics::{scaled_column_sums, DataMatrix};

/// Unit-variance symmetric noise.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum Noise {
    #[default]
    Normal,
    Laplace,
    /// Student t with `df >= 3` degrees of freedom, rescaled.
    StudentT { df: f64 },
}

impl Noise {
    fn validate(&self) -> Result<()> {
        match *self {
            Noise::StudentT { df } if df.is_nan() || df < 3.0 => Err(Error::InvalidArgument(format!(
                "Student t noise needs df >= 3, got {df}"
            ))),
            _ => Ok(()),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Noise::Normal => rng.sample(StandardNormal),
            Noise::Laplace => {
                let u: f64 = rng.random::<f64>() - 0.5;
                -u.signum() * (1.0 - 2.0 * u.abs()).ln() / std::f64::consts::SQRT_2
            }
            Noise::StudentT { df } => {
                let t = StudentT::new(df).expect("validated df").sample(rng);
                t * ((df - 2.0) / df).sqrt()
            }
        }
    }
}

/// How row effects are shared between columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dependence {
    /// One row effect shared by all columns.
    #[default]
    Homogeneous,
    /// Separate, independent row effects for true-null and false-null
    /// columns, so the two blocks are independent of each other.
    IndependentBlocks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub n: usize,
    pub m: usize,
    /// Fraction of true hypotheses; the first `floor(pi0 m)` columns.
    pub pi0: f64,
    #[serde(default)]
    pub rho: f64,
    /// Shift added to each observation of a false-null column.
    #[serde(default)]
    pub d: f64,
    pub shape: HypothesisShape,
    #[serde(default)]
    pub delta: f64,
    /// Distance of true-null means from the margin, into the null region.
    #[serde(default)]
    pub null_offset: f64,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default)]
    pub dependence: Dependence,
    pub replicates: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n == 0 || self.m == 0 || self.replicates == 0 {
            return bad("n, m and replicates must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.pi0) {
            return bad(format!("pi0 must lie in [0, 1], got {}", self.pi0));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if !(self.d >= 0.0 && self.d.is_finite()) {
            return bad(format!("d must be finite and non-negative, got {}", self.d));
        }
        if !(self.null_offset >= 0.0 && self.null_offset.is_finite()) {
            return bad(format!("null_offset must be finite and non-negative, got {}", self.null_offset));
        }
        if !self.delta.is_finite() || (self.shape == HypothesisShape::Equivalence && self.delta <= 0.0) {
            return bad(format!("invalid margin {} for {} hypotheses", self.delta, self.shape));
        }
        self.noise.validate()
    }

    pub fn true_nulls(&self) -> usize {
        (self.pi0 * self.m as f64 + 1e-9).floor() as usize
    }

    /// Means of the statistics. Directional: `delta - null_offset` for true
    /// nulls, `delta + sqrt(n) d` otherwise. Equivalence: true nulls sit at
    /// `+-(delta + null_offset)` with alternating signs, false nulls at
    /// `+-max(delta - sqrt(n) d, 0)`.
    pub fn means(&self) -> Vec<f64> {
        let m0 = self.true_nulls();
        let shift = (self.n as f64).sqrt() * self.d;
        (0..self.m)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                match (self.shape, j < m0) {
                    (HypothesisShape::DirectionalRight, true) => self.delta - self.null_offset,
                    (HypothesisShape::DirectionalRight, false) => self.delta + shift,
                    (HypothesisShape::Equivalence, true) => sign * (self.delta + self.null_offset),
                    (HypothesisShape::Equivalence, false) => sign * (self.delta - shift).max(0.0),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTruth {
    /// 0-based indices of the true hypotheses.
    pub null_set: Vec<usize>,
    pub mu: Vec<f64>,
    #[serde(skip)]
    is_null: Vec<bool>,
}

impl ScenarioTruth {
    fn from_means(mu: Vec<f64>, spec: &ScenarioSpec) -> Self {
        let is_null: Vec<bool> = mu
            .iter()
            .map(|&u| match spec.shape {
                HypothesisShape::DirectionalRight => u <= spec.delta,
                HypothesisShape::Equivalence => u.abs() >= spec.delta,
            })
            .collect();
        let null_set = (0..mu.len()).filter(|&j| is_null[j]).collect();
        Self { null_set, mu, is_null }
    }

    pub fn is_null(&self, j: usize) -> bool {
        self.is_null[j]
    }

    pub fn false_count(&self) -> usize {
        self.mu.len() - self.null_set.len()
    }

    /// `|N intersect rejected|`.
    pub fn false_discoveries(&self, rejected: &[usize]) -> usize {
        rejected.iter().filter(|&&j| self.is_null[j]).count()
    }

    /// `|N intersect rejected| / max(|rejected|, 1)`.
    pub fn fdp(&self, rejected: &[usize]) -> f64 {
        self.false_discoveries(rejected) as f64 / rejected.len().max(1) as f64
    }

    /// Fraction of false hypotheses rejected; `None` without any.
    pub fn power(&self, rejected: &[usize]) -> Option<f64> {
        let m1 = self.false_count();
        (m1 > 0).then(|| (rejected.len() - self.false_discoveries(rejected)) as f64 / m1 as f64)
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const AUX_SALT: u64 = 0x5851_F42D_4C95_7F2D;

/// Auxiliary randomness of a replicate (coins, sampled groups), separate
/// from the data stream.
pub fn auxiliary_rng(spec: &ScenarioSpec, replicate: usize) -> ChaCha8Rng {
    stream_rng(spec.seed ^ AUX_SALT, replicate as u64)
}

/// Data and truth of one replicate; deterministic in `(spec.seed, replicate)`.
pub fn generate(spec: &ScenarioSpec, replicate: usize) -> Result<(DataMatrix, ScenarioTruth)> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, replicate as u64);
    let mu = spec.means();
    let truth = ScenarioTruth::from_means(mu, spec);
    let (n, m) = (spec.n, spec.m);
    let (a, b) = ((1.0 - spec.rho).sqrt(), spec.rho.sqrt());
    let root_n = (n as f64).sqrt();
    let col_shift: Vec<f64> = truth.mu.iter().map(|u| u / root_n).collect();
    let mut values = Vec::with_capacity(n * m);
    for _ in 0..n {
        let eta_null = spec.noise.sample(&mut rng);
        let eta_alt = match spec.dependence {
            Dependence::Homogeneous => eta_null,
            Dependence::IndependentBlocks => spec.noise.sample(&mut rng),
        };
        for (&null, &shift) in truth.is_null.iter().zip(&col_shift) {
            let eta = if null { eta_null } else { eta_alt };
            values.push(a * spec.noise.sample(&mut rng) + b * eta + shift);
        }
    }
    Ok((DataMatrix::new(n, m, values)?, truth))
}

/// Statistics `T_j = n^-1/2 sum_i X_ij` of a generated matrix.
pub fn statistics_of(spec: &ScenarioSpec, dm: &DataMatrix) -> Result<StatisticVector> {
    StatisticVector::with_common_margin(scaled_column_sums(dm), spec.delta, spec.shape)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Plain estimator at each threshold, and `s+` control at each gamma.
    Novel,
    NovelRandomized,
    /// Equivalence only: the estimator with a bounded reflected region.
    NovelWindowed,
    /// SAM with all sign flips (sampled when `n > 20`).
    SamFull,
    /// SAM with `{id, -id}`.
    #[serde(rename = "sam-2")]
    SamTwo,
    /// SAM improved by closed testing, `m <= 12`.
    SamCt,
    Bh,
    Lr,
    /// Exports the p-values of the first replicate of every cell.
    FlexiblePvalsExport,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Novel => "novel",
            Method::NovelRandomized => "novel-randomized",
            Method::NovelWindowed => "novel-windowed",
            Method::SamFull => "sam-full",
            Method::SamTwo => "sam-2",
            Method::SamCt => "sam-ct",
            Method::Bh => "bh",
            Method::Lr => "lr",
            Method::FlexiblePvalsExport => "flexible-pvals-export",
        }
    }

    fn estimates(self) -> bool {
        matches!(
            self,
            Method::Novel | Method::NovelRandomized | Method::NovelWindowed | Method::SamFull | Method::SamTwo | Method::SamCt
        )
    }

    fn controls(self) -> bool {
        matches!(self, Method::Novel | Method::Bh | Method::Lr)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub n: usize,
    pub m: usize,
    pub shape: HypothesisShape,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub null_offset: f64,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default)]
    pub dependence: Dependence,
    pub pi0: Vec<f64>,
    #[serde(default = "zero_grid")]
    pub rho: Vec<f64>,
    #[serde(default = "zero_grid")]
    pub d: Vec<f64>,
    pub methods: Vec<Method>,
    /// Thresholds at which estimates are evaluated.
    #[serde(default = "zero_grid")]
    pub thresholds: Vec<f64>,
    /// Targets for the controlling procedures.
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    /// Group size for SAM when the full sign-flip group is too large.
    #[serde(default = "default_sam_transformations")]
    pub sam_transformations: usize,
    pub replicates: usize,
    pub seed: u64,
}

fn zero_grid() -> Vec<f64> {
    vec![0.0]
}

fn default_gammas() -> Vec<f64> {
    vec![0.1]
}

fn default_sam_transformations() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub cell_id: usize,
    pub scenario: ScenarioSpec,
}

impl StudySpec {
    /// Cells of the `pi0 x rho x d` grid in that nesting order, each with
    /// its own derived seed.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &pi0 in &self.pi0 {
            for &rho in &self.rho {
                for &d in &self.d {
                    let cell_id = cells.len();
                    let scenario = ScenarioSpec {
                        n: self.n,
                        m: self.m,
                        pi0,
                        rho,
                        d,
                        shape: self.shape,
                        delta: self.delta,
                        null_offset: self.null_offset,
                        noise: self.noise,
                        dependence: self.dependence,
                        replicates: self.replicates,
                        seed: cell_seed(self.seed, cell_id),
                    };
                    cells.push(Cell { cell_id, scenario });
                }
            }
        }
        cells
    }

    pub fn validate(&self) -> Result<()> {
        if self.pi0.is_empty() || self.rho.is_empty() || self.d.is_empty() {
            return Err(Error::InvalidArgument("pi0, rho and d grids must be nonempty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods selected".into()));
        }
        for &t in &self.thresholds {
            check_threshold(t)?;
        }
        for &g in &self.gammas {
            check_gamma(g)?;
        }
        for cell in self.cells() {
            cell.scenario.validate()?;
        }
        let directional = self.shape == HypothesisShape::DirectionalRight;
        for &method in &self.methods {
            match method {
                Method::NovelRandomized | Method::SamFull | Method::SamTwo | Method::SamCt if !directional => {
                    return Err(Error::Infeasible(format!("{method} is implemented for directional hypotheses only")))
                }
                Method::NovelWindowed if directional => {
                    return Err(Error::Infeasible(format!("{method} applies to equivalence hypotheses only")))
                }
                Method::SamCt if self.m > MAX_ORACLE_M => {
                    return Err(Error::Infeasible(format!(
                        "sam-ct enumerates all 2^m subsets; m = {} exceeds {MAX_ORACLE_M}, lower m or drop sam-ct",
                        self.m
                    )))
                }
                Method::SamFull if self.n > MAX_SIGN_FLIP_ROWS && self.sam_transformations < 2 => {
                    return Err(Error::InvalidArgument("sam_transformations must be at least 2".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn cell_seed(seed: u64, cell: usize) -> u64 {
    seed ^ (cell as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MetricKind {
    Probability,
    Mean,
}

#[derive(Debug, Clone)]
struct MetricDef {
    method: Method,
    name: String,
    kind: MetricKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub cell_id: usize,
    pub pi0: f64,
    pub rho: f64,
    pub d: f64,
    pub method: Method,
    pub metric: String,
    pub value: f64,
    /// `sqrt(p (1 - p) / reps)` for probabilities, sample SD over
    /// `sqrt(reps)` for means.
    pub se: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub rows: Vec<MetricRow>,
}

impl MetricTable {
    pub fn get(&self, cell_id: usize, method: Method, metric: &str) -> Option<&MetricRow> {
        self.rows
            .iter()
            .find(|r| r.cell_id == cell_id && r.method == method && r.metric == metric)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cell_id", "pi0", "rho", "d", "method", "metric", "value", "se"])?;
        for r in &self.rows {
            w.write_record([
                r.cell_id.to_string(),
                r.pi0.to_string(),
                r.rho.to_string(),
                r.d.to_string(),
                r.method.name().to_string(),
                r.metric.clone(),
                format!("{:?}", r.value),
                format!("{:?}", r.se),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Name of a metric evaluated at threshold `t`, e.g. `coverage[t=0.5]`.
pub fn at_t(metric: &str, t: f64) -> String {
    format!("{metric}[t={t}]")
}

/// Name of a metric evaluated at target `gamma`, e.g. `power[gamma=0.1]`.
pub fn at_gamma(metric: &str, gamma: f64) -> String {
    format!("{metric}[gamma={gamma}]")
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub cells: Vec<Cell>,
    pub table: MetricTable,
    /// P-values of replicate 0 per cell, when exported.
    pub pvalue_exports: Vec<(usize, PValueVector)>,
}

impl StudyResult {
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "cells": self.cells,
            "metrics": self.table.rows,
        })
    }
}

struct CellRunner<'a> {
    study: &'a StudySpec,
    scenario: &'a ScenarioSpec,
    defs: Vec<MetricDef>,
}

impl<'a> CellRunner<'a> {
    fn new(study: &'a StudySpec, scenario: &'a ScenarioSpec) -> Self {
        let has_alternatives = scenario.true_nulls() < scenario.m;
        let mut defs = Vec::new();
        let mut push = |method, name: String, kind| defs.push(MetricDef { method, name, kind });
        for &method in &study.methods {
            if method.estimates() {
                for &t in &study.thresholds {
                    push(method, at_t("fdp_hat_mean", t), MetricKind::Mean);
                    push(method, at_t("fdp_mean", t), MetricKind::Mean);
                    push(method, at_t("coverage", t), MetricKind::Probability);
                }
            }
            if method.controls() {
                for &g in &study.gammas {
                    if has_alternatives {
                        push(method, at_gamma("power", g), MetricKind::Mean);
                    }
                    push(method, at_gamma("fdp_mean", g), MetricKind::Mean);
                    push(method, at_gamma("control_coverage", g), MetricKind::Probability);
                    push(method, at_gamma("rejections_mean", g), MetricKind::Mean);
                }
            }
        }
        Self { study, scenario, defs }
    }

    fn sam_group(&self, rng: &mut ChaCha8Rng) -> Result<TransformationGroup> {
        let n = self.scenario.n;
        if n <= MAX_SIGN_FLIP_ROWS {
            TransformationGroup::new(GroupKind::SignFlipFull { n })
        } else {
            TransformationGroup::new(GroupKind::SignFlipSubsample {
                n,
                b: self.study.sam_transformations,
                seed: rng.random(),
            })
        }
    }

    fn replicate(&self, rep: usize) -> Result<Vec<f64>> {
        let spec = self.scenario;
        let (dm, truth) = generate(spec, rep)?;
        let sv = statistics_of(spec, &dm)?;
        let profile = build_profile(&sv);
        let mut aux = auxiliary_rng(spec, rep);
        let seq = Execution::Sequential;

        // SAM acts on data centred at the margin.
        let shifted = || -> Result<DataMatrix> {
            let shift = spec.delta / (spec.n as f64).sqrt();
            let values = dm.values().iter().map(|x| x - shift).collect();
            DataMatrix::new(dm.n_rows(), dm.n_cols(), values)
        };
        let sam_data = if self.study.methods.iter().any(|m| matches!(m, Method::SamFull | Method::SamTwo | Method::SamCt)) {
            Some(if spec.delta == 0.0 { dm.clone() } else { shifted()? })
        } else {
            None
        };
        let sam_group = match self.study.methods.contains(&Method::SamFull) || self.study.methods.contains(&Method::SamCt) {
            true => Some(self.sam_group(&mut aux)?),
            false => None,
        };
        let coin_seed: u64 = aux.random();
        let mut coins = CoinSource::from_seed(coin_seed);

        let pvals = if self.study.methods.iter().any(|m| matches!(m, Method::Bh | Method::Lr)) {
            Some(pvalues_for(&sv)?)
        } else {
            None
        };

        let mut out = Vec::with_capacity(self.defs.len());
        for &method in &self.study.methods {
            if method.estimates() {
                for &t in &self.study.thresholds {
                    let est = match method {
                        Method::Novel => plain_estimate(&profile, t),
                        Method::NovelRandomized => estimate_directional_randomized(&sv, t, &mut coins)?,
                        Method::NovelWindowed => estimate_equivalence_windowed(&sv, t)?,
                        Method::SamFull => sam_bound(
                            sam_data.as_ref().unwrap(),
                            SamStatistic::ScaledColumnSums,
                            sam_group.as_ref().unwrap(),
                            t,
                            0.5,
                            seq,
                        )?,
                        Method::SamTwo => sam_two_transform(sam_data.as_ref().unwrap(), SamStatistic::ScaledColumnSums, t, seq)?,
                        Method::SamCt => sam_ct(
                            sam_data.as_ref().unwrap(),
                            SamStatistic::ScaledColumnSums,
                            sam_group.as_ref().unwrap(),
                            t,
                            0.5,
                            seq,
                        )?,
                        _ => unreachable!(),
                    };
                    let v = truth.false_discoveries(&est.rejected);
                    out.push(est.fdp_hat);
                    out.push(truth.fdp(&est.rejected));
                    out.push(f64::from(u8::from(est.v_tilde.covers(v))));
                }
            }
            if method.controls() {
                for &g in &self.study.gammas {
                    let rejected = match method {
                        Method::Novel => control_mfdp(&sv, g)?.rejected,
                        Method::Bh => benjamini_hochberg(pvals.as_ref().unwrap(), g)?,
                        Method::Lr => lehmann_romano_stepdown(pvals.as_ref().unwrap(), g, 0.5)?,
                        _ => unreachable!(),
                    };
                    if let Some(p) = truth.power(&rejected) {
                        out.push(p);
                    }
                    let fdp = truth.fdp(&rejected);
                    out.push(fdp);
                    out.push(f64::from(u8::from(fdp <= g)));
                    out.push(rejected.len() as f64);
                }
            }
        }
        debug_assert_eq!(out.len(), self.defs.len());
        Ok(out)
    }
}

/// Right-sided (or equivalence) p-values against the standard normal, the
/// exact null distribution of the simulated statistics at the margin.
fn pvalues_for(sv: &StatisticVector) -> Result<PValueVector> {
    let null = NullModel::Shared(NullDensity::StandardNormal);
    match sv.shape() {
        HypothesisShape::DirectionalRight => directional_pvalues(sv, &null),
        HypothesisShape::Equivalence => equivalence_pvalues(sv, &null),
    }
}

fn summarize(values: &[f64], kind: MetricKind) -> (f64, f64) {
    let reps = values.len() as f64;
    let mean = values.iter().sum::<f64>() / reps;
    let se = match kind {
        MetricKind::Probability => (mean * (1.0 - mean) / reps).sqrt(),
        MetricKind::Mean if values.len() > 1 => {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (reps - 1.0) / reps).sqrt()
        }
        MetricKind::Mean => 0.0,
    };
    (mean, se)
}

/// Runs every cell of the study. Replicates run under `exec`.
pub fn run_study(study: &StudySpec, exec: Execution) -> Result<StudyResult> {
    study.validate()?;
    let cells = study.cells();
    let mut table = MetricTable::default();
    let mut pvalue_exports = Vec::new();
    for cell in &cells {
        let runner = CellRunner::new(study, &cell.scenario);
        let per_rep: Vec<Result<Vec<f64>>> = exec.map_indexed(study.replicates, |rep| runner.replicate(rep));
        let per_rep: Vec<Vec<f64>> = per_rep.into_iter().collect::<Result<_>>()?;
        for (k, def) in runner.defs.iter().enumerate() {
            let column: Vec<f64> = per_rep.iter().map(|v| v[k]).collect();
            let (value, se) = summarize(&column, def.kind);
            table.rows.push(MetricRow {
                cell_id: cell.cell_id,
                pi0: cell.scenario.pi0,
                rho: cell.scenario.rho,
                d: cell.scenario.d,
                method: def.method,
                metric: def.name.clone(),
                value,
                se,
            });
        }
        if study.methods.contains(&Method::FlexiblePvalsExport) {
            let (dm, _) = generate(&cell.scenario, 0)?;
            pvalue_exports.push((cell.cell_id, pvalues_for(&statistics_of(&cell.scenario, &dm)?)?));
        }
        log::info!("cell {} of {} done", cell.cell_id + 1, cells.len());
    }
    Ok(StudyResult {
        cells,
        table,
        pvalue_exports,
    })
}

/// Empirical probability with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub estimate: f64,
    pub se: f64,
    pub replicates: usize,
}

impl Proportion {
    fn from_hits(hits: &[bool]) -> Self {
        let values: Vec<f64> = hits.iter().map(|&h| f64::from(u8::from(h))).collect();
        let (estimate, se) = summarize(&values, MetricKind::Probability);
        Self {
            estimate,
            se,
            replicates: hits.len(),
        }
    }

    /// Whether the estimate is at least `target - k se`.
    pub fn at_least(&self, target: f64, k: f64) -> bool {
        self.estimate >= target - k * self.se
    }
}

/// Empirical `P(FDP(s+) <= gamma)` over the scenario's replicates.
pub fn control_coverage(spec: &ScenarioSpec, gamma: f64, exec: Execution) -> Result<Proportion> {
    spec.validate()?;
    check_gamma(gamma)?;
    let hits: Vec<Result<bool>> = exec.map_indexed(spec.replicates, |rep| {
        let (dm, truth) = generate(spec, rep)?;
        let result = control_mfdp(&statistics_of(spec, &dm)?, gamma)?;
        Ok(truth.fdp(&result.rejected) <= gamma)
    });
    Ok(Proportion::from_hits(&hits.into_iter().collect::<Result<Vec<_>>>()?))
}

/// Empirical `P(V(t) <= V~(t))` of the plain estimator.
pub fn estimate_coverage(spec: &ScenarioSpec, t: f64, exec: Execution) -> Result<Proportion> {
    spec.validate()?;
    check_threshold(t)?;
    let hits: Vec<Result<bool>> = exec.map_indexed(spec.replicates, |rep| {
        let (dm, truth) = generate(spec, rep)?;
        let est = plain_estimate(&build_profile(&statistics_of(spec, &dm)?), t);
        Ok(est.v_tilde.covers(truth.false_discoveries(&est.rejected)))
    });
    Ok(Proportion::from_hits(&hits.into_iter().collect::<Result<Vec<_>>>()?))
}

/// Sample correlation of two columns' statistics across replicates.
pub fn statistic_correlation(spec: &ScenarioSpec, a: usize, b: usize, exec: Execution) -> Result<f64> {
    let pairs: Vec<Result<(f64, f64)>> = exec.map_indexed(spec.replicates, |rep| {
        let (dm, _) = generate(spec, rep)?;
        let t = scaled_column_sums(&dm);
        Ok((t[a], t[b]))
    });
    let pairs: Vec<(f64, f64)> = pairs.into_iter().collect::<Result<_>>()?;
    let k = pairs.len() as f64;
    let (ma, mb) = pairs.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0 / k, acc.1 + p.1 / k));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Per-metric values keyed by `(cell_id, method, metric)`.
pub fn index_table(table: &MetricTable) -> BTreeMap<(usize, Method, String), (f64, f64)> {
    table
        .rows
        .iter()
        .map(|r| ((r.cell_id, r.method, r.metric.clone()), (r.value, r.se)))
        .collect()
}
