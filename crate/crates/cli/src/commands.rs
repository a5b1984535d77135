use std::fs::File;
use std::io::BufWriter;

use mfdp::baselines::{benjamini_hochberg, lehmann_romano_stepdown, sign_flip_test, two_group_permutation_test, PermutationMode};
use mfdp::ct_oracle::run_oracle;
use mfdp::io::{read_statistics, write_statistics};
use mfdp::simulate::{run_study, StudySpec};
use mfdp::statistics::{column_mean_statistics, scaled_column_sums, two_group_statistics, welch_t_statistics};
use mfdp::{
    control_mfdp, directional_pvalues, equivalence_pvalues, estimate, estimate_directional_randomized,
    estimate_equivalence_windowed, Bound, CoinSource, DataMatrix, Execution, FdpEstimate, HypothesisShape,
    Margins, NullDensity, NullModel, StatisticVector,
};
use serde_json::{json, Value};

use crate::args::{
    ControlArgs, EstimateArgs, EstimateMethod, ExactKind, ExactTestArgs, InputArgs, NullArg, PvaluesArgs,
    SimulateArgs, StatisticArg, VerifyCtArgs,
};
use crate::report::{CliError, CliResult, Context, Output, Table};

/// Statistics plus how they map back to the input.
struct Loaded {
    sv: StatisticVector,
    /// 1-based position of each statistic in the input (a data column for
    /// raw data, a row for statistics files).
    ids: Vec<usize>,
    names: Option<Vec<String>>,
    /// 1-based data columns that produced no statistic.
    excluded: Vec<usize>,
}

impl Loaded {
    fn ids_of(&self, positions: &[usize]) -> Vec<usize> {
        positions.iter().map(|&j| self.ids[j]).collect()
    }

    /// One CSV row per hypothesis, with extra columns appended.
    fn csv(&self, extra_headers: &[&str], extra: impl Fn(usize) -> Vec<String>) -> String {
        let mut out = String::from("index");
        if self.names.is_some() {
            out.push_str(",name");
        }
        out.push_str(",statistic,margin");
        for h in extra_headers {
            out.push(',');
            out.push_str(h);
        }
        out.push('\n');
        for j in 0..self.sv.len() {
            let mut cells = vec![self.ids[j].to_string()];
            if let Some(names) = &self.names {
                cells.push(names[j].clone());
            }
            cells.push(format!("{:?}", self.sv.stats()[j]));
            cells.push(format!("{:?}", self.sv.margins()[j]));
            cells.extend(extra(j));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn load(ctx: &mut Context, args: &InputArgs) -> CliResult<Loaded> {
    let shape: HypothesisShape = args.shape.into();
    let margins = match (&args.margins, args.delta) {
        (Some(path), _) => Some(Margins::PerHypothesis(read_margins(ctx, path)?)),
        (None, Some(d)) => Some(Margins::Common(d)),
        (None, None) => None,
    };

    let loaded = if let Some(path) = &args.input {
        let bytes = ctx.read(path)?;
        let sv = match &margins {
            None => read_statistics(bytes.as_slice(), shape, None)?,
            Some(Margins::Common(d)) => read_statistics(bytes.as_slice(), shape, Some(*d))?,
            Some(Margins::PerHypothesis(ds)) => {
                // Any valid placeholder; the margins are replaced below.
                let stats = read_statistics(bytes.as_slice(), shape, Some(1.0))?;
                StatisticVector::new(stats.stats().to_vec(), Margins::PerHypothesis(ds.clone()).resolve(stats.len())?, shape)?
            }
        };
        Loaded { ids: (1..=sv.len()).collect(), sv, names: None, excluded: Vec::new() }
    } else {
        let path = args.data.as_ref().expect("clap requires input or --data");
        let statistic = args.statistic.expect("clap requires --statistic with --data");
        let margins = margins.ok_or_else(|| CliError::Input("raw data needs --delta or --margins".into()))?;
        let dm = DataMatrix::read_csv(ctx.read(path)?.as_slice())?;
        let all: Vec<usize> = (1..=dm.n_cols()).collect();
        let (sv, ids, excluded) = match statistic {
            StatisticArg::ColumnMean => (column_mean_statistics(&dm, &margins, shape)?, all, Vec::new()),
            StatisticArg::ScaledSum => {
                if dm.groups().is_some() {
                    return Err(CliError::Input("scaled sums are for one-sample data; drop the group column".into()));
                }
                let sv = StatisticVector::new(scaled_column_sums(&dm), margins.resolve(dm.n_cols())?, shape)?;
                (sv, all, Vec::new())
            }
            StatisticArg::TwoGroup => (two_group_statistics(&dm, &margins, shape)?, all, Vec::new()),
            StatisticArg::Welch => {
                let w = welch_t_statistics(&dm, &margins, shape)?;
                let ids = w.kept_columns.iter().map(|c| c + 1).collect();
                (w.statistics, ids, w.excluded_columns.iter().map(|c| c + 1).collect())
            }
        };
        let names = ids.iter().map(|&c: &usize| dm.column_names()[c - 1].clone()).collect();
        Loaded { sv, ids, names: Some(names), excluded }
    };

    if let Some(path) = &args.write_statistics {
        let file = File::create(path).map_err(|e| CliError::Input(format!("cannot create {}: {e}", path.display())))?;
        write_statistics(&loaded.sv, BufWriter::new(file))?;
    }
    Ok(loaded)
}

fn read_margins(ctx: &mut Context, path: &std::path::Path) -> CliResult<Vec<f64>> {
    let dm = DataMatrix::read_csv(ctx.read(path)?.as_slice())?;
    let col = match dm.column_names().iter().position(|n| n == "margin") {
        Some(c) => c,
        None if dm.n_cols() == 1 => 0,
        None => return Err(CliError::Input(format!("missing column 'margin' in {}", path.display()))),
    };
    Ok(dm.column(col).collect())
}

fn bound_json(b: Bound) -> Value {
    match b {
        Bound::Finite(v) => json!(v),
        Bound::NegInfinity => json!("-inf"),
    }
}

fn bound_text(b: Bound) -> String {
    b.finite().map_or("-inf".into(), |v| v.to_string())
}

fn rejection_flags(m: usize, rejected: &[usize]) -> Vec<bool> {
    let mut flags = vec![false; m];
    for &j in rejected {
        flags[j] = true;
    }
    flags
}

pub fn estimate_cmd(ctx: &mut Context, args: &EstimateArgs) -> CliResult<Output> {
    let loaded = load(ctx, &args.input)?;
    let sv = &loaded.sv;
    let est: FdpEstimate = match args.method {
        EstimateMethod::Plain => estimate(sv, args.t)?,
        EstimateMethod::Randomized => estimate_directional_randomized(sv, args.t, &mut CoinSource::from_seed(ctx.seed()))?,
        EstimateMethod::Windowed => estimate_equivalence_windowed(sv, args.t)?,
    };
    let coin = est.randomized.and_then(|r| r.coin).map(|c| format!("{c:?}").to_lowercase());
    let result = json!({
        "shape": sv.shape(),
        "method": args.method,
        "m": sv.len(),
        "t": est.t,
        "r": est.r,
        "r_minus": est.r_minus,
        "v_tilde": bound_json(est.v_tilde),
        "fdp_hat": est.fdp_hat,
        "guarantee": est.guarantee,
        "coin": coin,
        "rejected": loaded.ids_of(&est.rejected),
        "excluded_columns": loaded.excluded,
    });
    let mut rows = vec![
        ("shape", sv.shape().to_string()),
        ("hypotheses", sv.len().to_string()),
        ("t", est.t.to_string()),
        ("rejections R(t)", est.r.to_string()),
        ("reflected count", est.r_minus.to_string()),
        ("V~ (median-unbiased)", bound_text(est.v_tilde)),
        ("FDP estimate", format!("{:.6}", est.fdp_hat)),
    ];
    if let Some(c) = coin {
        rows.push(("coin", c));
    }
    let flags = rejection_flags(sv.len(), &est.rejected);
    Ok(Output {
        result,
        table: Table::key_value(rows),
        csv: loaded.csv(&["rejected"], |j| vec![u8::from(flags[j]).to_string()]),
        failure: None,
    })
}

pub fn control_cmd(ctx: &mut Context, args: &ControlArgs) -> CliResult<Output> {
    let loaded = load(ctx, &args.input)?;
    let sv = &loaded.sv;
    let res = control_mfdp(sv, args.gamma)?;
    let result = json!({
        "shape": sv.shape(),
        "m": sv.len(),
        "gamma": res.gamma,
        "s": res.s.to_string(),
        "s_plus": res.s_plus,
        "r": res.r,
        "v_tilde": res.v_tilde,
        "fdp_hat": res.fdp_hat_at_s_plus,
        "rejected": loaded.ids_of(&res.rejected),
        "excluded_columns": loaded.excluded,
    });
    let rows = [
        ("shape", sv.shape().to_string()),
        ("hypotheses", sv.len().to_string()),
        ("gamma", res.gamma.to_string()),
        ("s", res.s.to_string()),
        ("threshold s+", res.s_plus.to_string()),
        ("rejections R(s+)", res.r.to_string()),
        ("V~(s+)", res.v_tilde.to_string()),
        ("FDP estimate at s+", format!("{:.6}", res.fdp_hat_at_s_plus)),
    ];
    let flags = rejection_flags(sv.len(), &res.rejected);
    Ok(Output {
        result,
        table: Table::key_value(rows),
        csv: loaded.csv(&["rejected"], |j| vec![u8::from(flags[j]).to_string()]),
        failure: None,
    })
}

pub fn pvalues_cmd(ctx: &mut Context, args: &PvaluesArgs) -> CliResult<Output> {
    let loaded = load(ctx, &args.input)?;
    let sv = &loaded.sv;
    let density = match args.null {
        NullArg::StdNormal => NullDensity::StandardNormal,
        NullArg::Normal => NullDensity::ScaledNormal { sigma: args.sigma.expect("clap requires --sigma") },
        NullArg::StudentT => NullDensity::StudentT { df: args.df.expect("clap requires --df") },
    };
    let null = NullModel::Shared(density);
    let pv = match sv.shape() {
        HypothesisShape::DirectionalRight => directional_pvalues(sv, &null)?,
        HypothesisShape::Equivalence => equivalence_pvalues(sv, &null)?,
    };
    let bh = args.bh.map(|g| benjamini_hochberg(&pv, g)).transpose()?;
    let lr = args.lr.map(|g| lehmann_romano_stepdown(&pv, g, 0.5)).transpose()?;

    let mut result = json!({
        "shape": sv.shape(),
        "null": pv.provenance,
        "pvalues": pv.pvals,
        "index": loaded.ids,
    });
    let mut rows = vec![
        ("shape", sv.shape().to_string()),
        ("null density", pv.provenance.clone()),
        ("hypotheses", sv.len().to_string()),
        ("smallest p-value", format!("{:.6e}", pv.pvals.iter().copied().fold(f64::INFINITY, f64::min))),
    ];
    let mut headers = vec!["pvalue"];
    let mut flag_sets = Vec::new();
    if let (Some(rej), Some(g)) = (&bh, args.bh) {
        result["bh"] = json!({ "gamma": g, "rejected": loaded.ids_of(rej) });
        rows.push(("BH rejections", rej.len().to_string()));
        headers.push("bh");
        flag_sets.push(rejection_flags(sv.len(), rej));
    }
    if let (Some(rej), Some(g)) = (&lr, args.lr) {
        result["lr"] = json!({ "gamma": g, "alpha": 0.5, "rejected": loaded.ids_of(rej) });
        rows.push(("LR rejections", rej.len().to_string()));
        headers.push("lr");
        flag_sets.push(rejection_flags(sv.len(), rej));
    }
    let csv = loaded.csv(&headers, |j| {
        let mut cells = vec![format!("{:?}", pv.pvals[j])];
        cells.extend(flag_sets.iter().map(|f| u8::from(f[j]).to_string()));
        cells
    });
    Ok(Output { result, table: Table::key_value(rows), csv, failure: None })
}

pub fn simulate_cmd(ctx: &mut Context, args: &SimulateArgs) -> CliResult<Output> {
    let bytes = ctx.read(&args.spec)?;
    let mut raw: Value = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.spec.display())))?;
    let obj = raw
        .as_object_mut()
        .ok_or_else(|| CliError::Input(format!("{}: expected a JSON object", args.spec.display())))?;
    let seed = match (ctx.used_seed(), obj.get("seed").and_then(Value::as_u64)) {
        (Some(s), _) => s,
        (None, Some(s)) => s,
        (None, None) => ctx.seed(),
    };
    obj.insert("seed".into(), json!(seed));
    let study: StudySpec =
        serde_json::from_value(raw).map_err(|e| CliError::Input(format!("{}: {e}", args.spec.display())))?;
    let exec = if args.sequential { Execution::Sequential } else { ctx.exec };
    let res = run_study(&study, exec)?;

    let mut csv = Vec::new();
    res.table.write_csv(&mut csv)?;
    if let Some(path) = &args.table {
        std::fs::write(path, &csv).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    }
    let mut result = res.summary_json();
    result["seed"] = json!(seed);
    result["pvalue_exports"] = res
        .pvalue_exports
        .iter()
        .map(|(cell, pv)| json!({ "cell_id": cell, "null": pv.provenance, "pvalues": pv.pvals }))
        .collect();
    let table = Table {
        headers: ["cell", "pi0", "rho", "d", "method", "metric", "value", "se"].map(String::from).to_vec(),
        rows: res
            .table
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.cell_id.to_string(),
                    r.pi0.to_string(),
                    r.rho.to_string(),
                    r.d.to_string(),
                    r.method.name().to_string(),
                    r.metric.clone(),
                    format!("{:.4}", r.value),
                    format!("{:.4}", r.se),
                ]
            })
            .collect(),
    };
    Ok(Output {
        result,
        table,
        csv: String::from_utf8(csv).expect("csv is utf-8"),
        failure: None,
    })
}

pub fn verify_ct_cmd(ctx: &mut Context, args: &VerifyCtArgs) -> CliResult<Output> {
    let seed = ctx.seed();
    let mut reports = Vec::new();
    for (k, kind) in args.family.kinds().into_iter().enumerate() {
        reports.push(run_oracle(kind, args.m, args.instances, seed.wrapping_add(k as u64), ctx.exec)?);
    }
    let total: usize = reports.iter().map(|r| r.mismatches).sum();
    let table = Table {
        headers: ["family", "instances", "max m", "mismatches", "identity skipped", "literal rule off"]
            .map(String::from)
            .to_vec(),
        rows: reports
            .iter()
            .map(|r| {
                vec![
                    r.family.to_string(),
                    r.instances.to_string(),
                    r.max_m.to_string(),
                    r.mismatches.to_string(),
                    r.excluded_identity.to_string(),
                    r.literal_mismatch_instances.to_string(),
                ]
            })
            .collect(),
    };
    let mut csv = String::from("family,instances,max_m,mismatches,excluded_identity,literal_mismatch_instances,seed\n");
    for r in &reports {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.family, r.instances, r.max_m, r.mismatches, r.excluded_identity, r.literal_mismatch_instances, r.seed
        ));
    }
    Ok(Output {
        result: json!({ "mismatches": total, "reports": reports }),
        table,
        csv,
        failure: (total > 0).then(|| format!("{total} shortcut/closure mismatches")),
    })
}

pub fn exact_test_cmd(ctx: &mut Context, args: &ExactTestArgs) -> CliResult<Output> {
    let dm = DataMatrix::read_csv(ctx.read(&args.data)?.as_slice())?;
    let col = match &args.column {
        Some(name) => dm
            .column_names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| CliError::Input(format!("no column '{name}' in {}", args.data.display())))?,
        None => 0,
    };
    let values: Vec<f64> = dm.column(col).collect();
    let (res, sizes) = match args.kind {
        ExactKind::SignFlip => {
            if args.transformations.is_some() {
                return Err(CliError::Input("--transformations applies to the permutation test only".into()));
            }
            (sign_flip_test(&values, args.alpha)?, vec![values.len()])
        }
        ExactKind::Permutation => {
            let groups = dm
                .groups()
                .ok_or_else(|| CliError::Input("the permutation test needs a `group` column".into()))?;
            let pick = |first: bool| -> Vec<f64> {
                values.iter().zip(groups.in_first()).filter(|(_, &f)| f == first).map(|(&v, _)| v).collect()
            };
            let (z, y) = (pick(true), pick(false));
            let mode = match args.transformations {
                Some(b) => PermutationMode::Sampled { b, seed: ctx.seed() },
                None => PermutationMode::Full,
            };
            let sizes = vec![z.len(), y.len()];
            (two_group_permutation_test(&z, &y, args.alpha, mode)?, sizes)
        }
    };
    let result = json!({
        "kind": args.kind,
        "column": dm.column_names()[col],
        "sizes": sizes,
        "alpha": args.alpha,
        "reject": res.reject,
        "statistic": res.statistic,
        "critical_value": res.critical_value,
        "transformations": res.transformations,
    });
    let rows = [
        ("column", dm.column_names()[col].clone()),
        ("alpha", args.alpha.to_string()),
        ("statistic", format!("{:.6}", res.statistic)),
        ("critical value", format!("{:.6}", res.critical_value)),
        ("transformations", res.transformations.to_string()),
        ("reject H0", res.reject.to_string()),
    ];
    let csv = format!(
        "column,alpha,statistic,critical_value,transformations,reject\n{},{},{:?},{:?},{},{}\n",
        dm.column_names()[col],
        args.alpha,
        res.statistic,
        res.critical_value,
        res.transformations,
        res.reject
    );
    Ok(Output { result, table: Table::key_value(rows), csv, failure: None })
}
