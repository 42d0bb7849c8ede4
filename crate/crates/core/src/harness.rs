//! Monte-Carlo experiments: bias, RMSE and boundary rates of index
//! estimators over repeated samples.
//!
//! Replication `r` draws its data from `substream(seed, r)`; if every
//! estimator fails on that sample it is redrawn once from
//! `substream(seed, r | REDRAW_BIT)`. The split-sample estimator with `k`
//! levels uses split seed `derive_seed(derive_seed(seed, r), k)`. Results are
//! therefore independent of thread scheduling and of the total number of
//! replications.

use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;

use crate::al::TGrid;
use crate::error::{domain, Error, Result};
use crate::mqe::{mqe_estimate, MqeTable};
use crate::seed::{derive_seed, substream};
use crate::split::{boundary_rate, sse_estimate, SplitConfig};
use crate::stable::{sample_stable, StableParams};

const REDRAW_BIT: u64 = 1 << 63;

pub const RECORD_HEADER: [&str; 6] = [
    "replication",
    "estimator",
    "alpha_hat",
    "sigma_bar",
    "failures",
    "elapsed_ms",
];

pub const AGGREGATE_HEADER: [&str; 7] = [
    "config_id",
    "estimator",
    "bias",
    "rmse",
    "boundary0",
    "boundary2",
    "n_success",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Split-sample estimator with `k` equispaced levels; reports all three
    /// combiners.
    Sse { k: usize },
    Mqe,
}

impl Estimator {
    /// Output ids, e.g. `sse9_a1`, `sse9_a2`, `sse9_a3`, `mqe`.
    pub fn ids(&self) -> Vec<String> {
        match self {
            Self::Sse { k } => (1..=3).map(|c| format!("sse{k}_a{c}")).collect(),
            Self::Mqe => vec!["mqe".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub params: StableParams,
    pub n: usize,
    pub m: usize,
    pub b_splits: usize,
    pub estimators: Vec<Estimator>,
    pub replications: usize,
    pub seed: u64,
    pub alpha_sweep: Option<Vec<f64>>,
    /// Defaults to the bundled table when MQE is requested.
    pub mqe_table: Option<MqeTable>,
}

impl ExperimentSpec {
    /// Standardised `S(alpha, beta, 1, 0)` samples of `total` observations
    /// split with `m = total / 3`.
    pub fn new(
        alpha: f64,
        beta: f64,
        total: usize,
        b_splits: usize,
        estimators: Vec<Estimator>,
        replications: usize,
        seed: u64,
    ) -> Result<Self> {
        let m = total / 3;
        let spec = Self {
            params: StableParams::standard(alpha, beta)?,
            n: total - 2 * m,
            m,
            b_splits,
            estimators,
            replications,
            seed,
            alpha_sweep: None,
            mqe_table: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn total_size(&self) -> usize {
        self.n + 2 * self.m
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.replications == 0 {
            return Err(domain("replications must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(domain("no estimators requested"));
        }
        if self.n < 2 || self.m < 2 || self.b_splits == 0 {
            return Err(domain("split sizes need n >= 2, m >= 2, B >= 1"));
        }
        for e in &self.estimators {
            if let Estimator::Sse { k } = e {
                TGrid::equispaced(*k)?;
            }
        }
        Ok(())
    }

    pub fn config_id(&self) -> String {
        format!(
            "a{}_b{}_s{}_B{}_N{}_seed{}",
            self.params.alpha,
            self.params.beta,
            self.total_size(),
            self.b_splits,
            self.replications,
            self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRecord {
    pub replication: usize,
    pub estimator: String,
    /// `None` when the estimator failed on this replication.
    pub alpha_hat: Option<f64>,
    pub sigma_bar: Option<f64>,
    /// Failed split fits (SSE) or 0/1 for single-shot estimators.
    pub failures: usize,
    /// Fractions of per-split indices at 0 and at 2 (SSE only).
    pub boundary: Option<(f64, f64)>,
    pub redrawn: bool,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub estimator: String,
    pub bias: f64,
    pub rmse: f64,
    pub boundary0: Option<f64>,
    pub boundary2: Option<f64>,
    pub n_success: usize,
    pub failure_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config_id: String,
    pub true_alpha: f64,
    pub records: Vec<EstimateRecord>,
    pub aggregates: Vec<Aggregate>,
    pub elapsed_ms: f64,
}

impl ExperimentResult {
    pub fn aggregate_for(&self, estimator: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.estimator == estimator)
    }
}

/// Bias and RMSE of the successful estimates, with boundary rates averaged
/// over the records that carry them.
pub fn aggregate(records: &[&EstimateRecord], true_alpha: f64) -> Result<Aggregate> {
    let Some(first) = records.first() else {
        return Err(Error::Estimation("no records to aggregate".into()));
    };
    let hats: Vec<f64> = records.iter().filter_map(|r| r.alpha_hat).collect();
    if hats.is_empty() {
        return Err(Error::Estimation(format!(
            "no successful estimates for {}",
            first.estimator
        )));
    }
    let count = hats.len() as f64;
    let bias = hats.iter().map(|a| a - true_alpha).sum::<f64>() / count;
    let rmse = (hats.iter().map(|a| (a - true_alpha).powi(2)).sum::<f64>() / count).sqrt();
    let bounds: Vec<(f64, f64)> = records.iter().filter_map(|r| r.boundary).collect();
    let (boundary0, boundary2) = if bounds.is_empty() {
        (None, None)
    } else {
        let nb = bounds.len() as f64;
        (
            Some(bounds.iter().map(|b| b.0).sum::<f64>() / nb),
            Some(bounds.iter().map(|b| b.1).sum::<f64>() / nb),
        )
    };
    Ok(Aggregate {
        estimator: first.estimator.clone(),
        bias,
        rmse,
        boundary0,
        boundary2,
        n_success: hats.len(),
        failure_rate: 1.0 - count / records.len() as f64,
    })
}

/// Aggregates per estimator id, in first-appearance order. Estimators with
/// no successes are skipped.
pub fn aggregate_all(records: &[EstimateRecord], true_alpha: f64) -> Vec<Aggregate> {
    let mut ids: Vec<&str> = Vec::new();
    for r in records {
        if !ids.contains(&r.estimator.as_str()) {
            ids.push(&r.estimator);
        }
    }
    ids.iter()
        .filter_map(|id| {
            let group: Vec<&EstimateRecord> =
                records.iter().filter(|r| r.estimator == *id).collect();
            aggregate(&group, true_alpha).ok()
        })
        .collect()
}

fn run_estimators(
    spec: &ExperimentSpec,
    table: Option<&MqeTable>,
    replication: usize,
    data: &[f64],
    redrawn: bool,
) -> Vec<EstimateRecord> {
    let rep_seed = derive_seed(spec.seed, replication as u64);
    let mut out = Vec::new();
    for estimator in &spec.estimators {
        let start = Instant::now();
        match estimator {
            Estimator::Sse { k } => {
                let result = SplitConfig::new(
                    spec.n,
                    spec.m,
                    spec.b_splits,
                    TGrid::equispaced(*k).expect("validated grid"),
                    derive_seed(rep_seed, *k as u64),
                )
                .and_then(|config| sse_estimate(data, &config));
                let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
                let ids = estimator.ids();
                match result {
                    Ok(est) => {
                        let boundary = boundary_rate(&est).ok();
                        for (id, alpha) in ids.into_iter().zip([est.alpha1, est.alpha2, est.alpha3]) {
                            out.push(EstimateRecord {
                                replication,
                                estimator: id,
                                alpha_hat: Some(alpha),
                                sigma_bar: Some(est.sigma_bar),
                                failures: est.failures,
                                boundary,
                                redrawn,
                                elapsed_ms,
                            });
                        }
                    }
                    Err(_) => {
                        for id in ids {
                            out.push(EstimateRecord {
                                replication,
                                estimator: id,
                                alpha_hat: None,
                                sigma_bar: None,
                                failures: spec.b_splits,
                                boundary: None,
                                redrawn,
                                elapsed_ms,
                            });
                        }
                    }
                }
            }
            Estimator::Mqe => {
                let alpha_hat = table.and_then(|t| mqe_estimate(data, t).ok());
                out.push(EstimateRecord {
                    replication,
                    estimator: "mqe".into(),
                    alpha_hat,
                    sigma_bar: None,
                    failures: usize::from(alpha_hat.is_none()),
                    boundary: None,
                    redrawn,
                    elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
                });
            }
        }
    }
    out
}

fn replicate(spec: &ExperimentSpec, table: Option<&MqeTable>, r: usize) -> Vec<EstimateRecord> {
    let total = spec.total_size();
    let draw = |stream: u64| {
        sample_stable(&spec.params, total, &mut substream(spec.seed, stream))
            .expect("validated parameters")
    };
    let records = run_estimators(spec, table, r, &draw(r as u64), false);
    if records.iter().all(|rec| rec.alpha_hat.is_none()) {
        run_estimators(spec, table, r, &draw(r as u64 | REDRAW_BIT), true)
    } else {
        records
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let start = Instant::now();
    let bundled;
    let table = if spec.estimators.contains(&Estimator::Mqe) {
        match &spec.mqe_table {
            Some(t) => Some(t),
            None => {
                bundled = MqeTable::bundled();
                Some(&bundled)
            }
        }
    } else {
        None
    };
    let records: Vec<EstimateRecord> = (0..spec.replications)
        .into_par_iter()
        .map(|r| replicate(spec, table, r))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let aggregates = aggregate_all(&records, spec.params.alpha);
    Ok(ExperimentResult {
        config_id: spec.config_id(),
        true_alpha: spec.params.alpha,
        records,
        aggregates,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub alpha: f64,
    pub estimator: String,
    pub rmse: f64,
    pub smoothed: f64,
}

/// Centred moving average of width 3; the end points average the two
/// values available.
pub fn smooth3(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// RMSE per `(alpha, estimator)` across `spec.alpha_sweep`, in sweep order,
/// with a smoothed column per estimator. The experiment at sweep value
/// `alpha` uses seed `derive_seed(spec.seed, alpha.to_bits())`.
pub fn rmse_curve(spec: &ExperimentSpec) -> Result<Vec<CurveRow>> {
    let sweep = spec
        .alpha_sweep
        .as_ref()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| domain("curve mode needs a non-empty alpha sweep"))?;
    if sweep.iter().any(|a| !(*a > 0.0 && *a <= 2.0)) {
        return Err(domain("sweep alphas must lie in (0, 2]"));
    }
    let mut per_alpha = Vec::with_capacity(sweep.len());
    for &alpha in sweep {
        let point = ExperimentSpec {
            params: StableParams { alpha, ..spec.params },
            seed: derive_seed(spec.seed, alpha.to_bits()),
            alpha_sweep: None,
            ..spec.clone()
        };
        per_alpha.push(run_experiment(&point)?);
    }
    let ids: Vec<String> = spec.estimators.iter().flat_map(Estimator::ids).collect();
    let mut rows = Vec::new();
    for id in &ids {
        let raw: Vec<f64> = per_alpha
            .iter()
            .map(|res| res.aggregate_for(id).map_or(f64::NAN, |a| a.rmse))
            .collect();
        for ((alpha, rmse), smoothed) in sweep.iter().zip(&raw).zip(smooth3(&raw)) {
            rows.push(CurveRow {
                alpha: *alpha,
                estimator: id.clone(),
                rmse: *rmse,
                smoothed,
            });
        }
    }
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(field: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        field
            .parse()
            .map(Some)
            .map_err(|e| Error::Parse(format!("{field:?}: {e}")))
    }
}

pub fn write_records<W: Write>(records: &[EstimateRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.write_record([
            r.replication.to_string(),
            r.estimator.clone(),
            opt(r.alpha_hat),
            opt(r.sigma_bar),
            r.failures.to_string(),
            format!("{:.3}", r.elapsed_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Read a per-replication CSV back. Boundary fractions and redraw flags are
/// not part of the file and come back empty.
pub fn read_records<R: Read>(input: R) -> Result<Vec<EstimateRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    if reader.headers()?.iter().ne(RECORD_HEADER) {
        return Err(Error::Parse("unexpected record CSV header".into()));
    }
    let parse_usize = |f: &str| f.parse::<usize>().map_err(|e| Error::Parse(format!("{f:?}: {e}")));
    reader
        .records()
        .map(|row| {
            let row = row?;
            Ok(EstimateRecord {
                replication: parse_usize(&row[0])?,
                estimator: row[1].to_string(),
                alpha_hat: parse_opt(&row[2])?,
                sigma_bar: parse_opt(&row[3])?,
                failures: parse_usize(&row[4])?,
                boundary: None,
                redrawn: false,
                elapsed_ms: parse_opt(&row[5])?.unwrap_or(0.0),
            })
        })
        .collect()
}

pub fn write_aggregates<W: Write>(config_id: &str, aggregates: &[Aggregate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER)?;
    for a in aggregates {
        w.write_record([
            config_id.to_string(),
            a.estimator.clone(),
            a.bias.to_string(),
            a.rmse.to_string(),
            opt(a.boundary0),
            opt(a.boundary2),
            a.n_success.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `(config_id, aggregate)` rows; the failure rate is not stored and reads
/// back as NaN.
pub fn read_aggregates<R: Read>(input: R) -> Result<Vec<(String, Aggregate)>> {
    let mut reader = csv::Reader::from_reader(input);
    if reader.headers()?.iter().ne(AGGREGATE_HEADER) {
        return Err(Error::Parse("unexpected aggregate CSV header".into()));
    }
    reader
        .records()
        .map(|row| {
            let row = row?;
            let num = |i: usize| parse_opt(&row[i])?.ok_or_else(|| Error::Parse(format!("empty field {i}")));
            Ok((
                row[0].to_string(),
                Aggregate {
                    estimator: row[1].to_string(),
                    bias: num(2)?,
                    rmse: num(3)?,
                    boundary0: parse_opt(&row[4])?,
                    boundary2: parse_opt(&row[5])?,
                    n_success: row[6]
                        .parse()
                        .map_err(|e| Error::Parse(format!("n_success: {e}")))?,
                    failure_rate: f64::NAN,
                },
            ))
        })
        .collect()
}

pub fn write_curve<W: Write>(rows: &[CurveRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "estimator", "rmse", "smoothed"])?;
    for r in rows {
        w.write_record([
            r.alpha.to_string(),
            r.estimator.clone(),
            r.rmse.to_string(),
            r.smoothed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text table of bias and RMSE per estimator.
pub fn format_table(result: &ExperimentResult) -> String {
    let mut out = format!("{}\n", result.config_id);
    out.push_str(&format!(
        "{:<10} {:>9} {:>9} {:>9} {:>9} {:>7}\n",
        "estimator", "bias", "rmse", "at0(%)", "at2(%)", "n"
    ));
    let pct = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.2}", 100.0 * x));
    for a in &result.aggregates {
        out.push_str(&format!(
            "{:<10} {:>9.4} {:>9.4} {:>9} {:>9} {:>7}\n",
            a.estimator,
            a.bias,
            a.rmse,
            pct(a.boundary0),
            pct(a.boundary2),
            a.n_success
        ));
    }
    out
}
