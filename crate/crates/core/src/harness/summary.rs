use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ResultRecord;
use crate::error::{Error, Result};

/// A column value used as a grouping key.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(u64),
    Float(f64),
    Text(String),
    Missing,
}

impl Value {
    fn rank(&self) -> u8 {
        match self {
            Value::Missing => 0,
            Value::Int(_) => 1,
            Value::Float(_) => 2,
            Value::Text(_) => 3,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Float(a), Value::Float(b)) => a.total_cmp(b),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v:.16e}"),
            Value::Text(v) => f.write_str(v),
            Value::Missing => Ok(()),
        }
    }
}

/// Statistic reduced over each group.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stat {
    Mean,
    Median,
    /// Linear-interpolated quantile, `q ∈ [0, 1]`.
    Quantile(f64),
}

impl Stat {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "mean" => Some(Stat::Mean),
            "median" => Some(Stat::Median),
            _ => {
                let q: f64 = text.strip_prefix('q')?.parse().ok()?;
                (0.0..=1.0).contains(&q).then_some(Stat::Quantile(q))
            }
        }
    }

    pub fn label(self) -> String {
        match self {
            Stat::Mean => "mean".into(),
            Stat::Median => "median".into(),
            Stat::Quantile(q) => format!("q{q}"),
        }
    }

    /// Reduces `sorted`, which must be nonempty and ascending.
    fn reduce(self, sorted: &[f64]) -> f64 {
        match self {
            Stat::Mean => sorted.iter().sum::<f64>() / sorted.len() as f64,
            Stat::Median => quantile(sorted, 0.5),
            Stat::Quantile(q) => quantile(sorted, q),
        }
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub key: Vec<Value>,
    pub value: f64,
    /// Records contributing a metric value.
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub group_by: Vec<String>,
    pub metric: String,
    pub stat: Stat,
    pub rows: Vec<SummaryRow>,
}

pub(crate) fn column(record: &ResultRecord, name: &str) -> Option<Value> {
    let int = |v: usize| Value::Int(v as u64);
    let opt_f = |v: Option<f64>| v.map_or(Value::Missing, Value::Float);
    Some(match name {
        "experiment" => Value::Text(record.experiment.name().into()),
        "ensemble" => Value::Text(record.ensemble.name().into()),
        "trial" => int(record.trial),
        "n" => int(record.n),
        "m" => int(record.m),
        "s" => record.s.map_or(Value::Missing, int),
        "eta" => opt_f(record.eta),
        "noise" => opt_f(record.noise),
        "recovery_error" => opt_f(record.recovery_error),
        "sigma_min" => opt_f(record.sigma_min),
        "mu_hat" => opt_f(record.mu_hat),
        "xi_hat" => opt_f(record.xi_hat),
        "l2_error" => opt_f(record.l2_error),
        "status" => record.status.clone().map_or(Value::Missing, Value::Text),
        "iterations" => record.iterations.map_or(Value::Missing, int),
        "seed" => Value::Int(record.seed),
        "stream" => Value::Int(record.stream),
        _ => return None,
    })
}

/// Groups `records` by the named columns and reduces `metric` with `stat`.
/// Records without a value for `metric` are skipped; a group left with no
/// values is an error. Rows come out in ascending key order.
pub fn summarize(records: &[ResultRecord], group_by: &[&str], metric: &str, stat: Stat) -> Result<SummaryTable> {
    let probe = records.first();
    for name in group_by.iter().chain([&metric]) {
        if column(probe.unwrap_or(&dummy()), name).is_none() {
            return Err(Error::InvalidArgument(format!("unknown column '{name}'")));
        }
    }
    if let Stat::Quantile(q) = stat {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidArgument(format!("quantile {q} outside [0, 1]")));
        }
    }
    let mut groups: BTreeMap<Vec<Value>, Vec<f64>> = BTreeMap::new();
    for r in records {
        let key: Vec<Value> = group_by.iter().map(|g| column(r, g).expect("checked above")).collect();
        let values = groups.entry(key).or_default();
        match column(r, metric).expect("checked above") {
            Value::Float(v) => values.push(v),
            Value::Int(v) => values.push(v as f64),
            _ => {}
        }
    }
    let rows = groups
        .into_iter()
        .map(|(key, mut values)| {
            if values.is_empty() {
                let shown: Vec<String> = key.iter().map(|k| k.to_string()).collect();
                return Err(Error::InvalidArgument(format!("group [{}] has no {metric} values", shown.join(", "))));
            }
            values.sort_by(f64::total_cmp);
            Ok(SummaryRow { value: stat.reduce(&values), count: values.len(), key })
        })
        .collect::<Result<_>>()?;
    Ok(SummaryTable {
        group_by: group_by.iter().map(|s| s.to_string()).collect(),
        metric: metric.into(),
        stat,
        rows,
    })
}

fn dummy() -> ResultRecord {
    ResultRecord {
        experiment: super::Experiment::Custom,
        ensemble: crate::ensembles::EnsembleKind::Gaussian,
        trial: 0,
        n: 0,
        m: 0,
        s: None,
        eta: None,
        noise: None,
        recovery_error: None,
        sigma_min: None,
        mu_hat: None,
        xi_hat: None,
        l2_error: None,
        status: None,
        iterations: None,
        seed: 0,
        stream: 0,
    }
}
