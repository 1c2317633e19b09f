//! Metric records and their CSV form.
//!
//! Columns are `experiment,N,M,lambda,repeat,epoch,metric,value`; keys that
//! do not apply to a row are empty and numbers are written with 17
//! significant digits so a re-read reproduces every value exactly.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use mfld_core::textfmt::fmt_g17;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const CSV_HEADER: &str = "experiment,N,M,lambda,repeat,epoch,metric,value";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// `max |merged - reference|` over the test inputs.
    SupNorm,
    /// Natural log of the mean sup-norm of a cell.
    LogSupNorm,
    /// Mean over repeats of the log sup-norm.
    MeanLogSupNorm,
    Mse,
    LnMse,
    Accuracy,
    Variance,
    TargetVariance,
    TrainLoss,
    TestLoss,
    MeanMemberMse,
    BestMemberMse,
    MergedMse,
}

impl MetricKind {
    pub const ALL: [MetricKind; 13] = [
        MetricKind::SupNorm,
        MetricKind::LogSupNorm,
        MetricKind::MeanLogSupNorm,
        MetricKind::Mse,
        MetricKind::LnMse,
        MetricKind::Accuracy,
        MetricKind::Variance,
        MetricKind::TargetVariance,
        MetricKind::TrainLoss,
        MetricKind::TestLoss,
        MetricKind::MeanMemberMse,
        MetricKind::BestMemberMse,
        MetricKind::MergedMse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::SupNorm => "sup_norm",
            MetricKind::LogSupNorm => "log_sup_norm",
            MetricKind::MeanLogSupNorm => "mean_log_sup_norm",
            MetricKind::Mse => "mse",
            MetricKind::LnMse => "ln_mse",
            MetricKind::Accuracy => "accuracy",
            MetricKind::Variance => "variance",
            MetricKind::TargetVariance => "target_variance",
            MetricKind::TrainLoss => "train_loss",
            MetricKind::TestLoss => "test_loss",
            MetricKind::MeanMemberMse => "mean_member_mse",
            MetricKind::BestMemberMse => "best_member_mse",
            MetricKind::MergedMse => "merged_mse",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

/// `(experiment, N, M, lambda bits, repeat, epoch, metric)`.
pub type RecordKey<'a> = (
    &'a str,
    Option<usize>,
    Option<usize>,
    Option<u64>,
    Option<usize>,
    Option<usize>,
    MetricKind,
);

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub experiment: String,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub lambda: Option<f64>,
    pub repeat: Option<usize>,
    pub epoch: Option<usize>,
    pub metric: MetricKind,
    pub value: f64,
}

impl MetricRecord {
    pub fn new(experiment: &str, metric: MetricKind, value: f64) -> Self {
        Self {
            experiment: experiment.to_string(),
            n: None,
            m: None,
            lambda: None,
            repeat: None,
            epoch: None,
            metric,
            value,
        }
    }

    pub fn n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn m(mut self, m: usize) -> Self {
        self.m = Some(m);
        self
    }

    pub fn lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn repeat(mut self, repeat: usize) -> Self {
        self.repeat = Some(repeat);
        self
    }

    pub fn epoch(mut self, epoch: usize) -> Self {
        self.epoch = Some(epoch);
        self
    }

    /// The key tuple that must be unique within a run.
    pub fn key(&self) -> RecordKey<'_> {
        (
            &self.experiment,
            self.n,
            self.m,
            self.lambda.map(f64::to_bits),
            self.repeat,
            self.epoch,
            self.metric,
        )
    }
}

/// Checks the record invariants: finite values and unique keys.
pub fn check_records(records: &[MetricRecord]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for r in records {
        if !r.value.is_finite() {
            return Err(HarnessError::Core(mfld_core::Error::NonFinite(format!(
                "{} value {} for key {:?}",
                r.metric,
                r.value,
                r.key()
            ))));
        }
        if !seen.insert(r.key()) {
            return Err(HarnessError::config(format!(
                "duplicate record key {:?}",
                r.key()
            )));
        }
    }
    Ok(())
}

fn opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn to_csv_string(records: &[MetricRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let fields = [
            r.experiment.clone(),
            opt_usize(r.n),
            opt_usize(r.m),
            r.lambda.map(fmt_g17).unwrap_or_default(),
            opt_usize(r.repeat),
            opt_usize(r.epoch),
            r.metric.to_string(),
            fmt_g17(r.value),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn emit_csv(records: &[MetricRecord], path: &Path) -> Result<()> {
    fs::write(path, to_csv_string(records)).map_err(|e| HarnessError::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricRecord>> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_csv(&text).map_err(|msg| {
        HarnessError::Core(mfld_core::Error::Format {
            path: path.to_path_buf(),
            message: msg,
        })
    })
}

fn parse_csv(text: &str) -> std::result::Result<Vec<MetricRecord>, String> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| e.to_string())?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(format!("expected header `{CSV_HEADER}`"));
    }
    fn opt<T: FromStr>(s: &str, what: &str) -> std::result::Result<Option<T>, String> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| format!("bad {what} `{s}`"))
        }
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| e.to_string())?;
        if row.len() != 8 {
            return Err(format!("expected 8 fields, found {}", row.len()));
        }
        out.push(MetricRecord {
            experiment: row[0].to_string(),
            n: opt(&row[1], "N")?,
            m: opt(&row[2], "M")?,
            lambda: opt(&row[3], "lambda")?,
            repeat: opt(&row[4], "repeat")?,
            epoch: opt(&row[5], "epoch")?,
            metric: row[6].parse()?,
            value: row[7]
                .parse()
                .map_err(|_| format!("bad value `{}`", &row[7]))?,
        });
    }
    Ok(out)
}
