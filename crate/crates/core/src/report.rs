//! Run reports: a flat JSON object per run and a fixed-column CSV row per
//! trial.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::lra::LowRankFactors;
use crate::oracle::InstanceSpec;

pub const SCHEMA: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    RelativeLra,
    PsdOutput,
    Robust,
    Correlation,
    Distance,
    Ridge,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::RelativeLra,
        Algorithm::PsdOutput,
        Algorithm::Robust,
        Algorithm::Correlation,
        Algorithm::Distance,
        Algorithm::Ridge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::RelativeLra => "relative_lra",
            Algorithm::PsdOutput => "psd_output",
            Algorithm::Robust => "robust",
            Algorithm::Correlation => "correlation",
            Algorithm::Distance => "distance",
            Algorithm::Ridge => "ridge",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown algorithm `{s}`")))
    }
}

/// Error of a rank-`k` output against the clean matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    /// `‖A − MN‖_F²`.
    pub frobenius_sq_error: f64,
    /// `‖A − A_k‖_F²`.
    pub optimum: f64,
    /// `frobenius_sq_error / optimum`.
    pub relative_ratio: f64,
    /// `(frobenius_sq_error − optimum) / ‖A‖_F²`.
    pub additive_ratio: f64,
}

impl ErrorMetrics {
    pub fn new(frobenius_sq_error: f64, optimum: f64, total: f64) -> Self {
        let relative_ratio = if optimum > 0.0 {
            frobenius_sq_error / optimum
        } else if frobenius_sq_error <= 1e-20 * total.max(1.0) {
            1.0
        } else {
            f64::INFINITY
        };
        let additive_ratio = if total > 0.0 {
            (frobenius_sq_error - optimum) / total
        } else {
            0.0
        };
        ErrorMetrics {
            frobenius_sq_error,
            optimum,
            relative_ratio,
            additive_ratio,
        }
    }

    /// Evaluates `factors` against `truth` given its precomputed optimum.
    pub fn of(factors: &LowRankFactors, truth: &DenseMatrix, optimum: f64) -> Self {
        Self::new(factors.error_sq(truth), optimum, linalg::frobenius_sq(truth))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub spec: InstanceSpec,
    pub seed: u64,
    pub trial: u64,
    pub k: usize,
    pub eps: f64,
    pub queries_total: u64,
    /// Per-stage queries, in pipeline order; sums to `queries_total`.
    pub stages: Vec<(String, u64)>,
    pub metrics: ErrorMetrics,
    /// Whether the run met its algorithm's guarantee.
    pub passed: bool,
    pub wall_time: f64,
    pub constants: Vec<(String, f64)>,
    /// Extra named measurements (ridge objective ratios and the like).
    pub extra: Vec<(String, f64)>,
    pub flags: Vec<String>,
}

fn num(x: f64) -> Value {
    // JSON has no non-finite numbers
    if x.is_finite() {
        Value::from(x)
    } else if x.is_nan() {
        Value::from("nan")
    } else if x > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}

fn get_num(v: &Value, key: &str) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| Error::Parse(format!("`{key}` is not a float"))),
        Value::String(s) => match s.as_str() {
            "nan" => Ok(f64::NAN),
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            _ => Err(Error::Parse(format!("`{key}` is not a number"))),
        },
        _ => Err(Error::Parse(format!("`{key}` is not a number"))),
    }
}

impl RunReport {
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("schema".into(), Value::from(SCHEMA));
        m.insert("algorithm".into(), Value::from(self.algorithm.name()));
        m.insert("spec".into(), Value::from(self.spec.to_kv()));
        m.insert("seed".into(), Value::from(self.seed));
        m.insert("trial".into(), Value::from(self.trial));
        m.insert("k".into(), Value::from(self.k as u64));
        m.insert("eps".into(), num(self.eps));
        m.insert("queries_total".into(), Value::from(self.queries_total));
        m.insert(
            "stage_order".into(),
            Value::from(self.stages.iter().map(|s| s.0.clone()).collect::<Vec<_>>()),
        );
        for (name, q) in &self.stages {
            m.insert(format!("queries_{name}"), Value::from(*q));
        }
        m.insert("frobenius_sq_error".into(), num(self.metrics.frobenius_sq_error));
        m.insert("optimum".into(), num(self.metrics.optimum));
        m.insert("relative_ratio".into(), num(self.metrics.relative_ratio));
        m.insert("additive_ratio".into(), num(self.metrics.additive_ratio));
        m.insert("passed".into(), Value::from(self.passed));
        m.insert("wall_time".into(), num(self.wall_time));
        m.insert(
            "constant_order".into(),
            Value::from(self.constants.iter().map(|s| s.0.clone()).collect::<Vec<_>>()),
        );
        for (name, c) in &self.constants {
            m.insert(format!("const_{name}"), num(*c));
        }
        m.insert(
            "extra_order".into(),
            Value::from(self.extra.iter().map(|s| s.0.clone()).collect::<Vec<_>>()),
        );
        for (name, c) in &self.extra {
            m.insert(format!("extra_{name}"), num(*c));
        }
        m.insert("flags".into(), Value::from(self.flags.clone()));
        Value::Object(m)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let m = v.as_object().ok_or_else(|| Error::Parse("report must be a JSON object".into()))?;
        let field = |key: &str| m.get(key).ok_or_else(|| Error::Parse(format!("missing `{key}`")));
        let uint = |key: &str| -> Result<u64> {
            field(key)?
                .as_u64()
                .ok_or_else(|| Error::Parse(format!("`{key}` is not an unsigned integer")))
        };
        let float = |key: &str| -> Result<f64> { get_num(field(key)?, key) };
        let text = |key: &str| -> Result<String> {
            field(key)?
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| Error::Parse(format!("`{key}` is not a string")))
        };
        let names = |key: &str| -> Result<Vec<String>> {
            field(key)?
                .as_array()
                .ok_or_else(|| Error::Parse(format!("`{key}` is not an array")))?
                .iter()
                .map(|s| {
                    s.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| Error::Parse(format!("`{key}` holds a non-string")))
                })
                .collect()
        };
        let schema = uint("schema")?;
        if schema != SCHEMA {
            return Err(Error::Parse(format!("unsupported report schema {schema}")));
        }
        let stages = names("stage_order")?
            .into_iter()
            .map(|s| Ok((s.clone(), uint(&format!("queries_{s}"))?)))
            .collect::<Result<Vec<_>>>()?;
        let constants = names("constant_order")?
            .into_iter()
            .map(|s| Ok((s.clone(), float(&format!("const_{s}"))?)))
            .collect::<Result<Vec<_>>>()?;
        let extra = names("extra_order")?
            .into_iter()
            .map(|s| Ok((s.clone(), float(&format!("extra_{s}"))?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(RunReport {
            algorithm: text("algorithm")?.parse()?,
            spec: InstanceSpec::from_kv(&text("spec")?)?,
            seed: uint("seed")?,
            trial: uint("trial")?,
            k: uint("k")? as usize,
            eps: float("eps")?,
            queries_total: uint("queries_total")?,
            stages,
            metrics: ErrorMetrics {
                frobenius_sq_error: float("frobenius_sq_error")?,
                optimum: float("optimum")?,
                relative_ratio: float("relative_ratio")?,
                additive_ratio: float("additive_ratio")?,
            },
            passed: field("passed")?
                .as_bool()
                .ok_or_else(|| Error::Parse("`passed` is not a bool".into()))?,
            wall_time: float("wall_time")?,
            constants,
            extra,
            flags: names("flags")?,
        })
    }

    pub fn csv_row(&self) -> CsvRow {
        CsvRow {
            trial: self.trial,
            seed: self.seed,
            algorithm: self.algorithm.name(),
            family: self.spec.family.name(),
            n: self.spec.n,
            k: self.k,
            eps: self.eps,
            eta: self.spec.eta,
            queries_total: self.queries_total,
            queries_over_n2: self.queries_total as f64 / (self.spec.n as f64).powi(2),
            frobenius_sq_error: self.metrics.frobenius_sq_error,
            optimum: self.metrics.optimum,
            relative_ratio: self.metrics.relative_ratio,
            additive_ratio: self.metrics.additive_ratio,
            passed: self.passed,
        }
    }
}

/// One CSV line per trial. Wall time is left out so that identical
/// arguments give byte-identical files.
#[derive(Debug, Clone, Serialize)]
pub struct CsvRow {
    pub trial: u64,
    pub seed: u64,
    pub algorithm: &'static str,
    pub family: &'static str,
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub eta: f64,
    pub queries_total: u64,
    pub queries_over_n2: f64,
    pub frobenius_sq_error: f64,
    pub optimum: f64,
    pub relative_ratio: f64,
    pub additive_ratio: f64,
    pub passed: bool,
}

pub const CSV_COLUMNS: &str = "trial,seed,algorithm,family,n,k,eps,eta,queries_total,queries_over_n2,\
frobenius_sq_error,optimum,relative_ratio,additive_ratio,passed";

pub fn write_csv<W: Write>(out: W, reports: &[RunReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r.csv_row()).map_err(|e| Error::Parse(e.to_string()))?;
    }
    if reports.is_empty() {
        w.write_record(CSV_COLUMNS.split(',')).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// `[{...}, ...]` for several trials, a single object for one.
pub fn reports_to_json(reports: &[RunReport]) -> Value {
    if reports.len() == 1 {
        reports[0].to_json()
    } else {
        Value::from(reports.iter().map(RunReport::to_json).collect::<Vec<_>>())
    }
}

pub fn reports_from_json(v: &Value) -> Result<Vec<RunReport>> {
    match v {
        Value::Array(items) => items.iter().map(RunReport::from_json).collect(),
        other => Ok(vec![RunReport::from_json(other)?]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        RunReport {
            algorithm: Algorithm::Robust,
            spec: InstanceSpec::random_psd(64, 2, 0.3, 5),
            seed: 9,
            trial: 1,
            k: 2,
            eps: 0.25,
            queries_total: 30,
            stages: vec![("a".into(), 10), ("b".into(), 20)],
            metrics: ErrorMetrics::new(1.0 / 3.0, 0.0, 2.0),
            passed: true,
            wall_time: 0.125,
            constants: vec![("c".into(), 0.1)],
            extra: vec![("worst".into(), f64::NAN)],
            flags: vec!["note".into()],
        }
    }

    #[test]
    fn json_round_trip() {
        let r = sample();
        let text = serde_json::to_string(&r.to_json()).unwrap();
        let back = RunReport::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert!(back.extra[0].1.is_nan());
        let mut a = r.clone();
        let mut b = back;
        a.extra.clear();
        b.extra.clear();
        assert_eq!(a, b);
        assert_eq!(r.metrics.relative_ratio, f64::INFINITY);
    }

    #[test]
    fn stage_keys_are_flat() {
        let v = sample().to_json();
        assert_eq!(v["queries_a"], 10);
        assert_eq!(v["schema"], 1);
    }

    #[test]
    fn csv_header_matches_columns() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[sample()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS);
        assert_eq!(text.lines().count(), 2);
    }
}
