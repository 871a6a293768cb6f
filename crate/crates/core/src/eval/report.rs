use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bins::{bin_report, Bin};
use super::sampling::{levels_from_oracle, quality_biased_sample, LEVELS};
use super::stats::{pearson_series, spearman_series, znorm_combine, ScoreSeries};
use crate::error::{Error, Result};

/// Correlation and bin table of one method against the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub n: usize,
    pub bins: Vec<Bin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl MethodReport {
    /// Undefined correlations (constant oracle or constant predictions) are
    /// reported as a diagnostic with null coefficients.
    pub fn evaluate(pred: &ScoreSeries, oracle: &ScoreSeries, bins: usize) -> Result<Self> {
        let (ids, _, _) = pred.align(oracle);
        let n = ids.len();
        let (pearson, spearman, diagnostic) = match (pearson_series(pred, oracle), spearman_series(pred, oracle)) {
            (Ok(p), Ok(s)) => (Some(p), Some(s), None),
            (Err(Error::UndefinedCorrelation(why)), _) | (_, Err(Error::UndefinedCorrelation(why))) => {
                let label = if why.starts_with("second") { "constant oracle" } else { why };
                (None, None, Some(format!("correlation undefined: {label}")))
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        let bins = if n >= bins { bin_report(pred, oracle, bins)? } else { Vec::new() };
        Ok(Self { method: pred.method.clone(), pearson, spearman, n, bins, diagnostic })
    }
}

/// Mean oracle and mean predicted score on a quality-biased resample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub target_level: usize,
    pub draws: usize,
    pub mean_oracle: f64,
    pub mean_pred: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EvaluationReport {
    pub n: usize,
    pub methods: Vec<MethodReport>,
    pub combinations: Vec<MethodReport>,
    pub drift: Vec<DriftRow>,
}

impl EvaluationReport {
    /// Scores every method, all pairwise z-normalised sums, and quality-drift
    /// rows when the oracle supports four distinct levels.
    pub fn build(methods: &[ScoreSeries], oracle: &ScoreSeries, bins: usize, drift_draws: usize, seed: u64) -> Result<Self> {
        let mut report = Self { n: oracle.len(), ..Self::default() };
        for m in methods {
            report.methods.push(MethodReport::evaluate(m, oracle, bins)?);
        }
        for i in 0..methods.len() {
            for j in i + 1..methods.len() {
                match znorm_combine(&methods[i], &methods[j]) {
                    Ok(c) => report.combinations.push(MethodReport::evaluate(&c, oracle, bins)?),
                    Err(Error::UndefinedCorrelation(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        if drift_draws > 0 && !oracle.is_empty() {
            let ids: Vec<u64> = oracle.scores.keys().copied().collect();
            let levels = levels_from_oracle(&oracle.values());
            for target in 1..=LEVELS {
                let Ok(draws) = quality_biased_sample(&levels, target, drift_draws, seed + target as u64) else {
                    break;
                };
                let picked: Vec<u64> = draws.iter().map(|&i| ids[i]).collect();
                let mean_oracle = picked.iter().map(|id| oracle.scores[id]).sum::<f64>() / picked.len() as f64;
                let mean_pred = methods
                    .iter()
                    .map(|m| {
                        let vals: Vec<f64> = picked.iter().filter_map(|id| m.scores.get(id).copied()).collect();
                        (m.method.clone(), vals.iter().sum::<f64>() / vals.len().max(1) as f64)
                    })
                    .collect();
                report.drift.push(DriftRow { target_level: target, draws: drift_draws, mean_oracle, mean_pred });
            }
        }
        Ok(report)
    }

    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().chain(&self.combinations).find(|m| m.method == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `method,pearson,spearman,n,bin,mean_pred,mean_oracle,count`, one row per bin.
    pub fn bins_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "pearson", "spearman", "n", "bin", "mean_pred", "mean_oracle", "count"])?;
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.9}")).unwrap_or_default();
        for m in self.methods.iter().chain(&self.combinations) {
            for (b, bin) in m.bins.iter().enumerate() {
                w.write_record([
                    m.method.clone(),
                    fmt(m.pearson),
                    fmt(m.spearman),
                    m.n.to_string(),
                    (b + 1).to_string(),
                    format!("{:.9}", bin.mean_pred),
                    format!("{:.9}", bin.mean_oracle),
                    bin.count.to_string(),
                ])?;
            }
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::invalid(e.to_string()))?)
            .map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn save(&self, json_path: &Path, csv_path: &Path) -> Result<()> {
        std::fs::write(json_path, self.to_json()?).map_err(|e| Error::io(json_path, e))?;
        std::fs::write(csv_path, self.bins_csv()?).map_err(|e| Error::io(csv_path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(name: &str, v: &[f64]) -> ScoreSeries {
        ScoreSeries::from_values(name, v)
    }

    #[test]
    fn constant_oracle_is_a_diagnostic() {
        let r = MethodReport::evaluate(&series("q", &[0.1, 0.5, 0.2, 0.9, 0.3]), &series("o", &[1.0; 5]), 5).unwrap();
        assert_eq!(r.pearson, None);
        assert_eq!(r.diagnostic.as_deref(), Some("correlation undefined: constant oracle"));
    }

    #[test]
    fn json_contract_fields() {
        let o: Vec<f64> = (0..40).map(|i| (i % 9) as f64 / 8.0).collect();
        let q: Vec<f64> = o.iter().enumerate().map(|(i, v)| v + (i % 3) as f64 * 0.05).collect();
        let t: Vec<f64> = o.iter().enumerate().map(|(i, v)| -v + (i % 5) as f64 * 0.1).collect();
        let report = EvaluationReport::build(&[series("q", &q), series("tp", &t)], &series("o", &o), 5, 1000, 1).unwrap();
        let value: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        let m = &value["methods"][0];
        for key in ["method", "pearson", "spearman", "n", "bins"] {
            assert!(m.get(key).is_some(), "missing {key}");
        }
        for key in ["mean_pred", "mean_oracle", "count"] {
            assert!(m["bins"][0].get(key).is_some());
        }
        assert_eq!(report.combinations[0].method, "q+tp");
        assert_eq!(report.drift.len(), 4);
        assert!(report.drift[3].mean_oracle > report.drift[0].mean_oracle);
        let p = report.method("q").unwrap().pearson.unwrap();
        assert!((-1.0..=1.0).contains(&p));
        let back = EvaluationReport::from_json(&report.to_json().unwrap()).unwrap();
        assert_eq!(back.methods.len(), report.methods.len());
        assert_eq!(back.method("q").unwrap().bins.len(), 5);
        let csv = report.bins_csv().unwrap();
        assert!(csv.starts_with("method,pearson,spearman,n,bin,mean_pred,mean_oracle,count\n"));
        assert_eq!(csv.lines().count(), 1 + 3 * 5);
    }
}
