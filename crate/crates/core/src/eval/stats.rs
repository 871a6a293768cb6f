use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Scores keyed by item id, labelled with the method that produced them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSeries {
    pub method: String,
    pub scores: BTreeMap<u64, f64>,
}

impl ScoreSeries {
    pub fn new(method: impl Into<String>) -> Self {
        Self { method: method.into(), scores: BTreeMap::new() }
    }

    pub fn from_values(method: impl Into<String>, values: &[f64]) -> Self {
        Self {
            method: method.into(),
            scores: values.iter().enumerate().map(|(i, &v)| (i as u64, v)).collect(),
        }
    }

    pub fn insert(&mut self, id: u64, score: f64) -> Result<()> {
        if !score.is_finite() {
            return Err(Error::NonFinite("score series"));
        }
        self.scores.insert(id, score);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.scores.values().copied().collect()
    }

    /// Values of both series over their shared ids, in id order.
    pub fn align(&self, other: &ScoreSeries) -> (Vec<u64>, Vec<f64>, Vec<f64>) {
        let mut ids = Vec::new();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (id, &x) in &self.scores {
            if let Some(&y) = other.scores.get(id) {
                ids.push(*id);
                a.push(x);
                b.push(y);
            }
        }
        (ids, a, b)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample Pearson correlation. Zero variance on either side is an error.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension { op: "pearson", lhs: vec![x.len()], rhs: vec![y.len()] });
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two items"));
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedCorrelation("first series has zero variance"));
    }
    if syy == 0.0 {
        return Err(Error::UndefinedCorrelation("second series has zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties given their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson over average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension { op: "spearman", lhs: vec![x.len()], rhs: vec![y.len()] });
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

pub fn pearson_series(x: &ScoreSeries, y: &ScoreSeries) -> Result<f64> {
    let (_, a, b) = x.align(y);
    pearson(&a, &b)
}

pub fn spearman_series(x: &ScoreSeries, y: &ScoreSeries) -> Result<f64> {
    let (_, a, b) = x.align(y);
    spearman(&a, &b)
}

fn znorm(v: &[f64]) -> Result<Vec<f64>> {
    if v.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two items"));
    }
    let m = mean(v);
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
    if var == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance in z-normalisation"));
    }
    let sd = var.sqrt();
    Ok(v.iter().map(|x| (x - m) / sd).collect())
}

/// Sum of the z-normalised series (sample standard deviation) over shared ids.
pub fn znorm_combine(a: &ScoreSeries, b: &ScoreSeries) -> Result<ScoreSeries> {
    let (ids, x, y) = a.align(b);
    let (zx, zy) = (znorm(&x)?, znorm(&y)?);
    let mut out = ScoreSeries::new(format!("{}+{}", a.method, b.method));
    for (i, id) in ids.into_iter().enumerate() {
        out.scores.insert(id, zx[i] + zy[i]);
    }
    Ok(out)
}
