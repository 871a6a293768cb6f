use serde::{Deserialize, Serialize};

use super::stats::ScoreSeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub mean_pred: f64,
    pub mean_oracle: f64,
    pub count: usize,
}

/// Sizes of `bins` contiguous groups over `n` items; the remainder goes to the
/// earliest groups.
pub fn bin_sizes(n: usize, bins: usize) -> Result<Vec<usize>> {
    if bins == 0 {
        return Err(Error::invalid("bin count must be at least 1"));
    }
    if n < bins {
        return Err(Error::invalid(format!("{n} items cannot fill {bins} bins")));
    }
    Ok((0..bins).map(|b| n / bins + usize::from(b < n % bins)).collect())
}

/// Equal-count bins over items sorted by predicted score (ties by id).
pub fn bin_report(pred: &ScoreSeries, oracle: &ScoreSeries, bins: usize) -> Result<Vec<Bin>> {
    let (_, p, o) = pred.align(oracle);
    let sizes = bin_sizes(p.len(), bins)?;
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut out = Vec::with_capacity(bins);
    let mut start = 0;
    for size in sizes {
        let idx = &order[start..start + size];
        out.push(Bin {
            mean_pred: idx.iter().map(|&i| p[i]).sum::<f64>() / size as f64,
            mean_oracle: idx.iter().map(|&i| o[i]).sum::<f64>() / size as f64,
            count: size,
        });
        start += size;
    }
    Ok(out)
}

/// Whether bin oracle means rise from first to last bin, allowing at most
/// `allowed_inversions` adjacent drops, each no larger than `tolerance`.
pub fn oracle_nondecreasing(bins: &[Bin], allowed_inversions: usize, tolerance: f64) -> bool {
    let mut inversions = 0;
    for w in bins.windows(2) {
        let drop = w[0].mean_oracle - w[1].mean_oracle;
        if drop > 0.0 {
            if drop > tolerance {
                return false;
            }
            inversions += 1;
        }
    }
    inversions <= allowed_inversions
}
