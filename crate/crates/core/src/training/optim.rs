use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::ParameterStore;

/// Inverse-square-root schedule with linear warmup:
/// `factor · d^-0.5 · min(step^-0.5, step · warmup^-1.5)`.
pub fn lr_at(step: u64, d: usize, warmup: u64, factor: f64) -> Result<f64> {
    if step < 1 {
        return Err(Error::invalid("learning-rate step must be at least 1"));
    }
    if warmup < 1 {
        return Err(Error::invalid("warmup must be at least 1"));
    }
    let s = step as f64;
    let w = warmup as f64;
    Ok(factor * (d as f64).powf(-0.5) * s.powf(-0.5).min(s * w.powf(-1.5)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.98, eps: 1e-9 }
    }
}

/// First and second moments per named parameter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: BTreeMap<String, Vec<f64>>,
    pub v: BTreeMap<String, Vec<f64>>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One bias-corrected Adam update of every parameter in `trainable`.
pub fn adam_step(
    params: &mut ParameterStore,
    state: &mut AdamState,
    grads: &BTreeMap<String, Vec<f64>>,
    trainable: &[String],
    lr: f64,
    cfg: AdamConfig,
) -> Result<()> {
    for name in trainable {
        if !grads.contains_key(name) {
            return Err(Error::MissingGradient(name.clone()));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for name in trainable {
        let g = &grads[name];
        let p = params
            .get_mut(name)
            .ok_or_else(|| Error::invalid(format!("unknown parameter `{name}`")))?;
        if g.len() != p.numel() {
            return Err(Error::Dimension { op: "adam gradient", lhs: p.shape().to_vec(), rhs: vec![g.len()] });
        }
        let m = state.m.entry(name.clone()).or_insert_with(|| vec![0.0; g.len()]);
        let v = state.v.entry(name.clone()).or_insert_with(|| vec![0.0; g.len()]);
        for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
            let mhat = *mi / c1;
            let vhat = *vi / c2;
            *w -= lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
