use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{LdpError, Result};
use crate::params::{ParamId, ParamStore};

/// Adam with bias correction and optional global-norm gradient clipping.
///
/// Only parameters with `requires_grad` are touched.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: Option<f64>,
    #[serde(skip)]
    state: BTreeMap<ParamId, (Vec<f64>, Vec<f64>)>,
    #[serde(skip)]
    t: u64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, clip_norm: None, state: BTreeMap::new(), t: 0 }
    }

    pub fn with_clip(mut self, max_norm: Option<f64>) -> Self {
        self.clip_norm = max_norm;
        self
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update from the accumulated gradients, then clears them.
    /// Returns the gradient norm before clipping.
    pub fn step(&mut self, params: &mut ParamStore) -> Result<f64> {
        let ids = params.trainable();
        if ids.is_empty() {
            return Err(LdpError::State("no trainable parameters".into()));
        }
        let norm = ids
            .iter()
            .filter_map(|&id| params.get(id).grad())
            .flat_map(|g| g.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt();
        if !norm.is_finite() {
            return Err(ldp_autodiff::AutodiffError::NonFinite { op: "adam" }.into());
        }
        let clip = match self.clip_norm {
            Some(max) if norm > max => max / norm,
            _ => 1.0,
        };
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for id in ids {
            let Some(g) = params.get(id).grad().map(<[f64]>::to_vec) else { continue };
            let n = g.len();
            let (m, v) = self.state.entry(id).or_insert_with(|| (vec![0.0; n], vec![0.0; n]));
            let w = params.get_mut(id).data_mut();
            for i in 0..n {
                let gi = g[i] * clip;
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                w[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
        params.zero_grad();
        Ok(norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ldp_autodiff::Tensor;

    #[test]
    fn first_step_moves_by_lr_and_skips_frozen() {
        let mut ps = ParamStore::default();
        let a = ps.add("a", Tensor::from_vec(vec![2], vec![1.0, -1.0]).unwrap().with_grad());
        let b = ps.add("b", Tensor::from_vec(vec![1], vec![5.0]).unwrap());
        ps.get_mut(a).accumulate_grad(&[3.0, -0.5]).unwrap();
        let mut opt = Adam::new(0.1);
        opt.step(&mut ps).unwrap();
        let w = ps.get(a).data();
        assert!((w[0] - 0.9).abs() < 1e-7 && (w[1] + 0.9).abs() < 1e-7);
        assert_eq!(ps.get(b).data(), &[5.0]);
        assert!(ps.get(a).grad().is_none_or(|g| g.iter().all(|&x| x == 0.0)));
    }
}
