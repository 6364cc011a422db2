//! Rotary position embedding for text (1-D) and patch grids (2-D).
//!
//! A head vector of width `head_dim` is viewed as `head_dim / 2` coordinate
//! pairs. In 1-D mode pair `i` turns by `pos · base^(-i / pairs)`. In 2-D mode
//! the first half of the pairs turn with the row index and the second half
//! with the column index, each half using its own frequency ladder
//! `base^(-j / half)`.

use ldp_autodiff::{RopeTable, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, LdpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RopeMode {
    Rope1dText,
    Rope2dImage,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Positions {
    Linear(Vec<usize>),
    Grid(Vec<(usize, usize)>),
}

impl Positions {
    pub fn len(&self) -> usize {
        match self {
            Positions::Linear(p) => p.len(),
            Positions::Grid(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major positions of a `rows × cols` grid.
    pub fn grid(rows: usize, cols: usize) -> Self {
        Positions::Grid((0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionalScheme {
    pub mode: RopeMode,
    pub base: f64,
}

impl PositionalScheme {
    pub fn new(mode: RopeMode, base: f64) -> Self {
        Self { mode, base }
    }

    fn check_head_dim(&self, head_dim: usize) -> Result<()> {
        if head_dim == 0 || !head_dim.is_multiple_of(2) {
            return config_err(format!("rotary embedding needs an even head_dim, got {head_dim}"));
        }
        if self.mode == RopeMode::Rope2dImage && !head_dim.is_multiple_of(4) {
            return config_err(format!("2-D rotary needs head_dim divisible by 4, got {head_dim}"));
        }
        Ok(())
    }

    /// Rotation angles, `[positions × head_dim/2]`.
    pub fn angles(&self, positions: &Positions, head_dim: usize) -> Result<Vec<f64>> {
        self.check_head_dim(head_dim)?;
        let pairs = head_dim / 2;
        let mut out = Vec::with_capacity(positions.len() * pairs);
        match (self.mode, positions) {
            (RopeMode::Rope1dText, Positions::Linear(ps)) => {
                for &p in ps {
                    for i in 0..pairs {
                        out.push(p as f64 * self.base.powf(-(i as f64) / pairs as f64));
                    }
                }
            }
            (RopeMode::Rope2dImage, Positions::Grid(ps)) => {
                let half = pairs / 2;
                for &(r, c) in ps {
                    for i in 0..pairs {
                        let (coord, j) = if i < half { (r, i) } else { (c, i - half) };
                        out.push(coord as f64 * self.base.powf(-(j as f64) / half as f64));
                    }
                }
            }
            (mode, _) => {
                return config_err(format!("positions do not match rotary mode {mode:?}"));
            }
        }
        Ok(out)
    }

    pub fn table(&self, positions: &Positions, head_dim: usize) -> Result<RopeTable> {
        let angles = self.angles(positions, head_dim)?;
        Ok(RopeTable::from_angles(positions.len(), head_dim / 2, &angles)?)
    }
}

/// Rotates a `[heads × len × head_dim]` query or key tensor.
pub fn apply_rope(x: &Tensor, positions: &Positions, scheme: &PositionalScheme) -> Result<Tensor> {
    let [heads, len, head_dim] = x.shape() else {
        return Err(LdpError::Shape(format!(
            "apply_rope expects [heads x len x head_dim], got {:?}",
            x.shape()
        )));
    };
    let (heads, len, head_dim) = (*heads, *len, *head_dim);
    if positions.len() != len {
        return Err(LdpError::Shape(format!(
            "{} positions for sequence length {len}",
            positions.len()
        )));
    }
    let table = scheme.table(positions, head_dim)?;
    let mut data = x.data().to_vec();
    for h in 0..heads {
        let block = &mut data[h * len * head_dim..(h + 1) * len * head_dim];
        table.rotate(block, head_dim, false);
    }
    Ok(Tensor::from_vec(x.shape().to_vec(), data)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text() -> PositionalScheme {
        PositionalScheme::new(RopeMode::Rope1dText, 10_000.0)
    }

    #[test]
    fn origin_is_identity() {
        let x = Tensor::from_fn(&[2, 1, 8], |i| i as f64 - 3.5);
        let y = apply_rope(&x, &Positions::Linear(vec![0]), &text()).unwrap();
        assert!(y.bit_eq(&x));
        let img = PositionalScheme::new(RopeMode::Rope2dImage, 100.0);
        let y = apply_rope(&x, &Positions::Grid(vec![(0, 0)]), &img).unwrap();
        assert!(y.bit_eq(&x));
    }

    #[test]
    fn head_dim_errors() {
        let x = Tensor::zeros(&[1, 1, 6]);
        assert!(apply_rope(&x, &Positions::Linear(vec![1]), &text()).is_ok());
        let img = PositionalScheme::new(RopeMode::Rope2dImage, 100.0);
        assert!(matches!(
            apply_rope(&x, &Positions::Grid(vec![(1, 1)]), &img),
            Err(LdpError::Config(_))
        ));
        let odd = Tensor::zeros(&[1, 1, 5]);
        assert!(matches!(
            apply_rope(&odd, &Positions::Linear(vec![1]), &text()),
            Err(LdpError::Config(_))
        ));
        assert!(apply_rope(&x, &Positions::Grid(vec![(0, 1)]), &text()).is_err());
    }

    #[test]
    fn grid_rows_and_cols_use_separate_pairs() {
        let img = PositionalScheme::new(RopeMode::Rope2dImage, 100.0);
        let a = img.angles(&Positions::Grid(vec![(3, 0)]), 8).unwrap();
        assert!(a[..2].iter().all(|&v| v != 0.0));
        assert!(a[2..].iter().all(|&v| v == 0.0));
        let b = img.angles(&Positions::Grid(vec![(0, 5)]), 8).unwrap();
        assert!(b[..2].iter().all(|&v| v == 0.0));
        assert_eq!(b[2], 5.0);
    }
}
