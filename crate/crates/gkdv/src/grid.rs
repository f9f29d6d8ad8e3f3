//! Uniform symmetric grids, fourth-order difference stencils and quadrature.

use crate::error::{GkdvError, Result};
use serde::{Deserialize, Serialize};

/// Uniform grid on `[-L, L]` with an odd number of nodes, so `x = 0` is a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_length: f64,
    n: usize,
}

pub const DEFAULT_POINTS: usize = 4001;

impl Grid {
    /// An even `n` is bumped to `n + 1`.
    pub fn new(half_length: f64, n: usize) -> Result<Self> {
        if !(half_length > 0.0) || !half_length.is_finite() {
            return Err(GkdvError::InvalidArgument(format!("half length {half_length} must be positive")));
        }
        if n < 11 {
            return Err(GkdvError::InvalidArgument(format!("grid needs at least 11 nodes, got {n}")));
        }
        let n = if n % 2 == 0 { n + 1 } else { n };
        Ok(Grid { half_length, n })
    }

    /// `L = max(20, 30/sqrt(c))`, 4001 nodes.
    pub fn default_for_speed(c: f64) -> Self {
        Grid { half_length: default_half_length(c), n: DEFAULT_POINTS }
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / (self.n - 1) as f64
    }

    /// Index of the node `x = 0`.
    pub fn center(&self) -> usize {
        self.n / 2
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.center() {
            0.0
        } else {
            (i as f64 - self.center() as f64) * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Same extent, spacing halved.
    pub fn refined(&self) -> Self {
        Grid { half_length: self.half_length, n: 2 * self.n - 1 }
    }

    pub fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n {
            return Err(GkdvError::GridMismatch { expected: self.n, got: v.len() });
        }
        Ok(())
    }

    /// Trapezoid weights.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.n];
        w[0] = 0.5 * h;
        w[self.n - 1] = 0.5 * h;
        w
    }

    /// Trapezoid quadrature; spectrally accurate for integrands decaying at both ends.
    pub fn integrate(&self, v: &[f64]) -> f64 {
        let h = self.spacing();
        let n = v.len();
        let interior: f64 = v[1..n - 1].iter().sum();
        h * (interior + 0.5 * (v[0] + v[n - 1]))
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let h = self.spacing();
        let n = a.len();
        let interior: f64 = (1..n - 1).map(|i| a[i] * b[i]).sum();
        h * (interior + 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1]))
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).sqrt()
    }

    /// `V(x) = ∫_{L}^{x} v`, fourth order (trapezoid with endpoint derivative correction).
    pub fn cumulative_from_right(&self, v: &[f64]) -> Vec<f64> {
        let h = self.spacing();
        let dv = first_derivative(v, h);
        let n = v.len();
        let mut out = vec![0.0; n];
        let mut trap = 0.0;
        for i in (0..n - 1).rev() {
            trap += 0.5 * h * (v[i] + v[i + 1]);
            out[i] = -trap + h * h / 12.0 * (dv[n - 1] - dv[i]);
        }
        out
    }

    /// `V(x) = ∫_{-L}^{x} v`, fourth order.
    pub fn cumulative_from_left(&self, v: &[f64]) -> Vec<f64> {
        let h = self.spacing();
        let dv = first_derivative(v, h);
        let mut out = vec![0.0; v.len()];
        let mut trap = 0.0;
        for i in 1..v.len() {
            trap += 0.5 * h * (v[i - 1] + v[i]);
            out[i] = trap - h * h / 12.0 * (dv[i] - dv[0]);
        }
        out
    }

    /// Mirror image `v(-x)`.
    pub fn reflect(v: &[f64]) -> Vec<f64> {
        v.iter().rev().copied().collect()
    }
}

pub fn default_half_length(c: f64) -> f64 {
    (30.0 / c.sqrt()).max(20.0)
}

/// A stencil `sum_k w[k] v[start + k]`, scaled by `1/h^order` by the caller.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub offset: isize,
    pub weights: &'static [f64],
    pub denom: f64,
}

const D1_CENTER: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
const D1_EDGE0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
const D1_EDGE1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
const D1_EDGE0_R: [f64; 5] = [3.0, -16.0, 36.0, -48.0, 25.0];
const D1_EDGE1_R: [f64; 5] = [-1.0, 6.0, -18.0, 10.0, 3.0];

const D2_CENTER: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
const D2_EDGE0: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
const D2_EDGE1: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];
const D2_EDGE0_R: [f64; 6] = [-10.0, 61.0, -156.0, 214.0, -154.0, 45.0];
const D2_EDGE1_R: [f64; 6] = [1.0, -6.0, 14.0, -4.0, -15.0, 10.0];

/// Fourth-order first-derivative stencil at node `i` of `n` (to be divided by `h`).
pub fn d1_stencil(i: usize, n: usize) -> Stencil {
    let (offset, weights): (isize, &'static [f64]) = if i == 0 {
        (0, &D1_EDGE0)
    } else if i == 1 {
        (-1, &D1_EDGE1)
    } else if i == n - 1 {
        (-4, &D1_EDGE0_R)
    } else if i == n - 2 {
        (-3, &D1_EDGE1_R)
    } else {
        (-2, &D1_CENTER)
    };
    Stencil { offset, weights, denom: 12.0 }
}

/// Fourth-order second-derivative stencil at node `i` of `n` (to be divided by `h^2`).
pub fn d2_stencil(i: usize, n: usize) -> Stencil {
    let (offset, weights): (isize, &'static [f64]) = if i == 0 {
        (0, &D2_EDGE0)
    } else if i == 1 {
        (-1, &D2_EDGE1)
    } else if i == n - 1 {
        (-5, &D2_EDGE0_R)
    } else if i == n - 2 {
        (-4, &D2_EDGE1_R)
    } else {
        (-2, &D2_CENTER)
    };
    Stencil { offset, weights, denom: 12.0 }
}

impl Stencil {
    #[inline]
    pub fn apply(&self, i: usize, v: &[f64]) -> f64 {
        let start = (i as isize + self.offset) as usize;
        self.weights.iter().zip(&v[start..]).map(|(w, x)| w * x).sum::<f64>() / self.denom
    }

    /// Column indices and coefficients at row `i`, scaled by `scale`.
    pub fn entries(&self, i: usize, scale: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
        let start = (i as isize + self.offset) as usize;
        self.weights
            .iter()
            .enumerate()
            .map(move |(k, w)| (start + k, w * scale / self.denom))
    }
}

pub fn first_derivative(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| d1_stencil(i, n).apply(i, v) / h).collect()
}

pub fn second_derivative(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| d2_stencil(i, n).apply(i, v) / (h * h)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_symmetric_with_center_node() {
        let g = Grid::new(20.0, 4000).unwrap();
        assert_eq!(g.len(), 4001);
        assert_eq!(g.x(g.center()), 0.0);
        assert!((g.x(0) + 20.0).abs() < 1e-12);
        assert!((g.x(4000) - 20.0).abs() < 1e-12);
        assert_eq!(Grid::default_for_speed(1.0).half_length(), 30.0);
        assert_eq!(Grid::default_for_speed(4.0).half_length(), 20.0);
    }

    #[test]
    fn stencils_are_exact_on_quartics() {
        let g = Grid::new(1.0, 21).unwrap();
        let x = g.nodes();
        let h = g.spacing();
        let p: Vec<f64> = x.iter().map(|&t| t.powi(4) - 2.0 * t.powi(3) + t).collect();
        let d1 = first_derivative(&p, h);
        let d2 = second_derivative(&p, h);
        for (i, &t) in x.iter().enumerate() {
            let e1 = 4.0 * t.powi(3) - 6.0 * t * t + 1.0;
            let e2 = 12.0 * t * t - 12.0 * t;
            assert!((d1[i] - e1).abs() < 1e-9, "d1 at {i}: {} vs {e1}", d1[i]);
            assert!((d2[i] - e2).abs() < 1e-7, "d2 at {i}: {} vs {e2}", d2[i]);
        }
    }

    #[test]
    fn d2_edge_rows_exact_on_quintics() {
        let g = Grid::new(1.0, 21).unwrap();
        let x = g.nodes();
        let h = g.spacing();
        let p: Vec<f64> = x.iter().map(|&t| t.powi(5)).collect();
        let d2 = second_derivative(&p, h);
        for i in [0usize, 1, 19, 20] {
            assert!((d2[i] - 20.0 * x[i].powi(3)).abs() < 1e-7);
        }
    }

    #[test]
    fn cumulative_integrals_fourth_order() {
        let errs: Vec<f64> = [101usize, 201]
            .iter()
            .map(|&n| {
                let g = Grid::new(3.0, n).unwrap();
                let x = g.nodes();
                let v: Vec<f64> = x.iter().map(|t| t.cos()).collect();
                let r = g.cumulative_from_right(&v);
                let l = g.cumulative_from_left(&v);
                x.iter()
                    .enumerate()
                    .map(|(i, t)| {
                        let er = (r[i] - (t.sin() - 3f64.sin())).abs();
                        let el = (l[i] - (t.sin() + 3f64.sin())).abs();
                        er.max(el)
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(errs[0] < 1e-7);
        assert!(errs[0] / errs[1] > 12.0, "ratio {}", errs[0] / errs[1]);
    }

    #[test]
    fn trapezoid_on_gaussian() {
        let g = Grid::new(10.0, 201).unwrap();
        let v: Vec<f64> = g.nodes().iter().map(|t| (-t * t).exp()).collect();
        assert!((g.integrate(&v) - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }
}
