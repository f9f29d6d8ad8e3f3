//! Banded LU with partial pivoting and a stable single-border solver.

use crate::error::{GkdvError, Result};

/// Square band matrix with `kl` sub- and `ku` super-diagonals, column-major band storage
/// with `kl` extra rows reserved for pivoting fill-in.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, ld, ab: vec![0.0; ld * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ld + (self.kl + self.ku + i - j)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.ku >= j && j + self.kl >= i
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.ab[self.idx(i, j)]
        } else {
            0.0
        }
    }

    /// Adds `v` to entry `(i, j)`; panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band kl={} ku={}", self.kl, self.ku);
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band kl={} ku={}", self.kl, self.ku);
        let k = self.idx(i, j);
        self.ab[k] = v;
    }

    pub fn clear_row(&mut self, i: usize) {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku).min(self.n - 1);
        for j in lo..=hi {
            let k = self.idx(i, j);
            self.ab[k] = 0.0;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.ab[self.idx(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// In-place LU factorization (Gaussian elimination with row interchanges).
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let kl = self.kl;
        let kv = self.kl + self.ku;
        let mut piv = vec![0usize; n];
        let mut ju = 0usize;
        let scale = self.ab.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Err(GkdvError::SingularSystem("zero matrix".into()));
        }
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = 0.0;
            for r in 0..=km {
                let v = self.ab[j * self.ld + kv + r].abs();
                if v > best {
                    best = v;
                    jp = r;
                }
            }
            piv[j] = j + jp;
            if best <= scale * 1e-300 {
                return Err(GkdvError::SingularSystem(format!("zero pivot in column {j}")));
            }
            ju = ju.max((j + self.ku + jp).min(n - 1));
            if jp != 0 {
                for col in j..=ju {
                    let a = self.idx(j, col);
                    let b = self.idx(j + jp, col);
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[j * self.ld + kv];
            for r in 1..=km {
                self.ab[j * self.ld + kv + r] /= pivot;
            }
            for col in j + 1..=ju {
                let t = self.ab[self.idx(j, col)];
                if t == 0.0 {
                    continue;
                }
                for r in 1..=km {
                    let l = self.ab[j * self.ld + kv + r];
                    let k = self.idx(j + r, col);
                    self.ab[k] -= l * t;
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn dim(&self) -> usize {
        self.m.n
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = &self.m;
        let n = m.n;
        let kv = m.kl + m.ku;
        let mut x = b.to_vec();
        for j in 0..n {
            let p = self.piv[j];
            if p != j {
                x.swap(j, p);
            }
            let km = m.kl.min(n - 1 - j);
            let xj = x[j];
            for r in 1..=km {
                x[j + r] -= m.ab[j * m.ld + kv + r] * xj;
            }
        }
        for j in (0..n).rev() {
            x[j] /= m.ab[j * m.ld + kv];
            let xj = x[j];
            let lo = j.saturating_sub(kv);
            for i in lo..j {
                x[i] -= m.ab[m.idx(i, j)] * xj;
            }
        }
        x
    }

    /// Solves `A^T x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let m = &self.m;
        let n = m.n;
        let kv = m.kl + m.ku;
        let mut x = b.to_vec();
        for j in 0..n {
            let lo = j.saturating_sub(kv);
            let mut s = x[j];
            for i in lo..j {
                s -= m.ab[m.idx(i, j)] * x[i];
            }
            x[j] = s / m.ab[j * m.ld + kv];
        }
        for j in (0..n).rev() {
            let km = m.kl.min(n - 1 - j);
            let mut s = x[j];
            for r in 1..=km {
                s -= m.ab[j * m.ld + kv + r] * x[j + r];
            }
            x[j] = s;
            let p = self.piv[j];
            if p != j {
                x.swap(j, p);
            }
        }
        x
    }
}

/// Solution of the bordered system `[A b; c^T d] [x; y] = [f; g]`.
#[derive(Debug, Clone)]
pub struct BorderedSolution {
    pub x: Vec<f64>,
    pub y: f64,
}

/// Bordered solver that stays accurate when `A` itself is nearly singular
/// (block elimination with mixed forward/transposed solves and one correction sweep).
pub struct BorderedSystem<'a> {
    lu: &'a BandLu,
    b: &'a [f64],
    c: &'a [f64],
    d: f64,
    v: Vec<f64>,
    w: Vec<f64>,
    delta_star: f64,
    delta: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl<'a> BorderedSystem<'a> {
    pub fn new(lu: &'a BandLu, b: &'a [f64], c: &'a [f64], d: f64) -> Result<Self> {
        let v = lu.solve_transpose(c);
        let w = lu.solve(b);
        let delta_star = d - dot(b, &v);
        let delta = d - dot(c, &w);
        if !delta_star.is_finite() || !delta.is_finite() || delta_star == 0.0 || delta == 0.0 {
            return Err(GkdvError::SingularSystem("degenerate border".into()));
        }
        Ok(BorderedSystem { lu, b, c, d, v, w, delta_star, delta })
    }

    pub fn solve(&self, f: &[f64], g: f64) -> BorderedSolution {
        let y1 = (g - dot(&self.v, f)) / self.delta_star;
        let f1: Vec<f64> = f.iter().zip(self.b).map(|(fi, bi)| fi - bi * y1).collect();
        let g1 = g - self.d * y1;
        let mut x = self.lu.solve(&f1);
        let y2 = (g1 - dot(self.c, &x)) / self.delta;
        for (xi, wi) in x.iter_mut().zip(&self.w) {
            *xi -= wi * y2;
        }
        BorderedSolution { x, y: y1 + y2 }
    }
}
