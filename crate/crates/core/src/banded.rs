//! Banded LU factorization without pivoting, for the diagonally dominant
//! polar stencil matrices.

/// Square band matrix stored row-wise: entry `(i, j)` with `|i - j| <= bw`
/// lives at `i * (2 bw + 1) + (j + bw - i)`.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    pub n: usize,
    pub bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (2 * bw + 1)] }
    }

    #[inline]
    fn pos(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.bw);
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let p = self.pos(i, j);
        self.data[p] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.bw {
            0.0
        } else {
            self.data[self.pos(i, j)]
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let w = 2 * self.bw + 1;
        (0..self.n)
            .map(|i| {
                let j0 = i.saturating_sub(self.bw);
                let j1 = (i + self.bw).min(self.n - 1);
                let row = &self.data[i * w..(i + 1) * w];
                (j0..=j1).map(|j| row[j + self.bw - i] * x[j]).sum()
            })
            .collect()
    }

    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        let w = 2 * self.bw + 1;
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bw);
            let j1 = (i + self.bw).min(self.n - 1);
            let row = &self.data[i * w..(i + 1) * w];
            for j in j0..=j1 {
                y[j] += row[j + self.bw - i] * x[i];
            }
        }
        y
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// In-place Doolittle factorization `A = L U` (unit lower L).
    pub fn factor(mut self) -> BandedLu {
        let n = self.n;
        let bw = self.bw;
        let w = 2 * bw + 1;
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0f64;
        for k in 0..n {
            let pivot = self.data[k * w + bw];
            min_pivot = min_pivot.min(pivot.abs());
            max_pivot = max_pivot.max(pivot.abs());
            let inv = 1.0 / pivot;
            let imax = (k + bw).min(n - 1);
            let jmax = (k + bw).min(n - 1);
            let (head, tail) = self.data.split_at_mut((k + 1) * w);
            let krow = &head[k * w..(k + 1) * w];
            for i in k + 1..=imax {
                let row = &mut tail[(i - k - 1) * w..(i - k) * w];
                let off = k + bw - i;
                let l = row[off] * inv;
                if l == 0.0 {
                    continue;
                }
                row[off] = l;
                // row[j + bw - i] -= l * krow[j + bw - k] for j in k+1..=jmax
                let a0 = k + 1 + bw - i;
                let b0 = 1 + bw;
                let len = jmax - k;
                let dst = &mut row[a0..a0 + len];
                let src = &krow[b0..b0 + len];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d -= l * s;
                }
            }
        }
        BandedLu { n, bw, data: self.data, min_pivot, max_pivot }
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    pub n: usize,
    pub bw: usize,
    data: Vec<f64>,
    pub min_pivot: f64,
    pub max_pivot: f64,
}

impl BandedLu {
    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let w = 2 * bw + 1;
        let mut x = b.to_vec();
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let row = &self.data[i * w..(i + 1) * w];
            let mut s = x[i];
            for j in j0..i {
                s -= row[j + bw - i] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let j1 = (i + bw).min(n - 1);
            let row = &self.data[i * w..(i + 1) * w];
            let mut s = x[i];
            for j in i + 1..=j1 {
                s -= row[j + bw - i] * x[j];
            }
            x[i] = s / row[bw];
        }
        x
    }

    /// Solves `A^T x = b`.
    pub fn solve_t(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let w = 2 * bw + 1;
        let mut x = b.to_vec();
        // U^T y = b: forward, column-oriented.
        for i in 0..n {
            let row = &self.data[i * w..(i + 1) * w];
            x[i] /= row[bw];
            let xi = x[i];
            let j1 = (i + bw).min(n - 1);
            for j in i + 1..=j1 {
                x[j] -= row[j + bw - i] * xi;
            }
        }
        // L^T x = y: backward.
        for i in (0..n).rev() {
            let row = &self.data[i * w..(i + 1) * w];
            let xi = x[i];
            let j0 = i.saturating_sub(bw);
            for j in j0..i {
                x[j] -= row[j + bw - i] * xi;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_and_transposed_solves() {
        let n = 30;
        let bw = 4;
        let mut a = BandMatrix::zeros(n, bw);
        for i in 0..n {
            for j in i.saturating_sub(bw)..=(i + bw).min(n - 1) {
                let v = if i == j { 10.0 } else { ((i * 7 + j * 3) % 5) as f64 * 0.3 - 0.6 };
                a.add(i, j, v);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.matvec(&x);
        let bt = a.matvec_t(&x);
        let lu = a.clone().factor();
        let y = lu.solve(&b);
        let yt = lu.solve_t(&bt);
        for i in 0..n {
            assert!((y[i] - x[i]).abs() < 1e-12);
            assert!((yt[i] - x[i]).abs() < 1e-12);
        }
    }
}
