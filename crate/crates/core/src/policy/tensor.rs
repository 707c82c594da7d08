use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Dense row-major matrix. Column vectors are stored with `cols == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Normal entries with the given standard deviation, rounded to f32.
    pub fn normal<R: Rng>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Self {
        let dist = Normal::new(0.0, std).expect("finite std");
        let data = (0..rows * cols).map(|_| round_f32(dist.sample(rng))).collect();
        Matrix { rows, cols, data }
    }

    pub fn zeros_like(&self) -> Self {
        Matrix::zeros(self.rows, self.cols)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// W·x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// out += Wᵀ·g
    pub fn matvec_t_add(&self, g: &[f64], out: &mut [f64]) {
        debug_assert_eq!(g.len(), self.rows);
        for (i, &gi) in g.iter().enumerate() {
            if gi != 0.0 {
                axpy(gi, self.row(i), out);
            }
        }
    }

    /// W += g·xᵀ
    pub fn add_outer(&mut self, g: &[f64], x: &[f64]) {
        for (i, &gi) in g.iter().enumerate() {
            if gi != 0.0 {
                axpy(gi, x, self.row_mut(i));
            }
        }
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|a| *a = 0.0);
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }
}

pub fn round_f32(x: f64) -> f64 {
    x as f32 as f64
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// y += a·x
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Softmax over the entries where `allowed` is true; the rest get exactly 0.
pub fn masked_softmax(logits: &[f64], allowed: &[bool]) -> Vec<f64> {
    let max = logits
        .iter()
        .zip(allowed)
        .filter(|(_, &a)| a)
        .map(|(l, _)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits
        .iter()
        .zip(allowed)
        .map(|(l, &a)| if a { (l - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    masked_softmax(logits, &vec![true; logits.len()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_transpose() {
        let w = Matrix {
            rows: 2,
            cols: 3,
            data: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        };
        assert_eq!(w.matvec(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
        let mut out = vec![0.0; 3];
        w.matvec_t_add(&[1.0, 1.0], &mut out);
        assert_eq!(out, vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn masked_softmax_zeroes_masked_entries() {
        let p = masked_softmax(&[0.0, 5.0, 0.0], &[true, false, true]);
        assert_eq!(p, vec![0.5, 0.0, 0.5]);
        let q = softmax(&[1000.0, 1000.0]);
        assert_eq!(q, vec![0.5, 0.5]);
    }
}
