//! Dense row-major f64 matrices with the handful of products the layer
//! stack needs. Matrix products go through `matrixmultiply::dgemm`;
//! transposed variants are expressed with strides, so no data is copied.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2 {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2 {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Data(format!(
                "tensor data length {} != {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Tensor2 { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Tensor2 { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor2 {
        Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    fn check_shapes(m: usize, k: usize, k2: usize, n: usize) -> Result<()> {
        if k != k2 {
            return Err(Error::Data(format!(
                "matmul dimension mismatch: {m}x{k} * {k2}x{n}"
            )));
        }
        Ok(())
    }

    /// C = A · B.
    pub fn matmul(&self, other: &Tensor2) -> Result<Tensor2> {
        Self::check_shapes(self.rows, self.cols, other.rows, other.cols)?;
        let mut out = Tensor2::zeros(self.rows, other.cols);
        unsafe {
            matrixmultiply::dgemm(
                self.rows,
                self.cols,
                other.cols,
                1.0,
                self.data.as_ptr(),
                self.cols as isize,
                1,
                other.data.as_ptr(),
                other.cols as isize,
                1,
                0.0,
                out.data.as_mut_ptr(),
                out.cols as isize,
                1,
            );
        }
        Ok(out)
    }

    /// C = Aᵀ · B, without materializing the transpose.
    pub fn t_matmul(&self, other: &Tensor2) -> Result<Tensor2> {
        Self::check_shapes(self.cols, self.rows, other.rows, other.cols)?;
        let mut out = Tensor2::zeros(self.cols, other.cols);
        unsafe {
            matrixmultiply::dgemm(
                self.cols,
                self.rows,
                other.cols,
                1.0,
                self.data.as_ptr(),
                1,
                self.cols as isize,
                other.data.as_ptr(),
                other.cols as isize,
                1,
                0.0,
                out.data.as_mut_ptr(),
                out.cols as isize,
                1,
            );
        }
        Ok(out)
    }

    /// C = A · Bᵀ, without materializing the transpose.
    pub fn matmul_t(&self, other: &Tensor2) -> Result<Tensor2> {
        Self::check_shapes(self.rows, self.cols, other.cols, other.rows)?;
        let mut out = Tensor2::zeros(self.rows, other.rows);
        unsafe {
            matrixmultiply::dgemm(
                self.rows,
                self.cols,
                other.rows,
                1.0,
                self.data.as_ptr(),
                self.cols as isize,
                1,
                other.data.as_ptr(),
                1,
                other.cols as isize,
                0.0,
                out.data.as_mut_ptr(),
                out.cols as isize,
                1,
            );
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn naive_matmul(a: &Tensor2, b: &Tensor2) -> Tensor2 {
        let mut c = Tensor2::zeros(a.rows, b.cols);
        for i in 0..a.rows {
            for j in 0..b.cols {
                let mut s = 0.0;
                for k in 0..a.cols {
                    s += a.get(i, k) * b.get(k, j);
                }
                c.set(i, j, s);
            }
        }
        c
    }

    fn random(rows: usize, cols: usize, rng: &mut Rng) -> Tensor2 {
        Tensor2::from_fn(rows, cols, |_, _| rng.range(-1.0, 1.0))
    }

    #[test]
    fn matmul_matches_naive_loop() {
        let mut rng = Rng::seeded(3);
        for &(m, k, n) in &[(3, 4, 5), (1, 7, 2), (8, 8, 8), (32, 136, 128)] {
            let a = random(m, k, &mut rng);
            let b = random(k, n, &mut rng);
            let fast = a.matmul(&b).unwrap();
            let slow = naive_matmul(&a, &b);
            for (x, y) in fast.data.iter().zip(&slow.data) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transposed_products_match_naive() {
        let mut rng = Rng::seeded(4);
        let a = random(6, 3, &mut rng);
        let b = random(6, 5, &mut rng);
        // AᵀB
        let got = a.t_matmul(&b).unwrap();
        for i in 0..3 {
            for j in 0..5 {
                let mut s = 0.0;
                for k in 0..6 {
                    s += a.get(k, i) * b.get(k, j);
                }
                assert!((got.get(i, j) - s).abs() < 1e-12);
            }
        }
        // ABᵀ
        let c = random(4, 6, &mut rng);
        let d = random(5, 6, &mut rng);
        let got = c.matmul_t(&d).unwrap();
        for i in 0..4 {
            for j in 0..5 {
                let mut s = 0.0;
                for k in 0..6 {
                    s += c.get(i, k) * d.get(j, k);
                }
                assert!((got.get(i, j) - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let a = Tensor2::zeros(2, 3);
        let b = Tensor2::zeros(4, 2);
        assert!(a.matmul(&b).is_err());
    }
}
