use demograph_core::DenseMatrix;
use serde::{Deserialize, Serialize};

use crate::error::GnnError;

/// Row-major dense `f64` matrix.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::filled(1, 1, value)
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, GnnError> {
        if data.len() != rows * cols {
            return Err(GnnError::shape(
                "tensor",
                format!("{} values for {rows}x{cols}", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, GnnError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(GnnError::shape("tensor", "ragged rows"));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Index of the largest entry per row; the first wins on ties.
    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

impl From<&DenseMatrix> for Tensor {
    fn from(m: &DenseMatrix) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            data: m.data().to_vec(),
        }
    }
}

/// `a · b`. Zero entries of `a` are skipped, which makes sparse 0/1
/// feature matrices cheap.
pub(crate) fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let (n, k, m) = (a.rows, a.cols, b.cols);
    let mut out = Tensor::zeros(n, m);
    for i in 0..n {
        let orow = &mut out.data[i * m..(i + 1) * m];
        for p in 0..k {
            let av = a.data[i * k + p];
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in orow.iter_mut().zip(&b.data[p * m..(p + 1) * m]) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `aᵀ · g`.
pub(crate) fn matmul_at_b(a: &Tensor, g: &Tensor) -> Tensor {
    let (n, k, m) = (a.rows, a.cols, g.cols);
    let mut out = Tensor::zeros(k, m);
    for i in 0..n {
        let grow = &g.data[i * m..(i + 1) * m];
        for p in 0..k {
            let av = a.data[i * k + p];
            if av == 0.0 {
                continue;
            }
            for (o, &gv) in out.data[p * m..(p + 1) * m].iter_mut().zip(grow) {
                *o += av * gv;
            }
        }
    }
    out
}

/// `g · bᵀ`.
pub(crate) fn matmul_a_bt(g: &Tensor, b: &Tensor) -> Tensor {
    let (n, m, k) = (g.rows, g.cols, b.rows);
    let mut out = Tensor::zeros(n, k);
    for i in 0..n {
        let grow = &g.data[i * m..(i + 1) * m];
        for p in 0..k {
            let brow = &b.data[p * m..(p + 1) * m];
            out.data[i * k + p] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_variants_agree() {
        let a = Tensor::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, 3.0, -1.0]]).unwrap();
        let b = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let c = matmul(&a, &b);
        assert_eq!(c.data(), &[11.0, 14.0, 4.0, 6.0]);
        let g = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(matmul_at_b(&a, &g).data(), &[1.0, 0.0, 0.0, 3.0, 2.0, -1.0]);
        assert_eq!(matmul_a_bt(&g, &b).data(), &[1.0, 3.0, 5.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn argmax_first_on_ties() {
        let t = Tensor::from_rows(&[vec![1.0, 1.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(t.argmax_rows(), vec![0, 1]);
    }
}
