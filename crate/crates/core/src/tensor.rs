//! Dense row-major `f64` tensors.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() || shape.contains(&0) {
            return Err(Error::shape(
                "Tensor::from_vec",
                format!("{} values for shape {:?}", expected, shape),
                data.len(),
            ));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Samples every element uniformly from `[-limit, limit]`.
    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], limit: f64, rng: &mut R) -> Self {
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| rng.random_range(-limit..=limit))
            .collect::<Vec<_>>();
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
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

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::shape(
                "reshape",
                format!("{:?}", self.shape),
                format!("{:?}", shape),
            ));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.expect_shape("add_assign", other.shape())?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn expect_shape(&self, op: &'static str, shape: &[usize]) -> Result<()> {
        if self.shape != shape {
            return Err(Error::shape(
                op,
                format!("{:?}", shape),
                format!("{:?}", self.shape),
            ));
        }
        Ok(())
    }

    pub(crate) fn expect_rank(&self, op: &'static str, rank: usize) -> Result<()> {
        if self.shape.len() != rank {
            return Err(Error::shape(
                op,
                format!("rank {}", rank),
                format!("{:?}", self.shape),
            ));
        }
        Ok(())
    }

    pub(crate) fn expect_finite(&self, op: &str) -> Result<()> {
        if !self.all_finite() {
            return Err(Error::NonFinite(op.to_string()));
        }
        Ok(())
    }

    /// Swaps the last two axes of a rank-3 tensor.
    pub fn transpose_last2(&self) -> Result<Self> {
        self.expect_rank("transpose_last2", 3)?;
        let (b, r, c) = (self.shape[0], self.shape[1], self.shape[2]);
        let mut out = vec![0.0; self.data.len()];
        for bi in 0..b {
            let src = &self.data[bi * r * c..(bi + 1) * r * c];
            let dst = &mut out[bi * r * c..(bi + 1) * r * c];
            for i in 0..r {
                for j in 0..c {
                    dst[j * r + i] = src[i * c + j];
                }
            }
        }
        Ok(Self {
            shape: vec![b, c, r],
            data: out,
        })
    }

    /// Reverses axis 1 of a rank-3 tensor (the time axis for B×L×D).
    pub fn reverse_axis1(&self) -> Result<Self> {
        self.expect_rank("reverse_axis1", 3)?;
        let (b, l, d) = (self.shape[0], self.shape[1], self.shape[2]);
        let mut out = vec![0.0; self.data.len()];
        for bi in 0..b {
            for t in 0..l {
                let src = (bi * l + t) * d;
                let dst = (bi * l + (l - 1 - t)) * d;
                out[dst..dst + d].copy_from_slice(&self.data[src..src + d]);
            }
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: out,
        })
    }

    /// Takes index `i` along axis 1, dropping that axis.
    pub fn select_axis1(&self, i: usize) -> Result<Self> {
        if self.rank() < 2 || i >= self.shape[1] {
            return Err(Error::shape(
                "select_axis1",
                format!("axis-1 index < {}", self.shape.get(1).copied().unwrap_or(0)),
                i,
            ));
        }
        let b = self.shape[0];
        let n = self.shape[1];
        let inner: usize = self.shape[2..].iter().product();
        let mut data = Vec::with_capacity(b * inner);
        for bi in 0..b {
            let start = (bi * n + i) * inner;
            data.extend_from_slice(&self.data[start..start + inner]);
        }
        let mut shape = vec![b];
        shape.extend_from_slice(&self.shape[2..]);
        Ok(Self { shape, data })
    }

    /// Stacks equally-shaped tensors along a new axis 1.
    pub fn stack_axis1(parts: &[Tensor]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Empty("stack_axis1".into()))?;
        let b = first.shape[0];
        let inner: usize = first.shape[1..].iter().product();
        let mut data = vec![0.0; b * parts.len() * inner];
        for (i, p) in parts.iter().enumerate() {
            p.expect_shape("stack_axis1", first.shape())?;
            for bi in 0..b {
                let dst = (bi * parts.len() + i) * inner;
                data[dst..dst + inner].copy_from_slice(&p.data[bi * inner..(bi + 1) * inner]);
            }
        }
        let mut shape = vec![b, parts.len()];
        shape.extend_from_slice(&first.shape[1..]);
        Ok(Self { shape, data })
    }

    /// Concatenates tensors along their last axis; leading axes must agree.
    pub fn concat_last(parts: &[Tensor]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Empty("concat_last".into()))?;
        let lead = &first.shape[..first.rank() - 1];
        let rows: usize = lead.iter().product();
        let widths: Vec<usize> = parts.iter().map(|p| *p.shape.last().unwrap()).collect();
        for p in parts {
            if &p.shape[..p.rank() - 1] != lead {
                return Err(Error::shape(
                    "concat_last",
                    format!("{:?}", first.shape),
                    format!("{:?}", p.shape),
                ));
            }
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&p.data[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead.to_vec();
        shape.push(total);
        Ok(Self { shape, data })
    }

    /// Inverse of [`Tensor::concat_last`].
    pub fn split_last(&self, widths: &[usize]) -> Result<Vec<Tensor>> {
        let total: usize = widths.iter().sum();
        if *self.shape.last().unwrap_or(&0) != total {
            return Err(Error::shape("split_last", total, format!("{:?}", self.shape)));
        }
        let lead = &self.shape[..self.rank() - 1];
        let rows: usize = lead.iter().product();
        let mut outs: Vec<Vec<f64>> = widths.iter().map(|w| Vec::with_capacity(rows * w)).collect();
        for r in 0..rows {
            let mut off = r * total;
            for (o, &w) in outs.iter_mut().zip(widths) {
                o.extend_from_slice(&self.data[off..off + w]);
                off += w;
            }
        }
        Ok(outs
            .into_iter()
            .zip(widths)
            .map(|(data, &w)| {
                let mut shape = lead.to_vec();
                shape.push(w);
                Tensor { shape, data }
            })
            .collect())
    }

    /// Gathers rows (indices into axis 0).
    pub fn gather_rows(&self, indices: &[usize]) -> Self {
        let inner: usize = self.shape[1..].iter().product();
        let mut data = Vec::with_capacity(indices.len() * inner);
        for &i in indices {
            data.extend_from_slice(&self.data[i * inner..(i + 1) * inner]);
        }
        let mut shape = self.shape.clone();
        shape[0] = indices.len();
        Self { shape, data }
    }

    /// Contiguous slice of rows `[start, end)` along axis 0.
    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        let inner: usize = self.shape[1..].iter().product();
        let mut shape = self.shape.clone();
        shape[0] = end - start;
        Self {
            shape,
            data: self.data[start * inner..end * inner].to_vec(),
        }
    }

    /// Concatenates along axis 0.
    pub fn concat_rows(parts: &[Tensor]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Empty("concat_rows".into()))?;
        let mut rows = 0;
        let mut data = Vec::new();
        for p in parts {
            if p.shape[1..] != first.shape[1..] {
                return Err(Error::shape(
                    "concat_rows",
                    format!("{:?}", first.shape),
                    format!("{:?}", p.shape),
                ));
            }
            rows += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        let mut shape = first.shape.clone();
        shape[0] = rows;
        Ok(Self { shape, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_product() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::from_vec(&[0, 3], vec![]).is_err());
    }

    #[test]
    fn transpose_and_reverse() {
        let t = Tensor::from_vec(&[1, 2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let tt = t.transpose_last2().unwrap();
        assert_eq!(tt.shape(), &[1, 3, 2]);
        assert_eq!(tt.data(), &[1., 4., 2., 5., 3., 6.]);
        assert_eq!(tt.transpose_last2().unwrap(), t);
        let r = t.reverse_axis1().unwrap();
        assert_eq!(r.data(), &[4., 5., 6., 1., 2., 3.]);
    }

    #[test]
    fn concat_split_round_trip() {
        let a = Tensor::from_vec(&[2, 1], vec![1., 2.]).unwrap();
        let b = Tensor::from_vec(&[2, 2], vec![3., 4., 5., 6.]).unwrap();
        let c = Tensor::concat_last(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(c.data(), &[1., 3., 4., 2., 5., 6.]);
        let parts = c.split_last(&[1, 2]).unwrap();
        assert_eq!(parts, vec![a, b]);
    }

    #[test]
    fn stack_and_select() {
        let a = Tensor::from_vec(&[2, 2], vec![1., 2., 3., 4.]).unwrap();
        let b = Tensor::from_vec(&[2, 2], vec![5., 6., 7., 8.]).unwrap();
        let s = Tensor::stack_axis1(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(s.shape(), &[2, 2, 2]);
        assert_eq!(s.select_axis1(0).unwrap(), a);
        assert_eq!(s.select_axis1(1).unwrap(), b);
    }
}
