//! Dense 4-axis f32 tensor (batch, channel, height, width).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Tensor {
        Tensor { n, c, h, w, data: vec![0f32; n * c * h * w] }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<f32>) -> Result<Tensor> {
        if data.len() != n * c * h * w {
            return Err(Error::ShapeMismatch(format!(
                "data length {} != {}x{}x{}x{}",
                data.len(),
                n,
                c,
                h,
                w
            )));
        }
        Ok(Tensor { n, c, h, w, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn plane_len(&self) -> usize {
        self.h * self.w
    }

    /// Slice of one (sample, channel) plane.
    #[inline]
    pub fn plane(&self, ni: usize, ci: usize) -> &[f32] {
        let p = self.plane_len();
        let off = (ni * self.c + ci) * p;
        &self.data[off..off + p]
    }

    #[inline]
    pub fn plane_mut(&mut self, ni: usize, ci: usize) -> &mut [f32] {
        let p = self.plane_len();
        let off = (ni * self.c + ci) * p;
        &mut self.data[off..off + p]
    }

    /// All-finite check, asserted after every forward/backward in debug
    /// builds.
    pub fn debug_assert_finite(&self, what: &str) {
        debug_assert!(
            self.data.iter().all(|v| v.is_finite()),
            "non-finite value after {what}"
        );
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.shape() == other.shape()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checked_construction() {
        assert!(Tensor::from_vec(1, 2, 2, 2, vec![0.0; 8]).is_ok());
        assert!(Tensor::from_vec(1, 2, 2, 2, vec![0.0; 7]).is_err());
    }

    #[test]
    fn plane_indexing() {
        let t = Tensor::from_vec(2, 3, 2, 2, (0..24).map(|v| v as f32).collect()).unwrap();
        assert_eq!(t.plane(0, 0), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(t.plane(1, 2), &[20.0, 21.0, 22.0, 23.0]);
    }
}
