use nalgebra::DMatrix;

/// Ambient-vector-valued tensor with `rank` chart indices, each ranging over `0..n`.
/// Storage is row-major in the chart indices, `dim` floats per slot.
#[derive(Clone, Debug, PartialEq)]
pub struct VTensor {
    pub n: usize,
    pub rank: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl VTensor {
    pub fn zeros(n: usize, rank: usize, dim: usize) -> Self {
        VTensor {
            n,
            rank,
            dim,
            data: vec![0.0; n.pow(rank as u32) * dim],
        }
    }

    pub fn slots(&self) -> usize {
        self.n.pow(self.rank as u32)
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        let mut o = 0;
        for &i in idx {
            o = o * self.n + i;
        }
        o * self.dim
    }

    pub fn get(&self, idx: &[usize]) -> &[f64] {
        let o = self.offset(idx);
        &self.data[o..o + self.dim]
    }

    pub fn get_mut(&mut self, idx: &[usize]) -> &mut [f64] {
        let o = self.offset(idx);
        &mut self.data[o..o + self.dim]
    }

    pub fn slot(&self, flat: usize) -> &[f64] {
        &self.data[flat * self.dim..(flat + 1) * self.dim]
    }

    /// Fill every permutation of each sorted index tuple from `f(sorted)`.
    pub fn fill_symmetric(&mut self, mut f: impl FnMut(&[usize]) -> Vec<f64>) {
        let rank = self.rank;
        let n = self.n;
        let mut cache: std::collections::HashMap<Vec<usize>, Vec<f64>> = Default::default();
        for flat in 0..self.slots() {
            let mut idx = vec![0; rank];
            let mut r = flat;
            for k in (0..rank).rev() {
                idx[k] = r % n;
                r /= n;
            }
            let mut key = idx.clone();
            key.sort_unstable();
            let v = cache.entry(key.clone()).or_insert_with(|| f(&key)).clone();
            self.data[flat * self.dim..(flat + 1) * self.dim].copy_from_slice(&v);
        }
    }
}

/// Contract one index slot with `ginv`.
fn raise_slot(t: &VTensor, slot: usize, ginv: &DMatrix<f64>) -> VTensor {
    let n = t.n;
    let stride = n.pow((t.rank - 1 - slot) as u32);
    let mut out = VTensor::zeros(n, t.rank, t.dim);
    for flat in 0..t.slots() {
        let s = (flat / stride) % n;
        let base = flat - s * stride;
        let dst = &mut out.data[flat * t.dim..(flat + 1) * t.dim];
        for a in 0..n {
            let c = ginv[(s, a)];
            if c == 0.0 {
                continue;
            }
            let src = &t.data[(base + a * stride) * t.dim..(base + a * stride + 1) * t.dim];
            for (d, x) in dst.iter_mut().zip(src) {
                *d += c * x;
            }
        }
    }
    out
}

/// Full norm squared with all chart indices contracted by `ginv`.
pub fn full_norm2(t: &VTensor, ginv: &DMatrix<f64>) -> f64 {
    let mut raised = t.clone();
    for slot in 0..t.rank {
        raised = raise_slot(&raised, slot, ginv);
    }
    t.data.iter().zip(&raised.data).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_with_identity_is_euclidean() {
        let mut t = VTensor::zeros(2, 2, 3);
        for (k, x) in t.data.iter_mut().enumerate() {
            *x = k as f64;
        }
        let e: f64 = t.data.iter().map(|x| x * x).sum();
        assert!((full_norm2(&t, &DMatrix::identity(2, 2)) - e).abs() < 1e-12);
    }

    #[test]
    fn norm_scales_with_metric() {
        let mut t = VTensor::zeros(3, 3, 1);
        t.data.iter_mut().for_each(|x| *x = 1.0);
        let ginv = DMatrix::identity(3, 3) * 0.5;
        // each of three indices contributes a factor 1/2
        assert!((full_norm2(&t, &ginv) - 27.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn fill_symmetric_copies_permutations() {
        let mut t = VTensor::zeros(3, 3, 1);
        t.fill_symmetric(|k| vec![(k[0] * 100 + k[1] * 10 + k[2]) as f64]);
        assert_eq!(t.get(&[2, 0, 1]), &[12.0]);
        assert_eq!(t.get(&[1, 2, 0]), &[12.0]);
    }
}
