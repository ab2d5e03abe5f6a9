//! Index arithmetic over lexicographic product bases.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub(crate) type C64 = Complex64;

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    strides
}

/// Splits flat indices into (local, rest) index pairs for a chosen set of
/// positions. `local` is lexicographic over `positions` in the given order,
/// `rest` over the remaining positions in layout order.
pub(crate) struct Split {
    pub local_dim: usize,
    pub rest_dim: usize,
    /// `flat[local * rest_dim + rest]`
    flat: Vec<usize>,
}

impl Split {
    pub fn new(dims: &[usize], positions: &[usize]) -> Self {
        let full_strides = strides(dims);
        let local_dims: Vec<usize> = positions.iter().map(|&p| dims[p]).collect();
        let rest_positions: Vec<usize> = (0..dims.len()).filter(|p| !positions.contains(p)).collect();
        let rest_dims: Vec<usize> = rest_positions.iter().map(|&p| dims[p]).collect();
        let local_dim: usize = local_dims.iter().product();
        let rest_dim: usize = rest_dims.iter().product();

        let offsets = |positions: &[usize], dims: &[usize], count: usize| -> Vec<usize> {
            let st = strides(dims);
            (0..count)
                .map(|i| {
                    positions
                        .iter()
                        .enumerate()
                        .map(|(k, &p)| ((i / st[k]) % dims[k]) * full_strides[p])
                        .sum()
                })
                .collect()
        };
        let local_offsets = offsets(positions, &local_dims, local_dim);
        let rest_offsets = offsets(&rest_positions, &rest_dims, rest_dim);

        let mut flat = Vec::with_capacity(local_dim * rest_dim);
        for l in &local_offsets {
            for r in &rest_offsets {
                flat.push(l + r);
            }
        }
        Self {
            local_dim,
            rest_dim,
            flat,
        }
    }

    #[inline]
    pub fn flat(&self, local: usize, rest: usize) -> usize {
        self.flat[local * self.rest_dim + rest]
    }

    /// View a vector as a `local_dim x rest_dim` matrix.
    pub fn to_matrix(&self, amps: &DVector<C64>) -> DMatrix<C64> {
        DMatrix::from_fn(self.local_dim, self.rest_dim, |l, r| amps[self.flat(l, r)])
    }

    pub fn from_matrix(&self, m: &DMatrix<C64>) -> DVector<C64> {
        let mut out = DVector::zeros(self.local_dim * self.rest_dim);
        for l in 0..self.local_dim {
            for r in 0..self.rest_dim {
                out[self.flat(l, r)] = m[(l, r)];
            }
        }
        out
    }
}

/// `(local ⊗ I) amps`, where `local` acts on `positions`.
pub(crate) fn apply_local(
    amps: &DVector<C64>,
    dims: &[usize],
    positions: &[usize],
    local: &DMatrix<C64>,
) -> DVector<C64> {
    let split = Split::new(dims, positions);
    debug_assert_eq!(local.ncols(), split.local_dim);
    split.from_matrix(&(local * split.to_matrix(amps)))
}

/// `(⟨bra| ⊗ I) amps`, leaving a vector over the remaining positions.
pub(crate) fn contract(
    amps: &DVector<C64>,
    dims: &[usize],
    positions: &[usize],
    bra: &DVector<C64>,
) -> DVector<C64> {
    let split = Split::new(dims, positions);
    debug_assert_eq!(bra.len(), split.local_dim);
    let m = split.to_matrix(amps);
    DVector::from_fn(split.rest_dim, |r, _| {
        (0..split.local_dim).map(|l| bra[l].conj() * m[(l, r)]).sum()
    })
}

/// Reorder tensor factors: output position k holds input position `order[k]`.
pub(crate) fn permute(amps: &DVector<C64>, dims: &[usize], order: &[usize]) -> DVector<C64> {
    let split = Split::new(dims, order);
    debug_assert_eq!(split.rest_dim, 1);
    DVector::from_fn(split.local_dim, |l, _| amps[split.flat(l, 0)])
}

/// Reduced density matrix over `keep` (in the given order).
pub(crate) fn reduce_matrix(matrix: &DMatrix<C64>, dims: &[usize], keep: &[usize]) -> DMatrix<C64> {
    let split = Split::new(dims, keep);
    DMatrix::from_fn(split.local_dim, split.local_dim, |i, j| {
        (0..split.rest_dim)
            .map(|r| matrix[(split.flat(i, r), split.flat(j, r))])
            .sum()
    })
}

/// Embed a matrix acting on `positions` into the full space.
pub(crate) fn embed(dims: &[usize], positions: &[usize], local: &DMatrix<C64>) -> DMatrix<C64> {
    let split = Split::new(dims, positions);
    let n = split.local_dim * split.rest_dim;
    let mut full = DMatrix::zeros(n, n);
    for r in 0..split.rest_dim {
        for i in 0..split.local_dim {
            for j in 0..split.local_dim {
                let v = local[(i, j)];
                if v != C64::new(0.0, 0.0) {
                    full[(split.flat(i, r), split.flat(j, r))] = v;
                }
            }
        }
    }
    full
}

pub(crate) fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max entrywise |M†M - I|.
pub(crate) fn unitarity_defect(m: &DMatrix<C64>) -> f64 {
    let gram = m.adjoint() * m;
    max_abs(&(gram - DMatrix::identity(m.ncols(), m.ncols())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn permute_swaps_factors() {
        // |0⟩_A ⊗ |1⟩_B with dims (2, 3): flat index 1
        let mut amps = DVector::zeros(6);
        amps[1] = c(1.0);
        let swapped = permute(&amps, &[2, 3], &[1, 0]);
        // now B ⊗ A, |1⟩_B ⊗ |0⟩_A: flat index 2
        assert_eq!(swapped[2], c(1.0));
        assert_eq!(swapped.iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn contract_picks_slice() {
        // amps over (2,2): a|00⟩ + b|11⟩
        let amps = DVector::from_vec(vec![c(0.6), c(0.0), c(0.0), c(0.8)]);
        let bra = DVector::from_vec(vec![c(0.0), c(1.0)]);
        let rest = contract(&amps, &[2, 2], &[1], &bra);
        assert_eq!(rest, DVector::from_vec(vec![c(0.0), c(0.8)]));
    }

    #[test]
    fn embed_matches_apply_local() {
        let x = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let amps = DVector::from_fn(12, |i, _| c(i as f64));
        let dims = [2, 3, 2];
        let direct = apply_local(&amps, &dims, &[2], &x);
        let via_full = embed(&dims, &[2], &x) * &amps;
        assert_eq!(direct, via_full);
    }
}
