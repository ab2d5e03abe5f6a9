use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::kernel::{self, C64};
use super::layout::SubsystemLayout;
use super::state::StateVector;
use crate::error::{Error, Result};
use crate::AMPLITUDE_TOL;

/// Hermitian, unit-trace, positive semidefinite matrix over a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    layout: SubsystemLayout,
    matrix: DMatrix<C64>,
}

impl DensityOperator {
    /// Validates Hermiticity, unit trace and PSD within 1e-9.
    pub fn new(layout: SubsystemLayout, matrix: DMatrix<C64>) -> Result<Self> {
        let n = layout.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::ShapeMismatch {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                expected_rows: n,
                expected_cols: n,
            });
        }
        let rho = Self { layout, matrix };
        let trace = rho.trace();
        if rho.hermiticity_defect() > AMPLITUDE_TOL
            || (trace.re - 1.0).abs() > AMPLITUDE_TOL
            || trace.im.abs() > AMPLITUDE_TOL
            || rho.eigenvalues().first().copied().unwrap_or(0.0) < -AMPLITUDE_TOL
        {
            return Err(Error::NormViolation { norm: trace.re });
        }
        Ok(rho)
    }

    /// Pure-state projector |s⟩⟨s|.
    pub fn pure(state: &StateVector) -> Self {
        let a = state.amplitudes();
        Self {
            layout: state.layout().clone(),
            matrix: a * a.adjoint(),
        }
    }

    /// Convex combination of densities over one layout.
    pub fn mixture(weighted: &[(f64, &DensityOperator)]) -> Result<Self> {
        let (_, first) = weighted.first().ok_or(Error::DegenerateState)?;
        let n = first.layout.dim();
        let mut matrix = DMatrix::zeros(n, n);
        for (w, rho) in weighted {
            if rho.layout != first.layout {
                return Err(Error::mismatch(&first.layout, &rho.layout));
            }
            matrix += &rho.matrix * C64::new(*w, 0.0);
        }
        Self::new(first.layout.clone(), matrix)
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        kernel::max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.hermitian_part()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Eigenpairs with eigenvalue above `floor`, largest first.
    pub fn spectrum(&self, floor: f64) -> Vec<(f64, DVector<C64>)> {
        let eig = SymmetricEigen::new(self.hermitian_part());
        let mut pairs: Vec<(f64, DVector<C64>)> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > floor)
            .map(|(k, &v)| (v, eig.eigenvectors.column(k).into_owned()))
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        pairs
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    fn hermitian_part(&self) -> DMatrix<C64> {
        (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0)
    }

    pub fn entry<S: AsRef<str>>(&self, row: &[S], col: &[S]) -> Result<C64> {
        Ok(self.matrix[(self.layout.index_of(row)?, self.layout.index_of(col)?)])
    }

    /// ⟨v|ρ|v⟩ for a unit vector over the same layout.
    pub fn expectation(&self, v: &StateVector) -> Result<f64> {
        if v.layout() != &self.layout {
            return Err(Error::mismatch(&self.layout, v.layout()));
        }
        let a = v.amplitudes();
        Ok(a.dotc(&(&self.matrix * a)).re)
    }

    /// Trace out everything not in `keep`; the result lists `keep` in
    /// original layout order.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityOperator> {
        if keep.is_empty() {
            return Err(Error::EmptyKeep);
        }
        let layout = self.layout.restrict(keep)?;
        let positions = self.layout.positions(&layout.names())?;
        let matrix = kernel::reduce_matrix(&self.matrix, &self.layout.dims(), &positions);
        Ok(Self { layout, matrix })
    }

    /// Trace out the named subsystems.
    pub fn trace_out(&self, traced: &[&str]) -> Result<DensityOperator> {
        let keep = self.layout.complement(traced)?;
        self.partial_trace(&keep.names())
    }

    /// Conjugate by a unitary over the same layout.
    pub fn evolve(&self, op: &super::operator::LinearOperator) -> Result<DensityOperator> {
        if op.layout_in() != &self.layout || op.layout_out() != &self.layout {
            return Err(Error::mismatch(&self.layout, op.layout_in()));
        }
        let u = op.matrix();
        Ok(Self {
            layout: self.layout.clone(),
            matrix: u * &self.matrix * u.adjoint(),
        })
    }

    /// Projected, unnormalized block `P ρ P` with `P = |v⟩⟨v| ⊗ I` on the
    /// subsystems of `v`. The trace of the block is the outcome weight.
    pub(crate) fn project(&self, v: &StateVector) -> Result<DMatrix<C64>> {
        let names = v.layout().names();
        let positions = self.layout.positions(&names)?;
        for (p, s) in positions.iter().zip(v.layout().subsystems()) {
            if &self.layout.subsystems()[*p] != s {
                return Err(Error::mismatch(&self.layout, v.layout()));
            }
        }
        let a = v.amplitudes();
        let projector = a * a.adjoint();
        let full = kernel::embed(&self.layout.dims(), &positions, &projector);
        Ok(&full * &self.matrix * &full)
    }

    pub(crate) fn from_block(layout: SubsystemLayout, block: DMatrix<C64>) -> Result<Self> {
        let weight = block.trace().re;
        if weight < crate::PROBABILITY_FLOOR {
            return Err(Error::ImpossibleOutcome { probability: weight.max(0.0) });
        }
        Self::new(layout, block / C64::new(weight, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn qubits(names: &[&str]) -> SubsystemLayout {
        SubsystemLayout::new(names.iter().map(|n| (*n, vec!["0", "1"]))).unwrap()
    }

    #[test]
    fn basis_projector() {
        let layout = SubsystemLayout::single("R", vec!["head", "tail"]).unwrap();
        let rho = DensityOperator::pure(&StateVector::basis(layout, &["head"]).unwrap());
        assert_eq!(rho.matrix()[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(rho.matrix()[(1, 1)], C64::new(0.0, 0.0));
    }

    #[test]
    fn pure_state_is_idempotent_rank_one() {
        let third = (1.0f64 / 3.0).sqrt();
        let layout = SubsystemLayout::new([("R", vec!["head", "tail"]), ("S", vec!["up", "down"])]).unwrap();
        let s = StateVector::make_real(
            layout,
            &[(&["head", "down"], third), (&["tail", "up"], third), (&["tail", "down"], third)],
        )
        .unwrap();
        let rho = DensityOperator::pure(&s);
        assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-12);
        let ev = rho.eigenvalues();
        assert_abs_diff_eq!(*ev.last().unwrap(), 1.0, epsilon = 1e-9);
        assert!(ev[..3].iter().all(|v| v.abs() < 1e-9));
        let sq = rho.matrix() * rho.matrix();
        assert!(kernel::max_abs(&(sq - rho.matrix())) < 1e-9);
    }

    #[test]
    fn product_trace_leaves_pure_factor() {
        let layout = qubits(&["a", "b"]);
        let s = StateVector::make_real(layout, &[(&["1", "0"], 0.6), (&["1", "1"], 0.8)]).unwrap();
        let rho_a = DensityOperator::pure(&s).partial_trace(&["a"]).unwrap();
        assert_eq!(rho_a.layout().names(), vec!["a"]);
        assert_abs_diff_eq!(rho_a.matrix()[(1, 1)].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rho_a.purity(), 1.0, epsilon = 1e-12);
    }

    // Hand computation: Tr_b of (|00⟩+|11⟩)(⟨00|+⟨11|)/2 keeps only the
    // diagonal blocks, giving diag(1/2, 1/2).
    #[test]
    fn bell_pair_reduces_to_maximally_mixed() {
        let h = 0.5f64.sqrt();
        let s = StateVector::make_real(qubits(&["a", "b"]), &[(&["0", "0"], h), (&["1", "1"], h)]).unwrap();
        let rho_a = DensityOperator::pure(&s).partial_trace(&["a"]).unwrap();
        let expected = DMatrix::from_diagonal_element(2, 2, C64::new(0.5, 0.0));
        assert!(kernel::max_abs(&(rho_a.matrix() - expected)) < 1e-12);
    }

    #[test]
    fn keep_is_returned_in_layout_order() {
        let s = StateVector::basis(qubits(&["a", "b", "c"]), &["0", "1", "0"]).unwrap();
        let rho = DensityOperator::pure(&s).partial_trace(&["c", "a"]).unwrap();
        assert_eq!(rho.layout().names(), vec!["a", "c"]);
    }

    #[test]
    fn partial_trace_errors() {
        let rho = DensityOperator::pure(&StateVector::basis(qubits(&["a", "b"]), &["0", "0"]).unwrap());
        assert_eq!(rho.partial_trace(&[]).unwrap_err(), Error::EmptyKeep);
        assert!(matches!(rho.partial_trace(&["z"]), Err(Error::UnknownSubsystem(_))));
    }

    #[test]
    fn rejects_non_density() {
        let layout = qubits(&["a"]);
        let m = DMatrix::from_diagonal_element(2, 2, C64::new(1.0, 0.0));
        assert!(DensityOperator::new(layout, m).is_err());
    }
}
