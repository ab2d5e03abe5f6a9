use nalgebra::DMatrix;

use super::kernel::{self, C64};
use super::layout::SubsystemLayout;
use super::state::StateVector;
use crate::error::{Error, Result};
use crate::AMPLITUDE_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    General,
    Isometry,
    Unitary,
}

/// Dense matrix between two labeled spaces, `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator {
    layout_in: SubsystemLayout,
    layout_out: SubsystemLayout,
    matrix: DMatrix<C64>,
    kind: OperatorKind,
}

impl LinearOperator {
    pub fn new(layout_in: SubsystemLayout, layout_out: SubsystemLayout, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != layout_out.dim() || matrix.ncols() != layout_in.dim() {
            return Err(Error::ShapeMismatch {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                expected_rows: layout_out.dim(),
                expected_cols: layout_in.dim(),
            });
        }
        Ok(Self {
            layout_in,
            layout_out,
            matrix,
            kind: OperatorKind::General,
        })
    }

    /// Square operator that must pass the U†U = I gate.
    pub fn unitary(layout: SubsystemLayout, matrix: DMatrix<C64>) -> Result<Self> {
        let mut op = Self::new(layout.clone(), layout, matrix)?;
        let defect = kernel::unitarity_defect(&op.matrix);
        if defect > AMPLITUDE_TOL {
            return Err(Error::NotUnitary { defect });
        }
        op.kind = OperatorKind::Unitary;
        Ok(op)
    }

    /// Operator that must satisfy V†V = I on its input space.
    pub fn isometry(layout_in: SubsystemLayout, layout_out: SubsystemLayout, matrix: DMatrix<C64>) -> Result<Self> {
        let mut op = Self::new(layout_in, layout_out, matrix)?;
        let defect = kernel::unitarity_defect(&op.matrix);
        if defect > AMPLITUDE_TOL {
            return Err(Error::NotUnitary { defect });
        }
        op.kind = OperatorKind::Isometry;
        Ok(op)
    }

    pub fn identity(layout: SubsystemLayout) -> Self {
        let n = layout.dim();
        Self {
            layout_in: layout.clone(),
            layout_out: layout,
            matrix: DMatrix::identity(n, n),
            kind: OperatorKind::Unitary,
        }
    }

    /// Lift a unitary acting on the named subsystems (in the given order) to
    /// the whole layout, identity elsewhere.
    pub fn embed_unitary(layout: SubsystemLayout, targets: &[&str], local: &DMatrix<C64>) -> Result<Self> {
        let positions = layout.positions(targets)?;
        let local_dim: usize = positions.iter().map(|&p| layout.dims()[p]).product();
        if local.nrows() != local_dim || local.ncols() != local_dim {
            return Err(Error::ShapeMismatch {
                rows: local.nrows(),
                cols: local.ncols(),
                expected_rows: local_dim,
                expected_cols: local_dim,
            });
        }
        let full = kernel::embed(&layout.dims(), &positions, local);
        Self::unitary(layout, full)
    }

    pub fn layout_in(&self) -> &SubsystemLayout {
        &self.layout_in
    }

    pub fn layout_out(&self) -> &SubsystemLayout {
        &self.layout_out
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    /// Max entrywise |M†M - I|.
    pub fn unitarity_defect(&self) -> f64 {
        kernel::unitarity_defect(&self.matrix)
    }

    /// Matrix-vector product. The result must stay on the unit sphere.
    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        if state.layout() != &self.layout_in {
            return Err(Error::mismatch(&self.layout_in, state.layout()));
        }
        let out = &self.matrix * state.amplitudes();
        StateVector::from_unit(self.layout_out.clone(), out)
    }
}
