use nalgebra::SVD;

use super::{Decomposition, DecompositionTerm};
use crate::error::{Error, Result};
use crate::hilbert::kernel::Split;
use crate::hilbert::{StateVector, C64};
use crate::{AMPLITUDE_TOL, PROBABILITY_FLOOR};

#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtTerm {
    pub coefficient: f64,
    pub left: StateVector,
    pub right: StateVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtDecomposition {
    /// Descending coefficients; zero terms dropped.
    pub terms: Vec<SchmidtTerm>,
    /// Two or more coefficients coincide, so the factor bases are not unique.
    pub degenerate: bool,
}

impl SchmidtDecomposition {
    pub fn coefficients(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.coefficient).collect()
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    pub fn to_decomposition(&self) -> Result<Decomposition> {
        let Some(first) = self.terms.first() else {
            return Err(Error::DegenerateState);
        };
        let parts = [first.left.layout(), first.right.layout()]
            .iter()
            .map(|l| l.names().into_iter().map(String::from).collect())
            .collect();
        Decomposition::new(
            parts,
            self.terms
                .iter()
                .map(|t| DecompositionTerm {
                    coefficient: C64::new(t.coefficient, 0.0),
                    labels: Vec::new(),
                    factors: vec![t.left.clone(), t.right.clone()],
                })
                .collect(),
        )
    }
}

pub fn schmidt(state: &StateVector, left: &[&str], right: &[&str]) -> Result<SchmidtDecomposition> {
    let layout = state.layout();
    if left.is_empty() || right.is_empty() {
        return Err(Error::InvalidPartition("both sides of a bipartition need subsystems".into()));
    }
    if left.len() + right.len() != layout.len() {
        return Err(Error::InvalidPartition(format!(
            "[{}] | [{}] does not cover {}",
            left.join(","),
            right.join(","),
            layout
        )));
    }
    let order: Vec<&str> = left.iter().chain(right).copied().collect();
    let ordered = state.reordered(&order)?;
    let left_layout = layout.select(left)?;
    let right_layout = layout.select(right)?;

    let positions: Vec<usize> = (0..left.len()).collect();
    let split = Split::new(&ordered.layout().dims(), &positions);
    let m = split.to_matrix(ordered.amplitudes());
    let svd = SVD::new(m, true, true);
    let u = svd.u.expect("requested");
    let v_t = svd.v_t.expect("requested");

    let mut terms = Vec::new();
    for (k, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma * sigma < PROBABILITY_FLOOR {
            continue;
        }
        terms.push(SchmidtTerm {
            coefficient: sigma,
            left: StateVector::from_amplitudes(left_layout.clone(), u.column(k).into_owned())?,
            right: StateVector::from_amplitudes(right_layout.clone(), v_t.row(k).transpose())?,
        });
    }
    let degenerate = terms
        .windows(2)
        .any(|w| (w[0].coefficient - w[1].coefficient).abs() < AMPLITUDE_TOL);
    Ok(SchmidtDecomposition { terms, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{sqrt_frac, SubsystemLayout};
    use approx::assert_abs_diff_eq;

    fn qubits(names: &[&str]) -> SubsystemLayout {
        SubsystemLayout::new(names.iter().map(|n| (*n, vec!["0", "1"]))).unwrap()
    }

    #[test]
    fn pointer_correlation() {
        let layout = SubsystemLayout::new([("R", vec!["head", "tail"]), ("A", vec!["A0", "A1", "A2"])]).unwrap();
        let psi = StateVector::make(
            layout.clone(),
            &[(vec!["head", "A1"], sqrt_frac(1.0, 3.0)), (vec!["tail", "A2"], sqrt_frac(2.0, 3.0))],
        )
        .unwrap();
        let s = schmidt(&psi, &["R"], &["A"]).unwrap();
        assert!(!s.degenerate);
        assert_abs_diff_eq!(s.terms[0].coefficient, (2.0f64 / 3.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.terms[1].coefficient, (1.0f64 / 3.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.terms[0].left.amplitude(&["tail"]).unwrap().norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.terms[0].right.amplitude(&["A2"]).unwrap().norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.terms[1].left.amplitude(&["head"]).unwrap().norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.terms[1].right.amplitude(&["A1"]).unwrap().norm(), 1.0, epsilon = 1e-12);
        assert!(s.to_decomposition().unwrap().residual(&psi).unwrap() < 1e-12);
    }

    #[test]
    fn bell_pair_is_degenerate() {
        let h = 0.5f64.sqrt();
        let bell = StateVector::make_real(qubits(&["a", "b"]), &[(&["0", "0"], h), (&["1", "1"], h)]).unwrap();
        let s = schmidt(&bell, &["a"], &["b"]).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.rank(), 2);
        for c in s.coefficients() {
            assert_abs_diff_eq!(c, h, epsilon = 1e-12);
        }
    }

    #[test]
    fn product_state_has_rank_one() {
        let s = StateVector::basis(qubits(&["a", "b", "c"]), &["1", "0", "1"]).unwrap();
        let d = schmidt(&s, &["c"], &["a", "b"]).unwrap();
        assert_eq!(d.coefficients().len(), 1);
        assert_abs_diff_eq!(d.coefficients()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn partition_must_cover_layout() {
        let s = StateVector::basis(qubits(&["a", "b", "c"]), &["1", "0", "1"]).unwrap();
        assert!(matches!(schmidt(&s, &["a"], &["b"]), Err(Error::InvalidPartition(_))));
        assert!(matches!(schmidt(&s, &["a"], &["b", "z"]), Err(Error::UnknownSubsystem(_))));
        assert!(schmidt(&s, &["a", "b"], &["b"]).is_err());
    }
}
