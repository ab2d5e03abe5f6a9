use std::collections::BTreeMap;

use nalgebra::DVector;

use super::kernel::{self, C64};
use super::layout::SubsystemLayout;
use crate::error::{Error, Result};
use crate::{AMPLITUDE_TOL, NORM_DRIFT_TOL};

/// Unit vector over a labeled product basis.
///
/// Every public constructor normalizes; `input_norm` records the norm of
/// what the caller supplied so code reproducing exact coefficients can insist
/// that no rescaling happened.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: SubsystemLayout,
    amplitudes: DVector<C64>,
    input_norm: f64,
}

impl StateVector {
    /// Sum the given (label tuple, amplitude) terms and normalize.
    pub fn make<S: AsRef<str>>(layout: SubsystemLayout, terms: &[(Vec<S>, C64)]) -> Result<Self> {
        let mut amplitudes = DVector::zeros(layout.dim());
        for (labels, amplitude) in terms {
            amplitudes[layout.index_of(labels)?] += amplitude;
        }
        Self::from_amplitudes(layout, amplitudes)
    }

    /// Convenience for real amplitudes.
    pub fn make_real(layout: SubsystemLayout, terms: &[(&[&str], f64)]) -> Result<Self> {
        let terms: Vec<(Vec<&str>, C64)> = terms
            .iter()
            .map(|(labels, a)| (labels.to_vec(), C64::new(*a, 0.0)))
            .collect();
        Self::make(layout, &terms)
    }

    pub fn from_amplitudes(layout: SubsystemLayout, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return Err(Error::ShapeMismatch {
                rows: amplitudes.len(),
                cols: 1,
                expected_rows: layout.dim(),
                expected_cols: 1,
            });
        }
        let norm = amplitudes.norm();
        if !(norm > f64::MIN_POSITIVE) || !norm.is_finite() {
            return Err(Error::DegenerateState);
        }
        let amplitudes = if (norm - 1.0).abs() > NORM_DRIFT_TOL {
            amplitudes / C64::new(norm, 0.0)
        } else {
            amplitudes
        };
        Ok(Self {
            layout,
            amplitudes,
            input_norm: norm,
        })
    }

    /// Internal constructor for results already known to be unit norm.
    /// Checked against the normalization invariant.
    pub(crate) fn from_unit(layout: SubsystemLayout, amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > AMPLITUDE_TOL {
            return Err(Error::NormViolation { norm });
        }
        Ok(Self {
            layout,
            amplitudes,
            input_norm: norm,
        })
    }

    pub fn basis<S: AsRef<str>>(layout: SubsystemLayout, labels: &[S]) -> Result<Self> {
        let mut amplitudes = DVector::zeros(layout.dim());
        amplitudes[layout.index_of(labels)?] = C64::new(1.0, 0.0);
        Self::from_unit(layout, amplitudes)
    }

    /// Normalized linear combination of states over one layout.
    pub fn superpose(terms: &[(C64, &StateVector)]) -> Result<Self> {
        let (_, first) = terms.first().ok_or(Error::DegenerateState)?;
        let mut amplitudes = DVector::zeros(first.layout.dim());
        for (c, s) in terms {
            first.check_same_layout(s)?;
            amplitudes += &s.amplitudes * *c;
        }
        Self::from_amplitudes(first.layout.clone(), amplitudes)
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn input_norm(&self) -> f64 {
        self.input_norm
    }

    /// Whether construction had to rescale the supplied amplitudes.
    pub fn was_rescaled(&self) -> bool {
        (self.input_norm - 1.0).abs() > NORM_DRIFT_TOL
    }

    pub fn amplitude<S: AsRef<str>>(&self, labels: &[S]) -> Result<C64> {
        Ok(self.amplitudes[self.layout.index_of(labels)?])
    }

    /// Nonzero amplitudes with their label tuples, in flat-index order.
    pub fn support(&self) -> Vec<(Vec<&str>, C64)> {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() >= crate::PROBABILITY_FLOOR)
            .map(|(i, a)| (self.layout.labels_at(i), *a))
            .collect()
    }

    pub(crate) fn check_same_layout(&self, other: &StateVector) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::mismatch(&self.layout, &other.layout));
        }
        Ok(())
    }

    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let layout = self.layout.concat(&other.layout)?;
        let amplitudes = self.amplitudes.kronecker(&other.amplitudes);
        Self::from_unit(layout, amplitudes)
    }

    /// ⟨self|other⟩, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.check_same_layout(other)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Same state with subsystems in the given order.
    pub fn reordered(&self, order: &[&str]) -> Result<StateVector> {
        if order.len() != self.layout.len() {
            return Err(Error::InvalidPartition(format!(
                "reorder lists {} of {} subsystems",
                order.len(),
                self.layout.len()
            )));
        }
        let positions = self.layout.positions(order)?;
        let layout = self.layout.select(order)?;
        let amplitudes = kernel::permute(&self.amplitudes, &self.layout.dims(), &positions);
        Ok(Self {
            layout,
            amplitudes,
            input_norm: self.input_norm,
        })
    }

    /// Move `names` next to each other, at the position of the first one.
    pub fn gathered(&self, names: &[&str]) -> Result<StateVector> {
        let positions = self.layout.positions(names)?;
        let anchor = *positions.iter().min().expect("non-empty");
        let mut order: Vec<&str> = Vec::with_capacity(self.layout.len());
        for (k, name) in self.layout.names().into_iter().enumerate() {
            if k == anchor {
                order.extend_from_slice(names);
            }
            if !names.contains(&name) {
                order.push(name);
            }
        }
        self.reordered(&order)
    }

    /// Re-express over a layout with `parts` grouped into `new_name`.
    /// Amplitudes are untouched: grouping only re-associates indices.
    pub fn group(
        &self,
        parts: &[&str],
        new_name: &str,
        label_map: &BTreeMap<Vec<String>, String>,
    ) -> Result<StateVector> {
        Ok(Self {
            layout: self.layout.group(parts, new_name, label_map)?,
            amplitudes: self.amplitudes.clone(),
            input_norm: self.input_norm,
        })
    }

    pub fn ungroup(&self, name: &str) -> Result<StateVector> {
        Ok(Self {
            layout: self.layout.ungroup(name)?,
            amplitudes: self.amplitudes.clone(),
            input_norm: self.input_norm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rs() -> SubsystemLayout {
        SubsystemLayout::new([("R", vec!["head", "tail"]), ("S", vec!["up", "down"])]).unwrap()
    }

    fn init() -> StateVector {
        let third = (1.0f64 / 3.0).sqrt();
        StateVector::make_real(
            rs(),
            &[(&["head", "down"], third), (&["tail", "up"], third), (&["tail", "down"], third)],
        )
        .unwrap()
    }

    #[test]
    fn make_state_expanded_right_term() {
        let s = init();
        assert!(!s.was_rescaled());
        assert_abs_diff_eq!(s.amplitude(&["head", "up"]).unwrap().norm(), 0.0);
        assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn make_state_sums_repeats_and_rescales() {
        let s = StateVector::make_real(rs(), &[(&["head", "up"], 1.0), (&["head", "up"], 1.0)]).unwrap();
        assert!(s.was_rescaled());
        assert_abs_diff_eq!(s.input_norm(), 2.0);
        assert_abs_diff_eq!(s.amplitude(&["head", "up"]).unwrap().re, 1.0);
    }

    #[test]
    fn single_basis_term() {
        let layout = SubsystemLayout::single("R", vec!["head", "tail"]).unwrap();
        let s = StateVector::make_real(layout, &[(&["head"], 1.0)]).unwrap();
        assert_eq!(s.norm(), 1.0);
        assert!(!s.was_rescaled());
    }

    #[test]
    fn cancelling_terms_are_degenerate() {
        let layout = SubsystemLayout::single("R", vec!["head", "tail"]).unwrap();
        let err = StateVector::make_real(layout, &[(&["head"], 1.0), (&["head"], -1.0)]).unwrap_err();
        assert_eq!(err, Error::DegenerateState);
    }

    #[test]
    fn unknown_label_is_reported() {
        let err = StateVector::make_real(rs(), &[(&["head", "left"], 1.0)]).unwrap_err();
        assert_eq!(
            err,
            Error::UnknownLabel {
                subsystem: "S".into(),
                label: "left".into()
            }
        );
    }

    #[test]
    fn tensor_places_product_amplitude() {
        let r = StateVector::basis(SubsystemLayout::single("R", vec!["head", "tail"]).unwrap(), &["head"]).unwrap();
        let s = StateVector::basis(SubsystemLayout::single("S", vec!["up", "down"]).unwrap(), &["down"]).unwrap();
        let rs = r.tensor(&s).unwrap();
        assert_eq!(rs.amplitude(&["head", "down"]).unwrap(), C64::new(1.0, 0.0));
        assert!(matches!(r.tensor(&r), Err(Error::LayoutConflict(_))));
    }

    #[test]
    fn inner_products_against_init() {
        let s = init();
        assert_abs_diff_eq!(s.inner(&s).unwrap().re, 1.0, epsilon = 1e-12);
        let head_up = StateVector::basis(rs(), &["head", "up"]).unwrap();
        assert_abs_diff_eq!(head_up.inner(&s).unwrap().norm(), 0.0);
        let tail_up = StateVector::basis(rs(), &["tail", "up"]).unwrap();
        assert_abs_diff_eq!(tail_up.inner(&s).unwrap().re, (1.0f64 / 3.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn inner_is_conjugate_linear_in_bra() {
        let layout = SubsystemLayout::single("Q", vec!["0", "1"]).unwrap();
        let a = StateVector::make(layout.clone(), &[(vec!["0"], C64::new(0.0, 1.0))]).unwrap();
        let b = StateVector::basis(layout, &["0"]).unwrap();
        assert_eq!(a.inner(&b).unwrap(), C64::new(0.0, -1.0));
    }

    #[test]
    fn reorder_round_trip() {
        let s = init();
        let swapped = s.reordered(&["S", "R"]).unwrap();
        assert_eq!(swapped.amplitude(&["down", "head"]).unwrap(), s.amplitude(&["head", "down"]).unwrap());
        assert_eq!(swapped.reordered(&["R", "S"]).unwrap(), s);
    }

    #[test]
    fn group_then_ungroup_is_bit_identical() {
        let s = init();
        let mut m = BTreeMap::new();
        m.insert(vec!["head".to_string(), "down".to_string()], "hd".to_string());
        let g = s.group(&["R", "S"], "RS", &m).unwrap();
        assert_eq!(g.amplitude(&["hd"]).unwrap(), s.amplitude(&["head", "down"]).unwrap());
        assert_eq!(g.ungroup("RS").unwrap(), s);
    }
}
