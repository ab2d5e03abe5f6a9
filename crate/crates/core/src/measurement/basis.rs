use std::collections::HashSet;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::hilbert::{StateVector, SubsystemLayout, C64};
use crate::AMPLITUDE_TOL;

/// Orthonormal family of labeled vectors over some subsystems. Need not be
/// complete.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    layout: SubsystemLayout,
    labels: Vec<String>,
    vectors: Vec<StateVector>,
}

impl Basis {
    pub fn new<L: Into<String>>(entries: Vec<(L, StateVector)>) -> Result<Self> {
        let (labels, vectors): (Vec<String>, Vec<StateVector>) =
            entries.into_iter().map(|(l, v)| (l.into(), v)).unzip();
        let first = vectors.first().ok_or(Error::EmptyBasis)?;
        let layout = first.layout().clone();
        for v in &vectors {
            if v.layout() != &layout {
                return Err(Error::mismatch(&layout, v.layout()));
            }
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::DuplicateOutcome(l.clone()));
            }
        }
        check_orthonormal(&vectors)?;
        Ok(Self { layout, labels, vectors })
    }

    /// Every product basis state of `layout`, labeled `a,b,...`.
    pub fn computational(layout: &SubsystemLayout) -> Self {
        let (labels, vectors) = (0..layout.dim())
            .map(|i| {
                let tuple = layout.labels_at(i);
                let state = StateVector::basis(layout.clone(), &tuple).expect("index in range");
                (tuple.join(","), state)
            })
            .unzip();
        Self {
            layout: layout.clone(),
            labels,
            vectors,
        }
    }

    /// The named computational states of one subsystem.
    pub fn from_labels(layout: &SubsystemLayout, labels: &[&str]) -> Result<Self> {
        let entries = labels
            .iter()
            .map(|l| Ok((l.to_string(), StateVector::basis(layout.clone(), &[l])?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn vectors(&self) -> &[StateVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.vectors.len() == self.layout.dim()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn vector(&self, label: &str) -> Option<&StateVector> {
        self.index_of(label).map(|k| &self.vectors[k])
    }

    pub(crate) fn raw(&self, k: usize) -> &DVector<C64> {
        self.vectors[k].amplitudes()
    }

    /// Same vectors viewed over `layout`, which must carry identical
    /// subsystems (used after a state's layout picks up grouped names).
    pub(crate) fn check_against(&self, layout: &SubsystemLayout) -> Result<Vec<usize>> {
        let names = self.layout.names();
        let positions = layout.positions(&names)?;
        for (p, s) in positions.iter().zip(self.layout.subsystems()) {
            if &layout.subsystems()[*p] != s {
                return Err(Error::mismatch(&layout.subsystems()[*p].name(), &s.name()));
            }
        }
        Ok(positions)
    }
}

/// Gram-matrix check; reports the worst offending entry.
pub fn check_orthonormal(vectors: &[StateVector]) -> Result<()> {
    let mut worst: Option<(usize, usize, f64, f64)> = None;
    for (i, a) in vectors.iter().enumerate() {
        for (j, b) in vectors.iter().enumerate() {
            let g = a.inner(b)?;
            let target = if i == j { 1.0 } else { 0.0 };
            let dev = (g - C64::new(target, 0.0)).norm();
            if dev > AMPLITUDE_TOL && worst.is_none_or(|w| dev > w.3) {
                worst = Some((i, j, g.norm(), dev));
            }
        }
    }
    match worst {
        Some((row, col, value, _)) => Err(Error::NonOrthonormalBasis { row, col, value }),
        None => Ok(()),
    }
}
