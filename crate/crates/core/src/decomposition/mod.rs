//! Product-form rewrites of entangled states: basis rewrites, Schmidt
//! analysis, relative states and the triorthogonal uniqueness check.

mod schmidt;
mod triortho;

pub use schmidt::{schmidt, SchmidtDecomposition, SchmidtTerm};
pub use triortho::{triortho_verdict, triortho_verdict_with, SearchConfig, SearchStats, UniquenessVerdict, VerdictKind};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::hilbert::kernel;
use crate::hilbert::{StateVector, SubsystemLayout, C64};
use crate::measurement::Basis;
use crate::{AMPLITUDE_TOL, PROBABILITY_FLOOR};

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionTerm {
    pub coefficient: C64,
    /// One label per factor, when the factors come from labeled bases.
    pub labels: Vec<String>,
    pub factors: Vec<StateVector>,
}

/// Σ_k c_k ⊗_p factor_{k,p} over a partition of the source layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    parts: Vec<Vec<String>>,
    terms: Vec<DecompositionTerm>,
}

impl Decomposition {
    pub fn new(parts: Vec<Vec<String>>, terms: Vec<DecompositionTerm>) -> Result<Self> {
        for term in &terms {
            if term.factors.len() != parts.len() {
                return Err(Error::InvalidPartition(format!(
                    "term has {} factors for {} parts",
                    term.factors.len(),
                    parts.len()
                )));
            }
            for (factor, part) in term.factors.iter().zip(&parts) {
                if factor.layout().names() != part.iter().map(String::as_str).collect::<Vec<_>>() {
                    return Err(Error::mismatch(&part.join(","), factor.layout()));
                }
            }
        }
        Ok(Self { parts, terms })
    }

    pub fn parts(&self) -> &[Vec<String>] {
        &self.parts
    }

    pub fn terms(&self) -> &[DecompositionTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// |c_k|² per term.
    pub fn weights(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.coefficient.norm_sqr()).collect()
    }

    pub fn term_with_labels<S: AsRef<str>>(&self, labels: &[S]) -> Option<&DecompositionTerm> {
        self.terms
            .iter()
            .find(|t| t.labels.len() == labels.len() && t.labels.iter().zip(labels).all(|(a, b)| a == b.as_ref()))
    }

    /// Amplitudes of Σ c_k ⊗ factors over `layout` (not renormalized).
    pub fn reconstruct(&self, layout: &SubsystemLayout) -> Result<DVector<C64>> {
        let mut out = DVector::zeros(layout.dim());
        for term in &self.terms {
            let mut product = term.factors[0].clone();
            for f in &term.factors[1..] {
                product = product.tensor(f)?;
            }
            let reordered = product.reordered(&layout.names())?;
            if reordered.layout() != layout {
                return Err(Error::mismatch(layout, reordered.layout()));
            }
            out += reordered.amplitudes() * term.coefficient;
        }
        Ok(out)
    }

    /// ‖Σ c_k ⊗ factors − state‖.
    pub fn residual(&self, state: &StateVector) -> Result<f64> {
        Ok((self.reconstruct(state.layout())? - state.amplitudes()).norm())
    }
}

/// Expand `state` in the product of the given bases. Subsystems without a
/// basis use their computational basis. Vanishing components are omitted.
pub fn rewrite(state: &StateVector, bases: &[&Basis]) -> Result<Decomposition> {
    let layout = state.layout();
    let mut covered = Vec::new();
    for b in bases {
        for p in b.check_against(layout)? {
            if covered.contains(&p) {
                return Err(Error::InvalidPartition("bases overlap".into()));
            }
            covered.push(p);
        }
    }
    let defaults: Vec<Basis> = layout
        .subsystems()
        .iter()
        .enumerate()
        .filter(|(p, _)| !covered.contains(p))
        .map(|(_, s)| Basis::computational(&layout.select(&[s.name()]).expect("own subsystem")))
        .collect();

    let mut all: Vec<&Basis> = bases.iter().copied().chain(defaults.iter()).collect();
    all.sort_by_key(|b| layout.position(b.layout().names()[0]).expect("checked"));
    let parts: Vec<Vec<String>> = all
        .iter()
        .map(|b| b.layout().names().into_iter().map(String::from).collect())
        .collect();
    let positions: Vec<usize> = all
        .iter()
        .flat_map(|b| b.check_against(layout).expect("checked"))
        .collect();

    let counts: Vec<usize> = all.iter().map(|b| b.len()).collect();
    let total: usize = counts.iter().product();
    let mut terms = Vec::new();
    let mut choice = vec![0usize; all.len()];
    for _ in 0..total {
        let mut bra = DVector::from_element(1, C64::new(1.0, 0.0));
        for (b, &k) in all.iter().zip(&choice) {
            bra = bra.kronecker(b.raw(k));
        }
        let coefficient = kernel::contract(state.amplitudes(), &layout.dims(), &positions, &bra)[0];
        if coefficient.norm_sqr() >= PROBABILITY_FLOOR {
            terms.push(DecompositionTerm {
                coefficient,
                labels: all.iter().zip(&choice).map(|(b, &k)| b.labels()[k].clone()).collect(),
                factors: all.iter().zip(&choice).map(|(b, &k)| b.vectors()[k].clone()).collect(),
            });
        }
        for slot in (0..choice.len()).rev() {
            choice[slot] += 1;
            if choice[slot] < counts[slot] {
                break;
            }
            choice[slot] = 0;
        }
    }

    let decomposition = Decomposition::new(parts, terms)?;
    check_coverage(&decomposition, state)?;
    Ok(decomposition)
}

fn check_coverage(decomposition: &Decomposition, state: &StateVector) -> Result<()> {
    let residual = decomposition.residual(state)?;
    if residual > AMPLITUDE_TOL {
        return Err(Error::IncompleteBasis {
            subsystems: decomposition
                .parts()
                .iter()
                .map(|p| p.join(","))
                .collect::<Vec<_>>()
                .join("|"),
            residual,
        });
    }
    Ok(())
}

/// For each basis vector |a_i⟩ of `basis`, the weight d_i = ‖⟨a_i|ψ⟩‖ and
/// the normalized relative state ⟨a_i|ψ⟩/d_i of the rest of the system.
///
/// Factors are ordered (rest, measured); relative states need not be
/// orthogonal to each other.
pub fn relative_states(state: &StateVector, basis: &Basis) -> Result<Decomposition> {
    let layout = state.layout();
    let positions = basis.check_against(layout)?;
    let measured: Vec<&str> = basis.layout().names();
    let rest_layout = layout.complement(&measured)?;
    if rest_layout.is_empty() {
        return Err(Error::InvalidPartition("nothing left to hold relative states".into()));
    }
    let mut terms = Vec::new();
    for (k, label) in basis.labels().iter().enumerate() {
        let relative = kernel::contract(state.amplitudes(), &layout.dims(), &positions, basis.raw(k));
        let weight = relative.norm_squared();
        if weight < PROBABILITY_FLOOR {
            continue;
        }
        let d = weight.sqrt();
        terms.push(DecompositionTerm {
            coefficient: C64::new(d, 0.0),
            labels: vec![String::new(), label.clone()],
            factors: vec![
                StateVector::from_amplitudes(rest_layout.clone(), relative)?,
                basis.vectors()[k].clone(),
            ],
        });
    }
    let parts = vec![
        rest_layout.names().into_iter().map(String::from).collect(),
        measured.into_iter().map(String::from).collect(),
    ];
    let decomposition = Decomposition::new(parts, terms)?;
    check_coverage(&decomposition, state)?;
    Ok(decomposition)
}
