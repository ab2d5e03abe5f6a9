use std::fmt;

use super::protocol::{record_distribution, Protocol, Transcript};
use crate::error::{Error, Result};
use crate::hilbert::{DensityOperator, StateVector};
use crate::measurement::{born, condition, condition_density, pointer_reduce, Basis, EnvironmentModel, OutcomeDistribution};
use crate::{AMPLITUDE_TOL, PROBABILITY_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    /// The agent's record at the end of the protocol.
    WillObtain,
    /// The subsystem's state at the observer's stage (or the first later
    /// stage where the subsystem exists).
    IsInState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposition {
    pub subject: String,
    /// Basis the predicate refers to; `None` means the agent's own
    /// measurement basis (will_obtain).
    pub basis: Option<Basis>,
    pub predicate: String,
    pub quantifier: Quantifier,
}

impl Proposition {
    pub fn will_obtain(agent: &str, predicate: &str) -> Self {
        Self {
            subject: agent.to_string(),
            basis: None,
            predicate: predicate.to_string(),
            quantifier: Quantifier::WillObtain,
        }
    }

    pub fn is_in_state(basis: Basis, predicate: &str) -> Result<Self> {
        let names = basis.layout().names();
        if names.len() != 1 {
            return Err(Error::InvalidProposition(format!(
                "subject must be one subsystem, got [{}]",
                names.join(",")
            )));
        }
        if basis.index_of(predicate).is_none() {
            return Err(Error::InvalidProposition(format!(
                "`{predicate}` is not a label of the basis on {}",
                names[0]
            )));
        }
        Ok(Self {
            subject: names[0].to_string(),
            basis: Some(basis),
            predicate: predicate.to_string(),
            quantifier: Quantifier::IsInState,
        })
    }

    /// Distribution of the predicate's basis over `states`, which are the
    /// states of consecutive stages ending with the last one.
    fn evaluate(&self, protocol: &Protocol, states: &[StateVector]) -> Result<OutcomeDistribution> {
        match self.quantifier {
            Quantifier::WillObtain => {
                let spec = protocol.agent_spec(&self.subject)?;
                if spec.basis.index_of(&self.predicate).is_none() {
                    return Err(Error::InvalidProposition(format!(
                        "agent {} cannot obtain `{}`",
                        self.subject, self.predicate
                    )));
                }
                record_distribution(protocol, states.last().expect("non-empty"), &[&self.subject])
            }
            Quantifier::IsInState => {
                let basis = self.basis.as_ref().expect("is_in_state carries a basis");
                let state = states
                    .iter()
                    .find(|s| {
                        s.layout()
                            .subsystem(&self.subject)
                            .is_ok_and(|sub| sub == &basis.layout().subsystems()[0])
                    })
                    .ok_or_else(|| {
                        Error::InvalidProposition(format!("{} never appears after the observation", self.subject))
                    })?;
                born(state, &[basis])
            }
        }
    }
}

impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = match self.quantifier {
            Quantifier::WillObtain => "will_obtain",
            Quantifier::IsInState => "is_in_state",
        };
        write!(f, "{} {q} {}", self.subject, self.predicate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Semantics {
    /// Unitary pre-measurements only; records are conditioned on directly.
    Premeasurement,
    /// Each model couples an environment at the observer's stage; the
    /// prediction must hold under every model.
    Decoherent(Vec<EnvironmentModel>),
}

impl Semantics {
    pub fn name(&self) -> &'static str {
        match self {
            Semantics::Premeasurement => "premeasurement",
            Semantics::Decoherent(_) => "decoherent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertaintyKind {
    Certain,
    Refuted,
    Undetermined,
}

impl CertaintyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CertaintyKind::Certain => "certain",
            CertaintyKind::Refuted => "refuted",
            CertaintyKind::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchEvidence {
    pub label: String,
    pub weight: f64,
    pub probability: f64,
}

/// What one explanation (environment model, or bare pre-measurement)
/// predicts for the proposition.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEvidence {
    pub model: String,
    pub probability: f64,
    pub conditional: OutcomeDistribution,
    pub branches: Vec<BranchEvidence>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertaintyVerdict {
    pub kind: CertaintyKind,
    /// Conditional distribution under the first consulted explanation.
    pub conditional: OutcomeDistribution,
    pub evidence: Vec<ModelEvidence>,
}

impl CertaintyVerdict {
    /// Range of the predicate's probability across explanations.
    pub fn probability_range(&self) -> (f64, f64) {
        self.evidence.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e.probability), hi.max(e.probability))
        })
    }
}

pub fn certainty(
    transcript: &Transcript,
    observer: &str,
    observed: &str,
    proposition: &Proposition,
    semantics: &Semantics,
) -> Result<CertaintyVerdict> {
    certainty_with(transcript, observer, observed, proposition, semantics, AMPLITUDE_TOL)
}

pub fn certainty_with(
    transcript: &Transcript,
    observer: &str,
    observed: &str,
    proposition: &Proposition,
    semantics: &Semantics,
    tol: f64,
) -> Result<CertaintyVerdict> {
    let protocol = transcript.protocol();
    let stage = protocol.agent_stage(observer)?;
    let state = &transcript.stages()[stage].state;
    let record = record_basis(protocol, observer, observed, state)?;

    let evidence = match semantics {
        Semantics::Premeasurement => {
            let conditioned = condition(state, &record, 0)?;
            let states = protocol.replay(stage, &conditioned)?;
            let conditional = proposition.evaluate(protocol, &states)?;
            let probability = conditional.probability(&[&proposition.predicate]).unwrap_or(0.0);
            vec![ModelEvidence {
                model: "premeasurement".to_string(),
                probability,
                conditional,
                branches: vec![BranchEvidence {
                    label: record.labels()[0].clone(),
                    weight: 1.0,
                    probability,
                }],
            }]
        }
        Semantics::Decoherent(models) => {
            if models.is_empty() {
                return Err(Error::EmptyModelFamily);
            }
            models
                .iter()
                .map(|m| model_evidence(protocol, stage, state, &record, m, proposition))
                .collect::<Result<Vec<_>>>()?
        }
    };

    let kind = if evidence.iter().all(|e| e.probability >= 1.0 - tol) {
        CertaintyKind::Certain
    } else if evidence.iter().all(|e| e.probability <= tol) {
        CertaintyKind::Refuted
    } else {
        CertaintyKind::Undetermined
    };
    Ok(CertaintyVerdict {
        kind,
        conditional: evidence[0].conditional.clone(),
        evidence,
    })
}

/// The observer's register state for `observed`, given either as a record
/// label (`Fbar2`) or as the basis label it stands for (`tail`).
fn record_basis(protocol: &Protocol, observer: &str, observed: &str, state: &StateVector) -> Result<Basis> {
    let spec = protocol.agent_spec(observer)?;
    let record = if spec.outcome_labels.iter().any(|l| l == observed) {
        observed
    } else {
        spec.record_of(observed).ok_or_else(|| Error::UnknownLabel {
            subsystem: spec.apparatus.clone(),
            label: observed.to_string(),
        })?
    };
    let layout = state.layout().select(&[spec.apparatus.as_str()])?;
    Basis::from_labels(&layout, &[record])
}

fn model_evidence(
    protocol: &Protocol,
    stage: usize,
    state: &StateVector,
    record: &Basis,
    model: &EnvironmentModel,
    proposition: &Proposition,
) -> Result<ModelEvidence> {
    let rho = pointer_reduce(&model.couple(state)?, model.environment())?;
    let conditioned = condition_density(&rho, record, 0)?;
    let mut weighted = Vec::new();
    let mut branches = Vec::new();
    for (label, branch) in model.branches().labels().iter().zip(model.branches().vectors()) {
        let block = conditioned.project(branch)?;
        let weight = block.trace().re;
        if weight < PROBABILITY_FLOOR {
            continue;
        }
        let rho_k = DensityOperator::from_block(conditioned.layout().clone(), block)?;
        let mut parts = Vec::new();
        for (lambda, v) in rho_k.spectrum(PROBABILITY_FLOOR) {
            let pure = StateVector::from_amplitudes(rho_k.layout().clone(), v)?;
            let states = protocol.replay(stage, &pure)?;
            parts.push((lambda, proposition.evaluate(protocol, &states)?));
        }
        let dist = mix(&parts);
        branches.push(BranchEvidence {
            label: label.clone(),
            weight,
            probability: dist.probability(&[&proposition.predicate]).unwrap_or(0.0),
        });
        weighted.push((weight, dist));
    }
    if weighted.is_empty() {
        return Err(Error::ImpossibleOutcome { probability: 0.0 });
    }
    let conditional = mix(&weighted);
    Ok(ModelEvidence {
        model: model.name().to_string(),
        probability: conditional.probability(&[&proposition.predicate]).unwrap_or(0.0),
        conditional,
        branches,
    })
}

/// Σ w_k d_k for distributions over identical outcome lists.
fn mix(parts: &[(f64, OutcomeDistribution)]) -> OutcomeDistribution {
    let first = &parts[0].1;
    let total: f64 = parts.iter().map(|(w, _)| w).sum();
    let entries = first
        .entries()
        .iter()
        .enumerate()
        .map(|(k, (key, _))| {
            let p = parts.iter().map(|(w, d)| w * d.entries()[k].1).sum::<f64>() / total;
            (key.clone(), p)
        })
        .collect();
    OutcomeDistribution::new(first.subsystems().to_vec(), entries)
}
