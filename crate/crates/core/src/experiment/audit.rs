use super::certainty::{certainty_with, CertaintyKind, CertaintyVerdict, Proposition, Quantifier, Semantics};
use super::protocol::{joint_outcome, Transcript};
use crate::error::{Error, Result};
use crate::hilbert::SubsystemLayout;

/// "If `observer` sees `observed`, then `proposition`."
#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub name: String,
    pub observer: String,
    pub observed: String,
    pub proposition: Proposition,
}

impl Statement {
    pub fn new(name: &str, observer: &str, observed: &str, proposition: Proposition) -> Self {
        Self {
            name: name.to_string(),
            observer: observer.to_string(),
            observed: observed.to_string(),
            proposition,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatementResult {
    pub name: String,
    /// `None` when the chain was already broken before this statement.
    pub verdict: Option<CertaintyVerdict>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub semantics: String,
    pub statements: Vec<StatementResult>,
    pub broken_at: Option<String>,
    /// (agent, basis label) the chain starts from.
    pub premise: (String, String),
    /// (agent, basis label) the chain concludes.
    pub conclusion: (String, String),
    /// Probability the chain claims for premise ∧ ¬conclusion (zero), if
    /// the chain holds.
    pub claimed: Option<f64>,
    /// The same probability read off the final state.
    pub observed: f64,
    pub contradiction: bool,
}

impl AuditReport {
    pub fn chain_holds(&self) -> bool {
        self.broken_at.is_none()
    }
}

/// Evaluate a chain of statements, `chain[k+1]` supporting the premise of
/// `chain[k]`; the last statement's observation is the overall premise and
/// the first statement's `will_obtain` proposition the overall conclusion.
///
/// Under decoherent semantics the models are consulted only for statements
/// whose observer stage carries every subsystem the models branch on; the
/// remaining statements fall back to pre-measurement reasoning. Evaluation
/// stops at the first statement that is not certain.
pub fn consistency_audit(
    transcript: &Transcript,
    chain: &[Statement],
    semantics: &Semantics,
    tol: f64,
) -> Result<AuditReport> {
    let (first, last) = match (chain.first(), chain.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::InvalidProposition("empty statement chain".into())),
    };
    if first.proposition.quantifier != Quantifier::WillObtain {
        return Err(Error::InvalidProposition(format!(
            "chain must conclude with a will_obtain proposition, got `{}`",
            first.proposition
        )));
    }
    for pair in chain.windows(2) {
        check_link(transcript, &pair[1], &pair[0])?;
    }

    let protocol = transcript.protocol();
    let premise_spec = protocol.agent_spec(&last.observer)?;
    let premise_label = premise_spec
        .recorded(&last.observed)
        .unwrap_or(&last.observed)
        .to_string();
    let conclusion_agent = first.proposition.subject.clone();
    let conclusion_label = first.proposition.predicate.clone();

    let mut statements = Vec::with_capacity(chain.len());
    let mut broken_at = None;
    for statement in chain {
        if broken_at.is_some() {
            statements.push(StatementResult {
                name: statement.name.clone(),
                verdict: None,
            });
            continue;
        }
        let local = local_semantics(transcript, statement, semantics)?;
        let verdict = certainty_with(
            transcript,
            &statement.observer,
            &statement.observed,
            &statement.proposition,
            &local,
            tol,
        )?;
        if verdict.kind != CertaintyKind::Certain {
            broken_at = Some(statement.name.clone());
        }
        statements.push(StatementResult {
            name: statement.name.clone(),
            verdict: Some(verdict),
        });
    }

    let joint = joint_outcome(transcript, &[&last.observer, &conclusion_agent])?;
    let observed: f64 = joint
        .entries()
        .iter()
        .filter(|(key, _)| key[0] == premise_label && key[1] != conclusion_label)
        .map(|(_, p)| p)
        .sum();
    let claimed = broken_at.is_none().then_some(0.0);
    Ok(AuditReport {
        semantics: semantics.name().to_string(),
        statements,
        broken_at,
        premise: (last.observer.clone(), premise_label),
        conclusion: (conclusion_agent, conclusion_label),
        claimed,
        observed,
        contradiction: claimed.is_some_and(|c| (c - observed).abs() > tol),
    })
}

fn local_semantics(transcript: &Transcript, statement: &Statement, semantics: &Semantics) -> Result<Semantics> {
    let Semantics::Decoherent(models) = semantics else {
        return Ok(Semantics::Premeasurement);
    };
    let stage = transcript.protocol().agent_stage(&statement.observer)?;
    let layout = transcript.stages()[stage].state.layout();
    let applicable: Vec<_> = models
        .iter()
        .filter(|m| m.branches().layout().names().iter().all(|n| layout.contains(n)))
        .cloned()
        .collect();
    Ok(if applicable.is_empty() {
        Semantics::Premeasurement
    } else {
        Semantics::Decoherent(applicable)
    })
}

/// `support`'s conclusion must pin down `target`'s observation: the
/// concluded state of a laboratory is a product label containing the
/// target's record.
fn check_link(transcript: &Transcript, support: &Statement, target: &Statement) -> Result<()> {
    let protocol = transcript.protocol();
    let spec = protocol.agent_spec(&target.observer)?;
    let record = if spec.outcome_labels.contains(&target.observed) {
        target.observed.clone()
    } else {
        spec.record_of(&target.observed)
            .ok_or_else(|| Error::UnknownLabel {
                subsystem: spec.apparatus.clone(),
                label: target.observed.clone(),
            })?
            .to_string()
    };
    let prop = &support.proposition;
    let linked = prop.quantifier == Quantifier::IsInState
        && transcript.stages().iter().any(|stage| {
            let Ok(sub) = stage.state.layout().subsystem(&prop.subject) else {
                return false;
            };
            let Ok(index) = sub.label_index(&prop.predicate) else {
                return false;
            };
            if sub.parts().is_empty() {
                return false;
            }
            let inner = SubsystemLayout::from_subsystems(sub.parts().to_vec()).expect("parts of a valid group");
            inner
                .names()
                .into_iter()
                .zip(inner.labels_at(index))
                .any(|(part, label)| part == spec.apparatus && label == record)
        });
    if linked {
        Ok(())
    } else {
        Err(Error::InvalidProposition(format!(
            "{} (`{}`) does not establish the observation {} = {} that {} relies on",
            support.name, prop, target.observer, target.observed, target.name
        )))
    }
}
