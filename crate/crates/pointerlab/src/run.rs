use pointerlab_core::decomposition::{relative_states, rewrite, schmidt, triortho_verdict, Decomposition};
use pointerlab_core::experiment::{
    certainty_with, consistency_audit, decoherence_compare, CertaintyVerdict, Transcript,
};
use pointerlab_core::hilbert::{DensityOperator, StateVector};
use pointerlab_core::measurement::{born, Basis, OutcomeDistribution};
use pointerlab_core::{Error, AMPLITUDE_TOL};
use sha2::{Digest, Sha256};

use crate::ast::{Pos, Scenario};
use crate::compile::{compile, Compiled, CompiledQuery};
use crate::parse::Diagnostic;
use crate::report::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Certainty threshold and equality tolerance for comparisons.
    pub tolerance: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { tolerance: AMPLITUDE_TOL }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Invalid(#[from] Diagnostic),
    #[error("action {index} (line {line}): {message}")]
    Action { index: usize, line: usize, message: String },
    #[error("query {index} (line {line}): {message}")]
    Query { index: usize, line: usize, message: String },
}

fn distribution(d: &OutcomeDistribution) -> Vec<Outcome> {
    d.entries()
        .iter()
        .map(|(labels, p)| Outcome {
            labels: labels.clone(),
            probability: sig(*p),
        })
        .collect()
}

fn components(s: &StateVector) -> Vec<Component> {
    s.support()
        .into_iter()
        .filter(|(_, a)| a.norm() >= ZERO_FLOOR)
        .map(|(labels, a)| Component {
            labels: labels.into_iter().map(String::from).collect(),
            amplitude: amp(a.re, a.im),
        })
        .collect()
}

fn decomposition_terms(d: &Decomposition) -> Vec<TermReport> {
    d.terms()
        .iter()
        .map(|t| TermReport {
            coefficient: amp(t.coefficient.re, t.coefficient.im),
            labels: t.labels.clone(),
            factors: t.factors.iter().map(components).collect(),
        })
        .collect()
}

fn matrix(rho: &DensityOperator) -> Matrix {
    let layout = rho.layout();
    let m = rho.matrix();
    Matrix {
        labels: (0..layout.dim()).map(|k| layout.labels_at(k).join(",")).collect(),
        rows: (0..m.nrows())
            .map(|r| (0..m.ncols()).map(|c| amp(m[(r, c)].re, m[(r, c)].im)).collect())
            .collect(),
    }
}

fn certainty_report(observer: &str, outcome: &str, prop: String, semantics: &str, v: &CertaintyVerdict) -> CertaintyReport {
    let (lo, hi) = v.probability_range();
    CertaintyReport {
        observer: observer.to_string(),
        outcome: outcome.to_string(),
        proposition: prop,
        semantics: semantics.to_string(),
        verdict: v.kind.as_str().to_string(),
        probability_range: [sig(lo), sig(hi)],
        evidence: v
            .evidence
            .iter()
            .map(|e| EvidenceReport {
                model: e.model.clone(),
                probability: sig(e.probability),
                conditional: distribution(&e.conditional),
                branches: e
                    .branches
                    .iter()
                    .map(|b| BranchReport {
                        label: b.label.clone(),
                        weight: sig(b.weight),
                        probability: sig(b.probability),
                    })
                    .collect(),
            })
            .collect(),
    }
}

/// SHA-256 of the canonical text, so equal scenarios share a hash.
pub fn scenario_hash(s: &Scenario) -> String {
    format!("{:x}", Sha256::digest(s.to_string().as_bytes()))
}

struct Ctx<'a> {
    compiled: &'a Compiled,
    transcript: &'a Transcript,
    tol: f64,
}

impl Ctx<'_> {
    fn state(&self, on: &Option<String>) -> &StateVector {
        match on {
            Some(n) => &self.compiled.states[n],
            None => &self.transcript.last().state,
        }
    }

    /// Agents are read in their own basis (ready level excluded); anything
    /// else in its declared labels.
    fn born_basis(&self, state: &StateVector, target: &str, final_state: bool) -> Result<Basis, Error> {
        let layout = state.layout().select(&[target])?;
        match self.transcript.protocol().agent_spec(target) {
            Ok(spec) if final_state => {
                let entries = spec
                    .outcome_labels
                    .iter()
                    .zip(spec.basis.labels())
                    .map(|(record, label)| Ok((label.clone(), StateVector::basis(layout.clone(), &[record])?)))
                    .collect::<Result<Vec<_>, Error>>()?;
                Basis::new(entries)
            }
            _ => Ok(Basis::computational(&layout)),
        }
    }

    fn query(&self, q: &CompiledQuery) -> Result<QueryResult, Error> {
        Ok(match q {
            CompiledQuery::Born { targets, on } => {
                let state = self.state(on);
                let bases = targets
                    .iter()
                    .map(|t| self.born_basis(state, t, on.is_none()))
                    .collect::<Result<Vec<_>, _>>()?;
                let d = born(state, &bases.iter().collect::<Vec<_>>())?;
                QueryResult::Born {
                    subsystems: targets.clone(),
                    outcomes: distribution(&d),
                }
            }
            CompiledQuery::Certainty {
                observer,
                outcome,
                prop,
                semantics,
            } => {
                let v = certainty_with(self.transcript, observer, outcome, prop, semantics, self.tol)?;
                QueryResult::Certainty(certainty_report(observer, outcome, prop.to_string(), semantics.name(), &v))
            }
            CompiledQuery::Audit { chain, semantics } => {
                let a = consistency_audit(self.transcript, chain, semantics, self.tol)?;
                QueryResult::Audit {
                    semantics: a.semantics.clone(),
                    statements: a
                        .statements
                        .iter()
                        .zip(chain)
                        .map(|(r, st)| StatementReport {
                            name: r.name.clone(),
                            certainty: r.verdict.as_ref().map(|v| {
                                let sem = if v.evidence.iter().any(|e| e.model == "premeasurement") {
                                    "premeasurement"
                                } else {
                                    "decoherent"
                                };
                                certainty_report(&st.observer, &st.observed, st.proposition.to_string(), sem, v)
                            }),
                        })
                        .collect(),
                    broken_at: a.broken_at.clone(),
                    premise: [a.premise.0.clone(), a.premise.1.clone()],
                    conclusion: [a.conclusion.0.clone(), a.conclusion.1.clone()],
                    claimed: a.claimed.map(sig),
                    observed: sig(a.observed),
                    contradiction: a.contradiction,
                }
            }
            CompiledQuery::Compare {
                models,
                restrict,
                apparatus,
            } => {
                let restrict: Vec<&str> = restrict.iter().map(String::as_str).collect();
                let c = decoherence_compare(&self.transcript.last().state, models, &restrict, apparatus)?;
                QueryResult::Compare {
                    models: c
                        .reductions
                        .iter()
                        .map(|r| ModelReport {
                            model: r.model.clone(),
                            branch_weights: r.branch_weights.iter().copied().map(sig).collect(),
                            apparatus_marginal: r
                                .apparatus_marginal
                                .iter()
                                .map(|(l, p)| Outcome {
                                    labels: vec![l.clone()],
                                    probability: sig(*p),
                                })
                                .collect(),
                            restricted: matrix(&r.restricted),
                        })
                        .collect(),
                    full_difference: sig(c.full_difference),
                    restricted_difference: sig(c.restricted_difference),
                    marginal_difference: sig(c.marginal_difference),
                    full_equal: c.full_difference <= self.tol,
                    restriction_equal: c.restricted_difference <= self.tol,
                }
            }
            CompiledQuery::Triortho { parts, on } => {
                let p: Vec<Vec<&str>> = parts.iter().map(|p| p.iter().map(String::as_str).collect()).collect();
                let v = triortho_verdict(self.state(on), [&p[0], &p[1], &p[2]])?;
                let best = v.stats.best_nontrivial_residual;
                QueryResult::Triortho {
                    parts: parts.to_vec(),
                    verdict: v.kind.as_str().to_string(),
                    rank: v.stats.rank,
                    residual: sig(v.residual),
                    grid_points: v.stats.grid_points,
                    restarts: v.stats.restarts,
                    best_nontrivial_residual: best.is_finite().then(|| sig(best)),
                    canonical: v.canonical.as_ref().map(decomposition_terms).unwrap_or_default(),
                    witness: v.witness.as_ref().map(decomposition_terms),
                }
            }
            CompiledQuery::Rewrite { bases, on } => {
                let state = self.state(on);
                let d = rewrite(state, &bases.iter().collect::<Vec<_>>())?;
                QueryResult::Rewrite {
                    parts: d.parts().to_vec(),
                    terms: decomposition_terms(&d),
                    residual: sig(d.residual(state)?),
                }
            }
            CompiledQuery::Relative { basis, on } => {
                let state = self.state(on);
                let d = relative_states(state, basis)?;
                let mut overlaps = Vec::new();
                for (i, a) in d.terms().iter().enumerate() {
                    for b in &d.terms()[i + 1..] {
                        let o = a.factors[0].inner(&b.factors[0])?;
                        overlaps.push(OverlapReport {
                            pair: [a.labels[1].clone(), b.labels[1].clone()],
                            overlap: amp(o.re, o.im),
                            magnitude: sig(o.norm()),
                        });
                    }
                }
                QueryResult::Relative {
                    terms: decomposition_terms(&d),
                    weights: d.weights().into_iter().map(sig).collect(),
                    overlaps,
                    residual: sig(d.residual(state)?),
                }
            }
            CompiledQuery::Schmidt { left, right, on } => {
                let l: Vec<&str> = left.iter().map(String::as_str).collect();
                let r: Vec<&str> = right.iter().map(String::as_str).collect();
                let s = schmidt(self.state(on), &l, &r)?;
                QueryResult::Schmidt {
                    coefficients: s.coefficients().into_iter().map(sig).collect(),
                    rank: s.rank(),
                    degenerate: s.degenerate,
                    terms: decomposition_terms(&s.to_decomposition()?),
                }
            }
        })
    }
}

fn action_error(s: &Scenario, compiled: &Compiled, e: Error) -> RunError {
    match e {
        Error::Step { index, name, source } => {
            let action = compiled.step_action.get(index - 1).copied().flatten();
            let (index, line) = match action {
                Some(k) => (k + 1, s.actions[k].pos().line),
                None => (0, s.init.pos.line),
            };
            RunError::Action {
                index,
                line,
                message: format!("{name}: {source}"),
            }
        }
        other => RunError::Action {
            index: 0,
            line: s.init.pos.line,
            message: other.to_string(),
        },
    }
}

/// Execute the actions, answer every query, and assemble the report.
pub fn run(s: &Scenario, opts: &RunOptions) -> Result<Report, RunError> {
    let compiled = compile(s)?;
    let transcript = compiled.protocol.run().map_err(|e| action_error(s, &compiled, e))?;
    let ctx = Ctx {
        compiled: &compiled,
        transcript: &transcript,
        tol: opts.tolerance,
    };
    let queries = s
        .queries
        .iter()
        .zip(&compiled.queries)
        .enumerate()
        .map(|(k, (q, cq))| {
            let result = ctx.query(cq).map_err(|e| RunError::Query {
                index: k + 1,
                line: q.pos.line,
                message: e.to_string(),
            })?;
            Ok(QueryReport {
                index: k + 1,
                query: q.kind.to_string(),
                result,
            })
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    Ok(Report {
        provenance: Provenance {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            scenario_sha256: scenario_hash(s),
            tolerance: opts.tolerance,
            steps: transcript.stages().iter().map(|st| st.name.clone()).collect(),
        },
        queries,
    })
}

/// Position of a run error, for diagnostics that point into the file.
pub fn error_pos(e: &RunError) -> Pos {
    match e {
        RunError::Invalid(d) => Pos::new(d.line, d.col),
        RunError::Action { line, .. } | RunError::Query { line, .. } => Pos::new(*line, 1),
    }
}
