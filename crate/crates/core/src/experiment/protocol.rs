use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::hilbert::{StateVector, SubsystemLayout};
use crate::measurement::{born, premeasure, Basis, EnvironmentModel, MeasurementSpec, OutcomeDistribution};

/// One replayable transformation of the protocol state.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Pre-measure with `spec`. If the apparatus is not yet part of the
    /// state, `register` is attached in its ready state right after the
    /// target subsystem.
    Premeasure {
        spec: MeasurementSpec,
        register: Option<SubsystemLayout>,
    },
    /// Merge adjacent subsystems into a laboratory.
    Group {
        parts: Vec<String>,
        name: String,
        label_map: BTreeMap<Vec<String>, String>,
    },
    /// Attach the model's environment and couple it (stays attached).
    Couple(EnvironmentModel),
}

impl Action {
    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        match self {
            Action::Premeasure { spec, register } => {
                let state = if state.layout().contains(&spec.apparatus) {
                    state.clone()
                } else {
                    let register = register
                        .as_ref()
                        .ok_or_else(|| Error::UnknownSubsystem(spec.apparatus.clone()))?;
                    if register.names() != [spec.apparatus.as_str()] {
                        return Err(Error::mismatch(&spec.apparatus, register));
                    }
                    attach_after(state, &spec.target, register, &spec.ready_label)?
                };
                premeasure(&state, spec)
            }
            Action::Group { parts, name, label_map } => {
                let parts: Vec<&str> = parts.iter().map(String::as_str).collect();
                state.gathered(&parts)?.group(&parts, name, label_map)
            }
            Action::Couple(model) => model.couple(state),
        }
    }

    /// The agent performing this action, if it is a measurement.
    pub fn agent(&self) -> Option<&str> {
        match self {
            Action::Premeasure { spec, .. } => Some(&spec.apparatus),
            _ => None,
        }
    }
}

fn attach_after(state: &StateVector, target: &str, register: &SubsystemLayout, ready: &str) -> Result<StateVector> {
    let ready_state = StateVector::basis(register.clone(), &[ready])?;
    let joined = state.tensor(&ready_state)?;
    let apparatus = register.names()[0];
    let mut order: Vec<&str> = Vec::with_capacity(joined.layout().len());
    for name in state.layout().names() {
        order.push(name);
        if name == target {
            order.push(apparatus);
        }
    }
    if order.len() != joined.layout().len() {
        return Err(Error::UnknownSubsystem(target.to_string()));
    }
    joined.reordered(&order)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub name: String,
    pub action: Action,
}

/// An initial state and an ordered list of named actions.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    init: StateVector,
    steps: Vec<Step>,
}

impl Protocol {
    pub fn new(init: StateVector) -> Self {
        Self { init, steps: Vec::new() }
    }

    pub fn step(mut self, name: &str, action: Action) -> Self {
        self.steps.push(Step {
            name: name.to_string(),
            action,
        });
        self
    }

    pub fn push(&mut self, name: &str, action: Action) {
        self.steps.push(Step {
            name: name.to_string(),
            action,
        });
    }

    pub fn init(&self) -> &StateVector {
        &self.init
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Stage index (0 = init) produced by the agent's measurement.
    pub fn agent_stage(&self, agent: &str) -> Result<usize> {
        self.steps
            .iter()
            .position(|s| s.action.agent() == Some(agent))
            .map(|k| k + 1)
            .ok_or_else(|| Error::UnknownAgent(agent.to_string()))
    }

    pub fn agent_spec(&self, agent: &str) -> Result<&MeasurementSpec> {
        let stage = self.agent_stage(agent)?;
        match &self.steps[stage - 1].action {
            Action::Premeasure { spec, .. } => Ok(spec),
            _ => unreachable!("agent stages come from measurements"),
        }
    }

    pub fn agents(&self) -> Vec<&str> {
        self.steps.iter().filter_map(|s| s.action.agent()).collect()
    }

    pub fn run(&self) -> Result<Transcript> {
        let stages = self.replay(0, &self.init)?;
        Ok(Transcript {
            protocol: self.clone(),
            stages: std::iter::once("init".to_string())
                .chain(self.steps.iter().map(|s| s.name.clone()))
                .zip(stages)
                .map(|(name, state)| Stage { name, state })
                .collect(),
        })
    }

    /// States of stages `from..=last`, starting from `state` at stage `from`.
    pub fn replay(&self, from: usize, state: &StateVector) -> Result<Vec<StateVector>> {
        let mut out = vec![state.clone()];
        for (index, step) in self.steps.iter().enumerate().skip(from) {
            let next = step.action.apply(out.last().expect("non-empty")).map_err(|e| Error::Step {
                index: index + 1,
                name: step.name.clone(),
                source: Box::new(e),
            })?;
            out.push(next);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub name: String,
    pub state: StateVector,
}

/// The protocol together with the state after every step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    protocol: Protocol,
    stages: Vec<Stage>,
}

impl Transcript {
    pub fn protocol(&self) -> &Protocol {
        &self.protocol
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn stage(&self, name: &str) -> Option<&Stage> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn last(&self) -> &Stage {
        self.stages.last().expect("init stage always present")
    }
}

/// Distribution of the named agents' records at the end of the protocol,
/// reported by the basis labels they stand for. Ready records are excluded.
pub fn joint_outcome(transcript: &Transcript, agents: &[&str]) -> Result<OutcomeDistribution> {
    let state = &transcript.last().state;
    record_distribution(transcript.protocol(), state, agents)
}

pub(crate) fn record_distribution(
    protocol: &Protocol,
    state: &StateVector,
    agents: &[&str],
) -> Result<OutcomeDistribution> {
    let mut bases = Vec::with_capacity(agents.len());
    let mut specs = Vec::with_capacity(agents.len());
    for agent in agents {
        let spec = protocol.agent_spec(agent)?;
        let layout = state.layout().select(&[spec.apparatus.as_str()])?;
        let labels: Vec<&str> = spec.outcome_labels.iter().map(String::as_str).collect();
        bases.push(Basis::from_labels(&layout, &labels)?);
        specs.push(spec);
    }
    let raw = born(state, &bases.iter().collect::<Vec<_>>())?;
    let entries = raw
        .entries()
        .iter()
        .map(|(key, p)| {
            let key = key
                .iter()
                .zip(&specs)
                .map(|(record, spec)| spec.recorded(record).expect("record label").to_string())
                .collect();
            (key, *p)
        })
        .collect();
    Ok(OutcomeDistribution::new(
        agents.iter().map(|a| a.to_string()).collect(),
        entries,
    ))
}
