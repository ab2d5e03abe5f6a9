//! The four-agent protocol: coin R, spin S, friends Fbar/F, Wigners Wbar/W.

use std::collections::BTreeMap;

use super::audit::{consistency_audit, AuditReport, Statement};
use super::certainty::{Proposition, Semantics};
use super::compare::{decoherence_compare, DecoherenceComparison};
use super::protocol::{Action, Protocol, Transcript};
use crate::error::Result;
use crate::hilbert::{re, sqrt_frac, StateVector, SubsystemLayout};
use crate::measurement::{Basis, EnvironmentModel, MeasurementSpec};
use crate::AMPLITUDE_TOL;

pub fn coin() -> SubsystemLayout {
    SubsystemLayout::single("R", vec!["head", "tail"]).expect("static layout")
}

pub fn spin() -> SubsystemLayout {
    SubsystemLayout::single("S", vec!["up", "down"]).expect("static layout")
}

/// Ready level `{name}0` plus two record levels.
pub fn register(name: &str) -> SubsystemLayout {
    SubsystemLayout::single(name, vec![format!("{name}0"), format!("{name}1"), format!("{name}2")])
        .expect("static layout")
}

fn ket(layout: &SubsystemLayout, label: &str) -> StateVector {
    StateVector::basis(layout.clone(), &[label]).expect("declared label")
}

/// (a ± b)/√2
fn half(a: &StateVector, b: &StateVector, sign: f64) -> StateVector {
    StateVector::superpose(&[(re(1.0), a), (re(sign), b)]).expect("independent kets")
}

pub fn right() -> StateVector {
    half(&ket(&spin(), "up"), &ket(&spin(), "down"), 1.0)
}

pub fn left() -> StateVector {
    half(&ket(&spin(), "up"), &ket(&spin(), "down"), -1.0)
}

/// {up, down}
pub fn spin_basis() -> Basis {
    Basis::from_labels(&spin(), &["up", "down"]).expect("static basis")
}

/// {right, left}
pub fn spin_x_basis() -> Basis {
    Basis::new(vec![("right", right()), ("left", left())]).expect("orthonormal")
}

pub fn coin_basis() -> Basis {
    Basis::from_labels(&coin(), &["head", "tail"]).expect("static basis")
}

/// √(1/3)|head,down⟩ + √(2/3)|tail,right⟩ over (R, S).
pub fn build_init() -> StateVector {
    let head_down = ket(&coin(), "head").tensor(&ket(&spin(), "down")).expect("disjoint");
    let tail_right = ket(&coin(), "tail").tensor(&right()).expect("disjoint");
    StateVector::superpose(&[(sqrt_frac(1.0, 3.0), &head_down), (sqrt_frac(2.0, 3.0), &tail_right)])
        .expect("non-zero")
}

fn label_map(pairs: &[(&str, &str, &str)]) -> BTreeMap<Vec<String>, String> {
    pairs
        .iter()
        .map(|(a, b, to)| (vec![a.to_string(), b.to_string()], to.to_string()))
        .collect()
}

pub fn lbar_map() -> BTreeMap<Vec<String>, String> {
    label_map(&[("head", "Fbar1", "h"), ("tail", "Fbar2", "t")])
}

pub fn l_map() -> BTreeMap<Vec<String>, String> {
    label_map(&[("down", "F1", "-1/2"), ("up", "F2", "+1/2")])
}

/// Laboratory L̄ = (R, Fbar) grouped.
pub fn lbar() -> SubsystemLayout {
    coin()
        .concat(&register("Fbar"))
        .and_then(|l| l.group(&["R", "Fbar"], "Lbar", &lbar_map()))
        .expect("static grouping")
}

/// Laboratory L = (S, F) grouped.
pub fn lab_l() -> SubsystemLayout {
    spin()
        .concat(&register("F"))
        .and_then(|l| l.group(&["S", "F"], "L", &l_map()))
        .expect("static grouping")
}

/// {failbar = (h+t)/√2, okbar = (h−t)/√2}
pub fn wbar_basis() -> Basis {
    let (h, t) = (ket(&lbar(), "h"), ket(&lbar(), "t"));
    Basis::new(vec![("failbar", half(&h, &t, 1.0)), ("okbar", half(&h, &t, -1.0))]).expect("orthonormal")
}

/// {fail = (−1/2 + +1/2)/√2, ok = (−1/2 − +1/2)/√2}
pub fn w_basis() -> Basis {
    let (minus, plus) = (ket(&lab_l(), "-1/2"), ket(&lab_l(), "+1/2"));
    Basis::new(vec![("fail", half(&minus, &plus, 1.0)), ("ok", half(&minus, &plus, -1.0))]).expect("orthonormal")
}

fn measure(basis: Basis, agent: &str) -> Action {
    let spec = MeasurementSpec::new(
        basis,
        agent,
        &format!("{agent}0"),
        vec![format!("{agent}1"), format!("{agent}2")],
    )
    .expect("two outcomes, two records");
    Action::Premeasure {
        spec,
        register: Some(register(agent)),
    }
}

fn group(parts: &[&str], name: &str, map: BTreeMap<Vec<String>, String>) -> Action {
    Action::Group {
        parts: parts.iter().map(|p| p.to_string()).collect(),
        name: name.to_string(),
        label_map: map,
    }
}

pub fn protocol() -> Protocol {
    let down_up = Basis::from_labels(&spin(), &["down", "up"]).expect("static basis");
    Protocol::new(build_init())
        .step("after-Fbar", measure(coin_basis(), "Fbar"))
        .step("group-Lbar", group(&["R", "Fbar"], "Lbar", lbar_map()))
        .step("after-F", measure(down_up, "F"))
        .step("group-L", group(&["S", "F"], "L", l_map()))
        .step("after-Wbar", measure(wbar_basis(), "Wbar"))
        .step("after-W", measure(w_basis(), "W"))
}

pub fn run_protocol() -> Result<Transcript> {
    protocol().run()
}

/// The two environment interactions of the decoherence argument, branching
/// on (R, S, `record`) where `record` is the register or apparatus that
/// holds the coin reading in levels 1 and 2.
pub fn environment_models(record: &SubsystemLayout) -> Vec<EnvironmentModel> {
    let name = record.names()[0].to_string();
    let r1 = ket(record, &record.subsystems()[0].labels()[1]);
    let r2 = ket(record, &record.subsystems()[0].labels()[2]);
    let (head, tail) = (ket(&coin(), "head"), ket(&coin(), "tail"));
    let (up, down) = (ket(&spin(), "up"), ket(&spin(), "down"));
    let b = |c: &StateVector, s: &StateVector, r: &StateVector| {
        c.tensor(s).and_then(|cs| cs.tensor(r)).expect("disjoint")
    };
    let unprimed = Basis::new(vec![
        (format!("head,down,{name}1"), b(&head, &down, &r1)),
        (format!("tail,right,{name}2"), b(&tail, &right(), &r2)),
    ])
    .expect("orthonormal");
    let primed = Basis::new(vec![
        (format!("head,down,{name}1"), b(&head, &down, &r1)),
        (format!("tail,down,{name}2"), b(&tail, &down, &r2)),
        (format!("tail,up,{name}2"), b(&tail, &up, &r2)),
    ])
    .expect("orthonormal");
    vec![
        EnvironmentModel::new("U_E", "E", unprimed),
        EnvironmentModel::new("U_E'", "E", primed),
    ]
}

/// Default model family for the protocol: branches on (R, S, Fbar).
pub fn default_models() -> Vec<EnvironmentModel> {
    environment_models(&register("Fbar"))
}

/// Statements 1–3, in the order of the chain (each supported by the next).
pub fn statements() -> Vec<Statement> {
    vec![
        Statement::new("statement-1", "Fbar", "Fbar2", Proposition::will_obtain("W", "fail")),
        Statement::new(
            "statement-2",
            "F",
            "F2",
            Proposition::is_in_state(Basis::from_labels(&lbar(), &["h", "t"]).expect("declared"), "t")
                .expect("valid"),
        ),
        Statement::new(
            "statement-3",
            "Wbar",
            "Wbar2",
            Proposition::is_in_state(Basis::from_labels(&lab_l(), &["-1/2", "+1/2"]).expect("declared"), "+1/2")
                .expect("valid"),
        ),
    ]
}

/// Chained inference under both semantics: (pre-measurement, decoherent).
pub fn fr_consistency_audit() -> Result<(AuditReport, AuditReport)> {
    let transcript = run_protocol()?;
    let chain = statements();
    Ok((
        consistency_audit(&transcript, &chain, &Semantics::Premeasurement, AMPLITUDE_TOL)?,
        consistency_audit(&transcript, &chain, &Semantics::Decoherent(default_models()), AMPLITUDE_TOL)?,
    ))
}

pub fn apparatus() -> SubsystemLayout {
    SubsystemLayout::single("A", vec!["A0", "A1", "A2"]).expect("static layout")
}

/// √(1/3)|head,down,A1⟩ + √(2/3)|tail,right,A2⟩ over (R, S, A).
pub fn premeasured_state() -> StateVector {
    let a = build_init().tensor(&ket(&apparatus(), "A0")).expect("disjoint");
    let spec = MeasurementSpec::new(coin_basis(), "A", "A0", vec!["A1", "A2"]).expect("two outcomes");
    crate::measurement::premeasure(&a, &spec).expect("ready apparatus")
}

/// Both environment models on the pre-measured state, compared on (R,S,A)
/// and on what the apparatus can see, (R, A).
pub fn fr_decoherence_compare() -> Result<DecoherenceComparison> {
    decoherence_compare(&premeasured_state(), &environment_models(&apparatus()), &["R", "A"], "A")
}
