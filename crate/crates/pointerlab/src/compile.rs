//! Name resolution: turns a `Scenario` into core objects, reporting every
//! unresolved reference against the position that made it.

use std::collections::{BTreeMap, BTreeSet};

use pointerlab_core::experiment::{Action, Proposition, Protocol, Semantics, Statement};
use pointerlab_core::hilbert::{StateVector, SubsystemLayout, C64};
use pointerlab_core::measurement::{Basis, EnvironmentModel, MeasurementSpec};
use pointerlab_core::nalgebra::DVector;

use crate::ast::*;
use crate::parse::Diagnostic;

type CResult<T> = Result<T, Diagnostic>;

/// Gram entries may deviate from δ_ij by at most this much.
pub const GRAM_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub enum CompiledQuery {
    Born {
        targets: Vec<String>,
        on: Option<String>,
    },
    Certainty {
        observer: String,
        outcome: String,
        prop: Proposition,
        semantics: Semantics,
    },
    Audit {
        chain: Vec<Statement>,
        semantics: Semantics,
    },
    Compare {
        models: Vec<EnvironmentModel>,
        restrict: Vec<String>,
        apparatus: String,
    },
    Triortho {
        parts: [Vec<String>; 3],
        on: Option<String>,
    },
    Rewrite {
        bases: Vec<Basis>,
        on: Option<String>,
    },
    Relative {
        basis: Basis,
        on: Option<String>,
    },
    Schmidt {
        left: Vec<String>,
        right: Vec<String>,
        on: Option<String>,
    },
}

#[derive(Debug, Clone)]
pub struct Compiled {
    pub protocol: Protocol,
    /// Scenario action behind each protocol step; `None` for laboratories
    /// grouped before the first action.
    pub step_action: Vec<Option<usize>>,
    pub states: BTreeMap<String, StateVector>,
    pub queries: Vec<CompiledQuery>,
}

#[derive(Default)]
struct Env {
    /// Every declared subsystem, register, laboratory and environment.
    layouts: BTreeMap<String, SubsystemLayout>,
    registers: BTreeSet<String>,
    initial: Vec<String>,
    derived: BTreeMap<(String, String), StateVector>,
    models: BTreeMap<String, ModelDecl>,
    /// Which subsystems exist after the actions so far.
    present: BTreeSet<String>,
    specs: BTreeMap<String, MeasurementSpec>,
}

fn undeclared(name: &str, pos: Pos) -> Diagnostic {
    Diagnostic::new(
        pos,
        format!("undeclared subsystem `{name}`"),
        format!("declare it in [layout], e.g. subsystem {name} {{a, b}}"),
    )
}

fn core(pos: Pos, e: pointerlab_core::Error) -> Diagnostic {
    Diagnostic::new(pos, e.to_string(), "check the declaration against the layout")
}

impl Env {
    fn layout(&self, name: &str, pos: Pos) -> CResult<&SubsystemLayout> {
        self.layouts.get(name).ok_or_else(|| undeclared(name, pos))
    }

    fn require_present(&self, name: &str, pos: Pos) -> CResult<()> {
        self.layout(name, pos)?;
        if self.present.contains(name) {
            Ok(())
        } else {
            let mut now: Vec<&str> = self.present.iter().map(String::as_str).collect();
            now.sort();
            Err(Diagnostic::new(
                pos,
                format!("subsystem `{name}` is not part of the state at this point"),
                format!("the state holds [{}]; reorder actions or group later", now.join(", ")),
            ))
        }
    }

    fn ket(&self, sub: &str, label: &str, pos: Pos) -> CResult<StateVector> {
        let layout = self.layout(sub, pos)?;
        if let Some(v) = self.derived.get(&(sub.to_string(), label.to_string())) {
            return Ok(v.clone());
        }
        StateVector::basis(layout.clone(), &[label]).map_err(|_| {
            let labels = layout.subsystems()[0].labels().join(", ");
            Diagnostic::new(
                pos,
                format!("subsystem `{sub}` has no label `{label}`"),
                format!("use one of {{{labels}}} or declare it with `derive {sub} {label} = ...`"),
            )
        })
    }

    fn product(&self, over: &[String], labels: &[String], pos: Pos) -> CResult<StateVector> {
        if labels.len() != over.len() {
            return Err(Diagnostic::new(
                pos,
                format!("ket has {} labels but the state is over ({})", labels.len(), over.join(",")),
                "give one label per subsystem, in declaration order",
            ));
        }
        let mut out: Option<StateVector> = None;
        for (s, l) in over.iter().zip(labels) {
            let k = self.ket(s, l, pos)?;
            out = Some(match out {
                None => k,
                Some(acc) => acc.tensor(&k).map_err(|e| core(pos, e))?,
            });
        }
        Ok(out.expect("non-empty"))
    }

    fn state(&self, expr: &StateExpr, over: &[String]) -> CResult<StateVector> {
        let mut amps: Option<(SubsystemLayout, DVector<C64>)> = None;
        for t in &expr.terms {
            let v = self.product(over, &t.labels, expr.pos)?;
            let (re, im) = t.coefficient.map_or((1.0, 0.0), |c| c.value());
            let c = C64::new(re, im) * if t.negative { -1.0 } else { 1.0 };
            match &mut amps {
                None => amps = Some((v.layout().clone(), v.amplitudes() * c)),
                Some((_, a)) => *a += v.amplitudes() * c,
            }
        }
        let (layout, a) = amps.expect("parser guarantees a term");
        StateVector::from_amplitudes(layout, a).map_err(|_| {
            Diagnostic::new(expr.pos, "state expression has zero norm", "the terms cancel; check the signs")
        })
    }

    fn basis(&self, spec: &BasisSpec, sub: &str) -> CResult<Basis> {
        let layout = self.layout(sub, spec.pos)?.clone();
        let mut entries: Vec<(String, DVector<C64>)> = Vec::new();
        for (k, e) in spec.elems.iter().enumerate() {
            match e {
                BasisElem::Label(l) => entries.push((l.clone(), self.ket(sub, l, spec.pos)?.amplitudes().clone())),
                BasisElem::Coords { label, coords } => {
                    if coords.len() != layout.dim() {
                        return Err(Diagnostic::new(
                            spec.pos,
                            format!("basis vector {} has {} coordinates, `{sub}` has dimension {}", k + 1, coords.len(), layout.dim()),
                            "give one coordinate per label of the subsystem",
                        ));
                    }
                    let v = DVector::from_iterator(coords.len(), coords.iter().map(|c| {
                        let (re, im) = c.value();
                        C64::new(re, im)
                    }));
                    entries.push((label.clone().unwrap_or_else(|| format!("v{}", k + 1)), v));
                }
            }
        }
        for (i, (a, va)) in entries.iter().enumerate() {
            if entries[..i].iter().any(|(b, _)| b == a) {
                return Err(Diagnostic::new(spec.pos, format!("basis label `{a}` repeated"), "label each basis vector once"));
            }
            for (j, (_, vb)) in entries.iter().enumerate().skip(i) {
                let g = va.dotc(vb);
                let expected = if i == j { 1.0 } else { 0.0 };
                if (g - C64::new(expected, 0.0)).norm() > GRAM_TOL {
                    let value = if g.im.abs() > GRAM_TOL { format!("{g}") } else { format!("{}", g.re) };
                    return Err(Diagnostic::new(
                        spec.pos,
                        format!("basis on `{sub}` is not orthonormal: Gram entry ({}, {}) = {value}", i + 1, j + 1),
                        "basis vectors must be orthonormal; check signs and normalization, e.g. sqrt(1/2)",
                    ));
                }
            }
        }
        let vectors = entries
            .into_iter()
            .map(|(l, v)| Ok((l, StateVector::from_amplitudes(layout.clone(), v).map_err(|e| core(spec.pos, e))?)))
            .collect::<CResult<Vec<_>>>()?;
        Basis::new(vectors).map_err(|e| core(spec.pos, e))
    }

    fn declare(&mut self, name: &str, layout: SubsystemLayout, pos: Pos) -> CResult<()> {
        if self.layouts.contains_key(name) {
            return Err(Diagnostic::new(pos, format!("`{name}` is declared twice"), "pick a distinct name"));
        }
        self.layouts.insert(name.to_string(), layout);
        Ok(())
    }

    fn lab_layout(&self, g: &GroupDecl) -> CResult<(SubsystemLayout, BTreeMap<Vec<String>, String>)> {
        let mut layout: Option<SubsystemLayout> = None;
        for p in &g.parts {
            let l = self.layout(p, g.pos)?.clone();
            layout = Some(match layout {
                None => l,
                Some(acc) => acc.concat(&l).map_err(|e| core(g.pos, e))?,
            });
        }
        let map: BTreeMap<Vec<String>, String> = g.map.iter().cloned().collect();
        for (key, _) in &g.map {
            if key.len() != g.parts.len() {
                return Err(Diagnostic::new(g.pos, format!("map key ({}) needs one label per part", key.join(",")), "write (label_of_part1,label_of_part2):name"));
            }
            for (p, l) in g.parts.iter().zip(key) {
                self.ket(p, l, g.pos)?;
            }
        }
        let parts: Vec<&str> = g.parts.iter().map(String::as_str).collect();
        let grouped = layout
            .expect("parts are non-empty")
            .group(&parts, &g.name, &map)
            .map_err(|e| core(g.pos, e))?;
        Ok((grouped, map))
    }

    fn model(&self, m: &ModelDecl) -> CResult<EnvironmentModel> {
        let mut entries = Vec::new();
        for b in &m.branches {
            entries.push((b.join(","), self.product(&m.over, b, m.pos)?));
        }
        let branches = Basis::new(entries).map_err(|e| core(m.pos, e))?;
        Ok(EnvironmentModel::new(&m.name, &m.env, branches))
    }

    fn named_model(&self, name: &str, pos: Pos) -> CResult<EnvironmentModel> {
        let m = self.models.get(name).ok_or_else(|| {
            Diagnostic::new(pos, format!("undeclared model `{name}`"), format!("declare it in [layout]: model {name} env=E over=(..) branches={{..}}"))
        })?;
        self.model(m)
    }

    fn semantics(&self, s: &SemanticsSpec, pos: Pos) -> CResult<Semantics> {
        Ok(match s {
            SemanticsSpec::Premeasurement => Semantics::Premeasurement,
            SemanticsSpec::Decoherent(names) => {
                Semantics::Decoherent(names.iter().map(|n| self.named_model(n, pos)).collect::<CResult<_>>()?)
            }
        })
    }

    fn agent(&self, name: &str, pos: Pos) -> CResult<&MeasurementSpec> {
        self.specs.get(name).ok_or_else(|| {
            Diagnostic::new(pos, format!("`{name}` is not an agent"), "agents are the apparatus registers of premeasure actions")
        })
    }

    fn proposition(&self, p: &PropSpec, pos: Pos) -> CResult<Proposition> {
        match p.quantifier {
            QuantifierSpec::WillObtain => {
                let spec = self.agent(&p.subject, pos)?;
                if spec.basis.index_of(&p.predicate).is_none() {
                    return Err(Diagnostic::new(
                        pos,
                        format!("agent `{}` cannot obtain `{}`", p.subject, p.predicate),
                        format!("its outcomes are {{{}}}", spec.basis.labels().join(", ")),
                    ));
                }
                Ok(Proposition::will_obtain(&p.subject, &p.predicate))
            }
            QuantifierSpec::IsInState => {
                let basis = match &p.basis {
                    Some(b) => self.basis(b, &p.subject)?,
                    None => Basis::computational(self.layout(&p.subject, pos)?),
                };
                Proposition::is_in_state(basis, &p.predicate).map_err(|e| core(pos, e))
            }
        }
    }

    fn outcome(&self, observer: &str, outcome: &str, pos: Pos) -> CResult<()> {
        let spec = self.agent(observer, pos)?;
        if spec.outcome_labels.iter().any(|l| l == outcome) || spec.record_of(outcome).is_some() {
            Ok(())
        } else {
            Err(Diagnostic::new(
                pos,
                format!("`{outcome}` is not an outcome of `{observer}`"),
                format!("use a record {{{}}} or a basis label {{{}}}", spec.outcome_labels.join(", "), spec.basis.labels().join(", ")),
            ))
        }
    }

    /// Names a query may refer to: the final state's, or a named state's.
    fn scope(&self, on: &Option<String>, states: &BTreeMap<String, Vec<String>>, pos: Pos) -> CResult<BTreeSet<String>> {
        match on {
            None => Ok(self.present.clone()),
            Some(n) => states.get(n).map(|o| o.iter().cloned().collect()).ok_or_else(|| {
                Diagnostic::new(pos, format!("unknown state `{n}`"), "declare it in [state]: state NAME over=(..): <expr>")
            }),
        }
    }
}

fn in_scope(scope: &BTreeSet<String>, names: &[String], env: &Env, pos: Pos) -> CResult<()> {
    for n in names {
        env.layout(n, pos)?;
        if !scope.contains(n) {
            return Err(Diagnostic::new(pos, format!("`{n}` is not part of the queried state"), "query a subsystem the state holds"));
        }
    }
    Ok(())
}

pub fn compile(s: &Scenario) -> CResult<Compiled> {
    let mut env = Env::default();
    let mut labs: Vec<(GroupDecl, BTreeMap<Vec<String>, String>)> = Vec::new();

    for d in &s.decls {
        match d {
            Decl::Subsystem { kind, name, labels, pos } => {
                let layout = SubsystemLayout::single(name.clone(), labels.clone()).map_err(|e| core(*pos, e))?;
                env.declare(name, layout, *pos)?;
                match kind {
                    SubsystemKind::Subsystem => env.initial.push(name.clone()),
                    SubsystemKind::Register => {
                        env.registers.insert(name.clone());
                    }
                }
            }
            Decl::Derive { subsystem, label, expr, pos } => {
                let layout = env.layout(subsystem, *pos)?;
                if layout.subsystems()[0].labels().contains(label) {
                    return Err(Diagnostic::new(*pos, format!("`{label}` is already a label of `{subsystem}`"), "derived labels need fresh names"));
                }
                let v = env.state(expr, std::slice::from_ref(subsystem))?;
                if env.derived.insert((subsystem.clone(), label.clone()), v).is_some() {
                    return Err(Diagnostic::new(*pos, format!("`{label}` derived twice on `{subsystem}`"), "pick a distinct label"));
                }
            }
            Decl::Lab(g) => {
                let (layout, map) = env.lab_layout(g)?;
                env.declare(&g.name, layout, g.pos)?;
                labs.push((g.clone(), map));
            }
            Decl::Model(m) => {
                env.model(m)?;
                if env.models.insert(m.name.clone(), m.clone()).is_some() {
                    return Err(Diagnostic::new(m.pos, format!("model `{}` declared twice", m.name), "pick a distinct name"));
                }
            }
        }
    }

    if env.initial.is_empty() {
        return Err(Diagnostic::new(s.init.pos, "no `subsystem` declared for the initial state", "declare e.g. subsystem R {head, tail}"));
    }
    let init_over = env.initial.clone();
    let init = env.state(&s.init, &init_over)?;
    env.present = init_over.iter().cloned().collect();

    let mut states = BTreeMap::new();
    let mut state_over = BTreeMap::new();
    for n in &s.states {
        if states.contains_key(&n.name) {
            return Err(Diagnostic::new(n.pos, format!("state `{}` declared twice", n.name), "pick a distinct name"));
        }
        states.insert(n.name.clone(), env.state(&n.expr, &n.over)?);
        state_over.insert(n.name.clone(), n.over.clone());
    }

    let mut protocol = Protocol::new(init);
    let mut step_action = Vec::new();
    let group_ready = |env: &mut Env, labs: &mut Vec<(GroupDecl, BTreeMap<Vec<String>, String>)>, protocol: &mut Protocol, step_action: &mut Vec<Option<usize>>, action: Option<usize>| {
        while let Some(k) = labs.iter().position(|(g, _)| g.parts.iter().all(|p| env.present.contains(p))) {
            let (g, map) = labs.remove(k);
            for p in &g.parts {
                env.present.remove(p);
            }
            env.present.insert(g.name.clone());
            protocol.push(
                &format!("group-{}", g.name),
                Action::Group {
                    parts: g.parts.clone(),
                    name: g.name.clone(),
                    label_map: map,
                },
            );
            step_action.push(action);
        }
    };
    group_ready(&mut env, &mut labs, &mut protocol, &mut step_action, None);

    for (k, a) in s.actions.iter().enumerate() {
        match a {
            ActionDecl::Premeasure {
                target,
                apparatus,
                basis,
                outcomes,
                ready,
                pos,
            } => {
                env.require_present(target, *pos)?;
                let register = env.layout(apparatus, *pos)?.clone();
                if !env.registers.contains(apparatus) {
                    return Err(Diagnostic::new(*pos, format!("apparatus `{apparatus}` is not a register"), format!("declare it with: register {apparatus} {{{apparatus}0, {apparatus}1, ...}}")));
                }
                if env.specs.contains_key(apparatus) || env.present.contains(apparatus) {
                    return Err(Diagnostic::new(*pos, format!("register `{apparatus}` is already in use"), "every measurement records into a fresh register"));
                }
                for l in outcomes.iter().chain(std::iter::once(ready)) {
                    env.ket(apparatus, l, *pos)?;
                }
                let b = env.basis(basis, target)?;
                let spec = MeasurementSpec::new(b, apparatus, ready, outcomes.clone()).map_err(|e| core(*pos, e))?;
                protocol.push(
                    &format!("after-{apparatus}"),
                    Action::Premeasure {
                        spec: spec.clone(),
                        register: Some(register),
                    },
                );
                step_action.push(Some(k));
                env.specs.insert(apparatus.clone(), spec);
                env.present.insert(apparatus.clone());
            }
            ActionDecl::Couple { model, pos } => {
                let decl = match model {
                    ModelRef::Named(n) => env
                        .models
                        .get(n)
                        .cloned()
                        .ok_or_else(|| Diagnostic::new(*pos, format!("undeclared model `{n}`"), "declare it in [layout] or give env/over/branches inline"))?,
                    ModelRef::Inline(m) => m.clone(),
                };
                for o in &decl.over {
                    env.require_present(o, *pos)?;
                }
                if env.layouts.contains_key(&decl.env) || env.present.contains(&decl.env) {
                    return Err(Diagnostic::new(*pos, format!("environment `{}` clashes with an existing subsystem", decl.env), "environments are created by the coupling; use a fresh name"));
                }
                let m = env.model(&decl)?;
                env.layouts.insert(decl.env.clone(), m.environment_layout());
                env.present.insert(decl.env.clone());
                protocol.push(&format!("couple-{}", decl.name), Action::Couple(m));
                step_action.push(Some(k));
            }
            ActionDecl::Group(g) => {
                for p in &g.parts {
                    env.require_present(p, g.pos)?;
                }
                let (layout, map) = env.lab_layout(g)?;
                env.declare(&g.name, layout, g.pos)?;
                for p in &g.parts {
                    env.present.remove(p);
                }
                env.present.insert(g.name.clone());
                protocol.push(
                    &format!("group-{}", g.name),
                    Action::Group {
                        parts: g.parts.clone(),
                        name: g.name.clone(),
                        label_map: map,
                    },
                );
                step_action.push(Some(k));
            }
        }
        group_ready(&mut env, &mut labs, &mut protocol, &mut step_action, Some(k));
    }

    let mut statements = BTreeMap::new();
    for st in &s.statements {
        env.outcome(&st.observer, &st.outcome, st.pos)?;
        let prop = env.proposition(&st.prop, st.pos)?;
        let core_st = Statement::new(&st.name, &st.observer, &st.outcome, prop);
        if statements.insert(st.name.clone(), core_st).is_some() {
            return Err(Diagnostic::new(st.pos, format!("statement `{}` declared twice", st.name), "pick a distinct name"));
        }
    }

    let queries = s
        .queries
        .iter()
        .map(|q| {
            let pos = q.pos;
            Ok(match &q.kind {
                QueryKind::Born { targets, on } => {
                    in_scope(&env.scope(on, &state_over, pos)?, targets, &env, pos)?;
                    CompiledQuery::Born {
                        targets: targets.clone(),
                        on: on.clone(),
                    }
                }
                QueryKind::Certainty {
                    observer,
                    outcome,
                    prop,
                    semantics,
                } => {
                    env.outcome(observer, outcome, pos)?;
                    CompiledQuery::Certainty {
                        observer: observer.clone(),
                        outcome: outcome.clone(),
                        prop: env.proposition(prop, pos)?,
                        semantics: env.semantics(semantics, pos)?,
                    }
                }
                QueryKind::Audit { chain, semantics } => CompiledQuery::Audit {
                    chain: chain
                        .iter()
                        .map(|n| {
                            statements.get(n).cloned().ok_or_else(|| {
                                Diagnostic::new(pos, format!("unknown statement `{n}`"), format!("declare it: statement {n} observer=.. outcome=.. prop=\"..\""))
                            })
                        })
                        .collect::<CResult<_>>()?,
                    semantics: env.semantics(semantics, pos)?,
                },
                QueryKind::Compare {
                    models,
                    restrict,
                    apparatus,
                } => {
                    let scope = env.scope(&None, &state_over, pos)?;
                    in_scope(&scope, restrict, &env, pos)?;
                    in_scope(&scope, std::slice::from_ref(apparatus), &env, pos)?;
                    CompiledQuery::Compare {
                        models: models.iter().map(|m| env.named_model(m, pos)).collect::<CResult<_>>()?,
                        restrict: restrict.clone(),
                        apparatus: apparatus.clone(),
                    }
                }
                QueryKind::Triortho { parts, on } => {
                    let scope = env.scope(on, &state_over, pos)?;
                    for p in parts {
                        in_scope(&scope, p, &env, pos)?;
                    }
                    CompiledQuery::Triortho {
                        parts: parts.clone(),
                        on: on.clone(),
                    }
                }
                QueryKind::Rewrite { bases, on } => {
                    let scope = env.scope(on, &state_over, pos)?;
                    let bases = bases
                        .iter()
                        .map(|(s, b)| {
                            in_scope(&scope, std::slice::from_ref(s), &env, pos)?;
                            env.basis(b, s)
                        })
                        .collect::<CResult<_>>()?;
                    CompiledQuery::Rewrite { bases, on: on.clone() }
                }
                QueryKind::Relative { subsystem, basis, on } => {
                    in_scope(&env.scope(on, &state_over, pos)?, std::slice::from_ref(subsystem), &env, pos)?;
                    CompiledQuery::Relative {
                        basis: env.basis(basis, subsystem)?,
                        on: on.clone(),
                    }
                }
                QueryKind::Schmidt { left, right, on } => {
                    let scope = env.scope(on, &state_over, pos)?;
                    in_scope(&scope, left, &env, pos)?;
                    in_scope(&scope, right, &env, pos)?;
                    CompiledQuery::Schmidt {
                        left: left.clone(),
                        right: right.clone(),
                        on: on.clone(),
                    }
                }
            })
        })
        .collect::<CResult<Vec<_>>>()?;

    Ok(Compiled {
        protocol,
        step_action,
        states,
        queries,
    })
}
