//! Scenario syntax tree and its canonical text form.
//!
//! `Display` writes a scenario back in canonical layout; parsing that text
//! yields an equal `Scenario`. Source positions are diagnostic metadata and
//! never take part in equality.

use std::fmt::{self, Display, Formatter, Write};

/// 1-based line and column.
#[derive(Debug, Clone, Copy, Default, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Pos {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Pos {
    pub fn new(line: usize, col: usize) -> Self {
        Self { line, col }
    }
}

/// A non-negative real as written: `0.5`, `1/3`, `sqrt(2/3)`, `sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Real {
    Number(f64),
    Ratio(f64, f64),
    Sqrt(f64, Option<f64>),
}

impl Real {
    pub fn value(&self) -> f64 {
        match *self {
            Real::Number(x) => x,
            Real::Ratio(p, q) => p / q,
            Real::Sqrt(p, q) => (p / q.unwrap_or(1.0)).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Signed {
    pub negative: bool,
    pub value: Real,
}

impl Signed {
    pub fn value(&self) -> f64 {
        if self.negative {
            -self.value.value()
        } else {
            self.value.value()
        }
    }
}

/// `a`, `bi`, or `a+bi`; at least one part is present.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complex {
    pub re: Option<Signed>,
    pub im: Option<Signed>,
}

impl Complex {
    pub fn real(value: Real) -> Self {
        Self {
            re: Some(Signed { negative: false, value }),
            im: None,
        }
    }

    pub fn value(&self) -> (f64, f64) {
        (
            self.re.map_or(0.0, |s| s.value()),
            self.im.map_or(0.0, |s| s.value()),
        )
    }

    fn is_compound(&self) -> bool {
        self.re.is_some() && self.im.is_some()
    }
}

/// `[±] [coefficient] |l1,l2,…>`
#[derive(Debug, Clone, PartialEq)]
pub struct KetTerm {
    pub negative: bool,
    pub coefficient: Option<Complex>,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateExpr {
    pub terms: Vec<KetTerm>,
    pub pos: Pos,
}

/// One entry of a basis list: a declared (or derived) label, or explicit
/// coordinates in the computational basis.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisElem {
    Label(String),
    Coords { label: Option<String>, coords: Vec<Complex> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    pub elems: Vec<BasisElem>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupDecl {
    pub parts: Vec<String>,
    pub name: String,
    pub map: Vec<(Vec<String>, String)>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelDecl {
    pub name: String,
    pub env: String,
    pub over: Vec<String>,
    pub branches: Vec<Vec<String>>,
    pub pos: Pos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsystemKind {
    /// Part of the initial state.
    Subsystem,
    /// Attached in its ready level by the first measurement that uses it.
    Register,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    Subsystem {
        kind: SubsystemKind,
        name: String,
        labels: Vec<String>,
        pos: Pos,
    },
    Derive {
        subsystem: String,
        label: String,
        expr: StateExpr,
        pos: Pos,
    },
    /// Laboratory: grouped as soon as all parts exist.
    Lab(GroupDecl),
    Model(ModelDecl),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedState {
    pub name: String,
    pub over: Vec<String>,
    pub expr: StateExpr,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelRef {
    Named(String),
    Inline(ModelDecl),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionDecl {
    Premeasure {
        target: String,
        apparatus: String,
        basis: BasisSpec,
        outcomes: Vec<String>,
        ready: String,
        pos: Pos,
    },
    Couple {
        model: ModelRef,
        pos: Pos,
    },
    Group(GroupDecl),
}

impl ActionDecl {
    pub fn pos(&self) -> Pos {
        match self {
            ActionDecl::Premeasure { pos, .. } | ActionDecl::Couple { pos, .. } => *pos,
            ActionDecl::Group(g) => g.pos,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantifierSpec {
    WillObtain,
    IsInState,
}

impl QuantifierSpec {
    pub fn keyword(&self) -> &'static str {
        match self {
            QuantifierSpec::WillObtain => "will_obtain",
            QuantifierSpec::IsInState => "is_in_state",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropSpec {
    pub subject: String,
    pub quantifier: QuantifierSpec,
    pub predicate: String,
    /// Basis for `is_in_state`; defaults to the subject's own labels.
    pub basis: Option<BasisSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatementDecl {
    pub name: String,
    pub observer: String,
    pub outcome: String,
    pub prop: PropSpec,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SemanticsSpec {
    Premeasurement,
    Decoherent(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryKind {
    Born {
        targets: Vec<String>,
        on: Option<String>,
    },
    Certainty {
        observer: String,
        outcome: String,
        prop: PropSpec,
        semantics: SemanticsSpec,
    },
    Audit {
        chain: Vec<String>,
        semantics: SemanticsSpec,
    },
    Compare {
        models: Vec<String>,
        restrict: Vec<String>,
        apparatus: String,
    },
    Triortho {
        parts: [Vec<String>; 3],
        on: Option<String>,
    },
    Rewrite {
        bases: Vec<(String, BasisSpec)>,
        on: Option<String>,
    },
    Relative {
        subsystem: String,
        basis: BasisSpec,
        on: Option<String>,
    },
    Schmidt {
        left: Vec<String>,
        right: Vec<String>,
        on: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub kind: QueryKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub decls: Vec<Decl>,
    pub init: StateExpr,
    pub states: Vec<NamedState>,
    pub actions: Vec<ActionDecl>,
    pub statements: Vec<StatementDecl>,
    pub queries: Vec<Query>,
}

// ---------------------------------------------------------------- display

fn num(x: f64) -> String {
    format!("{x}")
}

impl Display for Real {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match *self {
            Real::Number(x) => f.write_str(&num(x)),
            Real::Ratio(p, q) => write!(f, "{}/{}", num(p), num(q)),
            Real::Sqrt(p, None) => write!(f, "sqrt({})", num(p)),
            Real::Sqrt(p, Some(q)) => write!(f, "sqrt({}/{})", num(p), num(q)),
        }
    }
}

impl Display for Complex {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if let Some(re) = self.re {
            write!(f, "{}{}", if re.negative { "-" } else { "" }, re.value)?;
        }
        if let Some(im) = self.im {
            let sign = match (im.negative, self.re.is_some()) {
                (true, _) => "-",
                (false, true) => "+",
                (false, false) => "",
            };
            match im.value {
                Real::Number(x) if x == 1.0 => write!(f, "{sign}i")?,
                v => write!(f, "{sign}{v}i")?,
            }
        }
        Ok(())
    }
}

impl Display for StateExpr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        for (k, t) in self.terms.iter().enumerate() {
            match (k, t.negative) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            match &t.coefficient {
                // a leading `-` directly before a number would read as its sign
                Some(c) if c.is_compound() || (k == 0 && t.negative) => write!(f, "({c})")?,
                Some(c) => write!(f, "{c}")?,
                None => {}
            }
            write!(f, "|{}>", t.labels.join(","))?;
        }
        Ok(())
    }
}

fn list(open: char, items: &[String], close: char) -> String {
    format!("{open}{}{close}", items.join(","))
}

fn tuple(items: &[String]) -> String {
    list('(', items, ')')
}

fn set(items: &[String]) -> String {
    list('{', items, '}')
}

impl Display for BasisSpec {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self
            .elems
            .iter()
            .map(|e| match e {
                BasisElem::Label(l) => l.clone(),
                BasisElem::Coords { label, coords } => {
                    let c: Vec<String> = coords.iter().map(|c| c.to_string()).collect();
                    match label {
                        Some(l) => format!("{l}:{}", tuple(&c)),
                        None => tuple(&c),
                    }
                }
            })
            .collect();
        f.write_str(&set(&items))
    }
}

impl Display for GroupDecl {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let map: Vec<String> = self.map.iter().map(|(k, v)| format!("{}:{v}", tuple(k))).collect();
        write!(f, "group parts={} as {} map={}", tuple(&self.parts), self.name, set(&map))
    }
}

impl ModelDecl {
    fn args(&self) -> String {
        let branches: Vec<String> = self.branches.iter().map(|b| tuple(b)).collect();
        format!("env={} over={} branches={}", self.env, tuple(&self.over), set(&branches))
    }
}

impl Display for PropSpec {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "prop=\"{} {} {}\"", self.subject, self.quantifier.keyword(), self.predicate)?;
        if let Some(b) = &self.basis {
            write!(f, " basis={b}")?;
        }
        Ok(())
    }
}

impl Display for SemanticsSpec {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            SemanticsSpec::Premeasurement => f.write_str("semantics=premeasurement"),
            SemanticsSpec::Decoherent(models) => write!(f, "semantics=decoherent models={}", tuple(models)),
        }
    }
}

fn on(state: &Option<String>) -> String {
    state.as_ref().map(|s| format!(" on={s}")).unwrap_or_default()
}

impl Display for QueryKind {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            QueryKind::Born { targets, on: o } => write!(f, "query born targets={}{}", tuple(targets), on(o)),
            QueryKind::Certainty {
                observer,
                outcome,
                prop,
                semantics,
            } => write!(f, "query certainty observer={observer} outcome={outcome} {prop} {semantics}"),
            QueryKind::Audit { chain, semantics } => write!(f, "query audit chain={} {semantics}", tuple(chain)),
            QueryKind::Compare {
                models,
                restrict,
                apparatus,
            } => write!(
                f,
                "query compare models={} restrict={} apparatus={apparatus}",
                tuple(models),
                tuple(restrict)
            ),
            QueryKind::Triortho { parts, on: o } => {
                let p: Vec<String> = parts.iter().map(|p| tuple(p)).collect();
                write!(f, "query triortho parts={}{}", tuple(&p), on(o))
            }
            QueryKind::Rewrite { bases, on: o } => {
                let b: Vec<String> = bases.iter().map(|(s, b)| format!("{s}:{b}")).collect();
                write!(f, "query rewrite bases={}{}", tuple(&b), on(o))
            }
            QueryKind::Relative { subsystem, basis, on: o } => {
                write!(f, "query relative subsystem={subsystem} basis={basis}{}", on(o))
            }
            QueryKind::Schmidt { left, right, on: o } => {
                write!(f, "query schmidt left={} right={}{}", tuple(left), tuple(right), on(o))
            }
        }
    }
}

impl Display for Scenario {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let mut out = String::from("[layout]\n");
        for d in &self.decls {
            match d {
                Decl::Subsystem { kind, name, labels, .. } => {
                    let word = match kind {
                        SubsystemKind::Subsystem => "subsystem",
                        SubsystemKind::Register => "register",
                    };
                    writeln!(out, "{word} {name} {}", set(labels))?;
                }
                Decl::Derive {
                    subsystem, label, expr, ..
                } => writeln!(out, "derive {subsystem} {label} = {expr}")?,
                Decl::Lab(g) => writeln!(out, "{g}")?,
                Decl::Model(m) => writeln!(out, "model {} {}", m.name, m.args())?,
            }
        }
        writeln!(out, "\n[state]\nstate: {}", self.init)?;
        for s in &self.states {
            writeln!(out, "state {} over={}: {}", s.name, tuple(&s.over), s.expr)?;
        }
        out.push_str("\n[actions]\n");
        for a in &self.actions {
            match a {
                ActionDecl::Premeasure {
                    target,
                    apparatus,
                    basis,
                    outcomes,
                    ready,
                    ..
                } => writeln!(
                    out,
                    "premeasure target={target} apparatus={apparatus} basis={basis} outcomes={} ready={ready}",
                    set(outcomes)
                )?,
                ActionDecl::Couple {
                    model: ModelRef::Named(m),
                    ..
                } => writeln!(out, "couple model={m}")?,
                ActionDecl::Couple {
                    model: ModelRef::Inline(m),
                    ..
                } => writeln!(out, "couple {}", m.args())?,
                ActionDecl::Group(g) => writeln!(out, "{g}")?,
            }
        }
        out.push_str("\n[queries]\n");
        for s in &self.statements {
            writeln!(
                out,
                "statement {} observer={} outcome={} {}",
                s.name, s.observer, s.outcome, s.prop
            )?;
        }
        for q in &self.queries {
            writeln!(out, "{}", q.kind)?;
        }
        f.write_str(&out)
    }
}
