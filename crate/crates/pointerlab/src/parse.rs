//! Line-oriented scenario grammar.
//!
//! ```text
//! [layout]      subsystem | register | derive | group | model
//! [state]       state: <expr>        state NAME over=(..): <expr>
//! [actions]     premeasure | couple | group
//! [queries]     statement | query born|certainty|audit|compare|triortho|rewrite|relative|schmidt
//! ```
//! `#` starts a comment. Arguments are `key=value`; values are words,
//! quoted strings, `{..}` sets or `(..)` tuples, whose items may be
//! `key:value` pairs.

use std::collections::BTreeSet;

use crate::ast::*;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub message: String,
    /// One-line suggestion for fixing the input.
    pub hint: String,
}

impl Diagnostic {
    pub fn new(pos: Pos, message: impl Into<String>, hint: impl Into<String>) -> Self {
        Self {
            line: pos.line,
            col: pos.col,
            message: message.into(),
            hint: hint.into(),
        }
    }

    /// Multi-line rendering with the offending source line and a caret.
    pub fn render(&self, file: &str, source: &str) -> String {
        let text = source.lines().nth(self.line.saturating_sub(1)).unwrap_or("");
        let gutter = self.line.to_string().len();
        format!(
            "error: {msg}\n{pad}--> {file}:{line}:{col}\n{pad} |\n{line} | {text}\n{pad} | {caret:>width$}\n{pad} = hint: {hint}\n",
            msg = self.message,
            pad = " ".repeat(gutter),
            line = self.line,
            col = self.col,
            caret = "^",
            width = self.col.max(1),
            hint = self.hint,
        )
    }
}

type PResult<T> = Result<T, Diagnostic>;

// ------------------------------------------------------------------ lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Punct(char),
}

const PUNCT: &str = "{}(),:=";

fn is_word_char(c: char) -> bool {
    !c.is_whitespace() && !PUNCT.contains(c) && !"|<>\"#".contains(c)
}

/// Tokens of one line; `offset` is the 0-based char column of `text[0]`.
fn lex(text: &str, line: usize, offset: usize) -> PResult<Vec<(Tok, Pos)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos::new(line, offset + i + 1);
        if c.is_whitespace() {
            i += 1;
        } else if PUNCT.contains(c) {
            out.push((Tok::Punct(c), pos));
            i += 1;
        } else if c == '"' {
            let start = i + 1;
            let end = chars[start..]
                .iter()
                .position(|&c| c == '"')
                .map(|k| start + k)
                .ok_or_else(|| Diagnostic::new(pos, "unterminated string", "close the string with `\"`"))?;
            out.push((Tok::Str(chars[start..end].iter().collect()), pos));
            i = end + 1;
        } else if is_word_char(c) {
            let mut word = String::new();
            while i < chars.len() {
                let c = chars[i];
                if c == '(' && word.ends_with("sqrt") {
                    let close = chars[i..].iter().position(|&c| c == ')').map(|k| i + k).ok_or_else(|| {
                        Diagnostic::new(Pos::new(line, offset + i + 1), "unclosed `sqrt(`", "write sqrt(p/q)")
                    })?;
                    word.extend(&chars[i..=close]);
                    i = close + 1;
                } else if is_word_char(c) {
                    word.push(c);
                    i += 1;
                } else {
                    break;
                }
            }
            out.push((Tok::Word(word), pos));
        } else {
            return Err(Diagnostic::new(
                pos,
                format!("unexpected character `{c}`"),
                "kets (`|..>`) are only allowed in state and derive expressions",
            ));
        }
    }
    Ok(out)
}

// ------------------------------------------------------------ value trees

#[derive(Debug, Clone)]
enum Kind {
    Word(String),
    Str(String),
    Set(Vec<Item>),
    Tuple(Vec<Item>),
}

#[derive(Debug, Clone)]
struct Val {
    kind: Kind,
    pos: Pos,
}

#[derive(Debug, Clone)]
struct Item {
    key: Val,
    val: Option<Val>,
}

#[derive(Debug)]
struct Arg {
    key: Option<(String, Pos)>,
    value: Val,
}

struct Toks {
    toks: Vec<(Tok, Pos)>,
    i: usize,
    end: Pos,
}

impl Toks {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.i).map_or(self.end, |(_, p)| *p)
    }

    fn next(&mut self) -> Option<(Tok, Pos)> {
        let t = self.toks.get(self.i).cloned();
        self.i += 1;
        t
    }

    fn value(&mut self) -> PResult<Val> {
        let pos = self.pos();
        match self.next() {
            Some((Tok::Word(w), _)) => Ok(Val { kind: Kind::Word(w), pos }),
            Some((Tok::Str(s), _)) => Ok(Val { kind: Kind::Str(s), pos }),
            Some((Tok::Punct(open @ ('{' | '(')), _)) => {
                let close = if open == '{' { '}' } else { ')' };
                let mut items = Vec::new();
                if self.peek() == Some(&Tok::Punct(close)) {
                    self.next();
                } else {
                    loop {
                        let key = self.value()?;
                        let val = if self.peek() == Some(&Tok::Punct(':')) {
                            self.next();
                            Some(self.value()?)
                        } else {
                            None
                        };
                        items.push(Item { key, val });
                        let at = self.pos();
                        match self.next() {
                            Some((Tok::Punct(','), _)) => continue,
                            Some((Tok::Punct(c), _)) if c == close => break,
                            _ => {
                                return Err(Diagnostic::new(
                                    at,
                                    format!("expected `,` or `{close}`"),
                                    format!("close the list opened at column {} with `{close}`", pos.col),
                                ))
                            }
                        }
                    }
                }
                let kind = if open == '{' { Kind::Set(items) } else { Kind::Tuple(items) };
                Ok(Val { kind, pos })
            }
            Some((Tok::Punct(c), _)) => Err(Diagnostic::new(
                pos,
                format!("unexpected `{c}`"),
                "values are words, \"strings\", {sets} or (tuples)",
            )),
            None => Err(Diagnostic::new(pos, "missing value", "every `key=` needs a value")),
        }
    }
}

/// `name arg arg key=value ...`
struct Directive {
    name: String,
    pos: Pos,
    args: Vec<Arg>,
}

fn directive(text: &str, line: usize, offset: usize) -> PResult<Directive> {
    let toks = lex(text, line, offset)?;
    let end = Pos::new(line, offset + text.chars().count() + 1);
    let mut t = Toks { toks, i: 0, end };
    let (name, pos) = match t.next() {
        Some((Tok::Word(w), p)) => (w, p),
        _ => return Err(Diagnostic::new(t.end, "expected a directive", "lines start with a directive name")),
    };
    let mut args = Vec::new();
    while t.peek().is_some() {
        let is_key = matches!(t.peek(), Some(Tok::Word(_))) && t.toks.get(t.i + 1).map(|(t, _)| t) == Some(&Tok::Punct('='));
        if is_key {
            let (Some((Tok::Word(k), kp)), _) = (t.next(), t.next()) else {
                unreachable!()
            };
            args.push(Arg {
                key: Some((k, kp)),
                value: t.value()?,
            });
        } else {
            args.push(Arg { key: None, value: t.value()? });
        }
    }
    Ok(Directive { name, pos, args })
}

/// Keyed arguments of one directive, checked for unknown and repeated keys.
struct Args {
    directive: String,
    pos: Pos,
    positional: Vec<Val>,
    keyed: Vec<(String, Pos, Val)>,
}

impl Args {
    fn new(d: Directive, allowed: &[&str]) -> PResult<Self> {
        let mut positional = Vec::new();
        let mut keyed: Vec<(String, Pos, Val)> = Vec::new();
        for a in d.args {
            match a.key {
                None => positional.push(a.value),
                Some((k, p)) => {
                    if !allowed.contains(&k.as_str()) {
                        return Err(Diagnostic::new(
                            p,
                            format!("unknown argument `{k}` for `{}`", d.name),
                            format!("expected one of: {}", allowed.join(", ")),
                        ));
                    }
                    if keyed.iter().any(|(x, _, _)| *x == k) {
                        return Err(Diagnostic::new(p, format!("argument `{k}` given twice"), "remove one of them"));
                    }
                    keyed.push((k, p, a.value));
                }
            }
        }
        Ok(Self {
            directive: d.name,
            pos: d.pos,
            positional,
            keyed,
        })
    }

    fn no_positional(&self) -> PResult<()> {
        match self.positional.first() {
            Some(v) => Err(Diagnostic::new(
                v.pos,
                format!("unexpected bare value in `{}`", self.directive),
                "arguments are written key=value",
            )),
            None => Ok(()),
        }
    }

    fn opt(&mut self, key: &str) -> Option<Val> {
        let k = self.keyed.iter().position(|(x, _, _)| x == key)?;
        Some(self.keyed.remove(k).2)
    }

    fn req(&mut self, key: &str, example: &str) -> PResult<Val> {
        self.opt(key).ok_or_else(|| {
            Diagnostic::new(
                self.pos,
                format!("`{}` needs `{key}=`", self.directive),
                format!("add e.g. {key}={example}"),
            )
        })
    }
}

fn word(v: &Val, what: &str) -> PResult<String> {
    match &v.kind {
        Kind::Word(w) => Ok(w.clone()),
        _ => Err(Diagnostic::new(v.pos, format!("expected {what}"), format!("write a single name for the {what}"))),
    }
}

fn item_word(i: &Item, what: &str) -> PResult<String> {
    if let Some(v) = &i.val {
        return Err(Diagnostic::new(v.pos, format!("unexpected `:` in list of {what}s"), "list plain names"));
    }
    word(&i.key, what)
}

/// `(a,b)`, `{a,b}` or a bare `a`.
fn words(v: &Val, what: &str) -> PResult<Vec<String>> {
    match &v.kind {
        Kind::Word(w) => Ok(vec![w.clone()]),
        Kind::Set(items) | Kind::Tuple(items) => items.iter().map(|i| item_word(i, what)).collect(),
        Kind::Str(_) => Err(Diagnostic::new(v.pos, format!("expected a list of {what}s"), "write (a,b,...)")),
    }
}

fn nonempty_words(v: &Val, what: &str) -> PResult<Vec<String>> {
    let w = words(v, what)?;
    if w.is_empty() {
        return Err(Diagnostic::new(v.pos, format!("empty list of {what}s"), "list at least one name"));
    }
    let mut seen = BTreeSet::new();
    for x in &w {
        if !seen.insert(x) {
            return Err(Diagnostic::new(v.pos, format!("`{x}` listed twice"), "names in a list must be distinct"));
        }
    }
    Ok(w)
}

fn tuples(v: &Val, what: &str) -> PResult<Vec<Vec<String>>> {
    match &v.kind {
        Kind::Set(items) | Kind::Tuple(items) => items
            .iter()
            .map(|i| {
                if let Some(x) = &i.val {
                    return Err(Diagnostic::new(x.pos, "unexpected `:`", format!("list {what}s as (a,b,...)")));
                }
                match &i.key.kind {
                    Kind::Tuple(_) => nonempty_words(&i.key, "label"),
                    _ => Err(Diagnostic::new(i.key.pos, format!("expected a {what} tuple"), "write (a,b,...)")),
                }
            })
            .collect(),
        _ => Err(Diagnostic::new(v.pos, format!("expected a set of {what}s"), "write {(a,b),(c,d)}")),
    }
}

fn label_map(v: &Val) -> PResult<Vec<(Vec<String>, String)>> {
    let Kind::Set(items) = &v.kind else {
        return Err(Diagnostic::new(v.pos, "expected a label map", "write map={(head,F1):h,(tail,F2):t}"));
    };
    items
        .iter()
        .map(|i| {
            let to = i
                .val
                .as_ref()
                .ok_or_else(|| Diagnostic::new(i.key.pos, "map entry without target label", "write (a,b):name"))?;
            Ok((nonempty_words(&i.key, "label")?, word(to, "label")?))
        })
        .collect()
}

fn basis(v: &Val) -> PResult<BasisSpec> {
    let Kind::Set(items) = &v.kind else {
        return Err(Diagnostic::new(
            v.pos,
            "expected a basis",
            "write {label,label} or {(c1,c2),(c3,c4)} with complex coordinates",
        ));
    };
    if items.is_empty() {
        return Err(Diagnostic::new(v.pos, "empty basis", "list at least one basis vector"));
    }
    let coords = |t: &Val| -> PResult<Vec<Complex>> {
        let Kind::Tuple(cs) = &t.kind else { unreachable!() };
        cs.iter()
            .map(|c| match (&c.key.kind, &c.val) {
                (Kind::Word(w), None) => parse_complex(w, c.key.pos),
                _ => Err(Diagnostic::new(c.key.pos, "expected a complex coordinate", "write e.g. (sqrt(1/2),-sqrt(1/2))")),
            })
            .collect()
    };
    let elems = items
        .iter()
        .map(|i| match (&i.key.kind, &i.val) {
            (Kind::Word(w), None) => Ok(BasisElem::Label(w.clone())),
            (Kind::Tuple(_), None) => Ok(BasisElem::Coords {
                label: None,
                coords: coords(&i.key)?,
            }),
            (Kind::Word(w), Some(t)) if matches!(t.kind, Kind::Tuple(_)) => Ok(BasisElem::Coords {
                label: Some(w.clone()),
                coords: coords(t)?,
            }),
            _ => Err(Diagnostic::new(i.key.pos, "malformed basis entry", "write a label, (coords) or label:(coords)")),
        })
        .collect::<PResult<Vec<_>>>()?;
    Ok(BasisSpec { elems, pos: v.pos })
}

// -------------------------------------------------------- complex literals

const COMPLEX_HINT: &str = "write complex numbers as a+bi, e.g. 0.5, -1/3, sqrt(2/3), 0.5-0.5i, sqrt(1/2)i";

struct Cursor<'a> {
    chars: &'a [char],
    i: usize,
    pos: Pos,
    text: String,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.i).copied()
    }

    fn err(&self, what: &str) -> Diagnostic {
        Diagnostic::new(
            Pos::new(self.pos.line, self.pos.col + self.i),
            format!("malformed complex literal `{}`: {what}", self.text),
            COMPLEX_HINT,
        )
    }

    fn number(&mut self) -> PResult<f64> {
        let start = self.i;
        let digits = |c: &mut Self| {
            let s = c.i;
            while c.peek().is_some_and(|d| d.is_ascii_digit()) {
                c.i += 1;
            }
            c.i - s
        };
        let mut n = digits(self);
        if self.peek() == Some('.') {
            self.i += 1;
            n += digits(self);
        }
        if n == 0 {
            self.i = start;
            return Err(self.err("expected a number"));
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            self.i += 1;
            if matches!(self.peek(), Some('+' | '-')) {
                self.i += 1;
            }
            if digits(self) == 0 {
                return Err(self.err("expected exponent digits"));
            }
        }
        let s: String = self.chars[start..self.i].iter().collect();
        s.parse().map_err(|_| self.err("expected a number"))
    }

    fn denominator(&mut self) -> PResult<Option<f64>> {
        if self.peek() != Some('/') {
            return Ok(None);
        }
        self.i += 1;
        let q = self.number()?;
        if q == 0.0 {
            return Err(self.err("zero denominator"));
        }
        Ok(Some(q))
    }

    fn real(&mut self) -> PResult<Real> {
        if self.chars[self.i..].starts_with(&['s', 'q', 'r', 't', '(']) {
            self.i += 5;
            let p = self.number()?;
            let q = self.denominator()?;
            if self.peek() != Some(')') {
                return Err(self.err("expected `)`"));
            }
            self.i += 1;
            return Ok(Real::Sqrt(p, q));
        }
        let p = self.number()?;
        Ok(match self.denominator()? {
            Some(q) => Real::Ratio(p, q),
            None => Real::Number(p),
        })
    }

    /// `[±] real [i]` or `[±] i`; returns (signed, imaginary).
    fn term(&mut self, sign_required: bool) -> PResult<(Signed, bool)> {
        let negative = match self.peek() {
            Some('-') => {
                self.i += 1;
                true
            }
            Some('+') => {
                self.i += 1;
                false
            }
            _ if sign_required => return Err(self.err("expected `+` or `-`")),
            _ => false,
        };
        if self.peek() == Some('i') {
            self.i += 1;
            return Ok((Signed { negative, value: Real::Number(1.0) }, true));
        }
        let value = self.real()?;
        let imaginary = self.peek() == Some('i');
        if imaginary {
            self.i += 1;
        }
        Ok((Signed { negative, value }, imaginary))
    }
}

/// Parse `a`, `bi` or `a+bi` (with `p/q` and `sqrt(p/q)` forms).
pub fn parse_complex(text: &str, pos: Pos) -> PResult<Complex> {
    let chars: Vec<char> = text.chars().collect();
    let mut c = Cursor {
        chars: &chars,
        i: 0,
        pos,
        text: text.to_string(),
    };
    if chars.is_empty() {
        return Err(c.err("empty"));
    }
    let (first, first_im) = c.term(false)?;
    let mut out = if first_im {
        Complex { re: None, im: Some(first) }
    } else {
        Complex { re: Some(first), im: None }
    };
    if c.peek().is_some() {
        if first_im {
            return Err(c.err("the real part comes first"));
        }
        let (second, second_im) = c.term(true)?;
        if !second_im {
            return Err(c.err("second part must be imaginary"));
        }
        out.im = Some(second);
    }
    if c.peek().is_some() {
        return Err(c.err("unexpected trailing characters"));
    }
    Ok(out)
}

// ------------------------------------------------------- ket expressions

/// `[±] [coef] |l,..> (± [coef] |l,..>)*`; `offset` is the 0-based column
/// of `text[0]`.
pub fn parse_state_expr(text: &str, line: usize, offset: usize) -> PResult<StateExpr> {
    let chars: Vec<char> = text.chars().collect();
    let at = |i: usize| Pos::new(line, offset + i + 1);
    let skip = |i: &mut usize| {
        while chars.get(*i).is_some_and(|c| c.is_whitespace()) {
            *i += 1;
        }
    };
    let mut i = 0;
    skip(&mut i);
    let start = i;
    let mut terms = Vec::new();
    while i < chars.len() {
        let negative = match chars[i] {
            '-' if terms.is_empty() && !chars.get(i + 1).is_some_and(|c| c.is_ascii_digit() || *c == 's' || *c == '.') => {
                i += 1;
                true
            }
            '+' | '-' if !terms.is_empty() => {
                i += 1;
                chars[i - 1] == '-'
            }
            _ if terms.is_empty() => false,
            c => {
                return Err(Diagnostic::new(
                    at(i),
                    format!("expected `+` or `-` between terms, found `{c}`"),
                    "separate kets with + or -, e.g. sqrt(1/3)|a> + sqrt(2/3)|b>",
                ))
            }
        };
        skip(&mut i);
        let coefficient = if chars.get(i) == Some(&'(') {
            let mut depth = 0usize;
            let close = chars[i..]
                .iter()
                .position(|&c| {
                    match c {
                        '(' => depth += 1,
                        ')' => depth -= 1,
                        _ => {}
                    }
                    depth == 0
                })
                .map(|k| i + k)
                .ok_or_else(|| Diagnostic::new(at(i), "unclosed `(`", "parenthesize complex coefficients: (a+bi)|..>"))?;
            let inner: String = chars[i + 1..close].iter().collect();
            let c = parse_complex(inner.trim(), at(i + 1))?;
            i = close + 1;
            Some(c)
        } else {
            let s = i;
            while chars.get(i).is_some_and(|&c| c != '|' && c != '*' && !c.is_whitespace()) {
                i += 1;
            }
            if i == s {
                None
            } else {
                let text: String = chars[s..i].iter().collect();
                Some(parse_complex(&text, at(s))?)
            }
        };
        skip(&mut i);
        if chars.get(i) == Some(&'*') {
            i += 1;
            skip(&mut i);
        }
        if chars.get(i) != Some(&'|') {
            return Err(Diagnostic::new(
                at(i),
                "expected a ket `|..>`",
                "write terms as coefficient|label,label>",
            ));
        }
        let open = i;
        let close = chars[i..].iter().position(|&c| c == '>').map(|k| i + k).ok_or_else(|| {
            Diagnostic::new(at(open), "unclosed ket", "close the ket with `>`")
        })?;
        let body: String = chars[open + 1..close].iter().collect();
        let labels: Vec<String> = body.split(',').map(|l| l.trim().to_string()).collect();
        if labels.iter().any(String::is_empty) {
            return Err(Diagnostic::new(at(open), "empty label in ket", "write one label per subsystem: |a,b>"));
        }
        terms.push(KetTerm {
            negative,
            coefficient,
            labels,
        });
        i = close + 1;
        skip(&mut i);
    }
    if terms.is_empty() {
        return Err(Diagnostic::new(at(start), "empty state expression", "write e.g. sqrt(1/2)|a> + sqrt(1/2)|b>"));
    }
    Ok(StateExpr { terms, pos: at(start) })
}

// -------------------------------------------------------------- directives

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Layout,
    State,
    Actions,
    Queries,
}

impl Section {
    fn directives(&self) -> &'static str {
        match self {
            Section::Layout => "subsystem, register, derive, group, model",
            Section::State => "state",
            Section::Actions => "premeasure, couple, group",
            Section::Queries => "statement, query",
        }
    }
}

fn subsystem_decl(d: Directive, kind: SubsystemKind) -> PResult<Decl> {
    let a = Args::new(d, &[])?;
    let [name, labels] = a.positional.as_slice() else {
        return Err(Diagnostic::new(a.pos, format!("`{}` takes a name and a label set", a.directive), "write e.g. subsystem R {head, tail}"));
    };
    if !matches!(labels.kind, Kind::Set(_)) {
        return Err(Diagnostic::new(labels.pos, "expected a label set", "write {label, label, ...}"));
    }
    Ok(Decl::Subsystem {
        kind,
        name: word(name, "subsystem name")?,
        labels: nonempty_words(labels, "label")?,
        pos: a.pos,
    })
}

fn group_decl(d: Directive) -> PResult<GroupDecl> {
    let mut a = Args::new(d, &["parts", "map"])?;
    let parts = nonempty_words(&a.req("parts", "(R,Fbar)")?, "subsystem")?;
    let map = label_map(&a.req("map", "{(head,F1):h}")?)?;
    let name = match a.positional.as_slice() {
        [kw, name] if matches!(&kw.kind, Kind::Word(w) if w == "as") => word(name, "laboratory name")?,
        _ => return Err(Diagnostic::new(a.pos, "`group` needs `as NAME`", "write group parts=(R,Fbar) as Lbar map={...}")),
    };
    Ok(GroupDecl {
        parts,
        name,
        map,
        pos: a.pos,
    })
}

fn model_args(a: &mut Args, name: Option<String>) -> PResult<ModelDecl> {
    let env = word(&a.req("env", "E")?, "environment name")?;
    let over = nonempty_words(&a.req("over", "(R,S,A)")?, "subsystem")?;
    let branches = tuples(&a.req("branches", "{(head,A1),(tail,A2)}")?, "branch")?;
    Ok(ModelDecl {
        name: name.unwrap_or_else(|| env.clone()),
        env,
        over,
        branches,
        pos: a.pos,
    })
}

fn model_decl(d: Directive) -> PResult<ModelDecl> {
    let mut a = Args::new(d, &["env", "over", "branches"])?;
    let name = match a.positional.as_slice() {
        [n] => word(n, "model name")?,
        _ => return Err(Diagnostic::new(a.pos, "`model` takes one name", "write model U_E env=E over=(..) branches={..}")),
    };
    model_args(&mut a, Some(name))
}

fn premeasure(d: Directive) -> PResult<ActionDecl> {
    let mut a = Args::new(d, &["target", "apparatus", "basis", "outcomes", "ready"])?;
    a.no_positional()?;
    Ok(ActionDecl::Premeasure {
        target: word(&a.req("target", "R")?, "target subsystem")?,
        apparatus: word(&a.req("apparatus", "Fbar")?, "apparatus register")?,
        basis: basis(&a.req("basis", "{head,tail}")?)?,
        outcomes: nonempty_words(&a.req("outcomes", "{F1,F2}")?, "outcome label")?,
        ready: word(&a.req("ready", "F0")?, "ready label")?,
        pos: a.pos,
    })
}

fn couple(d: Directive) -> PResult<ActionDecl> {
    let mut a = Args::new(d, &["model", "env", "over", "branches"])?;
    a.no_positional()?;
    let pos = a.pos;
    let model = match a.opt("model") {
        Some(m) => {
            if let Some((k, p, _)) = a.keyed.first() {
                return Err(Diagnostic::new(*p, format!("`{k}` conflicts with `model=`"), "name a declared model or give env/over/branches inline, not both"));
            }
            ModelRef::Named(word(&m, "model name")?)
        }
        None => ModelRef::Inline(model_args(&mut a, None)?),
    };
    Ok(ActionDecl::Couple { model, pos })
}

fn prop(v: &Val, basis_val: Option<Val>) -> PResult<PropSpec> {
    let Kind::Str(s) = &v.kind else {
        return Err(Diagnostic::new(v.pos, "expected a quoted proposition", "write prop=\"W will_obtain fail\""));
    };
    let parts: Vec<&str> = s.split_whitespace().collect();
    let [subject, q, predicate] = parts.as_slice() else {
        return Err(Diagnostic::new(v.pos, format!("malformed proposition \"{s}\""), "write \"SUBJECT will_obtain LABEL\" or \"SUBJECT is_in_state LABEL\""));
    };
    let quantifier = match *q {
        "will_obtain" => QuantifierSpec::WillObtain,
        "is_in_state" => QuantifierSpec::IsInState,
        other => {
            return Err(Diagnostic::new(v.pos, format!("unknown quantifier `{other}`"), "use will_obtain or is_in_state"))
        }
    };
    let basis = basis_val.map(|b| basis(&b)).transpose()?;
    if basis.is_some() && quantifier == QuantifierSpec::WillObtain {
        return Err(Diagnostic::new(v.pos, "will_obtain uses the agent's own basis", "drop `basis=`"));
    }
    Ok(PropSpec {
        subject: subject.to_string(),
        quantifier,
        predicate: predicate.to_string(),
        basis,
    })
}

fn semantics(a: &mut Args) -> PResult<SemanticsSpec> {
    let s = a.req("semantics", "premeasurement")?;
    let models = a.opt("models");
    match (word(&s, "semantics")?.as_str(), models) {
        ("premeasurement", None) => Ok(SemanticsSpec::Premeasurement),
        ("premeasurement", Some(m)) => Err(Diagnostic::new(m.pos, "models only apply to decoherent semantics", "drop `models=` or use semantics=decoherent")),
        ("decoherent", Some(m)) => Ok(SemanticsSpec::Decoherent(nonempty_words(&m, "model")?)),
        ("decoherent", None) => Err(Diagnostic::new(s.pos, "decoherent semantics needs at least one environment model", "add models=(U_E,...)")),
        (other, _) => Err(Diagnostic::new(s.pos, format!("unknown semantics `{other}`"), "use premeasurement or decoherent")),
    }
}

fn statement(d: Directive) -> PResult<StatementDecl> {
    let mut a = Args::new(d, &["observer", "outcome", "prop", "basis"])?;
    let name = match a.positional.as_slice() {
        [n] => word(n, "statement name")?,
        _ => return Err(Diagnostic::new(a.pos, "`statement` takes one name", "write statement s1 observer=.. outcome=.. prop=\"..\"")),
    };
    let observer = word(&a.req("observer", "Fbar")?, "observer")?;
    let outcome = word(&a.req("outcome", "Fbar2")?, "outcome")?;
    let p = a.req("prop", "\"W will_obtain fail\"")?;
    let b = a.opt("basis");
    Ok(StatementDecl {
        name,
        observer,
        outcome,
        prop: prop(&p, b)?,
        pos: a.pos,
    })
}

fn on(a: &mut Args) -> PResult<Option<String>> {
    a.opt("on").map(|v| word(&v, "state name")).transpose()
}

fn query(d: Directive) -> PResult<Query> {
    let kind_val = d.args.first().filter(|a| a.key.is_none()).map(|a| a.value.clone());
    let Some(kind_val) = kind_val else {
        return Err(Diagnostic::new(d.pos, "`query` needs a kind", "write e.g. query born targets=(Wbar,W)"));
    };
    let mut d = d;
    d.args.remove(0);
    let kind = word(&kind_val, "query kind")?;
    let allowed: &[&str] = match kind.as_str() {
        "born" => &["targets", "on"],
        "certainty" => &["observer", "outcome", "prop", "basis", "semantics", "models"],
        "audit" => &["chain", "semantics", "models"],
        "compare" => &["models", "restrict", "apparatus"],
        "triortho" => &["parts", "on"],
        "rewrite" => &["bases", "on"],
        "relative" => &["subsystem", "basis", "on"],
        "schmidt" => &["left", "right", "on"],
        other => {
            return Err(Diagnostic::new(
                kind_val.pos,
                format!("unknown query `{other}`"),
                "use born, certainty, audit, compare, triortho, rewrite, relative or schmidt",
            ))
        }
    };
    let mut a = Args::new(d, allowed)?;
    a.no_positional()?;
    let pos = a.pos;
    let q = match kind.as_str() {
        "born" => QueryKind::Born {
            targets: nonempty_words(&a.req("targets", "(Wbar,W)")?, "subsystem")?,
            on: on(&mut a)?,
        },
        "certainty" => {
            let observer = word(&a.req("observer", "Fbar")?, "observer")?;
            let outcome = word(&a.req("outcome", "Fbar2")?, "outcome")?;
            let p = a.req("prop", "\"W will_obtain fail\"")?;
            let b = a.opt("basis");
            QueryKind::Certainty {
                observer,
                outcome,
                prop: prop(&p, b)?,
                semantics: semantics(&mut a)?,
            }
        }
        "audit" => QueryKind::Audit {
            chain: nonempty_words(&a.req("chain", "(s1,s2,s3)")?, "statement")?,
            semantics: semantics(&mut a)?,
        },
        "compare" => QueryKind::Compare {
            models: nonempty_words(&a.req("models", "(U_E,U_E')")?, "model")?,
            restrict: nonempty_words(&a.req("restrict", "(R,A)")?, "subsystem")?,
            apparatus: word(&a.req("apparatus", "A")?, "apparatus")?,
        },
        "triortho" => {
            let v = a.req("parts", "((R),(A),(E))")?;
            let parts = match &v.kind {
                Kind::Tuple(items) if items.len() == 3 => {
                    let p: Vec<Vec<String>> = items
                        .iter()
                        .map(|i| match &i.val {
                            Some(x) => Err(Diagnostic::new(x.pos, "unexpected `:`", "write ((a),(b),(c))")),
                            None => nonempty_words(&i.key, "subsystem"),
                        })
                        .collect::<PResult<_>>()?;
                    [p[0].clone(), p[1].clone(), p[2].clone()]
                }
                _ => return Err(Diagnostic::new(v.pos, "triortho needs exactly three parts", "write parts=((R),(A),(E))")),
            };
            QueryKind::Triortho { parts, on: on(&mut a)? }
        }
        "rewrite" => {
            let v = a.req("bases", "(R:{head,tail},S:{up,down})")?;
            let Kind::Tuple(items) = &v.kind else {
                return Err(Diagnostic::new(v.pos, "expected a tuple of subsystem:basis", "write bases=(R:{head,tail},S:{up,down})"));
            };
            let bases = items
                .iter()
                .map(|i| {
                    let b = i.val.as_ref().ok_or_else(|| {
                        Diagnostic::new(i.key.pos, "missing basis", "write SUBSYSTEM:{label,label}")
                    })?;
                    Ok((word(&i.key, "subsystem")?, basis(b)?))
                })
                .collect::<PResult<Vec<_>>>()?;
            if bases.is_empty() {
                return Err(Diagnostic::new(v.pos, "no bases given", "list at least one SUBSYSTEM:{..}"));
            }
            QueryKind::Rewrite { bases, on: on(&mut a)? }
        }
        "relative" => QueryKind::Relative {
            subsystem: word(&a.req("subsystem", "A")?, "subsystem")?,
            basis: basis(&a.req("basis", "{A1,A2}")?)?,
            on: on(&mut a)?,
        },
        "schmidt" => QueryKind::Schmidt {
            left: nonempty_words(&a.req("left", "(R)")?, "subsystem")?,
            right: nonempty_words(&a.req("right", "(A)")?, "subsystem")?,
            on: on(&mut a)?,
        },
        _ => unreachable!(),
    };
    Ok(Query { kind: q, pos })
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn char_offset(line: &str, byte: usize) -> usize {
    line[..byte].chars().count()
}

/// Syntax only: the result is well-formed but names are not resolved.
pub fn parse_syntax(text: &str) -> PResult<Scenario> {
    let mut section: Option<Section> = None;
    let mut seen = Vec::new();
    let mut decls = Vec::new();
    let mut init: Option<StateExpr> = None;
    let mut states = Vec::new();
    let mut actions = Vec::new();
    let mut statements = Vec::new();
    let mut queries = Vec::new();
    let mut last_line = 0;

    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        last_line = line_no;
        let body = strip_comment(raw);
        let trimmed = body.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = char_offset(body, body.len() - body.trim_start().len());
        let here = Pos::new(line_no, indent + 1);

        if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let s = match name.trim() {
                "layout" => Section::Layout,
                "state" => Section::State,
                "actions" => Section::Actions,
                "queries" => Section::Queries,
                other => {
                    return Err(Diagnostic::new(here, format!("unknown section `[{other}]`"), "sections are [layout], [state], [actions], [queries]"))
                }
            };
            if seen.contains(&s) {
                return Err(Diagnostic::new(here, format!("section `[{}]` appears twice", name.trim()), "merge the two sections"));
            }
            seen.push(s);
            section = Some(s);
            continue;
        }
        let Some(sec) = section else {
            return Err(Diagnostic::new(here, "directive outside a section", "start the file with [layout]"));
        };
        let head = trimmed.split(|c: char| c.is_whitespace() || c == ':').next().unwrap_or("");

        if sec == Section::State {
            if head != "state" {
                return Err(Diagnostic::new(here, format!("unknown directive `{head}` in [state]"), "write state: <expr> or state NAME over=(..): <expr>"));
            }
            let colon = body.find(':').ok_or_else(|| Diagnostic::new(here, "`state` needs `:` before the expression", "write state: sqrt(1/2)|a> + sqrt(1/2)|b>"))?;
            let expr = parse_state_expr(&body[colon + 1..], line_no, char_offset(body, colon + 1))?;
            let header = directive(&body[..colon], line_no, 0)?;
            if header.args.is_empty() {
                if init.is_some() {
                    return Err(Diagnostic::new(here, "initial state given twice", "name additional states: state NAME over=(..): ..."));
                }
                init = Some(expr);
            } else {
                let mut a = Args::new(header, &["over"])?;
                let name = match a.positional.as_slice() {
                    [n] => word(n, "state name")?,
                    _ => return Err(Diagnostic::new(here, "named state takes one name", "write state NAME over=(x,y): <expr>")),
                };
                let over = nonempty_words(&a.req("over", "(x,y,z)")?, "subsystem")?;
                states.push(NamedState { name, over, expr, pos: here });
            }
            continue;
        }

        if sec == Section::Layout && head == "derive" {
            let eq = body.find('=').ok_or_else(|| Diagnostic::new(here, "`derive` needs `=`", "write derive S right = sqrt(1/2)|up> + sqrt(1/2)|down>"))?;
            let header = directive(&body[..eq], line_no, 0)?;
            let a = Args::new(header, &[])?;
            let [sub, label] = a.positional.as_slice() else {
                return Err(Diagnostic::new(here, "`derive` takes a subsystem and a label", "write derive S right = ..."));
            };
            decls.push(Decl::Derive {
                subsystem: word(sub, "subsystem")?,
                label: word(label, "label")?,
                expr: parse_state_expr(&body[eq + 1..], line_no, char_offset(body, eq + 1))?,
                pos: here,
            });
            continue;
        }

        let d = directive(body, line_no, 0)?;
        match (sec, d.name.as_str()) {
            (Section::Layout, "subsystem") => decls.push(subsystem_decl(d, SubsystemKind::Subsystem)?),
            (Section::Layout, "register") => decls.push(subsystem_decl(d, SubsystemKind::Register)?),
            (Section::Layout, "group") => decls.push(Decl::Lab(group_decl(d)?)),
            (Section::Layout, "model") => decls.push(Decl::Model(model_decl(d)?)),
            (Section::Actions, "premeasure") => actions.push(premeasure(d)?),
            (Section::Actions, "couple") => actions.push(couple(d)?),
            (Section::Actions, "group") => actions.push(ActionDecl::Group(group_decl(d)?)),
            (Section::Queries, "statement") => statements.push(statement(d)?),
            (Section::Queries, "query") => queries.push(query(d)?),
            (s, other) => {
                return Err(Diagnostic::new(
                    d.pos,
                    format!("unknown directive `{other}` in this section"),
                    format!("expected one of: {}", s.directives()),
                ))
            }
        }
    }
    let init = init.ok_or_else(|| {
        Diagnostic::new(Pos::new(last_line.max(1), 1), "scenario has no initial state", "add a [state] section with state: <expr>")
    })?;
    Ok(Scenario {
        decls,
        init,
        states,
        actions,
        statements,
        queries,
    })
}
