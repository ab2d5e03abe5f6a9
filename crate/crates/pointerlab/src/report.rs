//! Report data and its two renderings.
//!
//! Every number is rounded to 12 significant digits once, when the report
//! is built; the table prints those stored values verbatim, so the table
//! and the structured document always agree digit for digit.

use std::fmt::Write;

use serde::Serialize;

/// Magnitudes below this print as exactly 0.
pub const ZERO_FLOOR: f64 = 1e-12;

/// Round to 12 significant digits; tiny values become 0.
pub fn sig(x: f64) -> f64 {
    if !x.is_finite() || x.abs() < ZERO_FLOOR {
        return if x.is_finite() { 0.0 } else { x };
    }
    format!("{x:.11e}").parse().expect("formatted float")
}

pub type Amp = [f64; 2];

pub fn amp(re: f64, im: f64) -> Amp {
    [sig(re), sig(im)]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub labels: Vec<String>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub labels: Vec<String>,
    pub amplitude: Amp,
}

/// Row-major, entries as [re, im].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix {
    pub labels: Vec<String>,
    pub rows: Vec<Vec<Amp>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchReport {
    pub label: String,
    pub weight: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidenceReport {
    pub model: String,
    pub probability: f64,
    pub conditional: Vec<Outcome>,
    pub branches: Vec<BranchReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertaintyReport {
    pub observer: String,
    pub outcome: String,
    pub proposition: String,
    pub semantics: String,
    pub verdict: String,
    pub probability_range: [f64; 2],
    pub evidence: Vec<EvidenceReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatementReport {
    pub name: String,
    /// `None` when not evaluated because the chain broke earlier.
    pub certainty: Option<CertaintyReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub model: String,
    pub branch_weights: Vec<f64>,
    pub apparatus_marginal: Vec<Outcome>,
    pub restricted: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermReport {
    pub coefficient: Amp,
    pub labels: Vec<String>,
    pub factors: Vec<Vec<Component>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapReport {
    pub pair: [String; 2],
    pub overlap: Amp,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QueryResult {
    Born {
        subsystems: Vec<String>,
        outcomes: Vec<Outcome>,
    },
    Certainty(CertaintyReport),
    Audit {
        semantics: String,
        statements: Vec<StatementReport>,
        broken_at: Option<String>,
        premise: [String; 2],
        conclusion: [String; 2],
        claimed: Option<f64>,
        observed: f64,
        contradiction: bool,
    },
    Compare {
        models: Vec<ModelReport>,
        full_difference: f64,
        restricted_difference: f64,
        marginal_difference: f64,
        full_equal: bool,
        restriction_equal: bool,
    },
    Triortho {
        parts: Vec<Vec<String>>,
        verdict: String,
        rank: usize,
        residual: f64,
        grid_points: usize,
        restarts: usize,
        best_nontrivial_residual: Option<f64>,
        canonical: Vec<TermReport>,
        witness: Option<Vec<TermReport>>,
    },
    Rewrite {
        parts: Vec<Vec<String>>,
        terms: Vec<TermReport>,
        residual: f64,
    },
    Relative {
        terms: Vec<TermReport>,
        weights: Vec<f64>,
        overlaps: Vec<OverlapReport>,
        residual: f64,
    },
    Schmidt {
        coefficients: Vec<f64>,
        rank: usize,
        degenerate: bool,
        terms: Vec<TermReport>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryReport {
    pub index: usize,
    pub query: String,
    pub result: QueryResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    /// SHA-256 of the scenario's canonical text.
    pub scenario_sha256: String,
    pub tolerance: f64,
    pub steps: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub provenance: Provenance,
    pub queries: Vec<QueryReport>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for q in &self.queries {
            let _ = writeln!(out, "== [{}] {}", q.index, q.query);
            render(&mut out, &q.result);
            out.push('\n');
        }
        let p = &self.provenance;
        let _ = writeln!(out, "provenance: {} {}", p.tool, p.version);
        let _ = writeln!(out, "  scenario sha256: {}", p.scenario_sha256);
        let _ = writeln!(out, "  tolerance: {}", p.tolerance);
        let _ = writeln!(out, "  steps: {}", p.steps.join(" -> "));
        out
    }
}

fn tuple(labels: &[String]) -> String {
    format!("({})", labels.join(","))
}

fn c(a: &Amp) -> String {
    match (a[0], a[1]) {
        (re, im) if im == 0.0 => format!("{re}"),
        (re, im) if re == 0.0 => format!("{im}i"),
        (re, im) if im < 0.0 => format!("{re}-{}i", -im),
        (re, im) => format!("{re}+{im}i"),
    }
}

fn ket(components: &[Component]) -> String {
    if components.is_empty() {
        return "0".into();
    }
    let mut out = String::new();
    for (i, k) in components.iter().enumerate() {
        let real_negative = k.amplitude[1] == 0.0 && k.amplitude[0] < 0.0;
        let a = if real_negative { [-k.amplitude[0], 0.0] } else { k.amplitude };
        let sign = match (i, real_negative) {
            (0, true) => "-",
            (0, false) => "",
            (_, true) => " - ",
            (_, false) => " + ",
        };
        let _ = write!(out, "{sign}{}|{}>", paren(&a), k.labels.join(","));
    }
    out
}

fn paren(a: &Amp) -> String {
    if a[0] != 0.0 && a[1] != 0.0 {
        format!("({})", c(a))
    } else {
        c(a)
    }
}

fn outcomes(out: &mut String, indent: &str, list: &[Outcome]) {
    for o in list {
        let _ = writeln!(out, "{indent}{}: {}", tuple(&o.labels), o.probability);
    }
}

fn terms(out: &mut String, list: &[TermReport]) {
    for t in list {
        let labels = if t.labels.iter().all(String::is_empty) {
            String::new()
        } else {
            format!(" {}", tuple(&t.labels))
        };
        let factors: Vec<String> = t.factors.iter().map(|f| format!("[{}]", ket(f))).collect();
        let _ = writeln!(out, "  {}{labels}: {}", c(&t.coefficient), factors.join(" ⊗ "));
    }
}

fn certainty(out: &mut String, indent: &str, r: &CertaintyReport) {
    let _ = writeln!(
        out,
        "{indent}{} sees {} => {} [{}]: {}  (p in [{}, {}])",
        r.observer, r.outcome, r.proposition, r.semantics, r.verdict, r.probability_range[0], r.probability_range[1]
    );
    for e in &r.evidence {
        let _ = writeln!(out, "{indent}  model {}: p = {}", e.model, e.probability);
        for b in &e.branches {
            let _ = writeln!(out, "{indent}    branch {}: weight {}, p = {}", b.label, b.weight, b.probability);
        }
    }
}

fn render(out: &mut String, r: &QueryResult) {
    match r {
        QueryResult::Born { subsystems, outcomes: o } => {
            let _ = writeln!(out, "  outcomes over {}", tuple(subsystems));
            outcomes(out, "  ", o);
        }
        QueryResult::Certainty(c) => certainty(out, "  ", c),
        QueryResult::Audit {
            semantics,
            statements,
            broken_at,
            premise,
            conclusion,
            claimed,
            observed,
            contradiction,
        } => {
            let _ = writeln!(out, "  semantics: {semantics}");
            for s in statements {
                match &s.certainty {
                    Some(c) => {
                        let _ = writeln!(out, "  {}:", s.name);
                        certainty(out, "    ", c);
                    }
                    None => {
                        let _ = writeln!(out, "  {}: not evaluated", s.name);
                    }
                }
            }
            let _ = writeln!(out, "  chain: {}", broken_at.as_ref().map_or("holds".to_string(), |b| format!("broken at {b}")));
            let claim = claimed.map_or("none".to_string(), |c| c.to_string());
            let _ = writeln!(
                out,
                "  p({} = {}, {} != {}): claimed {claim}, observed {observed}",
                premise[0], premise[1], conclusion[0], conclusion[1]
            );
            let _ = writeln!(out, "  contradiction: {contradiction}");
        }
        QueryResult::Compare {
            models,
            full_difference,
            restricted_difference,
            marginal_difference,
            full_equal,
            restriction_equal,
        } => {
            for m in models {
                let w: Vec<String> = m.branch_weights.iter().map(|w| w.to_string()).collect();
                let _ = writeln!(out, "  model {}: branch weights [{}]", m.model, w.join(", "));
                outcomes(out, "    apparatus ", &m.apparatus_marginal);
                let _ = writeln!(out, "    restricted state, basis [{}]:", m.restricted.labels.join(" | "));
                for row in &m.restricted.rows {
                    let cells: Vec<String> = row.iter().map(c).collect();
                    let _ = writeln!(out, "      [{}]", cells.join(", "));
                }
            }
            let _ = writeln!(out, "  full difference: {full_difference} (equal: {full_equal})");
            let _ = writeln!(out, "  restricted difference: {restricted_difference}");
            let _ = writeln!(out, "  restriction-equality: {restriction_equal}");
            let _ = writeln!(out, "  apparatus marginal difference: {marginal_difference}");
        }
        QueryResult::Triortho {
            parts,
            verdict,
            rank,
            residual,
            grid_points,
            restarts,
            best_nontrivial_residual,
            canonical,
            witness,
        } => {
            let p: Vec<String> = parts.iter().map(|p| tuple(p)).collect();
            let _ = writeln!(out, "  parts {}: {verdict} (rank {rank}, residual {residual})", p.join(" | "));
            let best = best_nontrivial_residual.map_or("none".to_string(), |b| b.to_string());
            let _ = writeln!(out, "  search: {grid_points} grid points, {restarts} restarts, best non-trivial residual {best}");
            if !canonical.is_empty() {
                let _ = writeln!(out, "  canonical:");
                terms(out, canonical);
            }
            if let Some(w) = witness {
                let _ = writeln!(out, "  witness:");
                terms(out, w);
            }
        }
        QueryResult::Rewrite { parts, terms: t, residual } => {
            let p: Vec<String> = parts.iter().map(|p| tuple(p)).collect();
            let _ = writeln!(out, "  terms over {} (residual {residual})", p.join(" ⊗ "));
            for term in t {
                let _ = writeln!(out, "  {}: {}", tuple(&term.labels), c(&term.coefficient));
            }
        }
        QueryResult::Relative {
            terms: t,
            weights,
            overlaps,
            residual,
        } => {
            let _ = writeln!(out, "  residual {residual}");
            for (term, w) in t.iter().zip(weights) {
                let _ = writeln!(
                    out,
                    "  {}: coefficient {}, weight {w}, relative state {}",
                    term.labels[1],
                    c(&term.coefficient),
                    ket(&term.factors[0])
                );
            }
            for o in overlaps {
                let _ = writeln!(out, "  overlap <{}|{}> = {} (|.| = {})", o.pair[0], o.pair[1], c(&o.overlap), o.magnitude);
            }
        }
        QueryResult::Schmidt {
            coefficients,
            rank,
            degenerate,
            terms: t,
        } => {
            let cs: Vec<String> = coefficients.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(out, "  coefficients [{}], rank {rank}, degenerate {degenerate}", cs.join(", "));
            terms(out, t);
        }
    }
}
