//! Scenario files for pointer-state simulations: parse, check, run, report.

pub mod ast;
pub mod compile;
pub mod parse;
pub mod report;
pub mod run;

pub use ast::Scenario;
pub use parse::Diagnostic;
pub use report::Report;
pub use run::{run, RunError, RunOptions};

/// Exit status for scenario files that fail to parse or resolve.
pub const EXIT_PARSE: i32 = 3;
/// Exit status for scenarios that parse but fail while running.
pub const EXIT_EXECUTION: i32 = 4;
/// Exit status for unreadable files and bad command lines.
pub const EXIT_USAGE: i32 = 2;

/// Parse and resolve; a returned `Scenario` is guaranteed to compile.
pub fn parse_scenario(text: &str) -> Result<Scenario, Diagnostic> {
    let s = parse::parse_syntax(text)?;
    compile::compile(&s)?;
    Ok(s)
}

/// The scenarios shipped with the tool, by demo name.
pub mod bundled {
    pub const FR_FULL: &str = include_str!("../scenarios/fr_full.scn");
    pub const AMBIGUITY: &str = include_str!("../scenarios/ambiguity.scn");
    pub const DECOHERENCE: &str = include_str!("../scenarios/decoherence.scn");
    pub const TRIORTHO: &str = include_str!("../scenarios/triortho.scn");

    pub const ALL: [(&str, &str, &str); 4] = [
        ("fr", "fr_full.scn", FR_FULL),
        ("ambiguity", "ambiguity.scn", AMBIGUITY),
        ("decoherence", "decoherence.scn", DECOHERENCE),
        ("triortho", "triortho.scn", TRIORTHO),
    ];

    pub fn get(name: &str) -> Option<(&'static str, &'static str)> {
        ALL.iter().find(|(n, _, _)| *n == name).map(|(_, f, t)| (*f, *t))
    }
}
