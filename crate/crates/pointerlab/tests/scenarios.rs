use std::process::Command;

use pointerlab::parse::{parse_complex, parse_state_expr, parse_syntax};
use pointerlab::report::QueryResult;
use pointerlab::{bundled, parse_scenario, run, RunError, RunOptions, EXIT_EXECUTION, EXIT_PARSE};
use proptest::prelude::*;

fn report(text: &str) -> pointerlab::Report {
    run(&parse_scenario(text).unwrap(), &RunOptions::default()).unwrap()
}

const MINIMAL: &str = "[layout]\nsubsystem R {head, tail}\n\n[state]\nstate: sqrt(1/3)|head> + sqrt(2/3)|tail>\n";

#[test]
fn fr_full_has_four_actions_and_three_queries() {
    let s = parse_scenario(bundled::FR_FULL).unwrap();
    assert_eq!(s.actions.len(), 4);
    assert_eq!(s.queries.len(), 3);
}

#[test]
fn undeclared_subsystem_is_named_with_its_line() {
    let text = format!("{MINIMAL}\n[actions]\npremeasure target=Q apparatus=A basis={{a,b}} outcomes={{A1,A2}} ready=A0\n");
    let d = parse_scenario(&text).unwrap_err();
    assert_eq!(d.line, 8);
    assert!(d.message.contains("`Q`"), "{}", d.message);
    assert!(!d.hint.is_empty());
}

#[test]
fn non_orthonormal_basis_reports_gram_entry() {
    let text = format!(
        "{MINIMAL}\n[queries]\nquery relative subsystem=R basis={{(1,0),(1,0)}}\n"
    );
    let d = parse_scenario(&text).unwrap_err();
    assert_eq!(d.line, 8);
    assert!(d.message.contains("not orthonormal"), "{}", d.message);
    assert!(d.message.contains("Gram entry (1, 2) = 1"), "{}", d.message);
}

#[test]
fn malformed_literal_points_at_column() {
    let text = "[layout]\nsubsystem R {head, tail}\n[state]\nstate: sqrt(1/3|head> + 0.5|tail>\n";
    let d = parse_scenario(text).unwrap_err();
    assert_eq!(d.line, 4);
    assert!(d.message.contains("malformed complex literal"), "{}", d.message);
    assert!(d.hint.contains("a+bi"));

    let d = parse_complex("1/0", pointerlab::ast::Pos::new(1, 1)).unwrap_err();
    assert!(d.message.contains("zero denominator"));
    let d = parse_complex("2i+1", pointerlab::ast::Pos::new(1, 1)).unwrap_err();
    assert!(d.message.contains("real part comes first"));
}

#[test]
fn unknown_directive_lists_alternatives() {
    let text = "[layout]\nsubsytem R {head, tail}\n";
    let d = parse_scenario(text).unwrap_err();
    assert_eq!((d.line, d.col), (2, 1));
    assert!(d.hint.contains("subsystem"));
    let rendered = d.render("x.scn", text);
    assert!(rendered.contains("x.scn:2:1") && rendered.contains("subsytem R"));
}

#[test]
fn fr_full_report_contains_the_one_in_twelve() {
    let r = report(bundled::FR_FULL);
    assert!(r.to_table().contains("(okbar,ok): 0.0833333333333"));
    assert!(r.to_json().contains("0.0833333333333"));
    let QueryResult::Audit { contradiction, .. } = &r.queries[1].result else { panic!() };
    assert!(contradiction);
    let QueryResult::Audit { contradiction, broken_at, .. } = &r.queries[2].result else { panic!() };
    assert!(!contradiction);
    assert_eq!(broken_at.as_deref(), Some("statement-1"));
}

#[test]
fn decoherence_restriction_equality() {
    let r = report(bundled::DECOHERENCE);
    let QueryResult::Compare {
        restriction_equal,
        full_equal,
        ..
    } = &r.queries[0].result
    else {
        panic!()
    };
    assert!(*restriction_equal);
    assert!(!*full_equal);
    assert!(r.to_table().contains("restriction-equality: true"));
}

#[test]
fn born_on_the_declared_state_without_actions() {
    let r = report(&format!("{MINIMAL}\n[queries]\nquery born targets=(R)\n"));
    let QueryResult::Born { outcomes, .. } = &r.queries[0].result else { panic!() };
    assert_eq!(outcomes[0].labels, ["head"]);
    assert!((outcomes[0].probability - 1.0 / 3.0).abs() < 1e-9);
    assert!((outcomes[1].probability - 2.0 / 3.0).abs() < 1e-9);
}

#[test]
fn execution_errors_name_the_action() {
    let text = format!("{MINIMAL}\n[actions]\ncouple env=E over=(R) branches={{(head)}}\n");
    let e = run(&parse_scenario(&text).unwrap(), &RunOptions::default()).unwrap_err();
    let RunError::Action { index, line, message } = e else { panic!("{e:?}") };
    assert_eq!((index, line), (1, 8));
    assert!(message.contains("branches do not span"), "{message}");
}

#[test]
fn bundled_scenarios_round_trip_and_rerun_identically() {
    for (_, file, text) in bundled::ALL {
        let s = parse_scenario(text).unwrap();
        let again = parse_scenario(&s.to_string()).unwrap();
        assert_eq!(s, again, "{file}");
        assert_eq!(s.to_string(), again.to_string(), "{file}");
        if file != "triortho.scn" {
            let a = run(&s, &RunOptions::default()).unwrap().to_json();
            let b = run(&again, &RunOptions::default()).unwrap().to_json();
            assert_eq!(a, b, "{file}");
        }
    }
}

#[test]
fn table_digits_match_structured_values() {
    let r = report(bundled::FR_FULL);
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    let table = r.to_table();
    for o in json["queries"][0]["result"]["outcomes"].as_array().unwrap() {
        let labels: Vec<&str> = o["labels"].as_array().unwrap().iter().map(|l| l.as_str().unwrap()).collect();
        let line = format!("({}): {}", labels.join(","), o["probability"]);
        assert!(table.contains(&line), "{line}");
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pointerlab"))
}

fn write(name: &str, text: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("pointerlab-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn exit_codes_separate_parse_and_execution_errors() {
    let bad = write("bad.scn", "[layout]\nsubsystem R {head, tail}\n[state]\nstate: |Q>\n");
    let fails = write(
        "fails.scn",
        &format!("{MINIMAL}\n[actions]\ncouple env=E over=(R) branches={{(head)}}\n"),
    );
    let good = write("good.scn", &format!("{MINIMAL}\n[queries]\nquery born targets=(R)\n"));

    let out = bin().args(["check"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_PARSE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.scn:4:"));

    let out = bin().arg("run").arg(&fails).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_EXECUTION));
    assert!(String::from_utf8_lossy(&out.stderr).contains("action 1"));

    let out = bin().args(["run", "--format", "structured"]).arg(&good).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["queries"][0]["result"]["kind"], "born");
}

#[test]
fn jobs_run_several_files_into_one_document() {
    let a = write("a.scn", &format!("{MINIMAL}\n[queries]\nquery born targets=(R)\n"));
    let b = write("b.scn", bundled::FR_FULL);
    let out = bin()
        .args(["run", "--jobs", "2", "--format", "structured"])
        .arg(&a)
        .arg(&b)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[1]["queries"].as_array().unwrap().len(), 3);
}

#[test]
fn demo_runs_bundled_scenario() {
    let out = bin().args(["demo", "fr"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("(okbar,ok): 0.0833333333333"));
}

fn real() -> impl Strategy<Value = String> {
    prop_oneof![
        (0u32..1000, 0u32..100).prop_map(|(a, b)| format!("{a}.{b}")),
        (1u32..50, 1u32..50).prop_map(|(p, q)| format!("{p}/{q}")),
        (1u32..50, 1u32..50).prop_map(|(p, q)| format!("sqrt({p}/{q})")),
        (1u32..50).prop_map(|p| format!("sqrt({p})")),
    ]
}

fn complex() -> impl Strategy<Value = String> {
    (real(), real(), 0u8..3, any::<bool>(), any::<bool>()).prop_map(|(a, b, shape, na, nb)| {
        let sa = if na { "-" } else { "" };
        let sb = if nb { "-" } else { "+" };
        match shape {
            0 => format!("{sa}{a}"),
            1 => format!("{sa}{b}i"),
            _ => format!("{sa}{a}{sb}{b}i"),
        }
    })
}

proptest! {
    #[test]
    fn complex_literals_round_trip(text in complex()) {
        let pos = pointerlab::ast::Pos::new(1, 1);
        let c = parse_complex(&text, pos).unwrap();
        let again = parse_complex(&c.to_string(), pos).unwrap();
        prop_assert_eq!(c, again);
        prop_assert_eq!(c.value(), again.value());
    }

    #[test]
    fn state_expressions_round_trip(
        terms in prop::collection::vec((any::<bool>(), prop::option::of(complex()), 0usize..2), 1..5)
    ) {
        let mut text = String::new();
        for (k, (neg, coef, label)) in terms.iter().enumerate() {
            text.push_str(match (k, neg) { (0, true) => "-", (0, false) => "", (_, true) => " - ", (_, false) => " + " });
            if let Some(c) = coef {
                text.push_str(&format!("({c})"));
            }
            text.push_str(&format!("|{}>", ["head", "tail"][*label]));
        }
        let e = parse_state_expr(&text, 1, 0).unwrap();
        let again = parse_state_expr(&e.to_string(), 1, 0).unwrap();
        prop_assert_eq!(e, again);
    }

    #[test]
    fn scenarios_round_trip_with_arbitrary_states(
        a in complex(), b in complex(), neg in any::<bool>()
    ) {
        let text = format!(
            "[layout]\nsubsystem R {{head, tail}}\n[state]\nstate: ({a})|head> {} ({b})|tail>\n[queries]\nquery born targets=(R)\n",
            if neg { "-" } else { "+" }
        );
        let s = parse_syntax(&text).unwrap();
        prop_assert_eq!(&s, &parse_syntax(&s.to_string()).unwrap());
    }
}
