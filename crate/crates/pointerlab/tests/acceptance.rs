//! One PASS/FAIL line per acceptance criterion. Tolerances are pinned here.

use std::time::{Duration, Instant};

use pointerlab::report::QueryResult;
use pointerlab::{bundled, parse_scenario, run, RunOptions};
use pointerlab_core::decomposition::{relative_states, rewrite, triortho_verdict, VerdictKind};
use pointerlab_core::experiment::{certainty, fr, joint_outcome, CertaintyKind, Semantics};
use pointerlab_core::hilbert::{re, DensityOperator, StateVector, SubsystemLayout};
use pointerlab_core::measurement::{born, condition, premeasurement_operator, Basis};
use pointerlab_core::experiment::Action;

const TOL: f64 = 1e-9;
const NORM_TOL: f64 = 1e-12;
const TRIORTHO_BUDGET: Duration = Duration::from_secs(10);

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

fn criterion_1() -> Check {
    let t = fr::run_protocol().map_err(e)?;
    let d = joint_outcome(&t, &["Wbar", "W"]).map_err(e)?;
    let expected = [
        (["failbar", "fail"], 0.75),
        (["failbar", "ok"], 1.0 / 12.0),
        (["okbar", "fail"], 1.0 / 12.0),
        (["okbar", "ok"], 1.0 / 12.0),
    ];
    for (labels, p) in expected {
        let got = d.probability(&labels).unwrap_or(f64::NAN);
        ensure(close(got, p), format!("p{labels:?} = {got}, want {p}"))?;
    }
    let r = run(&parse_scenario(bundled::FR_FULL).map_err(e)?, &RunOptions::default()).map_err(e)?;
    ensure(r.to_table().contains("(okbar,ok): 0.0833333333333"), "CLI report lacks (okbar,ok): 0.0833333333333")?;
    Ok(format!("p(okbar,ok) = {}", d.probability(&["okbar", "ok"]).unwrap_or(f64::NAN)))
}

fn criterion_2() -> Check {
    let init = fr::build_init();
    let h = StateVector::basis(fr::coin(), &["head"]).map_err(e)?;
    let t = StateVector::basis(fr::coin(), &["tail"]).map_err(e)?;
    let coin_pm = Basis::new(vec![
        ("h+t", StateVector::superpose(&[(re(1.0), &h), (re(1.0), &t)]).map_err(e)?),
        ("h-t", StateVector::superpose(&[(re(1.0), &h), (re(-1.0), &t)]).map_err(e)?),
    ])
    .map_err(e)?;
    let down_up = Basis::from_labels(&fr::spin(), &["down", "up"]).map_err(e)?;
    let pairs = [
        (fr::coin_basis(), down_up.clone()),
        (coin_pm.clone(), down_up),
        (fr::coin_basis(), fr::spin_x_basis()),
        (coin_pm, fr::spin_x_basis()),
    ];
    let mut worst = 0.0f64;
    for (a, b) in &pairs {
        let d = rewrite(&init, &[a, b]).map_err(e)?;
        let rebuilt = d.reconstruct(init.layout()).map_err(e)?;
        worst = worst.max((rebuilt - init.amplitudes()).norm());
    }
    ensure(worst < TOL, format!("reconstruction residual {worst:e}"))?;
    let d = rewrite(&init, &[&fr::coin_basis(), &fr::spin_basis()]).map_err(e)?;
    let head_up = init.amplitude(&["head", "up"]).map_err(e)?;
    ensure(head_up.norm() == 0.0, format!("(head,up) amplitude {head_up}"))?;
    ensure(d.term_with_labels(&["head", "up"]).is_none(), "(head,up) term present")?;
    Ok(format!("max residual {worst:.1e}, (head,up) = 0"))
}

fn criterion_3() -> Check {
    let t = fr::run_protocol().map_err(e)?;
    let mut probs = Vec::new();
    for st in fr::statements() {
        let v = certainty(&t, &st.observer, &st.observed, &st.proposition, &Semantics::Premeasurement).map_err(e)?;
        let p = v.evidence[0].probability;
        ensure(v.kind == CertaintyKind::Certain && close(p, 1.0), format!("{}: {} p = {p}", st.name, v.kind.as_str()))?;
        probs.push(p);
    }
    Ok(format!("statements 1-3 certain, p = {probs:?}"))
}

fn criterion_4() -> Check {
    let (pre, dec) = fr::fr_consistency_audit().map_err(e)?;
    ensure(pre.contradiction, "premeasurement audit not flagged")?;
    ensure(pre.claimed == Some(0.0), format!("claimed {:?}", pre.claimed))?;
    ensure(close(pre.observed, 1.0 / 12.0), format!("observed {}", pre.observed))?;
    ensure(!dec.contradiction, "decoherent audit still flagged")?;
    Ok(format!(
        "premeasurement: claimed 0 vs {:.12}; decoherent: chain broken at {}",
        pre.observed,
        dec.broken_at.as_deref().unwrap_or("-")
    ))
}

fn criterion_5() -> Check {
    let c = fr::fr_decoherence_compare().map_err(e)?;
    ensure(c.restricted_difference <= TOL, format!("(R,A) difference {:e}", c.restricted_difference))?;
    ensure(c.full_difference > 0.1, format!("(R,S,A) difference {}", c.full_difference))?;
    for r in &c.reductions {
        let p = |l: &str| r.apparatus_marginal.iter().find(|(x, _)| x == l).map_or(f64::NAN, |(_, p)| *p);
        ensure(close(p("A1"), 1.0 / 3.0) && close(p("A2"), 2.0 / 3.0), format!("{} marginal {:?}", r.model, r.apparatus_marginal))?;
    }
    let r = run(&parse_scenario(bundled::DECOHERENCE).map_err(e)?, &RunOptions::default()).map_err(e)?;
    let QueryResult::Compare { restriction_equal, .. } = &r.queries[0].result else {
        return Err("decoherence.scn first query is not a comparison".into());
    };
    ensure(*restriction_equal, "CLI restriction-equality false")?;
    Ok(format!("(R,A) diff {:.1e}, (R,S,A) diff {:.4}, marginal 1/3, 2/3", c.restricted_difference, c.full_difference))
}

fn criterion_6() -> Check {
    let layout = fr::coin().concat(&fr::apparatus()).map_err(e)?;
    let s = (1.0f64 / 3.0).sqrt();
    let l = (2.0f64 / 3.0).sqrt();
    let psi = StateVector::make_real(layout, &[(&["head", "A1"], s), (&["tail", "A2"], l)]).map_err(e)?;
    let a1 = StateVector::basis(fr::apparatus(), &["A1"]).map_err(e)?;
    let a2 = StateVector::basis(fr::apparatus(), &["A2"]).map_err(e)?;
    let rotated = Basis::new(vec![
        ("A'1", StateVector::superpose(&[(re(1.0), &a1), (re(1.0), &a2)]).map_err(e)?),
        ("A'2", StateVector::superpose(&[(re(1.0), &a1), (re(-1.0), &a2)]).map_err(e)?),
    ])
    .map_err(e)?;
    let d = relative_states(&psi, &rotated).map_err(e)?;
    ensure(d.len() == 2, format!("{} terms", d.len()))?;
    let listed = [
        StateVector::make_real(fr::coin(), &[(&["head"], s), (&["tail"], l)]).map_err(e)?,
        StateVector::make_real(fr::coin(), &[(&["head"], s), (&["tail"], -l)]).map_err(e)?,
    ];
    for (term, want) in d.terms().iter().zip(&listed) {
        ensure(close(term.coefficient.re, 0.5f64.sqrt()), format!("coefficient {}", term.coefficient))?;
        let o = term.factors[0].inner(want).map_err(e)?.norm();
        ensure(o >= 1.0 - TOL, format!("overlap with listed state {o}"))?;
    }
    // by hand: (√(1/3))² − (√(2/3))² = −1/3
    let oracle = s * s - l * l;
    let overlap = d.terms()[0].factors[0].inner(&d.terms()[1].factors[0]).map_err(e)?;
    ensure(close(overlap.norm(), oracle.abs()) && close(overlap.norm(), 1.0 / 3.0), format!("|overlap| {}", overlap.norm()))?;
    Ok(format!("coefficients 1/sqrt2 x2, |overlap| = {:.12}", overlap.norm()))
}

fn criterion_7() -> Check {
    let env = SubsystemLayout::single("E", vec!["E0", "E1", "E2"]).map_err(e)?;
    let layout = fr::coin().concat(&fr::apparatus()).and_then(|l| l.concat(&env)).map_err(e)?;
    let psi_env = StateVector::make_real(
        layout,
        &[(&["head", "A1", "E1"], (1.0f64 / 3.0).sqrt()), (&["tail", "A2", "E2"], (2.0f64 / 3.0).sqrt())],
    )
    .map_err(e)?;
    let q = SubsystemLayout::new([("x", vec!["0", "1"]), ("y", vec!["0", "1"]), ("z", vec!["0", "1"])]).map_err(e)?;
    let h = 0.5f64.sqrt();
    let bell = StateVector::make_real(q, &[(&["0", "0", "0"], h), (&["1", "1", "0"], h)]).map_err(e)?;

    let start = Instant::now();
    let unique = triortho_verdict(&psi_env, [&["R"], &["A"], &["E"]]).map_err(e)?;
    let ambiguous = triortho_verdict(&bell, [&["x"], &["y"], &["z"]]).map_err(e)?;
    let elapsed = start.elapsed();

    ensure(unique.kind == VerdictKind::Unique, format!("psi_E verdict {}", unique.kind.as_str()))?;
    ensure(unique.stats.best_nontrivial_residual >= 1e-6, "psi_E has a near alternative")?;
    ensure(ambiguous.kind == VerdictKind::Ambiguous, format!("Bell verdict {}", ambiguous.kind.as_str()))?;
    let w = ambiguous.witness.as_ref().ok_or("no witness")?;
    let residual = w.residual(&bell).map_err(e)?;
    ensure(residual < 1e-6, format!("witness residual {residual:e}"))?;
    let canon = ambiguous.canonical.as_ref().ok_or("no canonical form")?;
    let distinct = w.terms().iter().all(|wt| {
        canon.terms().iter().all(|ct| {
            wt.factors[0].inner(&ct.factors[0]).map(|o| o.norm() < 1.0 - 1e-3).unwrap_or(false)
        })
    });
    ensure(distinct, "witness repeats the canonical factors")?;
    ensure(elapsed < TRIORTHO_BUDGET, format!("search took {elapsed:?}"))?;
    Ok(format!("psi_E unique, Bell x fixed ambiguous (witness residual {residual:.1e}), {elapsed:.2?}"))
}

fn criterion_8() -> Check {
    let t = fr::run_protocol().map_err(e)?;
    let mut operators = 0;
    for (k, step) in t.protocol().steps().iter().enumerate() {
        if let Action::Premeasure { spec, .. } = &step.action {
            let op = premeasurement_operator(t.stages()[k + 1].state.layout(), spec).map_err(e)?;
            ensure(op.unitarity_defect() < TOL, format!("{}: defect {:e}", step.name, op.unitarity_defect()))?;
            operators += 1;
        }
    }
    for stage in t.stages() {
        let st = &stage.state;
        ensure((st.norm() - 1.0).abs() < NORM_TOL, format!("{}: norm {}", stage.name, st.norm()))?;
        let rho = DensityOperator::pure(st);
        let first = st.layout().names()[0];
        let tr = rho.partial_trace(&[first]).map_err(e)?.trace().re;
        ensure(close(tr, 1.0), format!("{}: partial trace {tr}", stage.name))?;
        let basis = Basis::computational(&st.layout().select(&[first]).map_err(e)?);
        let dist = born(st, &[&basis]).map_err(e)?;
        ensure(close(dist.total(), 1.0), format!("{}: Born total {}", stage.name, dist.total()))?;
        let k = dist.entries().iter().position(|(_, p)| *p > 1e-6).ok_or("no outcome")?;
        let post = condition(st, &basis, k).map_err(e)?;
        ensure(born(&post, &[&basis]).map_err(e)?.point_mass(TOL).is_some(), format!("{}: no point mass", stage.name))?;
    }
    ensure(fr::run_protocol().map_err(e)? == t, "reruns differ")?;
    for (_, file, text) in bundled::ALL {
        let s = parse_scenario(text).map_err(e)?;
        ensure(parse_scenario(&s.to_string()).map_err(e)? == s, format!("{file} does not round-trip"))?;
    }
    Ok(format!("{operators} operators unitary, {} stages normalized, reruns identical, 4 scenarios round-trip", t.stages().len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("joint (Wbar,W) distribution, (okbar,ok) = 1/12", criterion_1),
        ("four rewrites of the initial state reconstruct it", criterion_2),
        ("statements 1-3 certain under pre-measurement", criterion_3),
        ("audit flags pre-measurement, clears decoherent", criterion_4),
        ("environment models agree on (R,A), differ on (R,S,A)", criterion_5),
        ("relative states in the rotated apparatus basis", criterion_6),
        ("triorthogonal verdicts and search budget", criterion_7),
        ("property spot checks", criterion_8),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
