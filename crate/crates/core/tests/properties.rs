use nalgebra::{DMatrix, DVector};
use pointerlab_core::decomposition::{relative_states, schmidt, triortho_verdict, VerdictKind};
use pointerlab_core::experiment::{fr, Protocol};
use pointerlab_core::hilbert::{DensityOperator, LinearOperator, StateVector, SubsystemLayout, C64};
use pointerlab_core::measurement::{born, condition, premeasurement_operator, Basis, MeasurementSpec};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn layout(dims: &[(&str, usize)]) -> SubsystemLayout {
    SubsystemLayout::new(
        dims.iter()
            .map(|(n, d)| (n.to_string(), (0..*d).map(|k| format!("{n}{k}")).collect::<Vec<_>>())),
    )
    .unwrap()
}

fn amplitudes(n: usize) -> impl Strategy<Value = DVector<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        .prop_filter("non-zero", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3)
        .prop_map(|v| DVector::from_iterator(v.len(), v.into_iter().map(|(a, b)| C64::new(a, b))))
}

fn state(l: SubsystemLayout) -> impl Strategy<Value = StateVector> {
    amplitudes(l.dim()).prop_map(move |a| StateVector::from_amplitudes(l.clone(), a).unwrap())
}

/// Q factor of a random complex matrix.
fn unitary(n: usize) -> impl Strategy<Value = DMatrix<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n)
        .prop_map(move |v| {
            DMatrix::from_iterator(n, n, v.into_iter().map(|(a, b)| C64::new(a, b))).qr().q()
        })
        .prop_filter("full rank", move |q| (q.adjoint() * q - DMatrix::identity(n, n)).norm() < 1e-8)
}

fn rotated_basis(l: &SubsystemLayout, u: &DMatrix<C64>) -> Basis {
    Basis::new(
        (0..l.dim())
            .map(|k| (format!("b{k}"), StateVector::from_amplitudes(l.clone(), u.column(k).into_owned()).unwrap()))
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partial_trace_is_linear_and_trace_preserving(
        a in state(layout(&[("a", 2), ("b", 3)])),
        b in state(layout(&[("a", 2), ("b", 3)])),
        w in 0.0f64..1.0,
    ) {
        let (ra, rb) = (DensityOperator::pure(&a), DensityOperator::pure(&b));
        let mixed = DensityOperator::mixture(&[(w, &ra), (1.0 - w, &rb)]).unwrap();
        let lhs = mixed.partial_trace(&["a"]).unwrap();
        let rhs = ra.partial_trace(&["a"]).unwrap().matrix() * C64::from(w)
            + rb.partial_trace(&["a"]).unwrap().matrix() * C64::from(1.0 - w);
        prop_assert!((lhs.matrix() - rhs).norm() < TOL);
        prop_assert!((lhs.trace().re - 1.0).abs() < TOL);
        prop_assert!((mixed.trace_out(&["a"]).unwrap().trace().re - 1.0).abs() < TOL);
    }

    #[test]
    fn premeasurement_operator_is_unitary(u in unitary(2), s in state(layout(&[("s", 2)]))) {
        let target = layout(&[("s", 2)]);
        let spec = MeasurementSpec::new(rotated_basis(&target, &u), "A", "A0", vec!["A1", "A2"]).unwrap();
        let full = target.concat(&layout(&[("A", 3)])).unwrap();
        let op = premeasurement_operator(&full, &spec).unwrap();
        prop_assert!(op.unitarity_defect() < TOL);
        let ready = s.tensor(&StateVector::basis(layout(&[("A", 3)]), &["A0"]).unwrap()).unwrap();
        prop_assert!((op.apply(&ready).unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn schmidt_coefficients_survive_local_unitaries(
        s in state(layout(&[("a", 2), ("b", 3)])),
        ua in unitary(2),
        ub in unitary(3),
    ) {
        let l = s.layout().clone();
        let moved = LinearOperator::embed_unitary(l.clone(), &["a"], &ua).unwrap().apply(&s).unwrap();
        let moved = LinearOperator::embed_unitary(l, &["b"], &ub).unwrap().apply(&moved).unwrap();
        let before = schmidt(&s, &["a"], &["b"]).unwrap().coefficients();
        let after = schmidt(&moved, &["a"], &["b"]).unwrap().coefficients();
        prop_assert_eq!(before.len(), after.len());
        for (x, y) in before.iter().zip(&after) {
            prop_assert!((x - y).abs() < TOL);
        }
        prop_assert!((before.iter().map(|c| c * c).sum::<f64>() - 1.0).abs() < TOL);
    }

    #[test]
    fn born_sums_to_one_and_conditioning_fixes_the_outcome(
        s in state(layout(&[("a", 2), ("b", 3)])),
        u in unitary(3),
        pick in 0usize..3,
    ) {
        let basis = rotated_basis(&layout(&[("b", 3)]), &u);
        let dist = born(&s, &[&basis]).unwrap();
        prop_assert!((dist.total() - 1.0).abs() < TOL);
        prop_assume!(dist.entries()[pick].1 > 1e-6);
        let post = condition(&s, &basis, pick).unwrap();
        let again = born(&post, &[&basis]).unwrap();
        prop_assert_eq!(again.point_mass(TOL), Some(&[format!("b{pick}")][..]));
    }

    #[test]
    fn relative_state_weights_sum_to_one(
        s in state(layout(&[("a", 2), ("b", 3)])),
        u in unitary(2),
    ) {
        let d = relative_states(&s, &rotated_basis(&layout(&[("a", 2)]), &u)).unwrap();
        prop_assert!((d.weights().iter().sum::<f64>() - 1.0).abs() < TOL);
        prop_assert!(d.residual(&s).unwrap() < TOL);
    }

    #[test]
    fn every_protocol_stage_stays_normalized(init in state(fr::build_init().layout().clone())) {
        let mut protocol = Protocol::new(init);
        for step in fr::protocol().steps() {
            protocol.push(&step.name, step.action.clone());
        }
        let transcript = protocol.run().unwrap();
        for stage in transcript.stages() {
            prop_assert!((stage.state.norm() - 1.0).abs() < 1e-12, "{}", stage.name);
        }
    }
}

fn ghz() -> StateVector {
    let l = layout(&[("x", 2), ("y", 2), ("z", 2)]);
    StateVector::make_real(l, &[(&["x0", "y0", "z0"], 1.0), (&["x1", "y1", "z1"], 1.0)]).unwrap()
}

#[test]
fn unique_verdict_ignores_global_phase_and_relabeling() {
    let base = triortho_verdict(&ghz(), [&["x"], &["y"], &["z"]]).unwrap();
    assert_eq!(base.kind, VerdictKind::Unique);

    let phase = C64::from_polar(1.0, 0.7);
    let shifted = StateVector::from_amplitudes(ghz().layout().clone(), ghz().amplitudes() * phase).unwrap();
    assert_eq!(triortho_verdict(&shifted, [&["x"], &["y"], &["z"]]).unwrap().kind, VerdictKind::Unique);

    let relabeled = ghz().reordered(&["z", "x", "y"]).unwrap();
    assert_eq!(triortho_verdict(&relabeled, [&["z"], &["x"], &["y"]]).unwrap().kind, VerdictKind::Unique);
    assert_eq!(triortho_verdict(&ghz(), [&["y"], &["z"], &["x"]]).unwrap().kind, VerdictKind::Unique);
}
