//! Pre-measurement, environment coupling, Born-rule distributions, Lüders
//! conditioning and pointer-state reduction.

mod basis;
mod distribution;

pub use basis::{check_orthonormal, Basis};
pub use distribution::OutcomeDistribution;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hilbert::kernel;
use crate::hilbert::{DensityOperator, LinearOperator, StateVector, SubsystemLayout, C64};
use crate::{AMPLITUDE_TOL, PROBABILITY_FLOOR};

/// Correlate a target's basis states with apparatus records.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSpec {
    pub target: String,
    pub basis: Basis,
    pub apparatus: String,
    pub ready_label: String,
    pub outcome_labels: Vec<String>,
}

impl MeasurementSpec {
    pub fn new<S: Into<String>>(
        basis: Basis,
        apparatus: &str,
        ready_label: &str,
        outcome_labels: Vec<S>,
    ) -> Result<Self> {
        let names = basis.layout().names();
        if names.len() != 1 {
            return Err(Error::InvalidPartition(format!(
                "measurement target must be one subsystem, got [{}]",
                names.join(",")
            )));
        }
        let outcome_labels: Vec<String> = outcome_labels.into_iter().map(Into::into).collect();
        check_outcomes(&basis, &outcome_labels)?;
        Ok(Self {
            target: names[0].to_string(),
            basis,
            apparatus: apparatus.to_string(),
            ready_label: ready_label.to_string(),
            outcome_labels,
        })
    }

    /// The basis label recorded by an apparatus label, if any.
    pub fn recorded(&self, outcome_label: &str) -> Option<&str> {
        self.outcome_labels
            .iter()
            .position(|l| l == outcome_label)
            .map(|k| self.basis.labels()[k].as_str())
    }

    /// The apparatus label that records a basis label.
    pub fn record_of(&self, basis_label: &str) -> Option<&str> {
        self.basis.index_of(basis_label).map(|k| self.outcome_labels[k].as_str())
    }
}

fn check_outcomes(basis: &Basis, outcome_labels: &[String]) -> Result<()> {
    if outcome_labels.len() != basis.len() {
        return Err(Error::OutcomeCountMismatch {
            outcomes: outcome_labels.len(),
            basis: basis.len(),
        });
    }
    let mut seen = std::collections::HashSet::new();
    for l in outcome_labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::DuplicateOutcome(l.clone()));
        }
    }
    Ok(())
}

/// Unitary on `target ⊗ record` sending |s_i⟩|ready⟩ to |s_i⟩|a_i⟩ and the
/// part of |x⟩|ready⟩ outside span{s_i} to itself. The remaining columns are
/// filled by Gram-Schmidt over computational vectors, trying each column's
/// own index first and then the lowest free index.
fn correlating_matrix(basis: &Basis, record_dim: usize, ready: usize, outcomes: &[usize]) -> DMatrix<C64> {
    let target_dim = basis.layout().dim();
    let n = target_dim * record_dim;
    let at = |t: usize, a: usize| t * record_dim + a;

    let mut columns: Vec<Option<DVector<C64>>> = vec![None; n];
    for x in 0..target_dim {
        let mut col = DVector::zeros(n);
        let mut residual: DVector<C64> = DVector::zeros(target_dim);
        residual[x] = C64::new(1.0, 0.0);
        for (k, &a) in outcomes.iter().enumerate() {
            let s = basis.raw(k);
            let overlap = s[x].conj();
            for t in 0..target_dim {
                col[at(t, a)] += s[t] * overlap;
                residual[t] -= s[t] * overlap;
            }
        }
        for t in 0..target_dim {
            col[at(t, ready)] += residual[t];
        }
        columns[at(x, ready)] = Some(col);
    }

    let mut placed: Vec<DVector<C64>> = columns.iter().flatten().cloned().collect();
    for c in 0..n {
        if columns[c].is_some() {
            continue;
        }
        let candidates = std::iter::once(c).chain(0..n);
        for k in candidates {
            let mut v = DVector::zeros(n);
            v[k] = C64::new(1.0, 0.0);
            for _ in 0..2 {
                for q in &placed {
                    let proj = q.dotc(&v);
                    v -= q * proj;
                }
            }
            let norm = v.norm();
            if norm > 1e-6 {
                v /= C64::new(norm, 0.0);
                placed.push(v.clone());
                columns[c] = Some(v);
                break;
            }
        }
    }

    let cols: Vec<DVector<C64>> = columns.into_iter().map(|c| c.expect("completion spans the space")).collect();
    DMatrix::from_columns(&cols)
}

struct Correlation {
    positions: Vec<usize>,
    local: DMatrix<C64>,
}

fn prepare_correlation(
    state: &StateVector,
    basis: &Basis,
    record: &str,
    ready_label: &str,
    outcome_labels: &[String],
) -> Result<Correlation> {
    check_outcomes(basis, outcome_labels)?;
    let layout = state.layout();
    let mut positions = basis.check_against(layout)?;
    let record_position = layout.position(record)?;
    if positions.contains(&record_position) {
        return Err(Error::InvalidPartition(format!("`{record}` cannot record itself")));
    }
    let apparatus = layout.subsystem(record)?;
    let ready = apparatus.label_index(ready_label)?;
    let outcomes = outcome_labels
        .iter()
        .map(|l| apparatus.label_index(l))
        .collect::<Result<Vec<_>>>()?;
    let needed = outcomes.len() + usize::from(!outcomes.contains(&ready));
    if apparatus.dim() < needed {
        return Err(Error::ApparatusTooSmall {
            apparatus: record.to_string(),
            dim: apparatus.dim(),
            needed,
        });
    }

    let mut ready_vec = DVector::zeros(apparatus.dim());
    ready_vec[ready] = C64::new(1.0, 0.0);
    let rest = kernel::contract(state.amplitudes(), &layout.dims(), &[record_position], &ready_vec);
    let overlap = rest.norm_squared();
    if overlap < 1.0 - AMPLITUDE_TOL {
        return Err(Error::ApparatusNotReady {
            apparatus: record.to_string(),
            ready: ready_label.to_string(),
            overlap,
        });
    }

    let local = correlating_matrix(basis, apparatus.dim(), ready, &outcomes);
    let defect = kernel::unitarity_defect(&local);
    if defect > AMPLITUDE_TOL {
        return Err(Error::NotUnitary { defect });
    }
    positions.push(record_position);
    Ok(Correlation { positions, local })
}

/// The full-layout unitary U^M that [`premeasure`] applies.
pub fn premeasurement_operator(layout: &SubsystemLayout, spec: &MeasurementSpec) -> Result<LinearOperator> {
    let ready = StateVector::basis(layout.clone(), &ready_tuple(layout, &spec.apparatus, &spec.ready_label)?)?;
    let c = prepare_correlation(&ready, &spec.basis, &spec.apparatus, &spec.ready_label, &spec.outcome_labels)?;
    let names: Vec<&str> = c.positions.iter().map(|&p| layout.subsystems()[p].name()).collect();
    LinearOperator::embed_unitary(layout.clone(), &names, &c.local)
}

fn ready_tuple<'a>(layout: &'a SubsystemLayout, apparatus: &str, ready: &'a str) -> Result<Vec<&'a str>> {
    layout.position(apparatus)?;
    Ok(layout
        .subsystems()
        .iter()
        .map(|s| if s.name() == apparatus { ready } else { s.labels()[0].as_str() })
        .collect())
}

/// Apply U^M: Σ c_i|s_i⟩ ⊗ |ready⟩ ↦ Σ c_i|s_i⟩ ⊗ |a_i⟩.
pub fn premeasure(state: &StateVector, spec: &MeasurementSpec) -> Result<StateVector> {
    let c = prepare_correlation(state, &spec.basis, &spec.apparatus, &spec.ready_label, &spec.outcome_labels)?;
    let out = kernel::apply_local(state.amplitudes(), &state.layout().dims(), &c.positions, &c.local);
    StateVector::from_unit(state.layout().clone(), out)
}

/// Norm of what `branches` leave unexplained: ‖ψ − Σ_k (|b_k⟩⟨b_k| ⊗ I) ψ‖.
pub fn branching_residual(state: &StateVector, branches: &Basis) -> Result<f64> {
    let positions = branches.check_against(state.layout())?;
    let dims = state.layout().dims();
    let mut projector = DMatrix::zeros(branches.layout().dim(), branches.layout().dim());
    for k in 0..branches.len() {
        let b = branches.raw(k);
        projector += b * b.adjoint();
    }
    let kept = kernel::apply_local(state.amplitudes(), &dims, &positions, &projector);
    Ok((state.amplitudes() - kept).norm())
}

/// Apply U^ℰ = Σ_k |ε_k⟩⟨ε_0| ⊗ |b_k⟩⟨b_k| (completed to a unitary).
pub fn environment_couple(
    state: &StateVector,
    branches: &Basis,
    environment: &str,
    ready_label: &str,
    env_labels: &[String],
) -> Result<StateVector> {
    let residual = branching_residual(state, branches)?;
    if residual > AMPLITUDE_TOL {
        return Err(Error::IncompleteBranching { residual });
    }
    let c = prepare_correlation(state, branches, environment, ready_label, env_labels)?;
    let out = kernel::apply_local(state.amplitudes(), &state.layout().dims(), &c.positions, &c.local);
    StateVector::from_unit(state.layout().clone(), out)
}

/// One way the environment may single out pointer states: a named family of
/// orthonormal branches, each recorded in its own environment level.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentModel {
    name: String,
    environment: String,
    branches: Basis,
}

impl EnvironmentModel {
    pub fn new(name: &str, environment: &str, branches: Basis) -> Self {
        Self {
            name: name.to_string(),
            environment: environment.to_string(),
            branches,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn environment(&self) -> &str {
        &self.environment
    }

    pub fn branches(&self) -> &Basis {
        &self.branches
    }

    pub fn ready_label(&self) -> String {
        format!("{}0", self.environment)
    }

    pub fn record_labels(&self) -> Vec<String> {
        (1..=self.branches.len()).map(|k| format!("{}{k}", self.environment)).collect()
    }

    /// Ready state plus one level per branch.
    pub fn environment_layout(&self) -> SubsystemLayout {
        let mut labels = vec![self.ready_label()];
        labels.extend(self.record_labels());
        SubsystemLayout::single(self.environment.clone(), labels).expect("generated labels are distinct")
    }

    /// Append the environment in its ready state and couple it.
    pub fn couple(&self, state: &StateVector) -> Result<StateVector> {
        let env = StateVector::basis(self.environment_layout(), &[self.ready_label()])?;
        let attached = state.tensor(&env)?;
        environment_couple(
            &attached,
            &self.branches,
            &self.environment,
            &self.ready_label(),
            &self.record_labels(),
        )
    }

    /// Couple and trace the environment back out.
    pub fn reduce(&self, state: &StateVector) -> Result<DensityOperator> {
        pointer_reduce(&self.couple(state)?, &self.environment)
    }
}

/// Joint Born distribution over several (disjoint) measured subsystems.
pub fn born(state: &StateVector, targets: &[&Basis]) -> Result<OutcomeDistribution> {
    let layout = state.layout();
    let mut positions = Vec::new();
    let mut names = Vec::new();
    for b in targets {
        for p in b.check_against(layout)? {
            if positions.contains(&p) {
                return Err(Error::InvalidPartition("measured subsystems overlap".into()));
            }
            positions.push(p);
        }
        names.push(b.layout().names().join(","));
    }
    let split = kernel::Split::new(&layout.dims(), &positions);
    let m = split.to_matrix(state.amplitudes());

    let counts: Vec<usize> = targets.iter().map(|b| b.len()).collect();
    let total: usize = counts.iter().product();
    let mut entries = Vec::with_capacity(total);
    let mut choice = vec![0usize; targets.len()];
    for _ in 0..total {
        let mut bra = DVector::from_element(1, C64::new(1.0, 0.0));
        let mut key = Vec::with_capacity(targets.len());
        for (b, &k) in targets.iter().zip(&choice) {
            bra = bra.kronecker(b.raw(k));
            key.push(b.labels()[k].clone());
        }
        let p: f64 = (0..split.rest_dim)
            .map(|r| {
                (0..split.local_dim)
                    .map(|l| bra[l].conj() * m[(l, r)])
                    .sum::<C64>()
                    .norm_sqr()
            })
            .sum();
        entries.push((key, p));
        for slot in (0..choice.len()).rev() {
            choice[slot] += 1;
            if choice[slot] < counts[slot] {
                break;
            }
            choice[slot] = 0;
        }
    }
    Ok(OutcomeDistribution::new(names, entries))
}

/// Project on `basis[outcome_index]` and renormalize.
pub fn condition(state: &StateVector, basis: &Basis, outcome_index: usize) -> Result<StateVector> {
    let positions = basis.check_against(state.layout())?;
    let b = basis.raw(outcome_index);
    let projector = b * b.adjoint();
    let projected = kernel::apply_local(state.amplitudes(), &state.layout().dims(), &positions, &projector);
    let probability = projected.norm_squared();
    if probability < PROBABILITY_FLOOR {
        return Err(Error::ImpossibleOutcome { probability });
    }
    StateVector::from_amplitudes(state.layout().clone(), projected)
}

/// Lüders update of a density operator on one outcome.
pub fn condition_density(rho: &DensityOperator, basis: &Basis, outcome_index: usize) -> Result<DensityOperator> {
    let block = rho.project(&basis.vectors()[outcome_index])?;
    DensityOperator::from_block(rho.layout().clone(), block)
}

/// Trace out the environment from the full pure state.
pub fn pointer_reduce(state: &StateVector, environment: &str) -> Result<DensityOperator> {
    DensityOperator::pure(state).trace_out(&[environment])
}

/// Weights tr(P_k ρ) of each branch of a model, in branch order.
pub fn branch_weights(rho: &DensityOperator, branches: &Basis) -> Result<Vec<f64>> {
    branches
        .vectors()
        .iter()
        .map(|b| Ok(rho.project(b)?.trace().re))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{re, sqrt_frac};
    use approx::assert_abs_diff_eq;

    fn coin() -> SubsystemLayout {
        SubsystemLayout::single("R", vec!["head", "tail"]).unwrap()
    }

    fn apparatus() -> SubsystemLayout {
        SubsystemLayout::single("Fbar", vec!["Fbar0", "Fbar1", "Fbar2"]).unwrap()
    }

    fn coin_spec() -> MeasurementSpec {
        MeasurementSpec::new(Basis::from_labels(&coin(), &["head", "tail"]).unwrap(), "Fbar", "Fbar0", vec!["Fbar1", "Fbar2"]).unwrap()
    }

    #[test]
    fn correlates_arbitrary_coin_state() {
        let c1 = C64::new(0.6, 0.0);
        let c2 = C64::new(0.0, 0.8);
        let coin_state = StateVector::make(coin(), &[(vec!["head"], c1), (vec!["tail"], c2)]).unwrap();
        let ready = StateVector::basis(apparatus(), &["Fbar0"]).unwrap();
        let out = premeasure(&coin_state.tensor(&ready).unwrap(), &coin_spec()).unwrap();
        assert_abs_diff_eq!((out.amplitude(&["head", "Fbar1"]).unwrap() - c1).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((out.amplitude(&["tail", "Fbar2"]).unwrap() - c2).norm(), 0.0, epsilon = 1e-12);
        assert_eq!(out.support().len(), 2);
    }

    #[test]
    fn basis_state_gives_classical_record() {
        let s = StateVector::basis(coin().concat(&apparatus()).unwrap(), &["head", "Fbar0"]).unwrap();
        let out = premeasure(&s, &coin_spec()).unwrap();
        assert_eq!(out.amplitude(&["head", "Fbar1"]).unwrap(), re(1.0));
    }

    #[test]
    fn apparatus_must_be_ready() {
        let s = StateVector::basis(coin().concat(&apparatus()).unwrap(), &["head", "Fbar1"]).unwrap();
        assert!(matches!(premeasure(&s, &coin_spec()), Err(Error::ApparatusNotReady { .. })));
    }

    #[test]
    fn operator_is_unitary_and_matches_kernel() {
        let layout = coin().concat(&apparatus()).unwrap();
        let op = premeasurement_operator(&layout, &coin_spec()).unwrap();
        assert!(op.unitarity_defect() < 1e-12);
        let s = StateVector::make(layout, &[(vec!["head", "Fbar0"], sqrt_frac(1.0, 3.0)), (vec!["tail", "Fbar0"], sqrt_frac(2.0, 3.0))]).unwrap();
        let a = op.apply(&s).unwrap();
        let b = premeasure(&s, &coin_spec()).unwrap();
        assert!((a.amplitudes() - b.amplitudes()).norm() < 1e-12);
    }

    #[test]
    fn completion_is_identity_where_possible() {
        // the F̄₀ sector maps into records; |head,F̄₁⟩ and friends get the
        // lowest free computational vectors
        let layout = coin().concat(&apparatus()).unwrap();
        let op = premeasurement_operator(&layout, &coin_spec()).unwrap();
        for col in 0..op.matrix().ncols() {
            let nonzero = op.matrix().column(col).iter().filter(|z| z.norm() > 1e-12).count();
            assert_eq!(nonzero, 1, "column {col} is a permutation column");
        }
    }

    #[test]
    fn born_on_coin() {
        let s = StateVector::make(coin(), &[(vec!["head"], sqrt_frac(1.0, 3.0)), (vec!["tail"], sqrt_frac(2.0, 3.0))]).unwrap();
        let basis = Basis::from_labels(&coin(), &["head", "tail"]).unwrap();
        let d = born(&s, &[&basis]).unwrap();
        assert_abs_diff_eq!(d.probability(&["head"]).unwrap(), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.probability(&["tail"]).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
        let point = StateVector::basis(coin(), &["tail"]).unwrap();
        assert_eq!(born(&point, &[&basis]).unwrap().point_mass(1e-12), Some(&["tail".to_string()][..]));
    }

    #[test]
    fn conditioning_on_zero_weight_fails() {
        let s = StateVector::basis(coin(), &["head"]).unwrap();
        let basis = Basis::from_labels(&coin(), &["head", "tail"]).unwrap();
        assert!(matches!(condition(&s, &basis, 1), Err(Error::ImpossibleOutcome { .. })));
    }

    #[test]
    fn single_branch_coupling_stays_product() {
        let s = StateVector::basis(coin(), &["tail"]).unwrap();
        let branches = Basis::from_labels(&coin(), &["tail"]).unwrap();
        let model = EnvironmentModel::new("trivial", "E", branches);
        let coupled = model.couple(&s).unwrap();
        assert_eq!(coupled.amplitude(&["tail", "E1"]).unwrap(), re(1.0));
        let rho = pointer_reduce(&coupled, "E").unwrap();
        assert_abs_diff_eq!(rho.purity(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn incomplete_branching_is_rejected() {
        let s = StateVector::make(coin(), &[(vec!["head"], re(1.0)), (vec!["tail"], re(1.0))]).unwrap();
        let branches = Basis::from_labels(&coin(), &["tail"]).unwrap();
        let model = EnvironmentModel::new("partial", "E", branches);
        assert!(matches!(model.couple(&s), Err(Error::IncompleteBranching { .. })));
    }

    #[test]
    fn outcome_count_must_match() {
        let b = Basis::from_labels(&coin(), &["head", "tail"]).unwrap();
        assert!(matches!(
            MeasurementSpec::new(b.clone(), "Fbar", "Fbar0", vec!["Fbar1"]),
            Err(Error::OutcomeCountMismatch { .. })
        ));
        assert!(matches!(
            MeasurementSpec::new(b, "Fbar", "Fbar0", vec!["Fbar1", "Fbar1"]),
            Err(Error::DuplicateOutcome(_))
        ));
    }

    #[test]
    fn apparatus_dimension_is_checked() {
        let small = SubsystemLayout::single("A", vec!["a0", "a1"]).unwrap();
        let s = StateVector::basis(coin().concat(&small).unwrap(), &["head", "a0"]).unwrap();
        let spec = MeasurementSpec::new(Basis::from_labels(&coin(), &["head", "tail"]).unwrap(), "A", "a0", vec!["a1", "a0"]);
        // ready doubles as an outcome: two levels suffice
        assert!(premeasure(&s, &spec.unwrap()).is_ok());
        let spec = MeasurementSpec::new(Basis::from_labels(&coin(), &["head", "tail"]).unwrap(), "A", "a0", vec!["a1", "a1x"]).unwrap();
        assert!(premeasure(&s, &spec).is_err());
    }
}
