//! Triorthogonal decomposition and the brute-force uniqueness check.
//!
//! Canonical form: contract the middle part against a random vector; the
//! SVD of what is left yields orthonormal outer factors, from which the
//! middle factors follow by projection. Alternatives are searched by
//! rotating the first outer factor set with V = exp(iH) (H Hermitian, zero
//! diagonal) and asking whether every ⟨A'_s|ψ⟩ is a product.

use argmin::core::{CostFunction, Error as SolverError, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Decomposition, DecompositionTerm};
use crate::error::{Error, Result};
use crate::hilbert::{StateVector, SubsystemLayout, C64};
use crate::PROBABILITY_FLOOR;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictKind {
    Unique,
    Ambiguous,
    NoDecomposition,
}

impl VerdictKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            VerdictKind::Unique => "unique",
            VerdictKind::Ambiguous => "ambiguous",
            VerdictKind::NoDecomposition => "no_decomposition",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Points per real axis of the deterministic grid, rank 2.
    pub grid_steps_rank2: usize,
    /// Points per real axis, rank 3 (6 axes).
    pub grid_steps_rank3: usize,
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: u64,
    pub residual_tol: f64,
    pub trivial_tol: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            grid_steps_rank2: 41,
            grid_steps_rank3: 5,
            restarts: 1000,
            seed: 0x5eed_0f_a11,
            max_iters: 400,
            residual_tol: 1e-6,
            trivial_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SearchStats {
    pub rank: usize,
    pub grid_points: usize,
    pub restarts: usize,
    /// Smallest residual among non-trivial candidates; infinite if none.
    pub best_nontrivial_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessVerdict {
    pub kind: VerdictKind,
    pub canonical: Option<Decomposition>,
    /// Present iff ambiguous.
    pub witness: Option<Decomposition>,
    /// Reconstruction residual of the canonical form.
    pub residual: f64,
    pub stats: SearchStats,
}

pub fn triortho_verdict(state: &StateVector, tripartition: [&[&str]; 3]) -> Result<UniquenessVerdict> {
    triortho_verdict_with(state, tripartition, &SearchConfig::default())
}

pub fn triortho_verdict_with(
    state: &StateVector,
    tripartition: [&[&str]; 3],
    config: &SearchConfig,
) -> Result<UniquenessVerdict> {
    check_tripartition(state.layout(), &tripartition)?;

    // middle candidates: the declared one first
    let arrangements = [[0usize, 1, 2], [1, 0, 2], [0, 2, 1]];
    let mut best: Option<Canonical> = None;
    for arrangement in arrangements {
        let tensor = Tensor3::new(state, &tripartition, arrangement)?;
        let candidate = canonical_search(&tensor, config.seed);
        if best.as_ref().is_none_or(|b| candidate.residual < b.residual - 1e-15) {
            best = Some(candidate);
        }
        if best.as_ref().is_some_and(|b| b.residual < config.residual_tol) {
            break;
        }
    }
    let canonical = best.expect("at least one arrangement");
    let mut stats = SearchStats {
        rank: canonical.terms.len(),
        best_nontrivial_residual: f64::INFINITY,
        ..SearchStats::default()
    };
    if canonical.residual >= config.residual_tol {
        return Ok(UniquenessVerdict {
            kind: VerdictKind::NoDecomposition,
            canonical: None,
            witness: None,
            residual: canonical.residual,
            stats,
        });
    }
    let decomposition = canonical.to_decomposition(&canonical.tensor)?;
    if canonical.terms.len() <= 1 {
        return Ok(UniquenessVerdict {
            kind: VerdictKind::Unique,
            canonical: Some(decomposition),
            witness: None,
            residual: canonical.residual,
            stats,
        });
    }

    let search = AlternativeSearch::new(&canonical);
    let found = search.run(config, &mut stats);
    let witness = match found {
        Some(v) => Some(search.witness(&canonical, &v)?),
        None => None,
    };
    Ok(UniquenessVerdict {
        kind: if witness.is_some() { VerdictKind::Ambiguous } else { VerdictKind::Unique },
        canonical: Some(decomposition),
        witness,
        residual: canonical.residual,
        stats,
    })
}

fn check_tripartition(layout: &SubsystemLayout, parts: &[&[&str]; 3]) -> Result<()> {
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidPartition("every part of a tripartition needs a subsystem".into()));
    }
    let all: Vec<&str> = parts.iter().flat_map(|p| p.iter().copied()).collect();
    layout.positions(&all)?;
    if all.len() != layout.len() {
        return Err(Error::InvalidPartition(format!(
            "[{}] does not cover {}",
            parts.iter().map(|p| p.join(",")).collect::<Vec<_>>().join(" | "),
            layout
        )));
    }
    Ok(())
}

/// ψ[i,j,k] over (outer1, middle, outer2), remembering where each part sits
/// in the caller's tripartition.
struct Tensor3 {
    amps: DVector<C64>,
    dims: [usize; 3],
    layouts: [SubsystemLayout; 3],
    /// arrangement[slot] = index into the caller's tripartition
    arrangement: [usize; 3],
    source: StateVector,
}

impl Tensor3 {
    fn new(state: &StateVector, parts: &[&[&str]; 3], arrangement: [usize; 3]) -> Result<Self> {
        let order: Vec<&str> = arrangement.iter().flat_map(|&a| parts[a].iter().copied()).collect();
        let ordered = state.reordered(&order)?;
        let layouts = arrangement.map(|a| state.layout().select(parts[a]).expect("validated"));
        Ok(Self {
            amps: ordered.amplitudes().clone(),
            dims: [layouts[0].dim(), layouts[1].dim(), layouts[2].dim()],
            layouts,
            arrangement,
            source: state.clone(),
        })
    }

    fn at(&self, i: usize, j: usize, k: usize) -> C64 {
        self.amps[(i * self.dims[1] + j) * self.dims[2] + k]
    }

    /// Σ_j conj(x_j) ψ[i,j,k]
    fn contract_middle(&self, x: &DVector<C64>) -> DMatrix<C64> {
        DMatrix::from_fn(self.dims[0], self.dims[2], |i, k| {
            (0..self.dims[1]).map(|j| x[j].conj() * self.at(i, j, k)).sum()
        })
    }

    /// Σ_{i,k} conj(a_i) conj(c_k) ψ[i,j,k]
    fn project_outer(&self, a: &DVector<C64>, c: &DVector<C64>) -> DVector<C64> {
        DVector::from_fn(self.dims[1], |j, _| {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..self.dims[0] {
                for k in 0..self.dims[2] {
                    acc += a[i].conj() * c[k].conj() * self.at(i, j, k);
                }
            }
            acc
        })
    }

    /// ⟨a| ψ as a (middle × outer2) matrix.
    fn project_first(&self, a: &DVector<C64>) -> DMatrix<C64> {
        DMatrix::from_fn(self.dims[1], self.dims[2], |j, k| {
            (0..self.dims[0]).map(|i| a[i].conj() * self.at(i, j, k)).sum()
        })
    }

    /// Turn slot-ordered factors into a Decomposition in caller part order.
    fn decomposition(&self, terms: Vec<(C64, [DVector<C64>; 3])>) -> Result<Decomposition> {
        let mut by_part: [usize; 3] = [0; 3];
        for (slot, &a) in self.arrangement.iter().enumerate() {
            by_part[a] = slot;
        }
        let parts = by_part
            .iter()
            .map(|&slot| self.layouts[slot].names().into_iter().map(String::from).collect())
            .collect();
        let terms = terms
            .into_iter()
            .map(|(coefficient, factors)| {
                Ok(DecompositionTerm {
                    coefficient,
                    labels: Vec::new(),
                    factors: by_part
                        .iter()
                        .map(|&slot| StateVector::from_amplitudes(self.layouts[slot].clone(), factors[slot].clone()))
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Decomposition::new(parts, terms)
    }
}

struct Canonical {
    tensor: Tensor3,
    /// (c_s, [outer1, middle, outer2]) with unit factors
    terms: Vec<(f64, [DVector<C64>; 3])>,
    residual: f64,
}

impl Canonical {
    fn to_decomposition(&self, tensor: &Tensor3) -> Result<Decomposition> {
        tensor.decomposition(
            self.terms
                .iter()
                .map(|(c, f)| (C64::new(*c, 0.0), f.clone()))
                .collect(),
        )
    }
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<C64> {
    DVector::from_fn(n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn canonical_search(tensor: &Tensor3, seed: u64) -> Canonical {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<(f64, [DVector<C64>; 3])>, f64)> = None;
    for _ in 0..4 {
        let x = random_vector(&mut rng, tensor.dims[1]);
        let svd = SVD::new(tensor.contract_middle(&x), true, true);
        let u = svd.u.expect("requested");
        let v_t = svd.v_t.expect("requested");
        let top = svd.singular_values[0];
        let mut terms = Vec::new();
        for (s, &sigma) in svd.singular_values.iter().enumerate() {
            if top == 0.0 || sigma <= 1e-6 * top {
                break;
            }
            let a = u.column(s).into_owned();
            let c = v_t.row(s).transpose();
            let b = tensor.project_outer(&a, &c);
            let weight = b.norm();
            if weight * weight < PROBABILITY_FLOOR {
                continue;
            }
            terms.push((weight, [a, b / C64::new(weight, 0.0), c]));
        }
        terms.sort_by(|x, y| y.0.total_cmp(&x.0));
        let residual = residual_of(tensor, &terms);
        if best.as_ref().is_none_or(|b| residual < b.1) {
            best = Some((terms, residual));
        }
    }
    let (terms, residual) = best.expect("four attempts");
    Canonical {
        tensor: Tensor3 {
            amps: tensor.amps.clone(),
            dims: tensor.dims,
            layouts: tensor.layouts.clone(),
            arrangement: tensor.arrangement,
            source: tensor.source.clone(),
        },
        terms,
        residual,
    }
}

fn residual_of(tensor: &Tensor3, terms: &[(f64, [DVector<C64>; 3])]) -> f64 {
    let mut rebuilt = DVector::<C64>::zeros(tensor.amps.len());
    for (c, [a, b, z]) in terms {
        rebuilt += a.kronecker(b).kronecker(z) * C64::new(*c, 0.0);
    }
    (rebuilt - &tensor.amps).norm()
}

/// Unitary exp(iH) for Hermitian H with zero diagonal, parametrized by the
/// real and imaginary parts of its upper triangle.
fn rotation(r: usize, params: &[f64]) -> DMatrix<C64> {
    let mut h = DMatrix::<C64>::zeros(r, r);
    let mut p = 0;
    for i in 0..r {
        for j in i + 1..r {
            let z = C64::new(params[p], params[p + 1]);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
            p += 2;
        }
    }
    (h * C64::new(0.0, 1.0)).exp()
}

/// Distance of V from a phased permutation: min over permutations of
/// max_s (1 − |V[π(s), s]|).
fn trivial_distance(v: &DMatrix<C64>) -> f64 {
    let r = v.nrows();
    let mut perm: Vec<usize> = (0..r).collect();
    let mut best = f64::INFINITY;
    permutations(&mut perm, 0, &mut |p| {
        let d = (0..r).map(|s| 1.0 - v[(p[s], s)].norm()).fold(0.0, f64::max);
        best = best.min(d);
    });
    best
}

fn permutations(items: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, visit);
        items.swap(k, i);
    }
}

struct AlternativeSearch {
    rank: usize,
    /// ⟨A_t|ψ⟩ as (middle × outer2) matrices
    blocks: Vec<DMatrix<C64>>,
    outer: Vec<DVector<C64>>,
}

impl AlternativeSearch {
    fn new(canonical: &Canonical) -> Self {
        let outer: Vec<DVector<C64>> = canonical.terms.iter().map(|(_, f)| f[0].clone()).collect();
        let blocks = outer.iter().map(|a| canonical.tensor.project_first(a)).collect();
        Self {
            rank: outer.len(),
            blocks,
            outer,
        }
    }

    fn params(&self) -> usize {
        self.rank * (self.rank - 1)
    }

    /// φ_s = Σ_t conj(V[t,s]) Φ_t
    fn rotated_blocks(&self, v: &DMatrix<C64>) -> Vec<DMatrix<C64>> {
        (0..self.rank)
            .map(|s| {
                let mut phi = DMatrix::zeros(self.blocks[0].nrows(), self.blocks[0].ncols());
                for (t, block) in self.blocks.iter().enumerate() {
                    phi += block * v[(t, s)].conj();
                }
                phi
            })
            .collect()
    }

    /// Σ_s e₂(σ²(φ_s)) = Σ_s (‖φ_s‖⁴ − ‖φ_s φ_s†‖²_F)/2; zero iff every
    /// φ_s has rank ≤ 1.
    fn objective(&self, params: &[f64]) -> f64 {
        let v = rotation(self.rank, params);
        self.rotated_blocks(&v)
            .iter()
            .map(|phi| {
                let n2 = phi.norm_squared();
                let gram = phi * phi.adjoint();
                0.5 * (n2 * n2 - gram.norm_squared())
            })
            .sum::<f64>()
            .max(0.0)
    }

    /// Reconstruction residual when each φ_s is cut to its top singular pair.
    fn rank_one_residual(&self, v: &DMatrix<C64>) -> f64 {
        self.rotated_blocks(v)
            .iter()
            .map(|phi| {
                let sv = phi.singular_values();
                sv.iter().skip(1).map(|s| s * s).sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    fn accept(&self, params: &[f64], config: &SearchConfig, stats: &mut SearchStats) -> Option<DMatrix<C64>> {
        let v = rotation(self.rank, params);
        if trivial_distance(&v) <= config.trivial_tol {
            return None;
        }
        let residual = self.rank_one_residual(&v);
        stats.best_nontrivial_residual = stats.best_nontrivial_residual.min(residual);
        (residual < config.residual_tol).then_some(v)
    }

    fn run(&self, config: &SearchConfig, stats: &mut SearchStats) -> Option<DMatrix<C64>> {
        let n = self.params();
        let half_pi = std::f64::consts::FRAC_PI_2;
        let steps = match self.rank {
            2 => config.grid_steps_rank2,
            3 => config.grid_steps_rank3,
            _ => 0,
        };
        if steps >= 2 {
            let axis: Vec<f64> = (0..steps)
                .map(|i| -half_pi + std::f64::consts::PI * i as f64 / (steps - 1) as f64)
                .collect();
            let mut index = vec![0usize; n];
            let total = steps.pow(n as u32);
            for _ in 0..total {
                let params: Vec<f64> = index.iter().map(|&i| axis[i]).collect();
                stats.grid_points += 1;
                // cheap screen before the full acceptance test
                if self.objective(&params) < config.residual_tol * config.residual_tol {
                    if let Some(v) = self.accept(&params, config, stats) {
                        return Some(v);
                    }
                }
                for slot in (0..n).rev() {
                    index[slot] += 1;
                    if index[slot] < steps {
                        break;
                    }
                    index[slot] = 0;
                }
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x7269_6f72_7468_6f);
        for _ in 0..config.restarts {
            let start: Vec<f64> = (0..n).map(|_| rng.random_range(-half_pi..half_pi)).collect();
            stats.restarts += 1;
            let Some(params) = self.refine(start, config.max_iters) else {
                continue;
            };
            if let Some(v) = self.accept(&params, config, stats) {
                return Some(v);
            }
        }
        None
    }

    fn refine(&self, start: Vec<f64>, max_iters: u64) -> Option<Vec<f64>> {
        let mut simplex = vec![start.clone()];
        for i in 0..start.len() {
            let mut p = start.clone();
            p[i] += 0.25;
            simplex.push(p);
        }
        let solver = NelderMead::new(simplex).with_sd_tolerance(1e-20).ok()?;
        let result = Executor::new(Objective(self), solver)
            .configure(|s| s.max_iters(max_iters))
            .run()
            .ok()?;
        result.state().get_best_param().cloned()
    }

    fn witness(&self, canonical: &Canonical, v: &DMatrix<C64>) -> Result<Decomposition> {
        let mut terms = Vec::new();
        for (s, phi) in self.rotated_blocks(v).into_iter().enumerate() {
            let a: DVector<C64> = (0..self.rank).fold(DVector::zeros(self.outer[0].len()), |acc, t| {
                acc + &self.outer[t] * v[(t, s)]
            });
            let svd = SVD::new(phi, true, true);
            let sigma = svd.singular_values[0];
            if sigma * sigma < PROBABILITY_FLOOR {
                continue;
            }
            let b = svd.u.expect("requested").column(0).into_owned();
            let c = svd.v_t.expect("requested").row(0).transpose();
            terms.push((C64::new(sigma, 0.0), [a, b, c]));
        }
        canonical.tensor.decomposition(terms)
    }
}

struct Objective<'a>(&'a AlternativeSearch);

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, params: &Self::Param) -> std::result::Result<f64, SolverError> {
        Ok(self.0.objective(params))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_is_unitary_and_identity_at_origin() {
        let v = rotation(3, &[0.3, -0.2, 1.1, 0.4, -0.7, 0.05]);
        assert!(crate::hilbert::kernel::unitarity_defect(&v) < 1e-12);
        let id = rotation(2, &[0.0, 0.0]);
        assert!(trivial_distance(&id) < 1e-15);
    }

    #[test]
    fn swap_with_phases_is_trivial() {
        // exp(i π/2 σx) = iσx
        let v = rotation(2, &[std::f64::consts::FRAC_PI_2, 0.0]);
        assert!(trivial_distance(&v) < 1e-12);
        let hadamard_like = rotation(2, &[std::f64::consts::FRAC_PI_4, 0.0]);
        assert!(trivial_distance(&hadamard_like) > 0.2);
    }
}
