use crate::error::{Error, Result};
use crate::hilbert::{kernel, DensityOperator, StateVector};
use crate::measurement::{branch_weights, EnvironmentModel};

/// One environment model's reduced state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelReduction {
    pub model: String,
    pub rho: DensityOperator,
    pub restricted: DensityOperator,
    pub branch_weights: Vec<f64>,
    /// (label, probability) of the apparatus reading.
    pub apparatus_marginal: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoherenceComparison {
    pub reductions: Vec<ModelReduction>,
    /// Max entrywise difference of the full reduced states over model pairs.
    pub full_difference: f64,
    /// Same, after restricting to the observed subsystems.
    pub restricted_difference: f64,
    /// Max difference of apparatus marginals.
    pub marginal_difference: f64,
}

/// Couple `state` under every model, trace the environment out, and compare
/// what the models predict on the whole system and on `restrict`.
pub fn decoherence_compare(
    state: &StateVector,
    models: &[EnvironmentModel],
    restrict: &[&str],
    apparatus: &str,
) -> Result<DecoherenceComparison> {
    if models.is_empty() {
        return Err(Error::EmptyModelFamily);
    }
    let reductions = models
        .iter()
        .map(|m| {
            let rho = m.reduce(state)?;
            let restricted = rho.partial_trace(restrict)?;
            let pointer = rho.partial_trace(&[apparatus])?;
            let labels = pointer.layout().subsystems()[0].labels().to_vec();
            let apparatus_marginal = labels
                .into_iter()
                .enumerate()
                .map(|(k, l)| (l, pointer.matrix()[(k, k)].re))
                .collect();
            Ok(ModelReduction {
                model: m.name().to_string(),
                branch_weights: branch_weights(&rho, m.branches())?,
                rho,
                restricted,
                apparatus_marginal,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut full_difference = 0.0f64;
    let mut restricted_difference = 0.0f64;
    let mut marginal_difference = 0.0f64;
    for (i, a) in reductions.iter().enumerate() {
        for b in &reductions[i + 1..] {
            full_difference = full_difference.max(kernel::max_abs(&(a.rho.matrix() - b.rho.matrix())));
            restricted_difference =
                restricted_difference.max(kernel::max_abs(&(a.restricted.matrix() - b.restricted.matrix())));
            for ((_, p), (_, q)) in a.apparatus_marginal.iter().zip(&b.apparatus_marginal) {
                marginal_difference = marginal_difference.max((p - q).abs());
            }
        }
    }
    Ok(DecoherenceComparison {
        reductions,
        full_difference,
        restricted_difference,
        marginal_difference,
    })
}
