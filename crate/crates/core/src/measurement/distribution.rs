use crate::PROBABILITY_FLOOR;

/// Born weights over joint outcome tuples, in lexicographic outcome order.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    subsystems: Vec<String>,
    entries: Vec<(Vec<String>, f64)>,
}

impl OutcomeDistribution {
    /// Weights below the probability floor are snapped to exactly zero.
    pub fn new(subsystems: Vec<String>, entries: Vec<(Vec<String>, f64)>) -> Self {
        let entries = entries
            .into_iter()
            .map(|(k, p)| (k, if p < PROBABILITY_FLOOR { 0.0 } else { p }))
            .collect();
        Self { subsystems, entries }
    }

    /// Which subsystems (or agents) the outcome tuples refer to.
    pub fn subsystems(&self) -> &[String] {
        &self.subsystems
    }

    pub fn entries(&self) -> &[(Vec<String>, f64)] {
        &self.entries
    }

    pub fn probability<S: AsRef<str>>(&self, outcome: &[S]) -> Option<f64> {
        self.entries
            .iter()
            .find(|(k, _)| k.len() == outcome.len() && k.iter().zip(outcome).all(|(a, b)| a == b.as_ref()))
            .map(|(_, p)| *p)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    /// Sum out everything except the listed tuple positions.
    pub fn marginal(&self, keep: &[usize]) -> OutcomeDistribution {
        let mut out: Vec<(Vec<String>, f64)> = Vec::new();
        for (key, p) in &self.entries {
            let k: Vec<String> = keep.iter().map(|&i| key[i].clone()).collect();
            match out.iter_mut().find(|(existing, _)| *existing == k) {
                Some((_, acc)) => *acc += p,
                None => out.push((k, *p)),
            }
        }
        OutcomeDistribution::new(keep.iter().map(|&i| self.subsystems[i].clone()).collect(), out)
    }

    /// The outcome carrying all the weight, if there is one.
    pub fn point_mass(&self, tol: f64) -> Option<&[String]> {
        self.entries
            .iter()
            .find(|(_, p)| *p >= 1.0 - tol)
            .map(|(k, _)| k.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn snaps_tiny_weights_and_marginalizes() {
        let d = OutcomeDistribution::new(
            s(&["A", "B"]),
            vec![
                (s(&["0", "0"]), 0.5),
                (s(&["0", "1"]), 1e-14),
                (s(&["1", "0"]), 0.25),
                (s(&["1", "1"]), 0.25),
            ],
        );
        assert_eq!(d.probability(&["0", "1"]), Some(0.0));
        let a = d.marginal(&[0]);
        assert_eq!(a.subsystems(), &["A"]);
        assert_eq!(a.probability(&["0"]), Some(0.5));
        assert_eq!(a.probability(&["1"]), Some(0.5));
        assert_eq!(d.point_mass(1e-9), None);
    }
}
