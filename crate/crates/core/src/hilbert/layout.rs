use std::collections::{BTreeMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};

/// One tensor factor: a name plus its ordered basis labels.
///
/// Grouped subsystems remember the factors they were built from so they can
/// be split apart again.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subsystem {
    name: String,
    labels: Vec<String>,
    parts: Vec<Subsystem>,
}

impl Subsystem {
    pub fn new<S: Into<String>>(name: S, labels: Vec<String>) -> Result<Self> {
        let name = name.into();
        if labels.is_empty() {
            return Err(Error::EmptySubsystem(name));
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::DuplicateLabel {
                    subsystem: name,
                    label: label.clone(),
                });
            }
        }
        Ok(Self {
            name,
            labels,
            parts: Vec::new(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    /// Factors this subsystem was grouped from; empty for elementary ones.
    pub fn parts(&self) -> &[Subsystem] {
        &self.parts
    }

    pub fn label_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel {
                subsystem: self.name.clone(),
                label: label.to_string(),
            })
    }
}

/// Ordered list of named subsystems. Flat indices are lexicographic over the
/// declaration order, last subsystem fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsystemLayout {
    subsystems: Vec<Subsystem>,
}

impl SubsystemLayout {
    pub fn new<I, N, L>(subsystems: I) -> Result<Self>
    where
        I: IntoIterator<Item = (N, Vec<L>)>,
        N: Into<String>,
        L: Into<String>,
    {
        let subsystems = subsystems
            .into_iter()
            .map(|(name, labels)| Subsystem::new(name, labels.into_iter().map(Into::into).collect()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_subsystems(subsystems)
    }

    /// Single-subsystem layout.
    pub fn single<N: Into<String>, L: Into<String>>(name: N, labels: Vec<L>) -> Result<Self> {
        Self::new([(name, labels)])
    }

    pub fn from_subsystems(subsystems: Vec<Subsystem>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &subsystems {
            if !seen.insert(s.name.as_str()) {
                return Err(Error::DuplicateSubsystem(s.name.clone()));
            }
        }
        Ok(Self { subsystems })
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.subsystems.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.subsystems.iter().map(Subsystem::dim).collect()
    }

    /// Total dimension; 1 for the empty layout.
    pub fn dim(&self) -> usize {
        self.subsystems.iter().map(Subsystem::dim).product()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.subsystems.iter().any(|s| s.name == name)
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.subsystems
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::UnknownSubsystem(name.to_string()))
    }

    pub fn positions(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut seen = HashSet::new();
        names
            .iter()
            .map(|n| {
                if !seen.insert(*n) {
                    return Err(Error::DuplicateSubsystem(n.to_string()));
                }
                self.position(n)
            })
            .collect()
    }

    pub fn subsystem(&self, name: &str) -> Result<&Subsystem> {
        Ok(&self.subsystems[self.position(name)?])
    }

    /// Flat index of a label tuple, one label per subsystem in layout order.
    pub fn index_of<S: AsRef<str>>(&self, labels: &[S]) -> Result<usize> {
        if labels.len() != self.subsystems.len() {
            return Err(Error::TupleArity {
                expected: self.subsystems.len(),
                got: labels.len(),
            });
        }
        let mut index = 0;
        for (subsystem, label) in self.subsystems.iter().zip(labels) {
            index = index * subsystem.dim() + subsystem.label_index(label.as_ref())?;
        }
        Ok(index)
    }

    /// Inverse of [`index_of`](Self::index_of). Panics if `index >= dim()`.
    pub fn labels_at(&self, index: usize) -> Vec<&str> {
        assert!(index < self.dim(), "flat index {index} out of range");
        let mut rest = index;
        let mut out = vec![""; self.subsystems.len()];
        for (slot, subsystem) in out.iter_mut().zip(&self.subsystems).rev() {
            *slot = subsystem.labels[rest % subsystem.dim()].as_str();
            rest /= subsystem.dim();
        }
        out
    }

    /// `self` followed by `other`; names must be disjoint.
    pub fn concat(&self, other: &SubsystemLayout) -> Result<Self> {
        for s in &other.subsystems {
            if self.contains(&s.name) {
                return Err(Error::LayoutConflict(s.name.clone()));
            }
        }
        let mut subsystems = self.subsystems.clone();
        subsystems.extend(other.subsystems.iter().cloned());
        Ok(Self { subsystems })
    }

    /// The named subsystems, in the order given.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let positions = self.positions(names)?;
        Ok(Self {
            subsystems: positions
                .into_iter()
                .map(|p| self.subsystems[p].clone())
                .collect(),
        })
    }

    /// The named subsystems, in layout order.
    pub fn restrict(&self, names: &[&str]) -> Result<Self> {
        let mut positions = self.positions(names)?;
        positions.sort_unstable();
        Ok(Self {
            subsystems: positions
                .into_iter()
                .map(|p| self.subsystems[p].clone())
                .collect(),
        })
    }

    /// Every subsystem not in `names`, in layout order.
    pub fn complement(&self, names: &[&str]) -> Result<Self> {
        self.positions(names)?;
        Ok(Self {
            subsystems: self
                .subsystems
                .iter()
                .filter(|s| !names.contains(&s.name.as_str()))
                .cloned()
                .collect(),
        })
    }

    /// Merge adjacent `parts` into one subsystem called `new_name`.
    ///
    /// Product labels are enumerated lexicographically, so the flat index of
    /// every basis state is unchanged. Product labels named in `label_map`
    /// take that name; the rest are rendered as `(a,b,...)`.
    pub fn group(
        &self,
        parts: &[&str],
        new_name: &str,
        label_map: &BTreeMap<Vec<String>, String>,
    ) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidPartition("nothing to group".into()));
        }
        let positions = self.positions(parts)?;
        let start = positions[0];
        if positions.iter().enumerate().any(|(k, &p)| p != start + k) {
            return Err(Error::NotAdjacent(parts.join(",")));
        }
        if self.contains(new_name) && !parts.contains(&new_name) {
            return Err(Error::DuplicateSubsystem(new_name.to_string()));
        }
        let inner = self.select(parts)?;
        for key in label_map.keys() {
            inner.index_of(key)?;
        }

        let mut labels = Vec::with_capacity(inner.dim());
        let mut origin: BTreeMap<String, String> = BTreeMap::new();
        for index in 0..inner.dim() {
            let tuple: Vec<String> = inner.labels_at(index).into_iter().map(String::from).collect();
            let tuple_form = format!("({})", tuple.join(","));
            let label = label_map.get(&tuple).cloned().unwrap_or_else(|| tuple_form.clone());
            if let Some(first) = origin.insert(label.clone(), tuple_form.clone()) {
                return Err(Error::NonInjectiveLabelMap {
                    label,
                    first,
                    second: tuple_form,
                });
            }
            labels.push(label);
        }

        let mut grouped = Subsystem::new(new_name, labels)?;
        grouped.parts = inner.subsystems;
        let mut subsystems = self.subsystems[..start].to_vec();
        subsystems.push(grouped);
        subsystems.extend_from_slice(&self.subsystems[start + parts.len()..]);
        Self::from_subsystems(subsystems)
    }

    /// Split a grouped subsystem back into its parts.
    pub fn ungroup(&self, name: &str) -> Result<Self> {
        let position = self.position(name)?;
        let parts = &self.subsystems[position].parts;
        if parts.is_empty() {
            return Err(Error::NotGrouped(name.to_string()));
        }
        let mut subsystems = self.subsystems[..position].to_vec();
        subsystems.extend(parts.iter().cloned());
        subsystems.extend_from_slice(&self.subsystems[position + 1..]);
        Self::from_subsystems(subsystems)
    }
}

impl fmt::Display for SubsystemLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, s) in self.subsystems.iter().enumerate() {
            if k > 0 {
                f.write_str(" ⊗ ")?;
            }
            write!(f, "{}{{{}}}", s.name, s.labels.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rs() -> SubsystemLayout {
        SubsystemLayout::new([("R", vec!["head", "tail"]), ("S", vec!["up", "down"])]).unwrap()
    }

    fn map(pairs: &[(&[&str], &str)]) -> BTreeMap<Vec<String>, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.iter().map(|s| s.to_string()).collect(), v.to_string()))
            .collect()
    }

    #[test]
    fn lexicographic_indexing() {
        let layout = rs();
        assert_eq!(layout.dim(), 4);
        assert_eq!(layout.index_of(&["head", "up"]).unwrap(), 0);
        assert_eq!(layout.index_of(&["head", "down"]).unwrap(), 1);
        assert_eq!(layout.index_of(&["tail", "up"]).unwrap(), 2);
        assert_eq!(layout.labels_at(3), vec!["tail", "down"]);
    }

    #[test]
    fn unknown_label_names_subsystem() {
        let err = rs().index_of(&["head", "sideways"]).unwrap_err();
        assert_eq!(
            err,
            Error::UnknownLabel {
                subsystem: "S".into(),
                label: "sideways".into()
            }
        );
    }

    #[test]
    fn rejects_duplicates() {
        assert!(matches!(
            SubsystemLayout::new([("R", vec!["a"]), ("R", vec!["b"])]),
            Err(Error::DuplicateSubsystem(_))
        ));
        assert!(matches!(
            SubsystemLayout::single("R", vec!["a", "a"]),
            Err(Error::DuplicateLabel { .. })
        ));
    }

    #[test]
    fn group_names_and_tuple_labels() {
        let layout = SubsystemLayout::new([
            ("R", vec!["head", "tail"]),
            ("Fbar", vec!["Fbar0", "Fbar1", "Fbar2"]),
            ("S", vec!["up", "down"]),
        ])
        .unwrap();
        let grouped = layout
            .group(
                &["R", "Fbar"],
                "Lbar",
                &map(&[(&["head", "Fbar1"], "h"), (&["tail", "Fbar2"], "t")]),
            )
            .unwrap();
        assert_eq!(grouped.names(), vec!["Lbar", "S"]);
        assert_eq!(grouped.dim(), layout.dim());
        let lbar = grouped.subsystem("Lbar").unwrap();
        assert_eq!(lbar.labels()[1], "h");
        assert_eq!(lbar.labels()[5], "t");
        assert_eq!(lbar.labels()[0], "(head,Fbar0)");
        assert_eq!(grouped.ungroup("Lbar").unwrap(), layout);
    }

    #[test]
    fn group_rejects_non_injective_map() {
        let err = rs()
            .group(&["R", "S"], "X", &map(&[(&["head", "up"], "a"), (&["tail", "up"], "a")]))
            .unwrap_err();
        assert!(matches!(err, Error::NonInjectiveLabelMap { .. }));
        // a chosen name may not shadow an unnamed tuple label either
        let err = rs()
            .group(&["R", "S"], "X", &map(&[(&["head", "up"], "(tail,up)")]))
            .unwrap_err();
        assert!(matches!(err, Error::NonInjectiveLabelMap { .. }));
    }

    #[test]
    fn group_requires_adjacency() {
        let layout = SubsystemLayout::new([
            ("A", vec!["0", "1"]),
            ("B", vec!["0", "1"]),
            ("C", vec!["0", "1"]),
        ])
        .unwrap();
        assert!(matches!(
            layout.group(&["A", "C"], "X", &BTreeMap::new()),
            Err(Error::NotAdjacent(_))
        ));
        assert!(matches!(
            layout.group(&["B", "A"], "X", &BTreeMap::new()),
            Err(Error::NotAdjacent(_))
        ));
    }

    fn arb_layout() -> impl Strategy<Value = SubsystemLayout> {
        prop::collection::vec(1usize..4, 1..5).prop_map(|dims| {
            SubsystemLayout::new(dims.iter().enumerate().map(|(k, &d)| {
                (format!("s{k}"), (0..d).map(|j| format!("l{j}")).collect::<Vec<_>>())
            }))
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn index_bijection(layout in arb_layout()) {
            for index in 0..layout.dim() {
                let labels = layout.labels_at(index);
                prop_assert_eq!(layout.index_of(&labels).unwrap(), index);
            }
        }
    }
}
