use serde::{Deserialize, Serialize};

use crate::bag::InstanceTag;

/// Ground-truth relevance of an instance for one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relevance {
    Supporting,
    Neutral,
    Refuting,
    Unlabeled,
}

impl Relevance {
    /// The `rel(i)` value used by NDCG; `None` for unlabeled instances.
    pub fn gain(self) -> Option<f64> {
        match self {
            Relevance::Supporting => Some(1.0),
            Relevance::Neutral => Some(0.0),
            Relevance::Refuting => Some(-1.0),
            Relevance::Unlabeled => None,
        }
    }
}

/// How the presence of key instances determines a bag's class.
///
/// Key instances are tagged `Key(c)` with the class they indicate on their own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ClassRule {
    /// Class 1 if a `Key(1)` instance is present, 2 if a `Key(2)` instance is
    /// present, 3 if both are, 0 otherwise.
    FourClass,
    /// Binary standard MIL assumption: positive iff any `Key(1)` instance is present.
    Smil,
    /// `positive_classes` concepts that never co-occur; the bag takes the class of
    /// the concept it contains, or 0.
    SinglePositive { positive_classes: usize },
    /// No interaction structure known: a key instance supports its own class only.
    Generic { classes: usize },
}

impl ClassRule {
    pub fn num_classes(&self) -> usize {
        match *self {
            ClassRule::FourClass => 4,
            ClassRule::Smil => 2,
            ClassRule::SinglePositive { positive_classes } => positive_classes + 1,
            ClassRule::Generic { classes } => classes,
        }
    }

    /// Number of distinct key concepts (tag classes `1..=n`).
    pub fn num_concepts(&self) -> usize {
        self.num_classes() - 1
    }

    /// Bag label given which key concepts are present (`present[c]` for tag class `c`;
    /// index 0 is ignored).
    pub fn label(&self, present: &[bool]) -> usize {
        let has = |c: usize| present.get(c).copied().unwrap_or(false);
        match *self {
            ClassRule::FourClass => match (has(1), has(2)) {
                (false, false) => 0,
                (true, false) => 1,
                (false, true) => 2,
                (true, true) => 3,
            },
            ClassRule::Smil => usize::from(has(1)),
            ClassRule::SinglePositive { .. } | ClassRule::Generic { .. } => {
                (1..self.num_classes()).find(|&c| has(c)).unwrap_or(0)
            }
        }
    }

    /// Relevance of an instance with `tag` for `class`.
    ///
    /// A key instance supports every class whose rule requires its concept and
    /// refutes every class its presence rules out. Background supports the
    /// negative class, since a bag of background alone is labelled 0.
    pub fn relevance(&self, tag: InstanceTag, class: usize) -> Relevance {
        let concept = match tag {
            InstanceTag::Unlabeled => return Relevance::Unlabeled,
            InstanceTag::Neutral if class == 0 && !matches!(self, ClassRule::Generic { .. }) => {
                return Relevance::Supporting
            }
            InstanceTag::Neutral => return Relevance::Neutral,
            InstanceTag::Key(c) => c,
        };
        match *self {
            ClassRule::FourClass => match (concept, class) {
                (1, 1 | 3) | (2, 2 | 3) => Relevance::Supporting,
                (1, 0 | 2) | (2, 0 | 1) => Relevance::Refuting,
                _ => Relevance::Neutral,
            },
            ClassRule::Smil => match (concept, class) {
                (1, 1) => Relevance::Supporting,
                (1, 0) => Relevance::Refuting,
                _ => Relevance::Neutral,
            },
            ClassRule::SinglePositive { .. } => {
                if concept == class {
                    Relevance::Supporting
                } else {
                    Relevance::Refuting
                }
            }
            ClassRule::Generic { .. } => {
                if concept == class {
                    Relevance::Supporting
                } else {
                    Relevance::Neutral
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassRule::FourClass => "four-class",
            ClassRule::Smil => "smil",
            ClassRule::SinglePositive { .. } => "single-positive",
            ClassRule::Generic { .. } => "generic",
        }
    }

    /// Parses a rule name as written in dataset headers.
    pub fn from_name(name: &str, classes: usize) -> Option<Self> {
        match name {
            "four-class" if classes == 4 => Some(ClassRule::FourClass),
            "smil" if classes == 2 => Some(ClassRule::Smil),
            "single-positive" if classes >= 2 => Some(ClassRule::SinglePositive {
                positive_classes: classes - 1,
            }),
            "generic" if classes >= 1 => Some(ClassRule::Generic { classes }),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_class_table_is_total_and_exclusive() {
        let rule = ClassRule::FourClass;
        let mut labels = Vec::new();
        for a in [false, true] {
            for b in [false, true] {
                labels.push(rule.label(&[false, a, b]));
            }
        }
        // (none, B, A, AB)
        assert_eq!(labels, vec![0, 2, 1, 3]);
    }

    #[test]
    fn four_class_relevance() {
        let r = ClassRule::FourClass;
        let a = InstanceTag::Key(1);
        let b = InstanceTag::Key(2);
        assert_eq!(r.relevance(a, 1), Relevance::Supporting);
        assert_eq!(r.relevance(a, 3), Relevance::Supporting);
        assert_eq!(r.relevance(a, 0), Relevance::Refuting);
        assert_eq!(r.relevance(a, 2), Relevance::Refuting);
        assert_eq!(r.relevance(b, 1), Relevance::Refuting);
        assert_eq!(r.relevance(InstanceTag::Neutral, 0), Relevance::Supporting);
        assert_eq!(r.relevance(InstanceTag::Neutral, 2), Relevance::Neutral);
        assert_eq!(r.relevance(InstanceTag::Unlabeled, 0), Relevance::Unlabeled);
    }

    #[test]
    fn relevance_agrees_with_label_rule() {
        // a key instance supports class c exactly when adding it to a bag that
        // lacks its concept can produce label c; check on the four-class table
        let r = ClassRule::FourClass;
        for concept in 1..=2usize {
            for class in 0..4 {
                let other = 3 - concept;
                let with: Vec<usize> = [false, true]
                    .iter()
                    .map(|&o| {
                        let mut p = vec![false; 3];
                        p[concept] = true;
                        p[other] = o;
                        r.label(&p)
                    })
                    .collect();
                let supports = with.contains(&class);
                let rel = r.relevance(InstanceTag::Key(concept), class);
                assert_eq!(rel == Relevance::Supporting, supports);
                assert_eq!(rel == Relevance::Refuting, !supports);
            }
        }
    }

    #[test]
    fn smil_and_single_positive() {
        assert_eq!(ClassRule::Smil.label(&[false, true]), 1);
        assert_eq!(ClassRule::Smil.label(&[false, false]), 0);
        let sp = ClassRule::SinglePositive { positive_classes: 3 };
        assert_eq!(sp.label(&[false, false, false, true]), 3);
        assert_eq!(sp.label(&[false; 4]), 0);
        assert_eq!(sp.relevance(InstanceTag::Key(3), 0), Relevance::Refuting);
        assert_eq!(sp.relevance(InstanceTag::Key(3), 3), Relevance::Supporting);
    }

    #[test]
    fn names_round_trip() {
        for rule in [
            ClassRule::FourClass,
            ClassRule::Smil,
            ClassRule::SinglePositive { positive_classes: 4 },
            ClassRule::Generic { classes: 3 },
        ] {
            assert_eq!(ClassRule::from_name(rule.name(), rule.num_classes()), Some(rule));
        }
        assert_eq!(ClassRule::from_name("four-class", 3), None);
    }
}
