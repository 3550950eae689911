use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Binary,
    Multiclass,
}

impl Task {
    /// Column holding the target for this task in a GeNIS-style table.
    pub fn label_column(self) -> &'static str {
        match self {
            Task::Binary => "BinaryLabel",
            Task::Multiclass => "CategoryLabel",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Binary => "binary",
            Task::Multiclass => "multiclass",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" => Ok(Task::Binary),
            "multiclass" => Ok(Task::Multiclass),
            other => Err(Error::invalid(format!("unknown task {other:?}"))),
        }
    }
}

/// Ordered class list for a task. Classes are sorted by name, so class
/// indices are stable across runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    pub task: Task,
    pub classes: Vec<String>,
    pub benign_class: String,
}

impl LabelSpace {
    pub fn new(task: Task, classes: Vec<String>, benign_class: &str) -> Result<Self> {
        let set: BTreeSet<String> = classes.into_iter().collect();
        let classes: Vec<String> = set.into_iter().collect();
        if !classes.iter().any(|c| c == benign_class) {
            return Err(Error::invalid(format!(
                "benign class {benign_class:?} not among classes {classes:?}"
            )));
        }
        match task {
            Task::Binary if classes.len() != 2 => Err(Error::invalid(format!(
                "binary task needs exactly 2 classes, found {}",
                classes.len()
            ))),
            Task::Multiclass if classes.len() < 3 => Err(Error::invalid(format!(
                "multiclass task needs at least 3 classes, found {}",
                classes.len()
            ))),
            _ => Ok(LabelSpace {
                task,
                classes,
                benign_class: benign_class.to_string(),
            }),
        }
    }

    /// Infers the class list from observed labels. The benign class is
    /// matched case-insensitively.
    pub fn infer(task: Task, labels: &[String], benign: &str) -> Result<Self> {
        let set: BTreeSet<&String> = labels.iter().collect();
        let benign_class = set
            .iter()
            .find(|c| c.eq_ignore_ascii_case(benign))
            .map(|c| c.to_string())
            .ok_or_else(|| Error::invalid(format!("no {benign:?} rows among labels")))?;
        Self::new(task, set.into_iter().cloned().collect(), &benign_class)
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn index_of(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    pub fn benign_index(&self) -> usize {
        self.index_of(&self.benign_class).expect("validated at construction")
    }

    /// For the binary task: the non-benign class.
    pub fn positive_index(&self) -> usize {
        1 - self.benign_index().min(1)
    }

    pub fn encode(&self, labels: &[String]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| self.index_of(l).ok_or_else(|| Error::UnknownLabel(l.clone())))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn binary_space() {
        let ls = LabelSpace::infer(Task::Binary, &s(&["Malicious", "Benign", "Malicious"]), "benign").unwrap();
        assert_eq!(ls.classes, s(&["Benign", "Malicious"]));
        assert_eq!(ls.benign_index(), 0);
        assert_eq!(ls.positive_index(), 1);
        assert_eq!(ls.encode(&s(&["Malicious", "Benign"])).unwrap(), vec![1, 0]);
        assert!(matches!(ls.encode(&s(&["DoS"])), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn class_count_rules() {
        assert!(LabelSpace::new(Task::Binary, s(&["Benign", "DoS", "Recon"]), "Benign").is_err());
        assert!(LabelSpace::new(Task::Multiclass, s(&["Benign", "DoS"]), "Benign").is_err());
        assert!(LabelSpace::new(Task::Multiclass, s(&["A", "B", "C"]), "Benign").is_err());
        let ls = LabelSpace::new(Task::Multiclass, s(&["Recon", "Benign", "DoS"]), "Benign").unwrap();
        assert_eq!(ls.classes, s(&["Benign", "DoS", "Recon"]));
    }
}
