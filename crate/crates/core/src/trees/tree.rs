use serde::{Deserialize, Serialize};

/// A node in an arena-allocated binary tree. Rows go left iff
/// `x[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Training rows that reached this node.
        cover: f64,
        /// Impurity decrease (forest) or second-order gain (boosting).
        gain: f64,
    },
    Leaf {
        /// Class distribution (forest) or a single leaf weight (boosting).
        value: Vec<f64>,
        cover: f64,
    },
}

impl Node {
    pub fn cover(&self) -> f64 {
        match self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => *cover,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: Vec<f64>, cover: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value, cover }],
        }
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> &[f64] {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn leaves(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value, cover } => Some((value.as_slice(), *cover)),
            _ => None,
        })
    }

    pub fn split_features(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, gain, .. } => Some((*feature, *gain)),
            _ => None,
        })
    }
}

/// Midpoint between two consecutive distinct sorted values, nudged so that
/// `lo <= t < hi` survives floating-point rounding.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi || m < lo {
        lo
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn routing_and_shape() {
        let t = Tree {
            nodes: vec![
                Node::Split {
                    feature: 0,
                    threshold: 1.0,
                    left: 1,
                    right: 2,
                    cover: 4.0,
                    gain: 1.0,
                },
                Node::Leaf {
                    value: vec![1.0, 0.0],
                    cover: 2.0,
                },
                Node::Leaf {
                    value: vec![0.0, 1.0],
                    cover: 2.0,
                },
            ],
        };
        assert_eq!(t.predict(&[1.0]), &[1.0, 0.0]);
        assert_eq!(t.predict(&[1.0000001]), &[0.0, 1.0]);
        assert_eq!(t.depth(), 1);
        assert_eq!(t.n_leaves(), 2);
    }

    #[test]
    fn midpoint_stays_between() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let m = midpoint(lo, hi);
        assert!(lo <= m && m < hi);
        assert_eq!(midpoint(2.0, 4.0), 3.0);
    }
}
