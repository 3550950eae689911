//! Reference 16-feature subsets reported for the GeNIS dataset, kept as
//! fixtures for comparing a selection run against the published one.

use super::taxonomy::Category;

pub const BINARY_SELECTION: [&str; 16] = [
    "DstTCPBase",
    "SrcTCPBase",
    "DstWin",
    "SrcWin",
    "TotBytes",
    "TotPkts",
    "Dur",
    "Min",
    "Mean",
    "RunTime",
    "Sum",
    "DstLoad",
    "Load",
    "Rate",
    "SrcLoad",
    "SrcRate",
];

pub const MULTICLASS_SELECTION: [&str; 16] = [
    "DstTCPBase",
    "SrcTCPBase",
    "DstWin",
    "TotBytes",
    "DstBytes",
    "SAppBytes",
    "SrcBytes",
    "SrcWin",
    "Mean",
    "Max",
    "Sum",
    "Dur",
    "Min",
    "RunTime",
    "DstLoad",
    "SrcLoad",
];

/// Per-category composition of a reference subset as (quantity, time, hybrid).
pub fn composition(features: &[&str], taxonomy: &super::Taxonomy) -> (usize, usize, usize) {
    let mut out = (0, 0, 0);
    for f in features {
        match taxonomy.category_of(f) {
            Some(Category::QuantityBased) => out.0 += 1,
            Some(Category::TimeBased) => out.1 += 1,
            Some(Category::Hybrid) => out.2 += 1,
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Taxonomy;

    #[test]
    fn reference_compositions() {
        let t = Taxonomy::genis();
        assert_eq!(composition(&BINARY_SELECTION, &t), (6, 5, 5));
        assert_eq!(composition(&MULTICLASS_SELECTION, &t), (8, 6, 2));
        let shared = BINARY_SELECTION
            .iter()
            .filter(|f| MULTICLASS_SELECTION.contains(f))
            .count();
        assert_eq!(16 - shared, 4);
    }
}
