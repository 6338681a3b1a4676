//! Tiny built-in sample graphs.
//!
//! Used by the test suites, the acceptance checks, and the docs; small enough
//! to reason about by hand.

use crate::kb::KnowledgeGraph;

/// A small pie-category graph (9 concepts, 10 edges).
///
/// `Blackberry pie` reaches `American pies` and `Sweet pies` in one hop,
/// `pie` in two, and `Tiropita` in four.
pub fn pie_sample() -> KnowledgeGraph {
    let mut g = KnowledgeGraph::new();
    for (a, b) in pie_sample_edges() {
        g.link(a, b);
    }
    g
}

/// The edges of [`pie_sample`].
pub fn pie_sample_edges() -> Vec<(&'static str, &'static str)> {
    vec![
        ("Blackberry pie", "American pies"),
        ("Blackberry pie", "Sweet pies"),
        ("American pies", "Key lime pie"),
        ("American pies", "pie"),
        ("American pies", "Natchitoches meat pie"),
        ("Sweet pies", "Strawberry pie"),
        ("Sweet pies", "pie"),
        ("pie", "Savoury pies"),
        ("Natchitoches meat pie", "Savoury pies"),
        ("Savoury pies", "Tiropita"),
    ]
}

/// [`pie_sample`] in the six-field TSV ingest format.
pub fn pie_sample_tsv() -> String {
    let mut out = String::new();
    for (i, (a, b)) in pie_sample_edges().into_iter().enumerate() {
        out.push_str(&format!(
            "c{:02}\t{}\twikicategory\tc{:02}\t{}\twikicategory\n",
            2 * i,
            a,
            2 * i + 1,
            b
        ));
    }
    out
}

/// A housing-vocabulary graph where `building` and `family` sit far apart
/// while `house` and `home` bridge them:
///
/// ```text
/// building - workplace - house - home - household - family
/// ```
///
/// With a hop threshold of 2 every adjacent attribute pair joins, but the
/// `building`..`family` distance is 5, so a tolerance diameter of 3 splits
/// the merged cluster into two parts sharing `house` and `home`.
pub fn housing_sample() -> KnowledgeGraph {
    let mut g = KnowledgeGraph::new();
    for (a, b) in [
        ("building", "workplace"),
        ("workplace", "house"),
        ("house", "home"),
        ("home", "household"),
        ("household", "family"),
    ] {
        g.link(a, b);
    }
    g
}
