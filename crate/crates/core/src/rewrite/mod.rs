//! Verified simplification: the rule catalog, the equivalence decision
//! procedure that certifies rewrites, and the normalizer that produces the
//! canonical sum-of-products form used for reduction and cut sequences.

mod catalog;
mod equiv;
mod normalize;

pub use catalog::{instantiate, rule_catalog, Bindings, RewriteRule};
pub use equiv::{
    comparison_patterns, decide_equivalence, verify_catalog, verify_rules, CatalogReport, ComparisonPattern,
    EquivError, Mode, RuleCheck, Verdict, DEFAULT_EXACT_BOUND, DEFAULT_SAMPLED_TRIALS,
};
pub use normalize::{
    apply_reduction, normalize, normalize_under, NormalizeError, Reduction, CERTIFICATE_SEED, DEFAULT_BUDGET,
    MAX_PRODUCTS,
};

#[cfg(test)]
mod tests;
