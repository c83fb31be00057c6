//! Statement to test mapping.
//!
//! Test ids are `path::function` relative to `crates/`, or `suite:N` for an
//! acceptance criterion. Verdicts come from a suite payload when one is given.

use serde::Serialize;

use crate::suite::SuitePayload;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceVerdict {
    Pass,
    Fail,
    NotRun,
    OutOfScope,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    pub id: &'static str,
    pub statement: &'static str,
    pub in_scope: bool,
    pub tests: Vec<&'static str>,
    pub verdict: TraceVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<&'static str>,
}

struct Row {
    id: &'static str,
    statement: &'static str,
    tests: &'static [&'static str],
    out_of_scope: Option<&'static str>,
}

const fn row(id: &'static str, statement: &'static str, tests: &'static [&'static str]) -> Row {
    Row {
        id,
        statement,
        tests,
        out_of_scope: None,
    }
}

const fn skip(id: &'static str, statement: &'static str, reason: &'static str) -> Row {
    Row {
        id,
        statement,
        tests: &[],
        out_of_scope: Some(reason),
    }
}

const ROWS: &[Row] = &[
    row(
        "weight-characteristic",
        "two-weight characteristic as a maximum over basis sets",
        &["core/src/weights.rs::two_point_example", "core/src/weights.rs::prefix_sums_agree", "core/src/weights.rs::muckenhoupt_relation", "suite:1"],
    ),
    row(
        "maximal-operator",
        "basis maximal operator, positive on nonzero functions",
        &["core/src/maximal.rs::two_point_example", "core/tests/maximal_properties.rs::sublinear_and_homogeneous", "core/tests/maximal_properties.rs::positive_on_nonzero"],
    ),
    row(
        "weight-symmetry",
        "characteristic of (w, v, s, r) equals that of (1/v, 1/w, r, s)",
        &["core/tests/weight_properties.rs::symmetry_swaps_and_inverts", "suite:1"],
    ),
    row(
        "weight-rescaling",
        "powers of a weight pair rescale the characteristic",
        &["core/tests/weight_properties.rs::power_rescaling", "suite:1"],
    ),
    row(
        "holder-product",
        "characteristic of products bounded by the product of characteristics, and monotone in (s, r)",
        &["core/tests/weight_properties.rs::holder_product", "core/tests/weight_properties.rs::monotone_in_exponents", "suite:1"],
    ),
    row(
        "maximal-endpoint-identity",
        "characteristic at (1, inf) is the weighted sup norm of Mw and the operator norm at infinity",
        &["core/src/maximal.rs::linf_norm_matches_characteristic", "core/tests/maximal_properties.rs::endpoint_identities", "suite:2"],
    ),
    row(
        "maximal-mirror-identity",
        "operator norm from L^inf_v to L^inf_w equals the characteristic at (inf, 1)",
        &["core/tests/maximal_properties.rs::mirror_endpoint", "suite:2"],
    ),
    row(
        "interpolation",
        "characteristic of geometric means bounded by the geometric mean of characteristics",
        &["core/tests/weight_properties.rs::interpolation", "suite:1"],
    ),
    row(
        "tensor-submultiplicativity",
        "characteristic of tensor weights on a product basis bounded by the product",
        &["core/tests/weight_properties.rs::tensor_submultiplicative", "suite:1"],
    ),
    row(
        "exponent-consistency",
        "shifted exponents move together by one reciprocal shift",
        &["core/src/exponents.rs::endpoint_tuple_solves", "core/src/exponents.rs::second_endpoint_tuple", "core/tests/harness_properties.rs::solved_tuples_are_consistent"],
    ),
    row(
        "admissible-region",
        "reachable target exponents form a limited range",
        &["core/src/exponents.rs::region_example", "core/src/exponents.rs::region_infinite_base_clips"],
    ),
    row(
        "linear-showcase-bound",
        "one-weight linear bound on the showcase tuple",
        &["core/src/extrapolate/tests.rs::identity_on_showcase_tuple_passes", "core/src/extrapolate/tests.rs::linear_entry_point_matches_one_input_product", "suite:4"],
    ),
    row(
        "rescaled-parameters",
        "rescaled exponents and weight transform for the three shift signs",
        &["core/src/exponents.rs::rescale_negative_example", "core/src/exponents.rs::rescale_zero_and_unit_t", "core/src/exponents.rs::rescale_rejects_range_exit"],
    ),
    row(
        "majorant-construction",
        "factor weights built from a majorant satisfy the characteristic and norm-product bounds",
        &["core/src/rdf.rs::showcase_tuple_passes", "core/tests/majorant_properties.rs::random_instances_pass", "suite:3"],
    ),
    row(
        "class-inclusion",
        "a pair at the target exponents factors through pairs at the base exponents",
        &["core/tests/majorant_properties.rs::factor_weights_land_in_base_class", "core/src/rdf.rs::negative_shift_equals_mirrored_positive", "suite:3"],
    ),
    row(
        "extrapolation-main",
        "multilinear bound at the target exponents with explicit constants",
        &["core/src/extrapolate/tests.rs::bilinear_product_passes_including_infinite_target", "core/src/extrapolate/tests.rs::positive_shift_to_unit_exponent_passes", "core/tests/harness_properties.rs::product_chain_passes", "suite:4"],
    ),
    row(
        "extrapolation-constants",
        "closed-form constants and their dependence on kappa",
        &["core/src/exponents.rs::showcase_constants", "core/src/exponents.rs::constants_decrease_in_kappa", "core/src/exponents.rs::zero_shift_constants"],
    ),
    row(
        "exponent-invariance",
        "constants do not depend on the base pair (q0, p0)",
        &["core/src/extrapolate/tests.rs::constants_ignore_q0_and_p0", "core/tests/harness_properties.rs::constants_invariant_under_base_shift", "suite:4"],
    ),
    row(
        "mixed-norm-exponents",
        "recursive exponents for iterated norms",
        &["core/src/exponents.rs::mixed_example", "core/src/extrapolate/tests.rs::next_level_starts_from_targets"],
    ),
    row(
        "mixed-inclusion",
        "two-level factorisation on product spaces",
        &["core/src/rdf.rs::mixed_embedding_two_levels"],
    ),
    row(
        "mixed-norm-extension",
        "bound in iterated norms on a product space",
        &["core/src/extrapolate/tests.rs::mixed_two_levels_pass_on_small_product", "suite:5"],
    ),
    row(
        "mixed-constants",
        "level-wise constants for iterated norms",
        &["core/src/exponents.rs::mixed_constants_single_level_matches_buckley"],
    ),
    row(
        "weak-type-extension",
        "weak-type bound at the target exponents",
        &["core/src/extrapolate/tests.rs::weak_type_passes_and_grid_hits_the_sup", "core/src/norms.rs::weak_of_indicator_is_strong", "suite:5"],
    ),
    row(
        "vector-valued-extension",
        "bound for sequences of inputs in a sequence norm",
        &["core/src/extrapolate/tests.rs::vector_valued_product_passes", "core/src/extrapolate/tests.rs::sequence_of_length_one_is_the_scalar_case", "suite:6"],
    ),
    row(
        "group-basis",
        "interval bases on cyclic groups with doubling levels",
        &["core/src/space.rs::cyclic_four", "core/src/space.rs::cyclic_doubling_at_least_one", "core/src/space.rs::asymmetric_level_rejected"],
    ),
    row(
        "maximal-bounded-on-groups",
        "weighted maximal bound on groups in terms of the one-weight characteristic",
        &["core/src/maximal.rs::buckley_at_infinity_is_one", "core/tests/maximal_properties.rs::buckley_ratio_is_finite"],
    ),
    row(
        "multiplier-duality",
        "pairing of a multiplier with two transforms equals the spatial pairing",
        &["core/src/transfer.rs::duality_form_normalisation", "core/tests/transfer_properties.rs::duality_form_agrees", "suite:7"],
    ),
    row(
        "dual-homomorphism",
        "dual homomorphism defined through the character pairing",
        &["core/src/transfer.rs::doubling_hom_and_dual", "core/src/transfer.rs::identity_and_zero_duals", "core/tests/transfer_properties.rs::pairing_exact", "suite:7"],
    ),
    row(
        "homomorphism-duality",
        "summing a function of the dual map against a kernel equals the composed multiplier pairing",
        &["core/src/transfer.rs::duality_identity_on_doubling", "core/tests/transfer_properties.rs::homomorphism_duality", "suite:7"],
    ),
    row(
        "translation-invariance",
        "multiplier norms do not change when the weight is translated",
        &["core/src/transfer.rs::translation_invariance_exact_at_two", "suite:7"],
    ),
    row(
        "transference",
        "composed multiplier norm bounded through the dual map",
        &["core/src/transfer.rs::transference_cyclic_doubling_flat_weight", "core/tests/transfer_properties.rs::transference_surjective", "suite:7"],
    ),
    skip(
        "approximate-identity-assumption",
        "approximate identities dominated by the maximal operator",
        "finite groups: the identity is the point mass at zero, so the assumption holds trivially",
    ),
    skip(
        "decreasing-function-class",
        "class of bounded decreasing functions and its approximations",
        "continuous-group scaffolding with no finite counterpart",
    ),
    skip("dense-subclass", "density of nice functions in weighted spaces", "every function on a finite group is already nice"),
    skip(
        "compact-support-reduction",
        "reduction to compactly supported multipliers",
        "multipliers on finite groups have finite support",
    ),
    skip(
        "randomized-boundedness",
        "randomised-sum boundedness of operator families",
        "needs randomised-sum machinery outside this tool",
    ),
    skip("sharp-constants", "proofs of cited sharp maximal constants", "external results; only measured, not proved"),
];

fn verdict_for(tests: &[&str], payload: Option<&SuitePayload>) -> TraceVerdict {
    let Some(payload) = payload else {
        return TraceVerdict::NotRun;
    };
    let ids: Vec<usize> = tests.iter().filter_map(|t| t.strip_prefix("suite:")?.parse().ok()).collect();
    let found: Vec<bool> = ids
        .iter()
        .filter_map(|id| payload.criteria.iter().find(|c| c.id == *id).map(|c| c.passed))
        .collect();
    if found.is_empty() {
        TraceVerdict::NotRun
    } else if found.iter().all(|&p| p) {
        TraceVerdict::Pass
    } else {
        TraceVerdict::Fail
    }
}

pub fn trace(payload: Option<&SuitePayload>) -> Vec<TraceEntry> {
    ROWS.iter()
        .map(|r| TraceEntry {
            id: r.id,
            statement: r.statement,
            in_scope: r.out_of_scope.is_none(),
            tests: r.tests.to_vec(),
            verdict: if r.out_of_scope.is_some() { TraceVerdict::OutOfScope } else { verdict_for(r.tests, payload) },
            reason: r.out_of_scope,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suite::CriterionResult;
    use std::path::Path;

    #[test]
    fn every_in_scope_statement_has_a_test() {
        for e in trace(None) {
            assert_eq!(e.in_scope, !e.tests.is_empty(), "{}", e.id);
            if !e.in_scope {
                assert!(e.reason.is_some());
                assert_eq!(e.verdict, TraceVerdict::OutOfScope);
            }
        }
    }

    #[test]
    fn weight_properties_are_listed() {
        let ids: Vec<_> = trace(None).into_iter().map(|e| e.id).collect();
        for id in ["weight-symmetry", "weight-rescaling", "holder-product", "maximal-endpoint-identity", "maximal-mirror-identity"] {
            assert!(ids.contains(&id), "{id}");
        }
    }

    #[test]
    fn test_ids_name_existing_tests() {
        let crates = Path::new(env!("CARGO_MANIFEST_DIR")).parent().unwrap();
        for e in trace(None) {
            for t in e.tests {
                if let Some(n) = t.strip_prefix("suite:") {
                    assert!((1..=8).contains(&n.parse::<usize>().unwrap()));
                    continue;
                }
                let (file, func) = t.split_once("::").unwrap();
                let src = std::fs::read_to_string(crates.join(file)).unwrap_or_else(|_| panic!("missing {file}"));
                assert!(src.contains(&format!("fn {func}(")), "{t}");
            }
        }
    }

    #[test]
    fn verdicts_follow_the_suite() {
        let payload = SuitePayload {
            seed: 1,
            criteria: vec![CriterionResult {
                id: 7,
                title: String::new(),
                instances: 1,
                checks: vec![],
                passed: false,
            }],
            passed: false,
        };
        let m = trace(Some(&payload));
        let get = |id: &str| m.iter().find(|e| e.id == id).unwrap().verdict;
        assert_eq!(get("transference"), TraceVerdict::Fail);
        assert_eq!(get("weight-symmetry"), TraceVerdict::NotRun);
        assert_eq!(get("dense-subclass"), TraceVerdict::OutOfScope);
    }
}
