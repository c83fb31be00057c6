//! Dispatch of a run configuration to the harness.

use std::path::Path;

use weightlab::extrapolate::{build_operator, check_mixed, check_multilinear, check_vector_valued, check_weak_type, BoundReport, MixedParams, Verdict};

use crate::config::{RunConfig, VariantSpec};

pub fn run_config(config: &RunConfig, base: &Path) -> anyhow::Result<BoundReport> {
    let basis = config.space.build(base)?;
    let options = config.harness_options();
    let params = &config.params;
    let op = build_operator(&config.operator, &basis, params)?;
    let op = op.as_ref();
    Ok(match &config.variant {
        VariantSpec::Multilinear => check_multilinear(op, &basis, params, &options)?,
        VariantSpec::Mixed {
            outer_gamma_recip,
            outer_space,
            inner_duals,
        } => {
            let outer = match outer_space {
                Some(s) => s.build(base)?,
                None => basis.clone(),
            };
            let mixed = MixedParams {
                inner: params.clone(),
                outer_gamma_recip: outer_gamma_recip.clone(),
            };
            check_mixed(op, &basis, &outer, &mixed, &options, *inner_duals)?
        }
        VariantSpec::Weak { levels } => check_weak_type(op, &basis, params, &options, *levels)?,
        VariantSpec::Vector { k } => check_vector_valued(op, &basis, params, *k, &options)?,
    })
}

/// Pass means the verdict passed and every link held.
pub fn report_passed(report: &BoundReport) -> bool {
    report.verdict == Verdict::Pass && report.chain_all_pass
}
