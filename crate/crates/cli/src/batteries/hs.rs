use opcalc::aae::{build_extension, default_truncation};
use opcalc::hs::{calibrate_constant, hs_apply_with_estimate, spectral_oracle};
use opcalc::operator::op_norm;
use serde::Serialize;
use serde_json::json;

use super::{instance, num, ratio, truncation_for, Outcome};
use crate::config::{ExperimentConfig, HsMode};
use crate::error::Result;
use crate::report::{Check, Table};

#[derive(Debug, Serialize)]
struct Row {
    nu: usize,
    d: usize,
    seed: u64,
    member: f64,
    /// Oracle error (apply) or relative deviation of the fitted constant.
    error: f64,
    estimate: f64,
    nodes: usize,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let family = cfg.family.as_ref().expect("validated");
    let tol = cfg.thresholds.tolerance.expect("validated");
    let mode = cfg.mode.unwrap_or_default();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for nu in cfg.nu.values() {
        let quad = cfg.quadrature_for(nu);
        let trunc = truncation_for(cfg, default_truncation(0, nu));
        let mut worst = 0.0f64;
        let mut worst_ratio = 0.0f64;
        let mut constants = Vec::new();
        for &member in family.parameters() {
            let ext = build_extension(family.member(nu, member), trunc)?;
            for d in cfg.d.values() {
                for seed in cfg.seeds.values() {
                    let (a, _) = instance(cfg, seed, d).build(nu)?;
                    let row = match mode {
                        HsMode::Apply => {
                            let est = hs_apply_with_estimate(&a, &ext, &quad)?;
                            let oracle = spectral_oracle(&a, ext.base().as_ref())?;
                            let error = op_norm(&(&est.result.matrix - &oracle));
                            worst_ratio = worst_ratio.max(ratio(error, est.estimate));
                            Row {
                                nu,
                                d,
                                seed,
                                member,
                                error,
                                estimate: est.estimate,
                                nodes: est.result.stats.nodes,
                            }
                        }
                        HsMode::Calibrate => {
                            let c = calibrate_constant(&a, &ext, &quad)?;
                            constants.push(c.constant);
                            Row {
                                nu,
                                d,
                                seed,
                                member,
                                error: c.relative_deviation,
                                estimate: f64::NAN,
                                nodes: 0,
                            }
                        }
                    };
                    worst = if row.error.is_nan() { f64::NAN } else { worst.max(row.error) };
                    rows.push(row);
                }
            }
        }
        match mode {
            HsMode::Apply => {
                checks.push(Check::at_most(
                    format!("nu={nu}: max ||hs_apply - oracle||"),
                    worst,
                    tol,
                ));
                checks.push(Check::at_most(
                    format!("nu={nu}: max error / quadrature estimate"),
                    worst_ratio,
                    cfg.thresholds.estimate_factor.expect("validated"),
                ));
            }
            HsMode::Calibrate => checks.push(Check::at_most(
                format!("nu={nu}: max relative deviation of the fitted constant from (nu-1)!/pi^nu"),
                worst,
                tol,
            )),
        }
    }
    let mut table = Table::new("errors", &["nu", "d", "seed", "member", "error", "estimate", "nodes"]);
    for r in &rows {
        table.push(vec![
            r.nu.to_string(),
            r.d.to_string(),
            r.seed.to_string(),
            num(r.member),
            num(r.error),
            num(r.estimate),
            r.nodes.to_string(),
        ]);
    }
    Ok(Outcome {
        checks,
        details: json!({ "mode": mode, "family": family, "rows": rows }),
        tables: vec![table],
    })
}
