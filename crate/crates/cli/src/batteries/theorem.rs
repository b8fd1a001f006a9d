use opcalc::aae::{build_extension_with_bounds, default_truncation, AlmostAnalytic};
use opcalc::expansion::{remainder_direct, remainder_integral_with_estimate, Side};
use opcalc::operator::{op_norm, Operator};
use serde::Serialize;
use serde_json::json;

use super::{instance, num, ratio, truncation_for, Outcome, CONSTANT_SEED};
use crate::config::{BChoice, ExperimentConfig};
use crate::error::Result;
use crate::report::{Check, Table};

#[derive(Debug, Serialize)]
struct Row {
    nu: usize,
    d: usize,
    seed: u64,
    n: u32,
    member: f64,
    direct_norm: f64,
    error: f64,
    estimate: f64,
    /// `error / estimate`, 0 when both vanish.
    ratio: f64,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let family = cfg.family.as_ref().expect("validated");
    let factor = cfg.thresholds.estimate_factor.expect("validated");
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for nu in cfg.nu.values() {
        let quad = cfg.quadrature_for(nu);
        let members = family.parameters().to_vec();
        for n in cfg.n.as_ref().expect("validated").values() {
            let trunc = truncation_for(cfg, default_truncation(n, nu));
            // shared constants give the members one node set
            let fam = family.build(nu, trunc, CONSTANT_SEED)?;
            let exts: Vec<AlmostAnalytic> = fam
                .members
                .iter()
                .map(|f| build_extension_with_bounds(f.clone(), trunc, fam.bounds.clone()))
                .collect::<opcalc::Result<_>>()?;
            let refs: Vec<&AlmostAnalytic> = exts.iter().collect();
            let mut worst = 0.0f64;
            let mut largest = 0.0f64;
            for d in cfg.d.values() {
                for seed in cfg.seeds.values() {
                    let (a, b) = instance(cfg, seed, d).build(nu)?;
                    let b = match cfg.b.unwrap_or_default() {
                        BChoice::Random => b,
                        BChoice::Identity => Operator::identity(d, d),
                    };
                    let integral = remainder_integral_with_estimate(&a, &b, &refs, n, &quad)?;
                    for ((ext, est), &member) in exts.iter().zip(&integral).zip(&members) {
                        let direct = remainder_direct(&a, &b, ext.base().as_ref(), n, Side::Left)?;
                        let error = op_norm(&(&est.result - &direct));
                        let r = ratio(error, est.estimate);
                        worst = if r.is_nan() { f64::NAN } else { worst.max(r) };
                        largest = largest.max(op_norm(&est.result)).max(op_norm(&direct));
                        rows.push(Row {
                            nu,
                            d,
                            seed,
                            n,
                            member,
                            direct_norm: op_norm(&direct),
                            error,
                            estimate: est.estimate,
                            ratio: r,
                        });
                    }
                }
            }
            checks.push(Check::at_most(
                format!("nu={nu} n={n}: max |integral - direct| / quadrature estimate"),
                worst,
                factor,
            ));
            if let Some(tol) = cfg.thresholds.tolerance {
                checks.push(Check::at_most(
                    format!("nu={nu} n={n}: max remainder norm over both routes"),
                    largest,
                    tol,
                ));
            }
        }
    }
    let mut table = Table::new(
        "routes",
        &["nu", "d", "seed", "n", "member", "direct_norm", "error", "estimate", "ratio"],
    );
    for r in &rows {
        table.push(vec![
            r.nu.to_string(),
            r.d.to_string(),
            r.seed.to_string(),
            r.n.to_string(),
            num(r.member),
            num(r.direct_norm),
            num(r.error),
            num(r.estimate),
            num(r.ratio),
        ]);
    }
    Ok(Outcome {
        checks,
        details: json!({ "family": family, "rows": rows }),
        tables: vec![table],
    })
}
