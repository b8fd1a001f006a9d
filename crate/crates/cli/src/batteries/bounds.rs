use opcalc::expansion::{bound_experiment, Instance};
use serde_json::json;

use super::{instance, num, Outcome, CONSTANT_SEED};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{Check, Table};

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = cfg.family.as_ref().expect("validated");
    let (t1, t2) = (cfg.t1.expect("validated"), cfg.t2.expect("validated"));
    let limit = cfg.thresholds.spread.expect("validated");
    let mut checks = Vec::new();
    let mut summaries = Vec::new();
    let mut table = Table::new(
        "ratios",
        &["nu", "n", "d", "instances", "max_ratio", "median_ratio", "exact_expansions"],
    );
    for nu in cfg.nu.values() {
        for n in cfg.n.as_ref().expect("validated").values() {
            let family = spec.build(nu, n + 1, CONSTANT_SEED)?;
            let instances: Vec<Instance> = cfg
                .d
                .values()
                .into_iter()
                .flat_map(|d| cfg.seeds.values().into_iter().map(move |s| (d, s)))
                .map(|(d, s)| instance(cfg, s, d))
                .collect();
            let summary = bound_experiment(&family, n, t1, t2, &instances)?;
            for p in &summary.per_dimension {
                table.push(vec![
                    nu.to_string(),
                    n.to_string(),
                    p.d.to_string(),
                    p.instances.to_string(),
                    num(p.max_ratio),
                    num(p.median_ratio),
                    p.exact_expansions.to_string(),
                ]);
            }
            let label = format!("nu={nu} n={n} t1={t1} t2={t2} s={}", summary.s);
            checks.push(Check::below(
                format!("{label}: spread of max ratio across d"),
                summary.spread,
                limit,
            ));
            let exact = summary
                .per_dimension
                .iter()
                .map(|p| p.exact_expansion_max_remainder)
                .fold(0.0, f64::max);
            checks.push(Check::at_most(
                format!("{label}: remainder norm when all order-(n+1) commutators vanish"),
                exact,
                opcalc::expansion::probe::EXACT_EXPANSION_TOL,
            ));
            summaries.push(json!({
                "nu": nu,
                "n": n,
                "family": summary.family,
                "s": summary.s,
                "spread": summary.spread,
                "all_finite": summary.all_finite,
                "per_dimension": summary.per_dimension,
            }));
        }
    }
    Ok(Outcome {
        checks,
        details: json!({ "summaries": summaries }),
        tables: vec![table],
    })
}
