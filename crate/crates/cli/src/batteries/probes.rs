use opcalc::aae::{build_extension, decay_probe, generic_point};
use opcalc::expansion::hadamard_probe;
use opcalc::fit::geometric_path;
use serde_json::json;

use super::{instance, num, Outcome};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{Check, Table};

/// Kernel remainder along `z = x_0 + i v (1, …, 1)`, with `x_0` a joint
/// eigenvalue of `A`.
pub fn hadamard(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (t1, t2) = (cfg.t1.expect("validated"), cfg.t2.expect("validated"));
    let (hi, lo) = cfg.v_range.expect("validated");
    let margin = cfg.thresholds.slope_margin.expect("validated");
    let path = geometric_path(hi, lo, cfg.points.unwrap_or(12));
    let mut checks = Vec::new();
    let mut probes = Vec::new();
    let mut table = Table::new("norms", &["nu", "n", "d", "seed", "l", "v", "weighted_norm", "fitted_slope"]);
    for nu in cfg.nu.values() {
        for n in cfg.n.as_ref().expect("validated").values() {
            let limit = -(f64::from(n) + 2.0 * nu as f64);
            let mut slopes = Vec::new();
            for d in cfg.d.values() {
                for seed in cfg.seeds.values() {
                    let (a, b) = instance(cfg, seed, d).build(nu)?;
                    let u0 = a.spectrum()[0].clone();
                    for l in 0..nu {
                        let p = hadamard_probe(&a, &b, l, n, t1, t2, &path, &u0)?;
                        let slope = p.slope.unwrap_or(f64::NAN);
                        for (v, norm) in &p.rows {
                            table.push(vec![
                                nu.to_string(),
                                n.to_string(),
                                d.to_string(),
                                seed.to_string(),
                                l.to_string(),
                                num(*v),
                                num(*norm),
                                num(slope),
                            ]);
                        }
                        if !p.degenerate {
                            slopes.push(slope);
                        }
                        probes.push(json!({ "d": d, "seed": seed, "probe": p }));
                    }
                }
            }
            let worst = slopes
                .iter()
                .copied()
                .fold(f64::INFINITY, |m, s| if s.is_nan() { f64::NAN } else { m.min(s) });
            checks.push(Check::at_least(
                format!("nu={nu} n={n}: min fitted slope (limit {limit})"),
                worst,
                limit - margin,
            ));
        }
    }
    Ok(Outcome {
        checks,
        details: json!({ "path": path, "probes": probes }),
        tables: vec![table],
    })
}

/// Vanishing order of `∂̄f̃` at a fixed generic `u`.
pub fn aae(cfg: &ExperimentConfig) -> Result<Outcome> {
    let family = cfg.family.as_ref().expect("validated");
    let margin = cfg.thresholds.slope_margin.expect("validated");
    let points = cfg.points.unwrap_or(12);
    let mut checks = Vec::new();
    let mut probes = Vec::new();
    let mut table = Table::new("decay", &["nu", "member", "truncation", "abs_v", "abs_dbar", "fitted_slope"]);
    for nu in cfg.nu.values() {
        let u = generic_point(nu);
        for big_n in cfg.truncation.as_ref().expect("validated").values() {
            let mut worst = 0.0f64;
            for &member in family.parameters() {
                let ext = build_extension(family.member(nu, member), big_n)?;
                let p = decay_probe(&ext, &u, points)?;
                let slope = p.slope.unwrap_or(f64::NAN);
                let dev = (slope - f64::from(big_n)).abs();
                worst = if dev.is_nan() { f64::NAN } else { worst.max(dev) };
                for (v, dbar) in &p.rows {
                    table.push(vec![
                        nu.to_string(),
                        num(member),
                        big_n.to_string(),
                        num(*v),
                        num(*dbar),
                        num(slope),
                    ]);
                }
                probes.push(json!({ "nu": nu, "member": member, "truncation": big_n, "probe": p }));
            }
            checks.push(Check::at_most(
                format!("nu={nu} N={big_n}: max |fitted vanishing order - N|"),
                worst,
                margin,
            ));
        }
    }
    Ok(Outcome {
        checks,
        details: json!({ "probes": probes }),
        tables: vec![table],
    })
}
