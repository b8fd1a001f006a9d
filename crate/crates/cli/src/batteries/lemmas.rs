use opcalc::expansion::{
    acommb_residual, basestep_residual, gl_identity_residual, leibniz_residual, lemma1_residual, random_point,
    KernelFactor,
};
use opcalc::multiindex::enumerate_degree_range;
use serde::Serialize;
use serde_json::json;

use super::{instance, num, Outcome};
use crate::config::{ExperimentConfig, Identity};
use crate::error::Result;
use crate::report::{Check, Table};

#[derive(Debug, Serialize)]
struct Row {
    nu: usize,
    d: usize,
    seed: u64,
    case: String,
    residual: f64,
}

/// Every factor list of length `k` over `g, g_0, …, g_{ν−1}`.
fn factor_lists(nu: usize, k: usize) -> Vec<Vec<KernelFactor>> {
    let alphabet: Vec<KernelFactor> = std::iter::once(KernelFactor::G)
        .chain((0..nu).map(KernelFactor::Gl))
        .collect();
    let mut lists = vec![Vec::new()];
    for _ in 0..k {
        lists = lists
            .into_iter()
            .flat_map(|l: Vec<KernelFactor>| {
                alphabet.iter().map(move |f| {
                    let mut next = l.clone();
                    next.push(*f);
                    next
                })
            })
            .collect();
    }
    lists
}

fn residuals(cfg: &ExperimentConfig, nu: usize, d: usize, seed: u64) -> Result<Vec<(String, f64)>> {
    let (a, b) = instance(cfg, seed, d).build(nu)?;
    let z = random_point(seed, nu);
    let ns = cfg.n.as_ref().map(|n| n.values()).unwrap_or_default();
    let alpha0s = enumerate_degree_range(nu, 0, cfg.alpha0_max.unwrap_or(0));
    let mut out = Vec::new();
    match cfg.identity.unwrap_or_default() {
        Identity::Basestep => out.push(("basestep".into(), basestep_residual(&a, &b, &z)?)),
        Identity::ShiftedResolvent => {
            for &n in &ns {
                for a0 in &alpha0s {
                    out.push((format!("n={n} alpha0={a0}"), lemma1_residual(&a, &b, a0, n, &z)?));
                }
            }
        }
        Identity::ConjugateLinear => {
            for &n in &ns {
                for a0 in &alpha0s {
                    for l in 0..nu {
                        let r = gl_identity_residual(&a, &b, a0, n, l, &z)?;
                        out.push((format!("n={n} alpha0={a0} l={l}"), r));
                    }
                }
            }
        }
        Identity::Kernel => {
            for &n in &ns {
                for l in 0..nu {
                    out.push((format!("n={n} l={l}"), acommb_residual(&a, &b, l, n, &z)?));
                }
            }
        }
        Identity::Product => {
            for &k in cfg.factors.as_deref().unwrap_or_default() {
                for factors in factor_lists(nu, k) {
                    for &n in &ns {
                        let r = leibniz_residual(&a, &b, &factors, n, &z)?;
                        out.push((format!("n={n} factors={factors:?}"), r));
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let tol = cfg.thresholds.tolerance.expect("validated");
    let identity = cfg.identity.unwrap_or_default();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for nu in cfg.nu.values() {
        let mut worst = 0.0f64;
        let mut count = 0usize;
        for d in cfg.d.values() {
            for seed in cfg.seeds.values() {
                for (case, residual) in residuals(cfg, nu, d, seed)? {
                    worst = if residual.is_nan() { f64::NAN } else { worst.max(residual) };
                    count += 1;
                    rows.push(Row {
                        nu,
                        d,
                        seed,
                        case,
                        residual,
                    });
                }
            }
        }
        checks.push(Check::at_most(
            format!("{identity:?} nu={nu}: max relative residual over {count} cases"),
            worst,
            tol,
        ));
    }
    let mut table = Table::new("residuals", &["nu", "d", "seed", "case", "residual"]);
    for r in &rows {
        table.push(vec![
            r.nu.to_string(),
            r.d.to_string(),
            r.seed.to_string(),
            r.case.clone(),
            num(r.residual),
        ]);
    }
    Ok(Outcome {
        checks,
        details: json!({ "identity": identity, "rows": rows }),
        tables: vec![table],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_lists_cover_every_word() {
        let lists = factor_lists(2, 3);
        assert_eq!(lists.len(), 27);
        assert!(lists.contains(&vec![KernelFactor::Gl(1), KernelFactor::G, KernelFactor::Gl(0)]));
    }
}
