//! Catalog of built-in function families with a sampling self-check.

use opcalc::aae::{builtin_families, check_bounds, BoundCheck, FamilyInfo};
use serde::Serialize;

use crate::error::Result;

/// Order of the sampled constants `C_α` in the self-check.
const CHECK_ORDER: u32 = 4;

#[derive(Debug, Serialize)]
pub struct SelfCheck {
    pub nu: usize,
    pub member: f64,
    pub check: BoundCheck,
}

#[derive(Debug, Serialize)]
pub struct CatalogEntry {
    #[serde(flatten)]
    pub info: FamilyInfo,
    pub decay: f64,
    pub self_checks: Vec<SelfCheck>,
    pub passed: bool,
}

/// Every built-in family, with `|∂^α f| ≤ C_α ⟨x⟩^{s−|α|}` re-sampled on
/// fresh points for `ν ∈ {1, 2}`.
pub fn list_families() -> Result<Vec<CatalogEntry>> {
    builtin_families()
        .into_iter()
        .map(|info| {
            let mut self_checks = Vec::new();
            for nu in 1..=2 {
                let family = info.example.build(nu, CHECK_ORDER, 0)?;
                for (f, &member) in family.members.iter().zip(&family.parameters) {
                    self_checks.push(SelfCheck {
                        nu,
                        member,
                        check: check_bounds(f, &family.bounds, 1)?,
                    });
                }
            }
            let passed = self_checks.iter().all(|c| c.check.passed());
            Ok(CatalogEntry {
                decay: info.example.decay(),
                info,
                self_checks,
                passed,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_names_the_required_families_and_checks_out() {
        let cat = list_families().unwrap();
        let names: Vec<&str> = cat.iter().map(|e| e.info.name).collect();
        assert!(names.contains(&"bracket_power"));
        assert!(names.contains(&"shifted_inverse_bracket"));
        for e in &cat {
            assert!(e.passed, "{} failed its self-check", e.info.name);
        }
    }
}
