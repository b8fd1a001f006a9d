use opcalc::symdiff::verify_symbolic;
use serde_json::json;

use super::Outcome;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{Check, Table};

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let max_degree = cfg.max_degree.unwrap_or(6);
    let mut checks = Vec::new();
    let mut table = Table::new(
        "certificates",
        &["nu", "max_degree", "identity", "checked", "failures"],
    );
    let mut certificates = Vec::new();
    for nu in cfg.nu.values() {
        let cert = verify_symbolic(nu, max_degree);
        let parts = [
            ("closed form of d^alpha g", cert.closed_form_checked, cert.closed_form_failures.len()),
            ("index identities h1/h2", cert.index_identities_checked, cert.index_identity_failures.len()),
        ];
        for (what, checked, failed) in parts {
            checks.push(Check::at_most(
                format!("nu={nu} |alpha|<={max_degree} {what}: failures out of {checked}"),
                failed as f64,
                0.0,
            ));
            table.push(vec![
                nu.to_string(),
                max_degree.to_string(),
                what.to_string(),
                checked.to_string(),
                failed.to_string(),
            ]);
        }
        certificates.push(cert);
    }
    Ok(Outcome {
        checks,
        details: json!({ "certificates": certificates }),
        tables: vec![table],
    })
}
