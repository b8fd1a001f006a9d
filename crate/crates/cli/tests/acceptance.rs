//! Runs every shipped acceptance config and prints one verdict per criterion.
//! Built without the libtest harness so the verdicts are always shown.

use std::collections::BTreeMap;
use std::path::PathBuf;

use opcalc_harness::{run_suite, Check, ExperimentConfig, Report};

struct Criterion {
    id: u32,
    what: &'static str,
    /// Config names and an optional substring selecting their checks.
    sources: &'static [(&'static str, Option<&'static str>)],
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        what: "closed form of d^alpha |t-z|^-2, exact, nu<=3, |alpha|<=6",
        sources: &[("symbolic-identities", Some("closed form"))],
    },
    Criterion {
        id: 2,
        what: "index identities h1, h2, exact, nu<=3, |alpha|<=6",
        sources: &[("symbolic-identities", Some("index identities"))],
    },
    Criterion {
        id: 3,
        what: "two-sided resolvent commutator, residual <= 1e-10",
        sources: &[("lemma-basestep", None)],
    },
    Criterion {
        id: 4,
        what: "shifted resolvent expansion, n<=3, |alpha0|<=2, residual <= 1e-9",
        sources: &[("lemma-shifted-resolvent", None)],
    },
    Criterion {
        id: 5,
        what: "kernel commutator expansion, n<=2, residual <= 1e-9",
        sources: &[("lemma-kernel", None)],
    },
    Criterion {
        id: 6,
        what: "product rule for 2 and 3 factors, residual <= 1e-9",
        sources: &[("lemma-product", None)],
    },
    Criterion {
        id: 7,
        what: "calibrated constant: 1/pi within 1e-3, 1/pi^2 within 1e-2",
        sources: &[("hs-calibrate-nu1", None), ("hs-calibrate-nu2", None)],
    },
    Criterion {
        id: 8,
        what: "quadrature f(A) vs oracle: 1e-4 (nu=1), 1e-3 (nu=2), estimate consistent",
        sources: &[("hs-apply-nu1", None), ("hs-apply-nu2", None)],
    },
    Criterion {
        id: 9,
        what: "remainder routes agree within 3x the quadrature estimate",
        sources: &[("theorem-routes-nu1", None), ("theorem-routes-nu2", None)],
    },
    Criterion {
        id: 10,
        what: "max ratio spread < 10 across d in {4, 8, 16}, 50 instances each",
        sources: &[("bounds-nu1", None), ("bounds-nu2", None)],
    },
    Criterion {
        id: 11,
        what: "kernel remainder slope >= -(n+2nu) - 0.2",
        sources: &[("hadamard-nu1", None), ("hadamard-nu2", None)],
    },
    Criterion {
        id: 12,
        what: "vanishing order of d-bar extension equals N within 0.2",
        sources: &[("aae-decay", None)],
    },
];

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.toml"))
}

fn main() {
    let mut reports: BTreeMap<&str, Report> = BTreeMap::new();
    let mut verdicts = Vec::new();
    for c in CRITERIA {
        let mut selected: Vec<Check> = Vec::new();
        let mut seconds = 0.0;
        for &(name, filter) in c.sources {
            if !reports.contains_key(name) {
                let cfg = ExperimentConfig::load(&config_path(name))
                    .unwrap_or_else(|e| panic!("config {name}: {e}"));
                let report = run_suite(&cfg).unwrap_or_else(|e| panic!("run {name}: {e}"));
                seconds += report.run_info.elapsed_seconds;
                reports.insert(name, report);
            }
            selected.extend(
                reports[name]
                    .checks
                    .iter()
                    .filter(|ch| filter.is_none_or(|f| ch.label.contains(f)))
                    .cloned(),
            );
        }
        let passed = !selected.is_empty() && selected.iter().all(|ch| ch.passed);
        println!(
            "criterion {:>2} {}  {} ({} checks, {seconds:.1} s)",
            c.id,
            if passed { "PASS" } else { "FAIL" },
            c.what,
            selected.len()
        );
        for ch in &selected {
            println!("      {ch}");
        }
        verdicts.push((c.id, passed));
    }
    let failed: Vec<u32> = verdicts.iter().filter(|v| !v.1).map(|v| v.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", verdicts.len());
    } else {
        eprintln!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
