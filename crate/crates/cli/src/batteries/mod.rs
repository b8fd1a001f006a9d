//! One module per verification battery.

mod bounds;
mod hs;
mod lemmas;
mod probes;
mod symbolic;
mod theorem;

use opcalc::expansion::Instance;

use crate::config::{Battery, ExperimentConfig};
use crate::error::Result;
pub use crate::report::Outcome;

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.battery {
        Battery::VerifySymbolic => symbolic::run(cfg),
        Battery::VerifyLemmas => lemmas::run(cfg),
        Battery::VerifyTheorem => theorem::run(cfg),
        Battery::HsApply => hs::run(cfg),
        Battery::BoundSweep => bounds::run(cfg),
        Battery::HadamardProbe => probes::hadamard(cfg),
        Battery::AaeProbe => probes::aae(cfg),
    }
}

/// Seed for sampling family constants `C_α`.
const CONSTANT_SEED: u64 = 7;

fn instance(cfg: &ExperimentConfig, seed: u64, d: usize) -> Instance {
    Instance {
        seed,
        d,
        scale: cfg.scale,
    }
}

fn truncation_for(cfg: &ExperimentConfig, fallback: u32) -> u32 {
    cfg.truncation
        .as_ref()
        .and_then(|t| t.values().first().copied())
        .unwrap_or(fallback)
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Errors at or below this count as exact.
const ROUNDOFF: f64 = 1e-12;

/// `error / estimate`, zero for errors at roundoff level.
fn ratio(error: f64, estimate: f64) -> f64 {
    if error <= ROUNDOFF {
        0.0
    } else {
        error / estimate
    }
}
