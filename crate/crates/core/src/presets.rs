//! Built-in system catalog.
//!
//! Systems are user-supplied code (closures), so config files address them by
//! name rather than defining them inline. Three ship with the crate:
//!
//! - `paper-sec5` — the second-order reference experiment:
//!   `g1 = sin(x1)`, `g2 = sin(x1 + x2)`,
//!   `f = x1 + 2 x2 + sin t + cos(x1 + x2) + w1^3 + w2`,
//!   bounded noise `w1 = 2 sin(t + B1)`.
//! - `linear-n2` — `f = x1 + 2 x2`, `g = 0`; the linear test plant used by gain
//!   sweeps (the noises are simulated but do not enter the dynamics).
//! - `silent` — everything identically zero; used for degenerate checks.

use std::sync::Arc;

use crate::noise::BoundedNoiseSpec;
use crate::plant::SystemSpec;

pub const SYSTEM_NAMES: [&str; 3] = ["paper-sec5", "linear-n2", "silent"];

/// Looks up a named system and its bounded-noise definition.
pub fn system(name: &str) -> Option<(SystemSpec, BoundedNoiseSpec)> {
    match name {
        "paper-sec5" => {
            let spec = SystemSpec::new(
                "paper-sec5",
                2,
                Arc::new(|t: f64, x: &[f64], w1: f64, w2: f64| {
                    x[0] + 2.0 * x[1] + t.sin() + (x[0] + x[1]).cos() + w1 * w1 * w1 + w2
                }),
                vec![
                    Arc::new(|x: &[f64]| x[0].sin()),
                    Arc::new(|x: &[f64]| (x[0] + x[1]).sin()),
                ],
                // Declared metadata for the gain checks. L2 = 1 follows the
                // reference design arithmetic (threshold 2 lmax(Q1) * 2); the
                // tight Euclidean constant for sin(x1+x2) would be sqrt(2).
                vec![1.0, 1.0],
                // |f| + |df/dt| <= 3 + sqrt(5) ||x|| + |w2| + |w1|^3.
                [3.0, 5.0_f64.sqrt(), 1.0, 30.0],
                // phi1(w1) = |w1|^3 <= alpha5^3 = 8.
                8.0,
            )
            .expect("catalog system is well formed");
            let noise = BoundedNoiseSpec::new(
                Arc::new(|t: f64, b: f64| 2.0 * (t + b).sin()),
                2.0,
            )
            .expect("catalog noise is well formed");
            Some((spec, noise))
        }
        "linear-n2" => {
            let spec = SystemSpec::new(
                "linear-n2",
                2,
                Arc::new(|_t: f64, x: &[f64], _w1: f64, _w2: f64| x[0] + 2.0 * x[1]),
                vec![Arc::new(|_: &[f64]| 0.0), Arc::new(|_: &[f64]| 0.0)],
                vec![0.0, 0.0],
                [0.0, 5.0_f64.sqrt(), 0.0, 3.0],
                0.0,
            )
            .expect("catalog system is well formed");
            let noise = BoundedNoiseSpec::new(
                Arc::new(|t: f64, b: f64| 2.0 * (t + b).sin()),
                2.0,
            )
            .expect("catalog noise is well formed");
            Some((spec, noise))
        }
        "silent" => {
            let spec = SystemSpec::new(
                "silent",
                2,
                Arc::new(|_, _: &[f64], _, _| 0.0),
                vec![Arc::new(|_: &[f64]| 0.0), Arc::new(|_: &[f64]| 0.0)],
                vec![0.0, 0.0],
                [0.0; 4],
                0.0,
            )
            .expect("catalog system is well formed");
            let noise = BoundedNoiseSpec::new(Arc::new(|_, _| 0.0), 1.0)
                .expect("catalog noise is well formed");
            Some((spec, noise))
        }
        _ => None,
    }
}
