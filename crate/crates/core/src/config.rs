//! Serializable run configuration.
//!
//! A [`RunConfig`] is the complete numeric snapshot of one experiment: the
//! catalog name of the system, the gain design, the event-trigger parameters,
//! the noise parameters, and the integration settings. Config files
//! deserialize into it with unknown keys rejected (typos in tuning parameters
//! are hard errors), and the shipped presets are plain `RunConfig` values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gains::DesignGains;
use crate::noise::OuParams;
use crate::presets;
use crate::simulator::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    pub lambdas: Vec<f64>,
    pub cs: Vec<f64>,
    pub r: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtmSection {
    pub eps1: f64,
    pub kappa1: f64,
    pub eps2: f64,
    pub kappa2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub rho1: f64,
    pub rho2: f64,
    pub w2_init: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub x0: Vec<f64>,
    pub xhat0: Vec<f64>,
    pub horizon: f64,
    pub step: f64,
    pub record_stride: usize,
    pub seed: u64,
    #[serde(default)]
    pub check_assumptions: bool,
    #[serde(default)]
    pub force: bool,
}

/// Complete experiment configuration. The `system` field names a catalog
/// entry (see [`crate::presets`]); everything else is numeric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: String,
    pub gains: GainsSection,
    pub etm: EtmSection,
    pub noise: NoiseSection,
    pub sim: SimSection,
}

impl RunConfig {
    /// Names accepted by [`RunConfig::preset`].
    pub fn preset_names() -> &'static [&'static str] {
        &["paper-sec5", "linear-n2", "silent"]
    }

    /// Shipped presets: `paper-sec5` (the reference experiment, exact
    /// parameters), `linear-n2` (linear plant for gain sweeps), `silent`
    /// (all-zero degenerate case).
    pub fn preset(name: &str) -> Option<RunConfig> {
        let gains = GainsSection {
            lambdas: vec![6.0, 12.0, 8.0],
            cs: vec![-1.0, -2.0],
            r: 50.0,
            theta: 7.0,
        };
        let etm = EtmSection { eps1: 1.0, kappa1: 1.0, eps2: 1.0, kappa2: 1.0 };
        match name {
            "paper-sec5" => Some(RunConfig {
                system: "paper-sec5".into(),
                gains,
                etm,
                noise: NoiseSection { rho1: 1.5, rho2: 1.5, w2_init: 0.0 },
                sim: SimSection {
                    x0: vec![0.5, -0.5],
                    xhat0: vec![0.0, 0.0, 0.0],
                    horizon: 20.0,
                    step: 1e-4,
                    record_stride: 1,
                    seed: 0,
                    check_assumptions: false,
                    force: false,
                },
            }),
            "linear-n2" => Some(RunConfig {
                system: "linear-n2".into(),
                gains,
                etm,
                noise: NoiseSection { rho1: 1.5, rho2: 1.5, w2_init: 0.0 },
                sim: SimSection {
                    x0: vec![0.5, -0.5],
                    xhat0: vec![0.0, 0.0, 0.0],
                    horizon: 20.0,
                    step: 1e-4,
                    record_stride: 10,
                    seed: 0,
                    check_assumptions: false,
                    force: false,
                },
            }),
            "silent" => Some(RunConfig {
                system: "silent".into(),
                gains,
                etm,
                noise: NoiseSection { rho1: 1.5, rho2: 0.0, w2_init: 0.0 },
                sim: SimSection {
                    x0: vec![0.0, 0.0],
                    xhat0: vec![0.0, 0.0, 0.0],
                    horizon: 20.0,
                    step: 1e-4,
                    record_stride: 10,
                    seed: 0,
                    check_assumptions: false,
                    force: false,
                },
            }),
            _ => None,
        }
    }

    /// Resolves the catalog name and assembles a ready-to-run [`SimConfig`].
    pub fn to_sim_config(&self) -> Result<SimConfig> {
        let (system, bounded_noise) = presets::system(&self.system).ok_or_else(|| {
            Error::Config(format!(
                "unknown system '{}'; catalog: {:?}",
                self.system,
                presets::SYSTEM_NAMES
            ))
        })?;
        let design = DesignGains::new(
            self.gains.lambdas.clone(),
            self.gains.cs.clone(),
            self.gains.r,
            self.gains.theta,
            self.etm.eps1,
            self.etm.kappa1,
            self.etm.eps2,
            self.etm.kappa2,
        )?;
        let cfg = SimConfig {
            system,
            bounded_noise,
            design,
            ou: OuParams {
                rho1: self.noise.rho1,
                rho2: self.noise.rho2,
                w2_init: self.noise.w2_init,
            },
            x0: self.sim.x0.clone(),
            xhat0: self.sim.xhat0.clone(),
            horizon: self.sim.horizon,
            step: self.sim.step,
            record_stride: self.sim.record_stride,
            seed: self.sim.seed,
            stream_id: 0,
            check_assumptions: self.sim.check_assumptions,
            force: self.sim.force,
        };
        Ok(cfg)
    }
}
