//! TOML run configuration: `[model]`, `[model.emission]`, `[svi]`,
//! `[synth]`, `[eval]` and `[sweep]` sections. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::DataSummary;
use crate::error::{Error, Result};
use crate::expfam::NigParams;
use crate::io;
use crate::model::{EmissionPrior, FeatureMap, Hyperparams, Variant};
use crate::svi::{StepSchedule, SviConfig};
use crate::synth::SynthConfig;

/// Emission prior as written in a config file. Omitted NIW location and
/// scale are filled from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family", deny_unknown_fields)]
pub enum EmissionSection {
    /// Univariate normal–inverse-gamma. σ² ~ IG(shape, rate); when `kappa`
    /// is omitted it is set so that Var(μ) = `mean_var` at the prior mode
    /// of σ².
    Nig {
        #[serde(default)]
        mean: f64,
        kappa: Option<f64>,
        #[serde(default = "one")]
        shape: f64,
        #[serde(default = "one")]
        rate: f64,
        #[serde(default = "ten")]
        mean_var: f64,
    },
    Niw {
        #[serde(default = "one")]
        kappa: f64,
        dof: Option<f64>,
        mean: Option<Vec<f64>>,
        /// Row-major d×d.
        scale: Option<Vec<f64>>,
    },
}

fn one() -> f64 {
    1.0
}

fn ten() -> f64 {
    10.0
}

impl Default for EmissionSection {
    fn default() -> Self {
        EmissionSection::Nig {
            mean: 0.0,
            kappa: None,
            shape: 1.0,
            rate: 1.0,
            mean_var: 10.0,
        }
    }
}

/// κ₀ giving Var(μ) = `mean_var` at the IG(shape, rate) mode of σ².
pub fn nig_kappa_for(shape: f64, rate: f64, mean_var: f64) -> f64 {
    rate / (shape + 1.0) / mean_var
}

impl EmissionSection {
    pub fn resolve(&self, summary: &DataSummary) -> Result<EmissionPrior> {
        let prior = match self {
            EmissionSection::Nig {
                mean,
                kappa,
                shape,
                rate,
                mean_var,
            } => {
                if summary.dim != 1 {
                    return Err(Error::Config(format!(
                        "the nig emission family is univariate but the data have {} columns",
                        summary.dim
                    )));
                }
                if !(*mean_var > 0.0) {
                    return Err(Error::Config("mean_var must be positive".into()));
                }
                EmissionPrior::Nig(NigParams {
                    mean: *mean,
                    kappa: kappa.unwrap_or_else(|| nig_kappa_for(*shape, *rate, *mean_var)),
                    shape: *shape,
                    rate: *rate,
                })
            }
            EmissionSection::Niw {
                kappa,
                dof,
                mean,
                scale,
            } => {
                let d = summary.dim;
                let dof = dof.unwrap_or(d as f64 + 2.0);
                let EmissionPrior::Niw(mut p) = EmissionPrior::niw_from_data(summary, *kappa, dof) else {
                    unreachable!("niw_from_data builds an NIW prior")
                };
                if let Some(m) = mean {
                    p.mean = m.clone();
                }
                if let Some(s) = scale {
                    p.scale = s.clone();
                }
                if p.mean.len() != d || p.scale.len() != d * d {
                    return Err(Error::Config(format!("NIW mean/scale do not match data dimension {d}")));
                }
                EmissionPrior::Niw(p)
            }
        };
        prior.natural()?;
        Ok(prior)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub k: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub a0: f64,
    pub b0: f64,
    pub kappa: f64,
    pub variant: Variant,
    pub features: FeatureMap,
    pub init_spread: f64,
    pub emission: EmissionSection,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            k: 20,
            alpha: 5.0,
            gamma: 5.0,
            a0: 1.0,
            b0: 1.0,
            kappa: 0.0,
            variant: Variant::FeatureIndependent,
            features: FeatureMap::Raw,
            init_spread: 1.0,
            emission: EmissionSection::default(),
        }
    }
}

impl ModelSection {
    pub fn hyperparams(&self, summary: &DataSummary) -> Result<Hyperparams> {
        let h = Hyperparams {
            gamma: self.gamma,
            alpha: self.alpha,
            k: self.k,
            a0: self.a0,
            b0: self.b0,
            kappa: self.kappa,
            emission_prior: self.emission.resolve(summary)?,
            variant: self.variant,
            features: self.features,
            init_spread: self.init_spread,
        };
        h.validate()?;
        Ok(h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SviSection {
    pub batch_size: usize,
    pub passes: usize,
    pub tau: f64,
    pub kappa: f64,
    /// Fixed step size; overrides `tau`/`kappa` when present.
    pub rho: Option<f64>,
    pub beta_lr: f64,
    pub theta_lr: f64,
    pub omega_lr: f64,
    pub seed: u64,
    pub tolerance: Option<f64>,
}

impl Default for SviSection {
    fn default() -> Self {
        let d = SviConfig::default();
        let StepSchedule::Decay { tau, kappa } = d.schedule else {
            unreachable!("default schedule decays")
        };
        Self {
            batch_size: d.batch_size,
            passes: d.passes,
            tau,
            kappa,
            rho: None,
            beta_lr: d.beta_lr,
            theta_lr: d.theta_lr,
            omega_lr: d.omega_lr,
            seed: d.seed,
            tolerance: d.tolerance,
        }
    }
}

impl SviSection {
    pub fn svi_config(&self) -> Result<SviConfig> {
        let schedule = match self.rho {
            Some(rho) => StepSchedule::Fixed { rho },
            None => StepSchedule::Decay {
                tau: self.tau,
                kappa: self.kappa,
            },
        };
        let cfg = SviConfig {
            batch_size: self.batch_size,
            passes: self.passes,
            schedule,
            beta_lr: self.beta_lr,
            theta_lr: self.theta_lr,
            omega_lr: self.omega_lr,
            seed: self.seed,
            tolerance: self.tolerance,
        };
        cfg.schedule.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Posterior boundary probability above which a step opens a segment.
    pub threshold: f64,
    /// Number of segment clusters for labeling; 0 disables labeling.
    pub n_labels: usize,
    /// Boundary matching tolerance in steps.
    pub boundary_window: usize,
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            n_labels: 0,
            boundary_window: 5,
            seed: 0,
        }
    }
}

impl EvalSection {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold must lie in [0, 1], got {}", self.threshold)));
        }
        Ok(())
    }
}

/// Hyperparameter grid; every combination is fitted once per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    pub k: Vec<usize>,
    /// Inverse-gamma shape and rate of the emission variance prior.
    pub shape: Vec<f64>,
    pub rate: Vec<f64>,
    pub seeds: usize,
    pub master_seed: u64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            alpha: vec![1.0, 5.0],
            gamma: vec![1.0, 5.0],
            k: vec![20, 30],
            shape: vec![1.0, 10.0],
            rate: vec![0.1, 1.0],
            seeds: 10,
            master_seed: 0,
        }
    }
}

impl SweepSection {
    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_empty()
            || self.gamma.is_empty()
            || self.k.is_empty()
            || self.shape.is_empty()
            || self.rate.is_empty()
            || self.seeds == 0
        {
            return Err(Error::Config("sweep grid must be nonempty in every axis".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub svi: SviSection,
    pub synth: SynthConfig,
    pub eval: EvalSection,
    pub sweep: SweepSection,
}

impl RunConfig {
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(path, &io::read_text(path)?)
    }

    /// Defaults when no path is given.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
