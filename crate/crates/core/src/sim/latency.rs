//! Stage latency distributions. Every draw is non-negative: normal draws
//! below zero are clipped to zero and counted.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::budget;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatencySpec {
    Constant {
        value: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Normal, clipped at zero.
    Normal {
        mean: f64,
        std: f64,
    },
    /// Weighted mixture of normals, clipped at zero. Fits skewed profiles
    /// whose median sits well below the mean.
    Mixture {
        components: Vec<Component>,
    },
    /// Resamples recorded values. `file` holds one number per line (or
    /// separated by commas/whitespace) and is resolved against the scenario
    /// file's directory.
    Empirical {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        file: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        samples: Vec<f64>,
    },
}

/// One draw and whether it was clipped to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub value: f64,
    pub clipped: bool,
}

fn clip(x: f64) -> Draw {
    if x < 0.0 {
        Draw {
            value: 0.0,
            clipped: true,
        }
    } else {
        Draw {
            value: x,
            clipped: false,
        }
    }
}

impl LatencySpec {
    pub fn constant(value: f64) -> Self {
        LatencySpec::Constant { value }
    }

    /// Inference time profile: a tight core around 74 ms plus a long tail.
    /// Mean 79.02, median 74.49, standard deviation 11.54.
    pub fn inference_profile() -> Self {
        LatencySpec::Mixture {
            components: vec![
                Component {
                    weight: 0.73,
                    mean: 73.9,
                    std: 1.6,
                },
                Component {
                    weight: 0.27,
                    mean: 92.86,
                    std: 14.95,
                },
            ],
        }
    }

    /// Threat classification profile: mean 0.95, median 0.90, standard
    /// deviation 0.21.
    pub fn classification_profile() -> Self {
        LatencySpec::Mixture {
            components: vec![
                Component {
                    weight: 0.85,
                    mean: 0.88,
                    std: 0.10,
                },
                Component {
                    weight: 0.15,
                    mean: 1.3467,
                    std: 0.23,
                },
            ],
        }
    }

    /// Plain normal with the published inference mean and deviation.
    pub fn inference_normal() -> Self {
        LatencySpec::Normal {
            mean: budget::T_AI_MEAN_MS,
            std: budget::T_AI_STD_MS,
        }
    }

    pub fn validate(&self, stage: &str) -> Result<(), SimError> {
        let bad = |why: String| Err(SimError::Validation(format!("latency {stage}: {why}")));
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        match self {
            LatencySpec::Constant { value } if !finite_nonneg(*value) => bad(format!("constant {value} must be >= 0")),
            LatencySpec::Uniform { lo, hi } if !(finite_nonneg(*lo) && hi.is_finite() && lo <= hi) => {
                bad(format!("uniform bounds {lo}..{hi} invalid"))
            }
            LatencySpec::Normal { mean, std } if !(mean.is_finite() && finite_nonneg(*std)) => {
                bad(format!("normal({mean}, {std}) invalid"))
            }
            LatencySpec::Mixture { components } => {
                if components.is_empty() {
                    return bad("mixture needs at least one component".into());
                }
                for c in components {
                    if !(c.weight.is_finite() && c.weight > 0.0 && c.mean.is_finite() && finite_nonneg(c.std)) {
                        return bad(format!("mixture component {c:?} invalid"));
                    }
                }
                Ok(())
            }
            LatencySpec::Empirical { file, samples } => {
                if samples.is_empty() {
                    return bad(match file {
                        Some(f) => format!("empirical file {} not loaded or empty", f.display()),
                        None => "empirical spec needs samples or a file".into(),
                    });
                }
                match samples.iter().find(|x| !finite_nonneg(**x)) {
                    Some(x) => bad(format!("empirical sample {x} must be >= 0")),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }

    /// Loads an empirical sample file, if any, relative to `base`.
    pub fn resolve(&mut self, base: &Path) -> Result<(), SimError> {
        if let LatencySpec::Empirical {
            file: Some(file),
            samples,
        } = self
        {
            let path = if file.is_absolute() { file.clone() } else { base.join(&*file) };
            let text = std::fs::read_to_string(&path)
                .map_err(|e| SimError::Validation(format!("reading {}: {e}", path.display())))?;
            *samples = parse_samples(&text)
                .map_err(|e| SimError::Validation(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }

    /// Mean of the distribution before clipping, when it has a closed form.
    pub fn nominal_mean(&self) -> f64 {
        match self {
            LatencySpec::Constant { value } => *value,
            LatencySpec::Uniform { lo, hi } => (lo + hi) / 2.0,
            LatencySpec::Normal { mean, .. } => *mean,
            LatencySpec::Mixture { components } => {
                let w: f64 = components.iter().map(|c| c.weight).sum();
                components.iter().map(|c| c.weight * c.mean).sum::<f64>() / w
            }
            LatencySpec::Empirical { samples, .. } => {
                samples.iter().sum::<f64>() / samples.len().max(1) as f64
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Draw {
        match self {
            LatencySpec::Constant { value } => clip(*value),
            LatencySpec::Uniform { lo, hi } if lo == hi => clip(*lo),
            LatencySpec::Uniform { lo, hi } => clip(rng.gen_range(*lo..*hi)),
            LatencySpec::Normal { mean, std } => clip(normal(*mean, *std, rng)),
            LatencySpec::Mixture { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                let mut pick = rng.gen::<f64>() * total;
                let mut chosen = components.last().expect("validated non-empty");
                for c in components {
                    if pick < c.weight {
                        chosen = c;
                        break;
                    }
                    pick -= c.weight;
                }
                clip(normal(chosen.mean, chosen.std, rng))
            }
            LatencySpec::Empirical { samples, .. } => clip(samples[rng.gen_range(0..samples.len())]),
        }
    }
}

fn normal<R: Rng + ?Sized>(mean: f64, std: f64, rng: &mut R) -> f64 {
    if std == 0.0 {
        return mean;
    }
    Normal::new(mean, std).expect("validated std").sample(rng)
}

pub fn parse_samples(text: &str) -> Result<Vec<f64>, String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| format!("bad sample {t:?}: {e}")))
        .collect()
}

/// Per-stage latency model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub t_s: LatencySpec,
    pub t_eval: LatencySpec,
    pub t_p_dec: LatencySpec,
    pub t_p_ai: LatencySpec,
    pub t_p_tc: LatencySpec,
    pub t_exe: LatencySpec,
    pub t_c: LatencySpec,
    pub t_act: LatencySpec,
}

pub const STAGES: [&str; 8] = ["t_s", "t_eval", "t_p_dec", "t_p_ai", "t_p_tc", "t_exe", "t_c", "t_act"];

impl LatencyModel {
    /// Fixed reference values: 22 + 25.20 + 76.39 + 25.20 + 1.2 + 0 ms.
    pub fn reference() -> Self {
        let c = LatencySpec::constant;
        Self {
            t_s: c(budget::T_CMOS_MS + budget::T_ENC_MS),
            t_eval: c(budget::T_NET_REFERENCE_MS),
            t_p_dec: c(budget::T_DEC_MS),
            t_p_ai: c(budget::T_AI_MEDIAN_MS),
            t_p_tc: c(budget::T_TC_MEDIAN_MS),
            t_exe: c(budget::T_NET_REFERENCE_MS),
            t_c: c(budget::T_C_MS),
            t_act: c(budget::T_ACT_MS),
        }
    }

    /// Reference values with measured inference and classification profiles.
    pub fn measured() -> Self {
        Self {
            t_p_ai: LatencySpec::inference_profile(),
            t_p_tc: LatencySpec::classification_profile(),
            ..Self::reference()
        }
    }

    pub fn stages(&self) -> [(&'static str, &LatencySpec); 8] {
        [
            ("t_s", &self.t_s),
            ("t_eval", &self.t_eval),
            ("t_p_dec", &self.t_p_dec),
            ("t_p_ai", &self.t_p_ai),
            ("t_p_tc", &self.t_p_tc),
            ("t_exe", &self.t_exe),
            ("t_c", &self.t_c),
            ("t_act", &self.t_act),
        ]
    }

    fn stages_mut(&mut self) -> [&mut LatencySpec; 8] {
        [
            &mut self.t_s,
            &mut self.t_eval,
            &mut self.t_p_dec,
            &mut self.t_p_ai,
            &mut self.t_p_tc,
            &mut self.t_exe,
            &mut self.t_c,
            &mut self.t_act,
        ]
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.stages().iter().try_for_each(|(name, s)| s.validate(name))
    }

    pub fn resolve(&mut self, base: &Path) -> Result<(), SimError> {
        self.stages_mut().into_iter().try_for_each(|s| s.resolve(base))
    }
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self::reference()
    }
}
