use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::convnet::{NetworkSpec, TrainConfig};
use crate::datagen::{AugmentConfig, OCCLUSION_FILL, OCCLUSION_MARGIN};
use crate::facepatch::PatchConfig;
use crate::foggy::{MembraneSolveConfig, SolveMethod};
use crate::fusion::{FusionConfig, DEFAULT_ROUNDS, DEFAULT_SHRINKAGE};
use crate::illum::SsrConfig;

use super::HarnessError;

pub const PRESETS: [&str; 2] = ["afif4-paper", "afif4-tiny"];

/// Every tunable of the pipeline. Serialized as `key = value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub preset: String,
    pub network: NetworkSpec,
    pub seed: u64,
    pub folds: usize,
    pub learning_rate: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub init_scale: f64,
    pub patch_margin: f64,
    pub patch_min_box: f64,
    pub augment_shift: usize,
    pub boost_rounds: usize,
    pub lda_shrinkage: f64,
    pub membrane_method: SolveMethod,
    pub membrane_tolerance: f64,
    pub membrane_max_iterations: usize,
    /// `None` selects a quarter of the larger image side.
    pub ssr_scale: Option<f64>,
    pub ssr_eps: f64,
    /// Empty selects the image mean.
    pub mask_fill: Vec<f64>,
    pub max_faces: usize,
    /// External landmark detector command, used for samples without landmarks.
    pub detector: Vec<String>,
    pub occlusion_fill: f64,
    pub occlusion_margin: f64,
}

impl PipelineConfig {
    pub fn preset(name: &str) -> Result<Self, HarnessError> {
        let network = match name {
            "afif4-paper" => NetworkSpec::afif4_paper(),
            "afif4-tiny" => NetworkSpec::afif4_tiny(),
            other => return Err(HarnessError::Config(format!("unknown preset {other:?}"))),
        };
        let train = TrainConfig::<f64>::default();
        let patch = PatchConfig::<f64>::default();
        let membrane = MembraneSolveConfig::<f64>::default();
        Ok(Self {
            preset: name.to_string(),
            network,
            seed: 0,
            folds: 5,
            learning_rate: train.learning_rate,
            iterations: train.iterations,
            batch_size: train.batch_size,
            momentum: train.momentum,
            init_scale: train.init_scale,
            patch_margin: patch.margin,
            patch_min_box: patch.min_box,
            augment_shift: AugmentConfig::default().shift,
            boost_rounds: DEFAULT_ROUNDS,
            lda_shrinkage: DEFAULT_SHRINKAGE,
            membrane_method: membrane.method,
            membrane_tolerance: membrane.tolerance,
            membrane_max_iterations: membrane.max_iterations,
            ssr_scale: None,
            ssr_eps: SsrConfig::<f64>::default().eps,
            mask_fill: Vec::new(),
            max_faces: 1,
            detector: Vec::new(),
            occlusion_fill: OCCLUSION_FILL,
            occlusion_margin: OCCLUSION_MARGIN,
        })
    }

    pub fn tiny() -> Self {
        Self::preset("afif4-tiny").expect("built-in preset")
    }

    pub fn paper() -> Self {
        Self::preset("afif4-paper").expect("built-in preset")
    }

    pub fn input_size(&self) -> usize {
        self.network.input_size
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig<f64> {
        TrainConfig {
            learning_rate: self.learning_rate,
            iterations: self.iterations,
            batch_size: self.batch_size,
            seed,
            init_scale: self.init_scale,
            momentum: self.momentum,
        }
    }

    pub fn patch_config(&self) -> PatchConfig<f64> {
        PatchConfig { margin: self.patch_margin, min_box: self.patch_min_box, size: self.input_size() }
    }

    pub fn membrane_config(&self) -> MembraneSolveConfig<f64> {
        MembraneSolveConfig {
            method: self.membrane_method,
            tolerance: self.membrane_tolerance,
            max_iterations: self.membrane_max_iterations,
        }
    }

    pub fn ssr_config(&self) -> SsrConfig<f64> {
        SsrConfig { scale: self.ssr_scale, eps: self.ssr_eps }
    }

    pub fn augment_config(&self) -> AugmentConfig {
        AugmentConfig { shift: self.augment_shift }
    }

    pub fn fusion_config(&self) -> FusionConfig<f64> {
        FusionConfig { rounds: self.boost_rounds, shrinkage: self.lda_shrinkage }
    }

    /// All keys with their current values, in a stable order.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let entries: [(&str, String); 24] = [
            ("preset", self.preset.clone()),
            ("network", self.network.to_string()),
            ("seed", self.seed.to_string()),
            ("folds", self.folds.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("iterations", self.iterations.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("momentum", self.momentum.to_string()),
            ("init_scale", self.init_scale.to_string()),
            ("patch_margin", self.patch_margin.to_string()),
            ("patch_min_box", self.patch_min_box.to_string()),
            ("augment_shift", self.augment_shift.to_string()),
            ("boost_rounds", self.boost_rounds.to_string()),
            ("lda_shrinkage", self.lda_shrinkage.to_string()),
            ("membrane_method", self.membrane_method.token().to_string()),
            ("membrane_tolerance", self.membrane_tolerance.to_string()),
            ("membrane_max_iterations", self.membrane_max_iterations.to_string()),
            ("ssr_scale", self.ssr_scale.map_or_else(|| "auto".to_string(), |s| s.to_string())),
            ("ssr_eps", self.ssr_eps.to_string()),
            ("mask_fill", if self.mask_fill.is_empty() { "mean".to_string() } else { list(&self.mask_fill) }),
            ("max_faces", self.max_faces.to_string()),
            ("detector", self.detector.join(" ")),
            ("occlusion_fill", self.occlusion_fill.to_string()),
            ("occlusion_margin", self.occlusion_margin.to_string()),
        ];
        entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn to_text(&self) -> String {
        self.to_map().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Applies one setting. Setting `preset` resets the network to that preset.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        fn num<V: FromStr>(key: &str, value: &str) -> Result<V, HarnessError>
        where
            V::Err: Display,
        {
            value.parse().map_err(|e| HarnessError::Config(format!("{key}: {e}")))
        }
        match key {
            "preset" => {
                let base = Self::preset(value)?;
                self.preset = base.preset;
                self.network = base.network;
            }
            "network" => self.network = value.parse().map_err(|e| HarnessError::Config(format!("network: {e}")))?,
            "seed" => self.seed = num(key, value)?,
            "folds" => self.folds = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "iterations" => self.iterations = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "momentum" => self.momentum = num(key, value)?,
            "init_scale" => self.init_scale = num(key, value)?,
            "patch_margin" => self.patch_margin = num(key, value)?,
            "patch_min_box" => self.patch_min_box = num(key, value)?,
            "augment_shift" => self.augment_shift = num(key, value)?,
            "boost_rounds" => self.boost_rounds = num(key, value)?,
            "lda_shrinkage" => self.lda_shrinkage = num(key, value)?,
            "membrane_method" => {
                self.membrane_method = value.parse().map_err(|e| HarnessError::Config(format!("{key}: {e}")))?
            }
            "membrane_tolerance" => self.membrane_tolerance = num(key, value)?,
            "membrane_max_iterations" => self.membrane_max_iterations = num(key, value)?,
            "ssr_scale" => self.ssr_scale = if value == "auto" { None } else { Some(num(key, value)?) },
            "ssr_eps" => self.ssr_eps = num(key, value)?,
            "mask_fill" => {
                self.mask_fill = if value == "mean" {
                    Vec::new()
                } else {
                    value.split(',').map(|v| num(key, v.trim())).collect::<Result<_, _>>()?
                }
            }
            "max_faces" => self.max_faces = num(key, value)?,
            "detector" => self.detector = value.split_whitespace().map(str::to_string).collect(),
            "occlusion_fill" => self.occlusion_fill = num(key, value)?,
            "occlusion_margin" => self.occlusion_margin = num(key, value)?,
            other => return Err(HarnessError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`; `#` starts a comment.
    /// `preset` lines go first wherever they appear, so other keys refine the preset.
    pub fn apply_text(&mut self, text: &str) -> Result<(), HarnessError> {
        let mut entries = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected key = value", n + 1)))?;
            entries.push((n + 1, key.trim(), value.trim()));
        }
        entries.sort_by_key(|&(_, key, _)| key != "preset");
        for (n, key, value) in entries {
            self.set(key, value).map_err(|e| HarnessError::Config(format!("line {n}: {e}")))?;
        }
        Ok(())
    }

    /// Reads a config file on top of `default_preset`.
    pub fn from_text(text: &str, default_preset: &str) -> Result<Self, HarnessError> {
        let mut cfg = Self::preset(default_preset)?;
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path, default_preset: &str) -> Result<Self, HarnessError> {
        Self::from_text(&std::fs::read_to_string(path)?, default_preset)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.network.shapes().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.train_config(0).validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        let ok = self.folds >= 2
            && self.patch_margin >= 1.0
            && self.patch_min_box > 0.0
            && self.boost_rounds >= 1
            && (0.0..=1.0).contains(&self.lda_shrinkage)
            && self.membrane_tolerance > 0.0
            && self.membrane_max_iterations >= 1
            && self.ssr_eps > 0.0
            && self.ssr_scale.is_none_or(|s| s > 0.0)
            && self.max_faces >= 1
            && self.augment_shift >= 1
            && self.augment_shift < self.input_size();
        if ok {
            Ok(())
        } else {
            Err(HarnessError::Config("setting out of range".into()))
        }
    }
}
