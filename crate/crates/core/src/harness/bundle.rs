use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::convnet::{load_network, save_network, NetworkState, NETWORK_FORMAT_VERSION};
use crate::fusion::{load_fusion, save_fusion, FusionModel, ScoreSet, FUSION_VERSION};
use crate::imagecore::Gender;

use super::config::PipelineConfig;
use super::pipeline::{score_inputs, NetRole, SampleInputs, SPLIT_SEED_OFFSET};
use super::HarnessError;

pub const BUNDLE_FORMAT: &str = "afif4-model-bundle";
pub const BUNDLE_VERSION: u32 = 1;
pub const BUNDLE_MANIFEST: &str = "manifest.json";
pub const FUSION_FILE: &str = "fusion.affu";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleSeeds {
    pub master: u64,
    pub split: u64,
    pub face: u64,
    pub eye: u64,
    pub nose: u64,
    pub mouth: u64,
}

impl BundleSeeds {
    pub fn from_master(master: u64) -> Self {
        let role = |r: NetRole| master.wrapping_add(r.seed_offset());
        Self {
            master,
            split: master.wrapping_add(SPLIT_SEED_OFFSET),
            face: role(NetRole::Face),
            eye: role(NetRole::Eye),
            nose: role(NetRole::Nose),
            mouth: role(NetRole::Mouth),
        }
    }

    pub fn for_role(&self, role: NetRole) -> u64 {
        match role {
            NetRole::Face => self.face,
            NetRole::Eye => self.eye,
            NetRole::Nose => self.nose,
            NetRole::Mouth => self.mouth,
        }
    }
}

/// Everything needed to classify a face.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub config: PipelineConfig,
    pub seeds: BundleSeeds,
    pub face: NetworkState<f64>,
    pub eye: NetworkState<f64>,
    pub nose: NetworkState<f64>,
    pub mouth: NetworkState<f64>,
    pub fusion: FusionModel<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BundleManifest {
    format: String,
    bundle_version: u32,
    library_version: String,
    network_format_version: u32,
    fusion_format_version: u32,
    preset: String,
    seeds: BundleSeeds,
    files: BTreeMap<String, String>,
    config: BTreeMap<String, String>,
}

impl ModelBundle {
    pub fn network(&self, role: NetRole) -> &NetworkState<f64> {
        match role {
            NetRole::Face => &self.face,
            NetRole::Eye => &self.eye,
            NetRole::Nose => &self.nose,
            NetRole::Mouth => &self.mouth,
        }
    }

    pub fn scores(&self, inputs: &SampleInputs) -> Result<ScoreSet<f64>, HarnessError> {
        let nets = [self.face.clone(), self.eye.clone(), self.nose.clone(), self.mouth.clone()];
        score_inputs(&nets, inputs)
    }

    pub fn predict(&self, inputs: &SampleInputs) -> Result<Gender, HarnessError> {
        Ok(self.fusion.predict(&self.scores(inputs)?)?)
    }

    /// Same bundle with the final decision negated.
    pub fn inverted(&self) -> Self {
        Self { fusion: self.fusion.inverted(), ..self.clone() }
    }

    fn manifest(&self) -> BundleManifest {
        let mut files: BTreeMap<String, String> =
            NetRole::ALL.iter().map(|r| (r.name().to_string(), r.file_name())).collect();
        files.insert("fusion".into(), FUSION_FILE.into());
        BundleManifest {
            format: BUNDLE_FORMAT.into(),
            bundle_version: BUNDLE_VERSION,
            library_version: env!("CARGO_PKG_VERSION").into(),
            network_format_version: NETWORK_FORMAT_VERSION,
            fusion_format_version: FUSION_VERSION,
            preset: self.config.preset.clone(),
            seeds: self.seeds,
            files,
            config: self.config.to_map(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir)?;
        for role in NetRole::ALL {
            save_network(self.network(role), dir.join(role.file_name()))?;
        }
        save_fusion(&self.fusion, &dir.join(FUSION_FILE))?;
        let mut text = serde_json::to_string_pretty(&self.manifest())?;
        text.push('\n');
        fs::write(dir.join(BUNDLE_MANIFEST), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let m: BundleManifest = serde_json::from_str(&fs::read_to_string(dir.join(BUNDLE_MANIFEST))?)?;
        if m.format != BUNDLE_FORMAT || m.bundle_version != BUNDLE_VERSION {
            return Err(HarnessError::Bundle(format!("unsupported bundle {} v{}", m.format, m.bundle_version)));
        }
        let mut config = PipelineConfig::preset(&m.preset)?;
        for (k, v) in &m.config {
            config.set(k, v)?;
        }
        let file = |key: &str| -> Result<std::path::PathBuf, HarnessError> {
            let name = m.files.get(key).ok_or_else(|| HarnessError::Bundle(format!("no {key} file listed")))?;
            Ok(dir.join(name))
        };
        let net = |role: NetRole| -> Result<NetworkState<f64>, HarnessError> {
            let n: NetworkState<f64> = load_network(file(role.name())?)?;
            if n.spec() != &config.network {
                return Err(HarnessError::Bundle(format!("{} network does not match the recorded topology", role.name())));
            }
            Ok(n)
        };
        Ok(Self {
            seeds: m.seeds,
            face: net(NetRole::Face)?,
            eye: net(NetRole::Eye)?,
            nose: net(NetRole::Nose)?,
            mouth: net(NetRole::Mouth)?,
            fusion: load_fusion(&file("fusion")?)?,
            config,
        })
    }
}
