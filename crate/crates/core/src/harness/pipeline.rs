use std::path::PathBuf;

use crate::convnet::{predict_score, train, NetworkState};
use crate::datagen::augment_10x;
use crate::facepatch::{detect_all_faces_with, extract_patch_set_with, ExternalDetector, FaceDetection};
use crate::foggy::foggy_face;
use crate::fusion::{train_fusion_split, FeatureLabel, FeatureScore, ScoreSet};
use crate::imagecore::{load_image, DatasetManifest, Gender, ImageBuffer};

use super::bundle::{BundleSeeds, ModelBundle};
use super::config::PipelineConfig;
use super::protocol::{make_folds, make_splits, FoldPlan};
use super::report::{FoldResult, RunReport};
use super::HarnessError;

/// The four trained networks; the eye network scores both eye patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NetRole {
    Face,
    Eye,
    Nose,
    Mouth,
}

impl NetRole {
    pub const ALL: [NetRole; 4] = [NetRole::Face, NetRole::Eye, NetRole::Nose, NetRole::Mouth];

    pub fn name(self) -> &'static str {
        match self {
            NetRole::Face => "face",
            NetRole::Eye => "eye",
            NetRole::Nose => "nose",
            NetRole::Mouth => "mouth",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.afnn", self.name())
    }

    /// Added to the master seed for this network's initialization and batch order.
    pub fn seed_offset(self) -> u64 {
        self as u64 + 1
    }
}

/// Added to the master seed for the training-set split.
pub const SPLIT_SEED_OFFSET: u64 = 100;

/// Network inputs of one face: the foggy face and the four local patches.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleInputs {
    pub face: ImageBuffer<f64>,
    pub eye_left: ImageBuffer<f64>,
    pub eye_right: ImageBuffer<f64>,
    pub nose: ImageBuffer<f64>,
    pub mouth: ImageBuffer<f64>,
}

impl SampleInputs {
    /// Inputs seen by `role`, paired with the score label they produce.
    pub fn for_role(&self, role: NetRole) -> Vec<(FeatureLabel, &ImageBuffer<f64>)> {
        match role {
            NetRole::Face => vec![(FeatureLabel::Face, &self.face)],
            NetRole::Eye => vec![(FeatureLabel::EyeLeft, &self.eye_left), (FeatureLabel::EyeRight, &self.eye_right)],
            NetRole::Nose => vec![(FeatureLabel::Nose, &self.nose)],
            NetRole::Mouth => vec![(FeatureLabel::Mouth, &self.mouth)],
        }
    }
}

fn stage_error(stage: &str, sample: Option<&str>, err: impl std::fmt::Display) -> HarnessError {
    HarnessError::Stage { stage: stage.to_string(), sample: sample.map(str::to_string), message: err.to_string() }
}

/// Builds the network inputs for one image and detection.
pub fn prepare_inputs(img: &ImageBuffer<f64>, det: &FaceDetection<f64>, cfg: &PipelineConfig) -> Result<SampleInputs, HarnessError> {
    let img = img.with_channels(cfg.network.input_channels).map_err(|e| stage_error("channels", None, e))?;
    let face = foggy_face(&img, det, &cfg.membrane_config(), cfg.input_size()).map_err(|e| stage_error("foggy", None, e))?;
    let p = extract_patch_set_with(&img, det, &cfg.patch_config()).map_err(|e| stage_error("patches", None, e))?;
    Ok(SampleInputs { face, eye_left: p.eye_left, eye_right: p.eye_right, nose: p.nose, mouth: p.mouth })
}

/// Landmarks from the record, or from the configured external detector.
fn locate_face(img: &ImageBuffer<f64>, manifest: &DatasetManifest<f64>, index: usize, cfg: &PipelineConfig) -> Result<FaceDetection<f64>, HarnessError> {
    let record = &manifest.records[index];
    if let Some(lm) = &record.landmarks {
        return Ok(FaceDetection::from_landmarks(lm.clone()));
    }
    let id = record.image_path.as_str();
    let Some((program, args)) = cfg.detector.split_first() else {
        return Err(stage_error("detect", Some(id), "no landmarks and no detector configured"));
    };
    let detector = ExternalDetector { program: PathBuf::from(program), args: args.to_vec() };
    detect_all_faces_with(img, &detector, &cfg.mask_fill, cfg.max_faces, &cfg.ssr_config())
        .into_iter()
        .next()
        .ok_or_else(|| stage_error("detect", Some(id), "detector found no face"))
}

pub fn load_sample_inputs(manifest: &DatasetManifest<f64>, index: usize, cfg: &PipelineConfig) -> Result<SampleInputs, HarnessError> {
    let record = &manifest.records[index];
    let id = record.image_path.as_str();
    let img: ImageBuffer<f64> = load_image(manifest.resolve(record)).map_err(|e| stage_error("load", Some(id), e))?;
    let det = locate_face(&img, manifest, index, cfg)?;
    prepare_inputs(&img, &det, cfg).map_err(|e| match e {
        HarnessError::Stage { stage, message, .. } => HarnessError::Stage { stage, sample: Some(id.to_string()), message },
        other => other,
    })
}

fn load_all(manifest: &DatasetManifest<f64>, indices: &[usize], cfg: &PipelineConfig) -> Result<Vec<(SampleInputs, Gender)>, HarnessError> {
    indices
        .iter()
        .map(|&i| Ok((load_sample_inputs(manifest, i, cfg)?, manifest.records[i].gender)))
        .collect()
}

/// Signed scores of all five labels for one face.
pub fn score_inputs(nets: &[NetworkState<f64>; 4], inputs: &SampleInputs) -> Result<ScoreSet<f64>, HarnessError> {
    let mut scores = Vec::with_capacity(5);
    for (role, net) in NetRole::ALL.iter().zip(nets) {
        for (label, img) in inputs.for_role(*role) {
            let (class, s) = predict_score(net, img).map_err(|e| stage_error("score", None, e))?;
            scores.push(FeatureScore::new(label, class, s)?);
        }
    }
    Ok(ScoreSet::from_scores(&scores)?)
}

/// Trains a complete bundle on the given samples of `manifest`.
pub fn train_bundle(manifest: &DatasetManifest<f64>, indices: &[usize], cfg: &PipelineConfig) -> Result<ModelBundle, HarnessError> {
    cfg.validate()?;
    let seeds = BundleSeeds::from_master(cfg.seed);
    let split = make_splits(indices, seeds.split)?;
    let cnn = load_all(manifest, &split.cnn, cfg)?;
    let augment = cfg.augment_config();
    let mut nets = Vec::with_capacity(4);
    for role in NetRole::ALL {
        let mut samples = Vec::new();
        for (inputs, label) in &cnn {
            for (_, img) in inputs.for_role(role) {
                let copies = augment_10x(img, &augment).map_err(|e| stage_error("augment", None, e))?;
                samples.extend(copies.into_iter().map(|c| (c, *label)));
            }
        }
        let seed = seeds.for_role(role);
        let stage = format!("train-{}", role.name());
        let init = NetworkState::random(cfg.network.clone(), cfg.init_scale, seed).map_err(|e| stage_error(&stage, None, e))?;
        let net = train(&init, &samples, &cfg.train_config(seed)).map_err(|e| stage_error(&stage, None, e))?;
        nets.push(net);
    }
    drop(cnn);
    let nets: [NetworkState<f64>; 4] = nets.try_into().expect("four roles");
    let score_portion = |ids: &[usize]| -> Result<(Vec<ScoreSet<f64>>, Vec<Gender>), HarnessError> {
        let mut sets = Vec::with_capacity(ids.len());
        let mut labels = Vec::with_capacity(ids.len());
        for (inputs, label) in load_all(manifest, ids, cfg)? {
            sets.push(score_inputs(&nets, &inputs)?);
            labels.push(label);
        }
        Ok((sets, labels))
    };
    let (boost_scores, boost_labels) = score_portion(&split.adaboost)?;
    let (lda_scores, lda_labels) = score_portion(&split.fusion)?;
    let fusion = train_fusion_split(&boost_scores, &boost_labels, &lda_scores, &lda_labels, &cfg.fusion_config())
        .map_err(|e| stage_error("fusion", None, e))?;
    let [face, eye, nose, mouth] = nets;
    Ok(ModelBundle { config: cfg.clone(), seeds, face, eye, nose, mouth, fusion })
}

/// Trains on every retained sample outside `fold`.
pub fn run_training(manifest: &DatasetManifest<f64>, plan: &FoldPlan, fold: usize, cfg: &PipelineConfig) -> Result<ModelBundle, HarnessError> {
    plan.check_fold(fold)?;
    check_plan(manifest, plan)?;
    train_bundle(manifest, &plan.train_indices(fold), cfg)
}

fn check_plan(manifest: &DatasetManifest<f64>, plan: &FoldPlan) -> Result<(), HarnessError> {
    if plan.assignments.len() != manifest.len() {
        return Err(HarnessError::Protocol(format!(
            "fold plan covers {} samples, manifest has {}",
            plan.assignments.len(),
            manifest.len()
        )));
    }
    Ok(())
}

/// Per-sample outcomes of an evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// `(sample index, predicted, label)`.
    pub predictions: Vec<(usize, Gender, Gender)>,
}

impl Evaluation {
    pub fn correct(&self) -> usize {
        self.predictions.iter().filter(|(_, p, l)| p == l).count()
    }

    /// Percentage of correct predictions.
    pub fn accuracy(&self) -> f64 {
        if self.predictions.is_empty() {
            0.0
        } else {
            100.0 * self.correct() as f64 / self.predictions.len() as f64
        }
    }
}

pub fn evaluate_indices(bundle: &ModelBundle, manifest: &DatasetManifest<f64>, indices: &[usize]) -> Result<Evaluation, HarnessError> {
    let mut predictions = Vec::with_capacity(indices.len());
    for &i in indices {
        let inputs = load_sample_inputs(manifest, i, &bundle.config)?;
        predictions.push((i, bundle.predict(&inputs)?, manifest.records[i].gender));
    }
    Ok(Evaluation { predictions })
}

/// Accuracy (%) on the test samples of `fold`.
pub fn run_evaluation(bundle: &ModelBundle, manifest: &DatasetManifest<f64>, plan: &FoldPlan, fold: usize) -> Result<f64, HarnessError> {
    plan.check_fold(fold)?;
    check_plan(manifest, plan)?;
    let test = plan.test_indices(fold);
    if test.is_empty() {
        return Err(HarnessError::Protocol(format!("fold {fold} has no test samples")));
    }
    Ok(evaluate_indices(bundle, manifest, &test)?.accuracy())
}

/// Trains on all of `train_set` and reports accuracy (%) on all of `test_set`.
pub fn run_cross_dataset(train_set: &DatasetManifest<f64>, test_set: &DatasetManifest<f64>, cfg: &PipelineConfig) -> Result<f64, HarnessError> {
    if test_set.is_empty() {
        return Err(HarnessError::Protocol("empty test set".into()));
    }
    let all: Vec<usize> = (0..train_set.len()).collect();
    let bundle = train_bundle(train_set, &all, cfg)?;
    let test: Vec<usize> = (0..test_set.len()).collect();
    Ok(evaluate_indices(&bundle, test_set, &test)?.accuracy())
}

/// Full k-fold run: one bundle per fold, evaluated on that fold.
pub fn run_crossval(manifest: &DatasetManifest<f64>, cfg: &PipelineConfig) -> Result<RunReport, HarnessError> {
    let plan = make_folds(manifest, cfg.folds, cfg.seed)?;
    let mut folds = Vec::with_capacity(plan.k);
    for fold in 0..plan.k {
        let bundle = run_training(manifest, &plan, fold, cfg)?;
        let accuracy = run_evaluation(&bundle, manifest, &plan, fold)?;
        folds.push(FoldResult {
            fold,
            train_samples: plan.train_indices(fold).len(),
            test_samples: plan.test_indices(fold).len(),
            accuracy,
        });
    }
    Ok(RunReport::new(&manifest.name, cfg, folds))
}
