use std::fs;
use std::path::Path;

use super::adaboost::{BoostEnsemble, Stump};
use super::lda::LinearDiscriminant;
use super::model::FusionModel;
use super::scores::FeatureLabel;
use super::FusionError;

pub const FUSION_MAGIC: &[u8; 4] = b"AFFU";
pub const FUSION_VERSION: u32 = 1;

/// Little-endian binary form: header, ensembles, then the discriminant.
pub fn fusion_to_bytes(model: &FusionModel<f64>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(FUSION_MAGIC);
    out.extend_from_slice(&FUSION_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.labels.len() as u32).to_le_bytes());
    for label in &model.labels {
        out.push(label.index() as u8);
    }
    out.extend_from_slice(&(model.ensembles.len() as u32).to_le_bytes());
    for e in &model.ensembles {
        out.extend_from_slice(&(e.dims as u32).to_le_bytes());
        out.extend_from_slice(&(e.stumps.len() as u32).to_le_bytes());
        for ((s, a), err) in e.stumps.iter().zip(&e.alphas).zip(&e.errors) {
            out.extend_from_slice(&(s.component as u32).to_le_bytes());
            out.extend_from_slice(&s.threshold.to_le_bytes());
            out.push(s.polarity as u8);
            out.extend_from_slice(&a.to_le_bytes());
            out.extend_from_slice(&err.to_le_bytes());
        }
    }
    let d = &model.discriminant;
    out.extend_from_slice(&(d.weights.len() as u32).to_le_bytes());
    for w in &d.weights {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out.extend_from_slice(&d.bias.to_le_bytes());
    out.extend_from_slice(&d.shrinkage.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FusionError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| FusionError::Corrupt("truncated fusion file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, FusionError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, FusionError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn f64(&mut self) -> Result<f64, FusionError> {
        let v = f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        if v.is_finite() {
            Ok(v)
        } else {
            Err(FusionError::Corrupt("non-finite value".into()))
        }
    }
}

pub fn fusion_from_bytes(bytes: &[u8]) -> Result<FusionModel<f64>, FusionError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != FUSION_MAGIC {
        return Err(FusionError::Corrupt("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FUSION_VERSION {
        return Err(FusionError::Version(version));
    }
    let n = r.u32()? as usize;
    if n == 0 || n > 4 {
        return Err(FusionError::Corrupt(format!("unsupported local label count {n}")));
    }
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let i = r.u8()? as usize;
        let label = *FeatureLabel::ALL
            .get(i)
            .filter(|l| **l != FeatureLabel::Face)
            .ok_or_else(|| FusionError::Corrupt(format!("bad label id {i}")))?;
        labels.push(label);
    }
    let count = r.u32()? as usize;
    if count != (1 << n) - 1 {
        return Err(FusionError::Corrupt(format!("{count} ensembles for {n} labels")));
    }
    let mut ensembles = Vec::with_capacity(count);
    for _ in 0..count {
        let dims = r.u32()? as usize;
        let rounds = r.u32()? as usize;
        let mut e = BoostEnsemble { dims, stumps: Vec::new(), alphas: Vec::new(), errors: Vec::new() };
        for _ in 0..rounds {
            let component = r.u32()? as usize;
            let threshold = r.f64()?;
            let polarity = r.u8()? as i8;
            if component >= dims || (polarity != 1 && polarity != -1) {
                return Err(FusionError::Corrupt("invalid stump".into()));
            }
            e.stumps.push(Stump { component, threshold, polarity });
            e.alphas.push(r.f64()?);
            e.errors.push(r.f64()?);
        }
        ensembles.push(e);
    }
    let d = r.u32()? as usize;
    if d != count {
        return Err(FusionError::Corrupt("discriminant size mismatch".into()));
    }
    let weights = (0..d).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    let bias = r.f64()?;
    let shrinkage = r.f64()?;
    if r.pos != bytes.len() {
        return Err(FusionError::Corrupt("trailing bytes".into()));
    }
    Ok(FusionModel { labels, ensembles, discriminant: LinearDiscriminant { weights, bias, shrinkage } })
}

pub fn save_fusion(model: &FusionModel<f64>, path: &Path) -> Result<(), FusionError> {
    fs::write(path, fusion_to_bytes(model))?;
    Ok(())
}

pub fn load_fusion(path: &Path) -> Result<FusionModel<f64>, FusionError> {
    fusion_from_bytes(&fs::read(path)?)
}
