//! Feature sidecar and parity test-vector sections.

use std::path::Path;

use crate::ddsp::FRAME_SIZE;
use crate::encoder::FeatureFrame;
use crate::error::{Error, Result};

use super::container::{
    read_container, write_container, ByteReader, ByteWriter, Section, TAG_FEATURES, TAG_VECTORS,
};

/// One parity case: the engine run from a fresh state on `input` with
/// `features` must reproduce `expected` within `tolerance` RMS.
#[derive(Debug, Clone, PartialEq)]
pub struct TestVector {
    /// Pre-emphasized input, `FRAME_SIZE` samples per feature frame.
    pub input: Vec<f32>,
    pub features: Vec<FeatureFrame>,
    pub expected: Vec<f32>,
    pub tolerance: f32,
}

impl TestVector {
    pub fn check_lengths(&self) -> Result<()> {
        let n = self.features.len() * FRAME_SIZE;
        if self.input.len() != n || self.expected.len() != n {
            return Err(Error::format(format!(
                "test vector with {} frames needs {} samples, has {} input and {} expected",
                self.features.len(),
                n,
                self.input.len(),
                self.expected.len()
            )));
        }
        Ok(())
    }
}

fn write_frames(w: &mut ByteWriter, frames: &[FeatureFrame]) -> Result<()> {
    let n_f = frames.first().map_or(0, |f| f.features.len());
    if frames.iter().any(|f| f.features.len() != n_f) {
        return Err(Error::contract("feature frames differ in dimension"));
    }
    w.u32(frames.len() as u32);
    w.u32(n_f as u32);
    for f in frames {
        w.u32(f.pitch_lag);
        w.f32s(&f.features);
    }
    Ok(())
}

fn read_frames(r: &mut ByteReader<'_>) -> Result<Vec<FeatureFrame>> {
    let count = r.u32()? as usize;
    let n_f = r.u32()? as usize;
    (0..count)
        .map(|_| {
            let pitch_lag = r.u32()?;
            let features = r.f32s(n_f)?;
            Ok(FeatureFrame {
                features,
                pitch_lag,
            })
        })
        .collect()
}

pub fn features_to_bytes(frames: &[FeatureFrame]) -> Result<Vec<u8>> {
    let mut w = ByteWriter::default();
    write_frames(&mut w, frames)?;
    Ok(write_container(&[Section {
        tag: TAG_FEATURES,
        payload: w.into_inner(),
    }]))
}

pub fn features_from_bytes(bytes: &[u8]) -> Result<Vec<FeatureFrame>> {
    let mut found = None;
    for s in read_container(bytes)? {
        if s.tag == TAG_FEATURES {
            let mut r = ByteReader::new(&s.payload);
            found = Some(read_frames(&mut r)?);
            r.finish("FEAT")?;
        } else {
            log::warn!("ignoring section `{}` in feature file", s.tag_str());
        }
    }
    found.ok_or_else(|| Error::format("missing FEAT section"))
}

pub fn save_features(frames: &[FeatureFrame], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, features_to_bytes(frames)?)?;
    Ok(())
}

pub fn load_features(path: impl AsRef<Path>) -> Result<Vec<FeatureFrame>> {
    features_from_bytes(&std::fs::read(path)?)
}

pub fn vectors_to_bytes(vectors: &[TestVector]) -> Result<Vec<u8>> {
    let mut w = ByteWriter::default();
    w.u32(vectors.len() as u32);
    for v in vectors {
        v.check_lengths()?;
        w.f32(v.tolerance);
        write_frames(&mut w, &v.features)?;
        w.f32s(&v.input);
        w.f32s(&v.expected);
    }
    Ok(write_container(&[Section {
        tag: TAG_VECTORS,
        payload: w.into_inner(),
    }]))
}

pub fn vectors_from_bytes(bytes: &[u8]) -> Result<Vec<TestVector>> {
    let mut found = None;
    for s in read_container(bytes)? {
        if s.tag != TAG_VECTORS {
            log::warn!("ignoring section `{}` in vector file", s.tag_str());
            continue;
        }
        let mut r = ByteReader::new(&s.payload);
        let count = r.u32()?;
        let mut vectors = Vec::new();
        for _ in 0..count {
            let tolerance = r.f32()?;
            let features = read_frames(&mut r)?;
            let n = features.len() * FRAME_SIZE;
            let input = r.f32s(n)?;
            let expected = r.f32s(n)?;
            vectors.push(TestVector {
                input,
                features,
                expected,
                tolerance,
            });
        }
        r.finish("TVEC")?;
        found = Some(vectors);
    }
    found.ok_or_else(|| Error::format("missing TVEC section"))
}

pub fn save_vectors(vectors: &[TestVector], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, vectors_to_bytes(vectors)?)?;
    Ok(())
}

pub fn load_vectors(path: impl AsRef<Path>) -> Result<Vec<TestVector>> {
    vectors_from_bytes(&std::fs::read(path)?)
}
