//! Model weight container: header, named tensors, initializers and validation.

mod container;
mod vectors;

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{FilterParams, ModelConfig, Variant, BLOCK_SUBFRAMES};
use crate::ddsp::ENVELOPE_BLOCK;
use crate::error::{Error, Result};

pub use container::{
    read_container, write_container, ByteReader, ByteWriter, Section, MAGIC, TAG_FEATURES,
    TAG_HEADER, TAG_TENSORS, TAG_VECTORS, VERSION,
};
pub use vectors::{
    features_from_bytes, features_to_bytes, load_features, load_vectors, save_features,
    save_vectors, vectors_from_bytes, vectors_to_bytes, TestVector,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }
}

/// Name, shape and fan-in of one tensor a configuration requires.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub fan_in: usize,
}

fn push(out: &mut Vec<TensorSpec>, name: String, shape: &[usize], fan_in: usize) {
    out.push(TensorSpec {
        name,
        shape: shape.to_vec(),
        fan_in,
    });
}

/// Every tensor the configuration needs, in a fixed order.
///
/// Convolutions are `[out, in, k]` with index 0 of `k` the oldest input; the
/// transposed convolution is `[in, out, k]`; GRU matrices stack the `r, z, n`
/// gates along rows.
pub fn tensor_layout(config: &ModelConfig) -> Vec<TensorSpec> {
    let (n_f, n_r, n_h) = (config.n_f, config.n_r, config.n_h);
    let mut out = Vec::new();
    push(&mut out, "conv1.w".into(), &[n_r, n_f, 1], n_f);
    push(&mut out, "conv1.b".into(), &[n_r], n_f);
    push(
        &mut out,
        "cpool.w".into(),
        &[n_h, n_r, BLOCK_SUBFRAMES],
        n_r * BLOCK_SUBFRAMES,
    );
    push(&mut out, "cpool.b".into(), &[n_h], n_r * BLOCK_SUBFRAMES);
    push(&mut out, "conv2.w".into(), &[n_h, n_h, 2], 2 * n_h);
    push(&mut out, "conv2.b".into(), &[n_h], 2 * n_h);
    push(
        &mut out,
        "tconv.w".into(),
        &[n_h, n_h, BLOCK_SUBFRAMES],
        n_h,
    );
    push(&mut out, "tconv.b".into(), &[n_h], n_h);
    push(&mut out, "gru.w_ih".into(), &[3 * n_h, n_h], n_h);
    push(&mut out, "gru.w_hh".into(), &[3 * n_h, n_h], n_h);
    push(&mut out, "gru.b_ih".into(), &[3 * n_h], n_h);
    push(&mut out, "gru.b_hh".into(), &[3 * n_h], n_h);
    for k in 1..config.variant.num_latents() {
        push(&mut out, format!("ftrans{k}.w"), &[n_h, n_h, 2], 2 * n_h);
        push(&mut out, format!("ftrans{k}.b"), &[n_h], 2 * n_h);
    }
    for name in config.variant.comb_stages() {
        let taps = config.filters.get(*name).map_or(0, |f| f.taps);
        push(&mut out, format!("{name}.w_shape"), &[taps, n_h], n_h);
        push(&mut out, format!("{name}.b_shape"), &[taps], n_h);
        push(&mut out, format!("{name}.w_gain"), &[1, n_h], n_h);
        push(&mut out, format!("{name}.b_gain"), &[1], n_h);
        push(&mut out, format!("{name}.w_feed"), &[1, n_h], n_h);
        push(&mut out, format!("{name}.b_feed"), &[1], n_h);
    }
    for (name, in_ch, out_ch) in config.variant.conv_stages() {
        let taps = config.filters.get(*name).map_or(0, |f| f.taps);
        let rows = in_ch * out_ch * taps;
        push(&mut out, format!("{name}.w_shape"), &[rows, n_h], n_h);
        push(&mut out, format!("{name}.b_shape"), &[rows], n_h);
        push(&mut out, format!("{name}.w_gain"), &[*out_ch, n_h], n_h);
        push(&mut out, format!("{name}.b_gain"), &[*out_ch], n_h);
    }
    let n = config.frame_size;
    let hidden = n / ENVELOPE_BLOCK;
    let input = hidden + 1 + n_h;
    for name in config.variant.shape_stages() {
        push(
            &mut out,
            format!("{name}.conv1.w"),
            &[hidden, input, 2],
            2 * input,
        );
        push(&mut out, format!("{name}.conv1.b"), &[hidden], 2 * input);
        push(
            &mut out,
            format!("{name}.conv2.w"),
            &[n, hidden, 2],
            2 * hidden,
        );
        push(&mut out, format!("{name}.conv2.b"), &[n], 2 * hidden);
    }
    out
}

/// A complete parameter set: the header is the [`ModelConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub config: ModelConfig,
    pub tensors: BTreeMap<String, Tensor>,
}

impl ModelWeights {
    pub fn zeros(config: &ModelConfig) -> Self {
        let tensors = tensor_layout(config)
            .into_iter()
            .map(|t| (t.name, Tensor::zeros(&t.shape)))
            .collect();
        ModelWeights {
            config: config.clone(),
            tensors,
        }
    }

    /// Uniform `+-1/sqrt(fan_in)` initialization, reproducible from `seed`.
    pub fn random(config: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = tensor_layout(config)
            .into_iter()
            .map(|t| {
                let bound = 1.0 / (t.fan_in.max(1) as f32).sqrt();
                let len = t.shape.iter().product();
                let data = (0..len).map(|_| rng.gen_range(-bound..=bound)).collect();
                (
                    t.name,
                    Tensor {
                        shape: t.shape,
                        data,
                    },
                )
            })
            .collect();
        ModelWeights {
            config: config.clone(),
            tensors,
        }
    }

    /// Weights under which the whole signal path is the identity map:
    /// comb branches vanish, feed-through and convolution gains are one,
    /// convolutions route channel `o` to channel `o` and shaping gains are one.
    pub fn identity(config: &ModelConfig) -> Self {
        let mut w = ModelWeights::zeros(config);
        let n_h = config.n_h;
        for k in 1..config.variant.num_latents() {
            let t = w.tensor_mut(&format!("ftrans{k}.w"));
            for o in 0..n_h {
                t.data[(o * n_h + o) * 2 + 1] = 1.0;
            }
        }
        for (name, in_ch, out_ch) in config.variant.conv_stages() {
            let taps = config.filter(name).taps;
            let t = w.tensor_mut(&format!("{name}.b_shape"));
            for o in 0..*out_ch {
                let i = o.min(in_ch - 1);
                t.data[(o * in_ch + i) * taps] = 1.0;
            }
        }
        w
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Validation(vec![format!("missing tensor {name}")]))
    }

    /// Panics if the tensor does not exist.
    pub fn tensor_mut(&mut self, name: &str) -> &mut Tensor {
        self.tensors
            .get_mut(name)
            .unwrap_or_else(|| panic!("no tensor named {name}"))
    }

    pub fn param_count(&self) -> usize {
        self.tensors.values().map(|t| t.data.len()).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut h = ByteWriter::default();
        h.u8(c.variant.code());
        h.bytes(&[0, 0, 0]);
        h.u32(c.n_f as u32);
        h.u32(c.n_r as u32);
        h.u32(c.n_h as u32);
        h.u32(c.frame_size as u32);
        h.u32(c.filters.len() as u32);
        for (name, p) in &c.filters {
            h.name(name);
            h.u32(p.taps as u32);
            h.f32(p.gain_limit);
        }

        let mut t = ByteWriter::default();
        t.u32(self.tensors.len() as u32);
        for (name, tensor) in &self.tensors {
            t.name(name);
            t.u8(tensor.shape.len() as u8);
            for d in &tensor.shape {
                t.u32(*d as u32);
            }
            t.f32s(&tensor.data);
        }
        write_container(&[
            Section {
                tag: TAG_HEADER,
                payload: h.into_inner(),
            },
            Section {
                tag: TAG_TENSORS,
                payload: t.into_inner(),
            },
        ])
    }

    /// Parses a model container. Sections other than the header and tensor
    /// table are skipped with a warning. Does not validate against the
    /// header; see [`validate`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut config = None;
        let mut tensors = None;
        for section in read_container(bytes)? {
            match section.tag {
                TAG_HEADER => config = Some(parse_header(&section.payload)?),
                TAG_TENSORS => tensors = Some(parse_tensors(&section.payload)?),
                _ => log::warn!("ignoring unknown section `{}`", section.tag_str()),
            }
        }
        Ok(ModelWeights {
            config: config.ok_or_else(|| Error::format("missing HEAD section"))?,
            tensors: tensors.ok_or_else(|| Error::format("missing TENS section"))?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        ModelWeights::from_bytes(&std::fs::read(path)?)
    }
}

fn parse_header(payload: &[u8]) -> Result<ModelConfig> {
    let mut r = ByteReader::new(payload);
    let code = r.u8()?;
    let variant = Variant::from_code(code)
        .ok_or_else(|| Error::format(format!("unknown model variant code {code}")))?;
    r.take(3)?;
    let n_f = r.u32()? as usize;
    let n_r = r.u32()? as usize;
    let n_h = r.u32()? as usize;
    let frame_size = r.u32()? as usize;
    let count = r.u32()?;
    let mut filters = BTreeMap::new();
    for _ in 0..count {
        let name = r.name()?;
        let taps = r.u32()? as usize;
        let gain_limit = r.f32()?;
        if filters
            .insert(name.clone(), FilterParams { taps, gain_limit })
            .is_some()
        {
            return Err(Error::format(format!("duplicate filter entry {name}")));
        }
    }
    r.finish("HEAD")?;
    Ok(ModelConfig {
        variant,
        n_f,
        n_r,
        n_h,
        frame_size,
        filters,
    })
}

fn parse_tensors(payload: &[u8]) -> Result<BTreeMap<String, Tensor>> {
    let mut r = ByteReader::new(payload);
    let count = r.u32()?;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let name = r.name()?;
        let ndim = r.u8()? as usize;
        let shape = (0..ndim)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let len = shape
            .iter()
            .try_fold(1usize, |acc, d| acc.checked_mul(*d))
            .ok_or_else(|| Error::format(format!("tensor {name} is too large")))?;
        let data = r.f32s(len)?;
        if tensors
            .insert(name.clone(), Tensor { shape, data })
            .is_some()
        {
            return Err(Error::format(format!("tensor {name} appears twice")));
        }
    }
    r.finish("TENS")?;
    Ok(tensors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// The configuration itself is unusable.
    Config,
    /// Header and configuration, or header and tensor shapes, disagree.
    Consistency,
    Missing,
    Shape,
    NonFinite,
    Unexpected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationFailure {
    pub kind: FailureKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tensor: Option<String>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub variant: Variant,
    pub tensors_checked: usize,
    pub failures: Vec<ValidationFailure>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        self.failures
            .iter()
            .map(|f| match &f.tensor {
                Some(t) => format!("{t}: {}", f.detail),
                None => f.detail.clone(),
            })
            .collect()
    }
}

/// Checks `weights` against `config`: header agreement, dimensions implied by
/// the tensors, completeness, shapes and finiteness.
pub fn validate(weights: &ModelWeights, config: &ModelConfig) -> ValidationReport {
    let mut failures = Vec::new();
    let mut fail = |kind, tensor: Option<&str>, detail: String| {
        failures.push(ValidationFailure {
            kind,
            tensor: tensor.map(str::to_owned),
            detail,
        })
    };

    if let Err(e) = config.validate() {
        fail(FailureKind::Config, None, e.to_string());
    }
    let header = &weights.config;
    if header.variant != config.variant {
        fail(
            FailureKind::Consistency,
            None,
            format!(
                "header variant {} but expected {}",
                header.variant, config.variant
            ),
        );
    }
    for (field, h, c) in [
        ("n_f", header.n_f, config.n_f),
        ("n_r", header.n_r, config.n_r),
        ("n_h", header.n_h, config.n_h),
        ("frame_size", header.frame_size, config.frame_size),
    ] {
        if h != c {
            fail(
                FailureKind::Consistency,
                None,
                format!("header {field} = {h} but expected {c}"),
            );
        }
    }
    if header.filters != config.filters {
        fail(
            FailureKind::Consistency,
            None,
            "header filter table differs from the configuration".into(),
        );
    }

    // Dimensions implied by the tensors themselves.
    let dim_of = |name: &str, axis: usize| {
        weights
            .tensors
            .get(name)
            .and_then(|t| t.shape.get(axis).copied())
    };
    for (field, name, axis, expect) in [
        ("n_h", "gru.w_hh", 1, header.n_h),
        ("n_r", "conv1.w", 0, header.n_r),
        ("n_f", "conv1.w", 1, header.n_f),
    ] {
        if let Some(found) = dim_of(name, axis) {
            if found != expect {
                fail(
                    FailureKind::Consistency,
                    Some(name),
                    format!("tensors imply {field} = {found} but header says {expect}"),
                );
            }
        }
    }

    let layout = tensor_layout(config);
    for spec in &layout {
        match weights.tensors.get(&spec.name) {
            None => fail(
                FailureKind::Missing,
                Some(&spec.name),
                "required tensor absent".into(),
            ),
            Some(t) => {
                if t.shape != spec.shape {
                    fail(
                        FailureKind::Shape,
                        Some(&spec.name),
                        format!("shape {:?}, expected {:?}", t.shape, spec.shape),
                    );
                } else if t.data.len() != spec.shape.iter().product::<usize>() {
                    fail(
                        FailureKind::Shape,
                        Some(&spec.name),
                        format!("{} values for shape {:?}", t.data.len(), t.shape),
                    );
                }
                if let Some(pos) = t.data.iter().position(|v| !v.is_finite()) {
                    fail(
                        FailureKind::NonFinite,
                        Some(&spec.name),
                        format!("non-finite value {} at index {pos}", t.data[pos]),
                    );
                }
            }
        }
    }
    for name in weights.tensors.keys() {
        if !layout.iter().any(|s| &s.name == name) {
            fail(
                FailureKind::Unexpected,
                Some(name),
                format!("not part of a {} model", config.variant),
            );
        }
    }
    ValidationReport {
        variant: config.variant,
        tensors_checked: layout.len(),
        failures,
    }
}
