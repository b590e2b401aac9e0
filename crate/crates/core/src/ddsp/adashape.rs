use crate::error::{ensure, Result};
use crate::nn::{Activation, Dense};

use super::{ENVELOPE_BLOCK, ENVELOPE_FLOOR};

/// Envelope of one frame on 4-sample blocks, in log domain with its
/// frame mean removed.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalEnvelope {
    pub blocks: Vec<f32>,
    pub log_env_centered: Vec<f32>,
    pub mu: f32,
}

pub fn temporal_envelope(frame: &[f32]) -> Result<TemporalEnvelope> {
    ensure!(
        !frame.is_empty() && frame.len().is_multiple_of(ENVELOPE_BLOCK),
        "frame length {} is not a positive multiple of {}",
        frame.len(),
        ENVELOPE_BLOCK
    );
    let blocks: Vec<f32> = frame
        .chunks_exact(ENVELOPE_BLOCK)
        .map(|b| b.iter().map(|v| v.abs()).sum::<f32>() / ENVELOPE_BLOCK as f32)
        .collect();
    let log_env: Vec<f32> = blocks.iter().map(|b| (b + ENVELOPE_FLOOR).ln()).collect();
    let mu = log_env.iter().sum::<f32>() / log_env.len() as f32;
    Ok(TemporalEnvelope {
        log_env_centered: log_env.iter().map(|v| v - mu).collect(),
        blocks,
        mu,
    })
}

/// Per-sample gains of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalGains {
    pub gains: Vec<f32>,
}

/// Raw parameters of the two-layer shaping network.
///
/// Both convolutions have width 2 along the frame axis and are stored
/// `[out, in, 2]`, index 0 acting on the previous frame. The first maps the
/// concatenation `(log_env_centered, mu, phi)` of `frame_size / 4 + 1 + dim`
/// channels to `frame_size / 4` hidden channels; the second maps those to
/// `frame_size` log-gains, one per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSpec {
    pub dim: usize,
    pub frame_size: usize,
    pub conv1_w: Vec<f32>,
    pub conv1_b: Vec<f32>,
    pub conv2_w: Vec<f32>,
    pub conv2_b: Vec<f32>,
}

impl ShapeSpec {
    pub fn zeros(dim: usize, frame_size: usize) -> Self {
        let hidden = frame_size / ENVELOPE_BLOCK;
        let input = hidden + 1 + dim;
        ShapeSpec {
            dim,
            frame_size,
            conv1_w: vec![0.0; hidden * input * 2],
            conv1_b: vec![0.0; hidden],
            conv2_w: vec![0.0; frame_size * hidden * 2],
            conv2_b: vec![0.0; frame_size],
        }
    }

    pub fn hidden(&self) -> usize {
        self.frame_size / ENVELOPE_BLOCK
    }

    pub fn input_len(&self) -> usize {
        self.hidden() + 1 + self.dim
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.frame_size > 0 && self.frame_size.is_multiple_of(ENVELOPE_BLOCK),
            "shaping frame size {} must be a positive multiple of {}",
            self.frame_size,
            ENVELOPE_BLOCK
        );
        let (h, i, n) = (self.hidden(), self.input_len(), self.frame_size);
        ensure!(
            self.conv1_w.len() == h * i * 2
                && self.conv1_b.len() == h
                && self.conv2_w.len() == n * h * 2
                && self.conv2_b.len() == n,
            "shaping parameter sizes do not match frame size {} and dim {}",
            n,
            self.dim
        );
        let finite = [&self.conv1_w, &self.conv1_b, &self.conv2_w, &self.conv2_b]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()));
        ensure!(finite, "shaping parameters must be finite");
        Ok(())
    }
}

/// Runtime form of [`ShapeSpec`] with the convolutions unrolled into dense maps.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaShape {
    pub dim: usize,
    pub frame_size: usize,
    conv1: Dense,
    conv2: Dense,
}

impl AdaShape {
    pub fn new(spec: &ShapeSpec) -> Result<Self> {
        spec.validate()?;
        let (h, i, n) = (spec.hidden(), spec.input_len(), spec.frame_size);
        Ok(AdaShape {
            dim: spec.dim,
            frame_size: n,
            conv1: Dense::from_conv(&spec.conv1_w, &spec.conv1_b, h, i, 2),
            conv2: Dense::from_conv(&spec.conv2_w, &spec.conv2_b, n, h, 2),
        })
    }

    pub fn hidden(&self) -> usize {
        self.frame_size / ENVELOPE_BLOCK
    }

    fn input_len(&self) -> usize {
        self.hidden() + 1 + self.dim
    }
}

/// Previous-frame context of the two width-2 convolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaShapeState {
    pub prev_input: Vec<f32>,
    pub prev_hidden: Vec<f32>,
}

impl AdaShapeState {
    pub fn new(shape: &AdaShape) -> Self {
        AdaShapeState {
            prev_input: vec![0.0; shape.input_len()],
            prev_hidden: vec![0.0; shape.hidden()],
        }
    }

    pub fn reset(&mut self) {
        self.prev_input.iter_mut().for_each(|v| *v = 0.0);
        self.prev_hidden.iter_mut().for_each(|v| *v = 0.0);
    }
}

pub fn adashape_gains(
    shape: &AdaShape,
    phi: &[f32],
    frame: &[f32],
    state: &mut AdaShapeState,
) -> Result<TemporalGains> {
    ensure!(
        frame.len() == shape.frame_size,
        "shaping frame has {} samples, expected {}",
        frame.len(),
        shape.frame_size
    );
    ensure!(
        phi.len() == shape.dim,
        "latent dimension {} does not match shaping dimension {}",
        phi.len(),
        shape.dim
    );
    ensure!(
        state.prev_input.len() == shape.input_len() && state.prev_hidden.len() == shape.hidden(),
        "shaping state does not match the module"
    );
    let env = temporal_envelope(frame)?;

    let mut x1 = Vec::with_capacity(2 * shape.input_len());
    x1.extend_from_slice(&state.prev_input);
    x1.extend_from_slice(&env.log_env_centered);
    x1.push(env.mu);
    x1.extend_from_slice(phi);
    let mut hidden = vec![0.0f32; shape.hidden()];
    shape.conv1.forward(&x1, &mut hidden, Activation::LeakyRelu);

    let mut x2 = Vec::with_capacity(2 * shape.hidden());
    x2.extend_from_slice(&state.prev_hidden);
    x2.extend_from_slice(&hidden);
    let mut gains = vec![0.0f32; shape.frame_size];
    shape.conv2.forward(&x2, &mut gains, Activation::Exp);

    state.prev_input.copy_from_slice(&x1[shape.input_len()..]);
    state.prev_hidden = hidden;
    Ok(TemporalGains { gains })
}

/// Multiplies every sample of `input` by its adaptive gain.
pub fn adashape_frame(
    shape: &AdaShape,
    phi: &[f32],
    input: &[f32],
    state: &mut AdaShapeState,
    output: &mut [f32],
) -> Result<()> {
    ensure!(output.len() == input.len(), "shaping output size mismatch");
    let gains = adashape_gains(shape, phi, input, state)?;
    for ((y, x), g) in output.iter_mut().zip(input).zip(&gains.gains) {
        *y = g * x;
    }
    Ok(())
}
