//! LACE and NoLACE signal graphs with streaming state.
//!
//! NoLACE signal path (pre-emphasized domain):
//!
//! ```text
//! y -> AdaComb1 -> AdaComb2 -> AdaConv1 (1->2) -+-> ch0 ----------------> AdaConv2 (2->2) -+-> ...
//!                                               +-> ch1 -> AdaShape1 -->                    +-> ch1 -> AdaShape2 ...
//! ... AdaConv3 (2->2), AdaShape3 on ch1, AdaConv4 (2->1) -> y_hat
//! ```
//!
//! LACE stops after a single-channel AdaConv1. Latent vectors feed the
//! stages as listed in [`latent_map`].

use crate::config::{ModelConfig, Variant, BLOCK_SUBFRAMES};
use crate::ddsp::{
    adacomb_frame, adacomb_frame_unvoiced, adaconv_frame, adashape_frame, AdaCombState,
    AdaConvState, AdaShape, AdaShapeState, CombSpec, KernelSpec, ShapeSpec,
};
use crate::encoder::{EncoderState, FeatureEncoder, FeatureFrame, LatentChain};
use crate::error::{ensure, Error, Result};
use crate::weights::{validate, ModelWeights};

const LACE_LATENTS: &[(&str, usize)] = &[("adacomb1", 1), ("adacomb2", 1), ("adaconv1", 1)];

const NOLACE_LATENTS: &[(&str, usize)] = &[
    ("adacomb1", 1),
    ("adacomb2", 2),
    ("adaconv1", 3),
    ("adashape1", 4),
    ("adaconv2", 4),
    ("adashape2", 5),
    ("adaconv3", 5),
    ("adashape3", 6),
    ("adaconv4", 6),
];

/// Which `phi(k)` drives each stage, in processing order.
pub fn latent_map(variant: Variant) -> &'static [(&'static str, usize)] {
    match variant {
        Variant::Lace => LACE_LATENTS,
        Variant::NoLace => NOLACE_LATENTS,
    }
}

/// Output of one stage for one subframe, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace {
    pub stage: &'static str,
    pub output: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalGraph {
    pub variant: Variant,
    pub frame_size: usize,
    pub combs: Vec<CombSpec>,
    pub convs: Vec<KernelSpec>,
    pub shapes: Vec<AdaShape>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphState {
    pub combs: Vec<AdaCombState>,
    pub convs: Vec<AdaConvState>,
    pub shapes: Vec<AdaShapeState>,
}

impl GraphState {
    pub fn reset(&mut self) {
        self.combs.iter_mut().for_each(AdaCombState::reset);
        self.convs.iter_mut().for_each(AdaConvState::reset);
        self.shapes.iter_mut().for_each(AdaShapeState::reset);
    }
}

fn tensor(w: &ModelWeights, name: &str) -> Result<Vec<f32>> {
    Ok(w.get(name)?.data.clone())
}

impl SignalGraph {
    pub fn from_weights(weights: &ModelWeights) -> Result<Self> {
        let c = &weights.config;
        let n_h = c.n_h;
        let combs = c
            .variant
            .comb_stages()
            .iter()
            .map(|name| {
                let p = c.filter(name);
                let comb = CombSpec {
                    kernel: KernelSpec {
                        in_ch: 1,
                        out_ch: 1,
                        taps: p.taps,
                        dim: n_h,
                        gain_limit: p.gain_limit,
                        w_shape: tensor(weights, &format!("{name}.w_shape"))?,
                        b_shape: tensor(weights, &format!("{name}.b_shape"))?,
                        w_gain: tensor(weights, &format!("{name}.w_gain"))?,
                        b_gain: tensor(weights, &format!("{name}.b_gain"))?,
                    },
                    w_feed: tensor(weights, &format!("{name}.w_feed"))?,
                    b_feed: weights.get(&format!("{name}.b_feed"))?.data[0],
                    max_lag: c.comb_max_lag(name),
                };
                comb.validate()?;
                Ok(comb)
            })
            .collect::<Result<Vec<_>>>()?;
        let convs = c
            .variant
            .conv_stages()
            .iter()
            .map(|(name, in_ch, out_ch)| {
                let p = c.filter(name);
                let k = KernelSpec {
                    in_ch: *in_ch,
                    out_ch: *out_ch,
                    taps: p.taps,
                    dim: n_h,
                    gain_limit: p.gain_limit,
                    w_shape: tensor(weights, &format!("{name}.w_shape"))?,
                    b_shape: tensor(weights, &format!("{name}.b_shape"))?,
                    w_gain: tensor(weights, &format!("{name}.w_gain"))?,
                    b_gain: tensor(weights, &format!("{name}.b_gain"))?,
                };
                k.validate()?;
                Ok(k)
            })
            .collect::<Result<Vec<_>>>()?;
        let shapes = c
            .variant
            .shape_stages()
            .iter()
            .map(|name| {
                AdaShape::new(&ShapeSpec {
                    dim: n_h,
                    frame_size: c.frame_size,
                    conv1_w: tensor(weights, &format!("{name}.conv1.w"))?,
                    conv1_b: tensor(weights, &format!("{name}.conv1.b"))?,
                    conv2_w: tensor(weights, &format!("{name}.conv2.w"))?,
                    conv2_b: tensor(weights, &format!("{name}.conv2.b"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SignalGraph {
            variant: c.variant,
            frame_size: c.frame_size,
            combs,
            convs,
            shapes,
        })
    }

    pub fn new_state(&self) -> GraphState {
        GraphState {
            combs: self.combs.iter().map(AdaCombState::new).collect(),
            convs: self.convs.iter().map(AdaConvState::new).collect(),
            shapes: self.shapes.iter().map(AdaShapeState::new).collect(),
        }
    }

    fn comb(
        &self,
        idx: usize,
        phi: &[f32],
        lag: u32,
        x: &[f32],
        state: &mut GraphState,
    ) -> Result<Vec<f32>> {
        let mut y = vec![0.0; x.len()];
        let (spec, st) = (&self.combs[idx], &mut state.combs[idx]);
        if lag == 0 {
            adacomb_frame_unvoiced(spec, phi, x, st, &mut y)?;
        } else {
            adacomb_frame(spec, phi, lag as usize, x, st, &mut y)?;
        }
        Ok(y)
    }

    fn conv(&self, idx: usize, phi: &[f32], x: &[f32], state: &mut GraphState) -> Result<Vec<f32>> {
        let spec = &self.convs[idx];
        let mut y = vec![0.0; spec.out_ch * self.frame_size];
        adaconv_frame(spec, phi, x, &mut state.convs[idx], &mut y)?;
        Ok(y)
    }

    /// Shapes the second channel of a two-channel frame in place.
    fn shape(&self, idx: usize, phi: &[f32], x: &mut [f32], state: &mut GraphState) -> Result<()> {
        let n = self.frame_size;
        let ch = x[n..2 * n].to_vec();
        adashape_frame(
            &self.shapes[idx],
            phi,
            &ch,
            &mut state.shapes[idx],
            &mut x[n..2 * n],
        )
    }

    /// Runs one subframe through the signal path.
    pub fn process_subframe(
        &self,
        input: &[f32],
        latents: &LatentChain,
        pitch_lag: u32,
        state: &mut GraphState,
        mut trace: Option<&mut Vec<StageTrace>>,
    ) -> Result<Vec<f32>> {
        ensure!(
            input.len() == self.frame_size,
            "subframe has {} samples, expected {}",
            input.len(),
            self.frame_size
        );
        let map = latent_map(self.variant);
        let needed = map.iter().map(|(_, k)| *k).max().unwrap_or(1);
        ensure!(
            latents.levels.len() >= needed,
            "{} needs {} latent levels, got {}",
            self.variant,
            needed,
            latents.levels.len()
        );
        let phi = |stage: &str| -> &[f32] {
            let k = map.iter().find(|(s, _)| *s == stage).unwrap().1;
            latents.phi(k)
        };
        let mut record = |stage: &'static str, out: &[f32]| {
            if let Some(t) = trace.as_deref_mut() {
                t.push(StageTrace {
                    stage,
                    output: out.to_vec(),
                });
            }
        };

        let x = self.comb(0, phi("adacomb1"), pitch_lag, input, state)?;
        record("adacomb1", &x);
        let x = self.comb(1, phi("adacomb2"), pitch_lag, &x, state)?;
        record("adacomb2", &x);
        let mut x = self.conv(0, phi("adaconv1"), &x, state)?;
        record("adaconv1", &x);
        if self.variant == Variant::Lace {
            return Ok(x);
        }
        const MIX: [(&str, &str); 3] = [
            ("adashape1", "adaconv2"),
            ("adashape2", "adaconv3"),
            ("adashape3", "adaconv4"),
        ];
        for (i, (shape, conv)) in MIX.iter().enumerate() {
            self.shape(i, phi(shape), &mut x, state)?;
            record(shape, &x[self.frame_size..]);
            x = self.conv(i + 1, phi(conv), &x, state)?;
            record(conv, &x);
        }
        Ok(x)
    }
}

/// Everything a stream carries between blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamState {
    config: ModelConfig,
    pub encoder: EncoderState,
    pub graph: GraphState,
    pub samples_processed: u64,
}

impl StreamState {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn reset(&mut self) {
        self.encoder.reset();
        self.graph.reset();
        self.samples_processed = 0;
    }
}

/// Loaded, validated model ready for streaming inference. Immutable and
/// shareable across streams; each stream owns a [`StreamState`].
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub encoder: FeatureEncoder,
    pub graph: SignalGraph,
}

impl Model {
    pub fn from_weights(weights: &ModelWeights) -> Result<Self> {
        let report = validate(weights, &weights.config);
        if !report.is_ok() {
            return Err(Error::Validation(report.messages()));
        }
        Ok(Model {
            config: weights.config.clone(),
            encoder: FeatureEncoder::from_weights(weights)?,
            graph: SignalGraph::from_weights(weights)?,
        })
    }

    pub fn new_state(&self) -> StreamState {
        StreamState {
            config: self.config.clone(),
            encoder: self.encoder.new_state(),
            graph: self.graph.new_state(),
            samples_processed: 0,
        }
    }

    pub fn block_len(&self) -> usize {
        BLOCK_SUBFRAMES * self.config.frame_size
    }

    fn check_state(&self, state: &StreamState) -> Result<()> {
        ensure!(
            state.config == self.config,
            "stream state belongs to a different model configuration"
        );
        Ok(())
    }

    /// Enhances one 20 ms block: `4 * frame_size` samples and four feature frames.
    pub fn enhance_block(
        &self,
        block: &[f32],
        features: &[FeatureFrame],
        state: &mut StreamState,
    ) -> Result<Vec<f32>> {
        ensure!(
            features.len() == BLOCK_SUBFRAMES,
            "a block takes {} feature frames, got {}",
            BLOCK_SUBFRAMES,
            features.len()
        );
        self.check_state(state)?;
        let latents = self.encoder.encode(features, &mut state.encoder)?;
        let lags: Vec<u32> = features.iter().map(|f| f.pitch_lag).collect();
        self.process_block_latents(block, &latents, &lags, state, None)
    }

    /// Signal path of one block with externally supplied latent vectors.
    /// The encoder state is left untouched.
    pub fn process_block_latents(
        &self,
        block: &[f32],
        latents: &[LatentChain],
        lags: &[u32],
        state: &mut StreamState,
        mut trace: Option<&mut Vec<StageTrace>>,
    ) -> Result<Vec<f32>> {
        let n = self.config.frame_size;
        ensure!(
            block.len() == BLOCK_SUBFRAMES * n,
            "block has {} samples, expected {}",
            block.len(),
            BLOCK_SUBFRAMES * n
        );
        ensure!(
            latents.len() == BLOCK_SUBFRAMES && lags.len() == BLOCK_SUBFRAMES,
            "a block takes {} latent chains and pitch lags",
            BLOCK_SUBFRAMES
        );
        self.check_state(state)?;
        let mut out = Vec::with_capacity(block.len());
        for ((x, chain), lag) in block.chunks_exact(n).zip(latents).zip(lags) {
            let y = self.graph.process_subframe(
                x,
                chain,
                *lag,
                &mut state.graph,
                trace.as_deref_mut(),
            )?;
            out.extend_from_slice(&y);
        }
        state.samples_processed += block.len() as u64;
        Ok(out)
    }

    /// Processes whole blocks with a caller-held state.
    pub fn process(
        &self,
        signal: &[f32],
        features: &[FeatureFrame],
        state: &mut StreamState,
    ) -> Result<Vec<f32>> {
        let n = self.config.frame_size;
        ensure!(
            features.len().is_multiple_of(BLOCK_SUBFRAMES),
            "chunk must hold whole blocks, got {} feature frames",
            features.len()
        );
        ensure!(
            signal.len() == n * features.len(),
            "signal has {} samples but {} feature frames need {}",
            signal.len(),
            features.len(),
            n * features.len()
        );
        let mut out = Vec::with_capacity(signal.len());
        for (block, feats) in signal
            .chunks_exact(self.block_len())
            .zip(features.chunks_exact(BLOCK_SUBFRAMES))
        {
            out.extend(self.enhance_block(block, feats, state)?);
        }
        Ok(out)
    }

    /// Enhances a complete signal from a fresh state. A trailing partial
    /// block is zero-padded (samples and features) and the output truncated.
    pub fn enhance_stream(&self, signal: &[f32], features: &[FeatureFrame]) -> Result<Vec<f32>> {
        let n = self.config.frame_size;
        ensure!(
            signal.len() == n * features.len(),
            "signal has {} samples but {} feature frames need {}",
            signal.len(),
            features.len(),
            n * features.len()
        );
        let padded_frames = features.len().div_ceil(BLOCK_SUBFRAMES) * BLOCK_SUBFRAMES;
        let mut feats = features.to_vec();
        feats.resize(padded_frames, FeatureFrame::zeros(self.config.n_f));
        let mut x = signal.to_vec();
        x.resize(padded_frames * n, 0.0);
        let mut state = self.new_state();
        let mut y = self.process(&x, &feats, &mut state)?;
        y.truncate(signal.len());
        Ok(y)
    }
}
