//! Feature encoder: per-subframe conditioning features to the latent chain
//! `phi1 .. phi6`.
//!
//! ```text
//! features --Conv(k=1)--> N_r --CPool(k=4,s=4)--> N_h --Conv(k=2)--> N_h
//!          --TConv(k=4,s=4)--> N_h --GRU--> phi1 --ftrans1--> phi2 ... phi6
//! ```
//!
//! Every convolution is followed by tanh. The pooling block is a strided
//! convolution over the four subframes of a 20 ms block, so four subframes
//! are the smallest unit the encoder accepts. `Conv(k=2)` runs at block
//! rate, the feature transforms at subframe rate; both see only the previous
//! step through their carried state.

use crate::config::{ModelConfig, BLOCK_SUBFRAMES, MAX_PITCH_LAG, MIN_PITCH_LAG};
use crate::error::{ensure, Result};
use crate::nn::{Activation, Dense, Gru, GruScratch};
use crate::weights::ModelWeights;

/// Conditioning input of one 5 ms subframe.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    pub features: Vec<f32>,
    /// Pitch period in samples, or 0 for unvoiced.
    pub pitch_lag: u32,
}

impl FeatureFrame {
    pub fn zeros(n_f: usize) -> Self {
        FeatureFrame {
            features: vec![0.0; n_f],
            pitch_lag: 0,
        }
    }

    pub fn is_voiced(&self) -> bool {
        self.pitch_lag != 0
    }

    pub fn validate(&self, n_f: usize) -> Result<()> {
        ensure!(
            self.features.len() == n_f,
            "feature frame has {} values, expected {}",
            self.features.len(),
            n_f
        );
        ensure!(
            self.features.iter().all(|v| v.is_finite()),
            "feature frame contains non-finite values"
        );
        let lag = self.pitch_lag as usize;
        ensure!(
            lag == 0 || (MIN_PITCH_LAG..=MAX_PITCH_LAG).contains(&lag),
            "pitch lag {} outside [{}, {}] and not 0",
            lag,
            MIN_PITCH_LAG,
            MAX_PITCH_LAG
        );
        Ok(())
    }
}

/// Latent vectors of one subframe; `phi(1)` always exists, NoLACE adds
/// `phi(2) .. phi(6)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentChain {
    pub levels: Vec<Vec<f32>>,
}

impl LatentChain {
    /// One-based access mirroring the `phi(k)` naming.
    pub fn phi(&self, k: usize) -> &[f32] {
        &self.levels[k - 1]
    }

    pub fn phi_mut(&mut self, k: usize) -> &mut Vec<f32> {
        &mut self.levels[k - 1]
    }
}

/// Causal width-2 convolution along subframes handing the latent vector
/// from one stage to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTransform {
    conv: Dense,
}

impl FeatureTransform {
    pub fn new(weight: &[f32], bias: &[f32], dim: usize) -> Self {
        FeatureTransform {
            conv: Dense::from_conv(weight, bias, dim, dim, 2),
        }
    }

    pub fn dim(&self) -> usize {
        self.conv.rows
    }

    /// `prev` holds the previous subframe's input and is updated in place.
    pub fn step(&self, phi: &[f32], prev: &mut [f32]) -> Result<Vec<f32>> {
        let dim = self.dim();
        ensure!(
            phi.len() == dim && prev.len() == dim,
            "feature transform expects dimension {dim}"
        );
        let mut x = Vec::with_capacity(2 * dim);
        x.extend_from_slice(prev);
        x.extend_from_slice(phi);
        let mut out = vec![0.0; dim];
        self.conv.forward(&x, &mut out, Activation::Tanh);
        prev.copy_from_slice(phi);
        Ok(out)
    }

    /// Applies the transform to a sequence of latent vectors.
    pub fn apply_seq(&self, phis: &[Vec<f32>], prev: &mut [f32]) -> Result<Vec<Vec<f32>>> {
        phis.iter().map(|p| self.step(p, prev)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderState {
    /// Pooled vector of the previous block, input history of `conv2`.
    pub conv2_prev: Vec<f32>,
    pub gru_h: Vec<f32>,
    pub ftrans_prev: Vec<Vec<f32>>,
}

impl EncoderState {
    pub fn reset(&mut self) {
        self.conv2_prev.iter_mut().for_each(|v| *v = 0.0);
        self.gru_h.iter_mut().for_each(|v| *v = 0.0);
        for p in &mut self.ftrans_prev {
            p.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEncoder {
    pub n_f: usize,
    pub n_r: usize,
    pub n_h: usize,
    conv1: Dense,
    cpool: Dense,
    conv2: Dense,
    /// Rows ordered by output subframe, then channel.
    tconv: Dense,
    gru: Gru,
    ftrans: Vec<FeatureTransform>,
}

fn data<'a>(w: &'a ModelWeights, name: &str) -> Result<&'a [f32]> {
    Ok(&w.get(name)?.data)
}

impl FeatureEncoder {
    pub fn from_weights(weights: &ModelWeights) -> Result<Self> {
        let ModelConfig { n_f, n_r, n_h, .. } = weights.config;
        let k = BLOCK_SUBFRAMES;
        let conv1 = Dense::from_conv(
            data(weights, "conv1.w")?,
            data(weights, "conv1.b")?,
            n_r,
            n_f,
            1,
        );
        // The pooling kernel [n_h, n_r, 4] acts on the subframe-major
        // concatenation of the block, exactly like a k=4 convolution.
        let cpool = Dense::from_conv(
            data(weights, "cpool.w")?,
            data(weights, "cpool.b")?,
            n_h,
            n_r,
            k,
        );
        let conv2 = Dense::from_conv(
            data(weights, "conv2.w")?,
            data(weights, "conv2.b")?,
            n_h,
            n_h,
            2,
        );

        let tw = data(weights, "tconv.w")?;
        let tb = data(weights, "tconv.b")?;
        let mut tconv_w = vec![0.0; k * n_h * n_h];
        let mut tconv_b = vec![0.0; k * n_h];
        for s in 0..k {
            for o in 0..n_h {
                tconv_b[s * n_h + o] = tb[o];
                for i in 0..n_h {
                    tconv_w[(s * n_h + o) * n_h + i] = tw[(i * n_h + o) * k + s];
                }
            }
        }
        let tconv = Dense::new(k * n_h, n_h, tconv_w, tconv_b);

        let gru = Gru {
            hidden: n_h,
            input: Dense::new(
                3 * n_h,
                n_h,
                data(weights, "gru.w_ih")?.to_vec(),
                data(weights, "gru.b_ih")?.to_vec(),
            ),
            recurrent: Dense::new(
                3 * n_h,
                n_h,
                data(weights, "gru.w_hh")?.to_vec(),
                data(weights, "gru.b_hh")?.to_vec(),
            ),
        };
        let ftrans = (1..weights.config.variant.num_latents())
            .map(|j| {
                Ok(FeatureTransform::new(
                    data(weights, &format!("ftrans{j}.w"))?,
                    data(weights, &format!("ftrans{j}.b"))?,
                    n_h,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureEncoder {
            n_f,
            n_r,
            n_h,
            conv1,
            cpool,
            conv2,
            tconv,
            gru,
            ftrans,
        })
    }

    pub fn num_latents(&self) -> usize {
        self.ftrans.len() + 1
    }

    pub fn new_state(&self) -> EncoderState {
        EncoderState {
            conv2_prev: vec![0.0; self.n_h],
            gru_h: vec![0.0; self.n_h],
            ftrans_prev: vec![vec![0.0; self.n_h]; self.ftrans.len()],
        }
    }

    pub fn transforms(&self) -> &[FeatureTransform] {
        &self.ftrans
    }

    /// Encodes a whole number of 20 ms blocks. A trailing partial block must
    /// be zero-padded or buffered by the caller.
    pub fn encode(
        &self,
        frames: &[FeatureFrame],
        state: &mut EncoderState,
    ) -> Result<Vec<LatentChain>> {
        ensure!(
            frames.len().is_multiple_of(BLOCK_SUBFRAMES),
            "{} feature frames do not form whole {}-subframe blocks",
            frames.len(),
            BLOCK_SUBFRAMES
        );
        let mut out = Vec::with_capacity(frames.len());
        for block in frames.chunks_exact(BLOCK_SUBFRAMES) {
            out.extend(self.encode_block(block, state)?);
        }
        Ok(out)
    }

    fn encode_block(
        &self,
        block: &[FeatureFrame],
        state: &mut EncoderState,
    ) -> Result<Vec<LatentChain>> {
        for f in block {
            f.validate(self.n_f)?;
        }
        ensure!(
            state.conv2_prev.len() == self.n_h
                && state.gru_h.len() == self.n_h
                && state.ftrans_prev.len() == self.ftrans.len(),
            "encoder state does not match the encoder"
        );
        let k = BLOCK_SUBFRAMES;
        let mut reduced = vec![0.0f32; k * self.n_r];
        for (f, r) in block.iter().zip(reduced.chunks_exact_mut(self.n_r)) {
            self.conv1.forward(&f.features, r, Activation::Tanh);
        }
        let mut pooled = vec![0.0f32; self.n_h];
        self.cpool.forward(&reduced, &mut pooled, Activation::Tanh);

        let mut x2 = Vec::with_capacity(2 * self.n_h);
        x2.extend_from_slice(&state.conv2_prev);
        x2.extend_from_slice(&pooled);
        let mut c2 = vec![0.0f32; self.n_h];
        self.conv2.forward(&x2, &mut c2, Activation::Tanh);
        state.conv2_prev = pooled;

        let mut up = vec![0.0f32; k * self.n_h];
        self.tconv.forward(&c2, &mut up, Activation::Tanh);

        let mut scratch = GruScratch::default();
        let mut chains = Vec::with_capacity(k);
        for u in up.chunks_exact(self.n_h) {
            self.gru.step(u, &mut state.gru_h, &mut scratch);
            let mut levels = Vec::with_capacity(self.num_latents());
            levels.push(state.gru_h.clone());
            for (t, prev) in self.ftrans.iter().zip(state.ftrans_prev.iter_mut()) {
                let next = t.step(levels.last().unwrap(), prev)?;
                levels.push(next);
            }
            chains.push(LatentChain { levels });
        }
        Ok(chains)
    }
}
