//! Scalar f64 reference models.
//!
//! Every stage is evaluated on the whole signal at once with global time
//! indices and zero initial conditions, straight from the raw tensors. None
//! of the engine's state handling, dense unrolling or frame loops is reused.
#![allow(dead_code)]

use nolace::config::{ModelConfig, Variant};
use nolace::{FeatureFrame, ModelWeights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const N: usize = 80;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tensor(w: &ModelWeights, name: &str) -> Vec<f64> {
    w.get(name)
        .unwrap_or_else(|_| panic!("missing {name}"))
        .data
        .iter()
        .map(|&v| v as f64)
        .collect()
}

pub fn to64(x: &[f32]) -> Vec<f64> {
    x.iter().map(|&v| v as f64).collect()
}

/// Max-norm error of `got` relative to the reference.
pub fn rel_err(got: &[f32], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len(), "length mismatch");
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = got
        .iter()
        .zip(want)
        .fold(0.0f64, |m, (g, w)| m.max((*g as f64 - w).abs()));
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn leaky(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        0.2 * x
    }
}

/// `y[r] = b[r] + sum_c w[r][c] x[c]`
fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    (0..b.len())
        .map(|r| b[r] + (0..x.len()).map(|c| w[r * x.len() + c] * x[c]).sum::<f64>())
        .collect()
}

// ---------------------------------------------------------------- kernels

#[derive(Debug, Clone)]
pub struct RefKernel {
    pub in_ch: usize,
    pub out_ch: usize,
    pub taps: usize,
    pub alpha: f64,
    pub w_shape: Vec<f64>,
    pub b_shape: Vec<f64>,
    pub w_gain: Vec<f64>,
    pub b_gain: Vec<f64>,
}

impl RefKernel {
    pub fn load(w: &ModelWeights, name: &str, in_ch: usize, out_ch: usize) -> Self {
        let p = w.config.filter(name);
        RefKernel {
            in_ch,
            out_ch,
            taps: p.taps,
            alpha: p.gain_limit as f64,
            w_shape: tensor(w, &format!("{name}.w_shape")),
            b_shape: tensor(w, &format!("{name}.b_shape")),
            w_gain: tensor(w, &format!("{name}.w_gain")),
            b_gain: tensor(w, &format!("{name}.b_gain")),
        }
    }

    pub fn gains(&self, phi: &[f64]) -> Vec<f64> {
        affine(&self.w_gain, &self.b_gain, phi)
            .into_iter()
            .map(|z| (self.alpha * z.tanh()).exp())
            .collect()
    }

    /// `[o][i][k]` flattened; per output channel the channel norms sum to 1.
    pub fn shape(&self, phi: &[f64]) -> Vec<f64> {
        let raw = affine(&self.w_shape, &self.b_shape, phi);
        let mut out = raw.clone();
        for o in 0..self.out_ch {
            let mut denom = 0.0;
            for i in 0..self.in_ch {
                let mut sq = 0.0;
                for k in 0..self.taps {
                    sq += raw[(o * self.in_ch + i) * self.taps + k].powi(2);
                }
                denom += sq.sqrt();
            }
            let denom = denom.max(1e-6);
            for i in 0..self.in_ch {
                for k in 0..self.taps {
                    let idx = (o * self.in_ch + i) * self.taps + k;
                    out[idx] = raw[idx] / denom;
                }
            }
        }
        out
    }

    pub fn impulse(&self, phi: &[f64]) -> Vec<f64> {
        let g = self.gains(phi);
        let s = self.shape(phi);
        s.iter()
            .enumerate()
            .map(|(idx, v)| v * g[idx / (self.in_ch * self.taps)])
            .collect()
    }
}

fn at(x: &[f64], t: isize) -> f64 {
    if t < 0 {
        0.0
    } else {
        x[t as usize]
    }
}

/// Crossfade weight of the current frame's filter at sample `j` of a frame,
/// or `None` when only the current filter applies.
fn fade(frame: usize, j: usize, n: usize) -> Option<f64> {
    if frame > 0 && j < n / 2 {
        Some(j as f64 / (n / 2) as f64)
    } else {
        None
    }
}

/// Adaptive convolution of whole channel signals with one latent per frame.
pub fn ref_adaconv(k: &RefKernel, x: &[Vec<f64>], phis: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let len = x[0].len();
    assert_eq!(len, phis.len() * n);
    let h: Vec<Vec<f64>> = phis.iter().map(|p| k.impulse(p)).collect();
    let conv = |hf: &[f64], o: usize, t: usize| -> f64 {
        let mut acc = 0.0;
        for (i, xi) in x.iter().enumerate() {
            for tau in 0..k.taps {
                acc += hf[(o * k.in_ch + i) * k.taps + tau] * at(xi, t as isize - tau as isize);
            }
        }
        acc
    };
    (0..k.out_ch)
        .map(|o| {
            (0..len)
                .map(|t| {
                    let (f, j) = (t / n, t % n);
                    match fade(f, j, n) {
                        Some(w) => (1.0 - w) * conv(&h[f - 1], o, t) + w * conv(&h[f], o, t),
                        None => conv(&h[f], o, t),
                    }
                })
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------- combs

#[derive(Debug, Clone)]
pub struct RefComb {
    pub kernel: RefKernel,
    pub w_feed: Vec<f64>,
    pub b_feed: f64,
}

impl RefComb {
    pub fn load(w: &ModelWeights, name: &str) -> Self {
        RefComb {
            kernel: RefKernel::load(w, name, 1, 1),
            w_feed: tensor(w, &format!("{name}.w_feed")),
            b_feed: tensor(w, &format!("{name}.b_feed"))[0],
        }
    }

    /// `(g0, taps)`; unvoiced frames (lag 0) keep only the feed-through.
    fn filter(&self, phi: &[f64], lag: u32) -> (f64, Vec<f64>) {
        let z = affine(&self.w_feed, &[self.b_feed], phi)[0];
        let g0 = (self.kernel.alpha * z.tanh()).exp();
        let h = if lag == 0 {
            vec![0.0; self.kernel.taps]
        } else {
            self.kernel.impulse(phi)
        };
        (g0, h)
    }
}

pub fn ref_adacomb(c: &RefComb, x: &[f64], phis: &[Vec<f64>], lags: &[u32], n: usize) -> Vec<f64> {
    let filters: Vec<_> = phis
        .iter()
        .zip(lags)
        .map(|(p, &l)| c.filter(p, l))
        .collect();
    let center = (c.kernel.taps / 2) as isize;
    let eval = |f: usize, t: usize| -> f64 {
        let (g0, h) = &filters[f];
        let lag = lags[f] as isize;
        let mut acc = g0 * x[t];
        if lag == 0 {
            return acc;
        }
        for (tau, hv) in h.iter().enumerate() {
            acc += hv * at(x, t as isize - lag + center - tau as isize);
        }
        acc
    };
    (0..x.len())
        .map(|t| {
            let (f, j) = (t / n, t % n);
            match fade(f, j, n) {
                Some(w) => (1.0 - w) * eval(f - 1, t) + w * eval(f, t),
                None => eval(f, t),
            }
        })
        .collect()
}

// ---------------------------------------------------------------- shaping

#[derive(Debug, Clone)]
pub struct RefShape {
    pub n: usize,
    pub c1w: Vec<f64>,
    pub c1b: Vec<f64>,
    pub c2w: Vec<f64>,
    pub c2b: Vec<f64>,
}

impl RefShape {
    pub fn load(w: &ModelWeights, name: &str) -> Self {
        RefShape {
            n: w.config.frame_size,
            c1w: tensor(w, &format!("{name}.conv1.w")),
            c1b: tensor(w, &format!("{name}.conv1.b")),
            c2w: tensor(w, &format!("{name}.conv2.w")),
            c2b: tensor(w, &format!("{name}.conv2.b")),
        }
    }
}

/// `(log-envelope minus its mean, mean)` of one frame on 4-sample blocks.
pub fn ref_envelope(frame: &[f64]) -> (Vec<f64>, f64) {
    let logs: Vec<f64> = frame
        .chunks(4)
        .map(|b| (b.iter().map(|v| v.abs()).sum::<f64>() / 4.0 + 1e-6).ln())
        .collect();
    let mu = logs.iter().sum::<f64>() / logs.len() as f64;
    (logs.iter().map(|v| v - mu).collect(), mu)
}

/// Width-2 causal convolution over a frame sequence, weights `[out, in, 2]`.
fn conv2_seq(w: &[f64], b: &[f64], xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let in_len = xs[0].len();
    (0..xs.len())
        .map(|f| {
            (0..b.len())
                .map(|o| {
                    let mut acc = b[o];
                    for i in 0..in_len {
                        if f > 0 {
                            acc += w[(o * in_len + i) * 2] * xs[f - 1][i];
                        }
                        acc += w[(o * in_len + i) * 2 + 1] * xs[f][i];
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

pub fn ref_shape_gains(s: &RefShape, x: &[f64], phis: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let inputs: Vec<Vec<f64>> = x
        .chunks(s.n)
        .zip(phis)
        .map(|(frame, phi)| {
            let (env, mu) = ref_envelope(frame);
            let mut u = env;
            u.push(mu);
            u.extend_from_slice(phi);
            u
        })
        .collect();
    let hidden: Vec<Vec<f64>> = conv2_seq(&s.c1w, &s.c1b, &inputs)
        .into_iter()
        .map(|h| h.into_iter().map(leaky).collect())
        .collect();
    conv2_seq(&s.c2w, &s.c2b, &hidden)
        .into_iter()
        .map(|g| g.into_iter().map(f64::exp).collect())
        .collect()
}

pub fn ref_adashape(s: &RefShape, x: &[f64], phis: &[Vec<f64>]) -> Vec<f64> {
    let gains = ref_shape_gains(s, x, phis);
    x.iter()
        .enumerate()
        .map(|(t, v)| v * gains[t / s.n][t % s.n])
        .collect()
}

// ---------------------------------------------------------------- encoder

/// Latents `[subframe][level]`, levels `phi1 ..= phiK`.
pub fn ref_encoder(w: &ModelWeights, frames: &[FeatureFrame]) -> Vec<Vec<Vec<f64>>> {
    let c = &w.config;
    let (n_r, n_h) = (c.n_r, c.n_h);
    assert_eq!(frames.len() % 4, 0);
    let (c1w, c1b) = (tensor(w, "conv1.w"), tensor(w, "conv1.b"));
    let (cpw, cpb) = (tensor(w, "cpool.w"), tensor(w, "cpool.b"));
    let (c2w, c2b) = (tensor(w, "conv2.w"), tensor(w, "conv2.b"));
    let (tw, tb) = (tensor(w, "tconv.w"), tensor(w, "tconv.b"));
    let (wih, whh) = (tensor(w, "gru.w_ih"), tensor(w, "gru.w_hh"));
    let (bih, bhh) = (tensor(w, "gru.b_ih"), tensor(w, "gru.b_hh"));

    let reduced: Vec<Vec<f64>> = frames
        .iter()
        .map(|f| {
            affine(&c1w, &c1b, &to64(&f.features))
                .into_iter()
                .map(f64::tanh)
                .collect()
        })
        .collect();
    let pooled: Vec<Vec<f64>> = reduced
        .chunks(4)
        .map(|blk| {
            (0..n_h)
                .map(|o| {
                    let mut acc = cpb[o];
                    for i in 0..n_r {
                        for (k, r) in blk.iter().enumerate() {
                            acc += cpw[(o * n_r + i) * 4 + k] * r[i];
                        }
                    }
                    acc.tanh()
                })
                .collect()
        })
        .collect();
    let ctx: Vec<Vec<f64>> = conv2_seq(&c2w, &c2b, &pooled)
        .into_iter()
        .map(|v| v.into_iter().map(f64::tanh).collect())
        .collect();
    let mut up = Vec::new();
    for cb in &ctx {
        for s in 0..4 {
            up.push(
                (0..n_h)
                    .map(|o| {
                        let mut acc = tb[o];
                        for i in 0..n_h {
                            acc += tw[(i * n_h + o) * 4 + s] * cb[i];
                        }
                        acc.tanh()
                    })
                    .collect::<Vec<f64>>(),
            );
        }
    }
    let mut h = vec![0.0; n_h];
    let mut phi1 = Vec::new();
    for u in &up {
        let gi = affine(&wih, &bih, u);
        let gh = affine(&whh, &bhh, &h);
        h = (0..n_h)
            .map(|j| {
                let r = sigmoid(gi[j] + gh[j]);
                let z = sigmoid(gi[n_h + j] + gh[n_h + j]);
                let nn = (gi[2 * n_h + j] + r * gh[2 * n_h + j]).tanh();
                (1.0 - z) * nn + z * h[j]
            })
            .collect();
        phi1.push(h.clone());
    }
    let mut levels = vec![phi1];
    for k in 1..c.variant.num_latents() {
        let fw = tensor(w, &format!("ftrans{k}.w"));
        let fb = tensor(w, &format!("ftrans{k}.b"));
        let next = conv2_seq(&fw, &fb, levels.last().unwrap())
            .into_iter()
            .map(|v| v.into_iter().map(f64::tanh).collect())
            .collect();
        levels.push(next);
    }
    (0..frames.len())
        .map(|t| levels.iter().map(|l| l[t].clone()).collect())
        .collect()
}

// ---------------------------------------------------------------- graph

fn level(latents: &[Vec<Vec<f64>>], k: usize) -> Vec<Vec<f64>> {
    latents.iter().map(|l| l[k - 1].clone()).collect()
}

/// Stage-by-stage composition on the whole signal. Returns the final output
/// and the AdaConv1 output channels.
pub fn ref_graph_latents(
    w: &ModelWeights,
    x: &[f64],
    latents: &[Vec<Vec<f64>>],
    lags: &[u32],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = w.config.frame_size;
    let nolace = w.config.variant == Variant::NoLace;
    let phi = |k: usize| level(latents, if nolace { k } else { 1 });
    let c1 = ref_adacomb(&RefComb::load(w, "adacomb1"), x, &phi(1), lags, n);
    let c2 = ref_adacomb(&RefComb::load(w, "adacomb2"), &c1, &phi(2), lags, n);
    if !nolace {
        let y = ref_adaconv(&RefKernel::load(w, "adaconv1", 1, 1), &[c2], &phi(1), n);
        return (y[0].clone(), y);
    }
    let mut ch = ref_adaconv(&RefKernel::load(w, "adaconv1", 1, 2), &[c2], &phi(3), n);
    let conv1 = ch.clone();
    for (shape, conv, out, k) in [
        ("adashape1", "adaconv2", 2, 4),
        ("adashape2", "adaconv3", 2, 5),
        ("adashape3", "adaconv4", 1, 6),
    ] {
        ch[1] = ref_adashape(&RefShape::load(w, shape), &ch[1], &phi(k));
        ch = ref_adaconv(&RefKernel::load(w, conv, 2, out), &ch, &phi(k), n);
    }
    (ch[0].clone(), conv1)
}

pub fn ref_graph(w: &ModelWeights, x: &[f64], frames: &[FeatureFrame]) -> Vec<f64> {
    let latents = ref_encoder(w, frames);
    let lags: Vec<u32> = frames.iter().map(|f| f.pitch_lag).collect();
    ref_graph_latents(w, x, &latents, &lags).0
}

// ---------------------------------------------------------------- inputs

pub fn random_signal(rng: &mut ChaCha8Rng, len: usize) -> Vec<f32> {
    (0..len).map(|_| rng.gen_range(-1.0f32..1.0)).collect()
}

pub fn random_phi(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect()
}

/// Random lag in the pitch range, or 0 (unvoiced) about one time in five.
pub fn random_lag(rng: &mut ChaCha8Rng) -> u32 {
    if rng.gen_bool(0.2) {
        0
    } else {
        rng.gen_range(32..=256)
    }
}

pub fn random_frames(rng: &mut ChaCha8Rng, n_f: usize, count: usize) -> Vec<FeatureFrame> {
    (0..count)
        .map(|_| FeatureFrame {
            features: random_phi(rng, n_f),
            pitch_lag: random_lag(rng),
        })
        .collect()
}

/// Small random configuration for property tests.
pub fn random_config(rng: &mut ChaCha8Rng, variant: Variant) -> ModelConfig {
    ModelConfig::new(
        variant,
        rng.gen_range(1..12),
        rng.gen_range(1..10),
        rng.gen_range(1..16),
    )
    .with_taps(rng.gen_range(1..10), rng.gen_range(1..10))
}
