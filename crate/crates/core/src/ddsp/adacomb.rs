use crate::error::{ensure, Result};
use crate::nn::dot;

use super::crossfade_weight;
use super::kernel::{compute_frame_filter, KernelSpec};

/// Adaptive comb filter: a feed-through gain on the undelayed sample plus an
/// adaptive FIR whose taps are centered on the pitch-lag delay.
///
/// ```text
/// y(t) = g0 * x(t) + sum_tau h(tau) * x(t - lag + c - tau),   c = taps / 2
/// ```
///
/// `h = g * kappa` comes from `kernel` (single channel); `g0` uses the same
/// bounded-gain law with its own `w_feed`, `b_feed` and the kernel's limit.
#[derive(Debug, Clone, PartialEq)]
pub struct CombSpec {
    pub kernel: KernelSpec,
    pub w_feed: Vec<f32>,
    pub b_feed: f32,
    /// Largest accepted pitch lag in samples.
    pub max_lag: usize,
}

impl CombSpec {
    pub fn zeros(taps: usize, dim: usize, gain_limit: f32, max_lag: usize) -> Self {
        CombSpec {
            kernel: KernelSpec::zeros(1, 1, taps, dim, gain_limit),
            w_feed: vec![0.0; dim],
            b_feed: 0.0,
            max_lag,
        }
    }

    /// Tap offset of the kernel center relative to the lag.
    pub fn center(&self) -> usize {
        self.kernel.taps / 2
    }

    /// Smallest pitch lag that keeps the comb branch strictly causal.
    pub fn min_lag(&self) -> usize {
        self.center() + 1
    }

    pub fn history_len(&self) -> usize {
        self.max_lag + self.kernel.taps - 1 - self.center()
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        ensure!(
            self.kernel.in_ch == 1 && self.kernel.out_ch == 1,
            "comb kernel must be single channel"
        );
        ensure!(
            self.w_feed.len() == self.kernel.dim,
            "feed-through weights have {} entries, expected {}",
            self.w_feed.len(),
            self.kernel.dim
        );
        ensure!(
            self.w_feed.iter().all(|v| v.is_finite()) && self.b_feed.is_finite(),
            "feed-through parameters must be finite"
        );
        ensure!(
            self.max_lag >= self.min_lag(),
            "max lag {} below minimum {}",
            self.max_lag,
            self.min_lag()
        );
        Ok(())
    }
}

/// Coefficients of one comb frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CombFilter {
    pub feed_gain: f32,
    /// `g * kappa`, `taps` entries.
    pub taps: Vec<f32>,
    pub lag: usize,
}

/// `lag = None` marks an unvoiced frame: the comb taps are zeroed and only the
/// feed-through branch remains.
pub fn compute_comb_filter(spec: &CombSpec, phi: &[f32], lag: Option<usize>) -> Result<CombFilter> {
    if let Some(lag) = lag {
        ensure!(
            lag >= spec.min_lag() && lag <= spec.max_lag,
            "pitch lag {} outside [{}, {}]",
            lag,
            spec.min_lag(),
            spec.max_lag
        );
    }
    let kernel = compute_frame_filter(&spec.kernel, phi)?;
    let z = if spec.kernel.dim == 0 {
        spec.b_feed
    } else {
        dot(&spec.w_feed, phi) + spec.b_feed
    };
    let feed_gain = (spec.kernel.gain_limit * z.tanh()).exp();
    Ok(match lag {
        Some(lag) => CombFilter {
            feed_gain,
            taps: kernel.impulse,
            lag,
        },
        None => CombFilter {
            feed_gain,
            taps: vec![0.0; spec.kernel.taps],
            lag: spec.min_lag(),
        },
    })
}

/// Per-stream state of one comb filter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaCombState {
    pub history: Vec<f32>,
    pub prev: Option<CombFilter>,
}

impl AdaCombState {
    pub fn new(spec: &CombSpec) -> Self {
        AdaCombState {
            history: vec![0.0; spec.history_len()],
            prev: None,
        }
    }

    pub fn reset(&mut self) {
        self.history.iter_mut().for_each(|v| *v = 0.0);
        self.prev = None;
    }
}

/// Filters `n` samples given `hist` history samples in front of them in `ext`.
/// Crossfades from `prev` over the first half frame like [`super::apply_adaconv`].
pub fn apply_comb(
    cur: &CombFilter,
    prev: Option<&CombFilter>,
    ext: &[f32],
    hist: usize,
    output: &mut [f32],
) -> Result<()> {
    let n = output.len();
    ensure!(
        ext.len() == hist + n,
        "comb input must hold history plus frame"
    );
    let center = cur.taps.len() / 2;
    for f in std::iter::once(cur).chain(prev) {
        ensure!(
            f.taps.len() == cur.taps.len(),
            "comb filters differ in tap count"
        );
        ensure!(
            f.lag > center && f.lag + f.taps.len() - 1 - center <= hist,
            "comb lag {} not covered by {} history samples",
            f.lag,
            hist
        );
    }
    let eval = |f: &CombFilter, t: usize| -> f32 {
        let now = hist + t;
        let base = now + center - f.lag;
        let mut acc = f.feed_gain * ext[now];
        for (tau, c) in f.taps.iter().enumerate() {
            acc += c * ext[base - tau];
        }
        acc
    };
    for (t, y) in output.iter_mut().enumerate() {
        let current = eval(cur, t);
        *y = match prev {
            Some(p) if t < n / 2 => {
                let w = crossfade_weight(t, n);
                (1.0 - w) * eval(p, t) + w * current
            }
            _ => current,
        };
    }
    Ok(())
}

fn comb_frame(
    spec: &CombSpec,
    phi: &[f32],
    lag: Option<usize>,
    input: &[f32],
    state: &mut AdaCombState,
    output: &mut [f32],
) -> Result<()> {
    ensure!(
        input.len() == output.len(),
        "comb input and output lengths differ"
    );
    let hist = spec.history_len();
    ensure!(
        state.history.len() == hist,
        "comb state history holds {} samples, need {}",
        state.history.len(),
        hist
    );
    let filter = compute_comb_filter(spec, phi, lag)?;
    let mut ext = Vec::with_capacity(hist + input.len());
    ext.extend_from_slice(&state.history);
    ext.extend_from_slice(input);
    apply_comb(&filter, state.prev.as_ref(), &ext, hist, output)?;
    state.history.copy_from_slice(&ext[ext.len() - hist..]);
    state.prev = Some(filter);
    Ok(())
}

/// One voiced frame of adaptive comb filtering at `pitch_lag` samples.
pub fn adacomb_frame(
    spec: &CombSpec,
    phi: &[f32],
    pitch_lag: usize,
    input: &[f32],
    state: &mut AdaCombState,
    output: &mut [f32],
) -> Result<()> {
    comb_frame(spec, phi, Some(pitch_lag), input, state, output)
}

/// One unvoiced frame: feed-through only, still crossfading from the
/// previous frame's comb.
pub fn adacomb_frame_unvoiced(
    spec: &CombSpec,
    phi: &[f32],
    input: &[f32],
    state: &mut AdaCombState,
    output: &mut [f32],
) -> Result<()> {
    comb_frame(spec, phi, None, input, state, output)
}
