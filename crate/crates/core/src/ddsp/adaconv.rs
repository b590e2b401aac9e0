use crate::error::{ensure, Result};

use super::crossfade_weight;
use super::kernel::{compute_frame_filter, FrameFilter, KernelSpec};

/// Per-stream state of one adaptive convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaConvState {
    /// `taps - 1` past samples per input channel, channel-major.
    pub history: Vec<f32>,
    pub prev: Option<FrameFilter>,
}

impl AdaConvState {
    pub fn new(spec: &KernelSpec) -> Self {
        AdaConvState {
            history: vec![0.0; spec.in_ch * spec.taps.saturating_sub(1)],
            prev: None,
        }
    }

    pub fn reset(&mut self) {
        self.history.iter_mut().for_each(|v| *v = 0.0);
        self.prev = None;
    }
}

/// Causal multi-channel FIR filtering of one frame.
///
/// `ext` holds, per input channel, `taps - 1` history samples followed by the
/// `n` new samples (stride `taps - 1 + n`). For `t < n / 2` the output is the
/// linear crossfade between filtering with `prev` and with `cur`; from the
/// midpoint on only `cur` is used. Without `prev`, `cur` covers the frame.
pub fn apply_adaconv(
    cur: &FrameFilter,
    prev: Option<&FrameFilter>,
    ext: &[f32],
    n: usize,
    output: &mut [f32],
) -> Result<()> {
    let hist = cur.taps - 1;
    let stride = hist + n;
    ensure!(
        ext.len() == cur.in_ch * stride,
        "adaconv input needs {} history samples per channel",
        hist
    );
    ensure!(
        output.len() == cur.out_ch * n,
        "adaconv output size mismatch"
    );
    if let Some(p) = prev {
        ensure!(
            p.in_ch == cur.in_ch && p.out_ch == cur.out_ch && p.taps == cur.taps,
            "previous frame filter has a different layout"
        );
    }
    let fir = |filter: &FrameFilter, o: usize, t: usize| -> f32 {
        let mut acc = 0.0f32;
        for i in 0..filter.in_ch {
            let x = &ext[i * stride..(i + 1) * stride];
            let h = filter.response(o, i);
            let end = hist + t;
            for (tau, c) in h.iter().enumerate() {
                acc += c * x[end - tau];
            }
        }
        acc
    };
    for o in 0..cur.out_ch {
        let out = &mut output[o * n..(o + 1) * n];
        for (t, y) in out.iter_mut().enumerate() {
            let current = fir(cur, o, t);
            *y = match prev {
                Some(p) if t < n / 2 => {
                    let w = crossfade_weight(t, n);
                    (1.0 - w) * fir(p, o, t) + w * current
                }
                _ => current,
            };
        }
    }
    Ok(())
}

/// One frame of adaptive convolution.
///
/// `input` is channel-major (`in_ch * n`), `output` is channel-major
/// (`out_ch * n`). Coefficients come from `phi`; the previous frame's filter
/// and the input history are taken from and written back to `state`.
pub fn adaconv_frame(
    spec: &KernelSpec,
    phi: &[f32],
    input: &[f32],
    state: &mut AdaConvState,
    output: &mut [f32],
) -> Result<()> {
    ensure!(
        spec.in_ch > 0 && input.len().is_multiple_of(spec.in_ch),
        "adaconv input length {} is not a multiple of {} channels",
        input.len(),
        spec.in_ch
    );
    let n = input.len() / spec.in_ch;
    let hist = spec.taps.saturating_sub(1);
    ensure!(
        state.history.len() == spec.in_ch * hist,
        "adaconv state history holds {} samples, need {}",
        state.history.len(),
        spec.in_ch * hist
    );
    let filter = compute_frame_filter(spec, phi)?;

    let stride = hist + n;
    let mut ext = vec![0.0f32; spec.in_ch * stride];
    for i in 0..spec.in_ch {
        let dst = &mut ext[i * stride..(i + 1) * stride];
        dst[..hist].copy_from_slice(&state.history[i * hist..(i + 1) * hist]);
        dst[hist..].copy_from_slice(&input[i * n..(i + 1) * n]);
    }
    apply_adaconv(&filter, state.prev.as_ref(), &ext, n, output)?;

    for i in 0..spec.in_ch {
        let src = &ext[i * stride..(i + 1) * stride];
        state.history[i * hist..(i + 1) * hist].copy_from_slice(&src[stride - hist..]);
    }
    state.prev = Some(filter);
    Ok(())
}
