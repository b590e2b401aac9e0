//! Adaptive DSP primitives.
//!
//! All three filters share the same life cycle: a latent vector `phi` is
//! mapped to per-frame coefficients, the coefficients of the previous frame
//! are crossfaded into the new ones over the first half of the frame, and the
//! filter history is carried in an explicit state object so that a stream can
//! be processed in arbitrary frame-aligned chunks.

mod adacomb;
mod adaconv;
mod adashape;
mod emphasis;
mod kernel;

pub use adacomb::{
    adacomb_frame, adacomb_frame_unvoiced, apply_comb, compute_comb_filter, AdaCombState,
    CombFilter, CombSpec,
};
pub use adaconv::{adaconv_frame, apply_adaconv, AdaConvState};
pub use adashape::{
    adashape_frame, adashape_gains, temporal_envelope, AdaShape, AdaShapeState, ShapeSpec,
    TemporalEnvelope, TemporalGains,
};
pub use emphasis::{deemphasis, preemphasis};
pub use kernel::{
    compute_frame_filter, compute_kernel_gain, compute_kernel_shape, FrameFilter, KernelSpec,
};

/// Samples per 5 ms subframe at 16 kHz.
pub const FRAME_SIZE: usize = 80;

/// First-order emphasis coefficient of the processing domain.
pub const PREEMPHASIS: f32 = 0.85;

/// Lower bound on the joint kernel-norm denominator.
pub const KERNEL_NORM_FLOOR: f32 = 1e-6;

/// Added to the 4-sample block averages before taking the log.
pub const ENVELOPE_FLOOR: f32 = 1e-6;

/// Block length of the temporal envelope.
pub const ENVELOPE_BLOCK: usize = 4;

pub const DEFAULT_GAIN_LIMIT: f32 = 2.0;

/// Weight of the current-frame coefficients at sample `t` of a frame of
/// `frame_len` samples. Ramps linearly from 0 to 1 over the first half.
#[inline]
pub fn crossfade_weight(t: usize, frame_len: usize) -> f32 {
    let half = frame_len / 2;
    if t >= half {
        1.0
    } else {
        t as f32 / half as f32
    }
}
