use crate::error::{ensure, Error, Result};
use crate::nn::dot;

use super::KERNEL_NORM_FLOOR;

/// Parameters that map a latent vector to the per-frame impulse responses
/// of an adaptive convolution.
///
/// `w_shape` is row-major with `out_ch * in_ch * taps` rows (ordered by
/// output channel, then input channel, then tap) and `dim` columns.
/// `w_gain` has one row per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub in_ch: usize,
    pub out_ch: usize,
    pub taps: usize,
    pub dim: usize,
    pub gain_limit: f32,
    pub w_shape: Vec<f32>,
    pub b_shape: Vec<f32>,
    pub w_gain: Vec<f32>,
    pub b_gain: Vec<f32>,
}

impl KernelSpec {
    pub fn zeros(in_ch: usize, out_ch: usize, taps: usize, dim: usize, gain_limit: f32) -> Self {
        let rows = out_ch * in_ch * taps;
        KernelSpec {
            in_ch,
            out_ch,
            taps,
            dim,
            gain_limit,
            w_shape: vec![0.0; rows * dim],
            b_shape: vec![0.0; rows],
            w_gain: vec![0.0; out_ch * dim],
            b_gain: vec![0.0; out_ch],
        }
    }

    /// Output channel `o` passes input channel `min(o, in_ch - 1)` through
    /// unchanged, independent of `phi`.
    pub fn identity(in_ch: usize, out_ch: usize, taps: usize, dim: usize, gain_limit: f32) -> Self {
        let mut spec = KernelSpec::zeros(in_ch, out_ch, taps, dim, gain_limit);
        for o in 0..out_ch {
            let i = o.min(in_ch - 1);
            spec.b_shape[(o * in_ch + i) * taps] = 1.0;
        }
        spec
    }

    pub fn rows(&self) -> usize {
        self.out_ch * self.in_ch * self.taps
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.taps >= 1 && self.in_ch >= 1 && self.out_ch >= 1,
            "kernel needs taps, in_ch, out_ch >= 1 (got {}, {}, {})",
            self.taps,
            self.in_ch,
            self.out_ch
        );
        ensure!(
            self.gain_limit.is_finite() && self.gain_limit > 0.0,
            "gain limit must be positive and finite, got {}",
            self.gain_limit
        );
        let rows = self.rows();
        ensure!(
            self.w_shape.len() == rows * self.dim
                && self.b_shape.len() == rows
                && self.w_gain.len() == self.out_ch * self.dim
                && self.b_gain.len() == self.out_ch,
            "kernel parameter sizes do not match {}x{}x{} taps, dim {}",
            self.out_ch,
            self.in_ch,
            self.taps,
            self.dim
        );
        let finite = [&self.w_shape, &self.b_shape, &self.w_gain, &self.b_gain]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()));
        ensure!(finite, "kernel parameters must be finite");
        Ok(())
    }

    fn check_phi(&self, phi: &[f32]) -> Result<()> {
        if phi.len() != self.dim {
            return Err(Error::contract(format!(
                "latent dimension {} does not match kernel dimension {}",
                phi.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

/// Jointly normalized kernel shapes, laid out like `KernelSpec::b_shape`.
///
/// For each output channel the L2 norms of its `in_ch` shapes sum to one.
/// The denominator is floored at [`KERNEL_NORM_FLOOR`], so an all-zero raw
/// response yields an all-zero shape rather than NaN.
pub fn compute_kernel_shape(spec: &KernelSpec, phi: &[f32]) -> Result<Vec<f32>> {
    spec.check_phi(phi)?;
    let mut raw: Vec<f32> = if spec.dim == 0 {
        spec.b_shape.clone()
    } else {
        spec.w_shape
            .chunks_exact(spec.dim)
            .zip(&spec.b_shape)
            .map(|(row, b)| dot(row, phi) + b)
            .collect()
    };
    let per_out = spec.in_ch * spec.taps;
    for chan in raw.chunks_exact_mut(per_out) {
        let denom: f32 = chan
            .chunks_exact(spec.taps)
            .map(|k| k.iter().map(|v| v * v).sum::<f32>().sqrt())
            .sum();
        let scale = 1.0 / denom.max(KERNEL_NORM_FLOOR);
        chan.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(raw)
}

/// Shared per-output-channel gain `exp(limit * tanh(W_g phi + b_g))`.
pub fn compute_kernel_gain(spec: &KernelSpec, phi: &[f32]) -> Result<Vec<f32>> {
    spec.check_phi(phi)?;
    Ok((0..spec.out_ch)
        .map(|o| {
            let z = if spec.dim == 0 {
                spec.b_gain[o]
            } else {
                dot(&spec.w_gain[o * spec.dim..(o + 1) * spec.dim], phi) + spec.b_gain[o]
            };
            (spec.gain_limit * z.tanh()).exp()
        })
        .collect())
}

/// Impulse responses of one frame, `impulse = gain * shape` per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFilter {
    pub in_ch: usize,
    pub out_ch: usize,
    pub taps: usize,
    pub shape: Vec<f32>,
    pub gain: Vec<f32>,
    pub impulse: Vec<f32>,
}

impl FrameFilter {
    pub fn from_parts(
        in_ch: usize,
        out_ch: usize,
        taps: usize,
        shape: Vec<f32>,
        gain: Vec<f32>,
    ) -> Result<Self> {
        ensure!(
            shape.len() == out_ch * in_ch * taps && gain.len() == out_ch,
            "frame filter parts do not match {out_ch}x{in_ch}x{taps}"
        );
        let per_out = in_ch * taps;
        let impulse = shape
            .iter()
            .enumerate()
            .map(|(k, s)| s * gain[k / per_out])
            .collect();
        Ok(FrameFilter {
            in_ch,
            out_ch,
            taps,
            shape,
            gain,
            impulse,
        })
    }

    /// Impulse response from input channel `i` to output channel `o`.
    pub fn response(&self, o: usize, i: usize) -> &[f32] {
        let start = (o * self.in_ch + i) * self.taps;
        &self.impulse[start..start + self.taps]
    }
}

pub fn compute_frame_filter(spec: &KernelSpec, phi: &[f32]) -> Result<FrameFilter> {
    let shape = compute_kernel_shape(spec, phi)?;
    let gain = compute_kernel_gain(spec, phi)?;
    FrameFilter::from_parts(spec.in_ch, spec.out_ch, spec.taps, shape, gain)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bias_only(in_ch: usize, taps: usize, b_shape: Vec<f32>) -> KernelSpec {
        let mut spec = KernelSpec::zeros(in_ch, 1, taps, 1, 2.0);
        spec.b_shape = b_shape;
        spec
    }

    #[test]
    fn three_four_five() {
        let spec = bias_only(1, 2, vec![3.0, 4.0]);
        let k = compute_kernel_shape(&spec, &[0.7]).unwrap();
        assert!((k[0] - 0.6).abs() < 1e-7 && (k[1] - 0.8).abs() < 1e-7);
    }

    #[test]
    fn zero_channel_joins_normalization() {
        let spec = bias_only(2, 2, vec![3.0, 4.0, 0.0, 0.0]);
        let k = compute_kernel_shape(&spec, &[0.0]).unwrap();
        let expect = 5.0f64 / (5.0f64).max(KERNEL_NORM_FLOOR as f64);
        assert!((k[0] as f64 - 0.6 * expect).abs() < 1e-7);
        assert!((k[1] as f64 - 0.8 * expect).abs() < 1e-7);
        assert_eq!(&k[2..], &[0.0, 0.0]);
    }

    #[test]
    fn all_zero_response_is_zero_not_nan() {
        let spec = bias_only(2, 3, vec![0.0; 6]);
        let k = compute_kernel_shape(&spec, &[1.0]).unwrap();
        assert!(k.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gain_at_zero_is_one() {
        let spec = KernelSpec::zeros(1, 1, 3, 4, 2.0);
        assert_eq!(compute_kernel_gain(&spec, &[0.0; 4]).unwrap(), vec![1.0]);
    }

    #[test]
    fn gain_saturates_at_limit() {
        let mut spec = KernelSpec::zeros(1, 1, 1, 1, 2.0);
        spec.b_gain[0] = 1e4;
        let g = compute_kernel_gain(&spec, &[0.0]).unwrap()[0];
        assert!((g - 2.0f32.exp()).abs() < 1e-5);
        spec.b_gain[0] = -1e4;
        let g = compute_kernel_gain(&spec, &[0.0]).unwrap()[0];
        assert!((g - (-2.0f32).exp()).abs() < 1e-6);
    }

    #[test]
    fn gain_half_tanh() {
        // tanh(z) = 0.5 at z = atanh(0.5); with limit 1 the gain is e^0.5.
        let mut spec = KernelSpec::zeros(1, 1, 1, 1, 1.0);
        spec.w_gain[0] = 0.5f64.atanh() as f32;
        let g = compute_kernel_gain(&spec, &[1.0]).unwrap()[0];
        let oracle = (1.0f64 * (0.5f64.atanh() as f32 as f64).tanh()).exp();
        assert!((g as f64 - oracle).abs() < 1e-6);
        assert!((g as f64 - 1.6487212707).abs() < 1e-5);
    }

    #[test]
    fn phi_dimension_mismatch() {
        let spec = KernelSpec::zeros(1, 1, 3, 4, 2.0);
        assert!(matches!(
            compute_kernel_shape(&spec, &[0.0; 3]),
            Err(Error::Contract(_))
        ));
        assert!(compute_kernel_gain(&spec, &[0.0; 5]).is_err());
    }

    #[test]
    fn validate_rejects_bad_limits() {
        let mut spec = KernelSpec::zeros(1, 1, 3, 4, 2.0);
        assert!(spec.validate().is_ok());
        spec.gain_limit = 0.0;
        assert!(spec.validate().is_err());
        spec.gain_limit = f32::INFINITY;
        assert!(spec.validate().is_err());
        spec.gain_limit = 1.0;
        spec.w_shape[0] = f32::NAN;
        assert!(spec.validate().is_err());
        assert!(KernelSpec::zeros(1, 1, 0, 4, 1.0).validate().is_err());
    }

    #[test]
    fn identity_kernel_routes_channels() {
        let spec = KernelSpec::identity(2, 3, 4, 5, 1.0);
        let f = compute_frame_filter(&spec, &[0.3; 5]).unwrap();
        assert_eq!(f.response(0, 0), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(f.response(1, 1), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(f.response(2, 1), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(f.response(2, 0), &[0.0; 4]);
    }
}
