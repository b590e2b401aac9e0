//! Desk-scale codec simulator: additive shaped noise in place of a real
//! codec, plus synthetic conditioning features and a pitch tracker.
//!
//! Feature layout (93 slots per 5 ms subframe):
//!
//! | slots     | content                                                      |
//! |-----------|--------------------------------------------------------------|
//! | `0..64`   | log10 power spectrum of `y`, 64 bands of 4 FFT bins           |
//! | `64..82`  | cepstrum of `y`: DCT-II of 18 band log energies               |
//! | `82..87`  | normalized autocorrelation of `y` at lags `p-2 ..= p+2`       |
//! | `87..92`  | normalized correlation of clean `x` at `p-2 ..= p+2` (LTP)    |
//! | `92`      | bitrate in kb/s divided by 20                                |
//!
//! Correlation slots are zero for unvoiced subframes (`p = 0`).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::config::{DEFAULT_FEATURE_DIM, MAX_PITCH_LAG, MIN_PITCH_LAG};
use crate::ddsp::FRAME_SIZE;
use crate::encoder::FeatureFrame;
use crate::error::{ensure, Error, Result};

pub const SPECTRUM_BANDS: usize = 64;
pub const CEPSTRUM_LEN: usize = 18;
pub const CORR_SLOTS: usize = 5;
pub const SPECTRUM_OFFSET: usize = 0;
pub const CEPSTRUM_OFFSET: usize = 64;
pub const NOISY_CORR_OFFSET: usize = 82;
pub const LTP_OFFSET: usize = 87;
pub const BITRATE_SLOT: usize = 92;

/// Pitch analysis window: 25 ms.
pub const PITCH_WINDOW: usize = 400;
pub const VOICING_THRESHOLD: f32 = 0.5;
/// Candidate peaks at least this fraction of the best one compete; the
/// shortest lag wins, which keeps period multiples out.
pub const OCTAVE_RATIO: f32 = 0.85;

const FFT_SIZE: usize = 512;
const SPECTRUM_WINDOW: usize = 320;
const LOG_FLOOR: f32 = 1e-10;
const SILENCE_ENERGY: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bitrate {
    Kbps6,
    Kbps9,
    Kbps12,
    Kbps20,
}

impl Bitrate {
    pub const ALL: [Bitrate; 4] = [
        Bitrate::Kbps6,
        Bitrate::Kbps9,
        Bitrate::Kbps12,
        Bitrate::Kbps20,
    ];

    pub fn kbps(self) -> u32 {
        match self {
            Bitrate::Kbps6 => 6,
            Bitrate::Kbps9 => 9,
            Bitrate::Kbps12 => 12,
            Bitrate::Kbps20 => 20,
        }
    }

    /// Noise amplitude multiplier: lower bitrates are noisier.
    pub fn noise_scale(self) -> f32 {
        match self {
            Bitrate::Kbps6 => 1.0,
            Bitrate::Kbps9 => 0.7,
            Bitrate::Kbps12 => 0.5,
            Bitrate::Kbps20 => 0.25,
        }
    }

    pub fn from_kbps(kbps: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.kbps() == kbps)
    }
}

impl fmt::Display for Bitrate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kbps())
    }
}

impl FromStr for Bitrate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .parse::<u32>()
            .ok()
            .and_then(Bitrate::from_kbps)
            .ok_or_else(|| {
                Error::contract(format!(
                    "bitrate must be one of 6, 9, 12, 20 kb/s, got {s:?}"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradationProfile {
    /// 0 scales noise with the long-term level, 1 follows each subframe's level.
    pub noise_shaping: f32,
    /// First-order high-frequency emphasis of the noise.
    pub spectral_tilt: f32,
    pub quant_noise: f32,
    pub bitrate: Bitrate,
}

impl Default for DegradationProfile {
    fn default() -> Self {
        DegradationProfile {
            noise_shaping: 0.7,
            spectral_tilt: 0.5,
            quant_noise: 0.3,
            bitrate: Bitrate::Kbps9,
        }
    }
}

impl DegradationProfile {
    pub fn clean(bitrate: Bitrate) -> Self {
        DegradationProfile {
            noise_shaping: 0.0,
            spectral_tilt: 0.0,
            quant_noise: 0.0,
            bitrate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("noise shaping", self.noise_shaping),
            ("spectral tilt", self.spectral_tilt),
            ("quantization noise", self.quant_noise),
        ] {
            ensure!(
                (0.0..=1.0).contains(&v),
                "{name} strength {v} is outside [0, 1]"
            );
        }
        Ok(())
    }
}

fn rms(x: &[f32]) -> f32 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| (*v as f64).powi(2)).sum::<f64>() / x.len() as f64).sqrt() as f32
}

/// `y = x + g * n`, with `n` seeded, tilted white noise and `g` set per
/// subframe from the profile.
pub fn degrade(x: &[f32], profile: &DegradationProfile, seed: u64) -> Result<Vec<f32>> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f32> = (0..x.len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let tilt = profile.spectral_tilt;
    let norm = (1.0 + tilt * tilt).sqrt();
    let global = rms(x);
    let s = profile.noise_shaping;
    let amp = profile.quant_noise * profile.bitrate.noise_scale();

    let mut y = x.to_vec();
    for (start, frame) in (0..x.len()).step_by(FRAME_SIZE).zip(x.chunks(FRAME_SIZE)) {
        let gain = amp * ((1.0 - s) * global + s * rms(frame));
        for (j, yv) in y[start..start + frame.len()].iter_mut().enumerate() {
            let t = start + j;
            let prev = if t > 0 { white[t - 1] } else { 0.0 };
            *yv += gain * (white[t] - tilt * prev) / norm;
        }
    }
    Ok(y)
}

/// Signal-to-noise ratio of `y` against `x` in dB.
pub fn snr_db(x: &[f32], y: &[f32]) -> f64 {
    let sig: f64 = x.iter().map(|v| (*v as f64).powi(2)).sum();
    let noise: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| ((*a - *b) as f64).powi(2))
        .sum();
    10.0 * (sig / noise.max(1e-300)).log10()
}

fn sample(x: &[f32], t: isize) -> f64 {
    if t < 0 || t as usize >= x.len() {
        0.0
    } else {
        x[t as usize] as f64
    }
}

/// Normalized correlation of the window ending (exclusively) at `end`
/// against itself `lag` samples earlier.
pub fn normalized_correlation(x: &[f32], end: usize, lag: usize, window: usize) -> f32 {
    let (mut xy, mut xx, mut yy) = (0.0f64, 0.0f64, 0.0f64);
    for t in end as isize - window as isize..end as isize {
        let a = sample(x, t);
        let b = sample(x, t - lag as isize);
        xy += a * b;
        xx += a * a;
        yy += b * b;
    }
    if xx < SILENCE_ENERGY || yy < SILENCE_ENERGY {
        return 0.0;
    }
    (xy / (xx * yy).sqrt()) as f32
}

/// Pitch lag of the 25 ms window ending at `end`, or 0 when unvoiced.
pub fn estimate_pitch(x: &[f32], end: usize) -> u32 {
    let corr: Vec<f32> = (MIN_PITCH_LAG..=MAX_PITCH_LAG)
        .map(|lag| normalized_correlation(x, end, lag, PITCH_WINDOW))
        .collect();
    let best = corr.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    if best < VOICING_THRESHOLD {
        return 0;
    }
    let last = corr.len() - 1;
    for i in 0..corr.len() {
        let left = if i == 0 {
            f32::NEG_INFINITY
        } else {
            corr[i - 1]
        };
        let right = if i == last {
            f32::NEG_INFINITY
        } else {
            corr[i + 1]
        };
        if corr[i] >= OCTAVE_RATIO * best && corr[i] >= left && corr[i] >= right {
            return (MIN_PITCH_LAG + i) as u32;
        }
    }
    unreachable!("the global maximum is always a local maximum")
}

/// Pitch lag for every subframe, each using only samples up to its end.
pub fn pitch_track(x: &[f32]) -> Vec<u32> {
    let frames = x.len().div_ceil(FRAME_SIZE);
    (0..frames)
        .map(|i| estimate_pitch(x, (i + 1) * FRAME_SIZE))
        .collect()
}

struct Spectrum {
    fft: Arc<dyn Fft<f32>>,
    window: Vec<f32>,
    dct: Vec<f32>,
}

impl Spectrum {
    fn new() -> Self {
        let fft = FftPlanner::new().plan_fft_forward(FFT_SIZE);
        let window = (0..SPECTRUM_WINDOW)
            .map(|i| {
                let p = std::f32::consts::PI * (i as f32 + 0.5) / SPECTRUM_WINDOW as f32;
                p.sin().powi(2)
            })
            .collect();
        let n = CEPSTRUM_LEN as f32;
        let mut dct = vec![0.0; CEPSTRUM_LEN * CEPSTRUM_LEN];
        for k in 0..CEPSTRUM_LEN {
            let scale = if k == 0 {
                (1.0 / n).sqrt()
            } else {
                (2.0 / n).sqrt()
            };
            for j in 0..CEPSTRUM_LEN {
                dct[k * CEPSTRUM_LEN + j] =
                    scale * (std::f32::consts::PI * k as f32 * (j as f32 + 0.5) / n).cos();
            }
        }
        Spectrum { fft, window, dct }
    }

    /// Power spectrum (bins `0..FFT_SIZE/2`) of the window ending at `end`.
    fn power(&self, y: &[f32], end: usize) -> Vec<f32> {
        let mut buf = vec![Complex::new(0.0f32, 0.0); FFT_SIZE];
        let start = end as isize - SPECTRUM_WINDOW as isize;
        for (i, w) in self.window.iter().enumerate() {
            buf[i].re = sample(y, start + i as isize) as f32 * w;
        }
        self.fft.process(&mut buf);
        buf[..FFT_SIZE / 2].iter().map(|c| c.norm_sqr()).collect()
    }

    fn fill(&self, y: &[f32], end: usize, out: &mut [f32]) {
        let power = self.power(y, end);
        let per_band = power.len() / SPECTRUM_BANDS;
        for (b, chunk) in power.chunks_exact(per_band).enumerate() {
            let e = chunk.iter().sum::<f32>() / per_band as f32;
            out[SPECTRUM_OFFSET + b] = (e + LOG_FLOOR).log10();
        }
        let mut bands = [0.0f32; CEPSTRUM_LEN];
        for (b, v) in bands.iter_mut().enumerate() {
            let lo = b * power.len() / CEPSTRUM_LEN;
            let hi = (b + 1) * power.len() / CEPSTRUM_LEN;
            let e = power[lo..hi].iter().sum::<f32>() / (hi - lo) as f32;
            *v = (e + LOG_FLOOR).log10();
        }
        for k in 0..CEPSTRUM_LEN {
            let row = &self.dct[k * CEPSTRUM_LEN..(k + 1) * CEPSTRUM_LEN];
            out[CEPSTRUM_OFFSET + k] = row.iter().zip(&bands).map(|(a, b)| a * b).sum();
        }
    }
}

fn correlation_slots(x: &[f32], end: usize, lag: u32, out: &mut [f32]) {
    if lag == 0 {
        out.fill(0.0);
        return;
    }
    for (j, v) in out.iter_mut().enumerate() {
        let l = lag as usize + j - 2;
        *v = normalized_correlation(x, end, l, FRAME_SIZE);
    }
}

/// One feature frame per 5 ms subframe of the aligned clean/degraded pair.
/// A trailing partial subframe is treated as zero-padded.
pub fn extract_features(
    x: &[f32],
    y: &[f32],
    profile: &DegradationProfile,
) -> Result<Vec<FeatureFrame>> {
    ensure!(
        x.len() == y.len(),
        "clean and degraded signals differ in length ({} vs {})",
        x.len(),
        y.len()
    );
    profile.validate()?;
    let spectrum = Spectrum::new();
    let lags = pitch_track(x);
    let frames = lags
        .iter()
        .enumerate()
        .map(|(i, &lag)| {
            let end = (i + 1) * FRAME_SIZE;
            let mut f = vec![0.0f32; DEFAULT_FEATURE_DIM];
            spectrum.fill(y, end, &mut f);
            correlation_slots(
                y,
                end,
                lag,
                &mut f[NOISY_CORR_OFFSET..NOISY_CORR_OFFSET + CORR_SLOTS],
            );
            correlation_slots(x, end, lag, &mut f[LTP_OFFSET..LTP_OFFSET + CORR_SLOTS]);
            f[BITRATE_SLOT] = profile.bitrate.kbps() as f32 / 20.0;
            FeatureFrame {
                features: f,
                pitch_lag: lag,
            }
        })
        .collect();
    Ok(frames)
}
