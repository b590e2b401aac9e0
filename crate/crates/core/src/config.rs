//! Model hyperparameters shared by the weight format, the graph and the
//! complexity model.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::ddsp::{DEFAULT_GAIN_LIMIT, FRAME_SIZE};
use crate::error::{ensure, Result};

pub const SAMPLE_RATE: u32 = 16_000;
/// Subframes per causal processing block (20 ms).
pub const BLOCK_SUBFRAMES: usize = 4;
pub const MIN_PITCH_LAG: usize = 32;
pub const MAX_PITCH_LAG: usize = 256;
pub const DEFAULT_FEATURE_DIM: usize = 93;
pub const DEFAULT_TAPS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Lace,
    NoLace,
}

impl Variant {
    pub fn code(self) -> u8 {
        match self {
            Variant::Lace => 1,
            Variant::NoLace => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Variant::Lace),
            2 => Some(Variant::NoLace),
            _ => None,
        }
    }

    /// Length of the latent chain: LACE only uses `phi1`.
    pub fn num_latents(self) -> usize {
        match self {
            Variant::Lace => 1,
            Variant::NoLace => 6,
        }
    }

    pub fn comb_stages(self) -> &'static [&'static str] {
        &["adacomb1", "adacomb2"]
    }

    /// Adaptive convolutions with their `(in_ch, out_ch)`.
    pub fn conv_stages(self) -> &'static [(&'static str, usize, usize)] {
        match self {
            Variant::Lace => &[("adaconv1", 1, 1)],
            Variant::NoLace => &[
                ("adaconv1", 1, 2),
                ("adaconv2", 2, 2),
                ("adaconv3", 2, 2),
                ("adaconv4", 2, 1),
            ],
        }
    }

    pub fn shape_stages(self) -> &'static [&'static str] {
        match self {
            Variant::Lace => &[],
            Variant::NoLace => &["adashape1", "adashape2", "adashape3"],
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Lace => f.write_str("LACE"),
            Variant::NoLace => f.write_str("NoLACE"),
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lace" => Ok(Variant::Lace),
            "nolace" => Ok(Variant::NoLace),
            other => Err(format!(
                "unknown variant `{other}` (expected lace or nolace)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterParams {
    pub taps: usize,
    pub gain_limit: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Input feature dimension.
    pub n_f: usize,
    /// Reduced feature dimension after the first convolution.
    pub n_r: usize,
    /// Hidden channels, GRU size and latent dimension.
    pub n_h: usize,
    pub frame_size: usize,
    /// Tap count and gain limit per adaptive filter, keyed by stage name.
    pub filters: BTreeMap<String, FilterParams>,
}

impl ModelConfig {
    pub fn new(variant: Variant, n_f: usize, n_r: usize, n_h: usize) -> Self {
        let mut config = ModelConfig {
            variant,
            n_f,
            n_r,
            n_h,
            frame_size: FRAME_SIZE,
            filters: BTreeMap::new(),
        };
        config.set_taps(DEFAULT_TAPS, DEFAULT_TAPS);
        config
    }

    pub fn nolace() -> Self {
        ModelConfig::new(Variant::NoLace, DEFAULT_FEATURE_DIM, 96, 256)
    }

    pub fn lace() -> Self {
        ModelConfig::new(Variant::Lace, DEFAULT_FEATURE_DIM, 96, 256)
    }

    /// Resets every filter to the given tap counts and the default gain limit.
    pub fn set_taps(&mut self, comb_taps: usize, conv_taps: usize) {
        self.filters.clear();
        for name in self.variant.comb_stages() {
            self.filters.insert(
                name.to_string(),
                FilterParams {
                    taps: comb_taps,
                    gain_limit: DEFAULT_GAIN_LIMIT,
                },
            );
        }
        for (name, _, _) in self.variant.conv_stages() {
            self.filters.insert(
                name.to_string(),
                FilterParams {
                    taps: conv_taps,
                    gain_limit: DEFAULT_GAIN_LIMIT,
                },
            );
        }
    }

    pub fn with_taps(mut self, comb_taps: usize, conv_taps: usize) -> Self {
        self.set_taps(comb_taps, conv_taps);
        self
    }

    /// Panics if `name` is not a filter stage of this variant.
    pub fn filter(&self, name: &str) -> FilterParams {
        self.filters[name]
    }

    /// Largest lag the comb buffer must cover: the largest admissible pitch
    /// lag plus half the tap span.
    pub fn comb_max_lag(&self, name: &str) -> usize {
        MAX_PITCH_LAG + self.filter(name).taps / 2
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.n_f > 0 && self.n_r > 0 && self.n_h > 0,
            "model dimensions must be positive (n_f {}, n_r {}, n_h {})",
            self.n_f,
            self.n_r,
            self.n_h
        );
        ensure!(
            self.frame_size > 0 && self.frame_size.is_multiple_of(4),
            "frame size {} must be a positive multiple of 4",
            self.frame_size
        );
        let mut expected: Vec<&str> = self.variant.comb_stages().to_vec();
        expected.extend(self.variant.conv_stages().iter().map(|s| s.0));
        expected.sort_unstable();
        let present: Vec<&str> = self.filters.keys().map(String::as_str).collect();
        ensure!(
            present == expected,
            "filter table {:?} does not match {} stages {:?}",
            present,
            self.variant,
            expected
        );
        for (name, p) in &self.filters {
            ensure!(p.taps >= 1, "filter {name} needs at least one tap");
            ensure!(
                p.gain_limit.is_finite() && p.gain_limit > 0.0,
                "filter {name} gain limit must be positive and finite"
            );
        }
        for name in self.variant.comb_stages() {
            ensure!(
                self.filter(name).taps / 2 < MIN_PITCH_LAG,
                "comb {name} is too wide for the minimum pitch lag"
            );
        }
        Ok(())
    }
}
