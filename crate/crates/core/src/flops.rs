//! Analytic complexity count.
//!
//! A multiply-accumulate counts as two flops; activations, exponentials and
//! other elementwise operations count as one. Figures are per second of
//! 16 kHz audio.

use serde::Serialize;

use crate::config::{ModelConfig, Variant, BLOCK_SUBFRAMES, SAMPLE_RATE};
use crate::ddsp::ENVELOPE_BLOCK;
use crate::weights::tensor_layout;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageCost {
    pub stage: String,
    pub flops_per_second: f64,
    pub params: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub variant: Variant,
    pub stages: Vec<StageCost>,
    pub total_flops_per_second: f64,
    pub total_params: usize,
}

impl ComplexityReport {
    pub fn gflops(&self) -> f64 {
        self.total_flops_per_second * 1e-9
    }

    pub fn stage(&self, name: &str) -> Option<&StageCost> {
        self.stages.iter().find(|s| s.stage == name)
    }

    /// Plain-text table, one stage per line.
    pub fn table(&self) -> String {
        let mut s = format!("{:<12} {:>14} {:>10}\n", "stage", "MFLOP/s", "params");
        for st in &self.stages {
            s += &format!(
                "{:<12} {:>14.3} {:>10}\n",
                st.stage,
                st.flops_per_second * 1e-6,
                st.params
            );
        }
        s += &format!(
            "{:<12} {:>14.3} {:>10}\n",
            "total",
            self.total_flops_per_second * 1e-6,
            self.total_params
        );
        s
    }
}

fn mac(n: usize) -> f64 {
    2.0 * n as f64
}

/// Kernel prediction for `rows` normalized taps over `groups` output
/// channels: the linear map, gain branch, norm and scaling.
fn kernel_flops(rows: usize, groups: usize, dim: usize) -> f64 {
    mac(rows * dim)            // shape projection
        + mac(groups * dim)    // gain projection
        + 2.0 * groups as f64  // tanh + exp
        + mac(rows)            // squared norm
        + groups as f64        // sqrt
        + 2.0 * rows as f64 // divide and gain scale
}

/// FIR filtering of one frame including the crossfaded first half.
fn filtering_flops(n: usize, taps_per_output: usize, outputs: usize) -> f64 {
    let half = n / 2;
    let per_sample = mac(taps_per_output) * outputs as f64;
    per_sample * (n + half) as f64 + 3.0 * (half * outputs) as f64
}

pub fn count_flops(config: &ModelConfig) -> ComplexityReport {
    let (n_f, n_r, n_h, n) = (config.n_f, config.n_r, config.n_h, config.frame_size);
    let sub_rate = if n == 0 {
        0.0
    } else {
        SAMPLE_RATE as f64 / n as f64
    };
    let block_rate = sub_rate / BLOCK_SUBFRAMES as f64;
    let k = BLOCK_SUBFRAMES;

    let mut stages: Vec<(String, f64)> = vec![
        ("conv1".into(), sub_rate * (mac(n_r * n_f) + n_r as f64)),
        (
            "cpool".into(),
            block_rate * (mac(n_h * k * n_r) + n_h as f64),
        ),
        (
            "conv2".into(),
            block_rate * (mac(n_h * 2 * n_h) + n_h as f64),
        ),
        (
            "tconv".into(),
            block_rate * (mac(k * n_h * n_h) + (k * n_h) as f64),
        ),
        (
            "gru".into(),
            // two 3n_h x n_h products, gate sigmoids/tanh and the blend
            sub_rate * (2.0 * mac(3 * n_h * n_h) + 9.0 * n_h as f64),
        ),
    ];
    for j in 1..config.variant.num_latents() {
        stages.push((
            format!("ftrans{j}"),
            sub_rate * (mac(n_h * 2 * n_h) + n_h as f64),
        ));
    }
    for name in config.variant.comb_stages() {
        let taps = config.filter(name).taps;
        let per_frame = kernel_flops(taps, 1, n_h)
            + mac(n_h) + 2.0 // feed-through gain
            + filtering_flops(n, taps + 1, 1);
        stages.push((name.to_string(), sub_rate * per_frame));
    }
    for (name, in_ch, out_ch) in config.variant.conv_stages() {
        let taps = config.filter(name).taps;
        let per_frame = kernel_flops(in_ch * out_ch * taps, *out_ch, n_h)
            + filtering_flops(n, in_ch * taps, *out_ch);
        stages.push((name.to_string(), sub_rate * per_frame));
    }
    for name in config.variant.shape_stages() {
        let hidden = n / ENVELOPE_BLOCK;
        let input = hidden + 1 + n_h;
        let per_frame = 2.0 * n as f64        // |x| and block sums
            + 3.0 * hidden as f64             // log, mean removal
            + mac(hidden * 2 * input) + hidden as f64
            + mac(n * 2 * hidden) + n as f64  // conv2 + exp
            + n as f64; // apply gains
        stages.push((name.to_string(), sub_rate * per_frame));
    }

    let layout = tensor_layout(config);
    let stages: Vec<StageCost> = stages
        .into_iter()
        .map(|(stage, flops)| {
            let params = layout
                .iter()
                .filter(|t| t.name.split('.').next() == Some(stage.as_str()))
                .map(|t| t.shape.iter().product::<usize>())
                .sum();
            StageCost {
                stage,
                flops_per_second: flops,
                params,
            }
        })
        .collect();
    ComplexityReport {
        variant: config.variant,
        total_flops_per_second: stages.iter().map(|s| s.flops_per_second).sum(),
        total_params: stages.iter().map(|s| s.params).sum(),
        stages,
    }
}
