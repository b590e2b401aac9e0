//! Dense building blocks shared by the feature encoder and the adaptive filters.
//!
//! Every learned layer in the engine reduces to a matrix-vector product on a
//! (possibly concatenated) input vector, so this is the only hot kernel.

/// Dot product with eight independent accumulators.
///
/// The summation order is fixed, which keeps chunked and one-shot processing
/// bit-identical while still letting the compiler vectorize the loop.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0f32;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Tanh,
    Sigmoid,
    LeakyRelu,
    Exp,
}

pub const LEAKY_RELU_SLOPE: f32 = 0.2;

impl Activation {
    #[inline]
    pub fn apply(self, x: f32) -> f32 {
        match self {
            Activation::Linear => x,
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::LeakyRelu => {
                if x >= 0.0 {
                    x
                } else {
                    LEAKY_RELU_SLOPE * x
                }
            }
            Activation::Exp => x.exp(),
        }
    }
}

/// Row-major affine map `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Dense {
    pub fn new(rows: usize, cols: usize, weight: Vec<f32>, bias: Vec<f32>) -> Self {
        assert_eq!(weight.len(), rows * cols, "dense weight size");
        assert_eq!(bias.len(), rows, "dense bias size");
        Dense {
            rows,
            cols,
            weight,
            bias,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Dense::new(rows, cols, vec![0.0; rows * cols], vec![0.0; rows])
    }

    pub fn forward(&self, x: &[f32], out: &mut [f32], act: Activation) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        if self.cols == 0 {
            for (o, b) in out.iter_mut().zip(&self.bias) {
                *o = act.apply(*b);
            }
            return;
        }
        for ((o, row), b) in out
            .iter_mut()
            .zip(self.weight.chunks_exact(self.cols))
            .zip(&self.bias)
        {
            *o = act.apply(dot(row, x) + b);
        }
    }

    /// Builds the dense equivalent of a `[out, in, k]` convolution kernel
    /// applied to the k-major concatenation `[x(t-k+1) .. x(t)]`.
    pub fn from_conv(weight: &[f32], bias: &[f32], out_ch: usize, in_ch: usize, k: usize) -> Self {
        assert_eq!(weight.len(), out_ch * in_ch * k);
        let cols = in_ch * k;
        let mut w = vec![0.0; out_ch * cols];
        for o in 0..out_ch {
            for i in 0..in_ch {
                for j in 0..k {
                    w[o * cols + j * in_ch + i] = weight[(o * in_ch + i) * k + j];
                }
            }
        }
        Dense::new(out_ch, cols, w, bias.to_vec())
    }
}

/// Gated recurrent unit with `r, z, n` gate ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct Gru {
    pub hidden: usize,
    pub input: Dense,
    pub recurrent: Dense,
}

impl Gru {
    pub fn step(&self, x: &[f32], h: &mut [f32], scratch: &mut GruScratch) {
        let n = self.hidden;
        scratch.gi.resize(3 * n, 0.0);
        scratch.gh.resize(3 * n, 0.0);
        self.input.forward(x, &mut scratch.gi, Activation::Linear);
        self.recurrent
            .forward(h, &mut scratch.gh, Activation::Linear);
        let (gi, gh) = (&scratch.gi, &scratch.gh);
        for j in 0..n {
            let r = Activation::Sigmoid.apply(gi[j] + gh[j]);
            let z = Activation::Sigmoid.apply(gi[n + j] + gh[n + j]);
            let c = (gi[2 * n + j] + r * gh[2 * n + j]).tanh();
            h[j] = (1.0 - z) * c + z * h[j];
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct GruScratch {
    gi: Vec<f32>,
    gh: Vec<f32>,
}
