/// `y(t) = x(t) - coeff * x(t-1)`, starting from silence.
pub fn preemphasis(signal: &[f32], coeff: f32) -> Vec<f32> {
    let mut prev = 0.0f32;
    signal
        .iter()
        .map(|&x| {
            let y = x - coeff * prev;
            prev = x;
            y
        })
        .collect()
}

/// Inverse of [`preemphasis`]: `y(t) = x(t) + coeff * y(t-1)`.
pub fn deemphasis(signal: &[f32], coeff: f32) -> Vec<f32> {
    let mut prev = 0.0f32;
    signal
        .iter()
        .map(|&x| {
            prev = x + coeff * prev;
            prev
        })
        .collect()
}
