use nolace::config::{ModelConfig, Variant};
use nolace::flops::count_flops;
use nolace::weights::tensor_layout;

/// Multiply-accumulates per second, recounted layer by layer.
fn recount(c: &ModelConfig) -> f64 {
    let (n_f, n_r, n_h, n) = (
        c.n_f as f64,
        c.n_r as f64,
        c.n_h as f64,
        c.frame_size as f64,
    );
    let sub = 16000.0 / n;
    let block = sub / 4.0;
    let mut macs = sub * n_r * n_f
        + block * (n_h * 4.0 * n_r + n_h * 2.0 * n_h + 4.0 * n_h * n_h)
        + sub * 6.0 * n_h * n_h
        + sub * (c.variant.num_latents() - 1) as f64 * 2.0 * n_h * n_h;
    for name in c.variant.comb_stages() {
        let t = c.filter(name).taps as f64;
        macs += sub * ((t + 2.0) * n_h + 1.5 * n * (t + 1.0));
    }
    for (name, i, o) in c.variant.conv_stages() {
        let t = c.filter(name).taps as f64;
        let (i, o) = (*i as f64, *o as f64);
        macs += sub * ((i * o * t + o) * n_h + 1.5 * n * o * i * t);
    }
    for _ in c.variant.shape_stages() {
        let h = n / 4.0;
        macs += sub * (h * 2.0 * (h + 1.0 + n_h) + n * 2.0 * h);
    }
    macs
}

#[test]
fn totals_agree_with_layer_recount() {
    for c in [ModelConfig::lace(), ModelConfig::nolace()] {
        let r = count_flops(&c);
        let macs = 2.0 * recount(&c);
        // the engine count adds activations and normalization on top
        let extra = r.total_flops_per_second - macs;
        assert!(extra > 0.0 && extra < 0.02 * macs, "{}: {extra}", c.variant);
    }
}

#[test]
fn budgets() {
    let nolace = count_flops(&ModelConfig::nolace());
    assert!((450e6..=800e6).contains(&nolace.total_flops_per_second));
    let lace = count_flops(&ModelConfig::lace());
    assert!((200e6..=360e6).contains(&lace.total_flops_per_second));
    assert!((675_000..=1_125_000).contains(&lace.total_params));
}

#[test]
fn itemized_per_stage() {
    let r = count_flops(&ModelConfig::nolace());
    assert_eq!(r.stages.len(), 5 + 5 + 2 + 4 + 3);
    let sum: f64 = r.stages.iter().map(|s| s.flops_per_second).sum();
    assert_eq!(sum, r.total_flops_per_second);
    let params: usize = tensor_layout(&ModelConfig::nolace())
        .iter()
        .map(|t| t.shape.iter().product::<usize>())
        .sum();
    assert_eq!(r.total_params, params);
    assert!(r.table().lines().last().unwrap().starts_with("total"));
}

#[test]
fn grows_with_taps() {
    let a = count_flops(&ModelConfig::nolace().with_taps(15, 15)).total_flops_per_second;
    let b = count_flops(&ModelConfig::nolace().with_taps(31, 31)).total_flops_per_second;
    assert!(b > a);
}

#[test]
fn degenerate_config_costs_nothing() {
    let mut c = ModelConfig::new(Variant::NoLace, 0, 0, 0).with_taps(0, 0);
    c.frame_size = 0;
    assert_eq!(count_flops(&c).total_flops_per_second, 0.0);
}
