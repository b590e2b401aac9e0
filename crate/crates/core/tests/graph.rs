mod common;

use common::*;
use nolace::codec_sim::{degrade, extract_features, DegradationProfile};
use nolace::config::{ModelConfig, Variant};
use nolace::ddsp::{preemphasis, PREEMPHASIS};
use nolace::graph::{latent_map, Model};
use nolace::{Error, ModelWeights};
use proptest::prelude::*;
use rand::Rng;

fn speechlike(r: &mut rand_chacha::ChaCha8Rng, len: usize) -> Vec<f32> {
    let f0 = r.gen_range(100.0f32..250.0);
    (0..len)
        .map(|t| {
            let ph = 2.0 * std::f32::consts::PI * f0 * t as f32 / 16000.0;
            let env = 0.5 + 0.5 * (t as f32 / 1600.0).sin();
            env * (0.3 * ph.sin() + 0.15 * (2.0 * ph).sin() + 0.05 * (3.0 * ph).sin())
        })
        .collect()
}

#[test]
fn nolace_matches_oracle_on_degraded_speech() {
    let mut r = rng(31);
    let x = speechlike(&mut r, 16000);
    let profile = DegradationProfile::default();
    let y = degrade(&x, &profile, 4).unwrap();
    let frames = extract_features(&x, &y, &profile).unwrap();
    assert!(frames.iter().any(|f| f.pitch_lag > 0));
    let w = ModelWeights::random(&ModelConfig::nolace(), 8);
    let model = Model::from_weights(&w).unwrap();
    let input = preemphasis(&y, PREEMPHASIS);
    let got = model.enhance_stream(&input, &frames).unwrap();
    let want = ref_graph(&w, &to64(&input), &frames);
    let e = rel_err(&got, &want);
    assert!(e < 1e-5, "{e}");
}

#[test]
fn lace_matches_oracle() {
    let mut r = rng(32);
    let w = ModelWeights::random(&ModelConfig::lace(), 9);
    let model = Model::from_weights(&w).unwrap();
    let frames = random_frames(&mut r, 93, 40);
    let x = random_signal(&mut r, 40 * N);
    let got = model.enhance_stream(&x, &frames).unwrap();
    assert!(rel_err(&got, &ref_graph(&w, &to64(&x), &frames)) < 1e-5);
}

#[test]
fn identity_weights_pass_signal_through() {
    let mut r = rng(33);
    let model = Model::from_weights(&ModelWeights::identity(&ModelConfig::nolace())).unwrap();
    let frames = random_frames(&mut r, 93, 40);
    let x = random_signal(&mut r, 40 * N);
    let y = model.enhance_stream(&x, &frames).unwrap();
    let err = x
        .iter()
        .zip(&y)
        .fold(0.0f32, |m, (a, b)| m.max((a - b).abs()));
    assert!(err <= 1e-6, "{err}");
}

#[test]
fn partial_block_is_padded_and_truncated() {
    let mut r = rng(34);
    let w = ModelWeights::random(&ModelConfig::lace(), 1);
    let model = Model::from_weights(&w).unwrap();
    let frames = random_frames(&mut r, 93, 7);
    let x = random_signal(&mut r, 7 * N);
    let y = model.enhance_stream(&x, &frames).unwrap();
    assert_eq!(y.len(), x.len());
    let mut padded_frames = frames.clone();
    padded_frames.push(nolace::FeatureFrame::zeros(93));
    let mut padded = x.clone();
    padded.resize(8 * N, 0.0);
    assert_eq!(
        &model.enhance_stream(&padded, &padded_frames).unwrap()[..7 * N],
        &y[..]
    );
}

#[test]
fn mismatched_lengths_are_rejected() {
    let w = ModelWeights::random(&ModelConfig::lace(), 1);
    let model = Model::from_weights(&w).unwrap();
    let frames = random_frames(&mut rng(1), 93, 4);
    assert!(matches!(
        model.enhance_stream(&[0.0; 100], &frames),
        Err(Error::Contract(_))
    ));
    let mut st = model.new_state();
    assert!(model
        .enhance_block(&[0.0; 4 * N], &frames[..3], &mut st)
        .is_err());
    assert!(model
        .enhance_block(&[0.0; 3 * N], &frames, &mut st)
        .is_err());
}

#[test]
fn state_from_other_model_is_rejected() {
    let a = Model::from_weights(&ModelWeights::random(&ModelConfig::lace(), 1)).unwrap();
    let b = Model::from_weights(&ModelWeights::random(&ModelConfig::nolace(), 1)).unwrap();
    let frames = random_frames(&mut rng(1), 93, 4);
    let mut st = b.new_state();
    assert!(a.enhance_block(&[0.0; 4 * N], &frames, &mut st).is_err());
}

#[test]
fn invalid_weights_are_refused() {
    let mut w = ModelWeights::random(&ModelConfig::lace(), 1);
    w.tensor_mut("adaconv1.w_gain").data[0] = f32::INFINITY;
    assert!(matches!(Model::from_weights(&w), Err(Error::Validation(_))));
}

#[test]
fn reset_restores_fresh_state() {
    let mut r = rng(35);
    let model = Model::from_weights(&ModelWeights::random(&ModelConfig::nolace(), 2)).unwrap();
    let frames = random_frames(&mut r, 93, 8);
    let x = random_signal(&mut r, 8 * N);
    let mut st = model.new_state();
    let first = model.process(&x, &frames, &mut st).unwrap();
    assert_ne!(st, model.new_state());
    st.reset();
    assert_eq!(st, model.new_state());
    assert_eq!(model.process(&x, &frames, &mut st).unwrap(), first);
}

#[test]
fn latent_map_covers_every_stage() {
    for v in [Variant::Lace, Variant::NoLace] {
        let map = latent_map(v);
        let stages: Vec<&str> = map.iter().map(|(s, _)| *s).collect();
        for s in v.comb_stages().iter().chain(v.shape_stages()) {
            assert!(stages.contains(s));
        }
        for (s, _, _) in v.conv_stages() {
            assert!(stages.contains(s));
        }
        assert!(map.iter().all(|(_, k)| *k >= 1 && *k <= v.num_latents()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn small_models_match_oracle(seed in any::<u64>(), nolace in any::<bool>(), blocks in 1usize..5) {
        let mut r = rng(seed);
        let variant = if nolace { Variant::NoLace } else { Variant::Lace };
        let config = random_config(&mut r, variant);
        let w = ModelWeights::random(&config, seed);
        let model = Model::from_weights(&w).unwrap();
        let frames = random_frames(&mut r, config.n_f, 4 * blocks);
        let x = random_signal(&mut r, 4 * blocks * N);
        let got = model.enhance_stream(&x, &frames).unwrap();
        let want = ref_graph(&w, &to64(&x), &frames);
        prop_assert!(rel_err(&got, &want) < 1e-5);
    }

    #[test]
    fn chunked_equals_whole(seed in any::<u64>(), blocks in 1usize..6, chunk in 1usize..4) {
        let mut r = rng(seed);
        let config = random_config(&mut r, Variant::NoLace);
        let model = Model::from_weights(&ModelWeights::random(&config, seed)).unwrap();
        let frames = random_frames(&mut r, config.n_f, 4 * blocks);
        let x = random_signal(&mut r, 4 * blocks * N);
        let whole = model.enhance_stream(&x, &frames).unwrap();
        let mut st = model.new_state();
        let mut out = Vec::new();
        for (xs, fs) in x.chunks(4 * chunk * N).zip(frames.chunks(4 * chunk)) {
            out.extend(model.process(xs, fs, &mut st).unwrap());
        }
        prop_assert_eq!(out, whole);
        prop_assert_eq!(st.samples_processed, x.len() as u64);
    }

    #[test]
    fn future_input_never_changes_past(seed in any::<u64>(), blocks in 2usize..6) {
        let mut r = rng(seed);
        let config = random_config(&mut r, Variant::NoLace);
        let model = Model::from_weights(&ModelWeights::random(&config, seed)).unwrap();
        let frames = random_frames(&mut r, config.n_f, 4 * blocks);
        let x = random_signal(&mut r, 4 * blocks * N);
        let k = r.gen_range(1..blocks);
        let mut x2 = x.clone();
        let mut f2 = frames.clone();
        for v in &mut x2[4 * k * N..] {
            *v = r.gen_range(-3.0f32..3.0);
        }
        for f in &mut f2[4 * k..] {
            *f = random_frames(&mut r, config.n_f, 1).remove(0);
        }
        let a = model.enhance_stream(&x, &frames).unwrap();
        let b = model.enhance_stream(&x2, &f2).unwrap();
        prop_assert_eq!(&a[..4 * k * N], &b[..4 * k * N]);
    }
}
