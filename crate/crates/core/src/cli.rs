//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation or parity failure, 2 usage or input
//! error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec_sim::{degrade, extract_features, Bitrate, DegradationProfile};
use crate::config::{ModelConfig, Variant, BLOCK_SUBFRAMES, DEFAULT_TAPS, SAMPLE_RATE};
use crate::ddsp::{deemphasis, preemphasis, FRAME_SIZE, PREEMPHASIS};
use crate::error::{Error, Result};
use crate::flops::count_flops;
use crate::graph::Model;
use crate::weights::{
    load_features, load_vectors, save_features, save_vectors, validate, ModelWeights, TestVector,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "nolace",
    version,
    about = "Adaptive-DSP speech codec enhancement"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enhance a 16 kHz mono 16-bit WAV file.
    Enhance {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Feature file matching the input.
        #[arg(
            long,
            conflicts_with = "simulate",
            required_unless_present = "simulate"
        )]
        features: Option<PathBuf>,
        /// Derive features from the input itself with the codec simulator.
        #[arg(long)]
        simulate: bool,
        #[arg(long, default_value = "9")]
        bitrate: Bitrate,
    },
    /// Add simulated coding noise to a WAV file.
    Degrade {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the conditioning features for the degraded file.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Compute conditioning features from a clean/degraded WAV pair.
    Features {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        degraded: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value = "9")]
        bitrate: Bitrate,
    },
    /// Print the per-stage complexity of a model or configuration.
    Flops {
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        json: bool,
    },
    /// Check a weights file; prints a JSON report.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Write test vectors produced by this engine for a model.
    GenVectors {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Subframes per vector; rounded up to whole 20 ms blocks.
        #[arg(long, default_value_t = 40)]
        frames: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare engine output against stored test vectors.
    Parity {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        vectors: PathBuf,
    },
    /// Write an identity or seeded random weights file.
    Init {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = InitKind::Random)]
        kind: InitKind,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitKind {
    Identity,
    Random,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    #[arg(long, default_value = "nolace")]
    pub variant: Variant,
    #[arg(long, default_value_t = 93)]
    pub n_f: usize,
    #[arg(long, default_value_t = 96)]
    pub n_r: usize,
    #[arg(long, default_value_t = 256)]
    pub n_h: usize,
    #[arg(long, default_value_t = DEFAULT_TAPS)]
    pub comb_taps: usize,
    #[arg(long, default_value_t = DEFAULT_TAPS)]
    pub conv_taps: usize,
}

impl ConfigArgs {
    pub fn to_config(&self) -> Result<ModelConfig> {
        let c = ModelConfig::new(self.variant, self.n_f, self.n_r, self.n_h)
            .with_taps(self.comb_taps, self.conv_taps);
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProfileArgs {
    #[arg(long, default_value_t = 0.7)]
    pub noise_shaping: f32,
    #[arg(long, default_value_t = 0.5)]
    pub tilt: f32,
    #[arg(long, default_value_t = 0.3)]
    pub quant_noise: f32,
    #[arg(long, default_value = "9")]
    pub bitrate: Bitrate,
}

impl ProfileArgs {
    pub fn profile(&self) -> DegradationProfile {
        DegradationProfile {
            noise_shaping: self.noise_shaping,
            spectral_tilt: self.tilt,
            quant_noise: self.quant_noise,
            bitrate: self.bitrate,
        }
    }
}

/// Reads a 16-bit PCM mono 16 kHz WAV file as samples in [-1, 1).
pub fn read_wav(path: &Path) -> Result<Vec<f32>> {
    let reader = hound::WavReader::open(path)
        .map_err(|e| Error::Audio(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Audio(format!(
            "{}: expected mono, found {} channels",
            path.display(),
            spec.channels
        )));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::Audio(format!(
            "{}: expected {SAMPLE_RATE} Hz, found {} Hz",
            path.display(),
            spec.sample_rate
        )));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Audio(format!(
            "{}: expected 16-bit PCM, found {} bits {:?}",
            path.display(),
            spec.bits_per_sample,
            spec.sample_format
        )));
    }
    reader
        .into_samples::<i16>()
        .map(|s| {
            s.map(|v| v as f32 / 32768.0)
                .map_err(|e| Error::Audio(format!("{}: {e}", path.display())))
        })
        .collect()
}

pub fn write_wav(path: &Path, samples: &[f32]) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let audio = |e: hound::Error| Error::Audio(format!("{}: {e}", path.display()));
    let mut w = hound::WavWriter::create(path, spec).map_err(audio)?;
    for s in samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        w.write_sample(v).map_err(audio)?;
    }
    w.finalize().map_err(audio)
}

pub fn load_model(path: &Path) -> Result<Model> {
    Model::from_weights(&ModelWeights::load(path)?)
}

/// Where `enhance` gets its conditioning features.
#[derive(Debug, Clone)]
pub enum FeatureSource {
    File(PathBuf),
    Simulate(Bitrate),
}

fn frames_for(len: usize) -> usize {
    len.div_ceil(FRAME_SIZE)
}

/// Pre-emphasis, streaming enhancement and de-emphasis of a WAV file. The
/// output has the same length as the input.
pub fn cmd_enhance(
    model: &Model,
    input: &Path,
    source: &FeatureSource,
    output: &Path,
) -> Result<()> {
    let x = read_wav(input)?;
    let n_frames = frames_for(x.len());
    let features = match source {
        FeatureSource::File(p) => load_features(p)?,
        FeatureSource::Simulate(bitrate) => {
            extract_features(&x, &x, &DegradationProfile::clean(*bitrate))?
        }
    };
    if features.len() != n_frames {
        return Err(Error::contract(format!(
            "feature file has {} frames, input needs {}",
            features.len(),
            n_frames
        )));
    }
    let mut padded = preemphasis(&x, PREEMPHASIS);
    padded.resize(n_frames * FRAME_SIZE, 0.0);
    let mut y = model.enhance_stream(&padded, &features)?;
    y.truncate(x.len());
    write_wav(output, &deemphasis(&y, PREEMPHASIS))
}

/// Harmonic test signal with a slowly gliding pitch and a noise floor.
fn synth_speechlike(rng: &mut ChaCha8Rng, len: usize) -> Vec<f32> {
    let f0_start: f32 = rng.gen_range(90.0..300.0);
    let f0_end: f32 = rng.gen_range(90.0..300.0);
    let harmonics = rng.gen_range(3..10);
    let amps: Vec<f32> = (0..harmonics)
        .map(|h| rng.gen_range(0.2..1.0) / (h + 1) as f32)
        .collect();
    let mut phase = 0.0f32;
    (0..len)
        .map(|t| {
            let f0 = f0_start + (f0_end - f0_start) * t as f32 / len.max(1) as f32;
            phase += 2.0 * std::f32::consts::PI * f0 / SAMPLE_RATE as f32;
            let voiced: f32 = amps
                .iter()
                .enumerate()
                .map(|(h, a)| a * ((h + 1) as f32 * phase).sin())
                .sum();
            0.2 * voiced + 0.01 * rng.gen_range(-1.0f32..1.0)
        })
        .collect()
}

/// Seeded test vectors in the pre-emphasized domain.
pub fn generate_vectors(
    model: &Model,
    count: usize,
    frames: usize,
    tolerance: f32,
    seed: u64,
) -> Result<Vec<TestVector>> {
    let frames = frames.div_ceil(BLOCK_SUBFRAMES).max(1) * BLOCK_SUBFRAMES;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x = synth_speechlike(&mut rng, frames * FRAME_SIZE);
            let profile = DegradationProfile {
                bitrate: Bitrate::ALL[rng.gen_range(0..4)],
                ..Default::default()
            };
            let y = degrade(&x, &profile, rng.gen())?;
            let mut features = extract_features(&x, &y, &profile)?;
            for f in &mut features {
                f.features.resize(model.config.n_f, 0.0);
            }
            let input = preemphasis(&y, PREEMPHASIS);
            let expected = model.enhance_stream(&input, &features)?;
            Ok(TestVector {
                input,
                features,
                expected,
                tolerance,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParityResult {
    pub rms_error: f32,
    pub tolerance: f32,
}

impl ParityResult {
    pub fn passed(&self) -> bool {
        self.rms_error <= self.tolerance
    }
}

pub fn check_parity(model: &Model, vectors: &[TestVector]) -> Result<Vec<ParityResult>> {
    vectors
        .iter()
        .map(|v| {
            v.check_lengths()?;
            let out = model.enhance_stream(&v.input, &v.features)?;
            let sq: f64 = out
                .iter()
                .zip(&v.expected)
                .map(|(a, b)| ((a - b) as f64).powi(2))
                .sum();
            let rms_error = (sq / out.len().max(1) as f64).sqrt() as f32;
            Ok(ParityResult {
                rms_error: if rms_error.is_nan() {
                    f32::INFINITY
                } else {
                    rms_error
                },
                tolerance: v.tolerance,
            })
        })
        .collect()
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Validation(_) => EXIT_FAILURE,
                _ => EXIT_USAGE,
            }
        }
    }
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Enhance {
            model,
            input,
            output,
            features,
            simulate,
            bitrate,
        } => {
            let model = load_model(&model)?;
            let source = match (features, simulate) {
                (Some(p), false) => FeatureSource::File(p),
                _ => FeatureSource::Simulate(bitrate),
            };
            cmd_enhance(&model, &input, &source, &output)?;
            Ok(EXIT_OK)
        }
        Command::Degrade {
            input,
            output,
            profile,
            seed,
            features,
        } => {
            let x = read_wav(&input)?;
            let p = profile.profile();
            write_wav(&output, &degrade(&x, &p, seed)?)?;
            if let Some(path) = features {
                let y = read_wav(&output)?;
                save_features(&extract_features(&x, &y, &p)?, path)?;
            }
            Ok(EXIT_OK)
        }
        Command::Features {
            clean,
            degraded,
            output,
            bitrate,
        } => {
            let x = read_wav(&clean)?;
            let y = read_wav(&degraded)?;
            let p = DegradationProfile::clean(bitrate);
            save_features(&extract_features(&x, &y, &p)?, output)?;
            Ok(EXIT_OK)
        }
        Command::Flops {
            model,
            config,
            json,
        } => {
            let config = match model {
                Some(p) => ModelWeights::load(p)?.config,
                None => config.to_config()?,
            };
            let report = count_flops(&config);
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report).expect("report serializes")
                );
            } else {
                print!("{}", report.table());
            }
            Ok(EXIT_OK)
        }
        Command::Validate { model } => {
            let weights = ModelWeights::load(model)?;
            let report = validate(&weights, &weights.config);
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            Ok(if report.is_ok() {
                EXIT_OK
            } else {
                EXIT_FAILURE
            })
        }
        Command::GenVectors {
            model,
            output,
            count,
            frames,
            tolerance,
            seed,
        } => {
            let model = load_model(&model)?;
            save_vectors(
                &generate_vectors(&model, count, frames, tolerance, seed)?,
                output,
            )?;
            Ok(EXIT_OK)
        }
        Command::Parity { model, vectors } => {
            let model = load_model(&model)?;
            let vectors = load_vectors(vectors)?;
            let results = check_parity(&model, &vectors)?;
            let mut failed = 0;
            for (i, r) in results.iter().enumerate() {
                let verdict = if r.passed() { "ok" } else { "FAIL" };
                println!(
                    "vector {i}: rms {:.3e} tol {:.3e} {verdict}",
                    r.rms_error, r.tolerance
                );
                failed += usize::from(!r.passed());
            }
            println!(
                "{} of {} vectors passed",
                results.len() - failed,
                results.len()
            );
            Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Init {
            output,
            kind,
            config,
            seed,
        } => {
            let config = config.to_config()?;
            let weights = match kind {
                InitKind::Identity => ModelWeights::identity(&config),
                InitKind::Random => ModelWeights::random(&config, seed),
            };
            weights.save(output)?;
            Ok(EXIT_OK)
        }
    }
}
