//! Monte Carlo block and bit error estimation for two-stage codes.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::bound_table;
use crate::channels::{parse_descriptor, Channel};
use crate::codec::{encode, llr_table, Decoder, LlrVector};
use crate::construction::{attach_fast_stage_with_margin, build_general, CodeSpec, DEFAULT_FAST_MARGIN};
use crate::error::{invalid, Error, Result};

/// Environment variable overriding the number of simulation workers.
pub const WORKERS_ENV: &str = "UPOLAR_WORKERS";
const WILSON_Z: f64 = 1.959963984540054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub b: usize,
    pub g: usize,
    pub m: usize,
    pub delta: f64,
    pub margin: f64,
    pub channel: String,
    pub trials: u64,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 2,
            k: 4,
            b: 1,
            g: 1,
            m: 4,
            delta: 0.2,
            margin: DEFAULT_FAST_MARGIN,
            channel: "bsc:0.05".into(),
            trials: 1000,
            seed: 1,
            output: None,
        }
    }
}

/// Erasure level left for the fast stage after `n` slow levels, when every
/// channel use has capacity at least `capacity`.
pub fn design_delta(capacity: f64, n: usize) -> Result<f64> {
    let rows = bound_table(capacity, n)?;
    Ok((1.0 - rows[n].lower).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
}

impl SimConfig {
    /// Parses `key = value` lines. Blank lines and `#` comments are skipped.
    /// `design_capacity = c` may replace `delta`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut design_capacity = None;
        let mut have_delta = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: line_no, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let int = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| err(format!("bad integer for {key}: '{v}'")))
            };
            let real = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| err(format!("bad number for {key}: '{v}'")))
            };
            let wide = |v: &str| {
                v.parse::<u64>()
                    .map_err(|_| err(format!("bad integer for {key}: '{v}'")))
            };
            match key {
                "n" => cfg.n = int(value)?,
                "K" | "k" => cfg.k = int(value)?,
                "b" => cfg.b = int(value)?,
                "g" => cfg.g = int(value)?,
                "m" => cfg.m = int(value)?,
                "delta" => {
                    cfg.delta = real(value)?;
                    have_delta = true;
                }
                "design_capacity" => design_capacity = Some(real(value)?),
                "margin" => cfg.margin = real(value)?,
                "channel" => cfg.channel = value.to_string(),
                "trials" => cfg.trials = wide(value)?,
                "seed" => cfg.seed = wide(value)?,
                "output" => cfg.output = Some(PathBuf::from(value)),
                _ => return Err(err(format!("unknown key '{key}'"))),
            }
        }
        if let Some(c) = design_capacity {
            if have_delta {
                return invalid("give either delta or design_capacity, not both");
            }
            cfg.delta = design_delta(c, cfg.n)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "n = {}\nK = {}\nb = {}\ng = {}\nm = {}\ndelta = {}\nmargin = {}\nchannel = {}\ntrials = {}\nseed = {}\n",
            self.n, self.k, self.b, self.g, self.m, self.delta, self.margin, self.channel, self.trials, self.seed
        );
        if let Some(o) = &self.output {
            s.push_str(&format!("output = {}\n", o.display()));
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return invalid("trials must be at least 1");
        }
        parse_descriptor::<f64>(&self.channel)?;
        Ok(())
    }

    pub fn code_spec(&self) -> Result<CodeSpec> {
        let plan = build_general(self.b, self.g, self.n, self.k)?;
        attach_fast_stage_with_margin(&plan, self.m, self.delta, self.margin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub channel: String,
    pub seed: u64,
    pub trials: u64,
    pub block_errors: u64,
    pub bit_errors: u64,
    pub info_bits_per_block: usize,
    pub bler: f64,
    pub ber: f64,
    /// Half-width of the 95% Wilson interval for `bler`.
    pub wilson_halfwidth: f64,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl SimResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

/// 95% Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (k, n) = (k as f64, n as f64);
    let z2 = WILSON_Z * WILSON_Z;
    let p = k / n;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if k == 0.0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Samples outputs of a channel for either input.
struct Sampler {
    cdf: [Vec<f64>; 2],
    llr: Vec<f64>,
}

impl Sampler {
    fn new(w: &Channel<f64>) -> Self {
        let cum = |pick: fn(&crate::channels::OutputSymbol<f64>) -> f64| {
            let mut acc = 0.0;
            w.outputs()
                .iter()
                .map(|o| {
                    acc += pick(o);
                    acc
                })
                .collect::<Vec<_>>()
        };
        Self {
            cdf: [cum(|o| o.p0), cum(|o| o.p1)],
            llr: llr_table(w),
        }
    }

    fn sample<R: Rng>(&self, x: u8, rng: &mut R) -> f64 {
        let cdf = &self.cdf[x as usize];
        let u = rng.gen::<f64>() * cdf[cdf.len() - 1];
        let y = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        self.llr[y]
    }
}

fn worker_count() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&w| w > 0)
}

/// Transmits `trials` uniformly random messages and counts decoding errors.
/// Trial `t` draws from its own stream of the seeded generator, so results
/// do not depend on the number of workers.
pub fn run_code(spec: &CodeSpec, w: &Channel<f64>, trials: u64, seed: u64) -> Result<(u64, u64)> {
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    let sampler = Sampler::new(w);
    let k = spec.info_len();
    let run = || {
        (0..trials)
            .into_par_iter()
            .map_init(
                || Decoder::new(spec),
                |dec, t| -> Result<(u64, u64)> {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(t);
                    let info: Vec<u8> = (0..k).map(|_| rng.gen::<bool>() as u8).collect();
                    let cw = encode(spec, &info)?;
                    let llrs = LlrVector {
                        values: cw.bits.iter().map(|&x| sampler.sample(x, &mut rng)).collect(),
                    };
                    let mut out = dec.decode(&llrs)?;
                    let bits = out.bit_errors(&info) as u64;
                    Ok((u64::from(!out.compare(&info)), bits))
                },
            )
            .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))
    };
    match worker_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?
            .install(run),
        None => run(),
    }
}

pub fn run_mc(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let start = Instant::now();
    let spec = config.code_spec()?;
    let w = parse_descriptor::<f64>(&config.channel)?;
    let (block_errors, bit_errors) = run_code(&spec, &w, config.trials, config.seed)?;
    let (lo, hi) = wilson_interval(block_errors, config.trials);
    let info = spec.info_len();
    let result = SimResult {
        channel: config.channel.clone(),
        seed: config.seed,
        trials: config.trials,
        block_errors,
        bit_errors,
        info_bits_per_block: info,
        bler: block_errors as f64 / config.trials as f64,
        ber: if info == 0 {
            0.0
        } else {
            bit_errors as f64 / (config.trials as f64 * info as f64)
        },
        wilson_halfwidth: 0.5 * (hi - lo),
        wall_time: start.elapsed(),
    };
    if let Some(path) = &config.output {
        result.save(path)?;
    }
    Ok(result)
}
