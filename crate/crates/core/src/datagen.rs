//! Seedable generation of class-conditional samples with an exact event count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigSpec, EventRate};
use crate::error::{Error, Result};

/// Number of events and total observations in one generated sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub n: usize,
    pub n1: usize,
    /// Nominal event rate; equals `n1 / n` for fixed-event plans.
    pub pi1: f64,
    /// Set when `floor(pi1 * n)` was 0 and `n1` was raised to 1.
    pub clamped: bool,
}

impl SamplingPlan {
    pub fn n0(&self) -> usize {
        self.n - self.n1
    }

    /// Plan with an explicit event count, independent of any nominal rate.
    pub fn fixed_events(n: usize, n1: usize) -> Result<Self> {
        if n1 == 0 {
            return Err(Error::InsufficientEvents { n, pi1: 0.0 });
        }
        if n1 >= n {
            return Err(Error::DegeneratePlan { n, n1 });
        }
        Ok(Self { n, n1, pi1: n1 as f64 / n as f64, clamped: false })
    }
}

pub fn make_plan(n: usize, rate: EventRate, clamp: bool) -> Result<SamplingPlan> {
    if n < 2 {
        return Err(Error::DegeneratePlan { n, n1: 0 });
    }
    let pi1 = rate.pi1();
    let floor = (pi1 * n as f64).floor() as usize;
    let (n1, clamped) = match floor {
        0 if clamp => (1, true),
        0 => return Err(Error::InsufficientEvents { n, pi1 }),
        k => (k, false),
    };
    if n1 >= n {
        return Err(Error::DegeneratePlan { n, n1 });
    }
    Ok(SamplingPlan { n, n1, pi1, clamped })
}

/// Purpose of a random sub-stream within one Monte Carlo iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Val,
    Test,
    Synth,
}

impl Role {
    fn tag(self) -> u64 {
        match self {
            Role::Train => 0x7472_6169_6e00_0001,
            Role::Val => 0x7661_6c00_0000_0002,
            Role::Test => 0x7465_7374_0000_0003,
            Role::Synth => 0x7379_6e74_6800_0004,
        }
    }
}

/// SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// Identifies an independent random sub-stream by `(master_seed, iteration, role)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub iteration: u64,
    pub role: Role,
}

impl RngStream {
    pub fn new(master_seed: u64, iteration: u64, role: Role) -> Self {
        Self { master_seed, iteration, role }
    }

    pub fn seed(&self) -> u64 {
        let mut s = mix64(self.master_seed.wrapping_add(GOLDEN_GAMMA));
        s = mix64(s ^ self.iteration.wrapping_mul(GOLDEN_GAMMA).wrapping_add(GOLDEN_GAMMA));
        mix64(s ^ self.role.tag())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed())
    }
}

/// Inverse-CDF sampler over 1-based bins.
#[derive(Debug, Clone)]
pub struct CategoricalSampler {
    cumulative: Vec<f64>,
}

impl CategoricalSampler {
    pub fn new(dist: &[f64]) -> Self {
        let cumulative = dist
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Self { cumulative }
    }

    /// Bin `k` such that `cum[k-1] <= u < cum[k]`; variates past the last
    /// cumulative sum (rounding) fall into the last bin.
    pub fn bin_for(&self, u: f64) -> u32 {
        let k = self.cumulative.partition_point(|&c| c <= u);
        k.min(self.cumulative.len() - 1) as u32 + 1
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.bin_for(rng.gen::<f64>())
    }
}

pub fn draw_categorical<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> u32 {
    CategoricalSampler::new(dist).sample(rng)
}

/// Row-major matrix of 1-based bin labels with a binary response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    d: usize,
    x: Vec<u32>,
    y: Vec<u8>,
}

impl Sample {
    pub fn new(d: usize, x: Vec<u32>, y: Vec<u8>) -> Result<Self> {
        if x.len() != d * y.len() {
            return Err(Error::LengthMismatch { left: x.len(), right: d * y.len() });
        }
        Ok(Self { d, x, y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.x.chunks_exact(self.d.max(1)).take(self.y.len())
    }

    pub fn responses(&self) -> &[u8] {
        &self.y
    }

    pub fn events(&self) -> usize {
        self.y.iter().filter(|&&y| y == 1).count()
    }
}

/// Draws `plan.n1` event rows followed by `plan.n0()` nonevent rows, each
/// predictor independently from its class conditional.
pub fn generate_sample(config: &ConfigSpec, plan: &SamplingPlan, stream: &RngStream) -> Sample {
    let event: Vec<CategoricalSampler> =
        config.predictors.iter().map(|p| CategoricalSampler::new(&p.p_event)).collect();
    let nonevent: Vec<CategoricalSampler> =
        config.predictors.iter().map(|p| CategoricalSampler::new(&p.p_nonevent)).collect();

    let mut rng = stream.rng();
    let d = config.d();
    let mut x = Vec::with_capacity(plan.n * d);
    let mut y = Vec::with_capacity(plan.n);
    for i in 0..plan.n {
        let (samplers, label) = if i < plan.n1 { (&event, 1) } else { (&nonevent, 0) };
        x.extend(samplers.iter().map(|s| s.sample(&mut rng)));
        y.push(label);
    }
    Sample { d, x, y }
}
