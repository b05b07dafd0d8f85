//! Stochastic contexts and noisy linear rewards.
//!
//! Every random quantity is drawn from a generator keyed by
//! `(seed, domain, index)`. Contexts for round `t` therefore depend only on
//! the seed and `t` (and the arm's position within the round), never on what
//! a learner did earlier, so two learners run with the same seed see
//! identical context sequences.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, RngCore, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::bandit::{BanditInstance, ContextSet};
use crate::error::{Error, Result};
use crate::vector::dot;

/// The generator behind every stream.
pub type StreamRng = SplitMix64;

/// Independent sub-streams of one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamDomain {
    Context = 0x01,
    Noise = 0x02,
    ArmChoice = 0x03,
    Parameter = 0x04,
    Audit = 0x05,
    MonteCarlo = 0x06,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Output `i` (0-based) of SplitMix64 started from state `key`.
#[inline]
fn splitmix_output(key: u64, i: u64) -> u64 {
    splitmix64(key.wrapping_add(i.wrapping_mul(GOLDEN_GAMMA)))
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based access to reproducible random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    seed: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Seed of position `index` of `domain`.
    #[inline]
    pub fn key(&self, domain: StreamDomain, index: u64) -> u64 {
        splitmix64(splitmix64(self.seed ^ ((domain as u64) << 56)) ^ index)
    }

    /// Generator for position `index` of `domain`.
    #[inline]
    pub fn rng(&self, domain: StreamDomain, index: u64) -> StreamRng {
        StreamRng::seed_from_u64(self.key(domain, index))
    }
}

/// Shape of the context distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextKind {
    /// Coordinates i.i.d. `Uniform[-c/√d, c/√d]`; covariance `c²/(3d) I`.
    UniformBox,
    /// Coordinates i.i.d. uniform on `{-c/√d, +c/√d}`; covariance `c²/d I`.
    /// A zero-mean bounded law other than the uniform box, for audits.
    SignedBox,
}

/// The i.i.d. law contexts are drawn from, with its declared covariance floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextLaw {
    kind: ContextKind,
    scale: f64,
    dim: usize,
    declared_rho_min: f64,
}

impl ContextLaw {
    pub fn new(kind: ContextKind, dim: usize, scale: f64, declared_rho_min: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("d", "dimension must be positive"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::config("c", "context scale must be positive"));
        }
        if !(declared_rho_min > 0.0 && declared_rho_min.is_finite()) {
            return Err(Error::config("rho_min", "declared covariance floor must be positive"));
        }
        Ok(Self {
            kind,
            scale,
            dim,
            declared_rho_min,
        })
    }

    /// Uniform box law declaring its exact floor `c²/(3d)`.
    pub fn uniform_box(dim: usize, scale: f64) -> Result<Self> {
        let floor = scale * scale / (3.0 * dim.max(1) as f64);
        Self::new(ContextKind::UniformBox, dim, scale, floor)
    }

    pub fn with_declared_rho_min(mut self, rho_min: f64) -> Result<Self> {
        if !(rho_min > 0.0 && rho_min.is_finite()) {
            return Err(Error::config("rho_min", "declared covariance floor must be positive"));
        }
        self.declared_rho_min = rho_min;
        Ok(self)
    }

    pub fn kind(&self) -> ContextKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn declared_rho_min(&self) -> f64 {
        self.declared_rho_min
    }

    pub fn coordinate_bound(&self) -> f64 {
        self.scale / (self.dim as f64).sqrt()
    }

    /// The exact minimum eigenvalue of the law's second-moment matrix.
    pub fn true_rho_min(&self) -> f64 {
        let a = self.coordinate_bound();
        match self.kind {
            ContextKind::UniformBox => a * a / 3.0,
            ContextKind::SignedBox => a * a,
        }
    }

    /// Fills `out` with independent coordinates drawn with the generator `rng`.
    #[inline]
    pub fn sample_into<R: RngCore>(&self, rng: &mut R, out: &mut [f64]) {
        self.fill_keyed(rng.next_u64(), out);
    }

    /// Fills `out` from the SplitMix64 stream seeded with `key`. Output `i`
    /// of that stream is a pure function of `(key, i)`, so the loop has no
    /// carried state and vectorises.
    #[inline]
    pub fn fill_keyed(&self, key: u64, out: &mut [f64]) {
        let a = self.coordinate_bound();
        match self.kind {
            ContextKind::UniformBox => {
                // Two coordinates per draw, each on a symmetric 2⁻³¹ grid inside (-1, 1):
                // output i feeds coordinate i from its high half and i + n/2 from its low half.
                let scale = a * 2f64.powi(-31);
                let half = out.len() / 2;
                let (hi, lo) = out.split_at_mut(half);
                for (i, (h, l)) in hi.iter_mut().zip(lo.iter_mut()).enumerate() {
                    let bits = splitmix_output(key, i as u64);
                    *h = scale * ((bits >> 32) as i64 as f64 - 2_147_483_647.5);
                    *l = scale * ((bits & 0xFFFF_FFFF) as i64 as f64 - 2_147_483_647.5);
                }
                if lo.len() > half {
                    let bits = splitmix_output(key, half as u64);
                    lo[half] = scale * ((bits >> 32) as i64 as f64 - 2_147_483_647.5);
                }
            }
            ContextKind::SignedBox => {
                for (i, v) in out.iter_mut().enumerate() {
                    let bits = splitmix_output(key, (i / 64) as u64);
                    *v = if (bits >> (i % 64)) & 1 == 1 { a } else { -a };
                }
            }
        }
    }
}

/// Shape of the reward noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Gaussian,
    /// `Uniform[-σ, σ]`, which is σ-sub-Gaussian.
    BoundedUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseLaw {
    kind: NoiseKind,
    sigma: f64,
}

impl NoiseLaw {
    pub fn new(kind: NoiseKind, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::config("sigma", "must be finite and nonnegative"));
        }
        Ok(Self { kind, sigma })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(NoiseKind::Gaussian, sigma)
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    #[inline]
    pub fn sample<R: RngCore>(&self, rng: &mut R) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        match self.kind {
            NoiseKind::Gaussian => {
                let z: f64 = rng.sample(StandardNormal);
                self.sigma * z
            }
            NoiseKind::BoundedUniform => {
                let u: f64 = rng.random();
                self.sigma * (2.0 * u - 1.0)
            }
        }
    }
}

/// Draws `K` independent contexts from `law`.
pub fn sample_context_set<R: RngCore>(law: &ContextLaw, num_arms: usize, rng: &mut R) -> Result<ContextSet> {
    if num_arms < 2 {
        return Err(Error::config("k", "need at least two arms"));
    }
    let mut ctx = ContextSet::zeros(num_arms, law.dim());
    law.sample_into(rng, ctx.data_mut());
    Ok(ctx)
}

/// Noisy reward `⟨β_chosen, θ*⟩ + ξ`.
pub fn draw_reward<R: RngCore>(
    instance: &BanditInstance,
    ctx: &ContextSet,
    chosen: usize,
    noise: &NoiseLaw,
    rng: &mut R,
) -> Result<f64> {
    if ctx.dim() != instance.dim() {
        return Err(Error::DimensionMismatch {
            expected: instance.dim(),
            found: ctx.dim(),
        });
    }
    if chosen >= ctx.num_arms() {
        return Err(Error::ArmOutOfRange {
            arm: chosen,
            num_arms: ctx.num_arms(),
        });
    }
    Ok(dot(ctx.row(chosen), instance.theta_star()) + noise.sample(rng))
}

/// A parameter with the given norm and a uniformly random direction.
pub fn random_parameter<R: RngCore>(dim: usize, target_norm: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = crate::vector::norm(&v);
        if n > 1e-12 {
            // Keep the result inside the unit ball despite rounding.
            let scale = target_norm / n * (1.0 - 1e-15);
            return v.into_iter().map(|x| x * scale).collect();
        }
    }
}

/// Outcome of [`covariance_floor_audit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceAudit {
    pub empirical_floor: f64,
    pub declared_floor: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Fraction of the declared floor the empirical floor must reach.
pub const AUDIT_PASS_FRACTION: f64 = 0.8;

/// Estimates `λ_min((1/n) Σ ββᵀ)` over `n` draws and compares it with the
/// declared floor.
pub fn covariance_floor_audit<R: RngCore>(law: &ContextLaw, n: usize, rng: &mut R) -> Result<CovarianceAudit> {
    let d = law.dim();
    let min = 10 * d * d;
    if n < min {
        return Err(Error::SampleSize { n, min });
    }
    let mut moment = vec![0.0; d * d];
    let mut beta = vec![0.0; d];
    for _ in 0..n {
        law.sample_into(rng, &mut beta);
        for i in 0..d {
            let bi = beta[i];
            let row = &mut moment[i * d..(i + 1) * d];
            for (m, bj) in row.iter_mut().zip(&beta) {
                *m += bi * bj;
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    let matrix = DMatrix::from_row_slice(d, d, &moment) * inv_n;
    let eigen = SymmetricEigen::new(matrix);
    let empirical_floor = eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let declared_floor = law.declared_rho_min();
    Ok(CovarianceAudit {
        empirical_floor,
        declared_floor,
        samples: n,
        pass: empirical_floor >= AUDIT_PASS_FRACTION * declared_floor,
    })
}

/// A bandit instance bound to its context law, noise law and seed.
#[derive(Debug, Clone)]
pub struct Environment {
    instance: BanditInstance,
    law: ContextLaw,
    noise: NoiseLaw,
    streams: SeedStream,
}

impl Environment {
    pub fn new(instance: BanditInstance, law: ContextLaw, noise: NoiseLaw, seed: u64) -> Result<Self> {
        if law.dim() != instance.dim() {
            return Err(Error::DimensionMismatch {
                expected: instance.dim(),
                found: law.dim(),
            });
        }
        if instance.num_arms() < 2 {
            return Err(Error::config("k", "need at least two arms"));
        }
        Ok(Self {
            instance,
            law,
            noise,
            streams: SeedStream::new(seed),
        })
    }

    pub fn instance(&self) -> &BanditInstance {
        &self.instance
    }

    pub fn law(&self) -> &ContextLaw {
        &self.law
    }

    pub fn noise(&self) -> &NoiseLaw {
        &self.noise
    }

    pub fn streams(&self) -> SeedStream {
        self.streams
    }

    pub fn dim(&self) -> usize {
        self.instance.dim()
    }

    pub fn num_arms(&self) -> usize {
        self.instance.num_arms()
    }

    /// Same instance and laws under another seed.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self {
            streams: SeedStream::new(seed),
            ..self.clone()
        }
    }

    /// Contexts of global round `t` (1-based), written into `ctx`.
    #[inline]
    pub fn fill_contexts(&self, t: u64, ctx: &mut ContextSet) {
        debug_assert_eq!(ctx.dim(), self.dim());
        debug_assert_eq!(ctx.num_arms(), self.num_arms());
        self.law.fill_keyed(self.streams.key(StreamDomain::Context, t), ctx.data_mut());
        ctx.set_round(t);
    }

    pub fn contexts(&self, t: u64) -> ContextSet {
        let mut ctx = ContextSet::zeros(self.num_arms(), self.dim());
        self.fill_contexts(t, &mut ctx);
        ctx
    }

    /// Noise added to whichever arm is pulled in round `t`.
    #[inline]
    pub fn noise_at(&self, t: u64) -> f64 {
        let mut rng = self.streams.rng(StreamDomain::Noise, t);
        self.noise.sample(&mut rng)
    }

    /// Observed reward for pulling `arm` in round `t` with contexts `ctx`.
    #[inline]
    pub fn reward(&self, ctx: &ContextSet, arm: usize, t: u64) -> f64 {
        dot(ctx.row(arm), self.instance.theta_star()) + self.noise_at(t)
    }

    /// Uniformly random arm for exploration rounds.
    #[inline]
    pub fn exploration_arm(&self, t: u64) -> usize {
        let mut rng = self.streams.rng(StreamDomain::ArmChoice, t);
        rng.random_range(0..self.num_arms())
    }
}
