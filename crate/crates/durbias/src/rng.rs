//! Reproducible random number streams.
//!
//! Every spell in every replication draws from its own stream, derived from
//! `(base_seed, replication, spell)` by a keyed SplitMix64 chain feeding a
//! ChaCha8 generator. Per-spell streams keep output independent of scheduling
//! and of the sample size: adding spells or running them in parallel never
//! perturbs the draws of existing spells.
//!
//! Draw algorithms are fixed as part of the reproducibility contract:
//! uniforms take the top 53 bits of a ChaCha word, normals are generated by
//! inversion (Wichura's PPND16 rational approximation of the normal
//! quantile), Bernoulli draws compare one uniform against `p`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

/// Stream sub-lane, separating generation draws from proxy-noise draws so the
/// two never share a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lane {
    Generate = 0,
    ProxyNoise = 1,
}

/// Invalid distribution parameters.
#[derive(Debug, Error, PartialEq)]
pub enum DrawError {
    #[error("uniform bounds must satisfy lo < hi, got lo={lo}, hi={hi}")]
    BadUniformBounds { lo: f64, hi: f64 },
    #[error("normal standard deviation must be >= 0, got {0}")]
    NegativeSd(f64),
    #[error("Bernoulli probability must lie in [0, 1], got {0}")]
    BadProbability(f64),
}

/// Deterministic per-spell random stream.
///
/// Identical `(base_seed, replication, spell)` origins produce bit-identical
/// draw sequences regardless of platform or thread count.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
    origin: (u64, u32, u64),
}

/// SplitMix64 finalizer; bijective on u64.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the generation stream for one spell of one replication.
pub fn derive_stream(base_seed: u64, replication: u32, spell: u64) -> RngStream {
    derive_lane(base_seed, replication, spell, Lane::Generate)
}

/// Derive a stream on an explicit lane.
///
/// The seed words form a chain of bijections, so the mapping from
/// `(replication, spell, lane)` to the 256-bit ChaCha seed is injective for a
/// fixed `base_seed`.
pub fn derive_lane(base_seed: u64, replication: u32, spell: u64, lane: Lane) -> RngStream {
    let w0 = mix(base_seed ^ 0x9E37_79B9_7F4A_7C15);
    let w1 = mix(w0 ^ u64::from(replication));
    let w2 = mix(w1 ^ spell);
    let w3 = mix(w2 ^ lane as u64);
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&w0.to_le_bytes());
    seed[8..16].copy_from_slice(&w1.to_le_bytes());
    seed[16..24].copy_from_slice(&w2.to_le_bytes());
    seed[24..32].copy_from_slice(&w3.to_le_bytes());
    RngStream {
        rng: ChaCha8Rng::from_seed(seed),
        origin: (base_seed, replication, spell),
    }
}

impl RngStream {
    /// `(base_seed, replication, spell)` this stream was derived from.
    pub fn origin(&self) -> (u64, u32, u64) {
        self.origin
    }

    /// Uniform on `[0, 1)` with 53-bit resolution.
    #[inline]
    pub fn u01(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform on the open interval `(0, 1)`; cell midpoints, never 0 or 1.
    #[inline]
    fn u01_open(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform draw on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64, DrawError> {
        if !(lo < hi) {
            return Err(DrawError::BadUniformBounds { lo, hi });
        }
        Ok(lo + (hi - lo) * self.u01())
    }

    /// Normal draw via quantile inversion; `sd == 0` returns `mean` exactly.
    pub fn normal(&mut self, mean: f64, sd: f64) -> Result<f64, DrawError> {
        if sd < 0.0 || sd.is_nan() {
            return Err(DrawError::NegativeSd(sd));
        }
        Ok(mean + sd * normal_quantile(self.u01_open()))
    }

    /// Bernoulli draw; returns 1 with probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> Result<u8, DrawError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(DrawError::BadProbability(p));
        }
        Ok(u8::from(self.u01() < p))
    }
}

/// Normal quantile function (inverse CDF), Wichura's PPND16 approximation.
///
/// Accurate to about 1e-15 over `p` in (0, 1). Coefficients are the
/// published ones, transcribed in full.
#[allow(clippy::excessive_precision)]
pub fn normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        let num = ((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_812_8e4) * r
            + 6.726_577_092_700_870_1e4)
            * r
            + 4.592_195_393_154_987_1e4)
            * r
            + 1.373_169_376_550_946_1e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_608;
        let den = ((((((5.226_495_278_852_854_5e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_758_8)
            * r
            + 1.0;
        num / den
    } else {
        let r = r - 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_9e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_8e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}
