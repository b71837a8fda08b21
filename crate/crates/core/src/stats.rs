//! Gaussian tail function and its inverse, binomial intervals, and AUC.

// AS 241 coefficients are kept exactly as published.
#![allow(clippy::excessive_precision)]

use rand::Rng;

use crate::error::{Error, Result};

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal upper tail `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

// Wichura, AS 241 (PPND16) rational approximations, relative accuracy ~1e-16.
const A: [f64; 8] = [
    3.387_132_872_796_366_608,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_577_34,
    4.630_337_846_156_545_295_9,
    5.769_497_221_460_691_405_5,
    3.647_848_324_763_204_605_04,
    1.270_458_252_452_368_382_58,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87,
    1.676_384_830_183_803_849_4,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103_777_2,
    5.463_784_911_164_114_369_9,
    1.784_826_539_917_291_335_8,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

/// Standard normal quantile for `p` in (0, 1), before refinement.
fn ppnd16(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Inverse of the Gaussian upper tail: returns `x` with `Q(x) = p`.
///
/// Rational approximation followed by one Newton step on `Q`. Work is done in
/// the upper tail (`p <= 1/2`) where `Q` carries full relative precision;
/// `1 - p` is exact for `p >= 1/2`.
pub fn q_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain { name: "p", value: p });
    }
    if p > 0.5 {
        return q_inverse(1.0 - p).map(|x| -x);
    }
    let mut x = -ppnd16(p);
    x += (q_function(x) - p) / normal_pdf(x);
    Ok(x)
}

/// Half-width of the 95% Wilson score interval for `successes` out of `n`.
pub fn wilson_halfwidth(successes: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    Z_95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()
}

/// Area under the ROC curve: `P(X1 > X0) + P(X1 = X0) / 2`.
pub fn auc(h0: &[f64], h1: &[f64]) -> f64 {
    if h0.is_empty() || h1.is_empty() {
        return f64::NAN;
    }
    let mut pooled: Vec<(f64, bool)> = h0
        .iter()
        .map(|&v| (v, false))
        .chain(h1.iter().map(|&v| (v, true)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    // midranks of the H1 sample
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += midrank * pooled[i..=j].iter().filter(|e| e.1).count() as f64;
        i = j + 1;
    }
    let n1 = h1.len() as f64;
    let n0 = h0.len() as f64;
    (rank_sum - n1 * (n1 + 1.0) / 2.0) / (n0 * n1)
}

/// Bootstrap standard error of [`auc`], resampling each population.
pub fn auc_bootstrap_se<R: Rng + ?Sized>(h0: &[f64], h1: &[f64], reps: usize, rng: &mut R) -> f64 {
    if reps < 2 || h0.is_empty() || h1.is_empty() {
        return f64::NAN;
    }
    let mut b0 = vec![0.0; h0.len()];
    let mut b1 = vec![0.0; h1.len()];
    let values: Vec<f64> = (0..reps)
        .map(|_| {
            b0.iter_mut().for_each(|v| *v = h0[rng.random_range(0..h0.len())]);
            b1.iter_mut().for_each(|v| *v = h1[rng.random_range(0..h1.len())]);
            auc(&b0, &b1)
        })
        .collect();
    sample_std(&values)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample standard deviation.
pub fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}
