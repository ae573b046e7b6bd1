//! Foreground/background separation: global, adaptive and Otsu thresholds.
//!
//! Dark pixels are foreground throughout; callers with inverse-video scans
//! set [`ThresholdParams::invert`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{BinaryMask, GrayImage};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BinarizeError {
    #[error("adaptive window must be odd and at least 3, got {0}")]
    BadWindow(u32),
    #[error("global threshold requires `t`")]
    MissingThreshold,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub counts: [u64; 256],
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn histogram(img: &GrayImage) -> Histogram {
    let mut counts = [0u64; 256];
    for &v in img.data() {
        counts[v as usize] += 1;
    }
    Histogram { counts }
}

/// Foreground iff intensity <= `t`.
pub fn threshold_global(img: &GrayImage, t: u8) -> BinaryMask {
    let bits = img.data().iter().map(|&v| v <= t).collect();
    BinaryMask::new(img.width(), img.height(), bits).expect("same dimensions")
}

/// Returns the Otsu threshold together with the mask it produces.
pub fn threshold_otsu(img: &GrayImage) -> (u8, BinaryMask) {
    let t = otsu_level(&histogram(img));
    (t, threshold_global(img, t))
}

/// Smallest `t` maximizing the between-class variance, class 0 = values <= t.
///
/// With `n0` pixels summing to `s0` in class 0, the variance is proportional
/// to `(N*s0 - n0*S)^2 / (n0*n1)`; candidates are compared exactly in
/// 256-bit integer arithmetic so ties resolve without rounding noise.
pub fn otsu_level(hist: &Histogram) -> u8 {
    let total: u64 = hist.total();
    let sum: u128 = hist
        .counts
        .iter()
        .enumerate()
        .map(|(v, &c)| v as u128 * c as u128)
        .sum();
    let (mut n0, mut s0) = (0u64, 0u128);
    // Best score as the fraction num/den; 0/1 initially.
    let (mut best_t, mut best_num, mut best_den) = (0u8, 0u128, 1u128);
    for t in 0..=255usize {
        n0 += hist.counts[t];
        s0 += t as u128 * hist.counts[t] as u128;
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let d = (total as i128) * (s0 as i128) - (n0 as i128) * (sum as i128);
        let num = d.unsigned_abs() * d.unsigned_abs();
        let den = n0 as u128 * n1 as u128;
        if wide_mul(num, best_den) > wide_mul(best_num, den) {
            best_t = t as u8;
            best_num = num;
            best_den = den;
        }
    }
    best_t
}

/// Full 256-bit product as (high, low) words; tuples compare lexicographically.
fn wide_mul(a: u128, b: u128) -> (u128, u128) {
    const MASK: u128 = u64::MAX as u128;
    let (a_hi, a_lo) = (a >> 64, a & MASK);
    let (b_hi, b_lo) = (b >> 64, b & MASK);
    let ll = a_lo * b_lo;
    let lh = a_lo * b_hi;
    let hl = a_hi * b_lo;
    let hh = a_hi * b_hi;
    let mid = (ll >> 64) + (lh & MASK) + (hl & MASK);
    let lo = (ll & MASK) | (mid << 64);
    let hi = hh + (lh >> 64) + (hl >> 64) + (mid >> 64);
    (hi, lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdaptiveMode {
    Mean,
    Gaussian,
}

/// Sigma used for a Gaussian window of the given (odd) size.
pub fn gaussian_sigma(window: u32) -> f64 {
    0.3 * ((window as f64 - 1.0) / 2.0 - 1.0) + 0.8
}

fn gaussian_kernel(window: u32) -> Vec<f64> {
    let sigma = gaussian_sigma(window);
    let r = (window / 2) as i64;
    let raw: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|k| k / total).collect()
}

/// Foreground iff intensity < local statistic - `c`, borders replicated.
pub fn threshold_adaptive(
    img: &GrayImage,
    window: u32,
    c: i32,
    mode: AdaptiveMode,
) -> Result<BinaryMask, BinarizeError> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(BinarizeError::BadWindow(window));
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let r = (window / 2) as i64;
    let clamp = |i: i64, n: usize| i.clamp(0, n as i64 - 1) as usize;
    let data = img.data();
    let bits = match mode {
        AdaptiveMode::Mean => {
            // Row sums over the horizontal window, then column sums of those.
            let mut row_sums = vec![0u32; w * h];
            for y in 0..h {
                let row = &data[y * w..(y + 1) * w];
                let mut acc: u32 = (-r..=r).map(|i| row[clamp(i, w)] as u32).sum();
                for x in 0..w {
                    row_sums[y * w + x] = acc;
                    acc += row[clamp(x as i64 + r + 1, w)] as u32;
                    acc -= row[clamp(x as i64 - r, w)] as u32;
                }
            }
            let n = (window * window) as i64;
            let mut bits = vec![false; w * h];
            for x in 0..w {
                let mut acc: u64 = (-r..=r).map(|i| row_sums[clamp(i, h) * w + x] as u64).sum();
                for y in 0..h {
                    // v < acc/n - c  <=>  n*(v + c) < acc
                    let v = data[y * w + x] as i64;
                    bits[y * w + x] = n * (v + c as i64) < acc as i64;
                    acc += row_sums[clamp(y as i64 + r + 1, h) * w + x] as u64;
                    acc -= row_sums[clamp(y as i64 - r, h) * w + x] as u64;
                }
            }
            bits
        }
        AdaptiveMode::Gaussian => {
            let k = gaussian_kernel(window);
            let mut horiz = vec![0f64; w * h];
            for y in 0..h {
                let row = &data[y * w..(y + 1) * w];
                for x in 0..w {
                    horiz[y * w + x] = k
                        .iter()
                        .enumerate()
                        .map(|(i, kv)| kv * row[clamp(x as i64 + i as i64 - r, w)] as f64)
                        .sum();
                }
            }
            let mut bits = vec![false; w * h];
            for y in 0..h {
                for x in 0..w {
                    let stat: f64 = k
                        .iter()
                        .enumerate()
                        .map(|(i, kv)| kv * horiz[clamp(y as i64 + i as i64 - r, h) * w + x])
                        .sum();
                    bits[y * w + x] = (data[y * w + x] as f64) < stat - c as f64;
                }
            }
            bits
        }
    };
    Ok(BinaryMask::new(img.width(), img.height(), bits).expect("same dimensions"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMethod {
    Global,
    AdaptiveMean,
    AdaptiveGaussian,
    Otsu,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdParams {
    pub method: ThresholdMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<i32>,
    #[serde(default)]
    pub invert: bool,
}

impl ThresholdParams {
    pub fn otsu() -> Self {
        Self {
            method: ThresholdMethod::Otsu,
            t: None,
            window: None,
            c: None,
            invert: false,
        }
    }

    pub fn global(t: u8) -> Self {
        Self {
            method: ThresholdMethod::Global,
            t: Some(t),
            ..Self::otsu()
        }
    }

    pub fn adaptive(mode: AdaptiveMode, window: u32, c: i32) -> Self {
        let method = match mode {
            AdaptiveMode::Mean => ThresholdMethod::AdaptiveMean,
            AdaptiveMode::Gaussian => ThresholdMethod::AdaptiveGaussian,
        };
        Self {
            method,
            t: None,
            window: Some(window),
            c: Some(c),
            invert: false,
        }
    }

    pub fn validate(&self) -> Result<(), BinarizeError> {
        match self.method {
            ThresholdMethod::Global if self.t.is_none() => Err(BinarizeError::MissingThreshold),
            ThresholdMethod::AdaptiveMean | ThresholdMethod::AdaptiveGaussian => {
                let window = self.window.unwrap_or(DEFAULT_WINDOW);
                if window < 3 || window.is_multiple_of(2) {
                    Err(BinarizeError::BadWindow(window))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

pub const DEFAULT_WINDOW: u32 = 15;

/// Outcome of [`binarize`]; `threshold` is set for the global and Otsu methods.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binarized {
    pub threshold: Option<u8>,
    pub mask: BinaryMask,
}

pub fn binarize(img: &GrayImage, params: &ThresholdParams) -> Result<Binarized, BinarizeError> {
    params.validate()?;
    let inverted;
    let img = if params.invert {
        inverted = img.inverted();
        &inverted
    } else {
        img
    };
    let window = params.window.unwrap_or(DEFAULT_WINDOW);
    let c = params.c.unwrap_or(0);
    Ok(match params.method {
        ThresholdMethod::Global => {
            let t = params.t.ok_or(BinarizeError::MissingThreshold)?;
            Binarized {
                threshold: Some(t),
                mask: threshold_global(img, t),
            }
        }
        ThresholdMethod::Otsu => {
            let (t, mask) = threshold_otsu(img);
            Binarized {
                threshold: Some(t),
                mask,
            }
        }
        ThresholdMethod::AdaptiveMean => Binarized {
            threshold: None,
            mask: threshold_adaptive(img, window, c, AdaptiveMode::Mean)?,
        },
        ThresholdMethod::AdaptiveGaussian => Binarized {
            threshold: None,
            mask: threshold_adaptive(img, window, c, AdaptiveMode::Gaussian)?,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(w: u32, h: u32, data: &[u8]) -> GrayImage {
        GrayImage::new(w, h, data.to_vec()).unwrap()
    }

    #[test]
    fn histogram_counts() {
        let hist = histogram(&img(2, 2, &[0, 0, 255, 255]));
        assert_eq!(hist.counts[0], 2);
        assert_eq!(hist.counts[255], 2);
        assert_eq!(hist.total(), 4);
        let hist = histogram(&GrayImage::filled(10, 10, 7));
        assert_eq!(hist.counts[7], 100);
    }

    #[test]
    fn global_examples() {
        let g = img(2, 2, &[0, 128, 200, 255]);
        assert_eq!(
            threshold_global(&g, 128).bits(),
            &[true, true, false, false]
        );
        assert_eq!(threshold_global(&g, 255).count(), 4);
        assert_eq!(threshold_global(&g, 0).bits(), &[true, false, false, false]);
    }

    #[test]
    fn otsu_constant_image() {
        let (t, mask) = threshold_otsu(&GrayImage::filled(5, 5, 90));
        assert_eq!(t, 0);
        assert!(mask.is_empty());
        let (t, mask) = threshold_otsu(&GrayImage::filled(5, 5, 0));
        assert_eq!(t, 0);
        assert_eq!(mask.count(), 25);
    }

    #[test]
    fn otsu_two_levels() {
        let data: Vec<u8> = [10u8; 5].into_iter().chain([200u8; 5]).collect();
        let (t, mask) = threshold_otsu(&img(10, 1, &data));
        assert_eq!(t, 10);
        assert_eq!(mask.count(), 5);
    }

    #[test]
    fn wide_mul_matches_small_products() {
        assert_eq!(wide_mul(3, 5), (0, 15));
        assert_eq!(wide_mul(u128::MAX, 2), (1, u128::MAX - 1));
        assert_eq!(wide_mul(1 << 64, 1 << 64), (1, 0));
    }

    #[test]
    fn adaptive_constant_is_background() {
        for mode in [AdaptiveMode::Mean, AdaptiveMode::Gaussian] {
            let m = threshold_adaptive(&GrayImage::filled(6, 5, 77), 3, 0, mode).unwrap();
            assert!(m.is_empty());
        }
    }

    #[test]
    fn adaptive_dark_center() {
        let mut g = GrayImage::filled(5, 5, 255);
        g.set(2, 2, 0);
        let m = threshold_adaptive(&g, 3, 10, AdaptiveMode::Mean).unwrap();
        assert!(m.get(2, 2));
        assert_eq!(m.count(), 1);
        let m = threshold_adaptive(&g, 3, 10, AdaptiveMode::Gaussian).unwrap();
        assert!(m.get(2, 2));
    }

    #[test]
    fn adaptive_bad_window() {
        let g = GrayImage::filled(3, 3, 0);
        assert_eq!(
            threshold_adaptive(&g, 4, 0, AdaptiveMode::Mean),
            Err(BinarizeError::BadWindow(4))
        );
        assert_eq!(
            threshold_adaptive(&g, 1, 0, AdaptiveMode::Gaussian),
            Err(BinarizeError::BadWindow(1))
        );
        let params = ThresholdParams::adaptive(AdaptiveMode::Mean, 4, 0);
        assert_eq!(binarize(&g, &params), Err(BinarizeError::BadWindow(4)));
    }

    #[test]
    fn gaussian_sigma_formula() {
        assert!((gaussian_sigma(3) - 0.8).abs() < 1e-12);
        assert!((gaussian_sigma(7) - 1.4).abs() < 1e-12);
        let k = gaussian_kernel(5);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(k[0], k[4]);
    }

    /// Mean mode against a direct per-pixel window average.
    #[test]
    fn adaptive_mean_matches_naive() {
        let g = GrayImage::from_fn(9, 7, |x, y| ((x * 37 + y * 91) % 256) as u8);
        let (window, c) = (5u32, 3i32);
        let m = threshold_adaptive(&g, window, c, AdaptiveMode::Mean).unwrap();
        let r = (window / 2) as i64;
        for y in 0..7i64 {
            for x in 0..9i64 {
                let mut sum = 0i64;
                for dy in -r..=r {
                    for dx in -r..=r {
                        sum +=
                            g.get((x + dx).clamp(0, 8) as u32, (y + dy).clamp(0, 6) as u32) as i64;
                    }
                }
                let mean = sum as f64 / (window * window) as f64;
                let expect = (g.get(x as u32, y as u32) as f64) < mean - c as f64;
                assert_eq!(m.get(x as u32, y as u32), expect, "({x},{y})");
            }
        }
    }

    #[test]
    fn invert_flips_polarity() {
        let g = img(2, 1, &[10, 250]);
        let mut p = ThresholdParams::global(128);
        assert_eq!(binarize(&g, &p).unwrap().mask.bits(), &[true, false]);
        p.invert = true;
        assert_eq!(binarize(&g, &p).unwrap().mask.bits(), &[false, true]);
    }

    #[test]
    fn global_requires_t() {
        let mut p = ThresholdParams::global(3);
        p.t = None;
        assert_eq!(
            binarize(&GrayImage::filled(1, 1, 0), &p),
            Err(BinarizeError::MissingThreshold)
        );
    }

    fn small_image() -> impl Strategy<Value = GrayImage> {
        (1u32..12, 1u32..12).prop_flat_map(|(w, h)| {
            prop::collection::vec(any::<u8>(), (w * h) as usize)
                .prop_map(move |d| GrayImage::new(w, h, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn global_is_monotone(g in small_image(), a in any::<u8>(), b in any::<u8>()) {
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(threshold_global(&g, lo).is_subset_of(&threshold_global(&g, hi)));
        }

        #[test]
        fn histogram_conserves_pixels(g in small_image()) {
            prop_assert_eq!(histogram(&g).total(), (g.width() * g.height()) as u64);
        }

        #[test]
        fn adaptive_mean_shift_invariant(g in small_image(), k in 0u8..40, c in -20i32..20, half in 1u32..4) {
            let base = GrayImage::new(g.width(), g.height(), g.data().iter().map(|v| v / 2).collect()).unwrap();
            let shifted = GrayImage::new(g.width(), g.height(), base.data().iter().map(|v| v + k).collect()).unwrap();
            let window = 2 * half + 1;
            prop_assert_eq!(
                threshold_adaptive(&base, window, c, AdaptiveMode::Mean).unwrap(),
                threshold_adaptive(&shifted, window, c, AdaptiveMode::Mean).unwrap()
            );
        }
    }
}
