use super::{luma_milli, FeatureKind, FeatureVector};
use crate::imaging::PixelGrid;

const BINS: usize = 10;

/// Width of one luminance bin in luma thousandths (25.5 luma levels).
pub const LUMA_BIN_WIDTH: i32 = 25_500;

/// Bin i covers [25.5 i, 25.5 (i+1)); the last bin is closed at 255.
#[inline]
fn channel_bin(v: u8) -> usize {
    ((v as usize * BINS) / 255).min(BINS - 1)
}

#[inline]
fn luma_bin(luma_milli: i32) -> usize {
    ((luma_milli / LUMA_BIN_WIDTH) as usize).min(BINS - 1)
}

/// Marginal R, G, B histograms, 10 bins each, each channel summing to 1.
pub fn color_histogram(img: &PixelGrid) -> FeatureVector {
    let mut counts = [0u64; 3 * BINS];
    for p in img.pixels() {
        for (c, &v) in p.iter().enumerate() {
            counts[c * BINS + channel_bin(v)] += 1;
        }
    }
    let n = img.pixels().len() as f64;
    let values = counts.iter().map(|&c| c as f64 / n).collect();
    FeatureVector::new(FeatureKind::ColorHist.name(), values)
}

/// 10-bin histogram of luma 0.299R + 0.587G + 0.114B, summing to 1.
pub fn luminance_histogram(img: &PixelGrid) -> FeatureVector {
    let mut counts = [0u64; BINS];
    for &p in img.pixels() {
        counts[luma_bin(luma_milli(p))] += 1;
    }
    let n = img.pixels().len() as f64;
    let values = counts.iter().map(|&c| c as f64 / n).collect();
    FeatureVector::new(FeatureKind::LumHist.name(), values)
}
