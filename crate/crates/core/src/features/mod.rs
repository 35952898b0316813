//! Per-image low-level descriptors computed on the normalized window.

mod histogram;
mod hog;
mod lbp;

pub use histogram::{color_histogram, luminance_histogram, LUMA_BIN_WIDTH};
pub use hog::{hog, HOG_BINS};
pub use lbp::{lbp, lbp_code, uniform_bin, LBP_BINS, LBP_CELL};

use crate::error::{Error, Result};
use crate::imaging::PixelGrid;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// A named, fixed-length real vector for one image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub feature_name: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(feature_name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            feature_name: feature_name.into(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The descriptors this crate can compute from pixels. Other feature names
/// (GIST, PiCoDes, ...) may still flow through the pipeline as externally
/// supplied vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    ColorHist,
    LumHist,
    Hog16,
    Hog32,
    Lbp,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 5] = [
        FeatureKind::ColorHist,
        FeatureKind::LumHist,
        FeatureKind::Hog16,
        FeatureKind::Hog32,
        FeatureKind::Lbp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::ColorHist => "color_hist",
            FeatureKind::LumHist => "lum_hist",
            FeatureKind::Hog16 => "hog16",
            FeatureKind::Hog32 => "hog32",
            FeatureKind::Lbp => "lbp",
        }
    }

    /// Vector length on the 360 × 450 window.
    pub fn window_len(self) -> usize {
        match self {
            FeatureKind::ColorHist => 30,
            FeatureKind::LumHist => 10,
            FeatureKind::Hog16 => 22 * 28 * HOG_BINS,
            FeatureKind::Hog32 => 11 * 14 * HOG_BINS,
            FeatureKind::Lbp => 22 * 28 * LBP_BINS,
        }
    }

    /// Small histograms are used raw; the large descriptors are PCA-reduced.
    pub fn is_compact(self) -> bool {
        matches!(self, FeatureKind::ColorHist | FeatureKind::LumHist)
    }

    pub fn extract(self, img: &PixelGrid) -> FeatureVector {
        match self {
            FeatureKind::ColorHist => color_histogram(img),
            FeatureKind::LumHist => luminance_histogram(img),
            FeatureKind::Hog16 => hog(img, 16).expect("16 is a supported cell size"),
            FeatureKind::Hog32 => hog(img, 32).expect("32 is a supported cell size"),
            FeatureKind::Lbp => lbp(img),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown feature `{s}`")))
    }
}

/// Luma in thousandths: 299 R + 587 G + 114 B, so 0..=255_000.
///
/// Integer arithmetic keeps gradients and pattern comparisons exact.
#[inline]
pub fn luma_milli(p: [u8; 3]) -> i32 {
    299 * p[0] as i32 + 587 * p[1] as i32 + 114 * p[2] as i32
}

/// Row-major luma plane of an image, in thousandths.
pub fn luma_plane(img: &PixelGrid) -> Vec<i32> {
    img.pixels().iter().map(|&p| luma_milli(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{normalize_window, PixelGrid};

    #[test]
    fn window_lengths() {
        assert_eq!(FeatureKind::Hog16.window_len(), 5544);
        assert_eq!(FeatureKind::Hog32.window_len(), 1386);
        assert_eq!(FeatureKind::Lbp.window_len(), 36344);
    }

    #[test]
    fn extracted_lengths_match_declared() {
        let img = normalize_window(&PixelGrid::filled(50, 70, [30, 60, 90]).unwrap());
        for kind in FeatureKind::ALL {
            let v = kind.extract(&img);
            assert_eq!(v.len(), kind.window_len(), "{kind}");
            assert_eq!(v.feature_name, kind.name());
        }
    }

    #[test]
    fn parse_names() {
        for kind in FeatureKind::ALL {
            assert_eq!(kind.name().parse::<FeatureKind>().unwrap(), kind);
        }
        assert!("gist".parse::<FeatureKind>().is_err());
    }

    #[test]
    fn gray_luma_is_exact() {
        for g in 0..=255u8 {
            assert_eq!(luma_milli([g, g, g]), 1000 * g as i32);
        }
    }
}
