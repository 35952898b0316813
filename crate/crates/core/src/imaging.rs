//! Image decoding and normalization to the fixed analysis window.
//!
//! Every image is brought to a 360 × 450 (width × height) RGB raster before
//! feature extraction: landscape images are scaled so their height is 450,
//! portrait images so their width is 360, and the result is center-cropped
//! (or padded with white) to the window.

use crate::error::{Error, Result};
use image::ImageFormat;

/// Width of the analysis window in pixels.
pub const WINDOW_WIDTH: usize = 360;
/// Height of the analysis window in pixels.
pub const WINDOW_HEIGHT: usize = 450;

const WHITE: [u8; 3] = [255, 255, 255];

/// A decoded RGB raster, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PixelGrid {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParam(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// A grid filled with a single color.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn orientation(&self) -> Orientation {
        Orientation::of(self.width, self.height)
    }

    /// Encode as an 8-bit RGB PNG.
    pub fn to_png(&self) -> Result<Vec<u8>> {
        let flat: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        let buf = image::RgbImage::from_raw(self.width as u32, self.height as u32, flat)
            .expect("pixel buffer length checked at construction");
        let mut out = std::io::Cursor::new(Vec::new());
        buf.write_to(&mut out, ImageFormat::Png)
            .map_err(|e| Error::InvalidParam(format!("png encoding failed: {e}")))?;
        Ok(out.into_inner())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Landscape,
    Portrait,
}

impl Orientation {
    /// Squares count as landscape.
    pub fn of(width: usize, height: usize) -> Self {
        if width >= height {
            Orientation::Landscape
        } else {
            Orientation::Portrait
        }
    }
}

/// Decode a PNG or JPEG file. Alpha is composited over white.
pub fn decode_image(bytes: &[u8]) -> Result<PixelGrid> {
    let decode_err = |message: String| Error::Decode {
        len: bytes.len(),
        message,
    };
    let format = image::guess_format(bytes).map_err(|e| decode_err(e.to_string()))?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Jpeg) {
        return Err(decode_err(format!(
            "unsupported format {format:?}; only PNG and JPEG are accepted"
        )));
    }
    let img = image::load_from_memory_with_format(bytes, format)
        .map_err(|e| decode_err(format!("{format:?}: {e}")))?;
    let rgba = img.to_rgba8();
    let (w, h) = rgba.dimensions();
    let pixels = rgba
        .pixels()
        .map(|p| {
            let [r, g, b, a] = p.0;
            if a == 255 {
                [r, g, b]
            } else {
                [over_white(r, a), over_white(g, a), over_white(b, a)]
            }
        })
        .collect();
    PixelGrid::new(w as usize, h as usize, pixels)
}

#[inline]
fn over_white(c: u8, a: u8) -> u8 {
    let (c, a) = (c as u32, a as u32);
    // round(c*a/255 + 255*(255-a)/255)
    ((c * a + 255 * (255 - a) + 127) / 255) as u8
}

/// Scale and crop/pad to the 360 × 450 analysis window.
pub fn normalize_window(img: &PixelGrid) -> PixelGrid {
    let (w, h) = (img.width, img.height);
    let scale = match img.orientation() {
        Orientation::Landscape => WINDOW_HEIGHT as f64 / h as f64,
        Orientation::Portrait => WINDOW_WIDTH as f64 / w as f64,
    };
    let (sw, sh) = match img.orientation() {
        Orientation::Landscape => (scaled_len(w, scale), WINDOW_HEIGHT),
        Orientation::Portrait => (WINDOW_WIDTH, scaled_len(h, scale)),
    };
    let scaled = if (sw, sh) == (w, h) {
        img.clone()
    } else {
        resize_bilinear(img, sw, sh)
    };
    crop_or_pad(&scaled, WINDOW_WIDTH, WINDOW_HEIGHT)
}

fn scaled_len(len: usize, scale: f64) -> usize {
    ((len as f64 * scale).round() as usize).max(1)
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
pub fn resize_bilinear(img: &PixelGrid, new_w: usize, new_h: usize) -> PixelGrid {
    let sx = img.width as f64 / new_w as f64;
    let sy = img.height as f64 / new_h as f64;
    let max_x = (img.width - 1) as f64;
    let max_y = (img.height - 1) as f64;

    let sample_axis = |dst: usize, scale: f64, max: f64| -> (usize, usize, f64) {
        let src = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
        let lo = src.floor();
        let hi = (lo + 1.0).min(max);
        (lo as usize, hi as usize, src - lo)
    };
    let cols: Vec<_> = (0..new_w).map(|x| sample_axis(x, sx, max_x)).collect();

    let mut pixels = Vec::with_capacity(new_w * new_h);
    for y in 0..new_h {
        let (y0, y1, fy) = sample_axis(y, sy, max_y);
        for &(x0, x1, fx) in &cols {
            let p00 = img.get(x0, y0);
            let p10 = img.get(x1, y0);
            let p01 = img.get(x0, y1);
            let p11 = img.get(x1, y1);
            let mut out = [0u8; 3];
            for c in 0..3 {
                let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
                let bot = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
                let v = top * (1.0 - fy) + bot * fy;
                out[c] = v.round().clamp(0.0, 255.0) as u8;
            }
            pixels.push(out);
        }
    }
    PixelGrid {
        width: new_w,
        height: new_h,
        pixels,
    }
}

/// Center-crop each axis that is too long and center-pad (white) each axis
/// that is too short.
fn crop_or_pad(img: &PixelGrid, out_w: usize, out_h: usize) -> PixelGrid {
    if img.width == out_w && img.height == out_h {
        return img.clone();
    }
    // signed offset of the source origin inside the output window
    let off_x = (out_w as isize - img.width as isize).div_euclid(2);
    let off_y = (out_h as isize - img.height as isize).div_euclid(2);
    let mut pixels = vec![WHITE; out_w * out_h];
    for y in 0..out_h {
        let sy = y as isize - off_y;
        if sy < 0 || sy >= img.height as isize {
            continue;
        }
        for x in 0..out_w {
            let sx = x as isize - off_x;
            if sx < 0 || sx >= img.width as isize {
                continue;
            }
            pixels[y * out_w + x] = img.get(sx as usize, sy as usize);
        }
    }
    PixelGrid {
        width: out_w,
        height: out_h,
        pixels,
    }
}
