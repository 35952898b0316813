use super::{luma_plane, FeatureVector};
use crate::error::{Error, Result};
use crate::imaging::PixelGrid;

/// Unsigned orientation bins over [0°, 180°), centered at 0°, 20°, ..., 160°.
pub const HOG_BINS: usize = 9;
const BIN_WIDTH_DEG: f64 = 180.0 / HOG_BINS as f64;
const CLIP: f64 = 0.2;

/// Histogram of oriented gradients with one 9-bin descriptor per cell.
///
/// Gradients are central differences of luma (edge-replicated at the
/// border). Each pixel votes its magnitude into the two nearest orientation
/// bins by linear interpolation. A cell is normalized within the 2 × 2 block
/// that starts at the cell (shifted back at the last row/column) using
/// L2-Hys: L2-normalize the block, clip at 0.2, renormalize, then keep the
/// cell's own nine entries. Pixels beyond the last whole cell are ignored.
pub fn hog(img: &PixelGrid, cell_size: usize) -> Result<FeatureVector> {
    if cell_size != 16 && cell_size != 32 {
        return Err(Error::InvalidParam(format!(
            "HoG cell size must be 16 or 32, got {cell_size}"
        )));
    }
    let cells = cell_histograms(img, cell_size);
    let (ncx, ncy) = (img.width() / cell_size, img.height() / cell_size);
    let values = normalize_cells(&cells, ncx, ncy);
    Ok(FeatureVector::new(format!("hog{cell_size}"), values))
}

fn cell_histograms(img: &PixelGrid, cell: usize) -> Vec<[f64; HOG_BINS]> {
    let (w, h) = (img.width(), img.height());
    let (ncx, ncy) = (w / cell, h / cell);
    let luma = luma_plane(img);
    let at = |x: usize, y: usize| luma[y * w + x];
    let mut cells = vec![[0.0; HOG_BINS]; ncx * ncy];

    for y in 0..ncy * cell {
        let (up, down) = (y.saturating_sub(1), (y + 1).min(h - 1));
        let row = y / cell;
        for x in 0..ncx * cell {
            let (left, right) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let gx = (at(right, y) - at(left, y)) as f64 / 1000.0;
            let gy = (at(x, down) - at(x, up)) as f64 / 1000.0;
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let (lo, hi, frac) = orientation_bins(gy, gx);
            let hist = &mut cells[row * ncx + x / cell];
            hist[lo] += mag * (1.0 - frac);
            hist[hi] += mag * frac;
        }
    }
    cells
}

/// Neighboring bins and the interpolation weight toward `hi`.
#[inline]
fn orientation_bins(gy: f64, gx: f64) -> (usize, usize, f64) {
    let mut deg = gy.atan2(gx).to_degrees();
    if deg < 0.0 {
        deg += 180.0;
    }
    if deg >= 180.0 {
        deg -= 180.0;
    }
    let pos = deg / BIN_WIDTH_DEG;
    let base = pos.floor();
    let lo = (base as usize) % HOG_BINS;
    (lo, (lo + 1) % HOG_BINS, pos - base)
}

fn normalize_cells(cells: &[[f64; HOG_BINS]], ncx: usize, ncy: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(ncx * ncy * HOG_BINS);
    for cy in 0..ncy {
        for cx in 0..ncx {
            let bx = cx.min(ncx.saturating_sub(2));
            let by = cy.min(ncy.saturating_sub(2));
            let block: Vec<(usize, usize)> = (by..(by + 2).min(ncy))
                .flat_map(|y| (bx..(bx + 2).min(ncx)).map(move |x| (x, y)))
                .collect();

            let energy: f64 = block
                .iter()
                .flat_map(|&(x, y)| cells[y * ncx + x].iter())
                .map(|v| v * v)
                .sum();
            if energy == 0.0 {
                out.extend([0.0; HOG_BINS]);
                continue;
            }
            let norm = energy.sqrt();
            let clipped = |v: f64| (v / norm).min(CLIP);
            let renorm: f64 = block
                .iter()
                .flat_map(|&(x, y)| cells[y * ncx + x].iter())
                .map(|&v| clipped(v).powi(2))
                .sum::<f64>()
                .sqrt();
            out.extend(cells[cy * ncx + cx].iter().map(|&v| clipped(v) / renorm));
        }
    }
    out
}
