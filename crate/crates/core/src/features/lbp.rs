use super::{luma_plane, FeatureKind, FeatureVector};
use crate::imaging::PixelGrid;

/// 58 uniform patterns plus one bucket for all non-uniform ones.
pub const LBP_BINS: usize = 59;
/// Side of the square cell each histogram is pooled over.
pub const LBP_CELL: usize = 16;

/// Neighbor offsets; bit `i` of a code is set when neighbor `i` is at least
/// as bright as the center.
///
/// ```text
/// 0 1 2
/// 7 . 3
/// 6 5 4
/// ```
const NEIGHBORS: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
];

const fn circular_transitions(code: u8) -> u32 {
    (code ^ code.rotate_right(1)).count_ones()
}

/// Uniform codes (at most two circular 0/1 transitions) numbered in
/// ascending code order; everything else maps to bin 58.
const UNIFORM_TABLE: [u8; 256] = {
    let mut table = [(LBP_BINS - 1) as u8; 256];
    let mut next = 0u8;
    let mut code = 0usize;
    while code < 256 {
        if circular_transitions(code as u8) <= 2 {
            table[code] = next;
            next += 1;
        }
        code += 1;
    }
    table
};

/// Histogram bin of an 8-bit pattern.
#[inline]
pub fn uniform_bin(code: u8) -> usize {
    UNIFORM_TABLE[code as usize] as usize
}

/// The 3 × 3 pattern at an interior pixel of a row-major luma plane.
#[inline]
pub fn lbp_code(luma: &[i32], width: usize, x: usize, y: usize) -> u8 {
    let center = luma[y * width + x];
    let mut code = 0u8;
    for (bit, &(dx, dy)) in NEIGHBORS.iter().enumerate() {
        let nx = (x as isize + dx) as usize;
        let ny = (y as isize + dy) as usize;
        if luma[ny * width + nx] >= center {
            code |= 1 << bit;
        }
    }
    code
}

/// Uniform LBP histograms pooled per 16 × 16 cell, each cell summing to 1.
///
/// The one-pixel image border has no full neighborhood and is skipped, so
/// border cells pool fewer pixels. Cells are laid out row-major over the
/// whole cells that fit in the image.
pub fn lbp(img: &PixelGrid) -> FeatureVector {
    let (w, h) = (img.width(), img.height());
    let (ncx, ncy) = (w / LBP_CELL, h / LBP_CELL);
    let luma = luma_plane(img);
    let mut counts = vec![0u32; ncx * ncy * LBP_BINS];

    for y in 1..h.saturating_sub(1).min(ncy * LBP_CELL) {
        let row = y / LBP_CELL;
        for x in 1..w.saturating_sub(1).min(ncx * LBP_CELL) {
            let cell = row * ncx + x / LBP_CELL;
            counts[cell * LBP_BINS + uniform_bin(lbp_code(&luma, w, x, y))] += 1;
        }
    }

    let mut values = Vec::with_capacity(counts.len());
    for cell in counts.chunks(LBP_BINS) {
        let total: u32 = cell.iter().sum();
        if total == 0 {
            values.extend(std::iter::repeat_n(0.0, LBP_BINS));
        } else {
            values.extend(cell.iter().map(|&c| c as f64 / total as f64));
        }
    }
    FeatureVector::new(FeatureKind::Lbp.name(), values)
}
