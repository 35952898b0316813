use infostyle::metric::EmbeddedTriplet;
use infostyle::PixelGrid;

fn luma_milli(p: [u8; 3]) -> i64 {
    299 * p[0] as i64 + 587 * p[1] as i64 + 114 * p[2] as i64
}

/// Color histogram by scanning every bin for every pixel value.
pub fn color_histogram(img: &PixelGrid) -> Vec<f64> {
    let mut counts = vec![0usize; 30];
    for &p in img.pixels() {
        for c in 0..3 {
            let v = p[c] as usize;
            for bin in 0..10 {
                // v in [25.5 bin, 25.5 (bin+1)), last bin closed
                let above = 10 * v >= 255 * bin;
                let below = 10 * v < 255 * (bin + 1) || bin == 9;
                if above && below {
                    counts[c * 10 + bin] += 1;
                }
            }
        }
    }
    let n = img.pixels().len() as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

pub fn luminance_histogram(img: &PixelGrid) -> Vec<f64> {
    let mut counts = vec![0usize; 10];
    for &p in img.pixels() {
        let l = luma_milli(p);
        for bin in 0..10i64 {
            if l >= 25_500 * bin && (l < 25_500 * (bin + 1) || bin == 9) {
                counts[bin as usize] += 1;
            }
        }
    }
    let n = img.pixels().len() as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

/// HoG with triangular-kernel orientation voting and explicit 2 × 2 block
/// L2-Hys normalization.
#[allow(clippy::needless_range_loop)]
pub fn hog(img: &PixelGrid, cell: usize) -> Vec<f64> {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let lum = |x: isize, y: isize| -> f64 {
        let x = x.clamp(0, w - 1) as usize;
        let y = y.clamp(0, h - 1) as usize;
        luma_milli(img.get(x, y)) as f64
    };
    let (ncx, ncy) = (img.width() / cell, img.height() / cell);
    let mut hist = vec![vec![[0.0f64; 9]; ncx]; ncy];
    for (cy, row) in hist.iter_mut().enumerate() {
        for (cx, bins) in row.iter_mut().enumerate() {
            for py in 0..cell {
                for px in 0..cell {
                    let x = (cx * cell + px) as isize;
                    let y = (cy * cell + py) as isize;
                    let gx = (lum(x + 1, y) - lum(x - 1, y)) / 1000.0;
                    let gy = (lum(x, y + 1) - lum(x, y - 1)) / 1000.0;
                    let mag = (gx * gx + gy * gy).sqrt();
                    if mag == 0.0 {
                        continue;
                    }
                    let theta = gy.atan2(gx).to_degrees().rem_euclid(180.0);
                    for (j, b) in bins.iter_mut().enumerate() {
                        let diff = (theta - 20.0 * j as f64).abs();
                        let dist = diff.min(180.0 - diff);
                        let weight = (1.0 - dist / 20.0).max(0.0);
                        *b += mag * weight;
                    }
                }
            }
        }
    }

    let mut out = Vec::new();
    for cy in 0..ncy {
        for cx in 0..ncx {
            let bx = if ncx >= 2 { cx.min(ncx - 2) } else { 0 };
            let by = if ncy >= 2 { cy.min(ncy - 2) } else { 0 };
            let mut block = Vec::new();
            let mut own = 0;
            for yy in by..(by + 2).min(ncy) {
                for xx in bx..(bx + 2).min(ncx) {
                    if (xx, yy) == (cx, cy) {
                        own = block.len();
                    }
                    block.extend_from_slice(&hist[yy][xx]);
                }
            }
            let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                out.extend([0.0; 9]);
                continue;
            }
            let clipped: Vec<f64> = block.iter().map(|v| (v / norm).min(0.2)).collect();
            let renorm = clipped.iter().map(|v| v * v).sum::<f64>().sqrt();
            out.extend(clipped[own..own + 9].iter().map(|v| v / renorm));
        }
    }
    out
}

/// The 58 uniform 8-bit patterns, built as circular runs of ones.
pub fn uniform_patterns() -> Vec<u8> {
    let mut pats = vec![0u8, 0xFF];
    for len in 1..8u32 {
        let run = ((1u16 << len) - 1) as u8;
        for start in 0..8 {
            pats.push(run.rotate_left(start));
        }
    }
    pats.sort_unstable();
    pats.dedup();
    pats
}

/// Pattern at (x, y) of the 3 × 3 neighborhood, bits clockwise from the
/// top-left neighbor.
pub fn lbp_code(img: &PixelGrid, x: usize, y: usize) -> u8 {
    let c = luma_milli(img.get(x, y));
    let ring = [
        img.get(x - 1, y - 1),
        img.get(x, y - 1),
        img.get(x + 1, y - 1),
        img.get(x + 1, y),
        img.get(x + 1, y + 1),
        img.get(x, y + 1),
        img.get(x - 1, y + 1),
        img.get(x - 1, y),
    ];
    let mut code = 0u8;
    for (bit, p) in ring.iter().enumerate() {
        if luma_milli(*p) >= c {
            code += 1 << bit;
        }
    }
    code
}

pub fn lbp(img: &PixelGrid, cell: usize) -> Vec<f64> {
    let uniform = uniform_patterns();
    let (w, h) = (img.width(), img.height());
    let (ncx, ncy) = (w / cell, h / cell);
    let mut out = Vec::new();
    for cy in 0..ncy {
        for cx in 0..ncx {
            let mut counts = [0usize; 59];
            for y in cy * cell..(cy + 1) * cell {
                for x in cx * cell..(cx + 1) * cell {
                    if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                        continue;
                    }
                    let code = lbp_code(img, x, y);
                    let bin = uniform.iter().position(|&u| u == code).unwrap_or(58);
                    counts[bin] += 1;
                }
            }
            let total: usize = counts.iter().sum();
            out.extend(counts.iter().map(|&c| {
                if total == 0 {
                    0.0
                } else {
                    c as f64 / total as f64
                }
            }));
        }
    }
    out
}

/// Full scan and full sort; `(id, distance)` ascending with id tie-break.
pub fn brute_top_k(
    entries: &[(String, Vec<f64>)],
    w: &[f64],
    q: &[f64],
    k: usize,
    exclude: Option<&str>,
) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = entries
        .iter()
        .filter(|(id, _)| Some(id.as_str()) != exclude)
        .map(|(id, v)| {
            let mut s = 0.0;
            for i in 0..w.len() {
                s += w[i] * (q[i] - v[i]) * (q[i] - v[i]);
            }
            (id.clone(), s.sqrt())
        })
        .collect();
    all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// Objective value straight from the definition, with the same
/// `√(q + 1e-12)` smoothing the trainer uses.
pub fn objective_value(w: &[f64], data: &[EmbeddedTriplet], lambda: f64) -> f64 {
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        let q: f64 = (0..w.len()).map(|i| w[i] * (a[i] - b[i]).powi(2)).sum();
        (q + 1e-12).sqrt()
    };
    let mut nll = 0.0;
    for t in data {
        let p = 1.0 / (1.0 + (dist(&t.f_ref, &t.f_winner) - dist(&t.f_ref, &t.f_loser)).exp());
        nll -= p.ln();
    }
    nll + lambda * w.iter().map(|x| x.abs()).sum::<f64>()
}

/// Central finite differences of `f` at `x`.
pub fn finite_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], step: f64) -> Vec<f64> {
    let mut g = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = f(&probe);
        probe[i] = x[i] - step;
        let down = f(&probe);
        probe[i] = x[i];
        g.push((up - down) / (2.0 * step));
    }
    g
}
