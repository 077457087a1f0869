//! Separable filtering with symmetric (edge-repeating) border extension.

/// Maps an out-of-range index into `0..n` by mirroring with the edge sample
/// repeated (`... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...`).
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Correlates a `w x h` plane with `kernel` along rows and then columns.
/// `origin` is the kernel tap aligned with the output sample.
pub(crate) fn separable(plane: &[f64], w: usize, h: usize, kernel: &[f64], origin: usize) -> Vec<f64> {
    let taps = kernel.len();
    let before = origin;
    let after = taps - 1 - origin;

    let mut tmp = vec![0.0; w * h];
    let mut padded = vec![0.0; w.max(h) + taps];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for (k, slot) in padded.iter_mut().take(w + before + after).enumerate() {
            *slot = row[reflect(k as isize - before as isize, w)];
        }
        let out = &mut tmp[y * w..(y + 1) * w];
        for (x, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, c) in kernel.iter().enumerate() {
                acc += c * padded[x + k];
            }
            *o = acc;
        }
    }

    let mut out = vec![0.0; w * h];
    let mut col = vec![0.0; h + before + after];
    for x in 0..w {
        for (k, slot) in col.iter_mut().enumerate() {
            *slot = tmp[reflect(k as isize - before as isize, h) * w + x];
        }
        for y in 0..h {
            let mut acc = 0.0;
            for (k, c) in kernel.iter().enumerate() {
                acc += c * col[y + k];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Normalized 1-D Gaussian of `2 * radius + 1` taps.
pub(crate) fn gaussian_kernel(radius: usize, sigma: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// 2x2 block mean, dropping a trailing odd row/column.
pub(crate) fn downsample2(plane: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
    let (nw, nh) = (w / 2, h / 2);
    let mut out = Vec::with_capacity(nw * nh);
    for y in 0..nh {
        for x in 0..nw {
            let a = plane[2 * y * w + 2 * x];
            let b = plane[2 * y * w + 2 * x + 1];
            let c = plane[(2 * y + 1) * w + 2 * x];
            let d = plane[(2 * y + 1) * w + 2 * x + 1];
            out.push((a + b + c + d) / 4.0);
        }
    }
    (out, nw, nh)
}

/// 2x2 block "any" for occupancy masks, matching [`downsample2`].
pub(crate) fn downsample_mask(mask: &[bool], w: usize, h: usize) -> Vec<bool> {
    let (nw, nh) = (w / 2, h / 2);
    let mut out = Vec::with_capacity(nw * nh);
    for y in 0..nh {
        for x in 0..nw {
            out.push(
                mask[2 * y * w + 2 * x]
                    || mask[2 * y * w + 2 * x + 1]
                    || mask[(2 * y + 1) * w + 2 * x]
                    || mask[(2 * y + 1) * w + 2 * x + 1],
            );
        }
    }
    out
}

/// Mean of `values`, restricted to `mask` when given and non-empty.
pub(crate) fn masked_mean(values: &[f64], mask: Option<&[bool]>) -> f64 {
    match mask {
        Some(m) if m.iter().any(|&b| b) => {
            let mut sum = 0.0;
            let mut n = 0usize;
            for (v, _) in values.iter().zip(m).filter(|(_, &b)| b) {
                sum += v;
                n += 1;
            }
            sum / n as f64
        }
        _ => values.iter().sum::<f64>() / values.len() as f64,
    }
}
