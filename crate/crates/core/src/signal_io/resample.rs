//! Separable linear resampling.
//!
//! Every geometric operation in the pipeline (resize, crop, flip, area
//! pooling) is a linear map applied independently along each image axis.
//! [`AxisMap`] stores one such map as sparse taps, so the forward pass and
//! its adjoint (used for back-propagation) share one description.

/// A sparse linear map from a source axis of `src_len` samples to
/// `taps.len()` destination samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisMap {
    src_len: usize,
    taps: Vec<Vec<(usize, f64)>>,
}

impl AxisMap {
    pub fn src_len(&self) -> usize {
        self.src_len
    }

    pub fn dst_len(&self) -> usize {
        self.taps.len()
    }

    pub fn taps(&self, dst: usize) -> &[(usize, f64)] {
        &self.taps[dst]
    }

    pub fn identity(len: usize) -> Self {
        Self {
            src_len: len,
            taps: (0..len).map(|i| vec![(i, 1.0)]).collect(),
        }
    }

    /// Bilinear interpolation with half-pixel centers, clamped at the edges.
    pub fn bilinear(src_len: usize, dst_len: usize) -> Self {
        assert!(src_len >= 1 && dst_len >= 1);
        let scale = src_len as f64 / dst_len as f64;
        let last = (src_len - 1) as f64;
        let taps = (0..dst_len)
            .map(|i| {
                let x = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
                let i0 = x.floor() as usize;
                let frac = x - i0 as f64;
                let i1 = (i0 + 1).min(src_len - 1);
                if frac == 0.0 || i0 == i1 {
                    vec![(i0, 1.0)]
                } else {
                    vec![(i0, 1.0 - frac), (i1, frac)]
                }
            })
            .collect();
        Self { src_len, taps }
    }

    /// Box-filter (area) resampling: each destination sample averages the
    /// source interval it covers, with fractional weights at the ends.
    pub fn area(src_len: usize, dst_len: usize) -> Self {
        assert!(src_len >= 1 && dst_len >= 1);
        let scale = src_len as f64 / dst_len as f64;
        let taps = (0..dst_len)
            .map(|i| {
                let lo = i as f64 * scale;
                let hi = lo + scale;
                let mut row = Vec::new();
                let first = lo.floor() as usize;
                let end = (hi.ceil() as usize).min(src_len);
                for s in first..end {
                    let overlap = (hi.min(s as f64 + 1.0) - lo.max(s as f64)).max(0.0);
                    if overlap > 0.0 {
                        row.push((s, overlap / scale));
                    }
                }
                row
            })
            .collect();
        Self { src_len, taps }
    }

    /// Selects `len` consecutive samples starting at `start`.
    pub fn crop(src_len: usize, start: usize, len: usize) -> Self {
        assert!(start + len <= src_len && len >= 1);
        Self {
            src_len,
            taps: (start..start + len).map(|i| vec![(i, 1.0)]).collect(),
        }
    }

    pub fn flip(len: usize) -> Self {
        Self {
            src_len: len,
            taps: (0..len).rev().map(|i| vec![(i, 1.0)]).collect(),
        }
    }

    /// Returns the map that applies `inner` first and then `self`.
    pub fn after(&self, inner: &AxisMap) -> AxisMap {
        assert_eq!(self.src_len, inner.dst_len(), "axis maps do not chain");
        let taps = self
            .taps
            .iter()
            .map(|outer| {
                let mut acc: Vec<(usize, f64)> = Vec::new();
                for &(mid, w_outer) in outer {
                    for &(src, w_inner) in &inner.taps[mid] {
                        match acc.iter_mut().find(|(s, _)| *s == src) {
                            Some(entry) => entry.1 += w_outer * w_inner,
                            None => acc.push((src, w_outer * w_inner)),
                        }
                    }
                }
                acc.sort_by_key(|&(s, _)| s);
                acc
            })
            .collect();
        AxisMap {
            src_len: inner.src_len,
            taps,
        }
    }
}

/// Applies `rows` and `cols` to an interleaved `h × w × channels` grid.
pub fn apply(data: &[f64], channels: usize, rows: &AxisMap, cols: &AxisMap) -> Vec<f64> {
    let (h, w) = (rows.src_len, cols.src_len);
    assert_eq!(data.len(), h * w * channels);
    let w_out = cols.dst_len();
    let h_out = rows.dst_len();

    let mut tmp = vec![0.0; h * w_out * channels];
    for y in 0..h {
        for (xo, taps) in cols.taps.iter().enumerate() {
            let dst = &mut tmp[(y * w_out + xo) * channels..][..channels];
            for &(x, wt) in taps {
                let src = &data[(y * w + x) * channels..][..channels];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += wt * s;
                }
            }
        }
    }

    let mut out = vec![0.0; h_out * w_out * channels];
    for (yo, taps) in rows.taps.iter().enumerate() {
        let dst_row = &mut out[yo * w_out * channels..][..w_out * channels];
        for &(y, wt) in taps {
            let src_row = &tmp[y * w_out * channels..][..w_out * channels];
            for (d, s) in dst_row.iter_mut().zip(src_row) {
                *d += wt * s;
            }
        }
    }
    out
}

/// Adjoint of [`apply`]: maps a gradient on the output grid back to the
/// input grid.
pub fn apply_adjoint(grad: &[f64], channels: usize, rows: &AxisMap, cols: &AxisMap) -> Vec<f64> {
    let (h, w) = (rows.src_len, cols.src_len);
    let w_out = cols.dst_len();
    let h_out = rows.dst_len();
    assert_eq!(grad.len(), h_out * w_out * channels);

    let mut tmp = vec![0.0; h * w_out * channels];
    for (yo, taps) in rows.taps.iter().enumerate() {
        let g_row = &grad[yo * w_out * channels..][..w_out * channels];
        for &(y, wt) in taps {
            let t_row = &mut tmp[y * w_out * channels..][..w_out * channels];
            for (t, g) in t_row.iter_mut().zip(g_row) {
                *t += wt * g;
            }
        }
    }

    let mut out = vec![0.0; h * w * channels];
    for y in 0..h {
        for (xo, taps) in cols.taps.iter().enumerate() {
            let g = &tmp[(y * w_out + xo) * channels..][..channels];
            for &(x, wt) in taps {
                let dst = &mut out[(y * w + x) * channels..][..channels];
                for (d, gv) in dst.iter_mut().zip(g) {
                    *d += wt * gv;
                }
            }
        }
    }
    out
}
