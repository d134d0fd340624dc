//! Shape manipulation: reshape, index gather, concat, padding, cropping.
//!
//! Most layout changes (window partitioning, cyclic shifts, head splits)
//! funnel through one `gather` op driven by a precomputed index map, so each
//! layout needs only a forward index builder; the scatter-add backward comes
//! for free.

use std::sync::Arc;

use ndarray::{ArrayD, IxDyn};

use super::{flat, Graph, Value};

impl Graph {
    pub fn reshape(&mut self, a: Value, shape: &[usize]) -> Value {
        let old: Vec<usize> = self.shape(a).to_vec();
        let out = self
            .value(a)
            .clone()
            .into_shape_with_order(IxDyn(shape))
            .expect("reshape element count mismatch");
        self.push(
            out,
            vec![a],
            Some(Box::new(move |g, _, _| {
                vec![Some(
                    g.clone().into_shape_with_order(IxDyn(&old)).unwrap(),
                )]
            })),
            false,
        )
    }

    /// `out[i] = a[map[i]]` over flattened standard-layout storage. The
    /// backward pass scatter-adds, so maps may repeat source indices.
    pub fn gather(&mut self, a: Value, map: Arc<Vec<u32>>, out_shape: &[usize]) -> Value {
        let n: usize = out_shape.iter().product();
        assert_eq!(map.len(), n, "index map must cover the output");
        let src = flat(self.value(a));
        let src_len = src.len();
        let data: Vec<f64> = map.iter().map(|&i| src[i as usize]).collect();
        let out = ArrayD::from_shape_vec(IxDyn(out_shape), data).unwrap();
        self.push(
            out,
            vec![a],
            Some(Box::new(move |g, p, _| {
                let gf = flat(g);
                let mut acc = vec![0.0; src_len];
                for (o, &i) in gf.iter().zip(map.iter()) {
                    acc[i as usize] += *o;
                }
                vec![Some(
                    ArrayD::from_shape_vec(IxDyn(p[0].shape()), acc).unwrap(),
                )]
            })),
            false,
        )
    }

    /// Concatenate along an axis; all inputs must agree on the other axes.
    pub fn concat(&mut self, parts: &[Value], axis: usize) -> Value {
        assert!(!parts.is_empty());
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = ndarray::concatenate(ndarray::Axis(axis), &views).expect("concat shape mismatch");
        let sizes: Vec<usize> = parts.iter().map(|&p| self.shape(p)[axis]).collect();
        self.push(
            out,
            parts.to_vec(),
            Some(Box::new(move |g, _, _| {
                let mut grads = Vec::with_capacity(sizes.len());
                let mut start = 0;
                for &s in &sizes {
                    let sl = g.slice_axis(
                        ndarray::Axis(axis),
                        ndarray::Slice::from(start..start + s as isize),
                    );
                    grads.push(Some(sl.to_owned().as_standard_layout().to_owned()));
                    start += s as isize;
                }
                grads
            })),
            false,
        )
    }

    /// Zero-pad the last two axes of `[B, C, H, W]` by `pad` on every side.
    pub fn pad_zero(&mut self, a: Value, pad: usize) -> Value {
        let s = self.shape(a).to_vec();
        assert_eq!(s.len(), 4);
        let (b, c, h, w) = (s[0], s[1], s[2], s[3]);
        let (hp, wp) = (h + 2 * pad, w + 2 * pad);
        let src = flat(self.value(a));
        let mut data = vec![0.0; b * c * hp * wp];
        for bc in 0..b * c {
            for y in 0..h {
                let srow = (bc * h + y) * w;
                let drow = (bc * hp + y + pad) * wp + pad;
                data[drow..drow + w].copy_from_slice(&src[srow..srow + w]);
            }
        }
        let out = ArrayD::from_shape_vec(IxDyn(&[b, c, hp, wp]), data).unwrap();
        self.push(
            out,
            vec![a],
            Some(Box::new(move |g, _, _| {
                let gf = flat(g);
                let mut acc = vec![0.0; b * c * h * w];
                for bc in 0..b * c {
                    for y in 0..h {
                        let drow = (bc * h + y) * w;
                        let srow = (bc * hp + y + pad) * wp + pad;
                        acc[drow..drow + w].copy_from_slice(&gf[srow..srow + w]);
                    }
                }
                vec![Some(
                    ArrayD::from_shape_vec(IxDyn(&[b, c, h, w]), acc).unwrap(),
                )]
            })),
            false,
        )
    }

    /// Reflect-pad the last two axes of `[B, C, H, W]` by `pad` per side.
    /// Edge pixels are included in the reflection (symmetric mode), which
    /// stays well-defined even when `pad >= H` or `pad >= W`.
    pub fn pad_reflect(&mut self, a: Value, pad: usize) -> Value {
        let s = self.shape(a).to_vec();
        assert_eq!(s.len(), 4);
        let (b, c, h, w) = (s[0], s[1], s[2], s[3]);
        let (hp, wp) = (h + 2 * pad, w + 2 * pad);
        let mut map = Vec::with_capacity(b * c * hp * wp);
        for bc in 0..b * c {
            for y in 0..hp {
                let sy = fold_index(y as isize - pad as isize, h);
                for x in 0..wp {
                    let sx = fold_index(x as isize - pad as isize, w);
                    map.push(((bc * h + sy) * w + sx) as u32);
                }
            }
        }
        self.gather(a, Arc::new(map), &[b, c, hp, wp])
    }

    /// Crop the last two axes of `[B, C, H, W]` to `[y0..y0+oh, x0..x0+ow]`.
    pub fn crop2d(&mut self, a: Value, y0: usize, x0: usize, oh: usize, ow: usize) -> Value {
        let s = self.shape(a).to_vec();
        assert_eq!(s.len(), 4);
        let map = crop2d_map(&s, y0, x0, oh, ow);
        self.gather(a, Arc::new(map), &[s[0], s[1], oh, ow])
    }
}

/// Symmetric reflection of a possibly out-of-range index into `[0, n)`.
pub fn fold_index(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    assert!(n > 0);
    let period = 2 * n;
    i = i.rem_euclid(period);
    if i >= n {
        i = period - 1 - i;
    }
    i as usize
}

/// Flat index map for cropping `[B, C, H, W]`.
pub fn crop2d_map(shape: &[usize], y0: usize, x0: usize, oh: usize, ow: usize) -> Vec<u32> {
    let (b, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
    assert!(y0 + oh <= h && x0 + ow <= w, "crop exceeds input bounds");
    let mut map = Vec::with_capacity(b * c * oh * ow);
    for bc in 0..b * c {
        for y in 0..oh {
            for x in 0..ow {
                map.push(((bc * h + y0 + y) * w + x0 + x) as u32);
            }
        }
    }
    map
}

/// Cyclic 2D roll of the last two axes of `[B, C, H, W]` by `(dy, dx)`,
/// where positive shifts move content toward higher indices.
pub fn roll2d_map(shape: &[usize], dy: isize, dx: isize) -> Vec<u32> {
    let (b, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
    let mut map = Vec::with_capacity(b * c * h * w);
    for bc in 0..b * c {
        for y in 0..h as isize {
            let sy = (y - dy).rem_euclid(h as isize) as usize;
            for x in 0..w as isize {
                let sx = (x - dx).rem_euclid(w as isize) as usize;
                map.push(((bc * h + sy) * w + sx) as u32);
            }
        }
    }
    map
}

/// `[B, C, H, W]` -> `[B*nWin, win*win, C]` where windows tile row-major and
/// tokens within a window scan row-major. `win` must divide `H` and `W`.
pub fn window_partition_map(shape: &[usize], win: usize) -> (Vec<u32>, Vec<usize>) {
    let (b, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
    assert!(h % win == 0 && w % win == 0, "window must tile the feature map");
    let (nh, nw) = (h / win, w / win);
    let mut map = Vec::with_capacity(b * c * h * w);
    for bi in 0..b {
        for wy in 0..nh {
            for wx in 0..nw {
                for ty in 0..win {
                    for tx in 0..win {
                        for ci in 0..c {
                            let y = wy * win + ty;
                            let x = wx * win + tx;
                            map.push((((bi * c + ci) * h + y) * w + x) as u32);
                        }
                    }
                }
            }
        }
    }
    (map, vec![b * nh * nw, win * win, c])
}

/// Inverse of [`window_partition_map`]: `[B*nWin, win*win, C]` -> `[B, C, H, W]`.
pub fn window_merge_map(shape: &[usize], win: usize) -> (Vec<u32>, Vec<usize>) {
    let (b, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
    assert!(h % win == 0 && w % win == 0);
    let (nh, nw) = (h / win, w / win);
    let mut map = Vec::with_capacity(b * c * h * w);
    for bi in 0..b {
        for ci in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let (wy, ty) = (y / win, y % win);
                    let (wx, tx) = (x / win, x % win);
                    let widx = (bi * nh + wy) * nw + wx;
                    map.push(((widx * win * win + ty * win + tx) * c + ci) as u32);
                }
            }
        }
    }
    (map, vec![b, c, h, w])
}

/// `[G, N, C]` -> `[G*heads, N, C/heads]`, splitting channels contiguously.
pub fn head_split_map(shape: &[usize], heads: usize) -> (Vec<u32>, Vec<usize>) {
    let (g, n, c) = (shape[0], shape[1], shape[2]);
    assert_eq!(c % heads, 0, "heads must divide channels");
    let hd = c / heads;
    let mut map = Vec::with_capacity(g * n * c);
    for gi in 0..g {
        for hi in 0..heads {
            for ni in 0..n {
                for di in 0..hd {
                    map.push(((gi * n + ni) * c + hi * hd + di) as u32);
                }
            }
        }
    }
    (map, vec![g * heads, n, hd])
}

/// Inverse of [`head_split_map`]: `[G*heads, N, C/heads]` -> `[G, N, C]`.
pub fn head_merge_map(shape: &[usize], heads: usize) -> (Vec<u32>, Vec<usize>) {
    let (gh, n, hd) = (shape[0], shape[1], shape[2]);
    assert_eq!(gh % heads, 0);
    let g = gh / heads;
    let c = heads * hd;
    let mut map = Vec::with_capacity(g * n * c);
    for gi in 0..g {
        for ni in 0..n {
            for hi in 0..heads {
                for di in 0..hd {
                    map.push((((gi * heads + hi) * n + ni) * hd + di) as u32);
                }
            }
        }
    }
    (map, vec![g, n, c])
}

/// Gather map from a relative position bias table `[(2*win-1)^2, heads]` to
/// per-head bias matrices `[heads, win*win, win*win]`. Entry `(i, j)` reads
/// the table row for relative offset `(yi - yj, xi - xj)`.
pub fn relpos_map(win: usize, heads: usize) -> (Vec<u32>, Vec<usize>) {
    let n = win * win;
    let span = 2 * win - 1;
    let mut map = Vec::with_capacity(heads * n * n);
    for hi in 0..heads {
        for i in 0..n {
            let (yi, xi) = (i / win, i % win);
            for j in 0..n {
                let (yj, xj) = (j / win, j % win);
                let ry = yi as isize - yj as isize + win as isize - 1;
                let rx = xi as isize - xj as isize + win as isize - 1;
                let row = (ry * span as isize + rx) as usize;
                map.push((row * heads + hi) as u32);
            }
        }
    }
    (map, vec![heads, n, n])
}
