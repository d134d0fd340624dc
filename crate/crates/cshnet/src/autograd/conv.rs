//! Convolutions via im2col and GEMM, plus average pooling.
//!
//! All convolutions are valid-mode; callers pad explicitly (`pad_zero`,
//! `pad_reflect`) so one kernel implementation serves every layer.

use ndarray::{Array2, ArrayD, IxDyn};

use super::{flat, Graph, Value};

/// Lower one image `[C, H, W]` (flat slice) into columns
/// `[C*KH*KW, OH*OW]` for a valid convolution with the given stride.
fn im2col(src: &[f64], c: usize, h: usize, w: usize, k: usize, s: usize) -> Array2<f64> {
    let oh = (h - k) / s + 1;
    let ow = (w - k) / s + 1;
    let mut cols = Array2::<f64>::zeros((c * k * k, oh * ow));
    {
        let cf = cols.as_slice_mut().unwrap();
        for ci in 0..c {
            for ky in 0..k {
                for kx in 0..k {
                    let row = ((ci * k + ky) * k + kx) * (oh * ow);
                    for y in 0..oh {
                        let srow = (ci * h + y * s + ky) * w + kx;
                        let drow = row + y * ow;
                        for x in 0..ow {
                            cf[drow + x] = src[srow + x * s];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-add columns back into an image; the exact adjoint of [`im2col`].
fn col2im(cols: &Array2<f64>, dst: &mut [f64], c: usize, h: usize, w: usize, k: usize, s: usize) {
    let oh = (h - k) / s + 1;
    let ow = (w - k) / s + 1;
    let cf = cols.as_slice().unwrap();
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ci * k + ky) * k + kx) * (oh * ow);
                for y in 0..oh {
                    let drow = (ci * h + y * s + ky) * w + kx;
                    let srow = row + y * ow;
                    for x in 0..ow {
                        dst[drow + x * s] += cf[srow + x];
                    }
                }
            }
        }
    }
}

impl Graph {
    /// Valid 2D convolution. `x` is `[B, Cin, H, W]`, `weight` is
    /// `[Cout, Cin, K, K]`; output `[B, Cout, OH, OW]` with
    /// `OH = (H - K) / stride + 1`.
    pub fn conv2d(&mut self, x: Value, weight: Value, stride: usize) -> Value {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(weight).to_vec();
        assert_eq!(xs.len(), 4);
        assert_eq!(ws.len(), 4);
        assert_eq!(xs[1], ws[1], "input channels must match kernel");
        assert_eq!(ws[2], ws[3], "square kernels only");
        let (b, cin, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        let (cout, k) = (ws[0], ws[2]);
        assert!(h >= k && w >= k, "kernel larger than padded input");
        let oh = (h - k) / stride + 1;
        let ow = (w - k) / stride + 1;

        let wmat = self
            .value(weight)
            .view()
            .into_shape_with_order((cout, cin * k * k))
            .unwrap()
            .to_owned();
        let xf = flat(self.value(x));
        let mut out = vec![0.0; b * cout * oh * ow];
        for bi in 0..b {
            let cols = im2col(&xf[bi * cin * h * w..(bi + 1) * cin * h * w], cin, h, w, k, stride);
            let res = wmat.dot(&cols);
            out[bi * cout * oh * ow..(bi + 1) * cout * oh * ow]
                .copy_from_slice(res.as_slice().unwrap());
        }
        self.push(
            ArrayD::from_shape_vec(IxDyn(&[b, cout, oh, ow]), out).unwrap(),
            vec![x, weight],
            Some(Box::new(move |g, p, _| {
                let xf = flat(p[0]);
                let wmat = p[1]
                    .view()
                    .into_shape_with_order((cout, cin * k * k))
                    .unwrap()
                    .to_owned();
                let gf = flat(g);
                let mut dx = vec![0.0; b * cin * h * w];
                let mut dw = Array2::<f64>::zeros((cout, cin * k * k));
                for bi in 0..b {
                    let gmat = ndarray::ArrayView2::from_shape(
                        (cout, oh * ow),
                        &gf[bi * cout * oh * ow..(bi + 1) * cout * oh * ow],
                    )
                    .unwrap();
                    let cols =
                        im2col(&xf[bi * cin * h * w..(bi + 1) * cin * h * w], cin, h, w, k, stride);
                    dw = dw + gmat.dot(&cols.t());
                    let dcols = wmat.t().dot(&gmat);
                    col2im(
                        &dcols,
                        &mut dx[bi * cin * h * w..(bi + 1) * cin * h * w],
                        cin,
                        h,
                        w,
                        k,
                        stride,
                    );
                }
                vec![
                    Some(ArrayD::from_shape_vec(IxDyn(&[b, cin, h, w]), dx).unwrap()),
                    Some(
                        dw.into_shape_with_order(IxDyn(&[cout, cin, k, k]))
                            .unwrap(),
                    ),
                ]
            })),
            false,
        )
    }

    /// Full transposed 2D convolution (no implicit padding). `x` is
    /// `[B, Cin, H, W]`, `weight` is `[Cin, Cout, K, K]`; output
    /// `[B, Cout, (H-1)*stride + K, (W-1)*stride + K]`.
    pub fn conv_transpose2d_full(&mut self, x: Value, weight: Value, stride: usize) -> Value {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(weight).to_vec();
        assert_eq!(xs.len(), 4);
        assert_eq!(ws.len(), 4);
        assert_eq!(xs[1], ws[0], "input channels must match kernel");
        assert_eq!(ws[2], ws[3]);
        let (b, cin, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        let (cout, k) = (ws[1], ws[2]);
        let oh = (h - 1) * stride + k;
        let ow = (w - 1) * stride + k;

        // cols = W^T x  scatters into the output exactly where im2col with
        // this stride would read, so col2im realizes the upsampling.
        let wmat = self
            .value(weight)
            .view()
            .into_shape_with_order((cin, cout * k * k))
            .unwrap()
            .to_owned();
        let xf = flat(self.value(x));
        let mut out = vec![0.0; b * cout * oh * ow];
        for bi in 0..b {
            let xmat = ndarray::ArrayView2::from_shape(
                (cin, h * w),
                &xf[bi * cin * h * w..(bi + 1) * cin * h * w],
            )
            .unwrap();
            let cols = wmat.t().dot(&xmat);
            col2im(
                &cols.as_standard_layout().to_owned(),
                &mut out[bi * cout * oh * ow..(bi + 1) * cout * oh * ow],
                cout,
                oh,
                ow,
                k,
                stride,
            );
        }
        self.push(
            ArrayD::from_shape_vec(IxDyn(&[b, cout, oh, ow]), out).unwrap(),
            vec![x, weight],
            Some(Box::new(move |g, p, _| {
                let xf = flat(p[0]);
                let wmat = p[1]
                    .view()
                    .into_shape_with_order((cin, cout * k * k))
                    .unwrap()
                    .to_owned();
                let gf = flat(g);
                let mut dx = vec![0.0; b * cin * h * w];
                let mut dwt = Array2::<f64>::zeros((cout * k * k, cin));
                for bi in 0..b {
                    let dcols = im2col(
                        &gf[bi * cout * oh * ow..(bi + 1) * cout * oh * ow],
                        cout,
                        oh,
                        ow,
                        k,
                        stride,
                    );
                    let xmat = ndarray::ArrayView2::from_shape(
                        (cin, h * w),
                        &xf[bi * cin * h * w..(bi + 1) * cin * h * w],
                    )
                    .unwrap();
                    let dxm = wmat.dot(&dcols);
                    dx[bi * cin * h * w..(bi + 1) * cin * h * w]
                        .copy_from_slice(dxm.as_standard_layout().as_slice().unwrap());
                    dwt = dwt + dcols.dot(&xmat.t());
                }
                let dw = dwt.t().as_standard_layout().to_owned();
                vec![
                    Some(ArrayD::from_shape_vec(IxDyn(&[b, cin, h, w]), dx).unwrap()),
                    Some(
                        dw.into_shape_with_order(IxDyn(&[cin, cout, k, k]))
                            .unwrap(),
                    ),
                ]
            })),
            false,
        )
    }

    /// Transposed convolution with crop semantics matching stride-2 learned
    /// upsampling: output extent `(H-1)*stride - 2*pad + K + out_pad`.
    pub fn conv_transpose2d(
        &mut self,
        x: Value,
        weight: Value,
        stride: usize,
        pad: usize,
        out_pad: usize,
    ) -> Value {
        assert!(out_pad <= pad, "output padding beyond crop is unsupported");
        let full = self.conv_transpose2d_full(x, weight, stride);
        if pad == 0 && out_pad == 0 {
            return full;
        }
        let fs = self.shape(full).to_vec();
        let oh = fs[2] - 2 * pad + out_pad;
        let ow = fs[3] - 2 * pad + out_pad;
        self.crop2d(full, pad, pad, oh, ow)
    }

    /// 2x2 average pooling with stride 2; spatial extents must be even.
    pub fn avg_pool2(&mut self, x: Value) -> Value {
        let xs = self.shape(x).to_vec();
        assert_eq!(xs.len(), 4);
        let (b, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        assert!(h % 2 == 0 && w % 2 == 0, "pooling needs even extents");
        let (oh, ow) = (h / 2, w / 2);
        let xf = flat(self.value(x));
        let mut out = vec![0.0; b * c * oh * ow];
        for bc in 0..b * c {
            for y in 0..oh {
                let r0 = (bc * h + 2 * y) * w;
                let r1 = r0 + w;
                let d = (bc * oh + y) * ow;
                for x in 0..ow {
                    out[d + x] =
                        0.25 * (xf[r0 + 2 * x] + xf[r0 + 2 * x + 1] + xf[r1 + 2 * x] + xf[r1 + 2 * x + 1]);
                }
            }
        }
        self.push(
            ArrayD::from_shape_vec(IxDyn(&[b, c, oh, ow]), out).unwrap(),
            vec![x],
            Some(Box::new(move |g, _, _| {
                let gf = flat(g);
                let mut dx = vec![0.0; b * c * h * w];
                for bc in 0..b * c {
                    for y in 0..oh {
                        let r0 = (bc * h + 2 * y) * w;
                        let r1 = r0 + w;
                        let s = (bc * oh + y) * ow;
                        for x in 0..ow {
                            let gv = 0.25 * gf[s + x];
                            dx[r0 + 2 * x] += gv;
                            dx[r0 + 2 * x + 1] += gv;
                            dx[r1 + 2 * x] += gv;
                            dx[r1 + 2 * x + 1] += gv;
                        }
                    }
                }
                vec![Some(
                    ArrayD::from_shape_vec(IxDyn(&[b, c, h, w]), dx).unwrap(),
                )]
            })),
            false,
        )
    }
}
