//! Dense linear algebra, softmax, and normalization layers.

use ndarray::{ArrayD, Axis, Ix2, Ix3, IxDyn};

use super::{Graph, Value};

fn dot2(a: &ArrayD<f64>, b: &ArrayD<f64>) -> ArrayD<f64> {
    let a2 = a.view().into_dimensionality::<Ix2>().unwrap();
    let b2 = b.view().into_dimensionality::<Ix2>().unwrap();
    a2.dot(&b2).into_dyn()
}

impl Graph {
    /// `[M, K] x [K, N] -> [M, N]`.
    pub fn matmul2(&mut self, a: Value, b: Value) -> Value {
        let (ash, bsh) = (self.shape(a), self.shape(b));
        assert_eq!(ash.len(), 2);
        assert_eq!(bsh.len(), 2);
        assert_eq!(ash[1], bsh[0], "inner dimensions must agree");
        let out = dot2(self.value(a), self.value(b));
        self.push(
            out,
            vec![a, b],
            Some(Box::new(|g, p, _| {
                let g2 = g.view().into_dimensionality::<Ix2>().unwrap();
                let a2 = p[0].view().into_dimensionality::<Ix2>().unwrap();
                let b2 = p[1].view().into_dimensionality::<Ix2>().unwrap();
                vec![
                    Some(g2.dot(&b2.t()).into_dyn()),
                    Some(a2.t().dot(&g2).into_dyn()),
                ]
            })),
            false,
        )
    }

    /// Batched `[G, M, K] x [G, K, N] -> [G, M, N]`.
    pub fn bmm_nn(&mut self, a: Value, b: Value) -> Value {
        let (ash, bsh) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        assert_eq!(ash.len(), 3);
        assert_eq!(bsh.len(), 3);
        assert_eq!(ash[0], bsh[0]);
        assert_eq!(ash[2], bsh[1]);
        let (g, m, n) = (ash[0], ash[1], bsh[2]);
        let av = self.value(a).view().into_dimensionality::<Ix3>().unwrap();
        let bv = self.value(b).view().into_dimensionality::<Ix3>().unwrap();
        let mut out = ndarray::Array3::<f64>::zeros((g, m, n));
        for gi in 0..g {
            out.index_axis_mut(Axis(0), gi)
                .assign(&av.index_axis(Axis(0), gi).dot(&bv.index_axis(Axis(0), gi)));
        }
        self.push(
            out.into_dyn(),
            vec![a, b],
            Some(Box::new(move |go, p, _| {
                let g3 = go.view().into_dimensionality::<Ix3>().unwrap();
                let a3 = p[0].view().into_dimensionality::<Ix3>().unwrap();
                let b3 = p[1].view().into_dimensionality::<Ix3>().unwrap();
                let mut da = ndarray::Array3::<f64>::zeros(a3.dim());
                let mut db = ndarray::Array3::<f64>::zeros(b3.dim());
                for gi in 0..g3.dim().0 {
                    let gg = g3.index_axis(Axis(0), gi);
                    da.index_axis_mut(Axis(0), gi)
                        .assign(&gg.dot(&b3.index_axis(Axis(0), gi).t()));
                    db.index_axis_mut(Axis(0), gi)
                        .assign(&a3.index_axis(Axis(0), gi).t().dot(&gg));
                }
                vec![Some(da.into_dyn()), Some(db.into_dyn())]
            })),
            false,
        )
    }

    /// Batched `[G, M, K] x [G, N, K]^T -> [G, M, N]`.
    pub fn bmm_nt(&mut self, a: Value, b: Value) -> Value {
        let (ash, bsh) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        assert_eq!(ash.len(), 3);
        assert_eq!(bsh.len(), 3);
        assert_eq!(ash[0], bsh[0]);
        assert_eq!(ash[2], bsh[2], "contraction dimensions must agree");
        let (g, m, n) = (ash[0], ash[1], bsh[1]);
        let av = self.value(a).view().into_dimensionality::<Ix3>().unwrap();
        let bv = self.value(b).view().into_dimensionality::<Ix3>().unwrap();
        let mut out = ndarray::Array3::<f64>::zeros((g, m, n));
        for gi in 0..g {
            out.index_axis_mut(Axis(0), gi).assign(
                &av.index_axis(Axis(0), gi)
                    .dot(&bv.index_axis(Axis(0), gi).t()),
            );
        }
        self.push(
            out.into_dyn(),
            vec![a, b],
            Some(Box::new(move |go, p, _| {
                let g3 = go.view().into_dimensionality::<Ix3>().unwrap();
                let a3 = p[0].view().into_dimensionality::<Ix3>().unwrap();
                let b3 = p[1].view().into_dimensionality::<Ix3>().unwrap();
                let mut da = ndarray::Array3::<f64>::zeros(a3.dim());
                let mut db = ndarray::Array3::<f64>::zeros(b3.dim());
                for gi in 0..g3.dim().0 {
                    let gg = g3.index_axis(Axis(0), gi);
                    da.index_axis_mut(Axis(0), gi)
                        .assign(&gg.dot(&b3.index_axis(Axis(0), gi)));
                    db.index_axis_mut(Axis(0), gi)
                        .assign(&gg.t().dot(&a3.index_axis(Axis(0), gi)));
                }
                vec![Some(da.into_dyn()), Some(db.into_dyn())]
            })),
            false,
        )
    }

    /// Softmax over the last axis, numerically stabilized by the row max.
    pub fn softmax_rows(&mut self, a: Value) -> Value {
        assert!(!self.shape(a).is_empty());
        let mut out = self.value(a).clone();
        for mut row in out.rows_mut() {
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|x| (x - mx).exp());
            let s = row.sum();
            row.mapv_inplace(|x| x / s);
        }
        self.push(
            out,
            vec![a],
            Some(Box::new(|g, _, y| {
                // dx = y * (g - sum(g * y, last axis))
                let mut d = g.clone();
                for (mut drow, yrow) in d.rows_mut().into_iter().zip(y.rows()) {
                    let s = drow.iter().zip(yrow.iter()).map(|(a, b)| a * b).sum::<f64>();
                    for (dv, &yv) in drow.iter_mut().zip(yrow.iter()) {
                        *dv = yv * (*dv - s);
                    }
                }
                vec![Some(d)]
            })),
            false,
        )
    }

    /// Layer normalization over the last axis with affine parameters.
    /// `gamma` and `beta` have shape `[C]` where `C` is the last-axis extent.
    pub fn layer_norm(&mut self, x: Value, gamma: Value, beta: Value, eps: f64) -> Value {
        let xs = self.shape(x).to_vec();
        let c = *xs.last().unwrap();
        assert_eq!(self.shape(gamma), &[c]);
        assert_eq!(self.shape(beta), &[c]);
        let xv = self.value(x);
        let gv = self.value(gamma).clone();
        let bv = self.value(beta).clone();
        let mut out = xv.clone();
        for mut row in out.rows_mut() {
            let mu = row.mean().unwrap();
            let var = row.iter().map(|&v| (v - mu) * (v - mu)).sum::<f64>() / c as f64;
            let inv = 1.0 / (var + eps).sqrt();
            for (i, v) in row.iter_mut().enumerate() {
                *v = (*v - mu) * inv * gv[[i]] + bv[[i]];
            }
        }
        self.push(
            out,
            vec![x, gamma, beta],
            Some(Box::new(move |g, p, _| {
                let xv = p[0];
                let gamma = p[1];
                let cn = c as f64;
                let mut dx = xv.clone();
                let mut dgamma = vec![0.0; c];
                let mut dbeta = vec![0.0; c];
                for (mut dxrow, (xrow, grow)) in dx
                    .rows_mut()
                    .into_iter()
                    .zip(xv.rows().into_iter().zip(g.rows()))
                {
                    let mu = xrow.mean().unwrap();
                    let var = xrow.iter().map(|&v| (v - mu) * (v - mu)).sum::<f64>() / cn;
                    let inv = 1.0 / (var + eps).sqrt();
                    let mut m1 = 0.0; // mean of dxhat
                    let mut m2 = 0.0; // mean of dxhat * xhat
                    for i in 0..c {
                        let xhat = (xrow[i] - mu) * inv;
                        let dxhat = grow[i] * gamma[[i]];
                        m1 += dxhat;
                        m2 += dxhat * xhat;
                        dgamma[i] += grow[i] * xhat;
                        dbeta[i] += grow[i];
                    }
                    m1 /= cn;
                    m2 /= cn;
                    for i in 0..c {
                        let xhat = (xrow[i] - mu) * inv;
                        let dxhat = grow[i] * gamma[[i]];
                        dxrow[i] = inv * (dxhat - m1 - xhat * m2);
                    }
                }
                vec![
                    Some(dx),
                    Some(ArrayD::from_shape_vec(IxDyn(&[c]), dgamma).unwrap()),
                    Some(ArrayD::from_shape_vec(IxDyn(&[c]), dbeta).unwrap()),
                ]
            })),
            false,
        )
    }

    /// Instance normalization of `[B, C, H, W]` over the spatial axes, no
    /// affine parameters.
    pub fn instance_norm(&mut self, x: Value, eps: f64) -> Value {
        let xs = self.shape(x).to_vec();
        assert_eq!(xs.len(), 4);
        let (b, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        let hw = h * w;
        assert!(hw > 1, "instance norm needs more than one spatial element");
        let mut out = self.value(x).clone();
        {
            let of = out.as_slice_mut().unwrap();
            for bc in 0..b * c {
                let sl = &mut of[bc * hw..(bc + 1) * hw];
                let mu = sl.iter().sum::<f64>() / hw as f64;
                let var = sl.iter().map(|&v| (v - mu) * (v - mu)).sum::<f64>() / hw as f64;
                let inv = 1.0 / (var + eps).sqrt();
                for v in sl.iter_mut() {
                    *v = (*v - mu) * inv;
                }
            }
        }
        self.push(
            out,
            vec![x],
            Some(Box::new(move |g, p, _| {
                let xf = super::flat(p[0]);
                let gf = super::flat(g);
                let mut dx = vec![0.0; xf.len()];
                let n = hw as f64;
                for bc in 0..b * c {
                    let xs = &xf[bc * hw..(bc + 1) * hw];
                    let gs = &gf[bc * hw..(bc + 1) * hw];
                    let mu = xs.iter().sum::<f64>() / n;
                    let var = xs.iter().map(|&v| (v - mu) * (v - mu)).sum::<f64>() / n;
                    let inv = 1.0 / (var + eps).sqrt();
                    let mut m1 = 0.0;
                    let mut m2 = 0.0;
                    for i in 0..hw {
                        let xhat = (xs[i] - mu) * inv;
                        m1 += gs[i];
                        m2 += gs[i] * xhat;
                    }
                    m1 /= n;
                    m2 /= n;
                    let ds = &mut dx[bc * hw..(bc + 1) * hw];
                    for i in 0..hw {
                        let xhat = (xs[i] - mu) * inv;
                        ds[i] = inv * (gs[i] - m1 - xhat * m2);
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
