//! Elementwise arithmetic, activations, bias adds, and reductions.

use ndarray::{ArrayD, IxDyn};

use super::{flat, Graph, Value};

const FRAC_SQRT_2_PI: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_C: f64 = 0.044_715;

impl Graph {
    pub fn add(&mut self, a: Value, b: Value) -> Value {
        let out = self.zip(a, b, |x, y| x + y);
        self.push(
            out,
            vec![a, b],
            Some(Box::new(|g, _, _| vec![Some(g.clone()), Some(g.clone())])),
            false,
        )
    }

    pub fn sub(&mut self, a: Value, b: Value) -> Value {
        let out = self.zip(a, b, |x, y| x - y);
        self.push(
            out,
            vec![a, b],
            Some(Box::new(|g, _, _| vec![Some(g.clone()), Some(-g)])),
            false,
        )
    }

    pub fn mul(&mut self, a: Value, b: Value) -> Value {
        let out = self.zip(a, b, |x, y| x * y);
        self.push(
            out,
            vec![a, b],
            Some(Box::new(|g, p, _| vec![Some(g * p[1]), Some(g * p[0])])),
            false,
        )
    }

    pub fn scale(&mut self, a: Value, c: f64) -> Value {
        let out = self.value(a).mapv(|x| x * c);
        self.push(
            out,
            vec![a],
            Some(Box::new(move |g, _, _| vec![Some(g.mapv(|x| x * c))])),
            false,
        )
    }

    pub fn add_scalar(&mut self, a: Value, c: f64) -> Value {
        let out = self.value(a).mapv(|x| x + c);
        self.push(
            out,
            vec![a],
            Some(Box::new(|g, _, _| vec![Some(g.clone())])),
            false,
        )
    }

    pub fn relu(&mut self, a: Value) -> Value {
        let out = self.value(a).mapv(|x| x.max(0.0));
        self.push(
            out,
            vec![a],
            Some(Box::new(|g, p, _| {
                let mut d = g.clone();
                d.zip_mut_with(p[0], |gi, &xi| {
                    if xi <= 0.0 {
                        *gi = 0.0;
                    }
                });
                vec![Some(d)]
            })),
            false,
        )
    }

    pub fn leaky_relu(&mut self, a: Value, slope: f64) -> Value {
        let out = self.value(a).mapv(|x| if x > 0.0 { x } else { slope * x });
        self.push(
            out,
            vec![a],
            Some(Box::new(move |g, p, _| {
                let mut d = g.clone();
                d.zip_mut_with(p[0], |gi, &xi| {
                    if xi <= 0.0 {
                        *gi *= slope;
                    }
                });
                vec![Some(d)]
            })),
            false,
        )
    }

    pub fn sigmoid(&mut self, a: Value) -> Value {
        let out = self.value(a).mapv(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(
            out,
            vec![a],
            Some(Box::new(|g, _, y| {
                let mut d = g.clone();
                d.zip_mut_with(y, |gi, &yi| *gi *= yi * (1.0 - yi));
                vec![Some(d)]
            })),
            false,
        )
    }

    pub fn tanh(&mut self, a: Value) -> Value {
        let out = self.value(a).mapv(f64::tanh);
        self.push(
            out,
            vec![a],
            Some(Box::new(|g, _, y| {
                let mut d = g.clone();
                d.zip_mut_with(y, |gi, &yi| *gi *= 1.0 - yi * yi);
                vec![Some(d)]
            })),
            false,
        )
    }

    /// Tanh-form GELU; the backward pass is the exact derivative of this
    /// approximation.
    pub fn gelu(&mut self, a: Value) -> Value {
        let out = self
            .value(a)
            .mapv(|x| 0.5 * x * (1.0 + (FRAC_SQRT_2_PI * (x + GELU_C * x * x * x)).tanh()));
        self.push(
            out,
            vec![a],
            Some(Box::new(|g, p, _| {
                let mut d = g.clone();
                d.zip_mut_with(p[0], |gi, &x| {
                    let u = FRAC_SQRT_2_PI * (x + GELU_C * x * x * x);
                    let t = u.tanh();
                    let du = FRAC_SQRT_2_PI * (1.0 + 3.0 * GELU_C * x * x);
                    *gi *= 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
                });
                vec![Some(d)]
            })),
            false,
        )
    }

    /// Elementwise square root; inputs must be strictly positive.
    pub fn sqrt(&mut self, a: Value) -> Value {
        let out = self.value(a).mapv(f64::sqrt);
        self.push(
            out,
            vec![a],
            Some(Box::new(|g, _, y| {
                let mut d = g.clone();
                d.zip_mut_with(y, |gi, &yi| *gi *= 0.5 / yi);
                vec![Some(d)]
            })),
            false,
        )
    }

    /// Elementwise absolute value with sign subgradient (0 at the origin).
    pub fn abs(&mut self, a: Value) -> Value {
        let out = self.value(a).mapv(f64::abs);
        self.push(
            out,
            vec![a],
            Some(Box::new(|g, p, _| {
                let mut d = g.clone();
                d.zip_mut_with(p[0], |gi, &xi| {
                    *gi *= if xi > 0.0 {
                        1.0
                    } else if xi < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                });
                vec![Some(d)]
            })),
            false,
        )
    }

    /// Multiply by a constant (non-differentiated) mask of the same shape.
    pub fn mul_const(&mut self, a: Value, mask: ArrayD<f64>) -> Value {
        assert_eq!(self.shape(a), mask.shape(), "mul_const shape mismatch");
        let out = self.value(a) * &mask;
        self.push(
            out,
            vec![a],
            Some(Box::new(move |g, _, _| vec![Some(g * &mask)])),
            false,
        )
    }

    /// `x + b` where `x` is `[B, C, H, W]` and `b` is `[C]`.
    pub fn add_bias_channel(&mut self, x: Value, b: Value) -> Value {
        let xs = self.shape(x).to_vec();
        assert_eq!(xs.len(), 4);
        let c = xs[1];
        assert_eq!(self.shape(b), &[c], "bias length must match channels");
        let hw = xs[2] * xs[3];
        let mut out = self.value(x).clone();
        {
            let bv = flat(self.value(b)).to_vec();
            let of = out.as_slice_mut().unwrap();
            for bi in 0..xs[0] {
                for ci in 0..c {
                    let base = (bi * c + ci) * hw;
                    for v in &mut of[base..base + hw] {
                        *v += bv[ci];
                    }
                }
            }
        }
        self.push(
            out,
            vec![x, b],
            Some(Box::new(move |g, _, _| {
                let gf = flat(g);
                let mut db = vec![0.0; c];
                let batch = g.shape()[0];
                for bi in 0..batch {
                    for ci in 0..c {
                        let base = (bi * c + ci) * hw;
                        db[ci] += gf[base..base + hw].iter().sum::<f64>();
                    }
                }
                vec![
                    Some(g.clone()),
                    Some(ArrayD::from_shape_vec(IxDyn(&[c]), db).unwrap()),
                ]
            })),
            false,
        )
    }

    /// `x + b` where `x` is `[M, N]` (rows of features) and `b` is `[N]`.
    pub fn add_bias_row(&mut self, x: Value, b: Value) -> Value {
        let xs = self.shape(x).to_vec();
        assert_eq!(xs.len(), 2);
        let n = xs[1];
        assert_eq!(self.shape(b), &[n]);
        let mut out = self.value(x).clone();
        {
            let bv = flat(self.value(b)).to_vec();
            let of = out.as_slice_mut().unwrap();
            for (i, v) in of.iter_mut().enumerate() {
                *v += bv[i % n];
            }
        }
        self.push(
            out,
            vec![x, b],
            Some(Box::new(move |g, _, _| {
                let gf = flat(g);
                let mut db = vec![0.0; n];
                for (i, &gi) in gf.iter().enumerate() {
                    db[i % n] += gi;
                }
                vec![
                    Some(g.clone()),
                    Some(ArrayD::from_shape_vec(IxDyn(&[n]), db).unwrap()),
                ]
            })),
            false,
        )
    }

    /// `x + b` where `x` is `[G, M, N]`, `b` is `[H, M, N]`, and `H` divides
    /// `G`; group `g` receives `b[g % H]`. Used to tile per-head attention
    /// bias over windows.
    pub fn add_cycle0(&mut self, x: Value, b: Value) -> Value {
        let xs = self.shape(x).to_vec();
        let bs = self.shape(b).to_vec();
        assert_eq!(xs.len(), 3);
        assert_eq!(bs.len(), 3);
        assert_eq!(&xs[1..], &bs[1..]);
        assert_eq!(xs[0] % bs[0], 0, "cycle length must divide leading dim");
        let h = bs[0];
        let mn = xs[1] * xs[2];
        let mut out = self.value(x).clone();
        {
            let bv = flat(self.value(b)).to_vec();
            let of = out.as_slice_mut().unwrap();
            for gi in 0..xs[0] {
                let bbase = (gi % h) * mn;
                let obase = gi * mn;
                for k in 0..mn {
                    of[obase + k] += bv[bbase + k];
                }
            }
        }
        self.push(
            out,
            vec![x, b],
            Some(Box::new(move |g, _, _| {
                let gf = flat(g);
                let groups = g.shape()[0];
                let mut db = vec![0.0; h * mn];
                for gi in 0..groups {
                    let bbase = (gi % h) * mn;
                    let obase = gi * mn;
                    for k in 0..mn {
                        db[bbase + k] += gf[obase + k];
                    }
                }
                vec![
                    Some(g.clone()),
                    Some(ArrayD::from_shape_vec(IxDyn(&[h, g.shape()[1], g.shape()[2]]), db).unwrap()),
                ]
            })),
            false,
        )
    }

    pub fn sum_all(&mut self, a: Value) -> Value {
        let s = self.value(a).sum();
        let shape = self.shape(a).to_vec();
        self.push(
            ArrayD::from_elem(IxDyn(&[1]), s),
            vec![a],
            Some(Box::new(move |g, _, _| {
                vec![Some(ArrayD::from_elem(IxDyn(&shape), g[[0]]))]
            })),
            false,
        )
    }

    pub fn mean_all(&mut self, a: Value) -> Value {
        let n = self.value(a).len() as f64;
        let s = self.value(a).sum() / n;
        let shape = self.shape(a).to_vec();
        self.push(
            ArrayD::from_elem(IxDyn(&[1]), s),
            vec![a],
            Some(Box::new(move |g, _, _| {
                vec![Some(ArrayD::from_elem(IxDyn(&shape), g[[0]] / n))]
            })),
            false,
        )
    }

    /// Mean squared error between two same-shape nodes.
    pub fn mse(&mut self, a: Value, b: Value) -> Value {
        let d = self.sub(a, b);
        let sq = self.mul(d, d);
        self.mean_all(sq)
    }

    /// Mean absolute error between two same-shape nodes.
    pub fn l1(&mut self, a: Value, b: Value) -> Value {
        let d = self.sub(a, b);
        let ad = self.abs(d);
        self.mean_all(ad)
    }

    /// Mean squared deviation from a scalar target.
    pub fn mse_scalar(&mut self, a: Value, target: f64) -> Value {
        let d = self.add_scalar(a, -target);
        let sq = self.mul(d, d);
        self.mean_all(sq)
    }

    fn zip(&self, a: Value, b: Value, f: impl Fn(f64, f64) -> f64) -> ArrayD<f64> {
        let av = self.value(a);
        let bv = self.value(b);
        assert_eq!(av.shape(), bv.shape(), "elementwise op shape mismatch");
        let mut out = av.clone();
        out.zip_mut_with(bv, |x, &y| *x = f(*x, y));
        out
    }
}
