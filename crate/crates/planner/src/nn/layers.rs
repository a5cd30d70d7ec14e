//! Primitive differentiable layers. Every layer exposes an explicit
//! `forward` producing a cache and a `backward` consuming it; gradients
//! accumulate into a zero-initialized twin of the parameter struct.

use ndarray::{Array1, Array2, Array3, Array4};
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

pub fn silu_grad(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

/// Applies SiLU element-wise; returns output (cache is the pre-activation).
pub fn silu_map(x: &Array3<f64>) -> Array3<f64> {
    x.mapv(silu)
}

/// dL/dx from dL/dy and the cached pre-activation.
pub fn silu_backward(pre: &Array3<f64>, dy: &Array3<f64>) -> Array3<f64> {
    let mut dx = dy.clone();
    dx.zip_mut_with(pre, |d, &p| *d *= silu_grad(p));
    dx
}

/// 2D convolution over (C, H, W) activations.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    /// (out, in, kh, kw)
    pub w: Array4<f64>,
    pub b: Array1<f64>,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    pub fn init(
        out_ch: usize,
        in_ch: usize,
        k: usize,
        stride: usize,
        pad: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = (in_ch * k * k) as f64;
        let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).unwrap();
        let w = Array4::from_shape_fn((out_ch, in_ch, k, k), |_| normal.sample(rng));
        Conv2d {
            w,
            b: Array1::zeros(out_ch),
            stride,
            pad,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Conv2d {
            w: Array4::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
            stride: self.stride,
            pad: self.pad,
        }
    }

    fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let k = self.w.shape()[2];
        (
            (h + 2 * self.pad - k) / self.stride + 1,
            (w + 2 * self.pad - k) / self.stride + 1,
        )
    }

    fn im2col(&self, x: &Array3<f64>) -> Array2<f64> {
        let (ci, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let k = self.w.shape()[2];
        let (oh, ow) = self.out_hw(h, w);
        let mut col = Array2::zeros((ci * k * k, oh * ow));
        for c in 0..ci {
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    for oy in 0..oh {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy as usize >= h {
                            continue;
                        }
                        for ox in 0..ow {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix < 0 || ix as usize >= w {
                                continue;
                            }
                            col[[row, oy * ow + ox]] = x[[c, iy as usize, ix as usize]];
                        }
                    }
                }
            }
        }
        col
    }

    fn col2im(&self, dcol: &Array2<f64>, ci: usize, h: usize, w: usize) -> Array3<f64> {
        let k = self.w.shape()[2];
        let (oh, ow) = self.out_hw(h, w);
        let mut dx = Array3::zeros((ci, h, w));
        for c in 0..ci {
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    for oy in 0..oh {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy as usize >= h {
                            continue;
                        }
                        for ox in 0..ow {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix < 0 || ix as usize >= w {
                                continue;
                            }
                            dx[[c, iy as usize, ix as usize]] += dcol[[row, oy * ow + ox]];
                        }
                    }
                }
            }
        }
        dx
    }

    pub fn forward(&self, x: &Array3<f64>) -> (Array3<f64>, Array2<f64>) {
        let (h, w) = (x.shape()[1], x.shape()[2]);
        let (oh, ow) = self.out_hw(h, w);
        let co = self.w.shape()[0];
        let win = self.w.shape()[1] * self.w.shape()[2] * self.w.shape()[3];
        let col = self.im2col(x);
        let w_mat = self.w.view().into_shape((co, win)).unwrap();
        let mut y_mat = w_mat.dot(&col);
        for (mut row, &b) in y_mat.outer_iter_mut().zip(self.b.iter()) {
            row += b;
        }
        let y = y_mat.into_shape((co, oh, ow)).unwrap();
        (y, col)
    }

    /// `col` is the forward cache; `(ci, h, w)` the input shape.
    pub fn backward(
        &self,
        col: &Array2<f64>,
        in_shape: (usize, usize, usize),
        dy: &Array3<f64>,
        grad: &mut Conv2d,
    ) -> Array3<f64> {
        let co = self.w.shape()[0];
        let win = self.w.shape()[1] * self.w.shape()[2] * self.w.shape()[3];
        let (oh, ow) = (dy.shape()[1], dy.shape()[2]);
        let dy_mat = dy.view().into_shape((co, oh * ow)).unwrap();

        let dw = dy_mat.dot(&col.t());
        grad.w += &dw.into_shape(self.w.raw_dim()).unwrap();
        for (g, row) in grad.b.iter_mut().zip(dy_mat.outer_iter()) {
            *g += row.sum();
        }
        let w_mat = self.w.view().into_shape((co, win)).unwrap();
        let dcol = w_mat.t().dot(&dy_mat);
        self.col2im(&dcol, in_shape.0, in_shape.1, in_shape.2)
    }
}

/// Group normalization over (C, H, W); per-channel affine.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub groups: usize,
}

pub const GN_EPS: f64 = 1e-5;

pub struct GnCache {
    pub xhat: Array3<f64>,
    pub inv_std: Vec<f64>,
}

impl GroupNorm {
    pub fn init(channels: usize, groups: usize) -> Self {
        assert_eq!(channels % groups, 0);
        GroupNorm {
            gamma: Array1::ones(channels),
            beta: Array1::zeros(channels),
            groups,
        }
    }

    pub fn zeros_like(&self) -> Self {
        GroupNorm {
            gamma: Array1::zeros(self.gamma.raw_dim()),
            beta: Array1::zeros(self.beta.raw_dim()),
            groups: self.groups,
        }
    }

    pub fn forward(&self, x: &Array3<f64>) -> (Array3<f64>, GnCache) {
        let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let per = c / self.groups;
        let n = (per * h * w) as f64;
        let mut xhat = x.clone();
        let mut inv_std = Vec::with_capacity(self.groups);
        for g in 0..self.groups {
            let slice = ndarray::s![g * per..(g + 1) * per, .., ..];
            let mean = x.slice(slice).sum() / n;
            let var = x.slice(slice).mapv(|v| (v - mean) * (v - mean)).sum() / n;
            let is = 1.0 / (var + GN_EPS).sqrt();
            xhat.slice_mut(slice).mapv_inplace(|v| (v - mean) * is);
            inv_std.push(is);
        }
        let mut y = xhat.clone();
        for ch in 0..c {
            let (ga, be) = (self.gamma[ch], self.beta[ch]);
            y.slice_mut(ndarray::s![ch, .., ..])
                .mapv_inplace(|v| v * ga + be);
        }
        (y, GnCache { xhat, inv_std })
    }

    pub fn backward(&self, cache: &GnCache, dy: &Array3<f64>, grad: &mut GroupNorm) -> Array3<f64> {
        let (c, h, w) = (dy.shape()[0], dy.shape()[1], dy.shape()[2]);
        let per = c / self.groups;
        let n = (per * h * w) as f64;

        for ch in 0..c {
            let dy_ch = dy.slice(ndarray::s![ch, .., ..]);
            let xh_ch = cache.xhat.slice(ndarray::s![ch, .., ..]);
            grad.gamma[ch] += (&dy_ch * &xh_ch).sum();
            grad.beta[ch] += dy_ch.sum();
        }

        // dxhat = dy * gamma; dx = inv_std/N * (N*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat))
        let mut dxhat = dy.clone();
        for ch in 0..c {
            let ga = self.gamma[ch];
            dxhat
                .slice_mut(ndarray::s![ch, .., ..])
                .mapv_inplace(|v| v * ga);
        }
        let mut dx = Array3::zeros(dy.raw_dim());
        for g in 0..self.groups {
            let slice = ndarray::s![g * per..(g + 1) * per, .., ..];
            let dxh = dxhat.slice(slice);
            let xh = cache.xhat.slice(slice);
            let sum_dxh = dxh.sum();
            let sum_dxh_xh = (&dxh * &xh).sum();
            let is = cache.inv_std[g];
            let mut out = dx.slice_mut(slice);
            ndarray::Zip::from(&mut out).and(&dxh).and(&xh).for_each(|o, &d, &x| {
                *o = is / n * (n * d - sum_dxh - x * sum_dxh_xh);
            });
        }
        dx
    }
}

/// Fully connected layer on flat vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// (out, in)
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    pub fn init(out_dim: usize, in_dim: usize, rng: &mut impl Rng) -> Self {
        let normal = Normal::new(0.0, (2.0 / in_dim as f64).sqrt()).unwrap();
        Linear {
            w: Array2::from_shape_fn((out_dim, in_dim), |_| normal.sample(rng)),
            b: Array1::zeros(out_dim),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Linear {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }

    pub fn forward(&self, x: &Array1<f64>) -> Array1<f64> {
        self.w.dot(x) + &self.b
    }

    /// Accumulates parameter grads and returns dL/dx.
    pub fn backward(&self, x: &Array1<f64>, dy: &Array1<f64>, grad: &mut Linear) -> Array1<f64> {
        for (i, &d) in dy.iter().enumerate() {
            grad.b[i] += d;
            for (j, &xv) in x.iter().enumerate() {
                grad.w[[i, j]] += d * xv;
            }
        }
        self.w.t().dot(dy)
    }
}

/// Nearest-neighbor 2x upsampling.
pub fn upsample2(x: &Array3<f64>) -> Array3<f64> {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    Array3::from_shape_fn((c, 2 * h, 2 * w), |(ci, y, xx)| x[[ci, y / 2, xx / 2]])
}

pub fn upsample2_backward(dy: &Array3<f64>) -> Array3<f64> {
    let (c, h2, w2) = (dy.shape()[0], dy.shape()[1], dy.shape()[2]);
    let mut dx = Array3::zeros((c, h2 / 2, w2 / 2));
    for ci in 0..c {
        for y in 0..h2 {
            for x in 0..w2 {
                dx[[ci, y / 2, x / 2]] += dy[[ci, y, x]];
            }
        }
    }
    dx
}

/// Sinusoidal embedding of a scalar time in [0, 1]. No parameters.
pub fn time_embedding(t: f64, dim: usize) -> Array1<f64> {
    let half = dim / 2;
    let mut out = Array1::zeros(dim);
    for i in 0..half {
        let freq = if half > 1 {
            (1000.0f64).powf(i as f64 / (half - 1) as f64)
        } else {
            1.0
        };
        out[i] = (t * freq).sin();
        out[half + i] = (t * freq).cos();
    }
    out
}
