//! Encoder-decoder backbone with skip connections, group normalization,
//! SiLU activations, and per-block FiLM time shifts.

use ndarray::{Array1, Array2, Array3, Axis};
use rand::Rng;

use super::layers::{
    silu_backward, silu_map, time_embedding, upsample2, upsample2_backward, Conv2d, GnCache,
    GroupNorm, Linear,
};

fn group_count(channels: usize) -> usize {
    (1..=8.min(channels))
        .rev()
        .find(|&g| channels.is_multiple_of(g))
        .unwrap_or(1)
}

/// Residual block: conv-norm(-time shift)-silu-conv-norm-silu + skip.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub conv1: Conv2d,
    pub gn1: GroupNorm,
    pub time_proj: Option<Linear>,
    pub conv2: Conv2d,
    pub gn2: GroupNorm,
    /// 1x1 projection when input and output channel counts differ.
    pub skip: Option<Conv2d>,
}

pub struct BlockCache {
    in_shape: (usize, usize, usize),
    col1: Array2<f64>,
    gn1: GnCache,
    pre1: Array3<f64>,
    h1: Array3<f64>,
    col2: Array2<f64>,
    gn2: GnCache,
    pre2: Array3<f64>,
    skip_col: Option<Array2<f64>>,
}

impl Block {
    pub fn init(cin: usize, cout: usize, time_dim: Option<usize>, rng: &mut impl Rng) -> Self {
        Block {
            conv1: Conv2d::init(cout, cin, 3, 1, 1, rng),
            gn1: GroupNorm::init(cout, group_count(cout)),
            time_proj: time_dim.map(|d| Linear::init(cout, d, rng)),
            conv2: Conv2d::init(cout, cout, 3, 1, 1, rng),
            gn2: GroupNorm::init(cout, group_count(cout)),
            skip: (cin != cout).then(|| Conv2d::init(cout, cin, 1, 1, 0, rng)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Block {
            conv1: self.conv1.zeros_like(),
            gn1: self.gn1.zeros_like(),
            time_proj: self.time_proj.as_ref().map(|l| l.zeros_like()),
            conv2: self.conv2.zeros_like(),
            gn2: self.gn2.zeros_like(),
            skip: self.skip.as_ref().map(|c| c.zeros_like()),
        }
    }

    pub fn forward(&self, x: &Array3<f64>, emb: Option<&Array1<f64>>) -> (Array3<f64>, BlockCache) {
        let in_shape = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let (a1, col1) = self.conv1.forward(x);
        let (mut pre1, gn1c) = self.gn1.forward(&a1);
        if let (Some(proj), Some(emb)) = (&self.time_proj, emb) {
            let shift = proj.forward(emb);
            for (c, &s) in shift.iter().enumerate() {
                pre1.slice_mut(ndarray::s![c, .., ..]).mapv_inplace(|v| v + s);
            }
        }
        let h1 = silu_map(&pre1);
        let (a2, col2) = self.conv2.forward(&h1);
        let (pre2, gn2c) = self.gn2.forward(&a2);
        let h2 = silu_map(&pre2);
        let (y, skip_col) = match &self.skip {
            Some(sc) => {
                let (s, col) = sc.forward(x);
                (h2 + s, Some(col))
            }
            None => (h2 + x, None),
        };
        (
            y,
            BlockCache {
                in_shape,
                col1,
                gn1: gn1c,
                pre1,
                h1,
                col2,
                gn2: gn2c,
                pre2,
                skip_col,
            },
        )
    }

    /// Returns dL/dx; accumulates parameter grads into `grad` and, when time
    /// conditioned, the shared-embedding gradient into `d_emb`.
    pub fn backward(
        &self,
        cache: &BlockCache,
        emb: Option<&Array1<f64>>,
        dy: &Array3<f64>,
        grad: &mut Block,
        d_emb: Option<&mut Array1<f64>>,
    ) -> Array3<f64> {
        let h1_shape = (
            cache.h1.shape()[0],
            cache.h1.shape()[1],
            cache.h1.shape()[2],
        );
        let dn2 = silu_backward(&cache.pre2, dy);
        let da2 = self.gn2.backward(&cache.gn2, &dn2, &mut grad.gn2);
        let dh1 = self
            .conv2
            .backward(&cache.col2, h1_shape, &da2, &mut grad.conv2);
        let dpre1 = silu_backward(&cache.pre1, &dh1);

        if let (Some(proj), Some(emb), Some(d_emb)) = (&self.time_proj, emb, d_emb) {
            let dshift =
                Array1::from_iter(dpre1.axis_iter(Axis(0)).map(|ch| ch.sum()));
            let gproj = grad.time_proj.as_mut().unwrap();
            *d_emb += &proj.backward(emb, &dshift, gproj);
        }

        let da1 = self.gn1.backward(&cache.gn1, &dpre1, &mut grad.gn1);
        let mut dx = self
            .conv1
            .backward(&cache.col1, cache.in_shape, &da1, &mut grad.conv1);
        match (&self.skip, &cache.skip_col) {
            (Some(sc), Some(col)) => {
                dx += &sc.backward(col, cache.in_shape, dy, grad.skip.as_mut().unwrap());
            }
            _ => dx += dy,
        }
        dx
    }
}

/// Two-layer MLP applied to the sinusoidal time embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMlp {
    pub lin1: Linear,
    pub lin2: Linear,
}

pub struct TimeMlpCache {
    sin_emb: Array1<f64>,
    pre: Array1<f64>,
    hidden: Array1<f64>,
    pub emb_out: Array1<f64>,
}

impl TimeMlp {
    pub fn init(dim: usize, rng: &mut impl Rng) -> Self {
        TimeMlp {
            lin1: Linear::init(dim, dim, rng),
            lin2: Linear::init(dim, dim, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        TimeMlp {
            lin1: self.lin1.zeros_like(),
            lin2: self.lin2.zeros_like(),
        }
    }

    pub fn forward(&self, t: f64) -> TimeMlpCache {
        let dim = self.lin1.b.len();
        let sin_emb = time_embedding(t, dim);
        let pre = self.lin1.forward(&sin_emb);
        let hidden = pre.mapv(super::layers::silu);
        let emb_out = self.lin2.forward(&hidden);
        TimeMlpCache {
            sin_emb,
            pre,
            hidden,
            emb_out,
        }
    }

    pub fn backward(&self, cache: &TimeMlpCache, d_emb: &Array1<f64>, grad: &mut TimeMlp) {
        let dh = self.lin2.backward(&cache.hidden, d_emb, &mut grad.lin2);
        let dpre = Array1::from_iter(
            dh.iter()
                .zip(cache.pre.iter())
                .map(|(&d, &p)| d * super::layers::silu_grad(p)),
        );
        self.lin1.backward(&cache.sin_emb, &dpre, &mut grad.lin1);
    }
}

/// The shared conditional backbone.
#[derive(Debug, Clone, PartialEq)]
pub struct UNet {
    pub stem: Conv2d,
    pub enc: Vec<Block>,
    pub down: Vec<Conv2d>,
    pub mid: Block,
    pub upconv: Vec<Conv2d>,
    pub dec: Vec<Block>,
    pub out_norm: GroupNorm,
    pub out_conv: Conv2d,
    pub time_mlp: Option<TimeMlp>,
}

/// Per-level transposed-conv cache: the im2col matrix plus the upsampled
/// input shape.
type UpCache = (Array2<f64>, (usize, usize, usize));

pub struct UNetCache {
    time: Option<TimeMlpCache>,
    stem_col: Array2<f64>,
    stem_in_shape: (usize, usize, usize),
    enc: Vec<BlockCache>,
    down: Vec<(Array2<f64>, (usize, usize, usize))>,
    mid: BlockCache,
    up: Vec<(Array2<f64>, (usize, usize, usize))>,
    dec: Vec<BlockCache>,
    out_gn: GnCache,
    out_pre: Array3<f64>,
    out_col: Array2<f64>,
    out_in_shape: (usize, usize, usize),
}

impl UNet {
    pub fn init(
        in_channels: usize,
        base: usize,
        depth: usize,
        time_dim: Option<usize>,
        rng: &mut impl Rng,
    ) -> Self {
        let ch = |l: usize| base << l;
        UNet {
            stem: Conv2d::init(base, in_channels, 3, 1, 1, rng),
            enc: (0..depth)
                .map(|l| Block::init(ch(l), ch(l), time_dim, rng))
                .collect(),
            down: (0..depth)
                .map(|l| Conv2d::init(ch(l + 1), ch(l), 3, 2, 1, rng))
                .collect(),
            mid: Block::init(ch(depth), ch(depth), time_dim, rng),
            upconv: (0..depth)
                .map(|l| Conv2d::init(ch(l), ch(l + 1), 3, 1, 1, rng))
                .collect(),
            dec: (0..depth)
                .map(|l| Block::init(2 * ch(l), ch(l), time_dim, rng))
                .collect(),
            out_norm: GroupNorm::init(base, group_count(base)),
            out_conv: Conv2d::init(1, base, 1, 1, 0, rng),
            time_mlp: time_dim.map(|d| TimeMlp::init(d, rng)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        UNet {
            stem: self.stem.zeros_like(),
            enc: self.enc.iter().map(Block::zeros_like).collect(),
            down: self.down.iter().map(Conv2d::zeros_like).collect(),
            mid: self.mid.zeros_like(),
            upconv: self.upconv.iter().map(Conv2d::zeros_like).collect(),
            dec: self.dec.iter().map(Block::zeros_like).collect(),
            out_norm: self.out_norm.zeros_like(),
            out_conv: self.out_conv.zeros_like(),
            time_mlp: self.time_mlp.as_ref().map(TimeMlp::zeros_like),
        }
    }

    pub fn depth(&self) -> usize {
        self.enc.len()
    }

    /// `t` must be present iff the net is time conditioned.
    pub fn forward(&self, x: &Array3<f64>, t: Option<f64>) -> (Array3<f64>, UNetCache) {
        debug_assert_eq!(self.time_mlp.is_some(), t.is_some());
        let time = self
            .time_mlp
            .as_ref()
            .zip(t)
            .map(|(mlp, t)| mlp.forward(t));
        let emb = time.as_ref().map(|c| &c.emb_out);

        let depth = self.depth();
        let stem_in_shape = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let (mut h, stem_col) = self.stem.forward(x);

        let mut enc_caches = Vec::with_capacity(depth);
        let mut down_caches = Vec::with_capacity(depth);
        let mut skips = Vec::with_capacity(depth);
        for l in 0..depth {
            let (y, c) = self.enc[l].forward(&h, emb);
            enc_caches.push(c);
            skips.push(y.clone());
            let shape = (y.shape()[0], y.shape()[1], y.shape()[2]);
            let (d, col) = self.down[l].forward(&y);
            down_caches.push((col, shape));
            h = d;
        }

        let (mut h, mid_cache) = {
            let (y, c) = self.mid.forward(&h, emb);
            (y, c)
        };

        let mut up_caches: Vec<Option<UpCache>> = (0..depth).map(|_| None).collect();
        let mut dec_caches: Vec<Option<BlockCache>> = (0..depth).map(|_| None).collect();
        for l in (0..depth).rev() {
            let hu = upsample2(&h);
            let hu_shape = (hu.shape()[0], hu.shape()[1], hu.shape()[2]);
            let (u, col) = self.upconv[l].forward(&hu);
            up_caches[l] = Some((col, hu_shape));
            let cat = ndarray::concatenate(Axis(0), &[u.view(), skips[l].view()]).unwrap();
            let (y, c) = self.dec[l].forward(&cat, emb);
            dec_caches[l] = Some(c);
            h = y;
        }

        let (o, out_gn) = self.out_norm.forward(&h);
        let ho = silu_map(&o);
        let out_in_shape = (ho.shape()[0], ho.shape()[1], ho.shape()[2]);
        let (y, out_col) = self.out_conv.forward(&ho);

        (
            y,
            UNetCache {
                time,
                stem_col,
                stem_in_shape,
                enc: enc_caches,
                down: down_caches,
                mid: mid_cache,
                up: up_caches.into_iter().map(Option::unwrap).collect(),
                dec: dec_caches.into_iter().map(Option::unwrap).collect(),
                out_gn,
                out_pre: o,
                out_col,
                out_in_shape,
            },
        )
    }

    /// Accumulates parameter gradients for one sample into `grad`.
    pub fn backward(&self, cache: &UNetCache, dy: &Array3<f64>, grad: &mut UNet) {
        let depth = self.depth();
        let emb = cache.time.as_ref().map(|c| &c.emb_out);
        let mut d_emb = self
            .time_mlp
            .as_ref()
            .map(|mlp| Array1::zeros(mlp.lin1.b.len()));

        let dho = self
            .out_conv
            .backward(&cache.out_col, cache.out_in_shape, dy, &mut grad.out_conv);
        let dpre = silu_backward(&cache.out_pre, &dho);
        let mut dh = self
            .out_norm
            .backward(&cache.out_gn, &dpre, &mut grad.out_norm);

        let mut dskips: Vec<Option<Array3<f64>>> = vec![None; depth];
        #[allow(clippy::needless_range_loop)] // l walks four parallel arrays
        for l in 0..depth {
            let dcat = self.dec[l].backward(
                &cache.dec[l],
                emb,
                &dh,
                &mut grad.dec[l],
                d_emb.as_mut(),
            );
            let up_ch = self.upconv[l].w.shape()[0];
            let (du, dskip) = dcat.view().split_at(Axis(0), up_ch);
            dskips[l] = Some(dskip.to_owned());
            let (col, hu_shape) = &cache.up[l];
            let dhu = self.upconv[l].backward(col, *hu_shape, &du.to_owned(), &mut grad.upconv[l]);
            dh = upsample2_backward(&dhu);
        }

        dh = self
            .mid
            .backward(&cache.mid, emb, &dh, &mut grad.mid, d_emb.as_mut());

        for l in (0..depth).rev() {
            let (col, shape) = &cache.down[l];
            let mut dskip = self.down[l].backward(col, *shape, &dh, &mut grad.down[l]);
            dskip += dskips[l].as_ref().unwrap();
            dh = self.enc[l].backward(
                &cache.enc[l],
                emb,
                &dskip,
                &mut grad.enc[l],
                d_emb.as_mut(),
            );
        }

        self.stem
            .backward(&cache.stem_col, cache.stem_in_shape, &dh, &mut grad.stem);

        if let (Some(mlp), Some(tc), Some(d_emb)) = (&self.time_mlp, &cache.time, &d_emb) {
            mlp.backward(tc, d_emb, grad.time_mlp.as_mut().unwrap());
        }
    }

    /// Visits every parameter array in a fixed, documented order.
    pub fn visit_params(&mut self, mut f: impl FnMut(&str, &[usize], &mut [f64])) {
        fn conv(name: &str, c: &mut Conv2d, f: &mut impl FnMut(&str, &[usize], &mut [f64])) {
            let shape = c.w.shape().to_vec();
            f(&format!("{name}.w"), &shape, c.w.as_slice_mut().unwrap());
            let shape = c.b.shape().to_vec();
            f(&format!("{name}.b"), &shape, c.b.as_slice_mut().unwrap());
        }
        fn gn(name: &str, g: &mut GroupNorm, f: &mut impl FnMut(&str, &[usize], &mut [f64])) {
            let shape = g.gamma.shape().to_vec();
            f(&format!("{name}.gamma"), &shape, g.gamma.as_slice_mut().unwrap());
            let shape = g.beta.shape().to_vec();
            f(&format!("{name}.beta"), &shape, g.beta.as_slice_mut().unwrap());
        }
        fn lin(name: &str, l: &mut Linear, f: &mut impl FnMut(&str, &[usize], &mut [f64])) {
            let shape = l.w.shape().to_vec();
            f(&format!("{name}.w"), &shape, l.w.as_slice_mut().unwrap());
            let shape = l.b.shape().to_vec();
            f(&format!("{name}.b"), &shape, l.b.as_slice_mut().unwrap());
        }
        fn block(name: &str, b: &mut Block, f: &mut impl FnMut(&str, &[usize], &mut [f64])) {
            conv(&format!("{name}.conv1"), &mut b.conv1, f);
            gn(&format!("{name}.gn1"), &mut b.gn1, f);
            if let Some(p) = &mut b.time_proj {
                lin(&format!("{name}.time_proj"), p, f);
            }
            conv(&format!("{name}.conv2"), &mut b.conv2, f);
            gn(&format!("{name}.gn2"), &mut b.gn2, f);
            if let Some(s) = &mut b.skip {
                conv(&format!("{name}.skip"), s, f);
            }
        }

        conv("stem", &mut self.stem, &mut f);
        for (l, b) in self.enc.iter_mut().enumerate() {
            block(&format!("enc{l}"), b, &mut f);
        }
        for (l, c) in self.down.iter_mut().enumerate() {
            conv(&format!("down{l}"), c, &mut f);
        }
        block("mid", &mut self.mid, &mut f);
        for (l, c) in self.upconv.iter_mut().enumerate() {
            conv(&format!("upconv{l}"), c, &mut f);
        }
        for (l, b) in self.dec.iter_mut().enumerate() {
            block(&format!("dec{l}"), b, &mut f);
        }
        gn("out_norm", &mut self.out_norm, &mut f);
        conv("out_conv", &mut self.out_conv, &mut f);
        if let Some(mlp) = &mut self.time_mlp {
            lin("time_mlp.lin1", &mut mlp.lin1, &mut f);
            lin("time_mlp.lin2", &mut mlp.lin2, &mut f);
        }
    }

    pub fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(|_, _, data| n += data.len());
        n
    }
}
