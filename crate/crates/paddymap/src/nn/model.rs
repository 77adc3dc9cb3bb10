//! The two architectures: a pixel-wise DNN built from 1x1 convolutions and a
//! depthwise-separable U-Net with residual-add skip fusion.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::ops::*;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const UNET_DEPTH: usize = 4;
pub const CLASSES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Dnn,
    Unet,
}

impl Arch {
    pub fn name(&self) -> &'static str {
        match self {
            Arch::Dnn => "dnn",
            Arch::Unet => "unet",
        }
    }

    pub fn parse(s: &str) -> Option<Arch> {
        match s.to_ascii_lowercase().as_str() {
            "dnn" => Some(Arch::Dnn),
            "unet" | "u-net" => Some(Arch::Unet),
            _ => None,
        }
    }
}

/// Declarative layer-graph description. `depth` and `classes` are fixed by
/// the architecture; widths, dropout and base filters are configurable.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ModelSpec {
    pub arch: Arch,
    pub input_channels: usize,
    pub hidden: [usize; 3],
    pub dropout: f32,
    pub base_filters: usize,
    pub depth: usize,
    pub classes: usize,
}

impl ModelSpec {
    pub fn dnn(input_channels: usize) -> ModelSpec {
        ModelSpec {
            arch: Arch::Dnn,
            input_channels,
            hidden: [256, 128, 64],
            dropout: 0.2,
            base_filters: 32,
            depth: UNET_DEPTH,
            classes: CLASSES,
        }
    }

    pub fn unet(input_channels: usize, base_filters: usize) -> ModelSpec {
        ModelSpec {
            arch: Arch::Unet,
            input_channels,
            hidden: [256, 128, 64],
            dropout: 0.2,
            base_filters,
            depth: UNET_DEPTH,
            classes: CLASSES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth != UNET_DEPTH {
            return Err(Error::InvalidSpec(format!("depth must be {UNET_DEPTH}")));
        }
        if self.classes != CLASSES {
            return Err(Error::InvalidSpec(format!("classes must be {CLASSES}")));
        }
        if self.input_channels == 0 || self.base_filters == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidSpec("zero-width layer".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidSpec(format!("dropout {} outside [0,1)", self.dropout)));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Parameterized units
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Conv {
    pub w: Tensor,
    pub b: Tensor,
}

impl Conv {
    fn new(co: usize, ci: usize, k: usize, rng: &mut ChaCha8Rng) -> Conv {
        Conv { w: he_uniform(co, ci, k, rng), b: Tensor::zeros(co, 1, 1, 1) }
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if self.w.h == 1 {
            conv1x1_forward(x, &self.w, &self.b)
        } else {
            conv3x3_forward(x, &self.w, &self.b)
        }
    }

    fn backward(&self, x: &Tensor, dy: &Tensor) -> (Tensor, Tensor, Tensor) {
        if self.w.h == 1 {
            conv1x1_backward(x, &self.w, dy)
        } else {
            conv3x3_backward(x, &self.w, dy)
        }
    }
}

/// Depthwise 3x3 followed by a pointwise 1x1 mix; bias after the pointwise.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DsConv {
    pub dw: Tensor,
    pub pw: Tensor,
    pub b: Tensor,
}

pub(crate) struct DsCache {
    x: Tensor,
    mid: Tensor,
}

impl DsConv {
    fn new(co: usize, ci: usize, rng: &mut ChaCha8Rng) -> DsConv {
        DsConv {
            dw: he_uniform_depthwise(ci, rng),
            pw: he_uniform(co, ci, 1, rng),
            b: Tensor::zeros(co, 1, 1, 1),
        }
    }

    fn forward(&self, x: &Tensor) -> Result<(Tensor, DsCache)> {
        let mid = depthwise3x3_forward(x, &self.dw)?;
        let y = conv1x1_forward(&mid, &self.pw, &self.b)?;
        Ok((y, DsCache { x: x.clone(), mid }))
    }

    fn backward(&self, cache: &DsCache, dy: &Tensor) -> (Tensor, Tensor, Tensor, Tensor) {
        let (dmid, dpw, db) = conv1x1_backward(&cache.mid, &self.pw, dy);
        let (dx, ddw) = depthwise3x3_backward(&cache.x, &self.dw, &dmid);
        (dx, ddw, dpw, db)
    }
}

fn he_uniform(co: usize, ci: usize, k: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let fan_in = (ci * k * k) as f32;
    let limit = (6.0 / fan_in).sqrt();
    let data = (0..co * ci * k * k).map(|_| rng.gen_range(-limit..limit)).collect();
    Tensor { n: co, c: ci, h: k, w: k, data }
}

/// The depthwise half of a separable pair is variance-preserving
/// (unit gain); the He gain sits on the pointwise mix that follows. Without
/// this the two stacked kernels double activation variance per unit and the
/// logits saturate at depth 4.
fn he_uniform_depthwise(c: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let limit = (3.0f32 / 9.0).sqrt();
    let data = (0..c * 9).map(|_| rng.gen_range(-limit..limit)).collect();
    Tensor { n: c, c: 1, h: 3, w: 3, data }
}

// ---------------------------------------------------------------------------
// DNN
// ---------------------------------------------------------------------------

/// conv1x1(h1) relu dropout, conv1x1(h2) relu dropout, conv1x1(h3) relu
/// dropout, conv1x1(classes), channel softmax. Being all-1x1 it applies
/// pixel-wise to any spatial size.
pub struct DnnNet {
    pub spec: ModelSpec,
    convs: Vec<Conv>,
}

pub struct DnnCache {
    xs: Vec<Tensor>,          // input of each conv
    relus: Vec<Tensor>,       // relu outputs of hidden layers
    drop_masks: Vec<Vec<f32>>, // dropout masks (training only)
    pub probs: Tensor,
}

impl DnnNet {
    fn build(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> DnnNet {
        let widths = [
            (spec.hidden[0], spec.input_channels),
            (spec.hidden[1], spec.hidden[0]),
            (spec.hidden[2], spec.hidden[1]),
            (spec.classes, spec.hidden[2]),
        ];
        let convs = widths.iter().map(|&(co, ci)| Conv::new(co, ci, 1, rng)).collect();
        DnnNet { spec: spec.clone(), convs }
    }

    fn forward(&self, x: &Tensor, dropout_rng: Option<&mut ChaCha8Rng>) -> Result<(Tensor, DnnCache)> {
        if x.c != self.spec.input_channels {
            return Err(Error::ChannelMismatch { expected: self.spec.input_channels, found: x.c });
        }
        let mut cache = DnnCache { xs: Vec::new(), relus: Vec::new(), drop_masks: Vec::new(), probs: Tensor::zeros(0, 0, 0, 0) };
        let mut rng = dropout_rng;
        let mut cur = x.clone();
        for (i, conv) in self.convs.iter().enumerate() {
            cache.xs.push(cur.clone());
            cur = conv.forward(&cur)?;
            if i < 3 {
                cur = relu_forward(&cur);
                cache.relus.push(cur.clone());
                if let Some(r) = rng.as_deref_mut() {
                    let (dropped, mask) = dropout_forward(&cur, self.spec.dropout, r);
                    cache.drop_masks.push(mask);
                    cur = dropped;
                }
            }
        }
        let probs = softmax_channels(&cur);
        cache.probs = probs.clone();
        Ok((probs, cache))
    }

    /// dlogits is the gradient at the softmax input. Returns parameter
    /// gradients in enumeration order.
    fn backward(&self, cache: &DnnCache, dlogits: &Tensor) -> Vec<Tensor> {
        let mut grads: Vec<Option<(Tensor, Tensor)>> = vec![None; 4];
        let mut dy = dlogits.clone();
        for i in (0..4).rev() {
            let (dx, dw, db) = self.convs[i].backward(&cache.xs[i], &dy);
            grads[i] = Some((dw, db));
            dy = dx;
            if i > 0 {
                let j = i - 1;
                if let Some(mask) = cache.drop_masks.get(j) {
                    dy = dropout_backward(mask, &dy);
                }
                dy = relu_backward(&cache.relus[j], &dy);
            }
        }
        grads.into_iter().flat_map(|g| {
            let (dw, db) = g.unwrap();
            [dw, db]
        }).collect()
    }
}

// ---------------------------------------------------------------------------
// U-Net
// ---------------------------------------------------------------------------

/// Four encoder blocks (2x depthwise-separable conv + relu, then 2x2 max
/// pool), a standard-conv bottleneck, and four decoder blocks (nearest 2x
/// upsample, 1x1 channel-matching conv, element-wise add with the encoder
/// block output, 2x depthwise-separable conv + relu), finished by a 1x1
/// head and channel softmax.
pub struct UnetNet {
    pub spec: ModelSpec,
    enc: Vec<(DsConv, DsConv)>,
    bottleneck: (Conv, Conv),
    matches: Vec<Conv>, // deep -> shallow
    dec: Vec<(DsConv, DsConv)>, // deep -> shallow
    head: Conv,
}

struct EncCache {
    a: DsCache,
    ya: Tensor,
    b: DsCache,
    yb: Tensor, // skip (post-relu)
    argmax: Vec<u32>,
    pre_pool_hw: (usize, usize),
}

struct DecCache {
    up_in_hw: (usize, usize),
    up: Tensor, // upsampled (input to the matching conv)
    a: DsCache,
    ya: Tensor,
    b: DsCache,
    yb: Tensor,
}

pub struct UnetCache {
    enc: Vec<EncCache>,
    bn_x: Tensor,
    bn_y1: Tensor,
    bn_y2: Tensor,
    dec: Vec<DecCache>,
    head_x: Tensor,
    pub probs: Tensor,
}

impl UnetNet {
    fn build(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> UnetNet {
        let bf = spec.base_filters;
        let ch = |level: usize| bf << level;
        let mut enc = Vec::new();
        for l in 0..UNET_DEPTH {
            let ci = if l == 0 { spec.input_channels } else { ch(l - 1) };
            enc.push((DsConv::new(ch(l), ci, rng), DsConv::new(ch(l), ch(l), rng)));
        }
        let bn = ch(UNET_DEPTH);
        let bottleneck = (Conv::new(bn, ch(UNET_DEPTH - 1), 3, rng), Conv::new(bn, bn, 3, rng));
        let mut matches = Vec::new();
        let mut dec = Vec::new();
        for j in 0..UNET_DEPTH {
            let l = UNET_DEPTH - 1 - j; // 3, 2, 1, 0
            let deeper = if l == UNET_DEPTH - 1 { bn } else { ch(l + 1) };
            matches.push(Conv::new(ch(l), deeper, 1, rng));
            dec.push((DsConv::new(ch(l), ch(l), rng), DsConv::new(ch(l), ch(l), rng)));
        }
        let head = Conv::new(spec.classes, bf, 1, rng);
        UnetNet { spec: spec.clone(), enc, bottleneck, matches, dec, head }
    }

    fn forward(&self, x: &Tensor) -> Result<(Tensor, UnetCache)> {
        if x.c != self.spec.input_channels {
            return Err(Error::ChannelMismatch { expected: self.spec.input_channels, found: x.c });
        }
        let denom = 1usize << UNET_DEPTH;
        if x.h % denom != 0 || x.w % denom != 0 {
            return Err(Error::IndivisibleSpatial { h: x.h, w: x.w, denom });
        }

        let mut enc_caches = Vec::new();
        let mut cur = x.clone();
        for (a, b) in &self.enc {
            let (za, ca) = a.forward(&cur)?;
            let ya = relu_forward(&za);
            let (zb, cb) = b.forward(&ya)?;
            let yb = relu_forward(&zb);
            let (pooled, argmax) = maxpool2x2_forward(&yb)?;
            enc_caches.push(EncCache {
                a: ca,
                ya,
                b: cb,
                pre_pool_hw: (yb.h, yb.w),
                yb,
                argmax,
            });
            cur = pooled;
        }

        let bn_x = cur;
        let bn_y1 = relu_forward(&self.bottleneck.0.forward(&bn_x)?);
        let bn_y2 = relu_forward(&self.bottleneck.1.forward(&bn_y1)?);
        let mut cur = bn_y2.clone();

        let mut dec_caches = Vec::new();
        for (j, (a, b)) in self.dec.iter().enumerate() {
            let l = UNET_DEPTH - 1 - j;
            let up_in_hw = (cur.h, cur.w);
            let up = upsample2x_forward(&cur);
            let matched = self.matches[j].forward(&up)?;
            let fused = add(&matched, &enc_caches[l].yb)?;
            let (za, ca) = a.forward(&fused)?;
            let ya = relu_forward(&za);
            let (zb, cb) = b.forward(&ya)?;
            let yb = relu_forward(&zb);
            cur = yb.clone();
            dec_caches.push(DecCache { up_in_hw, up, a: ca, ya, b: cb, yb });
        }

        let head_x = cur;
        let logits = self.head.forward(&head_x)?;
        let probs = softmax_channels(&logits);
        let cache = UnetCache {
            enc: enc_caches,
            bn_x,
            bn_y1,
            bn_y2,
            dec: dec_caches,
            head_x,
            probs: probs.clone(),
        };
        Ok((probs, cache))
    }

    fn backward(&self, cache: &UnetCache, dlogits: &Tensor) -> Vec<Tensor> {
        let (dhead_x, dhead_w, dhead_b) = self.head.backward(&cache.head_x, dlogits);

        // decoder, shallow -> deep
        let mut dec_grads: Vec<[Tensor; 8]> = Vec::new(); // per j: dwa,pwa,ba,dwb,pwb,bb,mw,mb
        let mut dskips: Vec<Option<Tensor>> = vec![None; UNET_DEPTH];
        let mut dy = dhead_x;
        for j in (0..UNET_DEPTH).rev() {
            let l = UNET_DEPTH - 1 - j;
            let dc = &cache.dec[j];
            let dyb = relu_backward(&dc.yb, &dy);
            let (dya_pre, dwb, pwb, bb) = self.dec[j].1.backward(&dc.b, &dyb);
            let dya = relu_backward(&dc.ya, &dya_pre);
            let (dfused, dwa, pwa, ba) = self.dec[j].0.backward(&dc.a, &dya);
            // add: gradient flows to both the matched branch and the skip
            dskips[l] = Some(dfused.clone());
            let (dup, mw, mb) = self.matches[j].backward(&dc.up, &dfused);
            let mut ddeep = upsample2x_backward(&dup);
            debug_assert_eq!((ddeep.h, ddeep.w), dc.up_in_hw);
            ddeep.debug_assert_finite("decoder upsample backward");
            dec_grads.push([dwa, pwa, ba, dwb, pwb, bb, mw, mb]);
            dy = ddeep;
        }
        dec_grads.reverse(); // back to deep -> shallow order

        // bottleneck
        let dbn2 = relu_backward(&cache.bn_y2, &dy);
        let (dbn1_pre, dbn2_w, dbn2_b) = self.bottleneck.1.backward(&cache.bn_y1, &dbn2);
        let dbn1 = relu_backward(&cache.bn_y1, &dbn1_pre);
        let (mut dy, dbn1_w, dbn1_b) = self.bottleneck.0.backward(&cache.bn_x, &dbn1);

        // encoder, deep -> shallow
        let mut enc_grads: Vec<[Tensor; 6]> = vec![];
        for l in (0..UNET_DEPTH).rev() {
            let ec = &cache.enc[l];
            let mut dyb = maxpool2x2_backward(&ec.argmax, &dy, ec.pre_pool_hw.0, ec.pre_pool_hw.1);
            if let Some(ds) = &dskips[l] {
                dyb = add(&dyb, ds).expect("skip gradient shape");
            }
            let dyb = relu_backward(&ec.yb, &dyb);
            let (dya_pre, dwb, pwb, bb) = self.enc[l].1.backward(&ec.b, &dyb);
            let dya = relu_backward(&ec.ya, &dya_pre);
            let (dx, dwa, pwa, ba) = self.enc[l].0.backward(&ec.a, &dya);
            enc_grads.push([dwa, pwa, ba, dwb, pwb, bb]);
            dy = dx;
        }
        enc_grads.reverse();

        // flatten in the canonical parameter order
        let mut out = Vec::new();
        for g in enc_grads {
            out.extend(g);
        }
        out.extend([dbn1_w, dbn1_b, dbn2_w, dbn2_b]);
        for g in dec_grads {
            let [dwa, pwa, ba, dwb, pwb, bb, mw, mb] = g;
            out.extend([mw, mb, dwa, pwa, ba, dwb, pwb, bb]);
        }
        out.extend([dhead_w, dhead_b]);
        out
    }
}

// ---------------------------------------------------------------------------
// Network facade
// ---------------------------------------------------------------------------

pub enum Cache {
    Dnn(DnnCache),
    Unet(UnetCache),
}

impl Cache {
    pub fn probs(&self) -> &Tensor {
        match self {
            Cache::Dnn(c) => &c.probs,
            Cache::Unet(c) => &c.probs,
        }
    }
}

pub enum Network {
    Dnn(DnnNet),
    Unet(UnetNet),
}

impl Network {
    /// Build with He-uniform kernels and zero biases, seeded.
    pub fn build(spec: &ModelSpec, seed: u64) -> Result<Network> {
        spec.validate()?;
        let mut rng = crate::rng::stream(seed, "init", &[]);
        Ok(match spec.arch {
            Arch::Dnn => Network::Dnn(DnnNet::build(spec, &mut rng)),
            Arch::Unet => Network::Unet(UnetNet::build(spec, &mut rng)),
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        match self {
            Network::Dnn(n) => &n.spec,
            Network::Unet(n) => &n.spec,
        }
    }

    /// Training-mode forward (dropout active for the DNN).
    pub fn forward_train(&self, x: &Tensor, dropout_rng: &mut ChaCha8Rng) -> Result<(Tensor, Cache)> {
        match self {
            Network::Dnn(n) => {
                let (p, c) = n.forward(x, Some(dropout_rng))?;
                Ok((p, Cache::Dnn(c)))
            }
            Network::Unet(n) => {
                let (p, c) = n.forward(x)?;
                Ok((p, Cache::Unet(c)))
            }
        }
    }

    /// Inference-mode probabilities.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Network::Dnn(n) => Ok(n.forward(x, None)?.0),
            Network::Unet(n) => Ok(n.forward(x)?.0),
        }
    }

    /// Parameter gradients in enumeration order, from the gradient at the
    /// softmax logits.
    pub fn backward(&self, cache: &Cache, dlogits: &Tensor) -> Vec<Tensor> {
        match (self, cache) {
            (Network::Dnn(n), Cache::Dnn(c)) => n.backward(c, dlogits),
            (Network::Unet(n), Cache::Unet(c)) => n.backward(c, dlogits),
            _ => unreachable!("cache/arch mismatch"),
        }
    }

    pub fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        match self {
            Network::Dnn(n) => {
                for (i, conv) in n.convs.iter().enumerate() {
                    out.push((format!("conv{i}.w"), &conv.w));
                    out.push((format!("conv{i}.b"), &conv.b));
                }
            }
            Network::Unet(n) => {
                for (l, (a, b)) in n.enc.iter().enumerate() {
                    out.push((format!("enc{l}.a.dw"), &a.dw));
                    out.push((format!("enc{l}.a.pw"), &a.pw));
                    out.push((format!("enc{l}.a.b"), &a.b));
                    out.push((format!("enc{l}.b.dw"), &b.dw));
                    out.push((format!("enc{l}.b.pw"), &b.pw));
                    out.push((format!("enc{l}.b.b"), &b.b));
                }
                out.push(("bn0.w".into(), &n.bottleneck.0.w));
                out.push(("bn0.b".into(), &n.bottleneck.0.b));
                out.push(("bn1.w".into(), &n.bottleneck.1.w));
                out.push(("bn1.b".into(), &n.bottleneck.1.b));
                for (j, ((a, b), m)) in n.dec.iter().zip(&n.matches).enumerate() {
                    let l = UNET_DEPTH - 1 - j;
                    out.push((format!("match{l}.w"), &m.w));
                    out.push((format!("match{l}.b"), &m.b));
                    out.push((format!("dec{l}.a.dw"), &a.dw));
                    out.push((format!("dec{l}.a.pw"), &a.pw));
                    out.push((format!("dec{l}.a.b"), &a.b));
                    out.push((format!("dec{l}.b.dw"), &b.dw));
                    out.push((format!("dec{l}.b.pw"), &b.pw));
                    out.push((format!("dec{l}.b.b"), &b.b));
                }
                out.push(("head.w".into(), &n.head.w));
                out.push(("head.b".into(), &n.head.b));
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = Vec::new();
        match self {
            Network::Dnn(n) => {
                for (i, conv) in n.convs.iter_mut().enumerate() {
                    out.push((format!("conv{i}.w"), &mut conv.w));
                    out.push((format!("conv{i}.b"), &mut conv.b));
                }
            }
            Network::Unet(n) => {
                for (l, (a, b)) in n.enc.iter_mut().enumerate() {
                    out.push((format!("enc{l}.a.dw"), &mut a.dw));
                    out.push((format!("enc{l}.a.pw"), &mut a.pw));
                    out.push((format!("enc{l}.a.b"), &mut a.b));
                    out.push((format!("enc{l}.b.dw"), &mut b.dw));
                    out.push((format!("enc{l}.b.pw"), &mut b.pw));
                    out.push((format!("enc{l}.b.b"), &mut b.b));
                }
                out.push(("bn0.w".into(), &mut n.bottleneck.0.w));
                out.push(("bn0.b".into(), &mut n.bottleneck.0.b));
                out.push(("bn1.w".into(), &mut n.bottleneck.1.w));
                out.push(("bn1.b".into(), &mut n.bottleneck.1.b));
                for (j, ((a, b), m)) in n.dec.iter_mut().zip(n.matches.iter_mut()).enumerate() {
                    let l = UNET_DEPTH - 1 - j;
                    out.push((format!("match{l}.w"), &mut m.w));
                    out.push((format!("match{l}.b"), &mut m.b));
                    out.push((format!("dec{l}.a.dw"), &mut a.dw));
                    out.push((format!("dec{l}.a.pw"), &mut a.pw));
                    out.push((format!("dec{l}.a.b"), &mut a.b));
                    out.push((format!("dec{l}.b.dw"), &mut b.dw));
                    out.push((format!("dec{l}.b.pw"), &mut b.pw));
                    out.push((format!("dec{l}.b.b"), &mut b.b));
                }
                out.push(("head.w".into(), &mut n.head.w));
                out.push(("head.b".into(), &mut n.head.b));
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    /// Pointwise (1x1) weights only, for the scaling check on base filters.
    pub fn pointwise_param_count(&self) -> usize {
        self.params()
            .iter()
            .filter(|(name, t)| t.h == 1 && t.w == 1 && t.c > 1 && !name.ends_with(".b"))
            .map(|(_, t)| t.len())
            .sum()
    }
}

/// Adam first/second moments aligned with the parameter enumeration, plus
/// the step counter.
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
}

impl AdamState {
    pub fn new_for(net: &Network) -> AdamState {
        let zeros: Vec<Tensor> = net
            .params()
            .iter()
            .map(|(_, t)| Tensor::zeros(t.n, t.c, t.h, t.w))
            .collect();
        AdamState { m: zeros.clone(), v: zeros, step: 0 }
    }
}
