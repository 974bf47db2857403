//! Embedding-space network with attention pooling.
//!
//! Each instance is embedded as `e = ELU(V x + b_v)`. A single hidden attention
//! layer scores it, `s = w · tanh(U e + b_u)`, and the scores are
//! softmax-normalised over the bag. The bag embedding `Σ a_i e_i` is classified
//! by a linear layer. With attention disabled the weights are uniform, which
//! gives a plain mean-pooling embedding network.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::nn::{affine, affine_backward, elu, elu_grad, glorot, log_sum_exp, softmax_in_place};
use super::Network;
use crate::attribution::AttributionMatrix;
use crate::bag::Bag;
use crate::classifier::{BagClassifier, ClassDistribution};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionModel {
    dim: usize,
    embed: usize,
    attn_hidden: usize,
    classes: usize,
    attention: bool,
    params: Vec<f64>,
}

type R = std::ops::Range<usize>;

struct Layout {
    v: R,
    bv: R,
    u: R,
    bu: R,
    w: R,
    wc: R,
    bc: R,
}

struct Trace {
    pre: Vec<Vec<f64>>,
    emb: Vec<Vec<f64>>,
    att_hidden: Vec<Vec<f64>>,
    weights: Vec<f64>,
    logits: Vec<f64>,
    pooled: Vec<f64>,
}

impl AttentionModel {
    pub fn new(
        dim: usize,
        embed: usize,
        attn_hidden: usize,
        classes: usize,
        attention: bool,
        seed: u64,
    ) -> Self {
        let mut m = AttentionModel {
            dim,
            embed,
            attn_hidden,
            classes,
            attention,
            params: vec![0.0; Self::param_count(dim, embed, attn_hidden, classes)],
        };
        let l = m.layout();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        glorot(&mut rng, &mut m.params[l.v], dim, embed);
        glorot(&mut rng, &mut m.params[l.u], embed, attn_hidden);
        glorot(&mut rng, &mut m.params[l.w], attn_hidden, 1);
        glorot(&mut rng, &mut m.params[l.wc], embed, classes);
        m
    }

    pub(crate) fn from_params(
        dim: usize,
        embed: usize,
        attn_hidden: usize,
        classes: usize,
        attention: bool,
        params: Vec<f64>,
    ) -> Result<Self> {
        let expected = Self::param_count(dim, embed, attn_hidden, classes);
        if params.len() != expected {
            return Err(Error::Schema(format!(
                "attention model expects {expected} parameters, got {}",
                params.len()
            )));
        }
        Ok(AttentionModel {
            dim,
            embed,
            attn_hidden,
            classes,
            attention,
            params,
        })
    }

    pub(crate) fn param_count(dim: usize, embed: usize, attn_hidden: usize, classes: usize) -> usize {
        embed * dim + embed + attn_hidden * embed + attn_hidden + attn_hidden + classes * embed + classes
    }

    fn layout(&self) -> Layout {
        let (d, h, a, c) = (self.dim, self.embed, self.attn_hidden, self.classes);
        let v = 0..h * d;
        let bv = v.end..v.end + h;
        let u = bv.end..bv.end + a * h;
        let bu = u.end..u.end + a;
        let w = bu.end..bu.end + a;
        let wc = w.end..w.end + c * h;
        let bc = wc.end..wc.end + c;
        Layout { v, bv, u, bu, w, wc, bc }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embed(&self) -> usize {
        self.embed
    }

    pub fn attention_hidden(&self) -> usize {
        self.attn_hidden
    }

    pub fn attention_enabled(&self) -> bool {
        self.attention
    }

    fn check_dim(&self, bag: &Bag) -> Result<()> {
        if bag.dim() != self.dim {
            return Err(Error::contract(format!(
                "bag dimension {} does not match model dimension {}",
                bag.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    fn trace(&self, bag: &Bag) -> Trace {
        let l = self.layout();
        let p = &self.params;
        let k = bag.len();
        let mut pre = Vec::with_capacity(k);
        let mut emb = Vec::with_capacity(k);
        let mut att_hidden = Vec::with_capacity(k);
        let mut scores = Vec::with_capacity(k);
        for x in bag.instances() {
            let mut z = vec![0.0; self.embed];
            affine(&p[l.v.clone()], &p[l.bv.clone()], x, &mut z);
            let e: Vec<f64> = z.iter().map(|&v| elu(v)).collect();
            if self.attention {
                let mut t = vec![0.0; self.attn_hidden];
                affine(&p[l.u.clone()], &p[l.bu.clone()], &e, &mut t);
                t.iter_mut().for_each(|v| *v = v.tanh());
                scores.push(t.iter().zip(&p[l.w.clone()]).map(|(a, b)| a * b).sum());
                att_hidden.push(t);
            }
            pre.push(z);
            emb.push(e);
        }
        let weights = if self.attention {
            softmax_in_place(&mut scores);
            scores
        } else {
            vec![1.0 / k as f64; k]
        };
        let mut pooled = vec![0.0; self.embed];
        for (a, e) in weights.iter().zip(&emb) {
            for (z, v) in pooled.iter_mut().zip(e) {
                *z += a * v;
            }
        }
        let mut logits = vec![0.0; self.classes];
        affine(&p[l.wc], &p[l.bc], &pooled, &mut logits);
        Trace {
            pre,
            emb,
            att_hidden,
            weights,
            logits,
            pooled,
        }
    }

    /// Attention weight of each instance; non-negative and summing to one.
    pub fn attention_weights(&self, bag: &Bag) -> Result<Vec<f64>> {
        self.check_dim(bag)?;
        Ok(self.trace(bag).weights)
    }
}

impl BagClassifier for AttentionModel {
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn predict(&self, bag: &Bag) -> Result<ClassDistribution> {
        self.check_dim(bag)?;
        Ok(ClassDistribution::softmax(&self.trace(bag).logits))
    }
}

impl Network for AttentionModel {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn loss(&self, bag: &Bag, label: usize) -> f64 {
        let t = self.trace(bag);
        log_sum_exp(&t.logits) - t.logits[label]
    }

    fn loss_and_grad(&self, bag: &Bag, label: usize, grad: &mut [f64]) -> f64 {
        let t = self.trace(bag);
        let loss = log_sum_exp(&t.logits) - t.logits[label];
        let l = self.layout();
        let p = &self.params;

        let mut g = t.logits.clone();
        softmax_in_place(&mut g);
        g[label] -= 1.0;

        let mut dpooled = vec![0.0; self.embed];
        {
            let (gwc, gbc) = grad[l.wc.start..l.bc.end].split_at_mut(l.wc.len());
            affine_backward(&p[l.wc.clone()], &t.pooled, &g, gwc, gbc, Some(&mut dpooled));
        }

        let k = t.emb.len();
        let mut demb: Vec<Vec<f64>> = t
            .weights
            .iter()
            .map(|a| dpooled.iter().map(|d| a * d).collect())
            .collect();

        if self.attention {
            // d loss / d weight_i, then through the softmax over the bag
            let dweights: Vec<f64> = t
                .emb
                .iter()
                .map(|e| e.iter().zip(&dpooled).map(|(a, b)| a * b).sum())
                .collect();
            let mean: f64 = t.weights.iter().zip(&dweights).map(|(a, b)| a * b).sum();
            let w = &p[l.w.clone()];
            for i in 0..k {
                let ds = t.weights[i] * (dweights[i] - mean);
                let hid = &t.att_hidden[i];
                let mut dt = vec![0.0; self.attn_hidden];
                for j in 0..self.attn_hidden {
                    grad[l.w.start + j] += ds * hid[j];
                    dt[j] = ds * w[j] * (1.0 - hid[j] * hid[j]);
                }
                let (gu, gbu) = grad[l.u.start..l.bu.end].split_at_mut(l.u.len());
                affine_backward(&p[l.u.clone()], &t.emb[i], &dt, gu, gbu, Some(&mut demb[i]));
            }
        }

        let (gv, gbv) = grad[l.v.start..l.bv.end].split_at_mut(l.v.len());
        for ((x, z), de) in bag.instances().zip(&t.pre).zip(&demb) {
            let dz: Vec<f64> = de.iter().zip(z).map(|(d, &zv)| d * elu_grad(zv)).collect();
            affine_backward(&p[l.v.clone()], x, &dz, gv, gbv, None);
        }
        loss
    }

    fn inherent(&self, bag: &Bag) -> Result<AttributionMatrix> {
        if !self.attention {
            return Err(Error::NoInherentMethod(
                "mean-pooling embedding network has no attention weights".into(),
            ));
        }
        let weights = self.attention_weights(bag)?;
        let mut m = AttributionMatrix::new("inherent", self.classes, bag.len());
        for c in 0..self.classes {
            m.set_row(c, weights.clone())?;
        }
        Ok(m)
    }
}
