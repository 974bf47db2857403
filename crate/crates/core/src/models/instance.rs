//! Instance-space network: every instance gets its own class prediction and the
//! bag prediction pools them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nn::{affine, affine_backward, elu, elu_grad, glorot, log_sum_exp, softmax_in_place};
use super::Network;
use crate::attribution::AttributionMatrix;
use crate::bag::Bag;
use crate::classifier::{BagClassifier, ClassDistribution};
use crate::error::{Error, Result};

/// How per-instance outputs become a bag prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// Softmax of the mean instance logit vector.
    MeanLogit,
    /// Mean of the instance class distributions.
    MeanProb,
    /// Per-class maximum of the instance distributions, renormalised.
    MaxProb,
    /// Softmax of the per-class maximum instance logit. A bag scores a class as
    /// highly as its most convinced instance, so a lone instance is judged like
    /// a bag of its own kind.
    MaxLogit,
}

impl Pooling {
    pub(crate) fn code(self) -> u8 {
        match self {
            Pooling::MeanLogit => 0,
            Pooling::MeanProb => 1,
            Pooling::MaxProb => 2,
            Pooling::MaxLogit => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Pooling::MeanLogit),
            1 => Some(Pooling::MeanProb),
            2 => Some(Pooling::MaxProb),
            3 => Some(Pooling::MaxLogit),
            _ => None,
        }
    }
}

/// `x -> ELU(W1 x + b1) -> W2 h + b2` per instance, then pooled.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceModel {
    dim: usize,
    hidden: usize,
    classes: usize,
    pooling: Pooling,
    params: Vec<f64>,
}

struct Layout {
    w1: std::ops::Range<usize>,
    b1: std::ops::Range<usize>,
    w2: std::ops::Range<usize>,
    b2: std::ops::Range<usize>,
}

/// Forward-pass intermediates for one instance.
struct InstanceTrace {
    pre: Vec<f64>,
    hid: Vec<f64>,
    logits: Vec<f64>,
}

impl InstanceModel {
    pub fn new(dim: usize, hidden: usize, classes: usize, pooling: Pooling, seed: u64) -> Self {
        let mut m = InstanceModel {
            dim,
            hidden,
            classes,
            pooling,
            params: Vec::new(),
        };
        m.params = vec![0.0; Self::param_count(dim, hidden, classes)];
        let l = m.layout();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        glorot(&mut rng, &mut m.params[l.w1], dim, hidden);
        glorot(&mut rng, &mut m.params[l.w2], hidden, classes);
        m
    }

    pub(crate) fn from_params(
        dim: usize,
        hidden: usize,
        classes: usize,
        pooling: Pooling,
        params: Vec<f64>,
    ) -> Result<Self> {
        if params.len() != Self::param_count(dim, hidden, classes) {
            return Err(Error::Schema(format!(
                "instance model expects {} parameters, got {}",
                Self::param_count(dim, hidden, classes),
                params.len()
            )));
        }
        Ok(InstanceModel {
            dim,
            hidden,
            classes,
            pooling,
            params,
        })
    }

    pub(crate) fn param_count(dim: usize, hidden: usize, classes: usize) -> usize {
        hidden * dim + hidden + classes * hidden + classes
    }

    fn layout(&self) -> Layout {
        let (d, h, c) = (self.dim, self.hidden, self.classes);
        let w1 = 0..h * d;
        let b1 = w1.end..w1.end + h;
        let w2 = b1.end..b1.end + c * h;
        let b2 = w2.end..w2.end + c;
        Layout { w1, b1, w2, b2 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn pooling(&self) -> Pooling {
        self.pooling
    }

    fn trace(&self, x: &[f64]) -> InstanceTrace {
        let l = self.layout();
        let p = &self.params;
        let mut pre = vec![0.0; self.hidden];
        affine(&p[l.w1], &p[l.b1], x, &mut pre);
        let hid: Vec<f64> = pre.iter().map(|&v| elu(v)).collect();
        let mut logits = vec![0.0; self.classes];
        affine(&p[l.w2], &p[l.b2], &hid, &mut logits);
        InstanceTrace { pre, hid, logits }
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

    /// Class distribution of every instance on its own.
    pub fn instance_predictions(&self, bag: &Bag) -> Result<Vec<Vec<f64>>> {
        self.check_dim(bag)?;
        Ok(bag
            .instances()
            .map(|x| {
                let mut q = self.trace(x).logits;
                softmax_in_place(&mut q);
                q
            })
            .collect())
    }

    /// Bag distribution and (for training) the per-instance traces and
    /// instance distributions.
    fn pooled(&self, bag: &Bag) -> (Vec<f64>, Vec<InstanceTrace>, Vec<Vec<f64>>) {
        let traces: Vec<InstanceTrace> = bag.instances().map(|x| self.trace(x)).collect();
        let k = traces.len() as f64;
        let c = self.classes;
        match self.pooling {
            Pooling::MeanLogit => {
                let mut mean = vec![0.0; c];
                for t in &traces {
                    for (m, l) in mean.iter_mut().zip(&t.logits) {
                        *m += l / k;
                    }
                }
                (mean, traces, Vec::new())
            }
            Pooling::MaxLogit => {
                let mut max = vec![f64::NEG_INFINITY; c];
                for t in &traces {
                    for (m, l) in max.iter_mut().zip(&t.logits) {
                        *m = m.max(*l);
                    }
                }
                (max, traces, Vec::new())
            }
            Pooling::MeanProb | Pooling::MaxProb => {
                let qs: Vec<Vec<f64>> = traces
                    .iter()
                    .map(|t| {
                        let mut q = t.logits.clone();
                        softmax_in_place(&mut q);
                        q
                    })
                    .collect();
                let mut out = vec![0.0; c];
                if self.pooling == Pooling::MeanProb {
                    for q in &qs {
                        for (o, v) in out.iter_mut().zip(q) {
                            *o += v / k;
                        }
                    }
                } else {
                    for q in &qs {
                        for (o, v) in out.iter_mut().zip(q) {
                            *o = o.max(*v);
                        }
                    }
                }
                (out, traces, qs)
            }
        }
    }

    fn distribution(&self, pooled: &[f64]) -> Vec<f64> {
        let mut p = pooled.to_vec();
        match self.pooling {
            Pooling::MeanLogit | Pooling::MaxLogit => softmax_in_place(&mut p),
            Pooling::MeanProb => {}
            Pooling::MaxProb => {
                let s: f64 = p.iter().sum();
                p.iter_mut().for_each(|v| *v /= s);
            }
        }
        p
    }

    fn loss_of(&self, pooled: &[f64], label: usize) -> f64 {
        match self.pooling {
            Pooling::MeanLogit | Pooling::MaxLogit => log_sum_exp(pooled) - pooled[label],
            Pooling::MeanProb => -pooled[label].ln(),
            Pooling::MaxProb => pooled.iter().sum::<f64>().ln() - pooled[label].ln(),
        }
    }
}

impl BagClassifier for InstanceModel {
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn predict(&self, bag: &Bag) -> Result<ClassDistribution> {
        self.check_dim(bag)?;
        let (pooled, _, _) = self.pooled(bag);
        let mut p = self.distribution(&pooled);
        // renormalise away rounding so the simplex check is exact
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        ClassDistribution::new(p)
    }
}

impl Network for InstanceModel {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn loss(&self, bag: &Bag, label: usize) -> f64 {
        let (pooled, _, _) = self.pooled(bag);
        self.loss_of(&pooled, label)
    }

    fn loss_and_grad(&self, bag: &Bag, label: usize, grad: &mut [f64]) -> f64 {
        let (pooled, traces, qs) = self.pooled(bag);
        let loss = self.loss_of(&pooled, label);
        let k = traces.len() as f64;
        let c = self.classes;

        // gradient of the loss with respect to each instance's logits
        let dlogits: Vec<Vec<f64>> = match self.pooling {
            Pooling::MeanLogit => {
                let mut g = pooled.clone();
                softmax_in_place(&mut g);
                g[label] -= 1.0;
                let per: Vec<f64> = g.iter().map(|v| v / k).collect();
                vec![per; traces.len()]
            }
            Pooling::MaxLogit => {
                let mut g = pooled.clone();
                softmax_in_place(&mut g);
                g[label] -= 1.0;
                // each class's gradient flows to its first maximising instance
                let mut d = vec![vec![0.0; c]; traces.len()];
                for j in 0..c {
                    let winner = (0..traces.len()).find(|&i| traces[i].logits[j] == pooled[j]).unwrap_or(0);
                    d[winner][j] = g[j];
                }
                d
            }
            Pooling::MeanProb => {
                let scale = -1.0 / (k * pooled[label]);
                qs.iter()
                    .map(|q| {
                        (0..c)
                            .map(|j| {
                                let delta = if j == label { 1.0 } else { 0.0 };
                                scale * q[label] * (delta - q[j])
                            })
                            .collect()
                    })
                    .collect()
            }
            Pooling::MaxProb => {
                let total: f64 = pooled.iter().sum();
                let mut dq = vec![vec![0.0; c]; qs.len()];
                for j in 0..c {
                    let winner = (0..qs.len())
                        .fold(0, |best, i| if qs[i][j] > qs[best][j] { i } else { best });
                    let mut d = 1.0 / total;
                    if j == label {
                        d -= 1.0 / pooled[label];
                    }
                    dq[winner][j] += d;
                }
                qs.iter()
                    .zip(&dq)
                    .map(|(q, dqi)| {
                        let dot: f64 = q.iter().zip(dqi).map(|(a, b)| a * b).sum();
                        (0..c).map(|j| q[j] * (dqi[j] - dot)).collect()
                    })
                    .collect()
            }
        };

        let l = self.layout();
        let p = &self.params;
        let (gw1_b1, gw2_b2) = grad.split_at_mut(l.w2.start);
        let (gw1, gb1) = gw1_b1.split_at_mut(l.b1.start);
        let (gw2, gb2) = gw2_b2.split_at_mut(l.w2.len());
        let mut dhid = vec![0.0; self.hidden];
        for ((t, dl), x) in traces.iter().zip(&dlogits).zip(bag.instances()) {
            dhid.iter_mut().for_each(|v| *v = 0.0);
            affine_backward(&p[l.w2.clone()], &t.hid, dl, gw2, gb2, Some(&mut dhid));
            let dpre: Vec<f64> = dhid
                .iter()
                .zip(&t.pre)
                .map(|(g, &z)| g * elu_grad(z))
                .collect();
            affine_backward(&p[l.w1.clone()], x, &dpre, gw1, gb1, None);
        }
        loss
    }

    fn inherent(&self, bag: &Bag) -> Result<AttributionMatrix> {
        let q = self.instance_predictions(bag)?;
        let mut m = AttributionMatrix::new("inherent", self.classes, bag.len());
        for c in 0..self.classes {
            m.set_row(c, q.iter().map(|qi| qi[c]).collect())?;
        }
        Ok(m)
    }
}
