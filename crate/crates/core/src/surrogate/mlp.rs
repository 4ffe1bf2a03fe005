//! Fully connected rectifier network trained with Adam on squared error.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::column_stats;
use crate::error::{Error, Result};
use crate::hash;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpSpec {
    pub hidden_layers: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub weight_init_scale: f64,
}

impl Default for MlpSpec {
    fn default() -> Self {
        MlpSpec {
            hidden_layers: vec![64, 64],
            epochs: 200,
            batch_size: 16,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            weight_init_scale: 1.0,
        }
    }
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("mlp: {m}")));
        if self.hidden_layers.contains(&0) {
            return bad("hidden layer widths must be at least 1");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.adam_epsilon > 0.0 && self.weight_init_scale > 0.0) {
            return bad("adam_epsilon and weight_init_scale must be positive");
        }
        Ok(())
    }
}

/// Network with a flat parameter vector: per layer, row-major weights then biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

impl Network {
    /// Uniform init on ±scale/√fan_in, zero biases.
    pub fn init<R: Rng + ?Sized>(sizes: Vec<usize>, scale: f64, rng: &mut R) -> Self {
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let s = scale / (fan_in as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.gen_range(-s..=s)));
            params.extend(std::iter::repeat(0.0).take(fan_out));
        }
        Network { sizes, params }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    fn width(&self) -> usize {
        *self.sizes.iter().max().unwrap()
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let mut a = x.to_vec();
        let mut next = Vec::with_capacity(self.width());
        let mut off = 0;
        let layers = self.sizes.len() - 1;
        for l in 0..layers {
            let (fin, fout) = (self.sizes[l], self.sizes[l + 1]);
            let (w, b) = (&self.params[off..off + fin * fout], &self.params[off + fin * fout..off + fin * fout + fout]);
            next.clear();
            for o in 0..fout {
                let z = b[o] + dot(&w[o * fin..(o + 1) * fin], &a);
                next.push(if l + 1 < layers { z.max(0.0) } else { z });
            }
            std::mem::swap(&mut a, &mut next);
            off += fin * fout + fout;
        }
        a[0]
    }

    /// Mean squared error over `idx` and its gradient with respect to `params`.
    pub fn loss_and_grad(&self, x: &[&[f64]], y: &[f64], idx: &[usize]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.accumulate(x, y, idx, &mut grad);
        (loss, grad)
    }

    fn accumulate(&self, x: &[&[f64]], y: &[f64], idx: &[usize], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for l in 0..layers {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let nb = idx.len() as f64;
        let mut acts: Vec<Vec<f64>> = self.sizes.iter().map(|&s| vec![0.0; s]).collect();
        let mut delta = vec![0.0; self.width()];
        let mut prev_delta = vec![0.0; self.width()];
        let mut loss = 0.0;
        for &i in idx {
            acts[0].copy_from_slice(x[i]);
            for l in 0..layers {
                let (fin, fout, o0) = (self.sizes[l], self.sizes[l + 1], offsets[l]);
                let (lo, hi) = acts.split_at_mut(l + 1);
                let (input, out) = (&lo[l], &mut hi[0]);
                for o in 0..fout {
                    let z = self.params[o0 + fin * fout + o] + dot(&self.params[o0 + o * fin..o0 + (o + 1) * fin], input);
                    out[o] = if l + 1 < layers { z.max(0.0) } else { z };
                }
            }
            let err = acts[layers][0] - y[i];
            loss += err * err;
            delta[0] = 2.0 * err / nb;
            for l in (0..layers).rev() {
                let (fin, fout, o0) = (self.sizes[l], self.sizes[l + 1], offsets[l]);
                let input = &acts[l];
                for o in 0..fout {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = o0 + o * fin;
                    for (g, a) in grad[row..row + fin].iter_mut().zip(input) {
                        *g += d * a;
                    }
                    grad[o0 + fin * fout + o] += d;
                }
                if l > 0 {
                    for k in 0..fin {
                        // Rectifier derivative: post-activation > 0 iff pre-activation > 0.
                        if input[k] > 0.0 {
                            let mut s = 0.0;
                            for o in 0..fout {
                                s += self.params[o0 + o * fin + k] * delta[o];
                            }
                            prev_delta[k] = s;
                        } else {
                            prev_delta[k] = 0.0;
                        }
                    }
                    std::mem::swap(&mut delta, &mut prev_delta);
                }
            }
        }
        loss / nb
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Network plus the standardization it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub network: Network,
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_mean: f64,
    /// Zero when the training targets were constant.
    pub y_scale: f64,
}

impl MlpModel {
    pub fn input_dim(&self) -> usize {
        self.x_mean.len()
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        if self.y_scale == 0.0 {
            return self.y_mean;
        }
        let z: Vec<f64> = x
            .iter()
            .zip(self.x_mean.iter().zip(&self.x_scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        self.y_mean + self.y_scale * self.network.forward(&z)
    }
}

pub fn train_mlp(spec: &MlpSpec, x: &[&[f64]], y: &[f64], seed: u64) -> Result<MlpModel> {
    Ok(fit(spec, x, y, seed, false).0)
}

/// Train and record the full-data standardized loss after every epoch.
pub fn train_mlp_with_history(spec: &MlpSpec, x: &[&[f64]], y: &[f64], seed: u64) -> Result<(MlpModel, Vec<f64>)> {
    Ok(fit(spec, x, y, seed, true))
}

fn fit(spec: &MlpSpec, x: &[&[f64]], y: &[f64], seed: u64, history: bool) -> (MlpModel, Vec<f64>) {
    let (x_mean, x_scale) = column_stats(x);
    let n = y.len();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let y_sd = (y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let y_scale = if y_sd > 1e-12 * y_mean.abs().max(1.0) { y_sd } else { 0.0 };

    let mut rng = hash::stream(seed, &[]);
    let mut sizes = vec![x_mean.len()];
    sizes.extend(&spec.hidden_layers);
    sizes.push(1);
    let mut net = Network::init(sizes, spec.weight_init_scale, &mut rng);
    let mut losses = Vec::new();
    if y_scale == 0.0 {
        let model = MlpModel { network: net, x_mean, x_scale, y_mean, y_scale };
        return (model, losses);
    }

    let xs: Vec<Vec<f64>> = x
        .iter()
        .map(|r| r.iter().zip(x_mean.iter().zip(&x_scale)).map(|(v, (m, s))| (v - m) / s).collect())
        .collect();
    let xs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();
    let all: Vec<usize> = (0..n).collect();

    let p = net.params.len();
    let (mut m1, mut m2, mut grad) = (vec![0.0; p], vec![0.0; p], vec![0.0; p]);
    let (b1, b2) = (spec.adam_beta1, spec.adam_beta2);
    let mut t = 0i32;
    let mut order = all.clone();
    for _ in 0..spec.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(spec.batch_size) {
            net.accumulate(&xs, &ys, batch, &mut grad);
            t += 1;
            let c1 = 1.0 - b1.powi(t);
            let c2 = 1.0 - b2.powi(t);
            for k in 0..p {
                let g = grad[k];
                m1[k] = b1 * m1[k] + (1.0 - b1) * g;
                m2[k] = b2 * m2[k] + (1.0 - b2) * g * g;
                net.params[k] -= spec.learning_rate * (m1[k] / c1) / ((m2[k] / c2).sqrt() + spec.adam_epsilon);
            }
        }
        if history {
            losses.push(net.accumulate(&xs, &ys, &all, &mut grad));
        }
    }
    (MlpModel { network: net, x_mean, x_scale, y_mean, y_scale }, losses)
}
