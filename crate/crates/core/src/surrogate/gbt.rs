//! Squared-error gradient boosting over depth-limited regression trees.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtSpec {
    pub trees: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    pub min_samples_leaf: usize,
}

impl Default for GbtSpec {
    fn default() -> Self {
        GbtSpec {
            trees: 100,
            max_depth: 3,
            shrinkage: 0.1,
            min_samples_leaf: 2,
        }
    }
}

impl GbtSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 || self.min_samples_leaf == 0 {
            return Err(Error::Config("gbt: trees and min_samples_leaf must be at least 1".into()));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(Error::Config("gbt: shrinkage must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub input_dim: usize,
    pub base: f64,
    pub shrinkage: f64,
    /// Each tree is a node array rooted at index 0.
    pub trees: Vec<Vec<TreeNode>>,
}

impl GbtModel {
    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.predict_first(x, self.trees.len())
    }

    /// Prediction using only the first `k` boosting rounds.
    pub fn predict_first(&self, x: &[f64], k: usize) -> f64 {
        self.base
            + self.trees[..k.min(self.trees.len())]
                .iter()
                .map(|t| self.shrinkage * eval_tree(t, x))
                .sum::<f64>()
    }
}

fn eval_tree(nodes: &[TreeNode], x: &[f64]) -> f64 {
    let mut i = 0;
    loop {
        match nodes[i] {
            TreeNode::Leaf { value } => return value,
            TreeNode::Split { feature, threshold, left, right } => {
                i = if x[feature] <= threshold { left } else { right };
            }
        }
    }
}

pub fn train_gbt(spec: &GbtSpec, x: &[&[f64]], y: &[f64]) -> Result<GbtModel> {
    let n = y.len();
    if n < spec.min_samples_leaf {
        return Err(Error::InsufficientData(format!(
            "{n} samples is fewer than min_samples_leaf = {}",
            spec.min_samples_leaf
        )));
    }
    let base = y.iter().sum::<f64>() / n as f64;
    let mut pred = vec![base; n];
    let mut trees = Vec::with_capacity(spec.trees);
    let mut residual = vec![0.0; n];
    let dim = x[0].len();
    let orders: Vec<Vec<usize>> = (0..dim)
        .map(|f| {
            let mut o: Vec<usize> = (0..n).collect();
            o.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
            o
        })
        .collect();
    let mut ctx = Ctx { spec, x, orders, mark: vec![false; n] };
    for _ in 0..spec.trees {
        for i in 0..n {
            residual[i] = y[i] - pred[i];
        }
        let mut nodes = Vec::new();
        ctx.build(&residual, (0..n).collect(), 0, &mut nodes);
        for i in 0..n {
            pred[i] += spec.shrinkage * eval_tree(&nodes, x[i]);
        }
        trees.push(nodes);
    }
    Ok(GbtModel {
        input_dim: x[0].len(),
        base,
        shrinkage: spec.shrinkage,
        trees,
    })
}

/// Training data with each feature's sample order precomputed.
struct Ctx<'a> {
    spec: &'a GbtSpec,
    x: &'a [&'a [f64]],
    orders: Vec<Vec<usize>>,
    mark: Vec<bool>,
}

impl Ctx<'_> {
    fn build(&mut self, r: &[f64], idx: Vec<usize>, depth: usize, nodes: &mut Vec<TreeNode>) -> usize {
        let me = nodes.len();
        let mean = idx.iter().map(|&i| r[i]).sum::<f64>() / idx.len() as f64;
        nodes.push(TreeNode::Leaf { value: mean });
        if depth >= self.spec.max_depth || idx.len() < 2 * self.spec.min_samples_leaf {
            return me;
        }
        let Some((feature, threshold)) = self.best_split(r, &idx) else {
            return me;
        };
        let (l, rr): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.build(r, l, depth + 1, nodes);
        let right = self.build(r, rr, depth + 1, nodes);
        nodes[me] = TreeNode::Split { feature, threshold, left, right };
        me
    }

    /// Largest variance reduction; earlier features and lower thresholds win ties.
    fn best_split(&mut self, r: &[f64], idx: &[usize]) -> Option<(usize, f64)> {
        let n = idx.len();
        let min_leaf = self.spec.min_samples_leaf;
        let total: f64 = idx.iter().map(|&i| r[i]).sum();
        let parent = total * total / n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        for &i in idx {
            self.mark[i] = true;
        }
        let mut members = Vec::with_capacity(n);
        for (f, order) in self.orders.iter().enumerate() {
            members.clear();
            members.extend(order.iter().copied().filter(|&i| self.mark[i]));
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += r[members[k]];
                let (lo, hi) = (self.x[members[k]][f], self.x[members[k + 1]][f]);
                let nl = k + 1;
                if lo == hi || nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / (n - nl) as f64 - parent;
                if gain > 1e-12 && best.map_or(true, |(g, _, _)| gain > g) {
                    best = Some((gain, f, lo + (hi - lo) / 2.0));
                }
            }
        }
        for &i in idx {
            self.mark[i] = false;
        }
        best.map(|(_, f, t)| (f, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rows(x: &[Vec<f64>]) -> Vec<&[f64]> {
        x.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn single_stump_predicts_mean() {
        let x: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..7).map(|i| (i * i) as f64).collect();
        let spec = GbtSpec { trees: 1, max_depth: 0, ..Default::default() };
        let m = train_gbt(&spec, &rows(&x), &y).unwrap();
        let mean = y.iter().sum::<f64>() / 7.0;
        for r in &x {
            assert!((m.predict_unchecked(r) - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_targets() {
        let x: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, -(i as f64)]).collect();
        let m = train_gbt(&GbtSpec::default(), &rows(&x), &[3.0; 5]).unwrap();
        assert!((m.predict_unchecked(&[10.0, 2.0]) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn split_on_step_function() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![0.0, i as f64]).collect();
        let y: Vec<f64> = (0..8).map(|i| if i < 4 { 0.0 } else { 1.0 }).collect();
        let spec = GbtSpec { trees: 1, max_depth: 1, shrinkage: 1.0, min_samples_leaf: 1 };
        let m = train_gbt(&spec, &rows(&x), &y).unwrap();
        assert_eq!(
            m.trees[0][0],
            TreeNode::Split { feature: 1, threshold: 3.5, left: 1, right: 2 }
        );
        assert!((m.predict_unchecked(&[0.0, 1.0])).abs() < 1e-12);
        assert!((m.predict_unchecked(&[0.0, 6.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tie_goes_to_lowest_feature() {
        // Two identical features: the split must use feature 0.
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, i as f64]).collect();
        let y = [0.0, 0.0, 0.0, 5.0, 5.0, 5.0];
        let spec = GbtSpec { trees: 1, max_depth: 1, shrinkage: 1.0, min_samples_leaf: 1 };
        let m = train_gbt(&spec, &rows(&x), &y).unwrap();
        assert!(matches!(m.trees[0][0], TreeNode::Split { feature: 0, .. }));
    }

    #[test]
    fn training_mse_non_increasing_per_round() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x: Vec<Vec<f64>> = (0..40).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * r[1] + r[2].sin() + rng.gen_range(-0.1..0.1)).collect();
        let m = train_gbt(&GbtSpec::default(), &rows(&x), &y).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..=m.trees.len() {
            let mse: f64 = x.iter().zip(&y).map(|(r, t)| (m.predict_first(r, k) - t).powi(2)).sum::<f64>() / 40.0;
            assert!(mse <= last + 1e-12);
            last = mse;
        }
    }

    #[test]
    fn too_few_samples() {
        let x = vec![vec![1.0]];
        let spec = GbtSpec { min_samples_leaf: 2, ..Default::default() };
        assert!(train_gbt(&spec, &rows(&x), &[1.0]).is_err());
    }
}
