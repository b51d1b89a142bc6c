//! Completion step: a biased latent-factor model fitted to the nonempty
//! off-diagonal entries of an adjacency matrix, then evaluated at its empty
//! entries.
//!
//! The model predicts `y_ij = w0 + w_i + w_j + <v_i, v_j>` and is trained by
//! stochastic gradient descent on
//!
//! ```text
//! J = Σ_{i<j, A_ij nonempty} (A_ij - y_ij)² + γ (w0² + Σ w_i² + Σ v_if²)
//! ```
//!
//! Each epoch takes one step per training pair in a seeded random order,
//! followed by one weight-decay step for the regularizer. Diagonal entries are
//! neither trained on nor predicted.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypermatrix::AdjacencyMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionConfig {
    pub latent_dim: usize,
    pub reg: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        Self {
            latent_dim: 8,
            reg: 0.01,
            learning_rate: 0.01,
            epochs: 100,
            seed: 0,
        }
    }
}

impl CompletionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::InvalidConfig("latent_dim must be at least 1".into()));
        }
        if !(self.reg >= 0.0 && self.reg.is_finite()) {
            return Err(Error::InvalidConfig("reg must be finite and >= 0".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be finite and > 0".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Global bias, per-vertex biases and per-vertex latent vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub w0: f64,
    pub w: Vec<f64>,
    /// Row-major `num_vertices x latent_dim`.
    v: Vec<f64>,
    latent_dim: usize,
}

impl FactorModel {
    pub fn zeros(num_vertices: usize, latent_dim: usize) -> Self {
        Self {
            w0: 0.0,
            w: vec![0.0; num_vertices],
            v: vec![0.0; num_vertices * latent_dim],
            latent_dim,
        }
    }

    /// Builds a model from explicit parameters; `factors` holds one row per vertex.
    pub fn from_parts(w0: f64, w: Vec<f64>, factors: Vec<Vec<f64>>) -> Result<Self> {
        if factors.len() != w.len() {
            return Err(Error::LengthMismatch {
                expected: w.len(),
                found: factors.len(),
            });
        }
        let latent_dim = factors.first().map_or(1, Vec::len);
        if latent_dim == 0 {
            return Err(Error::InvalidConfig("latent_dim must be at least 1".into()));
        }
        let mut v = Vec::with_capacity(w.len() * latent_dim);
        for row in &factors {
            if row.len() != latent_dim {
                return Err(Error::LengthMismatch {
                    expected: latent_dim,
                    found: row.len(),
                });
            }
            v.extend_from_slice(row);
        }
        let model = Self {
            w0,
            w,
            v,
            latent_dim,
        };
        if !model.is_finite() {
            return Err(Error::InvalidConfig("model parameters must be finite".into()));
        }
        Ok(model)
    }

    pub fn num_vertices(&self) -> usize {
        self.w.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn factors(&self, i: usize) -> &[f64] {
        &self.v[i * self.latent_dim..(i + 1) * self.latent_dim]
    }

    pub fn factors_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.v[i * self.latent_dim..(i + 1) * self.latent_dim]
    }

    /// All latent entries, row-major.
    pub fn latent(&self) -> &[f64] {
        &self.v
    }

    pub fn latent_mut(&mut self) -> &mut [f64] {
        &mut self.v
    }

    pub fn predict(&self, i: usize, j: usize) -> f64 {
        let dot: f64 = self
            .factors(i)
            .iter()
            .zip(self.factors(j))
            .map(|(a, b)| a * b)
            .sum();
        self.w0 + self.w[i] + self.w[j] + dot
    }

    pub fn is_finite(&self) -> bool {
        self.w0.is_finite()
            && self.w.iter().all(|x| x.is_finite())
            && self.v.iter().all(|x| x.is_finite())
    }

    fn squared_norm(&self) -> f64 {
        self.w0 * self.w0
            + self.w.iter().map(|x| x * x).sum::<f64>()
            + self.v.iter().map(|x| x * x).sum::<f64>()
    }

    fn scale(&mut self, factor: f64) {
        self.w0 *= factor;
        self.w.iter_mut().for_each(|x| *x *= factor);
        self.v.iter_mut().for_each(|x| *x *= factor);
    }
}

fn check_model_dims(model: &FactorModel, a: &AdjacencyMatrix) -> Result<()> {
    if model.num_vertices() != a.dim() {
        return Err(Error::DimensionMismatch {
            left: model.num_vertices(),
            right: a.dim(),
        });
    }
    Ok(())
}

/// Off-diagonal nonempty entries `(i, j, value)` with `i < j`.
pub fn training_pairs(a: &AdjacencyMatrix) -> Vec<(usize, usize, f64)> {
    a.iter_off_diagonal().collect()
}

/// Value of the regularized least-squares objective `J`.
pub fn objective(model: &FactorModel, a: &AdjacencyMatrix, reg: f64) -> f64 {
    let loss: f64 = a
        .iter_off_diagonal()
        .map(|(i, j, target)| {
            let e = target - model.predict(i, j);
            e * e
        })
        .sum();
    loss + reg * model.squared_norm()
}

/// Exact gradient of [`objective`], returned in the shape of a model.
pub fn gradient(model: &FactorModel, a: &AdjacencyMatrix, reg: f64) -> FactorModel {
    let k = model.latent_dim;
    let mut g = FactorModel::zeros(model.num_vertices(), k);
    for (i, j, target) in a.iter_off_diagonal() {
        let d = 2.0 * (model.predict(i, j) - target);
        g.w0 += d;
        g.w[i] += d;
        g.w[j] += d;
        for f in 0..k {
            g.v[i * k + f] += d * model.v[j * k + f];
            g.v[j * k + f] += d * model.v[i * k + f];
        }
    }
    g.w0 += 2.0 * reg * model.w0;
    for (gi, wi) in g.w.iter_mut().zip(&model.w) {
        *gi += 2.0 * reg * wi;
    }
    for (gi, vi) in g.v.iter_mut().zip(&model.v) {
        *gi += 2.0 * reg * vi;
    }
    g
}

/// Fits a [`FactorModel`] to the nonempty off-diagonal entries of `a`.
pub fn train(a: &AdjacencyMatrix, cfg: &CompletionConfig) -> Result<FactorModel> {
    train_with_history(a, cfg).map(|(m, _)| m)
}

/// Like [`train`], also returning the objective after every epoch.
pub fn train_with_history(
    a: &AdjacencyMatrix,
    cfg: &CompletionConfig,
) -> Result<(FactorModel, Vec<f64>)> {
    cfg.validate()?;
    let pairs = training_pairs(a);
    if pairs.is_empty() {
        return Err(Error::Degenerate(
            "adjacency matrix has no nonempty off-diagonal entries to train on".into(),
        ));
    }
    let m = a.dim();
    let k = cfg.latent_dim;
    let lr = cfg.learning_rate;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut model = FactorModel::zeros(m, k);
    for x in model.v.iter_mut() {
        *x = rng.gen_range(-0.01..=0.01);
    }

    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let decay = 1.0 - 2.0 * lr * cfg.reg;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &p in &order {
            let (i, j, target) = pairs[p];
            let d = 2.0 * (model.predict(i, j) - target);
            let step = lr * d;
            model.w0 -= step;
            model.w[i] -= step;
            model.w[j] -= step;
            for f in 0..k {
                let vi = model.v[i * k + f];
                let vj = model.v[j * k + f];
                model.v[i * k + f] -= step * vj;
                model.v[j * k + f] -= step * vi;
            }
        }
        model.scale(decay);
        if !model.is_finite() {
            return Err(Error::Degenerate(format!(
                "factorization diverged at epoch {epoch}; lower the learning rate"
            )));
        }
        history.push(objective(&model, a, cfg.reg));
    }
    log::debug!(
        "completion: {} pairs, final objective {:.6}",
        pairs.len(),
        history.last().copied().unwrap_or(f64::NAN)
    );
    Ok((model, history))
}

/// `ΔÂ`: model predictions at every empty off-diagonal entry of `a`.
pub fn predict_empty(model: &FactorModel, a: &AdjacencyMatrix) -> Result<AdjacencyMatrix> {
    check_model_dims(model, a)?;
    let m = a.dim();
    let mut out = AdjacencyMatrix::new(m);
    for i in 0..m {
        for j in (i + 1)..m {
            if !a.is_nonempty(i, j) {
                out.insert_unchecked(i, j, model.predict(i, j));
            }
        }
    }
    Ok(out)
}

/// Predictions restricted to the listed pairs; pairs that are nonempty in `a`
/// or on the diagonal are skipped.
///
/// Gives the same entries as [`predict_empty`] on the listed pairs, without
/// materialising the full `O(M²)` matrix.
pub fn predict_empty_on<I>(model: &FactorModel, a: &AdjacencyMatrix, pairs: I) -> Result<AdjacencyMatrix>
where
    I: IntoIterator<Item = (usize, usize)>,
{
    check_model_dims(model, a)?;
    let mut out = AdjacencyMatrix::new(a.dim());
    for (i, j) in pairs {
        if i != j && !a.is_nonempty(i, j) {
            out.insert_unchecked(i, j, model.predict(i, j));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn five_vertex() -> AdjacencyMatrix {
        AdjacencyMatrix::from_triplets(
            5,
            &[
                (0, 0, 3.0),
                (0, 1, 2.0),
                (0, 2, 1.0),
                (1, 2, 1.0),
                (1, 3, 3.0),
                (2, 4, 1.0),
                (3, 4, 2.0),
            ],
        )
        .unwrap()
    }

    fn random_model(m: usize, k: usize, seed: u64) -> FactorModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = FactorModel::zeros(m, k);
        model.w0 = rng.gen_range(-1.0..1.0);
        model.w.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        model.v.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        model
    }

    // central differences against the analytic gradient
    #[test]
    fn gradient_matches_finite_differences() {
        let a = five_vertex();
        let model = random_model(5, 3, 7);
        let reg = 0.3;
        let g = gradient(&model, &a, reg);
        let h = 1e-5;
        let check = |analytic: f64, perturb: &dyn Fn(&mut FactorModel, f64)| {
            let mut plus = model.clone();
            perturb(&mut plus, h);
            let mut minus = model.clone();
            perturb(&mut minus, -h);
            let numeric = (objective(&plus, &a, reg) - objective(&minus, &a, reg)) / (2.0 * h);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(rel < 1e-5, "analytic {analytic} numeric {numeric}");
        };
        check(g.w0, &|m, d| m.w0 += d);
        for i in 0..5 {
            check(g.w[i], &|m, d| m.w[i] += d);
        }
        for idx in 0..15 {
            check(g.v[idx], &|m, d| m.v[idx] += d);
        }
    }

    #[test]
    fn single_entry_fit() {
        let a = AdjacencyMatrix::from_triplets(2, &[(0, 1, 3.0)]).unwrap();
        let cfg = CompletionConfig {
            latent_dim: 1,
            reg: 0.0,
            epochs: 2000,
            ..Default::default()
        };
        let (model, history) = train_with_history(&a, &cfg).unwrap();
        assert!(*history.last().unwrap() <= 1e-6);
        assert!((model.predict(0, 1) - 3.0).abs() < 1e-3);
    }

    #[test]
    fn training_is_deterministic() {
        let a = five_vertex();
        let cfg = CompletionConfig {
            seed: 11,
            ..Default::default()
        };
        let m1 = train(&a, &cfg).unwrap();
        let m2 = train(&a, &cfg).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(m1.latent().len(), 5 * 8);
    }

    #[test]
    fn no_trainable_entries() {
        let a = AdjacencyMatrix::from_triplets(3, &[(0, 0, 2.0), (1, 1, 1.0)]).unwrap();
        assert!(matches!(
            train(&a, &CompletionConfig::default()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn invalid_config() {
        let a = five_vertex();
        for cfg in [
            CompletionConfig {
                latent_dim: 0,
                ..Default::default()
            },
            CompletionConfig {
                reg: -1.0,
                ..Default::default()
            },
            CompletionConfig {
                epochs: 0,
                ..Default::default()
            },
        ] {
            assert!(matches!(train(&a, &cfg), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn predict_examples() {
        let full = AdjacencyMatrix::from_triplets(
            3,
            &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)],
        )
        .unwrap();
        let model = random_model(3, 2, 1);
        assert!(predict_empty(&model, &full).unwrap().is_all_empty());

        let a = five_vertex();
        let zero = FactorModel::zeros(5, 4);
        let pred = predict_empty(&zero, &a).unwrap();
        for i in 0..5 {
            for j in (i + 1)..5 {
                if a.is_nonempty(i, j) {
                    assert_eq!(pred.get(i, j), None);
                } else {
                    assert_eq!(pred.get(i, j), Some(0.0));
                }
            }
            assert_eq!(pred.get(i, i), None);
        }

        let hand = FactorModel::from_parts(
            1.0,
            vec![0.5, -0.5, 0.0, 0.0],
            vec![vec![0.0; 2]; 4],
        )
        .unwrap();
        let sparse = AdjacencyMatrix::new(4);
        let pred = predict_empty(&hand, &sparse).unwrap();
        assert_eq!(pred.get(0, 1), Some(1.0));
        assert_eq!(pred.get(2, 3), Some(1.0));
        assert_eq!(pred.get(0, 2), Some(1.5));

        assert!(matches!(
            predict_empty(&hand, &a),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn support_is_complementary() {
        let a = five_vertex();
        let model = random_model(5, 2, 3);
        let pred = predict_empty(&model, &a).unwrap();
        for i in 0..5 {
            for j in (i + 1)..5 {
                assert_ne!(a.is_nonempty(i, j), pred.is_nonempty(i, j));
            }
        }
        let some = predict_empty_on(&model, &a, [(0, 3), (3, 0), (0, 1), (2, 2)]).unwrap();
        assert_eq!(some.nnz(), 1);
        assert_eq!(some.get(0, 3), pred.get(0, 3));
    }

    #[test]
    fn objective_non_increasing_with_small_step() {
        let a = five_vertex();
        let cfg = CompletionConfig {
            latent_dim: 2,
            learning_rate: 0.002,
            epochs: 300,
            seed: 5,
            ..Default::default()
        };
        let (_, history) = train_with_history(&a, &cfg).unwrap();
        for w in history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
        }
    }
    #[test]
    fn planted_rank_one_held_out() {
        let m = 30;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let z: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..1.5)).collect();
        let mut a = AdjacencyMatrix::new(m);
        let mut held = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                if rng.gen_bool(0.1) {
                    held.push((i, j));
                } else {
                    a.insert(i, j, z[i] * z[j]).unwrap();
                }
            }
        }
        let model = train(&a, &CompletionConfig::default()).unwrap();
        let sse: f64 = held
            .iter()
            .map(|&(i, j)| (model.predict(i, j) - z[i] * z[j]).powi(2))
            .sum();
        let rmse = (sse / held.len() as f64).sqrt();
        assert!(rmse <= 0.1, "held-out rmse {rmse}");
    }
}
