//! Random finite models shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relbelief::model::{FiniteModel, PsiMap};

pub const MIN_PRIOR: f64 = 0.01;

/// Random model with `|Theta| <= 6`, `|X| <= 6`, `|Psi| <= 4`, every prior
/// mass at least [`MIN_PRIOR`] and strictly positive likelihoods.
pub fn random_model(rng: &mut ChaCha8Rng) -> (FiniteModel, PsiMap) {
    let n_theta = rng.random_range(2..=6);
    let n_x = rng.random_range(2..=6);
    let n_psi = rng.random_range(2..=n_theta.min(4));
    let raw: Vec<f64> = (0..n_theta).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    let free = 1.0 - MIN_PRIOR * n_theta as f64;
    let prior: Vec<f64> = raw.iter().map(|r| MIN_PRIOR + free * r / total).collect();
    let likelihood: Vec<Vec<f64>> = (0..n_theta)
        .map(|_| {
            let row: Vec<f64> = (0..n_x).map(|_| rng.random::<f64>() + 1e-3).collect();
            let s: f64 = row.iter().sum();
            row.iter().map(|v| v / s).collect()
        })
        .collect();
    let model = FiniteModel::from_tables(likelihood, prior).expect("valid random model");
    let assignment: Vec<usize> = (0..n_theta)
        .map(|t| if t < n_psi { t } else { rng.random_range(0..n_psi) })
        .collect();
    let labels = (0..n_psi).map(|i| format!("psi{i}")).collect();
    let psi = PsiMap::new(labels, assignment).expect("surjective assignment");
    (model, psi)
}

pub fn models(count: usize, seed: u64) -> Vec<(FiniteModel, PsiMap)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_model(&mut rng)).collect()
}
