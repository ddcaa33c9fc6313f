//! Finite Bayesian models: likelihood tables, priors, posteriors and
//! marginalization onto a quantity of interest.
//!
//! Support measures are counting measure throughout. A model is validated
//! once at construction; rows and prior that are within [`NORMALIZATION_TOL`]
//! of summing to one are rescaled exactly once and the rescaling is recorded.

use serde::{Deserialize, Serialize};

use crate::numeric::{check_masses, compensated_sum};
use crate::{Error, Result};

/// Tolerance on row and prior sums.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// A validated finite sampling model `f(x | theta)` with prior `pi(theta)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteModel {
    theta_labels: Vec<String>,
    x_labels: Vec<String>,
    likelihood: Vec<Vec<f64>>,
    prior: Vec<f64>,
    renormalized: bool,
}

impl FiniteModel {
    /// Validates and builds a model. Rows are indexed by theta, columns by x.
    pub fn new(
        theta_labels: Vec<String>,
        x_labels: Vec<String>,
        mut likelihood: Vec<Vec<f64>>,
        mut prior: Vec<f64>,
    ) -> Result<Self> {
        let n_theta = theta_labels.len();
        let n_x = x_labels.len();
        if n_theta == 0 {
            return Err(Error::EmptyTable);
        }
        if likelihood.len() != n_theta {
            return Err(Error::DimensionMismatch {
                field: "likelihood",
                expected: n_theta,
                found: likelihood.len(),
            });
        }
        if prior.len() != n_theta {
            return Err(Error::DimensionMismatch {
                field: "prior",
                expected: n_theta,
                found: prior.len(),
            });
        }
        let mut renormalized = false;
        for (row_idx, row) in likelihood.iter_mut().enumerate() {
            if row.len() != n_x {
                return Err(Error::DimensionMismatch {
                    field: "likelihood row",
                    expected: n_x,
                    found: row.len(),
                });
            }
            check_masses("likelihood", row)?;
            let sum = compensated_sum(row.iter().copied());
            if (sum - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::NonStochasticRow { row: row_idx, sum });
            }
            if sum != 1.0 {
                row.iter_mut().for_each(|v| *v /= sum);
                renormalized = true;
            }
        }
        check_masses("prior", &prior)?;
        let sum = compensated_sum(prior.iter().copied());
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::PriorNotNormalized { sum });
        }
        if sum != 1.0 {
            prior.iter_mut().for_each(|v| *v /= sum);
            renormalized = true;
        }
        Ok(Self {
            theta_labels,
            x_labels,
            likelihood,
            prior,
            renormalized,
        })
    }

    /// Builds a model with generated labels `t0, t1, ...` and `x0, x1, ...`.
    pub fn from_tables(likelihood: Vec<Vec<f64>>, prior: Vec<f64>) -> Result<Self> {
        let n_x = likelihood.first().map_or(0, Vec::len);
        let theta = (0..prior.len()).map(|i| format!("t{i}")).collect();
        let x = (0..n_x).map(|i| format!("x{i}")).collect();
        Self::new(theta, x, likelihood, prior)
    }

    pub fn theta_labels(&self) -> &[String] {
        &self.theta_labels
    }

    pub fn x_labels(&self) -> &[String] {
        &self.x_labels
    }

    pub fn likelihood(&self) -> &[Vec<f64>] {
        &self.likelihood
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn n_theta(&self) -> usize {
        self.theta_labels.len()
    }

    pub fn n_x(&self) -> usize {
        self.x_labels.len()
    }

    /// Whether validation rescaled any row or the prior.
    pub fn renormalized(&self) -> bool {
        self.renormalized
    }

    pub(crate) fn check_x(&self, x: usize) -> Result<()> {
        if x >= self.n_x() {
            return Err(Error::IndexOutOfRange {
                field: "x",
                index: x,
                len: self.n_x(),
            });
        }
        Ok(())
    }

    /// Permutes theta labels, rows and prior by `perm` (new position i holds old `perm[i]`).
    pub fn permute_theta(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_theta() {
            return Err(Error::DimensionMismatch {
                field: "permutation",
                expected: self.n_theta(),
                found: perm.len(),
            });
        }
        Ok(Self {
            theta_labels: perm.iter().map(|&i| self.theta_labels[i].clone()).collect(),
            x_labels: self.x_labels.clone(),
            likelihood: perm.iter().map(|&i| self.likelihood[i].clone()).collect(),
            prior: perm.iter().map(|&i| self.prior[i]).collect(),
            renormalized: self.renormalized,
        })
    }
}

/// Surjection from theta indices onto psi indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsiMap {
    assignment: Vec<usize>,
    labels: Vec<String>,
}

impl PsiMap {
    pub fn new(labels: Vec<String>, assignment: Vec<usize>) -> Result<Self> {
        let mut hit = vec![false; labels.len()];
        for (theta, &psi) in assignment.iter().enumerate() {
            match hit.get_mut(psi) {
                Some(h) => *h = true,
                None => {
                    return Err(Error::UnknownPsi {
                        theta,
                        target: psi.to_string(),
                    })
                }
            }
        }
        if let Some(miss) = hit.iter().position(|h| !h) {
            return Err(Error::NotSurjective {
                label: labels[miss].clone(),
            });
        }
        Ok(Self { assignment, labels })
    }

    /// Psi equal to theta.
    pub fn identity(model: &FiniteModel) -> Self {
        Self {
            assignment: (0..model.n_theta()).collect(),
            labels: model.theta_labels().to_vec(),
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_psi(&self) -> usize {
        self.labels.len()
    }

    pub(crate) fn check_against(&self, model: &FiniteModel) -> Result<()> {
        if self.assignment.len() != model.n_theta() {
            return Err(Error::DimensionMismatch {
                field: "psi assignment",
                expected: model.n_theta(),
                found: self.assignment.len(),
            });
        }
        Ok(())
    }
}

/// Posterior over theta for one observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorReport {
    pub posterior: Vec<f64>,
    /// Prior predictive probability `m(x)` of the observation.
    pub evidence_norm: f64,
    pub renormalized: bool,
}

/// `pi(theta | x) = pi(theta) f(x | theta) / m(x)`.
pub fn posterior(model: &FiniteModel, x: usize) -> Result<PosteriorReport> {
    model.check_x(x)?;
    let joint: Vec<f64> = model
        .prior
        .iter()
        .zip(&model.likelihood)
        .map(|(p, row)| p * row[x])
        .collect();
    let m = compensated_sum(joint.iter().copied());
    if m <= 0.0 {
        return Err(Error::ImpossibleObservation { x });
    }
    Ok(PosteriorReport {
        posterior: joint.into_iter().map(|j| j / m).collect(),
        evidence_norm: m,
        renormalized: model.renormalized,
    })
}

/// `m(x) = sum_theta pi(theta) f(x | theta)` for every x.
pub fn prior_predictive(model: &FiniteModel) -> Vec<f64> {
    (0..model.n_x())
        .map(|x| compensated_sum(model.prior.iter().zip(&model.likelihood).map(|(p, row)| p * row[x])))
        .collect()
}

/// Marginal prior of psi and the conditional prior predictive `m(x | psi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub prior: Vec<f64>,
    /// Rows indexed by psi, columns by x.
    pub conditional: Vec<Vec<f64>>,
}

impl Marginal {
    /// `m(x) = sum_psi pi(psi) m(x | psi)`.
    pub fn predictive(&self) -> Vec<f64> {
        let n_x = self.conditional.first().map_or(0, Vec::len);
        (0..n_x)
            .map(|x| compensated_sum(self.prior.iter().zip(&self.conditional).map(|(p, row)| p * row[x])))
            .collect()
    }
}

pub fn marginalize(model: &FiniteModel, psi: &PsiMap) -> Result<Marginal> {
    psi.check_against(model)?;
    let n_psi = psi.n_psi();
    let mut fibers: Vec<Vec<usize>> = vec![Vec::new(); n_psi];
    for (theta, &p) in psi.assignment.iter().enumerate() {
        fibers[p].push(theta);
    }
    let mut prior = Vec::with_capacity(n_psi);
    let mut conditional = Vec::with_capacity(n_psi);
    for (p, fiber) in fibers.iter().enumerate() {
        let mass = compensated_sum(fiber.iter().map(|&t| model.prior[t]));
        if mass <= 0.0 {
            return Err(Error::EmptyFiber { psi: p });
        }
        let row: Vec<f64> = (0..model.n_x())
            .map(|x| compensated_sum(fiber.iter().map(|&t| model.likelihood[t][x] * model.prior[t])) / mass)
            .collect();
        prior.push(mass);
        conditional.push(row);
    }
    Ok(Marginal { prior, conditional })
}

/// Marginal prior of psi, allowing empty fibers (mass 0).
pub fn psi_prior(model: &FiniteModel, psi: &PsiMap) -> Result<Vec<f64>> {
    psi.check_against(model)?;
    let mut out = vec![Vec::new(); psi.n_psi()];
    for (theta, &p) in psi.assignment.iter().enumerate() {
        out[p].push(model.prior[theta]);
    }
    Ok(out.into_iter().map(compensated_sum).collect())
}

/// Marginal posterior of psi at observation `x`.
pub fn psi_posterior(model: &FiniteModel, psi: &PsiMap, x: usize) -> Result<Vec<f64>> {
    psi.check_against(model)?;
    let post = posterior(model, x)?;
    let mut out = vec![Vec::new(); psi.n_psi()];
    for (theta, &p) in psi.assignment.iter().enumerate() {
        out[p].push(post.posterior[theta]);
    }
    Ok(out.into_iter().map(compensated_sum).collect())
}

/// JSON document accepted by the CLI and the FFI layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub theta: Vec<String>,
    pub x: Vec<String>,
    pub likelihood: Vec<Vec<f64>>,
    pub prior: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<PsiDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiDoc {
    pub labels: Vec<String>,
    /// One entry per theta: a psi index or a psi label.
    pub assignment: Vec<PsiRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PsiRef {
    Index(usize),
    Label(String),
}

impl ModelDoc {
    /// Validates the document into a model and psi map (identity when absent).
    pub fn build(self) -> Result<(FiniteModel, PsiMap)> {
        let model = FiniteModel::new(self.theta, self.x, self.likelihood, self.prior)?;
        let psi = match self.psi {
            None => PsiMap::identity(&model),
            Some(doc) => {
                let assignment = doc
                    .assignment
                    .iter()
                    .enumerate()
                    .map(|(theta, r)| match r {
                        PsiRef::Index(i) => Ok(*i),
                        PsiRef::Label(s) => doc.labels.iter().position(|l| l == s).ok_or_else(|| Error::UnknownPsi {
                            theta,
                            target: s.clone(),
                        }),
                    })
                    .collect::<Result<Vec<_>>>()?;
                let map = PsiMap::new(doc.labels, assignment)?;
                map.check_against(&model)?;
                map
            }
        };
        Ok((model, psi))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> FiniteModel {
        FiniteModel::from_tables(vec![vec![0.2, 0.8], vec![0.8, 0.2]], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn validate_accepts_and_rejects() {
        let m = two_by_two();
        assert!(!m.renormalized());
        let bad_row = FiniteModel::from_tables(vec![vec![0.2, 0.7], vec![0.8, 0.2]], vec![0.5, 0.5]);
        assert!(matches!(bad_row, Err(Error::NonStochasticRow { row: 0, .. })));
        let bad_prior = FiniteModel::from_tables(vec![vec![0.2, 0.8], vec![0.8, 0.2]], vec![0.6, 0.6]);
        assert!(matches!(bad_prior, Err(Error::PriorNotNormalized { .. })));
        let neg = FiniteModel::from_tables(vec![vec![-0.2, 1.2], vec![0.8, 0.2]], vec![0.5, 0.5]);
        assert!(matches!(neg, Err(Error::NegativeMass { .. })));
    }

    #[test]
    fn near_normalized_input_is_rescaled_once() {
        let m = FiniteModel::from_tables(vec![vec![0.2, 0.8 + 5e-10]], vec![1.0]).unwrap();
        assert!(m.renormalized());
        assert!((m.likelihood()[0].iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn posterior_hand_example() {
        // the first observation column: f(.|theta1) = 0.2, f(.|theta2) = 0.8
        let post = posterior(&two_by_two(), 0).unwrap();
        assert!((post.posterior[0] - 0.2).abs() < 1e-15);
        assert!((post.posterior[1] - 0.8).abs() < 1e-15);
        assert!((post.evidence_norm - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_likelihood_column_leaves_prior_unchanged() {
        let m = FiniteModel::from_tables(
            vec![vec![0.3, 0.7], vec![0.3, 0.7], vec![0.3, 0.7]],
            vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        )
        .unwrap();
        let post = posterior(&m, 0).unwrap();
        for (a, b) in post.posterior.iter().zip(m.prior()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn point_mass_prior() {
        let m = FiniteModel::from_tables(vec![vec![0.2, 0.8], vec![0.8, 0.2]], vec![1.0, 0.0]).unwrap();
        assert_eq!(posterior(&m, 1).unwrap().posterior, vec![1.0, 0.0]);
        assert_eq!(prior_predictive(&m), vec![0.2, 0.8]);
    }

    #[test]
    fn impossible_observation() {
        let m = FiniteModel::from_tables(vec![vec![1.0, 0.0], vec![1.0, 0.0]], vec![0.5, 0.5]).unwrap();
        assert_eq!(posterior(&m, 1), Err(Error::ImpossibleObservation { x: 1 }));
    }

    #[test]
    fn prior_predictive_examples() {
        let m = prior_predictive(&two_by_two());
        assert!((m[0] - 0.5).abs() < 1e-15 && (m[1] - 0.5).abs() < 1e-15);
        let same = FiniteModel::from_tables(vec![vec![0.1, 0.9], vec![0.1, 0.9]], vec![0.3, 0.7]).unwrap();
        let m = prior_predictive(&same);
        assert!((m[0] - 0.1).abs() < 1e-15 && (m[1] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn marginalize_examples() {
        let m = two_by_two();
        let id = marginalize(&m, &PsiMap::identity(&m)).unwrap();
        assert_eq!(id.prior, m.prior());
        assert_eq!(id.conditional, m.likelihood());

        let m3 = FiniteModel::from_tables(
            vec![vec![0.1, 0.9], vec![0.5, 0.5], vec![0.7, 0.3]],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap();
        let psi = PsiMap::new(vec!["a".into(), "b".into()], vec![0, 0, 1]).unwrap();
        let marg = marginalize(&m3, &psi).unwrap();
        assert!((marg.prior[0] - 0.5).abs() < 1e-15 && (marg.prior[1] - 0.5).abs() < 1e-15);
        let direct = prior_predictive(&m3);
        for (a, b) in marg.predictive().iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_fiber_and_bad_maps() {
        let m = FiniteModel::from_tables(vec![vec![0.5, 0.5], vec![0.5, 0.5]], vec![1.0, 0.0]).unwrap();
        assert_eq!(
            marginalize(&m, &PsiMap::identity(&m)),
            Err(Error::EmptyFiber { psi: 1 })
        );
        assert!(matches!(
            PsiMap::new(vec!["a".into(), "b".into()], vec![0, 0]),
            Err(Error::NotSurjective { .. })
        ));
        assert!(matches!(
            PsiMap::new(vec!["a".into()], vec![0, 3]),
            Err(Error::UnknownPsi { .. })
        ));
    }

    #[test]
    fn model_doc_with_label_assignment() {
        let text = r#"{"theta":["a","b","c"],"x":["0","1"],
            "likelihood":[[0.1,0.9],[0.5,0.5],[0.7,0.3]],
            "prior":[0.2,0.3,0.5],
            "psi":{"labels":["low","high"],"assignment":["low",0,"high"]}}"#;
        let (model, psi) = ModelDoc::from_json(text).unwrap().build().unwrap();
        assert_eq!(model.n_theta(), 3);
        assert_eq!(psi.assignment(), &[0, 0, 1]);
    }
}
