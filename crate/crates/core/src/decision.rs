//! Prior-based loss functions and exact Bayes rules on finite problems.
//!
//! All losses here are two-valued: `L(psi, a) = 0` when `a == psi` and
//! `1 / d(psi)` otherwise, where the denominator `d` is the prior mass (RB),
//! one (MAP), or `max(eta, prior)` (the bounded variants). The posterior risk
//! of action `a` is then `sum_psi post(psi) / d(psi) - post(a) / d(a)`, and
//! a Bayes action maximizes the "gain" `post(a) / d(a)`. For the RB loss the
//! gain is exactly the relative belief ratio.

use serde::{Deserialize, Serialize};

use crate::evidence::{check_gamma, Levels, RegionReport};
use crate::model::{marginalize, posterior, psi_posterior, psi_prior, FiniteModel, PsiMap};
use crate::numeric::{argmax_with_tie, check_masses, compensated_sum};
use crate::{Error, Result};

/// Largest rule space enumerated by the brute-force routines.
pub const RULE_ENUMERATION_CAP: u64 = 1_000_000;

/// Dominance comparisons in the admissibility search allow this much rounding.
const DOMINANCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// `I(a != psi) / pi(psi)`.
    Rb,
    /// `I(a != psi)`, the 0-1 loss.
    Map,
    /// `I(a != psi) / max(eta, pi(psi))`.
    RbEta,
    /// The bounded loss applied to cell masses of a discretization.
    RbLambdaEta,
}

impl std::str::FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rb" => Ok(LossKind::Rb),
            "map" => Ok(LossKind::Map),
            "rb-eta" => Ok(LossKind::RbEta),
            "rb-lambda-eta" => Ok(LossKind::RbLambdaEta),
            _ => Err(Error::Parse(format!("unknown loss {s:?}"))),
        }
    }
}

/// Materialized loss `L(true, action)` over a finite set of psi values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossMatrix {
    pub kind: LossKind,
    pub eta: Option<f64>,
    pub prior: Vec<f64>,
    /// Off-diagonal loss is `1 / denominators[true]`.
    pub denominators: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

pub fn make_loss(kind: LossKind, prior: &[f64], eta: Option<f64>) -> Result<LossMatrix> {
    check_masses("prior", prior)?;
    if prior.is_empty() {
        return Err(Error::EmptyTable);
    }
    let denominators: Vec<f64> = match kind {
        LossKind::Rb => {
            if let Some(psi) = prior.iter().position(|&p| p <= 0.0) {
                return Err(Error::ZeroPriorMass { psi });
            }
            prior.to_vec()
        }
        LossKind::Map => vec![1.0; prior.len()],
        LossKind::RbEta | LossKind::RbLambdaEta => {
            let eta = eta.unwrap_or(f64::NAN);
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::BadEta { eta });
            }
            prior.iter().map(|&p| eta.max(p)).collect()
        }
    };
    let values = (0..prior.len())
        .map(|t| {
            (0..prior.len())
                .map(|a| if a == t { 0.0 } else { 1.0 / denominators[t] })
                .collect()
        })
        .collect();
    Ok(LossMatrix {
        kind,
        eta: match kind {
            LossKind::RbEta | LossKind::RbLambdaEta => eta,
            _ => None,
        },
        prior: prior.to_vec(),
        denominators,
        values,
    })
}

impl LossMatrix {
    pub fn len(&self) -> usize {
        self.denominators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.denominators.is_empty()
    }

    /// Largest off-diagonal entry.
    pub fn bound(&self) -> f64 {
        self.denominators.iter().map(|d| 1.0 / d).fold(0.0, f64::max)
    }

    fn check_len(&self, field: &'static str, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::DimensionMismatch {
                field,
                expected: self.len(),
                found: n,
            });
        }
        Ok(())
    }

    /// `post(a) / d(a)` for every action.
    pub fn gains(&self, posterior: &[f64]) -> Vec<f64> {
        posterior.iter().zip(&self.denominators).map(|(p, d)| p / d).collect()
    }
}

/// The two terms of the RB posterior risk: `sum_psi rb(psi) - rb(action)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbDecomposition {
    pub rb_total: f64,
    pub rb_at_action: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorRisk {
    pub risk: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<RbDecomposition>,
}

/// `r(a | x) = sum_psi L(psi, a) post(psi)`, via the gain decomposition.
pub fn posterior_risk(loss: &LossMatrix, posterior: &[f64], action: usize) -> Result<PosteriorRisk> {
    loss.check_len("posterior", posterior.len())?;
    if action >= loss.len() {
        return Err(Error::IndexOutOfRange {
            field: "action",
            index: action,
            len: loss.len(),
        });
    }
    let gains = loss.gains(posterior);
    let total = compensated_sum(gains.iter().copied());
    let at = gains[action];
    Ok(PosteriorRisk {
        risk: total - at,
        decomposition: (loss.kind == LossKind::Rb).then_some(RbDecomposition {
            rb_total: total,
            rb_at_action: at,
        }),
    })
}

/// Same quantity summed straight from the materialized matrix.
pub fn direct_posterior_risk(loss: &LossMatrix, posterior: &[f64], action: usize) -> f64 {
    compensated_sum(posterior.iter().enumerate().map(|(t, p)| loss.values[t][action] * p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionChoice {
    pub action: usize,
    pub tie: bool,
    pub risk: f64,
}

/// Posterior-risk minimizing action; ties go to the smallest index and are flagged.
pub fn bayes_action(loss: &LossMatrix, posterior: &[f64]) -> Result<ActionChoice> {
    loss.check_len("posterior", posterior.len())?;
    let gains = loss.gains(posterior);
    let (action, tie) = argmax_with_tie(&gains).ok_or(Error::EmptyTable)?;
    let total = compensated_sum(gains.iter().copied());
    Ok(ActionChoice {
        action,
        tie,
        risk: total - gains[action],
    })
}

/// A decision function from observations to psi values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRule {
    pub actions: Vec<usize>,
    pub ties: Vec<bool>,
}

impl DecisionRule {
    pub fn from_actions(actions: Vec<usize>) -> Self {
        let ties = vec![false; actions.len()];
        Self { actions, ties }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub prior_risk: f64,
    pub posterior_risk: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<Vec<RbDecomposition>>,
}

fn check_loss_dims(loss: &LossMatrix, psi: &PsiMap) -> Result<()> {
    loss.check_len("psi values", psi.n_psi())
}

/// Bayes rule by per-observation minimization of the posterior risk.
pub fn bayes_rule(model: &FiniteModel, psi: &PsiMap, loss: &LossMatrix) -> Result<(DecisionRule, RiskReport)> {
    check_loss_dims(loss, psi)?;
    let mut actions = Vec::with_capacity(model.n_x());
    let mut ties = Vec::with_capacity(model.n_x());
    let mut risks = Vec::with_capacity(model.n_x());
    let mut weighted = Vec::with_capacity(model.n_x());
    let mut decomposition = Vec::new();
    for x in 0..model.n_x() {
        let m = posterior(model, x)?.evidence_norm;
        let post = psi_posterior(model, psi, x)?;
        let choice = bayes_action(loss, &post)?;
        if loss.kind == LossKind::Rb {
            decomposition.push(posterior_risk(loss, &post, choice.action)?.decomposition.unwrap());
        }
        actions.push(choice.action);
        ties.push(choice.tie);
        risks.push(choice.risk);
        weighted.push(m * choice.risk);
    }
    Ok((
        DecisionRule { actions, ties },
        RiskReport {
            prior_risk: compensated_sum(weighted),
            posterior_risk: risks,
            decomposition: (loss.kind == LossKind::Rb).then_some(decomposition),
        },
    ))
}

fn check_rule(model: &FiniteModel, psi: &PsiMap, rule: &DecisionRule) -> Result<()> {
    if rule.actions.len() != model.n_x() {
        return Err(Error::DimensionMismatch {
            field: "rule",
            expected: model.n_x(),
            found: rule.actions.len(),
        });
    }
    if let Some(&bad) = rule.actions.iter().find(|&&a| a >= psi.n_psi()) {
        return Err(Error::IndexOutOfRange {
            field: "action",
            index: bad,
            len: psi.n_psi(),
        });
    }
    Ok(())
}

/// `M(delta(x) != psi | psi)` for every psi.
pub fn conditional_errors(model: &FiniteModel, psi: &PsiMap, rule: &DecisionRule) -> Result<Vec<f64>> {
    check_rule(model, psi, rule)?;
    let marg = marginalize(model, psi)?;
    Ok(marg
        .conditional
        .iter()
        .enumerate()
        .map(|(p, row)| compensated_sum(row.iter().zip(&rule.actions).filter(|(_, &a)| a != p).map(|(m, _)| *m)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorRiskReport {
    /// Loss-weighted expectation over the joint law of (theta, x).
    pub direct: f64,
    /// Sum of conditional error probabilities weighted by `pi(psi) / d(psi)`.
    pub closed_form: f64,
    pub conditional_errors: Vec<f64>,
}

/// Prior risk of a rule, computed two ways.
pub fn prior_risk(
    model: &FiniteModel,
    psi: &PsiMap,
    loss: &LossMatrix,
    rule: &DecisionRule,
) -> Result<PriorRiskReport> {
    check_loss_dims(loss, psi)?;
    check_rule(model, psi, rule)?;
    let mut terms = Vec::with_capacity(model.n_theta() * model.n_x());
    for (theta, (&p, row)) in model.prior().iter().zip(model.likelihood()).enumerate() {
        let truth = psi.assignment()[theta];
        for (x, f) in row.iter().enumerate() {
            terms.push(p * f * loss.values[truth][rule.actions[x]]);
        }
    }
    let errors = conditional_errors(model, psi, rule)?;
    let closed_form = match loss.kind {
        LossKind::Rb => compensated_sum(errors.iter().copied()),
        _ => compensated_sum(
            errors
                .iter()
                .zip(&loss.prior)
                .zip(&loss.denominators)
                .map(|((e, p), d)| e * p / d),
        ),
    };
    Ok(PriorRiskReport {
        direct: compensated_sum(terms),
        closed_form,
        conditional_errors: errors,
    })
}

fn rule_space_size(model: &FiniteModel, psi: &PsiMap) -> Result<u64> {
    let size = (psi.n_psi() as f64).powi(model.n_x() as i32);
    if size > RULE_ENUMERATION_CAP as f64 {
        return Err(Error::RuleSpaceTooLarge {
            size,
            cap: RULE_ENUMERATION_CAP,
        });
    }
    Ok(size as u64)
}

/// Visits every deterministic rule in mixed-radix order.
fn for_each_rule(n_x: usize, n_psi: usize, count: u64, mut f: impl FnMut(&[usize])) {
    let mut digits = vec![0usize; n_x];
    for _ in 0..count {
        f(&digits);
        for d in digits.iter_mut() {
            *d += 1;
            if *d < n_psi {
                break;
            }
            *d = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveResult {
    pub best_rule: Vec<usize>,
    pub best_risk: f64,
    pub rules_checked: u64,
}

/// Global minimizer of the prior risk over all `|Psi|^|X|` rules.
pub fn exhaustive_minimum(model: &FiniteModel, psi: &PsiMap, loss: &LossMatrix) -> Result<ExhaustiveResult> {
    check_loss_dims(loss, psi)?;
    let count = rule_space_size(model, psi)?;
    // contribution[x][a] = sum_theta pi(theta) f(x|theta) L(Psi(theta), a)
    let contribution: Vec<Vec<f64>> = (0..model.n_x())
        .map(|x| {
            (0..psi.n_psi())
                .map(|a| {
                    compensated_sum(
                        model
                            .prior()
                            .iter()
                            .zip(model.likelihood())
                            .enumerate()
                            .map(|(theta, (p, row))| p * row[x] * loss.values[psi.assignment()[theta]][a]),
                    )
                })
                .collect()
        })
        .collect();
    let mut best_rule = vec![0; model.n_x()];
    let mut best_risk = f64::INFINITY;
    for_each_rule(model.n_x(), psi.n_psi(), count, |rule| {
        let risk = compensated_sum(rule.iter().enumerate().map(|(x, &a)| contribution[x][a]));
        if risk < best_risk {
            best_risk = risk;
            best_rule.copy_from_slice(rule);
        }
    });
    Ok(ExhaustiveResult {
        best_rule,
        best_risk,
        rules_checked: count,
    })
}

/// A rule whose conditional error probabilities are no worse for every psi and
/// strictly better for some psi, if one exists.
pub fn find_dominating_rule(model: &FiniteModel, psi: &PsiMap, rule: &DecisionRule) -> Result<Option<Vec<usize>>> {
    check_rule(model, psi, rule)?;
    let count = rule_space_size(model, psi)?;
    let marg = marginalize(model, psi)?;
    let errors_of = |actions: &[usize]| -> Vec<f64> {
        marg.conditional
            .iter()
            .enumerate()
            .map(|(p, row)| {
                row.iter()
                    .zip(actions)
                    .filter(|(_, &a)| a != p)
                    .map(|(m, _)| *m)
                    .sum::<f64>()
            })
            .collect()
    };
    let base = errors_of(&rule.actions);
    let mut found = None;
    for_each_rule(model.n_x(), psi.n_psi(), count, |cand| {
        if found.is_some() {
            return;
        }
        let e = errors_of(cand);
        let no_worse = e.iter().zip(&base).all(|(c, b)| *c <= b + DOMINANCE_TOL);
        let better = e.iter().zip(&base).any(|(c, b)| *c < b - DOMINANCE_TOL);
        if no_worse && better {
            found = Some(cand.to_vec());
        }
    });
    Ok(found)
}

/// Gamma-lowest posterior loss region `{psi : r(psi | x) <= d_gamma}`.
///
/// Ranking by gain is the same as ranking by posterior risk; the reported
/// cutoff is the risk level `d_gamma`.
pub fn lpl_region(loss: &LossMatrix, posterior: &[f64], gamma: f64) -> Result<RegionReport> {
    check_gamma(gamma)?;
    loss.check_len("posterior", posterior.len())?;
    let gains = loss.gains(posterior);
    let total = compensated_sum(gains.iter().copied());
    let levels = Levels::new(&gains, posterior, &loss.prior);
    let count = levels.count_reaching(gamma);
    Ok(levels.region(count, total - levels.keys[count - 1]))
}

/// `sum_x m(x) h(delta(x)) [post(delta(x) | x) - pi(delta(x))]`; the rule is
/// Bayesian unbiased for the loss `I(a != psi) h(psi)` iff this is `>= 0`.
pub fn unbiasedness_gap(model: &FiniteModel, psi: &PsiMap, h: &[f64], rule: &DecisionRule) -> Result<f64> {
    check_rule(model, psi, rule)?;
    if h.len() != psi.n_psi() {
        return Err(Error::DimensionMismatch {
            field: "h",
            expected: psi.n_psi(),
            found: h.len(),
        });
    }
    check_masses("h", h)?;
    let prior = psi_prior(model, psi)?;
    let mut terms = Vec::with_capacity(model.n_x());
    for x in 0..model.n_x() {
        let m = match posterior(model, x) {
            Ok(p) => p.evidence_norm,
            Err(Error::ImpossibleObservation { .. }) => continue,
            Err(e) => return Err(e),
        };
        let post = psi_posterior(model, psi, x)?;
        let a = rule.actions[x];
        terms.push(m * h[a] * (post[a] - prior[a]));
    }
    Ok(compensated_sum(terms))
}

/// `eta_k = max(prior) * 2^-k` for `k = 0..steps`.
pub fn eta_ladder(prior: &[f64], steps: usize) -> Vec<f64> {
    let eta0 = prior.iter().copied().fold(0.0, f64::max);
    (0..steps).map(|k| eta0 * 0.5f64.powi(k as i32)).collect()
}

/// Everything the `decide` command reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecideReport {
    pub loss: LossKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub psi_labels: Vec<String>,
    pub rule: DecisionRule,
    pub rule_labels: Vec<String>,
    pub risk: RiskReport,
    pub prior_risk_direct: f64,
    pub prior_risk_closed_form: f64,
    pub conditional_errors: Vec<f64>,
}

pub fn decide(model: &FiniteModel, psi: &PsiMap, kind: LossKind, eta: Option<f64>) -> Result<DecideReport> {
    let prior = marginalize(model, psi)?.prior;
    let loss = make_loss(kind, &prior, eta)?;
    let (rule, risk) = bayes_rule(model, psi, &loss)?;
    let pr = prior_risk(model, psi, &loss, &rule)?;
    Ok(DecideReport {
        loss: kind,
        eta: loss.eta,
        psi_labels: psi.labels().to_vec(),
        rule_labels: rule.actions.iter().map(|&a| psi.labels()[a].clone()).collect(),
        rule,
        risk,
        prior_risk_direct: pr.direct,
        prior_risk_closed_form: pr.closed_form,
        conditional_errors: pr.conditional_errors,
    })
}
