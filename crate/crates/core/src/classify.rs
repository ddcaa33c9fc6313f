//! Two-class diagnostic classification.
//!
//! Class `c = 1` is the diseased population. With a known prevalence `eps`
//! the observation is a single Bernoulli test result; with an unknown
//! prevalence `eps ~ beta(alpha, beta)` the classifiers use the posterior
//! predictive of the next class label given `n` labelled training items.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Beta, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance for `n * c_bar` being an integer.
const COUNT_TOL: f64 = 1e-9;

fn check_open_unit(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must lie strictly inside (0, 1)",
        })
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

/// Bernoulli test with success probability `psi0` in the healthy class and
/// `psi1` in the diseased class, whose prevalence is `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoClassSpec {
    pub psi0: f64,
    pub psi1: f64,
    pub epsilon: f64,
}

impl TwoClassSpec {
    pub fn new(psi0: f64, psi1: f64, epsilon: f64) -> Result<Self> {
        let s = Self { psi0, psi1, epsilon };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_open_unit("psi0", self.psi0)?;
        check_open_unit("psi1", self.psi1)?;
        check_open_unit("epsilon", self.epsilon)
    }

    /// `f(x | psi_class)` for `x` in {0, 1}.
    fn likelihood(&self, class: usize, x: usize) -> f64 {
        let p = if class == 0 { self.psi0 } else { self.psi1 };
        if x == 1 {
            p
        } else {
            1.0 - p
        }
    }
}

fn check_binary(x: usize) -> Result<()> {
    if x > 1 {
        return Err(Error::IndexOutOfRange {
            field: "x",
            index: x,
            len: 2,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnownEpsLabels {
    /// 0 for the healthy class, 1 for the diseased class.
    pub map_label: usize,
    pub rb_label: usize,
    pub posterior: [f64; 2],
    pub rb: [f64; 2],
}

/// MAP and RB classification of a single test result.
pub fn classify_known_eps(spec: &TwoClassSpec, x: usize) -> Result<KnownEpsLabels> {
    spec.validate()?;
    check_binary(x)?;
    let (e, f0, f1) = (spec.epsilon, spec.likelihood(0, x), spec.likelihood(1, x));
    let m = (1.0 - e) * f0 + e * f1;
    // MAP picks class 0 iff f0 / f1 > eps / (1 - eps).
    let map_label = if (1.0 - e) * f0 >= e * f1 { 0 } else { 1 };
    let rb_label = if f0 >= f1 { 0 } else { 1 };
    Ok(KnownEpsLabels {
        map_label,
        rb_label,
        posterior: [(1.0 - e) * f0 / m, e * f1 / m],
        rb: [f0 / m, f1 / m],
    })
}

/// `[label(x = 0), label(x = 1)]` for the MAP classifier.
pub fn map_rule(spec: &TwoClassSpec) -> Result<[usize; 2]> {
    Ok([
        classify_known_eps(spec, 0)?.map_label,
        classify_known_eps(spec, 1)?.map_label,
    ])
}

/// `[label(x = 0), label(x = 1)]` for the RB classifier.
pub fn rb_rule(spec: &TwoClassSpec) -> Result<[usize; 2]> {
    Ok([
        classify_known_eps(spec, 0)?.rb_label,
        classify_known_eps(spec, 1)?.rb_label,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSum {
    pub err0: f64,
    pub err1: f64,
    pub sum: f64,
}

/// Exact conditional misclassification probabilities of a rule `x -> label`.
pub fn error_sum(spec: &TwoClassSpec, rule: [usize; 2]) -> Result<ErrorSum> {
    spec.validate()?;
    for &label in &rule {
        check_binary(label)?;
    }
    let err = |class: usize| -> f64 {
        (0..2)
            .filter(|&x| rule[x] != class)
            .map(|x| spec.likelihood(class, x))
            .sum()
    };
    let (err0, err1) = (err(0), err(1));
    Ok(ErrorSum {
        err0,
        err1,
        sum: err0 + err1,
    })
}

/// Inputs of the predictive classifier for the next item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSpec {
    pub alpha: f64,
    pub beta: f64,
    pub n: u64,
    /// Fraction of diseased items among the `n` training items.
    pub c_bar: f64,
    pub f0_at_x: f64,
    pub f1_at_x: f64,
}

impl PredictiveSpec {
    pub fn validate(&self) -> Result<u64> {
        check_positive("alpha", self.alpha)?;
        check_positive("beta", self.beta)?;
        if !(0.0..=1.0).contains(&self.c_bar) {
            return Err(Error::InvalidParameter {
                name: "c_bar",
                value: self.c_bar,
                reason: "must lie in [0, 1]",
            });
        }
        let count = self.n as f64 * self.c_bar;
        if (count - count.round()).abs() > COUNT_TOL {
            return Err(Error::InvalidParameter {
                name: "c_bar",
                value: self.c_bar,
                reason: "n * c_bar must be an integer",
            });
        }
        for (name, v) in [("f0_at_x", self.f0_at_x), ("f1_at_x", self.f1_at_x)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "density value must be finite and non-negative",
                });
            }
        }
        if self.f0_at_x == 0.0 && self.f1_at_x == 0.0 {
            return Err(Error::BothDensitiesZero);
        }
        Ok(count.round() as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveLabels {
    pub c_map: u8,
    pub c_rb: u8,
    pub map_ratio: f64,
    pub rb_ratio: f64,
}

/// Labels from the log likelihood ratio `ln f1(x) - ln f0(x)`.
///
/// The MAP ratio is `(f1/f0) (alpha + k) / (beta + n - k)`; the RB ratio
/// divides out the prior predictive odds `alpha / beta`. Ratios equal to one
/// label 0.
fn predictive_labels(alpha: f64, beta: f64, n: u64, k: u64, log_lr: f64) -> PredictiveLabels {
    let log_map = log_lr + (alpha + k as f64).ln() - (beta + (n - k) as f64).ln();
    let log_rb = log_map + (beta.ln() - alpha.ln());
    PredictiveLabels {
        c_map: u8::from(log_map > 0.0),
        c_rb: u8::from(log_rb > 0.0),
        map_ratio: log_map.exp(),
        rb_ratio: log_rb.exp(),
    }
}

pub fn predictive_classify(spec: &PredictiveSpec) -> Result<PredictiveLabels> {
    let k = spec.validate()?;
    let log_lr = spec.f1_at_x.ln() - spec.f0_at_x.ln();
    Ok(predictive_labels(spec.alpha, spec.beta, spec.n, k, log_lr))
}

/// Monte Carlo estimates of the conditional misclassification probabilities
/// for one value of `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskTableRow {
    pub beta: f64,
    pub map_err0: f64,
    pub map_err1: f64,
    pub map_sum: f64,
    pub rb_err0: f64,
    pub rb_err1: f64,
    pub rb_sum: f64,
    pub reps: u64,
    pub seed: u64,
}

fn sum_stderr(p0: f64, p1: f64, reps: u64) -> f64 {
    let r = reps as f64;
    (p0 * (1.0 - p0) / r + p1 * (1.0 - p1) / r).sqrt()
}

impl RiskTableRow {
    /// Standard error of `map_sum` (the two classes are estimated independently).
    pub fn map_stderr(&self) -> f64 {
        sum_stderr(self.map_err0, self.map_err1, self.reps)
    }

    pub fn rb_stderr(&self) -> f64 {
        sum_stderr(self.rb_err0, self.rb_err1, self.reps)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for replication `rep` of row `row`: the key depends on
/// (seed, row) and the replication selects the stream.
fn replication_rng(seed: u64, row: usize, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(row as u64)));
    rng.set_stream(rep);
    rng
}

/// Simulates the prior risk of both predictive classifiers for each `beta`,
/// with `f0 = N(0, 1)` and `f1 = N(mu, 1)`.
pub fn risk_table(alpha: f64, betas: &[f64], mu: f64, n: u64, reps: u64, seed: u64) -> Result<Vec<RiskTableRow>> {
    check_positive("alpha", alpha)?;
    if !mu.is_finite() {
        return Err(Error::InvalidParameter {
            name: "mu",
            value: mu,
            reason: "must be finite",
        });
    }
    if reps == 0 {
        return Err(Error::InvalidParameter {
            name: "reps",
            value: 0.0,
            reason: "need at least one replication",
        });
    }
    let unit = Normal::new(0.0, 1.0).expect("standard normal");
    betas
        .iter()
        .enumerate()
        .map(|(row, &beta)| {
            check_positive("beta", beta)?;
            let prevalence = Beta::new(alpha, beta).map_err(|_| Error::InvalidParameter {
                name: "beta",
                value: beta,
                reason: "invalid beta distribution parameters",
            })?;
            // [map_err0, map_err1, rb_err0, rb_err1] as integer counts
            let counts = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = replication_rng(seed, row, rep);
                    let eps: f64 = prevalence.sample(&mut rng);
                    let coin = Bernoulli::new(eps.clamp(0.0, 1.0)).expect("probability in [0, 1]");
                    let mut k = 0u64;
                    for _ in 0..n {
                        let c = coin.sample(&mut rng);
                        // Training features are part of the generative model
                        // even though the classifiers only use the labels.
                        let _x: f64 = mu * f64::from(u8::from(c)) + unit.sample(&mut rng);
                        k += u64::from(c);
                    }
                    let x0: f64 = unit.sample(&mut rng);
                    let x1: f64 = mu + unit.sample(&mut rng);
                    // ln f1(x) - ln f0(x) for unit-variance normals
                    let llr = |x: f64| mu * x - 0.5 * mu * mu;
                    let at0 = predictive_labels(alpha, beta, n, k, llr(x0));
                    let at1 = predictive_labels(alpha, beta, n, k, llr(x1));
                    [
                        u64::from(at0.c_map == 1),
                        u64::from(at1.c_map == 0),
                        u64::from(at0.c_rb == 1),
                        u64::from(at1.c_rb == 0),
                    ]
                })
                .reduce(|| [0; 4], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]);
            let r = reps as f64;
            let [m0, m1, r0, r1] = counts.map(|c| c as f64 / r);
            Ok(RiskTableRow {
                beta,
                map_err0: m0,
                map_err1: m1,
                map_sum: m0 + m1,
                rb_err0: r0,
                rb_err1: r1,
                rb_sum: r0 + r1,
                reps,
                seed,
            })
        })
        .collect()
}

/// Draws one sample of `U(0, 1)`; used by tests of the stream layout.
#[doc(hidden)]
pub fn first_uniform(seed: u64, row: usize, rep: u64) -> f64 {
    replication_rng(seed, row, rep).random()
}
