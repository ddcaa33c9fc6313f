//! Relative belief ratios and the inferences built on them: the relative
//! belief estimate, plausible and credible regions, strength of evidence and
//! hypothesis assessment, plus relative belief prediction.
//!
//! All comparisons use the computed floating values without an epsilon band,
//! so `rb == 1.0` is "no evidence" and is excluded from the plausible region.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::numeric::{argmax_with_tie, check_masses, compensated_sum};
use crate::{Error, Result};

/// Per-value prior, posterior and relative belief ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceTable {
    pub labels: Vec<String>,
    pub prior: Vec<f64>,
    pub posterior: Vec<f64>,
    pub rb: Vec<f64>,
    /// Index in the caller's input for each kept entry.
    pub source: Vec<usize>,
    /// Input indices dropped because both prior and posterior were zero.
    pub excluded: Vec<usize>,
}

/// Builds a table with `rb[i] = posterior[i] / prior[i]`.
///
/// Entries with zero prior and zero posterior are dropped and listed in
/// `excluded`; zero prior with positive posterior is an error.
pub fn rb_table(prior: &[f64], posterior: &[f64], labels: Option<&[String]>) -> Result<EvidenceTable> {
    if prior.len() != posterior.len() {
        return Err(Error::DimensionMismatch {
            field: "posterior",
            expected: prior.len(),
            found: posterior.len(),
        });
    }
    if let Some(l) = labels {
        if l.len() != prior.len() {
            return Err(Error::DimensionMismatch {
                field: "labels",
                expected: prior.len(),
                found: l.len(),
            });
        }
    }
    check_masses("prior", prior)?;
    check_masses("posterior", posterior)?;
    let mut table = EvidenceTable {
        labels: Vec::new(),
        prior: Vec::new(),
        posterior: Vec::new(),
        rb: Vec::new(),
        source: Vec::new(),
        excluded: Vec::new(),
    };
    for (i, (&p, &q)) in prior.iter().zip(posterior).enumerate() {
        if p == 0.0 {
            if q > 0.0 {
                return Err(Error::ZeroPriorPositivePosterior { index: i });
            }
            table.excluded.push(i);
            continue;
        }
        table
            .labels
            .push(labels.map_or_else(|| i.to_string(), |l| l[i].clone()));
        table.prior.push(p);
        table.posterior.push(q);
        table.rb.push(q / p);
        table.source.push(i);
    }
    if table.rb.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok(table)
}

impl EvidenceTable {
    pub fn len(&self) -> usize {
        self.rb.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rb.is_empty()
    }

    /// `sum_i rb[i] * prior[i]`, which is the posterior total.
    pub fn normalization(&self) -> f64 {
        compensated_sum(self.rb.iter().zip(&self.prior).map(|(r, p)| r * p))
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange {
                field: "psi",
                index: i,
                len: self.len(),
            });
        }
        Ok(())
    }

    /// Position in the table of an input index, if it was kept.
    pub fn position_of_source(&self, source_index: usize) -> Option<usize> {
        self.source.iter().position(|&s| s == source_index)
    }
}

/// Argmax with tie information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub index: usize,
    pub tie: bool,
    pub rb: f64,
}

/// Relative belief estimate: the value with the largest ratio.
pub fn rb_estimate(t: &EvidenceTable) -> Estimate {
    let (index, tie) = argmax_with_tie(&t.rb).expect("evidence tables are non-empty");
    Estimate {
        index,
        tie,
        rb: t.rb[index],
    }
}

/// A region given as table indices, with its contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    /// Sorted table indices.
    pub members: Vec<usize>,
    pub cutoff: f64,
    pub posterior_content: f64,
    pub prior_content: f64,
}

/// Values grouped by equal ranking key, best key first, with running contents.
///
/// Every region in this crate is a union of leading levels, and its contents
/// are read off the running sums so that equal regions report equal contents.
#[derive(Debug, Clone)]
pub(crate) struct Levels {
    pub keys: Vec<f64>,
    pub groups: Vec<Vec<usize>>,
    pub cum_posterior: Vec<f64>,
    pub cum_prior: Vec<f64>,
}

impl Levels {
    /// `keys` are ranked descending; NaN keys are not expected.
    pub fn new(keys: &[f64], posterior: &[f64], prior: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..keys.len()).collect();
        order.sort_by(|&a, &b| keys[b].partial_cmp(&keys[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
        let mut levels = Levels {
            keys: Vec::new(),
            groups: Vec::new(),
            cum_posterior: Vec::new(),
            cum_prior: Vec::new(),
        };
        for i in order {
            if levels.keys.last() != Some(&keys[i]) {
                levels.keys.push(keys[i]);
                levels.groups.push(Vec::new());
            }
            levels.groups.last_mut().unwrap().push(i);
        }
        // Each level is summed in index order, then accumulated.
        let (mut post_acc, mut prior_acc) = (0.0, 0.0);
        for group in &levels.groups {
            post_acc += group.iter().map(|&i| posterior[i]).sum::<f64>();
            prior_acc += group.iter().map(|&i| prior[i]).sum::<f64>();
            levels.cum_posterior.push(post_acc);
            levels.cum_prior.push(prior_acc);
        }
        levels
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    /// Region made of the first `count` levels.
    pub fn region(&self, count: usize, cutoff: f64) -> RegionReport {
        let mut members: Vec<usize> = self.groups[..count].iter().flatten().copied().collect();
        members.sort_unstable();
        let (posterior_content, prior_content) = if count == 0 {
            (0.0, 0.0)
        } else {
            (self.cum_posterior[count - 1], self.cum_prior[count - 1])
        };
        RegionReport {
            members,
            cutoff,
            posterior_content,
            prior_content,
        }
    }

    /// Fewest leading levels whose posterior content reaches `gamma`
    /// (all levels when rounding keeps the total just below it). `gamma = 1`
    /// always takes the whole support, whatever the rounding of the sums.
    pub fn count_reaching(&self, gamma: f64) -> usize {
        if gamma >= 1.0 {
            return self.len();
        }
        self.cum_posterior
            .iter()
            .position(|&c| c >= gamma)
            .map_or(self.len(), |j| j + 1)
    }
}

/// `Pl(x) = {psi : rb > 1}`.
pub fn plausible_region(t: &EvidenceTable) -> RegionReport {
    let levels = Levels::new(&t.rb, &t.posterior, &t.prior);
    let count = levels.keys.iter().take_while(|&&k| k > 1.0).count();
    levels.region(count, 1.0)
}

/// Which inequality defines a credible region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// `{rb >= c}` with `c = sup{c : post(rb >= c) >= gamma}`.
    #[default]
    SupGeq,
    /// `{rb > c}` with `c` the `(1 - gamma)` posterior quantile of rb.
    QuantileGt,
}

impl std::str::FromStr for Convention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sup-geq" => Ok(Convention::SupGeq),
            "quantile-gt" => Ok(Convention::QuantileGt),
            _ => Err(Error::Parse(format!("unknown convention {s:?}"))),
        }
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            value: gamma,
            reason: "must lie in [0, 1]",
        });
    }
    Ok(())
}

/// Relative belief gamma-credible region.
pub fn credible_region(t: &EvidenceTable, gamma: f64, convention: Convention) -> Result<RegionReport> {
    check_gamma(gamma)?;
    let levels = Levels::new(&t.rb, &t.posterior, &t.prior);
    Ok(match convention {
        Convention::SupGeq => {
            let count = levels.count_reaching(gamma);
            levels.region(count, levels.keys[count - 1])
        }
        Convention::QuantileGt => {
            // Largest content not above gamma, reached by the fewest levels.
            let best = levels
                .cum_posterior
                .iter()
                .copied()
                .filter(|&c| c <= gamma)
                .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.max(c))));
            let count = match best {
                None => 0,
                Some(b) => levels.cum_posterior.iter().position(|&c| c == b).unwrap() + 1,
            };
            let cutoff = if count < levels.len() { levels.keys[count] } else { 0.0 };
            levels.region(count, cutoff)
        }
    })
}

/// `Str(psi0) = post(rb <= rb[psi0])`.
pub fn strength(t: &EvidenceTable, psi0: usize) -> Result<f64> {
    t.check_index(psi0)?;
    let r0 = t.rb[psi0];
    Ok(compensated_sum(
        t.rb.iter()
            .zip(&t.posterior)
            .filter(|(r, _)| **r <= r0)
            .map(|(_, p)| *p),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    EvidenceFor,
    EvidenceAgainst,
    NoEvidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub psi0: usize,
    pub rb_at_psi0: f64,
    pub strength: f64,
    pub posterior_mass: f64,
    pub verdict: Verdict,
}

/// Evidence for or against `H0: psi = psi0`, with its strength.
pub fn assess_hypothesis(t: &EvidenceTable, psi0: usize) -> Result<HypothesisReport> {
    let strength = strength(t, psi0)?;
    let r = t.rb[psi0];
    let verdict = if r > 1.0 {
        Verdict::EvidenceFor
    } else if r < 1.0 {
        Verdict::EvidenceAgainst
    } else {
        Verdict::NoEvidence
    };
    Ok(HypothesisReport {
        psi0,
        rb_at_psi0: r,
        strength,
        posterior_mass: t.posterior[psi0],
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub table: EvidenceTable,
    pub estimate: Estimate,
}

/// Relative belief prediction from prior and posterior predictive masses.
pub fn rb_predict(prior_pred: &[f64], post_pred: &[f64]) -> Result<PredictionReport> {
    let table = rb_table(prior_pred, post_pred, None)?;
    let estimate = rb_estimate(&table);
    Ok(PredictionReport { table, estimate })
}

/// Everything the `evidence` command reports for one observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceReport {
    pub labels: Vec<String>,
    pub prior: Vec<f64>,
    pub posterior: Vec<f64>,
    pub rb: Vec<f64>,
    pub estimate: usize,
    pub estimate_label: String,
    pub tie: bool,
    pub plausible: RegionReport,
    pub credible: RegionReport,
    pub gamma: f64,
    pub convention: Convention,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<HypothesisReport>,
    /// Strength at `psi0` when given, otherwise at the estimate.
    pub strength: f64,
    pub excluded: Vec<usize>,
}

pub fn evidence_report(
    t: &EvidenceTable,
    gamma: f64,
    convention: Convention,
    psi0: Option<usize>,
) -> Result<EvidenceReport> {
    let est = rb_estimate(t);
    let hypothesis = psi0.map(|p| assess_hypothesis(t, p)).transpose()?;
    let strength = strength(t, psi0.unwrap_or(est.index))?;
    Ok(EvidenceReport {
        labels: t.labels.clone(),
        prior: t.prior.clone(),
        posterior: t.posterior.clone(),
        rb: t.rb.clone(),
        estimate: est.index,
        estimate_label: t.labels[est.index].clone(),
        tie: est.tie,
        plausible: plausible_region(t),
        credible: credible_region(t, gamma, convention)?,
        gamma,
        convention,
        hypothesis,
        strength,
        excluded: t.excluded.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(prior: &[f64], post: &[f64]) -> EvidenceTable {
        rb_table(prior, post, None).unwrap()
    }

    #[test]
    fn rb_table_examples() {
        let t = table(&[0.5, 0.5], &[0.2, 0.8]);
        assert_eq!(t.rb, vec![0.4, 1.6]);
        assert_eq!(table(&[0.9, 0.1], &[0.9, 0.1]).rb, vec![1.0, 1.0]);
        let same = table(&[0.1, 0.3, 0.6], &[0.1, 0.3, 0.6]);
        assert!(same.rb.iter().all(|&r| r == 1.0));
        assert!((t.normalization() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rb_table_zero_prior_handling() {
        let t = table(&[0.5, 0.0, 0.5], &[0.2, 0.0, 0.8]);
        assert_eq!(t.excluded, vec![1]);
        assert_eq!(t.source, vec![0, 2]);
        assert_eq!(
            rb_table(&[0.5, 0.0, 0.5], &[0.2, 0.1, 0.7], None),
            Err(Error::ZeroPriorPositivePosterior { index: 1 })
        );
    }

    #[test]
    fn estimate_examples() {
        assert_eq!(rb_estimate(&table(&[0.5, 0.5], &[0.2, 0.8])).index, 1);
        let tie = rb_estimate(&table(&[0.5, 0.5], &[0.5, 0.5]));
        assert_eq!((tie.index, tie.tie), (0, true));
        // Uniform prior: estimate is the posterior mode.
        let t = table(&[0.25; 4], &[0.1, 0.4, 0.3, 0.2]);
        assert_eq!(rb_estimate(&t).index, 1);
    }

    #[test]
    fn plausible_examples() {
        assert!(plausible_region(&table(&[0.3, 0.7], &[0.3, 0.7])).members.is_empty());
        let pl = plausible_region(&table(&[0.5, 0.5], &[0.2, 0.8]));
        assert_eq!(pl.members, vec![1]);
        assert!((pl.posterior_content - 0.8).abs() < 1e-15);
        assert!(pl.posterior_content > pl.prior_content);
    }

    #[test]
    fn credible_examples() {
        let t = table(&[0.5, 0.5], &[0.2, 0.8]);
        let c = credible_region(&t, 0.8, Convention::SupGeq).unwrap();
        assert_eq!(c.members, vec![1]);
        assert_eq!(c.cutoff, 1.6);
        let full = credible_region(&t, 1.0, Convention::SupGeq).unwrap();
        assert_eq!(full.members, vec![0, 1]);
        assert!((full.posterior_content - 1.0).abs() < 1e-15);
        let zero = credible_region(&t, 0.0, Convention::SupGeq).unwrap();
        assert_eq!(zero.members, vec![1]);
        assert_eq!(zero.cutoff, 1.6);
        assert!(credible_region(&t, 1.5, Convention::SupGeq).is_err());
    }

    #[test]
    fn quantile_convention_recovers_plausible_region() {
        let t = table(&[0.1, 0.2, 0.3, 0.4], &[0.05, 0.35, 0.45, 0.15]);
        let pl = plausible_region(&t);
        let c = credible_region(&t, pl.posterior_content, Convention::QuantileGt).unwrap();
        assert_eq!(c.members, pl.members);
        // Str(psi0) = 1 - content of C_gamma at gamma = 1 - Str, up to rounding of gamma.
        for psi0 in 0..4 {
            let s = strength(&t, psi0).unwrap();
            let c = credible_region(&t, 1.0 - s + 1e-12, Convention::QuantileGt).unwrap();
            assert!((s - (1.0 - c.posterior_content)).abs() < 1e-12);
        }
    }

    #[test]
    fn strength_examples() {
        let t = table(&[0.5, 0.5], &[0.2, 0.8]);
        assert_eq!(strength(&t, 1).unwrap(), 1.0);
        assert!((strength(&t, 0).unwrap() - 0.2).abs() < 1e-15);
        let flat = table(&[0.2, 0.8], &[0.2, 0.8]);
        assert!((strength(&flat, 0).unwrap() - 1.0).abs() < 1e-15);
        assert!((strength(&flat, 1).unwrap() - 1.0).abs() < 1e-15);
        assert!(strength(&t, 2).is_err());
    }

    #[test]
    fn hypothesis_examples() {
        let t = table(&[0.5, 0.5], &[0.2, 0.8]);
        let h1 = assess_hypothesis(&t, 1).unwrap();
        assert_eq!(h1.verdict, Verdict::EvidenceFor);
        assert_eq!(h1.strength, 1.0);
        let h0 = assess_hypothesis(&t, 0).unwrap();
        assert_eq!(h0.verdict, Verdict::EvidenceAgainst);
        assert!((h0.strength - 0.2).abs() < 1e-15);
        let flat = table(&[0.4, 0.6], &[0.4, 0.6]);
        assert_eq!(assess_hypothesis(&flat, 0).unwrap().verdict, Verdict::NoEvidence);
    }

    #[test]
    fn predict_examples() {
        let same = rb_predict(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!((same.estimate.index, same.estimate.tie), (0, true));
        assert_eq!(rb_predict(&[0.5, 0.5], &[0.1, 0.9]).unwrap().estimate.index, 1);
        let point = rb_predict(&[0.2, 0.3, 0.5], &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(point.estimate.index, 2);
    }
}
