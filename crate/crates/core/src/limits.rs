//! Numerical experiments for the limiting behaviour of prior-based losses.
//!
//! Each experiment walks a decreasing ladder (of `eta` values or of cell
//! widths) and records how far the result at each step is from its limit.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete};

use crate::decision::{bayes_action, eta_ladder, lpl_region, make_loss, LossKind};
use crate::evidence::{check_gamma, credible_region, rb_estimate, rb_table, Convention, EvidenceTable, Levels};
use crate::grid::{discretize, project_cells, refine, Family, Grid1D, DEFAULT_QUADRATURE_POINTS};
use crate::model::{psi_posterior, psi_prior, FiniteModel, PsiMap};
use crate::numeric::argmax_with_tie;
use crate::{Error, Result};

/// Cumulative prior mass kept when truncating a countable support.
pub const TRUNCATION_MASS: f64 = 1.0 - 1e-10;

/// Fineness of the reference grid relative to the finest ladder step.
pub const REFERENCE_FACTOR: usize = 16;

/// Number of `eta` values per cell width in the grid sandwich experiment.
pub const INNER_ETA_STEPS: usize = 8;

/// Relative spread below which cell-level RB counts as flat.
const FLAT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    /// `eta` for loss ladders, cell width for grid ladders.
    pub parameter: f64,
    #[serde(default)]
    pub eta: Option<f64>,
    /// Action index (finite tables) or cell midpoint (grids).
    #[serde(default)]
    pub action: Option<f64>,
    #[serde(default)]
    pub region_cells: Option<usize>,
    #[serde(default)]
    pub posterior_content: Option<f64>,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitTrace {
    pub experiment: String,
    /// The limit object: an index, a point, or absent for region traces.
    pub target: Option<f64>,
    pub rows: Vec<TraceRow>,
    /// First step from which the discrepancy stays at zero, if any.
    pub stabilization_index: Option<usize>,
}

fn stabilization_index(rows: &[TraceRow]) -> Option<usize> {
    let tail = rows.iter().rev().take_while(|r| r.discrepancy == 0.0).count();
    (tail > 0).then(|| rows.len() - tail)
}

fn check_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::InvalidParameter {
            name: "ladder",
            value: 0.0,
            reason: "needs at least one step",
        });
    }
    for (i, &v) in ladder.iter().enumerate() {
        if !(v > 0.0 && v.is_finite()) || (i > 0 && v >= ladder[i - 1]) {
            return Err(Error::InvalidParameter {
                name: "ladder",
                value: v,
                reason: "must be positive and strictly decreasing",
            });
        }
    }
    Ok(())
}

/// Per-`eta` Bayes actions under the bounded RB loss for one observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaTrace {
    pub trace: LimitTrace,
    /// Index of the RB estimate in the input table.
    pub rb_index: usize,
    /// `pi(psi_RB)`: every `eta` at or below it must give the RB estimate.
    pub threshold: f64,
    /// Ladder steps with `eta <= threshold` whose action differs from the RB estimate.
    pub violations: Vec<usize>,
}

pub fn eta_limit(prior: &[f64], posterior: &[f64], ladder: &[f64]) -> Result<EtaTrace> {
    check_ladder(ladder)?;
    let table = rb_table(prior, posterior, None)?;
    let est = rb_estimate(&table);
    if est.tie {
        return Err(Error::TieAtMaximizer {
            x: table.source[est.index],
        });
    }
    let target = table.source[est.index];
    let threshold = prior[target];
    let mut rows = Vec::with_capacity(ladder.len());
    let mut violations = Vec::new();
    for (step, &eta) in ladder.iter().enumerate() {
        let loss = make_loss(LossKind::RbEta, prior, Some(eta))?;
        let action = bayes_action(&loss, posterior)?.action;
        if eta <= threshold && action != target {
            violations.push(step);
        }
        rows.push(TraceRow {
            step,
            parameter: eta,
            eta: Some(eta),
            action: Some(action as f64),
            region_cells: None,
            posterior_content: None,
            discrepancy: (action as f64 - target as f64).abs(),
        });
    }
    Ok(EtaTrace {
        trace: LimitTrace {
            experiment: "eta".into(),
            target: Some(target as f64),
            stabilization_index: stabilization_index(&rows),
            rows,
        },
        rb_index: target,
        threshold,
        violations,
    })
}

/// `eta_limit` at observation `x` of a finite model.
pub fn eta_limit_model(model: &FiniteModel, psi: &PsiMap, x: usize, ladder: &[f64]) -> Result<EtaTrace> {
    let prior = psi_prior(model, psi)?;
    let posterior = psi_posterior(model, psi, x)?;
    eta_limit(&prior, &posterior, ladder).map_err(|e| match e {
        Error::TieAtMaximizer { .. } => Error::TieAtMaximizer { x },
        other => other,
    })
}

/// Geometric prior `p_i ∝ ratio^i` on `{0, 1, ..}` with a binomial
/// observation `x ~ Binomial(trials, (i + 1) / (N + 1))`, where `N` is the
/// size of the truncated support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricSpec {
    pub ratio: f64,
    pub trials: u64,
}

impl Default for GeometricSpec {
    fn default() -> Self {
        Self { ratio: 0.5, trials: 20 }
    }
}

/// Masses `ratio^i` for `i = 0..N`, with `N` the first size whose
/// cumulative share of the untruncated total reaches [`TRUNCATION_MASS`];
/// returned normalized, together with the discarded tail mass.
pub fn truncated_geometric(ratio: f64) -> Result<(Vec<f64>, f64)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter {
            name: "ratio",
            value: ratio,
            reason: "must lie strictly inside (0, 1)",
        });
    }
    let total = 1.0 / (1.0 - ratio);
    let mut masses = Vec::new();
    let (mut term, mut cum) = (1.0, 0.0);
    while cum / total < TRUNCATION_MASS {
        masses.push(term);
        cum += term;
        term *= ratio;
    }
    let tail = 1.0 - cum / total;
    Ok((masses.iter().map(|m| m / cum).collect(), tail.max(0.0)))
}

pub fn geometric_model(spec: &GeometricSpec) -> Result<(FiniteModel, PsiMap, f64)> {
    let (prior, tail) = truncated_geometric(spec.ratio)?;
    let n = prior.len();
    let likelihood = (0..n)
        .map(|i| {
            let p = (i + 1) as f64 / (n + 1) as f64;
            let b = Binomial::new(p, spec.trials).map_err(|_| Error::InvalidParameter {
                name: "trials",
                value: spec.trials as f64,
                reason: "invalid binomial parameters",
            })?;
            Ok((0..=spec.trials).map(|x| b.pmf(x)).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let model = FiniteModel::from_tables(likelihood, prior)?;
    let psi = PsiMap::identity(&model);
    Ok((model, psi, tail))
}

/// Likelihood of a single observation as a function of the parameter, up
/// to a constant factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Likelihood {
    /// `x ~ N(psi, variance)`.
    Normal { x: f64, variance: f64 },
    /// `x ~ N(ln tau, variance)` for `tau > 0`.
    NormalOfLog { x: f64, variance: f64 },
    /// Uninformative data.
    Constant,
}

impl Likelihood {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Likelihood::Normal { x, variance } => (-(x - t) * (x - t) / (2.0 * variance)).exp(),
            Likelihood::NormalOfLog { x, variance } => {
                if t > 0.0 {
                    let d = x - t.ln();
                    (-d * d / (2.0 * variance)).exp()
                } else {
                    0.0
                }
            }
            Likelihood::Constant => 1.0,
        }
    }

    /// The continuous RB estimate: RB is the likelihood over the prior
    /// predictive, so it peaks where the likelihood does.
    pub fn rb_argmax(&self) -> Option<f64> {
        match *self {
            Likelihood::Normal { x, .. } => Some(x),
            Likelihood::NormalOfLog { x, .. } => Some(x.exp()),
            Likelihood::Constant => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Likelihood::Normal { x, variance } | Likelihood::NormalOfLog { x, variance } => {
                if !(variance > 0.0 && variance.is_finite() && x.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "variance",
                        value: variance,
                        reason: "must be positive and finite",
                    });
                }
                Ok(())
            }
            Likelihood::Constant => Ok(()),
        }
    }
}

/// Continuous prior and observed likelihood for the grid experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridProblem {
    pub prior: Family,
    pub likelihood: Likelihood,
}

/// Prior and posterior cell masses on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTables {
    pub grid: Grid1D,
    pub prior: Vec<f64>,
    pub posterior: Vec<f64>,
}

impl CellTables {
    fn table(&self) -> Result<EvidenceTable> {
        rb_table(&self.prior, &self.posterior, None)
    }

    /// Sums groups of `factor` adjacent cells.
    fn coarsen(&self, coarse: &Grid1D) -> Result<CellTables> {
        if !coarse.nests(&self.grid) {
            return Err(Error::LadderNotNested);
        }
        let factor = self.grid.n_cells() / coarse.n_cells();
        let sum = |v: &[f64]| v.chunks(factor).map(|c| c.iter().sum()).collect::<Vec<f64>>();
        Ok(CellTables {
            grid: *coarse,
            prior: sum(&self.prior),
            posterior: sum(&self.posterior),
        })
    }
}

impl GridProblem {
    pub fn tables(&self, grid: &Grid1D) -> Result<CellTables> {
        self.likelihood.validate()?;
        self.prior.validate()?;
        let prior = discretize(|t| self.prior.pdf(t), grid, DEFAULT_QUADRATURE_POINTS)?;
        let posterior = discretize(
            |t| self.prior.pdf(t) * self.likelihood.eval(t),
            grid,
            DEFAULT_QUADRATURE_POINTS,
        )?;
        Ok(CellTables {
            grid: *grid,
            prior: prior.masses,
            posterior: posterior.masses,
        })
    }
}

fn check_grid_ladder(grids: &[Grid1D]) -> Result<()> {
    check_ladder(&grids.iter().map(Grid1D::cell_width).collect::<Vec<_>>())
}

/// Cell with the largest RB, rejecting flat RB.
fn rb_max_cell(cells: &CellTables) -> Result<usize> {
    let rb: Vec<f64> = cells
        .prior
        .iter()
        .zip(&cells.posterior)
        .map(|(&p, &q)| if p > 0.0 { q / p } else { f64::NAN })
        .collect();
    let (hi, lo) = rb
        .iter()
        .filter(|v| !v.is_nan())
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(h, l), &v| (h.max(v), l.min(v)));
    if hi.is_nan() || hi - lo <= FLAT_TOL * hi {
        return Err(Error::SeparationViolated);
    }
    Ok(argmax_with_tie(&rb).ok_or(Error::AllZeroMass)?.0)
}

/// Bayes actions under the cell-level bounded RB loss along a grid ladder,
/// with `eta` set to half the prior mass of the RB-maximizing cell.
pub fn lambda_limit(problem: &GridProblem, grids: &[Grid1D]) -> Result<LimitTrace> {
    check_grid_ladder(grids)?;
    let target = problem.likelihood.rb_argmax().ok_or(Error::SeparationViolated)?;
    let mut rows = Vec::with_capacity(grids.len());
    for (step, grid) in grids.iter().enumerate() {
        let cells = problem.tables(grid)?;
        let eta = 0.5 * cells.prior[rb_max_cell(&cells)?];
        let loss = make_loss(LossKind::RbLambdaEta, &cells.prior, Some(eta))?;
        let action = grid.midpoint(bayes_action(&loss, &cells.posterior)?.action);
        rows.push(TraceRow {
            step,
            parameter: grid.cell_width(),
            eta: Some(eta),
            action: Some(action),
            region_cells: None,
            posterior_content: None,
            discrepancy: (action - target).abs(),
        });
    }
    Ok(LimitTrace {
        experiment: "lambda".into(),
        target: Some(target),
        stabilization_index: stabilization_index(&rows),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastRow {
    pub n_cells: usize,
    pub cell_width: f64,
    /// Midpoint of the cell with the largest posterior mass.
    pub map_action: f64,
    /// Midpoint of the cell with the largest RB.
    pub rb_action: f64,
    pub separation_cells: f64,
}

/// Cell-level MAP (0-1 loss on cells) against cell-level RB along a ladder.
pub fn map_limit_contrast(problem: &GridProblem, grids: &[Grid1D]) -> Result<Vec<ContrastRow>> {
    check_grid_ladder(grids)?;
    grids
        .iter()
        .map(|grid| {
            let cells = problem.tables(grid)?;
            let rb_cell = rb_max_cell(&cells)?;
            let map = make_loss(LossKind::Map, &cells.prior, None)?;
            let map_cell = bayes_action(&map, &cells.posterior)?.action;
            Ok(ContrastRow {
                n_cells: grid.n_cells(),
                cell_width: grid.cell_width(),
                map_action: grid.midpoint(map_cell),
                rb_action: grid.midpoint(rb_cell),
                separation_cells: (map_cell as f64 - rb_cell as f64).abs(),
            })
        })
        .collect()
}

/// Credible region as a mask over the cells of `reference`.
fn region_mask(cells: &CellTables, gamma: f64, reference: &Grid1D) -> Result<(Vec<bool>, usize, f64)> {
    let table = cells.table()?;
    let region = credible_region(&table, gamma, Convention::SupGeq)?;
    let members: Vec<usize> = region.members.iter().map(|&i| table.source[i]).collect();
    let mask = project_cells(&cells.grid, &members, reference)?;
    Ok((mask, members.len(), region.posterior_content))
}

/// Posterior mass of the symmetric difference between the discretized
/// credible region at each ladder step and the region on a grid
/// [`REFERENCE_FACTOR`] times finer than the finest step.
pub fn region_limit(problem: &GridProblem, gamma: f64, grids: &[Grid1D]) -> Result<LimitTrace> {
    check_grid_ladder(grids)?;
    let finest = grids.last().expect("non-empty ladder");
    let reference_grid = refine(finest, REFERENCE_FACTOR)?;
    if grids.iter().any(|g| !g.nests(&reference_grid)) {
        return Err(Error::LadderNotNested);
    }
    let reference = problem.tables(&reference_grid)?;
    let (ref_mask, _, _) = region_mask(&reference, gamma, &reference_grid)?;
    let mut rows = Vec::with_capacity(grids.len());
    for (step, grid) in grids.iter().enumerate() {
        let cells = reference.coarsen(grid)?;
        let (mask, n, content) = region_mask(&cells, gamma, &reference_grid)?;
        let discrepancy = crate::numeric::compensated_sum(
            mask.iter()
                .zip(&ref_mask)
                .zip(&reference.posterior)
                .filter(|((a, b), _)| a != b)
                .map(|(_, &m)| m),
        );
        rows.push(TraceRow {
            step,
            parameter: grid.cell_width(),
            eta: None,
            action: None,
            region_cells: Some(n),
            posterior_content: Some(content),
            discrepancy,
        });
    }
    Ok(LimitTrace {
        experiment: "region".into(),
        target: None,
        stabilization_index: stabilization_index(&rows),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichStep {
    pub eta: f64,
    pub region_size: usize,
    /// `C_gamma ⊆ D_eta`
    pub lower_holds: bool,
    /// `D_eta ⊆ C_gamma'`
    pub upper_holds: bool,
    /// `D_eta == C_gamma`
    pub equal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub requested_gamma: f64,
    /// Smallest posterior content of a credible region that is `>= gamma`.
    pub gamma: f64,
    /// The next attainable content above `gamma` (equal to it at full support).
    pub gamma_next: f64,
    pub credible_size: usize,
    pub credible_next_size: usize,
    pub steps: Vec<SandwichStep>,
    /// Largest ladder `eta` from which both inclusions hold for it and every
    /// smaller ladder value.
    pub holds_from_eta: Option<f64>,
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.binary_search(x).is_ok())
}

/// Checks `C_gamma ⊆ D_{eta,gamma} ⊆ C_gamma'` for lowest posterior loss
/// regions of the bounded RB loss along an `eta` ladder.
pub fn lpl_sandwich(prior: &[f64], posterior: &[f64], gamma: f64, etas: &[f64]) -> Result<SandwichReport> {
    check_ladder(etas)?;
    let table = rb_table(prior, posterior, None)?;
    check_gamma(gamma)?;
    let levels = Levels::new(&table.rb, &table.posterior, &table.prior);
    if gamma > levels.cum_posterior[levels.len() - 1] + 1e-9 {
        return Err(Error::NoAttainableGamma { gamma });
    }
    let count = levels.count_reaching(gamma);
    let lower = levels.region(count, levels.keys[count - 1]);
    let next = (count + 1).min(levels.len());
    let upper = levels.region(next, levels.keys[next - 1]);
    let attained = lower.posterior_content;
    let to_source = |m: &[usize]| m.iter().map(|&i| table.source[i]).collect::<Vec<_>>();
    let c_lower = to_source(&lower.members);
    let c_upper = to_source(&upper.members);
    let mut steps = Vec::with_capacity(etas.len());
    for &eta in etas {
        let loss = make_loss(LossKind::RbEta, prior, Some(eta))?;
        let d = lpl_region(&loss, posterior, attained)?.members;
        steps.push(SandwichStep {
            eta,
            region_size: d.len(),
            lower_holds: is_subset(&c_lower, &d),
            upper_holds: is_subset(&d, &c_upper),
            equal: d == c_lower,
        });
    }
    let ok_tail = steps
        .iter()
        .rev()
        .take_while(|s| s.lower_holds && s.upper_holds)
        .count();
    let holds_from_eta = (ok_tail > 0).then(|| steps[steps.len() - ok_tail].eta);
    Ok(SandwichReport {
        requested_gamma: gamma,
        gamma: attained,
        gamma_next: upper.posterior_content,
        credible_size: c_lower.len(),
        credible_next_size: c_upper.len(),
        steps,
        holds_from_eta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSandwich {
    pub n_cells: usize,
    pub report: SandwichReport,
}

/// The sandwich along a grid ladder, each with an inner `eta` ladder that
/// starts at half the prior mass of the RB-maximizing cell.
pub fn lpl_sandwich_grid(problem: &GridProblem, gamma: f64, grids: &[Grid1D]) -> Result<Vec<GridSandwich>> {
    check_grid_ladder(grids)?;
    grids
        .iter()
        .map(|grid| {
            let cells = problem.tables(grid)?;
            let eta0 = 0.5 * cells.prior[rb_max_cell(&cells)?];
            let etas: Vec<f64> = (0..INNER_ETA_STEPS).map(|k| eta0 * 0.5f64.powi(k as i32)).collect();
            Ok(GridSandwich {
                n_cells: grid.n_cells(),
                report: lpl_sandwich(&cells.prior, &cells.posterior, gamma, &etas)?,
            })
        })
        .collect()
}

/// The bounded-loss ladder used for finite tables: halving from the
/// largest prior mass until below the smallest positive one.
pub fn finite_eta_ladder(prior: &[f64]) -> Vec<f64> {
    let min = prior.iter().copied().filter(|&p| p > 0.0).fold(f64::INFINITY, f64::min);
    let max = prior.iter().copied().fold(0.0, f64::max);
    let steps = ((max / min).log2().ceil() as usize) + 2;
    eta_ladder(prior, steps)
}

/// Cell-level RB and density-level MAP under `tau = exp(psi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReparameterizationReport {
    pub n_cells: usize,
    pub rb_cell_psi: usize,
    pub rb_cell_tau: usize,
    /// Largest relative difference between RB of a cell and of its image.
    pub max_rb_relative_gap: f64,
    pub map_cell_psi: usize,
    pub map_cell_tau: usize,
    pub map_shift_cells: usize,
}

/// Normal prior and posterior for `psi` on `grid`, compared with the
/// lognormal prior and posterior of `tau = exp(psi)` on the image cells.
/// Image masses come from the lognormal CDFs, not from the `psi` masses.
pub fn reparameterization_demo(
    grid: &Grid1D,
    prior: (f64, f64),
    posterior: (f64, f64),
) -> Result<ReparameterizationReport> {
    let fam = |(m, v): (f64, f64)| Family::Normal { mean: m, variance: v };
    let log_fam = |(m, v): (f64, f64)| Family::LogNormal { mu: m, sigma2: v };
    let masses = |f: Family, edges: &dyn Fn(usize) -> (f64, f64)| -> Result<Vec<f64>> {
        f.validate()?;
        Ok((0..grid.n_cells())
            .map(|i| {
                let (a, b) = edges(i);
                f.interval_mass(a, b)
            })
            .collect())
    };
    let psi_edges = |i: usize| grid.cell(i);
    let tau_edges = |i: usize| {
        let (a, b) = grid.cell(i);
        (a.exp(), b.exp())
    };
    let p_psi = masses(fam(prior), &psi_edges)?;
    let q_psi = masses(fam(posterior), &psi_edges)?;
    let p_tau = masses(log_fam(prior), &tau_edges)?;
    let q_tau = masses(log_fam(posterior), &tau_edges)?;
    let ratio = |q: &[f64], p: &[f64]| -> Vec<f64> {
        q.iter()
            .zip(p)
            .map(|(&q, &p)| if p > 0.0 { q / p } else { f64::NAN })
            .collect()
    };
    let rb_psi = ratio(&q_psi, &p_psi);
    let rb_tau = ratio(&q_tau, &p_tau);
    let max_rb_relative_gap = rb_psi
        .iter()
        .zip(&rb_tau)
        .filter(|(a, b)| a.is_finite() && b.is_finite() && **a > 0.0)
        .map(|(a, b)| ((a - b) / a).abs())
        .fold(0.0, f64::max);
    let rb_cell_psi = argmax_with_tie(&rb_psi).ok_or(Error::AllZeroMass)?.0;
    let rb_cell_tau = argmax_with_tie(&rb_tau).ok_or(Error::AllZeroMass)?.0;
    let w = grid.cell_width();
    let dens_psi: Vec<f64> = q_psi.iter().map(|q| q / w).collect();
    let dens_tau: Vec<f64> = q_tau
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let (a, b) = tau_edges(i);
            q / (b - a)
        })
        .collect();
    let map_cell_psi = argmax_with_tie(&dens_psi).ok_or(Error::AllZeroMass)?.0;
    let map_cell_tau = argmax_with_tie(&dens_tau).ok_or(Error::AllZeroMass)?.0;
    Ok(ReparameterizationReport {
        n_cells: grid.n_cells(),
        rb_cell_psi,
        rb_cell_tau,
        max_rb_relative_gap,
        map_cell_psi,
        map_cell_tau,
        map_shift_cells: map_cell_psi.abs_diff(map_cell_tau),
    })
}
