//! Regular one-dimensional discretizations.
//!
//! A [`Grid1D`] splits `[lo, hi)` into equal half-open cells. Densities are
//! turned into cell masses either by composite midpoint quadrature or, for the
//! built-in [`Family`] distributions, by exact CDF differences. Index sets of
//! cells map back to unions of intervals with [`undiscretize`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, Continuous, ContinuousCDF, LogNormal, Normal, Uniform};

use crate::numeric::compensated_sum;
use crate::{Error, Result};

/// Default number of midpoint-rule points per cell.
pub const DEFAULT_QUADRATURE_POINTS: usize = 8;

/// Largest tail mass for which a truncated distribution is considered usable.
pub const MAX_TAIL_MASS: f64 = 0.01;

/// Equal-width partition of `[lo, hi)` into `n_cells` half-open cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid1D {
    lo: f64,
    hi: f64,
    n_cells: usize,
}

/// Wire form of a grid: `{"lo": .., "hi": .., "n_cells": ..}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n_cells: usize,
}

impl TryFrom<GridSpec> for Grid1D {
    type Error = Error;
    fn try_from(s: GridSpec) -> Result<Self> {
        build_grid(s.lo, s.hi, s.n_cells)
    }
}

impl From<Grid1D> for GridSpec {
    fn from(g: Grid1D) -> Self {
        GridSpec {
            lo: g.lo,
            hi: g.hi,
            n_cells: g.n_cells,
        }
    }
}

pub fn build_grid(lo: f64, hi: f64, n_cells: usize) -> Result<Grid1D> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::BadRange { lo, hi });
    }
    if n_cells == 0 {
        return Err(Error::ZeroCells);
    }
    Ok(Grid1D { lo, hi, n_cells })
}

/// Splits every cell into `factor` equal children. Old edges are kept exactly.
pub fn refine(grid: &Grid1D, factor: usize) -> Result<Grid1D> {
    if factor < 2 {
        return Err(Error::BadRefinement { factor });
    }
    build_grid(grid.lo, grid.hi, grid.n_cells * factor)
}

impl Grid1D {
    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn cell_width(&self) -> f64 {
        (self.hi - self.lo) / self.n_cells as f64
    }

    /// Left edge of cell `i`; `edge(n_cells) == hi`.
    pub fn edge(&self, i: usize) -> f64 {
        if i == self.n_cells {
            return self.hi;
        }
        self.lo + (self.hi - self.lo) * (i as f64 / self.n_cells as f64)
    }

    /// `[edge(i), edge(i + 1))`.
    pub fn cell(&self, i: usize) -> (f64, f64) {
        (self.edge(i), self.edge(i + 1))
    }

    /// Representative point of cell `i`.
    pub fn midpoint(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.cell_width()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.midpoint(i)).collect()
    }

    /// Cell containing `v`, if `v` lies in `[lo, hi)`.
    pub fn locate(&self, v: f64) -> Option<usize> {
        if !(v >= self.lo && v < self.hi) {
            return None;
        }
        let mut i = (((v - self.lo) / (self.hi - self.lo)) * self.n_cells as f64) as usize;
        i = i.min(self.n_cells - 1);
        // Nudge for rounding at the edges.
        while i > 0 && v < self.edge(i) {
            i -= 1;
        }
        while i + 1 < self.n_cells && v >= self.edge(i + 1) {
            i += 1;
        }
        Some(i)
    }

    /// Whether `fine` has the same range and every one of its cells lies in one cell of `self`.
    pub fn nests(&self, fine: &Grid1D) -> bool {
        self.lo == fine.lo && self.hi == fine.hi && fine.n_cells.is_multiple_of(self.n_cells)
    }
}

/// Cell masses of a density on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GriddedDistribution {
    pub grid: Grid1D,
    /// Normalized cell masses.
    pub masses: Vec<f64>,
    /// Total mass on the grid before renormalization.
    pub raw_total: f64,
    /// `1 - raw_total`, clamped at 0. Only meaningful for normalized densities.
    pub tail_mass: f64,
}

impl GriddedDistribution {
    fn from_raw(grid: Grid1D, raw: Vec<f64>) -> Result<Self> {
        let total = compensated_sum(raw.iter().copied());
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::AllZeroMass);
        }
        Ok(Self {
            grid,
            masses: raw.into_iter().map(|m| m / total).collect(),
            raw_total: total,
            tail_mass: (1.0 - total).max(0.0),
        })
    }

    /// Truncation is acceptable when less than 1% of the mass fell outside the grid.
    pub fn truncation_ok(&self) -> bool {
        self.tail_mass < MAX_TAIL_MASS
    }

    /// Mass divided by cell width, the density-level view of each cell.
    pub fn densities(&self) -> Vec<f64> {
        let w = self.grid.cell_width();
        self.masses.iter().map(|m| m / w).collect()
    }
}

/// Midpoint-rule integral of `density` over `[a, b)` with `q` points.
fn cell_integral<F: Fn(f64) -> f64>(density: &F, a: f64, b: f64, q: usize) -> Result<f64> {
    let h = (b - a) / q as f64;
    let mut vals = Vec::with_capacity(q);
    for j in 0..q {
        let t = a + (j as f64 + 0.5) * h;
        let v = density(t);
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::NegativeDensity { at: t, value: v });
        }
        vals.push(v);
    }
    Ok(compensated_sum(vals) * h)
}

/// Cell masses by composite midpoint quadrature, renormalized to sum to one.
///
/// `tail_mass` is `1 - raw_total`, which is the truncated mass when `density`
/// integrates to one over the real line.
pub fn discretize<F>(density: F, grid: &Grid1D, quadrature_points: usize) -> Result<GriddedDistribution>
where
    F: Fn(f64) -> f64 + Sync,
{
    if quadrature_points == 0 {
        return Err(Error::ZeroQuadraturePoints);
    }
    let raw = (0..grid.n_cells)
        .into_par_iter()
        .map(|i| {
            let (a, b) = grid.cell(i);
            cell_integral(&density, a, b, quadrature_points)
        })
        .collect::<Result<Vec<f64>>>()?;
    GriddedDistribution::from_raw(*grid, raw)
}

/// Built-in continuous families, selectable by name in JSON configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Normal {
        mean: f64,
        variance: f64,
    },
    Beta {
        alpha: f64,
        beta: f64,
    },
    Uniform {
        a: f64,
        b: f64,
    },
    /// Law of `exp(Z)` with `Z ~ N(mu, sigma2)`.
    LogNormal {
        mu: f64,
        sigma2: f64,
    },
}

enum Backend {
    Normal(Normal),
    Beta(Beta),
    Uniform(Uniform),
    LogNormal(LogNormal),
}

impl Family {
    fn backend(&self) -> Result<Backend> {
        let bad = |name, value, reason| Error::InvalidParameter { name, value, reason };
        match *self {
            Family::Normal { mean, variance } => {
                if !(variance > 0.0 && variance.is_finite()) {
                    return Err(bad("variance", variance, "must be positive"));
                }
                Normal::new(mean, variance.sqrt())
                    .map(Backend::Normal)
                    .map_err(|_| bad("mean", mean, "must be finite"))
            }
            Family::Beta { alpha, beta } => Beta::new(alpha, beta)
                .map(Backend::Beta)
                .map_err(|_| bad("alpha/beta", alpha.min(beta), "must be positive")),
            Family::Uniform { a, b } => Uniform::new(a, b)
                .map(Backend::Uniform)
                .map_err(|_| bad("a", a, "must be finite and below b")),
            Family::LogNormal { mu, sigma2 } => {
                if !(sigma2 > 0.0 && sigma2.is_finite()) {
                    return Err(bad("sigma2", sigma2, "must be positive"));
                }
                LogNormal::new(mu, sigma2.sqrt())
                    .map(Backend::LogNormal)
                    .map_err(|_| bad("mu", mu, "must be finite"))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.backend().map(|_| ())
    }

    pub fn pdf(&self, v: f64) -> f64 {
        match self.backend() {
            Ok(Backend::Normal(d)) => d.pdf(v),
            Ok(Backend::Beta(d)) => {
                if v <= 0.0 || v >= 1.0 {
                    0.0
                } else {
                    d.pdf(v)
                }
            }
            Ok(Backend::Uniform(d)) => d.pdf(v),
            Ok(Backend::LogNormal(d)) => {
                if v <= 0.0 {
                    0.0
                } else {
                    d.pdf(v)
                }
            }
            Err(_) => f64::NAN,
        }
    }

    pub fn cdf(&self, v: f64) -> f64 {
        match self.backend() {
            Ok(Backend::Normal(d)) => d.cdf(v),
            Ok(Backend::Beta(d)) => d.cdf(v.clamp(0.0, 1.0)),
            Ok(Backend::Uniform(d)) => d.cdf(v),
            Ok(Backend::LogNormal(d)) => {
                if v <= 0.0 {
                    0.0
                } else {
                    d.cdf(v)
                }
            }
            Err(_) => f64::NAN,
        }
    }

    pub fn sf(&self, v: f64) -> f64 {
        match self.backend() {
            Ok(Backend::Normal(d)) => d.sf(v),
            Ok(Backend::Beta(d)) => d.sf(v.clamp(0.0, 1.0)),
            Ok(Backend::Uniform(d)) => d.sf(v),
            Ok(Backend::LogNormal(d)) => {
                if v <= 0.0 {
                    1.0
                } else {
                    d.sf(v)
                }
            }
            Err(_) => f64::NAN,
        }
    }

    /// Probability of `[a, b)`, using whichever tail keeps relative accuracy.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        if self.cdf(a) > 0.5 {
            (self.sf(a) - self.sf(b)).max(0.0)
        } else {
            (self.cdf(b) - self.cdf(a)).max(0.0)
        }
    }
}

/// Cell masses from exact CDF differences.
pub fn discretize_family(family: &Family, grid: &Grid1D) -> Result<GriddedDistribution> {
    family.validate()?;
    let raw: Vec<f64> = (0..grid.n_cells)
        .into_par_iter()
        .map(|i| {
            let (a, b) = grid.cell(i);
            family.interval_mass(a, b)
        })
        .collect();
    GriddedDistribution::from_raw(*grid, raw)
}

/// Half-open interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Merges selected cells into maximal disjoint intervals, in increasing order.
pub fn undiscretize(cells: &[usize], grid: &Grid1D) -> Result<Vec<Interval>> {
    let mut sorted = cells.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if let Some(&bad) = sorted.iter().find(|&&c| c >= grid.n_cells) {
        return Err(Error::IndexOutOfRange {
            field: "cell",
            index: bad,
            len: grid.n_cells,
        });
    }
    let mut out: Vec<Interval> = Vec::new();
    let mut run: Option<(usize, usize)> = None;
    for c in sorted {
        run = match run {
            Some((start, end)) if c == end + 1 => Some((start, c)),
            Some((start, end)) => {
                out.push(Interval {
                    lo: grid.edge(start),
                    hi: grid.edge(end + 1),
                });
                Some((c, c))
            }
            None => Some((c, c)),
        };
    }
    if let Some((start, end)) = run {
        out.push(Interval {
            lo: grid.edge(start),
            hi: grid.edge(end + 1),
        });
    }
    Ok(out)
}

/// Membership mask over the cells of `fine` for a set of cells of `coarse`.
pub fn project_cells(coarse: &Grid1D, cells: &[usize], fine: &Grid1D) -> Result<Vec<bool>> {
    if !coarse.nests(fine) {
        return Err(Error::LadderNotNested);
    }
    let factor = fine.n_cells / coarse.n_cells;
    let mut mask = vec![false; fine.n_cells];
    for &c in cells {
        if c >= coarse.n_cells {
            return Err(Error::IndexOutOfRange {
                field: "cell",
                index: c,
                len: coarse.n_cells,
            });
        }
        mask[c * factor..(c + 1) * factor].iter_mut().for_each(|m| *m = true);
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_grid_examples() {
        let g = build_grid(0.0, 1.0, 4).unwrap();
        assert_eq!(g.midpoints(), vec![0.125, 0.375, 0.625, 0.875]);
        assert_eq!(build_grid(-3.0, 3.0, 6).unwrap().cell_width(), 1.0);
        assert_eq!(build_grid(1.0, 1.0, 3), Err(Error::BadRange { lo: 1.0, hi: 1.0 }));
        assert_eq!(build_grid(0.0, 1.0, 0), Err(Error::ZeroCells));
    }

    #[test]
    fn refine_examples() {
        let g = build_grid(0.0, 1.0, 4).unwrap();
        let r = refine(&g, 2).unwrap();
        assert_eq!(r.n_cells(), 8);
        assert_eq!(r.cell_width(), g.cell_width() / 2.0);
        assert_eq!(refine(&g, 3).unwrap().n_cells(), 12);
        assert!(refine(&g, 1).is_err());
        let r3 = refine(&g, 3).unwrap();
        for j in 0..r3.n_cells() {
            let (a, b) = r3.cell(j);
            let parents: Vec<usize> = (0..4)
                .filter(|&i| {
                    let (pa, pb) = g.cell(i);
                    a >= pa && b <= pb
                })
                .collect();
            assert_eq!(parents, vec![j / 3]);
        }
    }

    #[test]
    fn cells_partition_the_range() {
        let g = build_grid(-2.5, 7.25, 37).unwrap();
        assert_eq!(g.edge(0), g.lo());
        assert_eq!(g.edge(37), g.hi());
        for i in 0..37 {
            let (a, b) = g.cell(i);
            assert!(a < b);
            assert_eq!(b, g.edge(i + 1));
            assert_eq!(g.locate(a), Some(i));
            assert_eq!(g.locate(g.midpoint(i)), Some(i));
        }
        assert_eq!(g.locate(g.hi()), None);
    }

    #[test]
    fn uniform_density_masses() {
        let g = build_grid(0.0, 1.0, 4).unwrap();
        let d = discretize(|_| 1.0, &g, DEFAULT_QUADRATURE_POINTS).unwrap();
        for m in &d.masses {
            assert!((m - 0.25).abs() < 1e-15);
        }
        assert!(d.tail_mass < 1e-12);
    }

    #[test]
    fn density_off_grid_is_all_zero() {
        let g = build_grid(0.0, 1.0, 4).unwrap();
        let f = |t: f64| if (2.0..=3.0).contains(&t) { 1.0 } else { 0.0 };
        assert_eq!(discretize(f, &g, 8), Err(Error::AllZeroMass));
        assert!(matches!(
            discretize(|t| t - 0.5, &g, 8),
            Err(Error::NegativeDensity { .. })
        ));
    }

    #[test]
    fn standard_normal_matches_cdf_differences() {
        let g = build_grid(-6.0, 6.0, 1200).unwrap();
        let fam = Family::Normal {
            mean: 0.0,
            variance: 1.0,
        };
        let quad = discretize(|t| fam.pdf(t), &g, DEFAULT_QUADRATURE_POINTS).unwrap();
        let exact = discretize_family(&fam, &g).unwrap();
        for (a, b) in quad.masses.iter().zip(&exact.masses) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(quad.truncation_ok());
        assert!((quad.tail_mass - 2.0 * fam.cdf(-6.0)).abs() < 1e-9);
    }

    #[test]
    fn refinement_keeps_parent_mass() {
        let g = build_grid(-4.0, 4.0, 64).unwrap();
        let fine = refine(&g, 2).unwrap();
        let f = |t: f64| (-0.5 * t * t).exp();
        let parent = discretize(f, &g, 16).unwrap();
        let child = discretize(f, &fine, 8).unwrap();
        for (i, p) in parent.masses.iter().enumerate() {
            let s = child.masses[2 * i] + child.masses[2 * i + 1];
            assert!((p - s).abs() < 1e-9);
        }
    }

    #[test]
    fn cell_density_converges_to_pointwise_density() {
        let fam = Family::Normal {
            mean: 0.0,
            variance: 1.0,
        };
        let g = build_grid(-6.0, 6.0, 4096).unwrap();
        let d = discretize(|t| fam.pdf(t), &g, DEFAULT_QUADRATURE_POINTS).unwrap();
        let cell = g.locate(0.0).unwrap();
        let est = d.masses[cell] * d.raw_total / g.cell_width();
        assert!(((est - fam.pdf(0.0)) / fam.pdf(0.0)).abs() < 1e-3);
    }

    #[test]
    fn undiscretize_examples() {
        let g = build_grid(0.0, 1.0, 4).unwrap();
        assert_eq!(
            undiscretize(&[0, 1, 3], &g).unwrap(),
            vec![Interval { lo: 0.0, hi: 0.5 }, Interval { lo: 0.75, hi: 1.0 }]
        );
        assert_eq!(
            undiscretize(&[3, 2, 1, 0], &g).unwrap(),
            vec![Interval { lo: 0.0, hi: 1.0 }]
        );
        assert!(undiscretize(&[], &g).unwrap().is_empty());
        assert!(matches!(undiscretize(&[4], &g), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn grid_json_shape() {
        let g: Grid1D = serde_json::from_str(r#"{"lo":0,"hi":1,"n_cells":4}"#).unwrap();
        assert_eq!(g.n_cells(), 4);
        assert!(serde_json::from_str::<Grid1D>(r#"{"lo":1,"hi":0,"n_cells":4}"#).is_err());
        let fam: Family = serde_json::from_str(r#"{"beta":{"alpha":2,"beta":3}}"#).unwrap();
        assert!((fam.cdf(1.0) - 1.0).abs() < 1e-12);
    }
}
