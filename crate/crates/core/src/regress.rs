//! Conjugate normal linear regression with known error variance.
//!
//! Model: `y = X beta + e`, `e ~ N_n(0, sigma2 I)`, prior `beta ~ N_k(0, tau2 I)`.
//! For a linear functional `psi = w' beta` the prior and posterior of `psi`
//! are normal, so the relative belief estimate has a closed form: the
//! posterior mean magnified by `sigma2_psi / (sigma2_psi - sigma2_psi_post)`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::grid::{discretize_family, Family, Grid1D};
use crate::numeric::argmax_with_tie;
use crate::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Smallest accepted ratio of extreme singular values of the design.
pub const RANK_TOL: f64 = 1e-10;

/// Smallest accepted relative gap between prior and posterior variance.
pub const MAGNIFIER_TOL: f64 = 1e-12;

/// Prior standard deviations of `psi` the oracle grid must cover on each side.
pub const GRID_COVERAGE_SD: f64 = 6.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSpec {
    pub design: DMatrix<f64>,
    pub response: DVector<f64>,
    pub sigma2: f64,
    pub tau2: f64,
}

impl RegressionSpec {
    pub fn new(design: DMatrix<f64>, response: DVector<f64>, sigma2: f64, tau2: f64) -> Result<Self> {
        let s = Self {
            design,
            response,
            sigma2,
            tau2,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma2", self.sigma2), ("tau2", self.tau2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "must be positive and finite",
                });
            }
        }
        let (n, k) = self.design.shape();
        if self.response.len() != n {
            return Err(Error::DimensionMismatch {
                field: "response",
                expected: n,
                found: self.response.len(),
            });
        }
        if k == 0 || n < k {
            return Err(Error::RankDeficient { ratio: 0.0 });
        }
        if self.design.iter().chain(self.response.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Parse("design and response must be finite".into()));
        }
        let sv = self.design.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
        if ratio.is_nan() || ratio <= RANK_TOL {
            return Err(Error::RankDeficient { ratio });
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.design.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorGaussian {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// Least-squares estimate `b`.
    pub mle: DVector<f64>,
}

/// Least-squares estimate and the normal posterior of `beta`.
pub fn posterior_params(spec: &RegressionSpec) -> Result<PosteriorGaussian> {
    spec.validate()?;
    let x = &spec.design;
    let xtx = x.transpose() * x;
    let xty = x.transpose() * &spec.response;
    let k = spec.k();
    let rank_err = || Error::RankDeficient { ratio: 0.0 };
    let mle = x
        .clone()
        .svd(true, true)
        .solve(&spec.response, 0.0)
        .map_err(|_| rank_err())?;
    let precision = DMatrix::identity(k, k) / spec.tau2 + &xtx / spec.sigma2;
    let chol = precision.cholesky().ok_or_else(rank_err)?;
    let mean = chol.solve(&(xty / spec.sigma2));
    let covariance = chol.inverse();
    // symmetrize away rounding
    let covariance = (&covariance + covariance.transpose()) * 0.5;
    Ok(PosteriorGaussian { mean, covariance, mle })
}

/// Estimation and prediction summaries for `psi = w' beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub w: Vec<f64>,
    pub psi_map: f64,
    pub psi_rb: f64,
    /// `tau2 w'w`
    pub sigma2_psi: f64,
    /// `w' Sigma_post w`
    pub sigma2_psi_post: f64,
    pub z_map: f64,
    pub z_rb: f64,
    /// `sigma2 + tau2 w'w`
    pub sigma2_z: f64,
    /// `sigma2 + w' Sigma_post w`
    pub sigma2_z_post: f64,
}

pub fn functional_inference(spec: &RegressionSpec, w: &DVector<f64>) -> Result<FunctionalReport> {
    if w.len() != spec.k() {
        return Err(Error::DimensionMismatch {
            field: "w",
            expected: spec.k(),
            found: w.len(),
        });
    }
    let wtw = w.dot(w);
    if wtw == 0.0 || !wtw.is_finite() {
        return Err(Error::ZeroDirection);
    }
    let post = posterior_params(spec)?;
    let psi_map = w.dot(&post.mean);
    let sigma2_psi = spec.tau2 * wtw;
    let sigma2_psi_post = w.dot(&(&post.covariance * w));
    let gap = sigma2_psi - sigma2_psi_post;
    let margin = gap / sigma2_psi;
    if margin.is_nan() || margin < MAGNIFIER_TOL {
        return Err(Error::NearSingularMagnifier { margin });
    }
    let sigma2_z = spec.sigma2 + sigma2_psi;
    let sigma2_z_post = spec.sigma2 + sigma2_psi_post;
    // Both magnifiers share the gap `sigma2_psi - sigma2_psi_post`; dividing
    // by it directly avoids forming `1 - ratio`.
    let psi_rb = psi_map * sigma2_psi / gap;
    let z_rb = psi_map * sigma2_z / gap;
    Ok(FunctionalReport {
        w: w.iter().copied().collect(),
        psi_map,
        psi_rb,
        sigma2_psi,
        sigma2_psi_post,
        z_map: psi_map,
        z_rb,
        sigma2_z,
        sigma2_z_post,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCheck {
    pub closed_form: f64,
    pub grid_argmax: f64,
    pub gap: f64,
    pub cell_width: f64,
}

/// Compares the closed-form `psi_rb` with the argmax of cell-level relative
/// belief on `grid`, using exact normal cell masses for prior and posterior.
pub fn rb_grid_check(spec: &RegressionSpec, w: &DVector<f64>, grid: &Grid1D) -> Result<GridCheck> {
    let f = functional_inference(spec, w)?;
    let reach = GRID_COVERAGE_SD * f.sigma2_psi.sqrt();
    if grid.lo() > -reach || grid.hi() < reach {
        return Err(Error::InvalidParameter {
            name: "grid",
            value: reach,
            reason: "grid must cover six prior standard deviations of psi",
        });
    }
    let prior = discretize_family(
        &Family::Normal {
            mean: 0.0,
            variance: f.sigma2_psi,
        },
        grid,
    )?;
    let posterior = discretize_family(
        &Family::Normal {
            mean: f.psi_map,
            variance: f.sigma2_psi_post,
        },
        grid,
    )?;
    let rb: Vec<f64> = prior
        .masses
        .iter()
        .zip(&posterior.masses)
        .map(|(&p, &q)| if p > 0.0 { q / p } else { f64::NAN })
        .collect();
    let (cell, _) = argmax_with_tie(&rb).ok_or(Error::AllZeroMass)?;
    let grid_argmax = grid.midpoint(cell);
    let gap = (f.psi_rb - grid_argmax).abs();
    let cell_width = grid.cell_width();
    if gap > 2.0 * cell_width {
        return Err(Error::GridTooCoarse { gap, cell_width });
    }
    Ok(GridCheck {
        closed_form: f.psi_rb,
        grid_argmax,
        gap,
        cell_width,
    })
}

/// Reads a plain numeric CSV into a row-major matrix. A first row that does
/// not parse as numbers is treated as a header.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix_csv(&text)
}

pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("row {}: {e}", i + 1))),
        }
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(Error::Parse("empty matrix".into()));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.into_iter().flatten(),
    ))
}

/// A single row or a single column, as a vector.
pub fn as_vector(m: DMatrix<f64>) -> Result<DVector<f64>> {
    if m.ncols() == 1 || m.nrows() == 1 {
        Ok(DVector::from_iterator(m.len(), m.iter().copied()))
    } else {
        Err(Error::Parse(format!(
            "expected a vector, got a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )))
    }
}
