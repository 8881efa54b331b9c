//! Numerical witnesses: singular value distribution checks and the `rho = p_m` identity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glt::GltPair;
use crate::ladder::LadderReport;
use crate::matrix::{singular_values, Matrix};
use crate::sequence::rho_ladder;
use crate::symbol::{cdf_on_grid, p_m_hat, sample_abs, SymbolFunction, SymbolGrid};

/// Number of thresholds in the KS grid.
pub const KS_GRID_POINTS: usize = 512;
/// Number of hats in the test-function catalog.
pub const HAT_COUNT: usize = 21;
pub const DEFAULT_KS_TOLERANCE: f64 = 0.05;
pub const DEFAULT_RHO_PM_TOLERANCE: f64 = 0.02;

/// Piecewise linear bump, 1 at `center`, 0 outside `center +- half_width`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hat {
    pub center: f64,
    pub half_width: f64,
}

impl Hat {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        if !center.is_finite() || !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::invalid(format!(
                "hat needs finite center and positive width, got ({center}, {half_width})"
            )));
        }
        Ok(Self { center, half_width })
    }

    pub fn eval(&self, t: f64) -> f64 {
        (1.0 - (t - self.center).abs() / self.half_width).max(0.0)
    }
}

/// `count` hats with equispaced centers on `[0, t_max]`, each as wide as two
/// center spacings so that neighbouring hats overlap and sum to one.
pub fn hat_catalog(t_max: f64, count: usize) -> Result<Vec<Hat>> {
    if count < 2 || !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::invalid(format!(
            "hat catalog needs count >= 2 and t_max > 0, got ({count}, {t_max})"
        )));
    }
    let spacing = t_max / (count - 1) as f64;
    (0..count)
        .map(|j| Hat::new(j as f64 * spacing, spacing))
        .collect()
}

/// `(1/n) sum_i F(sigma_i(A))`.
pub fn empirical_functional(a: &Matrix, f: impl Fn(f64) -> f64) -> Result<f64> {
    let sigma = singular_values(a)?;
    Ok(mean_of(sigma.values(), f))
}

/// Equal-weight average of `F(|k|)` over the midpoint grid.
pub fn symbol_functional(
    k: &SymbolFunction,
    f: impl Fn(f64) -> f64,
    grid: SymbolGrid,
) -> Result<f64> {
    let samples = sample_abs(k, grid)?;
    Ok(mean_of(&samples.sorted_ascending(), f))
}

fn mean_of(values: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    values.iter().map(|&v| f(v)).sum::<f64>() / values.len() as f64
}

/// `count` equispaced thresholds covering `[0, t_max]`.
pub fn threshold_grid(t_max: f64, count: usize) -> Result<Vec<f64>> {
    if count < 2 || !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::invalid(format!(
            "threshold grid needs count >= 2 and t_max > 0, got ({count}, {t_max})"
        )));
    }
    Ok((0..count)
        .map(|j| t_max * j as f64 / (count - 1) as f64)
        .collect())
}

/// Largest gap over `t_grid` between the empirical CDFs of two sample sets.
pub fn ks_distance(a: &[f64], b: &[f64], t_grid: &[f64]) -> Result<f64> {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let fa = cdf_on_grid(&a, t_grid)?;
    let fb = cdf_on_grid(&b, t_grid)?;
    Ok(fa
        .iter()
        .zip(&fb)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Largest gap over `t_grid` between the empirical CDF of `samples` and `cdf`.
pub fn ks_against_cdf(samples: &[f64], t_grid: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let fs = cdf_on_grid(&s, t_grid)?;
    Ok(fs
        .iter()
        .zip(t_grid)
        .map(|(f, &t)| (f - cdf(t)).abs())
        .fold(0.0, f64::max))
}

/// Outcome of comparing singular values of a sequence with a symbol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub n_grid: Vec<usize>,
    pub ks_values: Vec<f64>,
    /// `functional_gaps[j][h]`: gap for hat `h` at `n_grid[j]`.
    pub functional_gaps: Vec<Vec<f64>>,
    pub hats: Vec<Hat>,
    pub t_grid_max: f64,
    pub ks_tolerance: f64,
    pub functional_tolerance: f64,
    /// Last KS value within `ks_tolerance`.
    pub verdict: bool,
    /// Largest hat gap at the last order within `functional_tolerance`.
    pub functional_verdict: bool,
    pub substituted_nodes: usize,
}

impl DistributionReport {
    pub fn tail_ks(&self) -> f64 {
        *self.ks_values.last().expect("non-empty grid")
    }

    pub fn tail_functional_gap(&self) -> f64 {
        self.functional_gaps
            .last()
            .expect("non-empty grid")
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }
}

/// Compares `sigma(A_n)` with `|k|` for each `n`, by KS distance on a
/// [`KS_GRID_POINTS`]-point threshold grid and by the hat-function catalog.
///
/// A hat of half-width `h` has Lipschitz constant `1/h` and support `2h`, so
/// its functional gap is at most twice the KS distance; the functional
/// tolerance is therefore `2 * tol`.
pub fn check_sigma_distribution(
    pair: &GltPair,
    n_grid: &[usize],
    grid: SymbolGrid,
    tol: f64,
) -> Result<DistributionReport> {
    crate::ladder::validate_grid(n_grid, "n grid")?;
    if !(tol > 0.0) {
        return Err(Error::invalid(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let symbol = sample_abs(&pair.symbol, grid)?;
    let symbol_sorted = symbol.sorted_ascending();
    let mut spectra = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let a = pair.sequence.at(n)?;
        let mut s = singular_values(&a)
            .map_err(|e| Error::at_order(n, e))?
            .into_values();
        s.reverse();
        spectra.push(s);
    }
    let sigma_max = spectra
        .iter()
        .filter_map(|s| s.last())
        .copied()
        .fold(0.0, f64::max);
    let symbol_max = symbol_sorted.last().copied().unwrap_or(0.0);
    let t_grid_max = sigma_max.max(symbol_max) + 1.0;
    let t_grid = threshold_grid(t_grid_max, KS_GRID_POINTS)?;
    let hats = hat_catalog(t_grid_max, HAT_COUNT)?;

    let symbol_cdf = cdf_on_grid(&symbol_sorted, &t_grid)?;
    let symbol_functionals: Vec<f64> = hats
        .iter()
        .map(|h| mean_of(&symbol_sorted, |t| h.eval(t)))
        .collect();

    let mut ks_values = Vec::with_capacity(n_grid.len());
    let mut functional_gaps = Vec::with_capacity(n_grid.len());
    for s in &spectra {
        let cdf = cdf_on_grid(s, &t_grid)?;
        ks_values.push(
            cdf.iter()
                .zip(&symbol_cdf)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
        functional_gaps.push(
            hats.iter()
                .zip(&symbol_functionals)
                .map(|(h, sym)| (mean_of(s, |t| h.eval(t)) - sym).abs())
                .collect(),
        );
    }
    let functional_tolerance = 2.0 * tol;
    let mut report = DistributionReport {
        n_grid: n_grid.to_vec(),
        ks_values,
        functional_gaps,
        hats,
        t_grid_max,
        ks_tolerance: tol,
        functional_tolerance,
        verdict: false,
        functional_verdict: false,
        substituted_nodes: symbol.substituted,
    };
    report.verdict = report.tail_ks() <= tol;
    report.functional_verdict = report.tail_functional_gap() <= functional_tolerance;
    Ok(report)
}

/// Sequence side `rho` against symbol side `p_m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoPmReport {
    pub rho: LadderReport,
    pub p_m: f64,
    pub gap: f64,
    pub tolerance: f64,
    pub verdict: bool,
}

pub fn check_rho_equals_pm(
    pair: &GltPair,
    n_grid: &[usize],
    grid: SymbolGrid,
    tol: f64,
    tail_window: usize,
) -> Result<RhoPmReport> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let rho = rho_ladder(&pair.sequence, n_grid, tail_window)?;
    let p_m = p_m_hat(&sample_abs(&pair.symbol, grid)?)?;
    let gap = (rho.tail_estimate - p_m).abs();
    Ok(RhoPmReport {
        rho,
        p_m,
        gap,
        tolerance: tol,
        verdict: gap <= tol,
    })
}
