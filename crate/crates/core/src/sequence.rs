//! The space of matrix sequences with the a.c.s. pseudometric.
//!
//! A [`MatrixSequence`] is a deterministic map `n -> A_n`. The per-matrix
//! quantity `p_hat(A) = min(1, min_i {(i-1)/n + sigma_i(A)})` is evaluated
//! along finite ladders of orders; the limit superior is replaced by the
//! maximum over a trailing window (see [`LadderReport`]).

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ladder::{validate_grid, validate_window, LadderReport};
use crate::matrix::{numerical_rank, singular_values, spectral_norm, Matrix, SingularSpectrum};
use crate::scan::capped_scan;

type SequenceFn = dyn Fn(usize) -> Result<Matrix> + Send + Sync;
type FamilyFn = dyn Fn(usize, usize) -> Result<Matrix> + Send + Sync;
type SplittingFn = dyn Fn(usize, usize) -> Result<(Matrix, Matrix)> + Send + Sync;

/// Deterministic generator `n -> A_n` of square matrices of order `n`.
#[derive(Clone)]
pub struct MatrixSequence {
    label: String,
    generator: Arc<SequenceFn>,
}

impl fmt::Debug for MatrixSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixSequence")
            .field("label", &self.label)
            .finish()
    }
}

impl MatrixSequence {
    pub fn new(
        label: impl Into<String>,
        generator: impl Fn(usize) -> Result<Matrix> + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            generator: Arc::new(generator),
        }
    }

    pub fn zero() -> Self {
        Self::new("0", Matrix::zeros)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Evaluates `A_n`, checking that the generator returned order `n`.
    pub fn at(&self, n: usize) -> Result<Matrix> {
        let a = (self.generator)(n).map_err(|e| Error::at_order(n, e))?;
        if a.n() != n {
            return Err(Error::at_order(
                n,
                Error::invalid(format!(
                    "generator '{}' returned order {}",
                    self.label,
                    a.n()
                )),
            ));
        }
        Ok(a)
    }

    pub fn add(&self, other: &MatrixSequence) -> MatrixSequence {
        let (a, b) = (self.clone(), other.clone());
        Self::new(format!("({} + {})", self.label, other.label), move |n| {
            a.at(n)?.add(&b.at(n)?)
        })
    }

    /// The difference sequence `{A_n - B_n}`.
    pub fn sub(&self, other: &MatrixSequence) -> MatrixSequence {
        let (a, b) = (self.clone(), other.clone());
        Self::new(format!("({} - {})", self.label, other.label), move |n| {
            a.at(n)?.sub(&b.at(n)?)
        })
    }

    pub fn mul(&self, other: &MatrixSequence) -> MatrixSequence {
        let (a, b) = (self.clone(), other.clone());
        Self::new(format!("({} * {})", self.label, other.label), move |n| {
            a.at(n)?.matmul(&b.at(n)?)
        })
    }

    pub fn scale(&self, lambda: Complex64) -> MatrixSequence {
        let a = self.clone();
        Self::new(format!("({lambda} * {})", self.label), move |n| {
            Ok(a.at(n)?.scale(lambda))
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Doubly indexed generator `(m, n) -> B_{n,m}`.
#[derive(Clone)]
pub struct AcsFamily {
    label: String,
    generator: Arc<FamilyFn>,
}

impl fmt::Debug for AcsFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AcsFamily")
            .field("label", &self.label)
            .finish()
    }
}

impl AcsFamily {
    pub fn new(
        label: impl Into<String>,
        generator: impl Fn(usize, usize) -> Result<Matrix> + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            generator: Arc::new(generator),
        }
    }

    /// Family whose every member is the same sequence.
    pub fn constant(sequence: MatrixSequence) -> Self {
        let label = format!("const[{}]", sequence.label());
        Self::new(label, move |_, n| sequence.at(n))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn at(&self, m: usize, n: usize) -> Result<Matrix> {
        let b = (self.generator)(m, n).map_err(|e| Error::at_order(n, e))?;
        if b.n() != n {
            return Err(Error::at_order(
                n,
                Error::invalid(format!(
                    "family '{}' returned order {} for m = {m}",
                    self.label,
                    b.n()
                )),
            ));
        }
        Ok(b)
    }

    /// The member sequence `{B_{n,m}}_n` for fixed `m`.
    pub fn member(&self, m: usize) -> MatrixSequence {
        let family = self.clone();
        MatrixSequence::new(format!("{}[m={m}]", self.label), move |n| family.at(m, n))
    }
}

/// Capped `p_hat` of a precomputed spectrum.
pub fn p_hat_of_spectrum(spectrum: &SingularSpectrum) -> f64 {
    capped_scan(spectrum.values())
}

/// `p_hat(A) = min(1, min_i {(i-1)/n + sigma_i(A)})`, always in `[0, 1]`.
pub fn p_hat(a: &Matrix) -> Result<f64> {
    Ok(p_hat_of_spectrum(&singular_values(a)?))
}

/// `p_hat(A_n)` along `n_grid`; the tail estimate stands in for `rho`.
pub fn rho_ladder(
    a: &MatrixSequence,
    n_grid: &[usize],
    tail_window: usize,
) -> Result<LadderReport> {
    validate_grid(n_grid, "n grid")?;
    validate_window(tail_window, n_grid.len())?;
    let values = n_grid
        .iter()
        .map(|&n| {
            a.at(n)
                .and_then(|m| p_hat(&m))
                .map_err(|e| Error::at_order(n, e))
        })
        .collect::<Result<Vec<_>>>()?;
    LadderReport::new(n_grid.to_vec(), values, tail_window)
}

/// `rho_ladder` of `{A_n - B_n}`; exactly symmetric in its arguments.
pub fn d_acs_ladder(
    a: &MatrixSequence,
    b: &MatrixSequence,
    n_grid: &[usize],
    tail_window: usize,
) -> Result<LadderReport> {
    rho_ladder(&a.sub(b), n_grid, tail_window)
}

/// Thresholds for declaring a family Cauchy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyCriteria {
    /// Slack added to `2^{-min(m_s, m_t)}` when checking the normalized modulus.
    pub slack: f64,
    /// The modulus sup at the last pair must fall below this.
    pub final_threshold: f64,
}

impl Default for CauchyCriteria {
    fn default() -> Self {
        Self {
            slack: 0.05,
            final_threshold: 0.05,
        }
    }
}

/// Absolute tolerance when checking that the modulus sups do not increase.
const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyReport {
    pub verdict: bool,
    pub m_grid: Vec<usize>,
    /// `modulus[s][t]`: tail estimate of the a.c.s. distance between members `s` and `t`.
    pub modulus: Vec<Vec<f64>>,
    /// `sup_{t > s} modulus[s][t]` for each `s` except the last.
    pub sup_tail: Vec<f64>,
    pub monotone: bool,
    pub normalized: bool,
    pub criteria: CauchyCriteria,
}

/// Estimates the Cauchy modulus of a family over `m_grid` and renders a verdict.
///
/// The verdict holds when the sups `sup_{t>s} modulus[s][t]` are non-increasing
/// in `s`, the last one is below `criteria.final_threshold`, and every entry
/// satisfies `modulus[s][t] <= 2^{-min(m_s, m_t)} + criteria.slack`.
pub fn is_cauchy(
    family: &AcsFamily,
    m_grid: &[usize],
    n_grid: &[usize],
    tail_window: usize,
    criteria: CauchyCriteria,
) -> Result<CauchyReport> {
    validate_grid(m_grid, "m grid")?;
    if m_grid.len() < 3 {
        return Err(Error::invalid("is_cauchy needs at least 3 family members"));
    }
    validate_grid(n_grid, "n grid")?;
    validate_window(tail_window, n_grid.len())?;

    let len = m_grid.len();
    // per-pair ladders, filled one order at a time so each member is generated once per n
    let mut ladders = vec![vec![Vec::with_capacity(n_grid.len()); len]; len];
    for &n in n_grid {
        let members = m_grid
            .iter()
            .map(|&m| family.at(m, n))
            .collect::<Result<Vec<_>>>()?;
        for s in 0..len {
            for t in s + 1..len {
                let p = p_hat(&members[s].sub(&members[t])?).map_err(|e| Error::at_order(n, e))?;
                ladders[s][t].push(p);
            }
        }
    }

    let mut modulus = vec![vec![0.0; len]; len];
    for s in 0..len {
        for t in s + 1..len {
            let report = LadderReport::new(
                n_grid.to_vec(),
                std::mem::take(&mut ladders[s][t]),
                tail_window,
            )?;
            modulus[s][t] = report.tail_estimate;
            modulus[t][s] = report.tail_estimate;
        }
    }

    let sup_tail: Vec<f64> = (0..len - 1)
        .map(|s| modulus[s][s + 1..].iter().copied().fold(0.0, f64::max))
        .collect();
    let monotone = sup_tail.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK);
    let normalized = (0..len).all(|s| {
        (s + 1..len).all(|t| {
            let exponent = m_grid[s].min(m_grid[t]) as i32;
            modulus[s][t] <= 2f64.powi(-exponent) + criteria.slack
        })
    });
    let last = *sup_tail.last().expect("at least two sups");
    let verdict = monotone && normalized && last <= criteria.final_threshold;

    Ok(CauchyReport {
        verdict,
        m_grid: m_grid.to_vec(),
        modulus,
        sup_tail,
        monotone,
        normalized,
        criteria,
    })
}

/// The default per-member target rates `2^{-m}`.
pub fn geometric_rates(m_grid: &[usize]) -> Vec<f64> {
    m_grid.iter().map(|&m| 2f64.powi(-(m as i32))).collect()
}

/// Output of [`splice_limit`].
#[derive(Clone, Debug)]
pub struct SpliceResult {
    pub sequence: MatrixSequence,
    /// `(m, N_m)` pairs; `N_m` is non-decreasing along the m grid.
    pub thresholds: Vec<(usize, usize)>,
}

/// Builds the spliced limit `A_n = B_{n,m}` for `N_m <= n < N_{m+1}`.
///
/// `N_m` is the smallest probed order from which
/// `p_hat(B_{n,m} - B_{n,m'}) <= 2 * target_rates[m]` holds through the end of
/// the probe grid, where `m'` is the next member of `m_grid`; thresholds are
/// then made non-decreasing. The last member inherits the previous threshold.
/// Orders below the first threshold use the first member.
///
/// The family is expected to pass [`is_cauchy`] on the same grids.
pub fn splice_limit(
    family: &AcsFamily,
    m_grid: &[usize],
    probe_grid: &[usize],
    target_rates: &[f64],
) -> Result<SpliceResult> {
    validate_grid(m_grid, "m grid")?;
    validate_grid(probe_grid, "probe grid")?;
    if target_rates.len() != m_grid.len() {
        return Err(Error::invalid(format!(
            "{} target rates for {} family members",
            target_rates.len(),
            m_grid.len()
        )));
    }
    if target_rates.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::invalid("target rates must be non-negative"));
    }

    let mut thresholds: Vec<usize> = Vec::with_capacity(m_grid.len());
    for j in 0..m_grid.len() - 1 {
        let bound = 2.0 * target_rates[j];
        let mut values = Vec::with_capacity(probe_grid.len());
        for &n in probe_grid {
            let diff = family
                .at(m_grid[j], n)?
                .sub(&family.at(m_grid[j + 1], n)?)?;
            values.push(p_hat(&diff).map_err(|e| Error::at_order(n, e))?);
        }
        // first index of the trailing run that satisfies the bound
        let run_start = values.iter().rposition(|&p| p > bound).map_or(0, |k| k + 1);
        if run_start == probe_grid.len() {
            return Err(Error::NotVerifiablyCauchy { m: m_grid[j] });
        }
        let found = probe_grid[run_start];
        let previous = thresholds.last().copied().unwrap_or(found);
        thresholds.push(found.max(previous));
    }
    let last = thresholds.last().copied().unwrap_or(probe_grid[0]);
    thresholds.push(last);

    let pairs: Vec<(usize, usize)> = m_grid
        .iter()
        .copied()
        .zip(thresholds.iter().copied())
        .collect();
    let blocks = pairs.clone();
    let source = family.clone();
    let sequence = MatrixSequence::new(format!("splice[{}]", family.label()), move |n| {
        let m = blocks
            .iter()
            .rev()
            .find(|&&(_, threshold)| threshold <= n)
            .map_or(blocks[0].0, |&(m, _)| m);
        source.at(m, n)
    });
    Ok(SpliceResult {
        sequence,
        thresholds: pairs,
    })
}

/// Bounds of an a.c.s. witness for one `m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessBound {
    /// The splitting is checked for probed `n > n_threshold`.
    pub n_threshold: usize,
    pub omega: f64,
    pub c: f64,
}

/// A claimed a.c.s. splitting `A_n = B_{n,m} + N_{n,m} + R_{n,m}`.
#[derive(Clone)]
pub struct AcsWitness {
    bounds: BTreeMap<usize, WitnessBound>,
    splitting: Arc<SplittingFn>,
}

impl fmt::Debug for AcsWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AcsWitness")
            .field("bounds", &self.bounds)
            .finish()
    }
}

impl AcsWitness {
    /// `splitting(m, n)` returns `(N_{n,m}, R_{n,m})`.
    pub fn new(
        bounds: BTreeMap<usize, WitnessBound>,
        splitting: impl Fn(usize, usize) -> Result<(Matrix, Matrix)> + Send + Sync + 'static,
    ) -> Self {
        Self {
            bounds,
            splitting: Arc::new(splitting),
        }
    }

    pub fn bounds(&self) -> &BTreeMap<usize, WitnessBound> {
        &self.bounds
    }
}

/// Entrywise tolerance for the identity `A = B + N + R`.
pub const SPLITTING_TOLERANCE: f64 = 1e-10;
/// Relative tolerance used to count the rank of `R`.
pub const WITNESS_RANK_TOLERANCE: f64 = 1e-10;
const NORM_RELATIVE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ViolationKind {
    Splitting { residual: f64 },
    Norm { norm: f64, omega: f64 },
    Rank { rank: usize, allowed: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub n: usize,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessVerdict {
    pub m: usize,
    pub holds: bool,
    pub first_violation: Option<Violation>,
}

/// Checks an a.c.s. witness on every probed `(m, n)` with `n > n_m`.
pub fn verify_acs_witness(
    a: &MatrixSequence,
    family: &AcsFamily,
    witness: &AcsWitness,
    m_grid: &[usize],
    n_grid: &[usize],
) -> Result<Vec<WitnessVerdict>> {
    validate_grid(m_grid, "m grid")?;
    validate_grid(n_grid, "n grid")?;
    let bounds = m_grid
        .iter()
        .map(|m| {
            witness
                .bounds
                .get(m)
                .copied()
                .ok_or_else(|| Error::invalid(format!("witness has no bounds for m = {m}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if bounds.iter().any(|b| !(b.omega >= 0.0) || !(b.c >= 0.0)) {
        return Err(Error::invalid("witness bounds must be non-negative"));
    }
    if bounds
        .windows(2)
        .any(|w| w[1].omega > w[0].omega || w[1].c > w[0].c)
    {
        return Err(Error::invalid("witness bounds must be non-increasing in m"));
    }

    let mut verdicts = Vec::with_capacity(m_grid.len());
    for (&m, bound) in m_grid.iter().zip(&bounds) {
        let mut first_violation = None;
        for &n in n_grid.iter().filter(|&&n| n > bound.n_threshold) {
            let an = a.at(n)?;
            let bn = family.at(m, n)?;
            let (small_norm, small_rank) = (witness.splitting)(m, n)?;
            if small_norm.n() != n || small_rank.n() != n {
                return Err(Error::invalid(format!(
                    "witness splitting at (m = {m}, n = {n}) has orders ({}, {})",
                    small_norm.n(),
                    small_rank.n()
                )));
            }
            let rebuilt = bn.add(&small_norm)?.add(&small_rank)?;
            let residual = an.max_abs_diff(&rebuilt)?;
            let kind = if !(residual <= SPLITTING_TOLERANCE) {
                Some(ViolationKind::Splitting { residual })
            } else {
                let norm = spectral_norm(&small_norm)?;
                if norm > bound.omega * (1.0 + NORM_RELATIVE_SLACK) {
                    Some(ViolationKind::Norm {
                        norm,
                        omega: bound.omega,
                    })
                } else {
                    let rank = numerical_rank(&small_rank, WITNESS_RANK_TOLERANCE)?;
                    let allowed = n as f64 * bound.c;
                    (rank as f64 > allowed).then_some(ViolationKind::Rank { rank, allowed })
                }
            };
            if let Some(kind) = kind {
                first_violation = Some(Violation { n, kind });
                break;
            }
        }
        verdicts.push(WitnessVerdict {
            m,
            holds: first_violation.is_none(),
            first_violation,
        });
    }
    Ok(verdicts)
}
