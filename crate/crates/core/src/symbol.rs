//! Measurable symbols on `D = [0,1] x [-pi,pi]` and the measure pseudometric.
//!
//! Symbols are sampled on a midpoint tensor grid with equal node weights. The
//! pseudometric `p_m(f) = inf_E { |E^c|/|D| + ess sup_E |f| }` is attained on
//! sublevel sets `{|f| <= t}`, so on samples it reduces to the same sorted scan
//! used for singular values.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ladder::{validate_grid, validate_window, LadderReport};
use crate::scan::{capped_scan, sort_desc};

type SymbolFn = dyn Fn(f64, f64) -> Complex64 + Send + Sync;

/// Largest fraction of nodes that may be substituted from a neighbor.
pub const MAX_SUBSTITUTED_FRACTION: f64 = 1e-3;

/// A deterministic map `(x, theta) -> k(x, theta)`.
///
/// Non-finite values mark points of a null set; samplers substitute them from
/// neighboring nodes.
#[derive(Clone)]
pub struct SymbolFunction {
    label: String,
    eval: Arc<SymbolFn>,
}

impl fmt::Debug for SymbolFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymbolFunction")
            .field("label", &self.label)
            .finish()
    }
}

impl SymbolFunction {
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(f64, f64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(format!("{c}"), move |_, _| c)
    }

    pub fn zero() -> Self {
        Self::new("0", |_, _| Complex64::new(0.0, 0.0))
    }

    /// Symbol depending only on `theta`.
    pub fn of_theta(
        label: impl Into<String>,
        f: impl Fn(f64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(label, move |_, theta| f(theta))
    }

    /// Symbol depending only on `x`.
    pub fn of_x(
        label: impl Into<String>,
        a: impl Fn(f64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(label, move |x, _| a(x))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn evaluate(&self, x: f64, theta: f64) -> Complex64 {
        (self.eval)(x, theta)
    }

    fn combine(
        &self,
        other: &SymbolFunction,
        label: String,
        op: fn(Complex64, Complex64) -> Complex64,
    ) -> Self {
        let (k, h) = (self.clone(), other.clone());
        Self::new(label, move |x, t| op(k.evaluate(x, t), h.evaluate(x, t)))
    }

    pub fn add(&self, other: &SymbolFunction) -> Self {
        self.combine(
            other,
            format!("({} + {})", self.label, other.label),
            |a, b| a + b,
        )
    }

    pub fn sub(&self, other: &SymbolFunction) -> Self {
        self.combine(
            other,
            format!("({} - {})", self.label, other.label),
            |a, b| a - b,
        )
    }

    pub fn mul(&self, other: &SymbolFunction) -> Self {
        self.combine(
            other,
            format!("({} * {})", self.label, other.label),
            |a, b| a * b,
        )
    }

    pub fn scale(&self, lambda: Complex64) -> Self {
        let k = self.clone();
        Self::new(format!("({lambda} * {})", self.label), move |x, t| {
            lambda * k.evaluate(x, t)
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Midpoint tensor grid on `D`.
///
/// Nodes are `x_i = (2i+1)/(2 N_x)` and `theta_j = pi (2j+1-N_theta)/N_theta`,
/// which makes the theta nodes exactly symmetric under `theta -> -theta`, and
/// the x nodes exactly symmetric under `x -> 1-x` whenever `2 N_x` is a power
/// of two.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolGrid {
    pub nx: usize,
    pub ntheta: usize,
}

impl Default for SymbolGrid {
    fn default() -> Self {
        Self {
            nx: 256,
            ntheta: 256,
        }
    }
}

impl SymbolGrid {
    pub fn new(nx: usize, ntheta: usize) -> Result<Self> {
        let grid = Self { nx, ntheta };
        grid.validate()?;
        Ok(grid)
    }

    fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ntheta == 0 {
            return Err(Error::invalid(format!(
                "symbol grid needs N_x, N_theta >= 1, got {} x {}",
                self.nx, self.ntheta
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ntheta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x_node(&self, i: usize) -> f64 {
        (2 * i + 1) as f64 / (2 * self.nx) as f64
    }

    pub fn theta_node(&self, j: usize) -> f64 {
        ((2 * j + 1) as f64 - self.ntheta as f64) / self.ntheta as f64 * PI
    }

    pub fn refined(&self) -> Self {
        Self {
            nx: 2 * self.nx,
            ntheta: 2 * self.ntheta,
        }
    }
}

/// `|k|` at the nodes of a grid, row-major in `(x, theta)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolSamples {
    pub values: Vec<f64>,
    pub grid: SymbolGrid,
    /// Nodes whose value was taken from a neighbor.
    pub substituted: usize,
}

impl SymbolSamples {
    /// Sample values sorted non-decreasing.
    pub fn sorted_ascending(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_unstable_by(|a, b| a.total_cmp(b));
        v
    }
}

/// Samples `|k|` on the midpoint grid.
pub fn sample_abs(k: &SymbolFunction, grid: SymbolGrid) -> Result<SymbolSamples> {
    grid.validate()?;
    let (nx, nt) = (grid.nx, grid.ntheta);
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..nx {
        let x = grid.x_node(i);
        for j in 0..nt {
            values.push(k.evaluate(x, grid.theta_node(j)).norm());
        }
    }

    let failed: Vec<usize> = (0..values.len())
        .filter(|&idx| !values[idx].is_finite())
        .collect();
    if failed.len() as f64 > MAX_SUBSTITUTED_FRACTION * values.len() as f64 {
        return Err(Error::SampleFailure {
            failed: failed.len(),
            total: values.len(),
        });
    }
    let original = values.clone();
    for &idx in &failed {
        let (i, j) = (idx / nt, idx % nt);
        values[idx] = nearest_finite(&original, grid, i, j).ok_or(Error::SampleFailure {
            failed: failed.len(),
            total: original.len(),
        })?;
    }
    Ok(SymbolSamples {
        values,
        grid,
        substituted: failed.len(),
    })
}

fn nearest_finite(values: &[f64], grid: SymbolGrid, i: usize, j: usize) -> Option<f64> {
    let (nx, nt) = (grid.nx, grid.ntheta);
    let reach = nx.max(nt);
    for d in 1..reach {
        let candidates = [
            (j >= d).then(|| (i, j - d)),
            (j + d < nt).then(|| (i, j + d)),
            (i >= d).then(|| (i - d, j)),
            (i + d < nx).then(|| (i + d, j)),
        ];
        for (ci, cj) in candidates.into_iter().flatten() {
            let v = values[ci * nt + cj];
            if v.is_finite() {
                return Some(v);
            }
        }
    }
    None
}

/// Capped `p_m` of a raw list of non-negative samples.
pub fn p_m_hat_of_values(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("p_m needs at least one sample"));
    }
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid("samples must be finite and non-negative"));
    }
    let mut sorted = values.to_vec();
    sort_desc(&mut sorted);
    Ok(capped_scan(&sorted))
}

/// `p_m_hat(s) = min(1, min_i {(i-1)/N + v_i})` over samples sorted non-increasing.
pub fn p_m_hat(samples: &SymbolSamples) -> Result<f64> {
    p_m_hat_of_values(&samples.values)
}

/// `p_m_hat` of `|k - h|`, sampled jointly at each node.
pub fn d_m_hat(k: &SymbolFunction, h: &SymbolFunction, grid: SymbolGrid) -> Result<f64> {
    p_m_hat(&sample_abs(&k.sub(h), grid)?)
}

/// Fraction of samples `<= t` for each `t` in a non-decreasing grid.
pub fn abs_cdf(samples: &SymbolSamples, t_grid: &[f64]) -> Result<Vec<f64>> {
    cdf_on_grid(&samples.sorted_ascending(), t_grid)
}

/// Empirical CDF of sorted-ascending data on a non-decreasing threshold grid.
pub(crate) fn cdf_on_grid(sorted_ascending: &[f64], t_grid: &[f64]) -> Result<Vec<f64>> {
    if t_grid.is_empty() {
        return Err(Error::invalid("threshold grid is empty"));
    }
    if t_grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::invalid("threshold grid must be non-decreasing"));
    }
    let len = sorted_ascending.len() as f64;
    Ok(t_grid
        .iter()
        .map(|&t| sorted_ascending.partition_point(|&v| v <= t) as f64 / len)
        .collect())
}

/// `d_m_hat(k_m, k)` along the member index `m_grid`.
pub fn converge_in_measure_check(
    members: &[SymbolFunction],
    m_grid: &[usize],
    k: &SymbolFunction,
    grid: SymbolGrid,
    tail_window: usize,
) -> Result<LadderReport> {
    if members.len() < 2 {
        return Err(Error::invalid(
            "convergence check needs at least two members",
        ));
    }
    if members.len() != m_grid.len() {
        return Err(Error::invalid(format!(
            "{} members for {} grid indices",
            members.len(),
            m_grid.len()
        )));
    }
    validate_grid(m_grid, "m grid")?;
    validate_window(tail_window, m_grid.len())?;
    let values = members
        .iter()
        .map(|km| d_m_hat(km, k, grid))
        .collect::<Result<Vec<_>>>()?;
    LadderReport::new(m_grid.to_vec(), values, tail_window)
}

/// Measure-preserving changes of variables on `D`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rearrangement {
    /// `x -> 1 - x`
    ReflectX,
    /// `theta -> -theta`
    ReflectTheta,
}

pub fn rearrange(k: &SymbolFunction, which: Rearrangement) -> SymbolFunction {
    let inner = k.clone();
    match which {
        Rearrangement::ReflectX => {
            SymbolFunction::new(format!("{}(1-x, theta)", k.label()), move |x, t| {
                inner.evaluate(1.0 - x, t)
            })
        }
        Rearrangement::ReflectTheta => {
            SymbolFunction::new(format!("{}(x, -theta)", k.label()), move |x, t| {
                inner.evaluate(x, -t)
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian() -> SymbolFunction {
        SymbolFunction::of_theta("2-2cos", |t| Complex64::new(2.0 - 2.0 * t.cos(), 0.0))
    }

    #[test]
    fn constant_and_zero_samples() {
        let g = SymbolGrid::new(3, 5).unwrap();
        let s = sample_abs(&SymbolFunction::zero(), g).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
        let s = sample_abs(&SymbolFunction::constant(Complex64::new(3.0, -4.0)), g).unwrap();
        assert!(s.values.iter().all(|&v| v == 5.0));
        assert_eq!(s.values.len(), 15);
    }

    #[test]
    fn laplacian_midpoint_samples() {
        let g = SymbolGrid::new(1, 4).unwrap();
        let s = sample_abs(&laplacian(), g).unwrap();
        let expected: Vec<f64> = [-3.0, -1.0, 1.0, 3.0]
            .iter()
            .map(|q| 2.0 - 2.0 * (q * PI / 4.0).cos())
            .collect();
        for (a, b) in s.values.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn p_m_hat_worked_values() {
        assert_eq!(p_m_hat_of_values(&[0.0; 6]).unwrap(), 0.0);
        assert_eq!(p_m_hat_of_values(&[0.5; 6]).unwrap(), 0.5);
        assert_eq!(p_m_hat_of_values(&[3.0, 0.0, 3.0, 0.0]).unwrap(), 0.5);
        assert_eq!(p_m_hat_of_values(&[5.0; 3]).unwrap(), 1.0);
        assert!(p_m_hat_of_values(&[]).is_err());
        assert!(p_m_hat_of_values(&[-1.0]).is_err());
    }

    #[test]
    fn d_m_hat_of_constants() {
        let g = SymbolGrid::new(4, 4).unwrap();
        let k = laplacian();
        assert_eq!(d_m_hat(&k, &k, g).unwrap(), 0.0);
        for (a, b) in [(0.25, 0.0), (2.0, 0.5), (-0.1, 0.2)] {
            let ka = SymbolFunction::constant(Complex64::new(a, 0.0));
            let kb = SymbolFunction::constant(Complex64::new(b, 0.0));
            let d = d_m_hat(&ka, &kb, g).unwrap();
            assert!((d - (a - b).abs().min(1.0)).abs() < 1e-15);
            assert_eq!(d, d_m_hat(&kb, &ka, g).unwrap());
        }
    }

    #[test]
    fn cdf_counts() {
        let s = SymbolSamples {
            values: vec![3.0, 3.0, 0.0, 0.0],
            grid: SymbolGrid::new(2, 2).unwrap(),
            substituted: 0,
        };
        assert_eq!(abs_cdf(&s, &[0.0, 1.0, 3.0]).unwrap(), vec![0.5, 0.5, 1.0]);
        let c = SymbolSamples {
            values: vec![2.0; 4],
            grid: SymbolGrid::new(2, 2).unwrap(),
            substituted: 0,
        };
        assert_eq!(
            abs_cdf(&c, &[1.999, 2.0, 5.0]).unwrap(),
            vec![0.0, 1.0, 1.0]
        );
        assert!(abs_cdf(&c, &[]).is_err());
        assert!(abs_cdf(&c, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn null_set_substitution() {
        // blows up on a single x node
        let g = SymbolGrid::new(2000, 2).unwrap();
        let k = SymbolFunction::new("spike", move |x, _| {
            if x == g.x_node(7) {
                Complex64::new(f64::INFINITY, 0.0)
            } else {
                Complex64::new(x, 0.0)
            }
        });
        let s = sample_abs(&k, g).unwrap();
        assert_eq!(s.substituted, 2);
        assert!(s.values.iter().all(|v| v.is_finite()));

        let bad = SymbolFunction::new("nan", |x, _| {
            if x < 0.01 {
                Complex64::new(f64::NAN, 0.0)
            } else {
                Complex64::new(1.0, 0.0)
            }
        });
        assert!(matches!(
            sample_abs(&bad, g),
            Err(Error::SampleFailure { .. })
        ));
    }

    #[test]
    fn measure_convergence_of_shifts() {
        let k = laplacian();
        let m_grid: Vec<usize> = (1..=6).collect();
        let members: Vec<SymbolFunction> = m_grid
            .iter()
            .map(|&m| {
                k.add(&SymbolFunction::constant(Complex64::new(
                    1.0 / m as f64,
                    0.0,
                )))
            })
            .collect();
        let r =
            converge_in_measure_check(&members, &m_grid, &k, SymbolGrid::new(8, 16).unwrap(), 3)
                .unwrap();
        for (&m, &v) in m_grid.iter().zip(&r.values) {
            assert!(
                (v - (1.0 / m as f64).min(1.0)).abs() < 1e-12,
                "m = {m}: {v}"
            );
        }
        assert!(r.is_tail_non_increasing());

        let same = vec![k.clone(), k.clone()];
        let r = converge_in_measure_check(&same, &[1, 2], &k, SymbolGrid::new(4, 4).unwrap(), 1)
            .unwrap();
        assert_eq!(r.values, vec![0.0, 0.0]);
        assert!(converge_in_measure_check(&same[..1], &[1], &k, SymbolGrid::default(), 1).is_err());
    }

    #[test]
    fn rearrangements() {
        let k = SymbolFunction::of_x("x", |x| Complex64::new(x, 0.0));
        assert_eq!(
            rearrange(&k, Rearrangement::ReflectX)
                .evaluate(0.25, 0.0)
                .re,
            0.75
        );
        let g = SymbolGrid::new(16, 32).unwrap();
        let t_grid: Vec<f64> = (0..50).map(|i| i as f64 * 0.05).collect();
        let skewed = SymbolFunction::new("x^2 + sin(theta)", |x, t| Complex64::new(x * x, t.sin()));
        for which in [Rearrangement::ReflectX, Rearrangement::ReflectTheta] {
            let r = rearrange(&skewed, which);
            let (a, b) = (sample_abs(&skewed, g).unwrap(), sample_abs(&r, g).unwrap());
            assert_eq!(abs_cdf(&a, &t_grid).unwrap(), abs_cdf(&b, &t_grid).unwrap());
            assert_eq!(p_m_hat(&a).unwrap(), p_m_hat(&b).unwrap());
            assert_eq!(a.sorted_ascending(), b.sorted_ascending());
        }
    }
}
