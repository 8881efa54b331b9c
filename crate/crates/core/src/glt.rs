//! GLT building blocks and symbol tracking.
//!
//! Toeplitz sequences `T_n(f) = [f_hat(i-j)]`, diagonal sampling sequences
//! `D_n(a) = diag(a(i/n))` and zero-distributed perturbations are paired with
//! their symbols; sums, products and scalar multiples act on both halves at
//! once.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::sequence::MatrixSequence;
use crate::symbol::SymbolFunction;

/// Components below `FLUSH_FACTOR * eps * mean|f|` are rounding noise and are set to zero.
const FLUSH_FACTOR: f64 = 64.0;

fn cis(angle: f64) -> Complex64 {
    Complex64::new(angle.cos(), angle.sin())
}

fn flush(z: Complex64, threshold: f64) -> Complex64 {
    let keep = |v: f64| if v.abs() < threshold { 0.0 } else { v };
    Complex64::new(keep(z.re), keep(z.im))
}

/// Finitely supported Fourier coefficients `k -> f_hat(k)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<(i64, Complex64)>", from = "Vec<(i64, Complex64)>")]
pub struct FourierData {
    coefficients: BTreeMap<i64, Complex64>,
}

impl From<FourierData> for Vec<(i64, Complex64)> {
    fn from(data: FourierData) -> Self {
        data.coefficients.into_iter().collect()
    }
}

impl From<Vec<(i64, Complex64)>> for FourierData {
    fn from(pairs: Vec<(i64, Complex64)>) -> Self {
        let mut coefficients = BTreeMap::new();
        for (k, c) in pairs {
            *coefficients.entry(k).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        Self { coefficients }
    }
}

impl FourierData {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (i64, Complex64)>) -> Result<Self> {
        let mut coefficients = BTreeMap::new();
        for (k, c) in pairs {
            if !c.is_finite() {
                return Err(Error::invalid(format!("coefficient {k} is not finite")));
            }
            *coefficients.entry(k).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        Ok(Self { coefficients })
    }

    pub fn from_real_pairs(pairs: impl IntoIterator<Item = (i64, f64)>) -> Result<Self> {
        Self::from_pairs(pairs.into_iter().map(|(k, v)| (k, Complex64::new(v, 0.0))))
    }

    pub fn get(&self, k: i64) -> Complex64 {
        self.coefficients.get(&k).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.coefficients.iter().map(|(&k, &c)| (k, c))
    }

    /// Largest `|k|` with a nonzero coefficient.
    pub fn degree(&self) -> usize {
        self.iter()
            .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
            .map(|(k, _)| k.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Coefficients with `|k| <= m`.
    pub fn truncate(&self, m: usize) -> Self {
        Self {
            coefficients: self
                .coefficients
                .iter()
                .filter(|(k, _)| k.unsigned_abs() as usize <= m)
                .map(|(&k, &c)| (k, c))
                .collect(),
        }
    }

    /// Coefficients with `|k| > m`.
    pub fn tail(&self, m: usize) -> Self {
        Self {
            coefficients: self
                .coefficients
                .iter()
                .filter(|(k, _)| k.unsigned_abs() as usize > m)
                .map(|(&k, &c)| (k, c))
                .collect(),
        }
    }

    /// `sum_k |f_hat(k)|`, an upper bound for `sup |f|` and for `||T_n(f)||`.
    pub fn absolute_sum(&self) -> f64 {
        self.iter().map(|(_, c)| c.norm()).sum()
    }

    /// True when `f_hat(-k) = conj(f_hat(k))` within `tol`, i.e. `f` is real.
    pub fn is_conjugate_symmetric(&self, tol: f64) -> bool {
        self.iter()
            .all(|(k, c)| (self.get(-k) - c.conj()).norm() <= tol)
    }

    /// Checks a claim that the generating function is real-valued.
    pub fn assert_real(&self, tol: f64) -> Result<()> {
        if self.is_conjugate_symmetric(tol) {
            Ok(())
        } else {
            Err(Error::invalid("coefficients are not conjugate-symmetric"))
        }
    }

    /// The trigonometric polynomial `sum_k f_hat(k) e^{ik theta}`.
    pub fn evaluate(&self, theta: f64) -> Complex64 {
        self.iter().map(|(k, c)| c * cis(k as f64 * theta)).sum()
    }
}

/// Fourier coefficients of a `2 pi`-periodic function by the rectangle rule on
/// `quadrature` equispaced nodes, for `|k| <= degree`.
///
/// Exact (up to rounding) for trigonometric polynomials of degree `<= degree`.
/// Components at the level of accumulated rounding error are flushed to zero,
/// so real even functions give exactly real coefficients.
pub fn fourier_coefficients(
    f: impl Fn(f64) -> Complex64,
    degree: usize,
    quadrature: usize,
) -> Result<FourierData> {
    if quadrature < 4 * degree + 4 {
        return Err(Error::invalid(format!(
            "quadrature size {quadrature} is below 4K + 4 = {} for K = {degree}",
            4 * degree + 4
        )));
    }
    let q = quadrature as f64;
    let nodes: Vec<f64> = (0..quadrature)
        .map(|j| ((2 * j) as f64 - q) / q * PI)
        .collect();
    let values: Vec<Complex64> = nodes.iter().map(|&t| f(t)).collect();
    if let Some(j) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "function is not finite at theta = {}",
            nodes[j]
        )));
    }
    let mean_abs = values.iter().map(|v| v.norm()).sum::<f64>() / q;
    let threshold = FLUSH_FACTOR * f64::EPSILON * mean_abs;
    let d = degree as i64;
    FourierData::from_pairs((-d..=d).map(|k| {
        let sum: Complex64 = values
            .iter()
            .zip(&nodes)
            .map(|(v, &t)| v * cis(-(k as f64) * t))
            .sum();
        (k, flush(sum / q, threshold))
    }))
}

/// `T_n(f)` with entry `(i, j) = f_hat(i - j)`.
pub fn toeplitz(c: &FourierData, n: usize) -> Result<Matrix> {
    if c.iter()
        .all(|(k, z)| k == 0 || z == Complex64::new(0.0, 0.0))
    {
        return Matrix::from_diagonal(vec![c.get(0); n]);
    }
    let n_i = n as i64;
    let band: Vec<Complex64> = (-(n_i - 1)..n_i).map(|k| c.get(k)).collect();
    Matrix::from_fn(n, |i, j| band[(i as i64 - j as i64 + n_i - 1) as usize])
}

/// `D_n(a) = diag(a(1/n), a(2/n), ..., a(1))`.
pub fn diag_sampling(a: impl Fn(f64) -> Complex64, n: usize) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::invalid("matrix order must be positive"));
    }
    let mut d = Vec::with_capacity(n);
    for i in 0..n {
        let x = (i + 1) as f64 / n as f64;
        let v = a(x);
        if !v.is_finite() {
            return Err(Error::Evaluation { index: i, x });
        }
        d.push(v);
    }
    Matrix::from_diagonal(d)
}

/// Growth profile `r(n)` of a low-rank perturbation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "profile")]
pub enum RankProfile {
    Constant {
        rank: usize,
    },
    /// `floor(sqrt(n))`
    Sqrt,
    /// `floor(ln n)`
    Log,
    /// `ceil(fraction * n)`; vanishing only for a zero fraction.
    Fraction {
        fraction: f64,
    },
}

impl RankProfile {
    pub fn rank(&self, n: usize) -> usize {
        let r = match self {
            RankProfile::Constant { rank } => *rank,
            RankProfile::Sqrt => (n as f64).sqrt().floor() as usize,
            RankProfile::Log => (n as f64).ln().floor() as usize,
            RankProfile::Fraction { fraction } => (fraction * n as f64).ceil() as usize,
        };
        r.min(n)
    }

    fn check_vanishing(&self) -> Result<()> {
        match self {
            RankProfile::Fraction { fraction } if *fraction != 0.0 => Err(Error::invalid(format!(
                "rank profile {fraction} * n does not satisfy r(n)/n -> 0"
            ))),
            _ => Ok(()),
        }
    }
}

/// Decay profile `eps(n)` of a small-norm perturbation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "profile")]
pub enum NormProfile {
    /// `1 / ln n` (with `n` clamped to at least 2)
    InverseLog,
    /// `n^{-exponent}`
    Power {
        exponent: f64,
    },
    Constant {
        value: f64,
    },
}

impl NormProfile {
    pub fn norm(&self, n: usize) -> f64 {
        match self {
            NormProfile::InverseLog => 1.0 / (n.max(2) as f64).ln(),
            NormProfile::Power { exponent } => (n as f64).powf(-exponent),
            NormProfile::Constant { value } => *value,
        }
    }

    fn check_vanishing(&self) -> Result<()> {
        match self {
            NormProfile::Power { exponent } if !(*exponent > 0.0) => Err(Error::invalid(format!(
                "norm profile n^-{exponent} does not vanish"
            ))),
            NormProfile::Constant { value } if *value != 0.0 => Err(Error::invalid(format!(
                "constant norm {value} does not vanish"
            ))),
            _ => Ok(()),
        }
    }
}

/// Zero-distributed perturbations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ZeroKind {
    /// `r(n)` entries of modulus `n` with random signs at distinct rows and
    /// columns: rank exactly `r(n)`, every nonzero singular value equal to `n`.
    LowRank { rank: RankProfile, seed: u64 },
    /// `eps(n)` times a random signed permutation: all singular values `eps(n)`.
    SmallNorm { norm: NormProfile, seed: u64 },
}

fn order_rng(seed: u64, n: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn random_sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.gen::<bool>() {
        1.0
    } else {
        -1.0
    }
}

impl ZeroKind {
    pub fn generate(&self, n: usize) -> Result<Matrix> {
        match self {
            ZeroKind::LowRank { rank, seed } => {
                let r = rank.rank(n);
                let mut rng = order_rng(*seed, n);
                let rows = sample(&mut rng, n, r).into_vec();
                let cols = sample(&mut rng, n, r).into_vec();
                let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
                for (&i, &j) in rows.iter().zip(&cols) {
                    entries[i * n + j] = Complex64::new(random_sign(&mut rng) * n as f64, 0.0);
                }
                Matrix::from_row_major(n, entries)
            }
            ZeroKind::SmallNorm { norm, seed } => {
                let eps = norm.norm(n);
                let mut rng = order_rng(*seed, n);
                let perm = sample(&mut rng, n, n).into_vec();
                let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
                for (i, &j) in perm.iter().enumerate() {
                    entries[i * n + j] = Complex64::new(random_sign(&mut rng) * eps, 0.0);
                }
                Matrix::from_row_major(n, entries)
            }
        }
    }
}

impl fmt::Display for ZeroKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZeroKind::LowRank { rank, .. } => write!(f, "low_rank[{rank:?}]"),
            ZeroKind::SmallNorm { norm, .. } => write!(f, "small_norm[{norm:?}]"),
        }
    }
}

/// How a [`GltPair`] was built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Toeplitz {
        label: String,
        coefficients: FourierData,
    },
    Diag {
        label: String,
    },
    Zero {
        kind: ZeroKind,
    },
    Add(Box<Provenance>, Box<Provenance>),
    Mul(Box<Provenance>, Box<Provenance>),
    Scale {
        lambda: Complex64,
        of: Box<Provenance>,
    },
    Approximant {
        label: String,
        m: usize,
    },
    Sequence {
        label: String,
    },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Toeplitz { label, .. } => write!(f, "T({label})"),
            Provenance::Diag { label } => write!(f, "D({label})"),
            Provenance::Zero { kind } => write!(f, "Z({kind})"),
            Provenance::Add(a, b) => write!(f, "({a} + {b})"),
            Provenance::Mul(a, b) => write!(f, "{a}{b}"),
            Provenance::Scale { lambda, of } => write!(f, "({lambda}){of}"),
            Provenance::Approximant { label, m } => write!(f, "Approx[m={m}]({label})"),
            Provenance::Sequence { label } => write!(f, "{label}"),
        }
    }
}

/// A matrix sequence paired with its symbol.
#[derive(Clone, Debug)]
pub struct GltPair {
    pub sequence: MatrixSequence,
    pub symbol: SymbolFunction,
    pub provenance: Provenance,
}

impl GltPair {
    /// Pairs an arbitrary sequence with a claimed symbol.
    pub fn new(sequence: MatrixSequence, symbol: SymbolFunction) -> Self {
        let provenance = Provenance::Sequence {
            label: sequence.label().to_string(),
        };
        Self {
            sequence,
            symbol,
            provenance,
        }
    }

    pub fn label(&self) -> String {
        self.provenance.to_string()
    }

    /// Same sequence, new symbol; used for rearranged symbols.
    pub fn with_symbol(&self, symbol: SymbolFunction) -> Self {
        Self {
            sequence: self.sequence.clone(),
            symbol,
            provenance: self.provenance.clone(),
        }
    }
}

/// `(T_n(f), f(theta))` for a trigonometric polynomial `f`.
pub fn toeplitz_pair(label: impl Into<String>, c: FourierData) -> GltPair {
    let label = label.into();
    let coeffs = Arc::new(c.clone());
    let for_seq = Arc::clone(&coeffs);
    GltPair {
        sequence: MatrixSequence::new(format!("T({label})"), move |n| toeplitz(&for_seq, n)),
        symbol: SymbolFunction::of_theta(label.clone(), move |t| coeffs.evaluate(t)),
        provenance: Provenance::Toeplitz {
            label,
            coefficients: c,
        },
    }
}

/// `(D_n(a), a(x))`.
pub fn diag_pair(
    label: impl Into<String>,
    a: impl Fn(f64) -> Complex64 + Send + Sync + 'static,
) -> GltPair {
    let label = label.into();
    let a = Arc::new(a);
    let for_seq = Arc::clone(&a);
    GltPair {
        sequence: MatrixSequence::new(format!("D({label})"), move |n| {
            diag_sampling(|x| for_seq(x), n)
        }),
        symbol: SymbolFunction::of_x(label.clone(), move |x| a(x)),
        provenance: Provenance::Diag { label },
    }
}

/// A zero-distributed sequence paired with the zero symbol.
pub fn zero_pair(kind: ZeroKind) -> Result<GltPair> {
    match &kind {
        ZeroKind::LowRank { rank, .. } => rank.check_vanishing()?,
        ZeroKind::SmallNorm { norm, .. } => norm.check_vanishing()?,
    }
    let generator = kind.clone();
    Ok(GltPair {
        sequence: MatrixSequence::new(format!("Z({kind})"), move |n| generator.generate(n)),
        symbol: SymbolFunction::zero(),
        provenance: Provenance::Zero { kind },
    })
}

pub fn pair_add(p: &GltPair, q: &GltPair) -> GltPair {
    GltPair {
        sequence: p.sequence.add(&q.sequence),
        symbol: p.symbol.add(&q.symbol),
        provenance: Provenance::Add(
            Box::new(p.provenance.clone()),
            Box::new(q.provenance.clone()),
        ),
    }
}

pub fn pair_mul(p: &GltPair, q: &GltPair) -> GltPair {
    GltPair {
        sequence: p.sequence.mul(&q.sequence),
        symbol: p.symbol.mul(&q.symbol),
        provenance: Provenance::Mul(
            Box::new(p.provenance.clone()),
            Box::new(q.provenance.clone()),
        ),
    }
}

pub fn pair_scale(lambda: Complex64, p: &GltPair) -> GltPair {
    GltPair {
        sequence: p.sequence.scale(lambda),
        symbol: p.symbol.scale(lambda),
        provenance: Provenance::Scale {
            lambda,
            of: Box::new(p.provenance.clone()),
        },
    }
}

/// Sub-nodes per dyadic cell used when projecting onto step functions.
const APPROXIMANT_X_NODES: usize = 4;
const APPROXIMANT_MIN_THETA_NODES: usize = 64;

/// Separable approximation `sum_{|j| <= m} a_j(x) e^{ij theta}`.
#[derive(Clone, Debug, PartialEq)]
struct StepTrigExpansion {
    m: usize,
    /// `coefficients[j + m][cell]`
    coefficients: Vec<Vec<Complex64>>,
}

impl StepTrigExpansion {
    fn cells(&self) -> usize {
        1 << self.m
    }

    fn cell(&self, x: f64) -> usize {
        let cells = self.cells();
        ((x * cells as f64).floor().max(0.0) as usize).min(cells - 1)
    }

    fn evaluate(&self, x: f64, theta: f64) -> Complex64 {
        let c = self.cell(x);
        let m = self.m as i64;
        (-m..=m)
            .map(|j| self.coefficients[(j + m) as usize][c] * cis(j as f64 * theta))
            .sum()
    }

    /// `sum_j D_n(a_j) T_n(e^{ij theta})`, assembled band by band.
    fn matrix(&self, n: usize) -> Result<Matrix> {
        let m = self.m as i64;
        let row_cells: Vec<usize> = (0..n)
            .map(|r| self.cell((r + 1) as f64 / n as f64))
            .collect();
        let zero = Complex64::new(0.0, 0.0);
        if self.coefficients.iter().flatten().all(|&a| a == zero) {
            return Matrix::zeros(n);
        }
        Matrix::from_fn(n, |r, s| {
            let j = r as i64 - s as i64;
            if j.abs() > m {
                zero
            } else {
                self.coefficients[(j + m) as usize][row_cells[r]]
            }
        })
    }
}

#[allow(clippy::needless_range_loop)]
fn fit_step_trig(k: &SymbolFunction, m: usize) -> Result<StepTrigExpansion> {
    let cells = 1usize << m;
    let theta_nodes = APPROXIMANT_MIN_THETA_NODES.max(4 * m + 4);
    let q = theta_nodes as f64;
    let thetas: Vec<f64> = (0..theta_nodes)
        .map(|t| ((2 * t) as f64 - q) / q * PI)
        .collect();
    let mi = m as i64;
    let mut coefficients = vec![vec![Complex64::new(0.0, 0.0); cells]; 2 * m + 1];
    let mut abs_total = 0.0;
    let samples_per_cell = (APPROXIMANT_X_NODES * theta_nodes) as f64;
    for cell in 0..cells {
        let mut values = Vec::with_capacity(APPROXIMANT_X_NODES * theta_nodes);
        for s in 0..APPROXIMANT_X_NODES {
            let x = (cell as f64 + (2 * s + 1) as f64 / (2 * APPROXIMANT_X_NODES) as f64)
                / cells as f64;
            for &t in &thetas {
                let v = k.evaluate(x, t);
                if !v.is_finite() {
                    return Err(Error::invalid(format!(
                        "symbol '{}' is not finite at ({x}, {t})",
                        k.label()
                    )));
                }
                abs_total += v.norm();
                values.push((v, t));
            }
        }
        for j in -mi..=mi {
            let sum: Complex64 = values.iter().map(|&(v, t)| v * cis(-(j as f64) * t)).sum();
            coefficients[(j + mi) as usize][cell] = sum / samples_per_cell;
        }
    }
    let mean_abs = abs_total / (cells as f64 * samples_per_cell);
    let threshold = FLUSH_FACTOR * f64::EPSILON * mean_abs;
    coefficients
        .iter_mut()
        .flatten()
        .for_each(|a| *a = flush(*a, threshold));
    Ok(StepTrigExpansion { m, coefficients })
}

/// GLT pair whose symbol approximates `k` by `sum_{|j| <= m} a_j(x) e^{ij theta}`
/// with each `a_j` constant on the `2^m` dyadic cells of `[0, 1]`.
///
/// The coefficients are cell and Fourier averages of `k` over a fixed node set,
/// so symbols already of that form are reproduced exactly.
pub fn dense_symbol_approximant(k: &SymbolFunction, m: usize) -> Result<GltPair> {
    if m == 0 {
        return Err(Error::invalid("approximant level m must be >= 1"));
    }
    if m > 24 {
        return Err(Error::invalid(format!("approximant level {m} is too fine")));
    }
    let expansion = Arc::new(fit_step_trig(k, m)?);
    let for_seq = Arc::clone(&expansion);
    let label = k.label().to_string();
    Ok(GltPair {
        sequence: MatrixSequence::new(format!("Approx[m={m}]({label})"), move |n| {
            for_seq.matrix(n)
        }),
        symbol: SymbolFunction::new(format!("{label}_{m}"), move |x, t| expansion.evaluate(x, t)),
        provenance: Provenance::Approximant { label, m },
    })
}

/// The symbol `2 - 2 cos(theta)` as Fourier data.
pub fn laplacian_coefficients() -> FourierData {
    FourierData::from_real_pairs([(-1, -1.0), (0, 2.0), (1, -1.0)]).expect("finite")
}

/// The symbol `e^{i theta}` as Fourier data.
pub fn shift_coefficients() -> FourierData {
    FourierData::from_real_pairs([(1, 1.0)]).expect("finite")
}
