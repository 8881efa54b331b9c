use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use glt_core::{NormProfile, RankProfile};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// rho ladder of a sequence
    Rho,
    /// p_m of a symbol
    Pm,
    /// d_acs ladder between two sequences
    Dacs,
    /// d_m between two symbols
    Dm,
    /// singular value distribution against the symbol
    CheckSymbol,
    /// rho of the sequence against p_m of the symbol
    CheckRhoPm,
    /// Cauchy check and splice limit of a truncation family
    Splice,
    /// dyadic approximants of a symbol and their spliced limit
    Density,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Rho => "rho",
            ExperimentKind::Pm => "pm",
            ExperimentKind::Dacs => "dacs",
            ExperimentKind::Dm => "dm",
            ExperimentKind::CheckSymbol => "check-symbol",
            ExperimentKind::CheckRhoPm => "check-rho-pm",
            ExperimentKind::Splice => "splice",
            ExperimentKind::Density => "density",
        }
    }

    pub fn default_tolerance(self) -> Option<f64> {
        match self {
            ExperimentKind::CheckSymbol => Some(0.05),
            ExperimentKind::CheckRhoPm => Some(0.02),
            ExperimentKind::Density => Some(0.07),
            _ => None,
        }
    }
}

/// One Fourier coefficient `f_hat(k) = re + i im`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficient {
    pub k: i64,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// How to build a sequence/symbol pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairSpec {
    /// `T_n(f)` for an expression in `theta`; coefficients up to `degree`.
    Toeplitz {
        symbol: String,
        #[serde(default = "default_degree")]
        degree: usize,
        #[serde(default)]
        quadrature: Option<usize>,
    },
    /// `T_n(f)` from an explicit coefficient table.
    ToeplitzCoefficients {
        coefficients: Vec<Coefficient>,
    },
    /// `D_n(a)` for an expression in `x`.
    Diag {
        function: String,
    },
    LowRank {
        rank: RankProfile,
    },
    SmallNorm {
        norm: NormProfile,
    },
    Add {
        left: Box<PairSpec>,
        right: Box<PairSpec>,
    },
    Mul {
        left: Box<PairSpec>,
        right: Box<PairSpec>,
    },
    Scale {
        re: f64,
        #[serde(default)]
        im: f64,
        of: Box<PairSpec>,
    },
    /// Dyadic-step approximant of a symbol at level `m`.
    Approximant {
        symbol: String,
        m: usize,
    },
    /// The zero sequence with the zero symbol.
    Zero,
}

fn default_degree() -> usize {
    16
}

/// A doubly indexed family `B(m, n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    /// `T_n(f_m)` with `f_m` the degree-`m` Fourier truncation of `symbol`.
    Truncation {
        symbol: String,
        #[serde(default)]
        quadrature: Option<usize>,
    },
    /// Dyadic-step approximants of `symbol` at level `m`.
    Approximant { symbol: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ntheta: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nx: 256,
            ntheta: 256,
        }
    }
}

fn default_n_grid() -> Vec<usize> {
    (6..=12).map(|e| 1 << e).collect()
}

fn default_m_grid() -> Vec<usize> {
    (1..=6).collect()
}

const DEFAULT_WINDOW: usize = 3;

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Taken from the command line when absent.
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub pair: Option<PairSpec>,
    /// Second operand for `dacs` and `dm`.
    #[serde(default)]
    pub other: Option<PairSpec>,
    #[serde(default)]
    pub family: Option<FamilySpec>,
    /// Target symbol for `density`.
    #[serde(default)]
    pub symbol: Option<String>,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_m_grid")]
    pub m_grid: Vec<usize>,
    #[serde(default)]
    pub symbol_grid: GridSpec,
    /// Defaults to `min(3, n_grid.len())`.
    #[serde(default)]
    pub tail_window: Option<usize>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default = "default_out")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn strictly_increasing(grid: &[usize]) -> bool {
    !grid.is_empty() && grid.windows(2).all(|w| w[0] < w[1])
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).context("malformed experiment config")
    }

    pub fn kind(&self) -> Result<ExperimentKind> {
        self.experiment.context("experiment kind missing")
    }

    /// Fills defaults that depend on the experiment kind.
    pub fn resolved(mut self) -> Self {
        if self.tail_window.is_none() {
            self.tail_window = Some(DEFAULT_WINDOW.min(self.n_grid.len()));
        }
        if self.tolerance.is_none() {
            self.tolerance = self.experiment.and_then(ExperimentKind::default_tolerance);
        }
        self
    }

    pub fn window(&self) -> usize {
        self.tail_window
            .unwrap_or(DEFAULT_WINDOW.min(self.n_grid.len()))
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        if !strictly_increasing(&self.n_grid) || self.n_grid[0] == 0 {
            bail!("n_grid must be non-empty, positive and strictly increasing");
        }
        if !strictly_increasing(&self.m_grid) || self.m_grid[0] == 0 {
            bail!("m_grid must be non-empty, positive and strictly increasing");
        }
        let window = self.window();
        if window == 0 || window > self.n_grid.len() {
            bail!("tail_window must lie in 1..={}", self.n_grid.len());
        }
        if let Some(tol) = self.tolerance {
            if !(tol > 0.0 && tol.is_finite()) {
                bail!("tolerance must be positive, got {tol}");
            }
        }
        if self.symbol_grid.nx == 0 || self.symbol_grid.ntheta == 0 {
            bail!("symbol grid sizes must be positive");
        }
        let need = |present: bool, what: &str| -> Result<()> {
            if present {
                Ok(())
            } else {
                bail!("experiment '{}' needs '{what}'", kind.name())
            }
        };
        match kind {
            ExperimentKind::Rho
            | ExperimentKind::Pm
            | ExperimentKind::CheckSymbol
            | ExperimentKind::CheckRhoPm => need(self.pair.is_some(), "pair"),
            ExperimentKind::Dacs | ExperimentKind::Dm => {
                need(self.pair.is_some(), "pair")?;
                need(self.other.is_some(), "other")
            }
            ExperimentKind::Splice => {
                need(self.family.is_some(), "family")?;
                if self.m_grid.len() < 3 {
                    bail!("splice needs at least 3 family members");
                }
                Ok(())
            }
            ExperimentKind::Density => {
                need(self.symbol.is_some(), "symbol")?;
                if self.m_grid.len() < 3 {
                    bail!("density needs at least 3 approximant levels");
                }
                Ok(())
            }
        }
    }

    /// Canonical JSON: resolved defaults, sorted keys, no whitespace.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self.clone().resolved()).expect("config serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    /// SHA-256 of [`Self::canonical_json`] in lowercase hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
