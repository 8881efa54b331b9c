// negated float comparisons reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod glt;
pub mod ladder;
pub mod matrix;
mod scan;
pub mod sequence;
pub mod symbol;
pub mod verify;

pub use error::{Error, Result};
pub use glt::{
    dense_symbol_approximant, diag_pair, diag_sampling, fourier_coefficients, pair_add, pair_mul,
    pair_scale, toeplitz, toeplitz_pair, zero_pair, FourierData, GltPair, NormProfile, Provenance,
    RankProfile, ZeroKind,
};
pub use ladder::LadderReport;
pub use matrix::{numerical_rank, singular_values, spectral_norm, Matrix, SingularSpectrum};
pub use sequence::{
    d_acs_ladder, geometric_rates, is_cauchy, p_hat, rho_ladder, splice_limit, verify_acs_witness,
    AcsFamily, AcsWitness, CauchyCriteria, CauchyReport, MatrixSequence, SpliceResult,
    WitnessBound, WitnessVerdict,
};
pub use symbol::{
    abs_cdf, converge_in_measure_check, d_m_hat, p_m_hat, rearrange, sample_abs, Rearrangement,
    SymbolFunction, SymbolGrid, SymbolSamples,
};
pub use verify::{
    check_rho_equals_pm, check_sigma_distribution, empirical_functional, hat_catalog,
    ks_against_cdf, ks_distance, symbol_functional, threshold_grid, DistributionReport, Hat,
    RhoPmReport,
};
