use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use glt_core::glt::FourierData;
use glt_core::*;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind, FamilySpec, PairSpec};
use crate::expr::{parse_diag, parse_periodic, parse_symbol};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentResult {
    Rho {
        provenance: Provenance,
        ladder: LadderReport,
    },
    Pm {
        provenance: Provenance,
        p_m: f64,
        substituted_nodes: usize,
    },
    Dacs {
        provenance: [Provenance; 2],
        ladder: LadderReport,
    },
    Dm {
        provenance: [Provenance; 2],
        d_m: f64,
    },
    CheckSymbol {
        provenance: Provenance,
        report: DistributionReport,
    },
    CheckRhoPm {
        provenance: Provenance,
        report: RhoPmReport,
    },
    Splice {
        cauchy: CauchyReport,
        thresholds: Vec<(usize, usize)>,
        /// Tail of `d_acs(B_m, A)` per member.
        distances: Vec<f64>,
        bounds: Vec<f64>,
    },
    Density {
        d_m: Vec<f64>,
        cauchy: CauchyReport,
        thresholds: Vec<(usize, usize)>,
        distribution: DistributionReport,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub cached: bool,
    pub wall_time_seconds: f64,
    pub verdict: Option<bool>,
    pub result: ExperimentResult,
}

impl RunReport {
    pub fn hash_matches(&self) -> bool {
        self.config.hash() == self.config_hash
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub no_cache: bool,
}

/// Builds pairs from specs; randomized perturbations take consecutive seeds
/// derived from the config seed in tree order.
struct Builder {
    seed: u64,
    drawn: u64,
}

impl Builder {
    fn next_seed(&mut self) -> u64 {
        self.drawn += 1;
        self.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(self.drawn)
    }

    fn pair(&mut self, spec: &PairSpec) -> Result<GltPair> {
        Ok(match spec {
            PairSpec::Toeplitz {
                symbol,
                degree,
                quadrature,
            } => {
                let f = parse_periodic(symbol)?;
                let q = quadrature.unwrap_or((4 * degree + 4).max(1024));
                toeplitz_pair(symbol.trim(), fourier_coefficients(f, *degree, q)?)
            }
            PairSpec::ToeplitzCoefficients { coefficients } => {
                let data = FourierData::from_pairs(
                    coefficients
                        .iter()
                        .map(|c| (c.k, Complex64::new(c.re, c.im))),
                )?;
                let label = coefficients
                    .iter()
                    .map(|c| format!("{}:{}{:+}i", c.k, c.re, c.im))
                    .collect::<Vec<_>>()
                    .join(",");
                toeplitz_pair(format!("{{{label}}}"), data)
            }
            PairSpec::Diag { function } => diag_pair(function.trim(), parse_diag(function)?),
            PairSpec::LowRank { rank } => zero_pair(ZeroKind::LowRank {
                rank: rank.clone(),
                seed: self.next_seed(),
            })?,
            PairSpec::SmallNorm { norm } => zero_pair(ZeroKind::SmallNorm {
                norm: norm.clone(),
                seed: self.next_seed(),
            })?,
            PairSpec::Add { left, right } => pair_add(&self.pair(left)?, &self.pair(right)?),
            PairSpec::Mul { left, right } => pair_mul(&self.pair(left)?, &self.pair(right)?),
            PairSpec::Scale { re, im, of } => pair_scale(Complex64::new(*re, *im), &self.pair(of)?),
            PairSpec::Approximant { symbol, m } => {
                dense_symbol_approximant(&parse_symbol(symbol)?, *m)?
            }
            PairSpec::Zero => diag_pair("0", |_| Complex64::new(0.0, 0.0)),
        })
    }
}

fn family(spec: &FamilySpec, m_grid: &[usize]) -> Result<AcsFamily> {
    let m_max = *m_grid.last().expect("validated");
    Ok(match spec {
        FamilySpec::Truncation { symbol, quadrature } => {
            let f = parse_periodic(symbol)?;
            let q = quadrature.unwrap_or((4 * m_max + 4).max(1024));
            let full = fourier_coefficients(f, m_max, q)?;
            let label = format!("truncations of {}", symbol.trim());
            AcsFamily::new(label, move |m, n| toeplitz(&full.truncate(m), n))
        }
        FamilySpec::Approximant { symbol } => {
            let k = parse_symbol(symbol)?;
            let members = m_grid
                .iter()
                .map(|&m| Ok((m, dense_symbol_approximant(&k, m)?.sequence)))
                .collect::<Result<Vec<_>>>()?;
            AcsFamily::new(
                format!("approximants of {}", symbol.trim()),
                move |m, n| match members.iter().find(|(mm, _)| *mm == m) {
                    Some((_, seq)) => seq.at(n),
                    None => Err(glt_core::Error::InvalidInput(format!(
                        "level {m} not in m grid"
                    ))),
                },
            )
        }
    })
}

fn grid(config: &ExperimentConfig) -> Result<SymbolGrid> {
    Ok(SymbolGrid::new(
        config.symbol_grid.nx,
        config.symbol_grid.ntheta,
    )?)
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV rows for a result: header first.
pub fn csv_rows(result: &ExperimentResult, config: &ExperimentConfig) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = |cols: &[&str]| rows.push(cols.iter().map(|s| s.to_string()).collect());
    match result {
        ExperimentResult::Rho { ladder, .. } => {
            header(&["n", "p_hat"]);
            ladder_rows(&mut rows, ladder);
        }
        ExperimentResult::Dacs { ladder, .. } => {
            header(&["n", "d_acs"]);
            ladder_rows(&mut rows, ladder);
        }
        ExperimentResult::Pm { p_m, .. } => {
            header(&["nx", "ntheta", "p_m"]);
            rows.push(grid_row(config, *p_m));
        }
        ExperimentResult::Dm { d_m, .. } => {
            header(&["nx", "ntheta", "d_m"]);
            rows.push(grid_row(config, *d_m));
        }
        ExperimentResult::CheckSymbol { report, .. } => {
            header(&["n", "ks", "max_functional_gap"]);
            for ((n, ks), gaps) in report
                .n_grid
                .iter()
                .zip(&report.ks_values)
                .zip(&report.functional_gaps)
            {
                let gap = gaps.iter().copied().fold(0.0, f64::max);
                rows.push(vec![n.to_string(), fmt_num(*ks), fmt_num(gap)]);
            }
        }
        ExperimentResult::CheckRhoPm { report, .. } => {
            header(&["n", "p_hat", "p_m", "gap"]);
            for (n, v) in report.rho.index_grid.iter().zip(&report.rho.values) {
                rows.push(vec![
                    n.to_string(),
                    fmt_num(*v),
                    fmt_num(report.p_m),
                    fmt_num((v - report.p_m).abs()),
                ]);
            }
        }
        ExperimentResult::Splice {
            cauchy,
            thresholds,
            distances,
            bounds,
        } => {
            header(&["m", "threshold", "sup_tail", "d_acs_tail", "bound"]);
            for (j, &(m, threshold)) in thresholds.iter().enumerate() {
                rows.push(vec![
                    m.to_string(),
                    threshold.to_string(),
                    cauchy
                        .sup_tail
                        .get(j)
                        .map(|v| fmt_num(*v))
                        .unwrap_or_default(),
                    fmt_num(distances[j]),
                    fmt_num(bounds[j]),
                ]);
            }
        }
        ExperimentResult::Density {
            d_m,
            cauchy,
            thresholds,
            ..
        } => {
            header(&["m", "d_m", "sup_tail", "threshold"]);
            for (j, &(m, threshold)) in thresholds.iter().enumerate() {
                rows.push(vec![
                    m.to_string(),
                    fmt_num(d_m[j]),
                    cauchy
                        .sup_tail
                        .get(j)
                        .map(|v| fmt_num(*v))
                        .unwrap_or_default(),
                    threshold.to_string(),
                ]);
            }
        }
    }
    rows
}

fn ladder_rows(rows: &mut Vec<Vec<String>>, ladder: &LadderReport) {
    for (n, v) in ladder.index_grid.iter().zip(&ladder.values) {
        rows.push(vec![n.to_string(), fmt_num(*v)]);
    }
}

fn grid_row(config: &ExperimentConfig, v: f64) -> Vec<String> {
    vec![
        config.symbol_grid.nx.to_string(),
        config.symbol_grid.ntheta.to_string(),
        fmt_num(v),
    ]
}

fn write_csv(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_path(config: &ExperimentConfig, kind: ExperimentKind) -> PathBuf {
    config.output.join(format!("{}.csv", kind.name()))
}

/// `p_hat` along the grid; on failure the values computed so far are written
/// to the experiment CSV before the error is returned.
fn streamed_ladder(
    seq: &MatrixSequence,
    config: &ExperimentConfig,
    kind: ExperimentKind,
    column: &str,
) -> Result<LadderReport> {
    let mut values = Vec::with_capacity(config.n_grid.len());
    for &n in &config.n_grid {
        match seq.at(n).and_then(|a| p_hat(&a)) {
            Ok(v) => values.push(v),
            Err(e) => {
                let mut rows = vec![vec!["n".to_string(), column.to_string()]];
                rows.extend(
                    config
                        .n_grid
                        .iter()
                        .zip(&values)
                        .map(|(n, v)| vec![n.to_string(), fmt_num(*v)]),
                );
                write_csv(&csv_path(config, kind), &rows)?;
                return Err(anyhow!(e).context(format!("{} failed at n = {n}", kind.name())));
            }
        }
    }
    Ok(LadderReport::new(
        config.n_grid.clone(),
        values,
        config.window(),
    )?)
}

fn execute(
    config: &ExperimentConfig,
    kind: ExperimentKind,
) -> Result<(ExperimentResult, Option<bool>)> {
    let mut builder = Builder {
        seed: config.seed,
        drawn: 0,
    };
    let tol = config.tolerance;
    let pair = config.pair.as_ref().map(|p| builder.pair(p)).transpose()?;
    let other = config.other.as_ref().map(|p| builder.pair(p)).transpose()?;
    let pair_ref = || pair.as_ref().ok_or_else(|| anyhow!("missing pair"));
    let other_ref = || other.as_ref().ok_or_else(|| anyhow!("missing other"));
    Ok(match kind {
        ExperimentKind::Rho => {
            let p = pair_ref()?;
            let ladder = streamed_ladder(&p.sequence, config, kind, "p_hat")?;
            (
                ExperimentResult::Rho {
                    provenance: p.provenance.clone(),
                    ladder,
                },
                None,
            )
        }
        ExperimentKind::Pm => {
            let p = pair_ref()?;
            let samples = sample_abs(&p.symbol, grid(config)?)?;
            let result = ExperimentResult::Pm {
                provenance: p.provenance.clone(),
                p_m: p_m_hat(&samples)?,
                substituted_nodes: samples.substituted,
            };
            (result, None)
        }
        ExperimentKind::Dacs => {
            let (p, q) = (pair_ref()?, other_ref()?);
            let ladder = streamed_ladder(&p.sequence.sub(&q.sequence), config, kind, "d_acs")?;
            let provenance = [p.provenance.clone(), q.provenance.clone()];
            (ExperimentResult::Dacs { provenance, ladder }, None)
        }
        ExperimentKind::Dm => {
            let (p, q) = (pair_ref()?, other_ref()?);
            let d_m = d_m_hat(&p.symbol, &q.symbol, grid(config)?)?;
            let provenance = [p.provenance.clone(), q.provenance.clone()];
            (ExperimentResult::Dm { provenance, d_m }, None)
        }
        ExperimentKind::CheckSymbol => {
            let p = pair_ref()?;
            let tol = tol.context("tolerance")?;
            let report = check_sigma_distribution(p, &config.n_grid, grid(config)?, tol)?;
            let verdict = Some(report.verdict);
            (
                ExperimentResult::CheckSymbol {
                    provenance: p.provenance.clone(),
                    report,
                },
                verdict,
            )
        }
        ExperimentKind::CheckRhoPm => {
            let p = pair_ref()?;
            let tol = tol.context("tolerance")?;
            let p_m = p_m_hat(&sample_abs(&p.symbol, grid(config)?)?)?;
            let rho = streamed_ladder(&p.sequence, config, kind, "p_hat")?;
            let gap = (rho.tail_estimate - p_m).abs();
            let report = RhoPmReport {
                rho,
                p_m,
                gap,
                tolerance: tol,
                verdict: gap <= tol,
            };
            let verdict = Some(report.verdict);
            (
                ExperimentResult::CheckRhoPm {
                    provenance: p.provenance.clone(),
                    report,
                },
                verdict,
            )
        }
        ExperimentKind::Splice => {
            let fam = family(config.family.as_ref().context("family")?, &config.m_grid)?;
            let cauchy = is_cauchy(
                &fam,
                &config.m_grid,
                &config.n_grid,
                config.window(),
                CauchyCriteria::default(),
            )?;
            let splice = splice_limit(
                &fam,
                &config.m_grid,
                &config.n_grid,
                &geometric_rates(&config.m_grid),
            )?;
            let mut distances = Vec::new();
            let mut bounds = Vec::new();
            for &m in &config.m_grid {
                let d = d_acs_ladder(
                    &fam.member(m),
                    &splice.sequence,
                    &config.n_grid,
                    config.window(),
                )?;
                distances.push(d.tail_estimate);
                bounds.push(4.0 * 2f64.powi(-(m as i32)));
            }
            let within = distances.iter().zip(&bounds).all(|(d, b)| d <= b);
            let verdict = Some(cauchy.verdict && within);
            let result = ExperimentResult::Splice {
                cauchy,
                thresholds: splice.thresholds,
                distances,
                bounds,
            };
            (result, verdict)
        }
        ExperimentKind::Density => {
            let text = config.symbol.as_ref().context("symbol")?;
            let k = parse_symbol(text)?;
            let g = grid(config)?;
            let mut d_m = Vec::new();
            for &m in &config.m_grid {
                d_m.push(d_m_hat(&dense_symbol_approximant(&k, m)?.symbol, &k, g)?);
            }
            let fam = family(
                &FamilySpec::Approximant {
                    symbol: text.clone(),
                },
                &config.m_grid,
            )?;
            let cauchy = is_cauchy(
                &fam,
                &config.m_grid,
                &config.n_grid,
                config.window(),
                CauchyCriteria::default(),
            )?;
            let splice = splice_limit(
                &fam,
                &config.m_grid,
                &config.n_grid,
                &geometric_rates(&config.m_grid),
            )?;
            let limit = GltPair::new(splice.sequence, k);
            let tol = tol.context("tolerance")?;
            let distribution = check_sigma_distribution(&limit, &config.n_grid, g, tol)?;
            let monotone = d_m.windows(2).all(|w| w[1] <= w[0]);
            let verdict = Some(monotone && cauchy.verdict && distribution.verdict);
            let result = ExperimentResult::Density {
                d_m,
                cauchy,
                thresholds: splice.thresholds,
                distribution,
            };
            (result, verdict)
        }
    })
}

fn cache_path(config: &ExperimentConfig, hash: &str) -> PathBuf {
    config.output.join("cache").join(format!("{hash}.json"))
}

fn write_outputs(report: &RunReport) -> Result<()> {
    let out = &report.config.output;
    write_csv(
        &csv_path(&report.config, report.experiment),
        &csv_rows(&report.result, &report.config),
    )?;
    fs::write(
        out.join("report.json"),
        serde_json::to_string_pretty(report)?,
    )
    .with_context(|| format!("cannot write report in {}", out.display()))?;
    Ok(())
}

/// Runs the configured experiment and writes `report.json` and the CSV.
pub fn run(config: ExperimentConfig, options: &RunOptions) -> Result<RunReport> {
    let config = config.resolved();
    config.validate()?;
    let kind = config.kind()?;
    fs::create_dir_all(&config.output)
        .with_context(|| format!("cannot create {}", config.output.display()))?;
    let hash = config.hash();
    let cached_at = cache_path(&config, &hash);

    if !options.no_cache && cached_at.exists() {
        let text = fs::read_to_string(&cached_at)?;
        let mut report: RunReport = serde_json::from_str(&text)
            .with_context(|| format!("corrupt cache entry {}", cached_at.display()))?;
        if report.config_hash != hash || !report.hash_matches() {
            bail!(
                "cache entry {} does not match its config",
                cached_at.display()
            );
        }
        report.cached = true;
        write_outputs(&report)?;
        return Ok(report);
    }

    let start = Instant::now();
    let (result, verdict) = execute(&config, kind)?;
    let report = RunReport {
        version: VERSION.to_string(),
        experiment: kind,
        config: config.clone(),
        config_hash: hash,
        cached: false,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        verdict,
        result,
    };
    write_outputs(&report)?;
    if let Some(dir) = cached_at.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(&cached_at, serde_json::to_string(&report)?)?;
    Ok(report)
}

/// Process exit code for a finished run.
pub fn exit_code(report: &RunReport) -> i32 {
    match report.verdict {
        Some(false) => 2,
        _ => 0,
    }
}
