//! Runs driven by a [`RunConfig`] and their CSV output.
//!
//! Every file is written with plain `,` separators, `.` decimals and ten
//! significant digits, so repeated runs produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{ConfigError, Perturbation, RunConfig, ValidationPoint};
use crate::engine::output_distribution;
use crate::error::Error;
use crate::optimize::{sweep, OptimizationResult};
use crate::oracle::{compare_bins, simulate_matrix, BinAgreement};
use crate::photon_stats::{herald_convolve, PairSourceModel};
use crate::reference::{
    reproduce_all_combined, reproduce_all_standalone, CombinedReproduction,
    StandaloneReproduction,
};
use crate::transmission::{build_matrix, MultiplexerLayout, PriorityLogic};

/// Largest accepted |z| between analytic and simulated probabilities.
pub const Z_THRESHOLD: f64 = 4.0;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Bracket(Error),
    #[error(
        "validation disagreement at M = {m}, N = {n}, lambda = {lambda}, logic = {logic}, bin i {}{bin}: z = {z:.2}",
        if *pooled { ">= " } else { "= " }
    )]
    Disagreement {
        m: usize,
        n: usize,
        lambda: f64,
        logic: PriorityLogic,
        bin: usize,
        pooled: bool,
        z: f64,
    },
    #[error(transparent)]
    Model(Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Bracket { .. } => RunError::Bracket(e),
            other => RunError::Model(other),
        }
    }
}

impl RunError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Bracket(_) => 3,
            RunError::Disagreement { .. } => 4,
            RunError::Model(_) | RunError::Io { .. } => 1,
        }
    }
}

/// Ten significant digits, positional notation where reasonable.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..=12).contains(&exp) {
        let decimals = (9 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // rounding may have carried into an extra digit (9.9999999999 -> 10.00000000)
        if s.trim_start_matches('-').replace('.', "").trim_start_matches('0').len() > 10
            && decimals > 0
        {
            let decimals = decimals - 1;
            return format!("{x:.decimals$}");
        }
        s
    } else {
        format!("{x:.9e}")
    }
}

type Row = Vec<String>;

/// Serializes a header and rows as CSV.
pub fn to_csv(header: &[&str], rows: &[Row]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for r in rows {
        w.write_record(r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8 fields")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, RunError> {
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| RunError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub results: Vec<OptimizationResult>,
    pub files: Vec<PathBuf>,
}

/// Sweeps every configured logic and writes `surface.csv`, `global.csv` and
/// one `p1_vs_N_M<m>.csv` per arm count.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepReport, RunError> {
    let results = cfg
        .logics
        .iter()
        .map(|&logic| sweep(&cfg.sweep_spec(logic)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut files = Vec::new();
    let dir = &cfg.output_dir;

    let surface: Vec<Row> = results
        .iter()
        .flat_map(|r| {
            r.surface.iter().map(move |p| {
                vec![
                    p.m.to_string(),
                    p.n.to_string(),
                    fmt_num(p.lambda_opt),
                    fmt_num(p.p1),
                    r.logic.to_string(),
                ]
            })
        })
        .collect();
    let csv = to_csv(&["M", "N", "lambda_opt", "p1", "logic"], &surface);
    files.push(write_file(dir, "surface.csv", &csv)?);

    let global: Vec<Row> = results
        .iter()
        .map(|r| {
            let g = r.global;
            vec![
                r.logic.to_string(),
                g.m.to_string(),
                g.n.to_string(),
                fmt_num(g.lambda_opt),
                fmt_num(g.p1),
            ]
        })
        .collect();
    let csv = to_csv(&["logic", "M", "N", "lambda_opt", "p1"], &global);
    files.push(write_file(dir, "global.csv", &csv)?);

    let mut header = vec!["N".to_string()];
    for r in &results {
        header.push(format!("p1_{}", r.logic));
        header.push(format!("lambda_opt_{}", r.logic));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    for &m in &cfg.m_values {
        let rows: Vec<Row> = cfg
            .n_values
            .iter()
            .map(|&n| {
                let mut row = vec![n.to_string()];
                for r in &results {
                    let p = r.get(m, n).expect("surface covers the configured grid");
                    row.push(fmt_num(p.p1));
                    row.push(fmt_num(p.lambda_opt));
                }
                row
            })
            .collect();
        files.push(write_file(dir, &format!("p1_vs_N_M{m}.csv"), &to_csv(&header, &rows))?);
    }

    Ok(SweepReport { results, files })
}

/// One compared photon-number bin of one validation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinComparison {
    pub point: ValidationPoint,
    pub logic: PriorityLogic,
    pub stat: BinAgreement,
}

/// Compares the analytic distribution (optionally with one perturbed matrix
/// entry) against the simulation of the unperturbed layout.
pub fn compare_point(
    cfg: &RunConfig,
    point: ValidationPoint,
    logic: PriorityLogic,
    trials: u64,
    seed: u64,
    perturb: Option<Perturbation>,
) -> Result<Vec<BinComparison>, RunError> {
    let layout = MultiplexerLayout::new(point.m, point.n, logic)?;
    let model = PairSourceModel::new(cfg.source, point.lambda, point.n)?;
    let tm = build_matrix(&cfg.params, &layout)?;

    let analytic_tm = match perturb {
        Some(p) => {
            if p.arm >= point.m || p.window >= point.n {
                return Err(ConfigError {
                    line: None,
                    message: format!(
                        "perturbed cell ({}, {}) lies outside the {}x{} layout",
                        p.arm, p.window, point.m, point.n
                    ),
                }
                .into());
            }
            let v = (tm.get(p.arm, p.window) + p.delta).clamp(0.0, 1.0);
            tm.with_entry(p.arm, p.window, v)?
        }
        None => tm.clone(),
    };

    let empirical = simulate_matrix(&model, cfg.params.v_d, tm, &layout, trials, seed)?;
    let input = herald_convolve(&model, cfg.params.v_d, None)?;
    let i_max = input.j_max().max(empirical.max_observed()).max(1);
    let analytic = output_distribution(&input, &analytic_tm, &layout, i_max)?;

    Ok(compare_bins(&analytic, &empirical)
        .into_iter()
        .map(|stat| BinComparison { point, logic, stat })
        .collect())
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub comparisons: Vec<BinComparison>,
    pub file: PathBuf,
}

impl ValidationReport {
    pub fn worst(&self) -> Option<&BinComparison> {
        self.comparisons
            .iter()
            .max_by(|a, b| a.stat.z.abs().total_cmp(&b.stat.z.abs()))
    }
}

/// Runs every configured validation point under every configured logic and
/// writes `validate.csv`. The file is written before a disagreement is
/// reported.
pub fn run_validate(cfg: &RunConfig) -> Result<ValidationReport, RunError> {
    let v = cfg.validate.as_ref().ok_or_else(|| ConfigError {
        line: None,
        message: "missing [validate] section".into(),
    })?;
    if v.points.is_empty() {
        return Err(ConfigError {
            line: None,
            message: "[validate] lists no points".into(),
        }
        .into());
    }

    let mut comparisons = Vec::new();
    let mut run = 0u64;
    for &point in &v.points {
        for &logic in &cfg.logics {
            let seed = v.seed.wrapping_add(run.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            run += 1;
            comparisons.extend(compare_point(cfg, point, logic, v.trials, seed, v.perturb)?);
        }
    }

    let rows: Vec<Row> = comparisons
        .iter()
        .map(|c| {
            let b = &c.stat;
            let bin = if b.pooled {
                format!(">={}", b.bin)
            } else {
                b.bin.to_string()
            };
            vec![
                c.point.m.to_string(),
                c.point.n.to_string(),
                fmt_num(c.point.lambda),
                c.logic.to_string(),
                bin,
                fmt_num(b.analytic),
                fmt_num(b.empirical),
                fmt_num(b.std_error),
                fmt_num(b.z),
            ]
        })
        .collect();
    let header = [
        "M", "N", "lambda", "logic", "i", "analytic", "empirical", "std_error", "z",
    ];
    let file = write_file(&cfg.output_dir, "validate.csv", &to_csv(&header, &rows))?;
    let report = ValidationReport { comparisons, file };

    if let Some(w) = report.worst().filter(|w| w.stat.z.abs() > Z_THRESHOLD) {
        return Err(RunError::Disagreement {
            m: w.point.m,
            n: w.point.n,
            lambda: w.point.lambda,
            logic: w.logic,
            bin: w.stat.bin,
            pooled: w.stat.pooled,
            z: w.stat.z,
        });
    }
    Ok(report)
}

pub fn standalone_csv(rows: &[StandaloneReproduction]) -> String {
    let header = [
        "row", "v_r", "v_t", "v_p", "v_p0_s", "ref_p_time", "p_time", "ref_n_time", "n_time",
        "lambda_time", "ref_p_spatial", "p_spatial", "ref_m_spatial", "m_spatial",
        "lambda_spatial", "pass",
    ];
    let rows: Vec<Row> = rows
        .iter()
        .map(|r| {
            let f = &r.reference;
            vec![
                f.row.to_string(),
                fmt_num(f.v_r),
                fmt_num(f.v_t),
                fmt_num(f.v_p),
                fmt_num(f.v_p0_s),
                fmt_num(f.p_time),
                fmt_num(r.time.p1),
                f.n_time.to_string(),
                r.time.n.to_string(),
                fmt_num(r.time.lambda_opt),
                fmt_num(f.p_spatial),
                fmt_num(r.spatial.p1),
                f.m_spatial.to_string(),
                r.spatial.m.to_string(),
                fmt_num(r.spatial.lambda_opt),
                r.pass().to_string(),
            ]
        })
        .collect();
    to_csv(&header, &rows)
}

pub fn combined_csv(rows: &[CombinedReproduction]) -> String {
    let header = [
        "row", "v_t", "v_r", "v_p", "v_t_s", "v_r_s", "v_p0_s", "ref_p_standalone", "p_time",
        "p_spatial", "ref_n_time", "n_time", "ref_m_spatial", "m_spatial", "ref_p_combined",
        "p_combined", "ref_m_combined", "m_combined", "ref_n_combined", "n_combined",
        "lambda_combined", "product_regular", "pass",
    ];
    let rows: Vec<Row> = rows
        .iter()
        .map(|r| {
            let f = &r.reference;
            let g = r.combined_optimum();
            vec![
                f.row.to_string(),
                fmt_num(f.v_t),
                fmt_num(f.v_r),
                fmt_num(f.v_p),
                fmt_num(f.v_t_s),
                fmt_num(f.v_r_s),
                fmt_num(f.v_p0_s),
                fmt_num(f.p_standalone),
                fmt_num(r.time.p1),
                fmt_num(r.spatial.p1),
                f.n_time.to_string(),
                r.time.n.to_string(),
                f.m_spatial.to_string(),
                r.spatial.m.to_string(),
                fmt_num(f.p_combined),
                fmt_num(g.p1),
                f.m_combined.to_string(),
                g.m.to_string(),
                f.n_combined.to_string(),
                g.n.to_string(),
                fmt_num(g.lambda_opt),
                r.product_regularity().to_string(),
                r.pass().to_string(),
            ]
        })
        .collect();
    to_csv(&header, &rows)
}

#[derive(Debug, Clone)]
pub struct TablesReport {
    pub standalone: Vec<StandaloneReproduction>,
    pub combined: Vec<CombinedReproduction>,
    pub files: Vec<PathBuf>,
}

/// Recomputes both reference tables and writes `table1_repro.csv` and
/// `table2_repro.csv` into `dir`.
pub fn run_tables(dir: &Path) -> Result<TablesReport, RunError> {
    let (standalone, combined) = rayon::join(reproduce_all_standalone, reproduce_all_combined);
    let (standalone, combined) = (standalone?, combined?);
    let files = vec![
        write_file(dir, "table1_repro.csv", &standalone_csv(&standalone))?,
        write_file(dir, "table2_repro.csv", &combined_csv(&combined))?,
    ];
    Ok(TablesReport {
        standalone,
        combined,
        files,
    })
}
