//! Acceptance criteria, one line of output each. Exits non-zero if any fails.

use std::time::Instant;

use combmux::engine::output_distribution;
use combmux::optimize::{maximize_lambda, powers_of_two, sweep, SinglePhotonObjective, SweepSpec};
use combmux::oracle::{compare_bins, simulate_matrix};
use combmux::photon_stats::{herald_convolve, PairSourceModel, SourceKind};
use combmux::reference::{
    reproduce_all_combined, reproduce_all_standalone, CombinedReproduction, CURVE_PRESETS,
    PROBABILITY_TOLERANCE,
};
use combmux::transmission::{build_matrix, LossParameters, MultiplexerLayout, PriorityLogic};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NORMALIZATION_TOLERANCE: f64 = 1e-10;
const DOMINANCE_EQUALITY: f64 = 1e-12;
const ORACLE_TRIALS: u64 = 10_000_000;
const Z_LIMIT: f64 = 4.0;
const MUTATION_DELTA: f64 = 0.01;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn criterion_1() -> Outcome {
    let rows = reproduce_all_standalone().expect("standalone table sweeps");
    let mut bad = Vec::new();
    for r in &rows {
        let f = r.reference;
        if !r.time_pass() {
            bad.push(format!(
                "row {} time: {:.5} @ N={} (reference {:.3} @ N={})",
                f.row, r.time.p1, r.time.n, f.p_time, f.n_time
            ));
        }
        if !r.spatial_pass() {
            bad.push(format!(
                "row {} spatial: {:.5} @ M={} (reference {:.3} @ M={})",
                f.row, r.spatial.p1, r.spatial.m, f.p_spatial, f.m_spatial
            ));
        }
    }
    let ok = rows.len() - rows.iter().filter(|r| !r.pass()).count();
    outcome(
        bad.is_empty(),
        format!("{ok}/{} rows match; {}", rows.len(), summary(&bad)),
    )
}

fn criterion_2(rows: &[CombinedReproduction]) -> Outcome {
    let mut bad = Vec::new();
    for r in rows {
        let f = r.reference;
        if !r.standalone_pass() {
            bad.push(format!(
                "row {} standalone: P_T {:.5} @ N={}, P_S {:.5} @ M={} (reference {:.4} @ N={}, M={})",
                f.row, r.time.p1, r.time.n, r.spatial.p1, r.spatial.m, f.p_standalone, f.n_time,
                f.m_spatial
            ));
        }
        if !r.combined_pass() {
            let g = r.combined_optimum();
            bad.push(format!(
                "row {} combined: {:.5} @ ({}, {}) (reference {:.4} @ ({}, {}))",
                f.row, g.p1, g.m, g.n, f.p_combined, f.m_combined, f.n_combined
            ));
        }
    }
    let ok = rows.iter().filter(|r| r.pass()).count();
    outcome(
        bad.is_empty(),
        format!("{ok}/{} rows match; {}", rows.len(), summary(&bad)),
    )
}

fn criterion_3(rows: &[CombinedReproduction]) -> Outcome {
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| !r.product_regularity())
        .map(|r| {
            let g = r.combined_optimum();
            format!("row {}: {}*{} != {}", r.reference.row, g.m, g.n, r.time.n)
        })
        .collect();
    outcome(
        bad.is_empty(),
        format!("M_C*N_C = N_T in {}/{} rows; {}", rows.len() - bad.len(), rows.len(), summary(&bad)),
    )
}

fn criterion_4() -> Outcome {
    let params = CURVE_PRESETS[0].params;
    let grid = |logic| {
        SweepSpec::new(params, SourceKind::Poissonian, logic)
            .with_grid(powers_of_two(0, 7), powers_of_two(0, 9))
    };
    let ll = sweep(&grid(PriorityLogic::LowestLoss)).expect("lowest-loss sweep");
    let fd = sweep(&grid(PriorityLogic::FirstDetection)).expect("first-detection sweep");
    let mut bad = Vec::new();
    let mut worst_gap = 0.0f64;
    for p in &ll.surface {
        let q = fd.get(p.m, p.n).expect("same grid");
        if p.p1 < q.p1 {
            bad.push(format!("({}, {}): {:.3e} < {:.3e}", p.m, p.n, p.p1, q.p1));
        }
        if p.m == 1 || p.n == 1 {
            let gap = (p.p1 - q.p1).abs();
            worst_gap = worst_gap.max(gap);
            if gap > DOMINANCE_EQUALITY {
                bad.push(format!("({}, {}): degenerate gap {gap:.3e}", p.m, p.n));
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{} grid points, max |gap| on M=1/N=1 edges {worst_gap:.1e}; {}",
            ll.surface.len(),
            summary(&bad)
        ),
    )
}

fn random_params(rng: &mut ChaCha8Rng) -> LossParameters {
    let mut u = || rng.random_range(0.5..=1.0);
    LossParameters {
        v_r: u(),
        v_t: u(),
        v_r_s: u(),
        v_t_s: u(),
        v_p: u(),
        v_p0_s: u(),
        v_b: u(),
        v_d: u(),
    }
}

fn random_power(rng: &mut ChaCha8Rng, max_exp: u32) -> usize {
    1 << rng.random_range(0..=max_exp)
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for set in 0..200 {
        let params = random_params(&mut rng);
        let m = random_power(&mut rng, 3);
        let n = random_power(&mut rng, 3);
        let lambda = rng.random_range(0.0..=5.0 * n as f64);
        for kind in [SourceKind::Poissonian, SourceKind::Thermal] {
            let model = PairSourceModel::new(kind, lambda, n).unwrap();
            let input = herald_convolve(&model, params.v_d, None).unwrap();
            for logic in PriorityLogic::ALL {
                let layout = MultiplexerLayout::new(m, n, logic).unwrap();
                let tm = build_matrix(&params, &layout).unwrap();
                let d = output_distribution(&input, &tm, &layout, input.j_max().max(1)).unwrap();
                let err = (d.total() - 1.0).abs();
                worst = worst.max(err);
                if err > NORMALIZATION_TOLERANCE {
                    bad.push(format!("set {set} {kind:?} {logic}: {err:.2e}"));
                }
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("800 distributions, max |sum - 1| = {worst:.2e}; {}", summary(&bad)),
    )
}

/// Largest |z| over all compared bins, with the bin label.
fn max_abs_z(
    kind: SourceKind,
    lambda: f64,
    params: &LossParameters,
    layout: &MultiplexerLayout,
    perturb: Option<(usize, usize)>,
    seed: u64,
) -> (f64, String) {
    let model = PairSourceModel::new(kind, lambda, layout.n()).unwrap();
    let tm = build_matrix(params, layout).unwrap();
    let analytic_tm = match perturb {
        Some((a, w)) => tm
            .with_entry(a, w, (tm.get(a, w) + MUTATION_DELTA).min(1.0))
            .unwrap(),
        None => tm.clone(),
    };
    let emp = simulate_matrix(&model, params.v_d, tm, layout, ORACLE_TRIALS, seed).unwrap();
    let input = herald_convolve(&model, params.v_d, None).unwrap();
    let i_max = input.j_max().max(emp.max_observed()).max(1);
    let ana = output_distribution(&input, &analytic_tm, layout, i_max).unwrap();
    compare_bins(&ana, &emp)
        .into_iter()
        .map(|b| {
            let label = if b.pooled { format!(">={}", b.bin) } else { b.bin.to_string() };
            (b.z.abs(), label)
        })
        .fold((0.0, String::new()), |acc, x| if x.0 >= acc.0 { x } else { acc })
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for cfg in 0..20u64 {
        let params = random_params(&mut rng);
        let m = random_power(&mut rng, 2);
        let n = random_power(&mut rng, 3);
        let lambda = rng.random_range(0.0..=2.0 * n as f64);
        let kind = if rng.random_bool(0.5) {
            SourceKind::Poissonian
        } else {
            SourceKind::Thermal
        };
        let logic = PriorityLogic::ALL[rng.random_range(0..2)];
        let layout = MultiplexerLayout::new(m, n, logic).unwrap();
        let (z, bin) = max_abs_z(kind, lambda, &params, &layout, None, 1000 + cfg);
        worst = worst.max(z);
        if z > Z_LIMIT {
            bad.push(format!(
                "config {cfg} (M={m}, N={n}, lambda={lambda:.3}, {kind:?}, {logic}): bin {bin} z={z:.2}"
            ));
        }
    }

    let params = LossParameters::shared_splitters(0.996, 0.97, 0.95, 0.99, 0.9);
    let layout = MultiplexerLayout::new(2, 4, PriorityLogic::LowestLoss).unwrap();
    let (mz, mbin) = max_abs_z(SourceKind::Poissonian, 1.0, &params, &layout, Some((0, 0)), 77);
    let detected = mz > Z_LIMIT;
    if !detected {
        bad.push(format!("mutation undetected: max z = {mz:.2}"));
    }
    outcome(
        bad.is_empty(),
        format!(
            "20 configs x {ORACLE_TRIALS} trials, max |z| = {worst:.2}; mutation z = {mz:.1} (bin {mbin}); {}",
            summary(&bad)
        ),
    )
}

/// Standalone multiplexer with cells tried in the given order.
fn standalone_p1(cells: &[f64], windows: usize, kind: SourceKind, lambda: f64, v_d: f64) -> f64 {
    let mu = lambda / windows as f64;
    let pair = |j: i32| match kind {
        SourceKind::Poissonian => (-mu).exp() * mu.powi(j) / (1..=j).map(f64::from).product::<f64>(),
        SourceKind::Thermal => mu.powi(j) / (1.0 + mu).powi(j + 1),
    };
    let herald = |j: i32| pair(j) * (1.0 - (1.0 - v_d).powi(j));
    let p0: f64 = match kind {
        SourceKind::Poissonian => (-mu * v_d).exp(),
        SourceKind::Thermal => 1.0 / (1.0 + mu * v_d),
    };
    let mut total = 0.0;
    for (t, &v) in cells.iter().enumerate() {
        let single: f64 = (1..150).map(|j| herald(j) * j as f64 * v * (1.0 - v).powi(j - 1)).sum();
        total += p0.powi(t as i32) * single;
    }
    total
}

fn criterion_7() -> Outcome {
    let params = LossParameters::shared_splitters(0.993, 0.98, 0.96, 0.99, 0.85);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for kind in [SourceKind::Poissonian, SourceKind::Thermal] {
        for &lambda in &[0.3, 1.0, 2.5] {
            for size in [1usize, 2, 8, 64] {
                let time: Vec<f64> = (1..=size)
                    .map(|n| {
                        let rest = size - n;
                        let l = size.trailing_zeros() as i32;
                        let h = rest.count_ones() as i32;
                        params.v_r.powi(h)
                            * params.v_t.powi(l - h)
                            * params.v_p.powf(rest as f64 / size as f64)
                    })
                    .collect();
                let mut arms: Vec<f64> = (0..size)
                    .map(|a| {
                        let l = size.trailing_zeros() as i32;
                        let t = (a as u32).count_ones() as i32;
                        params.v_p0_s.powi(l) * params.v_r_s.powi(l - t) * params.v_t_s.powi(t)
                    })
                    .collect();
                arms.sort_by(|a, b| b.total_cmp(a));
                for (m, n, cells) in [(1, size, &time), (size, 1, &arms)] {
                    let expected = standalone_p1(cells, n, kind, lambda, params.v_d);
                    for logic in PriorityLogic::ALL {
                        let layout = MultiplexerLayout::new(m, n, logic).unwrap();
                        let obj = SinglePhotonObjective::new(&params, kind, layout, 1).unwrap();
                        let got = obj.eval(lambda).unwrap();
                        worst = worst.max((got - expected).abs());
                        cases += 1;
                    }
                }
            }
        }
    }
    let reductions_ok = worst < 1e-12;

    let lossless = LossParameters::default();
    let layout = MultiplexerLayout::new(1, 1, PriorityLogic::LowestLoss).unwrap();
    let obj = SinglePhotonObjective::new(&lossless, SourceKind::Poissonian, layout, 10).unwrap();
    let opt = maximize_lambda(&obj, 0.0, 10.0).unwrap();
    let limit = (-1.0f64).exp();
    let lambda_ok = (opt.lambda_opt - 1.0).abs() <= 1e-4;
    let p_ok = (opt.p1 - limit).abs() <= 1e-6;
    outcome(
        reductions_ok && lambda_ok && p_ok,
        format!(
            "{cases} M=1/N=1 reductions, max deviation {worst:.1e}; lossless lambda_opt = {:.6}, P(1) - 1/e = {:.1e}",
            opt.lambda_opt,
            opt.p1 - limit
        ),
    )
}

fn criterion_8(rows: &[CombinedReproduction]) -> Outcome {
    let mut bad = Vec::new();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in rows {
        let p = r.combined_optimum().p1;
        lo = lo.min(p);
        hi = hi.max(p);
        // the claim is stated in whole percent
        let percent = (p * 100.0).round();
        if !(85.0..=89.0).contains(&percent) {
            bad.push(format!("row {}: {p:.4} ({percent}%)", r.reference.row));
        }
    }
    outcome(
        bad.is_empty(),
        format!("combined optima span [{lo:.4}, {hi:.4}]; {}", summary(&bad)),
    )
}

fn summary(bad: &[String]) -> String {
    if bad.is_empty() {
        "no deviations".to_string()
    } else {
        format!("deviations: {}", bad.join("; "))
    }
}

fn report(id: u32, name: &str, start: Instant, o: Outcome) -> bool {
    println!(
        "criterion {id} [{}] {name} ({:.1}s): {}",
        if o.pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64(),
        o.detail
    );
    o.pass
}

fn main() {
    // libtest-style filtering is not supported; `--list` keeps `cargo test -- --list` quiet
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    println!("acceptance: probability tolerance {PROBABILITY_TOLERANCE}");
    let mut all = true;

    let t = Instant::now();
    all &= report(1, "standalone reference table", t, criterion_1());

    let t = Instant::now();
    let combined = reproduce_all_combined().expect("combined table sweeps");
    all &= report(2, "combined reference table", t, criterion_2(&combined));

    let t = Instant::now();
    all &= report(3, "product regularity", t, criterion_3(&combined));

    let t = Instant::now();
    all &= report(4, "logic dominance", t, criterion_4());

    let t = Instant::now();
    all &= report(5, "normalization", t, criterion_5());

    let t = Instant::now();
    all &= report(6, "oracle equivalence", t, criterion_6());

    let t = Instant::now();
    all &= report(7, "degeneracy", t, criterion_7());

    let t = Instant::now();
    all &= report(8, "headline range", t, criterion_8(&combined));

    if !all {
        std::process::exit(1);
    }
}
