//! Analytic engine against Monte-Carlo simulation for a 2 x 4 layout.

use combmux::engine::output_distribution;
use combmux::oracle::{compare_bins, simulate};
use combmux::photon_stats::{herald_convolve, PairSourceModel, SourceKind};
use combmux::transmission::{LossParameters, MultiplexerLayout, PriorityLogic};

const TRIALS: u64 = 2_000_000;

#[test]
fn two_arms_four_windows_agree() {
    let params = LossParameters {
        v_r_s: 0.9,
        v_t_s: 0.8,
        ..LossParameters::shared_splitters(0.95, 0.85, 0.9, 0.97, 0.8)
    };
    let mut seed = 100;
    for kind in [SourceKind::Poissonian, SourceKind::Thermal] {
        for logic in PriorityLogic::ALL {
            for lambda in [0.4, 2.0, 6.0] {
                seed += 1;
                let layout = MultiplexerLayout::new(2, 4, logic).unwrap();
                let model = PairSourceModel::new(kind, lambda, 4).unwrap();
                let emp = simulate(&model, &params, &layout, TRIALS, seed).unwrap();
                let input = herald_convolve(&model, params.v_d, None).unwrap();
                let tm = combmux::build_matrix(&params, &layout).unwrap();
                let i_max = input.j_max().max(emp.max_observed());
                let ana = output_distribution(&input, &tm, &layout, i_max).unwrap();
                for b in compare_bins(&ana, &emp) {
                    assert!(
                        b.z.abs() <= 4.0,
                        "{kind:?} {logic} lambda {lambda}: bin {} (pooled {}) z = {:.2}",
                        b.bin,
                        b.pooled,
                        b.z
                    );
                }
            }
        }
    }
}

#[test]
fn logics_differ_only_in_selection() {
    // same marginal heralding, different routing: P(0) agrees, P(1) does not
    let params = LossParameters::shared_splitters(0.99, 0.9, 0.9, 0.95, 0.9);
    let model = PairSourceModel::new(SourceKind::Poissonian, 1.5, 4).unwrap();
    let a = simulate(&model, &params, &MultiplexerLayout::new(2, 4, PriorityLogic::LowestLoss).unwrap(), TRIALS, 1).unwrap();
    let b = simulate(&model, &params, &MultiplexerLayout::new(2, 4, PriorityLogic::FirstDetection).unwrap(), TRIALS, 1).unwrap();
    let input = herald_convolve(&model, params.v_d, None).unwrap();
    let p0_dark = input.p0().powi(8);
    for e in [&a, &b] {
        assert!(e.p(0) >= p0_dark);
    }
    assert_ne!(a.counts(), b.counts());
}
