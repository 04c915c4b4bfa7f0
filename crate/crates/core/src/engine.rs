//! Exact output photon-number distribution of a combined multiplexer.
//!
//! For a cell `(k, n)` selected by the priority logic, the weight is
//! `P_0^t` where `t` counts the cells that must stay silent before it:
//! `t = N(k-1) + (n-1)` for the lowest-loss logic and `t = M(n-1) + (k-1)`
//! for the first-detection logic. Each of the `j` heralded photons then
//! survives independently with probability `V_nk`.

use crate::error::{Error, Result};
use crate::photon_stats::HeraldedInputDistribution;
use crate::special::binomial;
use crate::transmission::{MultiplexerLayout, TransmissionMatrix};

/// Photon-number cut-off used during optimization.
pub const DEFAULT_I_MAX: usize = 10;

/// Above this photon number binomial terms are evaluated in log-space.
const DIRECT_BINOMIAL_MAX: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct PhotonNumberDistribution {
    probs: Vec<f64>,
    tail_bound: f64,
}

impl PhotonNumberDistribution {
    pub fn new(probs: Vec<f64>, tail_bound: f64) -> Self {
        Self { probs, tail_bound }
    }

    /// `P^(i)` for `i = 0..=i_max`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn p(&self, i: usize) -> f64 {
        self.probs.get(i).copied().unwrap_or(0.0)
    }

    pub fn i_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// Mass not represented in `probs`: photon numbers above `i_max` plus
    /// the truncated heralding tail.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum::<f64>()
    }
}

/// `P^(i)` for `i = 0..=i_max`.
///
/// Entries above the input truncation `j_max` are exactly zero (no more
/// photons can leave than entered), so `i_max > j_max` is accepted.
pub fn output_distribution(
    input: &HeraldedInputDistribution,
    tm: &TransmissionMatrix,
    layout: &MultiplexerLayout,
    i_max: usize,
) -> Result<PhotonNumberDistribution> {
    if i_max == 0 {
        return Err(Error::domain("i_max must be at least 1"));
    }
    if tm.arms() != layout.m() || tm.windows() != layout.n() {
        return Err(Error::Shape {
            expected_arms: layout.m(),
            expected_windows: layout.n(),
            arms: tm.arms(),
            windows: tm.windows(),
        });
    }

    let p0 = input.p0();
    let mut probs = vec![0.0; i_max + 1];
    if p0 >= 1.0 {
        probs[0] = 1.0;
        return Ok(PhotonNumberDistribution::new(probs, 0.0));
    }

    // Accumulate the priority weights per distinct transmission value.
    let cells = layout.cells();
    let mut powers = Vec::with_capacity(cells + 1);
    let mut acc = 1.0;
    for _ in 0..=cells {
        powers.push(acc);
        acc *= p0;
    }
    let mut weights = vec![0.0; tm.distinct_values().len()];
    let classes = tm.classes();
    for arm in 0..layout.m() {
        for window in 0..layout.n() {
            let class = classes[arm * layout.n() + window] as usize;
            weights[class] += powers[layout.priority_rank(arm, window)];
        }
    }

    let heralded = input.heralded_mass();
    let i_eff = i_max.min(input.j_max());
    let mut overflow = 0.0;
    let mut row = vec![0.0; i_eff + 1];
    for (&v, &w) in tm.distinct_values().iter().zip(&weights) {
        if w == 0.0 {
            continue;
        }
        survival_sums(input, v, &mut row);
        for (p, s) in probs.iter_mut().zip(&row) {
            *p += w * s;
        }
        overflow += w * (heralded - row.iter().sum::<f64>()).max(0.0);
    }
    probs[0] += powers[cells];

    let total_weight: f64 = weights.iter().sum();
    let tail_bound = overflow + total_weight * input.tail_bound();
    Ok(PhotonNumberDistribution::new(probs, tail_bound))
}

/// `out[i] = sum_j P_j C(j, i) v^i (1 - v)^(j - i)` for `i < out.len()`.
fn survival_sums(input: &HeraldedInputDistribution, v: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    let pj = input.pj();
    let i_top = out.len() - 1;
    if v <= 0.0 {
        out[0] = input.heralded_mass();
        return;
    }
    if v >= 1.0 {
        for (i, slot) in out.iter_mut().enumerate().skip(1) {
            *slot = pj[i];
        }
        return;
    }
    let lost = 1.0 - v;
    let ln_v = v.ln();
    let ln_lost = (-v).ln_1p();
    for (j, &p) in pj.iter().enumerate().skip(1) {
        if p == 0.0 {
            continue;
        }
        let top = j.min(i_top);
        if j <= DIRECT_BINOMIAL_MAX {
            let mut vi = 1.0;
            for (i, slot) in out.iter_mut().enumerate().take(top + 1) {
                *slot += p * binomial(j, i) * vi * lost.powi((j - i) as i32);
                vi *= v;
            }
        } else {
            for (i, slot) in out.iter_mut().enumerate().take(top + 1) {
                let ln_term = crate::special::ln_binomial(j, i)
                    + i as f64 * ln_v
                    + (j - i) as f64 * ln_lost;
                *slot += p * ln_term.exp();
            }
        }
    }
}

/// `P^(1)`.
pub fn single_photon_probability(
    input: &HeraldedInputDistribution,
    tm: &TransmissionMatrix,
    layout: &MultiplexerLayout,
) -> Result<f64> {
    output_distribution(input, tm, layout, 1).map(|d| d.p(1))
}
