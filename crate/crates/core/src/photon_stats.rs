//! Pair-generation statistics of a single nonlinear source per time window
//! and the threshold-detector heralding that turns them into the input
//! distribution of the multiplexer.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit_interval, Error, Result};
use crate::special::{binomial, factorial_small, ln_binomial, ln_factorial};

/// Truncation tolerance on the tail of the pair distribution.
pub const TAIL_TOLERANCE: f64 = 1e-12;

/// Upper limit for the adaptive truncation index.
pub const MAX_J: usize = 512;

/// Above this pair number the pmf is evaluated in log-space.
const DIRECT_EVAL_MAX: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// Single-mode SPDC: geometric photon-pair statistics.
    Thermal,
    /// Multimode SPDC.
    Poissonian,
}

impl SourceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceKind::Thermal => "thermal",
            SourceKind::Poissonian => "poissonian",
        }
    }
}

/// A pair source driven so that `lambda` pairs are expected over all
/// `n_windows` time windows of one period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSourceModel {
    kind: SourceKind,
    lambda: f64,
    n_windows: usize,
}

impl PairSourceModel {
    pub fn new(kind: SourceKind, lambda: f64, n_windows: usize) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::domain(format!(
                "mean pair number must be finite and non-negative, got {lambda}"
            )));
        }
        if n_windows == 0 {
            return Err(Error::domain("number of time windows must be at least 1"));
        }
        Ok(Self {
            kind,
            lambda,
            n_windows,
        })
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n_windows(&self) -> usize {
        self.n_windows
    }

    /// Mean pair number in a single window.
    pub fn mean_per_window(&self) -> f64 {
        self.lambda / self.n_windows as f64
    }

    /// Probability that one source emits exactly `k` pairs in one window.
    pub fn pmf(&self, k: usize) -> f64 {
        let mu = self.mean_per_window();
        if mu == 0.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        match self.kind {
            SourceKind::Poissonian => {
                if k <= DIRECT_EVAL_MAX {
                    mu.powi(k as i32) * (-mu).exp() / factorial_small(k)
                } else {
                    (k as f64 * mu.ln() - mu - ln_factorial(k)).exp()
                }
            }
            SourceKind::Thermal => {
                if k <= DIRECT_EVAL_MAX {
                    mu.powi(k as i32) / (1.0 + mu).powi(k as i32 + 1)
                } else {
                    (k as f64 * (mu / (1.0 + mu)).ln() - mu.ln_1p()).exp()
                }
            }
        }
    }

    /// `sum_{k > j} pmf(k)`.
    pub fn upper_tail(&self, j: usize) -> f64 {
        let mu = self.mean_per_window();
        if mu == 0.0 {
            return 0.0;
        }
        match self.kind {
            SourceKind::Thermal => (mu / (1.0 + mu)).powi(j as i32 + 1),
            SourceKind::Poissonian => forward_sum(j + 1, mu, |k| self.pmf(k)),
        }
    }

    /// Probability that a heralding click occurs in one window,
    /// `sum_k pmf(k) (1 - (1 - v_d)^k)` in closed form.
    fn no_click_probability(&self, v_d: f64) -> f64 {
        let mu = self.mean_per_window();
        match self.kind {
            SourceKind::Poissonian => (-mu * v_d).exp(),
            SourceKind::Thermal => 1.0 / (1.0 + mu * v_d),
        }
    }
}

/// Sums `term(k)` for `k >= start` until the terms past the mode become
/// negligible relative to the running sum.
fn forward_sum(start: usize, mode: f64, term: impl Fn(usize) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut k = start;
    loop {
        let t = term(k);
        sum += t;
        if (k as f64) > mode && (t <= sum * 1e-18 || t < 1e-300) {
            break;
        }
        k += 1;
        if k > start + 100_000 {
            break;
        }
    }
    sum
}

/// `P'^(k)` of the given source.
pub fn pair_distribution(model: &PairSourceModel, k: usize) -> f64 {
    model.pmf(k)
}

/// Probability that a threshold detector with efficiency `v_d` clicks when
/// `j` photons reach it, `1 - (1 - v_d)^j`.
pub fn click_probability(j: usize, v_d: f64) -> f64 {
    if j == 0 {
        0.0
    } else if v_d >= 1.0 {
        1.0
    } else {
        -(j as f64 * (-v_d).ln_1p()).exp_m1()
    }
}

/// The click probability written as the binomial sum over the number of
/// detected photons, `sum_{k=0}^{j-1} C(j, j-k) v_d^(j-k) (1-v_d)^k`.
pub fn click_probability_summed(j: usize, v_d: f64) -> f64 {
    let miss = 1.0 - v_d;
    (0..j)
        .map(|k| {
            let detected = j - k;
            if j <= 30 {
                binomial(j, detected) * v_d.powi(detected as i32) * miss.powi(k as i32)
            } else if v_d == 0.0 {
                0.0
            } else if miss == 0.0 {
                if k == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (ln_binomial(j, detected) + detected as f64 * v_d.ln() + k as f64 * miss.ln())
                    .exp()
            }
        })
        .sum()
}

/// Distribution of the number of signal photons entering a multiplexer arm
/// in one window.
///
/// `pj[j]` is the probability that the idler detector clicked and `j` signal
/// photons entered; `pj[0]` is always zero and kept only so that the index
/// equals the photon number. `p0` is the probability of no click.
#[derive(Debug, Clone, PartialEq)]
pub struct HeraldedInputDistribution {
    p0: f64,
    pj: Vec<f64>,
    tail_bound: f64,
}

impl HeraldedInputDistribution {
    pub fn p0(&self) -> f64 {
        self.p0
    }

    /// Heralded `P_j` for `j = 0..=j_max` (`P_0` slot is zero).
    pub fn pj(&self) -> &[f64] {
        &self.pj
    }

    pub fn p(&self, j: usize) -> f64 {
        self.pj.get(j).copied().unwrap_or(0.0)
    }

    pub fn j_max(&self) -> usize {
        self.pj.len() - 1
    }

    /// Heralded probability mass beyond `j_max`.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Total heralding probability represented by the stored entries.
    pub fn heralded_mass(&self) -> f64 {
        self.pj.iter().sum()
    }
}

/// Heralding convolution of the pair distribution with a threshold detector.
///
/// With `j_max = None` the truncation is the smallest index whose source
/// tail is below [`TAIL_TOLERANCE`], capped at [`MAX_J`].
pub fn herald_convolve(
    model: &PairSourceModel,
    v_d: f64,
    j_max: Option<usize>,
) -> Result<HeraldedInputDistribution> {
    check_unit_interval("v_d", v_d)?;

    let j_max = match j_max {
        Some(j) => {
            let tail = model.upper_tail(j);
            if tail > TAIL_TOLERANCE {
                return Err(Error::Truncation {
                    j_max: j,
                    tail_bound: tail,
                    tolerance: TAIL_TOLERANCE,
                });
            }
            j
        }
        None => adaptive_j_max(model)?,
    };

    let mut pj = Vec::with_capacity(j_max + 1);
    pj.push(0.0);
    for j in 1..=j_max {
        let source = model.pmf(j);
        let closed = source * click_probability(j, v_d);
        let summed = source * click_probability_summed(j, v_d);
        if (closed - summed).abs() > 1e-12 {
            return Err(Error::SelfCheck(format!(
                "heralded P_{j}: closed form {closed:e} vs binomial sum {summed:e}"
            )));
        }
        pj.push(closed);
    }

    let p0 = model.no_click_probability(v_d);
    let tail_bound = if model.mean_per_window() == 0.0 || v_d == 0.0 {
        0.0
    } else {
        forward_sum(j_max + 1, model.mean_per_window(), |k| {
            model.pmf(k) * click_probability(k, v_d)
        })
    };

    Ok(HeraldedInputDistribution { p0, pj, tail_bound })
}

fn adaptive_j_max(model: &PairSourceModel) -> Result<usize> {
    if model.mean_per_window() == 0.0 {
        return Ok(1);
    }
    // Thermal tails are geometric: solve for the index directly.
    if model.kind() == SourceKind::Thermal {
        let mu = model.mean_per_window();
        let q = mu / (1.0 + mu);
        let j = ((TAIL_TOLERANCE.ln() / q.ln()).ceil() as usize).saturating_sub(1);
        let mut j = j.max(1);
        while j > 1 && model.upper_tail(j - 1) < TAIL_TOLERANCE {
            j -= 1;
        }
        while model.upper_tail(j) >= TAIL_TOLERANCE {
            j += 1;
            if j > MAX_J {
                break;
            }
        }
        return finish_adaptive(model, j);
    }
    // Poissonian: accumulate the cdf, then confirm with a direct tail sum.
    let mut cdf = 0.0;
    let mut j = 0;
    while j <= MAX_J {
        cdf += model.pmf(j);
        if 1.0 - cdf < 1e-3 && model.upper_tail(j) < TAIL_TOLERANCE {
            break;
        }
        j += 1;
    }
    finish_adaptive(model, j.max(1))
}

fn finish_adaptive(model: &PairSourceModel, j: usize) -> Result<usize> {
    if j > MAX_J {
        return Err(Error::Truncation {
            j_max: MAX_J,
            tail_bound: model.upper_tail(MAX_J),
            tolerance: TAIL_TOLERANCE,
        });
    }
    Ok(j)
}
