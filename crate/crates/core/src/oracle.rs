//! Monte-Carlo simulation of the combined multiplexer, photon by photon.
//!
//! Each trial draws pair numbers per (source, window), lets every idler
//! photon hit the threshold detector independently, applies the priority
//! rule to the heralded cells and finally sends each signal photon of the
//! chosen cell through its net transmission.
//!
//! Random streams: trials are grouped into blocks of [`BLOCK_TRIALS`];
//! block `b` uses `ChaCha8Rng::seed_from_u64(seed)` switched to stream `b`.
//! Counts are merged by addition, so results do not depend on how blocks
//! are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Poisson};
use rayon::prelude::*;

use crate::engine::PhotonNumberDistribution;
use crate::error::{check_unit_interval, Error, Result};
use crate::photon_stats::{PairSourceModel, SourceKind};
use crate::transmission::{
    build_matrix, LossParameters, MultiplexerLayout, PriorityLogic, TransmissionMatrix,
};

pub const BLOCK_TRIALS: u64 = 1 << 16;

/// Result of a single period. `herald` is the selected `(arm, window)`,
/// 0-based, or `None` when no detector clicked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub output_photons: usize,
    pub herald: Option<(usize, usize)>,
}

impl TrialOutcome {
    pub fn heralded_arm(&self) -> Option<usize> {
        self.herald.map(|(k, _)| k)
    }

    pub fn heralded_window(&self) -> Option<usize> {
        self.herald.map(|(_, n)| n)
    }
}

/// Photon-number histogram over a number of trials.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmpiricalDistribution {
    counts: Vec<u64>,
    trials: u64,
}

impl EmpiricalDistribution {
    pub fn record(&mut self, photons: usize) {
        if photons >= self.counts.len() {
            self.counts.resize(photons + 1, 0);
        }
        self.counts[photons] += 1;
        self.trials += 1;
    }

    pub fn merge(mut self, other: Self) -> Self {
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.trials += other.trials;
        self
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    /// Largest photon number observed.
    pub fn max_observed(&self) -> usize {
        self.counts.iter().rposition(|&c| c > 0).unwrap_or(0)
    }

    pub fn p(&self, i: usize) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        self.counts.get(i).copied().unwrap_or(0) as f64 / self.trials as f64
    }

    /// Binomial standard error of bin `i` from the observed frequency.
    pub fn std_error(&self, i: usize) -> f64 {
        binomial_std_error(self.p(i), self.trials)
    }

    pub fn to_distribution(&self) -> PhotonNumberDistribution {
        let probs = (0..=self.max_observed()).map(|i| self.p(i)).collect();
        PhotonNumberDistribution::new(probs, 0.0)
    }
}

/// Bins expected to hold fewer counts than this are pooled into one tail
/// bin before computing z-scores; the normal approximation is meaningless
/// for a handful of counts.
pub const MIN_EXPECTED_COUNT: f64 = 5.0;

/// Agreement of one photon-number bin. With `pooled` set the bin covers
/// every `i >= bin`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinAgreement {
    pub bin: usize,
    pub pooled: bool,
    pub analytic: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub z: f64,
}

fn z_score(analytic: f64, empirical: f64, std_error: f64) -> f64 {
    if std_error > 0.0 {
        (empirical - analytic) / std_error
    } else if empirical == analytic {
        0.0
    } else {
        f64::INFINITY.copysign(empirical - analytic)
    }
}

/// Compares simulated counts with an analytic distribution. Individual bins
/// run from `i = 0` up to the first bin with fewer than
/// [`MIN_EXPECTED_COUNT`] expected counts; that bin and everything above it
/// form one pooled bin. The standard error is taken from the analytic
/// probability.
///
/// `analytic` should extend at least to `empirical.max_observed()` and far
/// enough to hold its whole mass.
pub fn compare_bins(
    analytic: &PhotonNumberDistribution,
    empirical: &EmpiricalDistribution,
) -> Vec<BinAgreement> {
    let trials = empirical.trials();
    let n = trials as f64;
    let top = analytic.i_max().max(empirical.max_observed());
    let cut = (1..=top)
        .find(|&i| analytic.p(i) * n < MIN_EXPECTED_COUNT)
        .unwrap_or(top + 1);
    let agreement = |bin, pooled, a: f64, e: f64| {
        let se = binomial_std_error(a, trials);
        BinAgreement {
            bin,
            pooled,
            analytic: a,
            empirical: e,
            std_error: se,
            z: z_score(a, e, se),
        }
    };
    let mut out: Vec<BinAgreement> = (0..cut)
        .map(|i| agreement(i, false, analytic.p(i), empirical.p(i)))
        .collect();
    let a_tail: f64 = (cut..=top).map(|i| analytic.p(i)).sum();
    let e_tail: f64 = (cut..=top).map(|i| empirical.p(i)).sum();
    out.push(agreement(cut, true, a_tail, e_tail));
    out
}

/// `sqrt(p (1 - p) / trials)`.
pub fn binomial_std_error(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

#[derive(Debug, Clone)]
enum PairSampler {
    Empty,
    Poisson(Poisson<f64>),
    Geometric(Geometric),
}

impl PairSampler {
    fn new(model: &PairSourceModel) -> Result<Self> {
        let mu = model.mean_per_window();
        if mu == 0.0 {
            return Ok(PairSampler::Empty);
        }
        match model.kind() {
            SourceKind::Poissonian => Poisson::new(mu)
                .map(PairSampler::Poisson)
                .map_err(|e| Error::domain(format!("poisson sampler: {e}"))),
            // failures before the first success with p = 1/(1+mu)
            SourceKind::Thermal => Geometric::new(1.0 / (1.0 + mu))
                .map(PairSampler::Geometric)
                .map_err(|e| Error::domain(format!("geometric sampler: {e}"))),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        match self {
            PairSampler::Empty => 0,
            PairSampler::Poisson(d) => d.sample(rng) as u64,
            PairSampler::Geometric(d) => d.sample(rng),
        }
    }
}

/// Everything one trial needs; cheap to share between worker threads.
#[derive(Debug, Clone)]
pub struct Simulator {
    pairs: PairSampler,
    v_d: f64,
    tm: TransmissionMatrix,
    layout: MultiplexerLayout,
}

impl Simulator {
    pub fn new(
        model: &PairSourceModel,
        v_d: f64,
        tm: TransmissionMatrix,
        layout: MultiplexerLayout,
    ) -> Result<Self> {
        check_unit_interval("v_d", v_d)?;
        if tm.arms() != layout.m() || tm.windows() != layout.n() {
            return Err(Error::Shape {
                expected_arms: layout.m(),
                expected_windows: layout.n(),
                arms: tm.arms(),
                windows: tm.windows(),
            });
        }
        Ok(Self {
            pairs: PairSampler::new(model)?,
            v_d,
            tm,
            layout,
        })
    }

    /// Samples the pairs of one (source, window) and returns their number
    /// when the idler detector clicks.
    fn herald<R: Rng>(&self, rng: &mut R) -> Option<u64> {
        let pairs = self.pairs.sample(rng);
        (0..pairs)
            .any(|_| rng.random_bool(self.v_d))
            .then_some(pairs)
    }

    fn transmit<R: Rng>(&self, rng: &mut R, photons: u64, arm: usize, window: usize) -> usize {
        let v = self.tm.get(arm, window);
        (0..photons).filter(|_| rng.random_bool(v)).count()
    }

    /// One period. Cells behind the first heralded cell in priority order
    /// cannot influence the output and are not sampled.
    pub fn trial<R: Rng>(&self, rng: &mut R) -> TrialOutcome {
        let (m, n) = (self.layout.m(), self.layout.n());
        let (outer, inner) = match self.layout.logic() {
            PriorityLogic::LowestLoss => (m, n),
            PriorityLogic::FirstDetection => (n, m),
        };
        for a in 0..outer {
            for b in 0..inner {
                let (arm, window) = match self.layout.logic() {
                    PriorityLogic::LowestLoss => (a, b),
                    PriorityLogic::FirstDetection => (b, a),
                };
                if let Some(photons) = self.herald(rng) {
                    return TrialOutcome {
                        output_photons: self.transmit(rng, photons, arm, window),
                        herald: Some((arm, window)),
                    };
                }
            }
        }
        TrialOutcome {
            output_photons: 0,
            herald: None,
        }
    }

    /// One period with every cell sampled. Returns the outcome and the
    /// row-major heralding mask.
    pub fn trial_full<R: Rng>(&self, rng: &mut R) -> (TrialOutcome, Vec<bool>) {
        let (m, n) = (self.layout.m(), self.layout.n());
        let photons: Vec<Option<u64>> = (0..m * n).map(|_| self.herald(rng)).collect();
        let heralded: Vec<bool> = photons.iter().map(Option::is_some).collect();
        let chosen = (0..m * n)
            .filter(|&c| heralded[c])
            .map(|c| (c / n, c % n))
            .min_by_key(|&(arm, window)| match self.layout.logic() {
                PriorityLogic::LowestLoss => (arm, window),
                PriorityLogic::FirstDetection => (window, arm),
            });
        let outcome = match chosen {
            Some((arm, window)) => {
                let k = photons[arm * n + window].unwrap_or(0);
                TrialOutcome {
                    output_photons: self.transmit(rng, k, arm, window),
                    herald: Some((arm, window)),
                }
            }
            None => TrialOutcome {
                output_photons: 0,
                herald: None,
            },
        };
        (outcome, heralded)
    }

    pub fn matrix(&self) -> &TransmissionMatrix {
        &self.tm
    }

    /// Runs `trials` periods split into independently seeded blocks.
    pub fn run(&self, trials: u64, seed: u64) -> EmpiricalDistribution {
        let blocks = trials.div_ceil(BLOCK_TRIALS);
        (0..blocks)
            .into_par_iter()
            .map(|block| {
                let mut rng = block_rng(seed, block);
                let len = BLOCK_TRIALS.min(trials - block * BLOCK_TRIALS);
                let mut hist = EmpiricalDistribution::default();
                for _ in 0..len {
                    hist.record(self.trial(&mut rng).output_photons);
                }
                hist
            })
            .reduce(EmpiricalDistribution::default, EmpiricalDistribution::merge)
    }
}

/// Generator for trial block `block` of a run seeded with `seed`.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Simulates the built-in bulk-optics layout.
pub fn simulate(
    model: &PairSourceModel,
    params: &LossParameters,
    layout: &MultiplexerLayout,
    trials: u64,
    seed: u64,
) -> Result<EmpiricalDistribution> {
    let tm = build_matrix(params, layout)?;
    simulate_matrix(model, params.v_d, tm, layout, trials, seed)
}

/// Simulates an arbitrary transmission matrix.
pub fn simulate_matrix(
    model: &PairSourceModel,
    v_d: f64,
    tm: TransmissionMatrix,
    layout: &MultiplexerLayout,
    trials: u64,
    seed: u64,
) -> Result<EmpiricalDistribution> {
    if trials == 0 {
        return Err(Error::domain("at least one trial is required"));
    }
    Ok(Simulator::new(model, v_d, tm, *layout)?.run(trials, seed))
}
