//! Published optima of the bulk-optics multiplexers and the machinery to
//! recompute them.
//!
//! Standalone time multiplexers are swept over `N = 2^0..2^9` with `M = 1`,
//! standalone spatial multiplexers over `M = 2^0..2^9` with `N = 1`. The
//! combined optimum is searched over genuinely combined layouts only,
//! `M = 2^1..2^8` and `N = 2^1..2^9`.

use rayon::prelude::*;

use crate::error::Result;
use crate::optimize::{powers_of_two, sweep, OptimizationResult, SurfacePoint, SweepSpec};
use crate::photon_stats::SourceKind;
use crate::transmission::{LossParameters, PriorityLogic};

/// Detector efficiency used throughout the published tables.
pub const DETECTOR_EFFICIENCY: f64 = 0.9;

/// Published probabilities carry 3 or 4 decimals.
pub const PROBABILITY_TOLERANCE: f64 = 5e-4;

/// Optima of standalone time and spatial multiplexers sharing one PBS type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandaloneRow {
    pub row: usize,
    pub v_r: f64,
    pub v_t: f64,
    pub v_p: f64,
    pub v_p0_s: f64,
    pub p_time: f64,
    pub n_time: usize,
    pub p_spatial: f64,
    pub m_spatial: usize,
}

impl StandaloneRow {
    pub fn params(&self) -> LossParameters {
        LossParameters::shared_splitters(self.v_r, self.v_t, self.v_p, self.v_p0_s, DETECTOR_EFFICIENCY)
    }
}

#[allow(clippy::too_many_arguments)]
const fn standalone(
    row: usize,
    v_r: f64,
    v_t: f64,
    v_p: f64,
    v_p0_s: f64,
    p_time: f64,
    n_time: usize,
    p_spatial: f64,
    m_spatial: usize,
) -> StandaloneRow {
    StandaloneRow {
        row,
        v_r,
        v_t,
        v_p,
        v_p0_s,
        p_time,
        n_time,
        p_spatial,
        m_spatial,
    }
}

pub const STANDALONE_ROWS: [StandaloneRow; 7] = [
    standalone(1, 0.990, 0.97, 0.95, 0.985, 0.832, 128, 0.800, 64),
    standalone(2, 0.990, 0.97, 0.97, 0.990, 0.846, 128, 0.822, 64),
    standalone(3, 0.993, 0.97, 0.96, 0.985, 0.850, 128, 0.809, 64),
    standalone(4, 0.996, 0.97, 0.95, 0.990, 0.854, 128, 0.842, 128),
    standalone(5, 0.996, 0.98, 0.95, 0.990, 0.874, 128, 0.857, 128),
    standalone(6, 0.996, 0.99, 0.95, 0.990, 0.899, 256, 0.873, 128),
    standalone(7, 0.996, 0.99, 0.96, 0.995, 0.907, 256, 0.904, 256),
];

/// Optima of combined multiplexers next to the (roughly equal) standalone
/// optima `P_T = P_S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinedRow {
    pub row: usize,
    pub v_t: f64,
    pub v_r: f64,
    pub v_p: f64,
    pub v_t_s: f64,
    pub v_r_s: f64,
    pub v_p0_s: f64,
    pub p_standalone: f64,
    pub m_spatial: usize,
    pub n_time: usize,
    pub p_combined: f64,
    pub m_combined: usize,
    pub n_combined: usize,
}

impl CombinedRow {
    pub fn params(&self) -> LossParameters {
        LossParameters {
            v_r: self.v_r,
            v_t: self.v_t,
            v_r_s: self.v_r_s,
            v_t_s: self.v_t_s,
            v_p: self.v_p,
            v_p0_s: self.v_p0_s,
            v_b: 1.0,
            v_d: DETECTOR_EFFICIENCY,
        }
    }
}

#[allow(clippy::too_many_arguments)]
const fn combined(
    row: usize,
    splitters: [f64; 6],
    p_standalone: f64,
    m_spatial: usize,
    n_time: usize,
    p_combined: f64,
    m_combined: usize,
    n_combined: usize,
) -> CombinedRow {
    let [v_t, v_r, v_p, v_t_s, v_r_s, v_p0_s] = splitters;
    CombinedRow {
        row,
        v_t,
        v_r,
        v_p,
        v_t_s,
        v_r_s,
        v_p0_s,
        p_standalone,
        m_spatial,
        n_time,
        p_combined,
        m_combined,
        n_combined,
    }
}

pub const COMBINED_ROWS: [CombinedRow; 12] = [
    combined(1, [0.970, 0.996, 0.9500, 0.970, 0.996, 0.9922], 0.8545, 128, 128, 0.8531, 2, 64),
    combined(2, [0.988, 0.991, 0.9589, 0.988, 0.991, 0.9950], 0.8784, 128, 256, 0.8784, 2, 128),
    combined(3, [0.988, 0.992, 0.9568, 0.990, 0.991, 0.9949], 0.8812, 128, 256, 0.8806, 2, 128),
    combined(4, [0.988, 0.990, 0.9507, 0.988, 0.990, 0.9940], 0.8683, 128, 128, 0.8684, 2, 64),
    combined(5, [0.990, 0.996, 0.9297, 0.986, 0.993, 0.9950], 0.8834, 128, 256, 0.8840, 2, 128),
    combined(6, [0.990, 0.996, 0.9508, 0.990, 0.996, 0.9943], 0.8996, 256, 256, 0.8999, 2, 128),
    combined(7, [0.970, 0.993, 0.9606, 0.980, 0.993, 0.9910], 0.8506, 128, 128, 0.8475, 2, 64),
    combined(8, [0.980, 0.993, 0.9656, 0.990, 0.996, 0.9901], 0.8740, 128, 128, 0.8720, 2, 64),
    combined(9, [0.980, 0.996, 0.9655, 0.990, 0.992, 0.9950], 0.8860, 128, 256, 0.8822, 2, 128),
    combined(10, [0.980, 0.990, 0.9501, 0.970, 0.996, 0.9917], 0.8516, 128, 128, 0.8541, 2, 64),
    combined(11, [0.990, 0.991, 0.9493, 0.980, 0.995, 0.9940], 0.8762, 128, 256, 0.8799, 4, 64),
    combined(12, [0.990, 0.993, 0.9518, 0.980, 0.996, 0.9951], 0.8869, 128, 256, 0.8906, 4, 64),
];

/// Parameter sets of the published `P^(1)` versus `N` curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePreset {
    pub name: &'static str,
    pub params: LossParameters,
    pub max_m: usize,
}

pub const CURVE_PRESETS: [CurvePreset; 4] = [
    CurvePreset {
        name: "spatial_dominant",
        params: LossParameters {
            v_r: 0.996,
            v_t: 0.97,
            v_r_s: 0.996,
            v_t_s: 0.97,
            v_p: 0.95,
            v_p0_s: 0.996,
            v_b: 1.0,
            v_d: DETECTOR_EFFICIENCY,
        },
        max_m: 128,
    },
    CurvePreset {
        name: "time_dominant",
        params: LossParameters {
            v_r: 0.996,
            v_t: 0.97,
            v_r_s: 0.996,
            v_t_s: 0.97,
            v_p: 0.95,
            v_p0_s: 0.985,
            v_b: 1.0,
            v_d: DETECTOR_EFFICIENCY,
        },
        max_m: 128,
    },
    CurvePreset {
        name: "balanced_shared_splitters",
        params: LossParameters {
            v_r: 0.996,
            v_t: 0.97,
            v_r_s: 0.996,
            v_t_s: 0.97,
            v_p: 0.95,
            v_p0_s: 0.9922,
            v_b: 1.0,
            v_d: DETECTOR_EFFICIENCY,
        },
        max_m: 128,
    },
    CurvePreset {
        name: "balanced_distinct_splitters",
        params: LossParameters {
            v_r: 0.993,
            v_t: 0.99,
            v_r_s: 0.996,
            v_t_s: 0.98,
            v_p: 0.95,
            v_p0_s: 0.995,
            v_b: 1.0,
            v_d: DETECTOR_EFFICIENCY,
        },
        max_m: 128,
    },
];

pub fn time_only_spec(params: LossParameters) -> SweepSpec {
    SweepSpec::new(params, SourceKind::Poissonian, PriorityLogic::LowestLoss)
        .with_grid(vec![1], powers_of_two(0, 9))
}

pub fn spatial_only_spec(params: LossParameters) -> SweepSpec {
    SweepSpec::new(params, SourceKind::Poissonian, PriorityLogic::LowestLoss)
        .with_grid(powers_of_two(0, 9), vec![1])
}

pub fn combined_spec(params: LossParameters) -> SweepSpec {
    SweepSpec::new(params, SourceKind::Poissonian, PriorityLogic::LowestLoss)
        .with_grid(powers_of_two(1, 8), powers_of_two(1, 9))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= PROBABILITY_TOLERANCE
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandaloneReproduction {
    pub reference: StandaloneRow,
    pub time: SurfacePoint,
    pub spatial: SurfacePoint,
}

impl StandaloneReproduction {
    pub fn time_pass(&self) -> bool {
        close(self.time.p1, self.reference.p_time) && self.time.n == self.reference.n_time
    }

    pub fn spatial_pass(&self) -> bool {
        close(self.spatial.p1, self.reference.p_spatial)
            && self.spatial.m == self.reference.m_spatial
    }

    pub fn pass(&self) -> bool {
        self.time_pass() && self.spatial_pass()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedReproduction {
    pub reference: CombinedRow,
    pub time: SurfacePoint,
    pub spatial: SurfacePoint,
    pub combined: OptimizationResult,
}

impl CombinedReproduction {
    pub fn combined_optimum(&self) -> SurfacePoint {
        self.combined.global
    }

    /// Best value over every layout, standalone ones included.
    pub fn overall_optimum(&self) -> f64 {
        self.time.p1.max(self.spatial.p1).max(self.combined.global.p1)
    }

    pub fn standalone_pass(&self) -> bool {
        let r = &self.reference;
        close(self.time.p1, r.p_standalone)
            && close(self.spatial.p1, r.p_standalone)
            && self.time.n == r.n_time
            && self.spatial.m == r.m_spatial
    }

    pub fn combined_pass(&self) -> bool {
        let r = &self.reference;
        let g = self.combined.global;
        close(g.p1, r.p_combined) && g.m == r.m_combined && g.n == r.n_combined
    }

    pub fn pass(&self) -> bool {
        self.standalone_pass() && self.combined_pass()
    }

    /// `M_C * N_C == N_T` for the computed optima.
    pub fn product_regularity(&self) -> bool {
        let g = self.combined.global;
        g.m * g.n == self.time.n
    }
}

pub fn reproduce_standalone(row: &StandaloneRow) -> Result<StandaloneReproduction> {
    let params = row.params();
    let (time, spatial) = rayon::join(
        || sweep(&time_only_spec(params)),
        || sweep(&spatial_only_spec(params)),
    );
    Ok(StandaloneReproduction {
        reference: *row,
        time: time?.global,
        spatial: spatial?.global,
    })
}

pub fn reproduce_combined(row: &CombinedRow) -> Result<CombinedReproduction> {
    let params = row.params();
    let (standalone, combined) = rayon::join(
        || {
            rayon::join(
                || sweep(&time_only_spec(params)),
                || sweep(&spatial_only_spec(params)),
            )
        },
        || sweep(&combined_spec(params)),
    );
    let (time, spatial) = standalone;
    Ok(CombinedReproduction {
        reference: *row,
        time: time?.global,
        spatial: spatial?.global,
        combined: combined?,
    })
}

pub fn reproduce_all_standalone() -> Result<Vec<StandaloneReproduction>> {
    STANDALONE_ROWS.par_iter().map(reproduce_standalone).collect()
}

pub fn reproduce_all_combined() -> Result<Vec<CombinedReproduction>> {
    COMBINED_ROWS.par_iter().map(reproduce_combined).collect()
}
