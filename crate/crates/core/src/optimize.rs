//! Maximization of the single-photon probability.
//!
//! For every `(M, N)` the mean pair number λ is found by a coarse
//! logarithmic scan followed by golden-section refinement around the best
//! scan point; a sweep repeats this over an `(M, N)` grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{output_distribution, DEFAULT_I_MAX};
use crate::error::{Error, Result};
use crate::photon_stats::{herald_convolve, PairSourceModel, SourceKind};
use crate::transmission::{
    build_matrix, LossParameters, MultiplexerLayout, PriorityLogic, TransmissionMatrix,
};

pub const SCAN_POINTS: usize = 32;
pub const LAMBDA_TOLERANCE: f64 = 1e-5;

/// Lower end of the log scan when the lower bound is zero, relative to
/// the upper bound.
const SCAN_FLOOR: f64 = 1e-6;

/// Powers of two `2^0..=2^max_exp`.
pub fn powers_of_two(min_exp: u32, max_exp: u32) -> Vec<usize> {
    (min_exp..=max_exp).map(|e| 1usize << e).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaBounds {
    Absolute { lo: f64, hi: f64 },
    /// Upper bound scales with the number of windows: `hi = hi_per_window * N`.
    PerWindow { lo: f64, hi_per_window: f64 },
}

impl Default for LambdaBounds {
    fn default() -> Self {
        LambdaBounds::PerWindow {
            lo: 0.0,
            hi_per_window: 10.0,
        }
    }
}

impl LambdaBounds {
    pub fn resolve(&self, n: usize) -> (f64, f64) {
        match *self {
            LambdaBounds::Absolute { lo, hi } => (lo, hi),
            LambdaBounds::PerWindow { lo, hi_per_window } => (lo, hi_per_window * n as f64),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.resolve(1);
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
            return Err(Error::domain(format!(
                "lambda bounds need 0 <= lo < hi, got lo = {lo}, hi = {hi}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub m_values: Vec<usize>,
    pub n_values: Vec<usize>,
    pub lambda_bounds: LambdaBounds,
    pub params: LossParameters,
    pub source_kind: SourceKind,
    pub logic: PriorityLogic,
    /// Photon-number cut-off of the engine during the search.
    pub i_max: usize,
}

impl SweepSpec {
    /// Default grids `M, N in {2^0..2^9}` and default λ bounds.
    pub fn new(params: LossParameters, source_kind: SourceKind, logic: PriorityLogic) -> Self {
        Self {
            m_values: powers_of_two(0, 9),
            n_values: powers_of_two(0, 9),
            lambda_bounds: LambdaBounds::default(),
            params,
            source_kind,
            logic,
            i_max: DEFAULT_I_MAX,
        }
    }

    pub fn with_grid(mut self, m_values: Vec<usize>, n_values: Vec<usize>) -> Self {
        self.m_values = m_values;
        self.n_values = n_values;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_values.is_empty() || self.n_values.is_empty() {
            return Err(Error::domain("M and N grids must be non-empty"));
        }
        for &v in self.m_values.iter().chain(&self.n_values) {
            if !v.is_power_of_two() {
                return Err(Error::domain(format!("grid value {v} is not a power of two")));
            }
        }
        if self.i_max == 0 {
            return Err(Error::domain("i_max must be at least 1"));
        }
        self.lambda_bounds.validate()?;
        self.params.validate()
    }
}

/// `P^(1)` as a function of λ for a fixed layout.
#[derive(Debug, Clone)]
pub struct SinglePhotonObjective {
    kind: SourceKind,
    v_d: f64,
    layout: MultiplexerLayout,
    tm: TransmissionMatrix,
    i_max: usize,
}

impl SinglePhotonObjective {
    pub fn new(
        params: &LossParameters,
        kind: SourceKind,
        layout: MultiplexerLayout,
        i_max: usize,
    ) -> Result<Self> {
        let tm = build_matrix(params, &layout)?;
        Ok(Self::with_matrix(kind, params.v_d, layout, tm, i_max))
    }

    pub fn with_matrix(
        kind: SourceKind,
        v_d: f64,
        layout: MultiplexerLayout,
        tm: TransmissionMatrix,
        i_max: usize,
    ) -> Self {
        Self {
            kind,
            v_d,
            layout,
            tm,
            i_max,
        }
    }

    pub fn eval(&self, lambda: f64) -> Result<f64> {
        let model = PairSourceModel::new(self.kind, lambda, self.layout.n())?;
        let input = herald_convolve(&model, self.v_d, None)?;
        Ok(output_distribution(&input, &self.tm, &self.layout, self.i_max)?.p(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaOptimum {
    pub lambda_opt: f64,
    pub p1: f64,
    /// `false` when the coarse scan showed more than one local maximum.
    pub unimodal: bool,
}

/// Golden-section search for the maximum of `f` on `[a, b]`, stopping once
/// the bracket is narrower than `tol`.
pub fn golden_section_max<E>(
    mut f: impl FnMut(f64) -> std::result::Result<f64, E>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> std::result::Result<(f64, f64), E> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

/// Points of the coarse λ scan.
pub fn scan_grid(lo: f64, hi: f64) -> Vec<f64> {
    let start = if lo > 0.0 { lo } else { hi * SCAN_FLOOR };
    let ratio = (hi / start).ln() / (SCAN_POINTS - 1) as f64;
    (0..SCAN_POINTS)
        .map(|i| {
            if i == SCAN_POINTS - 1 {
                hi
            } else {
                start * (ratio * i as f64).exp()
            }
        })
        .collect()
}

fn count_local_maxima(values: &[f64]) -> usize {
    let last = values.len() - 1;
    (0..=last)
        .filter(|&i| {
            let left = i == 0 || values[i] > values[i - 1];
            let right = i == last || values[i] > values[i + 1];
            left && right && values[i] > 0.0
        })
        .count()
}

/// Maximizes `objective` over `[lo, hi]`.
pub fn maximize_lambda(
    objective: &SinglePhotonObjective,
    lo: f64,
    hi: f64,
) -> Result<LambdaOptimum> {
    let (m, n) = (objective.layout.m(), objective.layout.n());
    let grid = scan_grid(lo, hi);
    let values = grid
        .iter()
        .map(|&l| objective.eval(l))
        .collect::<Result<Vec<_>>>()?;
    let best = values
        .iter()
        .enumerate()
        .fold(0, |b, (i, v)| if *v > values[b] { i } else { b });

    let last = grid.len() - 1;
    if best == last {
        let h = hi * 1e-6;
        if objective.eval(hi)? > objective.eval(hi - h)? {
            return Err(Error::Bracket { m, n, lo, hi });
        }
    }
    if best == 0 && lo > 0.0 {
        let h = lo.max(1e-12) * 1e-6;
        if objective.eval(lo + h)? < objective.eval(lo)? {
            return Err(Error::Bracket { m, n, lo, hi });
        }
    }

    let unimodal = count_local_maxima(&values) <= 1;
    if !unimodal {
        tracing::warn!(m, n, "coarse lambda scan is not unimodal; refining around the best grid point");
    }

    let a = if best == 0 { lo } else { grid[best - 1] };
    let b = if best == last { hi } else { grid[best + 1] };
    let (x, fx) = golden_section_max(|l| objective.eval(l), a, b, LAMBDA_TOLERANCE)?;
    let (lambda_opt, p1) = if fx >= values[best] {
        (x, fx)
    } else {
        (grid[best], values[best])
    };
    Ok(LambdaOptimum {
        lambda_opt,
        p1,
        unimodal,
    })
}

/// λ maximizing `P^(1)` at `(m, n)` under the sweep settings.
pub fn optimize_lambda(m: usize, n: usize, spec: &SweepSpec) -> Result<LambdaOptimum> {
    let layout = MultiplexerLayout::new(m, n, spec.logic)?;
    let objective = SinglePhotonObjective::new(&spec.params, spec.source_kind, layout, spec.i_max)?;
    let (lo, hi) = spec.lambda_bounds.resolve(n);
    maximize_lambda(&objective, lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub m: usize,
    pub n: usize,
    pub lambda_opt: f64,
    pub p1: f64,
    pub unimodal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub logic: PriorityLogic,
    /// One point per grid cell, `m` major, in the order of the spec grids.
    pub surface: Vec<SurfacePoint>,
    pub global: SurfacePoint,
}

impl OptimizationResult {
    pub fn get(&self, m: usize, n: usize) -> Option<&SurfacePoint> {
        self.surface.iter().find(|p| p.m == m && p.n == n)
    }
}

/// Best point; ties go to the smaller `M*N`, then to the smaller `M`.
pub fn global_optimum(surface: &[SurfacePoint]) -> Option<SurfacePoint> {
    surface.iter().copied().reduce(|best, p| {
        let better = p.p1 > best.p1
            || (p.p1 == best.p1
                && (p.m * p.n, p.m) < (best.m * best.n, best.m));
        if better {
            p
        } else {
            best
        }
    })
}

pub fn sweep(spec: &SweepSpec) -> Result<OptimizationResult> {
    spec.validate()?;
    let cells: Vec<(usize, usize)> = spec
        .m_values
        .iter()
        .flat_map(|&m| spec.n_values.iter().map(move |&n| (m, n)))
        .collect();
    let surface = cells
        .par_iter()
        .map(|&(m, n)| {
            optimize_lambda(m, n, spec).map(|opt| SurfacePoint {
                m,
                n,
                lambda_opt: opt.lambda_opt,
                p1: opt.p1,
                unimodal: opt.unimodal,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let global = global_optimum(&surface).expect("validated grids are non-empty");
    Ok(OptimizationResult {
        logic: spec.logic,
        surface,
        global,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lossless() -> SweepSpec {
        SweepSpec::new(
            LossParameters::default(),
            SourceKind::Poissonian,
            PriorityLogic::LowestLoss,
        )
        .with_grid(vec![1], vec![1])
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, fx) = golden_section_max(
            |x: f64| Ok::<_, ()>(-(x - 0.3).powi(2) + 2.0),
            -1.0,
            4.0,
            1e-9,
        )
        .unwrap();
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-15);
    }

    #[test]
    fn lossless_single_source_peaks_at_unit_mean() {
        let opt = optimize_lambda(1, 1, &lossless()).unwrap();
        assert!((opt.lambda_opt - 1.0).abs() < LAMBDA_TOLERANCE);
        assert!((opt.p1 - (-1.0f64).exp()).abs() < 1e-9);
        assert!(opt.unimodal);
    }

    #[test]
    fn trivial_sweep_is_single_point() {
        let spec = lossless();
        let res = sweep(&spec).unwrap();
        assert_eq!(res.surface.len(), 1);
        let opt = optimize_lambda(1, 1, &spec).unwrap();
        assert_eq!(res.global.p1, opt.p1);
        assert_eq!(res.global.lambda_opt, opt.lambda_opt);
    }

    #[test]
    fn empty_or_invalid_grids_rejected() {
        let spec = lossless().with_grid(vec![], vec![1]);
        assert!(sweep(&spec).is_err());
        let spec = lossless().with_grid(vec![3], vec![1]);
        assert!(sweep(&spec).is_err());
    }

    #[test]
    fn narrow_upper_bound_is_bracket_failure() {
        let mut spec = lossless();
        spec.lambda_bounds = LambdaBounds::Absolute { lo: 0.0, hi: 0.5 };
        assert!(matches!(
            optimize_lambda(1, 1, &spec),
            Err(Error::Bracket { .. })
        ));
        spec.lambda_bounds = LambdaBounds::Absolute { lo: 2.0, hi: 8.0 };
        assert!(matches!(
            optimize_lambda(1, 1, &spec),
            Err(Error::Bracket { .. })
        ));
    }

    #[test]
    fn ties_prefer_smaller_systems() {
        let pt = |m, n, p1| SurfacePoint {
            m,
            n,
            lambda_opt: 1.0,
            p1,
            unimodal: true,
        };
        let g = global_optimum(&[pt(4, 4, 0.5), pt(2, 4, 0.5), pt(4, 2, 0.5), pt(1, 1, 0.4)]).unwrap();
        assert_eq!((g.m, g.n), (2, 4));
    }

    #[test]
    fn local_maxima_counter() {
        assert_eq!(count_local_maxima(&[0.0, 1.0, 2.0, 1.0, 0.5]), 1);
        assert_eq!(count_local_maxima(&[0.0, 1.0, 0.5, 1.0, 0.5]), 2);
        assert_eq!(count_local_maxima(&[0.0, 0.0, 0.0]), 0);
    }

    #[test]
    fn scan_grid_spans_bounds() {
        let g = scan_grid(0.0, 10.0);
        assert_eq!(g.len(), SCAN_POINTS);
        assert!((g[0] - 1e-5).abs() < 1e-18);
        assert_eq!(g[SCAN_POINTS - 1], 10.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn optimum_is_stable_under_small_perturbation() {
        let params = LossParameters::shared_splitters(0.996, 0.97, 0.95, 0.99, 0.9);
        let spec = SweepSpec::new(params, SourceKind::Poissonian, PriorityLogic::LowestLoss);
        for (m, n) in [(1, 16), (4, 8), (16, 1)] {
            let opt = optimize_lambda(m, n, &spec).unwrap();
            let layout = MultiplexerLayout::new(m, n, spec.logic).unwrap();
            let obj = SinglePhotonObjective::new(&params, spec.source_kind, layout, 1).unwrap();
            for d in [-1e-4, 1e-4] {
                assert!(obj.eval(opt.lambda_opt + d).unwrap() <= opt.p1 + 1e-9);
            }
        }
    }
}
