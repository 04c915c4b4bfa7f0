//! Net transmission probabilities of the bulk-optics combined multiplexer.
//!
//! A photon heralded in window `n` of arm `k` passes the binary-division
//! delay line of its time multiplexer and then the router tree of the
//! spatial multiplexer, so its survival probability factorises into a
//! window part and an arm part.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit_interval, Error, Result};

/// Optical and detector efficiencies, all in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParameters {
    /// PBS reflection efficiency in the time multiplexer.
    pub v_r: f64,
    /// PBS transmission efficiency in the time multiplexer.
    pub v_t: f64,
    /// PBS reflection efficiency in the spatial multiplexer.
    pub v_r_s: f64,
    /// PBS transmission efficiency in the spatial multiplexer.
    pub v_t_s: f64,
    /// Propagation efficiency of the longest delay of the time multiplexer.
    pub v_p: f64,
    /// Propagation efficiency of one router level.
    pub v_p0_s: f64,
    /// Window-independent generic transmission.
    pub v_b: f64,
    /// Heralding detector efficiency.
    pub v_d: f64,
}

impl Default for LossParameters {
    /// Lossless optics with a perfect detector.
    fn default() -> Self {
        Self {
            v_r: 1.0,
            v_t: 1.0,
            v_r_s: 1.0,
            v_t_s: 1.0,
            v_p: 1.0,
            v_p0_s: 1.0,
            v_b: 1.0,
            v_d: 1.0,
        }
    }
}

impl LossParameters {
    /// Same beam splitters in both multiplexers, `v_b = 1`.
    pub fn shared_splitters(v_r: f64, v_t: f64, v_p: f64, v_p0_s: f64, v_d: f64) -> Self {
        Self {
            v_r,
            v_t,
            v_r_s: v_r,
            v_t_s: v_t,
            v_p,
            v_p0_s,
            v_b: 1.0,
            v_d,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.named() {
            check_unit_interval(name, value)?;
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 8] {
        [
            ("v_r", self.v_r),
            ("v_t", self.v_t),
            ("v_r_s", self.v_r_s),
            ("v_t_s", self.v_t_s),
            ("v_p", self.v_p),
            ("v_p0_s", self.v_p0_s),
            ("v_b", self.v_b),
            ("v_d", self.v_d),
        ]
    }
}

/// Priority rule used by the spatial multiplexer to pick one heralded arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorityLogic {
    /// Wait for the end of the period and take the lowest-loss heralded arm.
    LowestLoss,
    /// Route the first heralded window; lowest arm label wins within a window.
    FirstDetection,
}

impl PriorityLogic {
    pub const ALL: [PriorityLogic; 2] = [PriorityLogic::LowestLoss, PriorityLogic::FirstDetection];

    pub fn as_str(&self) -> &'static str {
        match self {
            PriorityLogic::LowestLoss => "lowest_loss",
            PriorityLogic::FirstDetection => "first_detection",
        }
    }
}

impl std::fmt::Display for PriorityLogic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MultiplexerLayout {
    m: usize,
    n: usize,
    logic: PriorityLogic,
}

impl MultiplexerLayout {
    /// Layout of the built-in binary-tree geometry: `m` and `n` must be
    /// powers of two.
    pub fn new(m: usize, n: usize, logic: PriorityLogic) -> Result<Self> {
        check_power_of_two("M", m)?;
        check_power_of_two("N", n)?;
        Ok(Self { m, n, logic })
    }

    /// Layout for an externally supplied transmission matrix; any positive
    /// arm and window count.
    pub fn generic(m: usize, n: usize, logic: PriorityLogic) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::domain("layout needs at least one arm and one window"));
        }
        Ok(Self { m, n, logic })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn logic(&self) -> PriorityLogic {
        self.logic
    }

    pub fn with_logic(self, logic: PriorityLogic) -> Self {
        Self { logic, ..self }
    }

    pub fn cells(&self) -> usize {
        self.m * self.n
    }

    /// Position of cell `(arm, window)` (both 0-based) in the priority
    /// order; the selected cell is the first heralded one in this order.
    pub fn priority_rank(&self, arm: usize, window: usize) -> usize {
        match self.logic {
            PriorityLogic::LowestLoss => self.n * arm + window,
            PriorityLogic::FirstDetection => self.m * window + arm,
        }
    }
}

fn check_power_of_two(name: &str, value: usize) -> Result<()> {
    if value.is_power_of_two() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} = {value} is not a power of two")))
    }
}

/// `V_nk` for every arm (rows, in priority order) and window (columns).
///
/// Entries that are bitwise equal share a class index, which lets the
/// analytic engine evaluate the photon-number sums once per distinct value.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionMatrix {
    arms: usize,
    windows: usize,
    values: Vec<f64>,
    arm_order: Vec<usize>,
    distinct: Vec<f64>,
    class: Vec<u32>,
}

impl TransmissionMatrix {
    /// Matrix from explicit rows. Row order is the priority order of the
    /// arms (row 0 wins ties), so chained or otherwise non-tree spatial
    /// multiplexers can be described directly.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let arms = rows.len();
        let windows = rows.first().map_or(0, Vec::len);
        if arms == 0 || windows == 0 {
            return Err(Error::domain("transmission matrix must be non-empty"));
        }
        if rows.iter().any(|r| r.len() != windows) {
            return Err(Error::domain("transmission matrix rows differ in length"));
        }
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        Self::from_parts(arms, windows, values, (0..arms).collect())
    }

    fn from_parts(
        arms: usize,
        windows: usize,
        values: Vec<f64>,
        arm_order: Vec<usize>,
    ) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!(
                    "V[{}][{}] = {v} is outside [0, 1]",
                    i / windows,
                    i % windows
                )));
            }
        }
        let mut distinct: Vec<f64> = Vec::new();
        let mut index = std::collections::HashMap::new();
        let class = values
            .iter()
            .map(|v| {
                *index.entry(v.to_bits()).or_insert_with(|| {
                    distinct.push(*v);
                    (distinct.len() - 1) as u32
                })
            })
            .collect();
        Ok(Self {
            arms,
            windows,
            values,
            arm_order,
            distinct,
            class,
        })
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn windows(&self) -> usize {
        self.windows
    }

    /// `V` for 0-based `arm` and `window`.
    pub fn get(&self, arm: usize, window: usize) -> f64 {
        self.values[arm * self.windows + window]
    }

    pub fn row(&self, arm: usize) -> &[f64] {
        &self.values[arm * self.windows..(arm + 1) * self.windows]
    }

    /// `arm_order()[k]` is the physical arm placed at priority position `k`.
    pub fn arm_order(&self) -> &[usize] {
        &self.arm_order
    }

    pub fn distinct_values(&self) -> &[f64] {
        &self.distinct
    }

    /// Class index of each cell into [`distinct_values`](Self::distinct_values),
    /// row-major.
    pub fn classes(&self) -> &[u32] {
        &self.class
    }

    /// Copy with one entry replaced; used to build corrupted matrices for
    /// harness mutation checks.
    pub fn with_entry(&self, arm: usize, window: usize, value: f64) -> Result<Self> {
        let mut values = self.values.clone();
        values[arm * self.windows + window] = value;
        Self::from_parts(self.arms, self.windows, values, self.arm_order.clone())
    }
}

/// `V_n` of the binary-division time multiplexer for 1-based window `n`
/// out of `big_n`.
pub fn time_window_transmission(params: &LossParameters, n: usize, big_n: usize) -> Result<f64> {
    check_power_of_two("N", big_n)?;
    if n == 0 || n > big_n {
        return Err(Error::domain(format!(
            "window index {n} outside 1..={big_n}"
        )));
    }
    let remaining = big_n - n;
    let levels = big_n.trailing_zeros() as i32;
    let reflections = remaining.count_ones() as i32;
    let delay_fraction = remaining as f64 / big_n as f64;
    Ok(params.v_r.powi(reflections)
        * params.v_t.powi(levels - reflections)
        * params.v_p.powf(delay_fraction)
        * params.v_b)
}

/// Arm transmissions of an `m`-input router tree, with the physical arms
/// relabelled in descending order (stable on ties). Returns the sorted
/// transmissions and, for each sorted position, the physical arm index.
///
/// Physical arm `a` takes the transmitted port at every router level where
/// the corresponding bit of `a` is set.
pub fn spatial_arms_ordered(params: &LossParameters, m: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    check_power_of_two("M", m)?;
    let levels = m.trailing_zeros() as i32;
    let propagation = params.v_p0_s.powi(levels);
    let mut arms: Vec<(usize, f64)> = (0..m)
        .map(|a| {
            let transmissions = a.count_ones() as i32;
            let splitter = params.v_r_s.powi(levels - transmissions) * params.v_t_s.powi(transmissions);
            (a, propagation * splitter)
        })
        .collect();
    arms.sort_by(|x, y| y.1.total_cmp(&x.1));
    Ok(arms.into_iter().map(|(a, v)| (v, a)).unzip())
}

/// `V_k` for `k = 1..=m`, non-increasing.
pub fn spatial_arm_transmissions(params: &LossParameters, m: usize) -> Result<Vec<f64>> {
    spatial_arms_ordered(params, m).map(|(v, _)| v)
}

pub fn build_matrix(params: &LossParameters, layout: &MultiplexerLayout) -> Result<TransmissionMatrix> {
    params.validate()?;
    check_power_of_two("M", layout.m())?;
    check_power_of_two("N", layout.n())?;
    let (arms, order) = spatial_arms_ordered(params, layout.m())?;
    let windows = (1..=layout.n())
        .map(|n| time_window_transmission(params, n, layout.n()))
        .collect::<Result<Vec<_>>>()?;
    let values = arms
        .iter()
        .flat_map(|va| windows.iter().map(move |vn| va * vn))
        .collect();
    TransmissionMatrix::from_parts(layout.m(), layout.n(), values, order)
}
