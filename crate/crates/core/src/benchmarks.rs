//! Benchmark systems: a longitudinal drone with uncertain mass (and
//! optionally an uncertain spring coefficient), a single room of a heated
//! building, and a three-compartment propofol model.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::{
    matrix_to_rows, BoxConfig, ModelConfig, NoiseConfig, PartitionConfig, RunConfig, TargetConfig,
};
use crate::error::{Error, Result};
use crate::geometry::HyperRectangle;
use crate::imdp::Objective;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkName {
    Drone,
    Drone2Param,
    Temperature,
    Anesthesia,
}

impl FromStr for BenchmarkName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drone" => Ok(Self::Drone),
            "drone-2param" => Ok(Self::Drone2Param),
            "temperature" => Ok(Self::Temperature),
            "anesthesia" => Ok(Self::Anesthesia),
            other => Err(Error::Config(format!(
                "unknown benchmark `{other}`; expected drone, drone-2param, temperature or anesthesia"
            ))),
        }
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    matrix_to_rows(m)
}

fn diag(values: &[f64]) -> Vec<Vec<f64>> {
    rows(&DMatrix::from_diagonal(&DVector::from_column_slice(values)))
}

/// Mass range of the drone.
pub const DRONE_MASS: (f64, f64) = (0.75, 1.25);
/// Noise standard deviation of the drone, per dimension.
pub const DRONE_NOISE_STD: f64 = 0.1;

/// State matrix and input matrix of the drone for mass `m` and spring
/// coefficient `zeta`, with unit time step.
pub fn drone_matrices(m: f64, zeta: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, -zeta / m, 1.0 - 0.1 / m]);
    let b = DMatrix::from_row_slice(2, 1, &[0.5 / m, 1.0 / m]);
    (a, b)
}

fn drone_base(a: Vec<Vec<Vec<f64>>>, b: Vec<Vec<Vec<f64>>>, alpha_hat: Vec<f64>) -> RunConfig {
    let var = DRONE_NOISE_STD * DRONE_NOISE_STD;
    RunConfig {
        seed: 1,
        samples: 20_000,
        confidence: 0.99,
        merge_radius: 0.01,
        horizon: 12,
        objective: Objective::ReachAvoid,
        output: None,
        model: ModelConfig {
            a,
            b,
            alpha_hat,
            control: vec![vec![-5.0], vec![5.0]],
            disturbance: None,
            noise: NoiseConfig::Gaussian {
                covariance: diag(&[var, var]),
            },
        },
        partition: PartitionConfig {
            lower: vec![-10.0, -10.0],
            upper: vec![14.0, 10.0],
            counts: vec![24, 20],
            goal: Some(BoxConfig {
                lower: vec![8.0, -10.0],
                upper: vec![14.0, 10.0],
            }),
            unsafe_boxes: Vec::new(),
        },
        // A unit cell cannot be reached exactly: with one input the image of a
        // cell is wider than a cell across the input direction.
        targets: TargetConfig::ScaledCells {
            scale: vec![2.0, 3.0],
        },
    }
}

/// Drone with mass in [0.75, 1.25] and nominal mass 1.
pub fn drone_config() -> RunConfig {
    let (a1, b1) = drone_matrices(DRONE_MASS.0, 0.0);
    let (a2, b2) = drone_matrices(DRONE_MASS.1, 0.0);
    drone_base(
        vec![rows(&a1), rows(&a2)],
        vec![rows(&b1), rows(&b2)],
        drone_alpha(1.0).iter().copied().collect(),
    )
}

/// The drone at nominal mass with parameter uncertainty ignored.
pub fn drone_baseline_config() -> RunConfig {
    let (a, b) = drone_matrices(1.0, 0.0);
    drone_base(vec![rows(&a)], vec![rows(&b)], vec![1.0])
}

/// Weights on the two mass vertices that reproduce mass `m`. The dynamics
/// are affine in `1/m`, so this is exact; outside the mass range the weights
/// leave the simplex.
pub fn drone_alpha(m: f64) -> DVector<f64> {
    let (lo, hi) = (1.0 / DRONE_MASS.0, 1.0 / DRONE_MASS.1);
    let w = (1.0 / m - hi) / (lo - hi);
    DVector::from_vec(vec![w, 1.0 - w])
}

/// Mass range of the two-parameter drone.
pub const DRONE2_MASS: (f64, f64) = (0.9, 1.1);
/// Spring coefficient range of the two-parameter drone.
pub const DRONE2_SPRING: (f64, f64) = (0.4, 0.6);

/// Drone with uncertain mass and spring coefficient; vertices are ordered
/// (m_lo, ζ_lo), (m_lo, ζ_hi), (m_hi, ζ_lo), (m_hi, ζ_hi).
pub fn drone_2param_config() -> RunConfig {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for m in [DRONE2_MASS.0, DRONE2_MASS.1] {
        for z in [DRONE2_SPRING.0, DRONE2_SPRING.1] {
            let (ai, bi) = drone_matrices(m, z);
            a.push(rows(&ai));
            b.push(rows(&bi));
        }
    }
    drone_base(a, b, drone_2param_alpha(1.0, 0.5).iter().copied().collect())
}

/// Vertex weights reproducing mass `m` and spring coefficient `zeta`. The
/// dynamics are affine in `(1/m, ζ/m)`, whose image of the parameter box is the
/// quadrilateral spanned by the four vertices.
pub fn drone_2param_alpha(m: f64, zeta: f64) -> DVector<f64> {
    let (lo, hi) = (1.0 / DRONE2_MASS.0, 1.0 / DRONE2_MASS.1);
    let w = (1.0 / m - hi) / (lo - hi);
    let v = (zeta - DRONE2_SPRING.0) / (DRONE2_SPRING.1 - DRONE2_SPRING.0);
    DVector::from_vec(vec![
        w * (1.0 - v),
        w * v,
        (1.0 - w) * (1.0 - v),
        (1.0 - w) * v,
    ])
}

/// Physical constants of one room and its radiator. Rates are per second,
/// temperatures in °C. The radiator's rated output is uncertain within
/// `power_range` around 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemperatureParams {
    pub step_seconds: f64,
    /// Zone thermal capacitance.
    pub capacitance: f64,
    pub wall_resistance: f64,
    pub wall_temperature: f64,
    /// Air mass flow times the specific heat of air.
    pub air_flow_heat: f64,
    pub supply_air_temperature: f64,
    /// Heat conductance between radiator and zone at rated output 1.
    pub radiator_conductance: f64,
    pub power_range: (f64, f64),
    /// Radiator-to-zone exchange rate.
    pub k1: f64,
    /// Boiler exchange rate times water mass flow.
    pub k0_flow: f64,
    /// Range of the boiler temperature, the control input.
    pub boiler_range: (f64, f64),
    /// Resistances to the adjacent rooms.
    pub neighbor_resistances: Vec<f64>,
    pub safe_range: (f64, f64),
    pub radiator_range: (f64, f64),
    pub zone_noise_variance: f64,
    pub radiator_noise_variance: f64,
}

impl Default for TemperatureParams {
    fn default() -> Self {
        let step = 1200.0;
        let capacitance = 2.0e5;
        Self {
            step_seconds: step,
            capacitance,
            wall_resistance: step / capacitance / 0.15,
            wall_temperature: 16.0,
            air_flow_heat: 0.05 * capacitance / step,
            supply_air_temperature: 18.0,
            radiator_conductance: 0.1 * capacitance / step,
            power_range: (0.8, 1.2),
            k1: 0.1 / step,
            k0_flow: 0.3 / step,
            boiler_range: (15.0, 60.0),
            neighbor_resistances: vec![step / capacitance / 0.005; 2],
            safe_range: (18.5, 23.5),
            radiator_range: (25.0, 40.0),
            zone_noise_variance: 0.002,
            radiator_noise_variance: 0.01,
        }
    }
}

/// Bound on the heat exchanged with neighboring rooms: every room's
/// temperature lies in `safe` (one interval per room), so the exchange
/// `Σ_j (T_j - T_room) / R_j` over `neighbors = [(j, R_j)]` lies in the
/// returned interval, multiplied by `scale` (the step over the capacitance).
pub fn decouple_disturbance_set(
    safe: &HyperRectangle,
    room: usize,
    neighbors: &[(usize, f64)],
    scale: f64,
) -> Result<HyperRectangle> {
    if room >= safe.dim() {
        return Err(Error::InvalidArgument(format!("room {room} out of range")));
    }
    let (mut lo, mut hi) = (0.0, 0.0);
    for &(j, r) in neighbors {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "resistance to room {j} must be positive, got {r}"
            )));
        }
        if j >= safe.dim() {
            return Err(Error::InvalidArgument(format!("room {j} out of range")));
        }
        lo += (safe.lower()[j] - safe.upper()[room]) / r;
        hi += (safe.upper()[j] - safe.lower()[room]) / r;
    }
    HyperRectangle::new(vec![scale * lo], vec![scale * hi])
}

/// Vertex matrices of the forward Euler discretization at the lowest and
/// highest radiator output, and the constant inflow per step.
pub fn temperature_matrices(
    p: &TemperatureParams,
) -> (Vec<DMatrix<f64>>, DMatrix<f64>, DVector<f64>) {
    let tau = p.step_seconds;
    let c = p.capacitance;
    let a_of = |power: f64| {
        let loss = 1.0 / p.wall_resistance + p.air_flow_heat + power * p.radiator_conductance;
        DMatrix::from_row_slice(
            2,
            2,
            &[
                1.0 - tau / c * loss,
                tau / c * power * p.radiator_conductance,
                tau * p.k1,
                1.0 - tau * (p.k1 + p.k0_flow),
            ],
        )
    };
    let a = vec![a_of(p.power_range.0), a_of(p.power_range.1)];
    let b = DMatrix::from_row_slice(2, 1, &[0.0, tau * p.k0_flow]);
    let inflow = DVector::from_vec(vec![
        tau / c
            * (p.wall_temperature / p.wall_resistance
                + p.air_flow_heat * p.supply_air_temperature),
        0.0,
    ]);
    (a, b, inflow)
}

/// Number of states a single-room abstraction reports for `counts` cells:
/// the cells, the absorbing state and two bookkeeping states of the
/// reference tool.
pub fn reported_state_count(regions: usize) -> usize {
    regions + 3
}

/// One room on a `counts[0] × counts[1]` grid over zone and radiator
/// temperature, kept inside the safe range for 15 steps. With `robust` false
/// the radiator output is fixed at its nominal value.
pub fn temperature_config(
    p: &TemperatureParams,
    counts: [usize; 2],
    robust: bool,
) -> Result<RunConfig> {
    let (a, b, inflow) = temperature_matrices(p);
    // All rooms share one safe range, so each neighbor can use index 0.
    let neighbors: Vec<(usize, f64)> = p
        .neighbor_resistances
        .iter()
        .map(|r| (0, *r))
        .collect();
    let safe = HyperRectangle::new(vec![p.safe_range.0], vec![p.safe_range.1])?;
    let exchange = decouple_disturbance_set(&safe, 0, &neighbors, p.step_seconds / p.capacitance)?;
    let disturbance = BoxConfig {
        lower: vec![inflow[0] + exchange.lower()[0], 0.0],
        upper: vec![inflow[0] + exchange.upper()[0], 0.0],
    };
    let w = temperature_alpha(p, 1.0)[0];
    let (a_list, b_list, alpha_hat) = if robust {
        (
            vec![rows(&a[0]), rows(&a[1])],
            vec![rows(&b), rows(&b)],
            vec![w, 1.0 - w],
        )
    } else {
        let nominal = &a[0] * w + &a[1] * (1.0 - w);
        (vec![rows(&nominal)], vec![rows(&b)], vec![1.0])
    };
    Ok(RunConfig {
        seed: 1,
        samples: 20_000,
        confidence: 0.99,
        merge_radius: 0.01,
        horizon: 15,
        objective: Objective::Invariance,
        output: None,
        model: ModelConfig {
            a: a_list,
            b: b_list,
            alpha_hat,
            control: vec![vec![p.boiler_range.0], vec![p.boiler_range.1]],
            disturbance: Some(disturbance),
            noise: NoiseConfig::Gaussian {
                covariance: diag(&[p.zone_noise_variance, p.radiator_noise_variance]),
            },
        },
        partition: PartitionConfig {
            lower: vec![p.safe_range.0, p.radiator_range.0],
            upper: vec![p.safe_range.1, p.radiator_range.1],
            counts: counts.to_vec(),
            goal: None,
            unsafe_boxes: Vec::new(),
        },
        targets: TargetConfig::ScaledCells {
            scale: vec![2.0, 1.0],
        },
    })
}

/// Vertex weights for radiator output `power` (affine outside the range).
pub fn temperature_alpha(p: &TemperatureParams, power: f64) -> DVector<f64> {
    let w = (p.power_range.1 - power) / (p.power_range.1 - p.power_range.0);
    DVector::from_vec(vec![w, 1.0 - w])
}

/// Pharmacokinetic constants of the three-compartment propofol model. These
/// are patient specific and must be supplied; there are no defaults. Rates
/// are per minute, the volume in liters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnesthesiaParams {
    pub k10: f64,
    pub k12: f64,
    pub k13: f64,
    pub k21: f64,
    pub k31: f64,
    pub v1: f64,
    /// Range of the infusion rate.
    pub input_range: (f64, f64),
    /// Relative uncertainty of `k10`, `k21` and `v1`.
    #[serde(default = "default_spread")]
    pub relative_spread: f64,
    #[serde(default = "default_step")]
    pub step_minutes: f64,
}

fn default_spread() -> f64 {
    0.1
}

fn default_step() -> f64 {
    1.0 / 3.0
}

impl AnesthesiaParams {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let p: AnesthesiaParams = toml::from_str(text).map_err(|e| {
            Error::Config(format!(
                "anesthesia parameters ({e}); the rate constants k10, k12, k13, k21, k31, \
                 the volume v1 and the input range are patient data from the literature \
                 and have no defaults"
            ))
        })?;
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let all = [self.k10, self.k12, self.k13, self.k21, self.k31, self.v1];
        if all.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config(
                "pharmacokinetic constants must be positive".into(),
            ));
        }
        if !(self.input_range.0 < self.input_range.1) {
            return Err(Error::Config("input range is empty".into()));
        }
        if !(self.relative_spread >= 0.0 && self.relative_spread < 1.0) {
            return Err(Error::Config("relative spread must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Zero-order-hold discretization for the given `k10`, `k21` and `v1`.
    pub fn discretize(&self, k10: f64, k21: f64, v1: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[
                -(k10 + self.k12 + self.k13),
                self.k12,
                self.k13,
                k21,
                -k21,
                0.0,
                self.k31,
                0.0,
                -self.k31,
            ],
        );
        let b = DMatrix::from_row_slice(3, 1, &[1.0 / v1, 0.0, 0.0]);
        zero_order_hold(&a, &b, self.step_minutes)
    }

    /// The eight vertex pairs, ordered with `v1` fastest and `k10` slowest.
    pub fn vertices(&self) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
        let s = self.relative_spread;
        let mut a = Vec::new();
        let mut b = Vec::new();
        for f10 in [1.0 - s, 1.0 + s] {
            for f21 in [1.0 - s, 1.0 + s] {
                for fv in [1.0 - s, 1.0 + s] {
                    let (ai, bi) = self.discretize(self.k10 * f10, self.k21 * f21, self.v1 * fv);
                    a.push(ai);
                    b.push(bi);
                }
            }
        }
        (a, b)
    }
}

/// Exact discretization of `ẋ = A x + B u` with `u` held for `dt`, via the
/// exponential of the augmented matrix `[[A, B], [0, 0]]`.
pub fn zero_order_hold(a: &DMatrix<f64>, b: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = (a.nrows(), b.ncols());
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(b * dt));
    let e = aug.exp();
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    )
}

/// The propofol model on a 20×20×20 grid of [1,6]×[0,10]×[0,10], kept inside
/// that box for 20 steps of 20 seconds. Vertex weights are uniform, which puts
/// the nominal parameter at the center of the uncertainty box only
/// approximately, since the discretization is not affine in the constants.
pub fn anesthesia_config(p: &AnesthesiaParams) -> Result<RunConfig> {
    p.validate()?;
    let (a, b) = p.vertices();
    let r = a.len();
    Ok(RunConfig {
        seed: 1,
        samples: 20_000,
        confidence: 0.99,
        merge_radius: 0.01,
        horizon: 20,
        objective: Objective::Invariance,
        output: None,
        model: ModelConfig {
            a: a.iter().map(rows).collect(),
            b: b.iter().map(rows).collect(),
            alpha_hat: vec![1.0 / r as f64; r],
            control: vec![vec![p.input_range.0], vec![p.input_range.1]],
            disturbance: None,
            noise: NoiseConfig::Gaussian {
                covariance: diag(&[1e-3; 3]),
            },
        },
        partition: PartitionConfig {
            lower: vec![1.0, 0.0, 0.0],
            upper: vec![6.0, 10.0, 10.0],
            counts: vec![20, 20, 20],
            goal: None,
            unsafe_boxes: Vec::new(),
        },
        targets: TargetConfig::ScaledCells {
            scale: vec![1.0, 2.0, 2.0],
        },
    })
}
