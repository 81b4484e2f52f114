//! Domain actors and seeded scenario generation.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Result, SimError};
use crate::graph::{betweenness_all, build_graph};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Independent random streams derived from one run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RngStream {
    Scenario = 0,
    Noise = 1,
    Detection = 2,
}

pub fn seeded_stream(seed: u64, stream: RngStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeviceState {
    Active,
    Requesting,
    BeingCharged,
    Dead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorDevice {
    pub id: usize,
    pub position: Point,
    pub energy: f64,
    pub state: DeviceState,
    pub consumption_rate: f64,
    pub degree: usize,
    pub betweenness: f64,
    /// Index into the engine's request list while a request is open.
    pub open_request: Option<usize>,
}

impl SensorDevice {
    pub fn is_alive(&self) -> bool {
        self.state != DeviceState::Dead
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum McvState {
    Idle,
    Traveling,
    Charging,
    Returning,
    Recharging,
}

/// Charging session in progress at a device.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveCharge {
    pub device_id: usize,
    pub target_delivery: f64,
    pub delivered: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mcv {
    pub id: usize,
    pub position: Point,
    pub energy: f64,
    pub state: McvState,
    pub current_target: Option<usize>,
    pub tour_distance: f64,
    /// Energy drawn from the base station at depot refills.
    pub dispensed_total: f64,
    pub initial_energy: f64,
    pub travel_distance_total: f64,
    pub travel_energy_total: f64,
    pub expenditure_total: f64,
    pub delivered_total: f64,
    pub completed_tours: Vec<f64>,
    pub fulfilled: usize,
    /// Devices locked to this MCV, in lock order.
    pub locked: VecDeque<usize>,
    pub charging: Option<ActiveCharge>,
}

impl Mcv {
    pub fn new(id: usize, position: Point, energy: f64) -> Self {
        Self {
            id,
            position,
            energy,
            state: McvState::Idle,
            current_target: None,
            tour_distance: 0.0,
            dispensed_total: 0.0,
            initial_energy: energy,
            travel_distance_total: 0.0,
            travel_energy_total: 0.0,
            expenditure_total: 0.0,
            delivered_total: 0.0,
            completed_tours: Vec::new(),
            fulfilled: 0,
            locked: VecDeque::new(),
            charging: None,
        }
    }

    /// Refill identity: dispensed = travel + expenditure + (energy - initial).
    pub fn ledger_residual(&self) -> f64 {
        self.dispensed_total
            - (self.travel_energy_total + self.expenditure_total + self.energy - self.initial_energy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargingRequest {
    pub device_id: usize,
    pub issue_time: f64,
    pub assigned_mcv: Option<usize>,
    pub fulfill_time: Option<f64>,
    pub delivered: f64,
    /// Set when the device died before the request was served.
    pub dropped: bool,
}

impl ChargingRequest {
    pub fn new(device_id: usize, issue_time: f64) -> Self {
        Self {
            device_id,
            issue_time,
            assigned_mcv: None,
            fulfill_time: None,
            delivered: 0.0,
            dropped: false,
        }
    }

    pub fn is_open(&self) -> bool {
        self.fulfill_time.is_none() && !self.dropped
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub devices: Vec<SensorDevice>,
    pub mcvs: Vec<Mcv>,
    pub base_position: Point,
}

/// Rows and columns of the `k`-cell grid: the factor pair closest to square,
/// with `cols >= rows`.
pub fn grid_shape(k: usize) -> (usize, usize) {
    let mut rows = (k as f64).sqrt().floor() as usize;
    while rows > 1 && !k.is_multiple_of(rows) {
        rows -= 1;
    }
    let rows = rows.max(1);
    (rows, k / rows)
}

/// Centroids of the `k` grid cells, row-major with x varying fastest.
pub fn grid_centroids(k: usize, side: f64) -> Vec<Point> {
    let (rows, cols) = grid_shape(k);
    (0..k)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            Point::new(
                (c as f64 + 0.5) * side / cols as f64,
                (r as f64 + 0.5) * side / rows as f64,
            )
        })
        .collect()
}

pub fn generate_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    if config.n_devices == 0 || config.n_mcvs == 0 {
        return Err(SimError::Setup(
            "scenario needs at least one device and one MCV".into(),
        ));
    }
    config.ensure_valid()?;

    let mut rng = seeded_stream(config.seed, RngStream::Scenario);
    let side = config.area_side;
    let [lo, hi] = config.consumption_base_range;

    let mut devices: Vec<SensorDevice> = (0..config.n_devices)
        .map(|id| {
            let x = rng.random::<f64>() * side;
            let y = rng.random::<f64>() * side;
            let base = if hi > lo { rng.random_range(lo..hi) } else { lo };
            SensorDevice {
                id,
                position: Point::new(x, y),
                energy: config.device_capacity,
                state: DeviceState::Active,
                consumption_rate: base,
                degree: 0,
                betweenness: 0.0,
                open_request: None,
            }
        })
        .collect();

    let graph = build_graph(&devices, config.comm_range);
    let bc = betweenness_all(&graph);
    for d in devices.iter_mut() {
        let deg = graph.degree_of(d.id).unwrap_or(0);
        d.degree = deg;
        d.betweenness = graph.index_of(d.id).map(|i| bc[i]).unwrap_or(0.0);
        d.consumption_rate *= 1.0 + config.consumption_degree_gain * deg as f64;
    }

    let mcvs = grid_centroids(config.n_mcvs, side)
        .into_iter()
        .enumerate()
        .map(|(id, p)| Mcv::new(id, p, config.mcv_capacity))
        .collect();

    Ok(Scenario {
        devices,
        mcvs,
        base_position: Point::new(side / 2.0, side / 2.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_station_at_center() {
        let s = generate_scenario(&ScenarioConfig::default()).unwrap();
        assert_eq!(s.base_position, Point::new(500.0, 500.0));
    }

    #[test]
    fn four_mcvs_on_two_by_two_grid() {
        let c = ScenarioConfig {
            n_mcvs: 4,
            ..Default::default()
        };
        let s = generate_scenario(&c).unwrap();
        let starts: Vec<_> = s.mcvs.iter().map(|m| (m.position.x, m.position.y)).collect();
        assert_eq!(
            starts,
            vec![(250.0, 250.0), (750.0, 250.0), (250.0, 750.0), (750.0, 750.0)]
        );
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(grid_shape(1), (1, 1));
        assert_eq!(grid_shape(3), (1, 3));
        assert_eq!(grid_shape(4), (2, 2));
        assert_eq!(grid_shape(6), (2, 3));
        assert_eq!(grid_shape(9), (3, 3));
    }

    #[test]
    fn same_seed_same_layout() {
        let c = ScenarioConfig::default();
        let a = generate_scenario(&c).unwrap();
        let b = generate_scenario(&c).unwrap();
        assert_eq!(a.devices, b.devices);
        let other = generate_scenario(&ScenarioConfig { seed: 2, ..c }).unwrap();
        assert_ne!(a.devices[0].position, other.devices[0].position);
    }

    #[test]
    fn devices_inside_area_with_scaled_consumption() {
        let c = ScenarioConfig {
            n_devices: 300,
            ..Default::default()
        };
        let s = generate_scenario(&c).unwrap();
        for d in &s.devices {
            assert!((0.0..=c.area_side).contains(&d.position.x));
            assert!((0.0..=c.area_side).contains(&d.position.y));
            let base = d.consumption_rate / (1.0 + 0.1 * d.degree as f64);
            assert!((1e-4..1e-3 + 1e-15).contains(&base));
            assert_eq!(d.energy, c.device_capacity);
        }
    }

    #[test]
    fn zero_devices_is_config_error() {
        let c = ScenarioConfig {
            n_devices: 0,
            ..Default::default()
        };
        assert!(matches!(generate_scenario(&c), Err(SimError::Setup(_))));
    }
}
