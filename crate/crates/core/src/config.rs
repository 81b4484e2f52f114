//! Scenario configuration with the reference simulation defaults.
//!
//! Every parameter of a run lives in [`ScenarioConfig`], which round-trips
//! through JSON with snake_case field names. Unknown keys are rejected and
//! missing keys fall back to the defaults below.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Propagation speed of the sensing waveform (speed of light, m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Which scheduler drives the mobile chargers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchedulerPolicy {
    /// Charging-queue metric, ISAC locking and partial charging.
    #[serde(rename = "ISACM")]
    Isacm,
    /// Simplified baseline: nearest requester first, full charge, no ISAC.
    #[serde(rename = "NEAREST")]
    Nearest,
    /// Simplified baseline: oldest request first, full charge, no ISAC.
    #[serde(rename = "FCFS")]
    Fcfs,
}

impl SchedulerPolicy {
    pub const ALL: [SchedulerPolicy; 3] = [Self::Isacm, Self::Nearest, Self::Fcfs];

    pub fn name(self) -> &'static str {
        match self {
            Self::Isacm => "ISACM",
            Self::Nearest => "NEAREST",
            Self::Fcfs => "FCFS",
        }
    }

    pub fn is_baseline(self) -> bool {
        !matches!(self, Self::Isacm)
    }
}

impl fmt::Display for SchedulerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedulerPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "ISACM" => Ok(Self::Isacm),
            "NEAREST" => Ok(Self::Nearest),
            "FCFS" => Ok(Self::Fcfs),
            other => Err(format!("unknown policy '{other}' (expected ISACM, NEAREST or FCFS)")),
        }
    }
}

/// Parameters of the sensing waveform, the channel and the detection model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IsacConfig {
    pub sample_rate: f64,
    pub chirp_bandwidth: f64,
    pub pulse_duration: f64,
    /// Per-sample SNR in dB. `+inf` disables noise and serializes as `null`.
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    pub wave_speed: f64,
    /// Half-width of the uncertain annulus around the sensing radius.
    pub elfes_r_uncertain: f64,
    pub elfes_lambda: f64,
    pub elfes_beta: f64,
}

impl Default for IsacConfig {
    fn default() -> Self {
        Self {
            sample_rate: 100e6,
            chirp_bandwidth: 50e6,
            pulse_duration: 10e-6,
            snr_db: 10.0,
            wave_speed: SPEED_OF_LIGHT,
            elfes_r_uncertain: 5.0,
            elfes_lambda: 0.2,
            elfes_beta: 1.0,
        }
    }
}

impl IsacConfig {
    /// Number of samples in one pulse.
    pub fn pulse_samples(&self) -> usize {
        (self.pulse_duration * self.sample_rate).round() as usize
    }

    /// Distance covered by one sample of round-trip delay.
    pub fn range_bin(&self) -> f64 {
        self.wave_speed / (2.0 * self.sample_rate)
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr_db == f64::INFINITY
    }
}

mod snr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Complete description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub area_side: f64,
    pub n_devices: usize,
    pub n_mcvs: usize,
    pub comm_range: f64,
    pub sensing_range: f64,
    pub device_capacity: f64,
    pub request_threshold_frac: f64,
    pub mcv_capacity: f64,
    pub charge_rate: f64,
    pub mcv_speed: f64,
    pub travel_cost: f64,
    pub wpt_efficiency: f64,
    pub consumption_base_range: [f64; 2],
    pub consumption_degree_gain: f64,
    pub contact_epsilon: f64,
    pub return_reserve: f64,
    pub timestep: f64,
    pub sim_duration: f64,
    pub seed: u64,
    pub attribute_weights: [f64; 4],
    pub factor_floor: f64,
    pub isac: IsacConfig,
    pub scheduler_policy: SchedulerPolicy,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            area_side: 1000.0,
            n_devices: 100,
            n_mcvs: 3,
            comm_range: 50.0,
            sensing_range: 25.0,
            device_capacity: 0.5,
            request_threshold_frac: 0.3,
            mcv_capacity: 10_000.0,
            charge_rate: 0.05,
            mcv_speed: 5.0,
            travel_cost: 5.0,
            wpt_efficiency: 0.9,
            consumption_base_range: [1e-4, 1e-3],
            consumption_degree_gain: 0.1,
            contact_epsilon: 0.5,
            return_reserve: 200.0,
            timestep: 0.1,
            sim_duration: 6.0 * 3600.0,
            seed: 1,
            attribute_weights: [1.0; 4],
            factor_floor: 0.1,
            isac: IsacConfig::default(),
            scheduler_policy: SchedulerPolicy::Isacm,
        }
    }
}

/// One violated constraint, keyed by the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl ScenarioConfig {
    /// Energy level below which a device issues a charging request.
    pub fn request_threshold(&self) -> f64 {
        self.request_threshold_frac * self.device_capacity
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    /// Checks every constraint and reports all failures at once.
    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        let mut check = |ok: bool, field: &str, message: &str| {
            if !ok {
                out.push(Violation {
                    field: field.to_string(),
                    message: message.to_string(),
                });
            }
        };
        let pos = |v: f64| v.is_finite() && v > 0.0;

        check(pos(self.area_side), "area_side", "must be > 0");
        check(self.n_devices > 0, "n_devices", "must be at least 1");
        check(self.n_mcvs > 0, "n_mcvs", "must be at least 1");
        check(pos(self.comm_range), "comm_range", "must be > 0");
        check(pos(self.sensing_range), "sensing_range", "must be > 0");
        check(pos(self.device_capacity), "device_capacity", "must be > 0");
        check(
            self.request_threshold_frac > 0.0 && self.request_threshold_frac < 1.0,
            "request_threshold_frac",
            "must lie in (0, 1)",
        );
        check(pos(self.mcv_capacity), "mcv_capacity", "must be > 0");
        check(pos(self.charge_rate), "charge_rate", "must be > 0");
        check(pos(self.mcv_speed), "mcv_speed", "must be > 0");
        check(pos(self.travel_cost), "travel_cost", "must be > 0");
        check(
            self.wpt_efficiency > 0.0 && self.wpt_efficiency <= 1.0,
            "wpt_efficiency",
            "must lie in (0, 1]",
        );
        let [lo, hi] = self.consumption_base_range;
        check(
            pos(lo) && pos(hi) && lo <= hi,
            "consumption_base_range",
            "must be [min, max] with 0 < min <= max",
        );
        check(
            self.consumption_degree_gain.is_finite() && self.consumption_degree_gain >= 0.0,
            "consumption_degree_gain",
            "must be >= 0",
        );
        check(pos(self.contact_epsilon), "contact_epsilon", "must be > 0");
        check(pos(self.return_reserve), "return_reserve", "must be > 0");
        check(pos(self.timestep), "timestep", "must be > 0");
        check(
            self.sim_duration.is_finite() && self.sim_duration >= 0.0,
            "sim_duration",
            "must be >= 0",
        );
        check(
            self.attribute_weights.iter().all(|w| w.is_finite() && *w >= 0.0),
            "attribute_weights",
            "weights must be nonnegative",
        );
        check(
            self.attribute_weights.iter().sum::<f64>() > 0.0,
            "attribute_weights",
            "weights must not sum to zero",
        );
        check(
            (0.0..=1.0).contains(&self.factor_floor),
            "factor_floor",
            "must lie in [0, 1]",
        );

        let isac = &self.isac;
        check(pos(isac.sample_rate), "isac.sample_rate", "must be > 0");
        check(pos(isac.chirp_bandwidth), "isac.chirp_bandwidth", "must be > 0");
        check(
            isac.chirp_bandwidth <= isac.sample_rate,
            "isac.chirp_bandwidth",
            "must not exceed sample_rate",
        );
        check(pos(isac.pulse_duration), "isac.pulse_duration", "must be > 0");
        check(
            isac.pulse_duration * isac.sample_rate >= 64.0,
            "isac.pulse_duration",
            "pulse must span at least 64 samples",
        );
        check(
            !isac.snr_db.is_nan() && isac.snr_db != f64::NEG_INFINITY,
            "isac.snr_db",
            "must be a number or +inf",
        );
        check(pos(isac.wave_speed), "isac.wave_speed", "must be > 0");
        check(
            isac.elfes_r_uncertain.is_finite() && isac.elfes_r_uncertain >= 0.0,
            "isac.elfes_r_uncertain",
            "must be >= 0",
        );
        check(
            isac.elfes_r_uncertain < self.sensing_range,
            "isac.elfes_r_uncertain",
            "must be smaller than sensing_range",
        );
        check(pos(isac.elfes_lambda), "isac.elfes_lambda", "must be > 0");
        check(pos(isac.elfes_beta), "isac.elfes_beta", "must be > 0");

        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    /// `validate` mapped into the crate error type.
    pub fn ensure_valid(&self) -> Result<()> {
        self.validate().map_err(SimError::Config)
    }
}
