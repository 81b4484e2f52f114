//! Evaluation metrics, seed aggregation and report serialization.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::config::{ScenarioConfig, SchedulerPolicy};
use crate::engine::{Event, EventKind, SimState};
use crate::error::{Result, SimError};
use crate::model::ChargingRequest;

/// Delivered energy over energy dispensed; `None` when nothing was dispensed.
pub fn energy_usage_efficiency(delivered: f64, dispensed: f64) -> Option<f64> {
    (dispensed > 0.0).then(|| delivered / dispensed)
}

/// Mean issue-to-completion time over fulfilled requests.
pub fn avg_charging_delay(requests: &[ChargingRequest]) -> Option<f64> {
    let delays: Vec<f64> = requests
        .iter()
        .filter_map(|r| r.fulfill_time.map(|f| f - r.issue_time))
        .collect();
    mean(&delays)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tour {
    pub distance: f64,
    /// Still open at the end of the run.
    pub unfinished: bool,
}

pub fn avg_tour_distance(tours: &[Tour]) -> Option<f64> {
    mean(&tours.iter().map(|t| t.distance).collect::<Vec<_>>())
}

/// Order-independent mean: values are summed in sorted order.
pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

/// Sample standard deviation; `None` below two values.
pub fn sample_sd(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let mut sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    sq.sort_by(f64::total_cmp);
    Some((sq.iter().sum::<f64>() / (values.len() - 1) as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McvBreakdown {
    pub mcv_id: usize,
    pub travel_distance: f64,
    pub completed_tours: usize,
    pub delivered: f64,
    pub fulfilled: usize,
    pub dispensed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub policy: SchedulerPolicy,
    pub seed: u64,
    pub n_devices: usize,
    pub energy_usage_efficiency: Option<f64>,
    pub avg_charging_delay: Option<f64>,
    pub avg_tour_distance: Option<f64>,
    pub completed_tours: usize,
    pub unfinished_tours: usize,
    pub total_travel_distance: f64,
    pub total_requests: usize,
    pub fulfilled_requests: usize,
    pub open_requests_at_end: usize,
    /// Requests lost because the device died first.
    pub dropped_requests: usize,
    pub dead_devices: usize,
    pub delivered_energy: f64,
    /// Energy handed out at depot refills.
    pub dispensed_energy: f64,
    /// Refills plus the top-up that restores every MCV to its starting charge.
    pub settled_dispensed_energy: f64,
    pub per_mcv: Vec<McvBreakdown>,
    pub config: ScenarioConfig,
}

impl MetricsReport {
    pub fn from_state(state: &SimState) -> Self {
        let cfg = &state.config;
        let mut tours = Vec::new();
        for m in &state.mcvs {
            tours.extend(m.completed_tours.iter().map(|&d| Tour {
                distance: d,
                unfinished: false,
            }));
            tours.push(Tour {
                distance: m.tour_distance,
                unfinished: true,
            });
        }
        let delivered: f64 = state.mcvs.iter().map(|m| m.delivered_total).sum();
        let dispensed: f64 = state.mcvs.iter().map(|m| m.dispensed_total).sum();
        // Equal to refills plus the end-of-run top-up by the ledger identity,
        // but free of the cancellation in (initial - final) on a near-full battery.
        let travel_energy: f64 = state.mcvs.iter().map(|m| m.travel_energy_total).sum();
        let settled = travel_energy + delivered / cfg.wpt_efficiency;
        let fulfilled = state.requests.iter().filter(|r| r.fulfill_time.is_some()).count();
        let dropped = state.requests.iter().filter(|r| r.dropped).count();

        Self {
            policy: cfg.scheduler_policy,
            seed: cfg.seed,
            n_devices: cfg.n_devices,
            energy_usage_efficiency: energy_usage_efficiency(delivered, settled),
            avg_charging_delay: avg_charging_delay(&state.requests),
            avg_tour_distance: avg_tour_distance(&tours),
            completed_tours: tours.iter().filter(|t| !t.unfinished).count(),
            unfinished_tours: tours.iter().filter(|t| t.unfinished).count(),
            total_travel_distance: state.mcvs.iter().map(|m| m.travel_distance_total).sum(),
            total_requests: state.requests.len(),
            fulfilled_requests: fulfilled,
            open_requests_at_end: state.requests.iter().filter(|r| r.is_open()).count(),
            dropped_requests: dropped,
            dead_devices: state.devices.iter().filter(|d| !d.is_alive()).count(),
            delivered_energy: delivered,
            dispensed_energy: dispensed,
            settled_dispensed_energy: settled,
            per_mcv: state
                .mcvs
                .iter()
                .map(|m| McvBreakdown {
                    mcv_id: m.id,
                    travel_distance: m.travel_distance_total,
                    completed_tours: m.completed_tours.len(),
                    delivered: m.delivered_total,
                    fulfilled: m.fulfilled,
                    dispensed: m.dispensed_total,
                })
                .collect(),
            config: cfg.clone(),
        }
    }

    /// Rebuilds the report from the event log and the run's configuration.
    pub fn from_events(events: &[Event], config: &ScenarioConfig) -> Self {
        let k = config.n_mcvs;
        let mut per: Vec<McvBreakdown> = (0..k)
            .map(|i| McvBreakdown {
                mcv_id: i,
                travel_distance: 0.0,
                completed_tours: 0,
                delivered: 0.0,
                fulfilled: 0,
                dispensed: 0.0,
            })
            .collect();
        let mut tours = Vec::new();
        let mut issued: BTreeMap<usize, f64> = BTreeMap::new();
        let mut delays = Vec::new();
        let (mut total, mut dropped, mut dead) = (0, 0, 0);

        for e in events {
            let mcv = e.mcv_id.filter(|&m| m < k);
            match e.kind {
                EventKind::Request => {
                    total += 1;
                    if let Some(d) = e.device_id {
                        issued.insert(d, e.time);
                    }
                }
                EventKind::ChargeComplete | EventKind::ChargeOpen => {
                    if let Some(m) = mcv {
                        per[m].delivered += e.value;
                        if e.kind == EventKind::ChargeComplete {
                            per[m].fulfilled += 1;
                        }
                    }
                    if e.kind == EventKind::ChargeComplete {
                        if let Some(t0) = e.device_id.and_then(|d| issued.remove(&d)) {
                            delays.push(e.time - t0);
                        }
                    }
                }
                EventKind::DepotReturn | EventKind::TourOpen => {
                    let unfinished = e.kind == EventKind::TourOpen;
                    tours.push(Tour {
                        distance: e.value,
                        unfinished,
                    });
                    if let Some(m) = mcv {
                        per[m].travel_distance += e.value;
                        if !unfinished {
                            per[m].completed_tours += 1;
                        }
                    }
                }
                EventKind::Refill => {
                    if let Some(m) = mcv {
                        per[m].dispensed += e.value;
                    }
                }
                EventKind::Death => {
                    dead += 1;
                    if e.device_id.and_then(|d| issued.remove(&d)).is_some() {
                        dropped += 1;
                    }
                }
                EventKind::Lock | EventKind::Contact | EventKind::PlanRejected => {}
            }
        }

        let delivered: f64 = per.iter().map(|m| m.delivered).sum();
        let travel: f64 = per.iter().map(|m| m.travel_distance).sum();
        let settled = config.travel_cost * travel + delivered / config.wpt_efficiency;
        let fulfilled = delays.len();

        Self {
            policy: config.scheduler_policy,
            seed: config.seed,
            n_devices: config.n_devices,
            energy_usage_efficiency: energy_usage_efficiency(delivered, settled),
            avg_charging_delay: mean(&delays),
            avg_tour_distance: avg_tour_distance(&tours),
            completed_tours: tours.iter().filter(|t| !t.unfinished).count(),
            unfinished_tours: tours.iter().filter(|t| t.unfinished).count(),
            total_travel_distance: travel,
            total_requests: total,
            fulfilled_requests: fulfilled,
            open_requests_at_end: total - fulfilled - dropped,
            dropped_requests: dropped,
            dead_devices: dead,
            delivered_energy: delivered,
            dispensed_energy: per.iter().map(|m| m.dispensed).sum(),
            settled_dispensed_energy: settled,
            per_mcv: per,
            config: config.clone(),
        }
    }

    /// Field-by-field comparison; floats within `rel` relative tolerance.
    pub fn mismatches(&self, other: &Self, rel: f64) -> Vec<String> {
        let close = |a: f64, b: f64| (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-30);
        let close_opt = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => close(a, b),
            (None, None) => true,
            _ => false,
        };
        let mut out = Vec::new();
        let mut f = |ok: bool, name: &str| {
            if !ok {
                out.push(name.to_string());
            }
        };
        f(self.policy == other.policy, "policy");
        f(self.seed == other.seed, "seed");
        f(self.n_devices == other.n_devices, "n_devices");
        f(close_opt(self.energy_usage_efficiency, other.energy_usage_efficiency), "energy_usage_efficiency");
        f(close_opt(self.avg_charging_delay, other.avg_charging_delay), "avg_charging_delay");
        f(close_opt(self.avg_tour_distance, other.avg_tour_distance), "avg_tour_distance");
        f(self.completed_tours == other.completed_tours, "completed_tours");
        f(self.unfinished_tours == other.unfinished_tours, "unfinished_tours");
        f(close(self.total_travel_distance, other.total_travel_distance), "total_travel_distance");
        f(self.total_requests == other.total_requests, "total_requests");
        f(self.fulfilled_requests == other.fulfilled_requests, "fulfilled_requests");
        f(self.open_requests_at_end == other.open_requests_at_end, "open_requests_at_end");
        f(self.dropped_requests == other.dropped_requests, "dropped_requests");
        f(self.dead_devices == other.dead_devices, "dead_devices");
        f(close(self.delivered_energy, other.delivered_energy), "delivered_energy");
        f(close(self.dispensed_energy, other.dispensed_energy), "dispensed_energy");
        f(close(self.settled_dispensed_energy, other.settled_dispensed_energy), "settled_dispensed_energy");
        f(self.per_mcv.len() == other.per_mcv.len(), "per_mcv");
        for (a, b) in self.per_mcv.iter().zip(&other.per_mcv) {
            let ok = a.mcv_id == b.mcv_id
                && a.completed_tours == b.completed_tours
                && a.fulfilled == b.fulfilled
                && close(a.travel_distance, b.travel_distance)
                && close(a.delivered, b.delivered)
                && close(a.dispensed, b.dispensed);
            f(ok, &format!("per_mcv[{}]", a.mcv_id));
        }
        f(self.config == other.config, "config");
        out
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Mean and sample sd of one metric across seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricStat {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub count: usize,
    /// Runs whose metric was undefined.
    pub excluded: usize,
}

impl MetricStat {
    pub fn from_values(values: &[Option<f64>]) -> Self {
        let present: Vec<f64> = values.iter().flatten().copied().collect();
        Self {
            mean: mean(&present),
            sd: sample_sd(&present),
            count: present.len(),
            excluded: values.len() - present.len(),
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> Option<f64> {
        Some(self.sd? / (self.count as f64).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub policy: SchedulerPolicy,
    pub n_devices: usize,
    pub seed_count: usize,
    pub eue: MetricStat,
    pub delay: MetricStat,
    pub tour: MetricStat,
    pub total_travel: MetricStat,
    pub dead: MetricStat,
    pub fulfilled: MetricStat,
    pub failed_runs: usize,
}

fn config_without_seed(c: &ScenarioConfig) -> ScenarioConfig {
    ScenarioConfig { seed: 0, ..c.clone() }
}

/// Aggregates reports that differ only in their seed.
pub fn aggregate(reports: &[MetricsReport]) -> Result<SummaryRow> {
    let first = reports
        .first()
        .ok_or_else(|| SimError::Aggregation("no reports to aggregate".into()))?;
    let reference = config_without_seed(&first.config);
    if let Some(r) = reports.iter().find(|r| config_without_seed(&r.config) != reference) {
        return Err(SimError::Aggregation(format!(
            "report for seed {} was produced with a different configuration",
            r.seed
        )));
    }
    let stat = |f: &dyn Fn(&MetricsReport) -> Option<f64>| {
        MetricStat::from_values(&reports.iter().map(f).collect::<Vec<_>>())
    };
    Ok(SummaryRow {
        policy: first.policy,
        n_devices: first.n_devices,
        seed_count: reports.len(),
        eue: stat(&|r| r.energy_usage_efficiency),
        delay: stat(&|r| r.avg_charging_delay),
        tour: stat(&|r| r.avg_tour_distance),
        total_travel: stat(&|r| Some(r.total_travel_distance)),
        dead: stat(&|r| Some(r.dead_devices as f64)),
        fulfilled: stat(&|r| Some(r.fulfilled_requests as f64)),
        failed_runs: 0,
    })
}

pub const SUMMARY_CSV_HEADER: &str = "policy,n_devices,seed_count,eue_mean,eue_sd,delay_mean_s,delay_sd_s,tour_mean_m,tour_sd_m,total_travel_mean_m,dead_mean,errors";

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl SummaryRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.policy,
            self.n_devices,
            self.seed_count,
            cell(self.eue.mean),
            cell(self.eue.sd),
            cell(self.delay.mean),
            cell(self.delay.sd),
            cell(self.tour.mean),
            cell(self.tour.sd),
            cell(self.total_travel.mean),
            cell(self.dead.mean),
            self.failed_runs
        )
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}
