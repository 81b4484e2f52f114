//! Fixed-timestep simulation loop.
//!
//! Each step runs its sub-phases in a fixed order: drain, requests, queue
//! refresh and dispatch, movement, ISAC detection, contact charging, and
//! depot returns. Events are stamped with the time at the end of the step.

use std::collections::BTreeSet;
use std::fmt;

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::charging::{full_charge_factors, make_charge_plan, queue_charge_factors, travel_energy};
use crate::config::{ScenarioConfig, SchedulerPolicy};
use crate::error::{Result, SimError};
use crate::graph::{betweenness_all, build_graph, NeighborGraph};
use crate::isac::{nearest_mcv, IsacSensor};
use crate::metrics::MetricsReport;
use crate::model::{
    generate_scenario, seeded_stream, ActiveCharge, ChargingRequest, DeviceState, Mcv, McvState,
    Point, RngStream, SensorDevice,
};
use crate::scheduler::{
    assign_targets, baseline_fcfs, baseline_nearest, build_queue, BaseState, QueueSnapshot,
};

/// Relative tolerance of the per-MCV energy ledger.
pub const LEDGER_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Request,
    Lock,
    Contact,
    ChargeComplete,
    PlanRejected,
    DepotReturn,
    Refill,
    Death,
    /// End of run: distance of each MCV's unfinished tour.
    TourOpen,
    /// End of run: energy delivered by a session still in progress.
    ChargeOpen,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Request => "request",
            Self::Lock => "lock",
            Self::Contact => "contact",
            Self::ChargeComplete => "charge_complete",
            Self::PlanRejected => "plan_rejected",
            Self::DepotReturn => "depot_return",
            Self::Refill => "refill",
            Self::Death => "death",
            Self::TourOpen => "tour_open",
            Self::ChargeOpen => "charge_open",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "request" => Self::Request,
            "lock" => Self::Lock,
            "contact" => Self::Contact,
            "charge_complete" => Self::ChargeComplete,
            "plan_rejected" => Self::PlanRejected,
            "depot_return" => Self::DepotReturn,
            "refill" => Self::Refill,
            "death" => Self::Death,
            "tour_open" => Self::TourOpen,
            "charge_open" => Self::ChargeOpen,
            _ => return None,
        })
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub device_id: Option<usize>,
    pub mcv_id: Option<usize>,
    pub value: f64,
}

pub const EVENT_CSV_HEADER: &str = "time_s,event_type,device_id,mcv_id,value";

impl Event {
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{}",
            self.time,
            self.kind,
            opt(self.device_id),
            opt(self.mcv_id),
            self.value
        )
    }

    pub fn parse_csv_row(line: &str) -> Result<Self> {
        let bad = || SimError::Input(format!("malformed event row: {line}"));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(bad());
        }
        let opt = |s: &str| -> Result<Option<usize>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad())
            }
        };
        Ok(Self {
            time: cols[0].parse().map_err(|_| bad())?,
            kind: EventKind::parse(cols[1]).ok_or_else(bad)?,
            device_id: opt(cols[2])?,
            mcv_id: opt(cols[3])?,
            value: cols[4].parse().map_err(|_| bad())?,
        })
    }
}

pub fn events_to_csv(events: &[Event]) -> String {
    let mut out = String::with_capacity(events.len() * 32 + 64);
    out.push_str(EVENT_CSV_HEADER);
    out.push('\n');
    for e in events {
        out.push_str(&e.csv_row());
        out.push('\n');
    }
    out
}

pub fn events_from_csv(text: &str) -> Result<Vec<Event>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == EVENT_CSV_HEADER => {}
        _ => return Err(SimError::Input("missing event log header".into())),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(Event::parse_csv_row)
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub dump_queues: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub events: Vec<Event>,
    pub queue_snapshots: Vec<QueueSnapshot>,
}

/// Complete mutable state of one run.
pub struct SimState {
    pub config: ScenarioConfig,
    pub clock: f64,
    pub steps: u64,
    pub devices: Vec<SensorDevice>,
    pub mcvs: Vec<Mcv>,
    pub base_position: Point,
    pub base: BaseState,
    pub requests: Vec<ChargingRequest>,
    pub graph: NeighborGraph,
    pub noise_rng: ChaCha8Rng,
    pub detect_rng: ChaCha8Rng,
    pub events: Vec<Event>,
    pub sensor: Option<IsacSensor>,
    pub queue_snapshots: Vec<QueueSnapshot>,
    dump_queues: bool,
    queues_dirty: bool,
    graph_dirty: bool,
    finished: bool,
}

impl SimState {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        Self::with_options(config, RunOptions::default())
    }

    pub fn with_options(config: &ScenarioConfig, options: RunOptions) -> Result<Self> {
        config.ensure_valid()?;
        let scenario = generate_scenario(config)?;
        let graph = build_graph(&scenario.devices, config.comm_range);
        let sensor = match config.scheduler_policy {
            SchedulerPolicy::Isacm => Some(IsacSensor::new(&config.isac, config.sensing_range)?),
            _ => None,
        };
        Ok(Self {
            config: config.clone(),
            clock: 0.0,
            steps: 0,
            base: BaseState::new(scenario.mcvs.len()),
            devices: scenario.devices,
            mcvs: scenario.mcvs,
            base_position: scenario.base_position,
            requests: Vec::new(),
            graph,
            noise_rng: seeded_stream(config.seed, RngStream::Noise),
            detect_rng: seeded_stream(config.seed, RngStream::Detection),
            events: Vec::new(),
            sensor,
            queue_snapshots: Vec::new(),
            dump_queues: options.dump_queues,
            queues_dirty: false,
            graph_dirty: false,
            finished: false,
        })
    }

    fn log(&mut self, time: f64, kind: EventKind, device: Option<usize>, mcv: Option<usize>, value: f64) {
        self.events.push(Event {
            time,
            kind,
            device_id: device,
            mcv_id: mcv,
            value,
        });
    }

    fn invariant(&self, message: impl Into<String>) -> SimError {
        SimError::Invariant {
            time: self.clock,
            message: format!("{}\n{}", message.into(), self.debug_dump()),
        }
    }

    /// Short human-readable dump of the MCV fleet and request book.
    pub fn debug_dump(&self) -> String {
        let mut s = format!(
            "state at t={:.3}s step {}: {} open requests, {} locks\n",
            self.clock,
            self.steps,
            self.base.open.len(),
            self.base.locks.len()
        );
        for m in &self.mcvs {
            s.push_str(&format!(
                "  mcv {} {:?} at ({:.2},{:.2}) energy {:.3} target {:?} locked {:?}\n",
                m.id, m.state, m.position.x, m.position.y, m.energy, m.current_target, m.locked
            ));
        }
        s
    }

    pub fn total_steps(&self) -> u64 {
        let ratio = self.config.sim_duration / self.config.timestep;
        (ratio - 1e-9).ceil().max(0.0) as u64
    }

    /// Advances the simulation by one timestep.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.config.timestep;
        let now = (self.steps + 1) as f64 * dt;

        self.drain_devices(now, dt);
        self.issue_requests(now);
        if self.graph_dirty {
            self.refresh_graph();
        }
        if self.queues_dirty {
            self.policy_dispatch(now)?;
        }
        self.move_mcvs(dt);
        if self.sensor.is_some() {
            self.isac_events(now)?;
        }
        self.contact_charging(now, dt)?;
        self.depot_returns(now)?;

        self.steps += 1;
        self.clock = now;
        self.check_invariants()
    }

    fn drain_devices(&mut self, now: f64, dt: f64) {
        let mut died = Vec::new();
        for d in self.devices.iter_mut() {
            if matches!(d.state, DeviceState::Active | DeviceState::Requesting) {
                d.energy -= d.consumption_rate * dt;
                if d.energy <= 0.0 {
                    d.energy = 0.0;
                    d.state = DeviceState::Dead;
                    died.push(d.id);
                }
            }
        }
        for id in died {
            self.log(now, EventKind::Death, Some(id), None, 0.0);
            self.handle_death(id);
        }
    }

    fn handle_death(&mut self, id: usize) {
        if let Some(r) = self.devices[id].open_request.take() {
            self.requests[r].dropped = true;
            self.requests[r].assigned_mcv = None;
        }
        self.base.close_request(id);
        for m in self.mcvs.iter_mut() {
            m.locked.retain(|&d| d != id);
            if m.current_target == Some(id) {
                m.current_target = None;
                if m.state == McvState::Traveling {
                    m.state = McvState::Idle;
                }
            }
        }
        self.graph_dirty = true;
        self.queues_dirty = true;
    }

    fn issue_requests(&mut self, now: f64) {
        let threshold = self.config.request_threshold();
        let mut issued = Vec::new();
        for d in self.devices.iter_mut() {
            if d.state == DeviceState::Active && d.energy <= threshold && d.open_request.is_none() {
                d.state = DeviceState::Requesting;
                d.open_request = Some(self.requests.len());
                self.requests.push(ChargingRequest::new(d.id, now));
                issued.push(d.id);
            }
        }
        for id in issued {
            self.base.open_request(id);
            self.log(now, EventKind::Request, Some(id), None, self.devices[id].energy);
            self.queues_dirty = true;
        }
    }

    fn refresh_graph(&mut self) {
        self.graph = build_graph(&self.devices, self.config.comm_range);
        let bc = betweenness_all(&self.graph);
        for d in self.devices.iter_mut() {
            match self.graph.index_of(d.id) {
                Some(i) => {
                    d.degree = self.graph.adjacency()[i].len();
                    d.betweenness = bc[i];
                }
                None => {
                    d.degree = 0;
                    d.betweenness = 0.0;
                }
            }
        }
        self.graph_dirty = false;
    }

    fn accepts_work(m: &Mcv) -> bool {
        matches!(m.state, McvState::Idle | McvState::Traveling | McvState::Charging)
    }

    /// Recomputes queues and hands out targets for the active policy.
    pub fn policy_dispatch(&mut self, now: f64) -> Result<()> {
        self.queues_dirty = false;
        match self.config.scheduler_policy {
            SchedulerPolicy::Isacm => self.dispatch_isacm(),
            SchedulerPolicy::Nearest | SchedulerPolicy::Fcfs => self.dispatch_baseline(now),
        }
    }

    fn dispatch_isacm(&mut self) -> Result<()> {
        let threshold = self.config.request_threshold();
        let requesters: Vec<&SensorDevice> = self
            .devices
            .iter()
            .filter(|d| d.state == DeviceState::Requesting)
            .collect();
        for m in &self.mcvs {
            let queue = if Self::accepts_work(m) {
                let cands = self.base.candidates_for(m.id, &requesters);
                build_queue(m.position, &cands, threshold, &self.config.attribute_weights)?
            } else {
                Vec::new()
            };
            self.base.queues[m.id] = queue;
        }
        if self.dump_queues {
            for m in &self.mcvs {
                self.queue_snapshots
                    .push(QueueSnapshot::new(self.steps, m.id, &self.base.queues[m.id]));
            }
        }

        // MCVs holding locked work serve it in lock order; the rest compete
        // for queue heads.
        let mut taken: BTreeSet<usize> = self.base.locks.keys().copied().collect();
        let mut free = Vec::new();
        for m in self.mcvs.iter_mut() {
            match m.state {
                McvState::Idle | McvState::Traveling => {
                    if let Some(&next) = m.locked.front() {
                        m.current_target = Some(next);
                        m.state = McvState::Traveling;
                    } else {
                        free.push(m.id);
                    }
                }
                _ => {}
            }
            if let Some(t) = m.current_target {
                if !free.contains(&m.id) {
                    taken.insert(t);
                }
            }
        }
        let assigned = assign_targets(&self.base.queues, &free, &taken);
        for id in free {
            let m = &mut self.mcvs[id];
            m.current_target = assigned.get(&id).copied();
            m.state = if m.current_target.is_some() {
                McvState::Traveling
            } else {
                McvState::Idle
            };
        }
        Ok(())
    }

    fn dispatch_baseline(&mut self, now: f64) -> Result<()> {
        for i in 0..self.mcvs.len() {
            if self.mcvs[i].state != McvState::Idle || self.mcvs[i].current_target.is_some() {
                continue;
            }
            let pick = {
                let unlocked: Vec<&SensorDevice> = self
                    .devices
                    .iter()
                    .filter(|d| d.state == DeviceState::Requesting)
                    .filter(|d| self.base.locked_to(d.id).is_none())
                    .collect();
                match self.config.scheduler_policy {
                    SchedulerPolicy::Nearest => {
                        baseline_nearest(self.mcvs[i].position, &unlocked).first().copied()
                    }
                    _ => {
                        let reqs: Vec<&ChargingRequest> = unlocked
                            .iter()
                            .filter_map(|d| d.open_request.map(|r| &self.requests[r]))
                            .collect();
                        baseline_fcfs(&reqs).first().copied()
                    }
                }
            };
            if let Some(device) = pick {
                self.lock(now, device, i, 0.0)?;
                let m = &mut self.mcvs[i];
                m.current_target = Some(device);
                m.state = McvState::Traveling;
            }
        }
        Ok(())
    }

    fn lock(&mut self, now: f64, device: usize, mcv: usize, value: f64) -> Result<()> {
        self.base.lock_assignment(device, mcv)?;
        if let Some(r) = self.devices[device].open_request {
            self.requests[r].assigned_mcv = Some(mcv);
        }
        let m = &mut self.mcvs[mcv];
        if !m.locked.contains(&device) {
            m.locked.push_back(device);
        }
        self.log(now, EventKind::Lock, Some(device), Some(mcv), value);
        Ok(())
    }

    fn move_mcvs(&mut self, dt: f64) {
        let step_len = self.config.mcv_speed * dt;
        for i in 0..self.mcvs.len() {
            let dest = match self.mcvs[i].state {
                McvState::Traveling => match self.mcvs[i].current_target {
                    Some(t) => {
                        let p = self.devices[t].position;
                        if self.mcvs[i].position.distance(&p) <= self.config.contact_epsilon {
                            continue;
                        }
                        p
                    }
                    None => continue,
                },
                McvState::Returning => self.base_position,
                _ => continue,
            };
            let m = &mut self.mcvs[i];
            let remaining = m.position.distance(&dest);
            let moved = if remaining <= step_len {
                m.position = dest;
                remaining
            } else {
                let f = step_len / remaining;
                m.position = Point::new(
                    m.position.x + (dest.x - m.position.x) * f,
                    m.position.y + (dest.y - m.position.y) * f,
                );
                step_len
            };
            let cost = travel_energy(moved, &self.config);
            m.energy -= cost;
            m.travel_energy_total += cost;
            m.travel_distance_total += moved;
            m.tour_distance += moved;
        }
    }

    /// Candidate devices for ISAC ranging: queue heads and soft targets that
    /// are not locked yet.
    fn isac_candidates(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for m in &self.mcvs {
            if !Self::accepts_work(m) {
                continue;
            }
            if let Some(h) = self.base.head(m.id) {
                out.insert(h);
            }
            if let Some(t) = m.current_target {
                out.insert(t);
            }
        }
        out.retain(|d| self.base.open.contains(d) && self.base.locked_to(*d).is_none());
        out
    }

    fn isac_events(&mut self, now: f64) -> Result<()> {
        let reach = match &self.sensor {
            Some(s) => s.reach(),
            None => return Ok(()),
        };
        for device in self.isac_candidates() {
            if let Some((mcv, action)) = self.isac_event(device, reach)? {
                self.apply_isac_lock(now, device, mcv, action)?;
            }
        }
        Ok(())
    }

    /// Runs the ranging chain for one device against its nearest queueing
    /// MCV. Returns the MCV and estimated distance on a positive detection.
    pub fn isac_event(&mut self, device: usize, reach: f64) -> Result<Option<(usize, f64)>> {
        let pos = self.devices[device].position;
        let queueing: Vec<(usize, Point)> = self
            .mcvs
            .iter()
            .filter(|m| Self::accepts_work(m))
            .filter(|m| {
                m.current_target == Some(device)
                    || self.base.queues[m.id].iter().any(|e| e.device_id == device)
            })
            .map(|m| (m.id, m.position))
            .collect();
        let Some((mcv, distance)) = nearest_mcv(pos, &queueing) else {
            return Ok(None);
        };
        if distance > reach {
            return Ok(None);
        }
        let sensor = self.sensor.as_ref().expect("isac sensor present");
        let result = sensor.sense(distance, &mut self.noise_rng, &mut self.detect_rng)?;
        Ok(result.detected.then_some((mcv, result.estimated_distance)))
    }

    fn apply_isac_lock(&mut self, now: f64, device: usize, mcv: usize, estimate: f64) -> Result<()> {
        self.lock(now, device, mcv, estimate)?;
        for m in self.mcvs.iter_mut() {
            if m.id != mcv && m.current_target == Some(device) {
                m.current_target = None;
                if m.state == McvState::Traveling {
                    m.state = McvState::Idle;
                }
            }
        }
        let m = &mut self.mcvs[mcv];
        if matches!(m.state, McvState::Idle | McvState::Traveling) {
            let soft = m.current_target.filter(|t| !m.locked.contains(t));
            if soft.is_some() || m.current_target.is_none() {
                m.current_target = m.locked.front().copied();
                m.state = McvState::Traveling;
            }
        }
        self.queues_dirty = true;
        Ok(())
    }

    fn contact_charging(&mut self, now: f64, dt: f64) -> Result<()> {
        for i in 0..self.mcvs.len() {
            match self.mcvs[i].state {
                McvState::Charging => self.continue_charge(i, now, dt)?,
                McvState::Traveling => self.try_start_charge(i, now)?,
                _ => {}
            }
        }
        Ok(())
    }

    fn continue_charge(&mut self, i: usize, now: f64, dt: f64) -> Result<()> {
        let eta = self.config.wpt_efficiency;
        let cap = self.config.device_capacity;
        let Some(session) = self.mcvs[i].charging.as_mut() else {
            return Err(self.invariant(format!("mcv {i} charging without a session")));
        };
        let remaining = session.target_delivery - session.delivered;
        let per_step = self.config.charge_rate * dt;
        let done = remaining <= per_step;
        let chunk = if done { remaining.max(0.0) } else { per_step };
        session.delivered += chunk;
        let device_id = session.device_id;

        let m = &mut self.mcvs[i];
        m.energy -= chunk / eta;
        m.expenditure_total += chunk / eta;
        m.delivered_total += chunk;
        let d = &mut self.devices[device_id];
        d.energy = (d.energy + chunk).min(cap);
        let r = d.open_request.expect("device under charge has a request");
        self.requests[r].delivered += chunk;

        if done {
            let delivered = self.requests[r].delivered;
            self.requests[r].fulfill_time = Some(now);
            let d = &mut self.devices[device_id];
            d.open_request = None;
            d.state = DeviceState::Active;
            self.base.close_request(device_id);
            let m = &mut self.mcvs[i];
            m.charging = None;
            m.locked.retain(|&x| x != device_id);
            m.current_target = None;
            m.state = McvState::Idle;
            m.fulfilled += 1;
            self.log(now, EventKind::ChargeComplete, Some(device_id), Some(i), delivered);
            self.queues_dirty = true;
        }
        Ok(())
    }

    fn try_start_charge(&mut self, i: usize, now: f64) -> Result<()> {
        let Some(target) = self.mcvs[i].current_target else {
            return Ok(());
        };
        let device = &self.devices[target];
        if device.state != DeviceState::Requesting
            || self.mcvs[i].position.distance(&device.position) > self.config.contact_epsilon
            || self.base.locked_to(target) != Some(i)
        {
            return Ok(());
        }

        let threshold = self.config.request_threshold();
        let factors = match self.config.scheduler_policy {
            SchedulerPolicy::Isacm => {
                let mut ids: Vec<usize> = self.base.queues[i]
                    .iter()
                    .map(|e| e.device_id)
                    .filter(|&d| self.devices[d].state == DeviceState::Requesting)
                    .collect();
                if !ids.contains(&target) {
                    ids.push(target);
                }
                let energies: Vec<f64> = ids.iter().map(|&d| self.devices[d].energy).collect();
                let all = queue_charge_factors(&energies, threshold, self.config.factor_floor)?;
                let pos = ids.iter().position(|&d| d == target).expect("target in list");
                all[pos]
            }
            _ => full_charge_factors(device.energy, threshold),
        };

        match make_charge_plan(device, &self.mcvs[i], self.base_position, factors, &self.config) {
            Ok(plan) => {
                self.devices[target].state = DeviceState::BeingCharged;
                let m = &mut self.mcvs[i];
                m.state = McvState::Charging;
                m.charging = Some(ActiveCharge {
                    device_id: target,
                    target_delivery: plan.delivered,
                    delivered: 0.0,
                });
                self.log(now, EventKind::Contact, Some(target), Some(i), plan.charge_factor);
                Ok(())
            }
            Err(SimError::InsufficientEnergy { required, .. }) => {
                self.log(now, EventKind::PlanRejected, Some(target), Some(i), required);
                self.send_home(i);
                Ok(())
            }
            Err(e) => Err(e),
        }
    }

    /// Releases every lock and target held by MCV `i` and heads it home.
    fn send_home(&mut self, i: usize) {
        let released: Vec<usize> = self.mcvs[i].locked.drain(..).collect();
        for d in released {
            self.base.unlock(d);
            if let Some(r) = self.devices[d].open_request {
                self.requests[r].assigned_mcv = None;
            }
        }
        let m = &mut self.mcvs[i];
        m.current_target = None;
        m.state = McvState::Returning;
        self.base.queues[i].clear();
        self.queues_dirty = true;
    }

    fn depot_returns(&mut self, now: f64) -> Result<()> {
        for i in 0..self.mcvs.len() {
            let m = &self.mcvs[i];
            match m.state {
                McvState::Idle | McvState::Traveling => {
                    let home = m.position.distance(&self.base_position);
                    let needed = travel_energy(home, &self.config) + self.config.return_reserve;
                    if m.energy < needed {
                        self.send_home(i);
                    }
                }
                McvState::Returning if m.position == self.base_position => {
                    self.refill(i, now)?;
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn refill(&mut self, i: usize, now: f64) -> Result<()> {
        let cap = self.config.mcv_capacity;
        let m = &mut self.mcvs[i];
        let amount = cap - m.energy;
        let tour = m.tour_distance;
        m.state = McvState::Recharging;
        m.dispensed_total += amount;
        m.energy = cap;
        m.completed_tours.push(tour);
        m.tour_distance = 0.0;
        m.state = McvState::Idle;
        self.log(now, EventKind::DepotReturn, None, Some(i), tour);
        self.log(now, EventKind::Refill, None, Some(i), amount);
        self.queues_dirty = true;
        self.check_ledger(i)
    }

    fn check_ledger(&self, i: usize) -> Result<()> {
        let m = &self.mcvs[i];
        let scale = m
            .dispensed_total
            .max(m.travel_energy_total + m.expenditure_total)
            .max(m.initial_energy)
            .max(1.0);
        if m.ledger_residual().abs() > LEDGER_TOLERANCE * scale {
            return Err(self.invariant(format!(
                "energy ledger of mcv {i} off by {:.3e} J",
                m.ledger_residual()
            )));
        }
        Ok(())
    }

    /// Global assertion sweep run after every step.
    pub fn check_invariants(&self) -> Result<()> {
        let cap = self.config.device_capacity;
        for d in &self.devices {
            if !(0.0..=cap).contains(&d.energy) {
                return Err(self.invariant(format!("device {} energy {} out of range", d.id, d.energy)));
            }
            match d.state {
                DeviceState::Dead => {
                    if d.open_request.is_some() || self.base.open.contains(&d.id) {
                        return Err(self.invariant(format!("dead device {} holds a request", d.id)));
                    }
                }
                DeviceState::Requesting | DeviceState::BeingCharged => {
                    if d.open_request.is_none() {
                        return Err(self.invariant(format!("device {} lost its request", d.id)));
                    }
                }
                DeviceState::Active => {}
            }
        }
        let mut targets = BTreeSet::new();
        for m in &self.mcvs {
            if !(0.0..=self.config.mcv_capacity).contains(&m.energy) {
                return Err(self.invariant(format!("mcv {} energy {} out of range", m.id, m.energy)));
            }
            if let Some(t) = m.current_target {
                if !targets.insert(t) {
                    return Err(self.invariant(format!("device {t} targeted by two MCVs")));
                }
                if self.devices[t].state == DeviceState::Dead {
                    return Err(self.invariant(format!("mcv {} targets dead device {t}", m.id)));
                }
            }
        }
        Ok(())
    }

    /// Closes the run: logs unfinished tours and sessions and checks ledgers.
    pub fn finish(&mut self) -> Result<()> {
        if self.finished {
            return Ok(());
        }
        self.finished = true;
        let now = self.clock;
        for i in 0..self.mcvs.len() {
            let tour = self.mcvs[i].tour_distance;
            self.log(now, EventKind::TourOpen, None, Some(i), tour);
            if let Some(s) = self.mcvs[i].charging.clone() {
                self.log(now, EventKind::ChargeOpen, Some(s.device_id), Some(i), s.delivered);
            }
            self.check_ledger(i)?;
        }
        Ok(())
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        let total = self.total_steps();
        while self.steps < total {
            self.step()?;
        }
        self.finish()
    }
}

pub fn run_with_options(config: &ScenarioConfig, options: RunOptions) -> Result<RunOutput> {
    let mut state = SimState::with_options(config, options)?;
    state.run_to_end()?;
    let report = MetricsReport::from_state(&state);
    Ok(RunOutput {
        report,
        events: state.events,
        queue_snapshots: state.queue_snapshots,
    })
}

/// Runs one scenario to completion.
pub fn run(config: &ScenarioConfig) -> Result<(MetricsReport, Vec<Event>)> {
    let out = run_with_options(config, RunOptions::default())?;
    Ok((out.report, out.events))
}
