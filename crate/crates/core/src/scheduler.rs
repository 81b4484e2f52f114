//! Charging load strategy: per-MCV prioritized queues kept at the base
//! station, ISAC-triggered locking, and the two simplified baseline orders.
//!
//! Each requesting device is scored on four attributes (residual energy,
//! distance to the MCV, degree, betweenness). Raw scores are min-max
//! normalized over the MCV's candidate set, so every attribute lands in
//! `[0, 1]` with 1 meaning "serve first". The queue metric is their weighted
//! mean; equal weights give the plain average.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Result, SimError};
use crate::model::{ChargingRequest, Point, SensorDevice};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttributeVector {
    pub p_energy: f64,
    pub p_distance: f64,
    pub p_degree: f64,
    pub p_betweenness: f64,
}

impl AttributeVector {
    pub fn as_array(&self) -> [f64; 4] {
        [self.p_energy, self.p_distance, self.p_degree, self.p_betweenness]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QueueEntry {
    pub device_id: usize,
    pub metric: f64,
    pub attributes: AttributeVector,
}

/// Min-max normalization; a degenerate range maps everything to 1.
pub fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![1.0; values.len()];
    }
    let span = hi - lo;
    values.iter().map(|v| ((v - lo) / span).clamp(0.0, 1.0)).collect()
}

/// Normalized attributes of every requester relative to an MCV at `mcv_position`.
pub fn compute_attributes(
    requesters: &[&SensorDevice],
    mcv_position: Point,
    request_threshold: f64,
) -> Result<BTreeMap<usize, AttributeVector>> {
    if requesters.is_empty() {
        return Ok(BTreeMap::new());
    }
    if !mcv_position.is_finite() {
        return Err(SimError::Input("MCV position is not finite".into()));
    }
    if let Some(d) = requesters.iter().find(|d| !d.position.is_finite()) {
        return Err(SimError::Input(format!("device {} position is not finite", d.id)));
    }

    let raw = |f: &dyn Fn(&SensorDevice) -> f64| -> Vec<f64> {
        requesters.iter().map(|d| f(d)).collect()
    };
    let energy = min_max(&raw(&|d| request_threshold - d.energy));
    let distance = min_max(&raw(&|d| -d.position.distance(&mcv_position)));
    let degree = min_max(&raw(&|d| d.degree as f64));
    let betweenness = min_max(&raw(&|d| d.betweenness));

    Ok(requesters
        .iter()
        .enumerate()
        .map(|(i, d)| {
            (
                d.id,
                AttributeVector {
                    p_energy: energy[i],
                    p_distance: distance[i],
                    p_degree: degree[i],
                    p_betweenness: betweenness[i],
                },
            )
        })
        .collect())
}

pub fn queue_metric(attrs: &AttributeVector, weights: &[f64; 4]) -> Result<f64> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|w| *w < 0.0) {
        return Err(SimError::Setup(
            "attribute weights must be nonnegative with a positive sum".into(),
        ));
    }
    let p = attrs.as_array();
    let weighted: f64 = weights.iter().zip(p.iter()).map(|(w, v)| w * v).sum();
    Ok((weighted / total).clamp(0.0, 1.0))
}

/// Metric descending, device id ascending on ties.
pub fn sort_queue(entries: &mut [QueueEntry]) {
    entries.sort_by(|a, b| {
        b.metric
            .total_cmp(&a.metric)
            .then(a.device_id.cmp(&b.device_id))
    });
}

/// Ordered queue for one MCV. `requesters` must already exclude devices
/// locked to other MCVs; [`BaseState::candidates_for`] does that filtering.
pub fn build_queue(
    mcv_position: Point,
    requesters: &[&SensorDevice],
    request_threshold: f64,
    weights: &[f64; 4],
) -> Result<Vec<QueueEntry>> {
    let attrs = compute_attributes(requesters, mcv_position, request_threshold)?;
    let mut entries = attrs
        .into_iter()
        .map(|(device_id, attributes)| {
            Ok(QueueEntry {
                device_id,
                metric: queue_metric(&attributes, weights)?,
                attributes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    sort_queue(&mut entries);
    Ok(entries)
}

/// Scheduling state held by the base station.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BaseState {
    /// Devices with an open request.
    pub open: BTreeSet<usize>,
    /// device id -> MCV id.
    pub locks: BTreeMap<usize, usize>,
    pub queues: Vec<Vec<QueueEntry>>,
}

impl BaseState {
    pub fn new(n_mcvs: usize) -> Self {
        Self {
            open: BTreeSet::new(),
            locks: BTreeMap::new(),
            queues: vec![Vec::new(); n_mcvs],
        }
    }

    pub fn open_request(&mut self, device_id: usize) {
        self.open.insert(device_id);
    }

    /// Closes a request (fulfilled or dropped) and forgets its lock.
    pub fn close_request(&mut self, device_id: usize) {
        self.open.remove(&device_id);
        self.locks.remove(&device_id);
        for q in self.queues.iter_mut() {
            q.retain(|e| e.device_id != device_id);
        }
    }

    pub fn locked_to(&self, device_id: usize) -> Option<usize> {
        self.locks.get(&device_id).copied()
    }

    /// Assigns `device_id` exclusively to `mcv_id` and drops it from every
    /// other MCV's queue.
    pub fn lock_assignment(&mut self, device_id: usize, mcv_id: usize) -> Result<()> {
        if !self.open.contains(&device_id) {
            return Err(SimError::Precondition(format!(
                "device {device_id} has no open request to lock"
            )));
        }
        match self.locks.get(&device_id) {
            Some(&m) if m != mcv_id => {
                return Err(SimError::LockConflict {
                    device: device_id,
                    locked_to: m,
                    requested: mcv_id,
                })
            }
            Some(_) => {}
            None => {
                self.locks.insert(device_id, mcv_id);
            }
        }
        for (m, q) in self.queues.iter_mut().enumerate() {
            if m != mcv_id {
                q.retain(|e| e.device_id != device_id);
            }
        }
        Ok(())
    }

    pub fn unlock(&mut self, device_id: usize) {
        self.locks.remove(&device_id);
    }

    /// Open requesters that `mcv_id` may queue: not locked elsewhere.
    pub fn candidates_for<'a>(
        &self,
        mcv_id: usize,
        requesters: &[&'a SensorDevice],
    ) -> Vec<&'a SensorDevice> {
        requesters
            .iter()
            .filter(|d| self.open.contains(&d.id))
            .filter(|d| self.locked_to(d.id).is_none_or(|m| m == mcv_id))
            .copied()
            .collect()
    }

    pub fn head(&self, mcv_id: usize) -> Option<usize> {
        self.queues.get(mcv_id)?.first().map(|e| e.device_id)
    }
}

/// Greedy conflict-free target choice across MCVs.
///
/// Every MCV in `free` proposes the best entry of its queue not already taken.
/// When several propose the same device, the highest metric wins (lower MCV id
/// on ties); losers propose again. `taken` seeds the set of devices held by
/// MCVs outside `free`.
pub fn assign_targets(
    queues: &[Vec<QueueEntry>],
    free: &[usize],
    taken: &BTreeSet<usize>,
) -> BTreeMap<usize, usize> {
    let mut taken = taken.clone();
    let mut result = BTreeMap::new();
    let mut pending: Vec<usize> = free.to_vec();
    pending.sort_unstable();

    while !pending.is_empty() {
        let proposals: Vec<(usize, QueueEntry)> = pending
            .iter()
            .filter_map(|&m| {
                queues
                    .get(m)?
                    .iter()
                    .find(|e| !taken.contains(&e.device_id))
                    .map(|e| (m, *e))
            })
            .collect();
        if proposals.is_empty() {
            break;
        }
        let mut winners: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
        for (m, e) in &proposals {
            let better = match winners.get(&e.device_id) {
                None => true,
                Some(&(wm, wmetric)) => e.metric > wmetric || (e.metric == wmetric && *m < wm),
            };
            if better {
                winners.insert(e.device_id, (*m, e.metric));
            }
        }
        for (device, (m, _)) in winners {
            taken.insert(device);
            result.insert(m, device);
        }
        let proposers: BTreeSet<usize> = proposals.iter().map(|(m, _)| *m).collect();
        pending.retain(|m| proposers.contains(m) && !result.contains_key(m));
    }
    result
}

/// Nearest-first order; ties broken by ascending id.
pub fn baseline_nearest(mcv_position: Point, requesters: &[&SensorDevice]) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = requesters
        .iter()
        .map(|d| (d.position.distance(&mcv_position), d.id))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, id)| id).collect()
}

/// Oldest request first; ties broken by ascending device id.
pub fn baseline_fcfs(requests: &[&ChargingRequest]) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = requests
        .iter()
        .map(|r| (r.issue_time, r.device_id))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, id)| id).collect()
}

/// One line of the queue debug dump.
#[derive(Debug, Clone, Serialize)]
pub struct QueueSnapshot {
    pub step: u64,
    pub mcv_id: usize,
    pub device_ids: Vec<usize>,
    pub metrics: Vec<f64>,
}

impl QueueSnapshot {
    pub fn new(step: u64, mcv_id: usize, queue: &[QueueEntry]) -> Self {
        Self {
            step,
            mcv_id,
            device_ids: queue.iter().map(|e| e.device_id).collect(),
            metrics: queue.iter().map(|e| e.metric).collect(),
        }
    }
}
