//! Charging factor strategy and wireless energy transfer accounting.
//!
//! The partial-charge amount for each device in an MCV queue is built in
//! stages: criticality from residual energy, a weighted factor from the
//! queue's criticality range, a control factor worth 10% of the residual
//! energy priority, and finally the clamped sum of the two.

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::error::{Result, SimError};
use crate::model::{Mcv, Point, SensorDevice};
use crate::scheduler::min_max;

/// Share of the residual-energy priority added as the control factor.
pub const CONTROL_FACTOR_SHARE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChargeFactors {
    pub criticality: f64,
    pub weighted_factor: f64,
    pub control_factor: f64,
    pub charge_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChargePlan {
    pub device_id: usize,
    pub criticality: f64,
    pub weighted_factor: f64,
    pub control_factor: f64,
    pub charge_factor: f64,
    pub delivered: f64,
    pub duration: f64,
    pub mcv_expenditure: f64,
}

/// How far below the request threshold a device has fallen, in `[0, 1]`.
pub fn criticality(energy: f64, threshold: f64) -> Result<f64> {
    if energy > threshold || energy < 0.0 {
        return Err(SimError::Precondition(format!(
            "criticality needs 0 <= e <= e_thr, got e = {energy}, e_thr = {threshold}"
        )));
    }
    Ok((threshold - energy) / threshold)
}

pub fn weighted_factors(criticalities: &[f64]) -> Vec<f64> {
    min_max(criticalities)
}

pub fn charge_factor(weighted: f64, p_energy: f64, factor_floor: f64) -> f64 {
    let control = CONTROL_FACTOR_SHARE * p_energy;
    (weighted + control).clamp(factor_floor, 1.0)
}

/// Runs the full factor pipeline over one MCV queue, given each device's
/// residual energy. `p_energy` is normalized over the same queue.
pub fn queue_charge_factors(
    energies: &[f64],
    threshold: f64,
    factor_floor: f64,
) -> Result<Vec<ChargeFactors>> {
    let crit = energies
        .iter()
        .map(|&e| criticality(e, threshold))
        .collect::<Result<Vec<_>>>()?;
    let weighted = weighted_factors(&crit);
    let p_energy = min_max(&energies.iter().map(|e| threshold - e).collect::<Vec<_>>());
    Ok(crit
        .iter()
        .zip(weighted.iter().zip(p_energy.iter()))
        .map(|(&c, (&w, &p))| ChargeFactors {
            criticality: c,
            weighted_factor: w,
            control_factor: CONTROL_FACTOR_SHARE * p,
            charge_factor: charge_factor(w, p, factor_floor),
        })
        .collect())
}

/// Factors for the baseline full-charge policy.
pub fn full_charge_factors(energy: f64, threshold: f64) -> ChargeFactors {
    ChargeFactors {
        criticality: ((threshold - energy) / threshold).clamp(0.0, 1.0),
        weighted_factor: 1.0,
        control_factor: 0.0,
        charge_factor: 1.0,
    }
}

/// Plan arithmetic only: delivered, duration and MCV-side cost.
pub fn plan_amounts(device: &SensorDevice, factors: ChargeFactors, config: &ScenarioConfig) -> ChargePlan {
    let delivered = factors.charge_factor * (config.device_capacity - device.energy);
    ChargePlan {
        device_id: device.id,
        criticality: factors.criticality,
        weighted_factor: factors.weighted_factor,
        control_factor: factors.control_factor,
        charge_factor: factors.charge_factor,
        delivered,
        duration: delivered / config.charge_rate,
        mcv_expenditure: delivered / config.wpt_efficiency,
    }
}

/// Builds a plan for an MCV in contact with a requesting device.
///
/// Rejected with [`SimError::InsufficientEnergy`] when the MCV cannot pay
/// for the transfer plus the trip back to `depot`.
pub fn make_charge_plan(
    device: &SensorDevice,
    mcv: &Mcv,
    depot: Point,
    factors: ChargeFactors,
    config: &ScenarioConfig,
) -> Result<ChargePlan> {
    let gap = mcv.position.distance(&device.position);
    if gap > config.contact_epsilon {
        return Err(SimError::Precondition(format!(
            "mcv {} is {gap:.3} m from device {}, not in contact",
            mcv.id, device.id
        )));
    }
    let plan = plan_amounts(device, factors, config);
    let required = plan.mcv_expenditure + travel_energy(mcv.position.distance(&depot), config);
    if required > mcv.energy {
        return Err(SimError::InsufficientEnergy {
            mcv: mcv.id,
            required,
            available: mcv.energy,
        });
    }
    Ok(plan)
}

pub fn travel_energy(distance: f64, config: &ScenarioConfig) -> f64 {
    config.travel_cost * distance
}
