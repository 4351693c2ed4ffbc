use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Annual transmission charge from a facility's average load over the
/// coincident-peak intervals: `mw * 1000 * rate * months`.
pub fn fourcp_charge(avg_4cp_mw: f64, rate_per_kw_month: f64, months: u32) -> Result<f64> {
    if !(avg_4cp_mw >= 0.0) || !(rate_per_kw_month >= 0.0) || !avg_4cp_mw.is_finite() || !rate_per_kw_month.is_finite() {
        return Err(Error::InvalidInput("4CP charge inputs must be finite and nonnegative".into()));
    }
    Ok(avg_4cp_mw * 1000.0 * rate_per_kw_month * months as f64)
}

/// Quantities for one interval. Energies are MWh, prices $/MWh.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub pi_btc: f64,
    /// Coins per MWh of hashing energy.
    pub k_b: f64,
    pub e_hash: f64,
    pub pi_da: f64,
    pub pi_rt: f64,
    pub e_da: f64,
    pub e_rt: f64,
    pub e_ppa: f64,
    pub temp: f64,
}

impl Interval {
    /// Total procured energy `E^P + E^D + E^R`.
    pub fn procured(&self) -> f64 {
        self.e_ppa + self.e_da + self.e_rt
    }
}

/// Cooling and auxiliary energy on top of hashing energy.
pub trait Cooling {
    fn psi(&self, e_hash: f64, temp: f64) -> f64;
}

impl<F: Fn(f64, f64) -> f64> Cooling for F {
    fn psi(&self, e_hash: f64, temp: f64) -> f64 {
        self(e_hash, temp)
    }
}

/// `c0 * E^H * max(0, T - t0) / dt_ref`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCooling {
    pub c0: f64,
    pub t0: f64,
    pub dt_ref: f64,
}

impl Default for LinearCooling {
    fn default() -> Self {
        LinearCooling {
            c0: 0.15,
            t0: 65.0,
            dt_ref: 30.0,
        }
    }
}

impl Cooling for LinearCooling {
    fn psi(&self, e_hash: f64, temp: f64) -> f64 {
        self.c0 * e_hash * (temp - self.t0).max(0.0) / self.dt_ref
    }
}

/// Avoided transmission cost credited to interval `t` with consumption `e_m`.
pub trait AvoidedCost {
    fn gamma(&self, t: usize, e_m: f64) -> f64;
}

impl<F: Fn(usize, f64) -> f64> AvoidedCost for F {
    fn gamma(&self, t: usize, e_m: f64) -> f64 {
        self(t, e_m)
    }
}

/// Credit for curtailing below a baseline during the coincident-peak
/// intervals. Each interval carries its share of the annual charge, so the
/// credits over all intervals add up to the charge avoided by the average
/// reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourCpAvoidedCost {
    pub intervals: BTreeSet<usize>,
    pub baseline_mw: f64,
    pub rate_per_kw_month: f64,
    pub months: u32,
}

impl AvoidedCost for FourCpAvoidedCost {
    fn gamma(&self, t: usize, e_m: f64) -> f64 {
        if !self.intervals.contains(&t) {
            return 0.0;
        }
        let share = 1.0 / self.intervals.len() as f64;
        (self.baseline_mw - e_m) * 1000.0 * self.rate_per_kw_month * self.months as f64 * share
    }
}

/// Intervals with a cooling model and an avoided-cost rule. Construction
/// checks the energy balance `E^P + E^D + E^R = E^H + psi(E^H, T)`.
pub struct ProfitInputs {
    intervals: Vec<Interval>,
    gamma: Box<dyn AvoidedCost>,
}

impl ProfitInputs {
    pub fn new(intervals: Vec<Interval>, gamma: Box<dyn AvoidedCost>, psi: &dyn Cooling) -> Result<ProfitInputs> {
        for (t, iv) in intervals.iter().enumerate() {
            let procured = iv.procured();
            let used = iv.e_hash + psi.psi(iv.e_hash, iv.temp);
            if !((procured - used).abs() <= 1e-9 * procured.abs().max(1.0)) {
                return Err(Error::EnergyBalance(t));
            }
        }
        Ok(ProfitInputs { intervals, gamma })
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalProfit {
    pub revenue: f64,
    pub rt_cost: f64,
    pub da_cost: f64,
    pub avoided_cost: f64,
    pub profit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitBreakdown {
    pub total: f64,
    pub per_interval: Vec<IntervalProfit>,
}

/// `sum_t (pi_B k_B E^H - pi_R E^R - pi_D E^D + gamma(E^M))`; the total is
/// the sum of the per-interval profits.
pub fn profit(inputs: &ProfitInputs) -> ProfitBreakdown {
    let per_interval: Vec<IntervalProfit> = inputs
        .intervals
        .iter()
        .enumerate()
        .map(|(t, iv)| {
            let revenue = iv.pi_btc * iv.k_b * iv.e_hash;
            let rt_cost = iv.pi_rt * iv.e_rt;
            let da_cost = iv.pi_da * iv.e_da;
            let avoided_cost = inputs.gamma.gamma(t, iv.procured());
            IntervalProfit {
                revenue,
                rt_cost,
                da_cost,
                avoided_cost,
                profit: revenue - rt_cost - da_cost + avoided_cost,
            }
        })
        .collect();
    let total = per_interval.iter().map(|p| p.profit).sum();
    ProfitBreakdown { total, per_interval }
}
