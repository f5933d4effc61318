//! Operating rules: dispatch triggers, SoC eligibility and charge targets.

use serde::{Deserialize, Serialize};

use crate::kernel::SimTime;

/// Slack on SoC comparisons so a flight drawing exactly its budget is not
/// rejected by rounding.
pub const SOC_EPSILON: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub vehicle_capacity: u32,
    pub wait_threshold_min: f64,
    pub reserve_soc: f64,
    /// A charge must cover this many full-load legs above the reserve.
    pub charge_target_flights: u32,
    pub boarding_lead_min: f64,
    pub pre_charge_min: f64,
    pub post_charge_min: f64,
    pub embark_min: f64,
    pub disembark_min: f64,
    pub taxi_speed_ft_s: f64,
    pub demand_repositioning: bool,
    pub space_repositioning: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            vehicle_capacity: 4,
            wait_threshold_min: 10.0,
            reserve_soc: 20.0,
            charge_target_flights: 2,
            boarding_lead_min: 2.0,
            pre_charge_min: 3.0,
            post_charge_min: 3.0,
            embark_min: 2.0,
            disembark_min: 2.0,
            taxi_speed_ft_s: 3.67,
            demand_repositioning: true,
            space_repositioning: true,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), String> {
        let minutes = [
            ("wait_threshold_min", self.wait_threshold_min),
            ("boarding_lead_min", self.boarding_lead_min),
            ("pre_charge_min", self.pre_charge_min),
            ("post_charge_min", self.post_charge_min),
            ("embark_min", self.embark_min),
            ("disembark_min", self.disembark_min),
            ("taxi_speed_ft_s", self.taxi_speed_ft_s),
        ];
        for (name, v) in minutes {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("policy.{name} must be positive"));
            }
        }
        if self.vehicle_capacity == 0 {
            return Err("policy.vehicle_capacity must be at least 1".into());
        }
        if self.charge_target_flights == 0 {
            return Err("policy.charge_target_flights must be at least 1".into());
        }
        if !(0.0..100.0).contains(&self.reserve_soc) {
            return Err("policy.reserve_soc must lie in [0, 100)".into());
        }
        Ok(())
    }

    pub fn wait_threshold(&self) -> SimTime {
        SimTime::from_minutes(self.wait_threshold_min)
    }

    /// True when the aircraft can fly a leg costing `leg_soc` and still land
    /// with the reserve.
    pub fn can_fly(&self, soc: f64, leg_soc: f64) -> bool {
        soc - leg_soc >= self.reserve_soc - SOC_EPSILON
    }

    /// Target SoC when the next full-load leg would break the reserve, or
    /// when the battery already sits at the reserve.
    pub fn charge_target(&self, soc: f64, leg_soc: f64, max_target: f64) -> Option<f64> {
        let needed = !self.can_fly(soc, leg_soc) || soc <= self.reserve_soc + SOC_EPSILON;
        needed.then(|| {
            let target = self.reserve_soc + f64::from(self.charge_target_flights) * leg_soc;
            target.min(max_target).max(soc)
        })
    }

    /// A dispatch is due when a full load waits or the oldest passenger has
    /// waited past the threshold.
    pub fn dispatch_due(&self, waiting: usize, oldest_arrival: Option<SimTime>, now: SimTime) -> bool {
        if waiting >= self.vehicle_capacity as usize {
            return true;
        }
        oldest_arrival.is_some_and(|t| now.saturating_sub(t) >= self.wait_threshold())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eligibility_examples() {
        let p = PolicyConfig::default();
        assert!(p.can_fly(60.0, 12.9));
        assert!(!p.can_fly(30.0, 12.9));
    }

    #[test]
    fn charge_examples() {
        let p = PolicyConfig::default();
        let t = p.charge_target(25.0, 12.9, 99.0).unwrap();
        assert!((t - 45.8).abs() < 1e-9);
        assert_eq!(p.charge_target(50.0, 12.9, 99.0), None);
        assert!(p.charge_target(20.0, 0.0, 99.0).is_some());
        assert!(p.charge_target(20.0, 12.9, 99.0).is_some());
        assert_eq!(p.charge_target(10.0, 60.0, 99.0), Some(99.0));
    }

    #[test]
    fn triggers() {
        let p = PolicyConfig::default();
        let now = SimTime::from_minutes(30.0);
        assert!(p.dispatch_due(4, Some(now), now));
        assert!(!p.dispatch_due(1, Some(now), now));
        assert!(p.dispatch_due(2, Some(SimTime::from_minutes(20.0)), now));
        assert!(!p.dispatch_due(0, None, now));
    }
}
