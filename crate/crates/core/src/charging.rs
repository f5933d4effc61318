//! Piecewise-linear fast-charging law with closed-form time and SoC queries.
//!
//! Charger-side power is flat at `M` up to the knee and then falls linearly
//! with slope `S`. The battery receives `efficiency` of that power. With the
//! slope calibrated so power vanishes at 100% SoC, the time above the knee is
//! logarithmic in the remaining headroom and never reaches 100%.

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChargingError {
    #[error("charger parameter {0} is out of range")]
    BadParameter(&'static str),
    #[error("SoC {0}% is outside [0, 100]")]
    SocOutOfRange(f64),
    #[error("cannot charge down from {from}% to {to}%")]
    Backwards { from: f64, to: f64 },
    #[error("target {to}% exceeds the {max}% charge limit")]
    AboveMaxTarget { to: f64, max: f64 },
    #[error("elapsed time must be non-negative")]
    NegativeTime,
}

/// Charger settings as they appear in a scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChargerSpec {
    pub max_power_kw: f64,
    pub efficiency: f64,
    pub knee_soc: f64,
    pub max_target_soc: f64,
}

impl Default for ChargerSpec {
    fn default() -> Self {
        ChargerSpec { max_power_kw: 350.0, efficiency: 0.9, knee_soc: 20.0, max_target_soc: 99.0 }
    }
}

impl ChargerSpec {
    pub fn calibrate(&self, capacity_kwh: f64) -> Result<ChargerModel, ChargingError> {
        let mut model = ChargerModel::calibrate(capacity_kwh, self.max_power_kw, self.efficiency, self.knee_soc)?;
        if !(self.max_target_soc > self.knee_soc && self.max_target_soc < 100.0) {
            return Err(ChargingError::BadParameter("max_target_soc"));
        }
        model.max_target_soc = self.max_target_soc;
        Ok(model)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BatteryState {
    pub capacity_kwh: f64,
    pub soc: f64,
}

impl BatteryState {
    pub fn stored_kwh(&self) -> f64 {
        self.capacity_kwh * self.soc / 100.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChargerModel {
    pub capacity_kwh: f64,
    pub max_power_kw: f64,
    pub slope_kw_per_pct: f64,
    pub efficiency: f64,
    pub knee_soc: f64,
    pub max_target_soc: f64,
}

fn check_soc(soc: f64) -> Result<(), ChargingError> {
    if (0.0..=100.0).contains(&soc) {
        Ok(())
    } else {
        Err(ChargingError::SocOutOfRange(soc))
    }
}

impl ChargerModel {
    /// Picks the slope that takes power from `M` at the knee to zero at 100%.
    pub fn calibrate(
        capacity_kwh: f64,
        max_power_kw: f64,
        efficiency: f64,
        knee_soc: f64,
    ) -> Result<ChargerModel, ChargingError> {
        if !(capacity_kwh > 0.0 && capacity_kwh.is_finite()) {
            return Err(ChargingError::BadParameter("capacity_kwh"));
        }
        if !(max_power_kw > 0.0 && max_power_kw.is_finite()) {
            return Err(ChargingError::BadParameter("max_power_kw"));
        }
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(ChargingError::BadParameter("efficiency"));
        }
        if !(0.0..100.0).contains(&knee_soc) {
            return Err(ChargingError::BadParameter("knee_soc"));
        }
        Ok(ChargerModel {
            capacity_kwh,
            max_power_kw,
            slope_kw_per_pct: max_power_kw / (100.0 - knee_soc),
            efficiency,
            knee_soc,
            max_target_soc: 99.0,
        })
    }

    /// Power drawn from the charger at `soc`.
    pub fn charge_power_at(&self, soc: f64) -> Result<f64, ChargingError> {
        check_soc(soc)?;
        Ok(self.headroom(soc))
    }

    /// Power entering the battery at `soc`.
    pub fn battery_power_at(&self, soc: f64) -> Result<f64, ChargingError> {
        Ok(self.efficiency * self.charge_power_at(soc)?)
    }

    fn headroom(&self, soc: f64) -> f64 {
        if soc <= self.knee_soc {
            self.max_power_kw
        } else {
            (self.max_power_kw - self.slope_kw_per_pct * (soc - self.knee_soc)).max(0.0)
        }
    }

    fn kwh_per_pct(&self) -> f64 {
        self.capacity_kwh / 100.0
    }

    /// Minutes to charge from `from_soc` to `to_soc`.
    pub fn charge_duration(&self, from_soc: f64, to_soc: f64) -> Result<f64, ChargingError> {
        check_soc(from_soc)?;
        check_soc(to_soc)?;
        if to_soc < from_soc {
            return Err(ChargingError::Backwards { from: from_soc, to: to_soc });
        }
        if to_soc > self.max_target_soc {
            return Err(ChargingError::AboveMaxTarget { to: to_soc, max: self.max_target_soc });
        }
        let flat_power = self.efficiency * self.max_power_kw;
        let mut hours = 0.0;
        if from_soc < self.knee_soc {
            hours += (to_soc.min(self.knee_soc) - from_soc) * self.kwh_per_pct() / flat_power;
        }
        if to_soc > self.knee_soc {
            let a = from_soc.max(self.knee_soc);
            hours += self.kwh_per_pct() / (self.efficiency * self.slope_kw_per_pct)
                * (self.headroom(a) / self.headroom(to_soc)).ln();
        }
        Ok(hours * 60.0)
    }

    /// SoC after charging for `minutes` from `from_soc`. Approaches but never
    /// passes 100%.
    pub fn soc_after(&self, from_soc: f64, minutes: f64) -> Result<f64, ChargingError> {
        check_soc(from_soc)?;
        if !(minutes >= 0.0) {
            return Err(ChargingError::NegativeTime);
        }
        let mut hours = minutes / 60.0;
        let mut soc = from_soc;
        if soc < self.knee_soc {
            let to_knee = (self.knee_soc - soc) * self.kwh_per_pct() / (self.efficiency * self.max_power_kw);
            if hours <= to_knee {
                return Ok(soc + hours * self.efficiency * self.max_power_kw / self.kwh_per_pct());
            }
            hours -= to_knee;
            soc = self.knee_soc;
        }
        let rate = self.efficiency * self.slope_kw_per_pct / self.kwh_per_pct();
        let remaining = self.headroom(soc) * (-rate * hours).exp();
        Ok((self.knee_soc + (self.max_power_kw - remaining) / self.slope_kw_per_pct).min(100.0))
    }

    /// Energy stored by charging from `from_soc` to `to_soc`.
    pub fn battery_energy_kwh(&self, from_soc: f64, to_soc: f64) -> f64 {
        (to_soc - from_soc) * self.kwh_per_pct()
    }

    /// Energy drawn from the grid for the same charge.
    pub fn charger_energy_kwh(&self, from_soc: f64, to_soc: f64) -> f64 {
        self.battery_energy_kwh(from_soc, to_soc) / self.efficiency
    }
}

/// Time and power against SoC, from empty to the charge limit.
pub fn write_charge_curve<W: io::Write>(model: &ChargerModel, step_pct: f64, writer: W) -> Result<(), csv::Error> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    out.write_record(["soc_pct", "charger_power_kw", "battery_power_kw", "minutes_from_empty"])?;
    let steps = (model.max_target_soc / step_pct).floor() as usize;
    let mut socs: Vec<f64> = (0..=steps).map(|i| i as f64 * step_pct).collect();
    if socs.last().is_some_and(|s| *s < model.max_target_soc) {
        socs.push(model.max_target_soc);
    }
    for soc in socs {
        let p = model.headroom(soc);
        let t = model.charge_duration(0.0, soc).expect("curve stays inside the charge limit");
        out.write_record([
            format!("{soc:.2}"),
            format!("{p:.3}"),
            format!("{:.3}", model.efficiency * p),
            format!("{t:.4}"),
        ])?;
    }
    out.flush()?;
    Ok(())
}
