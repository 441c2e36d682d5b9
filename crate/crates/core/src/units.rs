//! Physical constants and unit conversion into the engine's natural units
//! (ħ = kB = 1, energies in the configured energy unit).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Boltzmann constant in eV/K (CODATA 2018, exact).
pub const KB_EV_PER_K: f64 = 8.617333262e-5;
/// Planck constant in eV·s (exact).
pub const H_EV_S: f64 = 4.135667696e-15;
/// Reduced Planck constant in eV·s.
pub const HBAR_EV_S: f64 = H_EV_S / (2.0 * std::f64::consts::PI);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyUnit {
    ElectronVolt,
    /// Dimensionless energies measured in units of a reference hopping.
    Hopping,
}

impl FromStr for EnergyUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "eV" | "ev" => Ok(EnergyUnit::ElectronVolt),
            "t0" => Ok(EnergyUnit::Hopping),
            other => Err(Error::Config(format!("unknown energy unit `{other}` (expected \"eV\" or \"t0\")"))),
        }
    }
}

impl fmt::Display for EnergyUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnergyUnit::ElectronVolt => write!(f, "eV"),
            EnergyUnit::Hopping => write!(f, "t0"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    ElectronVolt,
    Kelvin,
    /// Magnetic flux as a fraction of the flux quantum φ0.
    FluxQuantum,
    Dimensionless,
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "eV" | "ev" => Ok(Unit::ElectronVolt),
            "K" => Ok(Unit::Kelvin),
            "phi0" | "φ0" => Ok(Unit::FluxQuantum),
            "" | "1" => Ok(Unit::Dimensionless),
            other => Err(Error::Config(format!("unknown unit tag `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: Unit,
}

impl Quantity {
    pub fn new(value: f64, unit: Unit) -> Self {
        Quantity { value, unit }
    }
}

impl FromStr for Quantity {
    type Err = Error;

    /// Parses `"<number> [unit]"`, e.g. `"115 K"`, `"0.1 eV"`, `"0.05 phi0"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (num, tag) = match s.find(char::is_whitespace) {
            Some(k) => (&s[..k], s[k..].trim()),
            None => (s, ""),
        };
        let value: f64 = num.parse().map_err(|_| Error::Config(format!("cannot parse a number from `{s}`")))?;
        Ok(Quantity { value, unit: tag.parse()? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    pub energy_unit: EnergyUnit,
    /// Boltzmann constant in energy_unit per kelvin (1 in hopping units, where
    /// temperatures are given directly as energies).
    pub kb: f64,
    /// Planck constant in energy_unit·s; `None` when time is dimensionless.
    pub h: Option<f64>,
}

impl UnitSystem {
    pub fn new(energy_unit: EnergyUnit) -> Self {
        match energy_unit {
            EnergyUnit::ElectronVolt => UnitSystem { energy_unit, kb: KB_EV_PER_K, h: Some(H_EV_S) },
            EnergyUnit::Hopping => UnitSystem { energy_unit, kb: 1.0, h: None },
        }
    }

    pub fn electron_volt() -> Self {
        Self::new(EnergyUnit::ElectronVolt)
    }

    pub fn hopping() -> Self {
        Self::new(EnergyUnit::Hopping)
    }

    pub fn hbar(&self) -> Option<f64> {
        self.h.map(|h| h / (2.0 * std::f64::consts::PI))
    }

    pub fn to_natural(&self, q: Quantity) -> Result<f64> {
        match (q.unit, self.energy_unit) {
            (Unit::Dimensionless | Unit::FluxQuantum, _) => Ok(q.value),
            (Unit::ElectronVolt, EnergyUnit::ElectronVolt) => Ok(q.value),
            (Unit::Kelvin, EnergyUnit::ElectronVolt) => Ok(q.value * self.kb),
            (unit, EnergyUnit::Hopping) => {
                Err(Error::Config(format!("unit {unit:?} has no conversion in hopping units; give the value as a plain number")))
            }
        }
    }

    pub fn from_natural(&self, value: f64, unit: Unit) -> Result<f64> {
        match (unit, self.energy_unit) {
            (Unit::Dimensionless | Unit::FluxQuantum, _) => Ok(value),
            (Unit::ElectronVolt, EnergyUnit::ElectronVolt) => Ok(value),
            (Unit::Kelvin, EnergyUnit::ElectronVolt) => Ok(value / self.kb),
            (unit, EnergyUnit::Hopping) => Err(Error::Config(format!("unit {unit:?} has no conversion in hopping units"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn room_temperature_in_ev() {
        let u = UnitSystem::electron_volt();
        let kt = u.to_natural(Quantity::new(300.0, Unit::Kelvin)).unwrap();
        assert!((kt - 0.025851999786).abs() < 1e-11);
    }

    #[test]
    fn probe_bias_is_about_a_tenth_of_an_ev() {
        let u = UnitSystem::electron_volt();
        let kt0 = u.to_natural("115 K".parse().unwrap()).unwrap();
        let dmu = 10.0 * kt0;
        assert!((dmu - 0.0991).abs() < 1e-4);
    }

    #[test]
    fn zero_maps_to_zero() {
        let u = UnitSystem::electron_volt();
        for unit in [Unit::ElectronVolt, Unit::Kelvin, Unit::FluxQuantum, Unit::Dimensionless] {
            assert_eq!(u.to_natural(Quantity::new(0.0, unit)).unwrap(), 0.0);
        }
    }

    #[test]
    fn unknown_tag_is_a_config_error() {
        assert!(matches!("3 furlong".parse::<Quantity>(), Err(Error::Config(_))));
        assert!(matches!("meV".parse::<EnergyUnit>(), Err(Error::Config(_))));
    }

    #[test]
    fn kelvin_rejected_in_hopping_units() {
        let u = UnitSystem::hopping();
        assert_eq!(u.kb, 1.0);
        assert!(u.to_natural(Quantity::new(1.0, Unit::Kelvin)).is_err());
        assert_eq!(u.to_natural(Quantity::new(0.2, Unit::Dimensionless)).unwrap(), 0.2);
    }
}
