//! Physical constants, unit conversion and thermal natural units.
//!
//! All numerics run in one coherent system: energies in meV, lengths in Å,
//! times in ps and masses in unified atomic mass units (u). SI values only
//! appear at I/O boundaries through [`convert`].

use crate::error::{domain, Error, Result};
use crate::num::Real;

/// CODATA-2018 constants in SI units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Boltzmann constant, J/K.
    pub k_b: f64,
    /// Unified atomic mass unit, kg.
    pub amu: f64,
    /// Ångström, m.
    pub angstrom: f64,
    /// Picosecond, s.
    pub ps: f64,
    /// Millielectronvolt, J.
    pub mev: f64,
}

pub const CODATA_2018: PhysicalConstants = PhysicalConstants {
    hbar: 1.054_571_817e-34,
    k_b: 1.380_649e-23,
    amu: 1.660_539_066_60e-27,
    angstrom: 1e-10,
    ps: 1e-12,
    mev: 1.602_176_634e-22,
};

/// ħ in meV·ps.
pub const HBAR: f64 = CODATA_2018.hbar / (CODATA_2018.mev * CODATA_2018.ps);
/// k_B in meV/K.
pub const K_B: f64 = CODATA_2018.k_b / CODATA_2018.mev;
/// ħ²/(1 u · 1 Å²) in meV. Kinetic energies are `HBAR2_PER_AMU_A2 · k² / (2 m)`.
pub const HBAR2_PER_AMU_A2: f64 = CODATA_2018.hbar * CODATA_2018.hbar
    / (CODATA_2018.amu * CODATA_2018.angstrom * CODATA_2018.angstrom)
    / CODATA_2018.mev;

/// Natural length and time scales of a thermal particle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalUnits<T> {
    /// λ_th = h/√(2π m k_B T), Å.
    pub lambda_th: T,
    /// τ_th = ħ/(k_B T), ps.
    pub tau_th: T,
    /// K.
    pub temperature: T,
    /// u.
    pub mass: T,
}

impl<T: Real> ThermalUnits<T> {
    pub fn new(mass_u: T, temperature: T) -> Result<Self> {
        Ok(Self {
            lambda_th: thermal_wavelength(mass_u, temperature)?,
            tau_th: thermal_time(temperature)?,
            temperature,
            mass: mass_u,
        })
    }
}

fn check_positive<T: Real>(what: &str, value: T) -> Result<()> {
    if value > T::zero() && value.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{what} must be positive and finite, got {value}")))
    }
}

/// Thermal de Broglie wavelength in Å for a mass in u and temperature in K.
pub fn thermal_wavelength<T: Real>(mass_u: T, temperature: T) -> Result<T> {
    check_positive("mass", mass_u)?;
    check_positive("temperature", temperature)?;
    let kt = T::lit(K_B) * temperature;
    Ok((T::TAU() * T::lit(HBAR2_PER_AMU_A2) / (mass_u * kt)).sqrt())
}

/// Thermal time ħ/(k_B T) in ps.
pub fn thermal_time<T: Real>(temperature: T) -> Result<T> {
    check_positive("temperature", temperature)?;
    Ok(T::lit(HBAR) / (T::lit(K_B) * temperature))
}

/// k_B T in meV.
pub fn thermal_energy<T: Real>(temperature: T) -> Result<T> {
    check_positive("temperature", temperature)?;
    Ok(T::lit(K_B) * temperature)
}

/// Physical dimension of a [`Unit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimension {
    Energy,
    Length,
    Time,
    Mass,
    Wavenumber,
    Temperature,
}

/// The fixed set of units understood by [`convert`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unit {
    Joule,
    ElectronVolt,
    MilliElectronVolt,
    Metre,
    Nanometre,
    Angstrom,
    Second,
    Picosecond,
    Femtosecond,
    Kilogram,
    AtomicMassUnit,
    InverseMetre,
    InverseAngstrom,
    Kelvin,
}

impl Unit {
    pub fn dimension(self) -> Dimension {
        use Unit::*;
        match self {
            Joule | ElectronVolt | MilliElectronVolt => Dimension::Energy,
            Metre | Nanometre | Angstrom => Dimension::Length,
            Second | Picosecond | Femtosecond => Dimension::Time,
            Kilogram | AtomicMassUnit => Dimension::Mass,
            InverseMetre | InverseAngstrom => Dimension::Wavenumber,
            Kelvin => Dimension::Temperature,
        }
    }

    /// Size of the unit in SI base units of its dimension.
    pub fn si_factor(self) -> f64 {
        use Unit::*;
        match self {
            Joule | Metre | Second | Kilogram | InverseMetre | Kelvin => 1.0,
            ElectronVolt => CODATA_2018.mev * 1e3,
            MilliElectronVolt => CODATA_2018.mev,
            Nanometre => 1e-9,
            Angstrom => CODATA_2018.angstrom,
            Picosecond => CODATA_2018.ps,
            Femtosecond => 1e-15,
            AtomicMassUnit => CODATA_2018.amu,
            InverseAngstrom => 1.0 / CODATA_2018.angstrom,
        }
    }

    pub fn symbol(self) -> &'static str {
        use Unit::*;
        match self {
            Joule => "J",
            ElectronVolt => "eV",
            MilliElectronVolt => "meV",
            Metre => "m",
            Nanometre => "nm",
            Angstrom => "Å",
            Second => "s",
            Picosecond => "ps",
            Femtosecond => "fs",
            Kilogram => "kg",
            AtomicMassUnit => "u",
            InverseMetre => "1/m",
            InverseAngstrom => "1/Å",
            Kelvin => "K",
        }
    }
}

/// Converts `value` between two units of the same dimension.
pub fn convert<T: Real>(value: T, from: Unit, to: Unit) -> Result<T> {
    if from.dimension() != to.dimension() {
        return Err(Error::Unit { from: from.symbol(), to: to.symbol() });
    }
    if from == to {
        return Ok(value);
    }
    Ok(value * T::lit(from.si_factor() / to.si_factor()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn thermal_wavelength_of_one_dalton_at_300_k() {
        let lam = thermal_wavelength(1.0_f64, 300.0).unwrap();
        assert!((lam - 1.007951).abs() < 5e-7, "{lam}");
        let lam4 = thermal_wavelength(4.0_f64, 300.0).unwrap();
        assert!(rel(lam4, lam / 2.0) < 1e-15);
    }

    #[test]
    fn thermal_wavelength_matches_si_evaluation() {
        // Straight SI arithmetic with h = 2πħ.
        let c = CODATA_2018;
        let h = 2.0 * std::f64::consts::PI * c.hbar;
        let m = 27.9949 * c.amu;
        let si = h / (2.0 * std::f64::consts::PI * m * c.k_b * 190.0).sqrt() / c.angstrom;
        let lam = thermal_wavelength(27.9949_f64, 190.0).unwrap();
        assert!(rel(lam, si) < 1e-13, "{lam} vs {si}");
    }

    #[test]
    fn thermal_time_values() {
        let c = CODATA_2018;
        let t300 = thermal_time(300.0_f64).unwrap();
        assert!(rel(t300, c.hbar / (c.k_b * 300.0) / c.ps) < 1e-13);
        assert!((t300 * 1e3 - 25.46).abs() < 0.01);
        assert!(rel(thermal_time(600.0_f64).unwrap(), t300 / 2.0) < 1e-15);
        assert!((thermal_time(190.0_f64).unwrap() * 1e3 - 40.2).abs() < 0.05);
    }

    #[test]
    fn non_positive_inputs_are_domain_errors() {
        assert!(matches!(thermal_wavelength(0.0_f64, 300.0), Err(Error::Domain(_))));
        assert!(matches!(thermal_wavelength(1.0_f64, -1.0), Err(Error::Domain(_))));
        assert!(matches!(thermal_time(0.0_f64), Err(Error::Domain(_))));
        assert!(matches!(thermal_time(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn conversions() {
        let j = convert(1.0_f64, Unit::MilliElectronVolt, Unit::Joule).unwrap();
        assert!(rel(j, 1.602176634e-22) < 1e-15);
        assert_eq!(convert(1.0_f64, Unit::Angstrom, Unit::Metre).unwrap(), 1e-10);
        assert!(matches!(convert(1.0_f64, Unit::Angstrom, Unit::Second), Err(Error::Unit { .. })));
        let inv = convert(1.0_f64, Unit::InverseAngstrom, Unit::InverseMetre).unwrap();
        assert!(rel(inv, 1e10) < 1e-15);
    }

    #[test]
    fn thermal_units_struct_is_consistent() {
        let u = ThermalUnits::new(28.0_f64, 190.0).unwrap();
        assert!(rel(u.lambda_th, thermal_wavelength(28.0, 190.0).unwrap()) < 1e-12);
        assert!(rel(u.tau_th, thermal_time(190.0).unwrap()) < 1e-12);
        let f = ThermalUnits::new(28.0_f32, 190.0).unwrap();
        assert!(((f.lambda_th as f64) - u.lambda_th).abs() / u.lambda_th < 1e-6);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        const ALL: [Unit; 14] = [
            Unit::Joule,
            Unit::ElectronVolt,
            Unit::MilliElectronVolt,
            Unit::Metre,
            Unit::Nanometre,
            Unit::Angstrom,
            Unit::Second,
            Unit::Picosecond,
            Unit::Femtosecond,
            Unit::Kilogram,
            Unit::AtomicMassUnit,
            Unit::InverseMetre,
            Unit::InverseAngstrom,
            Unit::Kelvin,
        ];

        proptest! {
            #[test]
            fn wavelength_time_identity(m in 0.1f64..500.0, t in 1.0f64..3000.0) {
                // λ²/τ = h/m, with h/m = 2πħ/m expressed in Å²/ps.
                let lam = thermal_wavelength(m, t).unwrap();
                let tau = thermal_time(t).unwrap();
                let h_over_m = std::f64::consts::TAU * HBAR2_PER_AMU_A2 / HBAR / m;
                prop_assert!(((lam * lam / tau) - h_over_m).abs() / h_over_m < 1e-12);
            }

            #[test]
            fn round_trip_and_linearity(x in -1e6f64..1e6, alpha in -50.0f64..50.0, a in 0usize..14, b in 0usize..14) {
                let (ua, ub) = (ALL[a], ALL[b]);
                if ua.dimension() == ub.dimension() {
                    let there = convert(x, ua, ub).unwrap();
                    let back = convert(there, ub, ua).unwrap();
                    prop_assert!((back - x).abs() <= 1e-14 * x.abs().max(f64::MIN_POSITIVE));
                    let scaled = convert(alpha * x, ua, ub).unwrap();
                    prop_assert!((scaled - alpha * there).abs() <= 1e-14 * scaled.abs().max(1e-300));
                } else {
                    prop_assert!(convert(x, ua, ub).is_err());
                }
            }
        }
    }
}
