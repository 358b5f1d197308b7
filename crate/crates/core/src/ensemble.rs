//! Stochastic thermal wave packets: Boltzmann moduli with seeded random phases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{usage, Result};
use crate::num::{cis, Complex, Real};
use crate::spectrum::ThermalWeights;
use crate::units::HBAR;

pub const DEFAULT_SEED: u64 = 42;

/// Uniform phases for one ensemble member.
///
/// Phase `n` is the `n`-th draw of a ChaCha8 stream keyed by `seed` and
/// selected by `sample_index`, so phases are independent of the draw count
/// and of the order in which samples are generated.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseDraw<T> {
    pub seed: u64,
    pub sample_index: u64,
    pub phases: Vec<T>,
}

pub fn draw_phases<T: Real>(seed: u64, sample_index: u64, count: usize) -> PhaseDraw<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_index);
    let tau = T::TAU();
    let phases = (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            let theta = T::lit(u) * tau;
            // Rounding in the scalar type may land on 2π itself.
            if theta >= tau {
                T::zero()
            } else {
                theta
            }
        })
        .collect();
    PhaseDraw { seed, sample_index, phases }
}

/// `c_n = w_n exp(iθ_n)` over the thermally retained eigenstates.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermalWavePacket<T> {
    coefficients: Vec<Complex<T>>,
    energies: Vec<T>,
}

impl<T: Real> ThermalWavePacket<T> {
    pub fn coefficients(&self) -> &[Complex<T>] {
        &self.coefficients
    }

    pub fn energies(&self) -> &[T] {
        &self.energies
    }

    pub fn norm(&self) -> T {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt()
    }
}

pub fn assemble_twp<T: Real>(weights: &ThermalWeights<T>, phases: &PhaseDraw<T>) -> Result<ThermalWavePacket<T>> {
    if phases.phases.len() != weights.retained() {
        return Err(usage(format!("{} phases for {} retained states", phases.phases.len(), weights.retained())));
    }
    Ok(ThermalWavePacket {
        coefficients: weights.amplitudes().iter().zip(&phases.phases).map(|(&w, &th)| cis(th) * w).collect(),
        energies: weights.energies().to_vec(),
    })
}

/// `c_n(t) = c_n exp(−i E_n t/ħ)`, t in ps.
pub fn coefficients_at_time<T: Real>(twp: &ThermalWavePacket<T>, t: T) -> Vec<Complex<T>> {
    let w = t / T::lit(HBAR);
    twp.coefficients.iter().zip(&twp.energies).map(|(c, &e)| *c * cis(-e * w)).collect()
}
