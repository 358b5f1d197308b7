//! The scattering kick `exp(iqx)` and the kicked/evolved wave packets.
//!
//! Time evolution is spectral: a state expanded in eigenstates evolves by
//! multiplying each coefficient with `exp(−iE t/ħ)`.

use crate::ensemble::{coefficients_at_time, ThermalWavePacket};
use crate::error::{config, numeric, usage, Result};
use crate::num::{cis, Complex, Real};
use crate::spectrum::{EigenBasis, Spectrum, ThermalWeights};
use crate::system::{Boundary, Grid};
use crate::units::{HBAR, HBAR2_PER_AMU_A2};

/// Default bound on the kick-matrix column-norm defect.
pub const DEFAULT_SPILL_TOLERANCE: f64 = 1e-6;

/// Complex amplitudes on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridState<T> {
    pub amplitudes: Vec<Complex<T>>,
    pub grid: Grid<T>,
}

impl<T: Real> GridState<T> {
    pub fn norm(&self) -> T {
        self.grid.norm(&self.amplitudes)
    }
}

/// `ψ(x_j) = Σ_n c_n φ_n(x_j)` over the first `coefficients.len()` eigenstates.
pub fn to_grid<T: Real>(coefficients: &[Complex<T>], spectrum: &Spectrum<T>) -> Result<GridState<T>> {
    if coefficients.len() > spectrum.len() {
        return Err(usage(format!("{} coefficients for {} eigenstates", coefficients.len(), spectrum.len())));
    }
    let n = spectrum.grid().n_points();
    let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); n];
    for (k, c) in coefficients.iter().enumerate() {
        if c.norm_sqr() == T::zero() {
            continue;
        }
        let phi = spectrum.eigenvector(k);
        for (a, p) in amplitudes.iter_mut().zip(phi) {
            *a += p * *c;
        }
    }
    Ok(GridState { amplitudes, grid: spectrum.grid().clone() })
}

/// `q L / 2π`, the number of wavelengths of `exp(iqx)` around a ring.
fn winding<T: Real>(q: T, grid: &Grid<T>) -> T {
    q * grid.length() / T::TAU()
}

pub fn is_commensurate<T: Real>(q: T, grid: &Grid<T>) -> bool {
    let w = winding(q, grid);
    (w - w.round()).abs() <= T::lit(1e-9) * w.abs().max(T::one())
}

/// Result of snapping a wavenumber onto the reciprocal grid of a ring.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QSnap<T> {
    pub requested: T,
    pub snapped: T,
    /// Integer winding number `q_snapped L / 2π`.
    pub harmonic: i64,
    pub relative_shift: T,
}

/// `q_snapped = 2π round(qL/2π) / L`.
pub fn snap_q<T: Real>(q: T, grid: &Grid<T>) -> Result<QSnap<T>> {
    if grid.boundary() != Boundary::Periodic {
        return Err(usage("q snapping only applies to periodic grids"));
    }
    let k = winding(q, grid).round();
    if k == T::zero() {
        return Err(config(format!(
            "q = {q} 1/Å rounds to zero on a ring of length {}; the kick would be the identity",
            grid.length()
        )));
    }
    let snapped = T::TAU() * k / grid.length();
    let harmonic = k.to_i64().ok_or_else(|| config("q winding number out of range"))?;
    let snapped = if is_commensurate(q, grid) { q } else { snapped };
    Ok(QSnap { requested: q, snapped, harmonic, relative_shift: (snapped - q) / q })
}

/// Pointwise multiplication by `exp(iqx)`.
pub fn kick<T: Real>(state: &GridState<T>, q: T) -> Result<GridState<T>> {
    if state.grid.boundary() == Boundary::Periodic && !is_commensurate(q, &state.grid) {
        return Err(config(format!("q = {q} 1/Å is not commensurate with the ring of length {}", state.grid.length())));
    }
    let g = &state.grid;
    Ok(GridState {
        amplitudes: state.amplitudes.iter().enumerate().map(|(j, a)| *a * cis(q * g.x(j))).collect(),
        grid: g.clone(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection<T> {
    pub coefficients: Vec<Complex<T>>,
    /// Norm of the part of the state outside the first `count` eigenstates.
    pub discarded_norm: T,
}

/// `d_m = Δx Σ_j φ_m(x_j)* ψ(x_j)` for `m < count`.
pub fn project<T: Real>(state: &GridState<T>, spectrum: &Spectrum<T>, count: usize) -> Result<Projection<T>> {
    if state.grid != *spectrum.grid() {
        return Err(usage("state and spectrum live on different grids"));
    }
    let count = count.min(spectrum.len());
    let coefficients: Vec<Complex<T>> =
        (0..count).map(|m| state.grid.inner(&spectrum.eigenvector(m), &state.amplitudes)).collect();
    let total = state.norm();
    let kept: T = coefficients.iter().map(|c| c.norm_sqr()).sum();
    let discarded_norm = (total * total - kept).max(T::zero()).sqrt();
    Ok(Projection { coefficients, discarded_norm })
}

/// How many eigenstates the kicked packets are expanded in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WorkingBasis {
    /// Every eigenstate of the grid Hamiltonian.
    Full,
    /// States up to `E_R + ħ²(|q| + k_R)²/(2m)`, where `E_R` is the highest
    /// retained energy and `k_R` its momentum above the ground state.
    KickEnergy,
}

pub fn working_basis_size<T: Real>(
    spectrum: &Spectrum<T>,
    weights: &ThermalWeights<T>,
    q: T,
    mass: T,
    rule: WorkingBasis,
) -> usize {
    match rule {
        WorkingBasis::Full => spectrum.len(),
        WorkingBasis::KickEnergy => {
            let e = spectrum.energies();
            let top = *weights.energies().last().expect("ground state is always retained");
            let kinetic = T::lit(HBAR2_PER_AMU_A2) / (T::lit(2.0) * mass);
            let k_top = ((top - e[0]).max(T::zero()) / kinetic).sqrt();
            let cut = top + kinetic * (q.abs() + k_top).powi(2);
            e.iter().take_while(|&&x| x <= cut).count().max(weights.retained())
        }
    }
}

/// `M_mn = ⟨φ_m| exp(iqx) |φ_n⟩` for rows `m < rows` (working basis) and
/// columns `n < cols` (retained states), stored by column.
#[derive(Clone, Debug)]
pub struct KickMatrix<T> {
    q: T,
    rows: usize,
    columns: Vec<Vec<(usize, Complex<T>)>>,
    row_energies: Vec<T>,
    unitarity_defect: T,
}

impl<T: Real> KickMatrix<T> {
    pub fn q(&self) -> T {
        self.q
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    /// Energies of the working basis, meV.
    pub fn row_energies(&self) -> &[T] {
        &self.row_energies
    }

    /// `max_n |‖M e_n‖ − 1|` over the stored columns.
    pub fn unitarity_defect(&self) -> T {
        self.unitarity_defect
    }

    /// Structurally non-zero entries of column `n`.
    pub fn column(&self, n: usize) -> &[(usize, Complex<T>)] {
        &self.columns[n]
    }

    pub fn nonzeros(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    pub fn get(&self, m: usize, n: usize) -> Complex<T> {
        self.columns[n]
            .iter()
            .find(|(r, _)| *r == m)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| Complex::new(T::zero(), T::zero()))
    }

    /// `out = M u`; `u` has `cols()` entries, `out` has `rows()`.
    pub fn apply_into(&self, u: &[Complex<T>], out: &mut [Complex<T>]) {
        debug_assert_eq!(u.len(), self.cols());
        debug_assert_eq!(out.len(), self.rows);
        for o in out.iter_mut() {
            *o = Complex::new(T::zero(), T::zero());
        }
        for (col, &un) in self.columns.iter().zip(u) {
            for &(m, v) in col {
                out[m] += v * un;
            }
        }
    }

    pub fn apply(&self, u: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.rows];
        self.apply_into(u, &mut out);
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<Complex<T>>> {
        (0..self.rows).map(|m| (0..self.cols()).map(|n| self.get(m, n)).collect()).collect()
    }
}

/// Builds the kick matrix between the first `rows` and the first `cols`
/// eigenstates and checks its column-norm defect against `spill_tolerance`.
pub fn kick_matrix<T: Real>(
    spectrum: &Spectrum<T>,
    q: T,
    rows: usize,
    cols: usize,
    spill_tolerance: T,
) -> Result<KickMatrix<T>> {
    let grid = spectrum.grid();
    if rows > spectrum.len() || cols > rows {
        return Err(usage(format!("kick matrix {rows}×{cols} does not fit a spectrum of {} states", spectrum.len())));
    }
    if grid.boundary() == Boundary::Periodic && !is_commensurate(q, grid) {
        return Err(config(format!("q = {q} 1/Å is not commensurate with the ring; snap it first")));
    }
    let dx = grid.spacing();
    let columns: Vec<Vec<(usize, Complex<T>)>> = match spectrum.basis() {
        EigenBasis::Dense(vectors) => {
            let phase: Vec<Complex<T>> = (0..grid.n_points()).map(|j| cis(q * grid.x(j))).collect();
            (0..cols)
                .map(|n| {
                    let kicked: Vec<Complex<T>> = vectors[n].iter().zip(&phase).map(|(a, p)| *a * *p).collect();
                    (0..rows)
                        .map(|m| {
                            let s: Complex<T> = vectors[m].iter().zip(&kicked).map(|(a, b)| a.conj() * b).sum();
                            (m, s * dx)
                        })
                        .collect()
                })
                .collect()
        }
        EigenBasis::Bloch { period, cells, states } => {
            let shift = winding(q, grid).round().to_i64().unwrap_or(0).rem_euclid(*cells as i64) as usize;
            let mut by_block: Vec<Vec<usize>> = vec![Vec::new(); *cells];
            for (idx, st) in states.iter().enumerate().take(rows) {
                by_block[st.block].push(idx);
            }
            let phase: Vec<Complex<T>> = (0..*period).map(|s| cis(q * T::from_usize_exact(s) * dx)).collect();
            (0..cols)
                .map(|n| {
                    let st = &states[n];
                    let kicked: Vec<Complex<T>> = st.cell_function.iter().zip(&phase).map(|(a, p)| *a * *p).collect();
                    let target = (st.block + shift) % cells;
                    by_block[target]
                        .iter()
                        .map(|&m| {
                            let s: Complex<T> =
                                states[m].cell_function.iter().zip(&kicked).map(|(a, b)| a.conj() * b).sum();
                            (m, s * dx)
                        })
                        .collect()
                })
                .collect()
        }
    };
    let unitarity_defect = columns
        .iter()
        .map(|c| (c.iter().map(|(_, v)| v.norm_sqr()).sum::<T>().sqrt() - T::one()).abs())
        .fold(T::zero(), T::max);
    if unitarity_defect > spill_tolerance {
        return Err(numeric(format!(
            "kick matrix column-norm defect {unitarity_defect} exceeds the spill tolerance {spill_tolerance}; \
             enlarge the working basis ({rows} of {} states in use)",
            spectrum.len()
        )));
    }
    Ok(KickMatrix { q, rows, columns, row_energies: spectrum.energies()[..rows].to_vec(), unitarity_defect })
}

fn evolve<T: Real>(coefficients: &[Complex<T>], energies: &[T], t: T) -> Vec<Complex<T>> {
    let w = t / T::lit(HBAR);
    coefficients.iter().zip(energies).map(|(c, &e)| *c * cis(-e * w)).collect()
}

fn check_packet<T: Real>(twp: &ThermalWavePacket<T>, kick: &KickMatrix<T>) -> Result<()> {
    if twp.coefficients().len() != kick.cols() {
        return Err(usage(format!(
            "wave packet has {} coefficients, kick matrix has {} columns",
            twp.coefficients().len(),
            kick.cols()
        )));
    }
    Ok(())
}

/// Kicked at time zero, then evolved: `exp(−iHt/ħ) M c(0)`.
pub fn chi_ke<T: Real>(twp: &ThermalWavePacket<T>, kick: &KickMatrix<T>, t: T) -> Result<Vec<Complex<T>>> {
    check_packet(twp, kick)?;
    Ok(evolve(&kick.apply(twp.coefficients()), kick.row_energies(), t))
}

/// Evolved, then kicked at time `t`: `M c(t)`.
pub fn chi_ek<T: Real>(twp: &ThermalWavePacket<T>, kick: &KickMatrix<T>, t: T) -> Result<Vec<Complex<T>>> {
    check_packet(twp, kick)?;
    Ok(kick.apply(&coefficients_at_time(twp, t)))
}
