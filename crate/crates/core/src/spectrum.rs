//! Eigenstates of the grid Hamiltonian and their thermal weights.

use crate::eigen;
use crate::error::{domain, usage, Result};
use crate::num::{cis, compensated_sum, Complex, Real};
use crate::system::{Boundary, Grid, HamiltonianMatrix, MatrixStructure};
use crate::units::K_B;

/// Default cut on the half-Boltzmann factor `exp(−(E_n − E_0)/(2 k_B T))`.
pub const DEFAULT_WEIGHT_THRESHOLD: f64 = 1e-8;

/// One eigenstate of a lattice-periodic Hamiltonian: Bloch block `block`
/// (crystal momentum `2π·block/cells` per cell) and its cell-periodic part.
#[derive(Clone, Debug)]
pub struct BlochState<T> {
    pub block: usize,
    pub band: usize,
    /// Values on the `period` points of one cell, normalized so that
    /// `Δx Σ |u|² = 1`.
    pub cell_function: Vec<Complex<T>>,
}

#[derive(Clone, Debug)]
pub enum EigenBasis<T> {
    /// Explicit grid vectors, `Δx Σ |φ|² = 1`.
    Dense(Vec<Vec<Complex<T>>>),
    /// `φ(c·p + s) = exp(iθc) u(s) / √C` on `C` cells of `p` points.
    Bloch { period: usize, cells: usize, states: Vec<BlochState<T>> },
}

/// Eigenpairs of a grid Hamiltonian, energies ascending.
#[derive(Clone, Debug)]
pub struct Spectrum<T> {
    energies: Vec<T>,
    basis: EigenBasis<T>,
    grid: Grid<T>,
}

impl<T: Real> Spectrum<T> {
    /// Wraps explicit eigenvectors. Energies must ascend and each vector must
    /// live on `grid`.
    pub fn from_dense(grid: Grid<T>, energies: Vec<T>, vectors: Vec<Vec<Complex<T>>>) -> Result<Self> {
        if energies.len() != vectors.len() {
            return Err(usage(format!("{} energies for {} vectors", energies.len(), vectors.len())));
        }
        if vectors.iter().any(|v| v.len() != grid.n_points()) {
            return Err(usage("eigenvector length differs from the grid size"));
        }
        if energies.windows(2).any(|w| w[1] < w[0]) {
            return Err(usage("energies must be ascending"));
        }
        Ok(Self { energies, basis: EigenBasis::Dense(vectors), grid })
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn energies(&self) -> &[T] {
        &self.energies
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn basis(&self) -> &EigenBasis<T> {
        &self.basis
    }

    /// Grid values of eigenvector `n`.
    pub fn eigenvector(&self, n: usize) -> Vec<Complex<T>> {
        match &self.basis {
            EigenBasis::Dense(v) => v[n].clone(),
            EigenBasis::Bloch { period, cells, states } => {
                let st = &states[n];
                let theta = bloch_angle::<T>(st.block, *cells);
                let norm = T::from_usize_exact(*cells).sqrt().recip();
                let mut out = Vec::with_capacity(period * cells);
                for c in 0..*cells {
                    let phase = cis(theta * T::from_usize_exact(c)) * norm;
                    out.extend(st.cell_function.iter().map(|u| *u * phase));
                }
                out
            }
        }
    }

    /// `max_n ‖Hφ_n − E_n φ_n‖ / max|E|`.
    pub fn max_relative_residual(&self, h: &HamiltonianMatrix<T>) -> T {
        let scale = self.energies.iter().fold(T::zero(), |a, e| a.max(e.abs())).max(T::min_positive_value());
        let mut worst = T::zero();
        for (n, &e) in self.energies.iter().enumerate() {
            let phi = self.eigenvector(n);
            let hphi = h.matvec(&phi);
            let r: Vec<Complex<T>> = hphi.iter().zip(&phi).map(|(a, b)| *a - *b * e).collect();
            worst = worst.max(self.grid.norm(&r) / scale);
        }
        worst
    }

    /// Largest deviation of the eigenvector Gram matrix from the identity.
    pub fn max_orthonormality_defect(&self) -> T {
        let vecs: Vec<_> = (0..self.len()).map(|n| self.eigenvector(n)).collect();
        let mut worst = T::zero();
        for a in 0..vecs.len() {
            for b in a..vecs.len() {
                let g = self.grid.inner(&vecs[a], &vecs[b]);
                let target =
                    if a == b { Complex::new(T::one(), T::zero()) } else { Complex::new(T::zero(), T::zero()) };
                worst = worst.max((g - target).norm());
            }
        }
        worst
    }
}

fn bloch_angle<T: Real>(block: usize, cells: usize) -> T {
    T::TAU() * T::from_usize_exact(block) / T::from_usize_exact(cells)
}

/// Fixes the arbitrary phase of an eigenvector: the first component whose
/// modulus is within a factor of the largest one becomes real positive.
fn fix_phase<T: Real>(v: &mut [Complex<T>], fraction: T) {
    let max = v.iter().fold(T::zero(), |a, z| a.max(z.norm()));
    if let Some(z) = v.iter().find(|z| z.norm() >= fraction * max).copied() {
        let rot = z.conj() / z.norm();
        for x in v.iter_mut() {
            *x *= rot;
        }
    }
}

/// Smallest period `p | n` under which the diagonal and the cyclic couplings repeat.
fn lattice_period<T: Real>(diag: &[T], couplings: &[T]) -> usize {
    let n = diag.len();
    let scale = diag.iter().chain(couplings).fold(T::zero(), |a, x| a.max(x.abs()));
    let tol = T::lit(1e-12) * scale;
    (1..=n)
        .filter(|p| n.is_multiple_of(*p))
        .find(|&p| {
            (0..n).all(|i| {
                let j = (i + p) % n;
                (diag[i] - diag[j]).abs() <= tol && (couplings[i] - couplings[j]).abs() <= tol
            })
        })
        .unwrap_or(n)
}

/// Full eigendecomposition of the Hamiltonian.
///
/// Box grids go through the symmetric tridiagonal QL solver. Periodic grids
/// are reduced exactly to one Hermitian `p × p` block per crystal momentum,
/// where `p` is the smallest translation period of the matrix (the whole ring
/// when the potential has no shorter period).
pub fn diagonalize<T: Real>(h: &HamiltonianMatrix<T>) -> Result<Spectrum<T>> {
    let grid = h.grid().clone();
    let scale = grid.spacing().sqrt().recip();
    match h.structure() {
        MatrixStructure::Tridiagonal => {
            let eig = eigen::tridiagonal_eigen(h.diagonal(), h.off_diagonal())?;
            let vectors = eig
                .vectors
                .into_iter()
                .map(|v| {
                    let mut c: Vec<Complex<T>> = v.into_iter().map(|x| Complex::new(x * scale, T::zero())).collect();
                    fix_phase(&mut c, T::lit(1e-6));
                    c
                })
                .collect();
            Ok(Spectrum { energies: eig.values, basis: EigenBasis::Dense(vectors), grid })
        }
        MatrixStructure::TridiagonalPlusCorners => {
            let diag = h.diagonal();
            let cyc = h.cyclic_couplings();
            let n = diag.len();
            let p = lattice_period(diag, &cyc);
            let cells = n / p;
            let mut levels: Vec<(T, usize, usize, Vec<Complex<T>>)> = Vec::with_capacity(n);
            for j in 0..cells {
                let theta = bloch_angle::<T>(j, cells);
                let mut block = vec![Complex::new(T::zero(), T::zero()); p * p];
                for s in 0..p {
                    block[s * p + s] += Complex::new(diag[s], T::zero());
                }
                for s in 0..p.saturating_sub(1) {
                    block[s * p + s + 1] += Complex::new(cyc[s], T::zero());
                    block[(s + 1) * p + s] += Complex::new(cyc[s], T::zero());
                }
                // Coupling out of the cell into the next one picks up exp(iθ).
                let wrap = cis(theta) * cyc[p - 1];
                if j == 0 || 2 * j == cells {
                    // θ ∈ {0, π}: keep the block exactly real.
                    let w = Complex::new(wrap.re, T::zero());
                    block[(p - 1) * p] += w;
                    block[p - 1] += w;
                } else {
                    block[(p - 1) * p] += wrap;
                    block[p - 1] += wrap.conj();
                }
                let eig = eigen::hermitian_eigen(&block, p)?;
                for (b, (e, mut u)) in eig.values.into_iter().zip(eig.vectors).enumerate() {
                    for z in u.iter_mut() {
                        *z *= scale;
                    }
                    fix_phase(&mut u, T::lit(1.0 - 1e-6));
                    levels.push((e, j, b, u));
                }
            }
            levels.sort_by(|a, b| {
                a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
            });
            let energies = levels.iter().map(|l| l.0).collect();
            let states = levels
                .into_iter()
                .map(|(_, block, band, cell_function)| BlochState { block, band, cell_function })
                .collect();
            Ok(Spectrum { energies, basis: EigenBasis::Bloch { period: p, cells, states }, grid })
        }
    }
}

/// Boltzmann amplitudes `w_n = exp(−E_n/(2 k_B T))/√Q` over the retained states.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermalWeights<T> {
    temperature: T,
    threshold: T,
    energies: Vec<T>,
    amplitudes: Vec<T>,
    log_partition_function: T,
}

impl<T: Real> ThermalWeights<T> {
    /// Retains the ground state and every following level whose half-Boltzmann
    /// factor relative to the ground state is at least `threshold`. `energies`
    /// must ascend.
    pub fn from_energies(energies: &[T], temperature: T, threshold: T) -> Result<Self> {
        if !(temperature > T::zero() && temperature.is_finite()) {
            return Err(domain(format!("temperature must be positive, got {temperature}")));
        }
        if !(threshold > T::zero() && threshold < T::one()) {
            return Err(domain(format!("weight threshold must lie in (0, 1), got {threshold}")));
        }
        if energies.is_empty() {
            return Err(usage("empty spectrum"));
        }
        let kt = T::lit(K_B) * temperature;
        let e0 = energies[0];
        let half: Vec<T> =
            energies.iter().map(|&e| (-(e - e0) / (T::lit(2.0) * kt)).exp()).take_while(|&h| h >= threshold).collect();
        let shifted_q = compensated_sum(half.iter().map(|&h| h * h));
        let norm = shifted_q.sqrt();
        Ok(Self {
            temperature,
            threshold,
            energies: energies[..half.len()].to_vec(),
            amplitudes: half.into_iter().map(|h| h / norm).collect(),
            log_partition_function: shifted_q.ln() - e0 / kt,
        })
    }

    pub fn temperature(&self) -> T {
        self.temperature
    }

    pub fn threshold(&self) -> T {
        self.threshold
    }

    /// Number of retained states; they are indices `0..retained()`.
    pub fn retained(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn energies(&self) -> &[T] {
        &self.energies
    }

    pub fn amplitudes(&self) -> &[T] {
        &self.amplitudes
    }

    /// Q over the retained set.
    pub fn partition_function(&self) -> T {
        self.log_partition_function.exp()
    }

    pub fn log_partition_function(&self) -> T {
        self.log_partition_function
    }

    /// Occupation probabilities `w_n²`.
    pub fn populations(&self) -> Vec<T> {
        self.amplitudes.iter().map(|w| *w * *w).collect()
    }
}

pub fn thermal_weights<T: Real>(spectrum: &Spectrum<T>, temperature: T, threshold: T) -> Result<ThermalWeights<T>> {
    ThermalWeights::from_energies(spectrum.energies(), temperature, threshold)
}

/// A cluster of levels between two large gaps.
#[derive(Clone, Debug, PartialEq)]
pub struct Band<T> {
    pub first: usize,
    pub last: usize,
    pub center: T,
    pub width: T,
}

impl<T> Band<T> {
    pub fn count(&self) -> usize {
        self.last - self.first + 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandReport<T> {
    pub barrier_energy: T,
    pub bands: Vec<Band<T>>,
}

impl<T: Real> BandReport<T> {
    pub fn count(&self) -> usize {
        self.bands.len()
    }

    /// For each band: (summed band population, mean per-level population),
    /// both relative to the ground level.
    pub fn relative_populations(&self, weights: &ThermalWeights<T>) -> Vec<(T, T)> {
        let pops = weights.populations();
        let ground = pops[0];
        self.bands
            .iter()
            .map(|b| {
                let upto = (b.last + 1).min(pops.len());
                let sum: T = if b.first < upto { pops[b.first..upto].iter().copied().sum() } else { T::zero() };
                (sum / ground, sum / (ground * T::from_usize_exact(b.count())))
            })
            .collect()
    }
}

fn median<T: Real>(values: &[T]) -> T {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / T::lit(2.0)
    }
}

/// Groups the levels below `barrier_energy` into bands: a level opens a new
/// band when its gap to the previous level exceeds three times the median
/// gap inside the current band. Degenerate partners are merged first.
pub fn band_report<T: Real>(spectrum: &Spectrum<T>, barrier_energy: T) -> Result<BandReport<T>> {
    if spectrum.grid().boundary() != Boundary::Periodic {
        return Err(usage("band analysis needs a periodic spectrum"));
    }
    let e = spectrum.energies();
    let below = e.iter().take_while(|&&x| x < barrier_energy).count();
    let mut bands = Vec::new();
    if below == 0 {
        return Ok(BandReport { barrier_energy, bands });
    }
    let scale = e[..below].iter().fold(T::zero(), |a, x| a.max(x.abs())).max(T::min_positive_value());
    let degenerate = T::lit(1e-10) * scale;
    let close = |first: usize, last: usize| Band {
        first,
        last,
        center: (e[first] + e[last]) / T::lit(2.0),
        width: e[last] - e[first],
    };

    let mut first = 0;
    let mut gaps: Vec<T> = Vec::new();
    let mut previous_gaps: Option<Vec<T>> = None;
    for i in 1..below {
        let gap = e[i] - e[i - 1];
        if gap <= degenerate {
            continue;
        }
        let reference = if !gaps.is_empty() {
            Some(median(&gaps))
        } else if i - 1 > first {
            // Band so far consists of degenerate levels only.
            Some(degenerate)
        } else {
            previous_gaps.as_ref().filter(|g| !g.is_empty()).map(|g| median(g))
        };
        match reference {
            Some(r) if gap > T::lit(3.0) * r => {
                bands.push(close(first, i - 1));
                first = i;
                previous_gaps = Some(std::mem::take(&mut gaps));
            }
            _ => gaps.push(gap),
        }
    }
    bands.push(close(first, below - 1));
    Ok(BandReport { barrier_energy, bands })
}
