//! Spatial grids, model potentials and the finite-difference Hamiltonian.

use std::io::BufRead;

use crate::error::{config, domain, usage, Result};
use crate::num::{Complex, Real};
use crate::units::HBAR2_PER_AMU_A2;

/// Smallest grid accepted by [`Grid::new`].
pub const MIN_POINTS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// Hard walls at `x = 0` and `x = L`; the wall points are not stored.
    Box,
    /// Ring of circumference `L`; point `n` aliases point 0.
    Periodic,
}

/// Uniform 1-D grid, positions in Å.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    boundary: Boundary,
    length: T,
    n_points: usize,
    spacing: T,
}

impl<T: Real> Grid<T> {
    pub fn new(boundary: Boundary, length: T, n_points: usize) -> Result<Self> {
        if !(length > T::zero() && length.is_finite()) {
            return Err(config(format!("grid length must be positive, got {length}")));
        }
        if n_points < MIN_POINTS {
            return Err(config(format!("grid needs at least {MIN_POINTS} points, got {n_points}")));
        }
        let cells = match boundary {
            Boundary::Box => n_points + 1,
            Boundary::Periodic => n_points,
        };
        let spacing = length / T::from_usize_exact(cells);
        Ok(Self { boundary, length, n_points, spacing })
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    /// Position of point `i`.
    pub fn x(&self, i: usize) -> T {
        let offset = match self.boundary {
            Boundary::Box => 1,
            Boundary::Periodic => 0,
        };
        T::from_usize_exact(i + offset) * self.spacing
    }

    pub fn points(&self) -> Vec<T> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Δx-weighted inner product ⟨a|b⟩.
    pub fn inner(&self, a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
        let s: Complex<T> = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
        s * self.spacing
    }

    /// Δx-weighted L² norm.
    pub fn norm(&self, a: &[Complex<T>]) -> T {
        let s: T = a.iter().map(|x| x.norm_sqr()).sum();
        (s * self.spacing).sqrt()
    }
}

/// Builds a grid; see [`Grid::new`].
pub fn build_grid<T: Real>(boundary: Boundary, length: T, n_points: usize) -> Result<Grid<T>> {
    Grid::new(boundary, length, n_points)
}

#[derive(Clone, Debug, PartialEq)]
pub enum PotentialSpec<T> {
    Free,
    /// `½ m ω² (x − center)²` with ω in rad/ps and m in u; `center` defaults to `L/2`.
    Harmonic {
        omega: T,
        mass: T,
        center: Option<T>,
    },
    /// `(V0/2)(1 − cos(2πx/a))`, minima at the cell origins.
    PeriodicCosine {
        amplitude: T,
        cell_length: T,
    },
    /// One energy sample (meV) per grid point.
    Tabulated {
        samples: Vec<T>,
    },
}

impl<T: Real> PotentialSpec<T> {
    /// Harmonic well specified through its quantum ħω in meV.
    pub fn harmonic_from_quantum(hbar_omega: T, mass: T) -> Self {
        PotentialSpec::Harmonic { omega: hbar_omega / T::lit(crate::units::HBAR), mass, center: None }
    }
}

/// Number of lattice cells of length `cell` in `length`, if it is an integer.
fn commensurate_cells<T: Real>(length: T, cell: T) -> Option<usize> {
    let ratio = length / cell;
    let rounded = ratio.round();
    if rounded >= T::one() && (ratio - rounded).abs() <= T::lit(1e-9) * ratio {
        rounded.to_usize()
    } else {
        None
    }
}

/// Samples the potential on the grid, in meV.
pub fn eval_potential<T: Real>(spec: &PotentialSpec<T>, grid: &Grid<T>) -> Result<Vec<T>> {
    let n = grid.n_points();
    match spec {
        PotentialSpec::Free => Ok(vec![T::zero(); n]),
        PotentialSpec::Harmonic { omega, mass, center } => {
            if !(*omega > T::zero()) {
                return Err(domain(format!("harmonic frequency must be positive, got {omega}")));
            }
            if !(*mass > T::zero()) {
                return Err(domain(format!("mass must be positive, got {mass}")));
            }
            let xc = center.unwrap_or(grid.length() / T::lit(2.0));
            // ½ m ω² in meV/Å² with ω in rad/ps: m ω² ħ² / (ħ² ...) rearranged through ħ²/u.
            let k = *mass * *omega * *omega * T::lit(crate::units::HBAR * crate::units::HBAR / HBAR2_PER_AMU_A2);
            Ok((0..n)
                .map(|i| {
                    let d = grid.x(i) - xc;
                    T::lit(0.5) * k * d * d
                })
                .collect())
        }
        PotentialSpec::PeriodicCosine { amplitude, cell_length } => {
            if *amplitude < T::zero() {
                return Err(domain(format!("cosine amplitude must be non-negative, got {amplitude}")));
            }
            if !(*cell_length > T::zero()) {
                return Err(domain(format!("cell length must be positive, got {cell_length}")));
            }
            let half = *amplitude / T::lit(2.0);
            let cells = commensurate_cells(grid.length(), *cell_length);
            if grid.boundary() == Boundary::Periodic {
                let cells = cells.ok_or_else(|| {
                    config(format!(
                        "cell length {cell_length} does not divide the periodic grid length {}",
                        grid.length()
                    ))
                })?;
                if n.is_multiple_of(cells) {
                    // Index arithmetic keeps the samples exactly periodic.
                    let per_cell = n / cells;
                    let p = T::from_usize_exact(per_cell);
                    return Ok((0..n)
                        .map(|i| {
                            let phase = T::TAU() * T::from_usize_exact(i % per_cell) / p;
                            half * (T::one() - phase.cos())
                        })
                        .collect());
                }
            }
            Ok((0..n).map(|i| half * (T::one() - (T::TAU() * grid.x(i) / *cell_length).cos())).collect())
        }
        PotentialSpec::Tabulated { samples } => {
            if samples.len() != n {
                return Err(config(format!(
                    "tabulated potential has {} samples but the grid has {n} points",
                    samples.len()
                )));
            }
            if let Some(bad) = samples.iter().position(|v| !v.is_finite()) {
                return Err(config(format!("tabulated potential sample {bad} is not finite")));
            }
            Ok(samples.clone())
        }
    }
}

/// Reads a two-column `position(Å) energy(meV)` table whose positions must
/// coincide with the grid points to 1e-9 Å. Blank lines and `#` comments are skipped.
pub fn read_tabulated<T: Real, R: BufRead>(reader: R, grid: &Grid<T>) -> Result<Vec<T>> {
    let mut samples = Vec::with_capacity(grid.n_points());
    let mut last: Option<f64> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| config(format!("potential table line {}: {e}", lineno + 1)))?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut cols = body.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty());
        let parse = |s: Option<&str>| -> Result<f64> {
            s.ok_or_else(|| config(format!("potential table line {}: expected two columns", lineno + 1)))?
                .parse::<f64>()
                .map_err(|e| config(format!("potential table line {}: {e}", lineno + 1)))
        };
        let x = parse(cols.next())?;
        let v = parse(cols.next())?;
        if let Some(prev) = last {
            if x <= prev {
                return Err(config(format!("potential table line {}: positions must increase", lineno + 1)));
            }
        }
        last = Some(x);
        let i = samples.len();
        if i >= grid.n_points() {
            return Err(config(format!("potential table has more rows than the {} grid points", grid.n_points())));
        }
        let expected = grid.x(i).to_f64_lossy();
        if (x - expected).abs() > 1e-9 {
            return Err(config(format!(
                "potential table line {}: position {x} does not match grid point {expected}",
                lineno + 1
            )));
        }
        samples.push(T::lit(v));
    }
    if samples.len() != grid.n_points() {
        return Err(config(format!("potential table has {} rows, grid has {} points", samples.len(), grid.n_points())));
    }
    Ok(samples)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixStructure {
    Tridiagonal,
    /// Tridiagonal plus the (0, n−1) wrap coupling.
    TridiagonalPlusCorners,
}

/// Real symmetric (cyclic-)tridiagonal Hamiltonian, entries in meV.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianMatrix<T> {
    structure: MatrixStructure,
    diagonal: Vec<T>,
    off_diagonal: Vec<T>,
    corner: Option<T>,
    kinetic_prefactor: T,
    mass: T,
    grid: Grid<T>,
}

impl<T: Real> HamiltonianMatrix<T> {
    pub fn dimension(&self) -> usize {
        self.diagonal.len()
    }

    pub fn structure(&self) -> MatrixStructure {
        self.structure
    }

    pub fn diagonal(&self) -> &[T] {
        &self.diagonal
    }

    /// Couplings between points `i` and `i + 1`.
    pub fn off_diagonal(&self) -> &[T] {
        &self.off_diagonal
    }

    pub fn corner(&self) -> Option<T> {
        self.corner
    }

    /// ħ²/(2mΔx²) in meV.
    pub fn kinetic_prefactor(&self) -> T {
        self.kinetic_prefactor
    }

    pub fn mass(&self) -> T {
        self.mass
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    /// Coupling between `i` and `i + 1 (mod n)`; the last entry is the corner (zero for box grids).
    pub fn cyclic_couplings(&self) -> Vec<T> {
        let mut c = self.off_diagonal.clone();
        c.push(self.corner.unwrap_or_else(T::zero));
        c
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let n = self.dimension();
        if i == j {
            return self.diagonal[i];
        }
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        if hi == lo + 1 {
            return self.off_diagonal[lo];
        }
        if lo == 0 && hi == n - 1 {
            if let Some(c) = self.corner {
                return c;
            }
        }
        T::zero()
    }

    pub fn matvec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.dimension();
        let mut out: Vec<Complex<T>> = (0..n).map(|i| v[i] * self.diagonal[i]).collect();
        for i in 0..n - 1 {
            let t = self.off_diagonal[i];
            out[i] += v[i + 1] * t;
            out[i + 1] += v[i] * t;
        }
        if let Some(c) = self.corner {
            out[0] += v[n - 1] * c;
            out[n - 1] += v[0] * c;
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.dimension();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)).collect()).collect()
    }
}

/// Three-point finite-difference Hamiltonian `−ħ²/(2m) d²/dx² + V(x)`, mass in u.
pub fn build_hamiltonian<T: Real>(grid: &Grid<T>, potential: &[T], mass: T) -> Result<HamiltonianMatrix<T>> {
    if !(mass > T::zero() && mass.is_finite()) {
        return Err(domain(format!("mass must be positive, got {mass}")));
    }
    let n = grid.n_points();
    if potential.len() != n {
        return Err(usage(format!("potential has {} samples, grid has {n} points", potential.len())));
    }
    let dx = grid.spacing();
    let kp = T::lit(HBAR2_PER_AMU_A2) / (T::lit(2.0) * mass * dx * dx);
    let diagonal = potential.iter().map(|&v| T::lit(2.0) * kp + v).collect();
    let off_diagonal = vec![-kp; n - 1];
    let (structure, corner) = match grid.boundary() {
        Boundary::Box => (MatrixStructure::Tridiagonal, None),
        Boundary::Periodic => (MatrixStructure::TridiagonalPlusCorners, Some(-kp)),
    };
    Ok(HamiltonianMatrix { structure, diagonal, off_diagonal, corner, kinetic_prefactor: kp, mass, grid: grid.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    #[test]
    fn box_grid_excludes_walls() {
        let lam = crate::units::thermal_wavelength(1.0_f64, 300.0).unwrap();
        let g = Grid::new(Boundary::Box, 20.0 * lam, 800).unwrap();
        assert!((g.spacing() - 20.0 * lam / 801.0).abs() < 1e-15);
        assert!((g.x(0) - g.spacing()).abs() < 1e-15);
        assert!((g.x(799) - 800.0 * g.spacing()).abs() < 1e-12);
        assert!(g.x(799) < g.length());
    }

    #[test]
    fn periodic_grid_placement() {
        let g = Grid::new(Boundary::Periodic, 10.0_f64, 16).unwrap();
        assert_eq!(g.x(0), 0.0);
        assert!((g.x(15) - 9.375).abs() < 1e-15);
        let co = Grid::new(Boundary::Periodic, 80.0 * 2.556_f64, 4000).unwrap();
        assert!((co.spacing() - 2.556 / 50.0).abs() < 1e-14);
    }

    #[test]
    fn grid_rejects_small_or_bad_input() {
        assert!(matches!(Grid::new(Boundary::Box, 1.0_f64, 15), Err(Error::Config(_))));
        assert!(matches!(Grid::new(Boundary::Box, 0.0_f64, 100), Err(Error::Config(_))));
    }

    #[test]
    fn free_potential_is_zero() {
        let g = Grid::new(Boundary::Box, 5.0_f64, 32).unwrap();
        assert!(eval_potential(&PotentialSpec::Free, &g).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cosine_barrier_top_and_minima() {
        let a = 2.556_f64;
        let g = Grid::new(Boundary::Periodic, 4.0 * a, 200).unwrap();
        let v = eval_potential(&PotentialSpec::PeriodicCosine { amplitude: 33.5, cell_length: a }, &g).unwrap();
        // 50 points per cell: index 25 is x = a/2.
        assert!((v[25] - 33.5).abs() < 1e-12);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[50], 0.0);
        for i in 0..150 {
            assert_eq!(v[i], v[i + 50]);
        }
    }

    #[test]
    fn cosine_must_be_commensurate_on_rings() {
        let g = Grid::new(Boundary::Periodic, 10.0_f64, 64).unwrap();
        let spec = PotentialSpec::PeriodicCosine { amplitude: 1.0, cell_length: 3.0 };
        assert!(matches!(eval_potential(&spec, &g), Err(Error::Config(_))));
        let b = Grid::new(Boundary::Box, 10.0_f64, 64).unwrap();
        assert!(eval_potential(&spec, &b).is_ok());
    }

    #[test]
    fn harmonic_is_symmetric_about_center() {
        let g = Grid::new(Boundary::Box, 10.0_f64, 99).unwrap();
        // Odd interior count on a box puts point 49 at the center.
        let v = eval_potential(&PotentialSpec::harmonic_from_quantum(1.8, 28.0), &g).unwrap();
        assert!((g.x(49) - 5.0).abs() < 1e-12);
        for d in 1..40 {
            assert!((v[49 + d] - v[49 - d]).abs() <= 1e-12 * v[49 + d]);
        }
    }

    #[test]
    fn harmonic_curvature_matches_quantum() {
        // V = ½ m ω² d²: check through ħω = ħ √(k/m) with k = 2V/d².
        let g = Grid::new(Boundary::Box, 10.0_f64, 99).unwrap();
        let v = eval_potential(&PotentialSpec::harmonic_from_quantum(1.8, 28.0), &g).unwrap();
        let d = g.x(60) - 5.0;
        let k = 2.0 * v[60] / (d * d); // meV/Å²
        let hbar_omega = (k * HBAR2_PER_AMU_A2 / 28.0).sqrt();
        assert!((hbar_omega - 1.8).abs() < 1e-12);
    }

    #[test]
    fn tabulated_length_checked() {
        let g = Grid::new(Boundary::Box, 1.0_f64, 16).unwrap();
        let spec = PotentialSpec::Tabulated { samples: vec![0.0; 15] };
        assert!(matches!(eval_potential(&spec, &g), Err(Error::Config(_))));
    }

    #[test]
    fn tabulated_file_round_trip() {
        let g = Grid::new(Boundary::Periodic, 16.0_f64, 16).unwrap();
        let mut text = String::from("# x V\n");
        for i in 0..16 {
            text.push_str(&format!("{} {}\n", g.x(i), i as f64 * 0.5));
        }
        let v = read_tabulated(text.as_bytes(), &g).unwrap();
        assert_eq!(v[3], 1.5);
        let shifted = text.replace("\n3 1.5\n", "\n3.1 1.5\n");
        assert!(read_tabulated(shifted.as_bytes(), &g).is_err());
        let short: String = text.lines().take(10).collect::<Vec<_>>().join("\n");
        assert!(read_tabulated(short.as_bytes(), &g).is_err());
    }

    #[test]
    fn hamiltonian_structure() {
        let g = Grid::new(Boundary::Periodic, 10.0_f64, 32).unwrap();
        let free = build_hamiltonian(&g, &vec![0.0; 32], 2.0).unwrap();
        assert_eq!(free.structure(), MatrixStructure::TridiagonalPlusCorners);
        assert!(free.kinetic_prefactor() > 0.0);
        let dense = free.to_dense();
        for i in 0..32 {
            for j in 0..32 {
                assert_eq!(dense[i][j], dense[j][i]);
            }
        }
        assert_eq!(free.get(0, 31), -free.kinetic_prefactor());
        let flat = eval_potential(&PotentialSpec::PeriodicCosine { amplitude: 0.0, cell_length: 2.5 }, &g).unwrap();
        assert_eq!(build_hamiltonian(&g, &flat, 2.0).unwrap(), free);
        let b = Grid::new(Boundary::Box, 10.0_f64, 32).unwrap();
        let hb = build_hamiltonian(&b, &vec![0.0; 32], 2.0).unwrap();
        assert_eq!(hb.structure(), MatrixStructure::Tridiagonal);
        assert_eq!(hb.get(0, 31), 0.0);
        assert!(matches!(build_hamiltonian(&b, &vec![0.0; 32], 0.0), Err(Error::Domain(_))));
    }
}
