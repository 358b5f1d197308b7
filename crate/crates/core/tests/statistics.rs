use isf_core::dynamics::kick_matrix;
use isf_core::isf::{isf_ensemble, isf_exact_trace, EnsembleSpec, TimeGrid};
use isf_core::spectrum::{diagonalize, ThermalWeights};
use isf_core::system::{build_hamiltonian, Boundary, Grid};

#[test]
fn ensemble_mean_agrees_with_exact_trace_and_errors_shrink() {
    let grid = Grid::new(Boundary::Box, 10.0, 150).unwrap();
    let s = diagonalize(&build_hamiltonian(&grid, &vec![0.0; 150], 1.0).unwrap()).unwrap();
    let w = ThermalWeights::from_energies(s.energies(), 300.0, 1e-8).unwrap();
    let m = kick_matrix(&s, 1.0, s.len(), w.retained(), 1e-10).unwrap();
    let times = TimeGrid::new(0.1, 201).unwrap();
    let exact = isf_exact_trace(&w, &m, 1.0, &times).unwrap();

    // Squared std_err pooled over independent replicate ensembles estimates
    // σ²/n; a single ensemble of five samples scatters by about 35%.
    // Coverage is pooled the same way: with four degrees of freedom one small
    // variance estimate shifts every time point of that ensemble at once.
    let pooled = |n: usize| {
        let mut acc = 0.0;
        let (mut inside, mut total) = (0, 0);
        for seed in 0..16 {
            let tr = isf_ensemble(&w, &m, 1.0, &times, EnsembleSpec { n_samples: n, seed, workers: 0 }).unwrap();
            let se = tr.std_err.clone().unwrap();
            let within = tr
                .values
                .iter()
                .zip(&exact.values)
                .zip(&se)
                .skip(1)
                .filter(|((a, b), e)| (*a - *b).norm() <= 5.0 * **e)
                .count();
            inside += within;
            total += tr.len() - 1;
            acc += se[1..].iter().map(|e| e * e).sum::<f64>() / (se.len() - 1) as f64;
        }
        assert!(inside as f64 >= 0.95 * total as f64, "n = {n}: {inside}/{total} within 5 std_err");
        (acc / 16.0).sqrt()
    };
    let (e5, e20, e80) = (pooled(5), pooled(20), pooled(80));
    for ratio in [e5 / e20, e20 / e80] {
        assert!((ratio / 2.0 - 1.0).abs() <= 0.3, "std_err ratio {ratio}");
    }
}
