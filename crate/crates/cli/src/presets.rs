//! Built-in configurations for the two reference experiments.

/// Free particle in a box of 20 thermal wavelengths.
pub const BALLISTIC: &str = "\
# Free particle, m = 1 u, T = 300 K, q = 1/Å.
system.mass_u = 1.0
system.temperature_K = 300
grid.boundary = box
grid.length_lambda_th = 20
grid.points = 800
potential.kind = free
scattering.q_invA = 1.0
time.t_max_tau_th = 5
time.n_times = 1001
ensemble.n_samples = 60
ensemble.seed = 42
";

/// CO on a ring of 80 cosine cells with the Cu(100) lattice constant.
pub const CO_CU100: &str = "\
# CO mass on a cosine lattice, 33.5 meV barrier, T = 190 K.
system.mass_u = 27.9949
system.temperature_K = 190
grid.boundary = periodic
grid.cells = 80
grid.cell_A = 2.556
grid.points = 4000
potential.kind = cosine
potential.amplitude_meV = 33.5
scattering.q_invA = 1.0
time.t_max_ps = 200
time.n_times = 16001
ensemble.n_samples = 20
ensemble.seed = 42
";

pub fn by_name(name: &str) -> Option<&'static str> {
    match name {
        "ballistic" => Some(BALLISTIC),
        "co-cu100" => Some(CO_CU100),
        _ => None,
    }
}

pub const NAMES: &[&str] = &["ballistic", "co-cu100"];
