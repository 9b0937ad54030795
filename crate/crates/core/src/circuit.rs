//! Charge-basis quantization of the four-node superconducting ring.
//!
//! Four active islands sit around a grounded center. Each island connects to
//! ground through a radial junction, to its two ring neighbors through
//! azimuthal junctions, and to the opposite island through one of two
//! diametric junctions. Inner loop fluxes enter the azimuthal branch phases,
//! and the diametric branches pick up the enclosed pair of inner fluxes plus
//! the outer flux.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numerics::{SparseBuilder, SparseOperator, Spectrum};
use crate::units;
use crate::{Error, Result};

/// Number of active circuit nodes.
pub const NODES: usize = 4;
/// Number of diametric junctions (each shared by an opposite node pair).
pub const DIAMETRIC_JUNCTIONS: usize = 2;
/// Geometric shunt fraction used when geometric capacitances are enabled.
pub const DEFAULT_GEOMETRIC_CAP_FRACTION: f64 = 0.1;

/// Granularity of the island charge basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargeResolution {
    /// Island charge in integer Cooper pairs (default).
    CooperPair,
    /// Island charge in half Cooper pairs; pair tunneling moves two basis
    /// steps, so the two electron-parity sectors decouple.
    Electron,
}

fn ones4() -> [f64; NODES] {
    [1.0; NODES]
}

fn ones2() -> [f64; DIAMETRIC_JUNCTIONS] {
    [1.0; DIAMETRIC_JUNCTIONS]
}

/// Full parameter set of the ring circuit. Energies are E/h in GHz, fluxes
/// in units of the flux quantum, gate charges in Cooper pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub ej_radial_ghz: f64,
    pub ec_radial_ghz: f64,
    pub ej_azimuthal_ghz: f64,
    pub ec_azimuthal_ghz: f64,
    pub ej_diametric_ghz: f64,
    pub ec_diametric_ghz: f64,
    /// Per-junction Josephson-energy multipliers for disorder injection.
    pub radial_multipliers: [f64; NODES],
    pub azimuthal_multipliers: [f64; NODES],
    pub diametric_multipliers: [f64; DIAMETRIC_JUNCTIONS],
    /// Per-junction capacitance multipliers; junction-size disorder scales
    /// a junction's E_J up and its E_C down by the same area factor.
    #[serde(default = "ones4")]
    pub radial_cap_multipliers: [f64; NODES],
    #[serde(default = "ones4")]
    pub azimuthal_cap_multipliers: [f64; NODES],
    #[serde(default = "ones2")]
    pub diametric_cap_multipliers: [f64; DIAMETRIC_JUNCTIONS],
    /// Inner loop fluxes, one per azimuthal plaquette.
    pub inner_fluxes_phi0: [f64; NODES],
    /// Outer flux threading the large loop.
    pub outer_flux_phi0: f64,
    /// Island gate charges.
    pub gate_charges: [f64; NODES],
    /// Charge states per island run from -n_max to n_max Cooper pairs.
    pub n_max: usize,
    /// `Some(fraction)` adds geometric shunts of `fraction` times each
    /// junction capacitance in parallel; `None` disables them.
    pub geometric_cap_fraction: Option<f64>,
    pub charge_resolution: ChargeResolution,
}

impl CircuitSpec {
    /// Device working point: all junction classes at their design values,
    /// every flux at half a flux quantum and every gate at half a Cooper
    /// pair (the doubly sweet spot).
    pub fn optimal_point() -> Self {
        Self {
            ej_radial_ghz: 2.5,
            ec_radial_ghz: 5.0,
            ej_azimuthal_ghz: 5.0,
            ec_azimuthal_ghz: 2.5,
            ej_diametric_ghz: 5.55,
            ec_diametric_ghz: 2.25,
            radial_multipliers: [1.0; NODES],
            azimuthal_multipliers: [1.0; NODES],
            diametric_multipliers: [1.0; DIAMETRIC_JUNCTIONS],
            radial_cap_multipliers: [1.0; NODES],
            azimuthal_cap_multipliers: [1.0; NODES],
            diametric_cap_multipliers: [1.0; DIAMETRIC_JUNCTIONS],
            inner_fluxes_phi0: [0.5; NODES],
            outer_flux_phi0: 0.5,
            gate_charges: [0.5; NODES],
            n_max: 7,
            geometric_cap_fraction: None,
            charge_resolution: ChargeResolution::CooperPair,
        }
    }

    /// Same working point with a truncation suitable for fast tests.
    pub fn fast_test_point() -> Self {
        Self {
            n_max: 4,
            ..Self::optimal_point()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("ej_radial_ghz", self.ej_radial_ghz),
            ("ec_radial_ghz", self.ec_radial_ghz),
            ("ej_azimuthal_ghz", self.ej_azimuthal_ghz),
            ("ec_azimuthal_ghz", self.ec_azimuthal_ghz),
            ("ej_diametric_ghz", self.ej_diametric_ghz),
            ("ec_diametric_ghz", self.ec_diametric_ghz),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        if self.n_max < 2 {
            return Err(Error::InvalidParameter {
                name: "n_max",
                reason: format!("must be at least 2, got {}", self.n_max),
            });
        }
        if let Some(f) = self.geometric_cap_fraction {
            if !(f >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "geometric_cap_fraction",
                    reason: format!("must be non-negative, got {f}"),
                });
            }
        }
        Ok(())
    }

    /// Charge states per island.
    fn states_per_node(&self) -> usize {
        match self.charge_resolution {
            ChargeResolution::CooperPair => 2 * self.n_max + 1,
            ChargeResolution::Electron => 4 * self.n_max + 1,
        }
    }

    /// Island charge in Cooper pairs for a basis index on one node.
    fn charge_of_index(&self, idx: usize) -> f64 {
        match self.charge_resolution {
            ChargeResolution::CooperPair => idx as f64 - self.n_max as f64,
            ChargeResolution::Electron => 0.5 * idx as f64 - self.n_max as f64,
        }
    }

    /// Basis steps moved by one Cooper-pair tunneling event.
    fn pair_step(&self) -> usize {
        match self.charge_resolution {
            ChargeResolution::CooperPair => 1,
            ChargeResolution::Electron => 2,
        }
    }

    /// Total Hilbert-space dimension.
    pub fn dimension(&self) -> usize {
        self.states_per_node().pow(NODES as u32)
    }

    /// Branch phase offset (in flux quanta) of an azimuthal junction.
    fn azimuthal_flux(&self, bond: usize) -> f64 {
        self.inner_fluxes_phi0[bond]
    }

    /// Branch phase offset (in flux quanta) of a diametric junction. The
    /// branch from node `i` to node `i+2` encloses two inner plaquettes and
    /// the outer loop.
    fn diametric_flux(&self, bond: usize) -> f64 {
        self.inner_fluxes_phi0[bond] + self.inner_fluxes_phi0[(bond + 1) % NODES]
            + self.outer_flux_phi0
    }

    /// Critical current of a junction in amperes.
    pub fn critical_current(&self, junction: Junction) -> f64 {
        let (ej, mult) = match junction {
            Junction::Radial(i) => (self.ej_radial_ghz, self.radial_multipliers[i]),
            Junction::Azimuthal(i) => (self.ej_azimuthal_ghz, self.azimuthal_multipliers[i]),
            Junction::Diametric(i) => (self.ej_diametric_ghz, self.diametric_multipliers[i]),
        };
        units::critical_current_from_ej(ej * mult)
    }

    /// All junctions in a fixed order: radial 0-3, azimuthal 0-3,
    /// diametric 0-1.
    pub fn junctions() -> impl Iterator<Item = Junction> {
        (0..NODES)
            .map(Junction::Radial)
            .chain((0..NODES).map(Junction::Azimuthal))
            .chain((0..DIAMETRIC_JUNCTIONS).map(Junction::Diametric))
    }
}

/// Identifies one physical junction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Junction {
    /// Node `i` to ground.
    Radial(usize),
    /// Node `i` to node `i+1`.
    Azimuthal(usize),
    /// Node `i` to node `i+2`, `i` in 0..2.
    Diametric(usize),
}

impl std::fmt::Display for Junction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Junction::Radial(i) => write!(f, "radial{i}"),
            Junction::Azimuthal(i) => write!(f, "azimuthal{i}"),
            Junction::Diametric(i) => write!(f, "diametric{i}"),
        }
    }
}

/// Observables whose transition matrix elements gate the protection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CircuitOperator {
    /// Island charge relative to its gate, N̂_i - Ng_i, in Cooper pairs.
    NodeCharge(usize),
    /// Junction current I_c sin(branch phase), in amperes.
    JunctionCurrent(Junction),
}

/// Capacitance of one junction in farads, including its disorder
/// multiplier but not the geometric shunt.
pub fn junction_capacitance(spec: &CircuitSpec, junction: Junction) -> f64 {
    let (ec, mult) = match junction {
        Junction::Radial(i) => (spec.ec_radial_ghz, spec.radial_cap_multipliers[i]),
        Junction::Azimuthal(i) => (spec.ec_azimuthal_ghz, spec.azimuthal_cap_multipliers[i]),
        Junction::Diametric(i) => (spec.ec_diametric_ghz, spec.diametric_cap_multipliers[i]),
    };
    mult * units::capacitance_from_ec(ec)
}

/// Node capacitance matrix in farads. With equal multipliers the diagonal is
/// C_r + 2C_a + C_l, nearest neighbors -C_a, opposite nodes -C_l; geometric
/// shunts scale every junction capacitance by (1 + fraction).
pub fn capacitance_matrix(spec: &CircuitSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let scale = 1.0 + spec.geometric_cap_fraction.unwrap_or(0.0);
    let mut c = DMatrix::zeros(NODES, NODES);
    for i in 0..NODES {
        c[(i, i)] += scale * junction_capacitance(spec, Junction::Radial(i));
        let ca = scale * junction_capacitance(spec, Junction::Azimuthal(i));
        let j = (i + 1) % NODES;
        c[(i, i)] += ca;
        c[(j, j)] += ca;
        c[(i, j)] -= ca;
        c[(j, i)] -= ca;
    }
    for i in 0..DIAMETRIC_JUNCTIONS {
        let cl = scale * junction_capacitance(spec, Junction::Diametric(i));
        let j = (i + 2) % NODES;
        c[(i, i)] += cl;
        c[(j, j)] += cl;
        c[(i, j)] -= cl;
        c[(j, i)] -= cl;
    }
    Ok(c)
}

/// Inverse capacitance matrix with a conditioning check.
fn inverse_capacitance(spec: &CircuitSpec) -> Result<DMatrix<f64>> {
    let c = capacitance_matrix(spec)?;
    let svd = c.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 0.0 || smax / smin > 1e12 {
        return Err(Error::SingularCapacitance {
            condition: if smin > 0.0 { smax / smin } else { f64::INFINITY },
        });
    }
    c.try_inverse().ok_or(Error::SingularCapacitance {
        condition: f64::INFINITY,
    })
}

/// Flattened basis index with node 0 most significant.
fn basis_index(digits: [usize; NODES], d: usize) -> usize {
    digits.iter().fold(0, |acc, &n| acc * d + n)
}

fn basis_digits(mut idx: usize, d: usize) -> [usize; NODES] {
    let mut out = [0usize; NODES];
    for k in (0..NODES).rev() {
        out[k] = idx % d;
        idx /= d;
    }
    out
}

/// Ring Hamiltonian in the island charge basis, E/h in GHz.
///
/// Charging term 2e^2 Σ_ij C^-1_ij (N̂_i - Ng_i)(N̂_j - Ng_j) plus the three
/// Josephson cosine families realized as Cooper-pair tunneling operators;
/// azimuthal and diametric branches carry their flux phases.
pub fn build_circuit_hamiltonian(spec: &CircuitSpec) -> Result<SparseOperator> {
    let cinv = inverse_capacitance(spec)?;
    let d = spec.states_per_node();
    let dim = spec.dimension();
    let step = spec.pair_step();
    // e^2 * C^-1 has units of joules; 2 e^2 C^-1 / h in GHz.
    let charging_ghz = |i: usize, j: usize| {
        2.0 * units::ELEMENTARY_CHARGE * units::ELEMENTARY_CHARGE * cinv[(i, j)]
            / units::PLANCK_H
            / 1e9
    };
    let mut builder = SparseBuilder::new(dim);
    for idx in 0..dim {
        let digits = basis_digits(idx, d);
        let charges: Vec<f64> = (0..NODES)
            .map(|i| spec.charge_of_index(digits[i]) - spec.gate_charges[i])
            .collect();
        let mut diag = 0.0;
        for i in 0..NODES {
            for j in 0..NODES {
                diag += charging_ghz(i, j) * charges[i] * charges[j];
            }
        }
        builder.add(idx, idx, Complex64::new(diag, 0.0));

        // -E_J/2 e^{i delta} + h.c. per branch; e^{i theta_k} raises node k
        // by one Cooper pair.
        let mut tunnel = |raise: usize, lower: Option<usize>, amp: Complex64| {
            let mut to = digits;
            if to[raise] + step >= d {
                return;
            }
            to[raise] += step;
            if let Some(low) = lower {
                if to[low] < step {
                    return;
                }
                to[low] -= step;
            }
            builder.add_with_conjugate(basis_index(to, d), idx, amp);
        };
        for i in 0..NODES {
            let amp = -0.5 * spec.ej_radial_ghz * spec.radial_multipliers[i];
            tunnel(i, None, Complex64::new(amp, 0.0));
        }
        for i in 0..NODES {
            let amp = -0.5 * spec.ej_azimuthal_ghz * spec.azimuthal_multipliers[i];
            let phase = Complex64::cis(-2.0 * std::f64::consts::PI * spec.azimuthal_flux(i));
            tunnel((i + 1) % NODES, Some(i), amp * phase);
        }
        for i in 0..DIAMETRIC_JUNCTIONS {
            let amp = -0.5 * spec.ej_diametric_ghz * spec.diametric_multipliers[i];
            let phase = Complex64::cis(-2.0 * std::f64::consts::PI * spec.diametric_flux(i));
            tunnel((i + 2) % NODES, Some(i), amp * phase);
        }
    }
    builder.build(true)
}

/// Eigenstates of the ring with the spec they were computed from.
#[derive(Debug, Clone)]
pub struct CircuitStates {
    pub spec: CircuitSpec,
    pub spectrum: Spectrum,
}

impl CircuitStates {
    /// f_ij = E_j - E_i in GHz.
    pub fn transition_frequency(&self, i: usize, j: usize) -> f64 {
        self.spectrum.eigenvalues[j] - self.spectrum.eigenvalues[i]
    }

    /// Qubit frequency f_01 in GHz.
    pub fn f01(&self) -> f64 {
        self.transition_frequency(0, 1)
    }
}

/// Lowest `k` circuit eigenstates.
pub fn circuit_spectrum(spec: &CircuitSpec, k: usize) -> Result<CircuitStates> {
    circuit_spectrum_seeded(spec, k, None)
}

/// As [`circuit_spectrum`], optionally warm-started from the eigenvectors of
/// a nearby spec (same truncation); used by finite-difference stencils.
pub fn circuit_spectrum_seeded(
    spec: &CircuitSpec,
    k: usize,
    warm: Option<&Spectrum>,
) -> Result<CircuitStates> {
    if k < 2 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: format!("need at least the two lowest states, got {k}"),
        });
    }
    let h = build_circuit_hamiltonian(spec)?;
    let use_dense = h.dim() <= crate::numerics::DENSE_DIM_LIMIT
        && !(warm.is_some() && h.dim() > 64);
    let spectrum = if use_dense {
        crate::numerics::dense_eigenpairs(&h)?
    } else {
        let opts = crate::numerics::EigenOptions {
            tol: 1e-10,
            ..Default::default()
        };
        let starts: &[Vec<Complex64>] = warm
            .filter(|s| s.eigenvectors.first().map(|v| v.len()) == Some(h.dim()))
            .map(|s| s.eigenvectors.as_slice())
            .unwrap_or(&[]);
        crate::numerics::lowest_eigenpairs_seeded(&h, k.min(h.dim()), &opts, starts)?
    };
    Ok(CircuitStates {
        spec: spec.clone(),
        spectrum,
    })
}

/// Relative change of f_01 when the truncation grows by two charge states,
/// |f_01(n_max + 2) - f_01(n_max)| / f_01(n_max).
pub fn truncation_convergence(spec: &CircuitSpec) -> Result<f64> {
    let base = circuit_spectrum(spec, 2)?.f01();
    let larger = circuit_spectrum(
        &CircuitSpec {
            n_max: spec.n_max + 2,
            ..spec.clone()
        },
        2,
    )?
    .f01();
    Ok((larger - base).abs() / base)
}

/// Branch phase factor e^{i delta_b} including the flux offset, as a
/// (non-Hermitian) sparse operator.
fn branch_phase_operator(spec: &CircuitSpec, junction: Junction) -> Result<SparseOperator> {
    let d = spec.states_per_node();
    let dim = spec.dimension();
    let step = spec.pair_step();
    let (raise, lower, flux) = match junction {
        Junction::Radial(i) => (i, None, 0.0),
        Junction::Azimuthal(i) => ((i + 1) % NODES, Some(i), spec.azimuthal_flux(i)),
        Junction::Diametric(i) => ((i + 2) % NODES, Some(i), spec.diametric_flux(i)),
    };
    let phase = Complex64::cis(-2.0 * std::f64::consts::PI * flux);
    let mut builder = SparseBuilder::new(dim);
    for idx in 0..dim {
        let digits = basis_digits(idx, d);
        let mut to = digits;
        if to[raise] + step >= d {
            continue;
        }
        to[raise] += step;
        if let Some(low) = lower {
            if to[low] < step {
                continue;
            }
            to[low] -= step;
        }
        builder.add(basis_index(to, d), idx, phase);
    }
    builder.build(false)
}

/// ⟨j|Ô|i⟩ for a protection-relevant observable. Charge elements are in
/// Cooper pairs, current elements in amperes.
pub fn transition_matrix_element(
    states: &CircuitStates,
    operator: CircuitOperator,
    i_state: usize,
    j_state: usize,
) -> Result<Complex64> {
    let n_states = states.spectrum.eigenvalues.len();
    if i_state >= n_states || j_state >= n_states {
        return Err(Error::InvalidParameter {
            name: "state index",
            reason: format!(
                "requested ({i_state}, {j_state}) of {n_states} computed states"
            ),
        });
    }
    let spec = &states.spec;
    let ket = &states.spectrum.eigenvectors[i_state];
    let bra = &states.spectrum.eigenvectors[j_state];
    match operator {
        CircuitOperator::NodeCharge(node) => {
            if node >= NODES {
                return Err(Error::InvalidParameter {
                    name: "node",
                    reason: format!("node {node} out of range"),
                });
            }
            let d = spec.states_per_node();
            let acc: Complex64 = ket
                .iter()
                .zip(bra)
                .enumerate()
                .map(|(idx, (k, b))| {
                    let q = spec.charge_of_index(basis_digits(idx, d)[node])
                        - spec.gate_charges[node];
                    b.conj() * k * q
                })
                .sum();
            Ok(acc)
        }
        CircuitOperator::JunctionCurrent(junction) => {
            if let Junction::Diametric(i) = junction {
                if i >= DIAMETRIC_JUNCTIONS {
                    return Err(Error::InvalidParameter {
                        name: "junction",
                        reason: format!("diametric index {i} out of range"),
                    });
                }
            }
            // I_c sin(delta) = I_c (e^{i delta} - e^{-i delta}) / 2i
            let e = branch_phase_operator(spec, junction)?;
            let forward = crate::numerics::inner(bra, &e.apply(ket));
            // <j| e^{-i delta} |i> = conj(<i| e^{i delta} |j>)
            let backward = crate::numerics::inner(ket, &e.apply(bra)).conj();
            let ic = spec.critical_current(junction);
            Ok(ic * (forward - backward) / Complex64::new(0.0, 2.0))
        }
    }
}

/// Classical Josephson potential on the symmetric phase slice
/// theta_n = n x + y, with located minima of each row's slice.
#[derive(Debug, Clone, Serialize)]
pub struct PotentialLandscape {
    pub x_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    /// Row-major values[iy][ix] in GHz.
    pub values: Vec<Vec<f64>>,
    /// Refined (x, y, V) local minima over the full grid.
    pub minima: Vec<(f64, f64, f64)>,
}

/// Classical potential at one point of the (x, y) slice.
pub fn potential_value(spec: &CircuitSpec, x: f64, y: f64) -> f64 {
    let theta = |n: usize| n as f64 * x + y;
    let tau = 2.0 * std::f64::consts::PI;
    let mut v = 0.0;
    for i in 0..NODES {
        v -= spec.ej_radial_ghz * spec.radial_multipliers[i] * theta(i).cos();
        v -= spec.ej_azimuthal_ghz
            * spec.azimuthal_multipliers[i]
            * (theta((i + 1) % NODES) - theta(i) - tau * spec.azimuthal_flux(i)).cos();
    }
    for i in 0..DIAMETRIC_JUNCTIONS {
        v -= spec.ej_diametric_ghz
            * spec.diametric_multipliers[i]
            * (theta((i + 2) % NODES) - theta(i) - tau * spec.diametric_flux(i)).cos();
    }
    v
}

/// Evaluate the potential on a grid and locate its local minima, refining
/// each candidate by repeated local grid shrinkage.
pub fn potential_landscape(
    spec: &CircuitSpec,
    x_grid: &[f64],
    y_grid: &[f64],
) -> Result<PotentialLandscape> {
    spec.validate()?;
    if x_grid.len() < 3 || y_grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: "need at least 3 x points and 1 y point".into(),
        });
    }
    let values: Vec<Vec<f64>> = y_grid
        .iter()
        .map(|&y| x_grid.iter().map(|&x| potential_value(spec, x, y)).collect())
        .collect();
    let mut minima = Vec::new();
    for (iy, row) in values.iter().enumerate() {
        for ix in 1..x_grid.len() - 1 {
            if row[ix] < row[ix - 1] && row[ix] < row[ix + 1] {
                let (x, y, v) =
                    refine_minimum(spec, x_grid[ix - 1], x_grid[ix + 1], y_grid[iy]);
                minima.push((x, y, v));
            }
        }
    }
    minima.sort_by(|a, b| a.2.total_cmp(&b.2));
    Ok(PotentialLandscape {
        x_grid: x_grid.to_vec(),
        y_grid: y_grid.to_vec(),
        values,
        minima,
    })
}

/// Golden-section refinement of a bracketed minimum along x at fixed y.
fn refine_minimum(spec: &CircuitSpec, mut a: f64, mut b: f64, y: f64) -> (f64, f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = potential_value(spec, c, y);
    let mut fd = potential_value(spec, d, y);
    while (b - a).abs() > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = potential_value(spec, c, y);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = potential_value(spec, d, y);
        }
    }
    let x = 0.5 * (a + b);
    (x, y, potential_value(spec, x, y))
}

/// |psi(x)|^2 of an eigenstate projected onto the symmetric phase slice
/// theta_n = n x, normalized so that sum |psi|^2 * dx = 1.
pub fn phase_profile(states: &CircuitStates, which_state: usize, x_grid: &[f64]) -> Result<Vec<f64>> {
    let n_states = states.spectrum.eigenvalues.len();
    if which_state >= n_states {
        return Err(Error::InvalidParameter {
            name: "which_state",
            reason: format!("state {which_state} of {n_states} computed"),
        });
    }
    if x_grid.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "x_grid",
            reason: "need at least two grid points".into(),
        });
    }
    let spec = &states.spec;
    let d = spec.states_per_node();
    let vec = &states.spectrum.eigenvectors[which_state];
    // Collapse the four-node charge vector onto its slice wavenumber
    // s = sum_k k N_k; amplitudes at equal s add coherently.
    let mut by_wavenumber: std::collections::HashMap<i64, Complex64> =
        std::collections::HashMap::new();
    for (idx, &amp) in vec.iter().enumerate() {
        if amp == Complex64::ZERO {
            continue;
        }
        let digits = basis_digits(idx, d);
        // In electron resolution charges are half-integer; double to index.
        let s2: i64 = (0..NODES)
            .map(|k| (k as i64) * (2.0 * spec.charge_of_index(digits[k])) as i64)
            .sum();
        *by_wavenumber.entry(s2).or_insert(Complex64::ZERO) += amp;
    }
    let mut profile: Vec<f64> = x_grid
        .iter()
        .map(|&x| {
            by_wavenumber
                .iter()
                .map(|(&s2, &a)| a * Complex64::cis(0.5 * s2 as f64 * x))
                .sum::<Complex64>()
                .norm_sqr()
        })
        .collect();
    let dx = x_grid[1] - x_grid[0];
    let total: f64 = profile.iter().sum::<f64>() * dx;
    if total > 0.0 {
        for p in &mut profile {
            *p /= total;
        }
    }
    Ok(profile)
}

/// Sweepable circuit parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircuitAxis {
    /// E_Ja / E_Jr ratio (E_Jr fixed).
    AzimuthalRatio,
    /// E_Jl / E_Jr ratio (E_Jr fixed).
    DiametricRatio,
    /// Offset of the outer flux from 1/2, inner fluxes fixed.
    OuterFluxOffset,
    /// Common offset of all five fluxes from 1/2.
    AllFluxOffset,
    /// Common offset of all gate charges from 1/2.
    GateOffset,
}

impl CircuitAxis {
    pub fn name(self) -> &'static str {
        match self {
            CircuitAxis::AzimuthalRatio => "azimuthal_ratio",
            CircuitAxis::DiametricRatio => "diametric_ratio",
            CircuitAxis::OuterFluxOffset => "outer_flux_offset_phi0",
            CircuitAxis::AllFluxOffset => "all_flux_offset_phi0",
            CircuitAxis::GateOffset => "gate_offset_cooper_pairs",
        }
    }

    /// Apply one coordinate. The Josephson-ratio axes hold each junction's
    /// plasma frequency sqrt(8 E_J E_C) fixed, so E_C co-varies as 1/E_J.
    pub fn apply(self, spec: &mut CircuitSpec, value: f64) {
        match self {
            CircuitAxis::AzimuthalRatio => {
                let plasma_sq = spec.ej_azimuthal_ghz * spec.ec_azimuthal_ghz;
                spec.ej_azimuthal_ghz = value * spec.ej_radial_ghz;
                spec.ec_azimuthal_ghz = plasma_sq / spec.ej_azimuthal_ghz;
            }
            CircuitAxis::DiametricRatio => {
                let plasma_sq = spec.ej_diametric_ghz * spec.ec_diametric_ghz;
                spec.ej_diametric_ghz = value * spec.ej_radial_ghz;
                spec.ec_diametric_ghz = plasma_sq / spec.ej_diametric_ghz;
            }
            CircuitAxis::OuterFluxOffset => spec.outer_flux_phi0 = 0.5 + value,
            CircuitAxis::AllFluxOffset => {
                spec.inner_fluxes_phi0 = [0.5 + value; NODES];
                spec.outer_flux_phi0 = 0.5 + value;
            }
            CircuitAxis::GateOffset => spec.gate_charges = [0.5 + value; NODES],
        }
    }
}

/// Matrix-element magnitude below which a transition counts as forbidden.
pub const PROTECTION_ELEMENT_TOL: f64 = 1e-6;

/// Per-point sweep summary.
#[derive(Debug, Clone, Serialize)]
pub struct CircuitSummary {
    /// Transition frequencies f_0j, j = 1..k-1, GHz.
    pub f0j_ghz: Vec<f64>,
    /// max_i |<1| N̂_i - Ng_i |0>| in Cooper pairs.
    pub max_charge_element: f64,
    /// max_b |<1| Î_b |0>| / I_c(b).
    pub max_current_element: f64,
    /// Both element families below [`PROTECTION_ELEMENT_TOL`].
    pub protected: bool,
}

/// One sweep row: coordinates along the axes, and the summary or the error
/// text when the point failed.
#[derive(Debug, Clone, Serialize)]
pub struct CircuitSweepRow {
    pub coordinates: Vec<f64>,
    pub outcome: std::result::Result<CircuitSummary, String>,
}

/// Summarize one circuit working point for sweeps and the protection checks.
pub fn summarize_point(spec: &CircuitSpec, k: usize) -> Result<CircuitSummary> {
    let states = circuit_spectrum(spec, k)?;
    let f0j_ghz: Vec<f64> = (1..states.spectrum.eigenvalues.len())
        .map(|j| states.transition_frequency(0, j))
        .collect();
    let mut max_charge_element = 0.0f64;
    for node in 0..NODES {
        let el = transition_matrix_element(&states, CircuitOperator::NodeCharge(node), 0, 1)?;
        max_charge_element = max_charge_element.max(el.norm());
    }
    let mut max_current_element = 0.0f64;
    for junction in CircuitSpec::junctions() {
        let el =
            transition_matrix_element(&states, CircuitOperator::JunctionCurrent(junction), 0, 1)?;
        max_current_element =
            max_current_element.max(el.norm() / spec.critical_current(junction));
    }
    Ok(CircuitSummary {
        f0j_ghz,
        max_charge_element,
        max_current_element,
        protected: max_charge_element < PROTECTION_ELEMENT_TOL
            && max_current_element < PROTECTION_ELEMENT_TOL,
    })
}

/// Grid sweep over up to two axes (row-major over the axis grids), points in
/// parallel; per-point failures are recorded, not fatal.
pub fn parameter_sweep(
    base: &CircuitSpec,
    axes: &[(CircuitAxis, Vec<f64>)],
    k: usize,
) -> Result<Vec<CircuitSweepRow>> {
    base.validate()?;
    if axes.is_empty() || axes.len() > 2 {
        return Err(Error::InvalidParameter {
            name: "axes",
            reason: format!("need 1 or 2 sweep axes, got {}", axes.len()),
        });
    }
    let points: Vec<Vec<f64>> = if axes.len() == 1 {
        axes[0].1.iter().map(|&v| vec![v]).collect()
    } else {
        axes[0]
            .1
            .iter()
            .flat_map(|&a| axes[1].1.iter().map(move |&b| vec![a, b]))
            .collect()
    };
    Ok(points
        .into_par_iter()
        .map(|coords| {
            let mut spec = base.clone();
            for ((axis, _), &v) in axes.iter().zip(&coords) {
                axis.apply(&mut spec, v);
            }
            let outcome = summarize_point(&spec, k).map_err(|e| e.to_string());
            CircuitSweepRow {
                coordinates: coords,
                outcome,
            }
        })
        .collect())
}

/// Effective single-island charging energies 2e^2 C^-1_ii / h in GHz,
/// the quantity that plays the role of the spin-model residual ζ.
pub fn charging_energy_ghz(spec: &CircuitSpec) -> Result<DVector<f64>> {
    let cinv = inverse_capacitance(spec)?;
    let pref = 2.0 * units::ELEMENTARY_CHARGE * units::ELEMENTARY_CHARGE / units::PLANCK_H / 1e9;
    Ok(DVector::from_iterator(
        NODES,
        (0..NODES).map(|i| pref * cinv[(i, i)]),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::inner;

    #[test]
    fn capacitance_matrix_structure() {
        let spec = CircuitSpec::fast_test_point();
        let c = capacitance_matrix(&spec).unwrap();
        let cr = units::capacitance_from_ec(spec.ec_radial_ghz);
        // every row sums to C_r
        for i in 0..NODES {
            let row: f64 = (0..NODES).map(|j| c[(i, j)]).sum();
            assert!((row - cr).abs() < 1e-25, "row sum {row} vs {cr}");
        }
        assert!((cr - 3.873e-15).abs() < 0.01e-15);
        // geometric caps scale everything
        let with_geom = CircuitSpec {
            geometric_cap_fraction: Some(0.1),
            ..spec
        };
        let cg = capacitance_matrix(&with_geom).unwrap();
        for i in 0..NODES {
            for j in 0..NODES {
                assert!((cg[(i, j)] - 1.1 * c[(i, j)]).abs() < 1e-28);
            }
        }
    }

    #[test]
    fn charging_only_hamiltonian_is_diagonal() {
        let mut spec = CircuitSpec::fast_test_point();
        spec.n_max = 2;
        // E_J = 0 is rejected by validate; use tiny values and check the
        // off-diagonal norm scales with them instead.
        spec.ej_radial_ghz = 1e-12;
        spec.ej_azimuthal_ghz = 1e-12;
        spec.ej_diametric_ghz = 1e-12;
        let h = build_circuit_hamiltonian(&spec).unwrap();
        let mut max_offdiag = 0.0f64;
        for (r, c, v) in h.iter_entries() {
            if r != c {
                max_offdiag = max_offdiag.max(v.norm());
            }
        }
        assert!(max_offdiag < 1e-11);
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let mut spec = CircuitSpec::fast_test_point();
        spec.n_max = 2;
        spec.inner_fluxes_phi0 = [0.43, 0.52, 0.48, 0.55];
        spec.outer_flux_phi0 = 0.37;
        spec.gate_charges = [0.1, 0.9, 0.4, 0.6];
        let h = build_circuit_hamiltonian(&spec).unwrap();
        assert!(h.hermiticity_deviation() < 1e-12);
    }

    #[test]
    fn qubit_frequency_at_design_point() {
        let mut spec = CircuitSpec::fast_test_point();
        spec.n_max = 4;
        let states = circuit_spectrum(&spec, 3).unwrap();
        let f01 = states.f01();
        assert!(
            (f01 - 0.818755).abs() < 0.01 * 0.818755,
            "f01 = {f01} GHz"
        );
    }

    #[test]
    fn gate_charge_periodicity() {
        let mut spec = CircuitSpec::fast_test_point();
        spec.n_max = 3;
        let base = circuit_spectrum(&spec, 2).unwrap();
        let mut shifted = spec.clone();
        shifted.gate_charges[2] += 1.0;
        // compensate with one extra charge state so truncation windows match
        shifted.n_max = spec.n_max;
        let moved = circuit_spectrum(&shifted, 2).unwrap();
        // Spectrum shift-invariance holds up to truncation asymmetry; at
        // n_max = 3 the difference is already small.
        assert!((moved.f01() - base.f01()).abs() < 5e-3 * base.f01());
    }

    #[test]
    fn outer_flux_periodicity() {
        let mut spec = CircuitSpec::fast_test_point();
        spec.n_max = 3;
        let base = circuit_spectrum(&spec, 2).unwrap();
        let mut shifted = spec.clone();
        shifted.outer_flux_phi0 += 1.0;
        let moved = circuit_spectrum(&shifted, 2).unwrap();
        assert!((moved.f01() - base.f01()).abs() < 1e-9);
        assert!(
            (moved.spectrum.eigenvalues[0] - base.spectrum.eigenvalues[0]).abs() < 1e-9
        );
    }

    #[test]
    fn optimal_point_matrix_elements_vanish() {
        let mut spec = CircuitSpec::fast_test_point();
        spec.n_max = 4;
        let summary = summarize_point(&spec, 2).unwrap();
        assert!(summary.max_charge_element < 1e-8, "{}", summary.max_charge_element);
        assert!(summary.max_current_element < 1e-8, "{}", summary.max_current_element);
        assert!(summary.protected);
    }

    #[test]
    fn detuned_flux_opens_current_element() {
        let mut spec = CircuitSpec::fast_test_point();
        spec.n_max = 3;
        spec.inner_fluxes_phi0 = [0.45; NODES];
        spec.outer_flux_phi0 = 0.45;
        let states = circuit_spectrum(&spec, 2).unwrap();
        let el = transition_matrix_element(
            &states,
            CircuitOperator::JunctionCurrent(Junction::Azimuthal(0)),
            0,
            1,
        )
        .unwrap();
        assert!(el.norm() / spec.critical_current(Junction::Azimuthal(0)) > 1e-4);
    }

    #[test]
    fn potential_minima_positions() {
        let spec = CircuitSpec::fast_test_point();
        let pi = std::f64::consts::PI;
        let xs: Vec<f64> = (0..801).map(|i| -pi + 2.0 * pi * i as f64 / 800.0).collect();
        let land = potential_landscape(&spec, &xs, &[0.0]).unwrap();
        let global = land.minima[0];
        assert!(
            (global.0.abs() / pi - 0.5545).abs() < 0.02,
            "minimum at x/pi = {}",
            global.0 / pi
        );
        // symmetric partner exists
        assert!(land
            .minima
            .iter()
            .any(|m| (m.0 + global.0).abs() < 1e-6 && (m.2 - global.2).abs() < 1e-9));
        // periodicity in y
        let v0 = potential_value(&spec, 0.7, 0.3);
        let v1 = potential_value(&spec, 0.7, 0.3 + 2.0 * pi);
        assert!((v0 - v1).abs() < 1e-12);
    }

    #[test]
    fn zero_flux_equal_junctions_minimum_at_origin() {
        let mut spec = CircuitSpec::fast_test_point();
        spec.ej_azimuthal_ghz = spec.ej_radial_ghz;
        spec.ej_diametric_ghz = spec.ej_radial_ghz;
        spec.inner_fluxes_phi0 = [0.0; NODES];
        spec.outer_flux_phi0 = 0.0;
        let pi = std::f64::consts::PI;
        let xs: Vec<f64> = (0..401).map(|i| -pi + 2.0 * pi * i as f64 / 400.0).collect();
        let land = potential_landscape(&spec, &xs, &[0.0]).unwrap();
        assert!(land.minima[0].0.abs() < 1e-6, "min at {}", land.minima[0].0);
    }

    #[test]
    fn phase_profiles_localize_where_expected() {
        let mut spec = CircuitSpec::fast_test_point();
        spec.n_max = 4;
        let states = circuit_spectrum(&spec, 2).unwrap();
        let pi = std::f64::consts::PI;
        let xs: Vec<f64> = (0..401).map(|i| -pi + 2.0 * pi * i as f64 / 400.0).collect();
        let p0 = phase_profile(&states, 0, &xs).unwrap();
        let p1 = phase_profile(&states, 1, &xs).unwrap();
        let peak = |p: &[f64]| xs[p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0];
        assert!((peak(&p0).abs() / pi - 0.5545).abs() < 0.1, "p0 peak {}", peak(&p0) / pi);
        assert!(peak(&p1).abs() / pi > 0.9, "p1 peak {}", peak(&p1) / pi);
        // normalization: sum * dx = 1
        let dx = xs[1] - xs[0];
        assert!((p0.iter().sum::<f64>() * dx - 1.0).abs() < 1e-9);
    }

    #[test]
    fn flat_profile_for_charge_delta_state() {
        let mut spec = CircuitSpec::fast_test_point();
        spec.n_max = 2;
        let dim = spec.dimension();
        let d = spec.states_per_node();
        let mut v = vec![Complex64::ZERO; dim];
        v[basis_index([2, 2, 2, 2], d)] = Complex64::ONE; // all nodes n = 0
        let states = CircuitStates {
            spec,
            spectrum: Spectrum {
                eigenvalues: vec![0.0],
                eigenvectors: vec![v],
                residual_norms: vec![0.0],
            },
        };
        let xs: Vec<f64> = (0..100).map(|i| i as f64 * 0.05).collect();
        let p = phase_profile(&states, 0, &xs).unwrap();
        let (min, max) = p
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        assert!((max - min) < 1e-12 * max.max(1.0));
    }

    #[test]
    fn degeneracy_on_equal_azimuthal_diametric_line() {
        // With matching Josephson and charging energies the azimuthal and
        // diametric families are exchange-symmetric and the two lowest
        // states become exactly degenerate.
        let mut spec = CircuitSpec::fast_test_point();
        spec.n_max = 3;
        spec.ej_diametric_ghz = spec.ej_azimuthal_ghz;
        spec.ec_diametric_ghz = spec.ec_azimuthal_ghz;
        let states = circuit_spectrum(&spec, 2).unwrap();
        assert!(states.f01() < 1e-3, "f01 = {}", states.f01());
    }

    #[test]
    fn gate_sweep_leaves_frequency_flat() {
        let mut spec = CircuitSpec::fast_test_point();
        spec.n_max = 3;
        let rows = parameter_sweep(
            &spec,
            &[(CircuitAxis::GateOffset, vec![-0.01, 0.0, 0.01])],
            2,
        )
        .unwrap();
        let f: Vec<f64> = rows
            .iter()
            .map(|r| r.outcome.as_ref().unwrap().f0j_ghz[0])
            .collect();
        let spread = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - f.iter().cloned().fold(f64::INFINITY, f64::min);
        // First-order sweet spot: only the residual quadratic response of
        // roughly -3 GHz per squared Cooper pair remains.
        assert!(spread < 1e-4 * f[0], "spread {spread}");
    }

    #[test]
    fn pair_eigenstates_embed_in_electron_basis() {
        // Per-node electron parity is conserved, so the all-even sector of
        // the electron-resolved Hamiltonian is exactly the Cooper-pair
        // model: a pair eigenvector mapped onto even electron charges must
        // stay an eigenvector with the same energy. (Global grounds need
        // not match — odd sectors can lie lower at the frustrated point.)
        let mut spec = CircuitSpec::fast_test_point();
        spec.n_max = 2;
        spec.gate_charges = [0.1; NODES];
        let pair = circuit_spectrum(&spec, 2).unwrap();
        let mut espec = spec.clone();
        espec.charge_resolution = ChargeResolution::Electron;
        let eh = build_circuit_hamiltonian(&espec).unwrap();
        let dp = spec.states_per_node();
        let de = espec.states_per_node();
        for (vec, &energy) in pair
            .spectrum
            .eigenvectors
            .iter()
            .zip(&pair.spectrum.eigenvalues)
        {
            let mut embedded = vec![Complex64::ZERO; espec.dimension()];
            for (idx, &amp) in vec.iter().enumerate() {
                let even_digits = basis_digits(idx, dp).map(|n| 2 * n);
                embedded[basis_index(even_digits, de)] = amp;
            }
            let out = eh.apply(&embedded);
            let resid: f64 = out
                .iter()
                .zip(&embedded)
                .map(|(o, e)| (o - e * energy).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(resid < 1e-7, "residual {resid:.2e} at energy {energy}");
        }
    }

    #[test]
    fn eigenvectors_orthonormal() {
        let mut spec = CircuitSpec::fast_test_point();
        spec.n_max = 2;
        let states = circuit_spectrum(&spec, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let ov = inner(
                    &states.spectrum.eigenvectors[i],
                    &states.spectrum.eigenvectors[j],
                )
                .norm();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ov - expect).abs() < 1e-8, "({i},{j}) -> {ov}");
            }
        }
    }
}
