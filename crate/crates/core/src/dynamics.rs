//! Pulse-level operation of the ring qubit through a galvanically coupled
//! readout resonator: Purcell-assisted initialization, STIRAP population
//! transfer, dispersive readout parameters and the shared-inductance
//! renormalization of the adjacent junction.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{
    circuit_spectrum, circuit_spectrum_seeded, transition_matrix_element, CircuitOperator,
    CircuitSpec, CircuitStates, Junction,
};
use crate::numerics::Spectrum;
use crate::units;
use crate::{Error, Result};

/// Readout resonator galvanically attached to one azimuthal junction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ResonatorSpec {
    pub inductance_h: f64,
    pub capacitance_f: f64,
    /// Cavity linewidth κ/2π in Hz.
    pub kappa_over_2pi_hz: f64,
    /// Photon-number states kept per qubit level.
    pub fock_cutoff: usize,
    /// Mutual inductance shared with the azimuthal junction, henries.
    pub shared_inductance_h: f64,
}

impl Default for ResonatorSpec {
    fn default() -> Self {
        Self {
            inductance_h: 1.50e-9,
            capacitance_f: 1.48e-12,
            kappa_over_2pi_hz: 0.3e6,
            fock_cutoff: 4,
            shared_inductance_h: 40e-12,
        }
    }
}

impl ResonatorSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("inductance_h", self.inductance_h),
            ("capacitance_f", self.capacitance_f),
            ("kappa_over_2pi_hz", self.kappa_over_2pi_hz),
        ] {
            if !(v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be non-negative, got {v}"),
                });
            }
        }
        if self.fock_cutoff < 2 {
            return Err(Error::InvalidParameter {
                name: "fock_cutoff",
                reason: format!("need at least 2 Fock states, got {}", self.fock_cutoff),
            });
        }
        if !(self.shared_inductance_h >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "shared_inductance_h",
                reason: format!("must be non-negative, got {}", self.shared_inductance_h),
            });
        }
        Ok(())
    }

    /// Resonator angular frequency ω_r = 1/√(LC), rad/s.
    pub fn omega_r_rad_s(&self) -> f64 {
        1.0 / (self.inductance_h * self.capacitance_f).sqrt()
    }

    /// Resonator frequency ω_r/2π in GHz.
    pub fn frequency_ghz(&self) -> f64 {
        self.omega_r_rad_s() / (2.0 * std::f64::consts::PI) * 1e-9
    }

    /// Characteristic impedance Z = √(L/C), ohms.
    pub fn impedance_ohm(&self) -> f64 {
        (self.inductance_h / self.capacitance_f).sqrt()
    }

    /// Zero-point current fluctuation I_ZPF = ω_r √(ħ/2Z), amperes.
    pub fn i_zpf_amp(&self) -> f64 {
        self.omega_r_rad_s() * (units::HBAR / (2.0 * self.impedance_ohm())).sqrt()
    }

    /// Quality factor Q = ω_r/κ.
    pub fn quality_factor(&self) -> f64 {
        self.frequency_ghz() * 1e9 / self.kappa_over_2pi_hz
    }
}

/// Qubit level energies and the current matrix elements of the azimuthal
/// junction adjacent to the shared inductance, at one flux point.
#[derive(Debug, Clone)]
pub struct QubitLevels {
    /// Level frequencies relative to the ground state, GHz.
    pub frequencies_ghz: Vec<f64>,
    /// ⟨i|Î_a|j⟩ in amperes, m×m.
    pub current_elements_amp: DMatrix<Complex64>,
}

/// The resonator couples through the first azimuthal junction.
pub const COUPLING_JUNCTION: Junction = Junction::Azimuthal(0);

/// Extract the lowest `m` levels and their coupling-junction current matrix
/// from solved circuit states.
pub fn qubit_levels(states: &CircuitStates, m: usize) -> Result<QubitLevels> {
    if states.spectrum.eigenvalues.len() < m {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: format!(
                "need {m} solved states, have {}",
                states.spectrum.eigenvalues.len()
            ),
        });
    }
    let e0 = states.spectrum.eigenvalues[0];
    let frequencies_ghz = states.spectrum.eigenvalues[..m]
        .iter()
        .map(|e| e - e0)
        .collect();
    let mut current = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            current[(i, j)] = transition_matrix_element(
                states,
                CircuitOperator::JunctionCurrent(COUPLING_JUNCTION),
                i,
                j,
            )?;
        }
    }
    Ok(QubitLevels {
        frequencies_ghz,
        current_elements_amp: current,
    })
}

/// Coupling strengths g_ij = l·I_ZPF·⟨i|Î_a|j⟩/h in GHz.
pub fn coupling_matrix_ghz(levels: &QubitLevels, resonator: &ResonatorSpec) -> DMatrix<Complex64> {
    let scale =
        resonator.shared_inductance_h * resonator.i_zpf_amp() / units::PLANCK_H * 1e-9;
    levels.current_elements_amp.map(|el| el * scale)
}

/// Lab-frame Hamiltonian of the coupled system on (qubit level ⊗ Fock), E/h
/// in GHz, qubit index most significant:
/// H = Σ f_i|i⟩⟨i| + f_r a†a + (a+a†) Σ_ij g_ij |i⟩⟨j|.
pub fn coupled_hamiltonian(
    levels: &QubitLevels,
    resonator: &ResonatorSpec,
) -> Result<DMatrix<Complex64>> {
    resonator.validate()?;
    let m = levels.frequencies_ghz.len();
    let nf = resonator.fock_cutoff;
    let g = coupling_matrix_ghz(levels, resonator);
    let fr = resonator.frequency_ghz();
    let dim = m * nf;
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..m {
        for n in 0..nf {
            let row = i * nf + n;
            h[(row, row)] += Complex64::new(levels.frequencies_ghz[i] + fr * n as f64, 0.0);
        }
    }
    for i in 0..m {
        for j in 0..m {
            if g[(i, j)].norm() == 0.0 {
                continue;
            }
            for n in 0..nf {
                // a† |n⟩ → √(n+1)|n+1⟩ alongside |i⟩⟨j|.
                if n + 1 < nf {
                    let amp = g[(i, j)] * (n as f64 + 1.0).sqrt();
                    h[(i * nf + n + 1, j * nf + n)] += amp;
                }
                // a |n+1⟩ → √(n+1)|n⟩.
                if n + 1 < nf {
                    let amp = g[(i, j)] * (n as f64 + 1.0).sqrt();
                    h[(i * nf + n, j * nf + n + 1)] += amp;
                }
            }
        }
    }
    Ok(h)
}

// ---------------------------------------------------------------------------
// Open-system propagation
// ---------------------------------------------------------------------------

/// Lindblad right-hand side dρ/dt with H in GHz (the 2π is applied here),
/// time in nanoseconds, and collapse operators with rates in 1/ns.
fn lindblad_rhs(
    h_ghz: &DMatrix<Complex64>,
    collapse: &[(f64, DMatrix<Complex64>)],
    rho: &DMatrix<Complex64>,
) -> DMatrix<Complex64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let commutator = h_ghz * rho - rho * h_ghz;
    let mut d = commutator.map(|c| Complex64::new(0.0, -two_pi) * c);
    for (rate, l) in collapse {
        let lr = l * rho;
        let ldl = l.adjoint() * l;
        d += (&lr * l.adjoint() - (&ldl * rho + rho * &ldl) * Complex64::from(0.5))
            .map(|c| c * *rate);
    }
    d
}

/// One adaptive RK4 pass from `t` to `t_end` with step-doubling error
/// control; `rhs` evaluates the full right-hand side at (t, ρ) and
/// `observe` is called at every accepted step.
fn propagate<F, O>(
    rho: &mut DMatrix<Complex64>,
    t_start: f64,
    t_end: f64,
    tol: f64,
    mut rhs: F,
    mut observe: O,
) where
    F: FnMut(f64, &DMatrix<Complex64>) -> DMatrix<Complex64>,
    O: FnMut(f64, &DMatrix<Complex64>),
{
    let rk4 = |rhs: &mut F, t: f64, y: &DMatrix<Complex64>, dt: f64| {
        let k1 = rhs(t, y);
        let k2 = rhs(t + 0.5 * dt, &(y + &k1 * Complex64::from(0.5 * dt)));
        let k3 = rhs(t + 0.5 * dt, &(y + &k2 * Complex64::from(0.5 * dt)));
        let k4 = rhs(t + dt, &(y + &k3 * Complex64::from(dt)));
        y + (k1 + k2 * Complex64::from(2.0) + k3 * Complex64::from(2.0) + k4)
            * Complex64::from(dt / 6.0)
    };
    let mut t = t_start;
    let mut dt = (t_end - t_start) * 1e-6;
    observe(t, rho);
    while t < t_end {
        if t + dt > t_end {
            dt = t_end - t;
        }
        let full = rk4(&mut rhs, t, rho, dt);
        let half = rk4(&mut rhs, t, rho, 0.5 * dt);
        let two_half = rk4(&mut rhs, t + 0.5 * dt, &half, 0.5 * dt);
        let err = (&full - &two_half).norm() / 15.0;
        if err <= tol || dt <= 1e-9 * (t_end - t_start) {
            t += dt;
            // Richardson-extrapolated fifth-order estimate.
            *rho = &two_half + (&two_half - &full) * Complex64::from(1.0 / 15.0);
            observe(t, rho);
        }
        let grow = if err > 0.0 {
            0.9 * (tol / err).powf(0.2)
        } else {
            2.0
        };
        dt *= grow.clamp(0.2, 2.0);
    }
}

/// Per-step integration tolerance on the density-matrix norm.
const PROPAGATION_TOL: f64 = 1e-9;

/// Maximum tolerated population in the highest Fock state.
const CUTOFF_TOL: f64 = 1e-4;

// ---------------------------------------------------------------------------
// Purcell-assisted initialization
// ---------------------------------------------------------------------------

/// Trapezoidal flux excursion: every loop flux is scaled together from 1 up
/// to `target_scale` times its optimal value, held, and ramped back.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FluxRampSchedule {
    /// Peak flux in units of the optimal-point flux (1.17 matches the
    /// resonator frequency).
    pub target_scale: f64,
    pub ramp_up_us: f64,
    pub hold_us: f64,
    pub ramp_down_us: f64,
    /// Flux-grid points at which the circuit is rediagonalized.
    pub flux_samples: usize,
}

impl Default for FluxRampSchedule {
    fn default() -> Self {
        Self {
            target_scale: 1.17,
            ramp_up_us: 10.0,
            hold_us: 5.0,
            ramp_down_us: 10.0,
            flux_samples: 25,
        }
    }
}

impl FluxRampSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.ramp_up_us > 0.0 && self.hold_us >= 0.0 && self.ramp_down_us > 0.0) {
            return Err(Error::InvalidParameter {
                name: "flux_ramp_times",
                reason: "segment durations must be positive".into(),
            });
        }
        if self.flux_samples < 2 {
            return Err(Error::InvalidParameter {
                name: "flux_samples",
                reason: "need at least two flux samples".into(),
            });
        }
        Ok(())
    }

    pub fn total_us(&self) -> f64 {
        self.ramp_up_us + self.hold_us + self.ramp_down_us
    }

    /// Flux scale at time `t_us`.
    pub fn scale_at(&self, t_us: f64) -> f64 {
        let span = self.target_scale - 1.0;
        if t_us <= 0.0 {
            1.0
        } else if t_us < self.ramp_up_us {
            1.0 + span * t_us / self.ramp_up_us
        } else if t_us < self.ramp_up_us + self.hold_us {
            self.target_scale
        } else if t_us < self.total_us() {
            self.target_scale - span * (t_us - self.ramp_up_us - self.hold_us) / self.ramp_down_us
        } else {
            1.0
        }
    }
}

/// Ground-state probability of a two-level system in thermal equilibrium,
/// p₀ = 1/(1+e^(−hf/kT)).
pub fn thermal_ground_occupation(f01_ghz: f64, temperature_k: f64) -> f64 {
    let x = f01_ghz / units::thermal_freq_ghz(temperature_k);
    1.0 / (1.0 + (-x).exp())
}

/// Outcome of the initialization simulation.
#[derive(Debug, Clone, Serialize)]
pub struct InitializationResult {
    /// Thermal ground-state occupation before the pulse.
    pub thermal_p0: f64,
    pub final_fidelity: f64,
    /// (t_us, ground-state fidelity) samples.
    pub trajectory: Vec<(f64, f64)>,
}

/// f01 and |g₀₁| tabulated on a uniform flux-scale grid between 1 and the
/// schedule target, solved sequentially with warm starts.
struct CouplingTable {
    scales: Vec<f64>,
    f01_ghz: Vec<f64>,
    g01_ghz: Vec<f64>,
}

impl CouplingTable {
    fn build(
        base: &CircuitSpec,
        resonator: &ResonatorSpec,
        schedule: &FluxRampSchedule,
    ) -> Result<Self> {
        let n = schedule.flux_samples;
        let mut scales = Vec::with_capacity(n);
        let mut f01 = Vec::with_capacity(n);
        let mut g01 = Vec::with_capacity(n);
        let mut warm: Option<Spectrum> = None;
        for k in 0..n {
            let s = 1.0 + (schedule.target_scale - 1.0) * k as f64 / (n - 1) as f64;
            let spec = scaled_flux_spec(base, s);
            let states = circuit_spectrum_seeded(&spec, 2, warm.as_ref())?;
            let levels = qubit_levels(&states, 2)?;
            let g = coupling_matrix_ghz(&levels, resonator);
            scales.push(s);
            f01.push(states.f01());
            g01.push(g[(0, 1)].norm());
            warm = Some(states.spectrum);
        }
        Ok(Self {
            scales,
            f01_ghz: f01,
            g01_ghz: g01,
        })
    }

    fn lookup(&self, scale: f64) -> (f64, f64) {
        let lo = self.scales[0];
        let hi = *self.scales.last().unwrap();
        let x = scale.clamp(lo, hi);
        let step = (hi - lo) / (self.scales.len() - 1) as f64;
        let k = (((x - lo) / step) as usize).min(self.scales.len() - 2);
        let w = (x - self.scales[k]) / step;
        (
            self.f01_ghz[k] * (1.0 - w) + self.f01_ghz[k + 1] * w,
            self.g01_ghz[k] * (1.0 - w) + self.g01_ghz[k + 1] * w,
        )
    }
}

fn scaled_flux_spec(base: &CircuitSpec, scale: f64) -> CircuitSpec {
    let mut spec = base.clone();
    for f in spec.inner_fluxes_phi0.iter_mut() {
        *f *= scale;
    }
    spec.outer_flux_phi0 *= scale;
    spec
}

/// Simulate Purcell-assisted initialization: the qubit (two levels, thermal
/// at `temperature_k`) is flux-tuned into resonance with the decaying
/// cavity, held there, and tuned back. Works in the frame rotating at the
/// resonator frequency with the Jaynes–Cummings coupling.
pub fn purcell_initialization(
    base: &CircuitSpec,
    resonator: &ResonatorSpec,
    schedule: &FluxRampSchedule,
    temperature_k: f64,
) -> Result<InitializationResult> {
    resonator.validate()?;
    schedule.validate()?;
    if !(temperature_k > 0.0) {
        return Err(Error::InvalidParameter {
            name: "temperature_k",
            reason: format!("must be positive, got {temperature_k}"),
        });
    }
    let table = CouplingTable::build(base, resonator, schedule)?;
    let fr = resonator.frequency_ghz();
    let nf = resonator.fock_cutoff;
    let dim = 2 * nf;

    // Basis: qubit level major, Fock minor.
    let mut a_op: DMatrix<Complex64> = DMatrix::zeros(dim, dim);
    for q in 0..2 {
        for n in 1..nf {
            a_op[(q * nf + n - 1, q * nf + n)] = Complex64::from((n as f64).sqrt());
        }
    }
    // Jaynes–Cummings exchange a σ⁺ + a† σ⁻, with a σ⁺ = Σ √n |1,n-1⟩⟨0,n|.
    let exchange = {
        let mut ex: DMatrix<Complex64> = DMatrix::zeros(dim, dim);
        for n in 1..nf {
            ex[(nf + n - 1, n)] = Complex64::from((n as f64).sqrt());
        }
        &ex + ex.adjoint()
    };
    let mut number_q: DMatrix<Complex64> = DMatrix::zeros(dim, dim);
    for n in 0..nf {
        number_q[(nf + n, nf + n)] = Complex64::from(1.0);
    }

    let f01_opt = table.f01_ghz[0];
    let p0 = thermal_ground_occupation(f01_opt, temperature_k);
    let mut rho: DMatrix<Complex64> = DMatrix::zeros(dim, dim);
    rho[(0, 0)] = Complex64::from(p0);
    rho[(nf, nf)] = Complex64::from(1.0 - p0);

    // κ in 1/ns: κ = 2π · (κ/2π).
    let kappa_per_ns = 2.0 * std::f64::consts::PI * resonator.kappa_over_2pi_hz * 1e-9;
    let collapse = vec![(kappa_per_ns, a_op)];
    let total_ns = schedule.total_us() * 1e3;
    let mut trajectory = Vec::new();
    let mut max_top_fock: f64 = 0.0;
    let fidelity_of = |rho: &DMatrix<Complex64>| -> f64 {
        (0..nf).map(|n| rho[(n, n)].re).sum()
    };
    propagate(
        &mut rho,
        0.0,
        total_ns,
        PROPAGATION_TOL,
        |t_ns, rho| {
            let (f01, g) = table.lookup(schedule.scale_at(t_ns / 1e3));
            let mut h = number_q.map(|c| c * Complex64::from(f01 - fr));
            h += exchange.map(|c| c * Complex64::from(g));
            lindblad_rhs(&h, &collapse, rho)
        },
        |t_ns, rho| {
            let top: f64 = (0..2).map(|q| rho[(q * nf + nf - 1, q * nf + nf - 1)].re).sum();
            max_top_fock = max_top_fock.max(top);
            trajectory.push((t_ns / 1e3, fidelity_of(rho)));
        },
    );
    if max_top_fock > CUTOFF_TOL {
        return Err(Error::CutoffViolation {
            population: max_top_fock,
        });
    }
    let final_fidelity = fidelity_of(&rho);
    // Keep the stored trajectory a manageable size.
    let stride = (trajectory.len() / 2048).max(1);
    let mut kept: Vec<(f64, f64)> = trajectory.iter().copied().step_by(stride).collect();
    if kept.last() != trajectory.last() {
        kept.push(*trajectory.last().unwrap());
    }
    Ok(InitializationResult {
        thermal_p0: p0,
        final_fidelity,
        trajectory: kept,
    })
}

// ---------------------------------------------------------------------------
// STIRAP transfer
// ---------------------------------------------------------------------------

/// Counter-intuitively ordered Gaussian pulse pair driving a Λ system.
///
/// The Stokes envelope (|1⟩↔intermediate) is centered `delay_ns` before the
/// sequence midpoint and the pump envelope (|0⟩↔intermediate) `delay_ns`
/// after it, giving a center-to-center separation of 2·delay_ns — at the
/// default σ = 20 ns, delay 15 ns this is 1.5σ, the optimal-adiabaticity
/// separation for Gaussian pulses.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StirapSchedule {
    pub sigma_ns: f64,
    /// Offset of each envelope from the sequence midpoint.
    pub delay_ns: f64,
    /// Peak Rabi frequency Ω/2π of the pump, MHz.
    pub pump_peak_mhz: f64,
    /// Peak Rabi frequency Ω/2π of the Stokes pulse, MHz.
    pub stokes_peak_mhz: f64,
    /// Index of the intermediate state of the Λ system.
    pub intermediate_level: usize,
    /// Number of σ kept before the first and after the last pulse center.
    pub tail_sigmas: f64,
}

impl Default for StirapSchedule {
    fn default() -> Self {
        Self {
            sigma_ns: 20.0,
            delay_ns: 15.0,
            pump_peak_mhz: 250.0,
            stokes_peak_mhz: 250.0,
            intermediate_level: 3,
            tail_sigmas: 5.0,
        }
    }
}

impl StirapSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_ns > 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma_ns",
                reason: format!("must be positive, got {}", self.sigma_ns),
            });
        }
        if !(self.delay_ns >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "delay_ns",
                reason: "the Stokes pulse must not follow the pump".into(),
            });
        }
        if !(self.pump_peak_mhz >= 0.0 && self.stokes_peak_mhz >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "peak_rabi",
                reason: "peak Rabi frequencies must be non-negative".into(),
            });
        }
        if self.intermediate_level < 2 {
            return Err(Error::InvalidParameter {
                name: "intermediate_level",
                reason: "the intermediate state must lie above the qubit pair".into(),
            });
        }
        Ok(())
    }

    pub fn total_ns(&self) -> f64 {
        2.0 * (self.tail_sigmas * self.sigma_ns + self.delay_ns)
    }

    /// (Ω_pump, Ω_Stokes)/2π at `t_ns`, GHz.
    fn envelopes_ghz(&self, t_ns: f64) -> (f64, f64) {
        let mid = self.total_ns() / 2.0;
        let gauss = |center: f64, peak_mhz: f64| {
            peak_mhz * 1e-3 * (-(t_ns - center).powi(2) / (2.0 * self.sigma_ns.powi(2))).exp()
        };
        (
            gauss(mid + self.delay_ns, self.pump_peak_mhz),
            gauss(mid - self.delay_ns, self.stokes_peak_mhz),
        )
    }
}

/// Population traces of a STIRAP run.
#[derive(Debug, Clone, Serialize)]
pub struct StirapResult {
    /// Final population of |1⟩.
    pub efficiency: f64,
    /// (t_ns, populations of every level) samples.
    pub trajectory: Vec<(f64, Vec<f64>)>,
    /// Set when the final efficiency falls below 0.99 (non-adiabatic
    /// schedule).
    pub non_adiabatic: bool,
}

/// Number of qubit levels carried through the STIRAP simulation.
pub const STIRAP_LEVELS: usize = 5;

/// Rotating-frame STIRAP transfer |0⟩ → |1⟩ through the intermediate level.
///
/// Both drives are resonant with their transitions, so in the rotating
/// frame after the rotating-wave approximation the Λ subsystem couples as
/// Ω_p/2 (|0⟩⟨k| + h.c.) + Ω_s/2 (|1⟩⟨k| + h.c.) while the remaining levels
/// idle. `gamma1_hz` relaxes |1⟩ → |0⟩ and `gamma_intermediate_hz` relaxes
/// the intermediate state.
pub fn stirap_transfer(
    schedule: &StirapSchedule,
    gamma1_hz: f64,
    gamma_intermediate_hz: f64,
) -> Result<StirapResult> {
    schedule.validate()?;
    let k = schedule.intermediate_level;
    if k >= STIRAP_LEVELS {
        return Err(Error::InvalidParameter {
            name: "intermediate_level",
            reason: format!("must be below {STIRAP_LEVELS}, got {k}"),
        });
    }
    let m = STIRAP_LEVELS;
    let mut pump_op: DMatrix<Complex64> = DMatrix::zeros(m, m);
    pump_op[(0, k)] = Complex64::from(1.0);
    let pump_op = &pump_op + pump_op.adjoint();
    let mut stokes_op: DMatrix<Complex64> = DMatrix::zeros(m, m);
    stokes_op[(1, k)] = Complex64::from(1.0);
    let stokes_op = &stokes_op + stokes_op.adjoint();

    let mut decay_1: DMatrix<Complex64> = DMatrix::zeros(m, m);
    decay_1[(0, 1)] = Complex64::from(1.0);
    let mut decay_k: DMatrix<Complex64> = DMatrix::zeros(m, m);
    decay_k[(0, k)] = Complex64::from(1.0);
    let collapse = vec![
        (gamma1_hz * 1e-9, decay_1),
        (gamma_intermediate_hz * 1e-9, decay_k),
    ];

    let mut rho: DMatrix<Complex64> = DMatrix::zeros(m, m);
    rho[(0, 0)] = Complex64::from(1.0);
    let mut trajectory = Vec::new();
    propagate(
        &mut rho,
        0.0,
        schedule.total_ns(),
        PROPAGATION_TOL,
        |t_ns, rho| {
            let (op, os) = schedule.envelopes_ghz(t_ns);
            let h = pump_op.map(|c| c * Complex64::from(0.5 * op))
                + stokes_op.map(|c| c * Complex64::from(0.5 * os));
            lindblad_rhs(&h, &collapse, rho)
        },
        |t_ns, rho| {
            trajectory.push((t_ns, (0..m).map(|i| rho[(i, i)].re).collect()));
        },
    );
    let efficiency = rho[(1, 1)].re;
    let stride = (trajectory.len() / 2048).max(1);
    let mut kept: Vec<(f64, Vec<f64>)> = trajectory
        .iter()
        .step_by(stride)
        .cloned()
        .collect();
    if kept.last().map(|(t, _)| *t) != trajectory.last().map(|(t, _)| *t) {
        kept.push(trajectory.last().unwrap().clone());
    }
    Ok(StirapResult {
        efficiency,
        trajectory: kept,
        non_adiabatic: efficiency < 0.99,
    })
}

// ---------------------------------------------------------------------------
// Dispersive readout
// ---------------------------------------------------------------------------

/// Dispersive-readout parameters of the coupled system.
#[derive(Debug, Clone, Serialize)]
pub struct DispersiveReport {
    /// Per-level dispersive shifts χ_i in Hz.
    pub chi_i_hz: Vec<f64>,
    /// Per-level Lamb shifts Λ_i in Hz.
    pub lamb_i_hz: Vec<f64>,
    /// Qubit dispersive shift χ = (χ₁−χ₀)/2, Hz.
    pub chi_hz: f64,
    /// Level pairs that violate |Δ_ij| ≥ 10·|g_ij|·√(1+n̄).
    pub near_resonant_pairs: Vec<(usize, usize)>,
}

/// Perturbative dispersive shifts
/// χ_i = Σ_j (|g_ij|²/Δ_ij − |g_ji|²/Δ_ji) and Λ_i = Σ_j |g_ij|²/Δ_ij with
/// Δ_ij = f_i − f_j − f_r, flagging pairs outside the dispersive regime at
/// mean photon number `n_bar`.
pub fn dispersive_parameters(
    levels: &QubitLevels,
    resonator: &ResonatorSpec,
    n_bar: f64,
) -> Result<DispersiveReport> {
    resonator.validate()?;
    let m = levels.frequencies_ghz.len();
    let g = coupling_matrix_ghz(levels, resonator);
    let fr = resonator.frequency_ghz();
    let delta = |i: usize, j: usize| levels.frequencies_ghz[i] - levels.frequencies_ghz[j] - fr;
    let mut chi = vec![0.0; m];
    let mut lamb = vec![0.0; m];
    let mut flagged = Vec::new();
    for i in 0..m {
        for j in 0..m {
            let gij = g[(i, j)].norm_sqr();
            if gij > 0.0 {
                let d_ij = delta(i, j);
                let d_ji = delta(j, i);
                chi[i] += gij / d_ij - gij / d_ji;
                lamb[i] += gij / d_ij;
                if i < j && d_ij.abs() < 10.0 * g[(i, j)].norm() * (1.0 + n_bar).sqrt() {
                    flagged.push((i, j));
                }
            }
        }
    }
    Ok(DispersiveReport {
        chi_i_hz: chi.iter().map(|c| c * 1e9).collect(),
        lamb_i_hz: lamb.iter().map(|c| c * 1e9).collect(),
        chi_hz: (chi[1] - chi[0]) / 2.0 * 1e9,
        near_resonant_pairs: flagged,
    })
}

// ---------------------------------------------------------------------------
// Shared-inductance renormalization
// ---------------------------------------------------------------------------

/// Effect of the shared inductance on the adjacent azimuthal junction.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InductanceRenormalization {
    /// η = l/L_Ja.
    pub eta: f64,
    pub adjusted_ej_ghz: f64,
    /// Reduction of the Josephson energy, GHz.
    pub delta_ej_ghz: f64,
    /// Reduction of the critical current, amperes.
    pub delta_ic_amp: f64,
}

/// The series inductance adds to the Josephson inductance,
/// L_Ja → L_Ja(1+η), equivalent to E_Ja → E_Ja/(1+η).
pub fn renormalize_shared_inductance(
    shared_inductance_h: f64,
    ej_ghz: f64,
) -> Result<InductanceRenormalization> {
    if !(shared_inductance_h >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "shared_inductance_h",
            reason: format!("must be non-negative, got {shared_inductance_h}"),
        });
    }
    if !(ej_ghz > 0.0) {
        return Err(Error::InvalidParameter {
            name: "ej_ghz",
            reason: format!("must be positive, got {ej_ghz}"),
        });
    }
    let l_j = units::josephson_inductance_from_ej(ej_ghz);
    let eta = shared_inductance_h / l_j;
    let adjusted = ej_ghz / (1.0 + eta);
    let delta_ej = ej_ghz - adjusted;
    let delta_ic = units::critical_current_from_ej(delta_ej);
    Ok(InductanceRenormalization {
        eta,
        adjusted_ej_ghz: adjusted,
        delta_ej_ghz: delta_ej,
        delta_ic_amp: delta_ic,
    })
}

/// Convenience wrapper solving the circuit at its base flux point and
/// reporting the dispersive parameters for `m` levels.
pub fn dispersive_at(
    spec: &CircuitSpec,
    resonator: &ResonatorSpec,
    m: usize,
    n_bar: f64,
) -> Result<DispersiveReport> {
    let states = circuit_spectrum(spec, m)?;
    let levels = qubit_levels(&states, m)?;
    dispersive_parameters(&levels, resonator, n_bar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn resonator_derived_quantities_match_design() {
        let r = ResonatorSpec::default();
        assert_relative_eq!(r.frequency_ghz(), 3.38, max_relative = 5e-3);
        assert_relative_eq!(r.impedance_ohm(), 31.8, max_relative = 2e-2);
        assert_relative_eq!(r.quality_factor(), 11300.0, max_relative = 5e-3);
    }

    #[test]
    fn thermal_occupation_at_design_point() {
        let p0 = thermal_ground_occupation(0.818755, 0.025);
        assert_relative_eq!(p0, 0.828, max_relative = 1e-3);
    }

    #[test]
    fn inductance_renormalization_matches_quoted_shift() {
        let r = renormalize_shared_inductance(40e-12, 5.0).unwrap();
        assert!((r.delta_ej_ghz * 1e3 - 6.0).abs() < 1.0, "{}", r.delta_ej_ghz);
        assert!(
            (r.delta_ic_amp * 1e9 - 0.01).abs() < 0.005,
            "{}",
            r.delta_ic_amp
        );
        let zero = renormalize_shared_inductance(0.0, 5.0).unwrap();
        assert_eq!(zero.adjusted_ej_ghz, 5.0);
    }

    #[test]
    fn zero_coupling_gives_zero_dispersive_shifts() {
        let levels = QubitLevels {
            frequencies_ghz: vec![0.0, 0.8, 2.0],
            current_elements_amp: DMatrix::zeros(3, 3),
        };
        let report = dispersive_parameters(&levels, &ResonatorSpec::default(), 0.0).unwrap();
        assert!(report.chi_i_hz.iter().all(|c| *c == 0.0));
        assert_eq!(report.chi_hz, 0.0);
    }

    #[test]
    fn stirap_paper_schedule_reaches_high_efficiency() {
        let result = stirap_transfer(&StirapSchedule::default(), 20.0, 20.0).unwrap();
        assert!(result.efficiency >= 0.999, "{}", result.efficiency);
        assert!(!result.non_adiabatic);
    }

    #[test]
    fn stirap_zero_drive_transfers_nothing() {
        let schedule = StirapSchedule {
            pump_peak_mhz: 0.0,
            stokes_peak_mhz: 0.0,
            ..StirapSchedule::default()
        };
        let result = stirap_transfer(&schedule, 20.0, 20.0).unwrap();
        assert!(result.efficiency < 1e-9);
        let (_, pops) = result.trajectory.last().unwrap();
        assert_relative_eq!(pops[0], 1.0, max_relative = 1e-9);
    }

    #[test]
    fn stirap_tolerates_intermediate_state_decay() {
        let base = stirap_transfer(&StirapSchedule::default(), 20.0, 20.0)
            .unwrap()
            .efficiency;
        let hot = stirap_transfer(&StirapSchedule::default(), 20.0, 2000.0)
            .unwrap()
            .efficiency;
        assert!(base - hot < 0.01, "base {base}, hot {hot}");
    }

    #[test]
    fn stirap_efficiency_monotone_in_pulse_area() {
        let mut last = 0.0;
        for factor in [0.5, 0.5f64.sqrt(), 1.0, 2.0f64.sqrt(), 2.0] {
            let schedule = StirapSchedule {
                pump_peak_mhz: 250.0 * factor,
                stokes_peak_mhz: 250.0 * factor,
                ..StirapSchedule::default()
            };
            let eff = stirap_transfer(&schedule, 20.0, 20.0).unwrap().efficiency;
            assert!(eff >= last, "efficiency dropped: {last} -> {eff} at {factor}");
            last = eff;
        }
    }

    #[test]
    fn propagation_preserves_trace_and_energy_in_the_unitary_limit() {
        // Static two-level Hamiltonian, no dissipation.
        let h = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(0.3, 0.1),
                Complex64::new(0.3, -0.1),
                Complex64::new(1.0, 0.0),
            ],
        );
        let mut rho: DMatrix<Complex64> = DMatrix::zeros(2, 2);
        rho[(0, 0)] = Complex64::from(0.7);
        rho[(1, 1)] = Complex64::from(0.3);
        rho[(0, 1)] = Complex64::from(0.2);
        rho[(1, 0)] = Complex64::from(0.2);
        let energy = |rho: &DMatrix<Complex64>| (&h * rho).trace().re;
        let e0 = energy(&rho);
        propagate(
            &mut rho,
            0.0,
            50.0,
            PROPAGATION_TOL,
            |_, r| lindblad_rhs(&h, &[], r),
            |_, _| {},
        );
        assert!((rho.trace().re - 1.0).abs() < 1e-8);
        assert!(rho.trace().im.abs() < 1e-10);
        assert!((energy(&rho) - e0).abs() < 1e-6 * e0.abs().max(1.0));
    }

    #[test]
    fn flux_ramp_schedule_shape() {
        let s = FluxRampSchedule::default();
        assert_eq!(s.scale_at(0.0), 1.0);
        assert_relative_eq!(s.scale_at(5.0), 1.085, max_relative = 1e-12);
        assert_eq!(s.scale_at(12.0), 1.17);
        assert_eq!(s.scale_at(25.0), 1.0);
    }
}
