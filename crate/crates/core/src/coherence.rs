//! Decoherence budget of the ring qubit: dielectric loss, quasiparticle
//! tunneling with gap engineering, and 1/f-noise pure dephasing.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::circuit::{
    capacitance_matrix, circuit_spectrum, circuit_spectrum_seeded, junction_capacitance,
    transition_matrix_element, ChargeResolution, CircuitOperator, CircuitSpec, CircuitStates,
    Junction, DIAMETRIC_JUNCTIONS, NODES,
};
use crate::numerics::{inner, RandomStream};
use crate::units;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Dielectric loss
// ---------------------------------------------------------------------------

/// Capacitor family grouped under one loss tangent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Intrinsic junction (tunnel-barrier) capacitors.
    JunctionIntrinsic,
    /// Geometric shunt capacitors in parallel with the junctions.
    Geometric,
}

/// One dielectric-loss channel: a loss tangent shared by a set of branch
/// capacitors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossChannel {
    pub kind: LossKind,
    pub tan_delta: f64,
    pub members: Vec<Junction>,
}

impl LossChannel {
    /// Intrinsic junction dielectric, tan δ = 1e-7, all ten junctions.
    pub fn junction_intrinsic_default() -> Self {
        Self {
            kind: LossKind::JunctionIntrinsic,
            tan_delta: 1e-7,
            members: CircuitSpec::junctions().collect(),
        }
    }

    /// Geometric shunt dielectric, tan δ = 1e-6, all ten branches.
    pub fn geometric_default() -> Self {
        Self {
            kind: LossKind::Geometric,
            tan_delta: 1e-6,
            members: CircuitSpec::junctions().collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tan_delta >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "tan_delta",
                reason: format!("must be non-negative, got {}", self.tan_delta),
            });
        }
        Ok(())
    }
}

/// Loss rate of one channel in Hz.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelRate {
    pub kind: LossKind,
    pub rate_hz: f64,
}

/// Signed node weights of a branch voltage V_b = Σ_i w_i V_i (the grounded
/// center carries zero potential).
fn branch_weights(junction: Junction) -> [f64; NODES] {
    let mut w = [0.0; NODES];
    match junction {
        Junction::Radial(i) => w[i] = 1.0,
        Junction::Azimuthal(i) => {
            w[(i + 1) % NODES] = 1.0;
            w[i] = -1.0;
        }
        Junction::Diametric(i) => {
            w[(i + 2) % NODES] = 1.0;
            w[i] = -1.0;
        }
    }
    w
}

/// Transition matrix elements of the node charge operators in coulombs,
/// q_i = ⟨1| Q̂_i |0⟩ with Q̂ = 2e (N̂ - Ng).
fn charge_elements(states: &CircuitStates) -> Result<[Complex64; NODES]> {
    let mut q = [Complex64::ZERO; NODES];
    for (node, slot) in q.iter_mut().enumerate() {
        let el = transition_matrix_element(states, CircuitOperator::NodeCharge(node), 0, 1)?;
        *slot = 2.0 * units::ELEMENTARY_CHARGE * el;
    }
    Ok(q)
}

/// Relaxation rate of each dielectric channel,
/// Γ_c = (2/ħ) tan δ_c Σ_{b ∈ c} C_b |⟨1|V̂_b|0⟩|² with V̂ = C⁻¹ Q̂.
pub fn dielectric_loss_rates(
    spec: &CircuitSpec,
    states: &CircuitStates,
    channels: &[LossChannel],
) -> Result<Vec<ChannelRate>> {
    let cmat = capacitance_matrix(spec)?;
    let cinv = cmat.try_inverse().ok_or(Error::SingularCapacitance {
        condition: f64::INFINITY,
    })?;
    let q = charge_elements(states)?;
    // Node voltage matrix elements v_i = Σ_j C⁻¹_ij q_j, volts.
    let v: Vec<Complex64> = (0..NODES)
        .map(|i| (0..NODES).map(|j| cinv[(i, j)] * q[j]).sum())
        .collect();
    channels
        .iter()
        .map(|channel| {
            channel.validate()?;
            let geom_scale = match channel.kind {
                LossKind::JunctionIntrinsic => 1.0,
                LossKind::Geometric => spec.geometric_cap_fraction.unwrap_or(0.0),
            };
            let mut rate = 0.0;
            for &junction in &channel.members {
                let cb = geom_scale * junction_capacitance(spec, junction);
                let w = branch_weights(junction);
                let vb: Complex64 = (0..NODES)
                    .map(|i| Complex64::new(w[i], 0.0) * v[i])
                    .sum();
                rate += cb * vb.norm_sqr();
            }
            Ok(ChannelRate {
                kind: channel.kind,
                rate_hz: 2.0 / units::HBAR * channel.tan_delta * rate,
            })
        })
        .collect()
}

/// Uniform-loss-tangent trace formula,
/// Γ = (2/ħ) tan δ · q† C⁻¹ q, algebraically equal to the channel sum when
/// every branch shares one tan δ and the geometric shunts are absent.
pub fn dielectric_loss_trace(
    spec: &CircuitSpec,
    states: &CircuitStates,
    tan_delta: f64,
) -> Result<f64> {
    let cmat = capacitance_matrix(spec)?;
    let cinv = cmat.try_inverse().ok_or(Error::SingularCapacitance {
        condition: f64::INFINITY,
    })?;
    let q = charge_elements(states)?;
    let mut total = Complex64::ZERO;
    for i in 0..NODES {
        for j in 0..NODES {
            total += q[i].conj() * cinv[(i, j)] * q[j];
        }
    }
    Ok(2.0 / units::HBAR * tan_delta * total.re)
}

// ---------------------------------------------------------------------------
// Quasiparticle tunneling
// ---------------------------------------------------------------------------

/// Superconducting gap Δ/h in GHz of a film of the given thickness,
/// 43.5 + 145 / d_nm.
pub fn superconducting_gap(thickness_nm: f64) -> Result<f64> {
    if !(thickness_nm > 0.0) {
        return Err(Error::InvalidParameter {
            name: "thickness_nm",
            reason: format!("must be positive, got {thickness_nm}"),
        });
    }
    Ok(43.5 + 145.0 / thickness_nm)
}

/// Structure-factor model: occupation-weighted spectral weights (S₊, S₋)
/// multiplying the sin²(φ/2) and cos²(φ/2) matrix elements.
pub trait StructureFactorModel: Sync {
    /// `f_ij_ghz` is the energy the qubit hands to the quasiparticle
    /// (negative when the quasiparticle must supply energy).
    fn factors(&self, f_ij_ghz: f64, delta_gap_ghz: f64, temperature_k: f64, x_qp: f64)
        -> (f64, f64);
}

/// Default model: thermally occupied quasiparticles on gap-asymmetric
/// electrodes. A quasiparticle on the low-gap side must be activated over
/// δΔ minus the energy received; one on the high-gap side is exponentially
/// rare (Boltzmann factor in δΔ) and additionally activated when it must
/// supply more than δΔ. The two constant prefactors calibrate the overall
/// spectral weights of the sin and cos channels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapAsymmetricThermal {
    pub sin_weight: f64,
    pub cos_weight: f64,
}

impl Default for GapAsymmetricThermal {
    fn default() -> Self {
        Self {
            sin_weight: 0.6617225,
            cos_weight: 0.00327918,
        }
    }
}

impl StructureFactorModel for GapAsymmetricThermal {
    fn factors(
        &self,
        f_ij_ghz: f64,
        delta_gap_ghz: f64,
        temperature_k: f64,
        _x_qp: f64,
    ) -> (f64, f64) {
        let kt = units::thermal_freq_ghz(temperature_k);
        let low_side = (-(delta_gap_ghz - f_ij_ghz).max(0.0) / kt).exp();
        let high_side =
            (-delta_gap_ghz / kt).exp() * (-(-delta_gap_ghz - f_ij_ghz).max(0.0) / kt).exp();
        let thermal = low_side + high_side;
        (self.sin_weight * thermal, self.cos_weight * thermal)
    }
}

/// Quasiparticle environment around the device.
pub struct QuasiparticleEnv<'a> {
    /// Quasiparticle density per electrode side (fraction of Cooper pairs).
    pub x_qp: f64,
    pub temperature_k: f64,
    /// Mean gap Δ̄/h in GHz (kept fixed while the asymmetry varies).
    pub mean_gap_ghz: f64,
    /// Gap asymmetry δΔ/h between the two electrode films, GHz.
    pub delta_gap_ghz: f64,
    pub model: &'a dyn StructureFactorModel,
}

impl QuasiparticleEnv<'_> {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_qp >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "x_qp",
                reason: format!("must be non-negative, got {}", self.x_qp),
            });
        }
        if !(self.mean_gap_ghz > 0.5 * self.delta_gap_ghz.abs()) {
            return Err(Error::InvalidParameter {
                name: "mean_gap_ghz",
                reason: format!(
                    "mean gap {} GHz must exceed half the asymmetry {} GHz",
                    self.mean_gap_ghz, self.delta_gap_ghz
                ),
            });
        }
        Ok(())
    }
}

/// Default environment with the stated density, temperature and mean gap.
pub const DEFAULT_X_QP: f64 = 5e-9;
pub const DEFAULT_DEVICE_TEMPERATURE_K: f64 = 0.025;
pub const DEFAULT_MEAN_GAP_GHZ: f64 = 50.0;

/// Parity-switch rates between the two qubit states, Hz.
#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub gamma_00_hz: f64,
    pub gamma_01_hz: f64,
    pub gamma_10_hz: f64,
    pub gamma_11_hz: f64,
    /// Γ_tot = (Γ00 + Γ01 + Γ10 + Γ11) / 2.
    pub gamma_total_hz: f64,
    pub delta_gap_ghz: f64,
}

/// Two lowest eigenpairs of the ring at the given gate configuration, in the
/// Cooper-pair labeled sector basis.
fn sector_states(base: &CircuitSpec, gates: [f64; NODES]) -> Result<CircuitStates> {
    let spec = CircuitSpec {
        gate_charges: gates,
        charge_resolution: ChargeResolution::CooperPair,
        ..base.clone()
    };
    circuit_spectrum(&spec, 2)
}

/// Overlap ⟨final_j | shift | initial_i⟩ where `shift` moves the Cooper-pair
/// labels by `amount` on each node (out-of-range labels truncate to zero).
fn shifted_overlap(
    final_state: &[Complex64],
    initial_state: &[Complex64],
    amount: [i64; NODES],
    states_per_node: usize,
) -> Complex64 {
    let d = states_per_node;
    let dim = initial_state.len();
    let mut acc = Complex64::ZERO;
    'outer: for idx in 0..dim {
        let a = initial_state[idx];
        if a == Complex64::ZERO {
            continue;
        }
        // decode digits, node 0 most significant
        let mut rem = idx;
        let mut digits = [0i64; NODES];
        for k in (0..NODES).rev() {
            digits[k] = (rem % d) as i64;
            rem /= d;
        }
        let mut to = 0usize;
        for k in 0..NODES {
            let m = digits[k] + amount[k];
            if m < 0 || m >= d as i64 {
                continue 'outer;
            }
            to = to * d + m as usize;
        }
        acc += final_state[to].conj() * a;
    }
    acc
}

/// Parity-switch tunneling rates summed over all junctions and both qubit
/// states.
///
/// For each junction the single-electron transfer operators cos(φ̂/2) and
/// sin(φ̂/2) connect the electron-parity sector of the initial gate
/// configuration to the sector with one electron moved across the junction.
/// Each sector is an ordinary Cooper-pair charge basis whose gate charges
/// differ by half a pair on the junction's nodes, so both ends of the matrix
/// element are solved in that labeling; the transferred-pair component of
/// the operator appears as a one-pair label shift.
pub fn qp_tunneling_rates(spec: &CircuitSpec, env: &QuasiparticleEnv) -> Result<RateReport> {
    env.validate()?;
    if spec.charge_resolution != ChargeResolution::Electron {
        return Err(Error::InvalidParameter {
            name: "charge_resolution",
            reason: "quasiparticle matrix elements need the electron-resolved basis".into(),
        });
    }
    let initial = sector_states(spec, spec.gate_charges)?;
    let d = 2 * spec.n_max + 1;

    // (receiving node, losing node, E_J GHz, branch flux in Phi0)
    let junction_data: Vec<(usize, Option<usize>, f64, f64)> = CircuitSpec::junctions()
        .map(|j| match j {
            Junction::Radial(i) => (i, None, spec.ej_radial_ghz * spec.radial_multipliers[i], 0.0),
            Junction::Azimuthal(i) => (
                i,
                Some((i + 1) % NODES),
                spec.ej_azimuthal_ghz * spec.azimuthal_multipliers[i],
                spec.inner_fluxes_phi0[i],
            ),
            Junction::Diametric(i) => (
                i,
                Some((i + 2) % NODES),
                spec.ej_diametric_ghz * spec.diametric_multipliers[i],
                spec.inner_fluxes_phi0[i]
                    + spec.inner_fluxes_phi0[(i + 1) % NODES]
                    + spec.outer_flux_phi0,
            ),
        })
        .collect();

    let mut gamma = [[0.0f64; 2]; 2];
    for &(recv, lose, ej_ghz, flux) in &junction_data {
        // One electron moved onto `recv` (from `lose`, or from ground):
        // the sector's effective gate charges shift by half a pair.
        let mut gates = spec.gate_charges;
        gates[recv] -= 0.5;
        if let Some(l) = lose {
            gates[l] += 0.5;
        }
        let fin = sector_states(spec, gates)?;
        // Γ' = 16 E_J / (π ħ) = 32 · (E_J/h in Hz).
        let gamma_prime = 32.0 * ej_ghz * 1e9;
        // Half the branch phase: e^{±iφ/2} carries e^{∓iπΦ_b}.
        let half_phase = Complex64::cis(-std::f64::consts::PI * flux);
        let mut amount = [0i64; NODES];
        amount[recv] = -1;
        if let Some(l) = lose {
            amount[l] = 1;
        }
        for i in 0..2 {
            for j in 0..2 {
                let vi = &initial.spectrum.eigenvectors[i];
                let vj = &fin.spectrum.eigenvectors[j];
                let t0 = inner(vj, vi);
                let t1 = shifted_overlap(vj, vi, amount, d);
                let cos_el = (half_phase * t0 + half_phase.conj() * t1) / 2.0;
                let sin_el = (half_phase * t0 - half_phase.conj() * t1) / Complex64::new(0.0, 2.0);
                let f_ij_ghz =
                    initial.spectrum.eigenvalues[i] - fin.spectrum.eigenvalues[j];
                let (s_plus, s_minus) = env.model.factors(
                    f_ij_ghz,
                    env.delta_gap_ghz,
                    env.temperature_k,
                    env.x_qp,
                );
                gamma[i][j] += gamma_prime
                    * env.x_qp
                    * (s_plus * sin_el.norm_sqr() + s_minus * cos_el.norm_sqr());
            }
        }
    }
    Ok(RateReport {
        gamma_00_hz: gamma[0][0],
        gamma_01_hz: gamma[0][1],
        gamma_10_hz: gamma[1][0],
        gamma_11_hz: gamma[1][1],
        gamma_total_hz: 0.5 * (gamma[0][0] + gamma[0][1] + gamma[1][0] + gamma[1][1]),
        delta_gap_ghz: env.delta_gap_ghz,
    })
}

// ---------------------------------------------------------------------------
// 1/f noise synthesis
// ---------------------------------------------------------------------------

/// Noise channel kind; determines which circuit parameters fluctuate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Gate-charge noise on the four islands, Cooper pairs.
    Charge,
    /// Flux noise on the five loops, flux quanta.
    Flux,
    /// Relative critical-current noise on the ten junctions.
    CriticalCurrent,
}

/// Piecewise-1/f noise channel. The power spectral density is flat at `A`
/// below 1 Hz, A/|f| between `f_low` and `f_high`, and zero above.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseChannelSpec {
    pub kind: NoiseKind,
    /// Total squared amplitude A in the squared channel unit
    /// (CP², Φ0², or relative² for critical current).
    pub amplitude: f64,
    pub f_low_hz: f64,
    pub f_high_hz: f64,
    pub delta_f_hz: f64,
    pub n_samples: usize,
}

impl NoiseChannelSpec {
    pub fn defaults(kind: NoiseKind) -> Self {
        let amplitude = match kind {
            // 2e-4 electron charges = 1e-4 Cooper pairs.
            NoiseKind::Charge => 1e-4f64.powi(2),
            NoiseKind::Flux => 2e-6f64.powi(2),
            NoiseKind::CriticalCurrent => 1e-7f64.powi(2),
        };
        Self {
            kind,
            amplitude,
            f_low_hz: 1.0,
            f_high_hz: 1e6,
            delta_f_hz: 0.5,
            n_samples: 2_000_000 - 1,
        }
    }

    /// Shorter series (10x coarser frequency grid) for reduced-fidelity runs.
    pub fn reduced(kind: NoiseKind) -> Self {
        Self {
            delta_f_hz: 5.0,
            n_samples: 200_000 - 1,
            ..Self::defaults(kind)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples % 2 == 0 {
            return Err(Error::InvalidParameter {
                name: "n_samples",
                reason: format!("must be odd, got {}", self.n_samples),
            });
        }
        if !(self.amplitude >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "amplitude",
                reason: format!("must be non-negative, got {}", self.amplitude),
            });
        }
        Ok(())
    }

    /// Number of fluctuating circuit parameters the amplitude is split over.
    pub fn parameter_count(&self) -> usize {
        match self.kind {
            NoiseKind::Charge => NODES,
            NoiseKind::Flux => NODES + 1,
            NoiseKind::CriticalCurrent => 2 * NODES + DIAMETRIC_JUNCTIONS,
        }
    }

    /// One-sided PSD S(f) for a single parameter carrying amplitude `a`.
    fn psd(&self, a: f64, f_hz: f64) -> f64 {
        let f = f_hz.abs();
        if f < self.f_low_hz {
            a
        } else if f <= self.f_high_hz {
            a / f
        } else {
            0.0
        }
    }
}

/// A synthesized noise record: real samples and the time step.
#[derive(Debug, Clone)]
pub struct NoiseSeries {
    pub samples: Vec<f64>,
    pub dt_s: f64,
}

/// Synthesize one real 1/f time series of `n_samples` points with the
/// channel's PSD carrying squared amplitude `amplitude_per_param`.
///
/// Frequency bins get X_k = Z_k √(S(f_k) Δf) with complex standard normal
/// Z_k and Hermitian symmetry Z_{-k} = Z_k*; the series is the inverse
/// discrete Fourier sum and the time step is 1/(N Δf).
pub fn synthesize_1f_noise(
    channel: &NoiseChannelSpec,
    amplitude_per_param: f64,
    stream: &mut RandomStream,
) -> Result<NoiseSeries> {
    channel.validate()?;
    let n = channel.n_samples;
    let half = (n - 1) / 2;
    let mut spectrum: Vec<Complex64> = vec![Complex64::ZERO; n];
    // k = 0: real Gaussian at the flat part of the PSD.
    spectrum[0] = Complex64::new(stream.normal(), 0.0)
        * channel.psd(amplitude_per_param, 0.0).sqrt()
        * channel.delta_f_hz.sqrt();
    for k in 1..=half {
        let z = Complex64::new(stream.normal(), stream.normal()) / 2f64.sqrt();
        let amp = (channel.psd(amplitude_per_param, k as f64 * channel.delta_f_hz)
            * channel.delta_f_hz)
            .sqrt();
        spectrum[k] = z * amp;
        spectrum[n - k] = (z * amp).conj();
    }
    // Inverse DFT sum x_l = Σ_k X_k e^{+2πi k l / N}: rustfft's inverse
    // transform without the 1/N normalization.
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(n);
    fft.process(&mut spectrum);
    let samples: Vec<f64> = spectrum.iter().map(|c| c.re).collect();
    let max_imag = spectrum.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    let rms = (samples.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    if max_imag > 1e-8 * rms.max(1e-300) {
        return Err(Error::InvalidParameter {
            name: "n_samples",
            reason: format!("synthesis lost Hermitian symmetry (imag {max_imag:e})"),
        });
    }
    Ok(NoiseSeries {
        samples,
        dt_s: 1.0 / (n as f64 * channel.delta_f_hz),
    })
}

// ---------------------------------------------------------------------------
// Frequency response and dephasing
// ---------------------------------------------------------------------------

/// One fluctuating circuit parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum NoiseParameter {
    /// Gate charge of one island, Cooper pairs.
    GateCharge(usize),
    /// One inner loop flux, flux quanta.
    InnerFlux(usize),
    /// The outer flux, flux quanta.
    OuterFlux,
    /// Relative critical-current shift of one junction.
    CriticalCurrent(Junction),
}

impl NoiseParameter {
    /// Parameters belonging to a noise kind, in amplitude-splitting order.
    pub fn family(kind: NoiseKind) -> Vec<NoiseParameter> {
        match kind {
            NoiseKind::Charge => (0..NODES).map(NoiseParameter::GateCharge).collect(),
            NoiseKind::Flux => (0..NODES)
                .map(NoiseParameter::InnerFlux)
                .chain(std::iter::once(NoiseParameter::OuterFlux))
                .collect(),
            NoiseKind::CriticalCurrent => {
                CircuitSpec::junctions().map(NoiseParameter::CriticalCurrent).collect()
            }
        }
    }

    /// Finite-difference step in the parameter's own unit.
    pub fn step(self) -> f64 {
        1e-4
    }

    /// Apply an offset to a spec (relative for critical currents).
    pub fn apply(self, spec: &mut CircuitSpec, delta: f64) {
        match self {
            NoiseParameter::GateCharge(i) => spec.gate_charges[i] += delta,
            NoiseParameter::InnerFlux(i) => spec.inner_fluxes_phi0[i] += delta,
            NoiseParameter::OuterFlux => spec.outer_flux_phi0 += delta,
            NoiseParameter::CriticalCurrent(j) => match j {
                Junction::Radial(i) => spec.radial_multipliers[i] *= 1.0 + delta,
                Junction::Azimuthal(i) => spec.azimuthal_multipliers[i] *= 1.0 + delta,
                Junction::Diametric(i) => spec.diametric_multipliers[i] *= 1.0 + delta,
            },
        }
    }
}

/// Quadratic model of f_01 around a working point.
#[derive(Debug, Clone)]
pub struct FrequencyResponse {
    pub base: CircuitSpec,
    pub parameters: Vec<NoiseParameter>,
    pub f01_hz: f64,
    /// ∂f01/∂x_m, Hz per parameter unit.
    pub gradient_hz: Vec<f64>,
    /// ∂²f01/∂x_m∂x_n, Hz per unit², symmetrized.
    pub hessian_hz: Vec<Vec<f64>>,
}

impl FrequencyResponse {
    /// δf_01 = g·x + ½ xᵀ h x for one parameter vector, Hz.
    pub fn delta_f01_hz(&self, x: &[f64]) -> f64 {
        let mut out = 0.0;
        for (m, &xm) in x.iter().enumerate() {
            out += self.gradient_hz[m] * xm;
            for (nn, &xn) in x.iter().enumerate() {
                out += 0.5 * self.hessian_hz[m][nn] * xm * xn;
            }
        }
        out
    }
}

/// Gradient and Hessian of f_01 by central finite differences; the base
/// eigenvectors warm-start every stencil solve.
pub fn frequency_response(
    spec: &CircuitSpec,
    parameters: &[NoiseParameter],
) -> Result<FrequencyResponse> {
    let base_states = circuit_spectrum(spec, 2)?;
    let f0 = base_states.f01();
    let warm = &base_states.spectrum;
    let f01_at = |offsets: &[(NoiseParameter, f64)]| -> Result<f64> {
        let mut s = spec.clone();
        for &(p, d) in offsets {
            p.apply(&mut s, d);
        }
        Ok(circuit_spectrum_seeded(&s, 2, Some(warm))?.f01())
    };
    let p = parameters.len();
    let mut gradient_hz = vec![0.0; p];
    let mut hessian_hz = vec![vec![0.0; p]; p];
    // Diagonal stencils first: plus/minus single-parameter points.
    let singles: Vec<(f64, f64)> = parameters
        .par_iter()
        .map(|&pm| {
            let e = pm.step();
            let fp = f01_at(&[(pm, e)])?;
            let fm = f01_at(&[(pm, -e)])?;
            Ok((fp, fm))
        })
        .collect::<Result<_>>()?;
    for (m, &(fp, fm)) in singles.iter().enumerate() {
        let e = parameters[m].step();
        gradient_hz[m] = (fp - fm) / (2.0 * e) * 1e9;
        hessian_hz[m][m] = (fp - 2.0 * f0 + fm) / (e * e) * 1e9;
    }
    // Off-diagonal four-point stencils.
    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|m| ((m + 1)..p).map(move |nn| (m, nn)))
        .collect();
    let cross: Vec<f64> = pairs
        .par_iter()
        .map(|&(m, nn)| {
            let (pm, pn) = (parameters[m], parameters[nn]);
            let (em, en) = (pm.step(), pn.step());
            let mut acc = 0.0;
            for (sm, sn) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let f = f01_at(&[(pm, sm * em), (pn, sn * en)])?;
                acc += sm * sn * f;
            }
            Ok(acc / (4.0 * em * en) * 1e9)
        })
        .collect::<Result<_>>()?;
    for (&(m, nn), &v) in pairs.iter().zip(&cross) {
        hessian_hz[m][nn] = v;
        hessian_hz[nn][m] = v;
    }
    Ok(FrequencyResponse {
        base: spec.clone(),
        parameters: parameters.to_vec(),
        f01_hz: f0 * 1e9,
        gradient_hz,
        hessian_hz,
    })
}

/// Dephasing estimate: the coherence trace and the 1/e crossing.
#[derive(Debug, Clone, Serialize)]
pub struct DephasingResult {
    /// First time |f(t)| ≤ 1/e, linearly interpolated; `None` when the trace
    /// never crosses within its span (then `lower_bound_s` applies).
    pub t_phi_s: Option<f64>,
    /// Span of the trace; a lower bound on Tφ when no crossing occurred.
    pub lower_bound_s: f64,
    pub n_realizations: usize,
    /// Decay trace ⟨e^{-iφ(t)}⟩, downsampled to at most 4096 points.
    pub decay: Vec<(f64, Complex64)>,
}

/// Maximum stored decay-trace length.
const DECAY_TRACE_POINTS: usize = 4096;

/// Ensemble dephasing of f_01 under one 1/f channel.
///
/// Each realization synthesizes an independent series per parameter (the
/// channel amplitude split evenly), evaluates δf_01(t) through the quadratic
/// response, accumulates the phase by trapezoidal integration, and averages
/// e^{-iφ(t)} over realizations.
pub fn dephasing_time(
    response: &FrequencyResponse,
    channel: &NoiseChannelSpec,
    n_realizations: usize,
    master_seed: u64,
) -> Result<DephasingResult> {
    channel.validate()?;
    let params = NoiseParameter::family(channel.kind);
    if params != response.parameters {
        return Err(Error::InvalidParameter {
            name: "response",
            reason: "frequency response was computed for a different parameter family".into(),
        });
    }
    if n_realizations == 0 {
        return Err(Error::InvalidParameter {
            name: "n_realizations",
            reason: "need at least one realization".into(),
        });
    }
    let p = params.len();
    let a_per_param = channel.amplitude / p as f64;
    let n = channel.n_samples;

    let accumulated: Vec<Complex64> = (0..n_realizations as u64)
        .into_par_iter()
        .map(|realization| -> Result<Vec<Complex64>> {
            let mut dt = 0.0;
            let mut series: Vec<Vec<f64>> = Vec::with_capacity(p);
            for param_index in 0..p as u64 {
                let mut stream =
                    RandomStream::new(master_seed, realization * p as u64 + param_index);
                let s = synthesize_1f_noise(channel, a_per_param, &mut stream)?;
                dt = s.dt_s;
                series.push(s.samples);
            }
            let mut x = vec![0.0; p];
            let mut prev_df = 0.0;
            let mut phase = 0.0;
            let mut trace = Vec::with_capacity(n);
            for l in 0..n {
                for (m, s) in series.iter().enumerate() {
                    x[m] = s[l];
                }
                let df = response.delta_f01_hz(&x);
                if l > 0 {
                    phase += std::f64::consts::TAU * 0.5 * (prev_df + df) * dt;
                }
                prev_df = df;
                trace.push(Complex64::cis(-phase));
            }
            Ok(trace)
        })
        .try_reduce(
            || vec![Complex64::ZERO; n],
            |mut acc, trace| {
                for (a, t) in acc.iter_mut().zip(&trace) {
                    *a += t;
                }
                Ok(acc)
            },
        )?;

    let dt = 1.0 / (n as f64 * channel.delta_f_hz);
    let inv_e = (-1.0f64).exp();
    let mut t_phi_s = None;
    let mut prev_mag = 1.0;
    for (l, c) in accumulated.iter().enumerate() {
        let mag = (c / n_realizations as f64).norm();
        if mag <= inv_e {
            let t_prev = (l.saturating_sub(1)) as f64 * dt;
            let frac = if (prev_mag - mag).abs() > 1e-300 {
                (prev_mag - inv_e) / (prev_mag - mag)
            } else {
                1.0
            };
            t_phi_s = Some(t_prev + frac * dt);
            break;
        }
        prev_mag = mag;
    }
    let keep_every = n.div_ceil(DECAY_TRACE_POINTS);
    let decay: Vec<(f64, Complex64)> = accumulated
        .iter()
        .enumerate()
        .step_by(keep_every)
        .map(|(l, c)| (l as f64 * dt, c / n_realizations as f64))
        .collect();
    Ok(DephasingResult {
        t_phi_s,
        lower_bound_s: (n - 1) as f64 * dt,
        n_realizations,
        decay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_point(n_max: usize) -> CircuitSpec {
        CircuitSpec {
            n_max,
            ..CircuitSpec::optimal_point()
        }
    }

    #[test]
    fn gap_formula_endpoints() {
        assert!((superconducting_gap(1e12).unwrap() - 43.5).abs() < 1e-6);
        assert!((superconducting_gap(10.0).unwrap() - 58.0).abs() < 1e-12);
        assert!((superconducting_gap(29.0).unwrap() - 48.5).abs() < 1e-12);
        assert!(superconducting_gap(0.0).is_err());
    }

    #[test]
    fn dielectric_loss_vanishes_at_optimal_point() {
        let spec = small_point(3);
        let states = circuit_spectrum(&spec, 2).unwrap();
        let rates =
            dielectric_loss_rates(&spec, &states, &[LossChannel::junction_intrinsic_default()])
                .unwrap();
        assert!(rates[0].rate_hz < 1e-6, "rate {}", rates[0].rate_hz);
    }

    #[test]
    fn channel_sum_matches_trace_formula() {
        let mut spec = small_point(2);
        spec.inner_fluxes_phi0 = [0.46; NODES];
        spec.outer_flux_phi0 = 0.46;
        spec.gate_charges = [0.45, 0.55, 0.5, 0.5];
        let states = circuit_spectrum(&spec, 2).unwrap();
        let channel = LossChannel {
            tan_delta: 1e-7,
            ..LossChannel::junction_intrinsic_default()
        };
        let by_channel = dielectric_loss_rates(&spec, &states, &[channel]).unwrap()[0].rate_hz;
        let by_trace = dielectric_loss_trace(&spec, &states, 1e-7).unwrap();
        assert!(by_trace > 0.0);
        assert!(
            (by_channel - by_trace).abs() < 1e-10 * by_trace,
            "{by_channel} vs {by_trace}"
        );
    }

    #[test]
    fn dielectric_loss_grows_with_flux_offset() {
        let mut prev = -1.0;
        for offset in [0.0, 0.02, 0.04] {
            let mut spec = small_point(2);
            spec.inner_fluxes_phi0 = [0.5 - offset; NODES];
            spec.outer_flux_phi0 = 0.5 - offset;
            let states = circuit_spectrum(&spec, 2).unwrap();
            let rate = dielectric_loss_trace(&spec, &states, 1e-7).unwrap();
            assert!(rate > prev, "rate {rate} at offset {offset}");
            prev = rate;
        }
    }

    #[test]
    fn qp_rates_linear_in_density_and_zero_without_tunneling() {
        let model = GapAsymmetricThermal::default();
        let mut spec = small_point(2);
        spec.charge_resolution = ChargeResolution::Electron;
        let env = |x_qp: f64| QuasiparticleEnv {
            x_qp,
            temperature_k: DEFAULT_DEVICE_TEMPERATURE_K,
            mean_gap_ghz: DEFAULT_MEAN_GAP_GHZ,
            delta_gap_ghz: 0.0,
            model: &model,
        };
        let r1 = qp_tunneling_rates(&spec, &env(5e-9)).unwrap();
        let r2 = qp_tunneling_rates(&spec, &env(1e-8)).unwrap();
        assert!(r1.gamma_total_hz > 0.0);
        assert!(
            (r2.gamma_total_hz / r1.gamma_total_hz - 2.0).abs() < 1e-9,
            "ratio {}",
            r2.gamma_total_hz / r1.gamma_total_hz
        );
    }

    #[test]
    fn qp_suppression_monotone_in_gap_asymmetry() {
        let model = GapAsymmetricThermal::default();
        let mut spec = small_point(2);
        spec.charge_resolution = ChargeResolution::Electron;
        let mut prev = f64::INFINITY;
        let mut first = 0.0;
        let mut last = 0.0;
        for (i, dd) in [0.0, 2.5, 5.0, 7.5, 10.0].iter().enumerate() {
            let env = QuasiparticleEnv {
                x_qp: DEFAULT_X_QP,
                temperature_k: DEFAULT_DEVICE_TEMPERATURE_K,
                mean_gap_ghz: DEFAULT_MEAN_GAP_GHZ,
                delta_gap_ghz: *dd,
                model: &model,
            };
            let r = qp_tunneling_rates(&spec, &env).unwrap();
            assert!(r.gamma_01_hz < prev, "not monotone at dD = {dd}");
            prev = r.gamma_01_hz;
            if i == 0 {
                first = r.gamma_01_hz;
            }
            last = r.gamma_01_hz;
        }
        assert!(first / last > 1e5, "suppression {}", first / last);
    }

    #[test]
    fn noise_series_is_real_and_has_parseval_variance() {
        let mut channel = NoiseChannelSpec::defaults(NoiseKind::Charge);
        channel.n_samples = 20_001;
        channel.delta_f_hz = 100.0; // grid reaches f_high = 1 MHz
        let a = 1.0;
        let mut acc = 0.0;
        let n_avg = 50;
        for r in 0..n_avg {
            let mut stream = RandomStream::new(7, r);
            let s = synthesize_1f_noise(&channel, a, &mut stream).unwrap();
            acc += s.samples.iter().map(|x| x * x).sum::<f64>() / s.samples.len() as f64;
        }
        let variance = acc / n_avg as f64;
        // integral of the piecewise PSD: A (1 + ln(f_high/f_low)).
        let expected = a * (1.0 + (channel.f_high_hz / channel.f_low_hz).ln());
        assert!(
            (variance / expected - 1.0).abs() < 0.05,
            "variance {variance} vs {expected}"
        );
    }

    #[test]
    fn noise_periodogram_matches_one_over_f() {
        let mut channel = NoiseChannelSpec::defaults(NoiseKind::Charge);
        channel.n_samples = 65_537;
        channel.delta_f_hz = 2.0;
        let a = 1.0;
        let n = channel.n_samples;
        let n_avg = 50;
        let mut psd_acc = vec![0.0f64; n / 2];
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(n);
        for r in 0..n_avg {
            let mut stream = RandomStream::new(11, r);
            let s = synthesize_1f_noise(&channel, a, &mut stream).unwrap();
            let mut buf: Vec<Complex64> =
                s.samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            fft.process(&mut buf);
            // periodogram estimate of the one-sided PSD: 2 |X_k|^2 dt / N
            // ... with our synthesis convention |X_k|^2 = S dF * N^2 / N.
            for k in 1..n / 2 {
                psd_acc[k] += buf[k].norm_sqr() / (n as f64 * n as f64 * channel.delta_f_hz);
            }
        }
        // log-spaced bins across [10, 1e4] Hz
        for decade in 0..3 {
            let f_lo = 10.0 * 10f64.powi(decade);
            let f_hi = f_lo * 10.0;
            let (mut sum, mut count, mut f_sum) = (0.0, 0usize, 0.0);
            for k in 1..n / 2 {
                let f = k as f64 * channel.delta_f_hz;
                if f >= f_lo && f < f_hi {
                    sum += psd_acc[k] / n_avg as f64;
                    f_sum += a / f;
                    count += 1;
                }
            }
            let measured = sum / count as f64;
            let expected = f_sum / count as f64;
            assert!(
                (measured / expected - 1.0).abs() < 0.10,
                "bin [{f_lo}, {f_hi}): {measured} vs {expected}"
            );
        }
    }

    #[test]
    fn gradient_flat_at_charge_sweet_spot() {
        let spec = small_point(3);
        let response =
            frequency_response(&spec, &NoiseParameter::family(NoiseKind::Charge)).unwrap();
        for (m, g) in response.gradient_hz.iter().enumerate() {
            // |g| < 1 kHz per 1e-3 Cooper pair = 1e6 Hz per Cooper pair.
            assert!(g.abs() < 1e6, "gradient[{m}] = {g} Hz/CP");
        }
        // Hessian symmetric by construction; diagonal must be the dominant
        // scale (GHz/CP^2 range).
        assert!(response.hessian_hz[0][0].abs() > 1e8);
    }

    #[test]
    fn flux_gradient_matches_direct_scan() {
        let mut spec = small_point(2);
        // move off the sweet spot so the gradient is finite
        spec.outer_flux_phi0 = 0.47;
        let response = frequency_response(&spec, &[NoiseParameter::OuterFlux]).unwrap();
        let g = response.gradient_hz[0];
        let probe = 5e-4;
        let mut plus = spec.clone();
        plus.outer_flux_phi0 += probe;
        let mut minus = spec.clone();
        minus.outer_flux_phi0 -= probe;
        let slope = (circuit_spectrum(&plus, 2).unwrap().f01()
            - circuit_spectrum(&minus, 2).unwrap().f01())
            / (2.0 * probe)
            * 1e9;
        assert!((g - slope).abs() < 0.01 * slope.abs().max(1.0), "{g} vs {slope}");
    }

    #[test]
    fn zero_amplitude_never_dephases() {
        let spec = small_point(2);
        let response =
            frequency_response(&spec, &NoiseParameter::family(NoiseKind::Charge)).unwrap();
        let mut channel = NoiseChannelSpec::reduced(NoiseKind::Charge);
        channel.amplitude = 0.0;
        channel.n_samples = 4_001;
        channel.delta_f_hz = 250.0;
        let result = dephasing_time(&response, &channel, 3, 99).unwrap();
        assert!(result.t_phi_s.is_none());
        for (_, c) in &result.decay {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn decay_trace_magnitude_bounded() {
        let spec = small_point(2);
        let response =
            frequency_response(&spec, &NoiseParameter::family(NoiseKind::Charge)).unwrap();
        let mut channel = NoiseChannelSpec::reduced(NoiseKind::Charge);
        // Exaggerate the amplitude so the decay is visible on a short trace.
        channel.amplitude = 1e-2;
        channel.n_samples = 8_001;
        channel.delta_f_hz = 100.0;
        let result = dephasing_time(&response, &channel, 8, 5).unwrap();
        assert!((result.decay[0].1.norm() - 1.0).abs() < 1e-12, "f(0) = 1");
        for (_, c) in &result.decay {
            assert!(c.norm() <= 1.0 + 1e-12);
        }
        assert!(result.t_phi_s.is_some());
    }
}
