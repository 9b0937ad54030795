//! Monte Carlo over fabrication disorder: samples perturbed circuit specs,
//! recomputes the qubit frequency and decoherence rates, and reports
//! histograms with reproducible seeding.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{circuit_spectrum, circuit_spectrum_seeded, CircuitSpec, ChargeResolution};
use crate::coherence::{
    dephasing_time, dielectric_loss_trace, frequency_response, qp_tunneling_rates,
    GapAsymmetricThermal, NoiseChannelSpec, NoiseKind, NoiseParameter, QuasiparticleEnv,
    DEFAULT_DEVICE_TEMPERATURE_K, DEFAULT_MEAN_GAP_GHZ, DEFAULT_X_QP,
};
use crate::numerics::{RandomStream, Spectrum};
use crate::{Error, Result};

/// Fabrication-disorder magnitudes. Junction-size disorder applies two
/// independent area-like factors per junction instance: the Josephson energy
/// becomes E_J(1+α)(1+β) while the charging energy of the same junction
/// becomes E_C/(1+α). Loop disorder multiplies each flux by (1+γ) and gate
/// disorder multiplies each gate charge by (1+δ).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DisorderModel {
    /// Standard deviation of α and β (default 0.02).
    pub sigma_junction: f64,
    /// Standard deviation of γ (default 0.002).
    pub sigma_loop: f64,
    /// Standard deviation of δ (default 0.001).
    pub sigma_gate: f64,
    pub junctions_enabled: bool,
    pub loops_enabled: bool,
    pub gates_enabled: bool,
}

impl Default for DisorderModel {
    fn default() -> Self {
        Self {
            sigma_junction: 0.02,
            sigma_loop: 0.002,
            sigma_gate: 0.001,
            junctions_enabled: true,
            loops_enabled: true,
            gates_enabled: true,
        }
    }
}

impl DisorderModel {
    pub fn junction_only() -> Self {
        Self {
            loops_enabled: false,
            gates_enabled: false,
            ..Self::default()
        }
    }

    pub fn loop_only() -> Self {
        Self {
            junctions_enabled: false,
            gates_enabled: false,
            ..Self::default()
        }
    }

    pub fn gate_only() -> Self {
        Self {
            junctions_enabled: false,
            loops_enabled: false,
            ..Self::default()
        }
    }

    pub fn none() -> Self {
        Self {
            junctions_enabled: false,
            loops_enabled: false,
            gates_enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_junction", self.sigma_junction),
            ("sigma_loop", self.sigma_loop),
            ("sigma_gate", self.sigma_gate),
        ] {
            if !(v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be non-negative, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// One disordered spec together with the number of redraws that were needed
/// to avoid non-positive parameters.
#[derive(Debug, Clone)]
pub struct DisorderedSample {
    pub spec: CircuitSpec,
    pub resample_count: usize,
}

/// Draw independent per-junction, per-loop and per-gate perturbations from
/// `stream`. Channels that are disabled still consume their draws so that a
/// given (seed, sample) pair perturbs each element identically across
/// channel masks. Draws that would make a multiplied parameter non-positive
/// are rejected and redrawn, and the rejection count is reported.
pub fn sample_disordered_spec(
    base: &CircuitSpec,
    model: &DisorderModel,
    stream: &mut RandomStream,
) -> Result<DisorderedSample> {
    base.validate()?;
    model.validate()?;
    let mut resamples = 0usize;
    // Rejection sampling for a multiplicative factor that must stay positive.
    let mut positive_factor = |sigma: f64, enabled: bool, resamples: &mut usize| -> f64 {
        loop {
            let factor = 1.0 + stream.normal_scaled(0.0, sigma);
            if !enabled {
                return 1.0;
            }
            if factor > 0.0 {
                return factor;
            }
            *resamples += 1;
        }
    };
    let mut spec = base.clone();
    {
        let junction_slots: [(&mut [f64], &mut [f64]); 3] = [
            (
                &mut spec.radial_multipliers,
                &mut spec.radial_cap_multipliers,
            ),
            (
                &mut spec.azimuthal_multipliers,
                &mut spec.azimuthal_cap_multipliers,
            ),
            (
                &mut spec.diametric_multipliers,
                &mut spec.diametric_cap_multipliers,
            ),
        ];
        for (ej_mults, cap_mults) in junction_slots {
            for (ej, cap) in ej_mults.iter_mut().zip(cap_mults.iter_mut()) {
                let alpha = positive_factor(model.sigma_junction, model.junctions_enabled, &mut resamples);
                let beta = positive_factor(model.sigma_junction, model.junctions_enabled, &mut resamples);
                *ej *= alpha * beta;
                // E_C scales inversely with the junction area factor α, so
                // the capacitance it defines scales directly with it.
                *cap *= alpha;
            }
        }
    }
    for flux in spec
        .inner_fluxes_phi0
        .iter_mut()
        .chain(std::iter::once(&mut spec.outer_flux_phi0))
    {
        // Fluxes may legitimately be zero or negative; the factor keeps the
        // usual positivity rejection for consistency of the draw stream.
        let gamma = positive_factor(model.sigma_loop, model.loops_enabled, &mut resamples);
        *flux *= gamma;
    }
    for gate in spec.gate_charges.iter_mut() {
        let delta = positive_factor(model.sigma_gate, model.gates_enabled, &mut resamples);
        *gate *= delta;
    }
    Ok(DisorderedSample {
        spec,
        resample_count: resamples,
    })
}

/// Observable evaluated per Monte Carlo sample.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", tag = "metric")]
pub enum Metric {
    /// Qubit transition frequency f_01 in GHz.
    F01Ghz,
    /// Uniform-loss-tangent dielectric relaxation rate in Hz.
    DielectricLossHz { tan_delta: f64 },
    /// Total quasiparticle parity-switching rate in Hz at a given gap
    /// asymmetry, using the default bath model.
    QuasiparticleHz { delta_gap_ghz: f64 },
    /// Pure-dephasing rate 1/Tφ in Hz from one 1/f noise family.
    DephasingHz { kind: NoiseKind, n_realizations: usize },
}

impl Metric {
    pub fn name(&self) -> String {
        match self {
            Metric::F01Ghz => "f01_ghz".into(),
            Metric::DielectricLossHz { tan_delta } => {
                format!("dielectric_loss_hz(tan_delta={tan_delta})")
            }
            Metric::QuasiparticleHz { delta_gap_ghz } => {
                format!("quasiparticle_hz(delta_gap_ghz={delta_gap_ghz})")
            }
            Metric::DephasingHz {
                kind,
                n_realizations,
            } => format!("dephasing_hz(kind={kind:?}, n_realizations={n_realizations})"),
        }
    }

    /// Evaluate the metric on one spec. `warm` carries the clean-spec
    /// eigenvectors; disorder is small, so they are excellent Lanczos seeds.
    fn evaluate(
        &self,
        spec: &CircuitSpec,
        warm: Option<&Spectrum>,
        fidelity: FidelityMode,
        seed: u64,
    ) -> Result<f64> {
        match *self {
            Metric::F01Ghz => Ok(circuit_spectrum_seeded(spec, 2, warm)?.f01()),
            Metric::DielectricLossHz { tan_delta } => {
                let states = circuit_spectrum_seeded(spec, 2, warm)?;
                dielectric_loss_trace(spec, &states, tan_delta)
            }
            Metric::QuasiparticleHz { delta_gap_ghz } => {
                let mut espec = spec.clone();
                espec.charge_resolution = ChargeResolution::Electron;
                let model = GapAsymmetricThermal::default();
                let env = QuasiparticleEnv {
                    x_qp: DEFAULT_X_QP,
                    temperature_k: DEFAULT_DEVICE_TEMPERATURE_K,
                    mean_gap_ghz: DEFAULT_MEAN_GAP_GHZ,
                    delta_gap_ghz,
                    model: &model,
                };
                Ok(qp_tunneling_rates(&espec, &env)?.gamma_total_hz)
            }
            Metric::DephasingHz {
                kind,
                n_realizations,
            } => {
                let params = NoiseParameter::family(kind);
                let response = frequency_response(spec, &params)?;
                let channel = match fidelity {
                    FidelityMode::Full => NoiseChannelSpec::defaults(kind),
                    FidelityMode::Reduced => NoiseChannelSpec::reduced(kind),
                };
                let result = dephasing_time(&response, &channel, n_realizations, seed)?;
                Ok(1.0 / result.t_phi_s.unwrap_or(result.lower_bound_s))
            }
        }
    }
}

/// Full- versus reduced-fidelity evaluation for expensive metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityMode {
    Full,
    Reduced,
}

/// Histogram of one metric over disorder samples.
#[derive(Debug, Clone, Serialize)]
pub struct HistogramReport {
    pub metric: String,
    /// Successful sample values, sorted ascending.
    pub values: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
    pub master_seed: u64,
    pub n_requested: usize,
    pub n_failed: usize,
    pub total_resamples: usize,
    pub fidelity: FidelityMode,
}

/// Maximum tolerated fraction of failed samples.
const MAX_FAILURE_FRACTION: f64 = 0.1;

/// Monte Carlo histogram of `metric` under `model`. Sample `i` perturbs the
/// base spec with the stream `(master_seed, i)`, so results are independent
/// of evaluation order and thread count. Per-sample numerical failures are
/// excluded and counted; more than 10% of them aborts the run.
pub fn mc_histogram(
    base: &CircuitSpec,
    model: &DisorderModel,
    metric: Metric,
    n_samples: usize,
    master_seed: u64,
    fidelity: FidelityMode,
) -> Result<HistogramReport> {
    if n_samples < 10 {
        return Err(Error::InvalidParameter {
            name: "n_samples",
            reason: format!("need at least 10 samples, got {n_samples}"),
        });
    }
    let mut base = base.clone();
    if fidelity == FidelityMode::Reduced {
        base.n_max = base.n_max.min(4);
    }
    // The clean-spec eigenvectors warm-start every per-sample solve.
    let warm = circuit_spectrum(&base, 2)?.spectrum;
    let outcomes: Vec<(std::result::Result<f64, String>, usize)> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut stream = RandomStream::new(master_seed, i);
            let sample = match sample_disordered_spec(&base, model, &mut stream) {
                Ok(s) => s,
                Err(e) => return (Err(e.to_string()), 0),
            };
            let value = metric
                .evaluate(&sample.spec, Some(&warm), fidelity, master_seed ^ i)
                .map_err(|e| e.to_string());
            (value, sample.resample_count)
        })
        .collect();
    let total_resamples = outcomes.iter().map(|(_, r)| r).sum();
    let mut values: Vec<f64> = outcomes
        .iter()
        .filter_map(|(v, _)| v.as_ref().ok().copied())
        .collect();
    let n_failed = n_samples - values.len();
    if (n_failed as f64) > MAX_FAILURE_FRACTION * n_samples as f64 {
        return Err(Error::TooManyFailures {
            failed: n_failed,
            total: n_samples,
        });
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        / (values.len().max(2) - 1) as f64;
    Ok(HistogramReport {
        metric: metric.name(),
        values,
        mean,
        std_dev: var.sqrt(),
        master_seed,
        n_requested: n_samples,
        n_failed,
        total_resamples,
        fidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_disorder_returns_identical_spec() {
        let base = CircuitSpec::fast_test_point();
        let mut model = DisorderModel::default();
        model.sigma_junction = 0.0;
        model.sigma_loop = 0.0;
        model.sigma_gate = 0.0;
        let mut stream = RandomStream::new(7, 0);
        let sample = sample_disordered_spec(&base, &model, &mut stream).unwrap();
        assert_eq!(sample.resample_count, 0);
        assert_eq!(
            serde_json::to_string(&sample.spec).unwrap(),
            serde_json::to_string(&base).unwrap()
        );
    }

    #[test]
    fn disabled_channels_leave_their_parameters_untouched() {
        let base = CircuitSpec::fast_test_point();
        let model = DisorderModel::gate_only();
        let mut stream = RandomStream::new(3, 1);
        let sample = sample_disordered_spec(&base, &model, &mut stream).unwrap();
        assert_eq!(sample.spec.radial_multipliers, base.radial_multipliers);
        assert_eq!(sample.spec.inner_fluxes_phi0, base.inner_fluxes_phi0);
        assert_ne!(sample.spec.gate_charges, base.gate_charges);
    }

    #[test]
    fn fixed_seed_reproduces_the_same_spec() {
        let base = CircuitSpec::fast_test_point();
        let model = DisorderModel::default();
        let mut a = RandomStream::new(11, 5);
        let mut b = RandomStream::new(11, 5);
        let sa = sample_disordered_spec(&base, &model, &mut a).unwrap();
        let sb = sample_disordered_spec(&base, &model, &mut b).unwrap();
        assert_eq!(
            serde_json::to_string(&sa.spec).unwrap(),
            serde_json::to_string(&sb.spec).unwrap()
        );
    }

    #[test]
    fn junction_multiplier_spread_matches_product_statistics() {
        // std[(1+α)(1+β)] = sqrt((1+σ²)² − 1) ≈ √2·σ for small σ.
        let base = CircuitSpec::fast_test_point();
        let model = DisorderModel::junction_only();
        let mut mults = Vec::new();
        for i in 0..1000u64 {
            let mut stream = RandomStream::new(99, i);
            let s = sample_disordered_spec(&base, &model, &mut stream).unwrap();
            mults.extend(s.spec.radial_multipliers);
            mults.extend(s.spec.azimuthal_multipliers);
            mults.extend(s.spec.diametric_multipliers);
        }
        let n = mults.len() as f64;
        let mean = mults.iter().sum::<f64>() / n;
        let std =
            (mults.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let expect = std::f64::consts::SQRT_2 * model.sigma_junction;
        assert!((std - expect).abs() < 0.05 * expect, "std {std} vs {expect}");
    }

    #[test]
    fn histogram_statistics_recompute_from_values() {
        let base = CircuitSpec {
            n_max: 2,
            ..CircuitSpec::fast_test_point()
        };
        let report = mc_histogram(
            &base,
            &DisorderModel::default(),
            Metric::F01Ghz,
            12,
            42,
            FidelityMode::Reduced,
        )
        .unwrap();
        assert_eq!(report.values.len() + report.n_failed, 12);
        let mean = report.values.iter().sum::<f64>() / report.values.len() as f64;
        assert!((mean - report.mean).abs() < 1e-12);
        assert!(report.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn zero_disorder_histogram_is_a_delta() {
        let base = CircuitSpec {
            n_max: 2,
            ..CircuitSpec::fast_test_point()
        };
        let report = mc_histogram(
            &base,
            &DisorderModel::none(),
            Metric::F01Ghz,
            10,
            1,
            FidelityMode::Reduced,
        )
        .unwrap();
        assert!(report.std_dev < 1e-9 * report.mean.abs());
    }

    #[test]
    fn histogram_is_reproducible_for_a_fixed_seed() {
        let base = CircuitSpec {
            n_max: 2,
            ..CircuitSpec::fast_test_point()
        };
        let run = || {
            mc_histogram(
                &base,
                &DisorderModel::default(),
                Metric::F01Ghz,
                10,
                7,
                FidelityMode::Reduced,
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.values, b.values);
    }
}
