//! Structured text configuration: a TOML tree whose keys carry explicit
//! units, with dotted-path command-line overrides.

use serde::{Deserialize, Serialize};

use crate::circuit::{ChargeResolution, CircuitSpec, DIAMETRIC_JUNCTIONS, NODES};
use crate::coherence::{NoiseChannelSpec, NoiseKind};
use crate::disorder::DisorderModel;
use crate::dynamics::{FluxRampSchedule, ResonatorSpec, StirapSchedule};
use crate::spin::SpinChainSpec;
use crate::{Error, Result};

/// Circuit parameters with unit-carrying key names.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitConfig {
    #[serde(rename = "E_Jr_GHz")]
    pub e_jr_ghz: f64,
    #[serde(rename = "E_Cr_GHz")]
    pub e_cr_ghz: f64,
    #[serde(rename = "E_Ja_GHz")]
    pub e_ja_ghz: f64,
    #[serde(rename = "E_Ca_GHz")]
    pub e_ca_ghz: f64,
    #[serde(rename = "E_Jl_GHz")]
    pub e_jl_ghz: f64,
    #[serde(rename = "E_Cl_GHz")]
    pub e_cl_ghz: f64,
    #[serde(rename = "inner_fluxes_Phi0")]
    pub inner_fluxes_phi0: [f64; NODES],
    #[serde(rename = "outer_flux_Phi0")]
    pub outer_flux_phi0: f64,
    #[serde(rename = "Ng_cooper_pairs")]
    pub ng_cooper_pairs: [f64; NODES],
    pub n_max: usize,
    #[serde(default)]
    pub geometric_cap_fraction: Option<f64>,
    #[serde(default)]
    pub charge_resolution: Option<ChargeResolution>,
    #[serde(default)]
    pub ej_multipliers_radial: Option<[f64; NODES]>,
    #[serde(default)]
    pub ej_multipliers_azimuthal: Option<[f64; NODES]>,
    #[serde(default)]
    pub ej_multipliers_diametric: Option<[f64; DIAMETRIC_JUNCTIONS]>,
    #[serde(default)]
    pub cap_multipliers_radial: Option<[f64; NODES]>,
    #[serde(default)]
    pub cap_multipliers_azimuthal: Option<[f64; NODES]>,
    #[serde(default)]
    pub cap_multipliers_diametric: Option<[f64; DIAMETRIC_JUNCTIONS]>,
}

impl CircuitConfig {
    pub fn to_spec(&self) -> Result<CircuitSpec> {
        let defaults = CircuitSpec::optimal_point();
        let spec = CircuitSpec {
            ej_radial_ghz: self.e_jr_ghz,
            ec_radial_ghz: self.e_cr_ghz,
            ej_azimuthal_ghz: self.e_ja_ghz,
            ec_azimuthal_ghz: self.e_ca_ghz,
            ej_diametric_ghz: self.e_jl_ghz,
            ec_diametric_ghz: self.e_cl_ghz,
            radial_multipliers: self.ej_multipliers_radial.unwrap_or([1.0; NODES]),
            azimuthal_multipliers: self.ej_multipliers_azimuthal.unwrap_or([1.0; NODES]),
            diametric_multipliers: self
                .ej_multipliers_diametric
                .unwrap_or([1.0; DIAMETRIC_JUNCTIONS]),
            radial_cap_multipliers: self.cap_multipliers_radial.unwrap_or([1.0; NODES]),
            azimuthal_cap_multipliers: self.cap_multipliers_azimuthal.unwrap_or([1.0; NODES]),
            diametric_cap_multipliers: self
                .cap_multipliers_diametric
                .unwrap_or([1.0; DIAMETRIC_JUNCTIONS]),
            inner_fluxes_phi0: self.inner_fluxes_phi0,
            outer_flux_phi0: self.outer_flux_phi0,
            gate_charges: self.ng_cooper_pairs,
            n_max: self.n_max,
            geometric_cap_fraction: self.geometric_cap_fraction,
            charge_resolution: self
                .charge_resolution
                .unwrap_or(defaults.charge_resolution),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_spec(spec: &CircuitSpec) -> Self {
        Self {
            e_jr_ghz: spec.ej_radial_ghz,
            e_cr_ghz: spec.ec_radial_ghz,
            e_ja_ghz: spec.ej_azimuthal_ghz,
            e_ca_ghz: spec.ec_azimuthal_ghz,
            e_jl_ghz: spec.ej_diametric_ghz,
            e_cl_ghz: spec.ec_diametric_ghz,
            inner_fluxes_phi0: spec.inner_fluxes_phi0,
            outer_flux_phi0: spec.outer_flux_phi0,
            ng_cooper_pairs: spec.gate_charges,
            n_max: spec.n_max,
            geometric_cap_fraction: spec.geometric_cap_fraction,
            charge_resolution: Some(spec.charge_resolution),
            ej_multipliers_radial: Some(spec.radial_multipliers),
            ej_multipliers_azimuthal: Some(spec.azimuthal_multipliers),
            ej_multipliers_diametric: Some(spec.diametric_multipliers),
            cap_multipliers_radial: Some(spec.radial_cap_multipliers),
            cap_multipliers_azimuthal: Some(spec.azimuthal_cap_multipliers),
            cap_multipliers_diametric: Some(spec.diametric_cap_multipliers),
        }
    }
}

/// Spin-ring parameters with explicit names (couplings are E/h in GHz).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinConfig {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "t_GHz")]
    pub t_ghz: f64,
    #[serde(rename = "lambda_GHz")]
    pub lambda_ghz: f64,
    #[serde(default, rename = "zeta_GHz")]
    pub zeta_ghz: f64,
    #[serde(default, rename = "eta_GHz")]
    pub eta_ghz: f64,
    #[serde(default, rename = "omega_field_GHz")]
    pub omega_field_ghz: f64,
    #[serde(default, rename = "mu_GHz")]
    pub mu_ghz: f64,
    #[serde(default, rename = "nu_GHz")]
    pub nu_ghz: f64,
}

impl SpinConfig {
    pub fn to_spec(&self) -> Result<SpinChainSpec> {
        let mut spec = SpinChainSpec::new(self.m, self.t_ghz, self.lambda_ghz);
        spec.zeta = self.zeta_ghz;
        spec.eta = self.eta_ghz;
        spec.omega_field = self.omega_field_ghz;
        spec.mu = self.mu_ghz;
        spec.nu = self.nu_ghz;
        spec.validate()?;
        Ok(spec)
    }
}

/// Resonator parameters with unit-carrying key names.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorConfig {
    #[serde(rename = "L_H")]
    pub l_h: f64,
    #[serde(rename = "C_F")]
    pub c_f: f64,
    #[serde(rename = "kappa_over_2pi_Hz")]
    pub kappa_over_2pi_hz: f64,
    pub fock_cutoff: usize,
    #[serde(rename = "shared_inductance_H")]
    pub shared_inductance_h: f64,
}

impl ResonatorConfig {
    pub fn to_spec(&self) -> Result<ResonatorSpec> {
        let spec = ResonatorSpec {
            inductance_h: self.l_h,
            capacitance_f: self.c_f,
            kappa_over_2pi_hz: self.kappa_over_2pi_hz,
            fock_cutoff: self.fock_cutoff,
            shared_inductance_h: self.shared_inductance_h,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_spec(spec: &ResonatorSpec) -> Self {
        Self {
            l_h: spec.inductance_h,
            c_f: spec.capacitance_f,
            kappa_over_2pi_hz: spec.kappa_over_2pi_hz,
            fock_cutoff: spec.fock_cutoff,
            shared_inductance_h: spec.shared_inductance_h,
        }
    }
}

/// Quasiparticle environment parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasiparticleConfig {
    pub x_qp: f64,
    #[serde(rename = "temperature_K")]
    pub temperature_k: f64,
    #[serde(rename = "mean_gap_GHz")]
    pub mean_gap_ghz: f64,
    #[serde(rename = "delta_gap_GHz")]
    pub delta_gap_ghz: f64,
}

impl Default for QuasiparticleConfig {
    fn default() -> Self {
        Self {
            x_qp: crate::coherence::DEFAULT_X_QP,
            temperature_k: crate::coherence::DEFAULT_DEVICE_TEMPERATURE_K,
            mean_gap_ghz: crate::coherence::DEFAULT_MEAN_GAP_GHZ,
            delta_gap_ghz: 0.0,
        }
    }
}

/// Amplitude and synthesis controls for one 1/f noise family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Total PSD amplitude A (parameter-unit² at 1 Hz).
    pub amplitude: f64,
    #[serde(rename = "f_low_Hz")]
    pub f_low_hz: f64,
    #[serde(rename = "f_high_Hz")]
    pub f_high_hz: f64,
    #[serde(rename = "delta_f_Hz")]
    pub delta_f_hz: f64,
    pub n_samples: usize,
}

impl NoiseConfig {
    pub fn to_channel(&self, kind: NoiseKind) -> Result<NoiseChannelSpec> {
        let mut channel = NoiseChannelSpec::defaults(kind);
        channel.amplitude = self.amplitude;
        channel.f_low_hz = self.f_low_hz;
        channel.f_high_hz = self.f_high_hz;
        channel.delta_f_hz = self.delta_f_hz;
        channel.n_samples = self.n_samples;
        channel.validate()?;
        Ok(channel)
    }

    pub fn from_channel(channel: &NoiseChannelSpec) -> Self {
        Self {
            amplitude: channel.amplitude,
            f_low_hz: channel.f_low_hz,
            f_high_hz: channel.f_high_hz,
            delta_f_hz: channel.delta_f_hz,
            n_samples: channel.n_samples,
        }
    }
}

/// Top-level configuration tree. Every section is optional; each command
/// requires the sections it consumes.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub circuit: Option<CircuitConfig>,
    pub spin: Option<SpinConfig>,
    pub resonator: Option<ResonatorConfig>,
    pub disorder: Option<DisorderModel>,
    pub quasiparticle: Option<QuasiparticleConfig>,
    pub noise_charge: Option<NoiseConfig>,
    pub noise_flux: Option<NoiseConfig>,
    pub noise_critical_current: Option<NoiseConfig>,
    pub initialization: Option<FluxRampSchedule>,
    pub stirap: Option<StirapSchedule>,
}

/// Top-level sections and the keys each accepts, used to report every
/// unknown key at once (serde alone stops at the first).
const KNOWN_KEYS: &[(&str, &[&str])] = &[
    (
        "circuit",
        &[
            "E_Jr_GHz",
            "E_Cr_GHz",
            "E_Ja_GHz",
            "E_Ca_GHz",
            "E_Jl_GHz",
            "E_Cl_GHz",
            "inner_fluxes_Phi0",
            "outer_flux_Phi0",
            "Ng_cooper_pairs",
            "n_max",
            "geometric_cap_fraction",
            "charge_resolution",
            "ej_multipliers_radial",
            "ej_multipliers_azimuthal",
            "ej_multipliers_diametric",
            "cap_multipliers_radial",
            "cap_multipliers_azimuthal",
            "cap_multipliers_diametric",
        ],
    ),
    (
        "spin",
        &[
            "M",
            "t_GHz",
            "lambda_GHz",
            "zeta_GHz",
            "eta_GHz",
            "omega_field_GHz",
            "mu_GHz",
            "nu_GHz",
        ],
    ),
    (
        "resonator",
        &[
            "L_H",
            "C_F",
            "kappa_over_2pi_Hz",
            "fock_cutoff",
            "shared_inductance_H",
        ],
    ),
    (
        "disorder",
        &[
            "sigma_junction",
            "sigma_loop",
            "sigma_gate",
            "junctions_enabled",
            "loops_enabled",
            "gates_enabled",
        ],
    ),
    (
        "quasiparticle",
        &["x_qp", "temperature_K", "mean_gap_GHz", "delta_gap_GHz"],
    ),
    (
        "noise_charge",
        &["amplitude", "f_low_Hz", "f_high_Hz", "delta_f_Hz", "n_samples"],
    ),
    (
        "noise_flux",
        &["amplitude", "f_low_Hz", "f_high_Hz", "delta_f_Hz", "n_samples"],
    ),
    (
        "noise_critical_current",
        &["amplitude", "f_low_Hz", "f_high_Hz", "delta_f_Hz", "n_samples"],
    ),
    (
        "initialization",
        &[
            "target_scale",
            "ramp_up_us",
            "hold_us",
            "ramp_down_us",
            "flux_samples",
        ],
    ),
    (
        "stirap",
        &[
            "sigma_ns",
            "delay_ns",
            "pump_peak_mhz",
            "stokes_peak_mhz",
            "intermediate_level",
            "tail_sigmas",
        ],
    ),
];

/// Collect every unrecognized key path in the tree.
fn unknown_keys(tree: &toml::Value) -> Vec<String> {
    let mut bad = Vec::new();
    let Some(table) = tree.as_table() else {
        return vec!["<root is not a table>".into()];
    };
    for (section, value) in table {
        match KNOWN_KEYS.iter().find(|(name, _)| name == section) {
            None => bad.push(section.clone()),
            Some((_, keys)) => {
                if let Some(inner) = value.as_table() {
                    for key in inner.keys() {
                        if !keys.contains(&key.as_str()) {
                            bad.push(format!("{section}.{key}"));
                        }
                    }
                } else {
                    bad.push(section.clone());
                }
            }
        }
    }
    bad
}

impl RunConfig {
    /// Parse a configuration tree, reporting all unknown keys at once.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let tree: toml::Value = text
            .parse()
            .map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        Self::from_tree(&tree)
    }

    pub fn from_tree(tree: &toml::Value) -> Result<Self> {
        let bad = unknown_keys(tree);
        if !bad.is_empty() {
            return Err(Error::Config(format!(
                "unknown configuration keys: {}",
                bad.join(", ")
            )));
        }
        tree.clone()
            .try_into()
            .map_err(|e| Error::Config(format!("config validation error: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<(Self, toml::Value)> {
        let text = std::fs::read_to_string(path)?;
        let tree: toml::Value = text
            .parse()
            .map_err(|e| Error::Config(format!("{}: parse error: {e}", path.display())))?;
        Ok((Self::from_tree(&tree)?, tree))
    }

    /// Section accessors that turn a missing section into a clear error.
    pub fn circuit_spec(&self) -> Result<CircuitSpec> {
        self.circuit
            .as_ref()
            .ok_or_else(|| Error::Config("missing [circuit] section".into()))?
            .to_spec()
    }

    pub fn spin_spec(&self) -> Result<SpinChainSpec> {
        self.spin
            .as_ref()
            .ok_or_else(|| Error::Config("missing [spin] section".into()))?
            .to_spec()
    }

    pub fn resonator_spec(&self) -> Result<ResonatorSpec> {
        self.resonator
            .as_ref()
            .ok_or_else(|| Error::Config("missing [resonator] section".into()))?
            .to_spec()
    }

    pub fn noise_channel(&self, kind: NoiseKind) -> Result<NoiseChannelSpec> {
        let section = match kind {
            NoiseKind::Charge => &self.noise_charge,
            NoiseKind::Flux => &self.noise_flux,
            NoiseKind::CriticalCurrent => &self.noise_critical_current,
        };
        match section {
            Some(cfg) => cfg.to_channel(kind),
            None => Ok(NoiseChannelSpec::defaults(kind)),
        }
    }
}

/// Apply one `dotted.path=value` override to a TOML tree. The value is
/// parsed as a TOML literal, falling back to a plain string.
pub fn apply_override(tree: &mut toml::Value, assignment: &str) -> Result<()> {
    let (path, raw_value) = assignment.split_once('=').ok_or_else(|| {
        Error::Config(format!(
            "override '{assignment}' must look like section.key=value"
        ))
    })?;
    let parsed: toml::Value = match format!("v = {raw_value}").parse::<toml::Value>() {
        Ok(tbl) => tbl.as_table().unwrap()["v"].clone(),
        Err(_) => toml::Value::String(raw_value.trim().to_string()),
    };
    let segments: Vec<&str> = path.trim().split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::Config(format!("override path '{path}' is malformed")));
    }
    let mut node = tree;
    for segment in &segments[..segments.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override path '{path}' crosses a non-table")))?;
        node = table
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(toml::map::Map::new()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| Error::Config(format!("override path '{path}' crosses a non-table")))?;
    table.insert(segments.last().unwrap().to_string(), parsed);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SEC3: &str = r#"
[circuit]
E_Jr_GHz = 2.5
E_Cr_GHz = 5.0
E_Ja_GHz = 5.0
E_Ca_GHz = 2.5
E_Jl_GHz = 5.55
E_Cl_GHz = 2.25
inner_fluxes_Phi0 = [0.5, 0.5, 0.5, 0.5]
outer_flux_Phi0 = 0.5
Ng_cooper_pairs = [0.5, 0.5, 0.5, 0.5]
n_max = 7
"#;

    #[test]
    fn paper_parameters_round_trip() {
        let config = RunConfig::from_toml_str(SEC3).unwrap();
        let spec = config.circuit_spec().unwrap();
        assert_eq!(spec.ej_radial_ghz, 2.5);
        assert_eq!(spec.ec_diametric_ghz, 2.25);
        assert_eq!(spec.gate_charges, [0.5; 4]);
        let back = CircuitConfig::from_spec(&spec);
        assert_eq!(back.e_jl_ghz, 5.55);
    }

    #[test]
    fn unknown_keys_are_all_reported() {
        let text = format!("{SEC3}\nbogus_section = 1\n[spin]\nM = 4\nt_GHz = 1.0\nlambda_GHz = 0.5\nnot_a_key = 2\n");
        let err = RunConfig::from_toml_str(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus_section"), "{msg}");
        assert!(msg.contains("spin.not_a_key"), "{msg}");
    }

    #[test]
    fn dotted_override_replaces_nested_value() {
        let mut tree: toml::Value = SEC3.parse().unwrap();
        apply_override(&mut tree, "circuit.n_max=5").unwrap();
        apply_override(&mut tree, "circuit.outer_flux_Phi0=0.25").unwrap();
        let config = RunConfig::from_tree(&tree).unwrap();
        let spec = config.circuit_spec().unwrap();
        assert_eq!(spec.n_max, 5);
        assert_eq!(spec.outer_flux_phi0, 0.25);
    }

    #[test]
    fn override_requires_assignment_syntax() {
        let mut tree: toml::Value = SEC3.parse().unwrap();
        assert!(apply_override(&mut tree, "circuit.n_max").is_err());
    }

    #[test]
    fn missing_section_is_a_config_error() {
        let config = RunConfig::from_toml_str(SEC3).unwrap();
        assert!(matches!(config.spin_spec(), Err(Error::Config(_))));
    }
}
