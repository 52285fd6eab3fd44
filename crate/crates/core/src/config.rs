//! Run configuration: a flat-section TOML document, validated strictly
//! (unknown keys are errors) and echoed back into every output so any run
//! can be reproduced from its own header.

use crate::geometry::{lookup_preset, preset_names, GeometryParams, OpticalGeometry};
use crate::lattice::{FockConfiguration, InitialState, LatticeSpec};
use crate::trajectory::{SnapshotCadence, StopRule, TrajectorySetup};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config key {key}: {reason}")]
    Key { key: &'static str, reason: String },
}

fn key_err<T>(key: &'static str, reason: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Key {
        key,
        reason: reason.into(),
    })
}

mod complex_field {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(super) enum Raw {
        Real(f64),
        Pair([f64; 2]),
    }

    impl Raw {
        pub(super) fn into_complex(self) -> Complex64 {
            match self {
                Raw::Real(x) => Complex64::new(x, 0.0),
                Raw::Pair([re, im]) => Complex64::new(re, im),
            }
        }
    }

    pub fn serialize<S: Serializer>(c: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [c.re, c.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        Ok(Raw::deserialize(d)?.into_complex())
    }
}

mod complex_vec_field {
    use super::complex_field::Raw;
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[allow(clippy::ref_option)]
    pub fn serialize<S: Serializer>(
        v: &Option<Vec<Complex64>>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let pairs: Option<Vec<[f64; 2]>> = v
            .as_ref()
            .map(|v| v.iter().map(|c| [c.re, c.im]).collect());
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Option<Vec<Complex64>>, D::Error> {
        let raw: Option<Vec<Raw>> = Option::deserialize(d)?;
        Ok(raw.map(|v| v.into_iter().map(Raw::into_complex).collect()))
    }
}

/// Illumination pattern of the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Contiguous,
    Alternating,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    /// Atom number N.
    pub atoms: u64,
    /// Site count M.
    pub sites: usize,
    /// How the illuminated region is laid out. Default: contiguous.
    #[serde(default = "default_pattern")]
    pub pattern: Pattern,
    /// Illuminated site count K (contiguous pattern only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub illuminated: Option<usize>,
    /// Explicit mask (explicit pattern only), length M.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<bool>>,
}

fn default_pattern() -> Pattern {
    Pattern::Contiguous
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomicCouplings {
    pub g0: f64,
    pub g1: f64,
    pub delta_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    /// Registered preset name; see `preset_names()`.
    pub preset: String,
    /// U_10 in frequency units. Default 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_u10: Option<f64>,
    /// U_11 in frequency units. Default 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_u11: Option<f64>,
    /// Optional (g0, g1, delta_a) triple; fills the couplings when they are
    /// not given directly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atomic: Option<AtomicCouplings>,
    /// Probe amplitude a0, a real number or `[re, im]`. Default 1.
    #[serde(default = "default_probe", with = "complex_field")]
    pub probe_amplitude: Complex64,
    /// Mirror drive eta, a real number or `[re, im]`. Default 0.
    #[serde(default = "default_zero_complex", with = "complex_field")]
    pub mirror_drive: Complex64,
    /// Probe-cavity detuning Delta_p. Default 0.
    #[serde(default)]
    pub detuning: f64,
    /// Cavity decay rate kappa > 0. Default 1 (rates in units of kappa).
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Drop the U_11 D_11 shift for transverse probing. Defaults to the
    /// preset's convention (true for transverse presets).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neglect_shift: Option<bool>,
    /// Per-site u_1* u_0 products (custom preset only).
    #[serde(
        default,
        with = "complex_vec_field",
        skip_serializing_if = "Option::is_none"
    )]
    pub mode_products_10: Option<Vec<Complex64>>,
    /// Per-site |u_1|^2 products (custom preset only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_products_11: Option<Vec<f64>>,
}

fn default_probe() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn default_zero_complex() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn default_kappa() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Superfluid,
    Mott,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub occupations: Vec<u64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default = "default_initial_kind")]
    pub kind: InitialKind,
    /// Squared amplitudes per configuration (custom kind only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<ComponentSpec>>,
}

fn default_initial_kind() -> InitialKind {
    InitialKind::Superfluid
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            kind: InitialKind::Superfluid,
            components: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Master seed of the deterministic stream.
    pub seed: u64,
    /// Stream index within the seed; ensembles use streams 0..n. Default 0.
    #[serde(default)]
    pub stream: u64,
    /// Hard horizon in units of 1/kappa.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_time: Option<f64>,
    /// Hard horizon in dimensionless tau units (transverse probing only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tau: Option<f64>,
    /// Collapse threshold epsilon; 0 disables early stopping. Default 1e-3.
    #[serde(default = "default_epsilon")]
    pub collapse_epsilon: f64,
    /// Geometric snapshot count between first count and stop. Default 64.
    #[serde(default = "default_snapshot_count")]
    pub snapshot_count: usize,
    /// Explicit snapshot times in 1/kappa units (overrides the count).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_times: Option<Vec<f64>>,
    /// Explicit snapshot times in tau units (transverse probing only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_taus: Option<Vec<f64>>,
}

fn default_epsilon() -> f64 {
    1e-3
}

fn default_snapshot_count() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    /// Number of trajectories, run on streams 0..n.
    pub trajectories: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    /// Number of random detection records to compare.
    #[serde(default = "default_records")]
    pub records: usize,
    /// Checkpoints per record.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    /// Record horizon in 1/kappa units.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Largest count number drawn for a record.
    #[serde(default = "default_max_counts")]
    pub max_counts: u64,
    /// Ceiling on enumerated configurations.
    #[serde(default = "default_cap")]
    pub enumeration_cap: u64,
}

fn default_records() -> usize {
    50
}

fn default_checkpoints() -> usize {
    20
}

fn default_horizon() -> f64 {
    5.0
}

fn default_max_counts() -> u64 {
    6
}

fn default_cap() -> u64 {
    crate::lattice::DEFAULT_ENUMERATION_CAP
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            records: default_records(),
            checkpoints: default_checkpoints(),
            horizon: default_horizon(),
            max_counts: default_max_counts(),
            enumeration_cap: default_cap(),
        }
    }
}

/// The full run configuration, after defaults are materialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: LatticeSection,
    pub geometry: GeometrySection,
    #[serde(default)]
    pub initial: InitialSection,
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
}

/// Parses and validates a config document, materializing all defaults so
/// the echo re-parses to an identical value.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut config: RunConfig = toml::from_str(text)?;
    normalize(&mut config)?;
    Ok(config)
}

fn normalize(config: &mut RunConfig) -> Result<(), ConfigError> {
    // lattice
    let lat = &config.lattice;
    if lat.atoms == 0 {
        return key_err("lattice.atoms", "must be at least 1");
    }
    if lat.sites == 0 {
        return key_err("lattice.sites", "must be at least 1");
    }
    match lat.pattern {
        Pattern::Contiguous => {
            let k = lat
                .illuminated
                .ok_or(ConfigError::Key {
                    key: "lattice.illuminated",
                    reason: "required for the contiguous pattern".into(),
                })?;
            if k == 0 || k > lat.sites {
                return key_err(
                    "lattice.illuminated",
                    format!("must lie in 1..={}", lat.sites),
                );
            }
            if lat.mask.is_some() {
                return key_err("lattice.mask", "only valid with pattern = \"explicit\"");
            }
        }
        Pattern::Alternating => {
            if !lat.sites.is_multiple_of(2) {
                return key_err("lattice.sites", "alternating pattern requires an even count");
            }
            if lat.illuminated.is_some() {
                return key_err(
                    "lattice.illuminated",
                    "only valid with pattern = \"contiguous\"",
                );
            }
            if lat.mask.is_some() {
                return key_err("lattice.mask", "only valid with pattern = \"explicit\"");
            }
        }
        Pattern::Explicit => {
            let mask = lat.mask.as_ref().ok_or(ConfigError::Key {
                key: "lattice.mask",
                reason: "required for the explicit pattern".into(),
            })?;
            if mask.len() != lat.sites {
                return key_err(
                    "lattice.mask",
                    format!("length {} does not match sites = {}", mask.len(), lat.sites),
                );
            }
            if !mask.iter().any(|&b| b) {
                return key_err("lattice.mask", "at least one site must be illuminated");
            }
            if lat.illuminated.is_some() {
                return key_err(
                    "lattice.illuminated",
                    "only valid with pattern = \"contiguous\"",
                );
            }
        }
    }

    // geometry
    let geo = &mut config.geometry;
    let preset = lookup_preset(&geo.preset).ok_or(ConfigError::Key {
        key: "geometry.preset",
        reason: format!("unknown preset {:?}; known: {:?}", geo.preset, preset_names()),
    })?;
    if geo.kappa <= 0.0 || !geo.kappa.is_finite() {
        return key_err("geometry.kappa", format!("must be positive, got {}", geo.kappa));
    }
    if !geo.detuning.is_finite() {
        return key_err("geometry.detuning", "must be finite");
    }
    if !geo.probe_amplitude.is_finite() {
        return key_err("geometry.probe_amplitude", "must be finite");
    }
    if !geo.mirror_drive.is_finite() {
        return key_err("geometry.mirror_drive", "must be finite");
    }
    if let Some(atomic) = &geo.atomic {
        if geo.coupling_u10.is_some() || geo.coupling_u11.is_some() {
            return key_err(
                "geometry.atomic",
                "mutually exclusive with coupling_u10/coupling_u11",
            );
        }
        if atomic.delta_a == 0.0 || !atomic.delta_a.is_finite() {
            return key_err("geometry.atomic.delta_a", "must be finite and nonzero");
        }
        let (u10, u11) =
            crate::geometry::couplings_from_atomic(atomic.g0, atomic.g1, atomic.delta_a)
                .map_err(|e| ConfigError::Key {
                    key: "geometry.atomic",
                    reason: e.to_string(),
                })?;
        geo.coupling_u10 = Some(u10);
        geo.coupling_u11 = Some(u11);
        geo.atomic = None;
    }
    let u10 = *geo.coupling_u10.get_or_insert(1.0);
    let u11 = *geo.coupling_u11.get_or_insert(0.0);
    if !u10.is_finite() {
        return key_err("geometry.coupling_u10", "must be finite");
    }
    if !u11.is_finite() {
        return key_err("geometry.coupling_u11", "must be finite");
    }
    let is_custom = preset.name() == "custom";
    if !is_custom && (geo.mode_products_10.is_some() || geo.mode_products_11.is_some()) {
        return key_err(
            "geometry.mode_products_10",
            "mode products are only valid with preset = \"custom\"",
        );
    }
    if preset.name() == "mirror_probe" && geo.neglect_shift == Some(true) {
        return key_err(
            "geometry.neglect_shift",
            "mirror probing always keeps the mode shift; it is the signal",
        );
    }
    // materialize the preset's neglect_shift convention
    if geo.neglect_shift.is_none() {
        geo.neglect_shift = Some(matches!(
            preset.name(),
            "diffraction_maximum" | "diffraction_minimum"
        ));
    }

    // initial state
    match config.initial.kind {
        InitialKind::Custom => {
            if config.initial.components.is_none() {
                return key_err(
                    "initial.components",
                    "required when initial.kind = \"custom\"",
                );
            }
        }
        _ => {
            if config.initial.components.is_some() {
                return key_err(
                    "initial.components",
                    "only valid when initial.kind = \"custom\"",
                );
            }
        }
    }

    // run section
    let run = &config.run;
    match (run.max_time, run.max_tau) {
        (None, None) => {
            return key_err("run.max_time", "either max_time or max_tau is required")
        }
        (Some(_), Some(_)) => {
            return key_err("run.max_time", "mutually exclusive with run.max_tau")
        }
        (Some(t), None) => {
            if !t.is_finite() || t < 0.0 {
                return key_err("run.max_time", "must be nonnegative and finite");
            }
        }
        (None, Some(tau)) => {
            if !tau.is_finite() || tau < 0.0 {
                return key_err("run.max_tau", "must be nonnegative and finite");
            }
        }
    }
    if !(run.collapse_epsilon >= 0.0 && run.collapse_epsilon < 1.0) {
        return key_err(
            "run.collapse_epsilon",
            "must lie in [0, 1); 0 disables early stopping",
        );
    }
    if run.snapshot_times.is_some() && run.snapshot_taus.is_some() {
        return key_err(
            "run.snapshot_times",
            "mutually exclusive with run.snapshot_taus",
        );
    }
    for (key, list) in [
        ("run.snapshot_times", &run.snapshot_times),
        ("run.snapshot_taus", &run.snapshot_taus),
    ] {
        if let Some(times) = list {
            if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
                return key_err(key, "entries must be nonnegative and finite");
            }
        }
    }

    if let Some(ensemble) = &config.ensemble {
        if ensemble.trajectories == 0 {
            return key_err("ensemble.trajectories", "must be at least 1");
        }
    }
    if let Some(oracle) = &config.oracle {
        if oracle.records == 0 {
            return key_err("oracle.records", "must be at least 1");
        }
        if oracle.checkpoints == 0 {
            return key_err("oracle.checkpoints", "must be at least 1");
        }
        if oracle.horizon <= 0.0 || !oracle.horizon.is_finite() {
            return key_err("oracle.horizon", "must be positive and finite");
        }
    }
    Ok(())
}

impl RunConfig {
    /// Serializes the effective configuration; parsing the echo yields an
    /// identical `RunConfig`.
    pub fn echo_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn lattice_spec(&self) -> Result<LatticeSpec, ConfigError> {
        let lat = &self.lattice;
        let wrap = |e: crate::lattice::LatticeError| ConfigError::Key {
            key: "lattice",
            reason: e.to_string(),
        };
        match lat.pattern {
            Pattern::Contiguous => {
                LatticeSpec::contiguous(lat.atoms, lat.sites, lat.illuminated.expect("validated"))
                    .map_err(wrap)
            }
            Pattern::Alternating => LatticeSpec::alternating(lat.atoms, lat.sites).map_err(wrap),
            Pattern::Explicit => {
                LatticeSpec::new(lat.atoms, lat.mask.clone().expect("validated")).map_err(wrap)
            }
        }
    }

    pub fn geometry_params(&self) -> GeometryParams {
        let geo = &self.geometry;
        GeometryParams {
            coupling_u10: geo.coupling_u10.unwrap_or(1.0),
            coupling_u11: geo.coupling_u11.unwrap_or(0.0),
            probe_amplitude_a0: geo.probe_amplitude,
            mirror_drive_eta: geo.mirror_drive,
            detuning_dp: geo.detuning,
            kappa: geo.kappa,
            neglect_shift: geo.neglect_shift,
            mode_products_10: geo.mode_products_10.clone(),
            mode_products_11: geo.mode_products_11.clone(),
        }
    }

    pub fn build_geometry(&self, lattice: &LatticeSpec) -> Result<OpticalGeometry, ConfigError> {
        let preset = lookup_preset(&self.geometry.preset).expect("validated");
        preset
            .build(lattice, &self.geometry_params())
            .map_err(|e| ConfigError::Key {
                key: "geometry",
                reason: e.to_string(),
            })
    }

    pub fn initial_state(&self) -> InitialState {
        match self.initial.kind {
            InitialKind::Superfluid => InitialState::Superfluid,
            InitialKind::Mott => InitialState::Mott,
            InitialKind::Custom => InitialState::Custom(
                self.initial
                    .components
                    .as_ref()
                    .expect("validated")
                    .iter()
                    .map(|c| (FockConfiguration::new(c.occupations.clone()), c.weight))
                    .collect(),
            ),
        }
    }

    /// Stop rule in `1/kappa` units; `max_tau` is converted through the
    /// geometry's tau scale.
    pub fn stop_rule(&self, geometry: &OpticalGeometry) -> Result<StopRule, ConfigError> {
        let max_time = match (self.run.max_time, self.run.max_tau) {
            (Some(t), None) => t,
            (None, Some(tau)) => {
                let scale = geometry.tau_scale().ok_or(ConfigError::Key {
                    key: "run.max_tau",
                    reason: "tau units need transverse probing".into(),
                })?;
                tau / scale
            }
            _ => unreachable!("validated"),
        };
        let epsilon = if self.run.collapse_epsilon == 0.0 {
            None
        } else {
            Some(self.run.collapse_epsilon)
        };
        StopRule::new(max_time, epsilon).map_err(|e| ConfigError::Key {
            key: "run",
            reason: e.to_string(),
        })
    }

    pub fn cadence(&self) -> SnapshotCadence {
        if let Some(taus) = &self.run.snapshot_taus {
            SnapshotCadence::Taus(taus.clone())
        } else if let Some(times) = &self.run.snapshot_times {
            SnapshotCadence::Times(times.clone())
        } else {
            SnapshotCadence::Geometric(self.run.snapshot_count)
        }
    }

    /// Assembles the full trajectory setup for this configuration.
    pub fn trajectory_setup(&self) -> Result<(LatticeSpec, OpticalGeometry, TrajectorySetup), ConfigError> {
        let lattice = self.lattice_spec()?;
        let geometry = self.build_geometry(&lattice)?;
        let stop = self.stop_rule(&geometry)?;
        let setup = TrajectorySetup::build(
            &lattice,
            &geometry,
            &self.initial_state(),
            stop,
            self.cadence(),
        )
        .map_err(|e| ConfigError::Key {
            key: "run",
            reason: e.to_string(),
        })?;
        Ok((lattice, geometry, setup))
    }
}
