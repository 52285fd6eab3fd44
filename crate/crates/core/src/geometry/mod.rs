//! Optical configuration: per-site mode products, drives, and the mapping
//! from the lattice statistic `z` to steady-state light amplitudes and
//! branch decay/phase rates.

pub mod presets;

use crate::lattice::LatticeSpec;
use crate::zdist::ZDistribution;
use num_complex::Complex64;
use thiserror::Error;

pub use presets::{lookup_preset, preset_names, preset_registry, ProbePreset};

/// Tolerance for recognizing integer-valued mode products.
const INTEGER_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("kappa must be positive, got {0}")]
    NonPositiveKappa(f64),
    #[error("parameter {name} must be finite")]
    NonFinite { name: &'static str },
    #[error("preset {preset} requires a transverse probe (a0 != 0) and no mirror drive")]
    TransverseDrive { preset: &'static str },
    #[error("preset mirror_probe requires a mirror drive (eta != 0) and no transverse probe")]
    MirrorDrive,
    #[error("no drive: both a0 and eta are zero")]
    NoDrive,
    #[error("mixed drives (a0 != 0 and eta != 0) are supported only by the full oracle")]
    MixedDrive,
    #[error("custom preset requires mode_products_10 and mode_products_11")]
    MissingModeProducts,
    #[error("mode products have length {got}, expected {expected} sites")]
    ModeProductLength { got: usize, expected: usize },
    #[error("mode products must vanish outside the illuminated mask (site {site})")]
    ProductOutsideMask { site: usize },
    #[error("unknown geometry preset {0:?}")]
    UnknownPreset(String),
    #[error("mode products are not integer-valued; only the full oracle applies")]
    NonIntegerWeights,
    #[error("cavity-atom detuning must be nonzero")]
    ZeroAtomDetuning,
    #[error(
        "transverse probing with the mode shift retained (neglect_shift = false, U_11 != 0) \
         carries two independent statistics; only the full oracle applies"
    )]
    ShiftNotNeglected,
}

/// Which kind of probing the geometry realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// `a0 != 0`, `eta = 0`; the driving statistic is `D_10`.
    Transverse,
    /// `eta != 0`, `a0 = 0`; the driving statistic is `D_11`.
    Mirror,
    /// Both drives present; only the configuration-space oracle applies.
    Mixed,
}

/// Named preset families; `Custom` covers user-supplied mode products.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    DiffractionMaximum,
    DiffractionMinimum,
    MirrorProbe,
    Custom,
}

impl PresetKind {
    pub fn name(self) -> &'static str {
        match self {
            PresetKind::DiffractionMaximum => "diffraction_maximum",
            PresetKind::DiffractionMinimum => "diffraction_minimum",
            PresetKind::MirrorProbe => "mirror_probe",
            PresetKind::Custom => "custom",
        }
    }
}

/// Numeric geometry parameters, independent of the preset.
///
/// Rates are frequencies in units of choice; the engine reports times in
/// `1/kappa`. `U_lm` couplings may be given directly or derived from the
/// atom-light couplings via [`couplings_from_atomic`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryParams {
    pub coupling_u10: f64,
    pub coupling_u11: f64,
    pub probe_amplitude_a0: Complex64,
    pub mirror_drive_eta: Complex64,
    pub detuning_dp: f64,
    pub kappa: f64,
    /// Drop the `U_11 D_11` term for transverse probing. `None` picks the
    /// preset default (true for transverse presets).
    pub neglect_shift: Option<bool>,
    /// Per-site `u_1*(r_j) u_0(r_j)`, required by the custom preset.
    pub mode_products_10: Option<Vec<Complex64>>,
    /// Per-site `|u_1(r_j)|^2`, required by the custom preset.
    pub mode_products_11: Option<Vec<f64>>,
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self {
            coupling_u10: 1.0,
            coupling_u11: 0.0,
            probe_amplitude_a0: Complex64::new(1.0, 0.0),
            mirror_drive_eta: Complex64::new(0.0, 0.0),
            detuning_dp: 0.0,
            kappa: 1.0,
            neglect_shift: None,
            mode_products_10: None,
            mode_products_11: None,
        }
    }
}

/// `U_10` and `U_11` from the atom-light couplings `g_0`, `g_1` and the
/// cavity-atom detuning: `U_lm = g_l g_m / Delta_a`.
pub fn couplings_from_atomic(g0: f64, g1: f64, delta_a: f64) -> Result<(f64, f64), GeometryError> {
    if delta_a == 0.0 {
        return Err(GeometryError::ZeroAtomDetuning);
    }
    Ok((g1 * g0 / delta_a, g1 * g1 / delta_a))
}

/// A fully resolved optical geometry for a specific lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalGeometry {
    kind: PresetKind,
    mode_products_10: Vec<Complex64>,
    mode_products_11: Vec<f64>,
    coupling_u10: f64,
    coupling_u11: f64,
    probe_amplitude_a0: Complex64,
    mirror_drive_eta: Complex64,
    detuning_dp: f64,
    kappa: f64,
    neglect_shift: bool,
}

impl OpticalGeometry {
    pub(crate) fn assemble(
        kind: PresetKind,
        lattice: &LatticeSpec,
        params: &GeometryParams,
        mode_products_10: Vec<Complex64>,
        mode_products_11: Vec<f64>,
        neglect_shift: bool,
    ) -> Result<Self, GeometryError> {
        if params.kappa <= 0.0 || params.kappa.is_nan() {
            return Err(GeometryError::NonPositiveKappa(params.kappa));
        }
        for (name, value) in [
            ("coupling_u10", params.coupling_u10),
            ("coupling_u11", params.coupling_u11),
            ("detuning_dp", params.detuning_dp),
            ("kappa", params.kappa),
        ] {
            if !value.is_finite() {
                return Err(GeometryError::NonFinite { name });
            }
        }
        if !params.probe_amplitude_a0.is_finite() {
            return Err(GeometryError::NonFinite {
                name: "probe_amplitude_a0",
            });
        }
        if !params.mirror_drive_eta.is_finite() {
            return Err(GeometryError::NonFinite {
                name: "mirror_drive_eta",
            });
        }
        let sites = lattice.n_sites();
        if mode_products_10.len() != sites {
            return Err(GeometryError::ModeProductLength {
                got: mode_products_10.len(),
                expected: sites,
            });
        }
        if mode_products_11.len() != sites {
            return Err(GeometryError::ModeProductLength {
                got: mode_products_11.len(),
                expected: sites,
            });
        }
        for (j, lit) in lattice.illuminated().iter().enumerate() {
            if !lit && (mode_products_10[j].norm() != 0.0 || mode_products_11[j] != 0.0) {
                return Err(GeometryError::ProductOutsideMask { site: j });
            }
        }
        Ok(Self {
            kind,
            mode_products_10,
            mode_products_11,
            coupling_u10: params.coupling_u10,
            coupling_u11: params.coupling_u11,
            probe_amplitude_a0: params.probe_amplitude_a0,
            mirror_drive_eta: params.mirror_drive_eta,
            detuning_dp: params.detuning_dp,
            kappa: params.kappa,
            neglect_shift,
        })
    }

    pub fn kind(&self) -> PresetKind {
        self.kind
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn detuning(&self) -> f64 {
        self.detuning_dp
    }

    pub fn coupling_u10(&self) -> f64 {
        self.coupling_u10
    }

    pub fn coupling_u11(&self) -> f64 {
        self.coupling_u11
    }

    pub fn probe_amplitude(&self) -> Complex64 {
        self.probe_amplitude_a0
    }

    pub fn mirror_drive(&self) -> Complex64 {
        self.mirror_drive_eta
    }

    pub fn neglect_shift(&self) -> bool {
        self.neglect_shift
    }

    pub fn mode_products_10(&self) -> &[Complex64] {
        &self.mode_products_10
    }

    pub fn mode_products_11(&self) -> &[f64] {
        &self.mode_products_11
    }

    pub fn scenario(&self) -> Result<Scenario, GeometryError> {
        let has_probe = self.probe_amplitude_a0.norm() != 0.0;
        let has_mirror = self.mirror_drive_eta.norm() != 0.0;
        match (has_probe, has_mirror) {
            (true, false) => Ok(Scenario::Transverse),
            (false, true) => Ok(Scenario::Mirror),
            (true, true) => Ok(Scenario::Mixed),
            (false, false) => Err(GeometryError::NoDrive),
        }
    }

    /// Proportionality constant of the maximum-geometry amplitudes,
    /// `alpha_z = C z` with `C = i U_10 a_0 / (i Dp - kappa)`.
    pub fn transverse_scale(&self) -> Complex64 {
        Complex64::i() * self.coupling_u10 * self.probe_amplitude_a0
            / (Complex64::i() * self.detuning_dp - self.kappa)
    }

    /// Dimensionless time per unit `t`: `tau = 2 |C|^2 kappa t` for
    /// transverse probing; undefined for mirror probing.
    pub fn tau_scale(&self) -> Option<f64> {
        match self.scenario() {
            Ok(Scenario::Transverse) => {
                Some(2.0 * self.transverse_scale().norm_sqr() * self.kappa)
            }
            _ => None,
        }
    }

    /// Steady-state amplitude for a configuration with statistics
    /// `(D_10, D_11)`, the full Lorentzian without any neglect.
    pub fn full_alpha(&self, d10: Complex64, d11: f64) -> Complex64 {
        let numerator =
            self.mirror_drive_eta - Complex64::i() * self.coupling_u10 * self.probe_amplitude_a0 * d10;
        let denominator = Complex64::new(self.kappa, self.coupling_u11 * d11 - self.detuning_dp);
        numerator / denominator
    }

    /// Steady-state amplitude as a function of the reduced statistic `z`.
    ///
    /// Transverse probing feeds `z` into `D_10` (the `D_11` shift is
    /// dropped); mirror probing feeds `z` into `D_11`.
    pub fn steady_alpha(&self, z: i64) -> Complex64 {
        match self.scenario() {
            Ok(Scenario::Mirror) => self.full_alpha(Complex64::new(0.0, 0.0), z as f64),
            _ => {
                let numerator =
                    -Complex64::i() * self.coupling_u10 * self.probe_amplitude_a0 * z as f64;
                let denominator = Complex64::new(self.kappa, -self.detuning_dp);
                numerator / denominator
            }
        }
    }

    /// Phase accumulation rate of a branch: the purely imaginary residue of
    /// the drive terms, `Im(eta alpha* - i U_10 a0 D_10 alpha*)`.
    fn phase_rate(&self, z: i64, alpha: Complex64) -> f64 {
        let d10 = match self.scenario() {
            Ok(Scenario::Mirror) => Complex64::new(0.0, 0.0),
            _ => Complex64::new(z as f64, 0.0),
        };
        (self.mirror_drive_eta * alpha.conj()
            - Complex64::i() * self.coupling_u10 * self.probe_amplitude_a0 * d10 * alpha.conj())
        .im
    }

    /// Per-site weights `w_j` making the driving statistic `z = sum w_j q_j`,
    /// with a validity flag: false when the relevant mode products are not
    /// integer-valued (those geometries are oracle-only).
    pub fn reduction_weights(&self) -> Result<(Vec<i64>, bool), GeometryError> {
        let scenario = self.scenario()?;
        let mut weights = Vec::with_capacity(self.mode_products_10.len());
        let mut valid = true;
        match scenario {
            Scenario::Mixed => return Err(GeometryError::MixedDrive),
            Scenario::Transverse => {
                if !self.neglect_shift && self.coupling_u11 != 0.0 {
                    return Err(GeometryError::ShiftNotNeglected);
                }
                for p in &self.mode_products_10 {
                    let rounded = p.re.round();
                    if p.im.abs() > INTEGER_TOL || (p.re - rounded).abs() > INTEGER_TOL {
                        valid = false;
                    }
                    weights.push(rounded as i64);
                }
            }
            Scenario::Mirror => {
                for p in &self.mode_products_11 {
                    let rounded = p.round();
                    if (p - rounded).abs() > INTEGER_TOL {
                        valid = false;
                    }
                    weights.push(rounded as i64);
                }
            }
        }
        Ok((weights, valid))
    }
}

/// Per-branch steady-state amplitudes and rates on a shared `z` grid.
///
/// `decay_rate[z] = 2 |alpha_z|^2 kappa` governs the no-count weight decay;
/// `phase_rate` only rotates branch phases and never changes weights.
#[derive(Debug, Clone)]
pub struct BranchSet {
    z_min: i64,
    step: i64,
    alpha: Vec<Complex64>,
    decay_rate: Vec<f64>,
    phase_rate: Vec<f64>,
}

impl BranchSet {
    /// Rates for every point of a distribution's grid.
    pub fn for_grid(grid: &ZDistribution, geometry: &OpticalGeometry) -> Self {
        let mut alpha = Vec::with_capacity(grid.len());
        let mut decay_rate = Vec::with_capacity(grid.len());
        let mut phase_rate = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let z = grid.z_at(i);
            let a = geometry.steady_alpha(z);
            alpha.push(a);
            decay_rate.push(2.0 * a.norm_sqr() * geometry.kappa());
            phase_rate.push(geometry.phase_rate(z, a));
        }
        Self {
            z_min: grid.z_min(),
            step: grid.step(),
            alpha,
            decay_rate,
            phase_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn z_min(&self) -> i64 {
        self.z_min
    }

    pub fn step(&self) -> i64 {
        self.step
    }

    pub fn z_at(&self, index: usize) -> i64 {
        self.z_min + index as i64 * self.step
    }

    pub fn alpha(&self) -> &[Complex64] {
        &self.alpha
    }

    pub fn decay_rate(&self) -> &[f64] {
        &self.decay_rate
    }

    pub fn phase_rate(&self) -> &[f64] {
        &self.phase_rate
    }

    pub fn matches_grid(&self, grid: &ZDistribution) -> bool {
        self.z_min == grid.z_min() && self.step == grid.step() && self.len() == grid.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;

    fn transverse_geometry(lattice: &LatticeSpec, preset: &str) -> OpticalGeometry {
        let params = GeometryParams::default();
        lookup_preset(preset)
            .unwrap()
            .build(lattice, &params)
            .unwrap()
    }

    #[test]
    fn steady_alpha_direct_substitution() {
        // U10 a0 = 1, Dp = 0, kappa = 1, z = 3 -> alpha = -3i
        let lattice = LatticeSpec::full(4, 4).unwrap();
        let g = transverse_geometry(&lattice, "diffraction_maximum");
        let alpha = g.steady_alpha(3);
        assert!((alpha - Complex64::new(0.0, -3.0)).norm() < 1e-14);
        // alpha_z / z is z-independent and equals C
        let c = g.transverse_scale();
        for z in 1..=4 {
            assert!((g.steady_alpha(z) / z as f64 - c).norm() < 1e-14);
        }
    }

    #[test]
    fn minimum_amplitudes_are_antisymmetric() {
        let lattice = LatticeSpec::full(5, 4).unwrap();
        let g = transverse_geometry(&lattice, "diffraction_minimum");
        for z in 1..=5 {
            let plus = g.steady_alpha(z);
            let minus = g.steady_alpha(-z);
            assert_eq!((plus + minus).norm(), 0.0);
        }
    }

    #[test]
    fn mirror_alpha_is_a_lorentzian() {
        // eta = 1, U11 = 0.2, Dp = 1, kappa = 0.5, z = 5 -> resonant peak 2.0
        let lattice = LatticeSpec::full(8, 8).unwrap();
        let params = GeometryParams {
            coupling_u11: 0.2,
            probe_amplitude_a0: Complex64::new(0.0, 0.0),
            mirror_drive_eta: Complex64::new(1.0, 0.0),
            detuning_dp: 1.0,
            kappa: 0.5,
            ..GeometryParams::default()
        };
        let g = lookup_preset("mirror_probe")
            .unwrap()
            .build(&lattice, &params)
            .unwrap();
        let alpha = g.steady_alpha(5);
        assert!((alpha - Complex64::new(2.0, 0.0)).norm() < 1e-14);
        // symmetry about z* = Dp/U11 = 5
        for d in 1..=3 {
            let lo = g.steady_alpha(5 - d).norm();
            let hi = g.steady_alpha(5 + d).norm();
            assert!((lo - hi).abs() < 1e-14);
        }
        // phase rate for a real alpha and real eta vanishes
        assert!(g.phase_rate(5, alpha).abs() < 1e-14);
    }

    #[test]
    fn branch_rates_on_a_grid() {
        let lattice = LatticeSpec::full(4, 4).unwrap();
        let g = transverse_geometry(&lattice, "diffraction_maximum");
        let grid = ZDistribution::from_probabilities(0, 1, &[0.2; 5]).unwrap();
        let branches = BranchSet::for_grid(&grid, &g);
        assert_eq!(branches.decay_rate()[0], 0.0);
        assert_eq!(branches.phase_rate()[0], 0.0);
        // |C| = 1, kappa = 1, z = 4 -> 2 * 16 * 1
        assert!((branches.decay_rate()[4] - 32.0).abs() < 1e-12);
        for (i, &rate) in branches.decay_rate().iter().enumerate() {
            assert!(rate >= 0.0);
            assert_eq!(rate == 0.0, branches.alpha()[i].norm() == 0.0);
        }
    }

    #[test]
    fn reduction_weights_per_preset() {
        let lattice = LatticeSpec::contiguous(6, 6, 3).unwrap();
        let g = transverse_geometry(&lattice, "diffraction_maximum");
        let (w, valid) = g.reduction_weights().unwrap();
        assert!(valid);
        assert_eq!(w, vec![1, 1, 1, 0, 0, 0]);

        let lattice = LatticeSpec::full(4, 4).unwrap();
        let g = transverse_geometry(&lattice, "diffraction_minimum");
        let (w, valid) = g.reduction_weights().unwrap();
        assert!(valid);
        assert_eq!(w, vec![1, -1, 1, -1]);
    }

    #[test]
    fn non_integer_products_flagged_invalid() {
        let lattice = LatticeSpec::full(2, 2).unwrap();
        let params = GeometryParams {
            mode_products_10: Some(vec![
                Complex64::new(0.3, 0.0),
                Complex64::new(0.7, 0.0),
            ]),
            mode_products_11: Some(vec![1.0, 1.0]),
            ..GeometryParams::default()
        };
        let g = lookup_preset("custom")
            .unwrap()
            .build(&lattice, &params)
            .unwrap();
        let (_, valid) = g.reduction_weights().unwrap();
        assert!(!valid);
    }

    #[test]
    fn retained_shift_is_oracle_only() {
        let lattice = LatticeSpec::full(3, 3).unwrap();
        let params = GeometryParams {
            coupling_u11: 0.4,
            neglect_shift: Some(false),
            ..GeometryParams::default()
        };
        let g = lookup_preset("diffraction_maximum")
            .unwrap()
            .build(&lattice, &params)
            .unwrap();
        assert!(matches!(
            g.reduction_weights(),
            Err(GeometryError::ShiftNotNeglected)
        ));
        // dropping the shift restores the reduction
        let params = GeometryParams {
            coupling_u11: 0.4,
            neglect_shift: Some(true),
            ..GeometryParams::default()
        };
        let g = lookup_preset("diffraction_maximum")
            .unwrap()
            .build(&lattice, &params)
            .unwrap();
        assert!(g.reduction_weights().is_ok());
    }

    #[test]
    fn mixed_drive_is_oracle_only() {
        let lattice = LatticeSpec::full(2, 2).unwrap();
        let params = GeometryParams {
            mirror_drive_eta: Complex64::new(0.5, 0.0),
            mode_products_10: Some(vec![Complex64::new(1.0, 0.0); 2]),
            mode_products_11: Some(vec![1.0; 2]),
            ..GeometryParams::default()
        };
        let g = lookup_preset("custom")
            .unwrap()
            .build(&lattice, &params)
            .unwrap();
        assert!(matches!(
            g.reduction_weights(),
            Err(GeometryError::MixedDrive)
        ));
    }

    #[test]
    fn couplings_helper() {
        let (u10, u11) = couplings_from_atomic(2.0, 3.0, 6.0).unwrap();
        assert!((u10 - 1.0).abs() < 1e-14);
        assert!((u11 - 1.5).abs() < 1e-14);
        assert!(couplings_from_atomic(1.0, 1.0, 0.0).is_err());
    }
}
