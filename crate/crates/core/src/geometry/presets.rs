//! Probe-geometry presets behind a common trait, registered by name and
//! selected at runtime from configuration.

use super::{GeometryError, GeometryParams, OpticalGeometry, PresetKind};
use crate::lattice::LatticeSpec;
use num_complex::Complex64;

/// One interchangeable probe geometry: how mode products are laid out on the
/// illuminated sites and which drive invariants apply.
pub trait ProbePreset: Send + Sync {
    fn name(&self) -> &'static str;

    fn kind(&self) -> PresetKind;

    /// Resolves the preset against a lattice and numeric parameters.
    fn build(
        &self,
        lattice: &LatticeSpec,
        params: &GeometryParams,
    ) -> Result<OpticalGeometry, GeometryError>;
}

fn require_transverse(
    preset: &'static str,
    params: &GeometryParams,
) -> Result<(), GeometryError> {
    if params.probe_amplitude_a0.norm() == 0.0 || params.mirror_drive_eta.norm() != 0.0 {
        return Err(GeometryError::TransverseDrive { preset });
    }
    Ok(())
}

/// All illuminated atoms scatter in phase: `u_1* u_0 = 1` on the mask, so
/// the driving statistic is the atom number at the illuminated sites.
pub struct DiffractionMaximum;

impl ProbePreset for DiffractionMaximum {
    fn name(&self) -> &'static str {
        "diffraction_maximum"
    }

    fn kind(&self) -> PresetKind {
        PresetKind::DiffractionMaximum
    }

    fn build(
        &self,
        lattice: &LatticeSpec,
        params: &GeometryParams,
    ) -> Result<OpticalGeometry, GeometryError> {
        require_transverse(self.name(), params)?;
        let u10 = lattice
            .illuminated()
            .iter()
            .map(|&lit| Complex64::new(if lit { 1.0 } else { 0.0 }, 0.0))
            .collect();
        let u11 = lattice
            .illuminated()
            .iter()
            .map(|&lit| if lit { 1.0 } else { 0.0 })
            .collect();
        OpticalGeometry::assemble(
            self.kind(),
            lattice,
            params,
            u10,
            u11,
            params.neglect_shift.unwrap_or(true),
        )
    }
}

/// Neighboring illuminated atoms scatter out of phase: `u_1* u_0` alternates
/// between +1 and -1 across the illuminated sites, so the statistic is the
/// odd/even atom-number difference.
pub struct DiffractionMinimum;

impl ProbePreset for DiffractionMinimum {
    fn name(&self) -> &'static str {
        "diffraction_minimum"
    }

    fn kind(&self) -> PresetKind {
        PresetKind::DiffractionMinimum
    }

    fn build(
        &self,
        lattice: &LatticeSpec,
        params: &GeometryParams,
    ) -> Result<OpticalGeometry, GeometryError> {
        require_transverse(self.name(), params)?;
        let mut sign = 1.0;
        let mut u10 = Vec::with_capacity(lattice.n_sites());
        for &lit in lattice.illuminated() {
            if lit {
                u10.push(Complex64::new(sign, 0.0));
                sign = -sign;
            } else {
                u10.push(Complex64::new(0.0, 0.0));
            }
        }
        let u11 = lattice
            .illuminated()
            .iter()
            .map(|&lit| if lit { 1.0 } else { 0.0 })
            .collect();
        OpticalGeometry::assemble(
            self.kind(),
            lattice,
            params,
            u10,
            u11,
            params.neglect_shift.unwrap_or(true),
        )
    }
}

/// Cavity driven through a mirror; the probe is off and the statistic is
/// `D_11`, the atom number weighted by `|u_1|^2 = 1` on the mask.
pub struct MirrorProbe;

impl ProbePreset for MirrorProbe {
    fn name(&self) -> &'static str {
        "mirror_probe"
    }

    fn kind(&self) -> PresetKind {
        PresetKind::MirrorProbe
    }

    fn build(
        &self,
        lattice: &LatticeSpec,
        params: &GeometryParams,
    ) -> Result<OpticalGeometry, GeometryError> {
        if params.mirror_drive_eta.norm() == 0.0 || params.probe_amplitude_a0.norm() != 0.0 {
            return Err(GeometryError::MirrorDrive);
        }
        let u10 = vec![Complex64::new(0.0, 0.0); lattice.n_sites()];
        let u11 = lattice
            .illuminated()
            .iter()
            .map(|&lit| if lit { 1.0 } else { 0.0 })
            .collect();
        // the mode shift is the signal here, never neglected
        OpticalGeometry::assemble(self.kind(), lattice, params, u10, u11, false)
    }
}

/// Mode products supplied verbatim; integer-valued products run on the
/// reduced engine, anything else is oracle-only.
pub struct CustomGeometry;

impl ProbePreset for CustomGeometry {
    fn name(&self) -> &'static str {
        "custom"
    }

    fn kind(&self) -> PresetKind {
        PresetKind::Custom
    }

    fn build(
        &self,
        lattice: &LatticeSpec,
        params: &GeometryParams,
    ) -> Result<OpticalGeometry, GeometryError> {
        let u10 = params
            .mode_products_10
            .clone()
            .ok_or(GeometryError::MissingModeProducts)?;
        let u11 = params
            .mode_products_11
            .clone()
            .ok_or(GeometryError::MissingModeProducts)?;
        OpticalGeometry::assemble(
            self.kind(),
            lattice,
            params,
            u10,
            u11,
            params.neglect_shift.unwrap_or(false),
        )
    }
}

/// The registered presets, in lookup order.
pub fn preset_registry() -> &'static [&'static dyn ProbePreset] {
    &[
        &DiffractionMaximum,
        &DiffractionMinimum,
        &MirrorProbe,
        &CustomGeometry,
    ]
}

/// Finds a preset by its registered name.
pub fn lookup_preset(name: &str) -> Option<&'static dyn ProbePreset> {
    preset_registry().iter().copied().find(|p| p.name() == name)
}

/// Registered preset names, for diagnostics.
pub fn preset_names() -> Vec<&'static str> {
    preset_registry().iter().map(|p| p.name()).collect()
}
