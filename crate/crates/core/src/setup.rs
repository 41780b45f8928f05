//! Reference scenario and the checks shared by every front end.

use crate::error::Result;
use crate::model::{BarrierSpec, FieldSpec, SpectralAmplitude};
use crate::packet::PacketResolution;

pub const DEFAULT_A: f64 = 5.0;
pub const DEFAULT_B: f64 = 6.0;
pub const DEFAULT_V0: f64 = 2.0;
pub const DEFAULT_L0: f64 = 40.0;
pub const DEFAULT_TRUNCATION: f64 = 8.0;
pub const DEFAULT_OMEGA_L: f64 = 1e-3;

/// `E = 1`.
pub fn default_k0() -> f64 {
    2f64.sqrt()
}

/// Above this `l0 / a` the packet is not well separated from the barrier at `t = 0`.
pub const SEPARATION_WARN: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: BarrierSpec,
    pub k0: f64,
    pub l0: f64,
    pub truncation: f64,
    pub field: FieldSpec,
    pub resolution: PacketResolution,
}

impl Scenario {
    /// Rectangular barrier of height 2 on `[5, 6]`, `E = 1`, `l0 = 40`.
    pub fn reference() -> Result<Self> {
        Ok(Scenario {
            spec: BarrierSpec::rectangular(DEFAULT_A, DEFAULT_B, DEFAULT_V0)?,
            k0: default_k0(),
            l0: DEFAULT_L0,
            truncation: DEFAULT_TRUNCATION,
            field: FieldSpec::new(DEFAULT_OMEGA_L)?,
            resolution: PacketResolution::default(),
        })
    }

    pub fn amplitude(&self) -> Result<SpectralAmplitude> {
        SpectralAmplitude::gaussian(self.k0, self.l0, self.truncation, self.resolution.nk)
    }

    pub fn refined(&self, factor: usize) -> Self {
        Scenario { resolution: self.resolution.refined(factor), ..self.clone() }
    }

    /// Non-fatal findings about the setup.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let ratio = self.l0 / self.spec.a();
        if ratio > SEPARATION_WARN {
            out.push(format!(
                "l0 / a = {ratio:.3} exceeds {SEPARATION_WARN}: the packet overlaps the barrier at t = 0"
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_is_valid_and_flags_overlap() {
        let s = Scenario::reference().unwrap();
        assert!((crate::model::energy(s.k0) - 1.0).abs() < 1e-15);
        assert_eq!(s.amplitude().unwrap().len(), s.resolution.nk);
        assert_eq!(s.warnings().len(), 1);
        assert_eq!(s.refined(2).resolution.nk, 1601);
    }
}
