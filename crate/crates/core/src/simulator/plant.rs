//! Synthetic layered bone and drilling force law.
//!
//! Force is proportional to the cutting rate (how fast the tool advances
//! into fresh material) times the hardness under the drill tip. The tip
//! has a finite engagement length, so hardness is averaged over the last
//! `tip_length` mm of the hole; this gives the gradual rise and fall seen
//! at layer boundaries.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Spindle speed at which the hardness constants are stated (rpm).
pub const REFERENCE_RPM: f64 = 12_000.0;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid bone model: {0}")]
pub struct BoneModelError(pub &'static str);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoneModel {
    pub outer_cortical_thickness: f64,
    pub cancellous_thickness: f64,
    pub inner_cortical_thickness: f64,
    /// N per (mm/s) at the reference spindle speed.
    pub cortical_hardness: f64,
    pub cancellous_hardness: f64,
    /// Relative standard deviation of the force per raw sample.
    pub cancellous_fluctuation: f64,
    pub cortical_fluctuation: f64,
    /// Sensor noise standard deviation (N), independent of spindle speed.
    pub noise_floor: f64,
    /// Drill-tip engagement length (mm).
    pub tip_length: f64,
}

impl Default for BoneModel {
    fn default() -> Self {
        Self {
            outer_cortical_thickness: 3.0,
            cancellous_thickness: 15.0,
            inner_cortical_thickness: 2.11,
            cortical_hardness: 7.0,
            cancellous_hardness: 1.5,
            cancellous_fluctuation: 0.25,
            cortical_fluctuation: 0.05,
            noise_floor: 0.05,
            tip_length: 0.75,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Outside,
    OuterCortical,
    Cancellous,
    InnerCortical,
    Through,
}

impl BoneModel {
    pub fn validate(&self) -> Result<(), BoneModelError> {
        let positive = [
            self.outer_cortical_thickness,
            self.cancellous_thickness,
            self.inner_cortical_thickness,
            self.cortical_hardness,
            self.cancellous_hardness,
            self.tip_length,
        ];
        if !positive.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(BoneModelError("thicknesses, hardnesses and tip length must be > 0"));
        }
        if !(self.cortical_hardness > self.cancellous_hardness) {
            return Err(BoneModelError("cortical hardness must exceed cancellous hardness"));
        }
        let non_negative = [self.cancellous_fluctuation, self.cortical_fluctuation, self.noise_floor];
        if !non_negative.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(BoneModelError("fluctuations and noise floor must be >= 0"));
        }
        Ok(())
    }

    pub fn total_thickness(&self) -> f64 {
        self.outer_cortical_thickness + self.cancellous_thickness + self.inner_cortical_thickness
    }

    /// Depth at which the inner cortical layer begins.
    pub fn inner_start(&self) -> f64 {
        self.outer_cortical_thickness + self.cancellous_thickness
    }

    pub fn layer_at(&self, depth: f64) -> Layer {
        if depth <= 0.0 {
            Layer::Outside
        } else if depth <= self.outer_cortical_thickness {
            Layer::OuterCortical
        } else if depth <= self.inner_start() {
            Layer::Cancellous
        } else if depth <= self.total_thickness() {
            Layer::InnerCortical
        } else {
            Layer::Through
        }
    }

    /// Breakpoints and (hardness, relative fluctuation) of each layer.
    fn layers(&self) -> [(f64, f64, f64, f64); 3] {
        let a = self.outer_cortical_thickness;
        let b = self.inner_start();
        let c = self.total_thickness();
        [
            (0.0, a, self.cortical_hardness, self.cortical_fluctuation),
            (a, b, self.cancellous_hardness, self.cancellous_fluctuation),
            (b, c, self.cortical_hardness, self.cortical_fluctuation),
        ]
    }

    /// Mean hardness and mean absolute fluctuation over the tip window ending at `depth`.
    pub fn engaged(&self, depth: f64) -> (f64, f64) {
        let lo = depth - self.tip_length;
        let (mut h, mut s) = (0.0, 0.0);
        for (a, b, hardness, fluct) in self.layers() {
            let overlap = (depth.min(b) - lo.max(a)).max(0.0);
            h += overlap * hardness;
            s += overlap * hardness * fluct;
        }
        (h / self.tip_length, s / self.tip_length)
    }
}

/// Force scale relative to the reference spindle speed; strictly decreasing in rpm.
pub fn speed_factor(spindle_rpm: f64) -> f64 {
    REFERENCE_RPM / spindle_rpm
}

/// One raw thrust-force sample (N).
pub fn force_plant<R: Rng + ?Sized>(relative_feed: f64, depth: f64, bone: &BoneModel, spindle_rpm: f64, rng: &mut R) -> f64 {
    let z_cut: f64 = rng.sample(StandardNormal);
    let z_sensor: f64 = rng.sample(StandardNormal);
    let rate = relative_feed.max(0.0) * speed_factor(spindle_rpm);
    let (hardness, fluctuation) = bone.engaged(depth.max(0.0));
    hardness * rate + fluctuation * rate * z_cut + bone.noise_floor * z_sensor
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn retreat_gives_noise_only() {
        let bone = BoneModel { noise_floor: 0.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(force_plant(-1.0, 1.5, &bone, 12_000.0, &mut rng), 0.0);
        assert_eq!(force_plant(0.0, 1.5, &bone, 12_000.0, &mut rng), 0.0);
    }

    #[test]
    fn deterministic_under_seed() {
        let bone = BoneModel::default();
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(force_plant(0.5, 2.0, &bone, 12_000.0, &mut a), force_plant(0.5, 2.0, &bone, 12_000.0, &mut b));
    }

    #[test]
    fn engagement_ramps_at_boundaries() {
        let bone = BoneModel::default();
        assert_eq!(bone.engaged(0.0).0, 0.0);
        assert!((bone.engaged(0.375).0 - 3.5).abs() < 1e-12);
        assert!((bone.engaged(2.0).0 - 7.0).abs() < 1e-12);
        assert!((bone.engaged(10.0).0 - 1.5).abs() < 1e-12);
        assert_eq!(bone.engaged(bone.total_thickness() + 0.75).0, 0.0);
    }

    #[test]
    fn layers() {
        let bone = BoneModel::default();
        assert_eq!(bone.layer_at(0.0), Layer::Outside);
        assert_eq!(bone.layer_at(1.0), Layer::OuterCortical);
        assert_eq!(bone.layer_at(5.0), Layer::Cancellous);
        assert_eq!(bone.layer_at(19.0), Layer::InnerCortical);
        assert_eq!(bone.layer_at(21.0), Layer::Through);
        assert!((bone.total_thickness() - 20.11).abs() < 1e-12);
    }

    #[test]
    fn speed_factor_decreases() {
        assert_eq!(speed_factor(12_000.0), 1.0);
        assert!(speed_factor(16_000.0) > speed_factor(20_000.0));
    }
}
