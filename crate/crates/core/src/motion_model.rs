//! Tidal volume to vertebra displacement.
//!
//! The spinal segment is a rigid centrum of length `l` carried by two
//! intervertebral discs of length `m`. Breathing loads the segment with a
//! uniform load `q` (AP bending) and an axial force `P` (SI elongation),
//! both proportional to tidal volume through the ideal gas law. The AP
//! displacement is the beam deflection at `x = m`; the SI displacement is
//! the axial elongation of the discs. LR has no physical model and is a
//! free linear fit.
//!
//! Geometry is stored in clinical units (mm, ml, Pa). All mechanics are
//! evaluated in SI via [`units`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotionModelError {
    #[error("x = {x} mm is outside the disc span [0, {m}] mm")]
    OutOfDomain { x: f64, m: f64 },
    #[error("invalid spine geometry: {0}")]
    InvalidGeometry(&'static str),
}

/// Unit conversions between the clinical API units and SI.
pub mod units {
    pub const MM_TO_M: f64 = 1e-3;
    pub const ML_TO_M3: f64 = 1e-6;

    pub fn mm(v: f64) -> f64 {
        v * MM_TO_M
    }

    pub fn mm2(v: f64) -> f64 {
        v * MM_TO_M * MM_TO_M
    }

    pub fn mm4(v: f64) -> f64 {
        v * MM_TO_M.powi(4)
    }

    pub fn ml(v: f64) -> f64 {
        v * ML_TO_M3
    }

    pub fn m_to_mm(v: f64) -> f64 {
        v / MM_TO_M
    }

    /// N/m to N/mm.
    pub fn per_m_to_per_mm(v: f64) -> f64 {
        v * MM_TO_M
    }

    /// N/mm to N/m.
    pub fn per_mm_to_per_m(v: f64) -> f64 {
        v / MM_TO_M
    }
}

/// Geometry and material constants of the simplified spinal segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpineGeometry {
    /// Centrum length `l` (mm).
    pub centrum_length: f64,
    /// Disc length `m` (mm).
    pub disc_length: f64,
    /// Disc elastic modulus `E` (Pa).
    pub disc_modulus: f64,
    /// Disc second moment of area `I` (mm^4).
    pub disc_inertia: f64,
    /// Disc cross-sectional area `A` (mm^2).
    pub disc_area: f64,
    /// Total disc length `L` (mm).
    pub disc_total_length: f64,
    /// Initial chest volume `V0` (ml).
    pub chest_volume: f64,
    /// Atmospheric pressure `p0` (Pa).
    pub atmospheric_pressure: f64,
    /// Chest width along LR `b_w` (mm).
    pub chest_width: f64,
    /// Equivalent chest slice area along AP `S` (mm^2).
    pub chest_slice_area: f64,
}

impl Default for SpineGeometry {
    /// T12 centrum and mean disc length from CT measurements, disc modulus
    /// 75.8 kPa, sea-level pressure. Chest and disc section constants are
    /// not measured; they are set so the default segment moves about 4 mm
    /// AP and 2 mm SI at 500 ml.
    fn default() -> Self {
        let m = (5.31 + 5.67) / 2.0;
        Self {
            centrum_length: 23.10,
            disc_length: m,
            disc_modulus: 75.8e3,
            disc_inertia: 2760.0,
            disc_area: 1500.0,
            disc_total_length: 2.0 * m,
            chest_volume: 5000.0,
            atmospheric_pressure: 101_325.0,
            chest_width: 100.0,
            chest_slice_area: 1000.0,
        }
    }
}

impl SpineGeometry {
    pub fn validate(&self) -> Result<(), MotionModelError> {
        let fields = [
            self.centrum_length,
            self.disc_length,
            self.disc_modulus,
            self.disc_inertia,
            self.disc_area,
            self.disc_total_length,
            self.chest_volume,
            self.atmospheric_pressure,
            self.chest_width,
            self.chest_slice_area,
        ];
        if fields.iter().all(|v| *v > 0.0 && !v.is_nan()) {
            Ok(())
        } else {
            Err(MotionModelError::InvalidGeometry("all geometry fields must be > 0"))
        }
    }

    /// Flexural rigidity `EI` in N m^2.
    fn flexural_rigidity(&self) -> f64 {
        self.disc_modulus * units::mm4(self.disc_inertia)
    }
}

/// Uniform load intensity (N/mm) produced by tidal volume `tv` (ml).
pub fn uniform_load(tv: f64, geom: &SpineGeometry) -> f64 {
    let q_si = tv / geom.chest_volume * geom.atmospheric_pressure * units::mm(geom.chest_width);
    units::per_m_to_per_mm(q_si)
}

/// Axial load (N) produced by tidal volume `tv` (ml).
pub fn axial_load(tv: f64, geom: &SpineGeometry) -> f64 {
    tv / geom.chest_volume * geom.atmospheric_pressure * units::mm2(geom.chest_slice_area)
}

/// Deflection (mm) and slope (rad) of the disc beam at `x` mm under load `q` N/mm.
pub fn deflection_profile(x: f64, q: f64, geom: &SpineGeometry) -> Result<(f64, f64), MotionModelError> {
    let m_mm = geom.disc_length;
    if !(0.0..=m_mm).contains(&x) {
        return Err(MotionModelError::OutOfDomain { x, m: m_mm });
    }
    let q = units::per_mm_to_per_m(q);
    let x = units::mm(x);
    let l = units::mm(geom.centrum_length);
    let m = units::mm(m_mm);
    let ei = geom.flexural_rigidity();

    let c1 = q * m.powi(3) / (3.0 * ei) + q * l * m * m / (4.0 * ei);
    let span = l + 2.0 * m;
    let theta = q / (6.0 * ei) * x.powi(3) - q * span / (4.0 * ei) * x * x + c1;
    let v = q / (24.0 * ei) * x.powi(4) - q * span / (12.0 * ei) * x.powi(3) + c1 * x;
    Ok((units::m_to_mm(v), theta))
}

/// Slope and intercept of one displacement axis against tidal volume.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AxisLine {
    /// mm per ml.
    pub slope: f64,
    /// mm.
    pub intercept: f64,
}

impl AxisLine {
    pub fn new(slope: f64, intercept: f64) -> Self {
        Self { slope, intercept }
    }

    pub fn eval(&self, tv: f64) -> f64 {
        self.slope * tv + self.intercept
    }
}

/// Per-axis linear displacement model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DisplacementModel {
    pub ap: AxisLine,
    pub si: AxisLine,
    pub lr: AxisLine,
}

/// Displacement along the three anatomical axes (mm).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Displacement {
    pub ap: f64,
    pub si: f64,
    pub lr: f64,
}

/// Displacement at a point in time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DisplacementSample {
    pub t: f64,
    pub d_ap: f64,
    pub d_si: f64,
    pub d_lr: f64,
}

impl DisplacementSample {
    pub fn new(t: f64, d: Displacement) -> Self {
        Self { t, d_ap: d.ap, d_si: d.si, d_lr: d.lr }
    }
}

/// Closed-form AP and SI slopes of a physical segment. Intercepts and the
/// LR axis are zero; those are left to data fitting.
pub fn physical_coefficients(geom: &SpineGeometry) -> DisplacementModel {
    let l = units::mm(geom.centrum_length);
    let m = units::mm(geom.disc_length);
    let ei = geom.flexural_rigidity();
    let p0 = geom.atmospheric_pressure;
    let v0 = units::ml(geom.chest_volume);

    // Per ml of tidal volume: (5m^4/24EI + lm^3/6EI) p0 b_w / V0.
    let bending = 5.0 * m.powi(4) / (24.0 * ei) + l * m.powi(3) / (6.0 * ei);
    let ap = bending * p0 * units::mm(geom.chest_width) / v0 * units::ML_TO_M3;

    // 2 p0 S L / (E A V0).
    let si = 2.0 * p0 * units::mm2(geom.chest_slice_area) * units::mm(geom.disc_total_length)
        / (geom.disc_modulus * units::mm2(geom.disc_area) * v0)
        * units::ML_TO_M3;

    DisplacementModel {
        ap: AxisLine::new(units::m_to_mm(ap), 0.0),
        si: AxisLine::new(units::m_to_mm(si), 0.0),
        lr: AxisLine::default(),
    }
}

/// Displacement predicted for tidal volume `tv` (ml).
pub fn predict_displacement(tv: f64, model: &DisplacementModel) -> Displacement {
    Displacement { ap: model.ap.eval(tv), si: model.si.eval(tv), lr: model.lr.eval(tv) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_load_by_hand() {
        // 0.1 * 101325 Pa * 0.1 m = 1013.25 N/m = 1.01325 N/mm
        let g = SpineGeometry { chest_volume: 5000.0, atmospheric_pressure: 101_325.0, chest_width: 100.0, ..Default::default() };
        assert!((uniform_load(500.0, &g) - 1.01325).abs() < 1e-12);
        assert_eq!(uniform_load(0.0, &g), 0.0);
        assert!((uniform_load(400.0, &g) - 2.0 * uniform_load(200.0, &g)).abs() < 1e-15);
    }

    #[test]
    fn deflection_boundary_cases() {
        let g = SpineGeometry::default();
        assert_eq!(deflection_profile(0.0, 0.7, &g).unwrap().0, 0.0);
        for x in [0.0, 1.0, g.disc_length] {
            assert_eq!(deflection_profile(x, 0.0, &g).unwrap(), (0.0, 0.0));
        }
        assert!(matches!(deflection_profile(-0.1, 1.0, &g), Err(MotionModelError::OutOfDomain { .. })));
        assert!(deflection_profile(g.disc_length + 1e-6, 1.0, &g).is_err());
    }

    #[test]
    fn tip_deflection_closed_form() {
        let g = SpineGeometry { centrum_length: 20.0, disc_length: 6.0, disc_modulus: 1e5, disc_inertia: 3000.0, ..Default::default() };
        let q = 0.8;
        let (v, _) = deflection_profile(g.disc_length, q, &g).unwrap();
        let (qs, m, l): (f64, f64, f64) = (q * 1e3, 6e-3, 20e-3);
        let ei = 1e5 * 3000.0e-12;
        let expected = qs * (5.0 * m.powi(4) / 24.0 + l * m.powi(3) / 6.0) / ei * 1e3;
        assert!((v - expected).abs() <= 1e-12 * expected.abs());
    }

    #[test]
    fn table_defaults() {
        let g = SpineGeometry::default();
        assert_eq!(g.centrum_length, 23.10);
        assert!((g.disc_length - 5.49).abs() < 1e-12);
    }

    #[test]
    fn default_geometry_scale() {
        let model = physical_coefficients(&SpineGeometry::default());
        let d = predict_displacement(500.0, &model);
        assert!(d.ap > 3.5 && d.ap < 4.5, "{}", d.ap);
        assert!(d.si > 1.5 && d.si < 2.5, "{}", d.si);
        assert_eq!(d.lr, 0.0);
    }

    #[test]
    fn rigid_discs_do_not_move() {
        let g = SpineGeometry { disc_modulus: 1e30, ..Default::default() };
        let model = physical_coefficients(&g);
        assert!(model.ap.slope < 1e-20 && model.si.slope < 1e-20);
    }

    #[test]
    fn predict_examples() {
        let model = DisplacementModel {
            ap: AxisLine::new(0.008, 0.0),
            si: AxisLine::new(0.0, 1.5),
            lr: AxisLine::new(0.001, -0.2),
        };
        let d0 = predict_displacement(0.0, &model);
        assert_eq!((d0.ap, d0.si, d0.lr), (0.0, 1.5, -0.2));
        assert_eq!(predict_displacement(500.0, &model).ap, 4.0);
    }
}
