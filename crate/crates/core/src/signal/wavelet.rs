//! Wavelet filter banks.
//!
//! Lowpass filters are embedded from the standard published tables. The
//! highpass filters follow from the quadrature-mirror relations
//! `rec_hi[j] = (-1)^j dec_lo[j]` and `dec_hi[j] = (-1)^(j+1) rec_lo[j]`,
//! which hold for both the orthogonal and the biorthogonal families here.

use std::sync::OnceLock;

use super::dwt::{dwt_decompose, reconstruct_all};
use super::SignalError;

/// Names of the bases shipped with the crate.
pub const SHIPPED_BASES: [&str; 4] = ["db5", "coif4", "coif5", "bior2.8"];

/// A two-channel analysis/synthesis filter bank.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletBasis {
    pub name: String,
    pub dec_lo: Vec<f64>,
    pub dec_hi: Vec<f64>,
    pub rec_lo: Vec<f64>,
    pub rec_hi: Vec<f64>,
    pub orthogonal: bool,
}

impl WaveletBasis {
    /// Build a basis from its decomposition and reconstruction lowpass filters.
    pub fn from_lowpass(name: &str, dec_lo: &[f64], rec_lo: &[f64], orthogonal: bool) -> Self {
        let sign = |j: usize| if j % 2 == 0 { 1.0 } else { -1.0 };
        let rec_hi = dec_lo.iter().enumerate().map(|(j, h)| sign(j) * h).collect();
        let dec_hi = rec_lo.iter().enumerate().map(|(j, g)| -sign(j) * g).collect();
        Self { name: name.to_string(), dec_lo: dec_lo.to_vec(), dec_hi, rec_lo: rec_lo.to_vec(), rec_hi, orthogonal }
    }

    /// Orthogonal basis: reconstruction filters are the time-reversed analysis filters.
    pub fn orthogonal(name: &str, dec_lo: &[f64]) -> Self {
        let rec_lo: Vec<f64> = dec_lo.iter().rev().copied().collect();
        Self::from_lowpass(name, dec_lo, &rec_lo, true)
    }

    /// Look up one of the [`SHIPPED_BASES`]. The first lookup runs the
    /// impulse self-test over every shipped basis.
    pub fn by_name(name: &str) -> Result<Self, SignalError> {
        if let Err(failed) = self_test() {
            return Err(SignalError::SelfTest(failed.clone()));
        }
        build(name).ok_or_else(|| SignalError::UnknownBasis(name.to_string()))
    }

    pub fn shipped() -> Vec<Self> {
        SHIPPED_BASES.iter().map(|n| Self::by_name(n).expect("shipped basis")).collect()
    }

    pub fn filter_len(&self) -> usize {
        self.dec_lo.len()
    }

    /// Perfect-reconstruction tolerance for this family.
    pub fn reconstruction_tolerance(&self) -> f64 {
        if self.orthogonal {
            1e-10
        } else {
            1e-8
        }
    }
}

fn build(name: &str) -> Option<WaveletBasis> {
    Some(match name {
        "db5" => WaveletBasis::orthogonal("db5", &DB5_DEC_LO),
        "coif4" => WaveletBasis::orthogonal("coif4", &COIF4_DEC_LO),
        "coif5" => WaveletBasis::orthogonal("coif5", &COIF5_DEC_LO),
        "bior2.8" => WaveletBasis::from_lowpass("bior2.8", &BIOR2_8_DEC_LO, &BIOR2_8_REC_LO, false),
        _ => return None,
    })
}

/// Decompose and rebuild an impulse with every shipped basis.
fn self_test() -> &'static Result<(), String> {
    static RESULT: OnceLock<Result<(), String>> = OnceLock::new();
    RESULT.get_or_init(|| {
        let mut impulse = vec![0.0; 64];
        impulse[17] = 1.0;
        for name in SHIPPED_BASES {
            let basis = build(name).expect("listed basis");
            if basis.filter_len() % 2 != 0 {
                return Err(format!("{name}: odd filter length"));
            }
            let dec = dwt_decompose(&impulse, &basis, 3).map_err(|e| format!("{name}: {e}"))?;
            let rebuilt = reconstruct_all(&dec);
            let err = rebuilt.iter().zip(&impulse).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if err > basis.reconstruction_tolerance() {
                return Err(format!("{name}: impulse reconstruction error {err:e}"));
            }
        }
        Ok(())
    })
}

const DB5_DEC_LO: [f64; 10] = [
    0.0033357252854737712,
    -0.012580751999081999,
    -0.006241490212798274,
    0.07757149384004572,
    -0.032244869584638375,
    -0.24229488706638203,
    0.13842814590132074,
    0.7243085284377729,
    0.6038292697971896,
    0.16010239797419293,
];

const COIF4_DEC_LO: [f64; 24] = [
    -1.7849909144933469e-06,
    -3.259647940030751e-06,
    3.1229861599195265e-05,
    6.233885431278719e-05,
    -0.0002599743371222568,
    -0.0005890202246332165,
    0.0012665610789256603,
    0.0037514346971460866,
    -0.0056582838001308835,
    -0.015211728187697211,
    0.02508225333794961,
    0.03933442260558915,
    -0.09622042453595264,
    -0.06662747236681717,
    0.43438603311435653,
    0.7822389344242826,
    0.41530842700068227,
    -0.05607731960356926,
    -0.08126671024919373,
    0.02668230466960483,
    0.01606894713157503,
    -0.007346167936268051,
    -0.001629492425226786,
    0.000892313902537003,
];

const COIF5_DEC_LO: [f64; 30] = [
    -9.604010112767894e-08,
    -1.6237995172048338e-07,
    2.0612203985788783e-06,
    3.7007277113394796e-06,
    -2.1270221672515614e-05,
    -4.12198619242655e-05,
    0.00014035632812373243,
    0.0003018579416682448,
    -0.0006375589261258812,
    -0.0016616273039298788,
    0.0024315754425382886,
    0.006761520220620417,
    -0.009159507338676163,
    -0.019758391600965465,
    0.032674799467057355,
    0.041287530472117834,
    -0.10556315130733723,
    -0.06203775157498196,
    0.4379823066591634,
    0.7742936228603274,
    0.42157126673075435,
    -0.052046670253554764,
    -0.09192158806008609,
    0.028169744270532353,
    0.023408322118927783,
    -0.010131584846900276,
    -0.00415931262757864,
    0.0021782943778456947,
    0.0003585777411617577,
    -0.000212081862067494,
];

const BIOR2_8_DEC_LO: [f64; 18] = [
    0.0,
    0.0015105430506304422,
    -0.0030210861012608843,
    -0.012947511862546647,
    0.02891610982635418,
    0.05299848189069094,
    -0.13491307360773605,
    -0.16382918343409023,
    0.46257144047591653,
    0.9516421218971786,
    0.46257144047591653,
    -0.16382918343409023,
    -0.13491307360773605,
    0.05299848189069094,
    0.02891610982635418,
    -0.012947511862546647,
    -0.0030210861012608843,
    0.0015105430506304422,
];

const BIOR2_8_REC_LO: [f64; 18] = [
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.3535533905932738,
    0.7071067811865476,
    0.3535533905932738,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
];
