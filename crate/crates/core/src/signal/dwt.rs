//! Multi-level discrete wavelet transform with half-point symmetric extension.
//!
//! Each level filters the running approximation with the lowpass and
//! highpass analysis filters and keeps every second output. The signal is
//! extended symmetrically (`x[-1] = x[0]`, `x[n] = x[n-1]`) so a level with
//! input length `n` and filter length `F` emits `floor((n + F - 1) / 2)`
//! coefficients per band. Keeping the boundary coefficients makes the
//! transform exactly invertible for every shipped basis.

use super::wavelet::WaveletBasis;
use super::SignalError;

/// Coefficient arrays of a multi-level decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct DwtDecomposition {
    pub basis: WaveletBasis,
    pub levels: usize,
    /// Deepest approximation `a_L`.
    pub approx: Vec<f64>,
    /// Details `d_1 .. d_L`; `details[0]` is the finest level.
    pub details: Vec<Vec<f64>>,
    /// Input length at each level; `level_lengths[0]` is the original length.
    pub level_lengths: Vec<usize>,
    pub original_length: usize,
}

impl DwtDecomposition {
    pub fn detail(&self, level: usize) -> Option<&[f64]> {
        level.checked_sub(1).and_then(|i| self.details.get(i)).map(Vec::as_slice)
    }
}

/// A coefficient band selected for reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Band {
    Approx,
    /// Detail level, 1-based.
    Detail(usize),
}

/// Detail levels summed by the breathing de-noiser.
pub const BREATHING_BANDS: [Band; 3] = [Band::Detail(3), Band::Detail(4), Band::Detail(5)];

#[inline]
fn symmetric_index(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let k = i.rem_euclid(period) as usize;
    if k < n {
        k
    } else {
        2 * n - 1 - k
    }
}

/// Number of coefficients per band produced from `n` input samples.
pub fn coefficient_len(n: usize, filter_len: usize) -> usize {
    (n + filter_len - 1) / 2
}

fn analysis(x: &[f64], filter: &[f64]) -> Vec<f64> {
    let n = x.len();
    let f = filter.len();
    (0..coefficient_len(n, f))
        .map(|o| {
            let centre = 2 * o as isize + 1;
            filter.iter().enumerate().map(|(j, h)| h * x[symmetric_index(centre - j as isize, n)]).sum()
        })
        .collect()
}

/// One synthesis step; `approx` or `detail` may be `None` to treat that band as zero.
fn synthesis(approx: Option<&[f64]>, detail: Option<&[f64]>, basis: &WaveletBasis, out_len: usize) -> Vec<f64> {
    let f = basis.filter_len();
    let coeffs = approx.or(detail).map_or(0, <[f64]>::len);
    let mut out = vec![0.0; out_len];
    for (i, slot) in out.iter_mut().enumerate() {
        // j = i + F - 2 - 2o must lie in [0, F).
        let hi = (i + f - 2) / 2;
        let lo = i / 2;
        let mut acc = 0.0;
        for o in lo..=hi.min(coeffs.saturating_sub(1)) {
            let j = i + f - 2 - 2 * o;
            if j >= f {
                continue;
            }
            if let Some(a) = approx {
                acc += basis.rec_lo[j] * a[o];
            }
            if let Some(d) = detail {
                acc += basis.rec_hi[j] * d[o];
            }
        }
        *slot = acc;
    }
    out
}

/// Decompose `signal` into `levels` detail bands and one approximation.
pub fn dwt_decompose(signal: &[f64], basis: &WaveletBasis, levels: usize) -> Result<DwtDecomposition, SignalError> {
    if levels == 0 {
        return Err(SignalError::InvalidLevels);
    }
    let needed = 1usize.checked_shl(levels as u32).unwrap_or(usize::MAX);
    if signal.len() < needed {
        return Err(SignalError::SignalTooShort { len: signal.len(), levels, needed });
    }
    let mut approx = signal.to_vec();
    let mut details = Vec::with_capacity(levels);
    let mut level_lengths = Vec::with_capacity(levels);
    for _ in 0..levels {
        level_lengths.push(approx.len());
        let d = analysis(&approx, &basis.dec_hi);
        approx = analysis(&approx, &basis.dec_lo);
        details.push(d);
    }
    Ok(DwtDecomposition {
        basis: basis.clone(),
        levels,
        approx,
        details,
        level_lengths,
        original_length: signal.len(),
    })
}

/// Inverse transform keeping only the listed bands; all other bands are zeroed.
pub fn band_reconstruct(dec: &DwtDecomposition, bands: &[Band]) -> Result<Vec<f64>, SignalError> {
    for band in bands {
        if let Band::Detail(level) = band {
            if *level == 0 || *level > dec.levels {
                return Err(SignalError::InvalidBand { level: *level, levels: dec.levels });
            }
        }
    }
    let keep_approx = bands.contains(&Band::Approx);
    let mut current: Option<Vec<f64>> = keep_approx.then(|| dec.approx.clone());
    for level in (1..=dec.levels).rev() {
        let detail = bands.contains(&Band::Detail(level)).then(|| dec.details[level - 1].as_slice());
        let out_len = dec.level_lengths[level - 1];
        current = match (current.as_deref(), detail) {
            (None, None) => None,
            (a, d) => Some(synthesis(a, d, &dec.basis, out_len)),
        };
    }
    Ok(current.unwrap_or_else(|| vec![0.0; dec.original_length]))
}

/// Full inverse transform.
pub fn reconstruct_all(dec: &DwtDecomposition) -> Vec<f64> {
    let mut bands = vec![Band::Approx];
    bands.extend((1..=dec.levels).map(Band::Detail));
    band_reconstruct(dec, &bands).expect("all bands are valid")
}
