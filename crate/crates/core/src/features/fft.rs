use std::f64::consts::PI;

use crate::error::{Error, Result};

pub fn is_power_of_two(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

pub fn next_power_of_two(n: usize) -> usize {
    let mut p = 1;
    while p < n {
        p <<= 1;
    }
    p
}

/// In-place radix-2 decimation-in-time FFT. Both slices must have the same
/// power-of-two length.
pub fn fft_in_place(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    debug_assert_eq!(n, im.len());
    debug_assert!(is_power_of_two(n));
    if n < 2 {
        return;
    }

    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }

    let mut len = 2;
    while len <= n {
        let ang = -2.0 * PI / len as f64;
        let half = len / 2;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let (wr, wi) = {
                    let a = ang * k as f64;
                    (a.cos(), a.sin())
                };
                let (ar, ai) = (re[start + k], im[start + k]);
                let (br, bi) = (re[start + k + half], im[start + k + half]);
                let tr = br * wr - bi * wi;
                let ti = br * wi + bi * wr;
                re[start + k] = ar + tr;
                im[start + k] = ai + ti;
                re[start + k + half] = ar - tr;
                im[start + k + half] = ai - ti;
            }
        }
        len <<= 1;
    }
}

/// One-sided power spectrum |X_k|^2 for k in 0..=fft_size/2. The frame is
/// zero-padded to `fft_size`.
pub fn power_spectrum(frame: &[f64], fft_size: usize) -> Result<Vec<f64>> {
    if !is_power_of_two(fft_size) {
        return Err(Error::InvalidInput(format!(
            "fft size {fft_size} is not a power of two"
        )));
    }
    if frame.len() > fft_size {
        return Err(Error::InvalidInput(format!(
            "frame length {} exceeds fft size {}",
            frame.len(),
            fft_size
        )));
    }
    let mut re = vec![0.0; fft_size];
    let mut im = vec![0.0; fft_size];
    re[..frame.len()].copy_from_slice(frame);
    fft_in_place(&mut re, &mut im);
    Ok((0..=fft_size / 2).map(|k| re[k] * re[k] + im[k] * im[k]).collect())
}
