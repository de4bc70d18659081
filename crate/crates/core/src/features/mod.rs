//! Log mel spectrogram extraction.

pub mod fft;
pub mod wav;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use fft::{is_power_of_two, next_power_of_two, power_spectrum};

/// A mono audio signal with samples nominally in [-1, 1].
#[derive(Debug, Clone)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSignal {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate is zero".into()));
        }
        if self.samples.is_empty() {
            return Err(Error::InvalidInput("signal is empty".into()));
        }
        if !self.samples.iter().all(|s| s.is_finite()) {
            return Err(Error::InvalidInput("signal contains non-finite samples".into()));
        }
        Ok(())
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmsConfig {
    pub frame_len_ms: f64,
    pub hop_ms: f64,
    pub n_mel: usize,
    /// FFT length; `None` picks the next power of two at least the frame length.
    pub fft_size: Option<usize>,
    pub fmin_hz: f64,
    /// Upper filterbank edge; `None` uses the Nyquist frequency.
    pub fmax_hz: Option<f64>,
    /// Power values are clamped to this floor before the log.
    pub log_floor: f64,
}

impl Default for LmsConfig {
    fn default() -> LmsConfig {
        LmsConfig {
            frame_len_ms: 40.0,
            hop_ms: 20.0,
            n_mel: 64,
            fft_size: None,
            fmin_hz: 0.0,
            fmax_hz: None,
            log_floor: 1e-10,
        }
    }
}

/// Frame and FFT lengths resolved against a concrete sample rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedLms {
    pub frame_len: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
}

fn ms_to_samples(ms: f64, sample_rate: u32) -> usize {
    (ms * sample_rate as f64 / 1000.0).round() as usize
}

impl LmsConfig {
    pub fn resolve(&self, sample_rate: u32) -> Result<ResolvedLms> {
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate is zero".into()));
        }
        if !(self.frame_len_ms > 0.0 && self.hop_ms > 0.0) {
            return Err(Error::InvalidInput("frame and hop lengths must be positive".into()));
        }
        if self.hop_ms > self.frame_len_ms {
            return Err(Error::InvalidInput(format!(
                "hop {} ms exceeds frame length {} ms",
                self.hop_ms, self.frame_len_ms
            )));
        }
        if self.n_mel == 0 {
            return Err(Error::InvalidInput("n_mel must be at least 1".into()));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return Err(Error::InvalidInput("log floor must be positive and finite".into()));
        }
        let frame_len = ms_to_samples(self.frame_len_ms, sample_rate);
        let hop = ms_to_samples(self.hop_ms, sample_rate);
        if frame_len < 2 || hop == 0 {
            return Err(Error::InvalidInput(format!(
                "frame of {} ms at {} Hz is too short",
                self.frame_len_ms, sample_rate
            )));
        }
        let fft_size = match self.fft_size {
            Some(n) => {
                if !is_power_of_two(n) {
                    return Err(Error::InvalidInput(format!(
                        "fft size {n} is not a power of two"
                    )));
                }
                if n < frame_len {
                    return Err(Error::InvalidInput(format!(
                        "fft size {n} is smaller than the frame length {frame_len}"
                    )));
                }
                n
            }
            None => next_power_of_two(frame_len),
        };
        let nyquist = sample_rate as f64 / 2.0;
        let fmax = self.fmax_hz.unwrap_or(nyquist);
        if !(self.fmin_hz >= 0.0 && self.fmin_hz < fmax && fmax <= nyquist) {
            return Err(Error::InvalidInput(format!(
                "filterbank range [{}, {}] Hz is invalid for sample rate {}",
                self.fmin_hz, fmax, sample_rate
            )));
        }
        Ok(ResolvedLms { frame_len, hop, fft_size, fmin_hz: self.fmin_hz, fmax_hz: fmax })
    }
}

/// A log mel spectrogram together with the configuration that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LmsFeature {
    /// Band-major values, one row per mel band and one column per frame.
    pub values: Matrix,
    pub config: LmsConfig,
}

impl LmsFeature {
    pub fn n_bands(&self) -> usize {
        self.values.rows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.cols()
    }
}

/// Split a signal into full frames of `frame_len` samples every `hop`
/// samples; a trailing partial frame is dropped.
pub fn frame_signal(samples: &[f64], frame_len: usize, hop: usize) -> Result<Vec<Vec<f64>>> {
    if frame_len == 0 || hop == 0 {
        return Err(Error::InvalidInput("frame and hop must be positive".into()));
    }
    if samples.len() < frame_len {
        return Err(Error::InvalidInput(format!(
            "signal of {} samples is shorter than one frame ({})",
            samples.len(),
            frame_len
        )));
    }
    let count = (samples.len() - frame_len) / hop + 1;
    Ok((0..count).map(|i| samples[i * hop..i * hop + frame_len].to_vec()).collect())
}

/// Multiply a frame by the Hamming window in place.
pub fn apply_hamming(frame: &mut [f64]) -> Result<()> {
    let n = frame.len();
    if n < 2 {
        return Err(Error::InvalidInput("hamming window needs at least 2 samples".into()));
    }
    let denom = (n - 1) as f64;
    for (i, v) in frame.iter_mut().enumerate() {
        *v *= 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / denom).cos();
    }
    Ok(())
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank over one-sided FFT bins.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// n_mel x (fft_size / 2 + 1) weights.
    pub weights: Matrix,
    /// Peak frequency of each filter in Hz, strictly increasing.
    pub centers_hz: Vec<f64>,
}

pub fn mel_filterbank(cfg: &LmsConfig, sample_rate: u32) -> Result<MelFilterbank> {
    let res = cfg.resolve(sample_rate)?;
    let n_bins = res.fft_size / 2 + 1;
    let mel_lo = hz_to_mel(res.fmin_hz);
    let mel_hi = hz_to_mel(res.fmax_hz);
    let edges_hz: Vec<f64> = (0..cfg.n_mel + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.n_mel + 1) as f64))
        .collect();

    let bin_hz = sample_rate as f64 / res.fft_size as f64;
    let mut weights = Matrix::zeros(cfg.n_mel, n_bins);
    for b in 0..cfg.n_mel {
        let (left, center, right) = (edges_hz[b], edges_hz[b + 1], edges_hz[b + 2]);
        let mut any = false;
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let w = if f >= left && f <= center {
                (f - left) / (center - left)
            } else if f > center && f <= right {
                (right - f) / (right - center)
            } else {
                0.0
            };
            if w > 0.0 {
                weights.set(b, k, w);
                any = true;
            }
        }
        if !any {
            return Err(Error::InvalidInput(format!(
                "mel filter {b} covers no FFT bin; increase fft_size or reduce n_mel"
            )));
        }
    }
    Ok(MelFilterbank { weights, centers_hz: edges_hz[1..=cfg.n_mel].to_vec() })
}

/// Compute the log mel spectrogram of a signal.
pub fn extract_lms(signal: &AudioSignal, cfg: &LmsConfig) -> Result<LmsFeature> {
    signal.validate()?;
    let res = cfg.resolve(signal.sample_rate)?;
    let fb = mel_filterbank(cfg, signal.sample_rate)?;
    let frames = frame_signal(&signal.samples, res.frame_len, res.hop)?;

    let mut values = Matrix::zeros(cfg.n_mel, frames.len());
    for (t, mut frame) in frames.into_iter().enumerate() {
        apply_hamming(&mut frame)?;
        let ps = power_spectrum(&frame, res.fft_size)?;
        for b in 0..cfg.n_mel {
            let row = fb.weights.row(b);
            let energy: f64 = row.iter().zip(&ps).map(|(w, p)| w * p).sum();
            values.set(b, t, energy.max(cfg.log_floor).ln());
        }
    }
    Ok(LmsFeature { values, config: cfg.clone() })
}
