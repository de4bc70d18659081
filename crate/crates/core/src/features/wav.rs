use std::path::Path;

use crate::error::{Error, Result};
use crate::features::AudioSignal;

fn wav_err(path: &Path, detail: impl Into<String>) -> Error {
    Error::Wav { path: path.to_path_buf(), detail: detail.into() }
}

/// Read a 16-bit PCM WAV file. Multi-channel files are reduced to their
/// first channel; samples are scaled by 1/32768.
pub fn read_wav(path: &Path) -> Result<AudioSignal> {
    let mut reader =
        hound::WavReader::open(path).map_err(|e| wav_err(path, e.to_string()))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(wav_err(
            path,
            format!(
                "unsupported encoding: {} bits {:?}, expected 16-bit PCM",
                spec.bits_per_sample, spec.sample_format
            ),
        ));
    }
    if spec.channels == 0 || spec.channels > 2 {
        return Err(wav_err(path, format!("unsupported channel count {}", spec.channels)));
    }
    let step = spec.channels as usize;
    let mut samples = Vec::new();
    for (i, s) in reader.samples::<i16>().enumerate() {
        let s = s.map_err(|e| wav_err(path, e.to_string()))?;
        if i % step == 0 {
            samples.push(s as f64 / 32768.0);
        }
    }
    Ok(AudioSignal { samples, sample_rate: spec.sample_rate })
}

/// Write a mono 16-bit PCM WAV file; samples are clamped to [-1, 1].
pub fn write_wav(path: &Path, signal: &AudioSignal) -> Result<()> {
    signal.validate()?;
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer =
        hound::WavWriter::create(path, spec).map_err(|e| wav_err(path, e.to_string()))?;
    for &s in &signal.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v).map_err(|e| wav_err(path, e.to_string()))?;
    }
    writer.finalize().map_err(|e| wav_err(path, e.to_string()))?;
    Ok(())
}
