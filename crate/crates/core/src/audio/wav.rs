use std::io::{Cursor, Read};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::AudioClip;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Decodes a PCM WAV file into a mono clip.
///
/// Integer samples are divided by `2^(bits-1)`; channels are averaged.
/// The clip id defaults to the file stem and the participant id is left
/// empty for the caller to fill in.
pub fn decode_wav<T: Real>(path: &Path) -> Result<AudioClip<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_wav_bytes(&bytes, &stem)
}

pub fn decode_wav_bytes<T: Real>(bytes: &[u8], clip_id: &str) -> Result<AudioClip<T>> {
    let reader = WavReader::new(Cursor::new(bytes)).map_err(|e| map_hound(clip_id, e))?;
    let spec = reader.spec();
    let channels = usize::from(spec.channels);
    if channels == 0 {
        return Err(Error::Decode(format!("{clip_id}: zero channels")));
    }
    let interleaved = read_interleaved(reader, spec, clip_id)?;
    if interleaved.len() % channels != 0 {
        return Err(Error::Decode(format!("{clip_id}: truncated sample frame")));
    }
    let inv_channels = 1.0 / channels as f64;
    let samples: Vec<T> = interleaved
        .chunks_exact(channels)
        .map(|frame| T::lit(frame.iter().sum::<f64>() * inv_channels))
        .collect();
    AudioClip::new(clip_id, "", samples, spec.sample_rate)
}

fn read_interleaved<R: Read>(
    mut reader: WavReader<R>,
    spec: WavSpec,
    clip_id: &str,
) -> Result<Vec<f64>> {
    let expected = reader.len() as usize;
    let out: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(|e| map_hound(clip_id, e))?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / f64::from(1u32 << (bits - 1));
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) * scale))
                .collect::<Result<_, _>>()
                .map_err(|e| map_hound(clip_id, e))?
        }
        (fmt, bits) => {
            return Err(Error::UnsupportedFormat(format!(
                "{clip_id}: {bits}-bit {fmt:?} samples"
            )))
        }
    };
    if out.len() != expected {
        return Err(Error::Decode(format!(
            "{clip_id}: header declares {expected} samples, found {}",
            out.len()
        )));
    }
    Ok(out)
}

fn map_hound(clip_id: &str, e: hound::Error) -> Error {
    match e {
        hound::Error::Unsupported => Error::UnsupportedFormat(format!("{clip_id}: {e}")),
        other => Error::Decode(format!("{clip_id}: {other}")),
    }
}

/// Encodes mono samples as 16-bit PCM. Values are clamped to `[-1, 1)`.
pub fn encode_wav_pcm16<T: Real>(samples: &[T], sample_rate: u32) -> Result<Vec<u8>> {
    let spec = WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut buf = Cursor::new(Vec::with_capacity(44 + 2 * samples.len()));
    {
        let mut writer =
            WavWriter::new(&mut buf, spec).map_err(|e| Error::Decode(e.to_string()))?;
        for &s in samples {
            let v = (s.to_f64_lossy() * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            writer
                .write_sample(v)
                .map_err(|e| Error::Decode(e.to_string()))?;
        }
        writer.finalize().map_err(|e| Error::Decode(e.to_string()))?;
    }
    Ok(buf.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav_bytes<S: hound::Sample + Copy>(spec: WavSpec, samples: &[S]) -> Vec<u8> {
        let mut buf = Cursor::new(Vec::new());
        {
            let mut w = WavWriter::new(&mut buf, spec).unwrap();
            for &s in samples {
                w.write_sample(s).unwrap();
            }
            w.finalize().unwrap();
        }
        buf.into_inner()
    }

    fn int_spec(channels: u16, bits: u16) -> WavSpec {
        WavSpec {
            channels,
            sample_rate: 8000,
            bits_per_sample: bits,
            sample_format: SampleFormat::Int,
        }
    }

    #[test]
    fn pcm16_scaling() {
        let bytes = wav_bytes(int_spec(1, 16), &[16384i16, -32768, 0]);
        let clip: AudioClip<f64> = decode_wav_bytes(&bytes, "a").unwrap();
        assert_eq!(clip.samples, vec![0.5, -1.0, 0.0]);
        assert_eq!(clip.sample_rate, 8000);
    }

    #[test]
    fn stereo_is_averaged() {
        let spec = WavSpec {
            channels: 2,
            sample_rate: 44100,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        let bytes = wav_bytes(spec, &[1.0f32, 0.0, 1.0, 0.0]);
        let clip: AudioClip<f64> = decode_wav_bytes(&bytes, "s").unwrap();
        assert_eq!(clip.samples, vec![0.5, 0.5]);
    }

    #[test]
    fn other_bit_depths() {
        let bytes = wav_bytes(int_spec(1, 8), &[64i8, -128]);
        let clip: AudioClip<f64> = decode_wav_bytes(&bytes, "b8").unwrap();
        assert_eq!(clip.samples, vec![0.5, -1.0]);

        let bytes = wav_bytes(int_spec(1, 24), &[1i32 << 22]);
        let clip: AudioClip<f64> = decode_wav_bytes(&bytes, "b24").unwrap();
        assert_eq!(clip.samples, vec![0.5]);

        let bytes = wav_bytes(int_spec(1, 32), &[i32::MIN]);
        let clip: AudioClip<f64> = decode_wav_bytes(&bytes, "b32").unwrap();
        assert_eq!(clip.samples, vec![-1.0]);
    }

    #[test]
    fn truncated_file_is_decode_error() {
        let bytes = wav_bytes(int_spec(1, 16), &[1000i16; 64]);
        for cut in [10, 30, 44 + 33] {
            let err = decode_wav_bytes::<f64>(&bytes[..cut], "t").unwrap_err();
            assert!(matches!(err, Error::Decode(_)), "cut {cut}: {err:?}");
        }
    }

    #[test]
    fn garbage_header_is_decode_error() {
        let err = decode_wav_bytes::<f64>(b"definitely not a riff file", "g").unwrap_err();
        assert!(matches!(err, Error::Decode(_)));
    }

    #[test]
    fn pcm16_round_trip_within_one_lsb() {
        let samples: Vec<f64> = (0..500).map(|i| ((i as f64) * 0.37).sin() * 0.9).collect();
        let bytes = encode_wav_pcm16(&samples, 16000).unwrap();
        let clip: AudioClip<f64> = decode_wav_bytes(&bytes, "r").unwrap();
        for (a, b) in samples.iter().zip(&clip.samples) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }
}
