use std::f64::consts::PI;

use coughscreen::audio::{decode_wav_bytes, encode_wav_pcm16, resample, AudioClip};
use coughscreen::dsp::{Spectrum, SpectrumAnalyzer};
use coughscreen::lld::{
    extract_lld_matrix, spectral_centroid, spectral_entropy, spectral_rolloff, spectral_spread, zero_crossing_rate,
    Extractor, LldConfig,
};
use coughscreen::summarize::summarize_clip;
use proptest::prelude::*;

fn tone(freq: f64, rate: u32, seconds: f64) -> AudioClip<f64> {
    let n = (f64::from(rate) * seconds) as usize;
    let samples = (0..n)
        .map(|t| 0.5 * (2.0 * PI * freq * t as f64 / f64::from(rate)).sin())
        .collect();
    AudioClip::new("tone", "p", samples, rate).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fft_is_linear(
        a in prop::collection::vec(-1.0f64..1.0, 64),
        b in prop::collection::vec(-1.0f64..1.0, 64),
        k in -3.0f64..3.0,
    ) {
        let fft = SpectrumAnalyzer::<f64>::new(64);
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + k * y).collect();
        let (fa, fb, fs) = (fft.complex(&a).unwrap(), fft.complex(&b).unwrap(), fft.complex(&sum).unwrap());
        for i in 0..64 {
            let want = fa[i] + fb[i] * k;
            prop_assert!((fs[i] - want).norm() < 1e-10);
        }
    }

    #[test]
    fn spectral_descriptors_stay_in_range(p in prop::collection::vec(0.0f64..10.0, 2..200)) {
        let spec = Spectrum {
            magnitudes: p.iter().map(|v| v.sqrt()).collect(),
            powers: p.clone(),
            bin_hz: 1.0,
        };
        let e = spectral_entropy(&spec);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&e));
        prop_assert!(spectral_rolloff(&spec, 0.9) < p.len());
        prop_assert!(spectral_spread(&spec) >= 0.0);
        let c = spectral_centroid(&spec);
        prop_assert!(c >= 0.0 && c <= (p.len() - 1) as f64 + 1e-9);
    }

    #[test]
    fn zcr_in_unit_interval(x in prop::collection::vec(-1.0f64..1.0, 1..300)) {
        let z = zero_crossing_rate(&x);
        prop_assert!((0.0..1.0).contains(&z));
    }

    #[test]
    fn pcm16_round_trip_within_one_step(x in prop::collection::vec(-0.99f64..0.99, 1..500)) {
        let bytes = encode_wav_pcm16(&x, 16000).unwrap();
        let clip = decode_wav_bytes::<f64>(&bytes, "c").unwrap();
        prop_assert_eq!(clip.sample_rate, 16000);
        prop_assert_eq!(clip.samples.len(), x.len());
        for (a, b) in clip.samples.iter().zip(&x) {
            prop_assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }
}

#[test]
fn resampling_keeps_a_low_tone() {
    let clip = tone(440.0, 44100, 0.5);
    let down = resample(&clip, 16000).unwrap();
    assert_eq!(down.samples.len(), 8000);
    let fft = SpectrumAnalyzer::<f64>::new(4096);
    let spec = fft.spectrum(&down.samples[2000..6096], 16000).unwrap();
    let peak = (0..spec.n_bins())
        .max_by(|&a, &b| spec.powers[a].total_cmp(&spec.powers[b]))
        .unwrap();
    assert!((peak as f64 * spec.bin_hz - 440.0).abs() < spec.bin_hz);
}

#[test]
fn tone_centroid_tracks_frequency() {
    let ex = Extractor::<f64>::new(LldConfig::default()).unwrap();
    let mut last = 0.0;
    for f in [300.0, 1000.0, 3000.0, 6000.0] {
        let cols = ex.temporal_spectral(&tone(f, 16000, 0.3)).unwrap();
        let mean_centroid = cols[3].iter().sum::<f64>() / cols[3].len() as f64;
        assert!(mean_centroid > last);
        last = mean_centroid;
    }
}

#[test]
fn full_extraction_is_finite_and_sized() {
    let m = extract_lld_matrix(&tone(1200.0, 22050, 0.5)).unwrap();
    assert_eq!(m.n_descriptors(), 21);
    assert!(m.is_finite());
    let fv = summarize_clip(&m).unwrap();
    assert_eq!(fv.len(), 84);
    assert!(fv.values.iter().all(|v| v.is_finite()));
}

#[test]
fn silence_extracts_without_nan() {
    let clip = AudioClip::new("s", "p", vec![0.0f64; 8000], 16000).unwrap();
    let fv = summarize_clip(&extract_lld_matrix(&clip).unwrap()).unwrap();
    assert!(fv.values.iter().all(|v| v.is_finite()));
}

#[test]
fn too_short_clip_is_rejected() {
    let clip = AudioClip::new("s", "p", vec![0.1f64; 100], 16000).unwrap();
    assert!(matches!(extract_lld_matrix(&clip), Err(coughscreen::Error::TooShort { .. })));
}
