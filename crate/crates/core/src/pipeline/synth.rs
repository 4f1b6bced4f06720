//! Seeded synthetic cough corpus: band-limited noise bursts whose band
//! depends on the class, plus metadata with a tunable class correlation.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::{encode_wav_pcm16, write_manifest, Label, Manifest, ManifestRow, MetadataRecord, Sex};
use crate::error::{Error, Result};
use crate::eval::derive_seed;

/// Amplitude of the class-independent noise band relative to the burst.
const BACKGROUND_LEVEL: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticCorpusSpec {
    pub n_participants: usize,
    pub clips_min: usize,
    pub clips_max: usize,
    pub positive_fraction: f64,
    pub duration_min_s: f64,
    pub duration_max_s: f64,
    pub sample_rate: u32,
    pub negative_band: (f64, f64),
    pub positive_band: (f64, f64),
    /// Each clip uses its own class band with probability `(1 + s) / 2` and
    /// the other class's band otherwise: 1 separates the classes, 0 makes
    /// the audio independent of the label.
    pub audio_strength: f64,
    /// 0 leaves every metadata field independent of the label.
    pub metadata_strength: f64,
    pub missing_fraction: f64,
    /// Shuffle participant labels after generation (null corpus).
    pub permute_labels: bool,
    pub seed: u64,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        Self {
            n_participants: 40,
            clips_min: 5,
            clips_max: 5,
            positive_fraction: 0.5,
            duration_min_s: 0.45,
            duration_max_s: 0.6,
            sample_rate: 44100,
            negative_band: (300.0, 1200.0),
            positive_band: (2000.0, 6000.0),
            audio_strength: 1.0,
            metadata_strength: 0.0,
            missing_fraction: 0.0,
            permute_labels: false,
            seed: 0,
        }
    }
}

impl SyntheticCorpusSpec {
    pub fn n_positive(&self) -> usize {
        (self.n_participants as f64 * self.positive_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic corpus: {m}")));
        let n_pos = self.n_positive();
        if n_pos == 0 || n_pos >= self.n_participants {
            return bad("both classes need at least one participant");
        }
        if self.clips_min == 0 || self.clips_min > self.clips_max {
            return bad("clip counts must satisfy 1 <= clips_min <= clips_max");
        }
        if !(self.duration_min_s >= 0.1 && self.duration_min_s <= self.duration_max_s) {
            return bad("durations must satisfy 0.1 <= min <= max");
        }
        let nyquist = f64::from(self.sample_rate) / 2.0;
        for (lo, hi) in [self.negative_band, self.positive_band] {
            if !(lo >= 0.0 && lo < hi && hi < nyquist) {
                return bad("bands must lie inside (0, Nyquist) with low < high");
            }
        }
        for (name, v) in [
            ("audio_strength", self.audio_strength),
            ("metadata_strength", self.metadata_strength),
            ("missing_fraction", self.missing_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Unit-RMS Gaussian noise restricted to `[lo, hi]` Hz.
pub fn band_noise(n: usize, lo: f64, hi: f64, rate: u32, rng: &mut impl Rng) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(StandardNormal.sample(rng), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * f64::from(rate) / n as f64;
        if f < lo || f > hi {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let out: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        out.iter().map(|v| v / rms).collect()
    } else {
        out
    }
}

fn cough_clip(spec: &SyntheticCorpusSpec, positive: bool, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let rate = spec.sample_rate;
    let dur = rng.gen_range(spec.duration_min_s..=spec.duration_max_s);
    let n = (dur * f64::from(rate)).round() as usize;
    let own = rng.gen_bool((1.0 + spec.audio_strength) / 2.0);
    let (lo, hi) = if positive == own { spec.positive_band } else { spec.negative_band };
    let class = band_noise(n, lo, hi, rate, rng);
    let bg_lo: f64 = rng.gen_range(150.0..2500.0);
    let bg_hi = (bg_lo + rng.gen_range(800.0..4500.0)).min(f64::from(rate) / 2.0 - 100.0);
    let background = band_noise(n, bg_lo, bg_hi, rate, rng);
    let tau = rng.gen_range(0.08..0.2);
    let gain = rng.gen_range(0.2..0.6);
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / f64::from(rate);
            let env = (1.0 - (-t / 0.008).exp()) * (-t / tau).exp();
            env * (class[i] + BACKGROUND_LEVEL * background[i])
        })
        .collect();
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v *= gain / peak);
    }
    x
}

/// Same-size draws per class from one sorted pool, so with no shift both
/// classes receive the same multiset of values.
fn quota_numeric(rng: &mut ChaCha8Rng, n_pos: usize, n_neg: usize, mut draw: impl FnMut(&mut ChaCha8Rng) -> f64) -> (Vec<f64>, Vec<f64>) {
    let m = n_pos.max(n_neg);
    let mut pool: Vec<f64> = (0..m).map(|_| draw(rng)).collect();
    pool.sort_by(f64::total_cmp);
    let mut pick = |c: usize| {
        let mut v: Vec<f64> = (0..c)
            .map(|i| pool[(((i as f64 + 0.5) * m as f64 / c as f64) as usize).min(m - 1)])
            .collect();
        v.shuffle(rng);
        v
    };
    let pos = pick(n_pos);
    let neg = pick(n_neg);
    (pos, neg)
}

fn quota_binary(rng: &mut ChaCha8Rng, count: usize, p: f64) -> Vec<bool> {
    let yes = (p * count as f64).round() as usize;
    let mut v: Vec<bool> = (0..count).map(|i| i < yes).collect();
    v.shuffle(rng);
    v
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

/// One record per participant; `labels[i]` is participant `i`'s class.
pub fn synth_metadata(labels: &[bool], strength: f64, missing: f64, seed: u64) -> Vec<MetadataRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    let normal = |m: f64, s: f64| Normal::new(m, s).expect("valid normal");
    let numeric = |rng: &mut ChaCha8Rng, d: Normal<f64>, lo: f64, shift: f64| {
        let (p, n) = quota_numeric(rng, n_pos, n_neg, |r| d.sample(r).max(lo));
        (p.into_iter().map(|v| round1(v + shift)).collect::<Vec<_>>(), n.into_iter().map(round1).collect::<Vec<_>>())
    };
    let age = numeric(&mut rng, normal(38.0, 12.0), 18.0, 0.0);
    let height = numeric(&mut rng, normal(165.0, 9.0), 130.0, 0.0);
    let weight = numeric(&mut rng, normal(62.0, 11.0), 35.0, 0.0);
    let heart = numeric(&mut rng, normal(85.0, 12.0), 45.0, 0.0);
    let temp = numeric(&mut rng, normal(36.8, 0.4), 35.0, 1.5 * strength);
    let exp: Exp<f64> = Exp::new(1.0 / 21.0).expect("valid rate");
    let (dur_p, dur_n) = quota_numeric(&mut rng, n_pos, n_neg, |r| exp.sample(r).ceil());
    let binary = |rng: &mut ChaCha8Rng, p_neg: f64, p_pos: f64| {
        (quota_binary(rng, n_pos, p_pos), quota_binary(rng, n_neg, p_neg))
    };
    let sex = binary(&mut rng, 0.5, 0.5);
    let prior = binary(&mut rng, 0.15, 0.15);
    let hemo = binary(&mut rng, 0.1, 0.1);
    let smoke = binary(&mut rng, 0.2, 0.2);
    let fever = binary(&mut rng, 0.3, 0.3);
    let sweats = binary(&mut rng, 0.35, 0.35);
    let wloss = binary(&mut rng, 0.25, 0.25 + 0.65 * strength);

    let (mut ip, mut ineg) = (0, 0);
    // prior-TB site cycles per class so site counts follow the same quota
    let mut sites = [0usize; 2];
    labels
        .iter()
        .map(|&positive| {
            let j = if positive { ip } else { ineg };
            if positive {
                ip += 1;
            } else {
                ineg += 1;
            }
            let num = |pair: &(Vec<f64>, Vec<f64>)| if positive { pair.0[j] } else { pair.1[j] };
            let bin = |pair: &(Vec<bool>, Vec<bool>)| if positive { pair.0[j] } else { pair.1[j] };
            let had_tb = bin(&prior);
            let site = if had_tb {
                let c = &mut sites[usize::from(positive)];
                *c += 1;
                (*c - 1) % 3
            } else {
                3
            };
            let mut r = MetadataRecord {
                age: Some(num(&age)),
                sex: Some(if bin(&sex) { Sex::Male } else { Sex::Female }),
                height: Some(num(&height)),
                weight: Some(num(&weight)),
                cough_duration_days: Some(if positive { dur_p[j] } else { dur_n[j] }),
                prior_tb: Some(had_tb),
                prior_tb_pulmonary: Some(had_tb && site == 0),
                prior_tb_extrapulmonary: Some(had_tb && site == 1),
                prior_tb_unknown: Some(had_tb && site == 2),
                hemoptysis: Some(bin(&hemo)),
                heart_rate: Some(num(&heart)),
                temperature: Some(num(&temp)),
                smoke_last_week: Some(bin(&smoke)),
                fever: Some(bin(&fever)),
                night_sweats: Some(bin(&sweats)),
                weight_loss: Some(bin(&wloss)),
            };
            if missing > 0.0 {
                blank_fields(&mut r, missing, &mut rng);
            }
            r
        })
        .collect()
}

fn blank_fields(r: &mut MetadataRecord, p: f64, rng: &mut ChaCha8Rng) {
    macro_rules! maybe {
        ($($f:ident),*) => {$(
            if rng.gen_bool(p) {
                r.$f = None;
            }
        )*};
    }
    maybe!(
        age, sex, height, weight, cough_duration_days, prior_tb, prior_tb_pulmonary,
        prior_tb_extrapulmonary, prior_tb_unknown, hemoptysis, heart_rate, temperature,
        smoke_last_week, fever, night_sweats, weight_loss
    );
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SynthSummary {
    pub n_participants: usize,
    pub n_positive: usize,
    pub n_clips: usize,
}

/// Writes `manifest.csv` and `audio/*.wav` under `out_dir`.
pub fn generate_corpus(spec: &SyntheticCorpusSpec, out_dir: &Path) -> Result<(Manifest, SynthSummary)> {
    spec.validate()?;
    let audio_dir = out_dir.join("audio");
    fs::create_dir_all(&audio_dir).map_err(|e| Error::io(&audio_dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_participants;
    let n_pos = spec.n_positive();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut positive = vec![false; n];
    for &i in &order[..n_pos] {
        positive[i] = true;
    }
    let metadata = synth_metadata(
        &positive,
        spec.metadata_strength,
        spec.missing_fraction,
        derive_seed(spec.seed, 1),
    );
    let mut labels = positive.clone();
    if spec.permute_labels {
        labels.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 2)));
    }

    let mut rows = Vec::new();
    for p in 0..n {
        let mut prng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 100 + p as u64));
        let n_clips = prng.gen_range(spec.clips_min..=spec.clips_max);
        let pid = format!("P{p:03}");
        for c in 0..n_clips {
            let clip_id = format!("{pid}_c{c:02}");
            let samples = cough_clip(spec, positive[p], &mut prng);
            let bytes = encode_wav_pcm16(&samples, spec.sample_rate)?;
            let rel = format!("audio/{clip_id}.wav");
            let path = out_dir.join(&rel);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            rows.push(ManifestRow {
                clip_id,
                file_path: rel,
                participant_id: pid.clone(),
                label: if labels[p] { Label::Positive } else { Label::Negative },
                metadata: metadata[p].clone(),
            });
        }
    }
    let manifest = Manifest::new(rows)?;
    let path = out_dir.join("manifest.csv");
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_manifest(&manifest, file)?;
    let summary = SynthSummary {
        n_participants: n,
        n_positive: labels.iter().filter(|&&l| l).count(),
        n_clips: manifest.len(),
    };
    Ok((manifest, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::FieldValue;

    fn point_biserial(x: &[f64], y: &[bool]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().filter(|&&b| b).count() as f64 / n;
        let cov: f64 = x.iter().zip(y).map(|(a, &b)| (a - mx) * (f64::from(u8::from(b)) - my)).sum();
        let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|&b| (f64::from(u8::from(b)) - my).powi(2)).sum();
        if vx == 0.0 {
            0.0
        } else {
            cov / (vx * vy).sqrt()
        }
    }

    fn field_columns(records: &[MetadataRecord]) -> Vec<Vec<f64>> {
        (0..16)
            .map(|j| {
                records
                    .iter()
                    .map(|r| match r.fields()[j] {
                        FieldValue::Numeric(v) => v.unwrap(),
                        FieldValue::Binary(b) => f64::from(u8::from(b.unwrap())),
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn band_noise_stays_in_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 4410;
        let x = band_noise(n, 2000.0, 6000.0, 44100, &mut rng);
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        assert!((rms - 1.0).abs() < 1e-12);
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let outside: f64 = (0..n / 2)
            .filter(|&k| {
                let f = k as f64 * 10.0;
                !(2000.0..=6000.0).contains(&f)
            })
            .map(|k| buf[k].norm_sqr())
            .sum();
        let total: f64 = (0..n / 2).map(|k| buf[k].norm_sqr()).sum();
        assert!(outside / total < 1e-20);
    }

    #[test]
    fn zero_strength_metadata_is_uncorrelated() {
        let labels: Vec<bool> = (0..200).map(|i| i % 2 == 0).collect();
        let recs = synth_metadata(&labels, 0.0, 0.0, 3);
        for (j, col) in field_columns(&recs).iter().enumerate() {
            let r = point_biserial(col, &labels);
            assert!(r.abs() < 0.1, "field {j}: r = {r}");
        }
        let strong = synth_metadata(&labels, 1.0, 0.0, 3);
        let cols = field_columns(&strong);
        assert!(point_biserial(&cols[11], &labels) > 0.7);
        assert!(point_biserial(&cols[15], &labels) > 0.5);
    }

    #[test]
    fn missing_fraction_blanks_cells() {
        let labels: Vec<bool> = (0..50).map(|i| i < 25).collect();
        let recs = synth_metadata(&labels, 0.0, 0.3, 1);
        let missing = recs
            .iter()
            .flat_map(|r| r.fields())
            .filter(|f| matches!(f, FieldValue::Numeric(None) | FieldValue::Binary(None)))
            .count();
        assert!(missing > 100 && missing < 400, "{missing}");
    }

    #[test]
    fn spec_validation() {
        assert!(SyntheticCorpusSpec::default().validate().is_ok());
        let one_class = SyntheticCorpusSpec {
            positive_fraction: 0.0,
            ..Default::default()
        };
        assert!(one_class.validate().is_err());
        let bad_band = SyntheticCorpusSpec {
            positive_band: (2000.0, 30000.0),
            ..Default::default()
        };
        assert!(bad_band.validate().is_err());
    }
}
