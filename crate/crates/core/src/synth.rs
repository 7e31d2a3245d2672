//! Synthetic multi-speaker dataset generation and stochastic feature-space
//! augmentation.
//!
//! The generative model is "speaker vector + session offset + frame noise":
//! each speaker is a point on the unit sphere, each group of utterances
//! shares a gaussian session offset, and every frame adds independent
//! gaussian noise. Segments of one utterance therefore share identity but
//! differ in nuisance, which is the structure contrastive training
//! exploits. Augmentation stands in for additive noise and channel
//! effects: SNR-controlled gaussian noise and a static per-dimension gain.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataio::{
    self, FeatureMatrix, Manifest, ManifestEntry, Trial, TrialLabel, TrialList,
};
use crate::error::{Error, Result};
use crate::seeds;

/// Hard cap on generated utterances.
pub const MAX_UTTERANCES: usize = 1 << 20;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_speakers: usize,
    pub utts_per_speaker: usize,
    pub groups_per_speaker: usize,
    /// Inclusive (min, max) frame count per utterance.
    pub frames_range: (usize, usize),
    pub feature_dim: usize,
    /// Std of the per-group session offset, applied per dimension.
    pub session_noise_std: f64,
    /// Std of independent per-frame gaussian noise.
    pub frame_noise_std: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_speakers < 2 {
            return Err(Error::invalid("num_speakers must be >= 2"));
        }
        if self.utts_per_speaker < 2 {
            return Err(Error::invalid("utts_per_speaker must be >= 2"));
        }
        if self.groups_per_speaker < 1 {
            return Err(Error::invalid("groups_per_speaker must be >= 1"));
        }
        if self.feature_dim < 2 {
            return Err(Error::invalid("feature_dim must be >= 2"));
        }
        if self.frames_range.0 < 4 {
            return Err(Error::invalid("frames_range.min must be >= 4"));
        }
        if self.frames_range.0 > self.frames_range.1 {
            return Err(Error::invalid("frames_range.min must be <= frames_range.max"));
        }
        if !self.session_noise_std.is_finite() || self.session_noise_std < 0.0 {
            return Err(Error::invalid("session_noise_std must be finite and >= 0"));
        }
        if !self.frame_noise_std.is_finite() || self.frame_noise_std < 0.0 {
            return Err(Error::invalid("frame_noise_std must be finite and >= 0"));
        }
        let total = self
            .num_speakers
            .checked_mul(self.utts_per_speaker)
            .ok_or_else(|| Error::invalid("num_speakers * utts_per_speaker overflows"))?;
        if total > MAX_UTTERANCES {
            return Err(Error::invalid(format!(
                "{total} utterances exceeds the {MAX_UTTERANCES} limit"
            )));
        }
        Ok(())
    }
}

/// What the augmentation applies when the apply-probability gate passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentMode {
    NoiseOnly,
    ChannelOnly,
    Both,
    /// Pick one of the three concrete modes uniformly per call.
    RandomChoice,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub mode: AugmentMode,
    /// Uniform range the per-call SNR (dB) is drawn from.
    pub snr_db_range: (f64, f64),
    /// Std of the log-gain applied per feature dimension.
    pub channel_scale_std: f64,
    /// Probability that any augmentation is applied at all.
    pub apply_prob: f64,
}

impl AugmentConfig {
    /// Defaults for contrastive training: always augment, SNR 5-20 dB.
    pub fn contrastive_default() -> Self {
        Self {
            mode: AugmentMode::RandomChoice,
            snr_db_range: (5.0, 20.0),
            channel_scale_std: 0.1,
            apply_prob: 1.0,
        }
    }

    /// Defaults for pseudo-label training: augment with probability 0.6,
    /// SNR 0-20 dB.
    pub fn pseudo_default() -> Self {
        Self {
            mode: AugmentMode::RandomChoice,
            snr_db_range: (0.0, 20.0),
            channel_scale_std: 0.1,
            apply_prob: 0.6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_db_range.0 > self.snr_db_range.1 {
            return Err(Error::invalid("snr_db_range low must be <= high"));
        }
        if !self.channel_scale_std.is_finite() || self.channel_scale_std < 0.0 {
            return Err(Error::invalid("channel_scale_std must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.apply_prob) {
            return Err(Error::invalid("apply_prob must be in [0, 1]"));
        }
        Ok(())
    }
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self::pseudo_default()
    }
}

/// Everything `generate_dataset` wrote: the manifest (speaker column blank
/// so training paths never see identities) and the separate truth map.
#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub manifest: Manifest,
    /// `(utterance_id, speaker_id)` rows, written to `truth.tsv`.
    pub truth: Vec<(String, String)>,
    pub trials: TrialList,
}

/// Generate the synthetic dataset under `out_dir`: `manifest.tsv`,
/// `features/*.feat`, `truth.tsv`, and a verification trial list
/// `trials.txt`.
///
/// Deterministic given `cfg.seed`: every speaker, group, and utterance has
/// its own derived RNG stream, so results are independent of generation
/// order.
pub fn generate_dataset(cfg: &SynthConfig, out_dir: &Path) -> Result<GeneratedDataset> {
    cfg.validate()?;
    let feat_dir = out_dir.join("features");
    fs::create_dir_all(&feat_dir).map_err(|e| Error::io(&feat_dir, e))?;

    let mut speaker_mus: Vec<Vec<f64>> = Vec::with_capacity(cfg.num_speakers);
    for s in 0..cfg.num_speakers {
        let mut rng = seeds::stream(cfg.seed, &format!("synth/speaker/{s}"));
        speaker_mus.push(unit_sphere_vector(cfg.feature_dim, &mut rng));
    }

    let mut entries = Vec::new();
    let mut truth = Vec::new();
    for s in 0..cfg.num_speakers {
        let speaker_id = format!("spk{s:04}");
        // Session offsets, one per group, shared by all member utterances.
        let offsets: Vec<Vec<f64>> = (0..cfg.groups_per_speaker)
            .map(|g| {
                let mut rng = seeds::stream(cfg.seed, &format!("synth/session/{s}/{g}"));
                gaussian_vector(cfg.feature_dim, cfg.session_noise_std, &mut rng)
            })
            .collect();
        for u in 0..cfg.utts_per_speaker {
            let g = u % cfg.groups_per_speaker;
            let group_id = format!("{speaker_id}_g{g:02}");
            let utterance_id = format!("{group_id}_u{u:04}");
            let mut rng = seeds::stream(cfg.seed, &format!("synth/utt/{s}/{u}"));
            let frames = rng.random_range(cfg.frames_range.0..=cfg.frames_range.1);
            let mut values = Vec::with_capacity(frames * cfg.feature_dim);
            let frame_noise = Normal::new(0.0, cfg.frame_noise_std.max(f64::MIN_POSITIVE))
                .map_err(|e| Error::invalid(e.to_string()))?;
            for _ in 0..frames {
                for d in 0..cfg.feature_dim {
                    let noise = if cfg.frame_noise_std > 0.0 {
                        frame_noise.sample(&mut rng)
                    } else {
                        0.0
                    };
                    values.push((speaker_mus[s][d] + offsets[g][d] + noise) as f32);
                }
            }
            let matrix = FeatureMatrix::new(frames, cfg.feature_dim, values)?;
            let rel_path = format!("features/{utterance_id}.feat");
            dataio::write_features(&matrix, &out_dir.join(&rel_path))?;
            entries.push(ManifestEntry {
                utterance_id: utterance_id.clone(),
                group_id,
                feature_path: rel_path.into(),
                true_speaker_id: None,
            });
            truth.push((utterance_id, speaker_id.clone()));
        }
    }

    let manifest = Manifest { entries };
    dataio::write_manifest(&manifest, &out_dir.join("manifest.tsv"))?;
    dataio::write_label_tsv(&truth, &out_dir.join("truth.tsv"))?;
    let trials = generate_trials(&manifest, &truth, 2000, seeds::derive_u64(cfg.seed, "synth/trials"))?;
    dataio::write_trials(&trials, &out_dir.join("trials.txt"))?;

    // Re-read so feature paths are resolved exactly as any consumer sees them.
    let manifest = dataio::read_manifest(&out_dir.join("manifest.tsv"))?;
    Ok(GeneratedDataset { manifest, truth, trials })
}

/// Build a verification trial list from a labeled dataset: target pairs are
/// same-speaker utterances (cross-group where the speaker has several
/// groups), nontargets are cross-speaker pairs. At most `max_per_class` of
/// each, sampled with the given seed.
pub fn generate_trials(
    manifest: &Manifest,
    truth: &[(String, String)],
    max_per_class: usize,
    seed: u64,
) -> Result<TrialList> {
    let speaker_of: HashMap<&str, &str> = truth
        .iter()
        .map(|(u, s)| (u.as_str(), s.as_str()))
        .collect();
    let group_of: HashMap<&str, &str> = manifest
        .entries
        .iter()
        .map(|e| (e.utterance_id.as_str(), e.group_id.as_str()))
        .collect();
    let mut by_speaker: Vec<(&str, Vec<&str>)> = Vec::new();
    for e in &manifest.entries {
        let spk = *speaker_of
            .get(e.utterance_id.as_str())
            .ok_or_else(|| Error::invalid(format!("no truth label for {}", e.utterance_id)))?;
        match by_speaker.iter_mut().find(|(s, _)| *s == spk) {
            Some((_, v)) => v.push(e.utterance_id.as_str()),
            None => by_speaker.push((spk, vec![e.utterance_id.as_str()])),
        }
    }
    if by_speaker.len() < 2 {
        return Err(Error::invalid("need at least two speakers for trials"));
    }

    let mut rng = seeds::stream(seed, "trials");
    let mut targets: Vec<(String, String)> = Vec::new();
    for (_, utts) in &by_speaker {
        let mut cross_group = Vec::new();
        let mut same_group = Vec::new();
        for i in 0..utts.len() {
            for j in (i + 1)..utts.len() {
                if group_of[utts[i]] != group_of[utts[j]] {
                    cross_group.push((utts[i].to_string(), utts[j].to_string()));
                } else {
                    same_group.push((utts[i].to_string(), utts[j].to_string()));
                }
            }
        }
        // Cross-group pairs carry a real session mismatch; prefer them.
        if cross_group.is_empty() {
            targets.extend(same_group);
        } else {
            targets.extend(cross_group);
        }
    }
    subsample(&mut targets, max_per_class, &mut rng);

    let all_ids: Vec<&str> = manifest
        .entries
        .iter()
        .map(|e| e.utterance_id.as_str())
        .collect();
    let mut nontargets: Vec<(String, String)> = Vec::new();
    let want = max_per_class.min(targets.len().max(1) * 2);
    let mut attempts = 0;
    while nontargets.len() < want && attempts < want * 50 {
        attempts += 1;
        let a = all_ids[rng.random_range(0..all_ids.len())];
        let b = all_ids[rng.random_range(0..all_ids.len())];
        if speaker_of[a] != speaker_of[b] {
            nontargets.push((a.to_string(), b.to_string()));
        }
    }

    let mut trials = Vec::new();
    for (e, t) in targets {
        trials.push(Trial {
            label: TrialLabel::Target,
            enroll_id: e,
            test_id: t,
        });
    }
    for (e, t) in nontargets {
        trials.push(Trial {
            label: TrialLabel::Nontarget,
            enroll_id: e,
            test_id: t,
        });
    }
    Ok(TrialList { trials })
}

fn subsample<T>(items: &mut Vec<T>, keep: usize, rng: &mut impl Rng) {
    use rand::seq::SliceRandom;
    if items.len() > keep {
        items.shuffle(rng);
        items.truncate(keep);
    }
}

/// Apply the configured stochastic augmentation to one feature matrix.
///
/// Shape is always preserved. `noise_only` adds gaussian noise scaled so
/// that `10*log10(signal_power/noise_power)` equals an SNR drawn uniformly
/// from `snr_db_range`, with power measured as the per-matrix mean square.
/// `channel_only` multiplies each feature dimension by `exp(g)`,
/// `g ~ N(0, channel_scale_std)`, constant across frames. `both` applies
/// the channel gain first, then additive noise.
pub fn augment(m: &FeatureMatrix, cfg: &AugmentConfig, rng: &mut impl Rng) -> Result<FeatureMatrix> {
    cfg.validate()?;
    let gate: f64 = rng.random();
    if gate >= cfg.apply_prob {
        return Ok(m.clone());
    }
    let mode = match cfg.mode {
        AugmentMode::RandomChoice => match rng.random_range(0..3u8) {
            0 => AugmentMode::NoiseOnly,
            1 => AugmentMode::ChannelOnly,
            _ => AugmentMode::Both,
        },
        other => other,
    };
    let mut out = m.clone();
    if matches!(mode, AugmentMode::ChannelOnly | AugmentMode::Both) {
        apply_channel(&mut out, cfg.channel_scale_std, rng);
    }
    if matches!(mode, AugmentMode::NoiseOnly | AugmentMode::Both) {
        apply_noise(&mut out, cfg.snr_db_range, rng)?;
    }
    FeatureMatrix::new(out.rows(), out.cols(), out.values().to_vec())
}

fn apply_channel(m: &mut FeatureMatrix, scale_std: f64, rng: &mut impl Rng) {
    let gains: Vec<f32> = (0..m.cols())
        .map(|_| {
            let g: f64 = if scale_std > 0.0 {
                Normal::new(0.0, scale_std).unwrap().sample(rng)
            } else {
                0.0
            };
            g.exp() as f32
        })
        .collect();
    for r in 0..m.rows() {
        for (v, g) in m.row_mut(r).iter_mut().zip(&gains) {
            *v *= g;
        }
    }
}

fn apply_noise(m: &mut FeatureMatrix, snr_db_range: (f64, f64), rng: &mut impl Rng) -> Result<()> {
    let snr_db = if snr_db_range.0 == snr_db_range.1 {
        snr_db_range.0
    } else {
        rng.random_range(snr_db_range.0..snr_db_range.1)
    };
    let signal_power = m.mean_power();
    if signal_power <= 0.0 {
        return Err(Error::invalid(
            "zero-power input: SNR-scaled noise is undefined",
        ));
    }
    let noise_power = signal_power / 10f64.powf(snr_db / 10.0);
    let noise = Normal::new(0.0, noise_power.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    for r in 0..m.rows() {
        for v in m.row_mut(r).iter_mut() {
            *v += noise.sample(rng) as f32;
        }
    }
    Ok(())
}

/// Take `count` contiguous random crops of `m`, lengths uniform in
/// `len_range` clamped to the frame count. Crops may overlap.
pub fn sample_segments(
    m: &FeatureMatrix,
    count: usize,
    len_range: (usize, usize),
    rng: &mut impl Rng,
) -> Result<Vec<FeatureMatrix>> {
    let (min_len, max_len) = len_range;
    if min_len == 0 || min_len > max_len {
        return Err(Error::invalid("segment length range must satisfy 1 <= min <= max"));
    }
    if m.rows() < min_len {
        return Err(Error::invalid(format!(
            "utterance has {} frames, fewer than the minimum segment length {min_len}",
            m.rows()
        )));
    }
    let hi = max_len.min(m.rows());
    let mut segments = Vec::with_capacity(count);
    for _ in 0..count {
        let len = rng.random_range(min_len..=hi);
        let start = rng.random_range(0..=(m.rows() - len));
        segments.push(m.crop(start, len)?);
    }
    Ok(segments)
}

fn unit_sphere_vector(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v = gaussian_vector(dim, 1.0, rng);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn gaussian_vector(dim: usize, std: f64, rng: &mut impl Rng) -> Vec<f64> {
    if std == 0.0 {
        return vec![0.0; dim];
    }
    let normal = Normal::new(0.0, std).unwrap();
    (0..dim).map(|_| normal.sample(rng)).collect()
}
