//! Deterministic synthetic datasets with a planted anomaly direction.
//!
//! Normal clips are `N(0, sigma^2 I)`. Anomalous clips are shifted by
//! `separability / sqrt(dim)` in every coordinate, i.e. by a vector of norm
//! `separability` along the all-ones direction. RGB and Flow streams are
//! drawn independently with the same shift, so the fused stream sees a shift
//! of norm `separability * sqrt(2)`.
//!
//! Each abnormal video has one contiguous run of anomalous segments. Its
//! anomalous clips are exactly the clips pooled into those segments, and its
//! frame span is exactly the frames those segments cover at evaluation time,
//! so positive frames always map back to anomalous segments.

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::eval::{frame_bounds, BagScorer};
use crate::features::{
    segment_bounds, write_feature_file, Bag, DatasetManifest, FeatureTensor, Label, ManifestEntry,
    Span, Split, Stream,
};
use crate::scorer::sigmoid;
use crate::{Error, Result, DEFAULT_SEGMENTS, FRAMES_PER_CLIP};

pub const TRAIN_MANIFEST: &str = "train.csv";
pub const TEST_MANIFEST: &str = "test.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Training videos per label.
    pub num_normal: usize,
    pub num_abnormal: usize,
    /// Test videos per label.
    pub test_normal: usize,
    pub test_abnormal: usize,
    /// Per-stream feature dimension.
    pub dim: usize,
    /// Inclusive range of clips per video.
    pub min_clips: usize,
    pub max_clips: usize,
    /// Norm of the anomalous mean shift.
    pub separability: f64,
    /// Fraction of segments that are anomalous in an abnormal video.
    pub anomaly_fraction: f64,
    pub noise_sigma: f64,
    /// Segment count the anomaly runs are aligned to.
    pub segments: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(dim: usize) -> Self {
        Self {
            num_normal: 40,
            num_abnormal: 40,
            test_normal: 10,
            test_abnormal: 10,
            dim,
            min_clips: 32,
            max_clips: 96,
            separability: 4.0,
            anomaly_fraction: 0.25,
            noise_sigma: 1.0,
            segments: DEFAULT_SEGMENTS,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_normal + self.num_abnormal + self.test_normal + self.test_abnormal == 0 {
            return bad("no videos requested".into());
        }
        if self.dim == 0 {
            return bad("dim must be >= 1".into());
        }
        if self.segments == 0 {
            return bad("segments must be >= 1".into());
        }
        if self.min_clips == 0 || self.min_clips > self.max_clips {
            return bad(format!("invalid clip range {}..={}", self.min_clips, self.max_clips));
        }
        if FRAMES_PER_CLIP * self.min_clips < self.segments {
            return bad(format!(
                "videos of {} clips have fewer frames than {} segments",
                self.min_clips, self.segments
            ));
        }
        if !(self.separability.is_finite() && self.separability >= 0.0) {
            return bad(format!("separability {} must be >= 0", self.separability));
        }
        if !(self.anomaly_fraction > 0.0 && self.anomaly_fraction <= 1.0) {
            return bad(format!("anomaly fraction {} outside (0, 1]", self.anomaly_fraction));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma > 0.0) {
            return bad(format!("noise sigma {} must be > 0", self.noise_sigma));
        }
        Ok(())
    }

    /// Per-coordinate mean shift of anomalous clips.
    pub fn shift_per_coordinate(&self) -> f64 {
        self.separability / (self.dim as f64).sqrt()
    }

    /// Anomalous segments per abnormal video.
    pub fn anomalous_segments(&self) -> usize {
        ((self.anomaly_fraction * self.segments as f64).round() as usize).clamp(1, self.segments)
    }
}

/// Layout of one generated video.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoPlan {
    pub name: String,
    pub split: Split,
    pub label: Label,
    pub num_clips: usize,
    pub num_frames: usize,
    /// Anomalous segment run; empty for normal videos.
    pub anomalous_segments: Range<usize>,
    pub anomalous_clips: Vec<bool>,
    pub span: Option<Span>,
    stream_index: u64,
}

/// Plans every video of the dataset (train first, then test; abnormal before
/// normal within a split).
pub fn plan(spec: &SynthSpec) -> Result<Vec<VideoPlan>> {
    spec.validate()?;
    let groups = [
        (Split::Train, Label::Abnormal, spec.num_abnormal),
        (Split::Train, Label::Normal, spec.num_normal),
        (Split::Test, Label::Abnormal, spec.test_abnormal),
        (Split::Test, Label::Normal, spec.test_normal),
    ];
    let mut plans = Vec::new();
    for (split, label, count) in groups {
        for k in 0..count {
            let stream_index = plans.len() as u64 + 1;
            let mut rng = video_rng(spec.seed, stream_index);
            let num_clips = rng.random_range(spec.min_clips..=spec.max_clips);
            let num_frames = FRAMES_PER_CLIP * num_clips;
            let n = spec.segments;
            let mut anomalous_clips = vec![false; num_clips];
            let (anomalous_segments, span) = if label == Label::Abnormal {
                let len = spec.anomalous_segments();
                let start = rng.random_range(0..=n - len);
                for i in start..start + len {
                    let (a, b) = segment_bounds(i, num_clips, n);
                    anomalous_clips[a..b].iter_mut().for_each(|c| *c = true);
                }
                let first = frame_bounds(start, num_frames, n).0;
                let last = frame_bounds(start + len - 1, num_frames, n).1;
                (start..start + len, Some(Span::new(first, last)))
            } else {
                (0..0, None)
            };
            let dir = match split {
                Split::Train => "train",
                Split::Test => "test",
            };
            plans.push(VideoPlan {
                name: format!("{dir}/{}_{k:03}", label.name()),
                split,
                label,
                num_clips,
                num_frames,
                anomalous_segments,
                anomalous_clips,
                span,
                stream_index,
            });
        }
    }
    Ok(plans)
}

fn video_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws the clip features of one stream for a planned video.
pub fn video_features(spec: &SynthSpec, plan: &VideoPlan, stream: Stream) -> Result<FeatureTensor> {
    let mut rng = video_rng(spec.seed, plan.stream_index);
    // skip past the planning draws by moving to a per-stream word offset
    let offset = match stream {
        Stream::Rgb => 1u128 << 40,
        Stream::Flow => 2u128 << 40,
        Stream::Fused => return Err(Error::WrongStream { expected: "rgb or flow", found: "fused" }),
    };
    rng.set_word_pos(offset);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let shift = spec.shift_per_coordinate();
    let data = Array2::from_shape_fn((plan.num_clips, spec.dim), |(clip, _)| {
        let mean = if plan.anomalous_clips[clip] { shift } else { 0.0 };
        (mean + noise.sample(&mut rng)) as f32
    });
    FeatureTensor::new(stream, data)
}

/// Paths of the manifests written by [`generate`].
#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub train_manifest: PathBuf,
    pub test_manifest: PathBuf,
    pub train: DatasetManifest,
    pub test: DatasetManifest,
}

/// Writes `<stem>.rgb.vfe` / `<stem>.flow.vfe` for every video plus
/// `train.csv` (video labels only) and `test.csv` (with frame spans).
pub fn generate(spec: &SynthSpec, out_dir: &Path) -> Result<GeneratedDataset> {
    let plans = plan(spec)?;
    for sub in ["train", "test"] {
        let d = out_dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(d, e))?;
    }
    plans.par_iter().try_for_each(|p| -> Result<()> {
        for stream in [Stream::Rgb, Stream::Flow] {
            let t = video_features(spec, p, stream)?;
            write_feature_file(&t, out_dir.join(format!("{}.{}.vfe", p.name, stream.name())))?;
        }
        Ok(())
    })?;

    let mut train = DatasetManifest::new(Split::Train, out_dir);
    let mut test = DatasetManifest::new(Split::Test, out_dir);
    for p in &plans {
        let (manifest, spans) = match p.split {
            Split::Train => (&mut train, Vec::new()),
            Split::Test => (&mut test, p.span.into_iter().collect()),
        };
        manifest.entries.push(ManifestEntry {
            feature_path: PathBuf::from(&p.name),
            label: p.label,
            num_frames: p.num_frames,
            anomaly_spans: spans,
        });
    }
    let train_manifest = out_dir.join(TRAIN_MANIFEST);
    let test_manifest = out_dir.join(TEST_MANIFEST);
    train.write(&train_manifest)?;
    test.write(&test_manifest)?;
    Ok(GeneratedDataset {
        train_manifest,
        test_manifest,
        train,
        test,
    })
}

/// Reference scorer that knows the planted direction: each segment is scored
/// by its projection onto the all-ones unit vector, centred halfway between
/// the normal and anomalous means and scaled by the noise level.
#[derive(Debug, Clone)]
pub struct PlantedDirectionScorer {
    pub separability: f64,
    pub noise_sigma: f64,
    /// Per-stream dimension the shift was planted in.
    pub dim: usize,
}

pub fn oracle_scorer(spec: &SynthSpec) -> PlantedDirectionScorer {
    PlantedDirectionScorer {
        separability: spec.separability,
        noise_sigma: spec.noise_sigma,
        dim: spec.dim,
    }
}

impl PlantedDirectionScorer {
    pub fn score_segment(&self, segment: &[f64]) -> f64 {
        let d = segment.len() as f64;
        let projection = segment.iter().sum::<f64>() / d.sqrt();
        // shift along the unit direction for a d-wide input built from
        // streams of width `dim`
        let planted = self.separability * (d / self.dim as f64).sqrt();
        sigmoid((projection - planted / 2.0) / self.noise_sigma)
    }
}

impl BagScorer for PlantedDirectionScorer {
    fn segment_scores(&self, bag: &Bag) -> Result<Vec<f64>> {
        Ok(bag
            .segments
            .outer_iter()
            .map(|row| self.score_segment(row.as_slice().expect("bag rows are contiguous")))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{auc_pair_oracle, evaluate, frame_truth, roc_curve, FrameScores};
    use crate::features::{read_feature_file, segmentize};
    use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

    fn spec(dim: usize) -> SynthSpec {
        SynthSpec {
            num_normal: 10,
            num_abnormal: 10,
            test_normal: 4,
            test_abnormal: 4,
            ..SynthSpec::new(dim)
        }
    }

    #[test]
    fn manifests_have_expected_entries() {
        let dir = tempfile::tempdir().unwrap();
        let g = generate(&spec(8), dir.path()).unwrap();
        let train = DatasetManifest::read(&g.train_manifest, Split::Train).unwrap();
        assert_eq!(train.entries.len(), 20);
        assert_eq!(train.count(Label::Normal), 10);
        assert_eq!(train.count(Label::Abnormal), 10);
        assert!(train.entries.iter().all(|e| e.anomaly_spans.is_empty()));

        let test = DatasetManifest::read(&g.test_manifest, Split::Test).unwrap();
        assert_eq!(test.entries.len(), 8);
        for e in &test.entries {
            assert_eq!(e.anomaly_spans.len(), usize::from(e.label == Label::Abnormal));
        }
    }

    #[test]
    fn generation_is_deterministic_and_round_trips() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let s = spec(6);
        generate(&s, a.path()).unwrap();
        generate(&s, b.path()).unwrap();
        for p in plan(&s).unwrap() {
            for stream in ["rgb", "flow"] {
                let rel = format!("{}.{stream}.vfe", p.name);
                let bytes = fs::read(a.path().join(&rel)).unwrap();
                assert_eq!(bytes, fs::read(b.path().join(&rel)).unwrap());
                let t = read_feature_file(a.path().join(&rel)).unwrap();
                assert_eq!(t.to_bytes(), bytes);
                assert_eq!(t.num_clips(), p.num_clips);
            }
        }
        assert_eq!(
            fs::read(a.path().join(TEST_MANIFEST)).unwrap(),
            fs::read(b.path().join(TEST_MANIFEST)).unwrap()
        );
    }

    #[test]
    fn streams_are_independent_draws() {
        let s = spec(4);
        let p = &plan(&s).unwrap()[0];
        let rgb = video_features(&s, p, Stream::Rgb).unwrap();
        let flow = video_features(&s, p, Stream::Flow).unwrap();
        assert_ne!(rgb.data(), flow.data());
    }

    #[test]
    fn positive_frames_map_to_anomalous_segments() {
        let s = SynthSpec { min_clips: 2, max_clips: 120, anomaly_fraction: 0.1, ..spec(3) };
        for p in plan(&s).unwrap().iter().filter(|p| p.label == Label::Abnormal) {
            let span = p.span.unwrap();
            assert!(span.start < span.end && span.end <= p.num_frames);
            let truth = frame_truth(p.num_frames, &[span]);
            for i in 0..s.segments {
                let (a, b) = frame_bounds(i, p.num_frames, s.segments);
                if truth[a..b].iter().any(|&t| t) {
                    assert!(p.anomalous_segments.contains(&i));
                    let (c0, c1) = segment_bounds(i, p.num_clips, s.segments);
                    assert!(p.anomalous_clips[c0..c1].iter().all(|&c| c));
                }
            }
            assert!(p.anomalous_clips.iter().any(|&c| c));
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(plan(&SynthSpec { dim: 0, ..spec(4) }).is_err());
        assert!(plan(&SynthSpec { min_clips: 1, ..spec(4) }).is_err());
        assert!(plan(&SynthSpec { min_clips: 50, max_clips: 40, ..spec(4) }).is_err());
        assert!(plan(&SynthSpec { anomaly_fraction: 0.0, ..spec(4) }).is_err());
        assert!(plan(&SynthSpec { noise_sigma: 0.0, ..spec(4) }).is_err());
    }

    fn clip_auc(s: &SynthSpec) -> f64 {
        // clip-level projections straight from the generator
        let scorer = oracle_scorer(s);
        let mut scores = Vec::new();
        let mut truth = Vec::new();
        for p in plan(s).unwrap() {
            let t = video_features(s, &p, Stream::Rgb).unwrap();
            for (row, &anom) in t.data().outer_iter().zip(&p.anomalous_clips) {
                let v: Vec<f64> = row.iter().map(|&x| f64::from(x)).collect();
                scores.push(scorer.score_segment(&v));
                truth.push(anom);
            }
        }
        roc_curve(&scores, &truth).unwrap().auc
    }

    #[test]
    fn clip_separation_matches_gaussian_closed_form() {
        let s = SynthSpec { separability: 1.0, dim: 16, ..spec(16) };
        let expected = StdNormal::new(0.0, 1.0).unwrap().cdf(1.0 / 2f64.sqrt());
        let auc = clip_auc(&s);
        assert!((auc - expected).abs() < 0.02, "{auc} vs {expected}");

        let strong = SynthSpec { separability: 4.0, dim: 32, ..spec(32) };
        let expected = StdNormal::new(0.0, 1.0).unwrap().cdf(4.0 / 2f64.sqrt());
        assert!(expected > 0.99);
        assert!((clip_auc(&strong) - expected).abs() < 0.005);
    }

    #[test]
    fn oracle_scorer_frame_auc() {
        let dir = tempfile::tempdir().unwrap();
        let s = SynthSpec { test_normal: 10, test_abnormal: 10, ..spec(32) };
        let g = generate(&s, dir.path()).unwrap();
        let scorer = oracle_scorer(&s);
        for stream in [Stream::Rgb, Stream::Flow, Stream::Fused] {
            let (roc, _) = evaluate(&scorer, &g.test, stream, 32).unwrap();
            assert!(roc.auc > 0.99, "{stream}: {}", roc.auc);
        }
    }

    #[test]
    fn zero_separability_is_chance() {
        let dir = tempfile::tempdir().unwrap();
        let s = SynthSpec {
            separability: 0.0,
            num_normal: 0,
            num_abnormal: 0,
            test_normal: 100,
            test_abnormal: 100,
            ..spec(16)
        };
        let g = generate(&s, dir.path()).unwrap();
        let (roc, videos) = evaluate(&oracle_scorer(&s), &g.test, Stream::Rgb, 32).unwrap();
        let frames: usize = videos.iter().map(|v| v.scores.len()).sum();
        assert!(frames >= 2000);
        assert!((0.45..=0.55).contains(&roc.auc), "{}", roc.auc);
    }

    #[test]
    fn oracle_scores_are_deterministic() {
        let s = spec(8);
        let p = &plan(&s).unwrap()[0];
        let t = video_features(&s, p, Stream::Rgb).unwrap();
        let seg = segmentize(&t, 32).unwrap();
        let bag = Bag {
            video_id: p.name.clone(),
            label: p.label,
            segments: seg,
            num_frames: p.num_frames,
            anomaly_spans: p.span.into_iter().collect(),
        };
        let scorer = oracle_scorer(&s);
        assert_eq!(scorer.segment_scores(&bag).unwrap(), scorer.segment_scores(&bag).unwrap());
        let fs = FrameScores {
            video_id: bag.video_id.clone(),
            scores: scorer.frame_scores(&bag).unwrap(),
            truth: frame_truth(bag.num_frames, &bag.anomaly_spans),
        };
        let roc = crate::eval::roc_auc(std::slice::from_ref(&fs)).unwrap();
        assert!((roc.auc - auc_pair_oracle(&[fs]).unwrap()).abs() < 1e-12);
    }
}
