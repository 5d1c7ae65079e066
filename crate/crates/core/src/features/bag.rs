use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{
    fuse_streams, read_feature_file, segmentize, DatasetManifest, FeatureTensor, Label,
    ManifestEntry, Span, Stream,
};
use crate::{Error, Result};

/// One video as a multiple-instance bag: a fixed number of pooled segment
/// features plus the video-level label.
#[derive(Debug, Clone, PartialEq)]
pub struct Bag {
    pub video_id: String,
    pub label: Label,
    /// `N x D` pooled segment features.
    pub segments: Array2<f64>,
    pub num_frames: usize,
    /// Frame-level truth; empty for normal videos and for training bags.
    pub anomaly_spans: Vec<Span>,
}

impl Bag {
    pub fn num_segments(&self) -> usize {
        self.segments.nrows()
    }

    pub fn dim(&self) -> usize {
        self.segments.ncols()
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn expect_stream(t: FeatureTensor, want: Stream) -> Result<FeatureTensor> {
    if t.stream() == want {
        Ok(t)
    } else {
        Err(Error::WrongStream {
            expected: want.name(),
            found: t.stream().name(),
        })
    }
}

/// Loads the clip features for one video in the requested stream mode.
///
/// If `path` is itself a feature file it must hold the requested stream.
/// Otherwise `path` is a stem: RGB features live in `<stem>.rgb.vfe`, Flow
/// features in `<stem>.flow.vfe`, and the fused mode concatenates both.
pub fn load_features(path: &Path, mode: Stream) -> Result<FeatureTensor> {
    if path.is_file() {
        return expect_stream(read_feature_file(path)?, mode);
    }
    let rgb = || read_feature_file(with_suffix(path, ".rgb.vfe")).and_then(|t| expect_stream(t, Stream::Rgb));
    let flow = || read_feature_file(with_suffix(path, ".flow.vfe")).and_then(|t| expect_stream(t, Stream::Flow));
    match mode {
        Stream::Rgb => rgb(),
        Stream::Flow => flow(),
        Stream::Fused => fuse_streams(&rgb()?, &flow()?),
    }
}

pub fn build_bag(
    manifest: &DatasetManifest,
    entry: &ManifestEntry,
    mode: Stream,
    n_segments: usize,
) -> Result<Bag> {
    entry.validate(manifest.split).map_err(|message| Error::Manifest {
        path: manifest.base_dir.clone(),
        line: 0,
        message,
    })?;
    let features = load_features(&manifest.resolve(entry), mode)?;
    Ok(Bag {
        video_id: entry.video_id(),
        label: entry.label,
        segments: segmentize(&features, n_segments)?,
        num_frames: entry.num_frames,
        anomaly_spans: entry.anomaly_spans.clone(),
    })
}

/// Builds a bag for every manifest entry, in manifest order.
pub fn load_bags(manifest: &DatasetManifest, mode: Stream, n_segments: usize) -> Result<Vec<Bag>> {
    manifest
        .entries
        .iter()
        .map(|e| build_bag(manifest, e, mode, n_segments))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{write_feature_file, Split};

    fn write(dir: &Path, name: &str, stream: Stream, t: usize, d: usize, v: f32) {
        let x = FeatureTensor::from_rows(stream, t, d, vec![v; t * d]).unwrap();
        write_feature_file(&x, dir.join(name)).unwrap();
    }

    #[test]
    fn builds_bags_in_every_stream_mode() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "v.rgb.vfe", Stream::Rgb, 40, 3, 1.0);
        write(dir.path(), "v.flow.vfe", Stream::Flow, 40, 2, -1.0);
        let m = DatasetManifest::parse(
            "v,abnormal,640,10-20\nv,normal,640,\n",
            Split::Test,
            dir.path().to_path_buf(),
            Path::new("m"),
        )
        .unwrap();

        let fused = build_bag(&m, &m.entries[0], Stream::Fused, 32).unwrap();
        assert_eq!((fused.num_segments(), fused.dim()), (32, 5));
        assert_eq!(fused.label, Label::Abnormal);
        assert_eq!(fused.anomaly_spans, vec![Span::new(10, 20)]);
        assert_eq!(fused.segments.row(0).to_vec(), vec![1.0, 1.0, 1.0, -1.0, -1.0]);

        let normal = build_bag(&m, &m.entries[1], Stream::Rgb, 32).unwrap();
        assert_eq!(normal.label, Label::Normal);
        assert!(normal.anomaly_spans.is_empty());
        assert_eq!(normal.dim(), 3);
        assert_eq!(build_bag(&m, &m.entries[1], Stream::Flow, 32).unwrap().dim(), 2);
    }

    #[test]
    fn direct_file_must_match_requested_stream() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "x.vfe", Stream::Rgb, 4, 2, 0.5);
        let path = dir.path().join("x.vfe");
        assert_eq!(load_features(&path, Stream::Rgb).unwrap().dim(), 2);
        assert!(matches!(load_features(&path, Stream::Fused), Err(Error::WrongStream { .. })));
    }

    #[test]
    fn fusion_errors_propagate() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "v.rgb.vfe", Stream::Rgb, 5, 1, 0.0);
        write(dir.path(), "v.flow.vfe", Stream::Flow, 4, 1, 0.0);
        assert!(matches!(
            load_features(&dir.path().join("v"), Stream::Fused),
            Err(Error::ClipCountMismatch { .. })
        ));
        assert!(matches!(
            load_features(&dir.path().join("missing"), Stream::Rgb),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn invalid_entry_is_rejected_before_loading() {
        let m = DatasetManifest::new(Split::Test, "/nowhere");
        let entry = ManifestEntry {
            feature_path: "v".into(),
            label: Label::Abnormal,
            num_frames: 100,
            anomaly_spans: vec![Span::new(90, 120)],
        };
        assert!(matches!(
            build_bag(&m, &entry, Stream::Rgb, 32),
            Err(Error::Manifest { .. })
        ));
    }
}
