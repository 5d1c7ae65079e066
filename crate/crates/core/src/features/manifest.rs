//! Dataset manifests: UTF-8 CSV, one video per line, no header.
//!
//! ```text
//! feature_path,label,num_frames,spans
//! train/abnormal_003,abnormal,1200,160-480;800-960
//! ```
//!
//! `label` is `normal` or `abnormal`; `spans` is a `;`-separated list of
//! half-open frame intervals `start-end`, or empty. Feature paths are
//! resolved relative to the manifest's directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Normal,
    Abnormal,
}

impl Label {
    pub fn name(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Abnormal => "abnormal",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "normal" => Ok(Label::Normal),
            "abnormal" => Ok(Label::Abnormal),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Half-open frame interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, frame: usize) -> bool {
        self.start <= frame && frame < self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Path as written in the manifest.
    pub feature_path: PathBuf,
    pub label: Label,
    pub num_frames: usize,
    pub anomaly_spans: Vec<Span>,
}

impl ManifestEntry {
    pub fn validate(&self, split: Split) -> std::result::Result<(), String> {
        if self.num_frames == 0 {
            return Err("num_frames must be positive".into());
        }
        if self.label == Label::Normal && !self.anomaly_spans.is_empty() {
            return Err("normal video carries anomaly spans".into());
        }
        if split == Split::Train && !self.anomaly_spans.is_empty() {
            return Err("training entries must not carry anomaly spans".into());
        }
        for span in &self.anomaly_spans {
            if span.start >= span.end || span.end > self.num_frames {
                return Err(format!(
                    "span {}-{} outside 0 <= start < end <= {}",
                    span.start, span.end, self.num_frames
                ));
            }
        }
        Ok(())
    }

    pub fn video_id(&self) -> String {
        self.feature_path.to_string_lossy().into_owned()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub split: Split,
    pub entries: Vec<ManifestEntry>,
    /// Directory that relative feature paths are resolved against.
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn new(split: Split, base_dir: impl Into<PathBuf>) -> Self {
        Self {
            split,
            entries: Vec::new(),
            base_dir: base_dir.into(),
        }
    }

    pub fn read(path: impl AsRef<Path>, split: Split) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, split, base_dir, path)
    }

    /// Parses manifest text; `origin` is only used in error messages.
    pub fn parse(text: &str, split: Split, base_dir: PathBuf, origin: &Path) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Manifest {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());

        let mut entries = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| bad(0, e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.iter().all(str::is_empty) {
                continue;
            }
            if record.len() != 4 {
                return Err(bad(line, format!("expected 4 fields, found {}", record.len())));
            }
            let label = record[1].parse::<Label>().map_err(|m| bad(line, m))?;
            let num_frames = record[2]
                .parse::<usize>()
                .map_err(|e| bad(line, format!("num_frames: {e}")))?;
            let anomaly_spans = parse_spans(&record[3]).map_err(|m| bad(line, m))?;
            let entry = ManifestEntry {
                feature_path: PathBuf::from(&record[0]),
                label,
                num_frames,
                anomaly_spans,
            };
            entry.validate(split).map_err(|m| bad(line, m))?;
            entries.push(entry);
        }
        Ok(Self {
            split,
            entries,
            base_dir,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let spans: Vec<String> = e
                .anomaly_spans
                .iter()
                .map(|s| format!("{}-{}", s.start, s.end))
                .collect();
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.feature_path.display(),
                e.label,
                e.num_frames,
                spans.join(";")
            ));
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.base_dir.join(&entry.feature_path)
    }

    pub fn count(&self, label: Label) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }
}

fn parse_spans(field: &str) -> std::result::Result<Vec<Span>, String> {
    field
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let (a, b) = s
                .split_once('-')
                .ok_or_else(|| format!("span {s:?} is not start-end"))?;
            let start = a.trim().parse().map_err(|e| format!("span {s:?}: {e}"))?;
            let end = b.trim().parse().map_err(|e| format!("span {s:?}: {e}"))?;
            Ok(Span::new(start, end))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, split: Split) -> Result<DatasetManifest> {
        DatasetManifest::parse(text, split, PathBuf::from("/data"), Path::new("m.csv"))
    }

    #[test]
    fn parses_entries_and_spans() {
        let m = parse(
            "test/n0,normal,320,\ntest/a0,abnormal,100,10-20\ntest/a1,abnormal,500,0-16;400-500\n",
            Split::Test,
        )
        .unwrap();
        assert_eq!(m.entries.len(), 3);
        assert_eq!(m.entries[0].label, Label::Normal);
        assert!(m.entries[0].anomaly_spans.is_empty());
        assert_eq!(m.entries[1].anomaly_spans, vec![Span::new(10, 20)]);
        assert_eq!(m.entries[2].anomaly_spans.len(), 2);
        assert_eq!(m.resolve(&m.entries[1]), PathBuf::from("/data/test/a0"));
        assert_eq!(m.count(Label::Abnormal), 2);
    }

    #[test]
    fn csv_round_trip() {
        let text = "a,abnormal,100,10-20;30-40\nb,normal,64,\n";
        let m = parse(text, Split::Test).unwrap();
        assert_eq!(m.to_csv(), text);
    }

    #[test]
    fn span_past_end_is_rejected() {
        let err = parse("a,abnormal,100,90-101\n", Split::Test).unwrap_err();
        assert!(matches!(err, Error::Manifest { line: 1, .. }), "{err}");
    }

    #[test]
    fn empty_or_reversed_span_is_rejected() {
        assert!(parse("a,abnormal,100,20-20\n", Split::Test).is_err());
        assert!(parse("a,abnormal,100,30-20\n", Split::Test).is_err());
    }

    #[test]
    fn normal_with_spans_is_rejected() {
        assert!(parse("a,normal,100,10-20\n", Split::Test).is_err());
    }

    #[test]
    fn train_split_carries_video_labels_only() {
        assert!(parse("a,abnormal,100,\n", Split::Train).is_ok());
        assert!(parse("a,abnormal,100,10-20\n", Split::Train).is_err());
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(parse("a,weird,100,\n", Split::Test).is_err());
        assert!(parse("a,normal,-3,\n", Split::Test).is_err());
        assert!(parse("a,normal,100\n", Split::Test).is_err());
        assert!(parse("a,abnormal,100,10:20\n", Split::Test).is_err());
    }
}
