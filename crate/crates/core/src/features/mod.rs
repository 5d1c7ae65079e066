//! Feature ingestion: the binary clip-feature container, dataset manifests,
//! late fusion of RGB and Flow streams, and clip-to-segment pooling into
//! fixed-size bags.

mod bag;
mod container;
mod manifest;
mod pooling;

pub use bag::{build_bag, load_bags, load_features, Bag};
pub use container::{read_feature_file, write_feature_file, FeatureTensor, MAGIC};
pub use manifest::{DatasetManifest, Label, ManifestEntry, Span, Split};
pub use pooling::{fuse_streams, segment_bounds, segmentize};

use std::fmt;
use std::str::FromStr;

use crate::Error;

/// Which feature stream a tensor holds, or which stream a bag is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Rgb,
    Flow,
    Fused,
}

impl Stream {
    pub fn code(self) -> u32 {
        match self {
            Stream::Rgb => 0,
            Stream::Flow => 1,
            Stream::Fused => 2,
        }
    }

    pub fn from_code(code: u32) -> Result<Self, Error> {
        match code {
            0 => Ok(Stream::Rgb),
            1 => Ok(Stream::Flow),
            2 => Ok(Stream::Fused),
            other => Err(Error::UnknownStream(other)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stream::Rgb => "rgb",
            Stream::Flow => "flow",
            Stream::Fused => "fused",
        }
    }
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stream {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rgb" => Ok(Stream::Rgb),
            "flow" => Ok(Stream::Flow),
            "fused" => Ok(Stream::Fused),
            other => Err(Error::Config(format!(
                "unknown stream {other:?} (expected rgb, flow or fused)"
            ))),
        }
    }
}
