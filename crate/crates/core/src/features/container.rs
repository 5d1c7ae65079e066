//! The `VFE1` clip-feature container.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! 0..4    b"VFE1"
//! 4..8    u32 stream code (0 = RGB, 1 = Flow, 2 = Fused)
//! 8..12   u32 number of clips T
//! 12..16  u32 feature dimension D
//! 16..    T * D f32, row-major
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1};

use super::Stream;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"VFE1";
const HEADER_LEN: usize = 16;

/// Per-video clip features: one row per clip.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    stream: Stream,
    data: Array2<f32>,
}

impl FeatureTensor {
    /// Builds a tensor, rejecting zero-width rows and non-finite entries.
    pub fn new(stream: Stream, data: Array2<f32>) -> Result<Self> {
        if data.ncols() == 0 {
            return Err(Error::InvalidShape("feature dimension must be >= 1".into()));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        Ok(Self { stream, data })
    }

    pub fn from_rows(stream: Stream, num_clips: usize, dim: usize, values: Vec<f32>) -> Result<Self> {
        let data = Array2::from_shape_vec((num_clips, dim), values)
            .map_err(|e| Error::InvalidShape(e.to_string()))?;
        Self::new(stream, data)
    }

    pub fn stream(&self) -> Stream {
        self.stream
    }

    pub fn num_clips(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f32> {
        &self.data
    }

    pub fn row(&self, clip: usize) -> ArrayView1<'_, f32> {
        self.data.row(clip)
    }

    /// Encodes the tensor in the container format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.stream.code().to_le_bytes());
        out.extend_from_slice(&(self.num_clips() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        for v in self.data.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Decodes a container held in memory. `path` is only used in error messages.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
                expected: "VFE1",
            });
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::TruncatedPayload {
                path: path.to_path_buf(),
                expected: HEADER_LEN as u64,
                found: bytes.len() as u64,
            });
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let stream = Stream::from_code(word(4))?;
        let num_clips = word(8) as usize;
        let dim = word(12) as usize;

        let expected = HEADER_LEN as u64 + 4 * num_clips as u64 * dim as u64;
        if bytes.len() as u64 != expected {
            return Err(Error::TruncatedPayload {
                path: path.to_path_buf(),
                expected,
                found: bytes.len() as u64,
            });
        }

        let values: Vec<f32> = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_rows(stream, num_clips, dim, values)
    }
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<FeatureTensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    FeatureTensor::from_bytes(&bytes, path)
}

pub fn write_feature_file(tensor: &FeatureTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, tensor.to_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(stream: u32, t: u32, d: u32) -> Vec<u8> {
        let mut b = MAGIC.to_vec();
        b.extend_from_slice(&stream.to_le_bytes());
        b.extend_from_slice(&t.to_le_bytes());
        b.extend_from_slice(&d.to_le_bytes());
        b
    }

    #[test]
    fn decodes_header_and_payload() {
        let mut bytes = header(0, 2, 3);
        for v in [1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let t = FeatureTensor::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(t.stream(), Stream::Rgb);
        assert_eq!((t.num_clips(), t.dim()), (2, 3));
        assert_eq!(t.row(1).to_vec(), vec![4.0, 5.0, 6.0]);
        assert_eq!(t.to_bytes(), bytes);
    }

    #[test]
    fn zero_tensor_is_twenty_bytes() {
        let t = FeatureTensor::from_rows(Stream::Rgb, 1, 1, vec![0.0]).unwrap();
        let bytes = t.to_bytes();
        assert_eq!(bytes.len(), 20);
        assert_eq!(&bytes[16..], &[0, 0, 0, 0]);
    }

    #[test]
    fn payload_is_little_endian_ieee754() {
        let t = FeatureTensor::from_rows(Stream::Flow, 1, 2, vec![1.0, -1.0]).unwrap();
        let bytes = t.to_bytes();
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[16..], &[0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x80, 0xBF]);
    }

    #[test]
    fn rejects_bad_magic() {
        let mut bytes = header(0, 1, 1);
        bytes[0] = b'X';
        bytes.extend_from_slice(&0f32.to_le_bytes());
        let err = FeatureTensor::from_bytes(&bytes, Path::new("mem")).unwrap_err();
        assert!(matches!(err, Error::BadMagic { .. }));
        assert!(matches!(
            FeatureTensor::from_bytes(b"VF", Path::new("mem")),
            Err(Error::BadMagic { .. })
        ));
    }

    #[test]
    fn rejects_wrong_payload_length() {
        let mut bytes = header(2, 2, 2);
        bytes.extend_from_slice(&[0u8; 12]);
        match FeatureTensor::from_bytes(&bytes, Path::new("mem")) {
            Err(Error::TruncatedPayload { expected, found, .. }) => {
                assert_eq!((expected, found), (32, 28));
            }
            other => panic!("unexpected {other:?}"),
        }
        bytes.extend_from_slice(&[0u8; 8]);
        assert!(matches!(
            FeatureTensor::from_bytes(&bytes, Path::new("mem")),
            Err(Error::TruncatedPayload { .. })
        ));
        assert!(matches!(
            FeatureTensor::from_bytes(&header(0, 1, 1)[..10], Path::new("mem")),
            Err(Error::TruncatedPayload { .. })
        ));
    }

    #[test]
    fn rejects_nan_payload() {
        let mut bytes = header(1, 1, 2);
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        bytes.extend_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            FeatureTensor::from_bytes(&bytes, Path::new("mem")),
            Err(Error::NonFiniteValue { index: 1 })
        ));
    }

    #[test]
    fn rejects_unknown_stream_code() {
        let mut bytes = header(7, 1, 1);
        bytes.extend_from_slice(&0f32.to_le_bytes());
        assert!(matches!(
            FeatureTensor::from_bytes(&bytes, Path::new("mem")),
            Err(Error::UnknownStream(7))
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.vfe");
        let t = FeatureTensor::from_rows(Stream::Fused, 2, 2, vec![0.5, -0.0, 3.25, 1e-30]).unwrap();
        write_feature_file(&t, &path).unwrap();
        let back = read_feature_file(&path).unwrap();
        assert_eq!(back.to_bytes(), t.to_bytes());
        assert!(matches!(
            read_feature_file(dir.path().join("missing.vfe")),
            Err(Error::Io { .. })
        ));
    }
}
