use ndarray::{concatenate, s, Array2, Axis};

use super::{FeatureTensor, Stream};
use crate::{Error, Result};

/// Late fusion: row `t` of the result is `[rgb_t ‖ flow_t]`.
pub fn fuse_streams(rgb: &FeatureTensor, flow: &FeatureTensor) -> Result<FeatureTensor> {
    if rgb.stream() != Stream::Rgb {
        return Err(Error::WrongStream {
            expected: "rgb",
            found: rgb.stream().name(),
        });
    }
    if flow.stream() != Stream::Flow {
        return Err(Error::WrongStream {
            expected: "flow",
            found: flow.stream().name(),
        });
    }
    if rgb.num_clips() != flow.num_clips() {
        return Err(Error::ClipCountMismatch {
            rgb: rgb.num_clips(),
            flow: flow.num_clips(),
        });
    }
    let data = concatenate(Axis(1), &[rgb.data().view(), flow.data().view()])
        .map_err(|e| Error::InvalidShape(e.to_string()))?;
    FeatureTensor::new(Stream::Fused, data)
}

/// Clip range `[start, end)` pooled into segment `i` of `n_segments` for a
/// video of `num_clips` clips.
///
/// With at least as many clips as segments the ranges are
/// `[floor(i*T/N), floor((i+1)*T/N))` and tile the clips exactly once. With
/// fewer clips, segment `i` takes the single clip `floor(i*T/N)`.
pub fn segment_bounds(i: usize, num_clips: usize, n_segments: usize) -> (usize, usize) {
    let start = i * num_clips / n_segments;
    if num_clips >= n_segments {
        (start, (i + 1) * num_clips / n_segments)
    } else {
        (start, start + 1)
    }
}

/// Pools clip rows into `n_segments` segment rows by averaging each
/// segment's clip range.
pub fn segmentize(tensor: &FeatureTensor, n_segments: usize) -> Result<Array2<f64>> {
    if n_segments == 0 {
        return Err(Error::InvalidShape("segment count must be >= 1".into()));
    }
    let num_clips = tensor.num_clips();
    if num_clips == 0 {
        return Err(Error::EmptyTensor);
    }
    let data = tensor.data().mapv(f64::from);
    let mut out = Array2::<f64>::zeros((n_segments, tensor.dim()));
    for (i, mut row) in out.outer_iter_mut().enumerate() {
        let (start, end) = segment_bounds(i, num_clips, n_segments);
        let group = data.slice(s![start..end, ..]);
        row.assign(&group.mean_axis(Axis(0)).expect("segment range is never empty"));
    }
    Ok(out)
}
