//! Shows how clip sequences of different lengths are pooled into a fixed
//! number of segments.

use milvad::features::{segment_bounds, segmentize, FeatureTensor, Stream};

fn show(clips: usize, segments: usize) -> milvad::Result<()> {
    let t = FeatureTensor::from_rows(Stream::Rgb, clips, 1, (1..=clips).map(|v| v as f32).collect())?;
    let pooled = segmentize(&t, segments)?;
    let bounds: Vec<_> = (0..segments).map(|i| segment_bounds(i, clips, segments)).collect();
    println!("T={clips:>2} N={segments}: {:?}", pooled.column(0).to_vec());
    println!("            clip ranges {bounds:?}");
    Ok(())
}

fn main() -> milvad::Result<()> {
    show(5, 2)?;
    show(8, 4)?;
    show(10, 4)?;
    // fewer clips than segments: clips are repeated
    show(3, 8)?;
    Ok(())
}
