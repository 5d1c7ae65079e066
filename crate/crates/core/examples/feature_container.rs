//! Writes RGB and Flow clip features in the binary container, reads them
//! back through a manifest and fuses them into one bag.

use milvad::features::{
    build_bag, read_feature_file, write_feature_file, DatasetManifest, FeatureTensor, Label, ManifestEntry, Span,
    Split, Stream,
};
use std::path::PathBuf;

fn main() -> milvad::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let (clips, dim) = (5, 3);

    for (stream, offset) in [(Stream::Rgb, 0.0), (Stream::Flow, 100.0)] {
        let values = (0..clips * dim).map(|i| offset + i as f32).collect();
        let t = FeatureTensor::from_rows(stream, clips, dim, values)?;
        write_feature_file(&t, dir.path().join(format!("clip.{}.vfe", stream.name())))?;
    }

    let rgb = read_feature_file(dir.path().join("clip.rgb.vfe"))?;
    let bytes = rgb.to_bytes();
    println!("header bytes: {:02x?}", &bytes[..16]);
    println!("{} stream, {} clips x {} dims, {} bytes", rgb.stream(), rgb.num_clips(), rgb.dim(), bytes.len());

    let mut manifest = DatasetManifest::new(Split::Test, dir.path());
    manifest.entries.push(ManifestEntry {
        feature_path: PathBuf::from("clip"),
        label: Label::Abnormal,
        num_frames: clips * milvad::FRAMES_PER_CLIP,
        anomaly_spans: vec![Span::new(16, 48)],
    });
    print!("manifest line: {}", manifest.to_csv());

    for mode in [Stream::Rgb, Stream::Flow, Stream::Fused] {
        let bag = build_bag(&manifest, &manifest.entries[0], mode, 4)?;
        println!("{mode:>5}: {} segments x {} dims, first row {:?}", bag.num_segments(), bag.dim(), bag.segments.row(0).to_vec());
    }
    Ok(())
}
