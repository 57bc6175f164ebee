//! Aligns one rotated, scaled synthetic face and cuts out its parts.
//!
//! cargo run --release --example align_and_crop -- [out_dir]

use std::path::PathBuf;

use faceparts::imgcore::write_pnm;
use faceparts::landmarks::{align_face, interocular_distance, rotation_angle, DEFAULT_REF_DISTANCE};
use faceparts::parts::{extract_parts, face_bbox, normalized_crop, DEFAULT_PAD};
use faceparts::synth::{generate, SynthParams};

fn main() -> faceparts::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("faceparts_crops"));
    std::fs::create_dir_all(&out).map_err(|e| faceparts::Error::io(&out, e))?;

    let sample = generate(2, 3, &SynthParams::default())?.swap_remove(4);
    let face = &sample.face;
    println!("{}: rotated by {:.4} rad, scaled by {:.3}", sample.sample_id(), face.angle, face.scale);
    println!("  measured angle {:.4}, eye distance {:.2}", rotation_angle(&face.landmarks)?, interocular_distance(&face.landmarks));

    let aligned = align_face(&face.texture, &face.depth, &face.landmarks, DEFAULT_REF_DISTANCE)?;
    println!(
        "aligned: applied angle {:.4}, scale {:.3}, residual angle {:.1e}, eye distance {:.3}",
        aligned.applied_angle,
        aligned.applied_scale,
        rotation_angle(&aligned.landmarks)?,
        interocular_distance(&aligned.landmarks)
    );

    let (texture, depth) = extract_parts(&aligned.texture, &aligned.depth, &aligned.landmarks, DEFAULT_PAD)?;
    for (t, d) in texture.iter().zip(depth.iter()) {
        let b = t.source_bbox;
        println!("  {:<8} box ({}, {})-({}, {})", t.kind.name(), b.x_min, b.y_min, b.x_max, b.y_max);
        write_pnm(&out.join(format!("{}_texture.ppm", t.kind.name())), &t.image)?;
        write_pnm(&out.join(format!("{}_depth.pgm", d.kind.name())), &d.image)?;
    }
    write_pnm(&out.join("face_texture.ppm"), &normalized_crop(&aligned.texture, face_bbox(&aligned.landmarks))?)?;
    write_pnm(&out.join("aligned_texture.ppm"), &aligned.texture)?;
    println!("crops in {}", out.display());
    Ok(())
}
