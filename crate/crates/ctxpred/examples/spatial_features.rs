//! Box-pair geometry encodings.
//!
//! Spatial model kinds describe a subject/object pair with a 14-dim
//! vector: five normalized single-box values for each box, then four
//! pairwise values (relative offsets and log size ratios). This example
//! prints the blocks for a few configurations and shows which parts of
//! the encoding react to which changes.

use ctxpred::features::{
    pairwise_spatial, single_box_spatial, spatial_feature, BoundingBox, ImageSize, SPATIAL_DIM,
};

fn print_vec(name: &str, v: &[f64]) {
    let body: Vec<String> = v.iter().map(|x| format!("{x:6.3}")).collect();
    println!("  {name:<22} [{}]", body.join(", "));
}

fn main() -> ctxpred::Result<()> {
    let img = ImageSize::new(640.0, 480.0);
    let person = BoundingBox::new(100.0, 120.0, 80.0, 200.0);
    let bike = BoundingBox::new(90.0, 260.0, 110.0, 90.0);

    println!("single-box block: x/W, y/H, (x+w)/W, (y+h)/H, area fraction");
    print_vec("person", &single_box_spatial(&person, &img)?);
    print_vec("bike", &single_box_spatial(&bike, &img)?);

    println!("\npairwise block: dx/w_o, dy/h_o, ln(w_s/w_o), ln(h_s/h_o)");
    print_vec("person vs bike", &pairwise_spatial(&person, &bike)?);
    print_vec("bike vs person", &pairwise_spatial(&bike, &person)?);

    let full = spatial_feature(&person, &bike, &img)?;
    assert_eq!(full.len(), SPATIAL_DIM);
    println!("\nfull descriptor ({SPATIAL_DIM} dims): subject block, object block, pairwise block");
    print_vec("person-bike", &full);

    // Moving both boxes together changes the absolute blocks but not the
    // pairwise one: the relation between the boxes is translation
    // invariant.
    let shift = 50.0;
    let person2 = BoundingBox::new(person.x + shift, person.y + shift, person.w, person.h);
    let bike2 = BoundingBox::new(bike.x + shift, bike.y + shift, bike.w, bike.h);
    let moved = spatial_feature(&person2, &bike2, &img)?;
    println!("\nafter shifting both boxes by ({shift}, {shift}):");
    print_vec("person-bike", &moved);
    assert_eq!(&full[10..], &moved[10..], "pairwise block must not move");
    assert_ne!(&full[..10], &moved[..10]);
    println!("pairwise block unchanged; single-box blocks follow the shift");

    // Scaling the whole scene (boxes and image) leaves every component
    // fixed: all 14 values are ratios.
    let s = 2.5;
    let grow = |b: &BoundingBox| BoundingBox::new(b.x * s, b.y * s, b.w * s, b.h * s);
    let scaled = spatial_feature(
        &grow(&person),
        &grow(&bike),
        &ImageSize::new(img.width * s, img.height * s),
    )?;
    let worst = full
        .iter()
        .zip(&scaled)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("\nafter scaling the whole scene by {s}: max component change {worst:.2e}");
    assert!(worst < 1e-12);

    // Degenerate boxes are rejected instead of encoded.
    let flat = BoundingBox::new(10.0, 10.0, 0.0, 30.0);
    let err = spatial_feature(&flat, &bike, &img).unwrap_err();
    println!("\nzero-width subject box is rejected: {err}");
    Ok(())
}
