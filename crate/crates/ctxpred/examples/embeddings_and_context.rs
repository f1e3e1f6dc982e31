//! Word vectors and context codes.
//!
//! Context-aware kinds see *which* objects interact through word
//! embeddings: the subject and object vectors are concatenated into a
//! pair embedding `z`, and `relu(Q z)` projects it into a small code.
//! Every predicate then derives its classifier row from that code, so
//! one extra word in the vocabulary costs nothing in model parameters.

use std::io::Cursor;

use ctxpred::embed::{context_code, encode_pair, normalize_label, EmbeddingStore};
use ctxpred::numcore::Matrix;

fn main() -> ctxpred::Result<()> {
    let text = "\
# tiny hand-made table, dimension 4
person   0.9  0.1  0.0  0.3
horse    0.2  0.8  0.1  0.4
bicycle  0.1  0.7 -0.2  0.5
pizza   -0.3  0.2  0.9  0.1
";
    let store = EmbeddingStore::load(Cursor::new(text))?;
    println!(
        "loaded {} words of dimension {}",
        store.len(),
        store.dimension()
    );

    // Multi-word labels are normalized before lookup.
    assert_eq!(normalize_label("traffic  light"), "traffic_light");

    // Unknown words fall back to the table mean instead of failing;
    // strict lookup is available when silent fallback is wrong.
    let fallback = store.lookup("unicycle").to_vec();
    assert_eq!(fallback, store.fallback());
    println!(
        "unknown word falls back to the table mean: {:?}",
        fallback.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>()
    );
    assert!(store.lookup_strict("unicycle").is_err());

    // The pair embedding is subject then object, length 2e, and it is
    // ordered: riding(person, horse) differs from riding(horse, person).
    let z_ph = encode_pair(&store, "person", "horse");
    let z_hp = encode_pair(&store, "horse", "person");
    assert_eq!(z_ph.len(), 2 * store.dimension());
    assert_ne!(z_ph, z_hp);
    println!("\npair embedding z(person, horse) = {z_ph:?}");

    // A fixed projection turns pairs into nonnegative codes. Rows of Q
    // act like detectors over the pair embedding.
    let q = Matrix::from_rows(&[
        vec![1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        vec![-0.5, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    ])?;
    for (s, o) in [
        ("person", "horse"),
        ("person", "bicycle"),
        ("horse", "person"),
        ("person", "pizza"),
    ] {
        let code = context_code(&store, &q, s, o)?;
        let shown: Vec<f64> = code.code.iter().map(|v| (v * 1000.0).round() / 1000.0).collect();
        println!("code({s:>6}, {o:>7}) = {shown:?}");
        assert!(code.code.iter().all(|&v| v >= 0.0), "relu output is nonnegative");
    }
    println!("\ndistinct pairs produce distinct codes; the classifier built from");
    println!("the code can therefore rank predicates differently per pair.");
    Ok(())
}
