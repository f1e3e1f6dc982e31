//! Reweighting predictions with triplet statistics.
//!
//! A prior table maps (subject, predicate, object) triplets to
//! nonnegative weights, typically how plausible the triplet is in
//! external text. At ranking time each candidate's probability is
//! multiplied by its weight; unlisted triplets keep weight 1, and a
//! weight of 0 removes a triplet outright.

use ctxpred::eval::{apply_language_prior, PriorTable};
use ctxpred::numcore::argmax;

fn main() -> ctxpred::Result<()> {
    let predicates: Vec<String> = ["ride", "eat", "wear", "hold"]
        .into_iter()
        .map(String::from)
        .collect();

    // The visual model is torn between ride and eat for (person, horse).
    let probabilities = [0.40, 0.42, 0.03, 0.15];
    println!("visual probabilities for (person, horse):");
    for (name, p) in predicates.iter().zip(probabilities) {
        println!("  {name:<5} {p:.2}");
    }
    println!(
        "top-1 before priors: {}",
        predicates[argmax(&probabilities).unwrap()]
    );

    let triplet = |p: &str| ("person".to_string(), p.to_string(), "horse".to_string());
    let priors = PriorTable::from_entries([
        (triplet("ride"), 2.0),
        (triplet("eat"), 0.1),
        (triplet("wear"), 0.0),
    ])?;
    let reweighted =
        apply_language_prior(&probabilities, "person", "horse", &predicates, &priors)?;
    println!("\nafter the prior (ride x2.0, eat x0.1, wear x0, hold unlisted):");
    for (name, w) in predicates.iter().zip(&reweighted) {
        println!("  {name:<5} {w:.3}");
    }
    println!(
        "top-1 after priors: {}",
        predicates[argmax(&reweighted).unwrap()]
    );
    assert_eq!(argmax(&reweighted), Some(0));
    assert_eq!(reweighted[2], 0.0, "zero weight removes the triplet");
    assert_eq!(reweighted[3], probabilities[3], "unlisted triplets pass through");

    // Tables round-trip through a small JSON file format.
    let mut buffer = Vec::new();
    priors.save(&mut buffer)?;
    println!("\nserialized table:\n{}", String::from_utf8_lossy(&buffer));
    let reloaded = PriorTable::load(buffer.as_slice())?;
    assert_eq!(reloaded.weight("person", "ride", "horse"), 2.0);
    assert_eq!(reloaded.weight("person", "hold", "horse"), 1.0);

    // Negative weights are rejected up front: the reweighted scores are
    // ranking keys and must stay nonnegative.
    let err = PriorTable::from_entries([(triplet("ride"), -1.0)]).unwrap_err();
    println!("negative weight is rejected: {err}");
    Ok(())
}
