//! Ranked retrieval metrics over detections.
//!
//! Evaluation ranks every scored triplet in an image and asks how much
//! of the ground truth the top k covers. The three tasks differ only in
//! what counts as a hit: predicate detection requires the exact
//! ground-truth boxes, phrase detection one union box with IoU above a
//! threshold, relationship detection both boxes individually. Matching
//! is one-to-one: a prediction consumes the ground truth it hits, and
//! the matcher reroutes earlier matches when that frees a hit for a
//! later prediction (maximum matching, not greedy).

use ctxpred::eval::{
    iou, rank_predictions, recall_at_k, union_box, Detection, GroundTruthRel, RankedPrediction,
    Task,
};
use ctxpred::features::BoundingBox;

fn main() -> ctxpred::Result<()> {
    let person = BoundingBox::new(10.0, 10.0, 30.0, 60.0);
    let horse = BoundingBox::new(35.0, 40.0, 50.0, 40.0);
    let person_shifted = BoundingBox::new(12.0, 12.0, 30.0, 60.0);

    println!("iou(person, person_shifted) = {:.3}", iou(&person, &person_shifted));
    println!("iou(person, horse)          = {:.3}", iou(&person, &horse));
    let u = union_box(&person, &horse);
    println!("union box = ({}, {}, {}, {})", u.x, u.y, u.w, u.h);

    // Ground truth: ride(person, horse). Predictions, by score:
    //   1. ride(person, horse) with slightly shifted subject box
    //   2. ride(person, horse) with the exact boxes
    //   3. feed(person, horse) with the exact boxes
    let gts = vec![GroundTruthRel {
        subject_label: "person".into(),
        subject_box: person,
        predicate: 0,
        object_label: "horse".into(),
        object_box: horse,
    }];
    let predicate_names = ["ride", "feed"];
    let mut preds = vec![
        RankedPrediction {
            subject: Detection::ground_truth("person", person_shifted),
            object: Detection::ground_truth("horse", horse),
            predicate: 0,
            score: 0.9,
        },
        RankedPrediction {
            subject: Detection::ground_truth("person", person),
            object: Detection::ground_truth("horse", horse),
            predicate: 0,
            score: 0.6,
        },
        RankedPrediction {
            subject: Detection::ground_truth("person", person),
            object: Detection::ground_truth("horse", horse),
            predicate: 1,
            score: 0.3,
        },
    ];
    rank_predictions(&mut preds);
    println!("\nranked candidates:");
    for (i, p) in preds.iter().enumerate() {
        println!(
            "  {}. {}({}, {})  score {:.1}",
            i + 1,
            predicate_names[p.predicate],
            p.subject.label,
            p.object.label,
            p.score
        );
    }

    println!("\nrecall against ride(person, horse) with exact boxes in the ground truth:");
    for task in Task::ALL {
        for k in [1, 2, 3] {
            let r = recall_at_k(&preds, &gts, k, task, 0.5)?;
            println!("  {:<18} R@{k} = {}/{}", task.name(), r.matched, r.total);
        }
    }
    println!("predicate detection rejects the shifted box at k=1 but phrase and");
    println!("relationship detection accept it through the IoU threshold.");

    // Rerouting: two predictions, two ground truths. The top prediction
    // hits both, the second hits only the first. Greedy matching would
    // spend the first ground truth on the top prediction and find one
    // match; maximum matching reroutes and finds two.
    let box_a = BoundingBox::new(0.0, 0.0, 10.0, 10.0);
    let box_b = BoundingBox::new(2.0, 0.0, 10.0, 10.0);
    let box_c = BoundingBox::new(4.0, 0.0, 10.0, 10.0);
    let landmark = BoundingBox::new(30.0, 0.0, 10.0, 10.0);
    let gt = |sb: BoundingBox| GroundTruthRel {
        subject_label: "cat".into(),
        subject_box: sb,
        predicate: 0,
        object_label: "mat".into(),
        object_box: landmark,
    };
    let pred = |sb: BoundingBox, score: f64| RankedPrediction {
        subject: Detection::ground_truth("cat", sb),
        object: Detection::ground_truth("mat", landmark),
        predicate: 0,
        score,
    };
    let mut preds = vec![pred(box_b, 0.9), pred(box_a, 0.5)];
    rank_predictions(&mut preds);
    let gts = vec![gt(box_a), gt(box_c)];
    // box_b overlaps both box_a and box_c above 0.5; box_a overlaps only
    // itself. The only perfect assignment sends the top prediction to
    // box_c.
    let r = recall_at_k(&preds, &gts, 2, Task::Relationship, 0.5)?;
    println!("\nrerouting case: {}/{} matched (greedy would stop at 1/2)", r.matched, r.total);
    assert_eq!(r.matched, 2);
    Ok(())
}
