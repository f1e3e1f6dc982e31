//! Serializable metric records and plain-text report rendering.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::Task;

/// Caveat appended to every rendered report.
pub const NON_REPRODUCIBILITY_NOTE: &str = "note: these values come from locally generated \
synthetic data. Published benchmark figures for this protocol depend on the original image \
corpus, a pretrained convolutional backbone, and externally supplied object detections, none \
of which ship with this harness, so absolute numbers are not reproducible here and are not \
comparable; only the evaluation protocol and the table layout carry over.";

/// Recall numbers for one method, keyed by task name and then by a
/// `r@{k}` column key. `None` marks a task with no ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: String,
    pub tasks: BTreeMap<String, BTreeMap<String, Option<f64>>>,
}

/// Column key for a recall level.
pub fn recall_key(k: usize) -> String {
    format!("r@{k}")
}

impl MethodMetrics {
    pub fn new(method: impl Into<String>) -> Self {
        MethodMetrics {
            method: method.into(),
            tasks: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, task: Task, k: usize, value: Option<f64>) {
        self.tasks
            .entry(task.name().to_string())
            .or_default()
            .insert(recall_key(k), value);
    }

    pub fn get(&self, task: Task, k: usize) -> Option<Option<f64>> {
        self.tasks
            .get(task.name())
            .and_then(|cols| cols.get(&recall_key(k)))
            .copied()
    }

    fn k_values(&self) -> BTreeSet<usize> {
        self.tasks
            .values()
            .flat_map(|cols| cols.keys())
            .filter_map(|key| key.strip_prefix("r@").and_then(|s| s.parse().ok()))
            .collect()
    }
}

/// Options controlling report rendering.
#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    /// Extra heading printed above the table.
    pub title: Option<String>,
}

/// Render a method x task x recall table.
///
/// Tasks appear in protocol order, each spanning one column per recall
/// level with the larger k first; methods appear in input order. Values
/// are percentages with two decimals; tasks a method did not report are
/// left blank and tasks without ground truth render as n/a.
pub fn render_report(methods: &[MethodMetrics], options: &ReportOptions) -> String {
    let tasks: Vec<Task> = Task::ALL
        .into_iter()
        .filter(|t| methods.iter().any(|m| m.tasks.contains_key(t.name())))
        .collect();
    let mut ks: Vec<usize> = methods
        .iter()
        .flat_map(|m| m.k_values())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    ks.reverse();

    const CELL: usize = 9;
    let method_width = methods
        .iter()
        .map(|m| m.method.len())
        .chain(std::iter::once("method".len()))
        .max()
        .unwrap_or(6)
        + 1;
    let group_width = CELL * ks.len().max(1);

    let mut out = String::new();
    if let Some(title) = &options.title {
        out.push_str(title);
        out.push_str("\n\n");
    }

    // Two header lines: task groups, then one recall column per k.
    out.push_str(&format!("{:<method_width$}", "method"));
    for task in &tasks {
        out.push_str(&format!("| {:^group_width$} ", task.name()));
    }
    out.push('\n');
    out.push_str(&format!("{:<method_width$}", ""));
    for _ in &tasks {
        out.push_str("| ");
        for k in &ks {
            out.push_str(&format!("{:>CELL$}", format!("R@{k}")));
        }
        out.push(' ');
    }
    out.push('\n');
    out.push_str(&"-".repeat(method_width));
    for _ in &tasks {
        out.push('+');
        out.push_str(&"-".repeat(group_width + 2));
    }
    out.push('\n');

    for m in methods {
        out.push_str(&format!("{:<method_width$}", m.method));
        for task in &tasks {
            out.push_str("| ");
            for &k in &ks {
                let cell = match m.get(*task, k) {
                    Some(Some(f)) => format!("{:.2}", 100.0 * f),
                    Some(None) => "n/a".to_string(),
                    None => String::new(),
                };
                out.push_str(&format!("{cell:>CELL$}"));
            }
            out.push(' ');
        }
        out.push('\n');
    }

    out.push('\n');
    out.push_str(NON_REPRODUCIBILITY_NOTE);
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MethodMetrics {
        let mut m = MethodMetrics::new("ap+c");
        m.insert(Task::Predicate, 50, Some(0.9512));
        m.insert(Task::Predicate, 100, Some(0.9733));
        m.insert(Task::Phrase, 50, Some(0.88));
        m.insert(Task::Phrase, 100, Some(0.91));
        m
    }

    #[test]
    fn metrics_round_trip_through_json() {
        let m = sample();
        let text = serde_json::to_string_pretty(&m).unwrap();
        assert!(text.contains("\"r@50\""));
        assert!(text.contains("\"predicate det.\""));
        let back: MethodMetrics = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn report_puts_larger_k_first_and_formats_percentages() {
        let report = render_report(&[sample()], &ReportOptions::default());
        let lines: Vec<&str> = report.lines().collect();
        assert!(lines[0].contains("predicate det."));
        assert!(lines[0].contains("phrase det."));
        let r100 = lines[1].find("R@100").unwrap();
        let r50 = lines[1].find("R@50").unwrap();
        assert!(r100 < r50);
        let row = lines
            .iter()
            .find(|l| l.starts_with("ap+c"))
            .expect("method row");
        assert!(row.contains("97.33"));
        assert!(row.contains("95.12"));
        // 97.33 (R@100) renders before 95.12 (R@50).
        assert!(row.find("97.33").unwrap() < row.find("95.12").unwrap());
    }

    #[test]
    fn report_always_carries_the_caveat() {
        let report = render_report(&[sample()], &ReportOptions::default());
        assert!(report.contains(NON_REPRODUCIBILITY_NOTE));
        let empty = render_report(&[], &ReportOptions::default());
        assert!(empty.contains(NON_REPRODUCIBILITY_NOTE));
    }

    #[test]
    fn missing_ground_truth_renders_as_n_a() {
        let mut m = MethodMetrics::new("spatial+c");
        m.insert(Task::Predicate, 50, None);
        let report = render_report(&[m], &ReportOptions::default());
        let row = report
            .lines()
            .find(|l| l.starts_with("spatial+c"))
            .unwrap();
        assert!(row.contains("n/a"));
    }

    #[test]
    fn methods_keep_their_input_order() {
        let mut a = MethodMetrics::new("baseline1-app");
        a.insert(Task::Predicate, 50, Some(0.5));
        let mut b = MethodMetrics::new("ap+c+cat");
        b.insert(Task::Predicate, 50, Some(0.7));
        let report = render_report(&[a, b], &ReportOptions::default());
        let pos_a = report.find("baseline1-app").unwrap();
        let pos_b = report.find("ap+c+cat").unwrap();
        assert!(pos_a < pos_b);
    }

    #[test]
    fn title_is_prepended_when_given(){
        let opts = ReportOptions {
            title: Some("recall on synthetic holdout".to_string()),
        };
        let report = render_report(&[sample()], &opts);
        assert!(report.starts_with("recall on synthetic holdout\n\n"));
    }
}
