//! Detection scoring: box matching under the overlap rule, precision,
//! recall, F1 and the mean overlap ratio, plus tabular reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

pub const DEFAULT_TAU: f64 = 0.2;

/// Intersection area over ground-truth area.
pub fn overlap_ratio(gt: &BoundingBox, det: &BoundingBox) -> f64 {
    gt.intersection_area(det) as f64 / gt.area() as f64
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tp_overlaps: Vec<f64>,
}

/// Matches detections to ground truth one-to-one over the pairs whose
/// overlap ratio is at least `tau`, maximizing first the number of pairs and
/// then their total overlap. A detection is a false positive only when its
/// overlap with every ground-truth box is below `tau`; extra detections on an
/// already matched box count neither way.
pub fn match_frame(gt: &[BoundingBox], det: &[BoundingBox], tau: f64) -> Result<MatchResult> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidParameter(format!("tau must lie in (0, 1], got {tau}")));
    }
    let ratios: Vec<Vec<f64>> = gt.iter().map(|g| det.iter().map(|d| overlap_ratio(g, d)).collect()).collect();
    let pairs = optimal_assignment(&ratios, tau);

    let mut tp_overlaps: Vec<f64> = pairs.iter().map(|&(g, d)| ratios[g][d]).collect();
    tp_overlaps.sort_by(|a, b| b.partial_cmp(a).expect("finite overlaps"));
    let fp = (0..det.len()).filter(|&d| ratios.iter().all(|row| row[d] < tau)).count();
    Ok(MatchResult {
        tp: pairs.len(),
        fp,
        fn_: gt.len() - pairs.len(),
        tp_overlaps,
    })
}

/// Maximum-cardinality, then maximum-weight, matching between rows and
/// columns over entries `>= tau`. Returns `(row, col)` pairs.
fn optimal_assignment(weights: &[Vec<f64>], tau: f64) -> Vec<(usize, usize)> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    // Every admissible pair is worth more than any set of overlaps, so the
    // cardinality is maximized first.
    let bonus = (rows.min(cols) + 1) as f64;
    let n = rows.max(cols);
    let cost = |r: usize, c: usize| -> f64 {
        if r < rows && c < cols && weights[r][c] >= tau {
            -(bonus + weights[r][c])
        } else {
            0.0
        }
    };
    hungarian(n, cost)
        .into_iter()
        .enumerate()
        .filter(|&(r, c)| r < rows && c < cols && weights[r][c] >= tau)
        .collect()
}

/// Minimum-cost perfect assignment on an `n` x `n` cost matrix; returns the
/// column assigned to each row.
fn hungarian(n: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    // potentials and matching with 1-based sentinel column 0
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub pr: f64,
    pub r: f64,
    pub f1: f64,
    pub o_r: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1_score(pr: f64, r: f64) -> f64 {
    if pr + r > 0.0 {
        2.0 * pr * r / (pr + r)
    } else {
        0.0
    }
}

/// Pools counts over frames; O_r is the mean over every true positive.
pub fn aggregate_metrics<'a>(results: impl IntoIterator<Item = &'a MatchResult>) -> Metrics {
    let (mut tp, mut fp, mut fn_, mut sum, mut n) = (0usize, 0usize, 0usize, 0.0f64, 0usize);
    for m in results {
        tp += m.tp;
        fp += m.fp;
        fn_ += m.fn_;
        sum += m.tp_overlaps.iter().sum::<f64>();
        n += m.tp_overlaps.len();
    }
    let ratio = |a: usize, b: usize| if b > 0 { a as f64 / b as f64 } else { 0.0 };
    let pr = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    Metrics {
        pr,
        r,
        f1: f1_score(pr, r),
        o_r: if n > 0 { sum / n as f64 } else { 0.0 },
        tp,
        fp,
        fn_,
    }
}

/// Matches every frame from `skip` on and pools the results. `gt` and
/// `det` hold one box list per frame and must be the same length.
pub fn evaluate_sequence(gt: &[Vec<BoundingBox>], det: &[Vec<BoundingBox>], tau: f64, skip: usize) -> Result<Metrics> {
    if gt.len() != det.len() {
        return Err(Error::Format(format!(
            "{} ground-truth frames but {} detection frames",
            gt.len(),
            det.len()
        )));
    }
    let matches = gt
        .iter()
        .zip(det)
        .skip(skip)
        .map(|(g, d)| match_frame(g, d, tau))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate_metrics(&matches))
}

/// Mean of each metric over sequences; counts are summed.
pub fn average_metrics(per_sequence: &[Metrics]) -> Metrics {
    let n = per_sequence.len();
    if n == 0 {
        return Metrics::default();
    }
    let mean = |f: fn(&Metrics) -> f64| per_sequence.iter().map(f).sum::<f64>() / n as f64;
    Metrics {
        pr: mean(|m| m.pr),
        r: mean(|m| m.r),
        f1: mean(|m| m.f1),
        o_r: mean(|m| m.o_r),
        tp: per_sequence.iter().map(|m| m.tp).sum(),
        fp: per_sequence.iter().map(|m| m.fp).sum(),
        fn_: per_sequence.iter().map(|m| m.fn_).sum(),
    }
}

/// Per-sequence block of O_r, Pr, R and F1 rows followed by the average over
/// sequences, as aligned text.
pub fn report_text(sequences: &[(String, Metrics)]) -> String {
    let name_w = sequences.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max("Sequence".len()).max("Average".len());
    let mut out = String::new();
    let rule = format!("+-{}-+-----+--------+\n", "-".repeat(name_w));
    out.push_str(&rule);
    let _ = writeln!(out, "| {:<name_w$} |     | Value  |", "Sequence");
    out.push_str(&rule);
    let block = |out: &mut String, name: &str, m: &Metrics| {
        for (i, (label, v)) in [("O_r", m.o_r), ("Pr", m.pr), ("R", m.r), ("F1", m.f1)].into_iter().enumerate() {
            let shown = if i == 0 { name } else { "" };
            let _ = writeln!(out, "| {shown:<name_w$} | {label:<3} | {v:.4} |");
        }
        out.push_str(&rule);
    };
    for (name, m) in sequences {
        block(&mut out, name, m);
    }
    let avg = average_metrics(&sequences.iter().map(|(_, m)| *m).collect::<Vec<_>>());
    block(&mut out, "Average", &avg);
    out
}

/// One delimited record per sequence plus an `average` record.
pub fn report_csv(sequences: &[(String, Metrics)]) -> String {
    let mut out = String::from("sequence,o_r,pr,r,f1,tp,fp,fn\n");
    let row = |out: &mut String, name: &str, m: &Metrics| {
        let _ = writeln!(
            out,
            "{name},{:.4},{:.4},{:.4},{:.4},{},{},{}",
            m.o_r, m.pr, m.r, m.f1, m.tp, m.fp, m.fn_
        );
    };
    for (name, m) in sequences {
        row(&mut out, name, m);
    }
    let avg = average_metrics(&sequences.iter().map(|(_, m)| *m).collect::<Vec<_>>());
    row(&mut out, "average", &avg);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Best (cardinality, total overlap) over every partial one-to-one
    /// matching of admissible pairs.
    fn brute_force(gt: &[BoundingBox], det: &[BoundingBox], tau: f64) -> (usize, f64) {
        fn go(g: usize, gt: &[BoundingBox], det: &[BoundingBox], used: &mut Vec<bool>, tau: f64) -> (usize, f64) {
            if g == gt.len() {
                return (0, 0.0);
            }
            let mut best = go(g + 1, gt, det, used, tau);
            for d in 0..det.len() {
                let r = overlap_ratio(&gt[g], &det[d]);
                if !used[d] && r >= tau {
                    used[d] = true;
                    let (c, s) = go(g + 1, gt, det, used, tau);
                    used[d] = false;
                    let cand = (c + 1, s + r);
                    if cand.0 > best.0 || (cand.0 == best.0 && cand.1 > best.1 + 1e-12) {
                        best = cand;
                    }
                }
            }
            best
        }
        go(0, gt, det, &mut vec![false; det.len()], tau)
    }

    #[test]
    fn overlap_examples() {
        let g = BoundingBox::new(0, 0, 10, 10);
        assert_eq!(overlap_ratio(&g, &g), 1.0);
        assert_eq!(overlap_ratio(&g, &BoundingBox::new(20, 20, 5, 5)), 0.0);
        assert_eq!(overlap_ratio(&g, &BoundingBox::new(0, 0, 5, 10)), 0.5);
        // denominator is the GT area, not the union
        assert_eq!(overlap_ratio(&g, &BoundingBox::new(-10, -10, 40, 40)), 1.0);
    }

    #[test]
    fn match_examples() {
        let none = match_frame(&[], &[], 0.2).unwrap();
        assert_eq!((none.tp, none.fp, none.fn_), (0, 0, 0));

        let g = BoundingBox::new(0, 0, 10, 10);
        let quarter = BoundingBox::new(0, 0, 10, 2).union(&BoundingBox::new(0, 0, 5, 1));
        let m = match_frame(&[g], &[BoundingBox::new(0, 0, 5, 5)], 0.2).unwrap();
        assert_eq!((m.tp, m.tp_overlaps.clone()), (1, vec![0.25]));
        assert_eq!(overlap_ratio(&g, &quarter), 0.2);
        assert_eq!(match_frame(&[g], &[quarter], 0.2).unwrap().tp, 1);

        let left = BoundingBox::new(0, 0, 5, 10);
        let right = BoundingBox::new(5, 0, 5, 10);
        let m = match_frame(&[g], &[left, right], 0.2).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_), (1, 0, 0));

        let miss = match_frame(&[g], &[BoundingBox::new(0, 0, 1, 1)], 0.2).unwrap();
        assert_eq!((miss.tp, miss.fp, miss.fn_), (0, 1, 1));
        assert!(match_frame(&[g], &[g], 0.0).is_err());
    }

    #[test]
    fn sequence_evaluation_skips_warmup_and_checks_lengths() {
        let b = BoundingBox::new(0, 0, 10, 10);
        let gt = vec![vec![b], vec![b], vec![b]];
        let det = vec![vec![], vec![b], vec![BoundingBox::new(50, 50, 5, 5)]];
        let m = evaluate_sequence(&gt, &det, DEFAULT_TAU, 1).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_), (1, 1, 1));
        let all = evaluate_sequence(&gt, &det, DEFAULT_TAU, 0).unwrap();
        assert_eq!(all.fn_, 2);
        assert!(evaluate_sequence(&gt, &det[..2], DEFAULT_TAU, 0).is_err());
    }

    #[test]
    fn optimal_beats_greedy_when_it_must() {
        // greedy would pair the big detection with g1 and leave g2 unmatched
        let g1 = BoundingBox::new(0, 0, 10, 10);
        let g2 = BoundingBox::new(10, 0, 10, 10);
        let big = BoundingBox::new(0, 0, 20, 10);
        let small = BoundingBox::new(0, 0, 3, 10);
        let m = match_frame(&[g1, g2], &[big, small], 0.2).unwrap();
        assert_eq!(m.tp, 2);
    }

    #[test]
    fn aggregate_examples() {
        let perfect = MatchResult {
            tp: 5,
            fp: 0,
            fn_: 0,
            tp_overlaps: vec![1.0, 0.8, 0.6, 0.9, 0.7],
        };
        let m = aggregate_metrics([&perfect]);
        assert_eq!((m.pr, m.r, m.f1), (1.0, 1.0, 1.0));
        assert!((m.o_r - 0.8).abs() < 1e-12);

        let missed = MatchResult {
            fn_: 10,
            ..Default::default()
        };
        let m = aggregate_metrics([&missed]);
        assert_eq!((m.pr, m.r, m.f1, m.o_r), (0.0, 0.0, 0.0, 0.0));
        assert!((f1_score(0.7713, 0.9123) - 0.8359).abs() < 5e-5);
    }

    #[test]
    fn reports_have_expected_shape() {
        let m = aggregate_metrics([&MatchResult {
            tp: 3,
            fp: 1,
            fn_: 0,
            tp_overlaps: vec![0.5; 3],
        }]);
        let seqs = vec![("a".to_string(), m), ("bb".to_string(), m)];
        let text = report_text(&seqs);
        assert_eq!(text.lines().filter(|l| l.contains("| F1 ")).count(), 3);
        assert!(text.contains("Average"));
        let csv = report_csv(&seqs);
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(csv.lines().nth(1).unwrap(), "a,0.5000,0.7500,1.0000,0.8571,3,1,0");
    }

    fn box_strategy() -> impl Strategy<Value = BoundingBox> {
        (0i32..30, 0i32..30, 1u32..20, 1u32..20).prop_map(|(x, y, w, h)| BoundingBox::new(x, y, w, h))
    }

    proptest! {
        #[test]
        fn matcher_equals_brute_force(
            gt in prop::collection::vec(box_strategy(), 0..=4),
            det in prop::collection::vec(box_strategy(), 0..=4),
        ) {
            let m = match_frame(&gt, &det, 0.2).unwrap();
            let (count, total) = brute_force(&gt, &det, 0.2);
            prop_assert_eq!(m.tp, count);
            prop_assert!((m.tp_overlaps.iter().sum::<f64>() - total).abs() < 1e-9);
            prop_assert!(m.tp_overlaps.iter().all(|&o| o >= 0.2));
        }

        #[test]
        fn matcher_ignores_input_order(
            gt in prop::collection::vec(box_strategy(), 0..6),
            det in prop::collection::vec(box_strategy(), 0..6),
            seed in any::<u64>(),
        ) {
            let rotate = |v: &[BoundingBox]| {
                let mut v = v.to_vec();
                if !v.is_empty() {
                    let k = (seed as usize) % v.len();
                    v.rotate_left(k);
                    v.reverse();
                }
                v
            };
            let a = match_frame(&gt, &det, 0.2).unwrap();
            let b = match_frame(&rotate(&gt), &rotate(&det), 0.2).unwrap();
            prop_assert_eq!((a.tp, a.fp, a.fn_), (b.tp, b.fp, b.fn_));
            prop_assert!((a.tp_overlaps.iter().sum::<f64>() - b.tp_overlaps.iter().sum::<f64>()).abs() < 1e-9);
        }

        #[test]
        fn metrics_stay_in_range(
            frames in prop::collection::vec((0usize..20, 0usize..20, 0usize..20, 0.2f64..1.0), 0..10),
        ) {
            let results: Vec<MatchResult> = frames
                .iter()
                .map(|&(tp, fp, fn_, o)| MatchResult { tp, fp, fn_, tp_overlaps: vec![o; tp] })
                .collect();
            let m = aggregate_metrics(&results);
            for v in [m.pr, m.r, m.f1, m.o_r] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!(m.f1 <= m.pr.max(m.r) + 1e-12);
            prop_assert_eq!(m.f1 == 0.0, m.tp == 0);
        }
    }
}
