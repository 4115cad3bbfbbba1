//! Selective prediction: answer only when confidence clears a threshold, and
//! trace risk against coverage as the threshold moves.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::PathLabel;

#[derive(Debug, Error, PartialEq)]
pub enum SelectiveError {
    #[error("no predictions")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub example_id: String,
    pub answer: String,
    pub confidence: f64,
    pub em: u8,
    pub f1: f64,
    pub hop_path: PathLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RiskMetric {
    Em,
    #[default]
    F1,
}

impl std::str::FromStr for RiskMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "em" => Ok(Self::Em),
            "f1" => Ok(Self::F1),
            _ => Err(format!("unknown metric {s:?}")),
        }
    }
}

impl Prediction {
    pub fn metric(&self, metric: RiskMetric) -> f64 {
        match metric {
            RiskMetric::Em => self.em as f64,
            RiskMetric::F1 => self.f1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Answer,
    Abstain,
}

pub fn abstain_decision(confidence: f64, gamma: f64) -> Decision {
    if confidence >= gamma {
        Decision::Answer
    } else {
        Decision::Abstain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskCoveragePoint {
    pub gamma: f64,
    pub coverage: f64,
    pub risk: f64,
    pub n_covered: usize,
}

/// Sweeps `γ ∈ {0} ∪ {confidences}`. Each distinct covered set is reported
/// once, at the smallest γ producing it; points run from full coverage down.
pub fn risk_coverage_curve(predictions: &[Prediction], metric: RiskMetric) -> Result<Vec<RiskCoveragePoint>, SelectiveError> {
    if predictions.is_empty() {
        return Err(SelectiveError::Empty);
    }
    let n = predictions.len();
    // Sort by confidence descending (metric as a secondary key only to make
    // the summation order independent of input order).
    let mut sorted: Vec<(f64, f64)> = predictions.iter().map(|p| (p.confidence, p.metric(metric))).collect();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));

    let mut gammas: Vec<f64> = sorted.iter().map(|s| s.0).collect();
    gammas.push(0.0);
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();

    let mut points = Vec::new();
    let mut last_covered = None;
    for gamma in gammas {
        let covered = sorted.iter().take_while(|s| s.0 >= gamma).count();
        if covered == 0 || last_covered == Some(covered) {
            continue;
        }
        last_covered = Some(covered);
        let mean = sorted[..covered].iter().map(|s| s.1).sum::<f64>() / covered as f64;
        points.push(RiskCoveragePoint {
            gamma,
            coverage: covered as f64 / n as f64,
            risk: 1.0 - mean,
            n_covered: covered,
        });
    }
    Ok(points)
}

/// Largest coverage whose covered mean metric reaches `target`, else 0.
pub fn coverage_at_score(curve: &[RiskCoveragePoint], predictions: &[Prediction], metric: RiskMetric, target: f64) -> f64 {
    curve
        .iter()
        .filter(|pt| {
            let covered: Vec<f64> = predictions
                .iter()
                .filter(|p| p.confidence >= pt.gamma)
                .map(|p| p.metric(metric))
                .collect();
            !covered.is_empty() && covered.iter().sum::<f64>() / covered.len() as f64 >= target
        })
        .map(|pt| pt.coverage)
        .fold(0.0, f64::max)
}

pub fn slice_by_path(predictions: &[Prediction]) -> BTreeMap<PathLabel, Vec<Prediction>> {
    let mut out: BTreeMap<PathLabel, Vec<Prediction>> = BTreeMap::new();
    for p in predictions {
        out.entry(p.hop_path).or_default().push(p.clone());
    }
    out
}

pub fn write_curve_csv(curve: &[RiskCoveragePoint], out: &mut (impl Write + ?Sized)) -> std::io::Result<()> {
    writeln!(out, "gamma,coverage,risk,n_covered")?;
    for p in curve {
        writeln!(out, "{},{},{},{}", p.gamma, p.coverage, p.risk, p.n_covered)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pred(conf: f64, em: u8, f1: f64) -> Prediction {
        Prediction {
            example_id: format!("{conf}"),
            answer: String::new(),
            confidence: conf,
            em,
            f1,
            hop_path: PathLabel::EE,
        }
    }

    #[test]
    fn threshold_is_inclusive() {
        assert_eq!(abstain_decision(0.7, 0.7), Decision::Answer);
        assert_eq!(abstain_decision(0.69, 0.7), Decision::Abstain);
        assert_eq!(abstain_decision(1e-300, 0.0), Decision::Answer);
    }

    #[test]
    fn all_correct_has_zero_risk() {
        let ps = vec![pred(0.9, 1, 1.0), pred(0.2, 1, 1.0), pred(0.5, 1, 1.0)];
        assert!(risk_coverage_curve(&ps, RiskMetric::Em).unwrap().iter().all(|p| p.risk == 0.0));
    }

    #[test]
    fn three_prediction_worked_example() {
        let ps = vec![pred(0.9, 1, 1.0), pred(0.6, 1, 1.0), pred(0.3, 0, 0.0)];
        let c = risk_coverage_curve(&ps, RiskMetric::Em).unwrap();
        let expect = [(0.0, 1.0, 1.0 / 3.0), (0.6, 2.0 / 3.0, 0.0), (0.9, 1.0 / 3.0, 0.0)];
        assert_eq!(c.len(), 3);
        for (p, (g, cov, risk)) in c.iter().zip(expect) {
            assert_eq!(p.gamma, g);
            assert!((p.coverage - cov).abs() < 1e-9);
            assert!((p.risk - risk).abs() < 1e-9);
        }
    }

    #[test]
    fn single_prediction_f1_curve() {
        let c = risk_coverage_curve(&[pred(0.4, 0, 0.5)], RiskMetric::F1).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].coverage, c[0].risk), (1.0, 0.5));
    }

    #[test]
    fn empty_predictions_are_rejected() {
        assert_eq!(risk_coverage_curve(&[], RiskMetric::F1), Err(SelectiveError::Empty));
    }

    #[test]
    fn coverage_at_score_fixtures() {
        let ps = vec![pred(0.9, 1, 1.0), pred(0.8, 1, 1.0), pred(0.7, 1, 1.0), pred(0.1, 0, 0.0)];
        let c = risk_coverage_curve(&ps, RiskMetric::Em).unwrap();
        assert_eq!(coverage_at_score(&c, &ps, RiskMetric::Em, 0.75), 1.0);
        assert_eq!(coverage_at_score(&c, &ps, RiskMetric::Em, 1.0), 0.75);
        let wrong = vec![pred(0.5, 0, 0.0), pred(0.4, 0, 0.2)];
        let c = risk_coverage_curve(&wrong, RiskMetric::F1).unwrap();
        assert_eq!(coverage_at_score(&c, &wrong, RiskMetric::F1, 0.9), 0.0);
    }

    #[test]
    fn slices_partition_predictions() {
        let mut ps = Vec::new();
        for (i, path) in PathLabel::LABELED.into_iter().enumerate() {
            ps.push(Prediction {
                hop_path: path,
                ..pred(i as f64 / 10.0, 1, 1.0)
            });
        }
        let s = slice_by_path(&ps);
        assert_eq!(s.len(), 4);
        assert!(s.values().all(|v| v.len() == 1));
        let all_ee = slice_by_path(&[pred(0.1, 1, 1.0), pred(0.2, 0, 0.0)]);
        assert_eq!(all_ee.keys().copied().collect::<Vec<_>>(), [PathLabel::EE]);
    }

    fn arb_preds() -> impl Strategy<Value = Vec<Prediction>> {
        prop::collection::vec((0u8..20, 0u8..=4), 1..40).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (c, f))| Prediction {
                    example_id: format!("e{i}"),
                    answer: String::new(),
                    confidence: (c as f64 + 1.0) / 20.0,
                    em: u8::from(f == 4),
                    f1: f as f64 / 4.0,
                    hop_path: PathLabel::LABELED[i % 4],
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn curve_invariants(ps in arb_preds(), seed in any::<u64>()) {
            for metric in [RiskMetric::Em, RiskMetric::F1] {
                let c = risk_coverage_curve(&ps, metric).unwrap();
                prop_assert_eq!(c[0].gamma, 0.0);
                prop_assert_eq!(c[0].n_covered, ps.len());
                let overall = ps.iter().map(|p| p.metric(metric)).sum::<f64>() / ps.len() as f64;
                prop_assert!((c[0].risk - (1.0 - overall)).abs() < 1e-12);
                for w in c.windows(2) {
                    prop_assert!(w[0].gamma < w[1].gamma && w[0].coverage > w[1].coverage);
                }
                for pt in &c {
                    let covered: Vec<f64> = ps.iter().filter(|p| p.confidence >= pt.gamma).map(|p| p.metric(metric)).collect();
                    prop_assert_eq!(covered.len(), pt.n_covered);
                    let brute = 1.0 - covered.iter().sum::<f64>() / covered.len() as f64;
                    prop_assert!((brute - pt.risk).abs() < 1e-12);
                }
                let mut shuffled = ps.clone();
                let len = shuffled.len();
                shuffled.rotate_left((seed as usize) % len);
                shuffled.reverse();
                prop_assert_eq!(risk_coverage_curve(&shuffled, metric).unwrap(), c);
            }
        }
    }
}
