//! Presentation-attack-detection metrics. A sample is predicted live when
//! its score is at least the threshold. Label 1 is bona fide, 0 is attack.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub apcer: f64,
    pub bpcer: f64,
    pub acer: f64,
}

fn class_counts(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Metric(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::Metric(format!("score {s} is not a number")));
    }
    let live = labels.iter().filter(|&&y| y == 1).count();
    let spoof = labels.len() - live;
    if live == 0 || spoof == 0 {
        return Err(Error::Metric(format!(
            "rates need both classes (live {live}, spoof {spoof})"
        )));
    }
    Ok((live, spoof))
}

pub fn rates_at_threshold(scores: &[f64], labels: &[u8], threshold: f64) -> Result<Rates> {
    let (live, spoof) = class_counts(scores, labels)?;
    let mut fp = 0usize;
    let mut fneg = 0usize;
    for (&s, &y) in scores.iter().zip(labels) {
        match (y == 1, s >= threshold) {
            (false, true) => fp += 1,
            (true, false) => fneg += 1,
            _ => {}
        }
    }
    let apcer = fp as f64 / spoof as f64;
    let bpcer = fneg as f64 / live as f64;
    Ok(Rates {
        apcer,
        bpcer,
        acer: (apcer + bpcer) / 2.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

/// Operating points at every distinct score plus the all-reject threshold
/// just above the largest score, ordered by increasing FPR.
pub fn roc(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    let (live, spoof) = class_counts(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let max = scores[order[0]];
    let mut pts = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: max.next_up(),
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let t = scores[order[k]];
        while k < order.len() && scores[order[k]] == t {
            if labels[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        pts.push(RocPoint {
            fpr: fp as f64 / spoof as f64,
            tpr: tp as f64 / live as f64,
            threshold: t,
        });
    }
    Ok(pts)
}

/// Trapezoidal area under a ROC curve.
pub fn auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TprAtFpr {
    pub target: f64,
    pub value: f64,
    pub achieved_fpr: f64,
    pub threshold: f64,
}

/// TPR at the smallest threshold whose FPR does not exceed `target`.
pub fn tpr_at_fpr(scores: &[f64], labels: &[u8], target: f64) -> Result<TprAtFpr> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::Metric(format!("FPR target must be in [0, 1], got {target}")));
    }
    let (_, spoof) = class_counts(scores, labels)?;
    if (spoof as f64) < 1.0 / target {
        log::warn!(
            "tpr_at_fpr: {spoof} attack samples cannot resolve an FPR of {target}"
        );
    }
    let pts = roc(scores, labels)?;
    let best = pts
        .iter()
        .rev()
        .find(|p| p.fpr <= target)
        .expect("the all-reject point has zero FPR");
    Ok(TprAtFpr {
        target,
        value: best.tpr,
        achieved_fpr: best.fpr,
        threshold: best.threshold,
    })
}

/// Serialized form of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub threshold: f64,
    pub apcer: f64,
    pub bpcer: f64,
    pub acer: f64,
    pub tpr_at_fpr: TprAtFpr,
    pub auc: f64,
    pub n_live: usize,
    pub n_spoof: usize,
}

impl MetricsReport {
    pub fn compute(scores: &[f64], labels: &[u8], threshold: f64, fpr_target: f64) -> Result<Self> {
        let r = rates_at_threshold(scores, labels, threshold)?;
        let (n_live, n_spoof) = class_counts(scores, labels)?;
        let pts = roc(scores, labels)?;
        Ok(Self {
            threshold,
            apcer: r.apcer,
            bpcer: r.bpcer,
            acer: r.acer,
            tpr_at_fpr: tpr_at_fpr(scores, labels, fpr_target)?,
            auc: auc(&pts),
            n_live,
            n_spoof,
        })
    }
}

/// `roc.csv` body with header `fpr,tpr,threshold`.
pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut s = String::from("fpr,tpr,threshold\n");
    for p in points {
        s.push_str(&format!("{},{},{}\n", p.fpr, p.tpr, p.threshold));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_scores() {
        let s = [1.0, 1.0, 0.0, 0.0];
        let y = [1, 1, 0, 0];
        let r = rates_at_threshold(&s, &y, 0.5).unwrap();
        assert_eq!((r.apcer, r.bpcer, r.acer), (0.0, 0.0, 0.0));
        assert_eq!(tpr_at_fpr(&s, &y, 1e-3).unwrap().value, 1.0);
        let pts = roc(&s, &y).unwrap();
        assert!(pts.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
        assert_eq!(auc(&pts), 1.0);
    }

    #[test]
    fn inverted_scores() {
        let s = [0.0, 0.0, 1.0, 1.0];
        let y = [1, 1, 0, 0];
        let pts = roc(&s, &y).unwrap();
        assert!(pts.iter().any(|p| p.fpr == 1.0 && p.tpr == 0.0));
        assert_eq!(auc(&pts), 0.0);
    }

    #[test]
    fn acer_arithmetic() {
        // 2 of 1000 attacks accepted, 4 of 1000 bona fide rejected
        let mut s = vec![0.0; 1000];
        s.extend(vec![1.0; 1000]);
        let mut y = vec![0u8; 1000];
        y.extend(vec![1u8; 1000]);
        s[0] = 0.9;
        s[1] = 0.9;
        for k in 0..4 {
            s[1000 + k] = 0.1;
        }
        let r = rates_at_threshold(&s, &y, 0.5).unwrap();
        assert_eq!((r.apcer, r.bpcer), (0.002, 0.004));
        assert!((r.acer - 0.003).abs() < 1e-15);
    }

    #[test]
    fn identical_scores_give_zero_tpr() {
        let s = [0.4; 6];
        let y = [1, 0, 1, 0, 1, 0];
        let t = tpr_at_fpr(&s, &y, 0.5).unwrap();
        assert_eq!((t.value, t.achieved_fpr), (0.0, 0.0));
        assert!(t.threshold > 0.4);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(matches!(rates_at_threshold(&[0.1], &[1], 0.5), Err(Error::Metric(_))));
        assert!(matches!(roc(&[0.1, 0.2], &[0, 0]), Err(Error::Metric(_))));
        assert!(matches!(tpr_at_fpr(&[0.1], &[0], 0.1), Err(Error::Metric(_))));
    }

    #[test]
    fn report_schema() {
        let r = MetricsReport::compute(&[0.9, 0.2, 0.6, 0.1], &[1, 0, 1, 0], 0.5, 1e-3).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for k in ["threshold", "apcer", "bpcer", "acer", "auc", "n_live", "n_spoof"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        for k in ["target", "value", "achieved_fpr", "threshold"] {
            assert!(v["tpr_at_fpr"].get(k).is_some(), "{k}");
        }
    }
}
