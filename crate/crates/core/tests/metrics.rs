use mpsvqc::metrics::{auc, rates_at_threshold, roc, tpr_at_fpr, MetricsReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_set(seed: u64, n: usize) -> (Vec<f64>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    // coarse grid forces ties
    let scores = labels
        .iter()
        .map(|&y| ((rng.random::<f64>() + 0.3 * y as f64) * 500.0).round() / 500.0)
        .collect();
    (scores, labels)
}

#[test]
fn rates_match_counting_oracle() {
    let (s, y) = random_set(1, 10_000);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let thr = (rng.random::<f64>() * 1.3 * 500.0).round() / 500.0;
        let r = rates_at_threshold(&s, &y, thr).unwrap();
        let (mut fp, mut neg, mut fnn, mut pos) = (0, 0, 0, 0);
        for i in 0..s.len() {
            if y[i] == 0 {
                neg += 1;
                fp += (s[i] >= thr) as usize;
            } else {
                pos += 1;
                fnn += (s[i] < thr) as usize;
            }
        }
        assert_eq!(r.apcer, fp as f64 / neg as f64);
        assert_eq!(r.bpcer, fnn as f64 / pos as f64);
        assert_eq!(r.acer, (r.apcer + r.bpcer) / 2.0);
    }
}

#[test]
fn tpr_at_fpr_matches_exhaustive_scan() {
    for (seed, target) in [(3, 0.01), (4, 1e-3), (5, 0.1)] {
        let (s, y) = random_set(seed, 10_000);
        let neg = y.iter().filter(|&&v| v == 0).count() as f64;
        let pos = y.len() as f64 - neg;
        let mut best = 0.0;
        let mut candidates = s.clone();
        candidates.push(f64::INFINITY);
        for &t in &candidates {
            let fp = s.iter().zip(&y).filter(|(&v, &l)| l == 0 && v >= t).count() as f64;
            if fp / neg <= target {
                let tp = s.iter().zip(&y).filter(|(&v, &l)| l == 1 && v >= t).count() as f64;
                if tp / pos > best {
                    best = tp / pos;
                }
            }
        }
        let got = tpr_at_fpr(&s, &y, target).unwrap();
        assert_eq!(got.value, best);
        assert!(got.achieved_fpr <= target);
    }
}

#[test]
fn auc_matches_mann_whitney() {
    let (s, y) = random_set(6, 3000);
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..s.len() {
        if y[i] != 1 {
            continue;
        }
        for j in 0..s.len() {
            if y[j] == 0 {
                pairs += 1.0;
                wins += if s[i] > s[j] { 1.0 } else if s[i] == s[j] { 0.5 } else { 0.0 };
            }
        }
    }
    let a = auc(&roc(&s, &y).unwrap());
    assert!((a - wins / pairs).abs() <= 1e-12);
}

#[test]
fn degenerate_cases() {
    let y = [1u8, 1, 0, 0];
    let perfect = [1.0, 1.0, 0.0, 0.0];
    let r = rates_at_threshold(&perfect, &y, 0.5).unwrap();
    assert_eq!((r.apcer, r.bpcer, r.acer), (0.0, 0.0, 0.0));
    assert_eq!(tpr_at_fpr(&perfect, &y, 1e-3).unwrap().value, 1.0);
    let points = roc(&perfect, &y).unwrap();
    assert!(points.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
    let inverted = [0.0, 0.0, 1.0, 1.0];
    let points = roc(&inverted, &y).unwrap();
    assert!(points.iter().any(|p| p.fpr == 1.0 && p.tpr == 0.0));
    assert_eq!(auc(&points), 0.0);
    assert_eq!(tpr_at_fpr(&[0.4; 4], &y, 0.5).unwrap().value, 0.0);
    assert!(rates_at_threshold(&[0.1, 0.2], &[1, 1], 0.5).is_err());
}

#[test]
fn report_is_consistent() {
    let (s, y) = random_set(7, 1000);
    let m = MetricsReport::compute(&s, &y, 0.5, 1e-3).unwrap();
    assert_eq!(m.acer, (m.apcer + m.bpcer) / 2.0);
    assert_eq!(m.n_live + m.n_spoof, 1000);
    let json = serde_json::to_value(&m).unwrap();
    for key in ["threshold", "apcer", "bpcer", "acer", "tpr_at_fpr", "auc", "n_live", "n_spoof"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    for key in ["target", "value", "achieved_fpr", "threshold"] {
        assert!(json["tpr_at_fpr"].get(key).is_some());
    }
}
