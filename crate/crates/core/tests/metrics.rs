use hierfuse_core::metrics::{f1_metrics, regression_metrics, MetricsReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Nearest integer in `[lo, hi]`, halves resolved away from zero.
fn nearest_bin(s: f64, lo: i32, hi: i32) -> i32 {
    let mut best = lo;
    for k in lo..=hi {
        let (d, bd) = ((s - k as f64).abs(), (s - best as f64).abs());
        if d < bd || (d == bd && (k as f64).abs() > (best as f64).abs()) {
            best = k;
        }
    }
    best
}

fn oracle_accuracy(preds: &[f64], labels: &[f64], bin: impl Fn(f64) -> i32) -> f64 {
    let hits = preds.iter().zip(labels).filter(|(p, y)| bin(**p) == bin(**y)).count();
    100.0 * hits as f64 / preds.len() as f64
}

fn oracle_f1(preds: &[usize], labels: &[usize], k: usize) -> (Vec<f64>, f64) {
    let mut f1 = Vec::new();
    let mut weighted = 0.0;
    for c in 0..k {
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        let mut support = 0.0;
        for (&p, &y) in preds.iter().zip(labels) {
            if y == c {
                support += 1.0;
            }
            match (p == c, y == c) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fn_ += 1.0,
                _ => {}
            }
        }
        let denom = 2.0 * tp + fp + fn_;
        let f = if denom > 0.0 { 2.0 * tp / denom } else { 0.0 };
        f1.push(f);
        weighted += f * support;
    }
    (f1, 100.0 * weighted / preds.len() as f64)
}

#[test]
fn metrics_match_brute_force_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..200 {
        let n = rng.random_range(1..60);
        let k = rng.random_range(2..7);
        // half-integers exercise the rounding ties
        let score = |rng: &mut ChaCha8Rng| {
            if rng.random_bool(0.2) {
                rng.random_range(-8i32..=8) as f64 * 0.5
            } else {
                rng.random_range(-4.0..4.0)
            }
        };
        let preds: Vec<f64> = (0..n).map(|_| score(&mut rng)).collect();
        let labels: Vec<f64> = (0..n).map(|_| score(&mut rng).clamp(-3.0, 3.0)).collect();
        let cp: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let cl: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();

        let r = MetricsReport::compute(&preds, &labels, &cp, &cl, k).unwrap();
        let acc7 = oracle_accuracy(&preds, &labels, |s| nearest_bin(s, -3, 3));
        let acc5 = oracle_accuracy(&preds, &labels, |s| nearest_bin(s, -2, 2));
        let acc2 = oracle_accuracy(&preds, &labels, |s| i32::from(s >= 0.0));
        let mae = preds.iter().zip(&labels).map(|(p, y)| (p - y).abs()).sum::<f64>() / n as f64;
        let (f1, wf1) = oracle_f1(&cp, &cl, k);
        assert!((r.acc7 - acc7).abs() <= 1e-9);
        assert!((r.acc5 - acc5).abs() <= 1e-9);
        assert!((r.acc2 - acc2).abs() <= 1e-9);
        assert!((r.mae - mae).abs() <= 1e-9);
        assert!((r.weighted_f1 - wf1).abs() <= 1e-9);
        for (a, b) in r.per_class_f1.iter().zip(&f1) {
            assert!((a - b).abs() <= 1e-9);
        }
        assert_eq!(r.confusion.iter().flatten().sum::<u64>(), n as u64);
    }
}

#[test]
fn hand_computed_weighted_f1() {
    // both classes have precision/recall (1, 1/2) or (1/2, 1): F1 = 2/3 each
    let m = f1_metrics(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
    assert!((m.weighted_f1 - 66.67).abs() < 5e-3);
}

#[test]
fn mismatched_lengths_are_rejected() {
    assert!(regression_metrics(&[0.0], &[]).is_err());
    assert!(f1_metrics(&[0, 1], &[0], 2).is_err());
}
