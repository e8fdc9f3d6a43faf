use rwrs_core::simkit::{role, RngKey};
use rwrs_core::stable_walk::{sample_step, StepLaw};

/// Σ_{k ≥ m} k^{-s} by direct summation to N plus an Euler–Maclaurin tail.
fn tail_sum(s: f64, m: u64) -> f64 {
    let n = 200_000u64;
    let direct: f64 = (m..n).map(|k| (k as f64).powf(-s)).sum();
    let nf = n as f64;
    direct + nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s) + s * nf.powf(-s - 1.0) / 12.0
}

#[test]
fn zeta_oracle_matches_known_constant() {
    let c = 1.0 / (2.0 * tail_sum(1.6, 1));
    assert!((c - 0.218_745_082_887_236_8).abs() < 1e-9, "{c}");
}

#[test]
fn unit_step_frequency() {
    let law = StepLaw::symmetric_zipf(0.6).unwrap();
    let key = RngKey::new(2024, 0, role::STEP);
    let n = 1_000_000u64;
    let hits = (0..n).filter(|&i| sample_step(&law, &key, i) == 1).count() as f64;
    let p = 0.218_745_082_887_236_8;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((hits / n as f64 - p).abs() < 3.0 * se, "{}", hits / n as f64);
    assert!((law.pmf(1) - p).abs() < 1e-9);
}

#[test]
fn large_jump_frequency() {
    let alpha = 0.6;
    let law = StepLaw::symmetric_zipf(alpha).unwrap();
    let key = RngKey::new(77, 0, role::STEP);
    let s = 1.0 + alpha;
    let p = tail_sum(s, 101) / tail_sum(s, 1);
    let n = 1_000_000u64;
    let hits = (0..n).filter(|&i| sample_step(&law, &key, i).abs() > 100).count() as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((hits / n as f64 - p).abs() < 3.0 * se, "{} vs {p}", hits / n as f64);
}

#[test]
fn steps_are_symmetric_and_nonzero() {
    let law = StepLaw::symmetric_zipf(0.8).unwrap();
    let key = RngKey::new(5, 1, role::STEP);
    let n = 200_000u64;
    let xs: Vec<i64> = (0..n).map(|i| sample_step(&law, &key, i)).collect();
    assert!(xs.iter().all(|&x| x != 0));
    let pos = xs.iter().filter(|&&x| x > 0).count() as f64 / n as f64;
    assert!((pos - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
}
