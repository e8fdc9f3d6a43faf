use rwrs_core::simkit::{role, uniform, RngKey};

const N: u64 = 1_000_000;

#[test]
fn uniform_mean_is_one_half() {
    let k = RngKey::new(42, 0, role::INNOVATION);
    let mean = (0..N).map(|i| uniform(&k, i)).sum::<f64>() / N as f64;
    // sd of the mean is 1/sqrt(12 N) ≈ 2.9e-4
    assert!((mean - 0.5).abs() < 0.002, "mean {mean}");
}

#[test]
fn sibling_streams_are_uncorrelated() {
    let master = RngKey::new(42, 0, 0);
    let (a, b) = (master.child(0, role::STEP), master.child(1, role::STEP));
    let (mut sab, mut sa, mut sb, mut saa, mut sbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..N {
        let (x, y) = (uniform(&a, i), uniform(&b, i));
        sa += x;
        sb += y;
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    let n = N as f64;
    let cov = sab / n - sa / n * sb / n;
    let r = cov / ((saa / n - (sa / n).powi(2)) * (sbb / n - (sb / n).powi(2))).sqrt();
    assert!(r.abs() < 0.01, "r = {r}");
}

#[test]
fn roles_give_distinct_streams() {
    let master = RngKey::new(9, 0, 0);
    let step = master.child(3, role::STEP);
    let scen = master.child(3, role::SCENERY);
    let same = (0..1000).filter(|&i| uniform(&step, i) == uniform(&scen, i)).count();
    assert_eq!(same, 0);
}
