use rwre_core::law::{IncrementLaw, Lattice};
use rwre_core::rwre::*;

#[test]
fn path_is_recurrent_like() {
    let r = conductance_scaling_mc(&[1; 256], &IncrementLaw::rademacher(), &[16, 64, 256], 200, 1).unwrap();
    println!("{:?}", r.rows);
    assert_eq!(r.verdict, ScalingVerdict::RecurrentLike, "ratio {}", r.median_ratio);
}

#[test]
fn quadratic_growth_is_transient_like() {
    let growth = power_growth(2.0, 256).unwrap();
    let r = conductance_scaling_mc(&growth, &IncrementLaw::rademacher(), &[16, 64, 256], 40, 1).unwrap();
    println!("{:?}", r.rows);
    assert_eq!(r.verdict, ScalingVerdict::TransientLike, "ratio {}", r.median_ratio);
}

#[test]
fn degenerate_labels_leave_no_spread() {
    let zero = IncrementLaw::Lattice(Lattice::constant(0.0));
    let growth = power_growth(2.0, 32).unwrap();
    let r = conductance_scaling_mc(&growth, &zero, &[4, 8, 32], 20, 5).unwrap();
    for row in &r.rows {
        assert_eq!(row.conductance_q1, row.conductance_q3);
        // flow splits evenly, so the resistance is Σ_{n<=N} 1/|Γ_n|
        let sizes = level_sizes(&growth[..row.depth]);
        let resistance: f64 = sizes[1..].iter().map(|s| 1.0 / *s as f64).sum();
        assert!((row.conductance_median * resistance - 1.0).abs() < 1e-12);
    }
}
