use nsel_demo::{multiplier_profile, radius_sweep, stress_slice, DEMO_N};

#[test]
fn multiplier_starts_at_one_and_stays_bounded() {
    let p = multiplier_profile(1.0, 32).unwrap();
    assert_eq!(p.len(), 2 * 17);
    assert!((p[1] - 1.0).abs() < 1e-12);
    assert!(p.chunks(2).all(|c| c[1].abs() <= 1.0 + 1e-12));
}

#[test]
fn invalid_widths_are_errors() {
    assert!(multiplier_profile(0.01, 32).is_err());
    assert!(stress_slice(10.0, 1.0).is_err());
}

#[test]
fn stress_slice_scales_quadratically() {
    let a = stress_slice(1.2, 1.0).unwrap();
    let b = stress_slice(1.2, 2.0).unwrap();
    assert_eq!(a.len(), DEMO_N * DEMO_N);
    assert!(a.iter().any(|v| *v > 0.0));
    for (x, y) in a.iter().zip(&b) {
        assert!((4.0 * x - y).abs() <= 1e-12 * (1.0 + y));
    }
}

#[test]
fn sweep_turns_active_below_the_free_enstrophy() {
    let s = radius_sweep(1e-3, 1e6, 12, 1.0).unwrap();
    let rows: Vec<&[f64]> = s.chunks(3).collect();
    assert_eq!(rows.len(), 12);
    let free = rows.last().unwrap()[2];
    for r in &rows {
        assert!(r[1] <= 0.0);
        if r[0] < free {
            assert!(r[1] < 0.0);
            assert!((r[2] - r[0]).abs() <= 1e-12 * r[0]);
        } else {
            assert_eq!(r[1], 0.0);
        }
    }
}
