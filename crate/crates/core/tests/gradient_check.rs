mod common;

use common::{gradient_check, is_smooth_at, tiny_problem, FD_STEP, FD_TOLERANCE};

#[test]
fn analytic_gradients_match_central_differences() {
    let r = gradient_check();
    assert_eq!(r.failures, 0, "{r:?}");
    assert!(r.worst_rel <= FD_TOLERANCE);
    // conv 50 + 3×2 per-channel + fc 3×128 + 3
    assert_eq!(r.entries, 50 + 6 + 384 + 3);
}

#[test]
fn smoothness_screen_rejects_kinked_problems() {
    // Not every random problem is smooth at this step; the screen must be
    // able to tell.
    let verdicts: Vec<bool> = (0..6)
        .map(|s| {
            let (p, x, _) = tiny_problem(s);
            is_smooth_at(&p, &x, FD_STEP)
        })
        .collect();
    assert!(verdicts.iter().any(|v| !v));
}
