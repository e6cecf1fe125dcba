//! Reference maps used throughout the tests and the bundled map files.

use crate::map_model::{Branch, BranchKind, MapKind, Orientation, PiecewiseMap};

fn affine(lo: f64, hi: f64, slope: f64, intercept: f64) -> Branch {
    Branch::new(
        (lo, hi),
        BranchKind::Affine { slope, intercept },
        if slope > 0.0 {
            Orientation::Increasing
        } else {
            Orientation::Decreasing
        },
    )
    .expect("reference branch is valid")
}

/// `x ↦ x²`: attracting fixed point 0, repelling fixed point 1.
pub fn square() -> PiecewiseMap {
    let b = Branch::new(
        (0.0, 1.0),
        BranchKind::Power {
            exponent: 2.0,
            scale: 1.0,
            offset: 0.0,
            center: 0.0,
        },
        Orientation::Increasing,
    )
    .expect("valid");
    PiecewiseMap::new(vec![b], MapKind::Continuous).expect("valid")
}

/// `x ↦ 2x mod 1`, written as a Lorenz map with critical point 1/2.
pub fn doubling() -> PiecewiseMap {
    PiecewiseMap::new(
        vec![affine(0.0, 0.5, 2.0, 0.0), affine(0.5, 1.0, 2.0, -1.0)],
        MapKind::Lorenz {
            critical_point: 0.5,
        },
    )
    .expect("valid")
}

/// `x ↦ √2·x mod 1` with critical point `1/√2`.
pub fn sqrt2_lorenz() -> PiecewiseMap {
    let s = std::f64::consts::SQRT_2;
    let c = std::f64::consts::FRAC_1_SQRT_2;
    PiecewiseMap::new(
        vec![affine(0.0, c, s, 0.0), affine(c, 1.0, s, -1.0)],
        MapKind::Lorenz { critical_point: c },
    )
    .expect("valid")
}

/// `x ↦ 1.4x + 0.3 mod 1` with critical point 1/2.
///
/// Once renormalizable with return times (2, 2) on `[0.3, 0.7]`. The
/// attracting set is `[0, 0.28] ∪ [0.3, 0.7] ∪ [0.72, 1]` and the dual
/// repelling set is the period-2 orbit `{7/24, 17/24}`.
pub fn renormalizable_lorenz() -> PiecewiseMap {
    PiecewiseMap::new(
        vec![affine(0.0, 0.5, 1.4, 0.3), affine(0.5, 1.0, 1.4, -0.7)],
        MapKind::Lorenz {
            critical_point: 0.5,
        },
    )
    .expect("valid")
}

/// Full tent map.
pub fn tent() -> PiecewiseMap {
    PiecewiseMap::new(
        vec![affine(0.0, 0.5, 2.0, 0.0), affine(0.5, 1.0, -2.0, 2.0)],
        MapKind::Continuous,
    )
    .expect("valid")
}

/// Logistic map `r x (1 - x)` split at its critical point, `0 < r <= 4`.
pub fn logistic(r: f64) -> PiecewiseMap {
    let left = Branch::new(
        (0.0, 0.5),
        BranchKind::Logistic { parameter: r },
        Orientation::Increasing,
    )
    .expect("valid");
    let right = Branch::new(
        (0.5, 1.0),
        BranchKind::Logistic { parameter: r },
        Orientation::Decreasing,
    )
    .expect("valid");
    PiecewiseMap::new(vec![left, right], MapKind::Continuous).expect("valid")
}
