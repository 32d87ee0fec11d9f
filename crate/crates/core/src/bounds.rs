//! Capacity bounds for the upgraded slow-recursion channel `R_n`.
//!
//! With `x = H(W)`, `F_0 = G_0 = x`, `F_n = f(F_{n-1}, x)` and
//! `G_n = g(G_{n-1}, x)`, every channel of capacity `I(W)` satisfies
//! `1 - G_n(x) <= I(R_n) <= 1 - F_n(x)`. The upper bound is met by the BEC and
//! the lower bound by the BSC.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Overshoot past the admissible interval that is silently clamped.
const CLAMP_SLACK: f64 = 1e-12;
const MONOTONE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundState<T> {
    pub n: usize,
    #[serde(rename = "lowerI")]
    pub lower: T,
    #[serde(rename = "upperI")]
    pub upper: T,
    pub h_input: T,
}

/// Binary entropy in bits.
pub fn h<T: Scalar>(x: T) -> T {
    if x <= T::zero() || x >= T::one() {
        return T::zero();
    }
    let y = T::one() - x;
    -(x * x.log2()) - y * y.log2()
}

/// Inverse of `h` on `[0, 1/2]` by bisection.
pub fn h_inv<T: Scalar>(y: T) -> T {
    if y <= T::zero() {
        return T::zero();
    }
    if y >= T::one() {
        return T::lit(0.5);
    }
    let mut lo = T::zero();
    let mut hi = T::lit(0.5);
    let floor = T::bisection_floor();
    while hi - lo > floor {
        let mid = T::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    T::lit(0.5) * (lo + hi)
}

/// Binary convolution `a(1-b) + (1-a)b`.
pub fn star<T: Scalar>(a: T, b: T) -> T {
    a * (T::one() - b) + (T::one() - a) * b
}

fn admissible<T: Scalar>(t: T, x: T) -> Result<T> {
    if !(T::zero()..=T::one()).contains(&x) {
        return invalid(format!("x = {x} outside [0, 1]"));
    }
    let lo = (T::lit(2.0) * x - T::one()).max(T::zero());
    let slack = T::lit(CLAMP_SLACK);
    if t < lo - slack || t > x + slack || t.is_nan() {
        return invalid(format!("t = {t} outside [{lo}, {x}]"));
    }
    Ok(t.max(lo).min(x))
}

/// `f(t, x) = t(2x - t)`.
pub fn f_step<T: Scalar>(t: T, x: T) -> Result<T> {
    let t = admissible(t, x)?;
    Ok(t * (T::lit(2.0) * x - t))
}

/// `g(t, x) = 2x - h(h^{-1}(t) * h^{-1}(2x - t))`.
pub fn g_step<T: Scalar>(t: T, x: T) -> Result<T> {
    let t = admissible(t, x)?;
    let other = (T::lit(2.0) * x - t).max(T::zero()).min(T::one());
    Ok(T::lit(2.0) * x - h(star(h_inv(t), h_inv(other))))
}

/// Rows `n = 0..=n_max` of the bound recursion for a channel of capacity
/// `capacity`.
pub fn bound_table<T: Scalar>(capacity: T, n_max: usize) -> Result<Vec<BoundState<T>>> {
    if !(T::zero()..=T::one()).contains(&capacity) {
        return invalid(format!("capacity {capacity} outside [0, 1]"));
    }
    let x = T::one() - capacity;
    let lo = (T::lit(2.0) * x - T::one()).max(T::zero());
    let clamp = |v: T| v.max(lo).min(x);
    let mut f = x;
    let mut g = x;
    let mut rows = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            f = clamp(f_step(f, x)?);
            g = clamp(g_step(g, x)?);
        }
        rows.push(BoundState {
            n,
            lower: T::one() - g,
            upper: T::one() - f,
            h_input: x,
        });
    }
    Ok(rows)
}

/// Checks that `g(., x)` is nondecreasing on a uniform grid of the
/// admissible interval `[max(0, 2x-1), x]`.
pub fn check_g_monotone<T: Scalar>(x: T, grid_points: usize) -> Result<bool> {
    if !(T::zero()..=T::one()).contains(&x) {
        return invalid(format!("x = {x} outside [0, 1]"));
    }
    let lo = (T::lit(2.0) * x - T::one()).max(T::zero());
    if x - lo <= T::zero() || grid_points < 2 {
        return Ok(true);
    }
    let step = (x - lo) / T::lit((grid_points - 1) as f64);
    let mut prev = g_step(lo, x)?;
    for i in 1..grid_points {
        let t = (lo + step * T::lit(i as f64)).min(x);
        let v = g_step(t, x)?;
        if v < prev - T::lit(MONOTONE_TOL) {
            return Ok(false);
        }
        prev = v;
    }
    Ok(true)
}

/// Checks that `f(., x)` is nondecreasing on the admissible grid.
pub fn check_f_monotone<T: Scalar>(x: T, grid_points: usize) -> Result<bool> {
    let lo = (T::lit(2.0) * x - T::one()).max(T::zero());
    if x - lo <= T::zero() || grid_points < 2 {
        return Ok(true);
    }
    let step = (x - lo) / T::lit((grid_points - 1) as f64);
    let mut prev = f_step(lo, x)?;
    for i in 1..grid_points {
        let v = f_step((lo + step * T::lit(i as f64)).min(x), x)?;
        if v < prev - T::lit(MONOTONE_TOL) {
            return Ok(false);
        }
        prev = v;
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{make_bec, make_bsc};
    use crate::transform::{slow_recursion, Budget};
    use proptest::prelude::*;

    // Reference values from a 40-digit evaluation of the recursions.
    const TABLE_HALF: [(usize, f64, f64); 9] = [
        (1, 0.713536728566, 0.75),
        (2, 0.771449737422, 0.8125),
        (3, 0.80575831332, 0.84765625),
        (4, 0.829358424838, 0.87086486816406),
        (5, 0.84690760438, 0.88754075043835),
        (10, 0.895333089672, 0.93054910610286),
        (20, 0.93255556922, 0.95994372286079),
        (30, 0.949051339365, 0.97168578771236),
        (40, 0.958617315102, 0.97805874549126),
    ];

    #[test]
    fn entropy_examples() {
        assert_eq!(h(0.5f64), 1.0);
        assert_eq!(h(0.0f64), 0.0);
        assert_eq!(h(1.0f64), 0.0);
        assert!((h(0.11f64) - 0.499915958164528).abs() < 1e-14);
        assert_eq!(h_inv(1.0f64), 0.5);
        assert_eq!(h_inv(0.0f64), 0.0);
        assert!((h_inv(0.5f64) - 0.11002786443835955).abs() < 1e-12);
        assert!((h_inv(0.5f64) - 0.110028).abs() < 1e-6);
    }

    #[test]
    fn step_examples() {
        assert_eq!(f_step(0.5f64, 0.5).unwrap(), 0.25);
        let g = g_step(0.5f64, 0.5).unwrap();
        assert!((g - 0.286463271434).abs() < 1e-9);
        assert!((1.0 - g - 0.7136).abs() < 1e-4);
        for x in [0.1f64, 0.3, 0.77] {
            assert!((f_step(x, x).unwrap() - x * x).abs() < 1e-15);
        }
        assert!(f_step(0.9f64, 0.5).is_err());
        assert!(g_step(0.1f64, 0.8).is_err());
        // Overshoot within the clamp slack is accepted.
        assert!(f_step(0.5f64 + 1e-13, 0.5).is_ok());
    }

    #[test]
    fn table_half_matches_reference() {
        let t = bound_table(0.5f64, 40).unwrap();
        assert_eq!(t[0].lower, 0.5);
        assert_eq!(t[0].upper, 0.5);
        for (n, lo, up) in TABLE_HALF {
            assert!((t[n].lower - lo).abs() < 1e-9, "n={n}");
            assert!((t[n].upper - up).abs() < 1e-11, "n={n}");
        }
        assert!((t[10].lower - 0.895).abs() < 5e-4);
        assert!((t[10].upper - 0.931).abs() < 5e-4);
    }

    #[test]
    fn table_high_capacity_row() {
        let t = bound_table(0.8f64, 20).unwrap();
        assert!((t[20].lower - 0.9996).abs() < 1e-4);
        assert!((t[20].upper - 0.9999999991).abs() < 1e-10);
    }

    #[test]
    fn perfect_channel_fixed_point() {
        for row in bound_table(1.0f64, 10).unwrap() {
            assert_eq!((row.lower, row.upper), (1.0, 1.0));
        }
        assert!(bound_table(1.5f64, 3).is_err());
    }

    #[test]
    fn monotone_examples() {
        assert!(check_g_monotone(0.5f64, 1000).unwrap());
        assert!(check_g_monotone(0.0f64, 1000).unwrap());
        assert!(check_g_monotone(0.9f64, 1000).unwrap());
        assert!(check_f_monotone(0.5f64, 1000).unwrap());
    }

    #[test]
    fn sandwich_against_tracked_channels() {
        let rows = bound_table(0.5f64, 6).unwrap();
        let bec = slow_recursion(&make_bec(0.5f64).unwrap(), 6, Budget::Exact);
        for (r, s) in rows.iter().zip(&bec) {
            assert!((s.right.capacity() - r.upper).abs() < 1e-12);
        }
        let p = h_inv(0.5f64);
        let bsc = slow_recursion(&make_bsc(p).unwrap(), 5, Budget::Exact);
        for (r, s) in rows.iter().zip(&bsc) {
            let i = s.right.capacity();
            assert!(r.lower - 1e-9 <= i && i <= r.upper + 1e-9, "n={}", r.n);
        }
        // The lower bound is attained by the BSC after one step.
        assert!((bsc[1].right.capacity() - rows[1].lower).abs() < 1e-9);
    }

    #[test]
    fn works_in_single_precision() {
        let t = bound_table(0.5f32, 10).unwrap();
        assert!((t[10].upper - 0.930549).abs() < 1e-4);
        assert!((t[10].lower - 0.895333).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn steps_monotone_in_t(x in 0.0f64..1.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let lo = (2.0 * x - 1.0f64).max(0.0);
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            let ta = lo + a * (x - lo);
            let tb = lo + b * (x - lo);
            prop_assert!(f_step(ta, x).unwrap() <= f_step(tb, x).unwrap() + 1e-12);
            prop_assert!(g_step(ta, x).unwrap() <= g_step(tb, x).unwrap() + 1e-10);
        }

        #[test]
        fn h_inv_inverts(p in 0.0f64..0.5) {
            prop_assert!((h_inv(h(p)) - p).abs() < 1e-9);
        }

        #[test]
        fn rows_ordered(cap in 0.0f64..=1.0) {
            let rows = bound_table(cap, 12).unwrap();
            for r in &rows {
                prop_assert!(r.lower <= r.upper + 1e-12);
                prop_assert!((0.0..=1.0).contains(&r.lower) && (0.0..=1.0).contains(&r.upper));
            }
            if cap >= 0.5 {
                for w in rows.windows(2) {
                    prop_assert!(w[1].lower >= w[0].lower - 1e-12);
                    prop_assert!(w[1].upper >= w[0].upper - 1e-12);
                }
            }
        }
    }
}
