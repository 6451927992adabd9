//! Boys function `F_m(x) = int_0^1 t^{2m} exp(-x t^2) dt`.
//!
//! Below `SWITCH` the highest order is taken from a Taylor expansion around
//! the nearest point of a precomputed grid and lower orders follow by
//! downward recursion. Above it the large-`x` asymptotic form of `F_0` is
//! extended by upward recursion, which is stable there.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Highest order needed for l <= 1 shells: (pp|pp) has total L = 4.
pub const MAX_ORDER: usize = 4;

const SWITCH: f64 = 25.0;
const GRID_STEP: f64 = 0.05;
const TAYLOR_TERMS: usize = 7;
const TABLE_ORDERS: usize = MAX_ORDER + TAYLOR_TERMS + 1;

fn table() -> &'static Vec<[f64; TABLE_ORDERS]> {
    static TABLE: OnceLock<Vec<[f64; TABLE_ORDERS]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = (SWITCH / GRID_STEP).round() as usize + 2;
        (0..n)
            .map(|i| {
                let x = i as f64 * GRID_STEP;
                let mut row = [0.0; TABLE_ORDERS];
                for (m, v) in row.iter_mut().enumerate() {
                    *v = series(m, x);
                }
                row
            })
            .collect()
    })
}

/// Convergent series `exp(-x) sum_k (2x)^k / ((2m+1)(2m+3)...(2m+2k+1))`;
/// all terms are positive so there is no cancellation.
fn series(m: usize, x: f64) -> f64 {
    let mut term = 1.0 / (2 * m + 1) as f64;
    let mut sum = term;
    let mut k = 0;
    loop {
        term *= 2.0 * x / (2 * m + 2 * k + 3) as f64;
        sum += term;
        k += 1;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum * (-x).exp()
}

/// Fill `out[0..=m_max]` with `F_0(x) ..= F_{m_max}(x)`.
pub fn boys_array(m_max: usize, x: f64, out: &mut [f64]) {
    debug_assert!(m_max <= MAX_ORDER && x >= 0.0);
    let ex = (-x).exp();
    if x < SWITCH {
        let tab = table();
        let i = (x / GRID_STEP).round() as usize;
        let row = &tab[i];
        let dx = i as f64 * GRID_STEP - x;
        let mut f = 0.0;
        let mut pow = 1.0;
        for k in 0..TAYLOR_TERMS {
            f += row[m_max + k] * pow;
            pow *= dx / (k + 1) as f64;
        }
        out[m_max] = f;
        for m in (0..m_max).rev() {
            out[m] = (2.0 * x * out[m + 1] + ex) / (2 * m + 1) as f64;
        }
    } else {
        let inv = 1.0 / x;
        let tail = ex * 0.5 * inv * (1.0 - 0.5 * inv + 0.75 * inv * inv - 1.875 * inv * inv * inv);
        out[0] = 0.5 * (PI * inv).sqrt() - tail;
        for m in 0..m_max {
            out[m + 1] = ((2 * m + 1) as f64 * out[m] - ex) * 0.5 * inv;
        }
    }
}

pub fn boys(m: usize, x: f64) -> f64 {
    assert!(m <= MAX_ORDER, "Boys order {m} > {MAX_ORDER}");
    assert!(x >= 0.0, "Boys argument must be non-negative");
    let mut out = [0.0; MAX_ORDER + 1];
    boys_array(m, x, &mut out);
    out[m]
}
