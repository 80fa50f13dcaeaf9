//! Bessel functions of the first kind, orders 0, 1 and 2.
//!
//! Three regimes: the power series for |x| <= 8, Miller's backward
//! recurrence normalised by `J0 + 2 sum J_2k = 1` for 8 < |x| < 25, and the
//! Hankel asymptotic expansion beyond.

use std::f64::consts::PI;

const SERIES_LIMIT: f64 = 8.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

pub fn bessel_j0(x: f64) -> f64 {
    bessel_jn(0, x)
}

pub fn bessel_j1(x: f64) -> f64 {
    bessel_jn(1, x)
}

pub fn bessel_j2(x: f64) -> f64 {
    bessel_jn(2, x)
}

/// `J_n(x)` for `n` in 0..=2.
pub fn bessel_jn(n: u32, x: f64) -> f64 {
    assert!(n <= 2, "only orders 0..=2 are provided");
    let ax = x.abs();
    let value = if ax <= SERIES_LIMIT {
        series(n, ax)
    } else if ax < ASYMPTOTIC_LIMIT {
        miller(n, ax)
    } else {
        asymptotic(n, ax)
    };
    if x < 0.0 && n % 2 == 1 {
        -value
    } else {
        value
    }
}

fn series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = -half * half;
    // (x/2)^n / n!
    let mut term = match n {
        0 => 1.0,
        1 => half,
        _ => 0.5 * half * half,
    };
    let mut sum = term;
    for k in 1..80 {
        term *= q / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn miller(n: u32, x: f64) -> f64 {
    let start = 2 * ((x as usize + 40) / 2);
    let mut next = 0.0; // J_{k+1}
    let mut current = 1e-300; // J_k
    let mut norm = 0.0;
    let mut wanted = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * current - next;
        next = current;
        current = prev;
        // current now holds J_{k-1}
        let order = k - 1;
        if order == n as usize {
            wanted = current;
        }
        if order > 0 && order % 2 == 0 {
            norm += 2.0 * current;
        }
        if current.abs() > 1e250 {
            next *= 1e-250;
            current *= 1e-250;
            norm *= 1e-250;
            wanted *= 1e-250;
        }
    }
    norm += current;
    wanted / norm
}

fn asymptotic(n: u32, x: f64) -> f64 {
    let mu = 4.0 * (n * n) as f64;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut term: f64 = 1.0;
    let mut k = 0;
    let mut last = f64::INFINITY;
    loop {
        if term.abs() > last {
            break;
        }
        last = term.abs();
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
        k += 1;
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() < 1e-17 || k > 60 {
            break;
        }
    }
    let chi = x - (0.5 * n as f64 + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}
