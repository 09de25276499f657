//! Bessel functions of the first kind and their zeros.

use std::f64::consts::PI;

/// First positive zero of `J₀`.
pub const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

// Below this radius the power series is used; the Hankel expansion beyond it
// reaches 1e-10 absolute accuracy only once its smallest term is that small.
const SERIES_LIMIT: f64 = 12.0;

/// `J₀(r)` for `r ≥ 0`: power series below 12, Hankel asymptotics above.
pub fn bessel_j0(r: f64) -> f64 {
    assert!(r >= 0.0, "bessel_j0 requires r >= 0");
    if r < SERIES_LIMIT {
        j0_series(r)
    } else {
        j0_asymptotic(r)
    }
}

fn j0_series(r: f64) -> f64 {
    let x = -0.25 * r * r;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= x / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) && k > 4 {
            break;
        }
    }
    sum
}

fn j0_asymptotic(r: f64) -> f64 {
    // a_k = ∏_{i=1}^{k} (-(2i-1)²) / (k! 8^k)
    let mut p = 0.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..60 {
        if k > 0 {
            let odd = (2 * k - 1) as f64;
            a *= -(odd * odd) / (k as f64 * 8.0 * r);
        }
        if a.abs() > last {
            break;
        }
        last = a.abs();
        // a already carries r^{-k}
        match k % 4 {
            0 => p += a,
            1 => q += a,
            2 => p -= a,
            _ => q -= a,
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    let chi = r - PI / 4.0;
    (2.0 / (PI * r)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// `J_m(x)` for integer `m ≥ 0`, `x ≥ 0`, by Miller's backward recurrence
/// normalised with `J₀ + 2 Σ J_{2k} = 1`.
pub fn bessel_jn(m: usize, x: f64) -> f64 {
    assert!(x >= 0.0);
    if x == 0.0 {
        return if m == 0 { 1.0 } else { 0.0 };
    }
    let top = m.max(x as usize);
    let mut start = top + 20 + (40.0 * top as f64).sqrt() as usize;
    start += start % 2;
    let (mut jp1, mut j) = (0.0f64, 1e-300f64);
    let mut norm = 0.0;
    let mut result = 0.0;
    for k in (1..=start).rev() {
        let jm1 = 2.0 * k as f64 / x * j - jp1;
        jp1 = j;
        j = jm1;
        // j now holds J_{k-1} (unnormalised)
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
            result *= 1e-250;
        }
        let idx = k - 1;
        if idx == m {
            result = j;
        }
        if idx > 0 && idx % 2 == 0 {
            norm += 2.0 * j;
        }
    }
    norm += j;
    result / norm
}

/// Positive zeros of `J_m` not exceeding `x_max`, ascending.
pub fn bessel_zeros(m: usize, x_max: f64) -> Vec<f64> {
    let step = 0.25;
    let mut zeros = Vec::new();
    // All zeros of J_m lie beyond m.
    let mut a = (m as f64).max(step);
    let mut fa = bessel_jn(m, a);
    while a < x_max {
        let b = (a + step).min(x_max);
        let fb = bessel_jn(m, b);
        if fa == 0.0 {
            zeros.push(a);
        } else if fa * fb < 0.0 {
            zeros.push(bisect(|x| bessel_jn(m, x), a, b, fa));
        }
        a = b;
        fa = fb;
    }
    zeros
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 || (b - a) < 1e-15 * mid {
            return mid;
        }
        if fa * fm < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// Zeros `(m, j_{m,k})` of all orders with `j_{m,k} ≤ x_max`.
pub fn bessel_zero_table(x_max: f64) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let mut m = 0;
    while (m as f64) < x_max {
        let zs = bessel_zeros(m, x_max);
        if zs.is_empty() && m > 0 {
            break;
        }
        out.extend(zs.into_iter().map(|z| (m, z)));
        m += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j0_reference_values() {
        assert_eq!(bessel_j0(0.0), 1.0);
        // 1 - r²/4 + r⁴/64 - r⁶/2304 at r = 0.2; the next term is r⁸/147456
        let r: f64 = 0.2;
        let truncated = 1.0 - r.powi(2) / 4.0 + r.powi(4) / 64.0 - r.powi(6) / 2304.0;
        assert!((bessel_j0(r) - truncated).abs() < r.powi(8) / 147_456.0 * 1.01);
        assert!((bessel_j0(r) - 0.990_025).abs() < 1e-6);
    }

    #[test]
    fn j0_first_zero_by_bisection() {
        let z = bisect(bessel_j0, 2.0, 3.0, bessel_j0(2.0));
        assert!((z - 2.404_826).abs() < 1e-6);
        assert!((z - J0_FIRST_ZERO).abs() < 1e-12);
    }

    #[test]
    fn j0_agrees_with_recurrence_everywhere() {
        let mut worst = 0.0f64;
        for k in 0..4000 {
            let r = k as f64 * 0.01;
            worst = worst.max((bessel_j0(r) - bessel_jn(0, r)).abs());
        }
        assert!(worst < 1e-10, "max deviation {worst:e}");
    }

    #[test]
    fn j0_satisfies_bessel_equation() {
        let h = 1e-3;
        for r in [1.0, 2.0, 5.0] {
            let (a, b, c) = (bessel_j0(r - h), bessel_j0(r), bessel_j0(r + h));
            let d2 = (a - 2.0 * b + c) / (h * h);
            let d1 = (c - a) / (2.0 * h);
            assert!((d2 + d1 / r + b).abs() < 1e-6, "r = {r}");
        }
    }

    #[test]
    fn jn_known_values() {
        // Abramowitz & Stegun table 9.1
        assert!((bessel_jn(1, 1.0) - 0.440_050_585_744_933_5).abs() < 1e-14);
        assert!((bessel_jn(2, 5.0) - 0.046_565_116_277_752_2).abs() < 1e-13);
        assert!((bessel_jn(10, 10.0) - 0.207_486_106_633_358_9).abs() < 1e-13);
        assert_eq!(bessel_jn(3, 0.0), 0.0);
    }

    #[test]
    fn zeros_of_low_orders() {
        let z0 = bessel_zeros(0, 10.0);
        assert_eq!(z0.len(), 3);
        assert!((z0[0] - J0_FIRST_ZERO).abs() < 1e-12);
        assert!((z0[1] - 5.520_078_110_286_311).abs() < 1e-12);
        let z1 = bessel_zeros(1, 4.0);
        assert!((z1[0] - 3.831_705_970_207_512).abs() < 1e-12);
    }
}
