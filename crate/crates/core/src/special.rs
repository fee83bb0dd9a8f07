//! Exponential integrals.

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `Ein(w) = ∫₀^w (1 - e^{-u})/u du`, entire; equals `E1(w) + γ + ln w` for `w > 0`.
pub fn ein(w: f64) -> f64 {
    if w.abs() <= 2.0 {
        let mut term = 1.0;
        let mut sum: f64 = 0.0;
        for k in 1..60 {
            term *= -w / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        exp_integral_e1(w) + EULER_GAMMA + w.ln()
    }
}

/// `E1(w) = ∫_w^∞ e^{-u}/u du` for `w > 0`; `+∞` at 0.
pub fn exp_integral_e1(w: f64) -> f64 {
    if w <= 0.0 {
        return f64::INFINITY;
    }
    if w > 745.0 {
        return 0.0;
    }
    if w <= 1.0 {
        return -EULER_GAMMA - w.ln() + ein(w);
    }
    // modified Lentz evaluation of the continued fraction
    let tiny = 1e-300;
    let mut b = w + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-w).exp()
}

/// `E1(w_lo) - E1(w_hi)` without cancellation when the arguments are close.
pub fn e1_difference(w_lo: f64, w_hi: f64) -> f64 {
    if w_lo <= 0.0 {
        return f64::INFINITY;
    }
    if (w_hi - w_lo).abs() < 0.1 * w_lo && w_lo < 700.0 {
        // ∫_{w_lo}^{w_hi} e^{-u}/u du by 16-point Gauss-Legendre on a short interval
        let rule = crate::quadrature::GaussRule::legendre(16);
        return rule.integrate(w_lo, w_hi, |u| (-u).exp() / u);
    }
    exp_integral_e1(w_lo) - exp_integral_e1(w_hi)
}

const SERIES_TERMS: usize = 96;

const fn reciprocal_table(shift: usize, square: bool) -> [f64; SERIES_TERMS] {
    let mut t = [0.0; SERIES_TERMS];
    let mut k = 1;
    while k < SERIES_TERMS {
        let kf = k as f64;
        t[k] = if square { 1.0 / (kf * kf) } else { 1.0 / (kf + shift as f64) };
        k += 1;
    }
    t
}

/// `1/k²` and `1/(k + 1)`.
static INV_SQUARE: [f64; SERIES_TERMS] = reciprocal_table(0, true);
static INV_NEXT: [f64; SERIES_TERMS] = reciprocal_table(1, false);

/// `(e^{-x} I_0(x), e^{-x} I_1(x), e^{-x} (I_0(x) - I_1(x)))` for `x ≥ 0`; the difference
/// avoids the cancellation of direct subtraction at large `x`.
pub fn bessel_i01_scaled(x: f64) -> (f64, f64, f64) {
    debug_assert!(x >= 0.0);
    if x <= 30.0 {
        // I_0 = Σ q^k/(k!)², I_1 = (x/2) Σ q^k/(k!(k+1)!), q = x²/4
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let (mut s0, mut s1) = (1.0, 1.0);
        let mut k = 1;
        while k < SERIES_TERMS {
            term *= q * INV_SQUARE[k];
            s0 += term;
            s1 += term * INV_NEXT[k];
            if term < 1e-17 * s0 {
                break;
            }
            k += 1;
        }
        let e = (-x).exp();
        let (i0, i1) = (s0 * e, 0.5 * x * s1 * e);
        return (i0, i1, i0 - i1);
    }
    // asymptotic series, a_k(ν) = a_{k-1}(ν) (4ν² - (2k - 1)²)/(8k)
    let (mut t0, mut t1): (f64, f64) = (1.0, 1.0);
    let (mut s0, mut s1, mut sd) = (1.0, 1.0, 0.0);
    let mut k: f64 = 0.0;
    loop {
        k += 1.0;
        let odd = (2.0 * k - 1.0).powi(2);
        let n0 = t0 * odd / (8.0 * k * x);
        let n1 = -t1 * (4.0 - odd) / (8.0 * k * x);
        if n0.abs() >= t0.abs() || n0.abs() < 1e-17 {
            s0 += n0;
            s1 += n1;
            sd += n0 - n1;
            break;
        }
        t0 = n0;
        t1 = n1;
        s0 += n0;
        s1 += n1;
        sd += n0 - n1;
    }
    let norm = 1.0 / (2.0 * std::f64::consts::PI * x).sqrt();
    (s0 * norm, s1 * norm, sd * norm)
}

/// `e^{-x} I_ν(x)` for `ν ∈ {0, 1}` and `x ≥ 0`.
pub fn bessel_i_scaled(nu: u32, x: f64) -> f64 {
    let (i0, i1, _) = bessel_i01_scaled(x);
    if nu == 0 {
        i0
    } else {
        i1
    }
}

/// `e^{-x} (I_0(x) - I_1(x))`.
pub fn bessel_i_scaled_difference(x: f64) -> f64 {
    bessel_i01_scaled(x).2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::Adaptive;

    fn e1_oracle(w: f64) -> f64 {
        // ∫_0^∞ e^{-(w+v)}/(w+v) dv, split to follow the decay
        let f = |v: f64| (-(w + v)).exp() / (w + v);
        Adaptive::new(1e-300, 1e-14)
            .integrate_with_breaks(f, &[0.0, 1e-3, 1e-2, 0.1, 1.0, 10.0, 60.0, 800.0])
            .unwrap()
            .value
    }

    #[test]
    fn e1_matches_quadrature() {
        for w in [1e-6, 1e-3, 0.1, 0.5, 0.99, 1.0, 1.01, 2.0, 5.0, 20.0, 100.0, 400.0] {
            let v = exp_integral_e1(w);
            let o = e1_oracle(w);
            assert!((v - o).abs() <= 1e-13 * o.abs(), "w = {w}: {v} vs {o}");
        }
        assert_eq!(exp_integral_e1(800.0), 0.0);
    }

    #[test]
    fn ein_identity_and_small_arguments() {
        for w in [0.5, 1.5, 2.5, 8.0] {
            let lhs = ein(w);
            let rhs = exp_integral_e1(w) + EULER_GAMMA + w.ln();
            assert!((lhs - rhs).abs() < 1e-14 * rhs.abs().max(1.0));
        }
        assert!((ein(1e-8) - (1e-8 - 0.25e-16)).abs() < 1e-24);
    }

    #[test]
    fn difference_is_accurate_for_close_arguments() {
        let (a, b) = (3.0, 3.0 + 1e-9);
        let d = e1_difference(a, b);
        let expected = (-3.0f64).exp() / 3.0 * (b - a);
        assert!((d - expected).abs() < 1e-8 * expected);
        let d = e1_difference(0.2, 7.0);
        assert!((d - (e1_oracle(0.2) - e1_oracle(7.0))).abs() < 1e-13);
    }

    #[test]
    fn scaled_bessel_matches_angular_integral() {
        // e^{-x} I_ν(x) = (1/π) ∫_0^π e^{x (cos θ - 1)} cos(ν θ) dθ, trapezoid on a periodic integrand
        let oracle = |nu: u32, x: f64| {
            let n = 4000;
            let h = std::f64::consts::PI / n as f64;
            let f = |th: f64| (x * (th.cos() - 1.0)).exp() * (nu as f64 * th).cos();
            let mut acc = 0.5 * (f(0.0) + f(std::f64::consts::PI));
            for j in 1..n {
                acc += f(j as f64 * h);
            }
            acc * h / std::f64::consts::PI
        };
        for nu in [0, 1] {
            for x in [0.0, 1e-3, 0.5, 3.0, 17.0, 29.9, 30.1, 64.0, 700.0, 5000.0] {
                let v = bessel_i_scaled(nu, x);
                let o = oracle(nu, x);
                assert!((v - o).abs() <= 1e-14 + 1e-13 * o, "nu={nu} x={x}: {v} vs {o}");
            }
        }
    }

    #[test]
    fn scaled_bessel_difference() {
        for x in [0.0, 2.0, 29.0, 31.0, 100.0, 1e4, 1e8] {
            let d = bessel_i_scaled_difference(x);
            let direct = bessel_i_scaled(0, x) - bessel_i_scaled(1, x);
            // both agree where the subtraction keeps enough digits
            assert!((d - direct).abs() <= 1e-15 + 1e-16 * x, "x={x}: {d} vs {direct}");
            if x > 100.0 {
                // leading behaviour e^{-x}(I0 - I1) ~ 1/(2x sqrt(2πx))
                let lead = 1.0 / (2.0 * x * (2.0 * std::f64::consts::PI * x).sqrt());
                assert!((d / lead - 1.0).abs() <= 2.0 / x);
            }
        }
    }
}
