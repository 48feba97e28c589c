//! Real polynomials in monomial form: evaluation, exact integration and
//! real-root isolation on an interval.

/// Evaluates `sum c[i] x^i` by Horner's rule.
pub fn eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| c * i as f64)
        .collect()
}

/// Antiderivative vanishing at 0.
pub fn antiderivative(coeffs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(coeffs.len() + 1);
    out.push(0.0);
    out.extend(coeffs.iter().enumerate().map(|(i, &c)| c / (i + 1) as f64));
    out
}

/// Exact `int_lo^hi p(x) dx`.
pub fn integrate(coeffs: &[f64], lo: f64, hi: f64) -> f64 {
    let anti = antiderivative(coeffs);
    eval(&anti, hi) - eval(&anti, lo)
}

/// Product of two polynomials.
pub fn mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    if p.is_empty() || q.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, &a) in p.iter().enumerate() {
        for (j, &b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

fn trimmed(coeffs: &[f64]) -> &[f64] {
    let mut len = coeffs.len();
    while len > 0 && coeffs[len - 1] == 0.0 {
        len -= 1;
    }
    &coeffs[..len]
}

/// Real roots of `p` strictly inside `(lo, hi)`, sorted and deduplicated.
///
/// Roots are isolated between consecutive critical points (found
/// recursively from the derivative) and refined by bisection, so the
/// procedure works for any degree. Roots of even multiplicity are reported
/// when they coincide with a critical point where `p` vanishes.
pub fn real_roots_in(coeffs: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let p = trimmed(coeffs);
    if p.len() <= 1 || !(lo < hi) {
        return Vec::new();
    }
    if p.len() == 2 {
        let r = -p[0] / p[1];
        return if r > lo && r < hi { vec![r] } else { Vec::new() };
    }
    let crit = real_roots_in(&derivative(p), lo, hi);
    let mut knots = Vec::with_capacity(crit.len() + 2);
    knots.push(lo);
    knots.extend(crit.iter().copied());
    knots.push(hi);

    let scale: f64 = p.iter().map(|c| c.abs()).sum::<f64>() * lo.abs().max(hi.abs()).max(1.0).powi(p.len() as i32 - 1);
    let tiny = 1e-14 * scale;
    let mut roots = Vec::new();
    for &c in &crit {
        if eval(p, c).abs() <= tiny {
            roots.push(c);
        }
    }
    for w in knots.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (mut fa, fb) = (eval(p, a), eval(p, b));
        if fa == 0.0 || fb == 0.0 || fa.signum() == fb.signum() {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let fm = eval(p, m);
            if fm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        let r = 0.5 * (a + b);
        if r > lo && r < hi {
            roots.push(r);
        }
    }
    roots.sort_by(|x, y| x.total_cmp(y));
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (1.0 + y.abs()));
    roots
}

/// Exact `int_lo^hi |p(x)| dx`, splitting at the real roots of `p`.
pub fn integrate_abs(coeffs: &[f64], lo: f64, hi: f64) -> f64 {
    let anti = antiderivative(coeffs);
    let mut knots = vec![lo];
    knots.extend(real_roots_in(coeffs, lo, hi));
    knots.push(hi);
    knots
        .windows(2)
        .map(|w| (eval(&anti, w[1]) - eval(&anti, w[0])).abs())
        .sum()
}
