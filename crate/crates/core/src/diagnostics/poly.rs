// Low-degree real polynomials on an interval, coefficients in ascending order.

pub(crate) fn eval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

pub(crate) fn deriv(p: &[f64]) -> Vec<f64> {
    p.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect()
}

pub(crate) fn integrate(p: &[f64], a: f64, b: f64) -> f64 {
    let anti = |x: f64| p.iter().enumerate().rev().fold(0.0, |acc, (i, c)| acc * x + c / (i as f64 + 1.0)) * x;
    anti(b) - anti(a)
}

pub(crate) fn mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

fn degree(p: &[f64]) -> usize {
    let scale = p.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    p.iter().rposition(|c| c.abs() > 1e-300 && c.abs() > 1e-15 * scale).unwrap_or(0)
}

/// Real roots in [a, b], sorted.
pub(crate) fn roots_in(p: &[f64], a: f64, b: f64) -> Vec<f64> {
    let d = degree(p);
    let p = &p[..=d];
    if d == 0 {
        return Vec::new();
    }
    if d == 1 {
        let r = -p[0] / p[1];
        return if (a..=b).contains(&r) { vec![r] } else { Vec::new() };
    }
    let mut knots = vec![a];
    knots.extend(roots_in(&deriv(p), a, b));
    knots.push(b);
    let mut out: Vec<f64> = Vec::new();
    for w in knots.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (eval(p, lo), eval(p, hi));
        if flo == 0.0 {
            out.push(lo);
            continue;
        }
        if flo.signum() == fhi.signum() {
            continue;
        }
        let s = flo.signum();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if eval(p, mid).signum() == s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    if eval(p, b) == 0.0 {
        out.push(b);
    }
    out.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (b - a));
    out
}

/// ∫_a^b |p|.
pub(crate) fn integrate_abs(p: &[f64], a: f64, b: f64) -> f64 {
    let mut knots = vec![a];
    knots.extend(roots_in(p, a, b));
    knots.push(b);
    knots.windows(2).map(|w| integrate(p, w[0], w[1]).abs()).sum()
}

/// max over [a, b] of p.
pub(crate) fn max_on(p: &[f64], a: f64, b: f64) -> f64 {
    let mut best = eval(p, a).max(eval(p, b));
    for r in roots_in(&deriv(p), a, b) {
        best = best.max(eval(p, r));
    }
    best
}
