//! Independent reference computations for the integration tests. Nothing
//! here calls into the library's numerical routines.

#![allow(dead_code)]

pub mod gen;

/// `ln(1 + L p / (Pbar - p + A))` written directly from the SINR map.
pub fn reduced_rate(p: f64, l: f64, a: f64, pbar: f64) -> f64 {
    (1.0 + l * p / (pbar - p + a)).ln()
}

/// Derivative of [`reduced_rate`] in `p`, via the split
/// `ln(S + (L-1) p) - ln(S - p)`.
pub fn reduced_rate_slope(p: f64, l: f64, a: f64, pbar: f64) -> f64 {
    let s = pbar + a;
    (l - 1.0) / (s + (l - 1.0) * p) + 1.0 / (s - p)
}

/// Second derivative of [`reduced_rate`] from the same split.
pub fn reduced_rate_curvature(p: f64, l: f64, a: f64, pbar: f64) -> f64 {
    let s = pbar + a;
    let grow = (l - 1.0) / (s + (l - 1.0) * p);
    let shrink = 1.0 / (s - p);
    shrink * shrink - grow * grow
}

pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

pub fn second_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

/// Bisection for a root of `f` on `[lo, hi]` with a sign change.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let flo = f(lo);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Perron root of `F_nm = c_n` (`n != m`), the unique `rho > 0` with
/// `sum_n c_n / (rho + c_n) = 1`.
pub fn row_constant_radius(c: &[f64]) -> f64 {
    let g = |rho: f64| c.iter().map(|&cn| cn / (rho + cn)).sum::<f64>() - 1.0;
    let mut hi = c.iter().sum::<f64>().max(1e-300);
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    bisect(g, 0.0, hi, 200)
}

/// One user of the concave box problem.
#[derive(Debug, Clone, Copy)]
pub struct BoxUser {
    pub l: f64,
    pub a: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Euclidean projection onto `{lo <= p <= hi, sum p <= total}`. The
/// projection is `clip(y - shift)`; the clipped sum is piecewise linear in
/// the shift, so the right shift is found between sorted breakpoints.
pub fn project(y: &[f64], users: &[BoxUser], total: f64) -> Vec<f64> {
    let clip = |shift: f64| -> Vec<f64> {
        y.iter()
            .zip(users)
            .map(|(v, u)| (v - shift).clamp(u.lo, u.hi))
            .collect()
    };
    let sum_at = |shift: f64| clip(shift).iter().sum::<f64>();
    if sum_at(0.0) <= total {
        return clip(0.0);
    }
    let mut knots: Vec<f64> = y
        .iter()
        .zip(users)
        .flat_map(|(v, u)| [v - u.hi, v - u.lo])
        .filter(|&k| k > 0.0)
        .collect();
    knots.push(0.0);
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut prev = 0.0;
    let mut prev_sum = sum_at(0.0);
    for &k in &knots[1..] {
        let s = sum_at(k);
        if s <= total {
            let shift = if prev_sum == s { k } else { prev + (prev_sum - total) / (prev_sum - s) * (k - prev) };
            return clip(shift);
        }
        prev = k;
        prev_sum = s;
    }
    clip(prev)
}

/// Maximizes `sum reduced_rate` over the box and budget by projected
/// gradient ascent with a fixed step of one over the largest curvature
/// bound, then returns `(powers, objective)`.
pub fn projected_gradient(users: &[BoxUser], pbar: f64, total: f64, iters: usize) -> (Vec<f64>, f64) {
    let curvature = users
        .iter()
        .map(|u| {
            let s = pbar + u.a;
            // |C''| <= (L-1)^2 / S^2 + 1 / (S - hi)^2 on the box
            let c1 = (u.l - 1.0) / s;
            let c2 = 1.0 / (s - u.hi);
            c1 * c1 + c2 * c2
        })
        .fold(0.0f64, f64::max);
    let step = 1.0 / curvature;
    let mut p: Vec<f64> = users.iter().map(|u| u.lo).collect();
    for _ in 0..iters {
        let y: Vec<f64> = p
            .iter()
            .zip(users)
            .map(|(&pi, u)| pi + step * reduced_rate_slope(pi, u.l, u.a, pbar))
            .collect();
        let next = project(&y, users, total);
        let moved = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = next;
        if moved < 1e-15 * pbar {
            break;
        }
    }
    let obj = p
        .iter()
        .zip(users)
        .map(|(&pi, u)| reduced_rate(pi, u.l, u.a, pbar))
        .sum();
    (p, obj)
}

/// Best reduced objective over a grid for three users: `p_0` and `p_1`
/// step through their boxes, `p_2` takes what is left up to its own cap.
pub fn grid_three(users: &[BoxUser; 3], pbar: f64, step: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let axis = |u: &BoxUser| {
        let n = ((u.hi - u.lo) / step).floor() as usize;
        (0..=n).map(|i| u.lo + i as f64 * step).chain(std::iter::once(u.hi)).collect::<Vec<f64>>()
    };
    let xs = axis(&users[0]);
    let ys = axis(&users[1]);
    for &x in &xs {
        for &y in &ys {
            let left = pbar - x - y;
            if left < users[2].lo {
                continue;
            }
            let z = left.min(users[2].hi);
            let v = reduced_rate(x, users[0].l, users[0].a, pbar)
                + reduced_rate(y, users[1].l, users[1].a, pbar)
                + reduced_rate(z, users[2].l, users[2].a, pbar);
            best = best.max(v);
        }
    }
    best
}
