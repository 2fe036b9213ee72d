//! Closed-form real roots of cubic polynomials.
//!
//! Used by the norm equation of the auxiliary-variable update, which reduces
//! to a pair of cubics in the candidate norm. Roots are computed by the
//! depressed-cubic formula (trigonometric for three real roots, Cardano for
//! one) and polished with a couple of Newton steps.

/// All real roots of `c3 x^3 + c2 x^2 + c1 x + c0`, ascending. Degenerate
/// leading coefficients fall back to the quadratic/linear formulas.
pub fn cubic_real_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    let scale = c3.abs().max(c2.abs()).max(c1.abs()).max(c0.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if c3.abs() <= 1e-14 * scale {
        return quadratic_real_roots(c2, c1, c0);
    }

    // Normalize and depress: x = s - a2/3 turns x^3 + a2 x^2 + a1 x + a0
    // into s^3 + p s + q.
    let a2 = c2 / c3;
    let a1 = c1 / c3;
    let a0 = c0 / c3;
    let shift = a2 / 3.0;
    let p = a1 - a2 * a2 / 3.0;
    let q = 2.0 * a2.powi(3) / 27.0 - a2 * a1 / 3.0 + a0;

    let mut roots = Vec::with_capacity(3);
    let discriminant = -4.0 * p.powi(3) - 27.0 * q * q;
    if p.abs() <= 1e-14 * (1.0 + q.abs()) {
        roots.push((-q).cbrt());
    } else if discriminant > 0.0 {
        // Three real roots; requires p < 0.
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let phi = arg.acos();
        for k in 0..3 {
            roots.push(m * ((phi - std::f64::consts::TAU * k as f64) / 3.0).cos());
        }
    } else {
        // One real root (plus possibly a double root at the boundary).
        let half_q = q / 2.0;
        let inner = half_q * half_q + p.powi(3) / 27.0;
        if inner >= 0.0 {
            let sq = inner.sqrt();
            roots.push((-half_q + sq).cbrt() + (-half_q - sq).cbrt());
        } else {
            // Boundary noise: treat as the three-root case.
            let m = 2.0 * (-p / 3.0).sqrt();
            let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
            let phi = arg.acos();
            for k in 0..3 {
                roots.push(m * ((phi - std::f64::consts::TAU * k as f64) / 3.0).cos());
            }
        }
        if discriminant.abs() <= 1e-12 * (p.powi(3).abs() + q * q).max(1.0) && p < 0.0 {
            // Double root on the zero-discriminant boundary.
            roots.push(-3.0 * q / (2.0 * p));
        }
    }

    let eval = |x: f64| ((c3 * x + c2) * x + c1) * x + c0;
    let deriv = |x: f64| (3.0 * c3 * x + 2.0 * c2) * x + c1;
    let mut out: Vec<f64> = roots
        .into_iter()
        .map(|s| {
            let mut x = s - shift;
            for _ in 0..3 {
                let d = deriv(x);
                if d.abs() > 1e-300 {
                    let step = eval(x) / d;
                    if step.is_finite() {
                        x -= step;
                    }
                }
            }
            x
        })
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs())));
    out
}

fn quadratic_real_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if a.abs() <= 1e-14 * scale {
        if b.abs() <= 1e-14 * scale {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    // Citardauq form avoids cancellation for small roots.
    let q = -0.5 * (b + b.signum() * sq);
    let mut out = if q == 0.0 {
        vec![0.0, 0.0]
    } else {
        vec![q / a, c / q]
    };
    out.sort_by(|x, y| x.partial_cmp(y).unwrap());
    out.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + x.abs().max(y.abs())));
    out
}
