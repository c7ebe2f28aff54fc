//! One-dimensional minimization of quasi-convex functions.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search on [a, b].
pub(crate) fn golden<F: FnMut(f64) -> f64>(
    f: &mut F,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Walks outward from t0 in both directions until the function strictly
/// increases. For a quasi-convex function the minimizers lie in the result.
pub(crate) fn bracket<F: FnMut(f64) -> f64>(f: &mut F, t0: f64, h: f64) -> (f64, f64) {
    let f0 = f(t0);
    let mut ends = [0.0; 2];
    for (k, dir) in [1.0, -1.0].into_iter().enumerate() {
        let (mut prev, mut fprev, mut step) = (t0, f0, h);
        loop {
            let t = prev + dir * step;
            let ft = f(t);
            if !(ft <= fprev) || step > 1e6 {
                ends[k] = t;
                break;
            }
            prev = t;
            fprev = ft;
            step *= 2.0;
        }
    }
    (ends[1], ends[0])
}

/// Minimizes on [lo, hi]: a coarse grid picks the basin, golden section
/// refines it.
pub(crate) fn minimize_on<F: FnMut(f64) -> f64>(
    f: &mut F,
    lo: f64,
    hi: f64,
    grid: usize,
    tol: f64,
) -> (f64, f64) {
    let ts: Vec<f64> = (0..=grid)
        .map(|i| lo + (hi - lo) * i as f64 / grid as f64)
        .collect();
    let vals: Vec<f64> = ts.iter().map(|&t| f(t)).collect();
    let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let first = vals.iter().position(|&v| v == best).unwrap_or(0);
    let last = vals.iter().rposition(|&v| v == best).unwrap_or(grid);
    let a = ts[first.saturating_sub(1)];
    let b = ts[(last + 1).min(grid)];
    let (t, v) = golden(f, a, b, tol);
    if v <= best {
        (t, v)
    } else {
        (ts[first], best)
    }
}

/// Boundary of the sublevel set {f <= level}: `inside` satisfies it,
/// `outside` does not.
pub(crate) fn bisect_level<F: FnMut(f64) -> f64>(
    f: &mut F,
    mut inside: f64,
    mut outside: f64,
    level: f64,
    tol: f64,
) -> f64 {
    while (outside - inside).abs() > tol {
        let m = 0.5 * (inside + outside);
        if f(m) <= level {
            inside = m;
        } else {
            outside = m;
        }
    }
    0.5 * (inside + outside)
}
