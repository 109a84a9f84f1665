//! Test-only numerical oracles, kept independent of the library's own
//! algorithms so they can referee it: the exponential integral by adaptive
//! quadrature, a brute-force grid maximizer for the constrained throughput,
//! and seeded sampling helpers.

/// E1(z) = ∫_z^∞ e^{−t}/t dt evaluated by adaptive Simpson quadrature of the
/// transformed integral ∫_{ln z}^∞ exp(−e^w) dw. Good to ~1e-13 relative.
pub fn e1_quadrature(z: f64) -> f64 {
    assert!(z > 0.0, "E1 defined for z > 0");
    let a = z.ln();
    let b = 8.0; // exp(-e^8) == 0 in f64
    let rough = simpson(a, b).abs().max(1e-300);
    adaptive(a, b, simpson(a, b), rough * 1e-15, 0)
}

fn integrand(w: f64) -> f64 {
    let t = w.exp();
    if t > 745.0 {
        0.0
    } else {
        (-t).exp()
    }
}

fn simpson(a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (integrand(a) + 4.0 * integrand(0.5 * (a + b)) + integrand(b))
}

fn adaptive(a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = simpson(a, m);
    let right = simpson(m, b);
    let refined = left + right;
    if depth > 48 || (refined - whole).abs() <= 15.0 * tol {
        return refined + (refined - whole) / 15.0;
    }
    adaptive(a, m, left, 0.5 * tol, depth + 1) + adaptive(m, b, right, 0.5 * tol, depth + 1)
}

/// Brute-force maximum of (1−a)a + (1−b)b over the grid
/// {(i, j)·(1−δ)/n : i + j ≤ n} inside the constraint a + b ≤ 1 − δ.
pub fn grid_max_constrained_throughput(delta: f64, n: usize) -> f64 {
    assert!((0.0..=1.0).contains(&delta));
    let span = 1.0 - delta;
    let mut best = 0.0f64;
    for i in 0..=n {
        let a = span * i as f64 / n as f64;
        for j in 0..=(n - i) {
            let b = span * j as f64 / n as f64;
            let eta = (1.0 - a) * a + (1.0 - b) * b;
            best = best.max(eta);
        }
    }
    best
}

/// Deterministic simplex samples by stick-breaking over a SplitMix64 stream.
pub fn random_simplex(seed: u64, n: usize) -> Vec<[f64; 3]> {
    let mut state = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut next = move || {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        (z >> 11) as f64 * (1.0 / 9007199254740992.0)
    };
    (0..n)
        .map(|_| {
            let (a, b) = (next(), next());
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            [lo, hi - lo, 1.0 - hi]
        })
        .collect()
}

/// Uniform stream matching [`random_simplex`]'s generator, for ad-hoc draws.
pub fn uniform_stream(seed: u64) -> impl FnMut() -> f64 {
    let mut state = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    move || {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        (z >> 11) as f64 * (1.0 / 9007199254740992.0)
    }
}

/// Standard error of a binomial proportion.
pub fn binomial_se(p: f64, n: f64) -> f64 {
    if n > 0.0 {
        (p * (1.0 - p) / n).sqrt()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_matches_known_values() {
        // classic tabulated value of E1(1)
        assert!((e1_quadrature(1.0) - 0.219_383_934_4).abs() < 1e-9);
        // tiny and large arguments stay finite and positive
        assert!(e1_quadrature(1e-6) > 13.0);
        assert!(e1_quadrature(50.0) > 0.0);
    }

    #[test]
    fn grid_maximizer_unconstrained_case() {
        let got = grid_max_constrained_throughput(0.0, 100);
        assert!((got - 0.5).abs() < 1e-12);
    }

    #[test]
    fn simplex_samples_are_valid() {
        for s in random_simplex(7, 100) {
            assert!(s.iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
