/// Shannon entropy in nats of a probability vector; zero entries contribute 0.
pub fn entropy(p: &[f64]) -> f64 {
    let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
    h.max(0.0)
}

/// Plug-in entropy of a count vector, in nats.
pub fn entropy_from_counts<I: IntoIterator<Item = u64>>(counts: I) -> f64 {
    let counts: Vec<u64> = counts.into_iter().filter(|&c| c > 0).collect();
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let h: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    h.max(0.0)
}

/// Miller–Madow bias correction `(K - 1) / (2N)` for `K` observed outcomes.
pub fn miller_madow(support: usize, samples: u64) -> f64 {
    if samples == 0 || support == 0 {
        0.0
    } else {
        (support as f64 - 1.0) / (2.0 * samples as f64)
    }
}
