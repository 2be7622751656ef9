use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream for replicate `index` of a run seeded with `master`.
///
/// Each replicate gets its own ChaCha stream, so draws depend only on
/// `(master, index)` and never on scheduling.
pub(crate) fn replicate_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Pairwise summation; the result depends only on the order of `xs`.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean and unbiased variance via pairwise sums.
pub(crate) fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    (mean, pairwise_sum(&dev) / (n - 1) as f64)
}

/// Formats `x` with `digits` significant digits, like C's `%.{digits}g`.
pub(crate) fn format_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let s = if exp < -5 || exp >= digits as i32 {
        let m = format!("{:.*e}", digits.saturating_sub(1), x);
        // strip trailing zeros in the mantissa
        match m.split_once('e') {
            Some((mant, e)) => {
                let mant = if mant.contains('.') {
                    mant.trim_end_matches('0').trim_end_matches('.')
                } else {
                    mant
                };
                format!("{mant}e{e}")
            }
            None => m,
        }
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        let f = format!("{:.*}", decimals, x);
        if f.contains('.') {
            f.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            f
        }
    };
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}
