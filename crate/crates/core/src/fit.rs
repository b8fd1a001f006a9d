/// Least-squares slope of `ln y` against `ln x`, skipping nonpositive values.
/// `None` with fewer than two usable points.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// `n` points from `hi` down to `lo`, equally spaced in `ln`.
pub fn geometric_path(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && hi > 0.0 && lo > 0.0);
    let r = (lo / hi).ln() / (n - 1) as f64;
    (0..n).map(|k| hi * (r * k as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power_law() {
        let pts: Vec<(f64, f64)> = geometric_path(1.0, 1e-3, 12)
            .into_iter()
            .map(|x| (x, 3.0 * x.powf(2.5)))
            .collect();
        assert!((loglog_slope(&pts).unwrap() - 2.5).abs() < 1e-12);
        assert_eq!(loglog_slope(&[(1.0, 0.0), (2.0, 1.0)]), None);
    }
}
