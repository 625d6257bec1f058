//! Kneedle knee detection for concave increasing curves.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KneeConfig {
    pub cap_days: u32,
    pub sensitivity: f64,
}

impl Default for KneeConfig {
    fn default() -> Self {
        KneeConfig { cap_days: 365, sensitivity: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KneeError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("x must be strictly increasing (point {0})")]
    XNotIncreasing(usize),
    #[error("y must be non-decreasing (point {0})")]
    YDecreasing(usize),
    #[error("curve has no knee")]
    NoKnee,
}

const FLAT: f64 = 1e-9;

fn check(curve: &[(f64, f64)]) -> Result<(), KneeError> {
    if curve.len() < 3 {
        return Err(KneeError::TooFewPoints(curve.len()));
    }
    for (i, w) in curve.windows(2).enumerate() {
        if w[1].0.partial_cmp(&w[0].0) != Some(std::cmp::Ordering::Greater) {
            return Err(KneeError::XNotIncreasing(i + 1));
        }
        if w[1].1 < w[0].1 {
            return Err(KneeError::YDecreasing(i + 1));
        }
    }
    Ok(())
}

/// Normalized x and difference curve `y_n - x_n`.
fn difference(curve: &[(f64, f64)]) -> Result<(Vec<f64>, Vec<f64>), KneeError> {
    check(curve)?;
    let (x0, x1) = (curve[0].0, curve[curve.len() - 1].0);
    let (y0, y1) = (curve[0].1, curve[curve.len() - 1].1);
    if y1 - y0 <= 0.0 {
        return Err(KneeError::NoKnee);
    }
    let xn: Vec<f64> = curve.iter().map(|p| (p.0 - x0) / (x1 - x0)).collect();
    let d = curve.iter().zip(&xn).map(|(p, x)| (p.1 - y0) / (y1 - y0) - x).collect();
    Ok((xn, d))
}

fn argmax(d: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in d.iter().enumerate() {
        if *v > d[best] {
            best = i;
        }
    }
    best
}

fn is_local_max(d: &[f64], i: usize) -> bool {
    i > 0 && i + 1 < d.len() && d[i] > d[i - 1] && d[i] > d[i + 1]
}

/// x of the knee. Candidates are strict interior local maxima of the
/// difference curve, tried in order; a candidate is confirmed once the curve
/// falls below `d_c - sensitivity * mean(Δx_n)` before a higher local
/// maximum shows up. Without a confirmed candidate the global maximum wins.
pub fn kneedle_knee(curve: &[(f64, f64)], config: &KneeConfig) -> Result<f64, KneeError> {
    let (xn, d) = difference(curve)?;
    let best = argmax(&d);
    if d[best] < FLAT {
        return Err(KneeError::NoKnee);
    }
    let mean_step = (xn[xn.len() - 1] - xn[0]) / (xn.len() - 1) as f64;
    for c in (1..d.len() - 1).filter(|&i| is_local_max(&d, i)) {
        let threshold = d[c] - config.sensitivity * mean_step;
        for j in c + 1..d.len() {
            if d[j] < threshold {
                return Ok(curve[c].0);
            }
            if is_local_max(&d, j) && d[j] > d[c] {
                break;
            }
        }
    }
    Ok(curve[best].0)
}

/// x maximizing `y_n - x_n` over the sampled points.
pub fn brute_force_knee(curve: &[(f64, f64)]) -> Result<f64, KneeError> {
    let (_, d) = difference(curve)?;
    let best = argmax(&d);
    if d[best] < FLAT {
        return Err(KneeError::NoKnee);
    }
    Ok(curve[best].0)
}
