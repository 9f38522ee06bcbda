use super::{EvalError, Trajectory};

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Mean pointwise distance between equally long point lists.
pub fn ade_xy(est: &[[f64; 2]], truth: &[[f64; 2]]) -> Result<f64, EvalError> {
    if est.len() != truth.len() {
        return Err(EvalError::LengthMismatch(est.len(), truth.len()));
    }
    if est.is_empty() {
        return Err(EvalError::EmptyTrajectory);
    }
    Ok(est.iter().zip(truth).map(|(&a, &b)| dist(a, b)).sum::<f64>() / est.len() as f64)
}

/// Average displacement error between time-aligned trajectories.
pub fn ade(est: &Trajectory, truth: &Trajectory) -> Result<f64, EvalError> {
    if est.len() != truth.len() {
        return Err(EvalError::LengthMismatch(est.len(), truth.len()));
    }
    for (index, (a, b)) in est.points.iter().zip(&truth.points).enumerate() {
        if (a.t - b.t).abs() > 1e-6 {
            return Err(EvalError::TimestampMismatch { index, a: a.t, b: b.t });
        }
    }
    ade_xy(&est.xy(), &truth.xy())
}

/// Discrete Fréchet distance by the coupling dynamic program, keeping one
/// row of the `|p| x |q|` table at a time.
pub fn discrete_frechet_xy(p: &[[f64; 2]], q: &[[f64; 2]]) -> Result<f64, EvalError> {
    if p.is_empty() || q.is_empty() {
        return Err(EvalError::EmptyTrajectory);
    }
    let mut prev = vec![0.0_f64; q.len()];
    let mut cur = vec![0.0_f64; q.len()];
    for (i, &pi) in p.iter().enumerate() {
        for (j, &qj) in q.iter().enumerate() {
            let d = dist(pi, qj);
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[q.len() - 1])
}

pub fn discrete_frechet(p: &Trajectory, q: &Trajectory) -> Result<f64, EvalError> {
    discrete_frechet_xy(&p.xy(), &q.xy())
}
