use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError<E> {
    #[error("derivative evaluation failed: {0}")]
    Derivative(E),
    #[error("non-finite derivative in RK4 stage {stage}")]
    NonFinite { stage: usize },
}

fn axpy<const N: usize>(y: &[f64; N], k: &[f64; N], h: f64) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * k[i])
}

/// One classical RK4 step of `dy/dt = f(t, y)` from `t` to `t + dt`.
///
/// Inputs held by the closure (e.g. a control command) stay constant across
/// all four stages.
pub fn try_rk4_step<const N: usize, E, F>(mut f: F, t: f64, y: &[f64; N], dt: f64) -> Result<[f64; N], StepError<E>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
{
    let mut stage = |i: usize, t: f64, y: &[f64; N]| -> Result<[f64; N], StepError<E>> {
        let k = f(t, y).map_err(StepError::Derivative)?;
        if k.iter().all(|v| v.is_finite()) {
            Ok(k)
        } else {
            Err(StepError::NonFinite { stage: i })
        }
    };
    let half = 0.5 * dt;
    let k1 = stage(1, t, y)?;
    let k2 = stage(2, t + half, &axpy(y, &k1, half))?;
    let k3 = stage(3, t + half, &axpy(y, &k2, half))?;
    let k4 = stage(4, t + dt, &axpy(y, &k3, dt))?;
    Ok(std::array::from_fn(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])))
}

/// Infallible variant of [`try_rk4_step`]; non-finite stages still error.
pub fn rk4_step<const N: usize, F>(mut f: F, t: f64, y: &[f64; N], dt: f64) -> Result<[f64; N], StepError<()>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    try_rk4_step(|t, y| Ok::<_, ()>(f(t, y)), t, y, dt)
}

/// Integrates over `[t0, t0 + steps * dt]`, returning the final state.
pub fn rk4_integrate<const N: usize, F>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    dt: f64,
    steps: usize,
) -> Result<[f64; N], StepError<()>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let mut y = y0;
    for k in 0..steps {
        y = rk4_step(&mut f, t0 + k as f64 * dt, &y, dt)?;
    }
    Ok(y)
}
