use super::{VehicleError, VehicleSpec};

/// Front/rear split of the wheels. Wheels with `x > 0` are front, all others rear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxleLayout {
    pub n_front: usize,
    pub n_rear: usize,
    /// Distance from the CG forward to the mean front wheel position.
    pub l_front: f64,
    /// Distance from the CG back to the mean rear wheel position.
    pub l_rear: f64,
}

impl AxleLayout {
    pub fn of(spec: &VehicleSpec) -> Self {
        let (mut nf, mut nr, mut sf, mut sr) = (0usize, 0usize, 0.0, 0.0);
        for w in &spec.wheels {
            if w.x > 0.0 {
                nf += 1;
                sf += w.x;
            } else {
                nr += 1;
                sr += w.x;
            }
        }
        let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
        Self { n_front: nf, n_rear: nr, l_front: mean(sf, nf), l_rear: -mean(sr, nr) }
    }

    pub fn is_multi_axle(&self) -> bool {
        self.n_front > 0 && self.n_rear > 0
    }

    /// `l_f + l_r`; equals the wheelbase when every axle sits at one `x`.
    pub fn spacing(&self) -> f64 {
        self.l_front + self.l_rear
    }
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Normal load on each wheel under body accelerations `ax`, `ay` (m/s^2).
pub fn compute_load_distribution(spec: &VehicleSpec, ax: f64, ay: f64) -> Result<Vec<f64>, VehicleError> {
    load_distribution_with_roll(spec, ax, ay, 0.0)
}

/// As [`compute_load_distribution`], with an additional roll moment (N m)
/// that is converted into lateral transfer over the track width.
///
/// Loads are clamped at zero; the clamped deficit is not redistributed.
pub fn load_distribution_with_roll(
    spec: &VehicleSpec,
    ax: f64,
    ay: f64,
    roll_moment: f64,
) -> Result<Vec<f64>, VehicleError> {
    let mut loads = raw_loads(spec, ax, ay, roll_moment)?;
    let mut lifted = 0;
    for fz in &mut loads {
        if *fz < 0.0 {
            *fz = 0.0;
            lifted += 1;
        }
    }
    if lifted > 0 {
        log::debug!("{}: {lifted} wheel(s) lifted (ax={ax:.3}, ay={ay:.3})", spec.name);
    }
    Ok(loads)
}

pub(crate) fn raw_loads(spec: &VehicleSpec, ax: f64, ay: f64, roll_moment: f64) -> Result<Vec<f64>, VehicleError> {
    let axles = AxleLayout::of(spec);
    let weight = spec.mass * spec.gravity;
    let h = spec.cg_height;

    let (front, rear, t_long) = if axles.is_multi_axle() {
        let l = axles.spacing();
        if l <= 0.0 {
            return Err(VehicleError::ZeroWheelbase);
        }
        let front = weight * axles.l_rear / (axles.n_front as f64 * l);
        let rear = weight * axles.l_front / (axles.n_rear as f64 * l);
        (front, rear, spec.mass * ax * h / l)
    } else if axles.n_front > 0 {
        (weight / axles.n_front as f64, 0.0, 0.0)
    } else {
        (0.0, weight / axles.n_rear as f64, 0.0)
    };

    let w = spec.track_width();
    let t_lat = if w > 0.0 { (spec.mass * ay * h + roll_moment) / w } else { 0.0 };

    Ok(spec
        .wheels
        .iter()
        .map(|wheel| {
            let lateral = t_lat * sgn(wheel.y);
            if wheel.x > 0.0 {
                front - t_long / axles.n_front as f64 - lateral
            } else {
                rear + t_long / axles.n_rear as f64 - lateral
            }
        })
        .collect())
}
