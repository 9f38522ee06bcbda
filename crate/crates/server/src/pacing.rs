//! Wall-clock pacing of a fixed-step simulation.

/// Decides how many steps to take on each tick so that simulated time tracks
/// wall-clock time. At most `max_per_tick` steps run per tick; lag beyond
/// that is forgiven, so the simulation slows down instead of skipping steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Pacer {
    dt: f64,
    max_per_tick: u64,
    done: u64,
    forgiven: u64,
}

impl Pacer {
    pub const DEFAULT_MAX_PER_TICK: u64 = 5;

    pub fn new(dt: f64, max_per_tick: u64) -> Self {
        Self { dt, max_per_tick, done: 0, forgiven: 0 }
    }

    /// Steps due at `elapsed` seconds since the clock started. The caller
    /// must take exactly that many steps.
    pub fn due(&mut self, elapsed: f64) -> u64 {
        let target = ((elapsed / self.dt + 1e-9).floor().max(0.0) as u64).saturating_sub(self.forgiven);
        let behind = target.saturating_sub(self.done);
        let n = if behind > self.max_per_tick {
            self.forgiven += behind - self.max_per_tick;
            self.max_per_tick
        } else {
            behind
        };
        self.done += n;
        n
    }

    pub fn steps(&self) -> u64 {
        self.done
    }

    /// Steps dropped from the schedule because the loop fell behind.
    pub fn forgiven(&self) -> u64 {
        self.forgiven
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_real_time_when_ticks_are_on_time() {
        let mut p = Pacer::new(0.005, 5);
        let total: u64 = (1..=200).map(|k| p.due(k as f64 * 0.005)).sum();
        assert_eq!(total, 200);
        assert_eq!(p.forgiven(), 0);
    }

    #[test]
    fn bounded_catch_up_slows_instead_of_skipping() {
        let mut p = Pacer::new(0.01, 5);
        assert_eq!(p.due(0.03), 3);
        // a 0.2 s stall: 17 steps behind, only 5 run now
        assert_eq!(p.due(0.2), 5);
        assert_eq!(p.forgiven(), 12);
        // afterwards the schedule is shifted, not caught up
        assert_eq!(p.due(0.21), 1);
        assert_eq!(p.steps(), 9);
    }

    #[test]
    fn early_ticks_take_no_steps() {
        let mut p = Pacer::new(0.01, 5);
        assert_eq!(p.due(0.004), 0);
        assert_eq!(p.due(0.0099), 0);
        assert_eq!(p.due(0.01), 1);
    }
}
