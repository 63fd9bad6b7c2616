use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{Budget, QueryVolume};
use crate::rng::RandomStream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("schedule is empty")]
    Empty,
    #[error("schedule must start at step 0, first segment starts at {0}")]
    LateStart(u64),
    #[error("schedule segments must have strictly increasing fromStep ({prev} then {next})")]
    Unsorted { prev: u64, next: u64 },
}

/// Piecewise-constant function of the step index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(u64, T)>", into = "Vec<(u64, T)>")]
pub struct Schedule<T: Clone> {
    segments: Vec<(u64, T)>,
}

impl<T: Clone> Schedule<T> {
    pub fn new(segments: Vec<(u64, T)>) -> Result<Self, ScheduleError> {
        let first = segments.first().ok_or(ScheduleError::Empty)?;
        if first.0 != 0 {
            return Err(ScheduleError::LateStart(first.0));
        }
        for w in segments.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(ScheduleError::Unsorted {
                    prev: w[0].0,
                    next: w[1].0,
                });
            }
        }
        Ok(Self { segments })
    }

    pub fn constant(value: T) -> Self {
        Self {
            segments: vec![(0, value)],
        }
    }

    pub fn at(&self, step: u64) -> &T {
        let idx = self.segments.partition_point(|(from, _)| *from <= step);
        &self.segments[idx - 1].1
    }

    pub fn segments(&self) -> &[(u64, T)] {
        &self.segments
    }
}

impl<T: Clone> TryFrom<Vec<(u64, T)>> for Schedule<T> {
    type Error = ScheduleError;
    fn try_from(v: Vec<(u64, T)>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl<T: Clone> From<Schedule<T>> for Vec<(u64, T)> {
    fn from(s: Schedule<T>) -> Self {
        s.segments
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrafficConfig {
    pub base_volume: QueryVolume,
    /// Standard deviation of the additive white Gaussian noise on volume.
    pub noise_stddev: f64,
    pub budget_schedule: Schedule<Budget>,
    pub volume_schedule: Schedule<f64>,
}

impl TrafficConfig {
    pub fn constant(base_volume: f64, budget: f64) -> Self {
        Self {
            base_volume: QueryVolume::clamped(base_volume),
            noise_stddev: 0.0,
            budget_schedule: Schedule::constant(Budget::new(budget).expect("valid budget")),
            volume_schedule: Schedule::constant(1.0),
        }
    }
}

/// Volume and budget for one step. Noise is drawn only when `noise_stddev > 0`.
pub fn generate_traffic(
    config: &TrafficConfig,
    step: u64,
    rng: &mut RandomStream,
) -> (QueryVolume, Budget) {
    let mut volume = config.base_volume.value() * config.volume_schedule.at(step);
    if config.noise_stddev > 0.0 {
        volume += rng.normal(0.0, config.noise_stddev);
    }
    (
        QueryVolume::clamped(volume),
        *config.budget_schedule.at(step),
    )
}
