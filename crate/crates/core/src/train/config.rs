use serde::{Deserialize, Serialize};

use super::TrainError;

/// A run of optimizer steps at one learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrPhase {
    pub steps: u64,
    pub lr: f64,
}

/// Per-class train/val/test proportions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[u32; 3]", into = "[u32; 3]")]
pub struct SplitRatio {
    pub train: u32,
    pub val: u32,
    pub test: u32,
}

impl SplitRatio {
    pub fn total(&self) -> u32 {
        self.train + self.val + self.test
    }
}

impl Default for SplitRatio {
    fn default() -> Self {
        Self {
            train: 8,
            val: 1,
            test: 1,
        }
    }
}

impl From<[u32; 3]> for SplitRatio {
    fn from([train, val, test]: [u32; 3]) -> Self {
        Self { train, val, test }
    }
}

impl From<SplitRatio> for [u32; 3] {
    fn from(r: SplitRatio) -> Self {
        [r.train, r.val, r.test]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub schedule: Vec<LrPhase>,
    pub batch_size: usize,
    pub split: SplitRatio,
    pub seed: u64,
    /// Steps between history rows (validation passes).
    pub eval_interval: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            schedule: vec![
                LrPhase {
                    steps: 12_000,
                    lr: 0.001,
                },
                LrPhase {
                    steps: 3_000,
                    lr: 0.0001,
                },
            ],
            batch_size: 100,
            split: SplitRatio::default(),
            seed: 0,
            eval_interval: 100,
        }
    }
}

impl TrainConfig {
    pub fn total_steps(&self) -> u64 {
        self.schedule.iter().map(|p| p.steps).sum()
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.eval_interval == 0 {
            return bad("eval interval must be positive");
        }
        if self.split.train == 0 || self.split.val == 0 || self.split.test == 0 {
            return bad("split parts must be positive");
        }
        if self
            .schedule
            .iter()
            .any(|p| !(p.lr.is_finite() && p.lr >= 0.0))
        {
            return bad("learning rates must be finite and non-negative");
        }
        Ok(())
    }

    /// The same schedule shape compressed or stretched to `total` steps.
    /// Phase lengths are rounded proportionally; the last phase absorbs the
    /// rounding remainder.
    pub fn scaled_to(&self, total: u64) -> Self {
        let orig = self.total_steps();
        let mut schedule = Vec::with_capacity(self.schedule.len());
        let mut used = 0u64;
        for (i, phase) in self.schedule.iter().enumerate() {
            let steps = if i + 1 == self.schedule.len() {
                total - used
            } else if orig == 0 {
                0
            } else {
                ((phase.steps as f64 * total as f64 / orig as f64).round() as u64).min(total - used)
            };
            used += steps;
            schedule.push(LrPhase { steps, lr: phase.lr });
        }
        Self {
            schedule,
            ..self.clone()
        }
    }
}

/// Piecewise-constant learning rate for 0-indexed `step`.
pub fn lr_at_step(step: u64, config: &TrainConfig) -> Result<f64, TrainError> {
    let mut end = 0;
    for phase in &config.schedule {
        end += phase.steps;
        if step < end {
            return Ok(phase.lr);
        }
    }
    Err(TrainError::StepOutOfRange {
        step,
        total: config.total_steps(),
    })
}
