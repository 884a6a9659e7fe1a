use std::fmt;
use std::str::FromStr;

use super::adam::AdamParams;
use crate::error::{Error, Result};
use crate::sampler::{SamplingStrategy, DEFAULT_FLIP_PROBABILITY};
use crate::schedule::{reference_warmup_steps, ScheduleConfig};

pub const DEFAULT_HIDDEN_WIDTH: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub grad_accum: usize,
    pub strategy: SamplingStrategy,
    pub dropout: f64,
    pub seed: u64,
    /// Hidden layer widths; empty means a linear model.
    pub hidden_dims: Vec<usize>,
    pub adam: AdamParams,
    pub flip_probability: f64,
}

impl TrainConfig {
    pub fn new(batch_size: usize, grad_accum: usize, strategy: SamplingStrategy, dropout: f64, seed: u64) -> Result<Self> {
        let cfg = Self {
            batch_size,
            grad_accum,
            strategy,
            dropout,
            seed,
            hidden_dims: vec![DEFAULT_HIDDEN_WIDTH],
            adam: AdamParams::default(),
            flip_probability: DEFAULT_FLIP_PROBABILITY,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.grad_accum == 0 {
            return Err(Error::Config("batch size and gradient accumulation must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return Err(Error::Config(format!("flip probability {} outside [0, 1]", self.flip_probability)));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        Ok(())
    }

    /// Optimizer steps for one pass over `examples` records: `ceil(ceil(N / BS) / GA)`.
    pub fn total_steps(&self, examples: usize) -> usize {
        examples.div_ceil(self.batch_size).div_ceil(self.grad_accum)
    }

    /// Reference one-cycle schedule for one pass over `examples` records.
    pub fn reference_schedule(&self, examples: usize) -> Result<ScheduleConfig> {
        ScheduleConfig::reference(
            reference_warmup_steps(self.batch_size, self.grad_accum),
            self.total_steps(examples),
        )
    }
}

/// The four reference model configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// BS 16, GA 2, season by season, no dropout.
    One,
    /// BS 13, GA 3, random, no dropout.
    Two,
    /// BS 16, GA 2, season by season, dropout 0.2.
    Three,
    /// BS 11, GA 3, random, dropout 0.3.
    Four,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::One, Preset::Two, Preset::Three, Preset::Four];

    pub fn number(self) -> u8 {
        match self {
            Preset::One => 1,
            Preset::Two => 2,
            Preset::Three => 3,
            Preset::Four => 4,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Preset::One),
            2 => Ok(Preset::Two),
            3 => Ok(Preset::Three),
            4 => Ok(Preset::Four),
            _ => Err(Error::Config(format!("unknown preset {n}, expected 1-4"))),
        }
    }

    pub fn config(self, seed: u64) -> TrainConfig {
        let (bs, ga, strategy, dropout) = match self {
            Preset::One => (16, 2, SamplingStrategy::season_by_season(), 0.0),
            Preset::Two => (13, 3, SamplingStrategy::random(), 0.0),
            Preset::Three => (16, 2, SamplingStrategy::season_by_season(), 0.2),
            Preset::Four => (11, 3, SamplingStrategy::random(), 0.3),
        };
        TrainConfig::new(bs, ga, strategy, dropout, seed).expect("presets are valid")
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "preset{}", self.number())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = s
            .trim_start_matches("preset")
            .parse::<u8>()
            .map_err(|_| Error::Config(format!("unknown preset {s:?}")))?;
        Self::from_number(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::SamplingKind;

    #[test]
    fn preset_rows() {
        let c = Preset::One.config(0);
        assert_eq!((c.batch_size, c.grad_accum, c.strategy.kind, c.dropout), (16, 2, SamplingKind::SeasonBySeason, 0.0));
        let c = Preset::Two.config(0);
        assert_eq!((c.batch_size, c.grad_accum, c.strategy.kind, c.dropout), (13, 3, SamplingKind::Random, 0.0));
        let c = Preset::Three.config(0);
        assert_eq!((c.batch_size, c.grad_accum, c.strategy.kind, c.dropout), (16, 2, SamplingKind::SeasonBySeason, 0.2));
        let c = Preset::Four.config(0);
        assert_eq!((c.batch_size, c.grad_accum, c.strategy.kind, c.dropout), (11, 3, SamplingKind::Random, 0.3));
        assert_eq!("3".parse::<Preset>().unwrap(), Preset::Three);
        assert!(Preset::from_number(5).is_err());
    }

    #[test]
    fn step_counts() {
        let c = Preset::One.config(0);
        // 1250 batches of 16, grouped in pairs
        assert_eq!(c.total_steps(20_000), 625);
        assert_eq!(c.total_steps(20_001), 626);
        let c = Preset::Four.config(0);
        assert_eq!(c.total_steps(100), 4);
        let s = Preset::One.config(0).reference_schedule(20_000).unwrap();
        assert_eq!((s.warmup_steps, s.total_steps), (300, 625));
    }

    #[test]
    fn rejects_invalid() {
        assert!(TrainConfig::new(0, 1, SamplingStrategy::random(), 0.0, 0).is_err());
        assert!(TrainConfig::new(1, 0, SamplingStrategy::random(), 0.0, 0).is_err());
        assert!(TrainConfig::new(1, 1, SamplingStrategy::random(), 1.0, 0).is_err());
    }
}
