use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Inner,
    Outer,
    Global,
}

/// Observed range of a ratio against an envelope, with the frozen band it
/// is expected to stay inside.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeBand {
    pub regime: Regime,
    pub lower: f64,
    pub upper: f64,
    pub grid: String,
    pub frozen_band: (f64, f64),
    pub points: usize,
}

impl EnvelopeBand {
    pub fn new(regime: Regime, grid: impl Into<String>, frozen_band: (f64, f64)) -> Self {
        EnvelopeBand {
            regime,
            lower: f64::INFINITY,
            upper: f64::NEG_INFINITY,
            grid: grid.into(),
            frozen_band,
            points: 0,
        }
    }

    pub fn record(&mut self, ratio: f64) {
        if ratio.is_nan() {
            // a NaN must fail the band rather than vanish in min/max
            self.lower = f64::NAN;
            self.upper = f64::NAN;
        } else if !self.lower.is_nan() {
            self.lower = self.lower.min(ratio);
            self.upper = self.upper.max(ratio);
        }
        self.points += 1;
    }

    pub fn spread(&self) -> f64 {
        self.upper / self.lower
    }

    pub fn pass(&self) -> bool {
        self.points > 0
            && self.lower > 0.0
            && self.upper.is_finite()
            && self.lower >= self.frozen_band.0
            && self.upper <= self.frozen_band.1
    }
}
