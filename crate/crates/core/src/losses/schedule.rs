use crate::{Error, Result};

/// Piecewise-linear curve over normalised training time `t in [0, 1]`,
/// constant beyond the first and last knots.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    knots: Vec<(f64, f64)>,
}

impl Schedule {
    pub fn constant(v: f64) -> Self {
        Schedule { knots: vec![(0.0, v)] }
    }

    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidConfig("schedule needs at least one knot".into()));
        }
        if knots.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidConfig("schedule knots must be finite".into()));
        }
        if knots.windows(2).any(|w| w[0].0 > w[1].0) {
            return Err(Error::InvalidConfig("schedule knots are not sorted by time".into()));
        }
        Ok(Schedule { knots })
    }

    /// Linear ramp from `v0` at `t0` to `v1` at `t1`.
    pub fn ramp(t0: f64, v0: f64, t1: f64, v1: f64) -> Result<Self> {
        Schedule::new(vec![(t0, v0), (t1, v1)])
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn is_constant(&self) -> bool {
        self.knots.iter().all(|k| k.1 == self.knots[0].1)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = &self.knots;
        if t <= k[0].0 {
            return k[0].1;
        }
        let last = k[k.len() - 1];
        if t >= last.0 {
            return last.1;
        }
        let i = k.partition_point(|&(kt, _)| kt <= t);
        let ((t0, v0), (t1, v1)) = (k[i - 1], k[i]);
        if t1 == t0 {
            return v1;
        }
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    pub fn min_value(&self) -> f64 {
        self.knots.iter().map(|k| k.1).fold(f64::INFINITY, f64::min)
    }

    /// `t:v,t:v,...`
    pub fn to_knot_string(&self) -> String {
        self.knots.iter().map(|(t, v)| format!("{t}:{v}")).collect::<Vec<_>>().join(",")
    }

    pub fn parse_knots(s: &str) -> Result<Self> {
        let knots = s
            .split(',')
            .map(|kv| {
                let (t, v) = kv
                    .split_once(':')
                    .ok_or_else(|| Error::InvalidConfig(format!("knot {kv:?} is not t:v")))?;
                let parse = |x: &str| {
                    x.trim().parse::<f64>().map_err(|e| Error::InvalidConfig(format!("knot {kv:?}: {e}")))
                };
                Ok((parse(t)?, parse(v)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Schedule::new(knots)
    }
}

/// Evaluate `curve` at `t`.
pub fn schedule_eval(curve: &Schedule, t: f64) -> f64 {
    curve.eval(t)
}
