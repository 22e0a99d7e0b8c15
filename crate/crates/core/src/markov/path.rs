use std::fmt::Write as _;

use crate::error::{MfgError, Result};

/// Jump event of a chain path: at `time` the chain enters `state`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub state: usize,
}

/// A càdlàg path on `[0, horizon]` stored as initial state plus jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    initial_state: usize,
    jumps: Vec<Jump>,
    horizon: f64,
}

impl PathRecord {
    pub fn new(initial_state: usize, jumps: Vec<Jump>, horizon: f64) -> Result<Self> {
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(MfgError::InvalidInput(format!("bad horizon {horizon}")));
        }
        let mut prev_t = 0.0;
        let mut prev_s = initial_state;
        for (n, jump) in jumps.iter().enumerate() {
            if !(jump.time > prev_t) || (n == 0 && !(jump.time > 0.0)) {
                return Err(MfgError::InvalidInput(format!(
                    "jump {n} at t={} is not strictly after the previous event",
                    jump.time
                )));
            }
            if !(jump.time < horizon) {
                return Err(MfgError::InvalidInput(format!(
                    "jump {n} at t={} is not strictly before the horizon {horizon}",
                    jump.time
                )));
            }
            if jump.state == prev_s {
                return Err(MfgError::InvalidInput(format!(
                    "jump {n} at t={} does not change the state",
                    jump.time
                )));
            }
            prev_t = jump.time;
            prev_s = jump.state;
        }
        Ok(Self {
            initial_state,
            jumps,
            horizon,
        })
    }

    pub fn constant(state: usize, horizon: f64) -> Self {
        Self {
            initial_state: state,
            jumps: Vec::new(),
            horizon,
        }
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_jumps(&self) -> usize {
        self.jumps.len()
    }

    /// State at time `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> usize {
        let n = self.jumps.partition_point(|j| j.time <= t);
        if n == 0 {
            self.initial_state
        } else {
            self.jumps[n - 1].state
        }
    }

    /// Left limit `X_{t-}`.
    pub fn state_before(&self, t: f64) -> usize {
        let n = self.jumps.partition_point(|j| j.time < t);
        if n == 0 {
            self.initial_state
        } else {
            self.jumps[n - 1].state
        }
    }

    pub fn final_state(&self) -> usize {
        self.jumps.last().map_or(self.initial_state, |j| j.state)
    }

    /// Constant-state pieces `(start, end, state)` covering `[0, horizon]`.
    pub fn sojourns(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        let n = self.jumps.len();
        (0..=n).map(move |k| {
            let start = if k == 0 { 0.0 } else { self.jumps[k - 1].time };
            let end = if k == n {
                self.horizon
            } else {
                self.jumps[k].time
            };
            let state = if k == 0 {
                self.initial_state
            } else {
                self.jumps[k - 1].state
            };
            (start, end, state)
        })
    }

    /// Restriction to `[a, b]`, re-based so that the window starts at time 0.
    pub fn window(&self, a: f64, b: f64) -> Result<PathRecord> {
        if !(0.0 <= a && a <= b && b <= self.horizon) {
            return Err(MfgError::InvalidInput(format!(
                "window [{a}, {b}] outside [0, {}]",
                self.horizon
            )));
        }
        let jumps = self
            .jumps
            .iter()
            .filter(|j| j.time > a && j.time < b)
            .map(|j| Jump {
                time: j.time - a,
                state: j.state,
            })
            .collect();
        PathRecord::new(self.state_at(a), jumps, b - a)
    }

    /// CSV text: header `time,state`, a row for t=0, one row per jump, and a closing row at the horizon.
    ///
    /// States are written 1-based.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,state\n");
        let _ = writeln!(s, "{:.16e},{}", 0.0, self.initial_state + 1);
        for j in &self.jumps {
            let _ = writeln!(s, "{:.16e},{}", j.time, j.state + 1);
        }
        let _ = writeln!(s, "{:.16e},{}", self.horizon, self.final_state() + 1);
        s
    }

    pub fn from_csv(text: &str) -> Result<PathRecord> {
        let mut rows = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || ln == 0 {
                if ln == 0 && line != "time,state" {
                    return Err(MfgError::Parse(format!(
                        "line 1: expected header 'time,state', found '{line}'"
                    )));
                }
                continue;
            }
            let (t, s) = line
                .split_once(',')
                .ok_or_else(|| MfgError::Parse(format!("line {}: expected two fields", ln + 1)))?;
            let t: f64 = t
                .trim()
                .parse()
                .map_err(|e| MfgError::Parse(format!("line {}: time: {e}", ln + 1)))?;
            let s: usize = s
                .trim()
                .parse()
                .map_err(|e| MfgError::Parse(format!("line {}: state: {e}", ln + 1)))?;
            if s == 0 {
                return Err(MfgError::Parse(format!(
                    "line {}: states are 1-based",
                    ln + 1
                )));
            }
            rows.push((t, s - 1));
        }
        if rows.len() < 2 {
            return Err(MfgError::Parse(
                "a path needs an initial row and a horizon row".into(),
            ));
        }
        let (t0, s0) = rows[0];
        if t0 != 0.0 {
            return Err(MfgError::Parse(format!("first row must be at t=0, got {t0}")));
        }
        let (horizon, s_end) = rows[rows.len() - 1];
        let jumps: Vec<Jump> = rows[1..rows.len() - 1]
            .iter()
            .map(|&(time, state)| Jump { time, state })
            .collect();
        let path = PathRecord::new(s0, jumps, horizon)?;
        if path.final_state() != s_end {
            return Err(MfgError::Parse(
                "horizon row state differs from the last jump state".into(),
            ));
        }
        Ok(path)
    }
}
