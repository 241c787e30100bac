use serde::Serialize;

use crate::error::{Error, Result};

/// Right-continuous step function `H(t)` with jumps at event times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CumulativeHazard {
    /// Distinct event times, increasing.
    pub times: Vec<f64>,
    /// `H` just after each event time.
    pub values: Vec<f64>,
    /// Risk-set size at each event time.
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
}

impl CumulativeHazard {
    /// Delayed-entry estimate: a subject is at risk at `s` when
    /// `entry < s <= exit`.
    pub fn estimate(entry: &[f64], exit: &[f64], delta: &[f64]) -> Result<Self> {
        let n = exit.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty survival data".into()));
        }
        if entry.len() != n || delta.len() != n {
            return Err(Error::InvalidArgument("survival vectors differ in length".into()));
        }
        for i in 0..n {
            if !(entry[i] < exit[i]) {
                return Err(Error::InvalidArgument(format!(
                    "row {i}: entry {} not before exit {}",
                    entry[i], exit[i]
                )));
            }
            if delta[i] != 0.0 && delta[i] != 1.0 {
                return Err(Error::InvalidArgument(format!("row {i}: indicator {} not 0/1", delta[i])));
            }
        }
        let mut entries = entry.to_vec();
        let mut exits = exit.to_vec();
        entries.sort_by(f64::total_cmp);
        exits.sort_by(f64::total_cmp);
        let mut event_times: Vec<f64> = (0..n).filter(|&i| delta[i] == 1.0).map(|i| exit[i]).collect();
        event_times.sort_by(f64::total_cmp);

        let mut h = CumulativeHazard {
            times: Vec::new(),
            values: Vec::new(),
            at_risk: Vec::new(),
            events: Vec::new(),
        };
        let mut cum = 0.0;
        let mut i = 0;
        while i < event_times.len() {
            let s = event_times[i];
            let mut j = i;
            while j < event_times.len() && event_times[j] == s {
                j += 1;
            }
            let d = j - i;
            let r = entries.partition_point(|&e| e < s) - exits.partition_point(|&x| x < s);
            cum += d as f64 / r as f64;
            h.times.push(s);
            h.values.push(cum);
            h.at_risk.push(r);
            h.events.push(d);
            i = j;
        }
        Ok(h)
    }

    pub fn at(&self, t: f64) -> f64 {
        match self.times.partition_point(|&s| s <= t) {
            0 => 0.0,
            k => self.values[k - 1],
        }
    }
}

/// Per-row cumulative hazard accrued while under observation,
/// `H(exit) - H(entry)`.
pub fn nelson_aalen(entry: &[f64], exit: &[f64], delta: &[f64]) -> Result<Vec<f64>> {
    let h = CumulativeHazard::estimate(entry, exit, delta)?;
    Ok(entry.iter().zip(exit).map(|(&e, &x)| h.at(x) - h.at(e)).collect())
}
