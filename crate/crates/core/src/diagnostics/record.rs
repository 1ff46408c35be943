use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{atomic_write, fmt_f64};

/// CSV header of a trajectory file.
pub const CSV_HEADER: &str = "t,gap,dist,lambda_min,martingale_E,exited";

/// Time series of one trajectory on its record grid.
///
/// `lambda_min` is NaN on rows where the NTK spectrum was not evaluated.
/// `tau` is `+∞` when the trajectory never left the lazy ball.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub gap: Vec<f64>,
    pub dist: Vec<f64>,
    pub lambda_min: Vec<f64>,
    pub martingale_e: Vec<f64>,
    pub exited: bool,
    pub tau: f64,
}

impl TrajectoryRecord {
    pub fn new() -> Self {
        Self {
            tau: f64::INFINITY,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, gap: f64, dist: f64, lambda_min: f64, martingale_e: f64) {
        self.times.push(t);
        self.gap.push(gap);
        self.dist.push(dist);
        self.lambda_min.push(lambda_min);
        self.martingale_e.push(martingale_e);
    }

    /// Marks the first exit; later calls keep the earliest time.
    pub fn mark_exit(&mut self, t: f64) {
        if !self.exited {
            self.exited = true;
            self.tau = t;
        }
    }

    /// Row flag of the `exited` column: whether the ball was left at or before
    /// the row's time.
    pub fn exited_at(&self, row: usize) -> bool {
        self.exited && self.times[row] >= self.tau
    }

    pub fn check(&self) -> Result<()> {
        let n = self.times.len();
        for (name, len) in [
            ("gap", self.gap.len()),
            ("dist", self.dist.len()),
            ("lambda_min", self.lambda_min.len()),
            ("martingale_E", self.martingale_e.len()),
        ] {
            if len != n {
                return Err(Error::InvalidArgument(format!(
                    "record column {name} has {len} rows, expected {n}"
                )));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for i in 0..self.len() {
            let fields = [
                fmt_f64(self.times[i]),
                fmt_f64(self.gap[i]),
                fmt_f64(self.dist[i]),
                fmt_f64(self.lambda_min[i]),
                fmt_f64(self.martingale_e[i]),
                (self.exited_at(i) as u8).to_string(),
            ];
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.check()?;
        atomic_write(path, self.to_csv().as_bytes())
    }

    /// Parses the CSV written by [`to_csv`](Self::to_csv). `tau` is recovered
    /// as the first row flagged as exited.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == CSV_HEADER => {}
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unexpected trajectory header {other:?}"
                )))
            }
        }
        let mut rec = Self::new();
        for (k, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(Error::InvalidArgument(format!(
                    "row {k}: expected 6 fields, got {}",
                    cols.len()
                )));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("row {k}: {e}")))
            };
            let t = num(cols[0])?;
            rec.push(t, num(cols[1])?, num(cols[2])?, num(cols[3])?, num(cols[4])?);
            if cols[5] == "1" {
                rec.mark_exit(t);
            }
        }
        Ok(rec)
    }

    pub fn final_gap(&self) -> Option<f64> {
        self.gap.last().copied()
    }

    pub fn final_dist(&self) -> Option<f64> {
        self.dist.last().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TrajectoryRecord {
        let mut r = TrajectoryRecord::new();
        r.push(0.0, 1.0, 0.0, 0.25, 1.0);
        r.push(0.1, 0.9, 0.4, f64::NAN, 1.1);
        r.push(0.2, 1.0 / 3.0, 0.6, 0.2, 0.95);
        r.mark_exit(0.2);
        r
    }

    #[test]
    fn csv_layout() {
        let csv = sample().to_csv();
        let lines: Vec<_> = csv.split('\n').collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[4], "");
        assert!(lines[1].ends_with(",0"));
        assert!(lines[3].ends_with(",1"));
        assert!(!csv.contains('\r'));
        assert!(lines[2].contains("NaN"));
    }

    #[test]
    fn csv_round_trip() {
        let a = sample();
        let b = TrajectoryRecord::from_csv(&a.to_csv()).unwrap();
        assert_eq!(b.times, a.times);
        assert_eq!(b.gap, a.gap);
        assert!(b.lambda_min[1].is_nan());
        assert_eq!(b.tau, 0.2);
        assert!(b.exited);
    }

    #[test]
    fn first_exit_wins() {
        let mut r = TrajectoryRecord::new();
        assert_eq!(r.tau, f64::INFINITY);
        r.mark_exit(2.0);
        r.mark_exit(1.0);
        assert_eq!(r.tau, 2.0);
    }

    #[test]
    fn bad_header() {
        assert!(TrajectoryRecord::from_csv("a,b\n").is_err());
    }
}
