//! Uniformly sampled end-effector trajectories and their `t,x,y,z` CSV form.

use std::io::{Read, Write};

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// A uniformly time-stepped sequence of 3D positions (meters, seconds).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dt: f64,
    points: Vec<Vec3>,
}

impl Trajectory {
    pub fn new(dt: f64, points: Vec<Vec3>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        if points.is_empty() {
            return Err(Error::Empty("trajectory points"));
        }
        Ok(Self { dt, points })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Time span from the first to the last sample.
    pub fn duration(&self) -> f64 {
        (self.points.len() - 1) as f64 * self.dt
    }

    pub fn mean(&self) -> Vec3 {
        self.points.iter().sum::<Vec3>() / self.points.len() as f64
    }

    pub fn translated(&self, offset: &Vec3) -> Self {
        Self {
            dt: self.dt,
            points: self.points.iter().map(|p| p + offset).collect(),
        }
    }

    /// Linear interpolation at time `t`, clamped to the trajectory span.
    pub fn sample_at(&self, t: f64) -> Vec3 {
        let s = (t / self.dt).max(0.0);
        let i = s.floor() as usize;
        if i + 1 >= self.points.len() {
            return *self.points.last().expect("non-empty");
        }
        let frac = s - i as f64;
        self.points[i] * (1.0 - frac) + self.points[i + 1] * frac
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "x", "y", "z"])?;
        for (i, p) in self.points.iter().enumerate() {
            w.write_record([fmt_num(i as f64 * self.dt), fmt_num(p.x), fmt_num(p.y), fmt_num(p.z)])?;
        }
        w.flush().map_err(|e| Error::io("<trajectory csv>", e))?;
        Ok(())
    }

    /// Reads a `t,x,y,z` CSV. The time step is taken from the first two rows
    /// and every later row must keep it.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "x", "y", "z"] {
            return Err(Error::Parse {
                what: "trajectory csv",
                reason: format!(
                    "expected header t,x,y,z, got {}",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut times = Vec::new();
        let mut points = Vec::new();
        for row in r.records() {
            let row = row?;
            let vals = parse_row(&row, 4, "trajectory csv")?;
            times.push(vals[0]);
            points.push(Vec3::new(vals[1], vals[2], vals[3]));
        }
        let dt = match times.len() {
            0 => return Err(Error::Empty("trajectory csv")),
            1 => 1.0,
            _ => times[1] - times[0],
        };
        for (i, t) in times.iter().enumerate() {
            if (t - i as f64 * dt).abs() > 1e-6 * dt.max(1.0) {
                return Err(Error::Parse {
                    what: "trajectory csv",
                    reason: format!("row {i} breaks the uniform time step"),
                });
            }
        }
        Self::new(dt, points)
    }
}

pub(crate) fn parse_row(row: &csv::StringRecord, expected: usize, what: &'static str) -> Result<Vec<f64>> {
    if row.len() != expected {
        return Err(Error::Parse {
            what,
            reason: format!("expected {expected} columns, got {}", row.len()),
        });
    }
    row.iter()
        .map(|s| {
            s.trim().parse::<f64>().map_err(|e| Error::Parse {
                what,
                reason: format!("`{s}`: {e}"),
            })
        })
        .collect()
}

/// Shortest decimal text that round-trips the value.
pub(crate) fn fmt_num(v: f64) -> String {
    format!("{v}")
}
