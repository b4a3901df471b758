//! Per-frame keypoint observations and their `t,k0x,k0y,...` CSV form.

use std::io::{Read, Write};

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::trajectory::{fmt_num, parse_row};

pub type Vec2 = Vector2<f64>;
pub type KeypointFrame = Vec<Vec2>;

/// A video abstracted to `n_keypoints` normalized image-plane points per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointVideo {
    dt: f64,
    n_keypoints: usize,
    frames: Vec<KeypointFrame>,
}

impl KeypointVideo {
    pub fn new(dt: f64, frames: Vec<KeypointFrame>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        let n_keypoints = frames.first().map(|f| f.len()).unwrap_or(0);
        if let Some(bad) = frames.iter().find(|f| f.len() != n_keypoints) {
            return Err(Error::KeypointCountMismatch {
                left: n_keypoints,
                right: bad.len(),
            });
        }
        Ok(Self {
            dt,
            n_keypoints,
            frames,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_keypoints(&self) -> usize {
        self.n_keypoints
    }

    pub fn frames(&self) -> &[KeypointFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frames `[start, end)` as a new video.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            dt: self.dt,
            n_keypoints: self.n_keypoints,
            frames: self.frames[start..end].to_vec(),
        }
    }

    pub fn map_frames(&self, f: impl FnMut(&KeypointFrame) -> KeypointFrame) -> Result<Self> {
        Self::new(self.dt, self.frames.iter().map(f).collect())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        for k in 0..self.n_keypoints {
            header.push(format!("k{k}x"));
            header.push(format!("k{k}y"));
        }
        w.write_record(&header)?;
        for (i, frame) in self.frames.iter().enumerate() {
            let mut row = vec![fmt_num(i as f64 * self.dt)];
            for p in frame {
                row.push(fmt_num(p.x));
                row.push(fmt_num(p.y));
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<keypoint csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let cols = headers.len();
        if cols < 1 || (cols - 1) % 2 != 0 || &headers[0] != "t" {
            return Err(Error::Parse {
                what: "keypoint csv",
                reason: "expected header t,k0x,k0y,...".into(),
            });
        }
        let mut times = Vec::new();
        let mut frames = Vec::new();
        for row in r.records() {
            let vals = parse_row(&row?, cols, "keypoint csv")?;
            times.push(vals[0]);
            frames.push(vals[1..].chunks(2).map(|c| Vec2::new(c[0], c[1])).collect());
        }
        let dt = if times.len() >= 2 { times[1] - times[0] } else { 1.0 };
        Self::new(dt, frames)
    }
}
