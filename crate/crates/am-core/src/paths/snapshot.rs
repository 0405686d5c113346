//! File-backed snapshot datasets and their interpolating path.
//!
//! CSV contract: UTF-8, header `t,x0,...,x{d-1}`, one point per row,
//! decimal-point floats, no missing cells. Timestamps are rescaled
//! affinely to `[0,1]` on load.
//!
//! Between consecutive snapshots the path fills in samples per the
//! smoothing mode: `Blend` (default) draws one point from each neighboring
//! snapshot and interpolates linearly; `Hold` resamples one of the two
//! snapshots with the complementary Bernoulli weights (piecewise-constant
//! ablation). At exact snapshot times both modes resample that snapshot.

use std::io::BufRead;

use rand::{Rng, RngCore};

use super::{MarginalPath, PathError};

#[derive(Debug, Clone)]
pub struct SnapshotDataset {
    /// Rescaled timestamps in `[0,1]`, strictly increasing.
    pub timestamps: Vec<f64>,
    /// Original timestamps as read from the file.
    pub raw_timestamps: Vec<f64>,
    /// Per-timestamp point sets, flattened `n_k × dim`.
    pub points: Vec<Vec<f64>>,
    pub dim: usize,
}

impl SnapshotDataset {
    pub fn new(raw_timestamps: Vec<f64>, points: Vec<Vec<f64>>, dim: usize) -> Result<Self, PathError> {
        if raw_timestamps.len() < 2 {
            return Err(PathError::AtLeastTwoTimestamps);
        }
        let lo = raw_timestamps[0];
        let hi = *raw_timestamps.last().unwrap();
        let span = hi - lo;
        let timestamps = raw_timestamps.iter().map(|t| (t - lo) / span).collect();
        Ok(SnapshotDataset { timestamps, raw_timestamps, points, dim })
    }

    pub fn n_snapshots(&self) -> usize {
        self.timestamps.len()
    }
}

/// Parses the snapshot CSV contract.
pub fn load_snapshots(reader: impl BufRead) -> Result<SnapshotDataset, PathError> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| PathError::Io(e.to_string()))?,
        None => return Err(PathError::MissingHeader),
    };
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    if cols.len() < 2 || cols[0] != "t" {
        return Err(PathError::BadHeader(header.clone()));
    }
    let dim = cols.len() - 1;
    for (k, col) in cols.iter().skip(1).enumerate() {
        if *col != format!("x{k}") {
            return Err(PathError::BadHeader(header.clone()));
        }
    }

    // Group rows by exact timestamp value, preserving first-seen order,
    // then sort groups by time.
    let mut groups: Vec<(f64, Vec<f64>)> = Vec::new();
    for (idx, line) in lines.enumerate() {
        let row = idx + 2; // 1-based, after header
        let line = line.map_err(|e| PathError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.trim_end().split(',').collect();
        if cells.len() != dim + 1 {
            return Err(PathError::RaggedRow { row, expected: dim + 1, got: cells.len() });
        }
        let mut vals = Vec::with_capacity(dim + 1);
        for cell in &cells {
            let v: f64 = cell.trim().parse().map_err(|_| PathError::NonNumericCell {
                row,
                cell: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(PathError::NonFiniteValue { row });
            }
            vals.push(v);
        }
        let t = vals[0];
        match groups.iter_mut().find(|(gt, _)| *gt == t) {
            Some((_, pts)) => pts.extend_from_slice(&vals[1..]),
            None => groups.push((t, vals[1..].to_vec())),
        }
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    let raw_timestamps: Vec<f64> = groups.iter().map(|(t, _)| *t).collect();
    let points: Vec<Vec<f64>> = groups.into_iter().map(|(_, p)| p).collect();
    SnapshotDataset::new(raw_timestamps, points, dim)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Smoothing {
    /// Linear blend of one draw from each neighboring snapshot.
    #[default]
    Blend,
    /// Bernoulli resampling of one of the two neighboring snapshots.
    Hold,
}

impl Smoothing {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "blend" => Some(Smoothing::Blend),
            "hold" => Some(Smoothing::Hold),
            _ => None,
        }
    }
}

pub struct SnapshotPath {
    dataset: SnapshotDataset,
    smoothing: Smoothing,
}

pub fn snapshot_path(dataset: SnapshotDataset, smoothing: Smoothing) -> SnapshotPath {
    SnapshotPath { dataset, smoothing }
}

impl SnapshotPath {
    fn resample(&self, k: usize, rng: &mut dyn RngCore, out: &mut [f64]) {
        let d = self.dataset.dim;
        let pts = &self.dataset.points[k];
        let n = pts.len() / d;
        let i = rng.random_range(0..n);
        out.copy_from_slice(&pts[i * d..(i + 1) * d]);
    }
}

impl MarginalPath for SnapshotPath {
    fn dim(&self) -> usize {
        self.dataset.dim
    }

    fn sample_into(
        &self,
        t: f64,
        rng: &mut dyn RngCore,
        out: &mut [f64],
    ) -> Result<(), PathError> {
        let ts = &self.dataset.timestamps;
        let (lo, hi) = (ts[0], *ts.last().unwrap());
        if t < lo || t > hi {
            return Err(PathError::TimeOutOfRange { t, lo, hi });
        }
        // Exact hit ⇒ plain resampling of that snapshot.
        if let Some(k) = ts.iter().position(|&tk| tk == t) {
            self.resample(k, rng, out);
            return Ok(());
        }
        let k = ts.partition_point(|&tk| tk < t) - 1;
        let lambda = (t - ts[k]) / (ts[k + 1] - ts[k]);
        match self.smoothing {
            Smoothing::Blend => {
                let d = self.dataset.dim;
                let mut a = vec![0.0; d];
                let mut b = vec![0.0; d];
                self.resample(k, rng, &mut a);
                self.resample(k + 1, rng, &mut b);
                for i in 0..d {
                    out[i] = (1.0 - lambda) * a[i] + lambda * b[i];
                }
            }
            Smoothing::Hold => {
                let pick_next = rng.random::<f64>() < lambda;
                self.resample(if pick_next { k + 1 } else { k }, rng, out);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use std::io::Cursor;

    fn two_singletons() -> SnapshotDataset {
        SnapshotDataset::new(vec![0.0, 1.0], vec![vec![0.0], vec![1.0]], 1).unwrap()
    }

    #[test]
    fn loads_and_rescales() {
        let csv = "t,x0,x1\n2,0.1,0.2\n2,0.3,0.4\n6,1.0,1.1\n6,1.2,1.3\n";
        let ds = load_snapshots(Cursor::new(csv)).unwrap();
        assert_eq!(ds.n_snapshots(), 2);
        assert_eq!(ds.dim, 2);
        assert_eq!(ds.raw_timestamps, vec![2.0, 6.0]);
        assert_eq!(ds.timestamps, vec![0.0, 1.0]);
        assert_eq!(ds.points[0], vec![0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn loader_errors() {
        assert!(matches!(load_snapshots(Cursor::new("")), Err(PathError::MissingHeader)));
        assert!(matches!(
            load_snapshots(Cursor::new("time,x0\n0,1\n1,2\n")),
            Err(PathError::BadHeader(_))
        ));
        assert!(matches!(
            load_snapshots(Cursor::new("t,x0\n0,1,9\n")),
            Err(PathError::RaggedRow { row: 2, .. })
        ));
        let err = load_snapshots(Cursor::new("t,x0\n0,1\n1,oops\n")).unwrap_err();
        assert!(matches!(err, PathError::NonNumericCell { row: 3, .. }));
        assert!(matches!(
            load_snapshots(Cursor::new("t,x0\n0,1\n0,2\n")),
            Err(PathError::AtLeastTwoTimestamps)
        ));
    }

    #[test]
    fn exact_snapshot_times_resample_that_snapshot() {
        let path = snapshot_path(two_singletons(), Smoothing::Blend);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut x = [f64::NAN];
        path.sample_into(0.0, &mut rng, &mut x).unwrap();
        assert_eq!(x[0], 0.0);
        path.sample_into(1.0, &mut rng, &mut x).unwrap();
        assert_eq!(x[0], 1.0);
    }

    #[test]
    fn blend_of_singletons_is_deterministic() {
        let path = snapshot_path(two_singletons(), Smoothing::Blend);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut x = [f64::NAN];
        path.sample_into(0.5, &mut rng, &mut x).unwrap();
        assert_eq!(x[0], 0.5);
    }

    #[test]
    fn hold_mode_matches_binomial_mean() {
        // Singletons {0}, {1}: mean of sample(0.25) is Bernoulli(0.25).
        let path = snapshot_path(two_singletons(), Smoothing::Hold);
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let n = 100_000;
        let samples = path.sample(0.25, n, &mut rng).unwrap();
        let mean: f64 = samples.iter().sum::<f64>() / n as f64;
        let sigma = (0.25_f64 * 0.75 / n as f64).sqrt();
        assert!((mean - 0.25).abs() < 3.0 * sigma, "mean={mean}");
    }

    #[test]
    fn out_of_range_time_rejected() {
        let path = snapshot_path(two_singletons(), Smoothing::Blend);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut x = [0.0];
        assert!(matches!(
            path.sample_into(1.5, &mut rng, &mut x),
            Err(PathError::TimeOutOfRange { .. })
        ));
    }
}
