//! Block-diagonal beam-slicing transform.
//!
//! The array is partitioned into `C = B/S` clusters of `S` adjacent antennas.
//! Each cluster applies the unitary `S`-point DFT preceded by a per-antenna
//! progressive phase that advances with the cluster index, so the `C` cluster
//! responses tile the spatial frequency axis like a critically decimated
//! filter bank: cluster `c` (zero-indexed) steers its beams to the spatial
//! frequencies `(c + k C)/B`, `k = 0..S-1`. `S = 1` is the identity
//! (antenna domain) and `S = B` the conventional full-array DFT beamspace.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::{CMat, CVec};

/// Unitary `n`-point DFT matrix, entry `(k, l) = exp(-i 2 pi k l / n) / sqrt(n)`.
pub fn unitary_dft(n: usize) -> CMat {
    assert!(n >= 1, "DFT size must be positive");
    let scale = 1.0 / (n as f64).sqrt();
    CMat::from_fn(n, n, |k, l| {
        let t = (k * l) % n; // reduce before the trig call for accuracy
        Complex64::from_polar(scale, -2.0 * PI * t as f64 / n as f64)
    })
}

/// The beam-slicing operator: `B/S` unitary blocks on disjoint antenna groups.
#[derive(Debug, Clone)]
pub struct BeamSlicer {
    antennas: usize,
    cluster_size: usize,
    blocks: Vec<CMat>,
}

impl BeamSlicer {
    /// Build the slicer for `antennas` elements in clusters of `cluster_size`.
    ///
    /// Block `c` is the unitary DFT right-multiplied by
    /// `diag(exp(-i 2 pi c s / B))`, `s = 0..S-1`, which offsets the beam grid
    /// of cluster `c` by `c/B` in spatial frequency.
    pub fn new(antennas: usize, cluster_size: usize) -> Result<Self> {
        if antennas == 0 || cluster_size == 0 || !antennas.is_multiple_of(cluster_size) {
            return Err(SimError::ClusterMismatch {
                antennas,
                cluster_size,
            });
        }
        let dft = unitary_dft(cluster_size);
        let clusters = antennas / cluster_size;
        let blocks = (0..clusters)
            .map(|c| {
                let mut block = dft.clone();
                for s in 0..cluster_size {
                    // c s <= (C-1)(S-1) < B, so no argument reduction needed.
                    let phase =
                        Complex64::from_polar(1.0, -2.0 * PI * (c * s) as f64 / antennas as f64);
                    for k in 0..cluster_size {
                        block[(k, s)] *= phase;
                    }
                }
                block
            })
            .collect();
        Ok(BeamSlicer {
            antennas,
            cluster_size,
            blocks,
        })
    }

    /// Number of antennas `B`.
    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Cluster size `S`.
    pub fn cluster_size(&self) -> usize {
        self.cluster_size
    }

    /// Number of clusters `C = B/S`.
    pub fn clusters(&self) -> usize {
        self.blocks.len()
    }

    /// The unitary `S x S` block of one cluster.
    pub fn block(&self, cluster: usize) -> &CMat {
        &self.blocks[cluster]
    }

    /// Apply the transform to a `B x n` block of received columns.
    pub fn apply(&self, y: &CMat) -> Result<CMat> {
        if y.nrows() != self.antennas {
            return Err(SimError::DimensionMismatch(format!(
                "slicer built for {} antennas, input has {} rows",
                self.antennas,
                y.nrows()
            )));
        }
        let s = self.cluster_size;
        if s == 1 {
            return Ok(y.clone()); // identity; blocks are all the 1x1 matrix [1]
        }
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let mut out = CMat::zeros(y.nrows(), y.ncols());
        for (c, block) in self.blocks.iter().enumerate() {
            let chunk = y.rows(c * s, s).into_owned();
            out.rows_mut(c * s, s).gemm(one, block, &chunk, zero);
        }
        Ok(out)
    }

    /// Apply the transform to a single length-`B` column.
    pub fn apply_vector(&self, y: &CVec) -> Result<CVec> {
        let m = CMat::from_column_slice(y.len(), 1, y.as_slice());
        Ok(CVec::from_column_slice(self.apply(&m)?.as_slice()))
    }

    /// Materialize the full `B x B` block-diagonal matrix (tests and tools).
    pub fn to_dense(&self) -> CMat {
        let s = self.cluster_size;
        let mut v = CMat::zeros(self.antennas, self.antennas);
        for (c, block) in self.blocks.iter().enumerate() {
            v.view_mut((c * s, c * s), (s, s)).copy_from(block);
        }
        v
    }
}
