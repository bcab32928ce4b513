use alloc::vec::Vec;

use bitvec::prelude::*;

use crate::error::{check_len, Result};

/// Binary spike trains, one row per neuron and one column per timestep.
#[derive(Clone, PartialEq, Eq)]
pub struct SpikeRaster {
    rows: usize,
    steps: usize,
    /// Timestep in seconds, stored as bits so the raster stays `Eq`.
    dt_bits: u64,
    bits: BitVec<u64, Lsb0>,
}

impl core::fmt::Debug for SpikeRaster {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SpikeRaster")
            .field("rows", &self.rows)
            .field("steps", &self.steps)
            .field("dt", &self.dt())
            .field("spikes", &self.bits.count_ones())
            .finish()
    }
}

impl SpikeRaster {
    pub fn zeros(rows: usize, steps: usize, dt: f64) -> Self {
        Self {
            rows,
            steps,
            dt_bits: dt.to_bits(),
            bits: bitvec![u64, Lsb0; 0; rows * steps],
        }
    }

    /// Builds a raster from per-row spike step indices.
    pub fn from_spike_steps(steps: usize, dt: f64, rows: &[Vec<usize>]) -> Result<Self> {
        let mut r = Self::zeros(rows.len(), steps, dt);
        for (i, row) in rows.iter().enumerate() {
            for &t in row {
                if t >= steps {
                    return Err(crate::SimError::Dimension {
                        what: "spike step index",
                        expected: steps,
                        found: t,
                    });
                }
                r.set(i, t, true);
            }
        }
        Ok(r)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        f64::from_bits(self.dt_bits)
    }

    #[inline]
    pub fn get(&self, row: usize, t: usize) -> bool {
        self.bits[row * self.steps + t]
    }

    pub fn set(&mut self, row: usize, t: usize, on: bool) {
        self.bits.set(row * self.steps + t, on);
    }

    /// Writes the spikes of timestep `t` into `out`.
    #[inline]
    pub fn column_into(&self, t: usize, out: &mut [bool]) {
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.bits[r * self.steps + t];
        }
    }

    pub fn row_bits(&self, row: usize) -> &BitSlice<u64, Lsb0> {
        &self.bits[row * self.steps..(row + 1) * self.steps]
    }

    /// Step indices of the spikes in `row`, ascending.
    pub fn spike_steps(&self, row: usize) -> impl Iterator<Item = usize> + '_ {
        self.row_bits(row).iter_ones()
    }

    pub fn row_count(&self, row: usize) -> usize {
        self.row_bits(row).count_ones()
    }

    pub fn total_spikes(&self) -> usize {
        self.bits.count_ones()
    }

    /// Mean spikes per step of each row.
    pub fn rates_per_step(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row_count(r) as f64 / self.steps as f64)
            .collect()
    }

    /// Empirical rate of each row in Hz.
    pub fn rates_hz(&self) -> Vec<f64> {
        let dt = self.dt();
        self.rates_per_step().into_iter().map(|r| r / dt).collect()
    }

    /// Appends the columns of `other` after the last step of `self`.
    pub fn concat_time(&self, other: &SpikeRaster) -> Result<SpikeRaster> {
        check_len("raster rows", self.rows, other.rows)?;
        let steps = self.steps + other.steps;
        let mut out = SpikeRaster::zeros(self.rows, steps, self.dt());
        for r in 0..self.rows {
            for t in self.spike_steps(r) {
                out.set(r, t, true);
            }
            for t in other.spike_steps(r) {
                out.set(r, self.steps + t, true);
            }
        }
        Ok(out)
    }
}
