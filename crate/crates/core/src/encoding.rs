//! Poisson rate coding and the two classification datasets.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SimError};
use crate::raster::SpikeRaster;

/// Independent Bernoulli spikes with per-step probability `rate * dt`.
pub fn poisson_encode(rates: &[f64], steps: usize, dt: f64, seed: u64) -> Result<SpikeRaster> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    poisson_encode_with(rates, steps, dt, &mut rng)
}

pub fn poisson_encode_with<R: Rng + ?Sized>(
    rates: &[f64],
    steps: usize,
    dt: f64,
    rng: &mut R,
) -> Result<SpikeRaster> {
    let probs = rates
        .iter()
        .map(|&r| spike_probability(r, dt))
        .collect::<Result<Vec<_>>>()?;
    let mut raster = SpikeRaster::zeros(rates.len(), steps, dt);
    for (row, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for t in 0..steps {
            if rng.random::<f64>() < p {
                raster.set(row, t, true);
            }
        }
    }
    Ok(raster)
}

fn spike_probability(rate: f64, dt: f64) -> Result<f64> {
    let p = rate * dt;
    if !(p.is_finite() && rate >= 0.0) || p > 1.0 + 1e-12 {
        return Err(SimError::EncodingSaturation { rate, dt });
    }
    Ok(p.min(1.0))
}

/// How class predictions are read from output rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decode {
    /// Softmax over output rates in Hz, one output neuron per class.
    Softmax,
    /// Scores are negative L1 distances (Hz) between the output rates and
    /// each class's target rates. Used when outputs do not map one-to-one
    /// onto classes, as in the single-neuron binary task.
    NearestTarget,
}

/// Target firing rates (Hz) of every class and the decoding rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTargets {
    pub rates_hz: Vec<Vec<f64>>,
    pub decode: Decode,
}

impl ClassTargets {
    pub fn n_classes(&self) -> usize {
        self.rates_hz.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.rates_hz.first().map_or(0, Vec::len)
    }

    /// One output per class; `f1` on the correct class and `f0` elsewhere.
    pub fn one_hot(n: usize, f1: f64, f0: f64) -> Self {
        let rates_hz = (0..n)
            .map(|c| (0..n).map(|i| if i == c { f1 } else { f0 }).collect())
            .collect();
        Self {
            rates_hz,
            decode: Decode::Softmax,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub input: SpikeRaster,
    pub target: SpikeRaster,
    pub label: usize,
    pub input_rates: Vec<f64>,
    pub target_rates: Vec<f64>,
}

impl LabeledSample {
    pub fn encode<R: Rng + ?Sized>(
        input_rates: Vec<f64>,
        target_rates: Vec<f64>,
        label: usize,
        steps: usize,
        dt: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let input = poisson_encode_with(&input_rates, steps, dt, rng)?;
        let target = poisson_encode_with(&target_rates, steps, dt, rng)?;
        Ok(Self {
            input,
            target,
            label,
            input_rates,
            target_rates,
        })
    }

    pub fn steps(&self) -> usize {
        self.input.steps()
    }

    /// Fresh Poisson draws for the same rates and label.
    pub fn redraw(&self, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::encode(
            self.input_rates.clone(),
            self.target_rates.clone(),
            self.label,
            self.steps(),
            self.input.dt(),
            &mut rng,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self {
            train: 5000,
            val: 1000,
            test: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<LabeledSample>,
    pub val: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
    pub targets: ClassTargets,
}

impl Dataset {
    pub fn n_inputs(&self) -> usize {
        self.train
            .first()
            .or(self.val.first())
            .or(self.test.first())
            .map_or(0, |s| s.input.rows())
    }

    pub fn n_outputs(&self) -> usize {
        self.targets.n_outputs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Split {
    Train = 1,
    Val = 2,
    Test = 3,
    Points = 4,
}

/// Each (split, sample) pair draws from its own ChaCha stream so samples can
/// be generated independently of one another.
fn sample_rng(seed: u64, split: Split, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((split as u64) << 48) | index as u64);
    rng
}

/// Two inputs A and B, one output neuron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryTask {
    /// Rate of the dominant input (Hz).
    pub rate_high: f64,
    /// Rate of the other input (Hz).
    pub rate_low: f64,
    /// High target rate (Hz).
    pub f1: f64,
    /// Low target rate (Hz).
    pub f0: f64,
    /// Class whose target is `f1`; the other class gets `f0`.
    pub high_class: usize,
}

impl Default for BinaryTask {
    fn default() -> Self {
        Self {
            rate_high: 100.0,
            rate_low: 50.0,
            f1: 100.0,
            f0: 20.0,
            high_class: 0,
        }
    }
}

impl BinaryTask {
    /// Class 0 has input A dominant, class 1 has input B dominant.
    pub fn input_rates(&self, label: usize) -> Vec<f64> {
        if label == 0 {
            vec![self.rate_high, self.rate_low]
        } else {
            vec![self.rate_low, self.rate_high]
        }
    }

    pub fn class_targets(&self) -> ClassTargets {
        let rates_hz = (0..2)
            .map(|c| vec![if c == self.high_class { self.f1 } else { self.f0 }])
            .collect();
        ClassTargets {
            rates_hz,
            decode: Decode::NearestTarget,
        }
    }
}

/// Balanced binary dataset; labels alternate 0, 1, 0, ... within each split.
pub fn gen_binary_dataset(
    task: &BinaryTask,
    sizes: SplitSizes,
    steps: usize,
    dt: f64,
    seed: u64,
) -> Result<Dataset> {
    if sizes.train == 0 || sizes.val == 0 || sizes.test == 0 {
        return Err(SimError::InvalidParams("split sizes must be at least 1".into()));
    }
    let targets = task.class_targets();
    let split = |which: Split, count: usize| -> Result<Vec<LabeledSample>> {
        (0..count)
            .map(|i| {
                let label = i % 2;
                let mut rng = sample_rng(seed, which, i);
                LabeledSample::encode(
                    task.input_rates(label),
                    targets.rates_hz[label].clone(),
                    label,
                    steps,
                    dt,
                    &mut rng,
                )
            })
            .collect()
    };
    Ok(Dataset {
        train: split(Split::Train, sizes.train)?,
        val: split(Split::Val, sizes.val)?,
        test: split(Split::Test, sizes.test)?,
        targets,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum YinYangClass {
    Yin = 0,
    Yang = 1,
    Dot = 2,
}

impl YinYangClass {
    pub const ALL: [YinYangClass; 3] = [Self::Yin, Self::Yang, Self::Dot];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YinYangPoint {
    pub x: f64,
    pub y: f64,
    pub class: YinYangClass,
}

const R_BIG: f64 = 0.5;
const R_SMALL: f64 = 0.1;

fn dist(x: f64, y: f64, cx: f64, cy: f64) -> f64 {
    libm::hypot(x - cx, y - cy)
}

/// Class of a point inside the symbol disc.
///
/// The disc has radius 0.5 around (0.5, 0.5). The dots are discs of radius
/// 0.1 around (0.25, 0.5) and (0.75, 0.5). Yin is the upper half outside the
/// right lobe (radius 0.25 around (0.75, 0.5)) together with the left lobe.
pub fn yinyang_class(x: f64, y: f64) -> YinYangClass {
    let d_right = dist(x, y, 1.5 * R_BIG, R_BIG);
    let d_left = dist(x, y, 0.5 * R_BIG, R_BIG);
    if d_right < R_SMALL || d_left < R_SMALL {
        return YinYangClass::Dot;
    }
    let left_lobe = d_left > R_SMALL && d_left <= 0.5 * R_BIG;
    let upper = y > R_BIG && d_right > 0.5 * R_BIG;
    if d_right <= R_SMALL || left_lobe || upper {
        YinYangClass::Yin
    } else {
        YinYangClass::Yang
    }
}

pub fn in_symbol_disc(x: f64, y: f64) -> bool {
    dist(x, y, R_BIG, R_BIG) <= R_BIG
}

/// Uniform points in the symbol disc, exactly balanced across classes (up to
/// one when `count` is not a multiple of three), in shuffled order.
pub fn gen_yinyang_points(count: usize, seed: u64) -> Result<Vec<YinYangPoint>> {
    if count == 0 {
        return Err(SimError::InvalidParams("count must be at least 1".into()));
    }
    let mut rng = sample_rng(seed, Split::Points, 0);
    let mut points = Vec::with_capacity(count);
    for i in 0..count {
        let goal = YinYangClass::ALL[i % 3];
        loop {
            let x = rng.random::<f64>() * 2.0 * R_BIG;
            let y = rng.random::<f64>() * 2.0 * R_BIG;
            if !in_symbol_disc(x, y) {
                continue;
            }
            let class = yinyang_class(x, y);
            if class == goal {
                points.push(YinYangPoint { x, y, class });
                break;
            }
        }
    }
    points.shuffle(&mut rng);
    Ok(points)
}

/// Rate mapping for the spiking Yin-Yang task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YinYangTask {
    pub f_min: f64,
    pub f_max: f64,
    pub f1: f64,
    pub f0: f64,
}

impl Default for YinYangTask {
    fn default() -> Self {
        Self {
            f_min: 10.0,
            f_max: 100.0,
            f1: 20.0,
            f0: 2.0,
        }
    }
}

impl YinYangTask {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_min < self.f_max) || !(self.f0 < self.f1) {
            return Err(SimError::InvalidParams(
                "yin-yang rates need f_min < f_max and f0 < f1".into(),
            ));
        }
        Ok(())
    }

    /// Linear map of (x, y, 1 - x, 1 - y) onto [f_min, f_max].
    pub fn input_rates(&self, p: &YinYangPoint) -> Vec<f64> {
        let span = self.f_max - self.f_min;
        [p.x, p.y, 1.0 - p.x, 1.0 - p.y]
            .iter()
            .map(|c| self.f_min + c * span)
            .collect()
    }

    pub fn class_targets(&self) -> ClassTargets {
        ClassTargets::one_hot(3, self.f1, self.f0)
    }
}

pub fn encode_yinyang_sample<R: Rng + ?Sized>(
    point: &YinYangPoint,
    task: &YinYangTask,
    steps: usize,
    dt: f64,
    rng: &mut R,
) -> Result<LabeledSample> {
    task.validate()?;
    let label = point.class.index();
    LabeledSample::encode(
        task.input_rates(point),
        task.class_targets().rates_hz[label].clone(),
        label,
        steps,
        dt,
        rng,
    )
}

pub fn gen_yinyang_dataset(
    task: &YinYangTask,
    sizes: SplitSizes,
    steps: usize,
    dt: f64,
    seed: u64,
) -> Result<Dataset> {
    task.validate()?;
    let split = |which: Split, count: usize| -> Result<Vec<LabeledSample>> {
        let point_seed = seed ^ ((which as u64) << 56);
        gen_yinyang_points(count, point_seed)?
            .iter()
            .enumerate()
            .map(|(i, p)| encode_yinyang_sample(p, task, steps, dt, &mut sample_rng(seed, which, i)))
            .collect()
    };
    Ok(Dataset {
        train: split(Split::Train, sizes.train)?,
        val: split(Split::Val, sizes.val)?,
        test: split(Split::Test, sizes.test)?,
        targets: task.class_targets(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_is_silent() {
        let r = poisson_encode(&[0.0], 1000, 1e-3, 1).unwrap();
        assert_eq!(r.total_spikes(), 0);
    }

    #[test]
    fn max_rate_fires_every_step() {
        let r = poisson_encode(&[1000.0], 1000, 1e-3, 1).unwrap();
        assert_eq!(r.total_spikes(), 1000);
    }

    #[test]
    fn saturation_rejected() {
        let err = poisson_encode(&[1500.0], 10, 1e-3, 1).unwrap_err();
        assert!(matches!(err, SimError::EncodingSaturation { .. }));
        assert!(poisson_encode(&[-1.0], 10, 1e-3, 1).is_err());
    }

    #[test]
    fn empirical_rate_within_three_sigma() {
        let (steps, dt, rate) = (10_000, 1e-3, 100.0);
        let r = poisson_encode(&[rate], steps, dt, 42).unwrap();
        let p: f64 = rate * dt;
        let sigma_hz = libm::sqrt(p * (1.0 - p) / steps as f64) / dt;
        assert!((r.rates_hz()[0] - rate).abs() < 3.0 * sigma_hz);
    }

    #[test]
    fn seed_determinism() {
        let a = poisson_encode(&[50.0, 10.0], 500, 1e-3, 7).unwrap();
        let b = poisson_encode(&[50.0, 10.0], 500, 1e-3, 7).unwrap();
        let c = poisson_encode(&[50.0, 10.0], 500, 1e-3, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn binary_dataset_shapes_and_balance() {
        let ds = gen_binary_dataset(
            &BinaryTask::default(),
            SplitSizes { train: 10, val: 4, test: 4 },
            200,
            1e-3,
            3,
        )
        .unwrap();
        assert_eq!((ds.train.len(), ds.val.len(), ds.test.len()), (10, 4, 4));
        let ones = ds.train.iter().filter(|s| s.label == 1).count();
        assert_eq!(ones, 5);
        for s in &ds.train {
            assert_eq!((s.input.rows(), s.input.steps()), (2, 200));
            assert_eq!((s.target.rows(), s.target.steps()), (1, 200));
        }
        assert_eq!(ds.train[0].input_rates, vec![100.0, 50.0]);
        assert_eq!(ds.train[0].target_rates, vec![100.0]);
        assert_eq!(ds.train[1].input_rates, vec![50.0, 100.0]);
        assert_eq!(ds.train[1].target_rates, vec![20.0]);
    }

    #[test]
    fn binary_high_class_swaps_targets() {
        let t = BinaryTask {
            high_class: 1,
            ..Default::default()
        };
        assert_eq!(t.class_targets().rates_hz, vec![vec![20.0], vec![100.0]]);
    }

    #[test]
    fn empty_split_rejected() {
        let sizes = SplitSizes { train: 0, val: 1, test: 1 };
        assert!(gen_binary_dataset(&BinaryTask::default(), sizes, 10, 1e-3, 0).is_err());
    }

    #[test]
    fn dot_centers() {
        assert_eq!(yinyang_class(0.25, 0.5), YinYangClass::Dot);
        assert_eq!(yinyang_class(0.75, 0.5), YinYangClass::Dot);
    }

    #[test]
    fn lobes_and_halves() {
        // left lobe outside the dot belongs to Yin, right lobe to Yang
        assert_eq!(yinyang_class(0.1, 0.5), YinYangClass::Yin);
        assert_eq!(yinyang_class(0.9, 0.5), YinYangClass::Yang);
        assert_eq!(yinyang_class(0.5, 0.9), YinYangClass::Yin);
        assert_eq!(yinyang_class(0.5, 0.1), YinYangClass::Yang);
    }

    #[test]
    fn yinyang_points_balanced_in_disc() {
        let pts = gen_yinyang_points(3000, 11).unwrap();
        for c in YinYangClass::ALL {
            assert_eq!(pts.iter().filter(|p| p.class == c).count(), 1000);
        }
        for p in &pts {
            assert!(in_symbol_disc(p.x, p.y));
            assert_eq!(yinyang_class(p.x, p.y), p.class);
        }
    }

    #[test]
    fn yinyang_rate_map() {
        let t = YinYangTask::default();
        let p = YinYangPoint { x: 0.0, y: 1.0, class: YinYangClass::Yin };
        assert_eq!(t.input_rates(&p), vec![10.0, 100.0, 100.0, 10.0]);
        let mid = YinYangPoint { x: 0.5, y: 0.5, class: YinYangClass::Dot };
        assert_eq!(t.input_rates(&mid)[0], 55.0);
        assert_eq!(t.class_targets().rates_hz[0], vec![20.0, 2.0, 2.0]);
    }

    #[test]
    fn yinyang_sample_shapes() {
        let p = YinYangPoint { x: 0.3, y: 0.7, class: YinYangClass::Yang };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = encode_yinyang_sample(&p, &YinYangTask::default(), 100, 1e-3, &mut rng).unwrap();
        assert_eq!((s.input.rows(), s.target.rows()), (4, 3));
        assert_eq!(s.label, 1);
        assert_eq!(s.target_rates, vec![2.0, 20.0, 2.0]);
    }

    #[test]
    fn bad_yinyang_rates_rejected() {
        let t = YinYangTask {
            f0: 30.0,
            ..Default::default()
        };
        assert!(t.validate().is_err());
    }
}
