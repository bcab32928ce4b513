//! On-disk formats. All text formats share a provenance preamble:
//!
//! ```text
//! # seed = 7
//! # config_hash = 3f1c...
//! #| [experiment]
//! #| task = "binary"
//! ...
//! ```
//!
//! `#|` lines carry the resolved config verbatim; other `#` lines are
//! comments. Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spikefc_core::encoding::{ClassTargets, Dataset, Decode, LabeledSample};
use spikefc_core::hardware::PerNeuronParams;
use spikefc_core::training::MetricsRow;
use spikefc_core::{Matrix, SpikeRaster};

use crate::config::Config;

pub const DATASET_MAGIC: &str = "spikefc-dataset 1";
pub const WEIGHTS_MAGIC: &str = "spikefc-weights 1";
pub const SCHEMA_VERSION: u32 = 1;

/// Config and seed embedded in a file.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub seed: u64,
    pub config: Config,
}

impl Provenance {
    pub fn new(config: &Config, seed: u64) -> Self {
        Self {
            seed,
            config: config.clone(),
        }
    }

    pub fn preamble(&self) -> String {
        let mut s = format!("# seed = {}\n# config_hash = {}\n", self.seed, self.config.hash());
        for line in self.config.to_toml().lines() {
            let _ = writeln!(s, "#| {line}");
        }
        s
    }

    /// Recovers the preamble from a file's leading comment lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut seed = None;
        let mut toml_text = String::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            if let Some(rest) = line.strip_prefix("#|") {
                toml_text.push_str(rest.strip_prefix(' ').unwrap_or(rest));
                toml_text.push('\n');
            } else if let Some(v) = line.strip_prefix("# seed = ") {
                seed = Some(v.trim().parse()?);
            }
        }
        let config: Config = toml::from_str(&toml_text).context("embedded config")?;
        Ok(Self {
            seed: seed.ok_or_else(|| anyhow!("no seed line in preamble"))?,
            config,
        })
    }
}

/// SHA-256 over the little-endian bytes of every value, row-major.
pub fn weights_checksum(w: &Matrix) -> String {
    let mut h = Sha256::new();
    for v in w.as_slice() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

// ---- dataset ----

/// Run lengths of alternating silent and spiking stretches, starting with
/// silence. A row that spikes at step 0 starts with a zero run.
pub fn rle_encode(raster: &SpikeRaster, row: usize) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0;
    for t in 0..raster.steps() {
        let bit = raster.get(row, t);
        if bit != current {
            runs.push(len);
            current = bit;
            len = 0;
        }
        len += 1;
    }
    runs.push(len);
    runs
}

fn rle_decode(runs: &[usize], steps: usize) -> Result<Vec<usize>> {
    ensure!(runs.iter().sum::<usize>() == steps, "run lengths do not sum to T={steps}");
    let mut spikes = Vec::new();
    let mut t = 0;
    for (k, &len) in runs.iter().enumerate() {
        if k % 2 == 1 {
            spikes.extend(t..t + len);
        }
        t += len;
    }
    Ok(spikes)
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

/// Text dataset file.
///
/// ```text
/// spikefc-dataset 1
/// m 2
/// n 1
/// T 5000
/// dt 0.001
/// decode nearest
/// class 0 100
/// class 1 20
/// split train 5000
/// sample 0 | 100 50 | 100
/// in 12 1 40 1 ...     (m rows)
/// out 3 1 77 1 ...     (n rows)
/// ```
///
/// `sample` gives the label, input rates and target rates. `in` and `out`
/// rows hold the input and target rasters as run lengths.
pub fn write_dataset(path: &Path, data: &Dataset, prov: &Provenance) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("create {}", path.display()))?);
    let steps = data.train.first().or(data.val.first()).map_or(0, LabeledSample::steps);
    let dt = data.train.first().or(data.val.first()).map_or(0.0, |s| s.input.dt());
    w.write_all(prov.preamble().as_bytes())?;
    writeln!(w, "{DATASET_MAGIC}")?;
    writeln!(w, "m {}\nn {}\nT {steps}\ndt {dt}", data.n_inputs(), data.n_outputs())?;
    let decode = match data.targets.decode {
        Decode::Softmax => "softmax",
        Decode::NearestTarget => "nearest",
    };
    writeln!(w, "decode {decode}")?;
    for (c, rates) in data.targets.rates_hz.iter().enumerate() {
        writeln!(w, "class {c} {}", join(rates))?;
    }
    for (name, split) in [("train", &data.train), ("val", &data.val), ("test", &data.test)] {
        writeln!(w, "split {name} {}", split.len())?;
        for s in split {
            writeln!(w, "sample {} | {} | {}", s.label, join(&s.input_rates), join(&s.target_rates))?;
            for r in 0..s.input.rows() {
                writeln!(w, "in {}", join(&rle_encode(&s.input, r)))?;
            }
            for r in 0..s.target.rows() {
                writeln!(w, "out {}", join(&rle_encode(&s.target, r)))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next non-comment line split as (line number, keyword, rest).
    fn next(&mut self) -> Result<(usize, &'a str, &'a str)> {
        loop {
            let (i, line) = self.inner.next().ok_or_else(|| anyhow!("unexpected end of file"))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            return Ok((i + 1, key, rest.trim()));
        }
    }

    fn expect(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, k, rest) = self.next()?;
        ensure!(k == key, "line {n}: expected `{key}`, found `{k}`");
        Ok((n, rest))
    }

    fn value<T: std::str::FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: std::error::Error + Send + Sync + 'static,
    {
        let (n, rest) = self.expect(key)?;
        rest.parse().with_context(|| format!("line {n}: bad value for `{key}`"))
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, line: usize) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    s.split_whitespace()
        .map(|x| x.parse().with_context(|| format!("line {line}: bad number `{x}`")))
        .collect()
}

pub fn read_dataset(path: &Path) -> Result<(Dataset, Provenance)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("read {}", path.display()))?;
    let prov = Provenance::parse(&text)?;
    let data = parse_dataset(&text)?;
    Ok((data, prov))
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (n, magic, rest) = lines.next()?;
    ensure!(format!("{magic} {rest}") == DATASET_MAGIC, "line {n}: not a dataset file");
    let m: usize = lines.value("m")?;
    let n_out: usize = lines.value("n")?;
    let steps: usize = lines.value("T")?;
    let dt: f64 = lines.value("dt")?;
    let decode = match lines.expect("decode")? {
        (_, "softmax") => Decode::Softmax,
        (_, "nearest") => Decode::NearestTarget,
        (n, other) => bail!("line {n}: unknown decode `{other}`"),
    };
    let mut rates_hz = Vec::new();
    let mut splits: [Vec<LabeledSample>; 3] = Default::default();
    let mut pending = lines.next()?;
    while pending.1 == "class" {
        let (n, _, rest) = pending;
        let mut parts = rest.split_whitespace();
        let c: usize = parts.next().unwrap_or("").parse().with_context(|| format!("line {n}: class index"))?;
        ensure!(c == rates_hz.len(), "line {n}: classes out of order");
        let rates: Vec<f64> = parse_list(&parts.collect::<Vec<_>>().join(" "), n)?;
        ensure!(rates.len() == n_out, "line {n}: expected {n_out} target rates");
        rates_hz.push(rates);
        pending = lines.next()?;
    }
    for (k, name) in ["train", "val", "test"].iter().enumerate() {
        let (n, key, rest) = pending;
        ensure!(key == "split", "line {n}: expected `split`");
        let (sname, count) = rest.split_once(' ').ok_or_else(|| anyhow!("line {n}: bad split header"))?;
        ensure!(sname == *name, "line {n}: expected split `{name}`");
        let count: usize = count.trim().parse().with_context(|| format!("line {n}: split size"))?;
        for _ in 0..count {
            let (n, rest) = lines.expect("sample")?;
            let parts: Vec<&str> = rest.split('|').map(str::trim).collect();
            ensure!(parts.len() == 3, "line {n}: expected `label | inputs | targets`");
            let label: usize = parts[0].parse().with_context(|| format!("line {n}: label"))?;
            let input_rates: Vec<f64> = parse_list(parts[1], n)?;
            let target_rates: Vec<f64> = parse_list(parts[2], n)?;
            ensure!(input_rates.len() == m && target_rates.len() == n_out, "line {n}: rate counts");
            let mut read_rows = |key: &str, count: usize| -> Result<SpikeRaster> {
                let rows = (0..count)
                    .map(|_| {
                        let (n, rest) = lines.expect(key)?;
                        rle_decode(&parse_list(rest, n)?, steps).with_context(|| format!("line {n}"))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(SpikeRaster::from_spike_steps(steps, dt, &rows)?)
            };
            let input = read_rows("in", m)?;
            let target = read_rows("out", n_out)?;
            splits[k].push(LabeledSample {
                input,
                target,
                label,
                input_rates,
                target_rates,
            });
        }
        if k < 2 {
            pending = lines.next()?;
        }
    }
    let [train, val, test] = splits;
    Ok(Dataset {
        train,
        val,
        test,
        targets: ClassTargets { rates_hz, decode },
    })
}

// ---- weights ----

/// Weight checkpoint: magic, `n`, `m`, then `n` lines of `m` values.
pub fn write_weights(path: &Path, w: &Matrix, prov: &Provenance) -> Result<()> {
    let mut s = prov.preamble();
    let (n, m) = w.shape();
    let _ = writeln!(s, "{WEIGHTS_MAGIC}\nn {n}\nm {m}");
    for i in 0..n {
        let _ = writeln!(s, "{}", join(w.row(i)));
    }
    std::fs::write(path, s).with_context(|| format!("write {}", path.display()))
}

pub fn parse_weights(text: &str) -> Result<Matrix> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (n, magic, rest) = lines.next()?;
    ensure!(format!("{magic} {rest}") == WEIGHTS_MAGIC, "line {n}: not a weights file");
    let rows: usize = lines.value("n")?;
    let cols: usize = lines.value("m")?;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let (n, first, rest) = lines.next()?;
        let row: Vec<f64> = parse_list(&format!("{first} {rest}"), n)?;
        ensure!(row.len() == cols, "line {n}: expected {cols} values, found {}", row.len());
        data.extend(row);
    }
    Ok(Matrix::from_rows(rows, cols, data)?)
}

pub fn read_weights(path: &Path) -> Result<(Matrix, Provenance)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("read {}", path.display()))?;
    Ok((parse_weights(&text)?, Provenance::parse(&text)?))
}

// ---- metrics ----

pub fn metrics_header(n_classes: usize, n_outputs: usize) -> Vec<String> {
    let mut h: Vec<String> = ["index", "samples_seen", "train_loss", "val_loss", "target_error", "accuracy"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for c in 0..n_classes {
        for k in 0..n_outputs {
            h.push(format!("rate_c{c}_o{k}"));
        }
    }
    h
}

/// Append-only metrics CSV. Rows are flushed as they arrive.
pub struct MetricsWriter {
    inner: csv::Writer<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path, prov: &Provenance, n_classes: usize, n_outputs: usize) -> Result<Self> {
        let mut file = File::create(path).with_context(|| format!("create {}", path.display()))?;
        file.write_all(prov.preamble().as_bytes())?;
        let mut inner = csv::Writer::from_writer(file);
        inner.write_record(metrics_header(n_classes, n_outputs))?;
        inner.flush()?;
        Ok(Self { inner })
    }

    /// Reopens an existing file for further rows.
    pub fn append(path: &Path) -> Result<Self> {
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(Self {
            inner: csv::WriterBuilder::new().has_headers(false).from_writer(file),
        })
    }

    pub fn push(&mut self, row: &MetricsRow) -> Result<()> {
        let mut rec = vec![
            row.index.to_string(),
            row.samples_seen.to_string(),
            row.train_loss.to_string(),
            row.val_loss.to_string(),
            row.target_error.to_string(),
            row.accuracy.to_string(),
        ];
        rec.extend(row.class_rates_hz.iter().flatten().map(f64::to_string));
        self.inner.write_record(rec)?;
        self.inner.flush()?;
        Ok(())
    }
}

/// Reads metrics rows back, skipping the preamble.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path)?;
    let body: String = text
        .lines()
        .skip_while(|l| l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header = rdr.headers()?.clone();
    let rate_cols: Vec<(usize, usize)> = header
        .iter()
        .skip(6)
        .map(|h| {
            let (c, k) = h
                .strip_prefix("rate_c")
                .and_then(|r| r.split_once("_o"))
                .ok_or_else(|| anyhow!("bad column `{h}`"))?;
            Ok((c.parse()?, k.parse()?))
        })
        .collect::<Result<_>>()?;
    let n_classes = rate_cols.iter().map(|c| c.0 + 1).max().unwrap_or(0);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> { Ok(rec.get(i).ok_or_else(|| anyhow!("short row"))?.parse()?) };
        let mut class_rates_hz = vec![Vec::new(); n_classes];
        for (j, &(c, _)) in rate_cols.iter().enumerate() {
            class_rates_hz[c].push(f(6 + j)?);
        }
        rows.push(MetricsRow {
            index: f(0)? as usize,
            samples_seen: f(1)? as usize,
            train_loss: f(2)?,
            val_loss: f(3)?,
            target_error: f(4)?,
            accuracy: f(5)?,
            class_rates_hz,
        });
    }
    Ok(rows)
}

// ---- JSON ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub loss: f64,
    pub target_error: f64,
    pub accuracy: f64,
}

/// Per-seed run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub config: String,
    pub task: String,
    pub mode: String,
    pub cv: f64,
    pub population: usize,
    pub rows: usize,
    pub samples_seen: usize,
    /// Last validation metrics.
    pub final_val: Scores,
    pub test: Scores,
    pub baseline_test_accuracy: Option<f64>,
    /// Smallest sample count after which every windowed validation loss is
    /// zero, online runs only.
    pub zero_loss_from: Option<usize>,
    pub no_learning: bool,
    pub initial_weights_sha256: String,
    pub final_weights_sha256: String,
    pub weights_unchanged: bool,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s).with_context(|| format!("write {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("read {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchRecord {
    pub schema_version: u32,
    pub seed: u64,
    pub realization_seed: u64,
    pub config_hash: String,
    pub config: String,
    pub cv: f64,
    pub population: usize,
    pub dt: f64,
    /// Parameter name to one value per physical neuron or controller pair.
    pub params: std::collections::BTreeMap<String, Vec<f64>>,
}

impl MismatchRecord {
    pub fn new(prov: &Provenance, realization_seed: u64, cv: f64, population: usize, per: &PerNeuronParams) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: prov.seed,
            realization_seed,
            config_hash: prov.config.hash(),
            config: prov.config.to_toml(),
            cv,
            population,
            dt: per.dt,
            params: per.fields().iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ModeName, Task};
    use spikefc_core::encoding::{gen_yinyang_dataset, SplitSizes, YinYangTask};

    fn prov() -> Provenance {
        Provenance::new(&Config::defaults(Task::Yinyang, ModeName::Offline), 11)
    }

    #[test]
    fn rle_round_trip_edges() {
        let r = SpikeRaster::from_spike_steps(6, 1e-3, &[vec![0, 1, 5], vec![], vec![2]]).unwrap();
        assert_eq!(rle_encode(&r, 0), vec![0, 2, 3, 1]);
        assert_eq!(rle_encode(&r, 1), vec![6]);
        assert_eq!(rle_decode(&rle_encode(&r, 0), 6).unwrap(), vec![0, 1, 5]);
        assert!(rle_decode(&[2, 1], 6).is_err());
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.sfd");
        let data = gen_yinyang_dataset(&YinYangTask::default(), SplitSizes { train: 5, val: 2, test: 3 }, 200, 1e-3, 4)
            .unwrap();
        write_dataset(&path, &data, &prov()).unwrap();
        let (back, p) = read_dataset(&path).unwrap();
        assert_eq!(back, data);
        assert_eq!(p, prov());
    }

    #[test]
    fn weights_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.txt");
        let w = Matrix::from_rows(2, 3, vec![0.1, -2.5e-7, 3.0, f64::MIN_POSITIVE, 1.0 / 3.0, -0.0]).unwrap();
        write_weights(&path, &w, &prov()).unwrap();
        let (back, p) = read_weights(&path).unwrap();
        assert_eq!(weights_checksum(&back), weights_checksum(&w));
        assert_eq!(p.seed, 11);
    }

    #[test]
    fn weights_shape_errors_name_the_line() {
        let err = parse_weights("spikefc-weights 1\nn 2\nm 2\n1 2\n3\n").unwrap_err();
        assert!(err.to_string().contains("line 5"), "{err}");
    }

    #[test]
    fn metrics_round_trip_and_append() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let row = |i| MetricsRow {
            index: i,
            samples_seen: 50 * i,
            train_loss: 0.5 / i as f64,
            val_loss: 0.25,
            target_error: 3.0,
            accuracy: 0.6,
            class_rates_hz: vec![vec![1.0, 2.0], vec![3.0, 4.5]],
        };
        MetricsWriter::create(&path, &prov(), 2, 2).unwrap().push(&row(1)).unwrap();
        MetricsWriter::append(&path).unwrap().push(&row(2)).unwrap();
        assert_eq!(read_metrics(&path).unwrap(), vec![row(1), row(2)]);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("index,samples_seen,train_loss,val_loss,target_error,accuracy,rate_c0_o0"));
    }
}
