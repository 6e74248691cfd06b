//! The 3DPM dataset: RSS feature vectors labeled by elevation-angle bin and
//! grouped into tasks by Rician K-factor.
//!
//! Each record is `feature_len` repeated RSS readings (dBm) at a fixed pose.
//! Per record the generator draws a pointing error for both antennas, a
//! polarization loss, a nominal SNR and a LoS phase; the diffuse fading and
//! the receiver noise are drawn afresh for every reading.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antenna::{AntennaModel, DIPOLE_DIRECTIVITY};
use crate::channel::{diffuse_component, los_component, path_loss_db, ChannelParams};
use crate::error::{config, Error, Result};
use crate::geom::LinkGeometry;
use crate::rng::{rng_for, Fnv1a};

pub const MAGIC: &[u8; 4] = b"3DPM";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub kappa_list: Vec<u32>,
    pub angle_bins: usize,
    pub instances_per_bin: usize,
    pub feature_len: usize,
    pub snr_range_db: (f64, f64),
    /// Range of the polarization loss; each record keeps `1 − u` of its
    /// power for `u` uniform on this range.
    pub plf_range: (f64, f64),
    /// Receiver offset from the transmitter `(d_x, d_y, d_z)`, meters.
    pub offsets: (f64, f64, f64),
    /// Standard deviation of the elevation pointing error of each antenna,
    /// degrees.
    pub misalignment_deg: f64,
    pub channel: ChannelParams,
    pub base_seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            kappa_list: (0..=30).collect(),
            angle_bins: 180,
            instances_per_bin: 20,
            feature_len: 100,
            snr_range_db: (0.0, 30.0),
            plf_range: (0.0, 0.5),
            offsets: (100.0, 10.0, 5.0),
            misalignment_deg: 0.05,
            channel: ChannelParams::default(),
            base_seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.angle_bins < 2 || self.angle_bins > usize::from(u16::MAX) {
            return Err(config(format!("angle_bins must lie in [2, 65535], got {}", self.angle_bins)));
        }
        if self.feature_len == 0 {
            return Err(config("feature_len must be positive"));
        }
        if self.instances_per_bin == 0 {
            return Err(config("instances_per_bin must be positive"));
        }
        if self.kappa_list.is_empty() {
            return Err(config("kappa_list is empty"));
        }
        let mut sorted = self.kappa_list.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.kappa_list.len() {
            return Err(config("kappa_list has duplicates"));
        }
        let (lo, hi) = self.snr_range_db;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(config("snr_range_db must be a finite, ordered pair"));
        }
        let (lo, hi) = self.plf_range;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(config("plf_range must be an ordered pair within [0, 1]"));
        }
        if !(self.misalignment_deg >= 0.0) {
            return Err(config("misalignment_deg must be non-negative"));
        }
        let (x, y, z) = self.offsets;
        LinkGeometry::from_offsets(x, y, z)?;
        self.channel.validate()
    }

    pub fn records(&self) -> usize {
        self.kappa_list.len() * self.angle_bins * self.instances_per_bin
    }

    /// Same channel model at a single SNR with `instances` per bin, for
    /// evaluation.
    pub fn eval(&self, instances: usize, snr_db: f64) -> Self {
        Self { instances_per_bin: instances, snr_range_db: (snr_db, snr_db), ..self.clone() }
    }

    /// Center elevation of bin `b`.
    pub fn bin_center(&self, b: usize) -> f64 {
        -FRAC_PI_2 + (b as f64 + 0.5) * PI / self.angle_bins as f64
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

/// Synthesizes one record into `out`, returning its nominal SNR in dB.
fn synthesize(cfg: &DatasetConfig, kappa: u32, bin: usize, instance: usize, out: &mut [f32]) -> Result<f64> {
    let mut rng = rng_for(cfg.base_seed, &[u64::from(kappa), bin as u64, instance as u64]);
    let channel = ChannelParams { kappa: f64::from(kappa), ..cfg.channel };
    let (x, y, z) = cfg.offsets;
    let geometry = LinkGeometry::from_offsets(x, y, z)?;
    let c = 10f64.powf(-path_loss_db(&channel, geometry.d, None)? / 10.0);
    let p_t = channel.p_t_watts();

    let sigma_delta = cfg.misalignment_deg.to_radians();
    let z_r: f64 = StandardNormal.sample(&mut rng);
    let z_t: f64 = StandardNormal.sample(&mut rng);
    let (delta_r, delta_t) = (sigma_delta * z_r, sigma_delta * z_t);
    let ant = AntennaModel::default();
    let g_r = ant.gain_at_elevation(0.0, cfg.bin_center(bin) + delta_r, 0);
    let g_t = ant.gain_at_elevation(0.0, geometry.phi_theta + delta_t, 0);
    let plf = 1.0 - uniform(&mut rng, cfg.plf_range);
    let snr_db = uniform(&mut rng, cfg.snr_range_db);

    // noise referenced to boresight gains on both ends
    let noise = p_t * c * DIPOLE_DIRECTIVITY * DIPOLE_DIRECTIVITY / 10f64.powf(snr_db / 10.0);
    let noise = Normal::new(0.0, (noise / 2.0).sqrt()).map_err(|e| Error::Domain(e.to_string()))?;
    let amplitude = (p_t * c * g_t * g_r * plf).sqrt();
    let phase = rng.random::<f64>() * std::f64::consts::TAU;
    let los = los_component(&channel, geometry.phi_theta, phase);
    for v in out.iter_mut() {
        let g = los + diffuse_component(&channel, &mut rng);
        let n = num_complex::Complex64::new(noise.sample(&mut rng), noise.sample(&mut rng));
        let power = (g * amplitude + n).norm_sqr();
        *v = (10.0 * power.max(1e-300).log10() + 30.0) as f32;
    }
    Ok(snr_db)
}

/// One labeled record borrowed from a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RssRecord<'a> {
    pub features: &'a [f32],
    pub label: u16,
    pub kappa: u32,
    pub snr_db: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RssDataset {
    pub config: DatasetConfig,
    /// Record-major features in `(κ, bin, instance)` order.
    pub features: Vec<f32>,
    pub labels: Vec<u16>,
    pub snr_db: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    config: DatasetConfig,
    records: usize,
    feature_len: usize,
    seed: u64,
    checksum: String,
}

/// Generates the dataset described by `cfg`, in parallel over records.
pub fn generate(cfg: &DatasetConfig) -> Result<RssDataset> {
    cfg.validate()?;
    let (bins, inst, len) = (cfg.angle_bins, cfg.instances_per_bin, cfg.feature_len);
    let mut features = vec![0f32; cfg.records() * len];
    let snr: Vec<f64> = features
        .par_chunks_mut(len)
        .enumerate()
        .map(|(idx, out)| {
            let kappa = cfg.kappa_list[idx / (bins * inst)];
            synthesize(cfg, kappa, (idx / inst) % bins, idx % inst, out)
        })
        .collect::<Result<_>>()?;
    let labels = (0..cfg.records()).map(|idx| ((idx / inst) % bins) as u16).collect();
    Ok(RssDataset {
        config: cfg.clone(),
        features,
        labels,
        snr_db: snr.into_iter().map(|s| s as f32).collect(),
    })
}

/// Generates an evaluation set with `instances` per bin at a single SNR.
pub fn generate_eval(cfg: &DatasetConfig, instances: usize, snr_db: f64) -> Result<RssDataset> {
    generate(&cfg.eval(instances, snr_db))
}

impl RssDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_len(&self) -> usize {
        self.config.feature_len
    }

    pub fn index(&self, kappa_pos: usize, bin: usize, instance: usize) -> usize {
        (kappa_pos * self.config.angle_bins + bin) * self.config.instances_per_bin + instance
    }

    pub fn features_of(&self, idx: usize) -> &[f32] {
        let len = self.config.feature_len;
        &self.features[idx * len..(idx + 1) * len]
    }

    pub fn record(&self, idx: usize) -> RssRecord<'_> {
        let per_kappa = self.config.angle_bins * self.config.instances_per_bin;
        RssRecord {
            features: self.features_of(idx),
            label: self.labels[idx],
            kappa: self.config.kappa_list[idx / per_kappa],
            snr_db: self.snr_db[idx],
        }
    }

    fn payload_checksum(&self) -> u64 {
        let mut h = Fnv1a::default();
        for v in &self.features {
            h.update(&v.to_le_bytes());
        }
        for v in &self.labels {
            h.update(&v.to_le_bytes());
        }
        for v in &self.snr_db {
            h.update(&v.to_le_bytes());
        }
        h.finish()
    }

    pub fn checksum(&self) -> u64 {
        self.payload_checksum()
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        let manifest = Manifest {
            config: self.config.clone(),
            records: self.len(),
            feature_len: self.feature_len(),
            seed: self.config.base_seed,
            checksum: format!("{:016x}", self.payload_checksum()),
        };
        let json = serde_json::to_vec(&manifest)?;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        let json_len = u32::try_from(json.len()).map_err(|_| Error::Format("manifest too large".into()))?;
        w.write_all(&json_len.to_le_bytes())?;
        w.write_all(&json)?;
        for v in &self.features {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in &self.labels {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in &self.snr_db {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(File::create(path)?)
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a 3DPM dataset".into()));
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2)?;
        let version = u16::from_le_bytes(b2);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let mut json = vec![0u8; u32::from_le_bytes(b4) as usize];
        r.read_exact(&mut json)?;
        let manifest: Manifest = serde_json::from_slice(&json)?;
        manifest.config.validate()?;
        if manifest.records != manifest.config.records() || manifest.feature_len != manifest.config.feature_len {
            return Err(Error::Format("manifest counts disagree with its config".into()));
        }
        let n = manifest.records;
        let mut bytes = vec![0u8; n * manifest.feature_len * 4];
        r.read_exact(&mut bytes)?;
        let features = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        let mut bytes = vec![0u8; n * 2];
        r.read_exact(&mut bytes)?;
        let labels = bytes.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
        let mut bytes = vec![0u8; n * 4];
        r.read_exact(&mut bytes)?;
        let snr_db = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        let ds = RssDataset { config: manifest.config, features, labels, snr_db };
        let expected = format!("{:016x}", ds.payload_checksum());
        if expected != manifest.checksum {
            return Err(Error::Format(format!("checksum mismatch: file says {}, data hashes to {expected}", manifest.checksum)));
        }
        Ok(ds)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(File::open(path)?)
    }

    /// CSV export with header `kappa,bin,instance,snr_db,f0..`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["kappa".to_string(), "bin".into(), "instance".into(), "snr_db".into()];
        header.extend((0..self.feature_len()).map(|i| format!("f{i}")));
        out.write_record(&header)?;
        let inst = self.config.instances_per_bin;
        for idx in 0..self.len() {
            let rec = self.record(idx);
            let mut row = vec![rec.kappa.to_string(), rec.label.to_string(), (idx % inst).to_string(), rec.snr_db.to_string()];
            row.extend(rec.features.iter().map(|v| v.to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskSplit {
    pub train_tasks: Vec<u32>,
    pub test_tasks: Vec<u32>,
}

/// Odd K-factors train, even K-factors test.
pub fn split(cfg: &DatasetConfig) -> TaskSplit {
    let (train_tasks, test_tasks) = cfg.kappa_list.iter().partition(|&&k| k % 2 == 1);
    TaskSplit { train_tasks, test_tasks }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitSide {
    Train,
    Test,
}

/// One N-way K-shot episode as record indices into a dataset.
///
/// Local label `j` stands for angle bin `classes[j]`; support and query
/// are ordered class by class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Episode {
    pub kappa: u32,
    pub n_way: usize,
    pub k_shot: usize,
    pub classes: Vec<u16>,
    pub support: Vec<usize>,
    pub support_labels: Vec<usize>,
    pub query: Vec<usize>,
    pub query_labels: Vec<usize>,
}

/// Draws a task from `side`, `n_way` distinct bins in random order, and
/// `k_shot + q_query` distinct instances per bin.
pub fn sample_episode(
    dataset: &RssDataset,
    side: SplitSide,
    n_way: usize,
    k_shot: usize,
    q_query: usize,
    rng_seed: u64,
) -> Result<Episode> {
    let cfg = &dataset.config;
    if n_way == 0 || k_shot == 0 {
        return Err(config("n_way and k_shot must be positive"));
    }
    if n_way > cfg.angle_bins {
        return Err(config(format!("{n_way}-way episode from {} bins", cfg.angle_bins)));
    }
    if k_shot + q_query > cfg.instances_per_bin {
        return Err(config(format!(
            "{k_shot} support + {q_query} query instances exceed {} per bin",
            cfg.instances_per_bin
        )));
    }
    let split = split(cfg);
    let tasks = match side {
        SplitSide::Train => &split.train_tasks,
        SplitSide::Test => &split.test_tasks,
    };
    if tasks.is_empty() {
        return Err(config(format!("no {side:?} tasks in kappa_list")));
    }
    let mut rng = rng_for(rng_seed, &[]);
    let kappa = tasks[rng.random_range(0..tasks.len())];
    let kpos = cfg.kappa_list.iter().position(|&k| k == kappa).unwrap_or(0);
    let classes: Vec<u16> = sample(&mut rng, cfg.angle_bins, n_way).into_iter().map(|b| b as u16).collect();
    let mut ep = Episode {
        kappa,
        n_way,
        k_shot,
        classes: classes.clone(),
        support: Vec::with_capacity(n_way * k_shot),
        support_labels: Vec::with_capacity(n_way * k_shot),
        query: Vec::with_capacity(n_way * q_query),
        query_labels: Vec::with_capacity(n_way * q_query),
    };
    for (local, &bin) in classes.iter().enumerate() {
        let picks = sample(&mut rng, cfg.instances_per_bin, k_shot + q_query).into_vec();
        for (j, &inst) in picks.iter().enumerate() {
            let idx = dataset.index(kpos, usize::from(bin), inst);
            if j < k_shot {
                ep.support.push(idx);
                ep.support_labels.push(local);
            } else {
                ep.query.push(idx);
                ep.query_labels.push(local);
            }
        }
    }
    Ok(ep)
}

impl Episode {
    /// Concatenated features of the given records.
    pub fn gather(dataset: &RssDataset, indices: &[usize]) -> Vec<f32> {
        let mut out = Vec::with_capacity(indices.len() * dataset.feature_len());
        for &i in indices {
            out.extend_from_slice(dataset.features_of(i));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> DatasetConfig {
        DatasetConfig {
            kappa_list: vec![0, 1, 2, 3],
            angle_bins: 12,
            instances_per_bin: 6,
            feature_len: 16,
            ..Default::default()
        }
    }

    #[test]
    fn default_record_count() {
        assert_eq!(DatasetConfig::default().records(), 111_600);
    }

    #[test]
    fn minimal_config() {
        let cfg = DatasetConfig {
            kappa_list: vec![0],
            angle_bins: 2,
            instances_per_bin: 1,
            feature_len: 4,
            ..Default::default()
        };
        let ds = generate(&cfg).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.features.len(), 8);
        assert_eq!(ds.labels, vec![0, 1]);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&tiny()).unwrap();
        let b = generate(&tiny()).unwrap();
        assert_eq!(a, b);
        let other = generate(&DatasetConfig { base_seed: 1, ..tiny() }).unwrap();
        assert_ne!(a.features, other.features);
    }

    #[test]
    fn features_are_physical() {
        let ds = generate(&tiny()).unwrap();
        let top = ds.config.channel.p_t_dbm;
        assert!(ds.features.iter().all(|v| v.is_finite() && *v > -250.0 && (*v as f64) < top));
        for s in &ds.snr_db {
            assert!((0.0..=30.0).contains(s));
        }
    }

    #[test]
    fn class_balance() {
        let ds = generate(&tiny()).unwrap();
        let mut counts = vec![0usize; 4 * 12];
        for idx in 0..ds.len() {
            let r = ds.record(idx);
            let kpos = ds.config.kappa_list.iter().position(|&k| k == r.kappa).unwrap();
            counts[kpos * 12 + usize::from(r.label)] += 1;
        }
        assert!(counts.iter().all(|&c| c == 6));
    }

    #[test]
    fn split_rule() {
        let s = split(&DatasetConfig::default());
        assert_eq!(s.train_tasks.len(), 15);
        assert_eq!(s.test_tasks.len(), 16);
        assert!(s.train_tasks.iter().all(|k| k % 2 == 1));
        assert!(s.train_tasks.iter().all(|k| !s.test_tasks.contains(k)));
        let single = split(&DatasetConfig { kappa_list: vec![2], ..Default::default() });
        assert!(single.train_tasks.is_empty());
        assert_eq!(single.test_tasks, vec![2]);
    }

    #[test]
    fn episodes_are_disjoint_and_reproducible() {
        let ds = generate(&tiny()).unwrap();
        let ep = sample_episode(&ds, SplitSide::Train, 5, 2, 3, 9).unwrap();
        assert_eq!(ep.support.len(), 10);
        assert_eq!(ep.query.len(), 15);
        assert!(ep.support.iter().all(|i| !ep.query.contains(i)));
        assert_eq!(ep.kappa % 2, 1);
        for (&i, &l) in ep.support.iter().zip(&ep.support_labels) {
            assert_eq!(ds.labels[i], ep.classes[l]);
            assert_eq!(ds.record(i).kappa, ep.kappa);
        }
        assert_eq!(ep, sample_episode(&ds, SplitSide::Train, 5, 2, 3, 9).unwrap());
    }

    #[test]
    fn episode_limits() {
        let ds = generate(&tiny()).unwrap();
        let ep = sample_episode(&ds, SplitSide::Test, 1, 1, 1, 0).unwrap();
        assert_eq!((ep.support.len(), ep.query.len()), (1, 1));
        assert!(matches!(sample_episode(&ds, SplitSide::Test, 3, 4, 3, 0), Err(Error::Config(_))));
        assert!(sample_episode(&ds, SplitSide::Test, 13, 1, 1, 0).is_err());
    }

    #[test]
    fn container_round_trip_and_checksum() {
        let ds = generate(&tiny()).unwrap();
        let mut bytes = Vec::new();
        ds.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], MAGIC);
        assert_eq!(RssDataset::read_from(bytes.as_slice()).unwrap(), ds);
        let last = bytes.len() - 1;
        bytes[last] ^= 0x40;
        assert!(matches!(RssDataset::read_from(bytes.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn csv_header() {
        let cfg = DatasetConfig { kappa_list: vec![1], angle_bins: 2, instances_per_bin: 1, feature_len: 3, ..Default::default() };
        let mut out = Vec::new();
        generate(&cfg).unwrap().write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("kappa,bin,instance,snr_db,f0,f1,f2\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
