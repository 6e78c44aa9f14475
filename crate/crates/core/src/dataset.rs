//! Per-antenna SNR measurement datasets and the WFA-versus-WMD campaign.
//!
//! CSV layout: `group,antenna,measurement,day,snr_db`, one row per antenna
//! per measurement, SNR in dB. Unreadable (`NaN` or empty) and negative SNRs
//! are dropped and reported, and so is every measurement left incomplete.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fmt::sci;
use crate::pareto::{
    build_curve, default_rho_grid, pareto_compare, CurveMode, Outcome, PwmdConfig, SchemeSpec, ToleranceRegion,
};
use crate::rng::{mix, stream, StreamDomain};
use crate::signal::db_to_linear;

pub const DATASET_CSV_HEADER: [&str; 5] = ["group", "antenna", "measurement", "day", "snr_db"];

/// An antenna is blocked when its SNR is below this many dB.
pub const BLOCKAGE_DB: f64 = 3.0;

pub type AntennaId = (String, u32);

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub group: String,
    pub antenna: u32,
    pub measurement: u32,
    pub day: String,
    pub snr_db: f64,
    /// Source line, 0 for rows that did not come from a file.
    pub line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    NotANumber,
    NegativeSnr,
    /// Repeats an earlier row with the same key and value.
    Duplicate,
    /// Some antenna lacks a valid value for this measurement.
    IncompleteMeasurement,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedRow {
    pub line: usize,
    pub group: String,
    pub antenna: u32,
    pub measurement: u32,
    pub reason: DropReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub dropped: Vec<DroppedRow>,
}

/// Validated, rectangular SNR measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrDataset {
    antennas: BTreeMap<String, Vec<u32>>,
    measurements: Vec<u32>,
    days: BTreeMap<u32, String>,
    values: BTreeMap<(String, u32, u32), f64>,
}

impl SnrDataset {
    /// Validate raw rows. Conflicting duplicates and inconsistent day labels are errors.
    pub fn from_rows(rows: Vec<DatasetRow>) -> Result<(Self, LoadReport)> {
        let mut report = LoadReport { rows_read: rows.len(), ..LoadReport::default() };
        let mut days: BTreeMap<u32, String> = BTreeMap::new();
        let mut values: BTreeMap<(String, u32, u32), f64> = BTreeMap::new();
        let mut seen: BTreeMap<(String, u32, u32), (f64, usize)> = BTreeMap::new();
        let mut all_keys: BTreeSet<(String, u32)> = BTreeSet::new();
        let mut all_meas: BTreeSet<u32> = BTreeSet::new();

        for row in rows {
            let drop = |reason| DroppedRow {
                line: row.line,
                group: row.group.clone(),
                antenna: row.antenna,
                measurement: row.measurement,
                reason,
            };
            if row.group.is_empty() {
                return Err(Error::Data(format!("line {}: empty group label", row.line)));
            }
            match days.get(&row.measurement) {
                Some(d) if *d != row.day => {
                    return Err(Error::Data(format!(
                        "line {}: measurement {} labelled day '{}' and '{}'",
                        row.line, row.measurement, d, row.day
                    )));
                }
                Some(_) => {}
                None => {
                    days.insert(row.measurement, row.day.clone());
                }
            }
            all_keys.insert((row.group.clone(), row.antenna));
            all_meas.insert(row.measurement);
            let key = (row.group.clone(), row.antenna, row.measurement);
            if let Some(&(prev, prev_line)) = seen.get(&key) {
                if prev.to_bits() == row.snr_db.to_bits() || (prev.is_nan() && row.snr_db.is_nan()) {
                    report.dropped.push(drop(DropReason::Duplicate));
                    continue;
                }
                return Err(Error::Data(format!(
                    "line {}: duplicate key ({}, {}, {}) already given on line {prev_line}",
                    row.line, row.group, row.antenna, row.measurement
                )));
            }
            seen.insert(key.clone(), (row.snr_db, row.line));
            if row.snr_db.is_nan() {
                report.dropped.push(drop(DropReason::NotANumber));
            } else if row.snr_db < 0.0 || row.snr_db.is_infinite() {
                report.dropped.push(drop(DropReason::NegativeSnr));
            } else {
                values.insert(key, row.snr_db);
            }
        }

        // Keep only measurements where every antenna has a valid value.
        let mut measurements = Vec::new();
        for &k in &all_meas {
            let complete = all_keys.iter().all(|(g, a)| values.contains_key(&(g.clone(), *a, k)));
            if complete {
                measurements.push(k);
                continue;
            }
            for (g, a) in &all_keys {
                if let Some(_v) = values.remove(&(g.clone(), *a, k)) {
                    let line = seen[&(g.clone(), *a, k)].1;
                    report.dropped.push(DroppedRow {
                        line,
                        group: g.clone(),
                        antenna: *a,
                        measurement: k,
                        reason: DropReason::IncompleteMeasurement,
                    });
                }
            }
            days.remove(&k);
        }
        if measurements.is_empty() {
            return Err(Error::Data("no complete measurement left after validation".into()));
        }
        report.dropped.sort_by_key(|d| (d.line, d.measurement));
        report.rows_kept = values.len();
        let mut antennas: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        for (g, a) in all_keys {
            antennas.entry(g).or_default().push(a);
        }
        Ok((Self { antennas, measurements, days, values }, report))
    }

    pub fn groups(&self) -> impl Iterator<Item = &str> {
        self.antennas.keys().map(String::as_str)
    }

    pub fn antennas(&self, group: &str) -> &[u32] {
        self.antennas.get(group).map_or(&[], Vec::as_slice)
    }

    pub fn measurements(&self) -> &[u32] {
        &self.measurements
    }

    pub fn day(&self, measurement: u32) -> Option<&str> {
        self.days.get(&measurement).map(String::as_str)
    }

    pub fn snr_db(&self, group: &str, antenna: u32, measurement: u32) -> Option<f64> {
        self.values.get(&(group.to_string(), antenna, measurement)).copied()
    }

    /// Number of stored SNR values.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Linear SNRs of one antenna across all measurements.
    pub fn series_linear(&self, id: &AntennaId) -> Result<Vec<f64>> {
        if !self.antennas(&id.0).contains(&id.1) {
            return invalid(format!("unknown antenna ({}, {})", id.0, id.1));
        }
        Ok(self
            .measurements
            .iter()
            .map(|&k| db_to_linear(self.values[&(id.0.clone(), id.1, k)]))
            .collect())
    }

    pub fn rows(&self) -> Vec<DatasetRow> {
        self.values
            .iter()
            .map(|((g, a, k), &v)| DatasetRow {
                group: g.clone(),
                antenna: *a,
                measurement: *k,
                day: self.days[k].clone(),
                snr_db: v,
                line: 0,
            })
            .collect()
    }
}

fn parse_snr(field: &str, line: usize) -> Result<f64> {
    let t = field.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    t.parse::<f64>().map_err(|e| Error::Parse { line, message: format!("snr_db '{t}': {e}") })
}

fn parse_index(field: &str, name: &str, line: usize) -> Result<u32> {
    field
        .trim()
        .parse::<u32>()
        .map_err(|e| Error::Parse { line, message: format!("{name} '{}': {e}", field.trim()) })
}

/// Parse dataset CSV from any reader.
pub fn parse_dataset<R: Read>(input: R) -> Result<(SnrDataset, LoadReport)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != DATASET_CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header '{}', got '{}'", DATASET_CSV_HEADER.join(","), names.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push(DatasetRow {
            group: rec[0].trim().to_string(),
            antenna: parse_index(&rec[1], "antenna", line)?,
            measurement: parse_index(&rec[2], "measurement", line)?,
            day: rec[3].trim().to_string(),
            snr_db: parse_snr(&rec[4], line)?,
            line,
        });
    }
    SnrDataset::from_rows(rows)
}

pub fn load_dataset(path: &Path) -> Result<(SnrDataset, LoadReport)> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_dataset(std::io::BufReader::new(file))
}

pub fn write_dataset_csv<W: Write>(out: W, ds: &SnrDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DATASET_CSV_HEADER)?;
    let mut rows = ds.rows();
    rows.sort_by(|a, b| (a.measurement, &a.group, a.antenna).cmp(&(b.measurement, &b.group, b.antenna)));
    for r in rows {
        w.write_record([r.group, r.antenna.to_string(), r.measurement.to_string(), r.day, sci(r.snr_db)])?;
    }
    w.flush()?;
    Ok(())
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return invalid(format!("series lengths differ: {} vs {}", x.len(), y.len()));
    }
    if x.len() < 2 {
        return invalid("correlation needs at least 2 points");
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedCorrelation("first series".into()));
    }
    if syy == 0.0 {
        return Err(Error::UndefinedCorrelation("second series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation of two antennas' linear SNR series.
pub fn snr_correlation(ds: &SnrDataset, reference: &AntennaId, other: &AntennaId) -> Result<f64> {
    pearson(&ds.series_linear(reference)?, &ds.series_linear(other)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockageCase {
    NonBlocked,
    PartiallyBlocked,
    FullyBlocked,
}

impl BlockageCase {
    pub fn label(self) -> &'static str {
        match self {
            BlockageCase::NonBlocked => "non-blocked",
            BlockageCase::PartiallyBlocked => "partially-blocked",
            BlockageCase::FullyBlocked => "fully-blocked",
        }
    }
}

/// Flag antennas below the blockage threshold and label the pattern.
pub fn classify_blockage(snrs_db: &[f64]) -> (Vec<bool>, BlockageCase) {
    let flags: Vec<bool> = snrs_db.iter().map(|&s| s < BLOCKAGE_DB).collect();
    let n_blocked = flags.iter().filter(|&&b| b).count();
    let case = if n_blocked == 0 {
        BlockageCase::NonBlocked
    } else if n_blocked == flags.len() {
        BlockageCase::FullyBlocked
    } else {
        BlockageCase::PartiallyBlocked
    };
    (flags, case)
}

/// Pick `per_group` antennas uniformly without replacement from every group.
pub fn sample_antennas(ds: &SnrDataset, per_group: usize, seed: u64) -> Result<Vec<AntennaId>> {
    if per_group == 0 {
        return invalid("per_group must be at least 1");
    }
    let mut out = Vec::new();
    for (gi, (group, ants)) in ds.antennas.iter().enumerate() {
        if per_group > ants.len() {
            return invalid(format!("group {group} has {} antennas, asked for {per_group}", ants.len()));
        }
        let mut rng = stream(seed, StreamDomain::Sampling, gi as u64, 0);
        let mut idx = sample(&mut rng, ants.len(), per_group).into_vec();
        idx.sort_unstable();
        out.extend(idx.into_iter().map(|i| (group.clone(), ants[i])));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Pairing {
    #[serde(rename = "WFA-vs-I-WMD")]
    WfaVsIWmd,
    #[serde(rename = "WFA-vs-P-WMD")]
    WfaVsPWmd,
}

impl Pairing {
    pub const ALL: [Pairing; 2] = [Pairing::WfaVsIWmd, Pairing::WfaVsPWmd];

    pub fn label(self) -> &'static str {
        match self {
            Pairing::WfaVsIWmd => "WFA-vs-I-WMD",
            Pairing::WfaVsPWmd => "WFA-vs-P-WMD",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub eta: usize,
    pub region: ToleranceRegion,
    pub per_group: usize,
    pub seed: u64,
    pub pwmd: PwmdConfig,
    pub rho_grid: Vec<f64>,
    pub mode: CurveMode,
}

impl CampaignConfig {
    pub fn new(region: ToleranceRegion, seed: u64) -> Self {
        Self {
            eta: 16,
            region,
            per_group: 2,
            seed,
            pwmd: PwmdConfig::default(),
            rho_grid: default_rho_grid(),
            mode: CurveMode::Analytic,
        }
    }
}

/// Outcome of one pairing from WFA's side; `None` when the WMD scheme had no curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementRecord {
    pub measurement: u32,
    pub day: String,
    pub antennas: Vec<AntennaId>,
    pub blockage: BlockageCase,
    pub verdicts: BTreeMap<Pairing, Option<Outcome>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct VerdictCounts {
    pub wins: u64,
    pub draws: u64,
    pub losses: u64,
    pub skipped: u64,
}

impl VerdictCounts {
    fn add(&mut self, v: Option<Outcome>) {
        match v {
            Some(Outcome::AWins) => self.wins += 1,
            Some(Outcome::Draw) => self.draws += 1,
            Some(Outcome::BWins) => self.losses += 1,
            None => self.skipped += 1,
        }
    }

    pub fn decided(&self) -> u64 {
        self.wins + self.draws + self.losses
    }

    /// `(win, draw, loss)` fractions over decided measurements.
    pub fn fractions(&self) -> Option<(f64, f64, f64)> {
        let n = self.decided() as f64;
        (n > 0.0).then(|| (self.wins as f64 / n, self.draws as f64 / n, self.losses as f64 / n))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PartitionSummary {
    pub measurements: u64,
    pub blockage: BTreeMap<BlockageCase, u64>,
    pub pairings: BTreeMap<Pairing, VerdictCounts>,
}

impl PartitionSummary {
    fn add(&mut self, r: &MeasurementRecord) {
        self.measurements += 1;
        *self.blockage.entry(r.blockage).or_default() += 1;
        for (&p, &v) in &r.verdicts {
            self.pairings.entry(p).or_default().add(v);
        }
    }

    /// Fraction of measurements with at least one blocked antenna.
    pub fn blocked_fraction(&self) -> f64 {
        let clear = self.blockage.get(&BlockageCase::NonBlocked).copied().unwrap_or(0);
        1.0 - clear as f64 / self.measurements as f64
    }
}

/// Name of the partition aggregating every measurement.
pub const OVERALL: &str = "all";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignSummary {
    /// Keyed by day label, plus [`OVERALL`].
    pub partitions: BTreeMap<String, PartitionSummary>,
    pub records: Vec<MeasurementRecord>,
}

impl CampaignSummary {
    pub fn overall(&self) -> &PartitionSummary {
        &self.partitions[OVERALL]
    }

    /// Day partitions in label order, then the overall row.
    fn ordered(&self) -> impl Iterator<Item = (&String, &PartitionSummary)> {
        self.partitions
            .iter()
            .filter(|(k, _)| k.as_str() != OVERALL)
            .chain(self.partitions.get_key_value(OVERALL))
    }

    /// CSV with win/draw/loss fractions and the skipped count.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["partition", "pairing", "wins", "draws", "losses", "skipped"])?;
        for (name, part) in self.ordered() {
            for p in Pairing::ALL {
                let c = part.pairings.get(&p).copied().unwrap_or_default();
                let (a, d, l) = c.fractions().unwrap_or((f64::NAN, f64::NAN, f64::NAN));
                w.write_record([name.clone(), p.label().to_string(), sci(a), sci(d), sci(l), c.skipped.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Data(e.to_string()))
    }
}

fn verdict(
    wfa: &crate::pareto::MdFaCurve,
    other: &SchemeSpec,
    gammas: &[f64],
    cfg: &CampaignConfig,
) -> Result<Option<Outcome>> {
    let curve = build_curve(other, gammas, cfg.eta, &cfg.rho_grid, cfg.mode)?;
    if curve.points.is_empty() {
        return Ok(None);
    }
    Ok(Some(pareto_compare(wfa, &curve, &cfg.region).outcome))
}

fn run_measurement(ds: &SnrDataset, k: u32, cfg: &CampaignConfig) -> Result<MeasurementRecord> {
    let seed_k = mix(cfg.seed, k as u64);
    let antennas = sample_antennas(ds, cfg.per_group, seed_k)?;
    let snr_db: Vec<f64> = antennas.iter().map(|(g, a)| ds.values[&(g.clone(), *a, k)]).collect();
    let gammas: Vec<f64> = snr_db.iter().map(|&d| db_to_linear(d)).collect();
    let (_, blockage) = classify_blockage(&snr_db);
    let mode = match cfg.mode {
        CurveMode::MonteCarlo { trials, .. } => CurveMode::MonteCarlo { trials, seed: mix(seed_k, 2) },
        m => m,
    };
    let cfg_k = CampaignConfig { mode, ..cfg.clone() };
    let wfa = build_curve(&SchemeSpec::Wfa, &gammas, cfg.eta, &cfg.rho_grid, mode)?;
    let pwmd = SchemeSpec::PWmd(PwmdConfig { seed: mix(seed_k, 1), ..cfg.pwmd.clone() });
    let mut verdicts = BTreeMap::new();
    verdicts.insert(Pairing::WfaVsIWmd, verdict(&wfa, &SchemeSpec::IWmd, &gammas, &cfg_k)?);
    verdicts.insert(Pairing::WfaVsPWmd, verdict(&wfa, &pwmd, &gammas, &cfg_k)?);
    Ok(MeasurementRecord {
        measurement: k,
        day: ds.days[&k].clone(),
        antennas,
        blockage,
        verdicts,
    })
}

/// Benchmark WFA against I-WMD and P-WMD on every measurement.
pub fn run_campaign(ds: &SnrDataset, cfg: &CampaignConfig) -> Result<CampaignSummary> {
    if cfg.rho_grid.is_empty() {
        return invalid("rho grid is empty");
    }
    let records: Vec<MeasurementRecord> = ds
        .measurements
        .par_iter()
        .map(|&k| run_measurement(ds, k, cfg))
        .collect::<Result<_>>()?;
    let mut partitions: BTreeMap<String, PartitionSummary> = BTreeMap::new();
    for r in &records {
        partitions.entry(r.day.clone()).or_default().add(r);
        partitions.entry(OVERALL.to_string()).or_default().add(r);
    }
    Ok(CampaignSummary { partitions, records })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub groups: usize,
    pub antennas_per_group: u32,
    pub measurements: u32,
    pub days: u32,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { groups: 4, antennas_per_group: 8, measurements: 1000, days: 4, seed: 1 }
    }
}

/// Group labels `A`, `B`, ... in placement order.
fn group_label(i: usize) -> String {
    char::from(b'A' + (i % 26) as u8).to_string()
}

/// Synthetic measurements with a distance-driven correlation structure.
///
/// Groups sit evenly on a circle around a room and a user wanders inside it.
/// With an even group count, group `i` faces group `n - 1 - i` (A faces D).
/// Every antenna's SNR falls with the user's distance to its group, so
/// antennas of one group move together and groups on opposite sides move
/// against each other. Occasional blockage knocks a whole group down by 4 dB.
pub fn synthesize_dataset(cfg: &SyntheticConfig) -> Result<SnrDataset> {
    if cfg.groups == 0 || cfg.groups > 26 || cfg.antennas_per_group == 0 || cfg.measurements == 0 || cfg.days == 0 {
        return invalid("synthetic dataset needs 1..=26 groups and positive antenna, measurement and day counts");
    }
    let normal = rand_distr::StandardNormal;
    let n = cfg.groups;
    let centers: Vec<(f64, f64)> = (0..n)
        .map(|g| {
            let slot = if n.is_multiple_of(2) && g >= n / 2 { n - 1 - g + n / 2 } else { g };
            let t = std::f64::consts::TAU * slot as f64 / n as f64;
            (t.cos(), t.sin())
        })
        .collect();
    // Fixed per-antenna gain offsets.
    let mut offsets_rng = stream(cfg.seed, StreamDomain::Synthetic, u64::MAX, 0);
    let offsets: Vec<Vec<f64>> = (0..cfg.groups)
        .map(|_| {
            (0..cfg.antennas_per_group)
                .map(|_| rand_distr::Distribution::<f64>::sample(&normal, &mut offsets_rng))
                .collect()
        })
        .collect();

    let mut rows = Vec::new();
    for k in 0..cfg.measurements {
        let mut rng = stream(cfg.seed, StreamDomain::Synthetic, 0, k as u64);
        // Uniform position in the unit disc.
        let r = rng.random::<f64>().sqrt();
        let th = std::f64::consts::TAU * rng.random::<f64>();
        let (x, y) = (r * th.cos(), r * th.sin());
        let day = format!("day{}", 1 + (k as u64 * cfg.days as u64 / cfg.measurements as u64));
        for (g, &(cx, cy)) in centers.iter().enumerate() {
            let dist = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
            let blocked = rng.random::<f64>() < 0.03;
            for a in 0..cfg.antennas_per_group {
                let jitter: f64 = rand_distr::Distribution::sample(&normal, &mut rng);
                let mut snr = 9.0 - 3.0 * dist + 0.5 * offsets[g][a as usize] + 0.3 * jitter;
                if blocked {
                    snr -= 4.0;
                }
                rows.push(DatasetRow {
                    group: group_label(g),
                    antenna: a + 1,
                    measurement: k,
                    day: day.clone(),
                    snr_db: snr.max(0.1),
                    line: 0,
                });
            }
        }
    }
    Ok(SnrDataset::from_rows(rows)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(g: &str, a: u32, k: u32, v: f64) -> DatasetRow {
        DatasetRow { group: g.into(), antenna: a, measurement: k, day: "d1".into(), snr_db: v, line: 0 }
    }

    fn small_csv() -> String {
        let mut s = String::from("group,antenna,measurement,day,snr_db\n");
        for g in ["A", "B"] {
            for a in 1..=2 {
                for k in 0..3 {
                    s.push_str(&format!("{g},{a},{k},mon,{}\n", 5.0 + a as f64 + k as f64));
                }
            }
        }
        s
    }

    #[test]
    fn loads_valid_grid() {
        let (ds, rep) = parse_dataset(small_csv().as_bytes()).unwrap();
        assert_eq!(ds.len(), 12);
        assert!(rep.dropped.is_empty());
        assert_eq!(ds.groups().collect::<Vec<_>>(), vec!["A", "B"]);
        assert_eq!(ds.snr_db("B", 2, 1), Some(8.0));
        assert_eq!(ds.day(2), Some("mon"));
    }

    #[test]
    fn negative_and_nan_dropped_with_measurement() {
        let csv = small_csv().replace("A,1,1,mon,7", "A,1,1,mon,-1.2").replace("B,2,2,mon,9", "B,2,2,mon,NaN");
        let (ds, rep) = parse_dataset(csv.as_bytes()).unwrap();
        assert_eq!(ds.measurements(), &[0]);
        let neg = rep.dropped.iter().find(|d| d.reason == DropReason::NegativeSnr).unwrap();
        assert_eq!((neg.line, neg.measurement), (3, 1));
        assert!(rep.dropped.iter().any(|d| d.reason == DropReason::NotANumber && d.line == 13));
        // 8 values removed from the two incomplete measurements, minus the 2 invalid ones.
        assert_eq!(rep.dropped.iter().filter(|d| d.reason == DropReason::IncompleteMeasurement).count(), 6);
        assert_eq!(ds.len(), 4);
    }

    #[test]
    fn malformed_input_reports_line() {
        let bad_header = "grp,antenna,measurement,day,snr_db\nA,1,0,x,3\n";
        assert!(matches!(parse_dataset(bad_header.as_bytes()), Err(Error::Parse { line: 1, .. })));
        let bad_row = small_csv().replace("A,2,0,mon,7", "A,2,0,mon,abc");
        assert!(matches!(parse_dataset(bad_row.as_bytes()), Err(Error::Parse { line: 5, .. })));
        let bad_idx = small_csv().replace("B,1,0,", "B,x,0,");
        assert!(matches!(parse_dataset(bad_idx.as_bytes()), Err(Error::Parse { line: 8, .. })));
    }

    #[test]
    fn duplicate_keys() {
        let conflict = format!("{}A,1,0,mon,9.5\n", small_csv());
        assert!(matches!(parse_dataset(conflict.as_bytes()), Err(Error::Data(_))));
        let repeat = format!("{}A,1,0,mon,6\n", small_csv());
        let (ds, rep) = parse_dataset(repeat.as_bytes()).unwrap();
        assert_eq!(ds.len(), 12);
        assert_eq!(rep.dropped[0].reason, DropReason::Duplicate);
    }

    #[test]
    fn row_order_does_not_matter() {
        let mut rows: Vec<DatasetRow> = (0..3).flat_map(|k| [row("A", 1, k, 4.0 + k as f64), row("B", 1, k, 9.0 - k as f64)]).collect();
        let a = SnrDataset::from_rows(rows.clone()).unwrap().0;
        rows.reverse();
        assert_eq!(a, SnrDataset::from_rows(rows).unwrap().0);
    }

    #[test]
    fn correlation_examples() {
        let x = [1.0, 2.0, 4.0, 8.0];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| 10.0 - v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(pearson(&x, &[1.0; 4]), Err(Error::UndefinedCorrelation(_))));
        assert!(pearson(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn correlation_uses_linear_snr() {
        let rows: Vec<DatasetRow> = [0.0, 10.0, 20.0]
            .iter()
            .enumerate()
            .flat_map(|(k, &d)| [row("A", 1, k as u32, d), row("A", 2, k as u32, d / 2.0)])
            .collect();
        let ds = SnrDataset::from_rows(rows).unwrap().0;
        let c = snr_correlation(&ds, &("A".into(), 1), &("A".into(), 2)).unwrap();
        let want = pearson(&[1.0, 10.0, 100.0], &[1.0, 10f64.sqrt(), 10.0]).unwrap();
        assert!((c - want).abs() < 1e-15);
        assert!(snr_correlation(&ds, &("A".into(), 9), &("A".into(), 2)).is_err());
    }

    #[test]
    fn blockage_labels() {
        let (flags, case) = classify_blockage(&[0.2013, 3.5843, 3.3318, 4.2489]);
        assert_eq!(flags, vec![true, false, false, false]);
        assert_eq!(case, BlockageCase::PartiallyBlocked);
        assert_eq!(classify_blockage(&[5.0; 4]).1, BlockageCase::NonBlocked);
        assert_eq!(classify_blockage(&[1.0; 4]).1, BlockageCase::FullyBlocked);
    }

    #[test]
    fn sampling_rules() {
        let ds = synthesize_dataset(&SyntheticConfig { measurements: 2, ..Default::default() }).unwrap();
        let all = sample_antennas(&ds, 8, 3).unwrap();
        assert_eq!(all.len(), 32);
        assert_eq!(all[..8].iter().map(|x| x.1).collect::<Vec<_>>(), (1..=8).collect::<Vec<_>>());
        assert_eq!(sample_antennas(&ds, 2, 5).unwrap(), sample_antennas(&ds, 2, 5).unwrap());
        assert!(sample_antennas(&ds, 9, 5).is_err());
        assert!(sample_antennas(&ds, 0, 5).is_err());
    }

    #[test]
    fn synthetic_structure() {
        let ds = synthesize_dataset(&SyntheticConfig::default()).unwrap();
        assert_eq!(ds.measurements().len(), 1000);
        let id = |g: &str, a: u32| (g.to_string(), a);
        for g in ["A", "B", "C", "D"] {
            let c = snr_correlation(&ds, &id(g, 1), &id(g, 5)).unwrap();
            assert!(c > 0.8, "within {g}: {c}");
        }
        for (g, h) in [("A", "D"), ("B", "C")] {
            let c = snr_correlation(&ds, &id(g, 1), &id(h, 1)).unwrap();
            assert!(c < 0.0, "{g} vs {h}: {c}");
        }
        assert_eq!(ds.day(0), Some("day1"));
        assert_eq!(ds.day(999), Some("day4"));
    }

    #[test]
    fn dataset_csv_round_trip() {
        let ds = synthesize_dataset(&SyntheticConfig { measurements: 5, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &ds).unwrap();
        let (back, rep) = parse_dataset(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
        assert!(rep.dropped.is_empty());
    }

    #[test]
    fn equal_snrs_draw() {
        let rows: Vec<DatasetRow> = ["A", "B"].iter().flat_map(|g| [row(g, 1, 0, 4.0), row(g, 2, 0, 4.0)]).collect();
        let ds = SnrDataset::from_rows(rows).unwrap().0;
        let cfg = CampaignConfig::new(ToleranceRegion::new(1e-6, 1e-4).unwrap(), 1);
        let s = run_campaign(&ds, &cfg).unwrap();
        assert_eq!(s.records[0].verdicts[&Pairing::WfaVsIWmd], Some(Outcome::Draw));
    }

    #[test]
    fn fully_blocked_measurement_is_skipped() {
        let rows: Vec<DatasetRow> = ["A", "B"].iter().flat_map(|g| [row(g, 1, 0, 0.5), row(g, 2, 0, 0.5)]).collect();
        let ds = SnrDataset::from_rows(rows).unwrap().0;
        let mut cfg = CampaignConfig::new(ToleranceRegion::new(1e-6, 1e-4).unwrap(), 1);
        cfg.rho_grid = crate::pareto::rho_grid(0.6, 0.95, 32).unwrap();
        let s = run_campaign(&ds, &cfg).unwrap();
        let c = s.overall().pairings[&Pairing::WfaVsIWmd];
        assert_eq!((c.skipped, c.decided()), (1, 0));
        assert_eq!(s.overall().blocked_fraction(), 1.0);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("all,WFA-vs-I-WMD,NaN,NaN,NaN,1"));
    }
}
