use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use pdetect::analytic::{pfa_multi, pfa_single, pfa_wfa, pmd_multi, pmd_single, pmd_wfa, OperatingPoint};
use pdetect::dataset::{load_dataset, run_campaign, synthesize_dataset, write_dataset_csv, CampaignConfig, SyntheticConfig};
use pdetect::fmt::sci;
use pdetect::montecarlo::{compare_metrics, estimate_rate, validate_moments, write_rate_csv, MetricKind, RateRecord, TrialPlan};
use pdetect::pareto::{
    build_curve, pareto_compare, rho_grid, write_curves_csv, CurveMode, MdFaCurve, Outcome, PwmdConfig, SchemeSpec,
    ToleranceRegion,
};
use pdetect::signal::{db_to_linear, make_preamble, AntennaScenario};
use pdetect::weights::{wmd_weights, WeightVector};
use pdetect::{Hypothesis, PreambleKind};

use crate::cli::{
    parse_grid, AnalyticArgs, BenchmarkArgs, FixturesArgs, HypothesisArg, MetricArg, ModeArg, MomentsArgs, PreambleArg,
    SchemeArg, SimulateArgs, SnrArgs, SynthArgs,
};
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Collects outputs; writes files under `--out` or prints to stdout.
pub struct Output {
    dir: Option<PathBuf>,
    files: Vec<String>,
    seed: Option<u64>,
}

impl Output {
    pub fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d).map_err(|e| CliError::Io(format!("{}: {e}", d.display())))?;
        }
        Ok(Self { dir: dir.map(Path::to_path_buf), files: Vec::new(), seed: None })
    }

    fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Write `name` under the output directory, or echo it when `always_print`
    /// or no directory was given.
    fn emit(&mut self, name: &str, bytes: &[u8], print_without_dir: bool) -> Result<()> {
        match &self.dir {
            Some(d) => {
                let path = d.join(name);
                fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                self.files.push(name.to_string());
            }
            None if print_without_dir => print!("{}", String::from_utf8_lossy(bytes)),
            None => {}
        }
        Ok(())
    }

    /// Record the manifest next to the outputs.
    pub fn finish(self, argv: &[String]) -> Result<()> {
        let Some(dir) = self.dir else { return Ok(()) };
        let manifest = json!({
            "command": argv,
            "seed": self.seed,
            "versions": {
                "pdetect": env!("CARGO_PKG_VERSION"),
            },
            "outputs": self.files,
        });
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

fn csv_bytes<F>(write: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> pdetect::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

/// Linear SNRs from `--snr-db` or `--snr`, if either was given.
fn gammas(args: &SnrArgs) -> Result<Option<Vec<f64>>> {
    let g = match (&args.snr_db, &args.snr) {
        (Some(db), _) => Some(db.iter().map(|&d| db_to_linear(d)).collect::<Vec<f64>>()),
        (None, Some(lin)) => Some(lin.clone()),
        (None, None) => None,
    };
    if let Some(v) = &g {
        if v.is_empty() {
            return Err(CliError::Usage("--snr/--snr-db needs at least one value".into()));
        }
        if let Some(x) = v.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
            return Err(CliError::Usage(format!("--snr/--gamma values must be positive and finite, got {x}")));
        }
    }
    Ok(g)
}

fn thresholds(rho: Option<f64>, range: Option<&str>) -> Result<Vec<f64>> {
    match (rho, range) {
        (Some(r), None) => Ok(vec![r]),
        (None, Some(s)) => {
            let (lo, hi, n) = parse_grid(s).map_err(|e| CliError::Usage(format!("--rho-range: {e}")))?;
            rho_grid(lo, hi, n).map_err(|e| CliError::Usage(format!("--rho-range: {e}")))
        }
        (None, None) => Err(CliError::Usage("one of --rho or --rho-range is required".into())),
        (Some(_), Some(_)) => Err(CliError::Usage("--rho and --rho-range are mutually exclusive".into())),
    }
}

fn user_weights(w: &[f64], n: Option<usize>) -> Result<WeightVector<f64>> {
    if let Some(n) = n {
        if w.len() != n {
            return Err(CliError::Usage(format!("--weights has {} entries for {n} antennas", w.len())));
        }
    }
    WeightVector::normalized(w).map_err(|e| CliError::Usage(format!("--weights: {e}")))
}

pub fn analytic(args: &AnalyticArgs, out: &mut Output) -> Result<()> {
    let grid = thresholds(args.rho, args.rho_range.as_deref())?;
    let g = gammas(&args.snr)?;
    let n = g.as_ref().map(Vec::len);
    let scheme = match (&args.weights, args.scheme, n) {
        (Some(_), _, _) => None,
        (None, Some(s), _) => Some(s),
        (None, None, Some(k)) if k > 1 => Some(SchemeArg::Wfa),
        (None, None, _) => Some(SchemeArg::Single),
    };
    match (scheme, n) {
        (Some(SchemeArg::Single), Some(k)) if k > 1 => {
            return Err(CliError::Usage(format!("--scheme single takes at most one SNR, got {k}")));
        }
        (Some(SchemeArg::Wfa | SchemeArg::Iwmd), None) => {
            return Err(CliError::Usage("--scheme wfa/iwmd needs --snr or --snr-db".into()));
        }
        _ => {}
    }
    let fixed = match &args.weights {
        Some(w) => Some(user_weights(w, n)?),
        None => None,
    };
    let label = match scheme {
        Some(SchemeArg::Wfa) => "WFA",
        Some(SchemeArg::Iwmd) => "I-WMD",
        Some(SchemeArg::Single) => "single",
        None => "custom",
    };

    let mut text = String::from("rho,pfa,pmd,scheme\n");
    for &rho in &grid {
        let (pfa, pmd) = match (scheme, &g) {
            (Some(SchemeArg::Single), None) => (pfa_single(args.eta, rho)?, None),
            (Some(SchemeArg::Single), Some(g)) => (pfa_single(args.eta, rho)?, Some(pmd_single(args.eta, rho, g[0])?)),
            (Some(SchemeArg::Wfa), Some(g)) => (pfa_wfa(args.eta, rho, g.len())?, Some(pmd_wfa(args.eta, rho, g)?)),
            (Some(SchemeArg::Iwmd), Some(g)) => {
                let w = wmd_weights(g, rho)?;
                (pfa_multi(args.eta, rho, w.as_slice())?, Some(pmd_multi(args.eta, rho, g, w.as_slice())?))
            }
            (None, g) => {
                let w = fixed.as_ref().expect("weights present when no scheme");
                let pmd = match g {
                    Some(g) => Some(pmd_multi(args.eta, rho, g, w.as_slice())?),
                    None => None,
                };
                (pfa_multi(args.eta, rho, w.as_slice())?, pmd)
            }
            _ => unreachable!("scheme and SNR combination validated above"),
        };
        let pmd = pmd.map(sci).unwrap_or_default();
        text.push_str(&format!("{},{},{pmd},{label}\n", sci(rho), sci(pfa)));
    }
    out.emit("analytic.csv", text.as_bytes(), true)
}

fn preamble_kind(p: PreambleArg) -> PreambleKind {
    match p {
        PreambleArg::Qpsk => PreambleKind::QpskRandom,
        PreambleArg::Chirp => PreambleKind::ConstantEnvelope,
    }
}

pub fn simulate(args: &SimulateArgs, out: &mut Output) -> Result<()> {
    out.seed(args.seed);
    let hypothesis = match args.hypothesis {
        HypothesisArg::Noise => Hypothesis::NoiseOnly,
        HypothesisArg::Packet => Hypothesis::PacketPresent,
    };
    let g = match (gammas(&args.snr)?, hypothesis) {
        (Some(g), _) => g,
        (None, Hypothesis::NoiseOnly) => vec![1.0],
        (None, Hypothesis::PacketPresent) => {
            return Err(CliError::Usage("--hypothesis packet needs --snr, --gamma or --snr-db".into()));
        }
    };
    let scenario = AntennaScenario::from_snr(1.0, &g)?;
    let spec = make_preamble(args.eta, preamble_kind(args.preamble), args.seed)?;
    let record_gamma = if hypothesis == Hypothesis::NoiseOnly { Vec::new() } else { g.clone() };
    let record = |metric, rate| RateRecord {
        metric,
        hypothesis,
        eta: args.eta,
        rho: args.rho,
        gamma: record_gamma.clone(),
        rate,
    };

    if args.paired {
        if g.len() != 1 {
            return Err(CliError::Usage("--paired compares single-antenna metrics; give one SNR".into()));
        }
        let rep = compare_metrics(args.trials, args.seed, hypothesis, &spec, &scenario, args.rho)?;
        eprintln!(
            "paired difference (rp-real minus sc-abs) {} +/- {}; containment violations {}",
            sci(rep.difference),
            sci(rep.difference_std),
            rep.containment_violations
        );
        let recs = [record(MetricKind::ScAbs, rep.sc_abs), record(MetricKind::RpReal, rep.rp_real)];
        let bytes = csv_bytes(|b| write_rate_csv(b, &recs))?;
        return out.emit("simulate.csv", &bytes, true);
    }

    let metric = match args.metric {
        MetricArg::ScAbs => MetricKind::ScAbs,
        MetricArg::RpReal => MetricKind::RpReal,
        MetricArg::CompensatedCombined => MetricKind::CompensatedCombined,
    };
    if metric != MetricKind::CompensatedCombined && g.len() != 1 {
        return Err(CliError::Usage(format!("--metric {} needs exactly one antenna", metric.label())));
    }
    let weights = match (&args.weights, args.scheme) {
        (Some(w), _) => user_weights(w, Some(g.len()))?,
        (None, Some(SchemeArg::Iwmd)) => wmd_weights(&g, args.rho)?,
        (None, Some(SchemeArg::Single)) if g.len() != 1 => {
            return Err(CliError::Usage("--scheme single needs exactly one antenna".into()));
        }
        (None, _) => WeightVector::equal(g.len())?,
    };
    let plan = TrialPlan::new(args.trials, args.seed, hypothesis, metric).with_weights(weights.clone());
    let rate = estimate_rate(&plan, &spec, &scenario, args.rho)?;
    if metric != MetricKind::ScAbs {
        let reference = match hypothesis {
            Hypothesis::NoiseOnly => pfa_multi(args.eta, args.rho, weights.as_slice())?,
            Hypothesis::PacketPresent => pmd_multi(args.eta, args.rho, &g, weights.as_slice())?,
        };
        eprintln!(
            "closed form {}; empirical {} ({:+.2} std)",
            sci(reference),
            sci(rate.rate),
            rate.sigmas_from(reference)
        );
    }
    let bytes = csv_bytes(|b| write_rate_csv(b, &[record(metric, rate)]))?;
    out.emit("simulate.csv", &bytes, true)
}

pub fn moments(args: &MomentsArgs, out: &mut Output) -> Result<()> {
    out.seed(args.seed);
    let spec = make_preamble(args.eta, PreambleKind::QpskRandom, args.seed)?;
    let scenario = AntennaScenario::from_noise(args.power, &[args.noise])?;
    let rep = validate_moments(&spec, &scenario, args.trials, args.seed, args.rho)?;
    if rep.gaussian_caution {
        eprintln!("warning: eta = {} is small; the Gaussian approximation may be poor", rep.eta);
    }
    let text = serde_json::to_string_pretty(&rep).expect("report serializes") + "\n";
    out.emit("moments.json", text.as_bytes(), true)
}

fn outcome_label(o: Outcome, other: &str) -> String {
    match o {
        Outcome::AWins => "WFA-wins".to_string(),
        Outcome::Draw => "draw".to_string(),
        Outcome::BWins => format!("{other}-wins"),
    }
}

pub fn benchmark(args: &BenchmarkArgs, out: &mut Output) -> Result<()> {
    out.seed(args.seed);
    let region = ToleranceRegion::new(args.pfa_max, args.pmd_max)?;
    let (lo, hi, n) = parse_grid(&args.grid).map_err(|e| CliError::Usage(format!("--grid: {e}")))?;
    let grid = rho_grid(lo, hi, n).map_err(|e| CliError::Usage(format!("--grid: {e}")))?;
    if args.draws == 0 {
        return Err(CliError::Usage("--draws must be at least 1".into()));
    }
    if !(args.interference >= 0.0) {
        return Err(CliError::Usage("--interference must be >= 0".into()));
    }
    let pwmd = PwmdConfig { draws: args.draws, interference_ratio: args.interference, seed: args.seed, ..PwmdConfig::default() };
    let mode = match args.mode {
        ModeArg::Analytic => CurveMode::Analytic,
        ModeArg::Montecarlo => CurveMode::MonteCarlo { trials: args.trials, seed: args.seed },
    };

    if let Some(path) = &args.dataset {
        let (ds, report) = load_dataset(path)?;
        if !report.dropped.is_empty() {
            eprintln!("dropped {} rows during validation", report.dropped.len());
        }
        let cfg = CampaignConfig {
            eta: args.eta,
            region,
            per_group: args.per_group,
            seed: args.seed,
            pwmd,
            rho_grid: grid,
            mode,
        };
        let summary = run_campaign(&ds, &cfg)?;
        let csv = csv_bytes(|b| summary.write_csv(b))?;
        out.emit("summary.csv", &csv, true)?;
        let json = summary.to_json()? + "\n";
        out.emit("summary.json", json.as_bytes(), false)?;
        let rep = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        return out.emit("load_report.json", rep.as_bytes(), false);
    }

    let g = gammas(&args.snr)?.ok_or_else(|| CliError::Usage("give --snr/--snr-db or --dataset".into()))?;
    let curves: Vec<MdFaCurve> = [SchemeSpec::Wfa, SchemeSpec::IWmd, SchemeSpec::PWmd(pwmd)]
        .iter()
        .map(|s| build_curve(s, &g, args.eta, &grid, mode))
        .collect::<pdetect::Result<_>>()?;
    let mut text = String::from("pairing,outcome,feasible_wfa,feasible_other\n");
    for other in &curves[1..] {
        let label = other.scheme.label();
        if other.points.is_empty() {
            text.push_str(&format!("WFA-vs-{label},skipped,,\n"));
            continue;
        }
        let v = pareto_compare(&curves[0], other, &region);
        text.push_str(&format!(
            "WFA-vs-{label},{},{},{}\n",
            outcome_label(v.outcome, label),
            v.feasible_a,
            v.feasible_b
        ));
    }
    out.emit("verdicts.csv", text.as_bytes(), true)?;
    let curve_csv = csv_bytes(|b| write_curves_csv(b, &curves))?;
    out.emit("curves.csv", &curve_csv, false)
}

pub fn synth_dataset(args: &SynthArgs, out: &mut Output) -> Result<()> {
    out.seed(args.seed);
    let measurements = u32::try_from(args.measurements)
        .map_err(|_| CliError::Usage("--measurements is too large".into()))?;
    let cfg = SyntheticConfig {
        groups: args.groups,
        antennas_per_group: args.antennas,
        measurements,
        days: args.days,
        seed: args.seed,
    };
    let ds = synthesize_dataset(&cfg)?;
    let bytes = csv_bytes(|b| write_dataset_csv(b, &ds))?;
    out.emit("dataset.csv", &bytes, false)
}

fn point_json(p: OperatingPoint<f64>) -> serde_json::Value {
    json!({ "rho": p.rho, "pfa": p.pfa, "pmd": p.pmd })
}

/// Regression fixtures: closed-form values for the two reference SNR sets.
pub fn fixtures(_args: &FixturesArgs, out: &mut Output) -> Result<()> {
    let sets = [
        ("example_one", [3.6118, 3.8903, 4.0338, 3.3649]),
        ("example_two", [0.2013, 3.5843, 3.3318, 4.2489]),
    ];
    let mut cases = serde_json::Map::new();
    for (name, db) in sets {
        let g: Vec<f64> = db.iter().map(|&d| db_to_linear(d)).collect();
        let grid = [0.3, 0.45, 0.6];
        let wfa = build_curve(&SchemeSpec::Wfa, &g, 16, &grid, CurveMode::Analytic)?;
        let iwmd = build_curve(&SchemeSpec::IWmd, &g, 16, &grid, CurveMode::Analytic)?;
        let w = wmd_weights(&g, 0.45)?;
        cases.insert(
            name.to_string(),
            json!({
                "snr_db": db,
                "eta": 16,
                "wmd_weights_rho_0_45": w.as_slice(),
                "wfa": wfa.points.iter().copied().map(point_json).collect::<Vec<_>>(),
                "iwmd": iwmd.points.iter().copied().map(point_json).collect::<Vec<_>>(),
            }),
        );
    }
    let text = serde_json::to_string_pretty(&serde_json::Value::Object(cases)).expect("fixture serializes") + "\n";
    out.emit("golden_analytic.json", text.as_bytes(), false)?;
    let ds = synthesize_dataset(&SyntheticConfig::default())?;
    let bytes = csv_bytes(|b| write_dataset_csv(b, &ds))?;
    out.emit("synthetic_dataset.csv", &bytes, false)
}
