//! Seed sweeps across device counts and policies, the ISAC ranging
//! benchmark, and atomic output files.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{IsacConfig, ScenarioConfig, SchedulerPolicy};
use crate::engine::run;
use crate::error::{Result, SimError};
use crate::isac::{
    correlation_profile, delay_samples, estimate_distance, generate_chirp, matched_filter_delay,
    observation_lags, simulate_echo,
};
use crate::metrics::{aggregate, MetricsReport, SummaryRow};
use crate::model::{seeded_stream, RngStream};

pub const DEFAULT_DEVICE_COUNTS: [usize; 5] = [100, 200, 300, 400, 500];
pub const DEFAULT_SEEDS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub device_counts: Vec<usize>,
    pub policies: Vec<SchedulerPolicy>,
    pub seeds: usize,
    /// Everything except `n_devices`, `scheduler_policy` and `seed`, which
    /// the sweep overrides. Its `seed` is the base seed.
    pub base: ScenarioConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            device_counts: DEFAULT_DEVICE_COUNTS.to_vec(),
            policies: SchedulerPolicy::ALL.to_vec(),
            seeds: DEFAULT_SEEDS,
            base: ScenarioConfig::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.device_counts.is_empty() || self.policies.is_empty() || self.seeds == 0 {
            return Err(SimError::Setup(
                "sweep needs at least one device count, one policy and one seed".into(),
            ));
        }
        Ok(())
    }

    /// One configuration per run, in output order: device count, then
    /// policy, then seed index.
    pub fn run_configs(&self) -> Vec<ScenarioConfig> {
        let mut out = Vec::with_capacity(self.run_count());
        for &n in &self.device_counts {
            for &policy in &self.policies {
                for i in 0..self.seeds {
                    out.push(ScenarioConfig {
                        n_devices: n,
                        scheduler_policy: policy,
                        seed: self.base.seed.wrapping_add(i as u64),
                        ..self.base.clone()
                    });
                }
            }
        }
        out
    }

    pub fn run_count(&self) -> usize {
        self.device_counts.len() * self.policies.len() * self.seeds
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunFailure {
    pub policy: SchedulerPolicy,
    pub n_devices: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutcome {
    pub rows: Vec<SummaryRow>,
    pub reports: Vec<MetricsReport>,
    pub failures: Vec<RunFailure>,
}

/// Thread count from an explicit value, else `WRSN_SIM_JOBS`, else all cores.
pub fn resolve_jobs(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var("WRSN_SIM_JOBS").ok()?.parse().ok())
        .filter(|&j| j > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every configuration on a pool of `jobs` threads. Results come back
/// in input order regardless of completion order.
pub fn run_all(configs: &[ScenarioConfig], jobs: usize) -> Result<Vec<Result<MetricsReport>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SimError::Setup(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(|| {
        configs
            .par_iter()
            .map(|c| run(c).map(|(report, _)| report))
            .collect()
    }))
}

pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<SweepOutcome> {
    spec.validate()?;
    spec.base
        .validate()
        .map_err(SimError::Config)?;
    let configs = spec.run_configs();
    let results = run_all(&configs, jobs)?;

    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (group_cfgs, group) in configs.chunks(spec.seeds).zip(results.chunks(spec.seeds)) {
        let mut ok = Vec::new();
        let mut failed = 0;
        for (cfg, res) in group_cfgs.iter().zip(group) {
            match res {
                Ok(r) => ok.push(r.clone()),
                Err(e) => {
                    failed += 1;
                    failures.push(RunFailure {
                        policy: cfg.scheduler_policy,
                        n_devices: cfg.n_devices,
                        seed: cfg.seed,
                        message: e.to_string(),
                    });
                }
            }
        }
        let row = if ok.is_empty() {
            empty_row(&group_cfgs[0])
        } else {
            aggregate(&ok)?
        };
        rows.push(SummaryRow {
            failed_runs: failed,
            ..row
        });
        reports.extend(ok);
    }
    Ok(SweepOutcome {
        rows,
        reports,
        failures,
    })
}

fn empty_row(cfg: &ScenarioConfig) -> SummaryRow {
    let none = crate::metrics::MetricStat::from_values(&[]);
    SummaryRow {
        policy: cfg.scheduler_policy,
        n_devices: cfg.n_devices,
        seed_count: 0,
        eue: none,
        delay: none,
        tour: none,
        total_travel: none,
        dead: none,
        fulfilled: none,
        failed_runs: 0,
    }
}

/// SNR grid used by the ranging benchmark; the last entry is noiseless.
pub const BENCH_SNR_GRID: [f64; 10] = [-30.0, -20.0, -10.0, -5.0, 0.0, 5.0, 10.0, 20.0, 30.0, f64::INFINITY];
pub const BENCH_DISTANCE_RANGE: (f64, f64) = (5.0, 30.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    #[serde(serialize_with = "serialize_snr")]
    pub snr_db: f64,
    pub trials: usize,
    pub rmse_m: f64,
    pub bias_m: f64,
    pub lag_hit_rate: f64,
}

fn serialize_snr<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

/// Monte-Carlo ranging error at one SNR. Distances are drawn uniformly
/// from [`BENCH_DISTANCE_RANGE`]; the window covers the outer sensing radius.
pub fn bench_snr(
    isac: &IsacConfig,
    sensing_range: f64,
    trials: usize,
    seed: u64,
) -> Result<BenchRow> {
    let chirp = generate_chirp(isac)?;
    let max_lag = observation_lags(2.0 * (sensing_range + isac.elfes_r_uncertain), isac);
    let mut dist_rng = seeded_stream(seed, RngStream::Scenario);
    let mut noise_rng = seeded_stream(seed, RngStream::Noise);
    let (lo, hi) = BENCH_DISTANCE_RANGE;
    let (mut sq, mut err_sum, mut hits) = (0.0, 0.0, 0usize);
    for _ in 0..trials {
        let d = dist_rng.random_range(lo..hi);
        let echo = simulate_echo(&chirp, d, isac, max_lag, &mut noise_rng)?;
        let (lag, _) = matched_filter_delay(&chirp, &echo.samples)?;
        let err = estimate_distance(lag, isac) - d;
        sq += err * err;
        err_sum += err;
        hits += usize::from(lag == delay_samples(d, isac));
    }
    let n = trials.max(1) as f64;
    Ok(BenchRow {
        snr_db: isac.snr_db,
        trials,
        rmse_m: (sq / n).sqrt(),
        bias_m: err_sum / n,
        lag_hit_rate: hits as f64 / n,
    })
}

pub fn isac_bench(
    isac: &IsacConfig,
    sensing_range: f64,
    snr_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    snr_grid
        .iter()
        .map(|&snr_db| {
            let cfg = IsacConfig {
                snr_db,
                ..isac.clone()
            };
            bench_snr(&cfg, sensing_range, trials, seed)
        })
        .collect()
}

pub const BENCH_CSV_HEADER: &str = "snr_db,trials,rmse_m,bias_m,lag_hit_rate";

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = format!("{BENCH_CSV_HEADER}\n");
    for r in rows {
        let snr = if r.snr_db.is_finite() {
            r.snr_db.to_string()
        } else {
            "inf".to_string()
        };
        out.push_str(&format!(
            "{snr},{},{},{},{}\n",
            r.trials, r.rmse_m, r.bias_m, r.lag_hit_rate
        ));
    }
    out
}

/// Correlation magnitude per lag for one echo at `distance`.
pub fn correlation_csv(isac: &IsacConfig, sensing_range: f64, distance: f64, seed: u64) -> Result<String> {
    let chirp = generate_chirp(isac)?;
    let max_lag = observation_lags(2.0 * (sensing_range + isac.elfes_r_uncertain), isac);
    let mut rng = seeded_stream(seed, RngStream::Noise);
    let echo = simulate_echo(&chirp, distance, isac, max_lag, &mut rng)?;
    let profile = correlation_profile(&chirp, &echo.samples)?;
    let mut out = String::from("lag,range_m,magnitude\n");
    for (k, m) in profile.iter().enumerate() {
        out.push_str(&format!("{k},{},{m}\n", estimate_distance(k, isac)));
    }
    Ok(out)
}

/// Writes through a temp file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io_err = |source| SimError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io_err)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents.as_bytes()).map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_counts() {
        let spec = SweepSpec::default();
        assert_eq!(spec.run_count(), 300);
        let cfgs = spec.run_configs();
        assert_eq!(cfgs.len(), 300);
        assert_eq!(cfgs[0].seed, spec.base.seed);
        assert_eq!(cfgs[19].seed, spec.base.seed + 19);
        assert_eq!(cfgs[20].scheduler_policy, SchedulerPolicy::Nearest);
        assert_eq!(cfgs[60].n_devices, 200);
    }

    #[test]
    fn rejects_empty_spec() {
        let spec = SweepSpec {
            seeds: 0,
            ..Default::default()
        };
        assert!(spec.validate().is_err());
        let spec = SweepSpec {
            policies: vec![],
            ..Default::default()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out").join("a.csv");
        write_atomic(&path, "one\n").unwrap();
        write_atomic(&path, "two\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two\n");
        assert_eq!(std::fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn bench_survives_very_low_snr() {
        let rows = isac_bench(&IsacConfig::default(), 25.0, &[-30.0], 50, 3).unwrap();
        assert!(rows[0].rmse_m.is_finite());
    }

    #[test]
    fn bench_csv_marks_noiseless_row() {
        let rows = isac_bench(&IsacConfig::default(), 25.0, &[f64::INFINITY], 20, 3).unwrap();
        let csv = bench_csv(&rows);
        assert!(csv.lines().nth(1).unwrap().starts_with("inf,20,"));
        assert!(rows[0].rmse_m <= IsacConfig::default().range_bin() / 2.0);
    }
}
