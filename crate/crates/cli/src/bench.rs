//! `fluxkit bench`: random scenarios per grid size, timed, as CSV.

use std::time::Instant;

use fluxkit::batch;
use fluxkit::cleanbot::{self, GroundTruth, Scenario};
use fluxkit::{FluxError, Result};

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub sizes: Vec<i64>,
    pub runs: usize,
    pub occupancy: f64,
    pub seed: u64,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.iter().any(|s| *s < 2) {
            return Err(FluxError::Usage("sizes must be at least 2".into()));
        }
        if !(0.0..1.0).contains(&self.occupancy) {
            return Err(FluxError::Usage("occupancy must be in [0, 1)".into()));
        }
        if self.runs == 0 {
            return Err(FluxError::Usage("runs must be positive".into()));
        }
        Ok(())
    }
}

/// Seed of one run, derived from the base seed, size and run index.
pub fn run_seed(base: u64, size: i64, run: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((size as u64) << 32)
        .wrapping_add(run as u64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub size: i64,
    pub run: usize,
    pub seed: u64,
    pub actions: usize,
    pub cleaned: usize,
    pub total_ms: f64,
    pub mean_select_us: f64,
    pub p90_select_us: f64,
    /// Mean selection time in each tenth of the run, in microseconds.
    pub deciles: [f64; 10],
    pub mean_assert_us: f64,
}

fn mean(xs: &[u64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<u64>() as f64 / xs.len() as f64
    }
}

fn p90(xs: &[u64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_unstable();
    let rank = (v.len() * 9).div_ceil(10).max(1);
    v[rank - 1] as f64
}

/// Means over ten contiguous slices of `xs`; empty slices count as 0.
pub fn decile_means(xs: &[u64]) -> [f64; 10] {
    let n = xs.len();
    std::array::from_fn(|i| mean(&xs[i * n / 10..(i + 1) * n / 10]))
}

pub fn run_one(size: i64, run: usize, occupancy: f64, base_seed: u64) -> Result<BenchRow> {
    let seed = run_seed(base_seed, size, run);
    let sc = Scenario::random(size, occupancy, seed);
    let start = Instant::now();
    let mut agent = cleanbot::new_agent(&sc)?;
    let mut gt = GroundTruth::new(&sc);
    let report = cleanbot::run_strategy(&mut agent, &mut gt, &sc, cleanbot::budget(&sc), &mut |_, _, _, _| Ok(()))?;
    let total = start.elapsed();
    let stats = agent.store.stats();
    let us = |ns: f64| ns / 1000.0;
    Ok(BenchRow {
        size,
        run,
        seed,
        actions: agent.log().len(),
        cleaned: gt.cleaned.len(),
        total_ms: total.as_secs_f64() * 1000.0,
        mean_select_us: us(mean(&report.select_nanos)),
        p90_select_us: us(p90(&report.select_nanos)),
        deciles: decile_means(&report.select_nanos).map(us),
        mean_assert_us: if stats.asserts == 0 { 0.0 } else { us(stats.assert_nanos as f64 / stats.asserts as f64) },
    })
}

/// All runs, in (size, run) order whatever order they finish in.
pub fn bench_rows(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let jobs: Vec<(i64, usize)> = cfg.sizes.iter().flat_map(|&s| (0..cfg.runs).map(move |r| (s, r))).collect();
    batch::map(&jobs, |&(size, run)| run_one(size, run, cfg.occupancy, cfg.seed)).into_iter().collect()
}

pub const HEADER: [&str; 19] = [
    "size",
    "run",
    "seed",
    "actions",
    "cleaned",
    "total_ms",
    "mean_select_us",
    "p90_select_us",
    "d1",
    "d2",
    "d3",
    "d4",
    "d5",
    "d6",
    "d7",
    "d8",
    "d9",
    "d10",
    "mean_assert_us",
];

/// CSV text of `rows`. Without `timing` every timing column is written as 0,
/// which makes the output a pure function of the configuration.
pub fn to_csv(rows: &[BenchRow], timing: bool) -> Result<String> {
    let io = |e: csv::Error| FluxError::Usage(e.to_string());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(HEADER).map_err(io)?;
    let t = |x: f64| if timing { format!("{x:.3}") } else { "0".to_string() };
    for r in rows {
        let mut rec = vec![
            r.size.to_string(),
            r.run.to_string(),
            r.seed.to_string(),
            r.actions.to_string(),
            r.cleaned.to_string(),
            t(r.total_ms),
            t(r.mean_select_us),
            t(r.p90_select_us),
        ];
        rec.extend(r.deciles.iter().map(|d| t(*d)));
        rec.push(t(r.mean_assert_us));
        w.write_record(&rec).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| FluxError::Usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
