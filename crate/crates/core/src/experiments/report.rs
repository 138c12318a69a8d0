//! Run reports, CSV output and the relative space-time L² error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExperimentKind, Method};
use crate::error::{Error, Result};
use crate::moment_rhs::StepStats;

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timings {
    pub closure: f64,
    pub source: f64,
    pub transport: f64,
    pub flow: f64,
    pub total: f64,
}

/// Closure-solver counters, summed over every cell and step.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolverCounters {
    pub substeps: usize,
    pub closure_solves: usize,
    pub newton_iterations: usize,
    pub regularized_solves: usize,
    pub max_regularization: f64,
    pub max_gradient_norm: f64,
    pub transport_substeps: usize,
}

impl SolverCounters {
    pub(crate) fn absorb(&mut self, stats: &StepStats) {
        self.substeps += stats.substeps;
        self.closure_solves += stats.closure_solves;
        self.newton_iterations += stats.newton_iterations;
        self.regularized_solves += stats.regularized_solves;
        self.max_regularization = self.max_regularization.max(stats.max_regularization);
        self.max_gradient_norm = self.max_gradient_norm.max(stats.max_gradient_norm);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Checks {
    /// Cells run through the quadrature realizability test and how many failed.
    pub realizability_tested: usize,
    pub realizability_failed: usize,
    /// Smallest sectional value seen right after a transport step.
    pub min_after_transport: Option<f64>,
    /// Largest relative change of the spatial number integral over one transport step.
    pub max_transport_drift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub kind: ExperimentKind,
    pub method: Method,
    pub order: usize,
    #[serde(skip)]
    pub times: Vec<f64>,
    /// `γ_0`, integrated over space for cavity runs.
    #[serde(skip)]
    pub number: Vec<f64>,
    /// `γ_1`, integrated over space for cavity runs.
    #[serde(skip)]
    pub mass: Vec<f64>,
    /// Per-cell `γ_0` at every recorded time (cavity runs only).
    #[serde(skip)]
    pub fields: Vec<Vec<f64>>,
    pub timings: Timings,
    pub counters: SolverCounters,
    pub checks: Checks,
    pub e2: Option<f64>,
    /// Set when the run stopped early; the series end at the failure.
    pub failure: Option<String>,
}

impl RunReport {
    pub fn new(kind: ExperimentKind, method: Method, order: usize) -> Self {
        Self {
            kind,
            method,
            order,
            times: Vec::new(),
            number: Vec::new(),
            mass: Vec::new(),
            fields: Vec::new(),
            timings: Timings::default(),
            counters: SolverCounters::default(),
            checks: Checks::default(),
            e2: None,
            failure: None,
        }
    }

    /// File stem shared by every output of the run.
    pub fn stem(&self) -> String {
        match self.method {
            Method::Fvs => format!("{}_fvs", self.kind.name()),
            m => format!("{}_{m}_n{}", self.kind.name(), self.order),
        }
    }

    /// Per-time spatial samples of `γ_0`; one value per time for homogeneous runs.
    pub fn samples(&self) -> Vec<Vec<f64>> {
        if self.fields.is_empty() {
            self.number.iter().map(|&g| vec![g]).collect()
        } else {
            self.fields.clone()
        }
    }

    /// `E₂` of this run against `reference`.
    pub fn error_against(&self, reference: &RunReport) -> Result<f64> {
        relative_l2_error(&reference.times, &reference.samples(), &self.times, &self.samples())
    }

    /// Largest `|x(t) / x(0) - 1|` of a recorded series.
    pub fn drift(series: &[f64]) -> f64 {
        let Some(&first) = series.first() else {
            return 0.0;
        };
        series.iter().map(|x| (x / first - 1.0).abs()).fold(0.0, f64::max)
    }

    /// One-line JSON with timings, counters, checks and `E₂`; the series
    /// themselves go to the CSV files.
    pub fn summary_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    /// Writes `<stem>.csv` (`time,gamma0,gamma1`), `<stem>.json`, and for
    /// cavity runs `<stem>_fields.csv` plus one grid snapshot per requested
    /// time and the final state. Returns the written paths.
    pub fn write(&self, dir: &Path, snapshots: &[f64], nx: usize) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let stem = self.stem();
        let mut written = Vec::new();

        let path = dir.join(format!("{stem}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["time", "gamma0", "gamma1"])?;
        for ((t, g), m) in self.times.iter().zip(&self.number).zip(&self.mass) {
            w.write_record([fmt(*t), fmt(*g), fmt(*m)])?;
        }
        w.flush()?;
        written.push(path);

        if !self.fields.is_empty() {
            let path = dir.join(format!("{stem}_fields.csv"));
            let mut w = csv::Writer::from_path(&path)?;
            let cells = self.fields[0].len();
            let header: Vec<String> = std::iter::once("time".to_string())
                .chain((0..cells).map(|c| format!("c{c}")))
                .collect();
            w.write_record(&header)?;
            for (t, field) in self.times.iter().zip(&self.fields) {
                w.write_record(std::iter::once(fmt(*t)).chain(field.iter().map(|x| fmt(*x))))?;
            }
            w.flush()?;
            written.push(path);

            let mut picks: Vec<usize> = snapshots
                .iter()
                .filter_map(|&s| nearest(&self.times, s))
                .collect();
            picks.push(self.times.len() - 1);
            picks.sort_unstable();
            picks.dedup();
            for k in picks {
                let path = dir.join(format!("{stem}_t{:.4}.txt", self.times[k]));
                let mut out = BufWriter::new(File::create(&path)?);
                for row in self.fields[k].chunks(nx) {
                    let line: Vec<String> = row.iter().map(|x| format!("{x:.17e}")).collect();
                    writeln!(out, "{}", line.join(" "))?;
                }
                out.flush()?;
                written.push(path);
            }
        }

        let path = dir.join(format!("{stem}.json"));
        std::fs::write(&path, self.summary_json() + "\n")?;
        written.push(path);
        Ok(written)
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

fn nearest(times: &[f64], t: f64) -> Option<usize> {
    times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
        .map(|(k, _)| k)
}

/// Reads a series written by [`RunReport::write`]: the `gamma0` column of a
/// run file or every cell column of a fields file.
pub fn read_samples(path: &Path) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.get(0) != Some("time") || header.len() < 2 {
        return Err(Error::Config(format!("{}: expected a 'time' column first", path.display())));
    }
    let columns: Vec<usize> = if header.get(1) == Some("gamma0") {
        vec![1]
    } else {
        (1..header.len()).collect()
    };
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("{}: bad number '{s}'", path.display())))
    };
    let mut times = Vec::new();
    let mut values = Vec::new();
    for record in r.records() {
        let record = record?;
        times.push(parse(&record[0])?);
        values.push(columns.iter().map(|&c| parse(&record[c])).collect::<Result<Vec<f64>>>()?);
    }
    Ok((times, values))
}

/// Relative space-time L² distance `‖ref - cand‖ / ‖ref‖`: trapezoid rule in
/// time, equal-weight (midpoint) sums in space. The candidate is linearly
/// interpolated onto the reference times.
pub fn relative_l2_error(
    ref_times: &[f64],
    reference: &[Vec<f64>],
    cand_times: &[f64],
    candidate: &[Vec<f64>],
) -> Result<f64> {
    if ref_times.len() != reference.len() || cand_times.len() != candidate.len() {
        return Err(Error::Argument("series and time stamps differ in length".into()));
    }
    if ref_times.is_empty() || cand_times.is_empty() {
        return Err(Error::Argument("empty series".into()));
    }
    let cells = reference[0].len();
    if reference.iter().chain(candidate).any(|s| s.len() != cells) {
        return Err(Error::Argument("spatial samples differ in size".into()));
    }
    let (t0, t1) = (cand_times[0], cand_times[cand_times.len() - 1]);
    let slack = 1e-9 * (1.0 + ref_times[ref_times.len() - 1].abs());
    if ref_times[0] < t0 - slack || ref_times[ref_times.len() - 1] > t1 + slack {
        return Err(Error::Argument("candidate does not cover the reference time span".into()));
    }

    let mut buf = vec![0.0; cells];
    let mut sq = Vec::with_capacity(ref_times.len());
    let mut norm = Vec::with_capacity(ref_times.len());
    let mut k = 0;
    for (t, r) in ref_times.iter().zip(reference) {
        while k + 1 < cand_times.len() - 1 && cand_times[k + 1] < *t {
            k += 1;
        }
        let c = if cand_times.len() == 1 {
            &candidate[0]
        } else {
            let (ta, tb) = (cand_times[k], cand_times[k + 1]);
            let s = if tb > ta { ((t - ta) / (tb - ta)).clamp(0.0, 1.0) } else { 0.0 };
            for ((b, a), c) in buf.iter_mut().zip(&candidate[k]).zip(&candidate[k + 1]) {
                *b = a + s * (c - a);
            }
            &buf
        };
        sq.push(r.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
        norm.push(r.iter().map(|a| a * a).sum::<f64>());
    }
    let trapezoid = |y: &[f64]| -> f64 {
        if y.len() == 1 {
            return y[0];
        }
        ref_times
            .windows(2)
            .zip(y.windows(2))
            .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
            .sum()
    };
    let den = trapezoid(&norm);
    if !(den > 0.0) {
        return Err(Error::Argument("reference has zero norm".into()));
    }
    Ok((trapezoid(&sq) / den).sqrt())
}
