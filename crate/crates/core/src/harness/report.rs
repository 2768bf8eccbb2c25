//! CSV row types written by the commands, with header-checked read-back.
//!
//! Each row type fixes its column list; a reader rejects any file whose
//! header differs, so a column change is a schema change. Floats are written
//! in shortest round-trip form and parse back to the same bits.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use csv::StringRecord;

use crate::error::{Error, Result};

pub trait CsvRow: Sized {
    const COLUMNS: &'static [&'static str];
    fn to_record(&self) -> Vec<String>;
    fn from_record(rec: &StringRecord) -> Result<Self>;
}

fn field(rec: &StringRecord, i: usize) -> Result<&str> {
    rec.get(i)
        .ok_or_else(|| Error::CsvFormat(format!("missing column {i}")))
}

fn f(rec: &StringRecord, i: usize) -> Result<f64> {
    let s = field(rec, i)?;
    s.parse()
        .map_err(|_| Error::CsvFormat(format!("column {i}: `{s}` is not a number")))
}

fn u(rec: &StringRecord, i: usize) -> Result<usize> {
    let s = field(rec, i)?;
    s.parse()
        .map_err(|_| Error::CsvFormat(format!("column {i}: `{s}` is not a count")))
}

fn b(rec: &StringRecord, i: usize) -> Result<bool> {
    match field(rec, i)? {
        "true" => Ok(true),
        "false" => Ok(false),
        s => Err(Error::CsvFormat(format!(
            "column {i}: `{s}` is not a boolean"
        ))),
    }
}

pub fn write_csv<T: CsvRow, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(T::COLUMNS)?;
    for r in rows {
        w.write_record(r.to_record())?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_csv<T: CsvRow, R: Read>(input: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(T::COLUMNS.iter().copied()) {
        return Err(Error::CsvFormat(format!(
            "unexpected header {:?}, expected {:?}",
            header.iter().collect::<Vec<_>>(),
            T::COLUMNS
        )));
    }
    r.records().map(|rec| T::from_record(&rec?)).collect()
}

pub fn save_csv<T: CsvRow>(rows: &[T], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(rows, std::io::BufWriter::new(file))
}

pub fn load_csv<T: CsvRow>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(std::io::BufReader::new(file))
}

/// One training episode.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardRow {
    pub episode: usize,
    pub reward: f64,
    /// Mean reward over this and up to 49 preceding episodes.
    pub mean_last_50: f64,
}

impl CsvRow for RewardRow {
    const COLUMNS: &'static [&'static str] = &["episode", "reward", "mean_last_50"];

    fn to_record(&self) -> Vec<String> {
        vec![
            self.episode.to_string(),
            self.reward.to_string(),
            self.mean_last_50.to_string(),
        ]
    }

    fn from_record(rec: &StringRecord) -> Result<Self> {
        Ok(Self {
            episode: u(rec, 0)?,
            reward: f(rec, 1)?,
            mean_last_50: f(rec, 2)?,
        })
    }
}

pub fn reward_rows(rewards: &[f64]) -> Vec<RewardRow> {
    rewards
        .iter()
        .enumerate()
        .map(|(i, &reward)| {
            let window = &rewards[(i + 1).saturating_sub(50)..=i];
            RewardRow {
                episode: i + 1,
                reward,
                mean_last_50: window.iter().sum::<f64>() / window.len() as f64,
            }
        })
        .collect()
}

/// One evaluation episode of one tuner in one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub mu: f64,
    pub v0_kmh: f64,
    pub tuner: String,
    pub terminated: bool,
    /// Largest |e_x| over all integrator ticks, N.
    pub max_abs_ex: f64,
    pub max_abs_sideslip_deg: f64,
    /// Time integral of the allocation objective.
    pub performance_integral: f64,
    pub total_reward: f64,
    pub steps: usize,
    /// Weights averaged over the agent steps taken.
    pub mean_w_df: [f64; 4],
}

impl CsvRow for EvalRow {
    const COLUMNS: &'static [&'static str] = &[
        "mu",
        "v0_kmh",
        "tuner",
        "terminated",
        "max_abs_ex",
        "max_abs_sideslip_deg",
        "performance_integral",
        "total_reward",
        "steps",
        "mean_w_fl",
        "mean_w_fr",
        "mean_w_rl",
        "mean_w_rr",
    ];

    fn to_record(&self) -> Vec<String> {
        let mut r = vec![
            self.mu.to_string(),
            self.v0_kmh.to_string(),
            self.tuner.clone(),
            self.terminated.to_string(),
            self.max_abs_ex.to_string(),
            self.max_abs_sideslip_deg.to_string(),
            self.performance_integral.to_string(),
            self.total_reward.to_string(),
            self.steps.to_string(),
        ];
        r.extend(self.mean_w_df.iter().map(f64::to_string));
        r
    }

    fn from_record(rec: &StringRecord) -> Result<Self> {
        Ok(Self {
            mu: f(rec, 0)?,
            v0_kmh: f(rec, 1)?,
            tuner: field(rec, 2)?.to_owned(),
            terminated: b(rec, 3)?,
            max_abs_ex: f(rec, 4)?,
            max_abs_sideslip_deg: f(rec, 5)?,
            performance_integral: f(rec, 6)?,
            total_reward: f(rec, 7)?,
            steps: u(rec, 8)?,
            mean_w_df: [f(rec, 9)?, f(rec, 10)?, f(rec, 11)?, f(rec, 12)?],
        })
    }
}

/// Fitness trace of one GA run.
#[derive(Debug, Clone, PartialEq)]
pub struct GaTraceRow {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
}

impl CsvRow for GaTraceRow {
    const COLUMNS: &'static [&'static str] = &["generation", "best_fitness", "mean_fitness"];

    fn to_record(&self) -> Vec<String> {
        vec![
            self.generation.to_string(),
            self.best_fitness.to_string(),
            self.mean_fitness.to_string(),
        ]
    }

    fn from_record(rec: &StringRecord) -> Result<Self> {
        Ok(Self {
            generation: u(rec, 0)?,
            best_fitness: f(rec, 1)?,
            mean_fitness: f(rec, 2)?,
        })
    }
}

/// Best weights found by a GA run.
#[derive(Debug, Clone, PartialEq)]
pub struct GaBestRow {
    pub mu: f64,
    pub v0_kmh: f64,
    pub w_df: [f64; 4],
    pub fitness: f64,
    pub evaluations: usize,
}

impl CsvRow for GaBestRow {
    const COLUMNS: &'static [&'static str] = &[
        "mu",
        "v0_kmh",
        "w_fl",
        "w_fr",
        "w_rl",
        "w_rr",
        "fitness",
        "evaluations",
    ];

    fn to_record(&self) -> Vec<String> {
        let mut r = vec![self.mu.to_string(), self.v0_kmh.to_string()];
        r.extend(self.w_df.iter().map(f64::to_string));
        r.push(self.fitness.to_string());
        r.push(self.evaluations.to_string());
        r
    }

    fn from_record(rec: &StringRecord) -> Result<Self> {
        Ok(Self {
            mu: f(rec, 0)?,
            v0_kmh: f(rec, 1)?,
            w_df: [f(rec, 2)?, f(rec, 3)?, f(rec, 4)?, f(rec, 5)?],
            fitness: f(rec, 6)?,
            evaluations: u(rec, 7)?,
        })
    }
}
