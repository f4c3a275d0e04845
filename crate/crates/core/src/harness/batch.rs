//! Independent scenarios run concurrently, summarized in path order.

use std::io::Write;
use std::path::{Path, PathBuf};

use super::assemble::run_report;
use super::config::load_config;
use super::report::EnergyReport;
use super::{config_err, HarnessError};
use crate::exec::map_ordered;

#[derive(Clone, Debug, PartialEq)]
pub struct BatchRow {
    pub config: String,
    pub result: Result<EnergyReport, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchSummary {
    pub rows: Vec<BatchRow>,
}

pub const SUMMARY_HEADER: [&str; 9] =
    ["config", "status", "distance_m", "battery_energy_wh", "wh_per_km", "regen_wh", "soc_start", "soc_end", "error"];

impl BatchSummary {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.result.is_err()).count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let io = |e: csv::Error| HarnessError::Io(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SUMMARY_HEADER).map_err(io)?;
        for row in &self.rows {
            let rec: Vec<String> = match &row.result {
                Ok(r) => vec![
                    row.config.clone(),
                    "ok".into(),
                    r.distance_m.to_string(),
                    r.battery_energy_wh.to_string(),
                    r.wh_per_km.map(|x| x.to_string()).unwrap_or_default(),
                    r.regen_wh.to_string(),
                    r.soc_start.to_string(),
                    r.soc_end.to_string(),
                    String::new(),
                ],
                Err(e) => {
                    let mut v = vec![row.config.clone(), "error".into()];
                    v.extend(std::iter::repeat_n(String::new(), 6));
                    v.push(e.clone());
                    v
                }
            };
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| HarnessError::Io(e.to_string()))
    }
}

/// Matching paths, sorted.
pub fn expand_glob(pattern: &str) -> Result<Vec<PathBuf>, HarnessError> {
    let paths = glob::glob(pattern).map_err(|e| config_err(format!("bad glob `{pattern}`: {e}")))?;
    let mut out: Vec<PathBuf> = paths.filter_map(Result::ok).filter(|p| p.is_file()).collect();
    out.sort();
    if out.is_empty() {
        return Err(config_err(format!("no configs match `{pattern}`")));
    }
    Ok(out)
}

/// Multi-line diagnostics (TOML carets and the like) folded onto one line.
fn one_line(e: HarnessError) -> String {
    e.to_string().lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(" ")
}

fn run_one(path: &Path) -> Result<EnergyReport, String> {
    let cfg = load_config(path).map_err(one_line)?;
    run_report(&cfg).map_err(one_line)
}

/// Runs every config with up to `jobs` at a time. Failures become error
/// rows; rows follow the sorted path order.
pub fn run_batch(paths: &[PathBuf], jobs: usize) -> Result<BatchSummary, HarnessError> {
    if jobs == 0 {
        return Err(config_err("jobs must be at least 1"));
    }
    let mut paths = paths.to_vec();
    paths.sort();
    let results = map_ordered(&paths, jobs, |p| run_one(p));
    Ok(BatchSummary { rows: paths.iter().zip(results).map(|(p, result)| BatchRow { config: p.display().to_string(), result }).collect() })
}
