//! CSV and metadata files of a run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::sim::SimOutput;
use crate::error::{Error, Result};
use crate::metrics::{reward_regret, switching_regret, RunRecord};

/// Formats like C's `%.9g`.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Rounds to the value the logs will hold.
pub fn quantize(x: f64) -> f64 {
    format_sig9(x).parse().expect("formatted float parses")
}

/// Checks that `dir` can be created and written before any work starts.
pub fn preflight(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn csv_bytes(header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::invalid("csv", e.to_string()))
}

pub fn rounds_csv(record: &RunRecord) -> Result<Vec<u8>> {
    let cum_reward = record.cumulative_reward();
    let cum_regret = reward_regret(record, &record.oracle_rewards())?;
    let cum_switch = switching_regret(record);
    let header = "t,group,arm_id,attacked,reward,cum_reward,cum_regret,cum_switch_cost"
        .split(',')
        .map(String::from)
        .collect();
    let rows = record.rows.iter().enumerate().map(|(i, r)| {
        vec![
            r.t.to_string(),
            r.route.label().to_string(),
            r.arm_id.to_string(),
            u8::from(r.attacked).to_string(),
            format_sig9(r.reward),
            format_sig9(cum_reward[i]),
            format_sig9(cum_regret[i]),
            format_sig9(cum_switch[i]),
        ]
    });
    csv_bytes(header, rows)
}

fn per_group_csv(prefix: &str, groups: usize, rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    let mut header = vec!["t".to_string()];
    header.extend((1..=groups).map(|g| format!("{prefix}_{g}")));
    let body = rows.iter().enumerate().map(|(i, r)| {
        std::iter::once((i + 1).to_string())
            .chain(r.iter().map(|v| format_sig9(*v)))
            .collect()
    });
    csv_bytes(header, body)
}

pub fn oracle_csv(record: &RunRecord) -> Result<Vec<u8>> {
    let rows = record
        .rows
        .iter()
        .map(|r| vec![r.t.to_string(), format_sig9(r.oracle_reward)]);
    csv_bytes(vec!["t".into(), "oracle_reward".into()], rows)
}

/// Directory of one run below `root`.
pub fn run_dir(root: &Path, out: &SimOutput) -> PathBuf {
    root.join(&out.info.experiment)
        .join(out.info.policy.name())
        .join(format!("seed-{}", out.info.seed))
}

/// Writes `rounds.csv`, `sampling.csv`, `oracle.csv`, `run.json` and, for
/// ridge-based learners, `pred_error.csv`.
pub fn emit_csv(out: &SimOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    preflight(dir)?;
    let rec = &out.record;
    let mut files = vec![
        ("rounds.csv", rounds_csv(rec)?),
        ("sampling.csv", per_group_csv("p", rec.groups, &rec.sampling)?),
        ("oracle.csv", oracle_csv(rec)?),
    ];
    if let Some(err) = &rec.pred_error {
        files.push(("pred_error.csv", per_group_csv("err", rec.groups, err)?));
    }
    let mut meta = serde_json::to_vec_pretty(&out.info)?;
    meta.push(b'\n');
    files.push(("run.json", meta));
    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

/// A parsed `rounds.csv` line.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct RoundsLine {
    pub t: u64,
    pub group: usize,
    pub arm_id: u64,
    pub attacked: u8,
    pub reward: f64,
    pub cum_reward: f64,
    pub cum_regret: f64,
    pub cum_switch_cost: f64,
}

pub fn read_rounds(path: &Path) -> Result<Vec<RoundsLine>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct OracleLine {
    pub t: u64,
    pub oracle_reward: f64,
}

pub fn read_oracle(path: &Path) -> Result<Vec<OracleLine>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

/// Reads a `t,<prefix>_1..` file into per-round rows.
pub fn read_per_group(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            rec.iter()
                .skip(1)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::invalid("csv", format!("{}: bad number `{v}`", path.display())))
                })
                .collect()
        })
        .collect()
}
