//! CSV rows, run manifests and paired comparison of manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use uavnoma::numfmt::sig10;

use crate::config::Config;
use crate::experiments::{Plan, Row};
use crate::CliError;

/// Version of this build, `v<semver>` plus `-g<commit>` when built from git.
pub fn version() -> &'static str {
    static VERSION: OnceLock<String> = OnceLock::new();
    VERSION.get_or_init(|| match option_env!("UAVNOMA_GIT_HASH") {
        Some(h) if !h.is_empty() => format!("v{}-g{h}", env!("CARGO_PKG_VERSION")),
        _ => format!("v{}", env!("CARGO_PKG_VERSION")),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub version: String,
    pub config_sha256: String,
    /// Resolved configuration as TOML; `replay` runs it again.
    pub config: String,
    pub seeds: Vec<u64>,
    pub axis: Vec<String>,
    pub values: Vec<f64>,
    pub schemes: Vec<String>,
    /// CSV files, relative to the manifest.
    pub csv: Vec<String>,
    pub rows: usize,
    /// Rows that carry an error instead of an EE.
    pub warnings: usize,
}

impl Manifest {
    pub fn new(cfg: &Config, plan: &Plan, rows: &[Row], csv_name: String) -> Self {
        Self {
            experiment: plan.experiment.name().to_string(),
            version: version().to_string(),
            config_sha256: cfg.sha256(),
            config: cfg.to_toml(),
            seeds: cfg.seed_list(),
            axis: plan.experiment.axis().iter().map(|s| s.to_string()).collect(),
            values: plan.values.clone(),
            schemes: plan.schemes.iter().map(|s| s.name().to_string()).collect(),
            csv: vec![csv_name],
            rows: rows.len(),
            warnings: rows.iter().filter(|r| r.error.is_some()).count(),
        }
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
    }
}

/// Rows as CSV text: axis columns, then scheme, seed, EE, rounds, wall_ms, error.
pub fn csv_text(axis: &[&str], rows: &[Row]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let header: Vec<&str> = axis
        .iter()
        .copied()
        .chain(["scheme", "seed", "EE", "rounds", "wall_ms", "error"])
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec: Vec<String> = r.axis.iter().map(|v| sig10(*v)).collect();
        rec.push(r.scheme.name().to_string());
        rec.push(r.seed.to_string());
        rec.push(r.ee.map(sig10).unwrap_or_default());
        rec.push(r.rounds.to_string());
        rec.push(sig10(r.wall_ms));
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Other(format!("CSV: {e}"))
}

/// Writes the CSV and the manifest into `out`; returns the manifest path.
pub fn write_run(out: &Path, cfg: &Config, plan: &Plan, rows: &[Row]) -> Result<(PathBuf, Manifest), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let name = plan.experiment.name();
    let csv_name = format!("{name}.csv");
    let csv_path = out.join(&csv_name);
    std::fs::write(&csv_path, csv_text(plan.experiment.axis(), rows)?).map_err(|e| CliError::io(&csv_path, e))?;
    let manifest = Manifest::new(cfg, plan, rows, csv_name);
    let path = out.join(format!("{name}.manifest.json"));
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    std::fs::write(&path, json).map_err(|e| CliError::io(&path, e))?;
    Ok((path, manifest))
}

/// A CSV record read back: axis cells as written, scheme, seed and EE.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub axis: Vec<String>,
    pub scheme: String,
    pub seed: u64,
    pub ee: Option<f64>,
}

pub fn read_records(manifest_path: &Path, manifest: &Manifest) -> Result<Vec<Record>, CliError> {
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for name in &manifest.csv {
        let path = dir.join(name);
        let mut rd = csv::Reader::from_path(&path).map_err(csv_err)?;
        let header = rd.headers().map_err(csv_err)?.clone();
        let col = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| CliError::Other(format!("{}: no `{name}` column", path.display())))
        };
        let axis_cols = manifest.axis.iter().map(|a| col(a)).collect::<Result<Vec<_>, _>>()?;
        let (scheme, seed, ee) = (col("scheme")?, col("seed")?, col("EE")?);
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            let bad = |what: &str| CliError::Other(format!("{}: bad {what} in {rec:?}", path.display()));
            out.push(Record {
                axis: axis_cols.iter().map(|c| rec[*c].to_string()).collect(),
                scheme: rec[scheme].to_string(),
                seed: rec[seed].parse().map_err(|_| bad("seed"))?,
                ee: match &rec[ee] {
                    "" => None,
                    s => Some(s.parse().map_err(|_| bad("EE"))?),
                },
            });
        }
    }
    Ok(out)
}

/// Paired statistics of scheme A against scheme B at one axis point.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub axis: Vec<String>,
    /// Seeds with an EE on both sides.
    pub pairs: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Fraction of seeds where A beats B; ties count one half.
    pub win_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub axis: Vec<String>,
    pub scheme_a: String,
    pub scheme_b: String,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn csv(&self) -> String {
        let mut s = self.axis.join(",");
        s.push_str(",scheme_a,scheme_b,pairs,mean_EE_a,mean_EE_b,win_rate\n");
        for r in &self.rows {
            for a in &r.axis {
                s.push_str(a);
                s.push(',');
            }
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.scheme_a,
                self.scheme_b,
                r.pairs,
                sig10(r.mean_a),
                sig10(r.mean_b),
                sig10(r.win_rate)
            ));
        }
        s
    }
}

type Points = BTreeMap<Vec<String>, BTreeMap<u64, f64>>;

fn points(records: &[Record], scheme: &str) -> Points {
    let mut m: Points = BTreeMap::new();
    for r in records.iter().filter(|r| r.scheme == scheme) {
        if let Some(ee) = r.ee {
            m.entry(r.axis.clone()).or_default().insert(r.seed, ee);
        }
    }
    m
}

/// Compares scheme A of the first manifest with scheme B of `b`, pairing
/// rows by axis point and seed. Schemes default to each manifest's first.
pub fn compare_pair(
    a: (&Path, &Manifest),
    b: (&Path, &Manifest),
    scheme_a: Option<&str>,
    scheme_b: Option<&str>,
) -> Result<Comparison, CliError> {
    if a.1.axis != b.1.axis {
        return Err(CliError::Other(format!(
            "axes do not overlap: [{}] vs [{}]",
            a.1.axis.join(", "),
            b.1.axis.join(", ")
        )));
    }
    let pick = |m: &Manifest, s: Option<&str>| -> Result<String, CliError> {
        let s = s.map(str::to_string).or_else(|| m.schemes.first().cloned());
        match s {
            Some(s) if m.schemes.contains(&s) => Ok(s),
            Some(s) => Err(CliError::Other(format!(
                "scheme `{s}` is not in the {} run",
                m.experiment
            ))),
            None => Err(CliError::Other("manifest lists no schemes".into())),
        }
    };
    let (sa, sb) = (pick(a.1, scheme_a)?, pick(b.1, scheme_b)?);
    let pa = points(&read_records(a.0, a.1)?, &sa);
    let pb = points(&read_records(b.0, b.1)?, &sb);
    let mut rows = Vec::new();
    for (axis, ea) in &pa {
        let Some(eb) = pb.get(axis) else { continue };
        let paired: Vec<(f64, f64)> = ea
            .iter()
            .filter_map(|(seed, x)| eb.get(seed).map(|y| (*x, *y)))
            .collect();
        if paired.is_empty() {
            continue;
        }
        let n = paired.len() as f64;
        let wins: f64 = paired
            .iter()
            .map(|(x, y)| {
                if x > y {
                    1.0
                } else if x == y {
                    0.5
                } else {
                    0.0
                }
            })
            .sum();
        rows.push(ComparisonRow {
            axis: axis.clone(),
            pairs: paired.len(),
            mean_a: paired.iter().map(|p| p.0).sum::<f64>() / n,
            mean_b: paired.iter().map(|p| p.1).sum::<f64>() / n,
            win_rate: wins / n,
        });
    }
    if rows.is_empty() {
        return Err(CliError::Other(
            "axes do not overlap: no axis point and seed has an EE in both runs".into(),
        ));
    }
    // numeric axis order, as in the run CSVs
    rows.sort_by(|x, y| {
        let key = |r: &ComparisonRow| {
            r.axis
                .iter()
                .map(|s| s.parse::<f64>().unwrap_or(f64::NAN))
                .collect::<Vec<_>>()
        };
        key(x)
            .iter()
            .zip(key(y).iter())
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(Comparison {
        axis: a.1.axis.clone(),
        scheme_a: sa,
        scheme_b: sb,
        rows,
    })
}
