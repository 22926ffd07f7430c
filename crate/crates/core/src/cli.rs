//! `prepare`, `run` and `report` commands.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::aggregation::AggregatorKind;
use crate::baselines::{fl_run, reptile_run};
use crate::config::{build_recommender, prepare, ExperimentConfig, Mode};
use crate::data::persist::write_prepared;
use crate::data::DatasetKind;
use crate::error::{Error, Result};
use crate::eval::{cdf_and_percentiles, mean};
use crate::sim::{run_simulation, RunReport};

#[derive(Debug, Parser)]
#[command(name = "gossiprec", version, about = "Gossip learning experiments for decentralized recommenders")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean and split a dataset into per-node files.
    Prepare(Overrides),
    /// Run a gossip or federated experiment and write its report directory.
    Run(Overrides),
    /// Compare finished runs.
    Report {
        /// Run directories to compare.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Where to write the comparison tables.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub dataset_kind: Option<DatasetKind>,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub aggregator: Option<AggregatorKind>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub view_size: Option<usize>,
    /// Metric cutoffs, e.g. `5,10,20`.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
}

impl Overrides {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.dataset {
            cfg.dataset = v.clone();
            cfg.prepared = None;
        }
        if let Some(v) = self.dataset_kind {
            cfg.dataset_kind = v;
        }
        if let Some(v) = self.mode {
            cfg.mode = v;
        }
        if let Some(v) = self.aggregator {
            cfg.aggregator = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.view_size {
            cfg.view_size = v;
        }
        if let Some(v) = &self.k {
            cfg.ks = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn cmd_prepare(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let prepared = prepare(cfg)?;
    let ds = prepared
        .dataset
        .as_ref()
        .ok_or_else(|| Error::Config("prepare needs a raw dataset, not a prepared directory".into()))?;
    write_prepared(out, ds, &prepared.splits, &prepared.manifest)?;
    log::info!(
        "prepared {} nodes ({} users, {} items, sparsity {:.4}) in {}",
        prepared.splits.len(),
        prepared.manifest.users,
        prepared.manifest.items,
        prepared.manifest.sparsity,
        out.display()
    );
    Ok(())
}

/// Runs the configured experiment and writes `config.toml`,
/// `manifest.json` and the report files into `out`.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    cfg.validate()?;
    let prepared = prepare(cfg)?;
    let rec = build_recommender(cfg, &prepared)?;
    let report = match cfg.mode {
        Mode::Gossip => run_simulation(&cfg.sim_config(), &prepared.splits, &rec, cfg.seed)?,
        Mode::Federated => fl_run(&cfg.fl_config(), &prepared.splits, &rec, cfg.seed)?.report,
        Mode::Reptile => {
            reptile_run(
                &cfg.fl_config(),
                &prepared.splits,
                &rec,
                cfg.meta_eps,
                cfg.finetune_epochs,
                cfg.seed,
            )?
            .report
        }
    };
    fs::create_dir_all(out)?;
    fs::write(out.join("config.toml"), cfg.to_toml()?)?;
    fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&prepared.manifest)? + "\n",
    )?;
    report.write(out)?;
    Ok(report)
}

/// Per-node columns of a `report.csv`.
#[derive(Debug, Clone, Default)]
pub struct ReportTable {
    pub columns: BTreeMap<String, Vec<f64>>,
    pub metrics: Vec<String>,
}

const NODE_COLUMNS: usize = 15;

pub fn read_report_csv(path: &Path) -> Result<ReportTable> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    for (no, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: no + 2,
                msg: format!("expected {} columns", header.len()),
            });
        }
        for (col, cell) in columns.iter_mut().zip(cells) {
            let v = match cell {
                "true" => 1.0,
                "false" => 0.0,
                c => c.parse().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: no + 2,
                    msg: format!("bad number `{c}`"),
                })?,
            };
            col.push(v);
        }
    }
    Ok(ReportTable {
        metrics: header.iter().skip(NODE_COLUMNS).cloned().collect(),
        columns: header.into_iter().zip(columns).collect(),
    })
}

/// Writes `averages.csv`, `percentiles.csv` and `convergence.csv` comparing
/// the given runs, and returns the averages table as text.
pub fn cmd_report(runs: &[PathBuf], out: Option<&Path>) -> Result<String> {
    let mut tables = Vec::new();
    for run in runs {
        tables.push((run.display().to_string(), read_report_csv(&run.join("report.csv"))?));
    }
    let mut metrics: Vec<String> = Vec::new();
    for (_, t) in &tables {
        for m in &t.metrics {
            if !metrics.contains(m) {
                metrics.push(m.clone());
            }
        }
    }

    let mut averages = String::from("run");
    for m in &metrics {
        write!(averages, ",{m}").unwrap();
    }
    averages.push('\n');
    let mut percentiles = String::from("run,metric,percentile,value\n");
    let mut convergence = String::from("run,nodes,converged,mean_rounds_to_convergence,messages_sent,bytes_sent\n");
    for (name, t) in &tables {
        write!(averages, "{name}").unwrap();
        for m in &metrics {
            match t.columns.get(m) {
                Some(v) => write!(averages, ",{}", mean(v)).unwrap(),
                None => averages.push(','),
            }
        }
        averages.push('\n');
        for m in &t.metrics {
            for (p, v) in cdf_and_percentiles(&t.columns[m]).percentiles {
                writeln!(percentiles, "{name},{m},{p},{v}").unwrap();
            }
        }
        let col = |c: &str| t.columns.get(c).cloned().unwrap_or_default();
        writeln!(
            convergence,
            "{name},{},{},{},{},{}",
            col("node").len(),
            col("converged").iter().sum::<f64>(),
            mean(&col("rounds_to_convergence")),
            col("messages_sent").iter().sum::<f64>(),
            col("bytes_sent").iter().sum::<f64>()
        )
        .unwrap();
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("averages.csv"), &averages)?;
        fs::write(dir.join("percentiles.csv"), &percentiles)?;
        fs::write(dir.join("convergence.csv"), &convergence)?;
    }
    Ok(averages)
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Prepare(o) => o.resolve().and_then(|cfg| cmd_prepare(&cfg, &o.out)),
        Command::Run(o) => o.resolve().and_then(|cfg| cmd_run(&cfg, &o.out)).map(|r| {
            let s = r.summary();
            for (k, v) in &s.means {
                println!("{k}\t{v:.4}");
            }
            println!("mean_rounds_to_convergence\t{:.1}", s.mean_rounds_to_convergence);
        }),
        Command::Report { runs, out } => cmd_report(&runs, out.as_deref()).map(|t| print!("{t}")),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
