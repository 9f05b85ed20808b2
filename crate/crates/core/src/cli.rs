//! `stereogen` command-line front end.
//!
//! Every subcommand reads a TOML config (`--config`) and/or flags, with flags
//! taking precedence, and writes its artifacts into the output directory.
//! Artifact names embed feature, metric, linkage and seed. Exit codes: 0 on
//! success, 1 when a stage fails, 2 on usage errors.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{
    ClusteringConfig, EvaluationConfig, FeatureConfig, KModesConfig, Paths, PipelineConfig,
};
use crate::corr::{correlation, seriate_greedy, CorrelationMatrix};
use crate::error::{Error, Result};
use crate::hac::{agglomerate, to_dissimilarity, Dendrogram, Linkage, Metric};
use crate::ingest::{
    build_vocabulary, encode_multi_hot, load_catalog_with, load_ratings, ItemCatalog,
};
use crate::kmodes::{elbow_scan, fit, mode_labels, InitKind};
use crate::recs::{
    cross_validate, EvalReport, FeatureMode, ItemFeatures, LinearRegression, SplitKind,
};
use crate::stereotype::{generate_stereotypes, Activation, Cut, IterationSeries, StereotypeSet};

/// Below this mean |R| the quadratic metric squeezes most dissimilarities
/// toward 1.0.
pub const QUADRATIC_WARN_MEAN_ABS_R: f64 = 0.4;

#[derive(Debug, Parser)]
#[command(
    name = "stereogen",
    version,
    about = "Stereotype generation for multi-choice categorical features"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load the catalog (and ratings), write label vocabularies and encodings.
    Ingest(CommonArgs),
    /// Label correlation matrix and its greedy seriation.
    Corr(CommonArgs),
    /// Agglomerate labels and write the dendrogram.
    Cluster(CommonArgs),
    /// Auto-cut the dendrogram and write the stereotypes.
    Stereotypes(CommonArgs),
    /// k-modes baseline: modes per k and the cost scan.
    Kmodes(KModesArgs),
    /// Cold-start cross-validation of baseline vs stereotype features.
    Evaluate(EvaluateArgs),
    /// ingest -> corr -> cluster -> stereotypes -> evaluate for every feature.
    Pipeline(CommonArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// TOML pipeline config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Complex feature to process; repeatable. Defaults to every configured feature.
    #[arg(long = "feature")]
    pub features: Vec<String>,
    #[arg(long)]
    pub min_count: Option<usize>,
    #[arg(long)]
    pub delimiter: Option<char>,
    #[arg(long, value_parser = parse_metric)]
    pub metric: Option<Metric>,
    #[arg(long, value_parser = parse_linkage)]
    pub linkage: Option<Linkage>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Clone)]
pub struct KModesArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Cluster counts; repeatable or comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<usize>,
    #[arg(long, value_parser = parse_init)]
    pub init: Option<InitKind>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_parser = parse_split)]
    pub split: Vec<SplitKind>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Vec<FeatureMode>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Stereotype JSON files from a previous `stereotypes` run; when absent
    /// the stereotypes are regenerated.
    #[arg(long = "stereotypes")]
    pub stereotype_files: Vec<PathBuf>,
}

fn parse_metric(s: &str) -> std::result::Result<Metric, String> {
    s.parse().map_err(|e: Error| e.to_string())
}
fn parse_linkage(s: &str) -> std::result::Result<Linkage, String> {
    s.parse().map_err(|e: Error| e.to_string())
}
fn parse_init(s: &str) -> std::result::Result<InitKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}
fn parse_split(s: &str) -> std::result::Result<SplitKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}
fn parse_mode(s: &str) -> std::result::Result<FeatureMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses `argv` and runs the subcommand, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(StageError { stage, error }) => {
            eprintln!("stereogen: stage '{stage}' failed: {error}");
            1
        }
    }
}

#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

trait InStage<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError>;
}

impl<T> InStage<T> for Result<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

pub fn execute(command: &Command) -> std::result::Result<(), StageError> {
    match command {
        Command::Ingest(args) => {
            let ctx = Context::new(args)?;
            for f in ctx.features() {
                ctx.ingest(f).stage("ingest")?;
            }
            Ok(())
        }
        Command::Corr(args) => {
            let ctx = Context::new(args)?;
            for f in ctx.features() {
                ctx.corr(f).stage("corr")?;
            }
            Ok(())
        }
        Command::Cluster(args) => {
            let ctx = Context::new(args)?;
            for f in ctx.features() {
                let r = ctx.corr(f).stage("corr")?;
                ctx.cluster(f, &r).stage("cluster")?;
            }
            Ok(())
        }
        Command::Stereotypes(args) => {
            let ctx = Context::new(args)?;
            for f in ctx.features() {
                let r = ctx.corr(f).stage("corr")?;
                let d = ctx.cluster(f, &r).stage("cluster")?;
                let set = ctx.stereotypes(f, &d).stage("stereotypes")?;
                println!(
                    "{}",
                    serde_json::to_string(&ctx.stereotype_doc(&set)).unwrap_or_default()
                );
            }
            Ok(())
        }
        Command::Kmodes(args) => {
            let mut ctx = Context::new(&args.common)?;
            if !args.k.is_empty() {
                ctx.config.kmodes.k = args.k.clone();
            }
            if let Some(init) = args.init {
                ctx.config.kmodes.init = init;
            }
            if let Some(m) = args.max_iter {
                ctx.config.kmodes.max_iter = m;
            }
            ctx.config.validate().stage("config")?;
            for f in ctx.features() {
                ctx.kmodes(f).stage("kmodes")?;
            }
            Ok(())
        }
        Command::Evaluate(args) => {
            let mut ctx = Context::new(&args.common)?;
            if !args.split.is_empty() {
                ctx.config.evaluation.splits = args.split.clone();
            }
            if !args.mode.is_empty() {
                ctx.config.evaluation.modes = args.mode.clone();
            }
            if let Some(folds) = args.folds {
                ctx.config.evaluation.folds = folds;
            }
            ctx.config.validate().stage("config")?;
            let sets = if args.stereotype_files.is_empty() {
                ctx.all_stereotypes()?
            } else {
                args.stereotype_files
                    .iter()
                    .map(|p| read_stereotypes(p))
                    .collect::<Result<Vec<_>>>()
                    .stage("evaluate")?
            };
            ctx.evaluate(&sets).stage("evaluate")?;
            Ok(())
        }
        Command::Pipeline(args) => {
            let ctx = Context::new(args)?;
            for f in ctx.features() {
                ctx.ingest(f).stage("ingest")?;
            }
            let sets = ctx.all_stereotypes()?;
            if ctx.config.paths.ratings.is_some() {
                ctx.evaluate(&sets).stage("evaluate")?;
            } else {
                log::warn!("no ratings file configured; skipping evaluate");
            }
            Ok(())
        }
    }
}

/// Stereotype artifact body.
#[derive(Debug, Serialize)]
pub struct StereotypeDoc<'a> {
    #[serde(flatten)]
    pub set: &'a StereotypeSet,
    pub seed: u64,
}

pub fn read_stereotypes(path: &Path) -> Result<StereotypeSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(file).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

struct Context {
    config: PipelineConfig,
    selected: Vec<String>,
    catalog: ItemCatalog,
}

impl Context {
    /// Resolves the configuration, then loads the catalog. Failures are
    /// attributed to the `config` and `ingest` stages respectively.
    fn new(args: &CommonArgs) -> std::result::Result<Self, StageError> {
        let config = resolve_config(args).stage("config")?;
        let names: Vec<&str> = config.features.iter().map(|f| f.name.as_str()).collect();
        let catalog =
            load_catalog_with(&config.paths.catalog, &names, config.features[0].delimiter)
                .stage("ingest")?;
        fs::create_dir_all(&config.paths.output)
            .map_err(|e| Error::io(&config.paths.output, e))
            .stage("config")?;
        let selected = if args.features.is_empty() {
            config.features.iter().map(|f| f.name.clone()).collect()
        } else {
            args.features.clone()
        };
        Ok(Context {
            config,
            selected,
            catalog,
        })
    }
}

fn resolve_config(args: &CommonArgs) -> Result<PipelineConfig> {
    let mut config = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig {
            seed: 0,
            paths: Paths {
                ratings: None,
                catalog: args
                    .catalog
                    .clone()
                    .ok_or_else(|| Error::Config("--catalog or --config is required".into()))?,
                output: PathBuf::from("out"),
            },
            features: Vec::new(),
            clustering: ClusteringConfig::default(),
            kmodes: KModesConfig::default(),
            evaluation: EvaluationConfig::default(),
        },
    };
    if let Some(p) = &args.ratings {
        config.paths.ratings = Some(p.clone());
    }
    if let Some(p) = &args.catalog {
        config.paths.catalog = p.clone();
    }
    if let Some(p) = &args.output {
        config.paths.output = p.clone();
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(m) = args.metric {
        config.clustering.metric = m;
    }
    if let Some(l) = args.linkage {
        config.clustering.linkage = l;
    }
    for name in &args.features {
        if config.feature(name).is_none() {
            config.features.push(FeatureConfig {
                name: name.clone(),
                min_count: 1,
                delimiter: crate::ingest::DEFAULT_DELIMITER,
            });
        }
    }
    for f in config.features.iter_mut() {
        if args.features.is_empty() || args.features.contains(&f.name) {
            if let Some(mc) = args.min_count {
                f.min_count = mc;
            }
            if let Some(d) = args.delimiter {
                f.delimiter = d;
            }
        }
    }
    config.validate()?;
    let delimiters: Vec<char> = config.features.iter().map(|f| f.delimiter).collect();
    if delimiters.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::Config(
            "all features must share one delimiter".into(),
        ));
    }
    Ok(config)
}

impl Context {
    fn features(&self) -> Vec<&FeatureConfig> {
        self.selected
            .iter()
            .filter_map(|n| self.config.feature(n))
            .collect()
    }

    fn stem(&self, feature: &str) -> String {
        format!(
            "{}_{}_{}_s{}",
            sanitize(feature),
            self.config.clustering.metric,
            self.config.clustering.linkage,
            self.config.seed
        )
    }

    fn out(&self, name: String) -> PathBuf {
        self.config.paths.output.join(name)
    }

    fn ingest(&self, f: &FeatureConfig) -> Result<()> {
        let vocab = build_vocabulary(&self.catalog, &f.name, f.min_count)?;
        let stem = self.stem(&f.name);
        write_with(&self.out(format!("vocab_{stem}.csv")), |w| {
            let mut csv = csv::Writer::from_writer(w);
            let ser = |e: csv::Error| Error::Serialize(e.to_string());
            csv.write_record(["label", "count"]).map_err(ser)?;
            for (l, c) in vocab.labels.iter().zip(&vocab.counts) {
                csv.write_record([l.as_str(), &c.to_string()])
                    .map_err(ser)?;
            }
            csv.flush().map_err(|e| Error::Serialize(e.to_string()))
        })?;
        let m = encode_multi_hot(&self.catalog, &vocab)?;
        write_with(&self.out(format!("multihot_{stem}.csv")), |w| {
            let mut csv = csv::Writer::from_writer(w);
            let ser = |e: csv::Error| Error::Serialize(e.to_string());
            let mut header = vec!["item_id".to_string()];
            header.extend(m.labels.iter().cloned());
            csv.write_record(&header).map_err(ser)?;
            for (id, row) in m.item_ids.iter().zip(m.cells.rows()) {
                let mut rec = vec![id.clone()];
                rec.extend(row.iter().map(|v| v.to_string()));
                csv.write_record(&rec).map_err(ser)?;
            }
            csv.flush().map_err(|e| Error::Serialize(e.to_string()))
        })?;
        if let Some(path) = &self.config.paths.ratings {
            let ratings = load_ratings(path)?;
            log::info!(
                "{} ratings from {} users",
                ratings.len(),
                ratings.user_stats().len()
            );
        }
        log::info!(
            "{}: {} labels retained (min_count {}) over {} items",
            f.name,
            vocab.len(),
            f.min_count,
            self.catalog.len()
        );
        Ok(())
    }

    fn corr(&self, f: &FeatureConfig) -> Result<CorrelationMatrix> {
        let vocab = build_vocabulary(&self.catalog, &f.name, f.min_count)?;
        let m = encode_multi_hot(&self.catalog, &vocab)?;
        let r = correlation(&m)?;
        let stem = self.stem(&f.name);
        write_with(&self.out(format!("corr_{stem}.csv")), |w| r.write_csv(w))?;
        let perm = seriate_greedy(&r);
        write_with(&self.out(format!("corr_seriated_{stem}.csv")), |w| {
            r.permuted(&perm.order).write_csv(w)
        })?;
        Ok(r)
    }

    fn cluster(&self, f: &FeatureConfig, r: &CorrelationMatrix) -> Result<Dendrogram> {
        let metric = self.config.clustering.metric;
        let mean_abs = r.mean_abs_off_diagonal();
        if metric == Metric::Quadratic && mean_abs < QUADRATIC_WARN_MEAN_ABS_R {
            eprintln!(
                "warning: {}: mean |R| = {mean_abs:.3} < {QUADRATIC_WARN_MEAN_ABS_R}; the quadratic metric \
                 tends to compress excessively toward 1.0, consider --metric linear",
                f.name
            );
        }
        let d = to_dissimilarity(r, metric);
        let dendro = agglomerate(&d, self.config.clustering.linkage)?;
        let stem = self.stem(&f.name);
        write_with(&self.out(format!("merges_{stem}.csv")), |w| {
            dendro.write_merge_csv(w)
        })?;
        write_with(&self.out(format!("dendrogram_{stem}.dot")), |w| {
            dendro.write_dot(w)
        })?;
        Ok(dendro)
    }

    fn stereotype_doc<'a>(&self, set: &'a StereotypeSet) -> StereotypeDoc<'a> {
        StereotypeDoc {
            set,
            seed: self.config.seed,
        }
    }

    fn stereotypes(&self, f: &FeatureConfig, dendro: &Dendrogram) -> Result<StereotypeSet> {
        let (set, series, cut): (StereotypeSet, IterationSeries, Cut) =
            generate_stereotypes(dendro, &f.name, self.config.clustering.metric)?;
        if cut == Cut::NoStructure {
            eprintln!(
                "note: {}: iteration ratio never decreases; the feature cannot be split into stereotypes",
                f.name
            );
        }
        let stem = self.stem(&f.name);
        write_with(&self.out(format!("stereotypes_{stem}.json")), |mut w| {
            serde_json::to_writer_pretty(&mut w, &self.stereotype_doc(&set))
                .map_err(|e| Error::Serialize(e.to_string()))?;
            writeln!(w).map_err(|e| Error::Serialize(e.to_string()))
        })?;
        write_with(&self.out(format!("ratio_{stem}.csv")), |w| {
            series.write_csv(w)
        })?;
        Ok(set)
    }

    fn all_stereotypes(&self) -> std::result::Result<Vec<StereotypeSet>, StageError> {
        let mut sets = Vec::new();
        for f in self.features() {
            let r = self.corr(f).stage("corr")?;
            let d = self.cluster(f, &r).stage("cluster")?;
            sets.push(self.stereotypes(f, &d).stage("stereotypes")?);
        }
        Ok(sets)
    }

    fn kmodes(&self, f: &FeatureConfig) -> Result<()> {
        let vocab = build_vocabulary(&self.catalog, &f.name, f.min_count)?;
        let m = encode_multi_hot(&self.catalog, &vocab)?;
        let data = m.bool_rows();
        let cfg = &self.config.kmodes;
        let seed = self.config.stage_seed("kmodes");
        let stem = self.stem(&f.name);

        #[derive(Serialize)]
        struct ModesDoc<'a> {
            feature: &'a str,
            k: usize,
            init: InitKind,
            seed: u64,
            cost: usize,
            iterations: usize,
            cluster_sizes: Vec<usize>,
            modes: Vec<Vec<String>>,
        }
        for &k in &cfg.k {
            let model = fit(&data, k, cfg.init, seed, cfg.max_iter)?;
            let mut sizes = vec![0; k];
            for &a in &model.assignments {
                sizes[a] += 1;
            }
            let doc = ModesDoc {
                feature: &f.name,
                k,
                init: cfg.init,
                seed: self.config.seed,
                cost: model.cost,
                iterations: model.iterations,
                cluster_sizes: sizes,
                modes: mode_labels(&model, &vocab.labels),
            };
            write_with(
                &self.out(format!("kmodes_{stem}_{}_k{k}.json", cfg.init)),
                |mut w| {
                    serde_json::to_writer_pretty(&mut w, &doc)
                        .map_err(|e| Error::Serialize(e.to_string()))?;
                    writeln!(w).map_err(|e| Error::Serialize(e.to_string()))
                },
            )?;
        }

        let max_k = cfg.k.iter().copied().max().unwrap_or(1);
        let scan = elbow_scan(
            &data,
            &(1..=max_k).collect::<Vec<_>>(),
            cfg.init,
            seed,
            cfg.max_iter,
        )?;
        write_with(
            &self.out(format!("kmodes_scan_{stem}_{}.csv", cfg.init)),
            |w| {
                let mut csv = csv::Writer::from_writer(w);
                let ser = |e: csv::Error| Error::Serialize(e.to_string());
                csv.write_record(["k", "cost", "iterations"]).map_err(ser)?;
                for p in &scan {
                    csv.write_record([
                        p.k.to_string(),
                        p.cost.to_string(),
                        p.iterations.to_string(),
                    ])
                    .map_err(ser)?;
                }
                csv.flush().map_err(|e| Error::Serialize(e.to_string()))
            },
        )
    }

    fn evaluate(&self, sets: &[StereotypeSet]) -> Result<EvalReport> {
        let path = self
            .config
            .paths
            .ratings
            .as_ref()
            .ok_or_else(|| Error::Config("evaluate needs a ratings file".into()))?;
        let ratings = load_ratings(path)?;
        let vocabularies = self
            .features()
            .iter()
            .map(|f| build_vocabulary(&self.catalog, &f.name, f.min_count))
            .collect::<Result<Vec<_>>>()?;
        let eval = &self.config.evaluation;
        let seed = self.config.stage_seed("evaluate");
        let activation: Activation = self.config.clustering.activation;

        let mut reports = Vec::new();
        for &mode in &eval.modes {
            let features =
                ItemFeatures::build(&self.catalog, mode, &vocabularies, sets, activation)?;
            for &split in &eval.splits {
                let report = cross_validate(
                    ratings.records(),
                    &features,
                    split,
                    eval.folds,
                    seed,
                    &LinearRegression::default(),
                )?;
                log::info!(
                    "{split} {mode}: rmse {:.4} mae {:.4} ({:.3}s/fold)",
                    report.rmse,
                    report.mae,
                    report.wall_seconds
                );
                reports.push(report);
            }
        }
        let report = EvalReport {
            seed: self.config.seed,
            folds: eval.folds,
            reports,
        };
        let names: Vec<String> = self.features().iter().map(|f| sanitize(&f.name)).collect();
        let stem = format!(
            "{}_{}_{}_s{}",
            names.join("+"),
            self.config.clustering.metric,
            self.config.clustering.linkage,
            self.config.seed
        );
        write_with(&self.out(format!("eval_{stem}.json")), |mut w| {
            report.write_json(&mut w)?;
            writeln!(w).map_err(|e| Error::Serialize(e.to_string()))
        })?;
        write_with(&self.out(format!("eval_{stem}.csv")), |w| {
            report.write_table_csv(w)
        })?;
        Ok(report)
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_with<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))?;
    log::debug!("wrote {}", path.display());
    Ok(())
}
