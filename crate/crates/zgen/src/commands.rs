//! Subcommand implementations. `main` only parses flags and maps errors to
//! exit codes.

use std::fs;
use std::path::{Path, PathBuf};

use zgen_core::classifier::{fit_gbdt, predict_target, GbdtModel};
use zgen_core::corr::{diff_matrix, pearson_matrix, render_heatmap};
use zgen_core::covgen::{inject, CovMatrix, CovSource, OutlierSpec};
use zgen_core::cvae::{fit_cvae_on_table, CvaeModel};
use zgen_core::gan::{fit_gan, GanModel};
use zgen_core::harness::{
    run_oos, run_oot, run_outlier_sweep, ExperimentReport, GbdtEvaluator, SweepSplit,
};
use zgen_core::preprocess::PreprocessPlan;
use zgen_core::rng::{derive_seed, tag};
use zgen_core::split::{augment_random, split_at_time, split_oos, split_oot};
use zgen_core::table::Table;

use crate::config::{ConfigError, Protocol, RunConfig, SyntheticInput};
use crate::csv_io::{load_csv, save_csv, write_matrix_csv};
use crate::error::IoError;
use crate::manifest::{sha256_hex, Manifest};
use crate::model_file::{self, ModelKind};
use crate::par::Pool;
use crate::schema_file::load_schema;

pub const GAN_FILE: &str = "gan.json";
pub const TARGET_FILE: &str = "target.json";
pub const CVAE_FILE: &str = "cvae.json";
pub const SYNTHETIC_FILE: &str = "synthetic.csv";
pub const MASK_COLUMN: &str = "__outlier";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or unusable inputs.
    #[error("{0}")]
    Config(String),
    /// Failure while training, generating or evaluating.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Core(c) => CliError::Runtime(c.to_string()),
            IoError::Write { .. } => CliError::Runtime(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<zgen_core::Error> for CliError {
    fn from(e: zgen_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn log(msg: impl AsRef<str>) {
    eprintln!("[zgen] {}", msg.as_ref());
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|source| IoError::Write { path: path.to_path_buf(), source }.into())
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Runtime(format!("cannot create `{}`: {source}", dir.display())))
}

/// A loaded, validated configuration.
pub struct Run {
    pub cfg: RunConfig,
    /// Digest of the config text and the effective seed.
    pub config_sha256: String,
    pub workers: usize,
}

impl Run {
    /// Loads `path`; the seed is taken from `seed`, else `ZGEN_SEED` (passed
    /// in by the caller), else the file.
    pub fn load(path: &Path, seed: Option<u64>, env_seed: Option<u64>, workers: usize) -> CliResult<Self> {
        let text = fs::read(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let mut cfg = RunConfig::load(path)?;
        let master = seed.or(env_seed).unwrap_or(cfg.seed);
        cfg.apply_seed(master);
        cfg.validate()?;
        let mut keyed = text;
        keyed.extend_from_slice(format!("\nseed={master}\n").as_bytes());
        Ok(Run { cfg, config_sha256: sha256_hex(&keyed), workers })
    }

    fn out(&self) -> &Path {
        &self.cfg.output_dir
    }

    fn manifest(&self, command: &str) -> CliResult<Manifest> {
        let mut m = Manifest::new(command, self.cfg.seed, self.config_sha256.clone());
        m.add_input(&self.cfg.data.train)?;
        if let Some(p) = &self.cfg.data.test {
            m.add_input(p)?;
        }
        if let Some(p) = &self.cfg.data.schema {
            m.add_input(p)?;
        }
        Ok(m)
    }

    /// The full training file.
    pub fn table(&self) -> CliResult<Table> {
        let schema = self.cfg.data.schema.as_deref().map(load_schema).transpose()?;
        Ok(load_csv(&self.cfg.data.train, schema.as_ref())?)
    }

    /// Train and test tables: the test file, or a seeded random split.
    pub fn train_test(&self) -> CliResult<(Table, Table)> {
        let full = self.table()?;
        match &self.cfg.data.test {
            Some(p) => {
                let test = load_csv(p, Some(full.schema()))?;
                Ok((full, test))
            }
            None => Ok(split_oos(&full, self.cfg.data.test_fraction, derive_seed(self.cfg.seed, &[tag("data.split")]))?),
        }
    }

    fn outlier_columns(&self) -> CliResult<Vec<String>> {
        self.cfg
            .outliers
            .as_ref()
            .map(|o| o.columns.clone())
            .filter(|c| !c.is_empty())
            .ok_or_else(|| CliError::Config("this step needs [outliers] with at least one column".into()))
    }
}

pub struct Fitted {
    pub gan: GanModel,
    pub target: GbdtModel,
    pub cvae: Option<CvaeModel>,
}

fn fit_models(run: &Run, train: &Table) -> CliResult<Fitted> {
    let cfg = &run.cfg;
    let gan_train = match cfg.generate.augment_rows {
        Some(n) if n > train.n_rows() => augment_random(train, n, derive_seed(cfg.seed, &[tag("fit.augment")]))?,
        _ => train.clone(),
    };
    log(format!("training GAN on {} rows for {} epochs", gan_train.n_rows(), cfg.gan.epochs));
    let gan = fit_gan(&gan_train, &cfg.gan)?;
    log("fitting target model");
    let target = fit_gbdt(train, &cfg.gbdt)?;
    let cvae = match &cfg.cvae {
        Some(c) => {
            log("training cVAE");
            Some(fit_cvae_on_table(train, &run.outlier_columns()?, c)?)
        }
        None => None,
    };
    Ok(Fitted { gan, target, cvae })
}

/// `fit`: trains and writes model files plus `fit.manifest.json`.
pub fn fit(run: &Run) -> CliResult<PathBuf> {
    create_dir(run.out())?;
    let (train, _) = run.train_test()?;
    let models = fit_models(run, &train)?;
    let mut manifest = run.manifest("fit")?;
    write_models(run, &models, &mut manifest)?;
    Ok(manifest.write(run.out())?)
}

fn write_models(run: &Run, models: &Fitted, manifest: &mut Manifest) -> CliResult<()> {
    let out = run.out();
    let gan = out.join(GAN_FILE);
    model_file::save(&gan, ModelKind::Gan, &models.gan)?;
    manifest.add_output(out, &gan)?;
    let target = out.join(TARGET_FILE);
    model_file::save(&target, ModelKind::Gbdt, &models.target)?;
    manifest.add_output(out, &target)?;
    if let Some(c) = &models.cvae {
        let p = out.join(CVAE_FILE);
        model_file::save(&p, ModelKind::Cvae, c)?;
        manifest.add_output(out, &p)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct GenerateOptions {
    pub model: Option<PathBuf>,
    pub target_model: Option<PathBuf>,
    pub cvae_model: Option<PathBuf>,
    pub rows: Option<usize>,
    pub filter: Option<bool>,
    /// Outlier spec file, replacing the config's `[outliers]`.
    pub outliers: Option<PathBuf>,
    pub percent: Option<f64>,
    pub mask: bool,
    pub output: Option<PathBuf>,
}

fn load_outlier_spec(path: &Path) -> CliResult<OutlierSpec> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("invalid outlier spec `{}`: {e}", path.display())))
}

/// Generates rows, injects outliers, then labels with the target model.
/// Returns the table and the outlier mask.
pub fn synthesize(
    gan: &GanModel,
    rows: usize,
    filter: bool,
    outliers: Option<(&OutlierSpec, Option<&CovMatrix>)>,
    target: Option<&GbdtModel>,
    run: &Run,
) -> CliResult<(Table, Vec<bool>)> {
    let seed = derive_seed(run.cfg.seed, &[tag("generate")]);
    let mut table = gan.generate(rows, seed, filter)?;
    let mut mask = vec![false; rows];
    if let Some((spec, cov)) = outliers {
        let (t, m) = inject(&table, spec, cov)?;
        table = t;
        mask = m;
    }
    if let Some(model) = target {
        table = predict_target(model, &table, run.cfg.generate.label_mode)?;
    }
    Ok((table, mask))
}

/// `generate`: writes the synthetic CSV and `generate.manifest.json` next to it.
pub fn generate(run: &Run, opts: &GenerateOptions) -> CliResult<PathBuf> {
    let cfg = &run.cfg;
    let out = run.out();
    let model_path = opts.model.clone().unwrap_or_else(|| out.join(GAN_FILE));
    let gan: GanModel = model_file::load(&model_path, ModelKind::Gan)?;
    let target_path = opts.target_model.clone().or_else(|| Some(out.join(TARGET_FILE)).filter(|p| p.exists()));
    let target: Option<GbdtModel> = target_path.as_deref().map(|p| model_file::load(p, ModelKind::Gbdt)).transpose()?;
    let mut spec = match &opts.outliers {
        Some(p) => Some(load_outlier_spec(p)?),
        None => cfg.outliers.clone(),
    };
    if let (Some(s), Some(p)) = (&mut spec, opts.percent) {
        s.percent = p;
    }
    if let Some(s) = &mut spec {
        s.seed = derive_seed(cfg.seed, &[tag("generate.outliers")]);
        s.validate()?;
    }
    let cov = match &spec {
        Some(s) if s.cov_source == CovSource::FromCvae => {
            let p = opts.cvae_model.clone().unwrap_or_else(|| out.join(CVAE_FILE));
            let model: CvaeModel = model_file::load(&p, ModelKind::Cvae)?;
            Some(model.sample_cov(derive_seed(cfg.seed, &[tag("generate.cvae")]))?)
        }
        _ => None,
    };
    let rows = opts.rows.unwrap_or(cfg.generate.rows);
    let filter = opts.filter.unwrap_or(cfg.generate.filter);
    let (table, mask) = synthesize(&gan, rows, filter, spec.as_ref().map(|s| (s, cov.as_ref())), target.as_ref(), run)?;
    let path = opts.output.clone().unwrap_or_else(|| out.join(SYNTHETIC_FILE));
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    create_dir(&dir)?;
    let with_mask = opts.mask || cfg.generate.mask;
    save_csv(&path, &table, with_mask.then_some((MASK_COLUMN, mask.as_slice())))?;
    log(format!("wrote {} rows to {}", rows, path.display()));
    let mut manifest = Manifest::new("generate", cfg.seed, run.config_sha256.clone());
    manifest.add_input(&model_path)?;
    if let Some(p) = &target_path {
        manifest.add_input(p)?;
    }
    manifest.add_output(&dir, &path)?;
    manifest.write(&dir)?;
    Ok(path)
}

fn write_report(run: &Run, report: &mut ExperimentReport, manifest: &Manifest) -> CliResult<Vec<PathBuf>> {
    report.push_param("tool_version", env!("CARGO_PKG_VERSION"));
    report.push_param("config_sha256", &run.config_sha256);
    for (k, v) in &manifest.inputs {
        report.push_param(&format!("input {k}"), v);
    }
    let stem = format!("report_{}", report.protocol);
    let json = run.out().join(format!("{stem}.json"));
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    write_file(&json, text.as_bytes())?;
    let txt = run.out().join(format!("{stem}.txt"));
    write_file(&txt, report.render_text().as_bytes())?;
    Ok(vec![json, txt])
}

fn synthetic_train(run: &Run, train: &Table, source: &SyntheticInput) -> CliResult<Option<Table>> {
    let cfg = &run.cfg;
    Ok(match source {
        SyntheticInput::None => None,
        SyntheticInput::Csv(p) => Some(load_csv(p, Some(train.schema()))?),
        SyntheticInput::Model => {
            let gan: GanModel = model_file::load(&run.out().join(GAN_FILE), ModelKind::Gan)?;
            let target: GbdtModel = model_file::load(&run.out().join(TARGET_FILE), ModelKind::Gbdt)?;
            Some(synthesize(&gan, cfg.generate.rows, cfg.generate.filter, None, Some(&target), run)?.0)
        }
        SyntheticInput::Fit => {
            let models = fit_models(run, train)?;
            Some(synthesize(&models.gan, cfg.generate.rows, cfg.generate.filter, None, Some(&models.target), run)?.0)
        }
    })
}

/// `evaluate`: runs one protocol and writes `report_<protocol>.{json,txt}`.
pub fn evaluate(run: &Run, protocol: Option<Protocol>) -> CliResult<Vec<PathBuf>> {
    let protocol = protocol
        .or(run.cfg.protocol)
        .ok_or_else(|| CliError::Config("no protocol selected (set `protocol` or pass --protocol)".into()))?;
    create_dir(run.out())?;
    evaluate_with(run, protocol, &run.cfg.oos.synthetic)
}

fn evaluate_with(run: &Run, protocol: Protocol, synthetic: &SyntheticInput) -> CliResult<Vec<PathBuf>> {
    let cfg = &run.cfg;
    let pool = Pool::new(run.workers);
    let eval = GbdtEvaluator { config: cfg.gbdt.clone() };
    let mut manifest = run.manifest(&format!("evaluate_{}", protocol.name()))?;
    if let SyntheticInput::Csv(p) = synthetic {
        manifest.add_input(p)?;
    }
    log(format!("running {} protocol", protocol.name()));
    let outputs = match protocol {
        Protocol::Oos => {
            let (train, test) = run.train_test()?;
            let mut report = run_oos(&train, &test, "real", &eval, &run.cfg_oos(), &pool)?;
            if let Some(synth) = synthetic_train(run, &train, synthetic)? {
                let s = run_oos(&synth, &test, "synthetic", &eval, &run.cfg_oos(), &pool)?;
                report.push_param("synthetic_rows", synth.n_rows());
                report.conditions.extend(s.conditions);
            }
            write_report(run, &mut report, &manifest)?
        }
        Protocol::Oot => {
            let table = run.table()?;
            let mut report = run_oot(&table, &cfg.gan_factory(), &eval, &cfg.oot, &pool)?;
            write_report(run, &mut report, &manifest)?
        }
        Protocol::Sweep => {
            let table = run.table()?;
            let template = cfg
                .outliers
                .clone()
                .ok_or_else(|| CliError::Config("the sweep protocol needs an [outliers] section".into()))?;
            let cov = match (&template.cov_source, &cfg.cvae) {
                (CovSource::FromCvae, Some(c)) => {
                    let (train, _) = match cfg.sweep.split {
                        SweepSplit::Cutoff(t) => split_at_time(&table, t)?,
                        SweepSplit::TrainFraction(f) => split_oot(&table, f)?,
                    };
                    let model = fit_cvae_on_table(&train, &template.columns, c)?;
                    Some(model.sample_cov(derive_seed(cfg.seed, &[tag("sweep.cvae")]))?)
                }
                _ => None,
            };
            let mut report =
                run_outlier_sweep(&table, &cfg.gan_factory(), &eval, &template, &cfg.sweep, cov.as_ref(), &pool)?;
            write_report(run, &mut report, &manifest)?
        }
        Protocol::Correlate => {
            let (train, _) = run.train_test()?;
            let mut inputs = cfg.correlate.synthetic.clone();
            if let SyntheticInput::Csv(p) = synthetic {
                if !inputs.contains(p) {
                    inputs.push(p.clone());
                }
            }
            for p in &inputs {
                manifest.add_input(p)?;
            }
            let (paths, lines) = correlate_tables(&train, "real", &inputs, run.out(), cfg.correlate.scale, cfg.correlate.cell)?;
            for l in &lines {
                println!("{l}");
            }
            let summary = run.out().join("mad.txt");
            write_file(&summary, lines.iter().map(|l| format!("{l}\n")).collect::<String>().as_bytes())?;
            paths.into_iter().chain([summary]).collect()
        }
    };
    for p in &outputs {
        manifest.add_output(run.out(), p)?;
    }
    manifest.write(run.out())?;
    Ok(outputs)
}

impl Run {
    fn cfg_oos(&self) -> zgen_core::harness::OosProtocol {
        self.cfg.oos_protocol()
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "synthetic".into())
}

/// Correlation and difference matrices of each synthetic CSV against `real`,
/// all heatmaps on one colour scale. Returns written files and
/// `MAD <name> <value>` lines sorted by MAD.
pub fn correlate_tables(
    real: &Table,
    real_name: &str,
    synthetic: &[PathBuf],
    out: &Path,
    scale: (f64, f64),
    cell: usize,
) -> CliResult<(Vec<PathBuf>, Vec<String>)> {
    create_dir(out)?;
    let plan = PreprocessPlan::fit(real)?;
    let real_corr = pearson_matrix(real, &plan)?;
    let mut written = Vec::new();
    let csv = |name: &str, names: &[String], m: &zgen_core::linalg::Mat, written: &mut Vec<PathBuf>| -> CliResult<()> {
        let path = out.join(name);
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, names, m)?;
        write_file(&path, &buf)?;
        written.push(path);
        Ok(())
    };
    csv(&format!("corr_{real_name}.csv"), &real_corr.names, &real_corr.matrix, &mut written)?;
    let mut mads = Vec::new();
    for p in synthetic {
        let name = stem(p);
        let table = load_csv(p, Some(real.schema()))?;
        let corr = pearson_matrix(&table, &plan)?;
        csv(&format!("corr_{name}.csv"), &corr.names, &corr.matrix, &mut written)?;
        let diff = diff_matrix(&real_corr, &corr)?;
        csv(&format!("corrdiff_{real_name}_vs_{name}.csv"), &diff.names, &diff.matrix, &mut written)?;
        let img = out.join(format!("corrdiff_{real_name}_vs_{name}.ppm"));
        write_file(&img, &render_heatmap(&diff.matrix, scale, cell)?)?;
        written.push(img);
        mads.push((diff.mad, name));
    }
    mads.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    Ok((written, mads.into_iter().map(|(m, n)| format!("MAD {n} {m:.4}")).collect()))
}

/// `correlate` without a config file.
pub fn correlate(real: &Path, schema: Option<&Path>, synthetic: &[PathBuf], out: &Path, scale: (f64, f64), cell: usize) -> CliResult<Vec<String>> {
    for p in std::iter::once(real).chain(synthetic.iter().map(PathBuf::as_path)) {
        if !p.exists() {
            return Err(ConfigError::MissingFile(p.to_path_buf()).into());
        }
    }
    if !(scale.0 < scale.1) {
        return Err(CliError::Config(format!("scale needs lo < hi, got ({}, {})", scale.0, scale.1)));
    }
    let schema = schema.map(load_schema).transpose()?;
    let table = load_csv(real, schema.as_ref())?;
    let (paths, lines) = correlate_tables(&table, &stem(real), synthetic, out, scale, cell)?;
    let mut manifest = Manifest::new("correlate", 0, sha256_hex(format!("{scale:?} {cell}").as_bytes()));
    manifest.add_input(real)?;
    for p in synthetic {
        manifest.add_input(p)?;
    }
    for p in &paths {
        manifest.add_output(out, p)?;
    }
    manifest.write(out)?;
    Ok(lines)
}

/// `pipeline`: fit, generate, then each configured protocol on the result.
pub fn pipeline(run: &Run) -> CliResult<Vec<PathBuf>> {
    create_dir(run.out())?;
    let mut outputs = vec![fit(run)?];
    let synth = generate(run, &GenerateOptions::default())?;
    outputs.push(synth.clone());
    for &p in &run.cfg.pipeline.protocols {
        outputs.extend(evaluate_with(run, p, &SyntheticInput::Csv(synth.clone()))?);
    }
    let mut manifest = run.manifest("pipeline")?;
    for p in &outputs {
        manifest.add_output(run.out(), p)?;
    }
    manifest.write(run.out())?;
    Ok(outputs)
}
