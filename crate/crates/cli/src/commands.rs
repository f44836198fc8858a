use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use polar::downstream::{self, LabeledTextDataset, LinearClassifier, TrainConfig};
use polar::eval::{
    self, AnalogyDataset, AnalogyOptions, DiscriminativeDataset, SimilarityDataset,
};
use polar::polar::{load_pairs, skipped_path, write_skipped};
use polar::report::{file_sha256, write_json, Report};
use polar::select::{self, load_selection, save_selection, SelectOptions, SelectionResult};
use polar::{
    compute_transform, conditioning_report, normalize_rows, transform_all, ConditioningReport,
    DirectionMatrix, EmbeddingSet, PolarEmbeddingSet, PolarError, PolarTransform, Severity,
    Strategy,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::*;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Polar(#[from] PolarError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Polar(e) => e.category().exit_code() as u8,
        }
    }

    pub fn label(&self) -> &'static str {
        match self.exit_code() {
            1 => "usage",
            2 => "format",
            3 => "numeric",
            _ => "insufficient-data",
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn require_file(path: &Path, flag: &str) -> CliResult {
    if !path.is_file() {
        return usage(format!("{flag} {}: no such file", path.display()));
    }
    Ok(())
}

fn require_writable_parent(path: &Path, flag: &str) -> CliResult {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = parent {
        if !dir.is_dir() {
            return usage(format!("{flag} {}: directory does not exist", path.display()));
        }
    }
    Ok(())
}

fn strategy_choice(s: &StrategyArgs) -> CliResult<Option<(Strategy, usize)>> {
    match (s.strategy, s.k) {
        (Some(strategy), Some(k)) => Ok(Some((strategy.into(), k))),
        (None, None) => Ok(None),
        (None, Some(_)) => usage("--k requires --strategy"),
        (Some(_), None) => usage("--strategy requires --k"),
    }
}

fn select_options(s: &StrategyArgs) -> SelectOptions {
    SelectOptions {
        vocab_cap: s.topn_vocab,
        signed_overlap: s.signed_orth,
    }
}

/// Checks every input path named by the embedding / polar flags.
fn validate_inputs(e: &EmbeddingArgs, p: &PolarArgs, pairs_required: bool) -> CliResult<Vec<PathBuf>> {
    require_file(&e.embeddings, "--embeddings")?;
    let mut inputs = vec![e.embeddings.clone()];
    match &p.pairs {
        Some(path) => {
            require_file(path, "--pairs")?;
            inputs.push(path.clone());
        }
        None if pairs_required => return usage("--pairs is required"),
        None => {}
    }
    if let Some(path) = &p.pairs_subset {
        if p.pairs.is_none() {
            return usage("--pairs-subset requires --pairs");
        }
        require_file(path, "--pairs-subset")?;
        inputs.push(path.clone());
    }
    if !(0.0..1.0).contains(&p.rank_tol) {
        return usage("--rank-tol must lie in [0, 1)");
    }
    if p.cond_warn.is_nan() || p.cond_warn < 1.0 {
        return usage("--cond-warn must be at least 1");
    }
    Ok(inputs)
}

fn config_value<T: Serialize>(args: &T, inputs: &[PathBuf]) -> CliResult<Value> {
    let mut hashes = BTreeMap::new();
    for p in inputs {
        hashes.insert(p.display().to_string(), file_sha256(p)?);
    }
    Ok(json!({
        "args": args,
        "input_sha256": hashes,
        "polar_version": env!("CARGO_PKG_VERSION"),
    }))
}

fn load_embeddings(a: &EmbeddingArgs) -> CliResult<EmbeddingSet> {
    info!("loading {} ({:?})", a.embeddings.display(), a.format);
    let e = polar::embedding::load_embeddings(&a.embeddings, a.format.into())?;
    info!("{} words, dimension {}", e.len(), e.dim());
    if a.no_normalize {
        Ok(e)
    } else {
        Ok(normalize_rows(e)?)
    }
}

/// All retained pairs, narrowed to `--pairs-subset` when given.
fn candidate_pool(e: &EmbeddingSet, p: &PolarArgs) -> CliResult<DirectionMatrix> {
    let path = p.pairs.as_ref().expect("validated");
    let pairs = load_pairs(path)?;
    let full = DirectionMatrix::build(e, &pairs)?;
    info!(
        "{} of {} polar pairs usable, {} skipped",
        full.len(),
        pairs.len(),
        full.skipped().len()
    );
    for s in full.skipped() {
        warn!("skipped pair {} ({})", s.pair, s.reason);
    }
    match &p.pairs_subset {
        Some(subset) => {
            let dm = full.select_pairs(&load_selection(subset)?)?;
            info!("restricted to {} pairs from {}", dm.len(), subset.display());
            Ok(dm)
        }
        None => Ok(full),
    }
}

struct Polarized {
    pool: DirectionMatrix,
    dm: DirectionMatrix,
    selection: Option<SelectionResult>,
    transform: PolarTransform,
    condition: ConditioningReport,
}

fn check_conditioning(t: &PolarTransform, p: &PolarArgs) -> CliResult<ConditioningReport> {
    if p.strict_cond {
        return Ok(t.ensure_reliable(p.cond_warn)?);
    }
    let report = conditioning_report(t, p.cond_warn);
    if report.severity == Severity::Unreliable {
        warn!(
            "direction matrix is ill-conditioned (condition number {:.3e}, rank {} of {}); \
             polar coordinates are unreliable",
            report.condition_number, report.rank, report.n_dims
        );
    }
    Ok(report)
}

fn polarize(e: &EmbeddingSet, p: &PolarArgs, s: &StrategyArgs) -> CliResult<Polarized> {
    let choice = strategy_choice(s)?;
    let pool = candidate_pool(e, p)?;
    let mut dm = pool.clone();
    let mut selection = None;
    if let Some((strategy, k)) = choice {
        let sel = select::select(strategy, &pool, e, k, s.seed, select_options(s))?;
        info!("selected {k} pairs with strategy {strategy}");
        dm = pool.select(&sel.chosen)?;
        selection = Some(sel);
    }
    if p.normalize_directions {
        dm = dm.with_unit_rows();
    }
    let transform = compute_transform(&dm, p.rank_tol)?;
    let condition = check_conditioning(&transform, p)?;
    Ok(Polarized {
        pool,
        dm,
        selection,
        transform,
        condition,
    })
}

pub fn transform(a: &TransformArgs) -> CliResult {
    let inputs = validate_inputs(&a.embedding, &a.polar, true)?;
    strategy_choice(&a.strategy)?;
    require_writable_parent(&a.out, "--out")?;
    let config = config_value(a, &inputs)?;

    let e = load_embeddings(&a.embedding)?;
    let pz = polarize(&e, &a.polar, &a.strategy)?;
    let pe = transform_all(&e, &pz.transform, &pz.dm)?;
    pe.save(&a.out, a.precision)?;

    let skipped = skipped_path(&a.out);
    let file = File::create(&skipped).map_err(|err| PolarError::Io {
        path: skipped.clone(),
        source: err,
    })?;
    write_skipped(pz.pool.skipped(), BufWriter::new(file)).map_err(|err| PolarError::Io {
        path: skipped.clone(),
        source: err,
    })?;

    let report_path = a.report.clone().unwrap_or_else(|| {
        let mut os = a.out.clone().into_os_string();
        os.push(".condition.json");
        PathBuf::from(os)
    });
    let report = Report::new("transform", a.embedding.embeddings.display().to_string())
        .counts(pz.dm.len(), pz.pool.skipped().len())
        .metric("condition", &pz.condition)?
        .metric("vocab_size", e.len())?
        .metric("selection", &pz.selection)?
        .with_config(config);
    write_json(&report, Some(&report_path))?;
    eprintln!(
        "wrote {} words x {} polar dimensions to {} (condition number {:.3e}, {})",
        e.len(),
        pz.dm.len(),
        a.out.display(),
        pz.condition.condition_number,
        severity_name(pz.condition.severity)
    );
    Ok(())
}

fn severity_name(s: Severity) -> &'static str {
    match s {
        Severity::Ok => "ok",
        Severity::Unreliable => "unreliable",
    }
}

pub fn select(a: &SelectCmdArgs) -> CliResult {
    let inputs = validate_inputs(&a.embedding, &a.polar, true)?;
    let Some((strategy, k)) = strategy_choice(&a.strategy)? else {
        return usage("select requires --strategy and --k");
    };
    require_writable_parent(&a.out, "--out")?;
    let config = config_value(a, &inputs)?;

    let e = load_embeddings(&a.embedding)?;
    let pool = candidate_pool(&e, &a.polar)?;
    let result = select::select(strategy, &pool, &e, k, a.strategy.seed, select_options(&a.strategy))?;
    save_selection(&result, &pool, &a.out)?;
    eprintln!("wrote {k} of {} pairs ({strategy}) to {}", pool.len(), a.out.display());
    if let Some(path) = &a.report {
        let report = Report::new("select", a.embedding.embeddings.display().to_string())
            .counts(k, pool.len() - k)
            .metric("selection", &result)?
            .with_config(config);
        write_json(&report, Some(path))?;
    }
    Ok(())
}

enum TaskData {
    Similarity(SimilarityDataset),
    Analogy(AnalogyDataset, AnalogyOptions),
    Discrim(DiscriminativeDataset),
    Classify(LabeledTextDataset, TrainConfig),
}

struct TaskOutcome {
    metric: &'static str,
    value: f64,
    n_used: usize,
    n_skipped: usize,
    details: Value,
    model: Option<LinearClassifier>,
}

impl TaskData {
    fn input_path(task: TaskArg, o: &TaskOptions) -> CliResult<PathBuf> {
        match task {
            TaskArg::Classify => {
                let dir = o
                    .data_dir
                    .clone()
                    .ok_or_else(|| CliError::Usage("classify requires --data-dir".into()))?;
                require_file(&dir.join("train.tsv"), "--data-dir")?;
                Ok(dir.join("train.tsv"))
            }
            _ => {
                let path = o
                    .dataset
                    .clone()
                    .ok_or_else(|| CliError::Usage("--dataset is required".into()))?;
                require_file(&path, "--dataset")?;
                Ok(path)
            }
        }
    }

    fn load(task: TaskArg, o: &TaskOptions) -> CliResult<TaskData> {
        Self::input_path(task, o)?;
        Ok(match task {
            TaskArg::Similarity => TaskData::Similarity(SimilarityDataset::load(o.dataset.as_ref().unwrap())?),
            TaskArg::Analogy => TaskData::Analogy(
                AnalogyDataset::load(o.dataset.as_ref().unwrap())?,
                AnalogyOptions {
                    case_insensitive: !o.strict_case,
                    topn_vocab: o.analogy_topn,
                },
            ),
            TaskArg::Discrim => TaskData::Discrim(DiscriminativeDataset::load(o.dataset.as_ref().unwrap())?),
            TaskArg::Classify => TaskData::Classify(
                LabeledTextDataset::load_dir(o.data_dir.as_ref().unwrap())?,
                TrainConfig {
                    learning_rate: o.lr,
                    decay: o.lr_decay,
                    epochs: o.epochs,
                    l2: o.l2,
                    seed: o.train_seed,
                },
            ),
        })
    }

    fn evaluate(&self, e: &EmbeddingSet) -> CliResult<TaskOutcome> {
        Ok(match self {
            TaskData::Similarity(ds) => {
                let r = eval::evaluate_similarity(e, ds)?;
                TaskOutcome {
                    metric: "rho",
                    value: r.rho,
                    n_used: r.n_used,
                    n_skipped: r.n_skipped,
                    details: json!({}),
                    model: None,
                }
            }
            TaskData::Analogy(ds, opts) => {
                let r = eval::evaluate_analogy(e, ds, *opts)?;
                TaskOutcome {
                    metric: "accuracy",
                    value: r.accuracy,
                    n_used: r.n_used,
                    n_skipped: r.n_skipped,
                    details: json!({
                        "correct": r.correct,
                        "per_category": r.per_category,
                        "semantic": r.semantic,
                        "syntactic": r.syntactic,
                        "case_insensitive": opts.case_insensitive,
                        "topn_vocab": opts.topn_vocab,
                    }),
                    model: None,
                }
            }
            TaskData::Discrim(ds) => {
                let r = eval::evaluate_discriminative(e, ds)?;
                TaskOutcome {
                    metric: "accuracy",
                    value: r.accuracy,
                    n_used: r.n_used,
                    n_skipped: r.n_skipped,
                    details: json!({}),
                    model: None,
                }
            }
            TaskData::Classify(ds, cfg) => {
                let out = downstream::train(ds, e, cfg)?;
                let r = downstream::evaluate_classifier(&out.model, &ds.test, e)?;
                let best = &out.history[out.best_epoch - 1];
                TaskOutcome {
                    metric: "accuracy",
                    value: r.accuracy,
                    n_used: r.n_documents,
                    n_skipped: 0,
                    details: json!({
                        "per_class": r.per_class,
                        "confusion": r.confusion,
                        "n_all_oov_test": r.n_all_oov,
                        "n_all_oov_train": out.n_all_oov_train,
                        "best_epoch": out.best_epoch,
                        "validation_accuracy": best.validation_accuracy,
                        "train_accuracy": best.train_accuracy,
                        "classifier": "multinomial logistic regression (full-batch gradient descent, L2)",
                        "tokenization": "split on Unicode whitespace, strip leading/trailing punctuation, \
                                         lowercase lookup with exact-case fallback",
                    }),
                    model: Some(out.model),
                }
            }
        })
    }
}

fn task_name(t: TaskArg) -> &'static str {
    match t {
        TaskArg::Similarity => "similarity",
        TaskArg::Analogy => "analogy",
        TaskArg::Discrim => "discrim",
        TaskArg::Classify => "classify",
    }
}

pub fn eval(a: &EvalArgs) -> CliResult {
    let mut inputs = validate_inputs(&a.embedding, &a.polar, false)?;
    if a.polar.pairs.is_none() && (a.strategy.strategy.is_some() || a.strategy.k.is_some()) {
        return usage("--strategy/--k require --pairs");
    }
    strategy_choice(&a.strategy)?;
    let data_path = TaskData::input_path(a.task, &a.task_options)?;
    inputs.push(data_path.clone());
    let config = config_value(a, &inputs)?;

    let data = TaskData::load(a.task, &a.task_options)?;
    let e = load_embeddings(&a.embedding)?;
    let (outcome, polar_info) = match &a.polar.pairs {
        Some(_) => {
            let pz = polarize(&e, &a.polar, &a.strategy)?;
            let pe = transform_all(&e, &pz.transform, &pz.dm)?;
            let info = json!({ "n_dims": pz.dm.len(), "condition": pz.condition });
            (data.evaluate(pe.embeddings())?, Some(info))
        }
        None => (data.evaluate(&e)?, None),
    };
    if let (Some(path), Some(model)) = (&a.model_out, &outcome.model) {
        model.save(path)?;
    }
    eprintln!("{} {} = {:.4} ({} used, {} skipped)", task_name(a.task), outcome.metric, outcome.value, outcome.n_used, outcome.n_skipped);

    let mut report = Report::new(task_name(a.task), data_path.display().to_string())
        .counts(outcome.n_used, outcome.n_skipped)
        .metric(outcome.metric, outcome.value)?
        .metric("polar", polar_info)?
        .with_config(config);
    if let Value::Object(map) = outcome.details {
        report.metrics.extend(map);
    }
    write_json(&report, a.report.as_deref())?;
    Ok(())
}

pub fn sweep(a: &SweepArgs) -> CliResult {
    let mut inputs = validate_inputs(&a.embedding, &a.polar, true)?;
    inputs.push(TaskData::input_path(a.task, &a.task_options)?);
    if a.k_list.is_empty() {
        return usage("--k-list must name at least one k");
    }
    if a.random_runs == 0 {
        return usage("--random-runs must be at least 1");
    }
    if let Some(out) = &a.out {
        require_writable_parent(out, "--out")?;
    }
    let config = config_value(a, &inputs)?;

    let e = load_embeddings(&a.embedding)?;
    let d = e.dim();
    let pool = candidate_pool(&e, &a.polar)?;
    for &k in &a.k_list {
        if k == 0 || k > pool.len() {
            return usage(format!("k = {k} is outside 1..={}", pool.len()));
        }
        if !a.allow_critical && k.abs_diff(d) < a.critical_band {
            return usage(format!(
                "k = {k} lies within {} of the embedding dimension {d}; the direction matrix is \
                 ill-conditioned in that region and results would be unreliable \
                 (pass --allow-critical to run it anyway)",
                a.critical_band
            ));
        }
    }
    let strategies: Vec<Strategy> = if a.strategies.is_empty() {
        Strategy::ALL.to_vec()
    } else {
        a.strategies.iter().map(|&s| s.into()).collect()
    };
    let data = TaskData::load(a.task, &a.task_options)?;
    let opts = SelectOptions {
        vocab_cap: a.topn_vocab,
        signed_overlap: a.signed_orth,
    };

    let mut sink: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|err| PolarError::Io { path: path.clone(), source: err })?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    let io_err = |err: io::Error| PolarError::Io {
        path: a.out.clone().unwrap_or_else(|| "<stdout>".into()),
        source: err,
    };
    for &k in &a.k_list {
        for &strategy in &strategies {
            let runs = if strategy == Strategy::Random { a.random_runs } else { 1 };
            let mut values = Vec::with_capacity(runs);
            let mut seeds = Vec::new();
            let mut worst: Option<ConditioningReport> = None;
            let mut counts = (0, 0);
            for run in 0..runs {
                let seed = a.seed + run as u64;
                let sel = select::select(strategy, &pool, &e, k, seed, opts)?;
                let mut dm = pool.select(&sel.chosen)?;
                if a.polar.normalize_directions {
                    dm = dm.with_unit_rows();
                }
                let t = compute_transform(&dm, a.polar.rank_tol)?;
                let cond = check_conditioning(&t, &a.polar)?;
                let pe = transform_all(&e, &t, &dm)?;
                let outcome = data.evaluate(pe.embeddings())?;
                values.push(outcome.value);
                counts = (outcome.n_used, outcome.n_skipped);
                if strategy == Strategy::Random {
                    seeds.push(seed);
                }
                if worst.as_ref().is_none_or(|w| cond.condition_number > w.condition_number) {
                    worst = Some(cond);
                }
            }
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            info!("k = {k}, {strategy}: {mean:.4}");
            let row = json!({
                "k": k,
                "strategy": strategy,
                "task": task_name(a.task),
                "metric": match a.task { TaskArg::Similarity => "rho", _ => "accuracy" },
                "value": mean,
                "runs": values,
                "seeds": seeds,
                "n_used": counts.0,
                "n_skipped": counts.1,
                "condition": worst,
                "config": config,
            });
            serde_json::to_writer(&mut sink, &row).map_err(PolarError::from)?;
            sink.write_all(b"\n").map_err(io_err)?;
        }
    }
    sink.flush().map_err(io_err)?;
    Ok(())
}

pub fn inspect(a: &InspectArgs) -> CliResult {
    let inputs = validate_inputs(&a.embedding, &a.polar, false)?;
    if let Some(dims) = &a.dims {
        require_file(dims, "--dims")?;
    }
    let pe = match &a.polar.pairs {
        Some(_) => {
            let e = load_embeddings(&a.embedding)?;
            let pz = polarize(&e, &a.polar, &a.strategy)?;
            transform_all(&e, &pz.transform, &pz.dm)?
        }
        None => {
            if a.embedding.format != FormatArg::GloveTxt {
                return usage("saved polar embeddings are GloVe text; pass --pairs to transform other formats");
            }
            PolarEmbeddingSet::load(&a.embedding.embeddings, a.dims.as_deref())?
        }
    };
    let top = eval::top_k_dimensions(&pe, &a.word, a.top.min(pe.dims().len()))?;
    let mut out = io::stdout().lock();
    for d in &top {
        writeln!(out, "{}: {:.4}", d.pair, d.value).map_err(|err| PolarError::Io {
            path: "<stdout>".into(),
            source: err,
        })?;
    }
    if let Some(path) = &a.report {
        let report = Report::new("inspect", a.embedding.embeddings.display().to_string())
            .counts(1, 0)
            .metric("word", &a.word)?
            .metric("dimensions", &top)?
            .with_config(config_value(a, &inputs)?);
        write_json(&report, Some(path))?;
    }
    Ok(())
}

pub fn condition(a: &ConditionArgs) -> CliResult {
    let inputs = validate_inputs(&a.embedding, &a.polar, true)?;
    strategy_choice(&a.strategy)?;
    let config = config_value(a, &inputs)?;
    let e = load_embeddings(&a.embedding)?;
    let pz = polarize(&e, &a.polar, &a.strategy)?;
    let sv = pz.transform.singular_values();
    let report = Report::new("condition", a.embedding.embeddings.display().to_string())
        .counts(pz.dm.len(), pz.pool.skipped().len())
        .metric("condition", &pz.condition)?
        .metric("singular_value_max", sv.first())?
        .metric("singular_value_min", sv.last())?
        .with_config(config);
    write_json(&report, a.report.as_deref())?;
    Ok(())
}
