//! Command implementations behind the `djl` binary.

pub mod config;

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use djl_core::align::{pca_project, posterior_mean_positions};
use djl_core::archive::PosteriorArchive;
use djl_core::gibbs::run_chains;
use djl_core::io::{self, AttrPredictionRecord, Dataset, EdgePredictionRecord};
use djl_core::kernel::TimeGrid;
use djl_core::model::{EdgeValue, MultiplexGraphSeries};
use djl_core::predict::{
    auc, extend_archive, interval_metrics, mspe, predict_attributes_on_grid, score_edges, AttrPrediction, EdgeCell,
    EdgeScore, ScoreMode,
};
use djl_core::simulate::{mask_dataset, simulate_scheme1, simulate_scheme2, simulate_scheme3, Scenario};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] djl_core::Error),
}

impl CliError {
    /// 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_numerical() => 4,
            CliError::Core(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Flags shared by all subcommands, already merged over the config file.
#[derive(Debug, Clone)]
pub struct Options {
    pub config: RunConfig,
    pub seed: u64,
}

impl Options {
    /// Loads the config and applies `--seed` and `--out`.
    pub fn load(config_path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self> {
        let mut config = RunConfig::load(config_path)?;
        if let Some(dir) = out {
            config.paths.dir = dir;
        }
        if !config.paths.dir.is_dir() {
            return Err(djl_core::Error::Io {
                path: config.paths.dir.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
            }
            .into());
        }
        let seed = seed.unwrap_or(config.seed);
        Ok(Options { config, seed })
    }

    fn path(&self, name: &Path) -> PathBuf {
        self.config.file(name)
    }
}

/// Simulates, masks and writes data, ledger and truth files.
pub fn cmd_simulate(opts: &Options) -> Result<String> {
    let c = &opts.config;
    let s = &c.simulate;
    let policy = c.mask.policy();
    policy.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let grid = TimeGrid::integer(s.times + policy.holdout_future_times).map_err(|e| CliError::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let truth = match s.scheme {
        1 => simulate_scheme1(&s.scheme1()?, &grid, &mut rng)?,
        2 => simulate_scheme2(&s.scheme2(), &grid, &mut rng)?,
        3 => simulate_scheme3(&s.scheme3()?, &grid, &mut rng)?,
        n => return Err(CliError::Config(format!("unknown scheme {n}"))),
    };
    let (graph, attrs, ledger) = mask_dataset(&truth.graph, &truth.attrs, &policy, &mut rng)?;
    let ids = io::index_ids(s.nodes);
    let p = &c.paths;
    io::write_edges(&opts.path(&p.edges), &graph, &ids)?;
    io::write_attributes(&opts.path(&p.attributes), &attrs, &ids)?;
    io::write_ledger(&opts.path(&p.ledger_edges), &opts.path(&p.ledger_attributes), &ledger, &ids)?;
    io::write_edges(&opts.path(&p.truth_edges), &truth.graph, &ids)?;
    io::write_attributes(&opts.path(&p.truth_attributes), &truth.attrs, &ids)?;
    Ok(format!(
        "simulated scheme {}: J={} L={} m={} T={} (+{} held out); {} edge cells, {} attribute cells; hidden {} edge cells, {} attribute cells",
        s.scheme,
        s.nodes,
        s.layers,
        s.attrs,
        graph.num_times(),
        policy.holdout_future_times,
        graph.num_cells(),
        attrs.num_cells(),
        ledger.edges.len(),
        ledger.attrs.len()
    ))
}

fn read_data(opts: &Options) -> Result<Dataset> {
    let p = &opts.config.paths;
    Ok(io::read_dataset(&opts.path(&p.edges), &opts.path(&p.attributes))?)
}

/// Fits the model and writes the archive and a diagnostics report.
pub fn cmd_fit(opts: &Options, chains: Option<usize>) -> Result<String> {
    let data = read_data(opts)?;
    let model = opts.config.model.model_config(opts.seed)?;
    let chains = chains.unwrap_or(opts.config.model.chains);
    if chains == 0 {
        return Err(CliError::Config("chains must be at least 1".into()));
    }
    let mut archive = run_chains(&data.graph, &data.attrs, &model, chains)?;
    archive.node_ids = data.node_ids;
    let p = &opts.config.paths;
    archive.save(&opts.path(&p.archive))?;

    let prov = &archive.run_info;
    let per_sweep = prov.wall_seconds / (prov.sweeps * prov.chains).max(1) as f64;
    let mut report = String::new();
    let _ = writeln!(report, "draws {}", archive.len());
    let _ = writeln!(report, "chains {}", prov.chains);
    let _ = writeln!(report, "sweeps_per_chain {}", prov.sweeps);
    let _ = writeln!(report, "wall_seconds {:.3}", prov.wall_seconds);
    let _ = writeln!(report, "seconds_per_sweep {per_sweep:.5}");
    let _ = writeln!(report, "{:<24} {:>10} {:>8} {:>8}", "monitor", "ess", "draws", "ess/Q");
    for m in &archive.monitors {
        let _ = writeln!(
            report,
            "{:<24} {:>10.1} {:>8} {:>8.4}",
            m.name,
            m.ess,
            m.draws,
            m.ess / m.draws.max(1) as f64
        );
    }
    let path = opts.path(&p.diagnostics);
    std::fs::write(&path, &report).map_err(|e| djl_core::Error::Io { path, source: e })?;
    let min = archive
        .monitors
        .iter()
        .map(|m| m.ess / m.draws.max(1) as f64)
        .fold(f64::INFINITY, f64::min);
    Ok(format!(
        "fitted {} draws from {} chain(s), {:.4} s/sweep, min ESS/Q {:.3}",
        archive.len(),
        prov.chains,
        per_sweep,
        min
    ))
}

fn check_ids(archive: &PosteriorArchive, data: &Dataset) -> Result<()> {
    if !archive.node_ids.is_empty() && archive.node_ids != data.node_ids {
        return Err(djl_core::Error::KeyMismatch("archive node ids differ from the dataset's".into()).into());
    }
    Ok(())
}

/// Future time stamps to forecast: configured, or the ledger's times past the grid.
fn future_times(opts: &Options, grid: &TimeGrid) -> Result<Option<TimeGrid>> {
    let last = *grid.times().last().expect("grids are non-empty");
    let times: Vec<f64> = match &opts.config.predict.future_times {
        Some(t) => t.clone(),
        None => {
            let p = &opts.config.paths;
            let (le, la) = (opts.path(&p.ledger_edges), opts.path(&p.ledger_attributes));
            if !le.exists() || !la.exists() {
                return Ok(None);
            }
            let (edges, attrs) = io::read_ledger(&le, &la)?;
            let set: BTreeSet<u64> = edges
                .iter()
                .map(|e| e.time)
                .chain(attrs.iter().map(|a| a.time))
                .filter(|&t| t > last)
                .map(f64::to_bits)
                .collect();
            let mut v: Vec<f64> = set.into_iter().map(f64::from_bits).collect();
            v.sort_by(f64::total_cmp);
            v
        }
    };
    if times.is_empty() {
        return Ok(None);
    }
    if times.iter().any(|&t| t <= last) {
        return Err(CliError::Config(format!("future times must lie after the last grid time {last}")));
    }
    Ok(Some(TimeGrid::new(times).map_err(|e| CliError::Config(e.to_string()))?))
}

fn edge_rows(scores: &[EdgeScore], scenario: Scenario, times: &[f64], ids: &[String]) -> Vec<EdgePredictionRecord> {
    scores
        .iter()
        .map(|s| EdgePredictionRecord {
            scenario,
            time: times[s.t],
            layer: s.layer,
            i: ids[s.i].clone(),
            j: ids[s.j].clone(),
            probability: s.probability,
            predicted: s.predicted(),
        })
        .collect()
}

fn attr_rows(preds: &[AttrPrediction], scenario: Scenario, times: &[f64], ids: &[String]) -> Vec<AttrPredictionRecord> {
    preds
        .iter()
        .map(|p| AttrPredictionRecord {
            scenario,
            time: times[p.t],
            node: ids[p.node].clone(),
            attr: p.attr,
            point: p.point,
            lo: p.lo,
            hi: p.hi,
        })
        .collect()
}

fn graph_cells(graph: &MultiplexGraphSeries, observed: bool) -> Vec<EdgeCell> {
    (0..graph.num_cells())
        .filter(|&c| graph.is_observed(c) == observed)
        .map(|c| {
            let (pair, l, t) = graph.cell_coords(c);
            let (i, j) = graph.pair_nodes(pair);
            (i, j, l, t)
        })
        .collect()
}

/// Scores observed, unobserved and future cells and writes both prediction tables.
pub fn cmd_predict(opts: &Options, bernoulli: bool, threshold: Option<f64>) -> Result<String> {
    let c = &opts.config;
    let threshold = threshold.unwrap_or(c.predict.threshold);
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(CliError::Config(format!("threshold {threshold} outside (0, 1)")));
    }
    let mode = if bernoulli || c.predict.bernoulli_scores {
        ScoreMode::Bernoulli
    } else {
        ScoreMode::RaoBlackwell
    };
    let data = read_data(opts)?;
    let archive = PosteriorArchive::load(&opts.path(&c.paths.archive))?;
    check_ids(&archive, &data)?;
    if archive.grid != *data.graph.grid() {
        return Err(djl_core::Error::GridMismatch(format!(
            "archive grid has {} points, dataset grid has {}",
            archive.grid.len(),
            data.graph.num_times()
        ))
        .into());
    }
    let ids = &data.node_ids;
    let times = archive.grid.times();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut edges = Vec::new();
    let mut attrs = Vec::new();
    for (scenario, observed) in [(Scenario::In, true), (Scenario::Missing, false)] {
        let cells = graph_cells(&data.graph, observed);
        let scores = score_edges(&archive, &cells, mode, threshold, &mut rng)?;
        edges.extend(edge_rows(&scores, scenario, times, ids));
        let targets: Vec<_> = (0..data.attrs.num_cells())
            .filter(|&k| data.attrs.is_observed(k) == observed)
            .map(|k| data.attrs.cell_coords(k))
            .collect();
        let preds = predict_attributes_on_grid(&archive, &targets, &mut rng)?;
        attrs.extend(attr_rows(&preds, scenario, times, ids));
    }
    if let Some(fut) = future_times(opts, &archive.grid)? {
        let ext = extend_archive(&archive, &fut, &mut rng)?;
        let future = MultiplexGraphSeries::unobserved(data.graph.num_nodes(), data.graph.num_layers(), fut.clone())?;
        let scores = score_edges(&ext, &graph_cells(&future, false), mode, threshold, &mut rng)?;
        edges.extend(edge_rows(&scores, Scenario::Out, fut.times(), ids));
        let d = &archive.dims;
        let nt = fut.len();
        let targets: Vec<_> = (0..d.nodes)
            .flat_map(|j| (0..d.attrs).flat_map(move |k| (0..nt).map(move |t| (j, k, t))))
            .collect();
        let preds = predict_attributes_on_grid(&ext, &targets, &mut rng)?;
        attrs.extend(attr_rows(&preds, Scenario::Out, fut.times(), ids));
    }
    io::write_edge_predictions(&opts.path(&c.paths.edge_predictions), &edges)?;
    io::write_attr_predictions(&opts.path(&c.paths.attr_predictions), &attrs)?;
    let count = |s: Scenario| edges.iter().filter(|r| r.scenario == s).count();
    Ok(format!(
        "wrote {} edge predictions (in {}, missing {}, out {}) and {} attribute predictions",
        edges.len(),
        count(Scenario::In),
        count(Scenario::Missing),
        count(Scenario::Out),
        attrs.len()
    ))
}

type EdgeKey = (u64, usize, String, String);
type AttrKey = (u64, String, usize);

fn edge_key(time: f64, layer: usize, i: &str, j: &str) -> EdgeKey {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    (time.to_bits(), layer, a.to_string(), b.to_string())
}

fn mismatch<K: std::fmt::Debug>(what: &str, missing: &[K]) -> CliError {
    let shown: Vec<String> = missing.iter().take(10).map(|k| format!("{k:?}")).collect();
    let more = missing.len().saturating_sub(10);
    let tail = if more > 0 { format!(" and {more} more") } else { String::new() };
    djl_core::Error::KeyMismatch(format!("{} {what} without predictions: {}{tail}", missing.len(), shown.join(", "))).into()
}

/// Scores prediction tables against the dataset (in-sample) and the ledger
/// (missing and future cells); writes `metrics.csv`.
pub fn cmd_evaluate(opts: &Options) -> Result<String> {
    let p = &opts.config.paths;
    let preds_e = io::read_edge_predictions(&opts.path(&p.edge_predictions))?;
    let preds_a = io::read_attr_predictions(&opts.path(&p.attr_predictions))?;
    let (ledger_e, ledger_a) = io::read_ledger(&opts.path(&p.ledger_edges), &opts.path(&p.ledger_attributes))?;
    let data = read_data(opts)?;

    let mut edge_pred: HashMap<(Scenario, EdgeKey), f64> = HashMap::new();
    for r in &preds_e {
        edge_pred.insert((r.scenario, edge_key(r.time, r.layer, &r.i, &r.j)), r.probability);
    }
    let mut attr_pred: HashMap<(Scenario, AttrKey), &AttrPredictionRecord> = HashMap::new();
    for r in &preds_a {
        attr_pred.insert((r.scenario, (r.time.to_bits(), r.node.clone(), r.attr)), r);
    }

    // Labelled cells per scenario: in-sample from the dataset, the rest from the ledger.
    let mut edge_truth: Vec<(Scenario, EdgeKey, bool)> = Vec::new();
    let times = data.graph.grid().times();
    for cell in data.graph.observed_cells() {
        let (pair, l, t) = data.graph.cell_coords(cell);
        let (i, j) = data.graph.pair_nodes(pair);
        let key = edge_key(times[t], l, &data.node_ids[i], &data.node_ids[j]);
        edge_truth.push((Scenario::In, key, data.graph.value(cell) == EdgeValue::Present));
    }
    for r in &ledger_e {
        edge_truth.push((r.scenario, edge_key(r.time, r.layer, &r.i, &r.j), r.value));
    }
    let mut attr_truth: Vec<(Scenario, AttrKey, f64)> = Vec::new();
    let atimes = data.attrs.grid().times();
    for cell in data.attrs.observed_cells() {
        let (j, k, t) = data.attrs.cell_coords(cell);
        attr_truth.push((Scenario::In, (atimes[t].to_bits(), data.node_ids[j].clone(), k), data.attrs.raw(cell)));
    }
    for r in &ledger_a {
        attr_truth.push((r.scenario, (r.time.to_bits(), r.node.clone(), r.attr), r.value));
    }

    let missing_e: Vec<_> = edge_truth
        .iter()
        .filter(|(s, k, _)| *s != Scenario::In && !edge_pred.contains_key(&(*s, k.clone())))
        .map(|(s, k, _)| (s.name(), f64::from_bits(k.0), k.1, k.2.clone(), k.3.clone()))
        .collect();
    if !missing_e.is_empty() {
        return Err(mismatch("ledger edge cells", &missing_e));
    }
    let missing_a: Vec<_> = attr_truth
        .iter()
        .filter(|(s, k, _)| *s != Scenario::In && !attr_pred.contains_key(&(*s, k.clone())))
        .map(|(s, k, _)| (s.name(), f64::from_bits(k.0), k.1.clone(), k.2))
        .collect();
    if !missing_a.is_empty() {
        return Err(mismatch("ledger attribute cells", &missing_a));
    }

    let mut rows: Vec<(String, String, f64)> = Vec::new();
    let mut notes = Vec::new();
    for scenario in [Scenario::In, Scenario::Missing, Scenario::Out] {
        let name = scenario.name().to_string();
        let labelled: Vec<(f64, bool)> = edge_truth
            .iter()
            .filter(|(s, _, _)| *s == scenario)
            .filter_map(|(s, k, y)| edge_pred.get(&(*s, k.clone())).map(|p| (*p, *y)))
            .collect();
        if !labelled.is_empty() {
            match auc(&labelled) {
                Ok(a) => rows.push((name.clone(), "auc".into(), a)),
                Err(e) => notes.push(format!("{name}: AUC skipped ({e})")),
            }
        }
        let (preds, truth): (Vec<AttrPrediction>, Vec<f64>) = attr_truth
            .iter()
            .filter(|(s, _, _)| *s == scenario)
            .filter_map(|(s, k, y)| {
                attr_pred.get(&(*s, k.clone())).map(|r| {
                    let p = AttrPrediction {
                        node: 0,
                        attr: r.attr,
                        t: 0,
                        point: r.point,
                        lo: r.lo,
                        hi: r.hi,
                    };
                    (p, *y)
                })
            })
            .unzip();
        if preds.is_empty() {
            continue;
        }
        rows.push((name.clone(), "mspe".into(), mspe(&preds, &truth)?));
        // Interval coverage is reported for held-back cells only.
        if scenario != Scenario::In {
            let (cov, len) = interval_metrics(&preds, &truth)?;
            rows.push((name.clone(), "coverage".into(), cov));
            rows.push((name, "interval_length".into(), len));
        }
    }
    io::write_metrics(&opts.path(&p.metrics), &rows)?;

    let mut out = String::from("scenario  metric           value\n");
    for (s, m, v) in &rows {
        let _ = writeln!(out, "{s:<9} {m:<16} {v:.4}");
    }
    for n in notes {
        let _ = writeln!(out, "note: {n}");
    }
    Ok(out.trim_end().to_string())
}

/// Writes Procrustes-aligned posterior mean positions projected to 2-D, and
/// optionally the Gram matrix of each requested time.
pub fn cmd_align(opts: &Options, times: Option<Vec<usize>>, gram: bool) -> Result<String> {
    let c = &opts.config;
    let archive = PosteriorArchive::load(&opts.path(&c.paths.archive))?;
    if archive.dims.shared_rank < 2 {
        return Err(CliError::Config("alignment needs shared_rank >= 2".into()));
    }
    let times = times.unwrap_or_else(|| c.align.times.clone());
    let times = if times.is_empty() { (0..archive.grid.len()).collect() } else { times };
    let gram = gram || c.align.gram;
    let ids = if archive.node_ids.is_empty() {
        io::index_ids(archive.dims.nodes)
    } else {
        archive.node_ids.clone()
    };

    let mut pos = String::from("time_index,time,node,x,y,rank_deficient\n");
    let mut gram_out = String::from("time_index,node");
    for id in &ids {
        gram_out.push(',');
        gram_out.push_str(id);
    }
    gram_out.push('\n');
    let mut warnings = 0;
    for &t in &times {
        let frame = posterior_mean_positions(&archive, t)?;
        let proj = pca_project(&frame)?;
        warnings += usize::from(proj.rank_deficient);
        let time = archive.grid.times()[t];
        for (j, id) in ids.iter().enumerate() {
            let _ = writeln!(
                pos,
                "{t},{time},{id},{},{},{}",
                proj.coords[(j, 0)],
                proj.coords[(j, 1)],
                proj.rank_deficient
            );
        }
        if gram {
            let g = frame.gram();
            for (j, id) in ids.iter().enumerate() {
                let _ = write!(gram_out, "{t},{id}");
                for k in 0..ids.len() {
                    let _ = write!(gram_out, ",{}", g[(j, k)]);
                }
                gram_out.push('\n');
            }
        }
    }
    let path = opts.path(&c.paths.positions);
    std::fs::write(&path, pos).map_err(|e| djl_core::Error::Io { path, source: e })?;
    if gram {
        let path = opts.path(Path::new("gram.csv"));
        std::fs::write(&path, gram_out).map_err(|e| djl_core::Error::Io { path, source: e })?;
    }
    let mut msg = format!("aligned {} time point(s) for {} nodes", times.len(), ids.len());
    if warnings > 0 {
        let _ = write!(msg, "; warning: {warnings} rank-deficient projection(s)");
    }
    Ok(msg)
}
