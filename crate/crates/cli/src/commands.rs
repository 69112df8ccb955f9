//! Subcommand implementations. Each returns a one-line summary for the log.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use kmland::analysis::compare::{accuracy, adjusted_rand_index, rand_index};
use kmland::analysis::disconnectivity::{build_disconnectivity, default_range};
use kmland::analysis::frustration::{frustration_profile, log_grid};
use kmland::analysis::report::{
    path_rows, write_frustration_csv, write_minima_csv, write_path_csv, write_rows, MinimumRow,
    Provenance,
};
use kmland::analysis::structure::structure_type;
use kmland::analysis::svg::{emit_disconnectivity, Colouring};
use kmland::kmeans::{explore, MinimizerConfig};
use kmland::landscape::ValidationTolerances;
use kmland::network::{grow_connected, Network, RateParams};
use kmland::transition::SurrogateParams;
use kmland::{Assignment, Dataset64, Landscape64, SearchConfig};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

pub const MINIMA_DB: &str = "minima.json";
pub const NETWORK_DB: &str = "network.json";

/// Tolerance for clamping barriers lost in the seam gap.
const TOL_SEAM: f64 = 1e-3;

/// Dataset plus provenance shared by every command.
pub struct Context {
    pub cfg: RunConfig,
    pub data: Dataset64,
    pub prov: Provenance,
}

impl Context {
    pub fn new(cfg: RunConfig) -> Result<Self, CliError> {
        let data = load_dataset(&cfg)?;
        let prov = Provenance {
            config_hash: cfg.hash(&data.content_hash()),
            seed: cfg.seed,
        };
        Ok(Context { cfg, data, prov })
    }

    fn out_path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn ensure_out(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.cfg.out)
            .with_context(|| format!("creating {}", self.cfg.out.display()))?;
        Ok(())
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        self.ensure_out()?;
        let path = self.out_path(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(BufWriter::new(f))
    }

    /// Loads a database and checks it belongs to the configured data.
    fn load_db(&self, path: &Path) -> Result<Landscape64, CliError> {
        if !path.exists() {
            return Err(CliError::MissingInput(format!(
                "database {} not found",
                path.display()
            )));
        }
        let land = Landscape64::load(path)
            .map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
        if land.meta.dataset_hash != self.data.content_hash() {
            return Err(CliError::Config(format!(
                "{} was built from a different dataset",
                path.display()
            )));
        }
        if let Some(k) = self.cfg.k {
            if k != land.k() {
                return Err(CliError::Config(format!(
                    "k = {k} but {} has K = {}",
                    path.display(),
                    land.k()
                )));
            }
        }
        Ok(land)
    }

    fn db_or(&self, db: &Option<PathBuf>, default: &str) -> PathBuf {
        db.clone().unwrap_or_else(|| self.out_path(default))
    }

    fn meta(&self) -> Vec<(String, String)> {
        self.prov.pairs()
    }

    /// Structure-type id of every minimum.
    fn structure_ids(&self, land: &Landscape64) -> Vec<usize> {
        land.minima
            .records()
            .iter()
            .map(|m| structure_type(&m.assignment(), self.data.outlier_flags()).canonical_id)
            .collect()
    }

    /// Canonical labels of the original rows of every minimum.
    fn partitions(&self, land: &Landscape64) -> Vec<Vec<u32>> {
        let flags = self.data.outlier_flags();
        land.minima
            .records()
            .iter()
            .map(|m| {
                let original: Vec<usize> = m
                    .assignment()
                    .labels()
                    .iter()
                    .zip(flags)
                    .filter(|(_, &o)| !o)
                    .map(|(&l, _)| l)
                    .collect();
                Assignment(original).canonical_key()
            })
            .collect()
    }
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset64, CliError> {
    if !cfg.data.exists() {
        return Err(CliError::MissingInput(format!(
            "dataset {} not found",
            cfg.data.display()
        )));
    }
    let mut d = Dataset64::load_csv(&cfg.data, cfg.labels.as_deref())
        .map_err(|e| CliError::Config(format!("{}: {e}", cfg.data.display())))?;
    if let Some(path) = &cfg.outliers {
        if !path.exists() {
            return Err(CliError::MissingInput(format!(
                "outlier file {} not found",
                path.display()
            )));
        }
        let rows = Dataset64::load_rows_csv(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        d = d
            .append_outliers(&rows)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    }
    Ok(d)
}

fn network(land: &Landscape64) -> Result<Network, CliError> {
    Network::from_landscape(land, TOL_SEAM)
        .map_err(|e| CliError::Failed(anyhow::anyhow!("network: {e}")))
}

fn require_connected(net: &Network) -> Result<(), CliError> {
    if net.is_connected() {
        Ok(())
    } else {
        Err(CliError::Partial(format!(
            "network has {} components; run connect with a larger budget",
            net.n_components()
        )))
    }
}

fn rate_params(cfg: &RunConfig) -> Result<RateParams, CliError> {
    RateParams::new(cfg.temperature).map_err(|e| CliError::Config(e.to_string()))
}

fn check_id(land: &Landscape64, id: usize) -> Result<usize, CliError> {
    if id < land.minima.len() {
        Ok(id)
    } else {
        Err(CliError::Config(format!("no minimum with id {id}")))
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Failed(e.into())
}

fn minima_rows(ctx: &Context, land: &Landscape64) -> Vec<MinimumRow> {
    let structure = ctx.structure_ids(land);
    land.minima
        .records()
        .iter()
        .map(|m| MinimumRow {
            min_id: m.id,
            cost: m.cost,
            ari: accuracy(&m.assignment(), &ctx.data).ok(),
            structure_type_id: structure[m.id],
        })
        .collect()
}

pub fn explore_cmd(ctx: &Context) -> Result<String, CliError> {
    let k = ctx
        .cfg
        .k
        .ok_or_else(|| CliError::Config("explore needs the number of clusters (--k)".into()))?;
    let mut land = Landscape64::new(&ctx.data, k, ctx.cfg.seed, ctx.prov.config_hash.clone());
    let stats = explore(
        &ctx.data,
        &mut land.minima,
        ctx.cfg.n_starts,
        ctx.cfg.seed,
        0,
        &MinimizerConfig::default(),
        ctx.cfg.threads > 1,
    );
    ctx.ensure_out()?;
    land.save(ctx.out_path(MINIMA_DB))?;
    write_minima_csv(
        ctx.create("minima.csv")?,
        &ctx.prov,
        &minima_rows(ctx, &land),
    )
    .map_err(csv_err)?;
    Ok(format!(
        "starts={} minima={} duplicates={} rejected={} failed={}",
        stats.starts,
        land.minima.len(),
        stats.duplicates,
        stats.rejected,
        stats.failed
    ))
}

pub fn connect_cmd(ctx: &Context, db: &Option<PathBuf>) -> Result<String, CliError> {
    let mut land = ctx.load_db(&ctx.db_or(db, MINIMA_DB))?;
    land.meta.config_hash = ctx.prov.config_hash.clone();
    land.meta.seed = ctx.cfg.seed;
    let mut search = SearchConfig::for_dataset(&ctx.data);
    search.surrogate = SurrogateParams::new(ctx.cfg.sigma, ctx.cfg.alpha)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let before = land.minima.len();
    let report = grow_connected(
        ctx.data.points(),
        &mut land,
        ctx.cfg.budget,
        &search,
        TOL_SEAM,
    )
    .map_err(|e| CliError::Failed(anyhow::anyhow!("network growth: {e}")))?;
    ctx.ensure_out()?;
    land.save(ctx.out_path(NETWORK_DB))?;
    let summary = format!(
        "minima={} new_minima={} ts={} searches={} failed={} components={}",
        land.minima.len(),
        land.minima.len() - before,
        land.transition_states.len(),
        report.searches,
        report.searches - report.successes,
        report.components
    );
    if report.connected {
        Ok(summary)
    } else {
        Err(CliError::Partial(format!("budget exhausted: {summary}")))
    }
}

#[derive(Serialize)]
struct RateRow {
    sources: String,
    sinks: String,
    #[serde(rename = "T")]
    temperature: f64,
    rate: f64,
}

fn id_list(ids: &[usize]) -> String {
    ids.iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Set-to-set rate when both sets are given, otherwise the escape rate of
/// every minimum to the global minimum.
pub fn rates_cmd(
    ctx: &Context,
    db: &Option<PathBuf>,
    from: &[usize],
    to: &[usize],
) -> Result<String, CliError> {
    let land = ctx.load_db(&ctx.db_or(db, NETWORK_DB))?;
    let net = network(&land)?;
    require_connected(&net)?;
    let p = rate_params(&ctx.cfg)?;
    let gm = net
        .global_minimum()
        .ok_or_else(|| CliError::Config("database has no minima".into()))?;
    let pairs: Vec<(Vec<usize>, Vec<usize>)> = match (from.is_empty(), to.is_empty()) {
        (false, false) => vec![(from.to_vec(), to.to_vec())],
        (false, true) => vec![(from.to_vec(), vec![gm])],
        (true, false) => return Err(CliError::Config("--to needs --from".into())),
        (true, true) => (0..net.len())
            .filter(|&m| m != gm)
            .map(|m| (vec![m], vec![gm]))
            .collect(),
    };
    let mut rows = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        for &id in a.iter().chain(&b) {
            check_id(&land, id)?;
        }
        let rate = net
            .overall_rate(&a, &b, p)
            .map_err(|e| CliError::Config(format!("rate {a:?} -> {b:?}: {e}")))?;
        rows.push(RateRow {
            sources: id_list(&a),
            sinks: id_list(&b),
            temperature: ctx.cfg.temperature,
            rate,
        });
    }
    write_rows(ctx.create("rates.csv")?, &ctx.prov, &rows).map_err(csv_err)?;
    Ok(format!("rates={} T={}", rows.len(), ctx.cfg.temperature))
}

pub fn path_cmd(
    ctx: &Context,
    db: &Option<PathBuf>,
    from: usize,
    to: Option<usize>,
) -> Result<String, CliError> {
    let land = ctx.load_db(&ctx.db_or(db, NETWORK_DB))?;
    let net = network(&land)?;
    require_connected(&net)?;
    let to = match to {
        Some(t) => t,
        None => net
            .global_minimum()
            .ok_or_else(|| CliError::Config("database has no minima".into()))?,
    };
    check_id(&land, from)?;
    check_id(&land, to)?;
    if from == to {
        return Err(CliError::Config("path endpoints coincide".into()));
    }
    let path = net
        .fastest_path(from, to, rate_params(&ctx.cfg)?)
        .map_err(|e| CliError::Failed(anyhow::anyhow!("fastest path: {e}")))?;
    let rows = path_rows(&path, &ctx.structure_ids(&land), &ctx.partitions(&land));
    write_path_csv(ctx.create("path.csv")?, &ctx.prov, &rows).map_err(csv_err)?;
    Ok(format!(
        "from={from} to={to} minima={} highest_J={} weight={}",
        path.minima().len(),
        path.highest_cost(),
        path.weight
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum LeafColour {
    Uniform,
    Cost,
    Accuracy,
    Structure,
}

pub fn dgraph_cmd(
    ctx: &Context,
    db: &Option<PathBuf>,
    colour: LeafColour,
    levels: usize,
) -> Result<String, CliError> {
    let land = ctx.load_db(&ctx.db_or(db, NETWORK_DB))?;
    let net = network(&land)?;
    let colouring = match colour {
        LeafColour::Uniform => Colouring::Uniform,
        LeafColour::Cost => Colouring::Numeric(net.costs().to_vec()),
        LeafColour::Accuracy => Colouring::Numeric(
            land.minima
                .records()
                .iter()
                .map(|m| accuracy(&m.assignment(), &ctx.data))
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Config(format!("accuracy colouring: {e}")))?,
        ),
        LeafColour::Structure => Colouring::Categorical(ctx.structure_ids(&land)),
    };
    let (lo, hi) = default_range(&net);
    let tree = build_disconnectivity(&net, levels, lo, hi)
        .map_err(|e| CliError::Config(format!("disconnectivity: {e}")))?;
    ctx.ensure_out()?;
    let meta = ctx.meta();
    let meta: Vec<(&str, &str)> = meta.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
    emit_disconnectivity(&tree, &colouring, ctx.out_path("dgraph.svg"), &meta)?;
    Ok(format!(
        "leaves={} levels={} components={}",
        tree.leaves.len(),
        tree.levels.len(),
        net.n_components()
    ))
}

pub fn frustration_cmd(
    ctx: &Context,
    db: &Option<PathBuf>,
    t_min: f64,
    t_max: f64,
    n: usize,
) -> Result<String, CliError> {
    if !(t_min > 0.0 && t_max >= t_min && n >= 1) {
        return Err(CliError::Config(
            "need 0 < t-min <= t-max and at least one temperature".into(),
        ));
    }
    let land = ctx.load_db(&ctx.db_or(db, MINIMA_DB))?;
    let costs: Vec<f64> = land.minima.records().iter().map(|m| m.cost).collect();
    let profile = frustration_profile(&costs, &log_grid(t_min, t_max, n))
        .map_err(|e| CliError::Config(e.to_string()))?;
    write_frustration_csv(ctx.create("frustration.csv")?, &ctx.prov, &profile).map_err(csv_err)?;
    Ok(format!("minima={} temperatures={n}", costs.len()))
}

#[derive(Serialize)]
struct CompareRow {
    a: usize,
    b: usize,
    #[serde(rename = "RI")]
    ri: f64,
    #[serde(rename = "ARI")]
    ari: f64,
    #[serde(rename = "T")]
    temperature: f64,
    rate: f64,
}

pub fn compare_cmd(
    ctx: &Context,
    db: &Option<PathBuf>,
    a: usize,
    b: usize,
) -> Result<String, CliError> {
    let land = ctx.load_db(&ctx.db_or(db, NETWORK_DB))?;
    check_id(&land, a)?;
    check_id(&land, b)?;
    if a == b {
        return Err(CliError::Config(
            "compare needs two different minima".into(),
        ));
    }
    let net = network(&land)?;
    let comp = net.components();
    if comp[a] != comp[b] {
        return Err(CliError::Partial(format!(
            "minima {a} and {b} are not connected"
        )));
    }
    let la = land.minima.get(a).unwrap().assignment();
    let lb = land.minima.get(b).unwrap().assignment();
    let ri = rand_index(la.labels(), lb.labels()).map_err(|e| CliError::Config(e.to_string()))?;
    let ari = adjusted_rand_index(la.labels(), lb.labels())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let rate = net
        .overall_rate(&[a], &[b], rate_params(&ctx.cfg)?)
        .map_err(|e| CliError::Failed(anyhow::anyhow!("rate: {e}")))?;
    let row = CompareRow {
        a,
        b,
        ri,
        ari,
        temperature: ctx.cfg.temperature,
        rate,
    };
    write_rows(ctx.create("compare.csv")?, &ctx.prov, &[row]).map_err(csv_err)?;
    Ok(format!("a={a} b={b} RI={ri} ARI={ari} rate={rate}"))
}

/// Prints each violation on stdout; any violation is a failure.
pub fn validate_cmd(ctx: &Context, db: &Option<PathBuf>) -> Result<String, CliError> {
    let path = match db {
        Some(p) => p.clone(),
        None if ctx.out_path(NETWORK_DB).exists() => ctx.out_path(NETWORK_DB),
        None => ctx.out_path(MINIMA_DB),
    };
    if !path.exists() {
        return Err(CliError::MissingInput(format!(
            "database {} not found",
            path.display()
        )));
    }
    let land = Landscape64::load(&path)
        .map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
    let violations = land.validate(&ctx.data, &ValidationTolerances::default());
    for v in &violations {
        println!("{v}");
    }
    let summary = format!(
        "db={} minima={} ts={} violations={}",
        path.display(),
        land.minima.len(),
        land.transition_states.len(),
        violations.len()
    );
    if violations.is_empty() {
        Ok(summary)
    } else {
        Err(CliError::Failed(anyhow::anyhow!("{summary}")))
    }
}
