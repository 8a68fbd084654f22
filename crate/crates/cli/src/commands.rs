use std::fs::{self, File};
use std::io::BufReader;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use chrono::{Datelike, TimeZone, Utc};
use clap::Args;

use webusage::cluster::{self, cluster_to_dot, clusters_to_csv, relevance_to_csv, ClusterParams, Clustering};
use webusage::cousage::{build_transactions, cooccurrence, equivalence, ItemKind};
use webusage::factors::{self, FactorEvents, FactorKind, StoredCounts};
use webusage::fixture::{self, CommunitySpec, FixtureSpec};
use webusage::ingest::{DisplayRecord, parse_display_log, parse_order_log, parse_query_log, LogKind, OrderRecord, ParseOutcome, TldTable};
use webusage::map::{build_map, MapOptions, SvgOptions};
use webusage::stats::{self, Dataset, Dimension, UsageData};
use webusage::store::{read_biblio_jsonl, read_customers_csv, Datastore, ImportStatus, StoreRecord};
use webusage::time::{Period, Periodicity};

use crate::config::{usage, CliError, CliResult, RunConfig};

fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{}: no such file", path.display())))
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| webusage::Error::Io { path: parent.to_owned(), source: e })?;
    }
    fs::write(path, contents).map_err(|e| webusage::Error::Io { path: path.to_owned(), source: e })?;
    Ok(())
}

fn status_word(status: ImportStatus) -> &'static str {
    match status {
        ImportStatus::Appended => "appended",
        ImportStatus::DuplicateBatch => "duplicate-batch",
    }
}

fn kind_name(kind: LogKind) -> &'static str {
    match kind {
        LogKind::Query => "query",
        LogKind::Display => "display",
        LogKind::Order => "order",
    }
}

struct FileSummary {
    records: usize,
    errors: usize,
    snapshot: u64,
    status: ImportStatus,
}

fn import_parsed<T: StoreRecord>(
    store: &mut Datastore,
    file: &Path,
    outcome: ParseOutcome<T>,
) -> CliResult<FileSummary> {
    for e in &outcome.errors {
        eprintln!("{}:{}: {}", file.display(), e.line, e.reason);
    }
    for w in &outcome.warnings {
        eprintln!("{}:{}: warning: {}", file.display(), w.line, w.message);
    }
    let imported = store.import(&outcome.records)?;
    Ok(FileSummary {
        records: outcome.records.len(),
        errors: outcome.errors.len(),
        snapshot: imported.snapshot.snapshot_id,
        status: imported.status,
    })
}

pub fn ingest(cfg: &RunConfig, files: &[PathBuf], tld_table: Option<PathBuf>) -> CliResult<()> {
    for f in files {
        require_file(f)?;
    }
    let tlds = match cfg.pick(tld_table, "tld_table")? {
        Some(path) => {
            require_file(&path)?;
            TldTable::load(&path)?
        }
        None => TldTable::builtin(),
    };
    let mut store = Datastore::open(cfg.store_root()?)?;
    let (mut records, mut errors, mut snapshots) = (0, 0, 0);
    for file in files {
        let text = fs::read_to_string(file).map_err(|e| webusage::Error::Io { path: file.clone(), source: e })?;
        let Some(kind) = LogKind::sniff(&text) else {
            println!("{}\tempty\tnothing imported", file.display());
            continue;
        };
        let summary = match kind {
            LogKind::Query => import_parsed(&mut store, file, parse_query_log(text.as_bytes(), &tlds)?)?,
            LogKind::Display => import_parsed(&mut store, file, parse_display_log(text.as_bytes(), &tlds)?)?,
            LogKind::Order => import_parsed(&mut store, file, parse_order_log(text.as_bytes())?)?,
        };
        println!(
            "{}\t{}\trecords={}\terrors={}\tsnapshot={}\t{}",
            file.display(),
            kind_name(kind),
            summary.records,
            summary.errors,
            summary.snapshot,
            status_word(summary.status)
        );
        records += summary.records;
        errors += summary.errors;
        if summary.status == ImportStatus::Appended {
            snapshots += 1;
        }
    }
    println!("files={} records={records} errors={errors} snapshots={snapshots}", files.len());
    Ok(())
}

pub fn import_biblio(cfg: &RunConfig, file: &Path) -> CliResult<()> {
    require_file(file)?;
    let reader = BufReader::new(File::open(file).map_err(|e| webusage::Error::Io { path: file.to_owned(), source: e })?);
    let records = read_biblio_jsonl(reader)?;
    let mut store = Datastore::open(cfg.store_root()?)?;
    let out = store.import(&records)?;
    println!(
        "{}\tbiblio\trecords={}\tsnapshot={}\t{}",
        file.display(),
        records.len(),
        out.snapshot.snapshot_id,
        status_word(out.status)
    );
    Ok(())
}

pub fn import_customers(cfg: &RunConfig, file: &Path) -> CliResult<()> {
    require_file(file)?;
    let records = read_customers_csv(File::open(file).map_err(|e| webusage::Error::Io { path: file.to_owned(), source: e })?)?;
    let mut store = Datastore::open(cfg.store_root()?)?;
    let out = store.import(&records)?;
    println!(
        "{}\tcustomers\trecords={}\tsnapshot={}\t{}",
        file.display(),
        records.len(),
        out.snapshot.snapshot_id,
        status_word(out.status)
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Comma-separated periodicities: day, week, month, year.
    #[arg(long)]
    periodicity: Option<String>,
    /// Print a single table: query, display or order.
    #[arg(long, requires = "dimension")]
    dataset: Option<String>,
    /// Dimension of the single table, e.g. tld, journal, customer_activity.
    #[arg(long, requires = "dataset")]
    dimension: Option<String>,
    /// Keep only the first N rows of the single table.
    #[arg(long)]
    top: Option<NonZeroUsize>,
}

/// Whole calendar years covering the stored events.
fn default_range(store: &Datastore) -> CliResult<Option<Period>> {
    let Some(span) = store.time_range() else { return Ok(None) };
    let start = Utc.with_ymd_and_hms(span.first.year(), 1, 1, 0, 0, 0).unwrap();
    let end = Utc.with_ymd_and_hms(span.last.year() + 1, 1, 1, 0, 0, 0).unwrap();
    Ok(Some(Period::new(start, end)?))
}

pub fn stats(cfg: &RunConfig, args: StatsArgs) -> CliResult<()> {
    let single = match (&args.dataset, &args.dimension) {
        (Some(ds), Some(dim)) => {
            let (ds, dim): (Dataset, Dimension) = (ds.parse()?, dim.parse()?);
            if !ds.supports(dim) {
                return Err(usage(format!("dimension {dim} is not available for the {ds} dataset")));
            }
            Some((ds, dim))
        }
        _ => None,
    };
    let periodicities: Vec<Periodicity> = cfg
        .pick(args.periodicity, "periodicity")?
        .unwrap_or_else(|| "month,year".to_owned())
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()?;

    let store = Datastore::open(cfg.store_root()?)?;
    let range = match cfg.period()? {
        Some(p) => p,
        None => match default_range(&store)? {
            Some(p) => p,
            None => {
                println!("store is empty; no reports written");
                return Ok(());
            }
        },
    };
    let data = UsageData::from_store(&store)?;

    if let Some((ds, dim)) = single {
        let mut dist = data.distribution(ds, dim, &range)?;
        if let Some(n) = args.top {
            dist = dist.top_n(n);
        }
        let text = dist.to_csv()?;
        write_file(&cfg.out.join("stats").join(format!("{ds}-{dim}.csv")), &text)?;
        print!("{text}");
        return Ok(());
    }

    let mut written = 0;
    for periodicity in periodicities {
        let reports = stats::precompute(&data, periodicity, &range, range.end)?;
        written += stats::write_reports(&store.stat_dir(), &reports)?.len();
        write_file(
            &cfg.out.join("stats").join("reports").join(periodicity.as_str()).join("index.txt"),
            &reports.iter().map(|r| format!("{}\n", r.relative_path().display())).collect::<String>(),
        )?;
        for r in &reports {
            let path = cfg.out.join("stats").join("reports").join(r.relative_path());
            write_file(&path, &(serde_json::to_string_pretty(r).map_err(webusage::Error::from)? + "\n"))?;
        }
        println!("{periodicity}: {} reports", reports.len());
    }
    for dist in data.all_distributions(&range)? {
        let name = format!("{}-{}.csv", dist.dataset, dist.dimension);
        write_file(&cfg.out.join("stats").join(name), &dist.to_csv()?)?;
    }
    println!("period {range}: {written} reports written");
    Ok(())
}

#[derive(Debug, Args)]
pub struct FactorsArgs {
    /// wuf, cof or both.
    #[arg(long, default_value = "both")]
    kind: String,
    /// Restrict to these journals (repeatable).
    #[arg(long)]
    journal: Vec<String>,
    /// Factor per publication year of the single --journal.
    #[arg(long)]
    by_year: bool,
}

pub fn factors(cfg: &RunConfig, args: FactorsArgs) -> CliResult<()> {
    let kinds: &[FactorKind] = match args.kind.as_str() {
        "wuf" => &[FactorKind::Wuf],
        "cof" => &[FactorKind::Cof],
        "both" => &[FactorKind::Wuf, FactorKind::Cof],
        other => return Err(usage(format!("unknown factor kind {other:?}; expected wuf, cof or both"))),
    };
    if args.by_year && args.journal.len() != 1 {
        return Err(usage("--by-year needs exactly one --journal"));
    }
    let store = Datastore::open(cfg.store_root()?)?;
    let period = cfg.period()?.unwrap_or_else(Period::everything);
    let stored = StoredCounts::from_biblio(&store.biblio_index()?);
    let displays = store.enriched_displays()?;
    let orders = store.enriched_orders()?;
    for &kind in kinds {
        let events = match kind {
            FactorKind::Wuf => FactorEvents::Displays(&displays),
            FactorKind::Cof => FactorEvents::Orders(&orders),
        };
        let decimals = kind.display_decimals();
        let (name, text) = if args.by_year {
            let rows = factors::factor_by_year_table(events, &args.journal[0], &period, &stored)?;
            (format!("{}-by-year.csv", kind.as_str()), factors::by_year_to_csv(&rows, decimals)?)
        } else {
            let journals = (!args.journal.is_empty()).then_some(args.journal.as_slice());
            let rows = factors::factor_table(events, &period, journals, &stored)?;
            (format!("{}.csv", kind.as_str()), factors::to_csv(&rows, decimals)?)
        };
        write_file(&cfg.out.join("factors").join(name), &text)?;
        print!("{text}");
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ClusterFlags {
    /// Clusters smaller than this are dissolved after the scan [default: 3].
    #[arg(long)]
    min_cluster_size: Option<usize>,
    /// Largest number of items a cluster may hold [default: 10].
    #[arg(long)]
    max_cluster_size: Option<usize>,
    /// Largest number of internal associations per cluster [default: 20].
    #[arg(long)]
    max_internal_associations: Option<usize>,
    /// Associations below this value are ignored [default: 0].
    #[arg(long)]
    association_floor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SplitFlags {
    /// Centrality boundary between low and high; default median.
    #[arg(long)]
    x_split: Option<f64>,
    /// Density boundary between low and high; default median.
    #[arg(long)]
    y_split: Option<f64>,
}

fn map_options(cfg: &RunConfig, flags: SplitFlags) -> CliResult<MapOptions> {
    Ok(MapOptions {
        x_split: cfg.pick(flags.x_split, "x_split")?,
        y_split: cfg.pick(flags.y_split, "y_split")?,
    })
}

#[derive(Debug, Args)]
pub struct CousageArgs {
    /// Transactions from orders or displays.
    #[arg(long)]
    source: Option<String>,
    #[command(flatten)]
    cluster: ClusterFlags,
    #[command(flatten)]
    split: SplitFlags,
}

fn write_map(dir: &Path, clustering: &Clustering, options: &MapOptions) -> CliResult<()> {
    let map = build_map(&clustering.clusters, options);
    write_file(&dir.join("map.svg"), &map.to_svg(&SvgOptions::default()))?;
    write_file(&dir.join("map.dot"), &map.to_dot())?;
    write_file(&dir.join("map.csv"), &map.to_csv()?)?;
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(value).map_err(webusage::Error::from)? + "\n")
}

pub fn cousage(cfg: &RunConfig, args: CousageArgs) -> CliResult<()> {
    let defaults = ClusterParams::default();
    let f = args.cluster;
    let params = ClusterParams {
        min_cluster_size: cfg.pick(f.min_cluster_size, "min_cluster_size")?.unwrap_or(defaults.min_cluster_size),
        max_cluster_size: cfg.pick(f.max_cluster_size, "max_cluster_size")?.unwrap_or(defaults.max_cluster_size),
        max_internal_associations: cfg
            .pick(f.max_internal_associations, "max_internal_associations")?
            .unwrap_or(defaults.max_internal_associations),
        association_floor: cfg.pick(f.association_floor, "association_floor")?.unwrap_or(defaults.association_floor),
    };
    params.validate()?;
    let map_opts = map_options(cfg, args.split)?;
    let source = cfg.pick(args.source, "source")?.unwrap_or_else(|| "orders".to_owned());

    let store = Datastore::open(cfg.store_root()?)?;
    let period = cfg.period()?.unwrap_or_else(Period::everything);
    let transactions = match source.as_str() {
        "orders" => build_transactions(&store.load::<OrderRecord>()?, &period),
        "displays" => build_transactions(&store.load::<DisplayRecord>()?, &period),
        other => return Err(usage(format!("unknown source {other:?}; expected orders or displays"))),
    };
    if transactions.is_empty() {
        return Err(CliError::NoData(format!("no {source} in period {period}; nothing to analyse")));
    }

    for kind in [ItemKind::Document, ItemKind::User] {
        let dir = cfg.out.join("cousage").join(format!("{kind}s"));
        let cooc = cooccurrence(&transactions, kind);
        let assoc = equivalence(&cooc)?;
        let clustering = cluster::cluster(&assoc, &params)?;
        let units = transactions.source_units(kind);

        write_file(&dir.join("cooccurrence.csv"), &cooc.to_csv()?)?;
        write_file(&dir.join("occurrences.csv"), &cooc.occurrences_csv()?)?;
        write_file(&dir.join("association.csv"), &assoc.to_csv()?)?;
        write_file(&dir.join("clusters.json"), &to_json(&clustering)?)?;
        write_file(&dir.join("clusters.csv"), &clusters_to_csv(&clustering.clusters)?)?;
        write_file(&dir.join("relevance.csv"), &relevance_to_csv(&clustering.relevance(&units))?)?;
        write_file(
            &dir.join("unclustered.txt"),
            &clustering.unclustered.iter().map(|i| format!("{i}\n")).collect::<String>(),
        )?;
        let per_cluster = dir.join("clusters");
        if per_cluster.is_dir() {
            for entry in fs::read_dir(&per_cluster).map_err(|e| webusage::Error::Io { path: per_cluster.clone(), source: e })? {
                let path = entry.map_err(webusage::Error::from)?.path();
                let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
                if name.starts_with("cluster_") && (name.ends_with(".json") || name.ends_with(".dot")) {
                    fs::remove_file(&path).map_err(|e| webusage::Error::Io { path: path.clone(), source: e })?;
                }
            }
        }
        for c in &clustering.clusters {
            write_file(&per_cluster.join(format!("cluster_{}.json", c.id)), &to_json(c)?)?;
            write_file(&per_cluster.join(format!("cluster_{}.dot", c.id)), &cluster_to_dot(c))?;
        }
        write_map(&dir, &clustering, &map_opts)?;
        println!(
            "{kind}: items={} pairs={} clusters={} unclustered={}",
            assoc.len(),
            assoc.values.len(),
            clustering.clusters.len(),
            clustering.unclustered.len()
        );
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// clusters.json written by `cousage`.
    clusters: PathBuf,
    #[command(flatten)]
    split: SplitFlags,
}

pub fn map(cfg: &RunConfig, args: MapArgs) -> CliResult<()> {
    require_file(&args.clusters)?;
    let text = fs::read_to_string(&args.clusters)
        .map_err(|e| webusage::Error::Io { path: args.clusters.clone(), source: e })?;
    let clustering: Clustering = serde_json::from_str(&text).map_err(webusage::Error::from)?;
    let options = map_options(cfg, args.split)?;
    write_map(&cfg.out, &clustering, &options)?;
    println!("map: {} clusters -> {}", clustering.clusters.len(), cfg.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    /// RNG seed [default: 42].
    #[arg(long)]
    seed: Option<u64>,
    /// Query plus display events; 0 writes empty files.
    #[arg(long)]
    size: Option<usize>,
    /// Planted community `NAME:USERSxDOCS` (repeatable); replaces the default pair.
    #[arg(long)]
    community: Vec<CommunitySpec>,
    /// Documents shared by consecutive communities.
    #[arg(long)]
    overlap: Option<usize>,
    /// Calendar year the events fall in [default: 2002].
    #[arg(long)]
    year: Option<i32>,
}

pub fn fixture(cfg: &RunConfig, args: FixtureArgs) -> CliResult<()> {
    let seed = cfg.pick(args.seed, "seed")?.unwrap_or(42);
    let size = cfg.pick(args.size, "size")?.unwrap_or(1000);
    let mut spec = FixtureSpec::sized(seed, size);
    if !args.community.is_empty() {
        spec.communities = args.community;
        if spec.journals == 0 {
            spec.journals = 5;
        }
    }
    if let Some(overlap) = cfg.pick(args.overlap, "overlap")? {
        spec.overlap = overlap;
    }
    if let Some(year) = cfg.pick(args.year, "year")? {
        spec.year = year;
    }
    let generated = fixture::generate(&spec)?;
    generated.write_to(&cfg.out)?;
    let m = &generated.manifest;
    println!(
        "fixture seed={seed}: queries={} displays={} orders={} biblio={} communities={} -> {}",
        m.query_events,
        m.display_events,
        m.order_events,
        m.biblio_records,
        m.communities.len(),
        cfg.out.display()
    );
    Ok(())
}
