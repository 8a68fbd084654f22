//! The descriptive indicator board: frequency distributions of queries,
//! displayed records and ordered documents over a period.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{DisplayRecord, OrderRecord, QueryRecord};
use crate::store::{BiblioRecord, Datastore, EnrichedEvent, Timestamped};
use crate::time::{serde_ts, Period, Periodicity, Timestamp};

/// Key used for events whose record is missing from BIBLIO.
pub const UNMATCHED: &str = "(unmatched)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Query,
    Display,
    Order,
}

impl Dataset {
    pub const ALL: [Dataset; 3] = [Self::Query, Self::Display, Self::Order];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Query => "query",
            Self::Display => "display",
            Self::Order => "order",
        }
    }

    pub fn dimensions(self) -> &'static [Dimension] {
        use Dimension::*;
        match self {
            Self::Query => &[Tld, Country, TitleWord, AuthorInQuery, Keyword],
            Self::Display => &[
                Tld,
                Country,
                Record,
                ScientificDomain,
                PublicationYear,
                Author,
                AuthorCountry,
                Journal,
                PublishingCountry,
            ],
            Self::Order => &[
                CustomerCountry,
                CustomerActivity,
                Record,
                ScientificDomain,
                PublicationYear,
                Author,
                AuthorCountry,
                Journal,
                PublishingCountry,
            ],
        }
    }

    pub fn supports(self, dimension: Dimension) -> bool {
        self.dimensions().contains(&dimension)
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dataset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.as_str() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown dataset {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Tld,
    Country,
    TitleWord,
    AuthorInQuery,
    Keyword,
    Record,
    ScientificDomain,
    PublicationYear,
    Author,
    AuthorCountry,
    Journal,
    PublishingCountry,
    CustomerCountry,
    CustomerActivity,
}

impl Dimension {
    pub const ALL: [Dimension; 14] = [
        Self::Tld,
        Self::Country,
        Self::TitleWord,
        Self::AuthorInQuery,
        Self::Keyword,
        Self::Record,
        Self::ScientificDomain,
        Self::PublicationYear,
        Self::Author,
        Self::AuthorCountry,
        Self::Journal,
        Self::PublishingCountry,
        Self::CustomerCountry,
        Self::CustomerActivity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Tld => "tld",
            Self::Country => "country",
            Self::TitleWord => "title_word",
            Self::AuthorInQuery => "author_in_query",
            Self::Keyword => "keyword",
            Self::Record => "record",
            Self::ScientificDomain => "scientific_domain",
            Self::PublicationYear => "publication_year",
            Self::Author => "author",
            Self::AuthorCountry => "author_country",
            Self::Journal => "journal",
            Self::PublishingCountry => "publishing_country",
            Self::CustomerCountry => "customer_country",
            Self::CustomerActivity => "customer_activity",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.as_str() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown dimension {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub key: String,
    pub count: u64,
    /// `round(100 * count / total, 2)`, half-up.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub dataset: Dataset,
    pub dimension: Dimension,
    pub period: Period,
    pub rows: Vec<Row>,
    pub total: u64,
}

/// Percent of `count` in `total` in hundredths, rounded half-up exactly.
pub fn percent_hundredths(count: u64, total: u64) -> u64 {
    if total == 0 {
        return 0;
    }
    let (count, total) = (count as u128, total as u128);
    ((20_000 * count + total) / (2 * total)) as u64
}

impl Distribution {
    /// Builds the ranked distribution from raw key counts. Zero counts are dropped.
    pub fn from_counts(
        dataset: Dataset,
        dimension: Dimension,
        period: Period,
        counts: impl IntoIterator<Item = (String, u64)>,
    ) -> Self {
        let mut pairs: Vec<(String, u64)> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
        pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let total = pairs.iter().map(|(_, c)| c).sum();
        let rows = pairs
            .into_iter()
            .map(|(key, count)| Row {
                percent: percent_hundredths(count, total) as f64 / 100.0,
                key,
                count,
            })
            .collect();
        Distribution {
            dataset,
            dimension,
            period,
            rows,
            total,
        }
    }

    pub fn count_of(&self, key: &str) -> u64 {
        self.rows.iter().find(|r| r.key == key).map_or(0, |r| r.count)
    }

    /// The first `n` rows; `total` is unchanged.
    pub fn top_n(&self, n: NonZeroUsize) -> Distribution {
        let mut out = self.clone();
        out.rows.truncate(n.get());
        out
    }

    /// `rank,key,count,percent` with two-decimal percents.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["rank", "key", "count", "percent"])?;
        for (idx, row) in self.rows.iter().enumerate() {
            w.write_record([
                (idx + 1).to_string(),
                row.key.clone(),
                row.count.to_string(),
                format!("{:.2}", row.percent),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Source(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

pub fn top_n(distribution: &Distribution, n: NonZeroUsize) -> Distribution {
    distribution.top_n(n)
}

/// Events loaded from a store snapshot, ready for counting.
#[derive(Debug, Clone, Default)]
pub struct UsageData {
    pub queries: Vec<QueryRecord>,
    pub displays: Vec<EnrichedEvent<DisplayRecord>>,
    pub orders: Vec<EnrichedEvent<OrderRecord>>,
}

fn biblio_keys(biblio: Option<&BiblioRecord>, dimension: Dimension, emit: &mut dyn FnMut(&str)) {
    let Some(b) = biblio else {
        emit(UNMATCHED);
        return;
    };
    match dimension {
        Dimension::ScientificDomain => emit(&b.scientific_domain),
        Dimension::PublicationYear => emit(&b.publication_year.to_string()),
        Dimension::Author => b.authors.iter().for_each(|a| emit(a)),
        Dimension::AuthorCountry => b.author_countries.iter().for_each(|c| emit(c.as_str())),
        Dimension::Journal => emit(&b.journal_title),
        Dimension::PublishingCountry => emit(b.publishing_country.as_str()),
        _ => unreachable!("not a bibliographic dimension: {dimension}"),
    }
}

fn query_keys(q: &QueryRecord, dimension: Dimension, emit: &mut dyn FnMut(&str)) {
    match dimension {
        Dimension::Tld => emit(&q.tld),
        Dimension::Country => emit(q.country.as_str()),
        Dimension::TitleWord => q
            .title_words
            .iter()
            .flat_map(|w| w.split_whitespace())
            .for_each(|w| emit(&w.to_lowercase())),
        Dimension::AuthorInQuery => q.authors_in_query().for_each(emit),
        Dimension::Keyword => q.keywords.iter().for_each(|k| emit(k)),
        _ => unreachable!("not a query dimension: {dimension}"),
    }
}

fn display_keys(d: &EnrichedEvent<DisplayRecord>, dimension: Dimension, emit: &mut dyn FnMut(&str)) {
    match dimension {
        Dimension::Tld => emit(&d.event.tld),
        Dimension::Country => emit(d.event.country.as_str()),
        Dimension::Record => emit(&d.event.record_id),
        _ => biblio_keys(d.biblio.as_ref(), dimension, emit),
    }
}

fn order_keys(o: &EnrichedEvent<OrderRecord>, dimension: Dimension, emit: &mut dyn FnMut(&str)) {
    match dimension {
        Dimension::CustomerCountry => emit(o.event.customer_country.as_str()),
        Dimension::CustomerActivity => emit(o.event.customer_activity.name()),
        Dimension::Record => emit(&o.event.record_id),
        _ => biblio_keys(o.biblio.as_ref(), dimension, emit),
    }
}

type KeyFn<T> = fn(&T, Dimension, &mut dyn FnMut(&str));

fn count_keys<T: Timestamped>(
    events: &[T],
    period: &Period,
    dimension: Dimension,
    keys: KeyFn<T>,
) -> HashMap<String, u64> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for event in events.iter().filter(|e| period.contains(&e.timestamp())) {
        keys(event, dimension, &mut |key| {
            if let Some(c) = counts.get_mut(key) {
                *c += 1;
            } else {
                counts.insert(key.to_owned(), 1);
            }
        });
    }
    counts
}

impl UsageData {
    pub fn from_store(store: &Datastore) -> Result<Self> {
        Ok(UsageData {
            queries: store.load()?,
            displays: store.enriched_displays()?,
            orders: store.enriched_orders()?,
        })
    }

    /// Group-by count of one dimension over the events in `period`.
    /// Multi-valued fields contribute one count per value.
    pub fn distribution(&self, dataset: Dataset, dimension: Dimension, period: &Period) -> Result<Distribution> {
        if !dataset.supports(dimension) {
            return Err(Error::invalid(format!(
                "dimension {dimension} is not available for the {dataset} dataset"
            )));
        }
        let counts = match dataset {
            Dataset::Query => count_keys(&self.queries, period, dimension, query_keys),
            Dataset::Display => count_keys(&self.displays, period, dimension, display_keys),
            Dataset::Order => count_keys(&self.orders, period, dimension, order_keys),
        };
        Ok(Distribution::from_counts(dataset, dimension, *period, counts))
    }

    /// Every valid dataset × dimension distribution for one period.
    pub fn all_distributions(&self, period: &Period) -> Result<Vec<Distribution>> {
        Dataset::ALL
            .into_iter()
            .flat_map(|ds| ds.dimensions().iter().map(move |dim| (ds, *dim)))
            .map(|(ds, dim)| self.distribution(ds, dim, period))
            .collect()
    }

    /// Number of events of a dataset in `period`.
    pub fn event_count(&self, dataset: Dataset, period: &Period) -> u64 {
        let n = match dataset {
            Dataset::Query => self.queries.iter().filter(|e| period.contains(&e.timestamp)).count(),
            Dataset::Display => self.displays.iter().filter(|e| period.contains(&e.timestamp())).count(),
            Dataset::Order => self.orders.iter().filter(|e| period.contains(&e.timestamp())).count(),
        };
        n as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub periodicity: Periodicity,
    pub period: Period,
    pub distributions: Vec<Distribution>,
    #[serde(with = "serde_ts")]
    pub generated_at: Timestamp,
}

impl StatReport {
    pub fn distribution(&self, dataset: Dataset, dimension: Dimension) -> Option<&Distribution> {
        self.distributions
            .iter()
            .find(|d| d.dataset == dataset && d.dimension == dimension)
    }

    /// `<periodicity>/<start date>.json`
    pub fn relative_path(&self) -> PathBuf {
        PathBuf::from(self.periodicity.as_str()).join(format!("{}.json", self.period.start.format("%Y-%m-%d")))
    }
}

/// One report per periodicity slot of `range`. The range must be aligned.
pub fn precompute(
    data: &UsageData,
    periodicity: Periodicity,
    range: &Period,
    generated_at: Timestamp,
) -> Result<Vec<StatReport>> {
    periodicity
        .slots(range)?
        .into_iter()
        .map(|period| {
            Ok(StatReport {
                periodicity,
                distributions: data.all_distributions(&period)?,
                period,
                generated_at,
            })
        })
        .collect()
}

/// Writes reports under `dir`, replacing earlier versions; returns written paths.
pub fn write_reports(dir: &Path, reports: &[StatReport]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::with_capacity(reports.len());
    for report in reports {
        let path = dir.join(report.relative_path());
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut text = serde_json::to_string_pretty(report)?;
        text.push('\n');
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_report(path: &Path) -> Result<StatReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
