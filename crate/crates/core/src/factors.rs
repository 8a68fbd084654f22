//! Journal usage factors.
//!
//! Both factors divide an event count by the number of articles of the
//! journal held in the repository:
//!
//! * WUF (web usability factor): display events of the journal's articles in a period.
//! * COF (customer order factor): order events of the journal's articles in a period.
//!
//! The `*_by_year` variants restrict both the events and the holdings to
//! articles of one publication year. Events are counted, not distinct
//! articles, so a factor can exceed 1.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{DisplayRecord, OrderRecord};
use crate::store::{BiblioIndex, EnrichedEvent, UsageEvent};
use crate::time::Period;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FactorKind {
    Wuf,
    Cof,
}

impl FactorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FactorKind::Wuf => "wuf",
            FactorKind::Cof => "cof",
        }
    }

    /// Decimals used when rendering tables (0.16 for WUF, 0.022 for COF).
    pub fn display_decimals(self) -> usize {
        match self {
            FactorKind::Wuf => 2,
            FactorKind::Cof => 3,
        }
    }
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorResult {
    pub journal_title: String,
    pub period: Period,
    pub kind: FactorKind,
    pub publication_year: Option<i32>,
    pub numerator: u64,
    pub denominator: u64,
    pub value: f64,
}

/// Journal titles match after trimming and case folding.
pub fn normalize_title(title: &str) -> String {
    title.trim().to_lowercase()
}

fn count_events<E: UsageEvent>(events: &[EnrichedEvent<E>], journal: &str, period: &Period, year: Option<i32>) -> u64 {
    let key = normalize_title(journal);
    events
        .iter()
        .filter(|e| period.contains(&e.timestamp()))
        .filter_map(|e| e.biblio.as_ref())
        .filter(|b| year.is_none_or(|y| b.publication_year == y))
        .filter(|b| normalize_title(&b.journal_title) == key)
        .count() as u64
}

fn ratio(
    kind: FactorKind,
    journal: &str,
    period: &Period,
    year: Option<i32>,
    numerator: u64,
    denominator: u64,
) -> Result<FactorResult> {
    if denominator == 0 {
        return Err(Error::UndefinedFactor {
            journal: journal.to_owned(),
            year,
        });
    }
    Ok(FactorResult {
        journal_title: journal.to_owned(),
        period: *period,
        kind,
        publication_year: year,
        numerator,
        denominator,
        value: numerator as f64 / denominator as f64,
    })
}

pub fn wuf(
    displays: &[EnrichedEvent<DisplayRecord>],
    journal: &str,
    period: &Period,
    stored_count: u64,
) -> Result<FactorResult> {
    let n = count_events(displays, journal, period, None);
    ratio(FactorKind::Wuf, journal, period, None, n, stored_count)
}

pub fn wuf_by_year(
    displays: &[EnrichedEvent<DisplayRecord>],
    journal: &str,
    period: &Period,
    publication_year: i32,
    stored_count_for_year: u64,
) -> Result<FactorResult> {
    let n = count_events(displays, journal, period, Some(publication_year));
    ratio(FactorKind::Wuf, journal, period, Some(publication_year), n, stored_count_for_year)
}

pub fn cof(
    orders: &[EnrichedEvent<OrderRecord>],
    journal: &str,
    period: &Period,
    stored_count: u64,
) -> Result<FactorResult> {
    let n = count_events(orders, journal, period, None);
    ratio(FactorKind::Cof, journal, period, None, n, stored_count)
}

pub fn cof_by_year(
    orders: &[EnrichedEvent<OrderRecord>],
    journal: &str,
    period: &Period,
    publication_year: i32,
    stored_count_for_year: u64,
) -> Result<FactorResult> {
    let n = count_events(orders, journal, period, Some(publication_year));
    ratio(FactorKind::Cof, journal, period, Some(publication_year), n, stored_count_for_year)
}

#[derive(Debug, Clone, Default)]
struct Holdings {
    title: String,
    by_year: BTreeMap<i32, u64>,
}

/// Articles held per journal (and per publication year), keyed by normalised title.
#[derive(Debug, Clone, Default)]
pub struct StoredCounts {
    journals: BTreeMap<String, Holdings>,
}

impl StoredCounts {
    pub fn from_biblio(biblio: &BiblioIndex) -> Self {
        let mut counts = StoredCounts::default();
        for record in biblio.records() {
            counts.add(&record.journal_title, record.publication_year, 1);
        }
        counts
    }

    /// Adds `n` held articles of `journal` published in `year`.
    pub fn add(&mut self, journal: &str, year: i32, n: u64) {
        let holdings = self.journals.entry(normalize_title(journal)).or_default();
        let trimmed = journal.trim();
        if holdings.title.is_empty() || trimmed < holdings.title.as_str() {
            holdings.title = trimmed.to_owned();
        }
        *holdings.by_year.entry(year).or_default() += n;
    }

    pub fn total(&self, journal: &str) -> u64 {
        self.journals
            .get(&normalize_title(journal))
            .map_or(0, |h| h.by_year.values().sum())
    }

    pub fn for_year(&self, journal: &str, year: i32) -> u64 {
        self.journals
            .get(&normalize_title(journal))
            .and_then(|h| h.by_year.get(&year).copied())
            .unwrap_or(0)
    }

    pub fn years(&self, journal: &str) -> Vec<i32> {
        self.journals
            .get(&normalize_title(journal))
            .map(|h| h.by_year.keys().copied().collect())
            .unwrap_or_default()
    }

    fn title(&self, key: &str) -> Option<&str> {
        self.journals.get(key).map(|h| h.title.as_str())
    }
}

fn factor_events<E: UsageEvent>(
    kind: FactorKind,
    events: &[EnrichedEvent<E>],
    period: &Period,
    journals: Option<&[String]>,
    stored: &StoredCounts,
) -> Result<Vec<FactorResult>> {
    let mut numerators: BTreeMap<String, (String, u64)> = BTreeMap::new();
    if let Some(journals) = journals {
        for j in journals {
            numerators.entry(normalize_title(j)).or_insert_with(|| (j.trim().to_owned(), 0));
        }
    }
    for e in events.iter().filter(|e| period.contains(&e.timestamp())) {
        let Some(b) = &e.biblio else { continue };
        let key = normalize_title(&b.journal_title);
        if journals.is_some() {
            if let Some(entry) = numerators.get_mut(&key) {
                entry.1 += 1;
            }
        } else {
            let title = stored.title(&key).unwrap_or(b.journal_title.trim()).to_owned();
            numerators.entry(key).or_insert((title, 0)).1 += 1;
        }
    }
    let mut rows = numerators
        .into_iter()
        .map(|(key, (title, n))| ratio(kind, &title, period, None, n, stored.total(&key)))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| {
        b.numerator
            .cmp(&a.numerator)
            .then_with(|| normalize_title(&a.journal_title).cmp(&normalize_title(&b.journal_title)))
    });
    Ok(rows)
}

/// Evidence for one factor table: display events for WUF, order events for COF.
#[derive(Clone, Copy)]
pub enum FactorEvents<'a> {
    Displays(&'a [EnrichedEvent<DisplayRecord>]),
    Orders(&'a [EnrichedEvent<OrderRecord>]),
}

impl FactorEvents<'_> {
    pub fn kind(&self) -> FactorKind {
        match self {
            FactorEvents::Displays(_) => FactorKind::Wuf,
            FactorEvents::Orders(_) => FactorKind::Cof,
        }
    }
}

/// One row per journal with at least one event in `period`, or one row per
/// listed journal, sorted by event count descending (ties by title).
pub fn factor_table(
    events: FactorEvents<'_>,
    period: &Period,
    journals: Option<&[String]>,
    stored: &StoredCounts,
) -> Result<Vec<FactorResult>> {
    let kind = events.kind();
    match events {
        FactorEvents::Displays(e) => factor_events(kind, e, period, journals, stored),
        FactorEvents::Orders(e) => factor_events(kind, e, period, journals, stored),
    }
}

fn by_year_events<E: UsageEvent>(
    kind: FactorKind,
    events: &[EnrichedEvent<E>],
    journal: &str,
    period: &Period,
    stored: &StoredCounts,
) -> Result<Vec<FactorResult>> {
    let key = normalize_title(journal);
    let mut years: BTreeSet<i32> = stored.years(journal).into_iter().collect();
    years.extend(
        events
            .iter()
            .filter(|e| period.contains(&e.timestamp()))
            .filter_map(|e| e.biblio.as_ref())
            .filter(|b| normalize_title(&b.journal_title) == key)
            .map(|b| b.publication_year),
    );
    years
        .into_iter()
        .map(|y| {
            let n = count_events(events, journal, period, Some(y));
            ratio(kind, journal, period, Some(y), n, stored.for_year(journal, y))
        })
        .collect()
}

/// Factor per publication year of one journal, in year order.
pub fn factor_by_year_table(
    events: FactorEvents<'_>,
    journal: &str,
    period: &Period,
    stored: &StoredCounts,
) -> Result<Vec<FactorResult>> {
    let kind = events.kind();
    match events {
        FactorEvents::Displays(e) => by_year_events(kind, e, journal, period, stored),
        FactorEvents::Orders(e) => by_year_events(kind, e, journal, period, stored),
    }
}

/// `rank,journal,count,factor`
pub fn to_csv(rows: &[FactorResult], decimals: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "journal", "count", "factor"])?;
    for (idx, row) in rows.iter().enumerate() {
        w.write_record([
            (idx + 1).to_string(),
            row.journal_title.clone(),
            row.numerator.to_string(),
            format!("{:.*}", decimals, row.value),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Source(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// `publication_year,journal,count,stored,factor`
pub fn by_year_to_csv(rows: &[FactorResult], decimals: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["publication_year", "journal", "count", "stored", "factor"])?;
    for row in rows {
        w.write_record([
            row.publication_year.map(|y| y.to_string()).unwrap_or_default(),
            row.journal_title.clone(),
            row.numerator.to_string(),
            row.denominator.to_string(),
            format!("{:.*}", decimals, row.value),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Source(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
