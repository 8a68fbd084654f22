//! Parsers for the query (`Q`), display (`D`) and order (`O`) logs.
//!
//! Each log is UTF-8 text, one event per line, tab-separated, with a leading
//! record-type tag. Multi-valued columns use `|` as separator and empty
//! optional columns are empty strings:
//!
//! ```text
//! Q  timestamp  user_id  tld  lang  journals  year_from  year_to  author  title_words  keywords  n_explored  n_retrieved  [ip]
//! D  timestamp  user_id  tld  record_id  [ip]
//! O  timestamp  customer_id  country  activity  record_id
//! ```
//!
//! Parsing never stops at a bad line: every non-blank line yields either a
//! record or a [`LineError`].

mod records;
pub mod tld;

use std::fmt;
use std::io::BufRead;

use sha2::{Digest, Sha256};

pub use records::{Activity, Country, DisplayRecord, OrderRecord, QueryRecord};
pub use tld::{resolve_country, TldTable};

use crate::error::Result;
use crate::time::{parse_timestamp, Timestamp};

const QUERY_COLUMNS: usize = 13;
const DISPLAY_COLUMNS: usize = 5;
const ORDER_COLUMNS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

/// Non-fatal notice attached to an accepted line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineWarning {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome<T> {
    pub records: Vec<T>,
    pub errors: Vec<LineError>,
    pub warnings: Vec<LineWarning>,
}

impl<T> Default for ParseOutcome<T> {
    fn default() -> Self {
        ParseOutcome {
            records: Vec::new(),
            errors: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

/// The kind of log stream, identified by its line tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogKind {
    Query,
    Display,
    Order,
}

impl LogKind {
    pub fn tag(self) -> &'static str {
        match self {
            LogKind::Query => "Q",
            LogKind::Display => "D",
            LogKind::Order => "O",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "Q" => Some(LogKind::Query),
            "D" => Some(LogKind::Display),
            "O" => Some(LogKind::Order),
            _ => None,
        }
    }

    /// Kind of the first non-blank line of `text`.
    pub fn sniff(text: &str) -> Option<Self> {
        let line = text.lines().find(|l| !l.trim().is_empty())?;
        Self::from_tag(line.split('\t').next()?)
    }
}

type LineResult<T> = std::result::Result<T, String>;

struct Line<'a> {
    number: usize,
    fields: Vec<&'a str>,
}

impl<'a> Line<'a> {
    fn field(&self, idx: usize) -> &'a str {
        self.fields.get(idx).copied().unwrap_or("")
    }

    fn timestamp(&self, idx: usize) -> LineResult<Timestamp> {
        parse_timestamp(self.field(idx))
            .ok_or_else(|| format!("invalid timestamp {:?}", self.field(idx)))
    }

    fn count(&self, idx: usize, name: &str) -> LineResult<u64> {
        self.field(idx)
            .trim()
            .parse()
            .map_err(|_| format!("invalid {name} {:?}", self.field(idx)))
    }

    fn year(&self, idx: usize, name: &str) -> LineResult<Option<i32>> {
        let raw = self.field(idx).trim();
        if raw.is_empty() {
            return Ok(None);
        }
        raw.parse()
            .map(Some)
            .map_err(|_| format!("invalid {name} {raw:?}"))
    }

    fn optional(&self, idx: usize) -> Option<String> {
        let raw = self.field(idx);
        (!raw.is_empty()).then(|| raw.to_owned())
    }

    fn list(&self, idx: usize) -> Vec<String> {
        self.field(idx)
            .split('|')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(str::to_owned)
            .collect()
    }

    fn required(&self, idx: usize, name: &str) -> LineResult<String> {
        let raw = self.field(idx).trim();
        if raw.is_empty() {
            Err(format!("missing {name}"))
        } else {
            Ok(raw.to_owned())
        }
    }

    fn tld(&self, idx: usize) -> LineResult<String> {
        let tld = tld::normalize(self.field(idx));
        if tld.is_empty() {
            Err("missing tld".to_owned())
        } else {
            Ok(tld)
        }
    }

    /// The explicit user token, else `tld/<ip hash>`, else a per-line anonymous id.
    fn user_id(&self, idx: usize, tld: &str, ip_idx: usize) -> String {
        let explicit = self.field(idx).trim();
        if !explicit.is_empty() {
            return explicit.to_owned();
        }
        let ip = self.field(ip_idx).trim();
        if ip.is_empty() {
            format!("anon:{}", self.number)
        } else {
            let digest = hex::encode(Sha256::digest(ip.as_bytes()));
            format!("{tld}/{}", &digest[..16])
        }
    }
}

fn parse_lines<R, T, F>(source: R, kind: LogKind, columns: usize, optional_trailing: usize, mut parse: F) -> Result<ParseOutcome<T>>
where
    R: BufRead,
    F: FnMut(&Line<'_>, &mut Vec<LineWarning>) -> LineResult<T>,
{
    let mut out = ParseOutcome::default();
    for (idx, raw) in source.lines().enumerate() {
        let raw = raw?;
        let text = raw.strip_suffix('\r').unwrap_or(&raw);
        if text.trim().is_empty() {
            continue;
        }
        let line = Line {
            number: idx + 1,
            fields: text.split('\t').collect(),
        };
        let result = if line.fields[0] != kind.tag() {
            Err(format!(
                "unexpected record type {:?}, expected {:?}",
                line.fields[0],
                kind.tag()
            ))
        } else if line.fields.len() < columns || line.fields.len() > columns + optional_trailing {
            Err(format!("expected {columns} columns, found {}", line.fields.len()))
        } else {
            parse(&line, &mut out.warnings)
        };
        match result {
            Ok(record) => out.records.push(record),
            Err(reason) => out.errors.push(LineError {
                line: line.number,
                reason,
            }),
        }
    }
    Ok(out)
}

pub fn parse_query_log<R: BufRead>(source: R, tlds: &TldTable) -> Result<ParseOutcome<QueryRecord>> {
    parse_lines(source, LogKind::Query, QUERY_COLUMNS, 1, |line, _| {
        let timestamp = line.timestamp(1)?;
        let tld = line.tld(3)?;
        let year_from = line.year(6, "year_from")?;
        let year_to = line.year(7, "year_to")?;
        if let (Some(from), Some(to)) = (year_from, year_to) {
            if from > to {
                return Err(format!("year range inversion {from} > {to}"));
            }
        }
        let n_explored = line.count(11, "n_explored")?;
        let n_retrieved = line.count(12, "n_retrieved")?;
        if n_retrieved > n_explored {
            return Err(format!("count inversion: retrieved {n_retrieved} > explored {n_explored}"));
        }
        Ok(QueryRecord {
            timestamp,
            user_id: line.user_id(2, &tld, QUERY_COLUMNS),
            country: tlds.resolve(&tld),
            tld,
            language: line.optional(4),
            journal_filter: line.list(5),
            year_from,
            year_to,
            author_query: line.optional(8),
            title_words: line.list(9),
            keywords: line.list(10),
            n_explored,
            n_retrieved,
        })
    })
}

pub fn parse_display_log<R: BufRead>(source: R, tlds: &TldTable) -> Result<ParseOutcome<DisplayRecord>> {
    parse_lines(source, LogKind::Display, DISPLAY_COLUMNS, 1, |line, _| {
        let timestamp = line.timestamp(1)?;
        let tld = line.tld(3)?;
        let record_id = line.required(4, "record_id")?;
        Ok(DisplayRecord {
            timestamp,
            user_id: line.user_id(2, &tld, DISPLAY_COLUMNS),
            country: tlds.resolve(&tld),
            tld,
            record_id,
        })
    })
}

/// Unknown activity codes fall back to [`Activity::Other`] with a warning.
pub fn parse_order_log<R: BufRead>(source: R) -> Result<ParseOutcome<OrderRecord>> {
    parse_lines(source, LogKind::Order, ORDER_COLUMNS, 0, |line, warnings| {
        let timestamp = line.timestamp(1)?;
        let customer_id = line.required(2, "customer_id")?;
        let customer_country = Country::parse(line.field(3))
            .ok_or_else(|| format!("invalid country code {:?}", line.field(3)))?;
        let record_id = line.required(5, "record_id")?;
        let customer_activity = match line.field(4).parse::<Activity>() {
            Ok(activity) => activity,
            Err(()) => {
                warnings.push(LineWarning {
                    line: line.number,
                    message: format!("unknown activity code {:?}, using other", line.field(4)),
                });
                Activity::Other
            }
        };
        Ok(OrderRecord {
            timestamp,
            customer_id,
            customer_country,
            customer_activity,
            record_id,
        })
    })
}
