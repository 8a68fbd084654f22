use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::time::{format_timestamp, serde_ts, Timestamp};

/// ISO 3166-1 alpha-2 country, or `UNKNOWN` when it cannot be resolved.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum Country {
    Code(String),
    #[default]
    Unknown,
}

impl Country {
    pub const UNKNOWN: &'static str = "UNKNOWN";

    /// Accepts two ASCII letters (any case), `UNKNOWN`, or the empty string.
    pub fn parse(raw: &str) -> Option<Country> {
        let raw = raw.trim();
        if raw.is_empty() || raw.eq_ignore_ascii_case(Self::UNKNOWN) {
            return Some(Country::Unknown);
        }
        if raw.len() == 2 && raw.bytes().all(|b| b.is_ascii_alphabetic()) {
            return Some(Country::Code(raw.to_ascii_uppercase()));
        }
        None
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Country::Unknown)
    }

    pub fn as_str(&self) -> &str {
        match self {
            Country::Code(code) => code,
            Country::Unknown => Self::UNKNOWN,
        }
    }
}

impl fmt::Display for Country {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<Country> for String {
    fn from(c: Country) -> String {
        c.as_str().to_owned()
    }
}

impl From<String> for Country {
    fn from(s: String) -> Country {
        Country::parse(&s).unwrap_or(Country::Unknown)
    }
}

/// Customer sector of activity, as typed by the customer management system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activity {
    CommercialFirm,
    ResearchInstitution,
    HigherEducation,
    Hospital,
    InformationCenter,
    PrivatePerson,
    Other,
}

impl Activity {
    pub const ALL: [Activity; 7] = [
        Self::CommercialFirm,
        Self::ResearchInstitution,
        Self::HigherEducation,
        Self::Hospital,
        Self::InformationCenter,
        Self::PrivatePerson,
        Self::Other,
    ];

    /// Three-letter code used in order logs.
    pub fn code(self) -> &'static str {
        match self {
            Self::CommercialFirm => "COM",
            Self::ResearchInstitution => "RES",
            Self::HigherEducation => "EDU",
            Self::Hospital => "HOS",
            Self::InformationCenter => "INF",
            Self::PrivatePerson => "PRI",
            Self::Other => "OTH",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::CommercialFirm => "commercial-firm",
            Self::ResearchInstitution => "research-institution",
            Self::HigherEducation => "higher-education",
            Self::Hospital => "hospital",
            Self::InformationCenter => "information-center",
            Self::PrivatePerson => "private-person",
            Self::Other => "other",
        }
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activity {
    type Err = ();

    /// Matches either the three-letter code or the kebab-case name.
    fn from_str(s: &str) -> Result<Self, ()> {
        let s = s.trim();
        Self::ALL
            .into_iter()
            .find(|a| a.code().eq_ignore_ascii_case(s) || a.name().eq_ignore_ascii_case(s))
            .ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    #[serde(with = "serde_ts")]
    pub timestamp: Timestamp,
    pub user_id: String,
    pub tld: String,
    pub country: Country,
    pub language: Option<String>,
    pub journal_filter: Vec<String>,
    pub year_from: Option<i32>,
    pub year_to: Option<i32>,
    /// Raw author column; several authors are separated by `|`.
    pub author_query: Option<String>,
    pub title_words: Vec<String>,
    pub keywords: Vec<String>,
    pub n_explored: u64,
    pub n_retrieved: u64,
}

impl QueryRecord {
    pub fn authors_in_query(&self) -> impl Iterator<Item = &str> {
        self.author_query
            .iter()
            .flat_map(|a| a.split('|'))
            .map(str::trim)
            .filter(|a| !a.is_empty())
    }

    pub fn to_log_line(&self) -> String {
        let opt_year = |y: Option<i32>| y.map(|y| y.to_string()).unwrap_or_default();
        [
            "Q".to_owned(),
            format_timestamp(&self.timestamp),
            self.user_id.clone(),
            self.tld.clone(),
            self.language.clone().unwrap_or_default(),
            self.journal_filter.join("|"),
            opt_year(self.year_from),
            opt_year(self.year_to),
            self.author_query.clone().unwrap_or_default(),
            self.title_words.join("|"),
            self.keywords.join("|"),
            self.n_explored.to_string(),
            self.n_retrieved.to_string(),
        ]
        .join("\t")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisplayRecord {
    #[serde(with = "serde_ts")]
    pub timestamp: Timestamp,
    pub user_id: String,
    pub tld: String,
    pub country: Country,
    pub record_id: String,
}

impl DisplayRecord {
    pub fn to_log_line(&self) -> String {
        format!(
            "D\t{}\t{}\t{}\t{}",
            format_timestamp(&self.timestamp),
            self.user_id,
            self.tld,
            self.record_id
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderRecord {
    #[serde(with = "serde_ts")]
    pub timestamp: Timestamp,
    pub customer_id: String,
    pub customer_country: Country,
    pub customer_activity: Activity,
    pub record_id: String,
}

impl OrderRecord {
    pub fn to_log_line(&self) -> String {
        format!(
            "O\t{}\t{}\t{}\t{}\t{}",
            format_timestamp(&self.timestamp),
            self.customer_id,
            self.customer_country,
            self.customer_activity.code(),
            self.record_id
        )
    }
}
