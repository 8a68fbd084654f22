use std::collections::HashMap;
use std::io::{BufRead, Read};

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Activity, Country, DisplayRecord, OrderRecord, QueryRecord};
use crate::time::Timestamp;

/// A bibliographic reference from the document repository.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiblioRecord {
    pub record_id: String,
    pub title: String,
    pub authors: Vec<String>,
    pub author_countries: Vec<Country>,
    pub journal_title: String,
    pub publication_year: i32,
    pub publishing_country: Country,
    pub scientific_domain: String,
    pub document_type: String,
}

impl BiblioRecord {
    pub fn validate(&self) -> Result<()> {
        if self.record_id.trim().is_empty() {
            return Err(Error::InvalidRecord("biblio record without record_id".into()));
        }
        let max_year = chrono::Utc::now().year() + 1;
        if !(1500..=max_year).contains(&self.publication_year) {
            return Err(Error::InvalidRecord(format!(
                "record {}: publication_year {} outside [1500, {max_year}]",
                self.record_id, self.publication_year
            )));
        }
        Ok(())
    }
}

/// Reads a BIBLIO import file: one JSON object per line.
pub fn read_biblio_jsonl<R: BufRead>(reader: R) -> Result<Vec<BiblioRecord>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: BiblioRecord = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidRecord(format!("biblio line {}: {e}", idx + 1)))?;
        record.validate()?;
        out.push(record);
    }
    Ok(out)
}

/// Customer attributes from the customer management system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CustomerAttributes {
    pub customer_id: String,
    pub country: Country,
    pub activity: Activity,
}

/// Reads `customer_id,country,activity` rows; a header row is optional.
pub fn read_customers_csv<R: Read>(reader: R) -> Result<Vec<CustomerAttributes>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (idx, row) in csv.records().enumerate() {
        let row = row?;
        if row.len() != 3 {
            return Err(Error::InvalidRecord(format!("customers row {}: expected 3 columns", idx + 1)));
        }
        if idx == 0 && &row[0] == "customer_id" {
            continue;
        }
        if row[0].is_empty() {
            return Err(Error::InvalidRecord(format!("customers row {}: empty customer_id", idx + 1)));
        }
        let country = Country::parse(&row[1]).ok_or_else(|| {
            Error::InvalidRecord(format!("customers row {}: invalid country {:?}", idx + 1, &row[1]))
        })?;
        out.push(CustomerAttributes {
            customer_id: row[0].to_owned(),
            country,
            activity: row[2].parse().unwrap_or(Activity::Other),
        });
    }
    Ok(out)
}

/// Events that refer to a bibliographic record.
pub trait UsageEvent {
    fn timestamp(&self) -> Timestamp;
    /// The user (display) or customer (order) behind the event.
    fn actor(&self) -> &str;
    fn record_id(&self) -> &str;
}

impl UsageEvent for DisplayRecord {
    fn timestamp(&self) -> Timestamp {
        self.timestamp
    }
    fn actor(&self) -> &str {
        &self.user_id
    }
    fn record_id(&self) -> &str {
        &self.record_id
    }
}

impl UsageEvent for OrderRecord {
    fn timestamp(&self) -> Timestamp {
        self.timestamp
    }
    fn actor(&self) -> &str {
        &self.customer_id
    }
    fn record_id(&self) -> &str {
        &self.record_id
    }
}

impl<E: UsageEvent> UsageEvent for EnrichedEvent<E> {
    fn timestamp(&self) -> Timestamp {
        self.event.timestamp()
    }
    fn actor(&self) -> &str {
        self.event.actor()
    }
    fn record_id(&self) -> &str {
        self.event.record_id()
    }
}

/// Anything carrying an event timestamp.
pub trait Timestamped {
    fn timestamp(&self) -> Timestamp;
}

impl Timestamped for QueryRecord {
    fn timestamp(&self) -> Timestamp {
        self.timestamp
    }
}

impl Timestamped for DisplayRecord {
    fn timestamp(&self) -> Timestamp {
        self.timestamp
    }
}

impl Timestamped for OrderRecord {
    fn timestamp(&self) -> Timestamp {
        self.timestamp
    }
}

impl<E: UsageEvent> Timestamped for EnrichedEvent<E> {
    fn timestamp(&self) -> Timestamp {
        self.event.timestamp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JoinStatus {
    Matched,
    Unmatched,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnrichedEvent<E> {
    pub event: E,
    pub biblio: Option<BiblioRecord>,
    pub join_status: JoinStatus,
}

impl<E> EnrichedEvent<E> {
    pub fn new(event: E, biblio: Option<BiblioRecord>) -> Self {
        let join_status = if biblio.is_some() {
            JoinStatus::Matched
        } else {
            JoinStatus::Unmatched
        };
        EnrichedEvent {
            event,
            biblio,
            join_status,
        }
    }

    pub fn is_matched(&self) -> bool {
        self.join_status == JoinStatus::Matched
    }
}

#[derive(Debug, Clone, Default)]
pub struct BiblioIndex {
    by_id: HashMap<String, BiblioRecord>,
}

impl BiblioIndex {
    pub fn new(records: impl IntoIterator<Item = BiblioRecord>) -> Self {
        BiblioIndex {
            by_id: records.into_iter().map(|r| (r.record_id.clone(), r)).collect(),
        }
    }

    pub fn get(&self, record_id: &str) -> Option<&BiblioRecord> {
        self.by_id.get(record_id)
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &BiblioRecord> {
        self.by_id.values()
    }
}

/// Left join of events onto BIBLIO by record id; the event count never changes.
pub fn enrich<E: UsageEvent + Clone>(events: &[E], biblio: &BiblioIndex) -> Vec<EnrichedEvent<E>> {
    events
        .iter()
        .map(|e| EnrichedEvent::new(e.clone(), biblio.get(e.record_id()).cloned()))
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct CustomerIndex {
    by_id: HashMap<String, CustomerAttributes>,
}

impl CustomerIndex {
    pub fn new(records: impl IntoIterator<Item = CustomerAttributes>) -> Self {
        CustomerIndex {
            by_id: records.into_iter().map(|r| (r.customer_id.clone(), r)).collect(),
        }
    }

    pub fn get(&self, customer_id: &str) -> Option<&CustomerAttributes> {
        self.by_id.get(customer_id)
    }
}

/// Fills an order's unknown country or `other` activity from the customer table.
pub fn apply_customers(orders: &[OrderRecord], customers: &CustomerIndex) -> Vec<OrderRecord> {
    orders
        .iter()
        .map(|order| {
            let mut order = order.clone();
            if let Some(attrs) = customers.get(&order.customer_id) {
                if order.customer_country.is_unknown() {
                    order.customer_country = attrs.country.clone();
                }
                if order.customer_activity == Activity::Other {
                    order.customer_activity = attrs.activity;
                }
            }
            order
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::parse_timestamp;

    fn biblio(id: usize) -> BiblioRecord {
        BiblioRecord {
            record_id: format!("R{id}"),
            title: format!("Title {id}"),
            authors: vec![format!("Author {}", id % 3)],
            author_countries: vec![],
            journal_title: format!("Journal {}", id % 2),
            publication_year: 1998 + (id % 4) as i32,
            publishing_country: Country::Code("US".into()),
            scientific_domain: "chemistry".into(),
            document_type: "article".into(),
        }
    }

    fn display(record_id: &str) -> DisplayRecord {
        DisplayRecord {
            timestamp: parse_timestamp("2002-01-01T00:00:00Z").unwrap(),
            user_id: "u".into(),
            tld: "fr".into(),
            country: Country::Code("FR".into()),
            record_id: record_id.into(),
        }
    }

    #[test]
    fn enrich_matches_join_oracle() {
        let index = BiblioIndex::new((0..10).map(biblio));
        let ids = ["R0", "R3", "X1", "R9", "R3", "", "R10"];
        let events: Vec<_> = ids.iter().map(|id| display(id)).collect();
        let enriched = enrich(&events, &index);
        assert_eq!(enriched.len(), events.len());
        for (e, id) in enriched.iter().zip(ids) {
            // Oracle: linear scan over the fixture.
            let expected = (0..10).map(biblio).find(|b| b.record_id == id);
            assert_eq!(e.biblio, expected);
            assert_eq!(e.is_matched(), expected.is_some());
        }
        let r3 = &enriched[1].biblio.as_ref().unwrap();
        assert_eq!((r3.journal_title.as_str(), r3.publication_year), ("Journal 1", 2001));
    }

    #[test]
    fn enrich_empty() {
        let out = enrich::<DisplayRecord>(&[], &BiblioIndex::default());
        assert!(out.is_empty());
    }

    #[test]
    fn biblio_year_bounds() {
        let mut b = biblio(1);
        b.publication_year = 1499;
        assert!(b.validate().is_err());
        b.publication_year = 1500;
        assert!(b.validate().is_ok());
    }

    #[test]
    fn customers_fill_only_missing_attributes() {
        let csv = "customer_id,country,activity\nC1,DE,RES\nC2,IT,hospital\n";
        let customers = CustomerIndex::new(read_customers_csv(csv.as_bytes()).unwrap());
        let ts = parse_timestamp("2002-01-01").unwrap();
        let orders = vec![
            OrderRecord {
                timestamp: ts,
                customer_id: "C1".into(),
                customer_country: Country::Unknown,
                customer_activity: Activity::Other,
                record_id: "R1".into(),
            },
            OrderRecord {
                timestamp: ts,
                customer_id: "C2".into(),
                customer_country: Country::Code("FR".into()),
                customer_activity: Activity::CommercialFirm,
                record_id: "R1".into(),
            },
        ];
        let out = apply_customers(&orders, &customers);
        assert_eq!(out[0].customer_country, Country::Code("DE".into()));
        assert_eq!(out[0].customer_activity, Activity::ResearchInstitution);
        assert_eq!(out[1], orders[1]);
    }

    #[test]
    fn biblio_jsonl_reports_line() {
        let good = serde_json::to_string(&biblio(1)).unwrap();
        let text = format!("{good}\n{{\"record_id\": 3}}\n");
        let err = read_biblio_jsonl(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
