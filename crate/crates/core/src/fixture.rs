//! Seeded synthetic data: query, display and order logs plus the BIBLIO and
//! customer files, with a manifest describing the planted structure.
//!
//! Orders come only from planted communities. Every member of a community
//! orders every document of that community at least once, so co-usage
//! analysis recovers each community as one document cluster and one user
//! cluster when the communities do not overlap.

use std::fs;
use std::path::Path;

use chrono::{Duration, NaiveDate, TimeZone, Utc};
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{resolve_country, Activity, Country, DisplayRecord, OrderRecord, QueryRecord, TldTable};
use crate::store::BiblioRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunitySpec {
    pub name: String,
    pub users: usize,
    pub docs: usize,
}

impl std::str::FromStr for CommunitySpec {
    type Err = Error;

    /// `NAME:USERSxDOCS`, for example `A:5x8`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("community spec {s:?} is not NAME:USERSxDOCS"));
        let (name, dims) = s.split_once(':').ok_or_else(bad)?;
        let (users, docs) = dims.split_once('x').ok_or_else(bad)?;
        let spec = CommunitySpec {
            name: name.trim().to_owned(),
            users: users.trim().parse().map_err(|_| bad())?,
            docs: docs.trim().parse().map_err(|_| bad())?,
        };
        if spec.name.is_empty() || spec.users == 0 || spec.docs < 2 {
            return Err(bad());
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub seed: u64,
    pub year: i32,
    pub queries: usize,
    pub displays: usize,
    pub communities: Vec<CommunitySpec>,
    /// Documents shared by consecutive communities.
    pub overlap: usize,
    pub journals: usize,
    /// Records in the BIBLIO file besides the community documents.
    pub catalog: usize,
}

impl FixtureSpec {
    /// `size` query plus display events and two 5-user, 8-document
    /// communities; size 0 yields empty files.
    pub fn sized(seed: u64, size: usize) -> Self {
        let communities = if size == 0 {
            Vec::new()
        } else {
            ["A", "B"]
                .iter()
                .map(|n| CommunitySpec {
                    name: (*n).to_owned(),
                    users: 5,
                    docs: 8,
                })
                .collect()
        };
        FixtureSpec {
            seed,
            year: 2002,
            queries: size / 2,
            displays: size - size / 2,
            communities,
            overlap: 0,
            journals: if size == 0 { 0 } else { 5 },
            catalog: if size == 0 { 0 } else { 200 },
        }
    }

    fn validate(&self) -> Result<()> {
        for c in &self.communities {
            if self.overlap >= c.docs {
                return Err(Error::invalid(format!(
                    "overlap {} must be smaller than the {} documents of community {}",
                    self.overlap, c.docs, c.name
                )));
            }
        }
        let needs_journals = self.catalog > 0 || !self.communities.is_empty();
        if needs_journals && (self.journals == 0 || self.journals > JOURNALS.len()) {
            return Err(Error::invalid(format!("journals must be in 1..={}", JOURNALS.len())));
        }
        if self.displays > 0 && self.catalog == 0 {
            return Err(Error::invalid("displays need a non-empty catalog"));
        }
        NaiveDate::from_ymd_opt(self.year, 1, 1).ok_or_else(|| Error::invalid("year out of range"))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedCommunity {
    pub name: String,
    pub users: Vec<String>,
    pub docs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: FixtureSpec,
    pub communities: Vec<PlantedCommunity>,
    /// TLD and its sampling weight for query and display users.
    pub country_mix: Vec<(String, f64)>,
    /// Journal and its sampling weight for BIBLIO records.
    pub journal_skew: Vec<(String, f64)>,
    pub query_events: usize,
    pub display_events: usize,
    pub order_events: usize,
    pub biblio_records: usize,
    /// Display record ids deliberately absent from BIBLIO.
    pub unmatched_display_ids: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub queries: Vec<QueryRecord>,
    pub displays: Vec<DisplayRecord>,
    pub orders: Vec<OrderRecord>,
    pub biblio: Vec<BiblioRecord>,
    pub manifest: Manifest,
}

pub const QUERY_FILE: &str = "queries.log";
pub const DISPLAY_FILE: &str = "displays.log";
pub const ORDER_FILE: &str = "orders.log";
pub const BIBLIO_FILE: &str = "biblio.jsonl";
pub const CUSTOMER_FILE: &str = "customers.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

const JOURNALS: [&str; 8] = [
    "Macromolecules",
    "Journal of applied polymer science",
    "Polymer",
    "European polymer journal",
    "Journal of polymer science",
    "Langmuir",
    "Biomaterials",
    "Carbohydrate polymers",
];
const TLD_MIX: [(&str, f64); 8] = [
    ("fr", 0.55),
    ("de", 0.08),
    ("uk", 0.07),
    ("edu", 0.08),
    ("com", 0.07),
    ("univ-paris.fr", 0.05),
    ("it", 0.05),
    ("ac.jp", 0.05),
];
const CUSTOMER_COUNTRIES: [&str; 5] = ["FR", "FR", "FR", "BE", "CH"];
const ACTIVITY_WEIGHTS: [u32; 7] = [38, 20, 9, 2, 1, 1, 1];
const WORDS: [&str; 12] = [
    "polymer", "synthesis", "membrane", "gel", "copolymer", "kinetics", "blend", "fiber", "rheology",
    "crystallization", "adhesion", "catalyst",
];
const AUTHORS: [&str; 6] = ["Smith", "Martin", "Dupont", "Bernard", "Tanaka", "Muller"];
const DOMAINS: [&str; 3] = ["chemistry", "materials science", "physics"];
const WEB_USERS: usize = 60;

pub fn generate(spec: &FixtureSpec) -> Result<Fixture> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let tlds = TldTable::builtin();
    let start = Utc.with_ymd_and_hms(spec.year, 1, 1, 0, 0, 0).unwrap();
    let year_secs = (Utc.with_ymd_and_hms(spec.year + 1, 1, 1, 0, 0, 0).unwrap() - start).num_seconds();
    let when = |rng: &mut ChaCha8Rng| start + Duration::seconds(rng.gen_range(0..year_secs));

    let journal_skew: Vec<(String, f64)> = JOURNALS[..spec.journals.min(JOURNALS.len())]
        .iter()
        .enumerate()
        .map(|(rank, j)| ((*j).to_owned(), 1.0 / (rank + 1) as f64))
        .collect();
    let journal_pick = (!journal_skew.is_empty())
        .then(|| WeightedIndex::new(journal_skew.iter().map(|j| j.1)).expect("positive weights"));
    let tld_pick = WeightedIndex::new(TLD_MIX.iter().map(|t| t.1)).expect("positive weights");
    let activity_pick = WeightedIndex::new(ACTIVITY_WEIGHTS).expect("positive weights");

    // Community documents and members.
    let mut planted: Vec<PlantedCommunity> = Vec::new();
    for c in &spec.communities {
        let mut docs: Vec<String> = planted
            .last()
            .map(|prev| prev.docs[prev.docs.len() - spec.overlap..].to_vec())
            .unwrap_or_default();
        docs.extend((docs.len()..c.docs).map(|i| format!("{}-doc{:02}", c.name, i + 1)));
        planted.push(PlantedCommunity {
            name: c.name.clone(),
            users: (0..c.users).map(|i| format!("{}-cust{:02}", c.name, i + 1)).collect(),
            docs,
        });
    }

    let mut biblio_ids: Vec<String> = (0..spec.catalog).map(|i| format!("R{:05}", i + 1)).collect();
    for c in &planted {
        for d in &c.docs {
            if !biblio_ids.contains(d) {
                biblio_ids.push(d.clone());
            }
        }
    }
    let biblio: Vec<BiblioRecord> = biblio_ids
        .iter()
        .map(|id| {
            let journal = &journal_skew[journal_pick.as_ref().expect("journals present").sample(&mut rng)].0;
            let n_authors = rng.gen_range(1..=3);
            let authors: Vec<String> = AUTHORS.choose_multiple(&mut rng, n_authors).map(|a| (*a).to_owned()).collect();
            BiblioRecord {
                record_id: id.clone(),
                title: format!("On {} and {}", WORDS.choose(&mut rng).unwrap(), WORDS.choose(&mut rng).unwrap()),
                author_countries: if rng.gen_bool(0.6) {
                    vec![Country::Code(CUSTOMER_COUNTRIES.choose(&mut rng).unwrap().to_string())]
                } else {
                    Vec::new()
                },
                authors,
                journal_title: journal.clone(),
                publication_year: rng.gen_range(spec.year - 3..=spec.year),
                publishing_country: Country::Code(if rng.gen_bool(0.5) { "US" } else { "GB" }.to_owned()),
                scientific_domain: DOMAINS.choose(&mut rng).unwrap().to_string(),
                document_type: if rng.gen_bool(0.9) { "article" } else { "review" }.to_owned(),
            }
        })
        .collect();

    let web_users: Vec<(String, String)> = (0..WEB_USERS)
        .map(|i| (format!("web{:03}", i + 1), TLD_MIX[tld_pick.sample(&mut rng)].0.to_owned()))
        .collect();

    let mut queries: Vec<QueryRecord> = (0..spec.queries)
        .map(|_| {
            let (user, tld) = web_users.choose(&mut rng).unwrap().clone();
            let journal_filter = if journal_skew.is_empty() {
                Vec::new()
            } else {
                let k = rng.gen_range(0..=2.min(journal_skew.len()));
                let mut js: Vec<String> =
                    journal_skew.choose_multiple(&mut rng, k).map(|j| j.0.clone()).collect();
                js.sort();
                js
            };
            let (year_from, year_to) = if rng.gen_bool(0.4) {
                let from = rng.gen_range(spec.year - 10..=spec.year);
                (Some(from), Some(rng.gen_range(from..=spec.year)))
            } else {
                (None, None)
            };
            let author_query = rng.gen_bool(0.3).then(|| {
                let k = rng.gen_range(1..=2);
                AUTHORS.choose_multiple(&mut rng, k).copied().collect::<Vec<_>>().join("|")
            });
            let n_words = rng.gen_range(0..=3);
            let n_keys = rng.gen_range(0..=2);
            let n_explored = rng.gen_range(1_000..5_000_000u64);
            QueryRecord {
                timestamp: when(&mut rng),
                user_id: user,
                country: resolve_country(&tld, &tlds),
                tld,
                language: Some(["en", "fr", "de"].choose(&mut rng).unwrap().to_string()),
                journal_filter,
                year_from,
                year_to,
                author_query,
                title_words: WORDS.choose_multiple(&mut rng, n_words).map(|w| w.to_string()).collect(),
                keywords: WORDS.choose_multiple(&mut rng, n_keys).map(|w| w.to_string()).collect(),
                n_explored,
                n_retrieved: rng.gen_range(0..=n_explored.min(5_000)),
            }
        })
        .collect();

    // About one display in twenty names a record missing from BIBLIO.
    let id_space = spec.catalog + spec.catalog / 20;
    let mut displays: Vec<DisplayRecord> = (0..spec.displays)
        .map(|_| {
            let (user, tld) = web_users.choose(&mut rng).unwrap().clone();
            let idx = rng.gen_range(0..id_space);
            DisplayRecord {
                timestamp: when(&mut rng),
                user_id: user,
                country: resolve_country(&tld, &tlds),
                tld,
                record_id: format!("R{:05}", idx + 1),
            }
        })
        .collect();

    let mut orders = Vec::new();
    for c in &planted {
        for user in &c.users {
            let country = Country::Code(CUSTOMER_COUNTRIES.choose(&mut rng).unwrap().to_string());
            let activity = Activity::ALL[activity_pick.sample(&mut rng)];
            for doc in &c.docs {
                for _ in 0..rng.gen_range(1..=2) {
                    orders.push(OrderRecord {
                        timestamp: when(&mut rng),
                        customer_id: user.clone(),
                        customer_country: country.clone(),
                        customer_activity: activity,
                        record_id: doc.clone(),
                    });
                }
            }
        }
    }

    queries.sort_by_cached_key(|e| (e.timestamp, e.to_log_line()));
    displays.sort_by_cached_key(|e| (e.timestamp, e.to_log_line()));
    orders.sort_by_cached_key(|e| (e.timestamp, e.to_log_line()));

    let unmatched_display_ids = displays
        .iter()
        .filter(|d| d.record_id[1..].parse::<usize>().map_or(true, |n| n > spec.catalog))
        .count();
    let manifest = Manifest {
        spec: spec.clone(),
        communities: planted,
        country_mix: if spec.queries + spec.displays == 0 {
            Vec::new()
        } else {
            TLD_MIX.iter().map(|(t, w)| ((*t).to_owned(), *w)).collect()
        },
        journal_skew,
        query_events: queries.len(),
        display_events: displays.len(),
        order_events: orders.len(),
        biblio_records: biblio.len(),
        unmatched_display_ids,
    };
    Ok(Fixture {
        queries,
        displays,
        orders,
        biblio,
        manifest,
    })
}

fn lines<T>(records: &[T], line: impl Fn(&T) -> String) -> String {
    records.iter().map(|r| line(r) + "\n").collect()
}

impl Fixture {
    pub fn query_log(&self) -> String {
        lines(&self.queries, QueryRecord::to_log_line)
    }

    pub fn display_log(&self) -> String {
        lines(&self.displays, DisplayRecord::to_log_line)
    }

    pub fn order_log(&self) -> String {
        lines(&self.orders, OrderRecord::to_log_line)
    }

    pub fn biblio_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.biblio {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn customers_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["customer_id", "country", "activity"])?;
        let mut seen = std::collections::BTreeSet::new();
        for o in &self.orders {
            if seen.insert(&o.customer_id) {
                w.write_record([o.customer_id.as_str(), o.customer_country.as_str(), o.customer_activity.code()])?;
            }
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
    }

    /// Writes the six fixture files into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            (QUERY_FILE, self.query_log()),
            (DISPLAY_FILE, self.display_log()),
            (ORDER_FILE, self.order_log()),
            (BIBLIO_FILE, self.biblio_jsonl()?),
            (CUSTOMER_FILE, self.customers_csv()?),
            (MANIFEST_FILE, serde_json::to_string_pretty(&self.manifest)? + "\n"),
        ];
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_display_log, parse_order_log, parse_query_log};

    #[test]
    fn same_seed_same_bytes() {
        let spec = FixtureSpec::sized(42, 400);
        let (a, b) = (generate(&spec).unwrap(), generate(&spec).unwrap());
        assert_eq!(a.query_log(), b.query_log());
        assert_eq!(a.display_log(), b.display_log());
        assert_eq!(a.order_log(), b.order_log());
        assert_eq!(a.biblio_jsonl().unwrap(), b.biblio_jsonl().unwrap());
        let other = generate(&FixtureSpec::sized(43, 400)).unwrap();
        assert_ne!(a.display_log(), other.display_log());
    }

    #[test]
    fn size_zero_is_empty() {
        let f = generate(&FixtureSpec::sized(7, 0)).unwrap();
        assert!(f.query_log().is_empty() && f.display_log().is_empty() && f.order_log().is_empty());
        assert!(f.biblio.is_empty());
        assert!(f.manifest.communities.is_empty() && f.manifest.country_mix.is_empty());
        assert_eq!(f.manifest.order_events, 0);
    }

    #[test]
    fn manifest_echoes_communities() {
        let mut spec = FixtureSpec::sized(1, 10);
        spec.communities = vec!["A:5x8".parse().unwrap(), "B:5x8".parse().unwrap()];
        let f = generate(&spec).unwrap();
        assert_eq!(f.manifest.spec.communities, spec.communities);
        let a = &f.manifest.communities[0];
        assert_eq!((a.users.len(), a.docs.len()), (5, 8));
        // Every member orders every community document.
        for c in &f.manifest.communities {
            for u in &c.users {
                for d in &c.docs {
                    assert!(f.orders.iter().any(|o| &o.customer_id == u && &o.record_id == d));
                }
            }
        }
    }

    #[test]
    fn overlap_shares_documents() {
        let mut spec = FixtureSpec::sized(1, 10);
        spec.overlap = 2;
        let f = generate(&spec).unwrap();
        let (a, b) = (&f.manifest.communities[0], &f.manifest.communities[1]);
        assert_eq!(a.docs[6..], b.docs[..2]);
        spec.overlap = 8;
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn logs_parse_cleanly() {
        let f = generate(&FixtureSpec::sized(9, 300)).unwrap();
        let table = TldTable::builtin();
        let q = parse_query_log(f.query_log().as_bytes(), &table).unwrap();
        let d = parse_display_log(f.display_log().as_bytes(), &table).unwrap();
        let o = parse_order_log(f.order_log().as_bytes()).unwrap();
        assert!(q.errors.is_empty() && d.errors.is_empty() && o.errors.is_empty());
        assert_eq!(q.records, f.queries);
        assert_eq!(d.records, f.displays);
        assert_eq!(o.records, f.orders);
    }

    #[test]
    fn community_spec_syntax() {
        let c: CommunitySpec = "Core:4x6".parse().unwrap();
        assert_eq!((c.name.as_str(), c.users, c.docs), ("Core", 4, 6));
        assert!("A5x8".parse::<CommunitySpec>().is_err());
        assert!("A:5x1".parse::<CommunitySpec>().is_err());
    }
}
