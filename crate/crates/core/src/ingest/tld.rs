use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::Country;

const BUILTIN: &str = include_str!("../../data/tld_countries.csv");

/// Maps domain suffixes (`au`, `edu.au`, `uk`) to countries.
#[derive(Debug, Clone, Default)]
pub struct TldTable {
    suffixes: BTreeMap<String, String>,
}

impl TldTable {
    /// The ISO 3166-1 country-code TLDs, plus `uk` for GB.
    pub fn builtin() -> Self {
        Self::from_reader(BUILTIN.as_bytes()).expect("bundled TLD table is well-formed")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    /// Reads `suffix,country_code` rows. A `suffix,country_code` header row is optional.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut suffixes = BTreeMap::new();
        for (idx, row) in csv.records().enumerate() {
            let row = row?;
            let (Some(suffix), Some(code)) = (row.get(0), row.get(1)) else {
                return Err(Error::InvalidRecord(format!("TLD table row {}: expected 2 columns", idx + 1)));
            };
            if idx == 0 && suffix == "suffix" {
                continue;
            }
            let suffix = normalize(suffix);
            let Some(Country::Code(code)) = Country::parse(code) else {
                return Err(Error::InvalidRecord(format!(
                    "TLD table row {}: invalid country code {code:?}",
                    idx + 1
                )));
            };
            if suffix.is_empty() {
                return Err(Error::InvalidRecord(format!("TLD table row {}: empty suffix", idx + 1)));
            }
            suffixes.insert(suffix, code);
        }
        Ok(TldTable { suffixes })
    }

    pub fn len(&self) -> usize {
        self.suffixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.suffixes.is_empty()
    }

    /// Longest label-suffix match; generic domains without a listed suffix are unknown.
    pub fn resolve(&self, tld: &str) -> Country {
        let tld = normalize(tld);
        let mut rest = tld.as_str();
        loop {
            if let Some(code) = self.suffixes.get(rest) {
                return Country::Code(code.clone());
            }
            match rest.split_once('.') {
                Some((_, tail)) => rest = tail,
                None => return Country::Unknown,
            }
        }
    }
}

/// Lowercase, without surrounding dots or whitespace.
pub fn normalize(tld: &str) -> String {
    tld.trim().trim_matches('.').to_ascii_lowercase()
}

/// Free-function form of [`TldTable::resolve`].
pub fn resolve_country(tld: &str, table: &TldTable) -> Country {
    table.resolve(tld)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_has_every_iso_code() {
        let table = TldTable::builtin();
        assert_eq!(table.len(), 250);
        assert_eq!(table.resolve("fr"), Country::Code("FR".into()));
        assert_eq!(table.resolve("uk"), Country::Code("GB".into()));
        assert_eq!(table.resolve("ac.uk"), Country::Code("GB".into()));
    }

    #[test]
    fn academic_australian_domain() {
        assert_eq!(resolve_country("edu.au", &TldTable::builtin()), Country::Code("AU".into()));
        assert_eq!(resolve_country(".EDU.AU", &TldTable::builtin()), Country::Code("AU".into()));
    }

    #[test]
    fn generic_domains_are_unknown() {
        let table = TldTable::builtin();
        for generic in ["com", "net", "org", "edu", "", "xau"] {
            assert_eq!(table.resolve(generic), Country::Unknown, "{generic}");
        }
    }

    #[test]
    fn longest_suffix_wins() {
        let csv = "suffix,country_code\nau,AU\nco.au,NZ\n";
        let table = TldTable::from_reader(csv.as_bytes()).unwrap();
        assert_eq!(table.resolve("co.au"), Country::Code("NZ".into()));
        assert_eq!(table.resolve("shop.co.au"), Country::Code("NZ".into()));
        assert_eq!(table.resolve("edu.au"), Country::Code("AU".into()));
    }

    #[test]
    fn rejects_bad_codes() {
        assert!(TldTable::from_reader("fr,FRA\n".as_bytes()).is_err());
        assert!(TldTable::from_reader("fr\n".as_bytes()).is_err());
    }
}
