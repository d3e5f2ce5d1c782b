//! Attribute records, city metadata and their CSV/JSON loaders.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observed garment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeRecord {
    pub city_id: String,
    pub timestamp: DateTime<Utc>,
    pub attributes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CityMetadata {
    pub city_id: String,
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
    pub gdp: Option<f64>,
    pub population: Option<f64>,
    pub avg_temperature: Option<f64>,
    pub country: Option<String>,
    pub continent: Option<String>,
    /// Number of records observed for this city; filled during ingestion.
    #[serde(default)]
    pub sample_count: usize,
}

impl CityMetadata {
    pub fn new(city_id: impl Into<String>) -> Self {
        CityMetadata {
            city_id: city_id.into(),
            ..Default::default()
        }
    }

    pub fn location(&self) -> Option<(f64, f64)> {
        Some((self.latitude?, self.longitude?))
    }

    fn validate(&self) -> Result<()> {
        check_range(&self.city_id, "latitude", self.latitude, 90.0)?;
        check_range(&self.city_id, "longitude", self.longitude, 180.0)?;
        if let Some(p) = self.population {
            if p < 0.0 {
                return Err(Error::CoordinateOutOfRange {
                    city: self.city_id.clone(),
                    field: "population",
                    value: p,
                });
            }
        }
        Ok(())
    }
}

fn check_range(city: &str, field: &'static str, value: Option<f64>, bound: f64) -> Result<()> {
    match value {
        Some(v) if !(-bound..=bound).contains(&v) => Err(Error::CoordinateOutOfRange {
            city: city.to_string(),
            field,
            value: v,
        }),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub records: Vec<AttributeRecord>,
    pub cities: BTreeMap<String, CityMetadata>,
    pub attribute_names: Vec<String>,
}

impl Corpus {
    /// Builds a corpus, creating null metadata for unseen cities and
    /// recounting `sample_count`.
    pub fn new(
        records: Vec<AttributeRecord>,
        mut cities: BTreeMap<String, CityMetadata>,
        attribute_names: Vec<String>,
    ) -> Result<Self> {
        let m = attribute_names.len();
        for meta in cities.values_mut() {
            meta.sample_count = 0;
        }
        for (row, rec) in records.iter().enumerate() {
            if rec.attributes.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: rec.attributes.len(),
                });
            }
            for (col, &v) in rec.attributes.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::AttributeOutOfRange {
                        row: row + 1,
                        column: attribute_names[col].clone(),
                        value: v,
                    });
                }
            }
            cities
                .entry(rec.city_id.clone())
                .or_insert_with(|| CityMetadata::new(rec.city_id.clone()))
                .sample_count += 1;
        }
        Ok(Corpus {
            records,
            cities,
            attribute_names,
        })
    }

    pub fn dim(&self) -> usize {
        self.attribute_names.len()
    }

    pub fn time_range(&self) -> Option<(DateTime<Utc>, DateTime<Utc>)> {
        let first = self.records.iter().map(|r| r.timestamp).min()?;
        let last = self.records.iter().map(|r| r.timestamp).max()?;
        Some((first, last))
    }
}

/// Column mapping for the records CSV.
#[derive(Debug, Clone)]
pub struct RecordSchema {
    pub city_column: String,
    pub timestamp_column: String,
    /// Attribute columns in order; `None` takes every remaining column.
    pub attribute_columns: Option<Vec<String>>,
    /// Reject records whose city is missing from the supplied metadata.
    pub strict_cities: bool,
}

impl Default for RecordSchema {
    fn default() -> Self {
        RecordSchema {
            city_column: "city_id".into(),
            timestamp_column: "timestamp".into(),
            attribute_columns: None,
            strict_cities: false,
        }
    }
}

/// Parses an ISO-8601 timestamp; offset-free forms are taken as UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc())
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

#[derive(Deserialize)]
struct RecordsJson {
    attribute_names: Vec<String>,
    records: Vec<AttributeRecord>,
}

/// Loads records from CSV (or JSON when the path ends in `.json`).
///
/// `metadata`, when given, seeds the city table; with `strict_cities` every
/// record must name a known city.
pub fn load_records(
    path: &Path,
    schema: &RecordSchema,
    metadata: Option<BTreeMap<String, CityMetadata>>,
) -> Result<Corpus> {
    let known = metadata.clone().unwrap_or_default();
    let (records, names) = if path.extension().is_some_and(|e| e == "json") {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let parsed: RecordsJson = serde_json::from_reader(BufReader::new(file))?;
        (parsed.records, parsed.attribute_names)
    } else {
        read_records_csv(path, schema)?
    };
    if schema.strict_cities {
        for (row, rec) in records.iter().enumerate() {
            if !known.contains_key(&rec.city_id) {
                return Err(Error::UnknownCity {
                    row: row + 1,
                    city: rec.city_id.clone(),
                });
            }
        }
    }
    Corpus::new(records, known, names)
}

fn read_records_csv(path: &Path, schema: &RecordSchema) -> Result<(Vec<AttributeRecord>, Vec<String>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(BufReader::new(file));
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MalformedRow {
                row: 0,
                message: format!("header lacks column `{name}`"),
            })
    };
    let city_idx = col(&schema.city_column)?;
    let ts_idx = col(&schema.timestamp_column)?;
    let attr_idx: Vec<usize> = match &schema.attribute_columns {
        Some(cols) => cols.iter().map(|c| col(c)).collect::<Result<_>>()?,
        None => (0..headers.len()).filter(|&i| i != city_idx && i != ts_idx).collect(),
    };
    if attr_idx.is_empty() {
        return Err(Error::MalformedRow {
            row: 0,
            message: "no attribute columns".into(),
        });
    }
    let names: Vec<String> = attr_idx.iter().map(|&i| headers[i].to_string()).collect();

    let mut records = Vec::new();
    for (n, row) in reader.records().enumerate() {
        let row_no = n + 1;
        let row = row.map_err(|e| Error::MalformedRow {
            row: row_no,
            message: e.to_string(),
        })?;
        let city = row.get(city_idx).unwrap_or_default();
        if city.is_empty() {
            return Err(Error::MalformedRow {
                row: row_no,
                message: "empty city_id".into(),
            });
        }
        let ts_raw = row.get(ts_idx).unwrap_or_default();
        let timestamp = parse_timestamp(ts_raw).ok_or_else(|| Error::MalformedRow {
            row: row_no,
            message: format!("bad timestamp `{ts_raw}`"),
        })?;
        let mut attributes = Vec::with_capacity(attr_idx.len());
        for (&i, name) in attr_idx.iter().zip(&names) {
            let raw = row.get(i).unwrap_or_default();
            let v: f64 = raw.parse().map_err(|_| Error::MalformedRow {
                row: row_no,
                message: format!("column `{name}`: not a number `{raw}`"),
            })?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::AttributeOutOfRange {
                    row: row_no,
                    column: name.clone(),
                    value: v,
                });
            }
            attributes.push(v);
        }
        records.push(AttributeRecord {
            city_id: city.to_string(),
            timestamp,
            attributes,
        });
    }
    Ok((records, names))
}

/// Writes records in the `city_id,timestamp,attr...` layout.
pub fn write_records(corpus: &Corpus, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec!["city_id".to_string(), "timestamp".to_string()];
    header.extend(corpus.attribute_names.iter().cloned());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for rec in &corpus.records {
        row.clear();
        row.push(rec.city_id.clone());
        row.push(format_timestamp(&rec.timestamp));
        row.extend(rec.attributes.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn opt_num(raw: Option<&str>, field: &str, city: &str) -> Result<Option<f64>> {
    match raw.map(str::trim) {
        None | Some("") => Ok(None),
        Some(s) if s.eq_ignore_ascii_case("null") || s.eq_ignore_ascii_case("na") => Ok(None),
        Some(s) => s.parse().map(Some).map_err(|_| Error::MalformedRow {
            row: 0,
            message: format!("city `{city}`: {field} `{s}` is not a number"),
        }),
    }
}

fn opt_str(raw: Option<&str>) -> Option<String> {
    raw.map(str::trim).filter(|s| !s.is_empty()).map(str::to_string)
}

/// Reads the `city_id,lat,lon,gdp,population,avg_temp,country,continent` table.
pub fn load_city_metadata(path: &Path) -> Result<BTreeMap<String, CityMetadata>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(BufReader::new(file));
    let headers = reader.headers()?.clone();
    let idx = |name: &str| headers.iter().position(|h| h == name);
    let city_idx = idx("city_id").ok_or_else(|| Error::MalformedRow {
        row: 0,
        message: "metadata header lacks `city_id`".into(),
    })?;
    let cols = [idx("lat"), idx("lon"), idx("gdp"), idx("population"), idx("avg_temp")];
    let country_idx = idx("country");
    let continent_idx = idx("continent");

    let mut out = BTreeMap::new();
    for (n, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::MalformedRow {
            row: n + 1,
            message: e.to_string(),
        })?;
        let city = row.get(city_idx).unwrap_or_default().to_string();
        let get = |i: Option<usize>| i.and_then(|i| row.get(i));
        let meta = CityMetadata {
            latitude: opt_num(get(cols[0]), "lat", &city)?,
            longitude: opt_num(get(cols[1]), "lon", &city)?,
            gdp: opt_num(get(cols[2]), "gdp", &city)?,
            population: opt_num(get(cols[3]), "population", &city)?,
            avg_temperature: opt_num(get(cols[4]), "avg_temp", &city)?,
            country: opt_str(get(country_idx)),
            continent: opt_str(get(continent_idx)),
            sample_count: 0,
            city_id: city.clone(),
        };
        meta.validate()?;
        if out.insert(city.clone(), meta).is_some() {
            return Err(Error::DuplicateCity(city));
        }
    }
    Ok(out)
}

pub fn write_city_metadata(cities: &BTreeMap<String, CityMetadata>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(["city_id", "lat", "lon", "gdp", "population", "avg_temp", "country", "continent"])?;
    let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for m in cities.values() {
        w.write_record([
            m.city_id.clone(),
            num(m.latitude),
            num(m.longitude),
            num(m.gdp),
            num(m.population),
            num(m.avg_temperature),
            m.country.clone().unwrap_or_default(),
            m.continent.clone().unwrap_or_default(),
        ])?;
    }
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        let mut f = File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn three_rows_one_city() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "r.csv",
            "city_id,timestamp,a1,a2\nparis,2014-01-06T10:00:00Z,0.1,0.9\nparis,2014-01-07,0.5,0.5\nparis,2014-01-08 08:30:00,1,0\n",
        );
        let c = load_records(&p, &RecordSchema::default(), None).unwrap();
        assert_eq!(c.records.len(), 3);
        assert_eq!(c.dim(), 2);
        assert_eq!(c.cities["paris"].sample_count, 3);
    }

    #[test]
    fn out_of_range_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "r.csv",
            "city_id,timestamp,a1,a2\nparis,2014-01-06,0.1,0.9\nparis,2014-01-07,1.3,0.5\n",
        );
        match load_records(&p, &RecordSchema::default(), None) {
            Err(Error::AttributeOutOfRange { row, column, value }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "a1");
                assert_eq!(value, 1.3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_row_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "r.csv", "city_id,timestamp,a1\nparis,notadate,0.1\n");
        assert!(matches!(
            load_records(&p, &RecordSchema::default(), None),
            Err(Error::MalformedRow { row: 1, .. })
        ));
    }

    #[test]
    fn strict_rejects_unknown_city() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "r.csv", "city_id,timestamp,a1\nrome,2014-01-06,0.1\n");
        let schema = RecordSchema {
            strict_cities: true,
            ..Default::default()
        };
        let mut meta = BTreeMap::new();
        meta.insert("paris".into(), CityMetadata::new("paris"));
        assert!(matches!(
            load_records(&p, &schema, Some(meta)),
            Err(Error::UnknownCity { row: 1, .. })
        ));
    }

    #[test]
    fn metadata_passthrough_and_nulls() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "m.csv",
            "city_id,lat,lon,gdp,population,avg_temp,country,continent\nparis,48.86,2.35,,2140000,12.3,France,Europe\n",
        );
        let m = load_city_metadata(&p).unwrap();
        assert_eq!(m["paris"].latitude, Some(48.86));
        assert_eq!(m["paris"].gdp, None);
        assert_eq!(m["paris"].continent.as_deref(), Some("Europe"));
    }

    #[test]
    fn metadata_duplicate_and_range() {
        let dir = tempfile::tempdir().unwrap();
        let header = "city_id,lat,lon,gdp,population,avg_temp,country,continent\n";
        let dup = write(
            dir.path(),
            "d.csv",
            &format!("{header}paris,48.8,2.3,,,,,\nparis,48.8,2.3,,,,,\n"),
        );
        assert!(matches!(load_city_metadata(&dup), Err(Error::DuplicateCity(c)) if c == "paris"));
        let bad = write(dir.path(), "b.csv", &format!("{header}x,91,0,,,,,\n"));
        assert!(matches!(
            load_city_metadata(&bad),
            Err(Error::CoordinateOutOfRange { field: "latitude", .. })
        ));
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "r.csv",
            "city_id,timestamp,a1,a2\nparis,2014-01-06T10:00:00Z,0.123456789,0.9\nrome,2014-01-07T00:00:01.5Z,0.5,0.3333333333333333\n",
        );
        let c = load_records(&p, &RecordSchema::default(), None).unwrap();
        let q = dir.path().join("again.csv");
        write_records(&c, &q).unwrap();
        let again = load_records(&q, &RecordSchema::default(), None).unwrap();
        assert_eq!(c, again);
    }
}
