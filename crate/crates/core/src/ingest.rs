//! TMC travel-time CSV ingestion.
//!
//! The physical column names are supplied through a [`ColumnMapping`]; any
//! header column not mapped to a logical field is kept as passthrough text.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Unknown-code errors list at most this many available codes.
const MAX_LISTED_CODES: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct TmcRecord {
    pub tmc_code: String,
    pub timestamp: NaiveDateTime,
    /// Seconds; `None` when the cell is empty.
    pub travel_time: Option<f64>,
    pub speed: Option<f64>,
    /// Unmapped columns as `(header, value)`.
    pub extra: Vec<(String, String)>,
}

/// Logical-to-physical column names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub tmc: String,
    pub timestamp: String,
    pub travel_time: String,
    /// Used when present in the header; never required.
    pub speed: Option<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            tmc: "tmc_code".into(),
            timestamp: "measurement_tstamp".into(),
            travel_time: "travel_time_seconds".into(),
            speed: Some("speed".into()),
        }
    }
}

impl ColumnMapping {
    /// Overrides defaults from `key=column` pairs. Keys: `tmc`, `timestamp`,
    /// `travel_time`, `speed`.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut m = Self::default();
        for pair in pairs {
            let (key, col) = pair
                .split_once('=')
                .ok_or_else(|| Error::Schema(format!("expected key=column, got `{pair}`")))?;
            let col = col.trim().to_string();
            match key.trim() {
                "tmc" | "tmc_code" => m.tmc = col,
                "timestamp" | "measurement_tstamp" => m.timestamp = col,
                "travel_time" | "travel_time_seconds" => m.travel_time = col,
                "speed" => m.speed = Some(col),
                other => return Err(Error::Schema(format!("unknown logical column `{other}`"))),
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedRecords {
    pub records: Vec<TmcRecord>,
    pub malformed: usize,
    pub rows: usize,
    pub header: Vec<String>,
    /// `(logical, physical)` for every mapped column found.
    pub mapped: Vec<(String, String)>,
    pub passthrough: Vec<String>,
}

impl LoadedRecords {
    pub fn codes(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.tmc_code.as_str()).collect()
    }
}

/// Reads every data row of a headered CSV file.
pub fn load_records(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<LoadedRecords> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_records_from_reader(file, mapping)
}

pub fn load_records_from_reader<R: std::io::Read>(reader: R, mapping: &ColumnMapping) -> Result<LoadedRecords> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| header.iter().position(|h| h == name);
    let tmc = find(&mapping.tmc).ok_or_else(|| Error::MissingColumn(mapping.tmc.clone()))?;
    let ts = find(&mapping.timestamp).ok_or_else(|| Error::MissingColumn(mapping.timestamp.clone()))?;
    let tt = find(&mapping.travel_time).ok_or_else(|| Error::MissingColumn(mapping.travel_time.clone()))?;
    let speed = mapping.speed.as_deref().and_then(find);

    let mut mapped = vec![
        ("tmc".to_string(), mapping.tmc.clone()),
        ("timestamp".to_string(), mapping.timestamp.clone()),
        ("travel_time".to_string(), mapping.travel_time.clone()),
    ];
    if let (Some(_), Some(name)) = (speed, &mapping.speed) {
        mapped.push(("speed".to_string(), name.clone()));
    }
    let used: Vec<usize> = [Some(tmc), Some(ts), Some(tt), speed].into_iter().flatten().collect();
    let passthrough_idx: Vec<usize> = (0..header.len()).filter(|i| !used.contains(i)).collect();

    let mut records = Vec::new();
    let mut malformed = 0;
    let mut rows = 0;
    for row in rdr.records() {
        rows += 1;
        let Ok(row) = row else {
            malformed += 1;
            continue;
        };
        match parse_row(&row, tmc, ts, tt, speed, &passthrough_idx, &header) {
            Some(rec) => records.push(rec),
            None => malformed += 1,
        }
    }
    if rows > 0 && malformed * 2 > rows {
        return Err(Error::MostlyMalformed { malformed, total: rows });
    }
    Ok(LoadedRecords {
        records,
        malformed,
        rows,
        passthrough: passthrough_idx.iter().map(|&i| header[i].clone()).collect(),
        header,
        mapped,
    })
}

fn parse_row(
    row: &csv::StringRecord,
    tmc: usize,
    ts: usize,
    tt: usize,
    speed: Option<usize>,
    passthrough: &[usize],
    header: &[String],
) -> Option<TmcRecord> {
    let code = row.get(tmc)?.trim();
    if code.is_empty() {
        return None;
    }
    let timestamp = parse_timestamp(row.get(ts)?)?;
    let travel_time = parse_positive(row.get(tt)?)?;
    let speed = match speed {
        Some(i) => parse_positive(row.get(i).unwrap_or(""))?,
        None => None,
    };
    let extra = passthrough
        .iter()
        .map(|&i| (header[i].clone(), row.get(i).unwrap_or("").to_string()))
        .collect();
    Some(TmcRecord {
        tmc_code: code.to_string(),
        timestamp,
        travel_time,
        speed,
        extra,
    })
}

/// Empty cell is `Some(None)`; unparseable or non-positive is `None`.
fn parse_positive(cell: &str) -> Option<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Some(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Some(Some(v)),
        _ => None,
    }
}

/// ISO-8601 date-times; offsets are normalized to UTC.
pub fn parse_timestamp(cell: &str) -> Option<NaiveDateTime> {
    let s = cell.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt);
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueField {
    TravelTime,
    Speed,
}

impl FromStr for ValueField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "travel_time" => Ok(Self::TravelTime),
            "speed" => Ok(Self::Speed),
            other => Err(Error::InvalidArgument(format!("unknown value field `{other}`"))),
        }
    }
}

/// One segment's observations with their timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub series: TimeSeries,
    pub timestamps: Vec<NaiveDateTime>,
}

pub fn extract_series(records: &[TmcRecord], tmc_code: &str, field: ValueField, min_points: usize) -> Result<TimeSeries> {
    extract_series_with_times(records, tmc_code, field, min_points).map(|e| e.series)
}

/// Filters to one code, sorts by time and collapses duplicate timestamps to
/// their mean. Empty cells become `NaN` gaps.
pub fn extract_series_with_times(
    records: &[TmcRecord],
    tmc_code: &str,
    field: ValueField,
    min_points: usize,
) -> Result<Extracted> {
    let mut by_time: BTreeMap<NaiveDateTime, Vec<f64>> = BTreeMap::new();
    let mut any_field = false;
    let mut any_code = false;
    for r in records.iter().filter(|r| r.tmc_code == tmc_code) {
        any_code = true;
        let v = match field {
            ValueField::TravelTime => r.travel_time,
            ValueField::Speed => r.speed,
        };
        any_field |= v.is_some();
        let slot = by_time.entry(r.timestamp).or_default();
        if let Some(v) = v {
            slot.push(v);
        }
    }
    if !any_code {
        let codes: BTreeSet<&str> = records.iter().map(|r| r.tmc_code.as_str()).collect();
        let mut listed: Vec<&str> = codes.iter().copied().take(MAX_LISTED_CODES).collect();
        if codes.len() > MAX_LISTED_CODES {
            listed.push("...");
        }
        return Err(Error::UnknownCode {
            code: tmc_code.to_string(),
            available: listed.join(", "),
        });
    }
    if !any_field {
        return Err(Error::FieldAbsent(match field {
            ValueField::TravelTime => "travel_time",
            ValueField::Speed => "speed",
        }));
    }
    if by_time.len() < min_points {
        return Err(Error::InsufficientData {
            what: "segment series",
            required: min_points,
            actual: by_time.len(),
        });
    }

    let mut timestamps = Vec::with_capacity(by_time.len());
    let mut values = Vec::with_capacity(by_time.len());
    for (t, mut vs) in by_time {
        timestamps.push(t);
        if vs.is_empty() {
            values.push(f64::NAN);
        } else {
            // Fixed summation order keeps the result independent of row order.
            vs.sort_by(f64::total_cmp);
            values.push(vs.iter().sum::<f64>() / vs.len() as f64);
        }
    }
    let mut series = TimeSeries::with_gaps(values)?.with_label(tmc_code);
    if let Some(step) = smallest_step(&timestamps) {
        series = series.with_interval(step);
    }
    Ok(Extracted { series, timestamps })
}

fn smallest_step(ts: &[NaiveDateTime]) -> Option<Duration> {
    ts.windows(2)
        .filter_map(|w| (w[1] - w[0]).to_std().ok())
        .filter(|d| !d.is_zero())
        .min()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapPolicy {
    #[default]
    ForwardFill,
    Drop,
    Interpolate,
}

impl FromStr for GapPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "forward_fill" | "ffill" => Ok(Self::ForwardFill),
            "drop" => Ok(Self::Drop),
            "interpolate" => Ok(Self::Interpolate),
            other => Err(Error::InvalidArgument(format!("unknown gap policy `{other}`"))),
        }
    }
}

impl fmt::Display for GapPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ForwardFill => "forward_fill",
            Self::Drop => "drop",
            Self::Interpolate => "interpolate",
        })
    }
}

/// Removes `NaN` gaps. Interpolation holds the nearest observed value flat
/// beyond either end of the series.
pub fn clean_gaps(series: &TimeSeries, policy: GapPolicy) -> Result<TimeSeries> {
    let v = series.values();
    if v.len() < 2 {
        return Err(Error::InsufficientData {
            what: "gap cleaning",
            required: 2,
            actual: v.len(),
        });
    }
    if v.iter().all(|x| x.is_nan()) {
        return Err(Error::InsufficientData {
            what: "gap cleaning (observed values)",
            required: 1,
            actual: 0,
        });
    }
    let out = match policy {
        GapPolicy::ForwardFill => {
            if v[0].is_nan() {
                return Err(Error::LeadingGap);
            }
            let mut last = v[0];
            v.iter()
                .map(|&x| {
                    if !x.is_nan() {
                        last = x;
                    }
                    last
                })
                .collect()
        }
        GapPolicy::Drop => v.iter().copied().filter(|x| !x.is_nan()).collect(),
        GapPolicy::Interpolate => interpolate(v),
    };
    let mut cleaned = TimeSeries::new(out)?;
    cleaned.origin_label = series.origin_label.clone();
    cleaned.sample_interval = series.sample_interval;
    Ok(cleaned)
}

fn interpolate(v: &[f64]) -> Vec<f64> {
    let known: Vec<usize> = (0..v.len()).filter(|&i| !v[i].is_nan()).collect();
    let mut out = v.to_vec();
    let (first, last) = (known[0], *known.last().unwrap());
    for x in &mut out[..first] {
        *x = v[first];
    }
    for x in &mut out[last + 1..] {
        *x = v[last];
    }
    for pair in known.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let span = (b - a) as f64;
        for i in a + 1..b {
            let w = (i - a) as f64 / span;
            out[i] = v[a] + w * (v[b] - v[a]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SEVEN_COLS: &str = "\
tmc_code,measurement_tstamp,speed,average_speed,reference_speed,travel_time_seconds,data_density
118P04231,2021-03-01 00:00:00,61.2,60.1,65,30.5,A
118P04231,2021-03-01 00:05:00,59.0,60.0,65,31.0,B
118N04232,2021-03-01 00:00:00,40.0,41.0,55,12.0,A
";

    fn load(text: &str) -> Result<LoadedRecords> {
        load_records_from_reader(text.as_bytes(), &ColumnMapping::default())
    }

    #[test]
    fn happy_path_and_passthrough() {
        let l = load(SEVEN_COLS).unwrap();
        assert_eq!((l.records.len(), l.malformed, l.rows), (3, 0, 3));
        assert_eq!(l.header.len(), 7);
        assert_eq!(l.mapped.len(), 4);
        assert_eq!(l.passthrough, vec!["average_speed", "reference_speed", "data_density"]);
        assert_eq!(l.records[0].travel_time, Some(30.5));
        assert_eq!(l.records[0].extra[2], ("data_density".to_string(), "A".to_string()));
    }

    #[test]
    fn malformed_rows_are_counted() {
        let text = "tmc_code,measurement_tstamp,travel_time_seconds\n\
                    A,2021-01-01T00:00:00,10\n\
                    A,2021-01-01T00:01:00,abc\n\
                    A,2021-01-01T00:02:00,12\n";
        let l = load(text).unwrap();
        assert_eq!((l.records.len(), l.malformed), (2, 1));
        assert_eq!(l.records.len() + l.malformed, l.rows);
    }

    #[test]
    fn missing_column_is_named() {
        let err = load("tmc_code,when,travel_time_seconds\nA,2021-01-01,1\n").unwrap_err();
        assert!(matches!(&err, Error::MissingColumn(c) if c == "measurement_tstamp"));
    }

    #[test]
    fn mostly_malformed_is_fatal() {
        let text = "tmc_code,measurement_tstamp,travel_time_seconds\n\
                    A,nope,10\nA,nope,10\nA,2021-01-01,10\n";
        assert!(matches!(load(text), Err(Error::MostlyMalformed { malformed: 2, total: 3 })));
    }

    #[test]
    fn custom_mapping() {
        let m = ColumnMapping::from_pairs(["tmc=seg", "timestamp=ts", "travel_time=tt"]).unwrap();
        let l = load_records_from_reader("seg,ts,tt\nX,2020-05-01T10:00:00Z,5\n".as_bytes(), &m).unwrap();
        assert_eq!(l.records[0].tmc_code, "X");
        assert!(ColumnMapping::from_pairs(["bogus=1"]).is_err());
        assert!(ColumnMapping::from_pairs(["tmc"]).is_err());
    }

    #[test]
    fn extract_filters_and_sorts() {
        let text = "tmc_code,measurement_tstamp,travel_time_seconds\n\
                    A,2021-01-01T00:02:00,3\n\
                    B,2021-01-01T00:00:00,100\n\
                    A,2021-01-01T00:00:00,1\n\
                    B,2021-01-01T00:01:00,200\n\
                    A,2021-01-01T00:01:00,2\n";
        let l = load(text).unwrap();
        let s = extract_series(&l.records, "A", ValueField::TravelTime, 1).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.sample_interval, Some(Duration::from_secs(60)));
        assert_eq!(s.origin_label.as_deref(), Some("A"));
    }

    #[test]
    fn duplicate_timestamps_average() {
        let text = "tmc_code,measurement_tstamp,travel_time_seconds\n\
                    A,2021-01-01T00:00:00,10\n\
                    A,2021-01-01T00:00:00,20\n\
                    A,2021-01-01T00:05:00,30\n";
        let s = extract_series(&load(text).unwrap().records, "A", ValueField::TravelTime, 1).unwrap();
        assert_eq!(s.values(), &[15.0, 30.0]);
    }

    #[test]
    fn extract_errors() {
        let l = load(SEVEN_COLS).unwrap();
        match extract_series(&l.records, "ZZZ", ValueField::TravelTime, 1) {
            Err(Error::UnknownCode { available, .. }) => {
                assert!(available.contains("118N04232") && available.contains("118P04231"));
            }
            other => panic!("expected unknown code, got {other:?}"),
        }
        let no_speed = "tmc_code,measurement_tstamp,travel_time_seconds\nA,2021-01-01,3\n";
        let recs = load(no_speed).unwrap().records;
        assert!(matches!(
            extract_series(&recs, "A", ValueField::Speed, 1),
            Err(Error::FieldAbsent("speed"))
        ));
        assert!(extract_series(&l.records, "118P04231", ValueField::TravelTime, 12).is_err());
    }

    #[test]
    fn gap_policies() {
        let s = TimeSeries::with_gaps(vec![1.0, f64::NAN, 3.0]).unwrap();
        assert_eq!(clean_gaps(&s, GapPolicy::ForwardFill).unwrap().values(), &[1.0, 1.0, 3.0]);
        assert_eq!(clean_gaps(&s, GapPolicy::Interpolate).unwrap().values(), &[1.0, 2.0, 3.0]);
        assert_eq!(clean_gaps(&s, GapPolicy::Drop).unwrap().values(), &[1.0, 3.0]);
        let lead = TimeSeries::with_gaps(vec![f64::NAN, 2.0, 3.0]).unwrap();
        assert!(matches!(clean_gaps(&lead, GapPolicy::ForwardFill), Err(Error::LeadingGap)));
        assert_eq!(clean_gaps(&lead, GapPolicy::Interpolate).unwrap().values(), &[2.0, 2.0, 3.0]);
        assert_eq!("forward-fill".parse::<GapPolicy>().unwrap(), GapPolicy::ForwardFill);
    }

    proptest! {
        #[test]
        fn row_order_does_not_matter(seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut lines: Vec<String> = (0..40)
                .map(|i| format!("A,2021-01-01T00:{:02}:00,{}", i % 25, 10.0 + (i as f64 * 0.37).sin()))
                .collect();
            let header = "tmc_code,measurement_tstamp,travel_time_seconds\n";
            let base = format!("{header}{}\n", lines.join("\n"));
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            lines.shuffle(&mut rng);
            let shuffled = format!("{header}{}\n", lines.join("\n"));
            let a = extract_series(&load(&base).unwrap().records, "A", ValueField::TravelTime, 1).unwrap();
            let b = extract_series(&load(&shuffled).unwrap().records, "A", ValueField::TravelTime, 1).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn cleaning_never_leaves_nan(
            v in prop::collection::vec(prop_oneof![Just(f64::NAN), -100f64..100.0], 2..40),
            policy in prop_oneof![Just(GapPolicy::ForwardFill), Just(GapPolicy::Drop), Just(GapPolicy::Interpolate)],
        ) {
            let s = TimeSeries::with_gaps(v.clone()).unwrap();
            match clean_gaps(&s, policy) {
                Ok(c) => prop_assert!(c.values().iter().all(|x| x.is_finite())),
                Err(Error::LeadingGap) => prop_assert!(v[0].is_nan() && policy == GapPolicy::ForwardFill),
                Err(_) => prop_assert!(v.iter().all(|x| x.is_nan())),
            }
        }
    }
}
