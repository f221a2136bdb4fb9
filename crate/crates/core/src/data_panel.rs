//! Price ingestion, weekly log-returns and market-state labelling.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Read;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Price levels for `k` entities on `T` strictly increasing dates.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    entities: Vec<String>,
    dates: Vec<NaiveDate>,
    /// T×k, row = date, column = entity.
    prices: DMatrix<f64>,
}

impl PricePanel {
    pub fn new(entities: Vec<String>, dates: Vec<NaiveDate>, prices: DMatrix<f64>) -> Result<Self> {
        if prices.nrows() != dates.len() || prices.ncols() != entities.len() {
            return Err(Error::Validation(format!(
                "price matrix is {}×{} but there are {} dates and {} entities",
                prices.nrows(),
                prices.ncols(),
                dates.len(),
                entities.len()
            )));
        }
        check_entities(&entities)?;
        check_dates(&dates)?;
        for (t, date) in dates.iter().enumerate() {
            for (i, entity) in entities.iter().enumerate() {
                let p = prices[(t, i)];
                if !(p > 0.0 && p.is_finite()) {
                    return Err(Error::InvalidPrice {
                        entity: entity.clone(),
                        date: *date,
                        value: p,
                    });
                }
            }
        }
        Ok(Self {
            entities,
            dates,
            prices,
        })
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &DMatrix<f64> {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Writes the panel as a comma-separated file with a `date` column.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("date");
        for e in &self.entities {
            out.push(',');
            out.push_str(e);
        }
        out.push('\n');
        for (t, d) in self.dates.iter().enumerate() {
            out.push_str(&d.format("%Y-%m-%d").to_string());
            for i in 0..self.entities.len() {
                out.push(',');
                out.push_str(&format!("{:.10}", self.prices[(t, i)]));
            }
            out.push('\n');
        }
        out
    }
}

fn check_entities(entities: &[String]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for e in entities {
        if !seen.insert(e.as_str()) {
            return Err(Error::Validation(format!("duplicate entity identifier `{e}`")));
        }
    }
    Ok(())
}

fn check_dates(dates: &[NaiveDate]) -> Result<()> {
    for w in dates.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Validation(format!(
                "dates must be strictly increasing: {} follows {}",
                w[1], w[0]
            )));
        }
    }
    Ok(())
}

/// Weekly log-returns; row `t` is dated at the later of the two prices.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    entities: Vec<String>,
    dates: Vec<NaiveDate>,
    returns: DMatrix<f64>,
}

impl ReturnPanel {
    pub fn new(entities: Vec<String>, dates: Vec<NaiveDate>, returns: DMatrix<f64>) -> Result<Self> {
        if returns.nrows() != dates.len() || returns.ncols() != entities.len() {
            return Err(Error::Validation("return matrix shape does not match metadata".into()));
        }
        check_entities(&entities)?;
        check_dates(&dates)?;
        if let Some(pos) = returns.iter().position(|r| !r.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite return at row {}, column {}",
                pos % returns.nrows(),
                pos / returns.nrows()
            )));
        }
        Ok(Self {
            entities,
            dates,
            returns,
        })
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn weeks(&self) -> usize {
        self.dates.len()
    }

    pub fn k(&self) -> usize {
        self.entities.len()
    }

    pub fn entity_index(&self, entity: &str) -> Result<usize> {
        self.entities
            .iter()
            .position(|e| e == entity)
            .ok_or_else(|| Error::UnknownEntity(entity.to_string()))
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.returns.column(i).iter().copied().collect()
    }

    /// Restricts the panel to the named entities, in the given order.
    pub fn select(&self, entities: &[String]) -> Result<ReturnPanel> {
        let idx = entities
            .iter()
            .map(|e| self.entity_index(e))
            .collect::<Result<Vec<_>>>()?;
        let returns = DMatrix::from_fn(self.weeks(), idx.len(), |t, j| self.returns[(t, idx[j])]);
        ReturnPanel::new(entities.to_vec(), self.dates.clone(), returns)
    }
}

pub fn to_log_returns(panel: &PricePanel) -> ReturnPanel {
    let t = panel.len();
    let k = panel.entities.len();
    let returns = DMatrix::from_fn(t.saturating_sub(1), k, |row, i| {
        (panel.prices[(row + 1, i)] / panel.prices[(row, i)]).ln()
    });
    ReturnPanel {
        entities: panel.entities.clone(),
        dates: panel.dates[1.min(t)..].to_vec(),
        returns,
    }
}

/// How a price CSV maps onto a panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub date_column: String,
    /// Entity columns to read; `None` reads every non-date column.
    pub entity_columns: Option<Vec<String>>,
    pub delimiter: char,
    pub date_format: String,
    /// Loading fails if any entity has a larger fraction of missing prices.
    pub max_missing_fraction: f64,
    /// Collapse daily rows to the last observation of each ISO week.
    pub resample_weekly: bool,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            date_column: "date".into(),
            entity_columns: None,
            delimiter: ',',
            date_format: "%Y-%m-%d".into(),
            max_missing_fraction: 0.05,
            resample_weekly: false,
        }
    }
}

pub fn load_price_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<PricePanel> {
    let file = std::fs::File::open(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    read_price_csv(file, schema)
}

fn is_missing(cell: &str) -> bool {
    matches!(
        cell.trim().to_ascii_lowercase().as_str(),
        "" | "na" | "nan" | "null" | "n/a"
    )
}

/// Parses a price CSV from any reader. Row numbers in errors are 1-based file
/// lines (the header is line 1).
pub fn read_price_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<PricePanel> {
    if !schema.delimiter.is_ascii() {
        return Err(Error::Config("delimiter must be an ASCII character".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    let date_col = headers
        .iter()
        .position(|h| h == schema.date_column)
        .ok_or_else(|| Error::Parse {
            row: 1,
            message: format!("missing date column `{}`", schema.date_column),
        })?;
    let entity_cols: Vec<(String, usize)> = match &schema.entity_columns {
        Some(names) => names
            .iter()
            .map(|n| {
                headers
                    .iter()
                    .position(|h| h == n)
                    .map(|i| (n.clone(), i))
                    .ok_or_else(|| Error::Parse {
                        row: 1,
                        message: format!("missing entity column `{n}`"),
                    })
            })
            .collect::<Result<_>>()?,
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != date_col)
            .map(|(i, h)| (h.to_string(), i))
            .collect(),
    };
    let entities: Vec<String> = entity_cols.iter().map(|(n, _)| n.clone()).collect();
    check_entities(&entities)?;

    let mut dates = Vec::new();
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| Error::Parse {
            row: line,
            message: e.to_string(),
        })?;
        let raw_date = record.get(date_col).ok_or_else(|| Error::Parse {
            row: line,
            message: "missing date field".into(),
        })?;
        let date = NaiveDate::parse_from_str(raw_date, &schema.date_format).map_err(|e| Error::Parse {
            row: line,
            message: format!("bad date `{raw_date}`: {e}"),
        })?;
        let mut row = Vec::with_capacity(entity_cols.len());
        for (name, col) in &entity_cols {
            let cell = record.get(*col).unwrap_or("");
            if is_missing(cell) {
                row.push(None);
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row: line,
                message: format!("bad price `{cell}` for `{name}`"),
            })?;
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidPrice {
                    entity: name.clone(),
                    date,
                    value,
                });
            }
            row.push(Some(value));
        }
        dates.push(date);
        rows.push(row);
    }

    if schema.resample_weekly {
        (dates, rows) = resample_last_of_iso_week(dates, rows)?;
    }
    check_dates(&dates)?;
    if dates.len() < 2 || entities.len() < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 rows and 2 entities, found {} rows and {} entities",
            dates.len(),
            entities.len()
        )));
    }

    let t = dates.len();
    let mut prices = DMatrix::zeros(t, entities.len());
    for (i, entity) in entities.iter().enumerate() {
        let missing = rows.iter().filter(|r| r[i].is_none()).count();
        if missing as f64 > schema.max_missing_fraction * t as f64 {
            return Err(Error::Validation(format!(
                "entity `{entity}` is missing {missing} of {t} prices (limit {:.1}%)",
                100.0 * schema.max_missing_fraction
            )));
        }
        // Forward fill; a leading gap takes the first available observation.
        let first = rows.iter().find_map(|r| r[i]).expect("missing fraction < 1");
        let mut last = first;
        for (row, values) in rows.iter().enumerate() {
            if let Some(v) = values[i] {
                last = v;
            }
            prices[(row, i)] = last;
        }
    }
    PricePanel::new(entities, dates, prices)
}

type Rows = Vec<Vec<Option<f64>>>;

fn resample_last_of_iso_week(dates: Vec<NaiveDate>, rows: Rows) -> Result<(Vec<NaiveDate>, Rows)> {
    check_dates(&dates)?;
    let mut out_dates: Vec<NaiveDate> = Vec::new();
    let mut out_rows: Rows = Vec::new();
    for (date, row) in dates.into_iter().zip(rows) {
        let same_week = out_dates.last().is_some_and(|d| d.iso_week() == date.iso_week());
        if same_week {
            let prev = out_rows.last_mut().unwrap();
            // Last observation per entity within the week.
            for (p, v) in prev.iter_mut().zip(row) {
                if v.is_some() {
                    *p = v;
                }
            }
            *out_dates.last_mut().unwrap() = date;
        } else {
            out_dates.push(date);
            out_rows.push(row);
        }
    }
    Ok((out_dates, out_rows))
}

/// Market regime label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MarketState {
    Normal,
    SubprimeCrisis,
    PublicDebtCrisis,
    Custom(String),
}

impl MarketState {
    pub fn as_str(&self) -> &str {
        match self {
            MarketState::Normal => "N",
            MarketState::SubprimeCrisis => "SMC",
            MarketState::PublicDebtCrisis => "PDC",
            MarketState::Custom(s) => s,
        }
    }

    pub fn parse(s: &str) -> Self {
        match s {
            "N" => MarketState::Normal,
            "SMC" => MarketState::SubprimeCrisis,
            "PDC" => MarketState::PublicDebtCrisis,
            other => MarketState::Custom(other.to_string()),
        }
    }
}

impl fmt::Display for MarketState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for MarketState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for MarketState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(MarketState::parse(&String::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateWindow {
    pub label: MarketState,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

/// Non-overlapping, inclusive date windows; dates outside every window are `N`.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
#[serde(transparent)]
pub struct MarketStateCalendar {
    windows: Vec<StateWindow>,
}

const DEFAULT_CALENDAR_JSON: &str = include_str!("../config/default_calendar.json");

impl MarketStateCalendar {
    pub fn new(mut windows: Vec<StateWindow>) -> Result<Self> {
        for w in &windows {
            if w.end < w.start {
                return Err(Error::Config(format!(
                    "window {} ends ({}) before it starts ({})",
                    w.label, w.end, w.start
                )));
            }
        }
        windows.sort_by_key(|w| w.start);
        for pair in windows.windows(2) {
            if pair[1].start <= pair[0].end {
                return Err(Error::Config(format!(
                    "calendar windows {} and {} overlap",
                    pair[0].label, pair[1].label
                )));
            }
        }
        Ok(Self { windows })
    }

    /// The shipped default: SMC and PDC windows from `config/default_calendar.json`.
    pub fn default_crisis() -> Self {
        Self::from_json_str(DEFAULT_CALENDAR_JSON).expect("bundled calendar is valid")
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let windows: Vec<StateWindow> = serde_json::from_str(json)?;
        Self::new(windows)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_json_str(&text)
    }

    pub fn windows(&self) -> &[StateWindow] {
        &self.windows
    }

    pub fn label(&self, date: NaiveDate) -> MarketState {
        self.windows
            .iter()
            .find(|w| w.start <= date && date <= w.end)
            .map(|w| w.label.clone())
            .unwrap_or(MarketState::Normal)
    }
}

pub fn label_dates(dates: &[NaiveDate], calendar: &MarketStateCalendar) -> Vec<MarketState> {
    dates.iter().map(|&d| calendar.label(d)).collect()
}
