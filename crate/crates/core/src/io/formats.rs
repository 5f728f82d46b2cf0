//! CSV column contracts.
//!
//! Multi-valued fields use `|`; level vectors use `;`. Columns are found
//! by header name, so their order is free.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::str::FromStr;

use csv::StringRecord;

use super::IoError;
use crate::model::{Case, CrossRef, HouseholdFlag, Instance, Location, MatrixError, ScoreMatrix};
use crate::schedule::Meeting;
use crate::score::HistoryRecord;

pub const CASE_COLUMNS: [&str; 11] = [
    "id",
    "name",
    "member_count",
    "employable_count",
    "languages",
    "nationality",
    "flags",
    "levels",
    "prefs",
    "refusals",
    "crossrefs",
];
pub const LOCATION_COLUMNS: [&str; 7] = [
    "id",
    "name",
    "case_capacity",
    "member_capacity",
    "languages",
    "services",
    "desired_levels",
];
pub const HISTORY_COLUMNS: [&str; 6] = ["id", "member_count", "languages", "flags", "location_id", "employed"];
pub const MEETING_COLUMNS: [&str; 5] = ["client_id", "lat", "lon", "duration_minutes", "selected"];
pub const LOCK_COLUMNS: [&str; 2] = ["case_id", "location_id"];
pub const MATRIX_COLUMNS: [&str; 5] = ["case_id", "location_id", "score", "compatible", "reasons"];

struct Table<'a> {
    file: &'a str,
    columns: HashMap<String, usize>,
    records: Vec<(u64, StringRecord)>,
}

struct Row<'t, 'a> {
    table: &'t Table<'a>,
    line: u64,
    record: &'t StringRecord,
}

impl<'a> Table<'a> {
    fn read(text: &str, file: &'a str, required: &[&str]) -> Result<Self, IoError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| csv_error(file, e))?.clone();
        let columns: HashMap<String, usize> = headers.iter().enumerate().map(|(k, h)| (h.to_string(), k)).collect();
        for name in required {
            if !columns.contains_key(*name) {
                return Err(IoError::Parse {
                    file: file.to_string(),
                    line: 1,
                    column: 0,
                    reason: format!("missing column {name}"),
                });
            }
        }
        let mut records = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(file, e))?;
            let line = record.position().map_or(0, |p| p.line());
            records.push((line, record));
        }
        Ok(Table { file, columns, records })
    }

    fn rows(&self) -> impl Iterator<Item = Row<'_, 'a>> {
        self.records.iter().map(move |(line, record)| Row {
            table: self,
            line: *line,
            record,
        })
    }
}

fn csv_error(file: &str, e: csv::Error) -> IoError {
    let (line, column) = match e.position() {
        Some(p) => (p.line(), 0),
        None => (0, 0),
    };
    IoError::Parse {
        file: file.to_string(),
        line,
        column,
        reason: e.to_string(),
    }
}

impl Row<'_, '_> {
    fn column(&self, name: &str) -> usize {
        self.table.columns[name]
    }

    fn error(&self, name: &str, reason: impl Into<String>) -> IoError {
        IoError::Parse {
            file: self.table.file.to_string(),
            line: self.line,
            column: self.column(name) + 1,
            reason: reason.into(),
        }
    }

    fn text(&self, name: &str) -> &str {
        self.record.get(self.column(name)).unwrap_or("")
    }

    fn optional(&self, name: &str) -> Option<&str> {
        self.table.columns.get(name).map(|&k| self.record.get(k).unwrap_or(""))
    }

    fn parse<T: FromStr>(&self, name: &str) -> Result<T, IoError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.text(name);
        if raw.is_empty() {
            return Err(self.error(name, format!("{name} is missing")));
        }
        raw.parse()
            .map_err(|e| self.error(name, format!("cannot parse {name} {raw:?}: {e}")))
    }

    fn list(&self, name: &str) -> Vec<String> {
        split_list(self.text(name))
    }

    fn set(&self, name: &str) -> BTreeSet<String> {
        self.list(name).into_iter().collect()
    }

    fn levels(&self, name: &str) -> Result<Vec<f64>, IoError> {
        let raw = self.text(name);
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(';')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| self.error(name, format!("bad level {v:?}: {e}")))
            })
            .collect()
    }

    fn flags(&self, name: &str) -> Result<BTreeSet<HouseholdFlag>, IoError> {
        self.list(name)
            .iter()
            .map(|f| HouseholdFlag::parse(f).ok_or_else(|| self.error(name, format!("unknown flag {f:?}"))))
            .collect()
    }

    fn boolean(&self, name: &str) -> Result<bool, IoError> {
        parse_bool(self.text(name))
            .ok_or_else(|| self.error(name, format!("expected 0/1 or true/false, got {:?}", self.text(name))))
    }
}

fn parse_bool(raw: &str) -> Option<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

fn split_list(raw: &str) -> Vec<String> {
    raw.split('|')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn join<'s>(items: impl IntoIterator<Item = &'s String>) -> String {
    items.into_iter().map(String::as_str).collect::<Vec<_>>().join("|")
}

fn join_levels(levels: &[f64]) -> String {
    levels.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}

pub fn parse_cases(text: &str, file: &str) -> Result<Vec<Case>, IoError> {
    let table = Table::read(text, file, &CASE_COLUMNS)?;
    table
        .rows()
        .map(|row| {
            let mut case = Case::new(row.text("id"));
            if case.id.is_empty() {
                return Err(row.error("id", "id is missing"));
            }
            case.display_name = row.text("name").to_string();
            case.member_count = row.parse("member_count")?;
            case.employable_count = row.parse("employable_count")?;
            case.attributes.languages = row.set("languages");
            case.attributes.nationality = row.text("nationality").to_string();
            case.attributes.flags = row.flags("flags")?;
            case.attributes.levels = row.levels("levels")?;
            case.preference_ranks = row.list("prefs");
            case.refusals = row.set("refusals");
            for link in row.list("crossrefs") {
                let parsed = match link.split_once(':') {
                    Some(("c", id)) if !id.is_empty() => CrossRef::Case(id.to_string()),
                    Some(("l", id)) if !id.is_empty() => CrossRef::Location(id.to_string()),
                    _ => {
                        return Err(row.error("crossrefs", format!("cross-reference {link:?} needs a c: or l: prefix")))
                    }
                };
                case.cross_refs.insert(parsed);
            }
            Ok(case)
        })
        .collect()
}

pub fn write_cases(cases: &[Case]) -> String {
    let mut w = writer();
    w.write_record(CASE_COLUMNS).expect("in-memory csv");
    for c in cases {
        let flags: Vec<String> = c.attributes.flags.iter().map(|f| f.as_str().to_string()).collect();
        let links: Vec<String> = c
            .cross_refs
            .iter()
            .map(|l| match l {
                CrossRef::Case(id) => format!("c:{id}"),
                CrossRef::Location(id) => format!("l:{id}"),
            })
            .collect();
        w.write_record([
            c.id.clone(),
            c.display_name.clone(),
            c.member_count.to_string(),
            c.employable_count.to_string(),
            join(&c.attributes.languages),
            c.attributes.nationality.clone(),
            join(&flags),
            join_levels(&c.attributes.levels),
            join(&c.preference_ranks),
            join(&c.refusals),
            join(&links),
        ])
        .expect("in-memory csv");
    }
    finish(w)
}

pub fn parse_locations(text: &str, file: &str) -> Result<Vec<Location>, IoError> {
    let table = Table::read(text, file, &LOCATION_COLUMNS)?;
    table
        .rows()
        .map(|row| {
            let id = row.text("id");
            if id.is_empty() {
                return Err(row.error("id", "id is missing"));
            }
            let mut loc = Location::new(id, row.parse("case_capacity")?, row.parse("member_capacity")?);
            loc.display_name = row.text("name").to_string();
            loc.supported_languages = row.set("languages");
            loc.services = row.set("services");
            loc.desired_levels = row.levels("desired_levels")?;
            Ok(loc)
        })
        .collect()
}

pub fn write_locations(locations: &[Location]) -> String {
    let mut w = writer();
    w.write_record(LOCATION_COLUMNS).expect("in-memory csv");
    for l in locations {
        w.write_record([
            l.id.clone(),
            l.display_name.clone(),
            l.case_capacity.to_string(),
            l.member_capacity.to_string(),
            join(&l.supported_languages),
            join(&l.services),
            join_levels(&l.desired_levels),
        ])
        .expect("in-memory csv");
    }
    finish(w)
}

pub fn parse_history(text: &str, file: &str) -> Result<Vec<HistoryRecord>, IoError> {
    let table = Table::read(text, file, &HISTORY_COLUMNS)?;
    table
        .rows()
        .map(|row| {
            Ok(HistoryRecord {
                case_id: row.text("id").to_string(),
                member_count: row.parse("member_count")?,
                languages: row.set("languages"),
                flags: row.flags("flags")?,
                location_id: row.parse("location_id")?,
                employed: row.boolean("employed")?,
            })
        })
        .collect()
}

pub fn write_history(records: &[HistoryRecord]) -> String {
    let mut w = writer();
    w.write_record(HISTORY_COLUMNS).expect("in-memory csv");
    for r in records {
        let flags: Vec<String> = r.flags.iter().map(|f| f.as_str().to_string()).collect();
        w.write_record([
            r.case_id.clone(),
            r.member_count.to_string(),
            join(&r.languages),
            join(&flags),
            r.location_id.clone(),
            if r.employed { "1" } else { "0" }.to_string(),
        ])
        .expect("in-memory csv");
    }
    finish(w)
}

/// Rows without a duration are rejected; `selected` defaults to true when blank.
pub fn parse_meetings(text: &str, file: &str) -> Result<Vec<Meeting>, IoError> {
    let table = Table::read(text, file, &MEETING_COLUMNS[..4])?;
    table
        .rows()
        .map(|row| {
            let client_id = row.text("client_id");
            if client_id.is_empty() {
                return Err(row.error("client_id", "client_id is missing"));
            }
            let selected = match row.optional("selected") {
                None | Some("") => true,
                Some(raw) => {
                    parse_bool(raw).ok_or_else(|| row.error("selected", format!("bad selected value {raw:?}")))?
                }
            };
            let meeting = Meeting {
                client_id: client_id.to_string(),
                latitude: row.parse("lat")?,
                longitude: row.parse("lon")?,
                duration_minutes: row.parse("duration_minutes")?,
                selected,
            };
            meeting.validate().map_err(|e| row.error("client_id", e.to_string()))?;
            Ok(meeting)
        })
        .collect()
}

pub fn write_meetings(meetings: &[Meeting]) -> String {
    let mut w = writer();
    w.write_record(MEETING_COLUMNS).expect("in-memory csv");
    for m in meetings {
        w.write_record([
            m.client_id.clone(),
            m.latitude.to_string(),
            m.longitude.to_string(),
            m.duration_minutes.to_string(),
            if m.selected { "1" } else { "0" }.to_string(),
        ])
        .expect("in-memory csv");
    }
    finish(w)
}

pub fn parse_locks(text: &str, file: &str) -> Result<BTreeMap<String, String>, IoError> {
    let table = Table::read(text, file, &LOCK_COLUMNS)?;
    let mut locks = BTreeMap::new();
    for row in table.rows() {
        let case: String = row.parse("case_id")?;
        let loc: String = row.parse("location_id")?;
        if locks.insert(case.clone(), loc).is_some() {
            return Err(row.error("case_id", format!("case {case} is locked twice")));
        }
    }
    Ok(locks)
}

pub fn write_locks(locks: &BTreeMap<String, String>) -> String {
    let mut w = writer();
    w.write_record(LOCK_COLUMNS).expect("in-memory csv");
    for (c, l) in locks {
        w.write_record([c, l]).expect("in-memory csv");
    }
    finish(w)
}

/// Reads scores for every (case, location) pair of `instance`.
/// Compatibility is recomputed from the instance; the file's
/// `compatible` and `reasons` columns are informational.
pub fn parse_matrix(text: &str, file: &str, instance: &Instance) -> Result<ScoreMatrix, IoError> {
    let table = Table::read(text, file, &MATRIX_COLUMNS[..3])?;
    let index = instance.index();
    let n_loc = instance.locations.len();
    let mut scores: Vec<Option<f64>> = vec![None; instance.cases.len() * n_loc];
    for row in table.rows() {
        let case = row.text("case_id");
        let loc = row.text("location_id");
        let i = index
            .case(case)
            .ok_or_else(|| row.error("case_id", format!("unknown case {case}")))?;
        let j = index
            .location(loc)
            .ok_or_else(|| row.error("location_id", format!("unknown location {loc}")))?;
        let v: f64 = row.parse("score")?;
        if scores[i * n_loc + j].replace(v).is_some() {
            return Err(row.error("case_id", format!("pair ({case}, {loc}) appears twice")));
        }
    }
    let missing = |i: usize, j: usize| IoError::Parse {
        file: file.to_string(),
        line: 0,
        column: 0,
        reason: format!("no score for ({}, {})", instance.cases[i].id, instance.locations[j].id),
    };
    ScoreMatrix::from_fn::<IoError>(instance, |i, j, _| scores[i * n_loc + j].ok_or_else(|| missing(i, j)))
}

impl From<MatrixError> for IoError {
    fn from(e: MatrixError) -> Self {
        IoError::Score(e.to_string())
    }
}

pub fn write_matrix(matrix: &ScoreMatrix) -> String {
    let mut w = writer();
    w.write_record(MATRIX_COLUMNS).expect("in-memory csv");
    for (i, case) in matrix.case_ids.iter().enumerate() {
        for (j, loc) in matrix.location_ids.iter().enumerate() {
            let reasons: Vec<&str> = matrix.reasons(i, j).iter().map(|r| r.as_str()).collect();
            w.write_record([
                case.clone(),
                loc.clone(),
                matrix.score(i, j).to_string(),
                if matrix.is_compatible(i, j) { "1" } else { "0" }.to_string(),
                reasons.join("|"),
            ])
            .expect("in-memory csv");
        }
    }
    finish(w)
}
