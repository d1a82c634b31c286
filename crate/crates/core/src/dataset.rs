//! Crash-record schema, CSV input, cleaning, one-hot encoding and
//! train/test splitting.

use std::fmt;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;
use crate::NUM_CLASSES;

/// Crash outcome, coded 0 (property damage only) through 3 (fatality).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SeverityLevel(u8);

impl SeverityLevel {
    pub const PROPERTY_DAMAGE_ONLY: SeverityLevel = SeverityLevel(0);
    pub const MINOR_INJURY: SeverityLevel = SeverityLevel(1);
    pub const SERIOUS_INJURY: SeverityLevel = SeverityLevel(2);
    pub const FATALITY: SeverityLevel = SeverityLevel(3);

    pub const ALL: [SeverityLevel; NUM_CLASSES] = [
        Self::PROPERTY_DAMAGE_ONLY,
        Self::MINOR_INJURY,
        Self::SERIOUS_INJURY,
        Self::FATALITY,
    ];

    pub fn new(code: i64) -> Option<Self> {
        (0..NUM_CLASSES as i64)
            .contains(&code)
            .then_some(SeverityLevel(code as u8))
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::new(index as i64)
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn description(self) -> &'static str {
        match self.0 {
            0 => "Property Damage Only (No Apparent Injury)",
            1 => "Suspected Minor Injury, Possible Injury",
            2 => "Suspected Serious Injury",
            _ => "Fatality",
        }
    }
}

impl fmt::Display for SeverityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariableKind {
    Categorical,
    Count,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeDomain {
    Set(&'static [i32]),
    /// Inclusive range.
    Range(i32, i32),
}

impl CodeDomain {
    pub fn contains(&self, code: i32) -> bool {
        match *self {
            CodeDomain::Set(codes) => codes.contains(&code),
            CodeDomain::Range(lo, hi) => (lo..=hi).contains(&code),
        }
    }

    pub fn codes(&self) -> Vec<i32> {
        match *self {
            CodeDomain::Set(codes) => codes.to_vec(),
            CodeDomain::Range(lo, hi) => (lo..=hi).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            CodeDomain::Set(codes) => codes.len(),
            CodeDomain::Range(lo, hi) => (hi - lo + 1) as usize,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableSchema {
    /// CSV column name.
    pub name: &'static str,
    /// Human readable name, used in reports.
    pub label: &'static str,
    pub kind: VariableKind,
    pub valid_codes: CodeDomain,
}

const BINARY: CodeDomain = CodeDomain::Set(&[0, 1]);

// Code 0 ("not provided") is admitted wherever the summary table's minimum
// reaches it even if the sub-classification list omits it.
static PREDICTORS: [VariableSchema; 14] = [
    VariableSchema {
        name: "weather_condition",
        label: "Weather Condition",
        kind: VariableKind::Categorical,
        valid_codes: CodeDomain::Set(&[1, 3, 4, 5, 6, 7, 8, 9, 10, 11]),
    },
    VariableSchema {
        name: "light_condition",
        label: "Light Condition",
        kind: VariableKind::Categorical,
        valid_codes: CodeDomain::Set(&[1, 2, 3, 4, 5, 6, 7]),
    },
    VariableSchema {
        name: "road_type",
        label: "Road Type",
        kind: VariableKind::Categorical,
        valid_codes: CodeDomain::Set(&[0, 1, 2, 3, 4, 5]),
    },
    VariableSchema {
        name: "first_harmful_event_location",
        label: "First Harmful Event",
        kind: VariableKind::Categorical,
        valid_codes: CodeDomain::Set(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]),
    },
    VariableSchema {
        name: "traffic_control_device",
        label: "Traffic Control Device",
        kind: VariableKind::Categorical,
        valid_codes: CodeDomain::Set(&[0, 1, 2, 3, 4, 5, 6]),
    },
    VariableSchema {
        name: "traffic_control_type",
        label: "Traffic Control Type",
        kind: VariableKind::Categorical,
        valid_codes: CodeDomain::Set(&[
            0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17,
        ]),
    },
    VariableSchema {
        name: "pedestrian_action",
        label: "Pedestrian Action",
        kind: VariableKind::Categorical,
        valid_codes: CodeDomain::Set(&[0, 1, 2, 3]),
    },
    VariableSchema {
        name: "alcohol_condition",
        label: "Alcohol Condition",
        kind: VariableKind::Binary,
        valid_codes: BINARY,
    },
    VariableSchema {
        name: "drug_condition",
        label: "Drug Condition",
        kind: VariableKind::Binary,
        valid_codes: BINARY,
    },
    VariableSchema {
        name: "young_driver_condition",
        label: "Young Driver Condition",
        kind: VariableKind::Binary,
        valid_codes: BINARY,
    },
    VariableSchema {
        name: "belt_condition",
        label: "Belt Condition",
        kind: VariableKind::Binary,
        valid_codes: BINARY,
    },
    VariableSchema {
        name: "night_condition",
        label: "Night",
        kind: VariableKind::Binary,
        valid_codes: BINARY,
    },
    VariableSchema {
        name: "area_type",
        label: "Area Type",
        kind: VariableKind::Binary,
        valid_codes: BINARY,
    },
    VariableSchema {
        name: "vehicle_count",
        label: "Vehicle Count",
        kind: VariableKind::Count,
        valid_codes: CodeDomain::Range(1, 9),
    },
];

pub static SEVERITY_SCHEMA: VariableSchema = VariableSchema {
    name: "severity",
    label: "Crash Severity",
    kind: VariableKind::Categorical,
    valid_codes: CodeDomain::Set(&[0, 1, 2, 3]),
};

/// The 14 predictor variables, in schema order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variable {
    WeatherCondition,
    LightCondition,
    RoadType,
    FirstHarmfulEventLocation,
    TrafficControlDevice,
    TrafficControlType,
    PedestrianAction,
    AlcoholCondition,
    DrugCondition,
    YoungDriverCondition,
    BeltCondition,
    NightCondition,
    AreaType,
    VehicleCount,
}

pub const N_PREDICTORS: usize = 14;

impl Variable {
    pub const ALL: [Variable; N_PREDICTORS] = [
        Variable::WeatherCondition,
        Variable::LightCondition,
        Variable::RoadType,
        Variable::FirstHarmfulEventLocation,
        Variable::TrafficControlDevice,
        Variable::TrafficControlType,
        Variable::PedestrianAction,
        Variable::AlcoholCondition,
        Variable::DrugCondition,
        Variable::YoungDriverCondition,
        Variable::BeltCondition,
        Variable::NightCondition,
        Variable::AreaType,
        Variable::VehicleCount,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn schema(self) -> &'static VariableSchema {
        &PREDICTORS[self.index()]
    }

    pub fn name(self) -> &'static str {
        self.schema().name
    }

    pub fn label(self) -> &'static str {
        self.schema().label
    }

    pub fn from_name(name: &str) -> Option<Variable> {
        Variable::ALL.iter().copied().find(|v| v.name() == name)
    }

    /// Number of one-hot columns this variable expands to.
    pub fn encoded_width(self) -> usize {
        match self {
            Variable::VehicleCount => VEHICLE_BUCKETS,
            v => v.schema().valid_codes.len(),
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn predictor_schema() -> &'static [VariableSchema; N_PREDICTORS] {
    &PREDICTORS
}

/// CSV header names: the predictors in schema order, then `severity`.
pub fn column_names() -> Vec<&'static str> {
    PREDICTORS
        .iter()
        .map(|s| s.name)
        .chain(std::iter::once(SEVERITY_SCHEMA.name))
        .collect()
}

const N_FIELDS: usize = N_PREDICTORS + 1;
const SEVERITY_FIELD: usize = N_PREDICTORS;
const VEHICLE_BUCKETS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordIssue {
    Missing(&'static str),
    InvalidDomain(&'static str),
}

/// One crash. Fields that were empty in the input hold 0 and are marked in
/// the missing mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CrashRecord {
    codes: [i32; N_FIELDS],
    missing: u16,
}

impl CrashRecord {
    pub fn new(predictors: [i32; N_PREDICTORS], severity: SeverityLevel) -> Self {
        let mut codes = [0; N_FIELDS];
        codes[..N_PREDICTORS].copy_from_slice(&predictors);
        codes[SEVERITY_FIELD] = i32::from(severity.code());
        CrashRecord { codes, missing: 0 }
    }

    /// Builds a record from raw codes without domain checks.
    pub fn from_raw(predictors: [i32; N_PREDICTORS], severity: i32) -> Self {
        let mut codes = [0; N_FIELDS];
        codes[..N_PREDICTORS].copy_from_slice(&predictors);
        codes[SEVERITY_FIELD] = severity;
        CrashRecord { codes, missing: 0 }
    }

    pub fn get(&self, var: Variable) -> i32 {
        self.codes[var.index()]
    }

    pub fn set(&mut self, var: Variable, code: i32) {
        self.codes[var.index()] = code;
        self.missing &= !(1 << var.index());
    }

    pub fn predictors(&self) -> &[i32] {
        &self.codes[..N_PREDICTORS]
    }

    pub fn severity_code(&self) -> i32 {
        self.codes[SEVERITY_FIELD]
    }

    pub fn severity(&self) -> Option<SeverityLevel> {
        if self.missing & (1 << SEVERITY_FIELD) != 0 {
            return None;
        }
        SeverityLevel::new(i64::from(self.severity_code()))
    }

    /// First problem found, in column order; `None` for a conforming record.
    pub fn issue(&self) -> Option<RecordIssue> {
        for (i, name) in column_names().into_iter().enumerate() {
            if self.missing & (1 << i) != 0 {
                return Some(RecordIssue::Missing(name));
            }
        }
        for var in Variable::ALL {
            if !var.schema().valid_codes.contains(self.get(var)) {
                return Some(RecordIssue::InvalidDomain(var.name()));
            }
        }
        if !SEVERITY_SCHEMA.valid_codes.contains(self.severity_code()) {
            return Some(RecordIssue::InvalidDomain(SEVERITY_SCHEMA.name));
        }
        None
    }

    pub fn is_valid(&self) -> bool {
        self.issue().is_none()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    records: Vec<CrashRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CleanReport {
    pub kept: usize,
    pub dropped_missing: usize,
    pub dropped_invalid_domain: usize,
}

impl CleanReport {
    pub fn dropped(&self) -> usize {
        self.dropped_missing + self.dropped_invalid_domain
    }
}

impl Dataset {
    pub fn new(records: Vec<CrashRecord>) -> Self {
        Dataset { records }
    }

    pub fn records(&self) -> &[CrashRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn schema(&self) -> &'static [VariableSchema; N_PREDICTORS] {
        &PREDICTORS
    }

    /// Indices of records that `clean` would drop.
    pub fn flagged(&self) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.is_valid())
            .map(|(i, _)| i)
            .collect()
    }

    /// Severity per record. Only meaningful on a clean dataset.
    pub fn labels(&self) -> Vec<SeverityLevel> {
        self.records
            .iter()
            .map(|r| r.severity().unwrap_or(SeverityLevel::PROPERTY_DAMAGE_ONLY))
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i]).collect(),
        }
    }

    pub fn parse_csv(text: &str) -> Result<Dataset> {
        parse_csv(text)
    }

    pub fn to_csv(&self) -> String {
        let mut out = column_names().join(",");
        out.push('\n');
        for r in &self.records {
            let line: Vec<String> = (0..N_FIELDS)
                .map(|i| {
                    if r.missing & (1 << i) != 0 {
                        String::new()
                    } else {
                        r.codes[i].to_string()
                    }
                })
                .collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn clean(&self) -> Result<(Dataset, CleanReport)> {
        let mut report = CleanReport::default();
        let mut kept = Vec::with_capacity(self.records.len());
        for r in &self.records {
            match r.issue() {
                None => kept.push(*r),
                Some(RecordIssue::Missing(_)) => report.dropped_missing += 1,
                Some(RecordIssue::InvalidDomain(_)) => report.dropped_invalid_domain += 1,
            }
        }
        if kept.is_empty() {
            return Err(Error::EmptyResult);
        }
        report.kept = kept.len();
        Ok((Dataset { records: kept }, report))
    }

    /// One-hot encodes the selected predictors. Column order follows the
    /// schema regardless of the order of `selected`.
    pub fn encode<S: AsRef<str>>(&self, selected: &[S]) -> Result<EncodedMatrix> {
        let mut vars = Vec::with_capacity(selected.len());
        for name in selected {
            let name = name.as_ref();
            let var = Variable::from_name(name)
                .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
            if !vars.contains(&var) {
                vars.push(var);
            }
        }
        if vars.is_empty() {
            return Err(Error::EmptySelection);
        }
        vars.sort();

        let mut column_names = Vec::new();
        let mut groups = Vec::new();
        for &var in &vars {
            let start = column_names.len();
            if var == Variable::VehicleCount {
                for b in ["1", "2", "3", "4+"] {
                    column_names.push(format!("vehicle_count_bucket={b}"));
                }
            } else {
                for code in var.schema().valid_codes.codes() {
                    column_names.push(format!("{}={}", var.name(), code));
                }
            }
            groups.push(ColumnGroup {
                variable: var.name().to_string(),
                start,
                len: column_names.len() - start,
            });
        }

        let d = column_names.len();
        let mut values = vec![0u8; self.records.len() * d];
        let mut labels = Vec::with_capacity(self.records.len());
        for (i, r) in self.records.iter().enumerate() {
            let row = &mut values[i * d..(i + 1) * d];
            for (&var, group) in vars.iter().zip(&groups) {
                let code = r.get(var);
                let offset = if var == Variable::VehicleCount {
                    (code.clamp(1, 4) - 1) as usize
                } else {
                    var.schema()
                        .valid_codes
                        .codes()
                        .iter()
                        .position(|&c| c == code)
                        .ok_or_else(|| Error::MalformedRow {
                            line: i as u64,
                            reason: format!("{} code {code} outside its domain", var.name()),
                        })?
                };
                row[group.start + offset] = 1;
            }
            labels.push(r.severity().ok_or_else(|| Error::MalformedRow {
                line: i as u64,
                reason: format!("severity code {} outside its domain", r.severity_code()),
            })?);
        }
        Ok(EncodedMatrix {
            column_names,
            groups,
            n_cols: d,
            values,
            labels,
        })
    }
}

/// Parses CSV text whose header holds the 15 schema column names in any
/// order. Out-of-domain codes are kept; `clean` removes them. Empty fields
/// are recorded as missing.
pub fn parse_csv(text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::MalformedRow {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let names = column_names();
    let mut positions = [0usize; N_FIELDS];
    for (slot, name) in positions.iter_mut().zip(&names) {
        *slot = header
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }

    let mut records = Vec::new();
    for result in reader.records() {
        let row = result.map_err(|e| Error::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() == 1 && row.get(0) == Some("") {
            continue;
        }
        if row.len() != header.len() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", header.len(), row.len()),
            });
        }
        let mut codes = [0i32; N_FIELDS];
        let mut missing = 0u16;
        for (i, &pos) in positions.iter().enumerate() {
            let field = &row[pos];
            if field.is_empty() {
                missing |= 1 << i;
                continue;
            }
            codes[i] = field.parse().map_err(|_| Error::MalformedRow {
                line,
                reason: format!("`{}` is not an integer ({})", field, names[i]),
            })?;
        }
        records.push(CrashRecord { codes, missing });
    }
    Ok(Dataset { records })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnGroup {
    pub variable: String,
    pub start: usize,
    pub len: usize,
}

/// Binary design matrix with one column group per source variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedMatrix {
    column_names: Vec<String>,
    groups: Vec<ColumnGroup>,
    n_cols: usize,
    values: Vec<u8>,
    labels: Vec<SeverityLevel>,
}

impl EncodedMatrix {
    /// Assembles a matrix from parts, checking shape, binarity and the
    /// one-hot property of every group.
    pub fn from_parts(
        column_names: Vec<String>,
        groups: Vec<ColumnGroup>,
        rows: Vec<Vec<u8>>,
        labels: Vec<SeverityLevel>,
    ) -> Result<Self> {
        let d = column_names.len();
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: labels.len(),
            });
        }
        let mut covered = 0;
        for g in &groups {
            if g.start != covered || g.len == 0 {
                return Err(Error::InvalidParameter(format!(
                    "column group `{}` does not tile the columns",
                    g.variable
                )));
            }
            covered += g.len;
        }
        if covered != d {
            return Err(Error::InvalidParameter(
                "column groups do not cover every column".into(),
            ));
        }
        let mut values = Vec::with_capacity(rows.len() * d);
        for row in &rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        let m = EncodedMatrix {
            column_names,
            groups,
            n_cols: d,
            values,
            labels,
        };
        if let Some(i) = (0..m.n_rows()).find(|&i| !m.row_is_one_hot(m.row(i))) {
            return Err(Error::InvalidParameter(format!(
                "row {i} is not a valid one-hot encoding"
            )));
        }
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn groups(&self) -> &[ColumnGroup] {
        &self.groups
    }

    pub fn labels(&self) -> &[SeverityLevel] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&v| f64::from(v)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> + '_ {
        // chunks_exact on an empty width would panic
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn row_is_one_hot(&self, row: &[u8]) -> bool {
        row.iter().all(|&v| v <= 1)
            && self
                .groups
                .iter()
                .all(|g| row[g.start..g.start + g.len].iter().map(|&v| v as usize).sum::<usize>() == 1)
    }

    /// Every entry binary and every group one-hot.
    pub fn is_one_hot(&self) -> bool {
        self.rows().all(|r| self.row_is_one_hot(r))
    }

    pub fn select_rows(&self, indices: &[usize]) -> EncodedMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        EncodedMatrix {
            column_names: self.column_names.clone(),
            groups: self.groups.clone(),
            n_cols: self.n_cols,
            values,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Appends rows that share this matrix's layout. Callers guarantee the
    /// one-hot property.
    pub(crate) fn push_row(&mut self, row: &[u8], label: SeverityLevel) {
        debug_assert_eq!(row.len(), self.n_cols);
        self.values.extend_from_slice(row);
        self.labels.push(label);
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        crate::balance::class_counts(&self.labels)
    }
}

/// Row indices for a train/test partition. `|test| = round(n * test_fraction)`.
/// Stratified mode allocates the test quota across classes by largest
/// remainder, so each class is within one row of its exact share.
pub fn split_indices(
    labels: &[SeverityLevel],
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Vec<usize>, Vec<usize>)> {
    const MIN_ROWS: usize = 8;
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = labels.len();
    if n < MIN_ROWS {
        return Err(Error::TooFewRows {
            needed: MIN_ROWS,
            got: n,
        });
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    let mut rng = rng::seeded(rng::derive_seed(seed, "split"));
    let mut test = Vec::with_capacity(n_test);

    if stratified {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
        for (i, l) in labels.iter().enumerate() {
            by_class[l.index()].push(i);
        }
        if by_class.iter().filter(|c| !c.is_empty()).count() < 2 {
            return Err(Error::SingleClassStratify);
        }
        let exact: Vec<f64> = by_class
            .iter()
            .map(|c| c.len() as f64 * n_test as f64 / n as f64)
            .collect();
        let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut remaining = n_test - quota.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..NUM_CLASSES).collect();
        // stable sort keeps lower class first among equal remainders
        order.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
        });
        for &c in order.iter().cycle() {
            if remaining == 0 {
                break;
            }
            if quota[c] < by_class[c].len() {
                quota[c] += 1;
                remaining -= 1;
            }
        }
        for (members, q) in by_class.iter_mut().zip(quota) {
            members.shuffle(&mut rng);
            test.extend_from_slice(&members[..q]);
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        test.extend_from_slice(&all[..n_test]);
    }

    let mut is_test = vec![false; n];
    for &i in &test {
        is_test[i] = true;
    }
    let test: Vec<usize> = (0..n).filter(|&i| is_test[i]).collect();
    let train: Vec<usize> = (0..n).filter(|&i| !is_test[i]).collect();
    Ok((train, test))
}

pub fn split(
    matrix: &EncodedMatrix,
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(EncodedMatrix, EncodedMatrix)> {
    let (train, test) = split_indices(matrix.labels(), test_fraction, seed, stratified)?;
    Ok((matrix.select_rows(&train), matrix.select_rows(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header() -> String {
        column_names().join(",")
    }

    fn valid_record() -> CrashRecord {
        CrashRecord::new([1, 2, 1, 1, 1, 6, 0, 0, 0, 0, 0, 0, 1, 2], SeverityLevel::MINOR_INJURY)
    }

    #[test]
    fn parses_two_records() {
        let text = format!(
            "{}\n1,2,1,1,1,6,0,0,0,0,0,0,1,2,1\n5,4,0,4,6,1,0,1,0,1,1,1,0,1,3\n",
            header()
        );
        let ds = parse_csv(&text).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.records()[1].get(Variable::LightCondition), 4);
        assert_eq!(ds.records()[1].severity(), Some(SeverityLevel::FATALITY));
        assert!(ds.flagged().is_empty());
    }

    #[test]
    fn header_order_is_free() {
        let mut names = column_names();
        names.reverse();
        let mut values: Vec<String> = valid_record().predictors().iter().map(|v| v.to_string()).collect();
        values.push("1".into());
        values.reverse();
        let text = format!("{}\n{}\n", names.join(","), values.join(","));
        let ds = parse_csv(&text).unwrap();
        assert_eq!(ds.records()[0], valid_record());
    }

    #[test]
    fn missing_column_is_reported() {
        let names: Vec<_> = column_names().into_iter().filter(|n| *n != "vehicle_count").collect();
        let err = parse_csv(&format!("{}\n", names.join(","))).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "vehicle_count"));
    }

    #[test]
    fn malformed_rows_carry_line_numbers() {
        let text = format!("{}\n1,2,1,1,1,6,0,0,0,0,0,0,1,2,1\n1,x,1,1,1,6,0,0,0,0,0,0,1,2,1\n", header());
        match parse_csv(&text).unwrap_err() {
            Error::MalformedRow { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
        let text = format!("{}\n1,2,1\n", header());
        assert!(matches!(parse_csv(&text), Err(Error::MalformedRow { line: 2, .. })));
    }

    #[test]
    fn unlisted_weather_code_is_flagged_not_rejected() {
        let text = format!("{}\n2,2,1,1,1,6,0,0,0,0,0,0,1,2,0\n", header());
        let ds = parse_csv(&text).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.flagged(), vec![0]);
        assert_eq!(
            ds.records()[0].issue(),
            Some(RecordIssue::InvalidDomain("weather_condition"))
        );
    }

    #[test]
    fn clean_identity_on_valid_data() {
        let ds = Dataset::new(vec![valid_record(); 4]);
        let (cleaned, report) = ds.clean().unwrap();
        assert_eq!(cleaned, ds);
        assert_eq!(report.dropped(), 0);
    }

    #[test]
    fn clean_counts_invalid_domain() {
        let mut records = vec![valid_record(); 10];
        for r in records.iter_mut().take(3) {
            r.set(Variable::LightCondition, 9);
        }
        let (cleaned, report) = Dataset::new(records).clean().unwrap();
        assert_eq!(cleaned.len(), 7);
        assert_eq!(report.dropped_invalid_domain, 3);
        assert_eq!(report.dropped_missing, 0);
    }

    #[test]
    fn clean_drops_missing_fields() {
        let text = format!("{}\n1,2,1,1,1,6,0,0,0,0,0,0,1,,1\n1,2,1,1,1,6,0,0,0,0,0,0,1,2,1\n", header());
        let (cleaned, report) = parse_csv(&text).unwrap().clean().unwrap();
        assert_eq!(cleaned.len(), 1);
        assert_eq!(report.dropped_missing, 1);
    }

    #[test]
    fn clean_everything_invalid() {
        let mut r = valid_record();
        r.set(Variable::VehicleCount, 0);
        assert!(matches!(Dataset::new(vec![r; 3]).clean(), Err(Error::EmptyResult)));
    }

    #[test]
    fn encode_single_binary_variable() {
        let mut r = valid_record();
        r.set(Variable::AreaType, 1);
        let m = Dataset::new(vec![r]).encode(&["area_type"]).unwrap();
        assert_eq!(m.column_names(), ["area_type=0", "area_type=1"]);
        assert_eq!(m.row(0), [0, 1]);
    }

    #[test]
    fn encode_vehicle_count_buckets() {
        let mut r = valid_record();
        r.set(Variable::VehicleCount, 7);
        let m = Dataset::new(vec![r]).encode(&["vehicle_count"]).unwrap();
        assert_eq!(m.row(0), [0, 0, 0, 1]);
        assert_eq!(m.column_names()[3], "vehicle_count_bucket=4+");
    }

    #[test]
    fn encode_eleven_variable_width() {
        // Hand count over the code lists: first harmful event 10, road type 6
        // (0..5), weather 10, belt 2, light 7, alcohol 2, area 2, traffic
        // control device 7, young driver 2, night 2 = 50; plus 4 buckets.
        let selected = [
            "first_harmful_event_location",
            "vehicle_count",
            "road_type",
            "weather_condition",
            "belt_condition",
            "light_condition",
            "alcohol_condition",
            "area_type",
            "traffic_control_device",
            "young_driver_condition",
            "night_condition",
        ];
        let m = Dataset::new(vec![valid_record()]).encode(&selected).unwrap();
        assert_eq!(m.n_cols(), 54);
        assert_eq!(m.groups().len(), 11);
        // schema order, not selection order
        assert_eq!(m.groups()[0].variable, "weather_condition");
    }

    #[test]
    fn encode_unknown_variable() {
        let err = Dataset::new(vec![valid_record()]).encode(&["speed"]).unwrap_err();
        assert!(matches!(err, Error::UnknownVariable(v) if v == "speed"));
    }

    fn labels_from_counts(counts: &[usize]) -> Vec<SeverityLevel> {
        counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(SeverityLevel::from_index(c).unwrap(), n))
            .collect()
    }

    #[test]
    fn split_sizes() {
        let labels = labels_from_counts(&[50, 50]);
        let (train, test) = split_indices(&labels, 0.25, 3, false).unwrap();
        assert_eq!((train.len(), test.len()), (75, 25));
        let (train, test) = split_indices(&labels, 0.25, 3, true).unwrap();
        assert_eq!((train.len(), test.len()), (75, 25));
    }

    #[test]
    fn split_is_deterministic() {
        let labels = labels_from_counts(&[30, 20, 10, 5]);
        for stratified in [false, true] {
            let a = split_indices(&labels, 0.3, 11, stratified).unwrap();
            let b = split_indices(&labels, 0.3, 11, stratified).unwrap();
            assert_eq!(a, b);
        }
        assert_ne!(
            split_indices(&labels, 0.3, 11, true).unwrap(),
            split_indices(&labels, 0.3, 12, true).unwrap()
        );
    }

    #[test]
    fn stratified_split_per_class_counts() {
        // 80 * 0.25 = 20 and 20 * 0.25 = 5 exactly
        let labels = labels_from_counts(&[80, 20]);
        let (_, test) = split_indices(&labels, 0.25, 5, true).unwrap();
        let counts = crate::balance::class_counts(&test.iter().map(|&i| labels[i]).collect::<Vec<_>>());
        assert_eq!(counts, [20, 5, 0, 0]);
    }

    #[test]
    fn split_errors() {
        let labels = labels_from_counts(&[4, 3]);
        assert!(matches!(split_indices(&labels, 0.25, 0, true), Err(Error::TooFewRows { .. })));
        let labels = labels_from_counts(&[20]);
        assert!(matches!(split_indices(&labels, 0.25, 0, true), Err(Error::SingleClassStratify)));
        assert!(split_indices(&labels, 0.25, 0, false).is_ok());
        assert!(split_indices(&labels, 1.0, 0, false).is_err());
    }

    fn arb_record() -> impl Strategy<Value = CrashRecord> {
        let fields: Vec<BoxedStrategy<i32>> = Variable::ALL
            .iter()
            .map(|v| proptest::sample::select(v.schema().valid_codes.codes()).boxed())
            .collect();
        (fields, 0..4i64).prop_map(|(codes, sev)| {
            let mut arr = [0; N_PREDICTORS];
            arr.copy_from_slice(&codes);
            CrashRecord::new(arr, SeverityLevel::new(sev).unwrap())
        })
    }

    proptest! {
        #[test]
        fn csv_round_trip(records in proptest::collection::vec(arb_record(), 0..40)) {
            let ds = Dataset::new(records);
            prop_assert_eq!(parse_csv(&ds.to_csv()).unwrap(), ds);
        }

        #[test]
        fn encode_is_one_hot(records in proptest::collection::vec(arb_record(), 1..40)) {
            let ds = Dataset::new(records);
            let all: Vec<&str> = Variable::ALL.iter().map(|v| v.name()).collect();
            let m = ds.encode(&all).unwrap();
            prop_assert!(m.is_one_hot());
            let expected: usize = Variable::ALL.iter().map(|v| v.encoded_width()).sum();
            prop_assert_eq!(m.n_cols(), expected);
        }

        #[test]
        fn clean_is_idempotent(records in proptest::collection::vec(arb_record(), 1..30), bad in proptest::collection::vec((0usize..30, 0usize..14, -3i32..25), 0..10)) {
            let mut records = records;
            let n = records.len();
            for (i, v, code) in bad {
                records[i % n].set(Variable::ALL[v], code);
            }
            let ds = Dataset::new(records);
            if let Ok((once, _)) = ds.clean() {
                let (twice, report) = once.clean().unwrap();
                prop_assert_eq!(twice, once);
                prop_assert_eq!(report.dropped(), 0);
            }
        }

        #[test]
        fn split_partitions_rows(counts in proptest::collection::vec(1usize..30, 2..5), frac in 0.05f64..0.95, seed in any::<u64>(), stratified in any::<bool>()) {
            let labels = labels_from_counts(&counts);
            prop_assume!(labels.len() >= 8);
            let (train, test) = split_indices(&labels, frac, seed, stratified).unwrap();
            let n = labels.len();
            prop_assert_eq!(test.len(), (n as f64 * frac).round() as usize);
            let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
            all.sort();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            if stratified {
                let test_labels: Vec<_> = test.iter().map(|&i| labels[i]).collect();
                let got = crate::balance::class_counts(&test_labels);
                for (c, &cnt) in counts.iter().enumerate() {
                    let exact = cnt as f64 * test.len() as f64 / n as f64;
                    prop_assert!((got[c] as f64 - exact).abs() <= 1.0);
                }
            }
        }
    }
}
