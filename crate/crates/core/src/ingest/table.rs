use std::collections::BTreeSet;
use std::io::{Read, Write};

use crate::error::{CellError, Error, Result};
use crate::flow::{FlowLabel, FlowRecord};
use crate::ingest::matrix::FeatureMatrix;
use crate::ingest::schema::{ColumnKind, ColumnRef, DatasetSchema};

/// Unparsed cells, one inner vector per data line.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub schema: DatasetSchema,
    pub rows: Vec<Vec<String>>,
    /// Source line of each row (header is line 1).
    pub lines: Vec<u64>,
}

/// What to do with a row holding an unparseable or non-finite cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum BadRowPolicy {
    #[default]
    FailFast,
    DropRow,
}

/// Reads the header of a CSV source without consuming data rows.
pub fn read_header<R: Read>(source: R) -> Result<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let header = reader.headers().map_err(|e| csv_error(e, 1))?;
    Ok(header.iter().map(str::to_owned).collect())
}

pub fn parse_csv<R: Read>(source: R, schema: &DatasetSchema) -> Result<RawTable> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let header = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    if header.is_empty() {
        return Err(Error::Parse { line: 1, message: "missing header row".into() });
    }
    let expected = schema.column_names();
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        let detail = match got.iter().zip(&expected).position(|(a, b)| a != b) {
            Some(i) => format!("column {} is '{}', expected '{}'", i + 1, got[i], expected[i]),
            None => format!("{} columns, expected {}", got.len(), expected.len()),
        };
        return Err(Error::Schema(format!("header does not match schema '{}': {detail}", schema.name)));
    }

    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_error(e, line)
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != expected.len() {
            return Err(Error::Parse { line, message: format!("{} cells, expected {}", record.len(), expected.len()) });
        }
        rows.push(record.iter().map(str::to_owned).collect());
        lines.push(line);
    }
    Ok(RawTable { schema: schema.clone(), rows, lines })
}

fn csv_error(e: csv::Error, line: u64) -> Error {
    Error::Parse { line, message: e.to_string() }
}

fn parse_number(cell: &str) -> std::result::Result<f64, String> {
    let v: f64 = cell.trim().parse().map_err(|_| format!("'{cell}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{cell}' is not finite"))
    }
}

enum Extractor {
    Numeric(usize),
    OneHot(usize, Vec<String>),
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Converts to a feature matrix: numeric columns parsed, categorical
    /// columns one-hot encoded over their sorted distinct tokens, the class
    /// column mapped to labels, ignored columns dropped.
    pub fn to_feature_matrix(&self, policy: BadRowPolicy) -> Result<FeatureMatrix> {
        let schema = &self.schema;
        let mut extractors = Vec::new();
        let mut names = Vec::new();
        for (j, col) in schema.columns.iter().enumerate() {
            match col.kind {
                ColumnKind::Numeric => {
                    extractors.push(Extractor::Numeric(j));
                    names.push(col.name.clone());
                }
                ColumnKind::Categorical => {
                    let tokens: BTreeSet<&str> = self.rows.iter().map(|r| r[j].as_str()).collect();
                    let tokens: Vec<String> = tokens.into_iter().map(str::to_owned).collect();
                    names.extend(tokens.iter().map(|t| format!("{}={t}", col.name)));
                    extractors.push(Extractor::OneHot(j, tokens));
                }
                ColumnKind::Class | ColumnKind::Ignore => {}
            }
        }
        let class_idx = schema.class_index();

        let mut values = Vec::with_capacity(self.rows.len() * names.len());
        let mut labels = Vec::with_capacity(self.rows.len());
        let mut errors = Vec::new();
        let mut row_buf = Vec::with_capacity(names.len());
        for (row, &line) in self.rows.iter().zip(&self.lines) {
            row_buf.clear();
            let mut row_errors = Vec::new();
            for ex in &extractors {
                match ex {
                    Extractor::Numeric(j) => match parse_number(&row[*j]) {
                        Ok(v) => row_buf.push(v),
                        Err(message) => {
                            row_errors.push(CellError { line, column: schema.columns[*j].name.clone(), message })
                        }
                    },
                    Extractor::OneHot(j, tokens) => {
                        row_buf.extend(tokens.iter().map(|t| if *t == row[*j] { 1.0 } else { 0.0 }))
                    }
                }
            }
            let label = class_idx.and_then(|c| {
                let cell = row[c].trim();
                if cell == schema.class_positive {
                    Some(FlowLabel::Elephant)
                } else if cell == schema.class_negative {
                    Some(FlowLabel::Mouse)
                } else {
                    row_errors.push(CellError {
                        line,
                        column: schema.columns[c].name.clone(),
                        message: format!(
                            "class token '{cell}' is neither '{}' nor '{}'",
                            schema.class_positive, schema.class_negative
                        ),
                    });
                    None
                }
            });
            if row_errors.is_empty() {
                values.extend_from_slice(&row_buf);
                labels.extend(label);
            } else {
                errors.extend(row_errors);
                if policy == BadRowPolicy::FailFast {
                    break;
                }
            }
        }
        if policy == BadRowPolicy::FailFast && !errors.is_empty() {
            return Err(Error::Cells(errors));
        }
        if !errors.is_empty() {
            log::warn!("dropped rows with {} invalid cell(s); first: {}", errors.len(), errors[0]);
        }
        FeatureMatrix::new(values, names, class_idx.map(|_| labels))
    }

    /// Extracts the labeling quantities of each row via the schema roles.
    pub fn flow_records(&self) -> Result<Vec<FlowRecord>> {
        let roles = &self.schema.roles;
        if !roles.can_label() {
            return Err(Error::Schema(format!(
                "schema '{}' does not map duration, packet and byte columns",
                self.schema.name
            )));
        }
        let resolve = |r: &Option<ColumnRef>| -> Option<(usize, f64, String)> {
            r.as_ref().map(|r| (self.schema.index_of(&r.column).expect("validated role"), r.scale, r.column.clone()))
        };
        let duration = resolve(&roles.duration);
        let counters = [
            resolve(&roles.fwd_packets),
            resolve(&roles.bwd_packets),
            resolve(&roles.fwd_bytes),
            resolve(&roles.bwd_bytes),
        ];
        let protocol = roles.protocol.as_ref().and_then(|p| self.schema.index_of(p));

        let read = |row: &[String], line: u64, slot: &Option<(usize, f64, String)>| -> Result<f64> {
            match slot {
                None => Ok(0.0),
                Some((j, scale, name)) => {
                    let v = parse_number(&row[*j])
                        .map_err(|message| Error::Cells(vec![CellError { line, column: name.clone(), message }]))?;
                    if v < 0.0 {
                        return Err(Error::Cells(vec![CellError {
                            line,
                            column: name.clone(),
                            message: format!("negative value {v}"),
                        }]));
                    }
                    Ok(v * scale)
                }
            }
        };

        self.rows
            .iter()
            .zip(&self.lines)
            .map(|(row, &line)| {
                let mut counts = [0u64; 4];
                for (c, slot) in counts.iter_mut().zip(&counters) {
                    *c = read(row, line, slot)?.round() as u64;
                }
                Ok(FlowRecord {
                    duration: read(row, line, &duration)?,
                    total_fpackets: counts[0],
                    total_bpackets: counts[1],
                    total_fvolume: counts[2],
                    total_bvolume: counts[3],
                    protocol: protocol.map(|j| row[j].clone()).unwrap_or_default(),
                    ..Default::default()
                })
            })
            .collect()
    }

    /// Writes the table with its class column set to `labels`, appending a
    /// `class` column when the schema has none.
    pub fn write_labeled<W: Write>(&self, labels: &[FlowLabel], out: W) -> Result<DatasetSchema> {
        if labels.len() != self.rows.len() {
            return Err(Error::Shape(format!("{} labels for {} rows", labels.len(), self.rows.len())));
        }
        let schema = self.schema.with_class();
        let class_idx = schema.class_index().expect("with_class adds one");
        let appended = self.schema.class_index().is_none();
        let token = |l: FlowLabel| match l {
            FlowLabel::Elephant => schema.class_positive.as_str(),
            FlowLabel::Mouse => schema.class_negative.as_str(),
        };

        let mut w = csv::Writer::from_writer(out);
        w.write_record(schema.column_names())?;
        for (row, &label) in self.rows.iter().zip(labels) {
            let mut cells: Vec<&str> = row.iter().map(String::as_str).collect();
            if appended {
                cells.push(token(label));
            } else {
                cells[class_idx] = token(label);
            }
            w.write_record(&cells)?;
        }
        w.flush()?;
        Ok(schema)
    }
}
