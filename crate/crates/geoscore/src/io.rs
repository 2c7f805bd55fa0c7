//! CSV formats for populations, aggregate profiles and observed outcomes.
//!
//! All files are UTF-8, comma separated, with a header row. Class columns are
//! named `count_<label>` and appear best class first.
//!
//! ```text
//! population.csv  area,stratum,expected_total,count_A,...,count_E
//! profiles.csv    aggregate,stratum,demand
//! outcomes.csv    aggregate,count_A,...,count_E
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim, WriterBuilder};
use geoscore_core::{AggregateProfile, AreaPopulation, ClassCount, StratumPopulation};

use crate::error::{InputError, Result};

const COUNT_PREFIX: &str = "count_";

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| InputError::Open {
        path: path.to_path_buf(),
        source,
    })
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    ReaderBuilder::new().trim(Trim::All).from_reader(source)
}

fn csv_error(file: &str, err: csv::Error) -> InputError {
    let (line, message) = match err.kind() {
        csv::ErrorKind::UnequalLengths { pos, expected_len, len } => (
            pos.as_ref().map_or(0, |p| p.line()),
            format!("expected {expected_len} fields, found {len}"),
        ),
        csv::ErrorKind::Utf8 { pos, err } => (pos.as_ref().map_or(0, |p| p.line()), err.to_string()),
        _ => (err.position().map_or(0, |p| p.line()), err.to_string()),
    };
    InputError::Parse {
        file: file.into(),
        line,
        column: 0,
        message,
    }
}

fn line_of(record: &StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_u64(file: &str, record: &StringRecord, column: usize, name: &str) -> Result<u64> {
    let raw = record.get(column).unwrap_or("");
    raw.parse().map_err(|_| InputError::Parse {
        file: file.into(),
        line: line_of(record),
        column: column + 1,
        message: format!("{name}: `{raw}` is not a non-negative integer"),
    })
}

fn text_field(file: &str, record: &StringRecord, column: usize, name: &str) -> Result<String> {
    let raw = record.get(column).unwrap_or("");
    if raw.is_empty() {
        return Err(InputError::Parse {
            file: file.into(),
            line: line_of(record),
            column: column + 1,
            message: format!("{name} is empty"),
        });
    }
    Ok(raw.to_string())
}

/// Validates the leading fixed columns and returns the class labels that
/// follow them.
fn class_labels(file: &str, header: &StringRecord, fixed: &[&str]) -> Result<Vec<String>> {
    let bad = |message: String| InputError::Header {
        file: file.into(),
        message,
    };
    for (i, name) in fixed.iter().enumerate() {
        match header.get(i) {
            Some(h) if h == *name => {}
            Some(h) => return Err(bad(format!("column {} is `{h}`, expected `{name}`", i + 1))),
            None => return Err(bad(format!("missing column `{name}`"))),
        }
    }
    let labels: Vec<String> = header
        .iter()
        .skip(fixed.len())
        .map(|h| {
            h.strip_prefix(COUNT_PREFIX)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .ok_or_else(|| bad(format!("class column `{h}` must look like `{COUNT_PREFIX}<label>`")))
        })
        .collect::<Result<_>>()?;
    if labels.len() < 2 {
        return Err(bad(format!("need at least 2 class columns, found {}", labels.len())));
    }
    Ok(labels)
}

/// One population row as written in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopulationRow {
    pub line: u64,
    pub area: String,
    pub stratum: String,
    pub expected_total: u64,
    pub counts: Vec<u64>,
}

impl PopulationRow {
    pub fn count_sum(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// A parsed but not yet validated population file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopulationTable {
    pub file: String,
    pub class_labels: Vec<String>,
    pub rows: Vec<PopulationRow>,
}

/// How a row whose class counts disagree with its expected total is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TotalPolicy {
    /// Reject the file.
    #[default]
    Strict,
    /// Use the class-count sum as the total and report the row.
    TrustCounts,
}

/// A row accepted under [`TotalPolicy::TrustCounts`] despite a mismatch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Discrepancy {
    pub line: u64,
    pub stratum: String,
    pub printed_total: u64,
    pub count_sum: u64,
}

impl PopulationTable {
    /// Parses the file. Only syntax is checked here; see [`Self::issues`].
    pub fn read<R: Read>(file: &str, source: R) -> Result<Self> {
        let mut rdr = reader(source);
        let header = rdr.headers().map_err(|e| csv_error(file, e))?.clone();
        if header.is_empty() {
            return Err(InputError::NoStrata { file: file.into() });
        }
        let class_labels = class_labels(file, &header, &["area", "stratum", "expected_total"])?;
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| csv_error(file, e))?;
            let counts = (0..class_labels.len())
                .map(|j| parse_u64(file, &record, 3 + j, &header[3 + j]))
                .collect::<Result<Vec<u64>>>()?;
            rows.push(PopulationRow {
                line: line_of(&record),
                area: text_field(file, &record, 0, "area")?,
                stratum: text_field(file, &record, 1, "stratum")?,
                expected_total: parse_u64(file, &record, 2, "expected_total")?,
                counts,
            });
        }
        Ok(Self {
            file: file.into(),
            class_labels,
            rows,
        })
    }

    /// Every integrity problem in the file, in line order.
    pub fn issues(&self) -> Vec<InputError> {
        let mut issues = Vec::new();
        if self.rows.is_empty() {
            issues.push(InputError::NoStrata {
                file: self.file.clone(),
            });
            return issues;
        }
        let area = &self.rows[0].area;
        for (i, row) in self.rows.iter().enumerate() {
            let integrity = |source| InputError::Integrity {
                file: self.file.clone(),
                line: row.line,
                source,
            };
            if row.area != *area {
                issues.push(InputError::Parse {
                    file: self.file.clone(),
                    line: row.line,
                    column: 1,
                    message: format!("area `{}` differs from `{area}` on the first row", row.area),
                });
            }
            if self.rows[..i].iter().any(|r| r.stratum == row.stratum) {
                issues.push(integrity(geoscore_core::Error::DuplicateStratum(row.stratum.clone())));
            }
            if let Err(e) = self.stratum(row, TotalPolicy::Strict) {
                issues.push(integrity(e));
            }
        }
        issues
    }

    fn stratum(&self, row: &PopulationRow, policy: TotalPolicy) -> geoscore_core::Result<StratumPopulation> {
        let counts = ClassCount::new(row.counts.clone())?;
        match policy {
            TotalPolicy::Strict => StratumPopulation::new(row.stratum.clone(), counts, row.expected_total),
            TotalPolicy::TrustCounts => StratumPopulation::from_counts(row.stratum.clone(), counts),
        }
    }

    /// Builds the population. Under [`TotalPolicy::Strict`] the first
    /// integrity problem is returned as an error.
    pub fn into_population(&self, policy: TotalPolicy) -> Result<(AreaPopulation, Vec<Discrepancy>)> {
        let Some(first) = self.rows.first() else {
            return Err(InputError::NoStrata {
                file: self.file.clone(),
            });
        };
        let mut strata = Vec::with_capacity(self.rows.len());
        let mut discrepancies = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            let integrity = |source| InputError::Integrity {
                file: self.file.clone(),
                line: row.line,
                source,
            };
            if row.area != first.area {
                return Err(InputError::Parse {
                    file: self.file.clone(),
                    line: row.line,
                    column: 1,
                    message: format!("area `{}` differs from `{}` on the first row", row.area, first.area),
                });
            }
            if self.rows[..i].iter().any(|r| r.stratum == row.stratum) {
                return Err(integrity(geoscore_core::Error::DuplicateStratum(row.stratum.clone())));
            }
            let stratum = self.stratum(row, policy).map_err(integrity)?;
            if row.count_sum() != row.expected_total {
                discrepancies.push(Discrepancy {
                    line: row.line,
                    stratum: row.stratum.clone(),
                    printed_total: row.expected_total,
                    count_sum: row.count_sum(),
                });
            }
            strata.push(stratum);
        }
        let pop = AreaPopulation::new(first.area.clone(), self.class_labels.clone(), strata)?;
        Ok((pop, discrepancies))
    }
}

/// Strict population loader: any integrity problem is an error.
pub fn load_population<R: Read>(file: &str, source: R) -> Result<AreaPopulation> {
    let table = PopulationTable::read(file, source)?;
    Ok(table.into_population(TotalPolicy::Strict)?.0)
}

pub fn write_population<W: Write>(pop: &AreaPopulation, sink: W) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(sink);
    let mut header = vec!["area".to_string(), "stratum".into(), "expected_total".into()];
    header.extend(pop.class_labels().iter().map(|l| format!("{COUNT_PREFIX}{l}")));
    w.write_record(&header).map_err(into_io)?;
    for s in pop.strata() {
        let mut record = vec![pop.id().to_string(), s.id().to_string(), s.expected_total().to_string()];
        record.extend(s.counts().as_slice().iter().map(u64::to_string));
        w.write_record(&record).map_err(into_io)?;
    }
    w.flush()?;
    Ok(())
}

fn into_io(e: csv::Error) -> InputError {
    InputError::Write(std::io::Error::other(e))
}

/// Reads `aggregate,stratum,demand` rows. Aggregates keep the order of their
/// first row; demands are checked against `pop`.
pub fn load_profiles<R: Read>(file: &str, source: R, pop: &AreaPopulation) -> Result<Vec<AggregateProfile>> {
    let mut rdr = reader(source);
    let header = rdr.headers().map_err(|e| csv_error(file, e))?.clone();
    let expected = ["aggregate", "stratum", "demand"];
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(InputError::Header {
            file: file.into(),
            message: format!("expected `{}`", expected.join(",")),
        });
    }
    let mut order: Vec<String> = Vec::new();
    let mut demands: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(file, e))?;
        let line = line_of(&record);
        let aggregate = text_field(file, &record, 0, "aggregate")?;
        let stratum = text_field(file, &record, 1, "stratum")?;
        let demand = parse_u64(file, &record, 2, "demand")?;
        let integrity = |source| InputError::Integrity {
            file: file.into(),
            line,
            source,
        };
        let Some((_, s)) = pop.stratum(&stratum) else {
            return Err(integrity(geoscore_core::Error::UnknownStratum { aggregate, stratum }));
        };
        if demand > s.expected_total() {
            return Err(integrity(geoscore_core::Error::OverDemand {
                aggregate,
                stratum,
                demand,
                available: s.expected_total(),
            }));
        }
        if !demands.contains_key(&aggregate) {
            order.push(aggregate.clone());
        }
        let entry = demands.entry(aggregate.clone()).or_default();
        if entry.insert(stratum.clone(), demand).is_some() {
            return Err(InputError::Parse {
                file: file.into(),
                line,
                column: 2,
                message: format!("aggregate `{aggregate}` lists stratum `{stratum}` twice"),
            });
        }
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let demand = demands.remove(&id).unwrap_or_default();
            AggregateProfile::new(id, demand, None)
        })
        .collect())
}

pub fn write_profiles<W: Write>(profiles: &[AggregateProfile], sink: W) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(sink);
    w.write_record(["aggregate", "stratum", "demand"]).map_err(into_io)?;
    for p in profiles {
        for (stratum, demand) in p.demand() {
            w.write_record([p.id(), stratum.as_str(), &demand.to_string()])
                .map_err(into_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Observed class counts of one aggregate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub line: u64,
    pub aggregate: String,
    pub counts: ClassCount,
}

/// Reads `aggregate,count_*` rows. When `labels` is given the class columns
/// must match it exactly.
pub fn load_outcomes<R: Read>(file: &str, source: R, labels: Option<&[String]>) -> Result<Vec<Outcome>> {
    let mut rdr = reader(source);
    let header = rdr.headers().map_err(|e| csv_error(file, e))?.clone();
    let found = class_labels(file, &header, &["aggregate"])?;
    if let Some(labels) = labels {
        if found != labels {
            return Err(InputError::Header {
                file: file.into(),
                message: format!("class columns {found:?} do not match population classes {labels:?}"),
            });
        }
    }
    let mut out: Vec<Outcome> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(file, e))?;
        let line = line_of(&record);
        let aggregate = text_field(file, &record, 0, "aggregate")?;
        if out.iter().any(|o| o.aggregate == aggregate) {
            return Err(InputError::Parse {
                file: file.into(),
                line,
                column: 1,
                message: format!("aggregate `{aggregate}` appears twice"),
            });
        }
        let counts = (0..found.len())
            .map(|j| parse_u64(file, &record, 1 + j, &header[1 + j]))
            .collect::<Result<Vec<u64>>>()?;
        out.push(Outcome {
            line,
            aggregate,
            counts: ClassCount::new(counts)?,
        });
    }
    Ok(out)
}

pub fn write_outcomes<W: Write>(labels: &[String], outcomes: &[Outcome], sink: W) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(sink);
    let mut header = vec!["aggregate".to_string()];
    header.extend(labels.iter().map(|l| format!("{COUNT_PREFIX}{l}")));
    w.write_record(&header).map_err(into_io)?;
    for o in outcomes {
        let mut record = vec![o.aggregate.clone()];
        record.extend(o.counts.as_slice().iter().map(u64::to_string));
        w.write_record(&record).map_err(into_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Attaches observed counts to their profiles and validates the result.
/// Every outcome must name a known aggregate.
pub fn attach_outcomes(
    file: &str,
    profiles: &mut [AggregateProfile],
    outcomes: Vec<Outcome>,
    pop: &AreaPopulation,
) -> Result<()> {
    for outcome in outcomes {
        let Some(profile) = profiles.iter_mut().find(|p| p.id() == outcome.aggregate) else {
            return Err(InputError::Parse {
                file: file.into(),
                line: outcome.line,
                column: 1,
                message: format!("aggregate `{}` has no profile", outcome.aggregate),
            });
        };
        profile.set_observed(Some(outcome.counts));
        profile.validate(pop).map_err(|source| InputError::Integrity {
            file: file.into(),
            line: outcome.line,
            source,
        })?;
    }
    Ok(())
}
