//! CSV wire formats.

use std::io::{Read, Write};

use crate::procedures::DecisionRecord;
use crate::scenarios::Estimate;
use crate::sequences::SequenceTable;
use crate::{Error, Result};

pub const PVALUE_HEADER: [&str; 2] = ["id", "pvalue"];
pub const DECISION_HEADER: [&str; 6] = ["id", "index", "pvalue", "alpha_i", "rejected", "wealth"];
pub const SEQUENCE_HEADER: [&str; 3] = ["index", "coefficient", "cumulative"];
pub const TRACE_HEADER: [&str; 5] = ["procedure", "index", "pvalue", "alpha_i", "rejected"];
pub const ESTIMATE_HEADER: [&str; 10] = [
    "scenario",
    "procedure",
    "pi1",
    "N",
    "reps",
    "fdr",
    "fdr_se",
    "power",
    "power_se",
    "seed",
];

fn csv_err(line: u64, message: impl Into<String>) -> Error {
    Error::Csv {
        line,
        message: message.into(),
    }
}

fn from_csv(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => csv_err(line, format!("{other:?}")),
    }
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, want: &[&str]) -> Result<()> {
    let got = rdr.headers().map_err(from_csv)?;
    if got.iter().map(str::trim).ne(want.iter().copied()) {
        return Err(csv_err(
            1,
            format!(
                "expected header `{}`, got `{}`",
                want.join(","),
                got.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    Ok(())
}

fn parse_f64(field: &str, what: &str, line: u64) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| csv_err(line, format!("{what} `{field}` is not a number")))
}

/// Streaming reader of `id,pvalue` rows.
pub struct PvalueReader<R: Read> {
    rdr: csv::Reader<R>,
    record: csv::StringRecord,
}

impl<R: Read> PvalueReader<R> {
    pub fn new(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        check_header(&mut rdr, &PVALUE_HEADER)?;
        Ok(PvalueReader {
            rdr,
            record: csv::StringRecord::new(),
        })
    }
}

impl<R: Read> Iterator for PvalueReader<R> {
    /// `(line, id, p)`
    type Item = Result<(u64, String, f64)>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.rdr.read_record(&mut self.record) {
            Err(e) => Some(Err(from_csv(e))),
            Ok(false) => None,
            Ok(true) => {
                let line = self.record.position().map_or(0, |p| p.line());
                let id = self.record[0].trim().to_string();
                Some(parse_f64(&self.record[1], "p-value", line).and_then(|p| {
                    if (0.0..=1.0).contains(&p) {
                        Ok((line, id, p))
                    } else {
                        Err(csv_err(line, format!("p-value {p} is outside [0, 1]")))
                    }
                }))
            }
        }
    }
}

pub struct DecisionWriter<W: Write> {
    w: csv::Writer<W>,
}

impl<W: Write> DecisionWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(DECISION_HEADER).map_err(from_csv)?;
        Ok(DecisionWriter { w })
    }

    pub fn write(&mut self, id: &str, r: &DecisionRecord) -> Result<()> {
        let wealth = r.wealth_after.map(|w| w.to_string()).unwrap_or_default();
        self.w
            .write_record([
                id,
                &r.index.to_string(),
                &r.p.to_string(),
                &r.level.to_string(),
                if r.rejected { "true" } else { "false" },
                &wealth,
            ])
            .map_err(from_csv)
    }

    pub fn flush(&mut self) -> Result<()> {
        self.w.flush().map_err(Error::Io)
    }
}

/// Parse decision rows back into `(id, record)` pairs.
pub fn read_decisions<R: Read>(input: R) -> Result<Vec<(String, DecisionRecord)>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(input);
    check_header(&mut rdr, &DECISION_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(from_csv)?;
        let line = rec.position().map_or(0, |p| p.line());
        let index = rec[1]
            .parse::<usize>()
            .map_err(|_| csv_err(line, "bad index"))?;
        let rejected = match &rec[4] {
            "true" => true,
            "false" => false,
            other => return Err(csv_err(line, format!("bad rejected flag `{other}`"))),
        };
        let wealth_after = if rec[5].is_empty() {
            None
        } else {
            Some(parse_f64(&rec[5], "wealth", line)?)
        };
        out.push((
            rec[0].to_string(),
            DecisionRecord {
                index,
                p: parse_f64(&rec[2], "p-value", line)?,
                level: parse_f64(&rec[3], "alpha_i", line)?,
                rejected,
                wealth_after,
            },
        ));
    }
    Ok(out)
}

/// Dump the first `n` coefficients of `table`.
pub fn write_sequence<W: Write>(out: W, table: &SequenceTable, n: usize) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(SEQUENCE_HEADER).map_err(from_csv)?;
    for i in 1..=n {
        let c = table
            .get(i)
            .ok_or_else(|| Error::Horizon(format!("table ends before index {i}")))?;
        w.write_record([
            i.to_string(),
            c.to_string(),
            table.partial_sum(i).to_string(),
        ])
        .map_err(from_csv)?;
    }
    w.flush().map_err(Error::Io)
}

/// Long-format level traces, one row per procedure and index.
pub fn write_traces<W: Write>(out: W, traces: &[(String, Vec<DecisionRecord>)]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(TRACE_HEADER).map_err(from_csv)?;
    for (name, recs) in traces {
        for r in recs {
            w.write_record([
                name.as_str(),
                &r.index.to_string(),
                &r.p.to_string(),
                &r.level.to_string(),
                if r.rejected { "true" } else { "false" },
            ])
            .map_err(from_csv)?;
        }
    }
    w.flush().map_err(Error::Io)
}

/// Parse long-format traces back into `(procedure, levels)` in first-seen order.
pub fn read_trace_levels<R: Read>(input: R) -> Result<Vec<(String, Vec<f64>)>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(input);
    check_header(&mut rdr, &TRACE_HEADER)?;
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(from_csv)?;
        let line = rec.position().map_or(0, |p| p.line());
        let level = parse_f64(&rec[3], "alpha_i", line)?;
        match out.iter_mut().find(|(n, _)| n == &rec[0]) {
            Some((_, v)) => v.push(level),
            None => out.push((rec[0].to_string(), vec![level])),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub scenario: String,
    pub procedure: String,
    pub pi1: f64,
    pub n: usize,
    pub seed: u64,
    pub estimate: Estimate,
}

pub fn write_estimates<W: Write>(out: W, rows: &[EstimateRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(ESTIMATE_HEADER).map_err(from_csv)?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        let e = &r.estimate;
        w.write_record([
            r.scenario.clone(),
            r.procedure.clone(),
            r.pi1.to_string(),
            r.n.to_string(),
            e.reps.to_string(),
            e.fdr.to_string(),
            e.fdr_se.to_string(),
            opt(e.power),
            opt(e.power_se),
            r.seed.to_string(),
        ])
        .map_err(from_csv)?;
    }
    w.flush().map_err(Error::Io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reader_reports_line_numbers() {
        let data = "id,pvalue\na,0.5\nb,oops\n";
        let rows: Vec<_> = PvalueReader::new(data.as_bytes()).unwrap().collect();
        assert!(rows[0].is_ok());
        match &rows[1] {
            Err(Error::Csv { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(PvalueReader::new("x,y\n".as_bytes()).is_err());
        let rows: Vec<_> = PvalueReader::new("id,pvalue\na,1.5\n".as_bytes())
            .unwrap()
            .collect();
        assert!(rows[0].is_err());
    }

    #[test]
    fn decisions_round_trip() {
        let recs = [
            DecisionRecord {
                index: 1,
                p: 0.1 + 0.2,
                level: 1.0 / 3.0,
                rejected: true,
                wealth_after: Some(1e-300),
            },
            DecisionRecord {
                index: 2,
                p: 0.0,
                level: 0.0125,
                rejected: true,
                wealth_after: None,
            },
        ];
        let mut buf = Vec::new();
        {
            let mut w = DecisionWriter::new(&mut buf).unwrap();
            for r in &recs {
                w.write("h,1", r).unwrap();
            }
            w.flush().unwrap();
        }
        let back = read_decisions(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].0, "h,1");
        assert_eq!(back[0].1, recs[0]);
        assert_eq!(back[1].1, recs[1]);
    }
}
