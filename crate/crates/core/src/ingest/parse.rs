use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CorpusRecord, IngestError, PublishDate};

/// Source layout of a metadata stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    /// Comma-separated with a header row, RFC-4180 quoting.
    Csv,
    /// One JSON object per line.
    Jsonl,
}

impl SourceFormat {
    pub fn from_path(path: &std::path::Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" => Some(SourceFormat::Csv),
            "jsonl" | "ndjson" => Some(SourceFormat::Jsonl),
            _ => None,
        }
    }
}

fn default_separator() -> String {
    ";".into()
}

/// Maps record fields to source column names (CSV header cells or JSON keys).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub record_id: String,
    pub dup_group_key: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub publish_date: String,
    #[serde(default)]
    pub doi: Option<String>,
    #[serde(default)]
    pub journal: Option<String>,
    #[serde(default)]
    pub authors: Option<String>,
    #[serde(default)]
    pub language: Option<String>,
    /// Splits a delimited author cell into names.
    #[serde(default = "default_separator")]
    pub authors_separator: String,
}

impl Default for Schema {
    /// Columns named after the record fields themselves.
    fn default() -> Self {
        Schema {
            record_id: "record_id".into(),
            dup_group_key: "dup_group_key".into(),
            title: "title".into(),
            abstract_text: "abstract".into(),
            publish_date: "publish_date".into(),
            doi: Some("doi".into()),
            journal: Some("journal".into()),
            authors: Some("authors".into()),
            language: Some("language".into()),
            authors_separator: default_separator(),
        }
    }
}

/// A recoverable, row-level parse failure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParseOutcome {
    pub records: Vec<CorpusRecord>,
    pub skipped: Vec<RowError>,
}

/// Parses a metadata stream into records.
///
/// Rows with the wrong number of cells, invalid JSON, an empty record id or a
/// date outside `YYYY-MM-DD` / `YYYY-MM` / `YYYY` are skipped and reported in
/// [`ParseOutcome::skipped`]. An empty group key falls back to the record id.
/// Only an unreadable stream or a header lacking a mapped column is fatal.
pub fn parse_metadata<R: Read>(
    stream: R,
    format: SourceFormat,
    schema: &Schema,
) -> Result<ParseOutcome, IngestError> {
    match format {
        SourceFormat::Csv => parse_csv(stream, schema),
        SourceFormat::Jsonl => parse_jsonl(stream, schema),
    }
}

/// Raw cell values in schema order, before validation.
struct Cells<'a> {
    record_id: Option<&'a str>,
    dup_group_key: Option<&'a str>,
    title: Option<&'a str>,
    abstract_text: Option<&'a str>,
    publish_date: Option<&'a str>,
    doi: Option<&'a str>,
    journal: Option<&'a str>,
    authors: Option<Vec<String>>,
    language: Option<&'a str>,
}

fn non_empty(s: Option<&str>) -> Option<&str> {
    s.map(str::trim).filter(|v| !v.is_empty())
}

fn build_record(cells: Cells<'_>) -> Result<CorpusRecord, String> {
    let record_id = non_empty(cells.record_id).ok_or("empty record id")?.to_string();
    let dup_group_key = non_empty(cells.dup_group_key).unwrap_or(&record_id).to_string();
    let publish_date = match non_empty(cells.publish_date) {
        None => None,
        Some(raw) => Some(PublishDate::parse(raw).ok_or_else(|| format!("unparseable date `{raw}`"))?),
    };
    Ok(CorpusRecord {
        record_id,
        dup_group_key,
        title: non_empty(cells.title).unwrap_or_default().to_string(),
        abstract_text: non_empty(cells.abstract_text).unwrap_or_default().to_string(),
        doi: non_empty(cells.doi).map(str::to_string),
        publish_date,
        journal: non_empty(cells.journal).map(str::to_string),
        authors: cells.authors.filter(|a| !a.is_empty()),
        language: non_empty(cells.language).map(str::to_string),
    })
}

fn split_authors(cell: Option<&str>, sep: &str) -> Option<Vec<String>> {
    let cell = non_empty(cell)?;
    Some(
        cell.split(sep)
            .map(str::trim)
            .filter(|a| !a.is_empty())
            .map(str::to_string)
            .collect(),
    )
}

fn parse_csv<R: Read>(stream: R, schema: &Schema) -> Result<ParseOutcome, IngestError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(stream);
    let header = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(csv_fatal(e)),
    };
    let mut out = ParseOutcome::default();
    if header.is_empty() {
        return Ok(out);
    }
    let col = |field: &'static str, name: &str| -> Result<usize, IngestError> {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| IngestError::MissingColumn { field, column: name.to_string() })
    };
    let opt_col = |field: &'static str, name: &Option<String>| -> Result<Option<usize>, IngestError> {
        name.as_deref().map(|n| col(field, n)).transpose()
    };
    let c_id = col("record_id", &schema.record_id)?;
    let c_key = col("dup_group_key", &schema.dup_group_key)?;
    let c_title = col("title", &schema.title)?;
    let c_abs = col("abstract", &schema.abstract_text)?;
    let c_date = col("publish_date", &schema.publish_date)?;
    let c_doi = opt_col("doi", &schema.doi)?;
    let c_journal = opt_col("journal", &schema.journal)?;
    let c_authors = opt_col("authors", &schema.authors)?;
    let c_lang = opt_col("language", &schema.language)?;

    let mut row = csv::StringRecord::new();
    loop {
        let line = reader.position().line();
        match reader.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => return Err(csv_fatal(e)),
            Err(e) => {
                out.skipped.push(RowError { line, message: e.to_string() });
                continue;
            }
        }
        let line = row.position().map_or(line, |p| p.line());
        if row.len() != header.len() {
            out.skipped.push(RowError {
                line,
                message: format!("expected {} columns, found {}", header.len(), row.len()),
            });
            continue;
        }
        let get = |c: usize| row.get(c);
        let cells = Cells {
            record_id: get(c_id),
            dup_group_key: get(c_key),
            title: get(c_title),
            abstract_text: get(c_abs),
            publish_date: get(c_date),
            doi: c_doi.and_then(get),
            journal: c_journal.and_then(get),
            authors: split_authors(c_authors.and_then(get), &schema.authors_separator),
            language: c_lang.and_then(get),
        };
        match build_record(cells) {
            Ok(r) => out.records.push(r),
            Err(message) => out.skipped.push(RowError { line, message }),
        }
    }
    Ok(out)
}

fn csv_fatal(e: csv::Error) -> IngestError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IngestError::Io(io),
        other => IngestError::Header(format!("{other:?}")),
    }
}

fn json_str(v: Option<&Value>) -> Option<String> {
    match v? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn parse_jsonl<R: Read>(stream: R, schema: &Schema) -> Result<ParseOutcome, IngestError> {
    let mut out = ParseOutcome::default();
    for (i, line) in BufReader::new(stream).lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let obj = match serde_json::from_str::<Value>(&line) {
            Ok(Value::Object(m)) => m,
            Ok(_) => {
                out.skipped.push(RowError { line: line_no, message: "row is not a JSON object".into() });
                continue;
            }
            Err(e) => {
                out.skipped.push(RowError { line: line_no, message: e.to_string() });
                continue;
            }
        };
        let field = |name: &str| json_str(obj.get(name));
        let opt = |name: &Option<String>| name.as_deref().and_then(field);
        let authors = schema.authors.as_deref().and_then(|k| match obj.get(k) {
            Some(Value::Array(items)) => Some(items.iter().filter_map(|v| json_str(Some(v))).collect()),
            other => split_authors(json_str(other).as_deref(), &schema.authors_separator),
        });
        let (id, key, title, abs, date) = (
            field(&schema.record_id),
            field(&schema.dup_group_key),
            field(&schema.title),
            field(&schema.abstract_text),
            field(&schema.publish_date),
        );
        let (doi, journal, lang) = (opt(&schema.doi), opt(&schema.journal), opt(&schema.language));
        let cells = Cells {
            record_id: id.as_deref(),
            dup_group_key: key.as_deref(),
            title: title.as_deref(),
            abstract_text: abs.as_deref(),
            publish_date: date.as_deref(),
            doi: doi.as_deref(),
            journal: journal.as_deref(),
            authors,
            language: lang.as_deref(),
        };
        match build_record(cells) {
            Ok(r) => out.records.push(r),
            Err(message) => out.skipped.push(RowError { line: line_no, message }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::DatePrecision;
    use super::*;

    const HEADER: &str = "record_id,dup_group_key,title,abstract,publish_date,doi,journal,authors,language\n";

    #[test]
    fn empty_stream_is_empty() {
        let out = parse_metadata("".as_bytes(), SourceFormat::Csv, &Schema::default()).unwrap();
        assert!(out.records.is_empty() && out.skipped.is_empty());
        let out = parse_metadata("".as_bytes(), SourceFormat::Jsonl, &Schema::default()).unwrap();
        assert!(out.records.is_empty());
    }

    #[test]
    fn year_only_date_keeps_precision() {
        let src = format!("{HEADER}r1,g1,T,Abstract text,2020,,,,\n");
        let out = parse_metadata(src.as_bytes(), SourceFormat::Csv, &Schema::default()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].publish_date.unwrap().precision, DatePrecision::Year);
        assert!(out.records[0].doi.is_none());
    }

    #[test]
    fn malformed_row_is_skipped_and_counted() {
        let src = format!(
            "{HEADER}r1,g1,T1,A1,2020-01-02,10.1/x,J,\"Doe, J.; Roe, R.\",en\n\
             r2,g2,T2,A2\n\
             r3,g3,\"T3, quoted\",A3,2020-02-03,,,,\n"
        );
        let out = parse_metadata(src.as_bytes(), SourceFormat::Csv, &Schema::default()).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.skipped[0].line, 3);
        assert_eq!(out.records[0].authors.as_deref().unwrap(), ["Doe, J.", "Roe, R."]);
        assert_eq!(out.records[1].title, "T3, quoted");
    }

    #[test]
    fn bad_date_is_row_error() {
        let src = format!("{HEADER}r1,g1,T,A,03/05/2020,,,,\n");
        let out = parse_metadata(src.as_bytes(), SourceFormat::Csv, &Schema::default()).unwrap();
        assert!(out.records.is_empty());
        assert!(out.skipped[0].message.contains("03/05/2020"));
    }

    #[test]
    fn missing_mapped_column_is_fatal() {
        let schema = Schema { publish_date: "publish_time".into(), ..Schema::default() };
        let err = parse_metadata(HEADER.as_bytes(), SourceFormat::Csv, &schema).unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn { field: "publish_date", .. }));
    }

    #[test]
    fn jsonl_rows() {
        let src = r#"{"record_id":"a","dup_group_key":"k","title":"T","abstract":"A","publish_date":"2020-05","authors":["X","Y"]}
not json
{"record_id":"b","dup_group_key":"","title":"T","abstract":"A","publish_date":null,"doi":"10/1"}
"#;
        let out = parse_metadata(src.as_bytes(), SourceFormat::Jsonl, &Schema::default()).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.skipped, vec![RowError { line: 2, message: out.skipped[0].message.clone() }]);
        assert_eq!(out.records[0].authors.as_ref().unwrap().len(), 2);
        assert_eq!(out.records[1].dup_group_key, "b");
        assert!(out.records[1].publish_date.is_none());
    }

    #[test]
    fn unreadable_stream_is_fatal() {
        struct Broken;
        impl Read for Broken {
            fn read(&mut self, _: &mut [u8]) -> std::io::Result<usize> {
                Err(std::io::Error::other("disk gone"))
            }
        }
        assert!(matches!(
            parse_metadata(Broken, SourceFormat::Jsonl, &Schema::default()),
            Err(IngestError::Io(_))
        ));
        assert!(parse_metadata(Broken, SourceFormat::Csv, &Schema::default()).is_err());
    }
}
