//! Caption-contest vote tables in, experiment tables out.
//!
//! Output files come in two formats:
//!
//! * CSV: `# key=value` metadata comment lines (values JSON-encoded), then a
//!   header row, then one row per record.
//! * JSON: a single object `{"metadata": {...}, "columns": [...], "rows": [[...], ...]}`.
//!
//! Numbers are written in shortest round-trip form, so reading a file back
//! yields bit-identical values.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caption {
    pub text: String,
    /// Number of 1-, 2- and 3-star votes.
    pub star_counts: [u64; 3],
}

impl Caption {
    pub fn total_votes(&self) -> u64 {
        self.star_counts.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContestDataset {
    pub contest_id: Option<u64>,
    pub captions: Vec<Caption>,
}

/// Column names of a contest table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub caption: String,
    pub one_star: String,
    pub two_star: String,
    pub three_star: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            caption: "caption".into(),
            one_star: "unfunny".into(),
            two_star: "somewhat_funny".into(),
            three_star: "funny".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedContest {
    pub dataset: ContestDataset,
    /// Rows dropped because they had no votes.
    pub dropped: usize,
}

/// Leading digits of the file name, e.g. `512` for `512_summary.csv`.
fn contest_id_from_path(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem.chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

pub fn parse_contest_csv(path: &Path, columns: &ColumnMap) -> Result<ParsedContest> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(file);
    let headers = reader.headers().map_err(csv_err)?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let text_col = find(&columns.caption)?;
    let count_cols = [
        (find(&columns.one_star)?, &columns.one_star),
        (find(&columns.two_star)?, &columns.two_star),
        (find(&columns.three_star)?, &columns.three_star),
    ];

    let mut captions = Vec::new();
    let mut dropped = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let mut star_counts = [0u64; 3];
        for (slot, (col, name)) in star_counts.iter_mut().zip(count_cols) {
            let raw = record.get(col).unwrap_or("").trim();
            *slot = raw.parse().map_err(|_| Error::BadCount {
                path: path.to_path_buf(),
                // 1-based data row, header excluded
                row: row + 1,
                column: name.clone(),
                value: raw.to_string(),
            })?;
        }
        let caption = Caption {
            text: record.get(text_col).unwrap_or("").to_string(),
            star_counts,
        };
        if caption.total_votes() == 0 {
            dropped += 1;
        } else {
            captions.push(caption);
        }
    }
    if captions.len() < 2 {
        return Err(Error::TooFewCaptions {
            path: path.to_path_buf(),
            found: captions.len(),
        });
    }
    Ok(ParsedContest {
        dataset: ContestDataset {
            contest_id: contest_id_from_path(path),
            captions,
        },
        dropped,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::param("format", format!("expected csv or json, got `{other}`"))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_n: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contest_id: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Command-specific summary values.
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

/// A metadata block plus a numeric table, rows sorted by the first column.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub metadata: Metadata,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ExperimentOutput {
    pub fn new(metadata: Metadata, columns: &[&str]) -> Self {
        ExperimentOutput {
            metadata,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Column values by name.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let meta = serde_json::to_value(&self.metadata).map_err(std::io::Error::other)?;
        if let Value::Object(map) = meta {
            for (key, value) in map {
                writeln!(out, "# {key}={value}")?;
            }
        }
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(&self.columns)?;
        for row in &self.rows {
            writer.write_record(row.iter().map(|v| v.to_string()))?;
        }
        writer.flush()
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metadata is serialisable");
        s.push('\n');
        s
    }
}

pub fn write_output(out: &ExperimentOutput, path: &Path, format: OutputFormat) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    match format {
        OutputFormat::Csv => out.write_csv(&mut writer).map_err(io_err)?,
        OutputFormat::Json => writer.write_all(out.to_json_string().as_bytes()).map_err(io_err)?,
    }
    writer.flush().map_err(io_err)
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedOutput {
        path: PathBuf::from(path),
        reason: reason.into(),
    }
}

pub fn read_output(path: &Path, format: OutputFormat) -> Result<ExperimentOutput> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    match format {
        OutputFormat::Json => serde_json::from_reader(BufReader::new(file)).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        }),
        OutputFormat::Csv => {
            let mut reader = BufReader::new(file);
            let mut meta = serde_json::Map::new();
            let mut line = String::new();
            let mut body = String::new();
            loop {
                line.clear();
                if reader.read_line(&mut line).map_err(io_err)? == 0 {
                    break;
                }
                match line.strip_prefix("# ") {
                    Some(entry) => {
                        let (key, value) = entry
                            .trim_end()
                            .split_once('=')
                            .ok_or_else(|| malformed(path, format!("bad metadata line `{}`", line.trim_end())))?;
                        let value: Value = serde_json::from_str(value)
                            .map_err(|e| malformed(path, format!("metadata `{key}`: {e}")))?;
                        meta.insert(key.to_string(), value);
                    }
                    None => {
                        body.push_str(&line);
                        break;
                    }
                }
            }
            std::io::Read::read_to_string(&mut reader, &mut body).map_err(io_err)?;
            let metadata: Metadata = serde_json::from_value(Value::Object(meta))
                .map_err(|e| malformed(path, e.to_string()))?;
            let mut csv_reader = csv::Reader::from_reader(body.as_bytes());
            let columns = csv_reader
                .headers()
                .map_err(|source| Error::Csv {
                    path: path.to_path_buf(),
                    source,
                })?
                .iter()
                .map(String::from)
                .collect();
            let mut rows = Vec::new();
            for record in csv_reader.records() {
                let record = record.map_err(|source| Error::Csv {
                    path: path.to_path_buf(),
                    source,
                })?;
                let row = record
                    .iter()
                    .map(|v| v.parse::<f64>().map_err(|_| malformed(path, format!("`{v}` is not a number"))))
                    .collect::<Result<Vec<_>>>()?;
                rows.push(row);
            }
            Ok(ExperimentOutput {
                metadata,
                columns,
                rows,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_file(dir: &Path, name: &str, contents: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn parses_default_columns_and_drops_empty_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "512_summary.csv",
            "rank,caption,unfunny,somewhat_funny,funny\n\
             1,\"Nope, not today\",10,0,0\n\
             2,All in,0,0,10\n\
             3,Silence,0,0,0\n",
        );
        let parsed = parse_contest_csv(&path, &ColumnMap::default()).unwrap();
        assert_eq!(parsed.dropped, 1);
        assert_eq!(parsed.dataset.contest_id, Some(512));
        assert_eq!(parsed.dataset.captions.len(), 2);
        assert_eq!(parsed.dataset.captions[0].text, "Nope, not today");
        assert_eq!(parsed.dataset.captions[1].star_counts, [0, 0, 10]);
    }

    #[test]
    fn custom_column_names() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(dir.path(), "x.csv", "text,one,two,three\na,1,2,3\nb,3,2,1\n");
        let cols = ColumnMap {
            caption: "text".into(),
            one_star: "one".into(),
            two_star: "two".into(),
            three_star: "three".into(),
        };
        let parsed = parse_contest_csv(&path, &cols).unwrap();
        assert_eq!(parsed.dataset.contest_id, None);
        assert_eq!(parsed.dataset.captions[0].star_counts, [1, 2, 3]);
    }

    #[test]
    fn distinct_diagnostics() {
        let dir = tempfile::tempdir().unwrap();
        let missing = write_file(dir.path(), "m.csv", "caption,unfunny,funny\na,1,2\nb,2,1\n");
        match parse_contest_csv(&missing, &ColumnMap::default()) {
            Err(Error::MissingColumn { column, .. }) => assert_eq!(column, "somewhat_funny"),
            other => panic!("{other:?}"),
        }
        let bad = write_file(
            dir.path(),
            "b.csv",
            "caption,unfunny,somewhat_funny,funny\na,1,2,3\nb,2,x,1\n",
        );
        match parse_contest_csv(&bad, &ColumnMap::default()) {
            Err(Error::BadCount { row, column, value, .. }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "somewhat_funny", "x"));
            }
            other => panic!("{other:?}"),
        }
        let negative = write_file(
            dir.path(),
            "n.csv",
            "caption,unfunny,somewhat_funny,funny\na,1,2,3\nb,2,-1,1\n",
        );
        assert!(matches!(
            parse_contest_csv(&negative, &ColumnMap::default()),
            Err(Error::BadCount { .. })
        ));
        let few = write_file(
            dir.path(),
            "f.csv",
            "caption,unfunny,somewhat_funny,funny\na,1,2,3\nb,0,0,0\n",
        );
        assert!(matches!(
            parse_contest_csv(&few, &ColumnMap::default()),
            Err(Error::TooFewCaptions { found: 1, .. })
        ));
        assert!(parse_contest_csv(&dir.path().join("absent.csv"), &ColumnMap::default())
            .unwrap_err()
            .is_io());
    }

    fn sample_output() -> ExperimentOutput {
        let mut out = ExperimentOutput::new(
            Metadata {
                command: Some("simulate".into()),
                scheme: Some("kl".into()),
                bound_n: Some(8),
                delta: Some(0.01),
                n: Some(10),
                alpha: Some(0.5),
                repetitions: Some(250),
                seed: Some(42),
                k: Some(5),
                ..Default::default()
            },
            &["samples", "membership_probability"],
        );
        out.metadata.extra.insert("note".into(), Value::from("a=b, \"quoted\""));
        out.rows = vec![vec![20.0, 0.1], vec![40.0, 1.0 / 3.0], vec![60.0, 0.987_654_321_012_345_6]];
        out
    }

    #[test]
    fn empty_rows_give_header_only_csv() {
        let out = ExperimentOutput::new(
            Metadata {
                scheme: Some("sg1".into()),
                ..Default::default()
            },
            &["samples", "membership_probability"],
        );
        let text = out.to_csv_string();
        assert_eq!(text, "# scheme=\"sg1\"\nsamples,membership_probability\n");
    }

    #[test]
    fn roundtrip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let out = sample_output();
        for format in [OutputFormat::Csv, OutputFormat::Json] {
            let path = dir.path().join(format!("out.{format}"));
            write_output(&out, &path, format).unwrap();
            assert_eq!(read_output(&path, format).unwrap(), out);
        }
    }

    #[test]
    fn csv_is_a_plain_table_for_other_readers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        write_output(&sample_output(), &path, OutputFormat::Csv).unwrap();
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(&path)
            .unwrap();
        assert_eq!(reader.headers().unwrap().len(), 2);
        let rows: Vec<(f64, f64)> = reader.deserialize().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1], (40.0, 1.0 / 3.0));
    }

    #[test]
    fn write_reports_path_on_failure() {
        let err = write_output(
            &sample_output(),
            Path::new("/nonexistent-dir/out.csv"),
            OutputFormat::Csv,
        )
        .unwrap_err();
        assert!(err.is_io());
        assert!(err.to_string().contains("/nonexistent-dir/out.csv"));
    }

    #[test]
    fn format_names() {
        assert_eq!("csv".parse::<OutputFormat>().unwrap(), OutputFormat::Csv);
        assert_eq!("json".parse::<OutputFormat>().unwrap(), OutputFormat::Json);
        assert!("tsv".parse::<OutputFormat>().is_err());
    }
}
