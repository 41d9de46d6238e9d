//! Configuration JSON and results/summary/guideline CSV files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::{builtin, ConfigSpec, MIN_PROBABILITY};
use crate::error::{Error, Result};
use crate::guideline::GuidelineTable;
use crate::mc::{IterationRecord, SummaryRecord};

pub const RESULTS_HEADER: [&str; 15] = [
    "config_id", "aiv", "n", "event_rate", "iteration", "clamped", "converged", "theta_f1", "theta_p4", "f1_val",
    "f1_test", "p4_val", "p4_test", "gini_val", "gini_test",
];

pub const SUMMARY_HEADER: [&str; 13] = [
    "config_id", "aiv", "n", "event_rate", "metric", "split", "median", "q25", "q75", "p05", "p95", "n_iter",
    "n_nonconverged",
];

pub const GUIDELINE_HEADER: [&str; 3] = ["event_rate", "aiv", "predicted"];

fn schema(path: &Path, field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema { path: path.to_path_buf(), field: field.into(), message: message.into() }
}

/// Parses and validates a configuration, naming the offending field on failure.
pub fn parse_config(text: &str, path: &Path) -> Result<ConfigSpec> {
    let config: ConfigSpec = serde_json::from_str(text).map_err(|e| {
        schema(path, "<document>", format!("{e} (line {}, column {})", e.line(), e.column()))
    })?;
    if config.predictors.is_empty() {
        return Err(schema(path, "predictors", "at least one predictor is required"));
    }
    for (i, p) in config.predictors.iter().enumerate() {
        let field = |name: &str| format!("predictors[{i}].{name}");
        if p.p_event.len() < 2 {
            return Err(schema(path, field("p_event"), format!("predictor `{}` needs at least 2 bins", p.name)));
        }
        if p.p_nonevent.len() != p.p_event.len() {
            return Err(schema(
                path,
                field("p_nonevent"),
                format!("predictor `{}`: expected {} bins, found {}", p.name, p.p_event.len(), p.p_nonevent.len()),
            ));
        }
        for (name, dist) in [("p_event", &p.p_event), ("p_nonevent", &p.p_nonevent)] {
            if let Some(v) = dist.iter().find(|v| !(**v >= MIN_PROBABILITY)) {
                return Err(schema(
                    path,
                    field(name),
                    format!("predictor `{}`: probability {v} below {MIN_PROBABILITY}", p.name),
                ));
            }
            let sum: f64 = dist.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(schema(path, field(name), format!("predictor `{}`: probabilities sum to {sum}", p.name)));
            }
        }
        if config.predictors[..i].iter().any(|q| q.name == p.name) {
            return Err(schema(path, field("name"), format!("duplicate predictor name `{}`", p.name)));
        }
    }
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ConfigSpec> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_config(&text, path)
}

pub fn save_config(config: &ConfigSpec, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, config).map_err(|e| schema(path, "<document>", e.to_string()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// A built-in id (`A`..`D`) or a path to a configuration JSON file.
pub fn resolve_config(arg: &str) -> Result<ConfigSpec> {
    if let Some(c) = builtin(arg) {
        return Ok(c);
    }
    let path = Path::new(arg);
    if path.exists() {
        load_config(path)
    } else {
        Err(Error::UnknownConfig(arg.to_owned()))
    }
}

fn write_csv<T: Serialize, W: Write>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv<T: DeserializeOwned, R: Read>(reader: R, header: &[&str], path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(reader);
    let found: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if found != header {
        return Err(schema(path, "<header>", format!("expected `{}`, found `{}`", header.join(","), found.join(","))));
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| {
                let field = match e.kind() {
                    csv::ErrorKind::Deserialize { err, .. } => err
                        .field()
                        .and_then(|f| header.get(f as usize))
                        .map_or_else(|| "<row>".to_owned(), |s| (*s).to_owned()),
                    _ => "<row>".to_owned(),
                };
                schema(path, field, format!("record {}: {e}", i + 1))
            })
        })
        .collect()
}

/// Records with an empty header-only file when `records` is empty.
pub fn write_results<W: Write>(writer: W, records: &[IterationRecord]) -> Result<()> {
    if records.is_empty() {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(RESULTS_HEADER)?;
        w.flush()?;
        return Ok(());
    }
    write_csv(writer, records)
}

pub fn save_results(path: &Path, records: &[IterationRecord]) -> Result<()> {
    write_results(BufWriter::new(File::create(path)?), records)
}

pub fn load_results(path: &Path) -> Result<Vec<IterationRecord>> {
    read_csv(BufReader::new(File::open(path)?), &RESULTS_HEADER, path)
}

pub fn write_summary<W: Write>(writer: W, records: &[SummaryRecord]) -> Result<()> {
    if records.is_empty() {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(SUMMARY_HEADER)?;
        w.flush()?;
        return Ok(());
    }
    write_csv(writer, records)
}

pub fn save_summary(path: &Path, records: &[SummaryRecord]) -> Result<()> {
    write_summary(BufWriter::new(File::create(path)?), records)
}

pub fn load_summary(path: &Path) -> Result<Vec<SummaryRecord>> {
    read_csv(BufReader::new(File::open(path)?), &SUMMARY_HEADER, path)
}

/// Full-precision guideline values, one row per (event rate, AIV).
pub fn save_guideline(path: &Path, table: &GuidelineTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(GUIDELINE_HEADER)?;
    for row in table.rows() {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::config_b;

    #[test]
    fn builtin_resolution() {
        assert_eq!(resolve_config("B").unwrap(), config_b());
        assert!(matches!(resolve_config("Q"), Err(Error::UnknownConfig(_))));
    }

    #[test]
    fn bad_sum_names_predictor() {
        let text = r#"{"id":"x","predictors":[
            {"name":"good","p_event":[0.5,0.5],"p_nonevent":[0.5,0.5]},
            {"name":"bad","p_event":[0.5,0.49],"p_nonevent":[0.5,0.5]}]}"#;
        let err = parse_config(text, Path::new("x.json")).unwrap_err();
        match err {
            Error::Schema { field, message, .. } => {
                assert_eq!(field, "predictors[1].p_event");
                assert!(message.contains("bad"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{"id":"x","extra":1,"predictors":[{"name":"a","p_event":[0.5,0.5],"p_nonevent":[0.5,0.5]}]}"#;
        assert!(matches!(parse_config(text, Path::new("x.json")), Err(Error::Schema { .. })));
        let text = r#"{"id":"x","predictors":[{"name":"a","bins":2,"p_event":[0.5,0.5],"p_nonevent":[0.5,0.5]}]}"#;
        assert!(parse_config(text, Path::new("x.json")).is_err());
    }

    #[test]
    fn structural_violations() {
        let cases = [
            r#"{"id":"x","predictors":[]}"#,
            r#"{"id":"x","predictors":[{"name":"a","p_event":[1.0],"p_nonevent":[1.0]}]}"#,
            r#"{"id":"x","predictors":[{"name":"a","p_event":[0.5,0.5],"p_nonevent":[0.2,0.3,0.5]}]}"#,
            r#"{"id":"x","predictors":[{"name":"a","p_event":[1.0,0.0],"p_nonevent":[0.5,0.5]}]}"#,
            r#"{"id":"x","predictors":[{"name":"a","p_event":[0.5,0.5],"p_nonevent":[0.5,0.5]},{"name":"a","p_event":[0.5,0.5],"p_nonevent":[0.5,0.5]}]}"#,
            r#"{"id":"x"}"#,
            "not json",
        ];
        for text in cases {
            assert!(matches!(parse_config(text, Path::new("c.json")), Err(Error::Schema { .. })), "{text}");
        }
    }

    #[test]
    fn header_is_checked() {
        let data = "config_id,aiv\nB,1.0\n";
        let err = read_csv::<IterationRecord, _>(data.as_bytes(), &RESULTS_HEADER, Path::new("r.csv")).unwrap_err();
        assert!(matches!(err, Error::Schema { ref field, .. } if field == "<header>"));
    }

    #[test]
    fn bad_field_is_named() {
        let data = format!("{}\nB,2.28,100,0.1,0,false,true,0.1,0.1,x,0.5,0.5,0.5,0.5,0.5\n", RESULTS_HEADER.join(","));
        let err = read_csv::<IterationRecord, _>(data.as_bytes(), &RESULTS_HEADER, Path::new("r.csv")).unwrap_err();
        assert!(matches!(err, Error::Schema { ref field, .. } if field == "f1_val"), "{err}");
    }

    #[test]
    fn empty_results_have_header() {
        let mut buf = Vec::new();
        write_results(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), RESULTS_HEADER.join(","));
    }
}
