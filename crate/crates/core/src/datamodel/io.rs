//! `traces.jsonl` and `dataset.json` readers and writers.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CaptionTrace, Dataset, ImageEntry, Token, TokenPrediction};
use crate::error::{Error, Result};

#[derive(Serialize)]
struct TraceRecord<'a> {
    image_id: &'a str,
    caption_id: &'a str,
    tokens: Vec<&'a str>,
    p_ref: Vec<f64>,
    argmax: Vec<bool>,
}

pub fn load_traces(path: impl AsRef<Path>) -> Result<Vec<CaptionTrace>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_traces(BufReader::new(file))
}

/// Parses JSONL traces, validating every record and rejecting duplicate
/// `(image_id, caption_id)` pairs. Blank lines are skipped.
pub fn parse_traces(reader: impl BufRead) -> Result<Vec<CaptionTrace>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let trace = parse_record(&line).map_err(|message| Error::Parse {
            line: line_no,
            message,
        })?;
        let trace = trace?;
        let key = (trace.image_id.clone(), trace.caption_id.clone());
        if !seen.insert(key) {
            return Err(Error::DuplicateCaption {
                image_id: trace.image_id,
                caption_id: trace.caption_id,
            });
        }
        out.push(trace);
    }
    Ok(out)
}

// Outer error: malformed line. Inner: invariant violation of a well-formed record.
fn parse_record(line: &str) -> std::result::Result<Result<CaptionTrace>, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("malformed JSON: {e}"))?;
    let obj = value
        .as_object()
        .ok_or_else(|| "expected a JSON object".to_owned())?;
    let field = |name: &str| {
        obj.get(name)
            .ok_or_else(|| format!("missing field `{name}`"))
    };
    let string = |name: &str| -> std::result::Result<String, String> {
        field(name)?
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| format!("field `{name}`: expected a string"))
    };
    let array = |name: &str| -> std::result::Result<&Vec<Value>, String> {
        field(name)?
            .as_array()
            .ok_or_else(|| format!("field `{name}`: expected an array"))
    };

    let image_id = string("image_id")?;
    let caption_id = string("caption_id")?;
    let tokens = array("tokens")?
        .iter()
        .map(|v| {
            let s = v
                .as_str()
                .ok_or_else(|| "field `tokens`: expected strings".to_owned())?;
            Token::new(s).map_err(|e| format!("field `tokens`: {e}"))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let p_ref = array("p_ref")?
        .iter()
        .map(|v| {
            v.as_f64()
                .ok_or_else(|| "field `p_ref`: expected numbers".to_owned())
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let argmax = array("argmax")?
        .iter()
        .map(|v| {
            v.as_bool()
                .ok_or_else(|| "field `argmax`: expected booleans".to_owned())
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if p_ref.len() != argmax.len() {
        return Err(format!(
            "fields `p_ref` and `argmax` differ in length ({} vs {})",
            p_ref.len(),
            argmax.len()
        ));
    }
    let predictions = p_ref
        .iter()
        .zip(&argmax)
        .map(|(&p, &a)| TokenPrediction::new(p, a).map_err(|e| e.to_string()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(CaptionTrace::new(image_id, caption_id, tokens, predictions))
}

pub fn write_traces<'a>(
    mut writer: impl Write,
    traces: impl IntoIterator<Item = &'a CaptionTrace>,
) -> Result<()> {
    for t in traces {
        let record = TraceRecord {
            image_id: &t.image_id,
            caption_id: &t.caption_id,
            tokens: t.tokens.iter().map(Token::as_str).collect(),
            p_ref: t.predictions.iter().map(|p| p.probability).collect(),
            argmax: t.predictions.iter().map(|p| p.is_argmax).collect(),
        };
        serde_json::to_writer(&mut writer, &record)?;
        writer
            .write_all(b"\n")
            .map_err(|e| Error::io("<traces>", e))?;
    }
    Ok(())
}

pub fn save_traces<'a>(
    path: impl AsRef<Path>,
    traces: impl IntoIterator<Item = &'a CaptionTrace>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_traces(&mut w, traces)?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    images: Vec<ImageEntry>,
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parsed: DatasetFile =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
    Dataset::new(parsed.images)
}

pub fn save_dataset(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(
        &mut w,
        &DatasetFile {
            images: dataset.images().to_vec(),
        },
    )?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
