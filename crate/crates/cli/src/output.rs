//! CSV text is the canonical output; JSON is derived from it so both formats
//! carry exactly the same digits.

use std::io::Write;
use std::path::Path;

use serde_json::{Map, Number, Value};

use crate::CliError;

/// Converts `# key=value` header lines, a column line and data rows into
/// `{"metadata": {...}, "columns": [...], "rows": [{...}, ...]}`.
pub fn csv_to_json(csv: &str) -> Value {
    let mut metadata = Map::new();
    let mut columns: Vec<String> = Vec::new();
    let mut rows = Vec::new();
    for line in csv.lines() {
        if let Some(meta) = line.strip_prefix("# ") {
            if let Some((key, value)) = meta.split_once('=') {
                metadata.insert(key.to_string(), cell(value));
            }
        } else if columns.is_empty() {
            columns = line.split(',').map(str::to_string).collect();
        } else if !line.is_empty() {
            let row: Map<String, Value> = columns
                .iter()
                .cloned()
                .zip(line.split(',').map(cell))
                .collect();
            rows.push(Value::Object(row));
        }
    }
    let mut out = Map::new();
    out.insert("metadata".into(), Value::Object(metadata));
    out.insert(
        "columns".into(),
        Value::Array(columns.into_iter().map(Value::String).collect()),
    );
    out.insert("rows".into(), Value::Array(rows));
    Value::Object(out)
}

/// A JSON number when the text is an integer or a decimal inside the double
/// range (digits preserved verbatim), a boolean for `true`/`false`, otherwise
/// a string.
pub fn cell(text: &str) -> Value {
    if let Ok(b) = text.parse::<bool>() {
        return Value::Bool(b);
    }
    if let Ok(i) = text.parse::<i64>() {
        return Value::Number(i.into());
    }
    match text.parse::<f64>() {
        Ok(x)
            if x.is_finite()
                && (x.abs() >= f64::MIN_POSITIVE || is_literal_zero(text))
                && !is_special(text) =>
        {
            match serde_json::from_str::<Number>(text) {
                Ok(n) => Value::Number(n),
                Err(_) => Value::String(text.to_string()),
            }
        }
        _ => Value::String(text.to_string()),
    }
}

fn is_literal_zero(text: &str) -> bool {
    let mantissa = text.split(['e', 'E']).next().unwrap_or("");
    !mantissa.chars().any(|c| c.is_ascii_digit() && c != '0')
}

fn is_special(text: &str) -> bool {
    let t = text.trim_start_matches(['-', '+']);
    t.eq_ignore_ascii_case("inf")
        || t.eq_ignore_ascii_case("nan")
        || t.eq_ignore_ascii_case("infinity")
}

/// Writes via a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells() {
        assert_eq!(cell("12"), Value::Number(12.into()));
        assert_eq!(cell("ok"), Value::String("ok".into()));
        assert_eq!(cell("true"), Value::Bool(true));
        assert_eq!(cell("0.000e0").to_string(), "0.000e+0");
        assert_eq!(cell("NA"), Value::String("NA".into()));
        assert_eq!(cell("-inf"), Value::String("-inf".into()));
        assert_eq!(cell("1.5e-400"), Value::String("1.5e-400".into()));
        assert_eq!(cell("2.5e400"), Value::String("2.5e400".into()));
        let long = "7.946014632966281234567890123456789e-23";
        assert_eq!(serde_json::to_string(&cell(long)).unwrap(), long);
    }

    #[test]
    fn csv_shape() {
        let json = csv_to_json("# N=4\n# tau=0.5\nk,p\n0,2.5e-1\n1,7.5e-1\n");
        assert_eq!(json["metadata"]["N"], 4);
        assert_eq!(json["metadata"]["tau"].to_string(), "0.5");
        assert_eq!(json["columns"][1], "p");
        assert_eq!(json["rows"][1]["p"].to_string(), "7.5e-1");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/out.csv");
        write_atomic(&path, "a").unwrap();
        write_atomic(&path, "b").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "b");
    }
}
