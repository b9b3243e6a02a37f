//! Artifact writers. CSV and text files start with a `#` comment line
//! carrying the config hash; JSON files carry it as the `config_sha256`
//! field. Floats are written in full-precision scientific notation.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

use crate::CliError;

/// Pretty JSON with floats rendered by `{:e}`.
struct SciFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for SciFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:e}")
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string(value: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, SciFormatter(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .expect("serializing a Value cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Writes files into one output directory, stamping each with the hash.
pub struct Emitter {
    dir: PathBuf,
    hash: String,
    pub written: Vec<PathBuf>,
}

impl Emitter {
    pub fn new(dir: &Path, hash: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash: hash.to_string(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    /// CSV or plain text with a leading hash comment.
    pub fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let full = format!("# config_sha256={}\n{body}", self.hash);
        self.write(name, &full)
    }

    /// JSON object; `config_sha256` is inserted into it.
    pub fn json(&mut self, name: &str, mut value: Value) -> Result<(), CliError> {
        if let Value::Object(map) = &mut value {
            map.insert("config_sha256".into(), Value::String(self.hash.clone()));
        }
        self.write(name, &to_json_string(&value))
    }
}

/// CSV with the given header and rows of floats.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_are_scientific() {
        let s = to_json_string(&json!({"a": 0.25, "b": 3, "c": [1.0e-300]}));
        assert!(s.contains("\"a\": 2.5e-1"));
        assert!(s.contains("\"b\": 3"));
        assert!(s.contains("1e-300"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"], json!(0.25));
    }

    #[test]
    fn csv_rows() {
        let s = csv(&["x", "y"], vec![vec![1.0, -0.5]]);
        assert_eq!(s, "x,y\n1e0,-5e-1\n");
    }
}
