//! Artifact writing. Floats are printed with 17 significant digits so
//! artifacts are byte-identical across runs and round-trip exactly.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};
use sha2::{Digest, Sha256};

struct Sig17<F>(F);

macro_rules! delegate {
    ($($name:ident),*) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
            self.0.$name(w)
        })*
    };
}

impl<F: Formatter> Formatter for Sig17<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    delegate!(begin_array, end_array, end_array_value, begin_object, end_object, begin_object_value, end_object_value);
}

pub fn to_json<T: Serialize>(value: &T, pretty: bool) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    if pretty {
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
        value.serialize(&mut ser)?;
        buf.push(b'\n');
    } else {
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(CompactFormatter));
        value.serialize(&mut ser)?;
    }
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Serializes artifact writes into one output directory.
pub struct ArtifactWriter {
    dir: PathBuf,
    pub written: Vec<ArtifactRecord>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.written.retain(|r| r.name != name);
        self.written.push(ArtifactRecord { name: name.to_string(), bytes: bytes.len(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let text = to_json(value, true)?;
        self.write(name, text.as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_use_seventeen_digits() {
        #[derive(Serialize)]
        struct S {
            a: f64,
            b: Vec<f64>,
            c: Option<f64>,
        }
        let s = S { a: 0.1, b: vec![1.0, -2.5e-300], c: Some(f64::NAN) };
        let compact = to_json(&s, false).unwrap();
        assert_eq!(compact, r#"{"a":1.0000000000000001e-1,"b":[1.0000000000000000e0,-2.5000000000000000e-300],"c":null}"#);
        let v: serde_json::Value = serde_json::from_str(&compact).unwrap();
        assert_eq!(v["a"].as_f64(), Some(0.1));
        let pretty = to_json(&s, true).unwrap();
        assert!(pretty.contains("\n  \"a\": 1.0000000000000001e-1"));
    }
}
