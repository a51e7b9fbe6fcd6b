use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ARTIFACT_VERSION: u32 = 1;

/// A file in the work directory and the stage that produces it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Artifact {
    pub file: &'static str,
    pub name: &'static str,
    pub stage: &'static str,
}

impl Artifact {
    pub const fn new(file: &'static str, name: &'static str, stage: &'static str) -> Self {
        Artifact { file, name, stage }
    }

    pub fn format(&self) -> String {
        format!("tweetsense-{}", self.name.replace(' ', "-"))
    }

    pub fn missing(&self) -> Error {
        Error::MissingArtifact {
            artifact: self.name,
            stage: self.stage,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Serialize)]
struct EnvelopeOut<'a, T> {
    format: String,
    version: u32,
    data: &'a T,
}

#[derive(Deserialize)]
struct EnvelopeIn<T> {
    format: String,
    version: u32,
    data: T,
}

fn open(dir: &Path, a: &Artifact) -> Result<BufReader<File>> {
    match File::open(dir.join(a.file)) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(a.missing()),
        Err(e) => Err(e.into()),
    }
}

fn check_header(a: &Artifact, format: &str, version: u32) -> Result<()> {
    if format != a.format() || version != ARTIFACT_VERSION {
        return Err(Error::format(a.file, 1, format!("expected {} v{ARTIFACT_VERSION}, found {format} v{version}", a.format())));
    }
    Ok(())
}

pub fn write_json<T: Serialize>(dir: &Path, a: &Artifact, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(dir.join(a.file))?);
    serde_json::to_writer_pretty(
        &mut out,
        &EnvelopeOut {
            format: a.format(),
            version: ARTIFACT_VERSION,
            data: value,
        },
    )?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(dir: &Path, a: &Artifact) -> Result<T> {
    let env: EnvelopeIn<T> = serde_json::from_reader(open(dir, a)?).map_err(|e| Error::format(a.file, e.line(), e.to_string()))?;
    check_header(a, &env.format, env.version)?;
    Ok(env.data)
}

/// A header line followed by one record per line.
pub fn write_jsonl<'a, T, I>(dir: &Path, a: &Artifact, items: I) -> Result<()>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let mut out = BufWriter::new(File::create(dir.join(a.file))?);
    serde_json::to_writer(
        &mut out,
        &Header {
            format: a.format(),
            version: ARTIFACT_VERSION,
        },
    )?;
    out.write_all(b"\n")?;
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(dir: &Path, a: &Artifact) -> Result<Vec<T>> {
    let mut lines = open(dir, a)?.lines();
    let first = lines.next().ok_or_else(|| Error::format(a.file, 1, "empty file"))??;
    let h: Header = serde_json::from_str(&first).map_err(|e| Error::format(a.file, 1, e.to_string()))?;
    check_header(a, &h.format, h.version)?;
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::format(a.file, n + 2, e.to_string()))?);
    }
    Ok(out)
}

/// Reads `{"tweet_id": .., "labels": [..]}` lines.
pub fn read_label_file(path: &Path) -> Result<std::collections::BTreeMap<String, crate::ontology::LabelSet>> {
    #[derive(Deserialize)]
    struct Rec {
        tweet_id: String,
        labels: crate::ontology::LabelSet,
    }
    let reader = BufReader::new(File::open(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?);
    let mut out = std::collections::BTreeMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: Rec = serde_json::from_str(&line).map_err(|e| Error::format(path.display().to_string(), n + 1, e.to_string()))?;
        out.insert(r.tweet_id, r.labels);
    }
    Ok(out)
}

pub fn file_sha(path: &Path) -> Result<String> {
    Ok(crate::seed::sha256_hex(&std::fs::read(path)?))
}
