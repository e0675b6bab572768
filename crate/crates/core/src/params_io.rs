//! Flat binary parameter files with a short textual header.
//!
//! ```text
//! avstyle-params 1
//! kind: audio-head
//! shape: 64 512
//! seed: 7
//! len: 33280
//! ---
//! <len little-endian f64 values>
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &str = "avstyle-params";
const VERSION: u32 = 1;
const END: &str = "---";

#[derive(Debug, Clone, PartialEq)]
pub struct ParamFile {
    pub kind: String,
    pub meta: Vec<(String, String)>,
    pub data: Vec<f64>,
}

impl ParamFile {
    pub fn new(kind: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            meta: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::ParamFormat(format!("missing header field `{key}`")))
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key)?;
        raw.parse()
            .map_err(|_| Error::ParamFormat(format!("bad value `{raw}` for `{key}`")))
    }

    pub fn get_list(&self, key: &str) -> Result<Vec<usize>> {
        self.get(key)?
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::ParamFormat(format!("bad entry `{t}` in `{key}`")))
            })
            .collect()
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::ParamFormat(format!(
                "expected `{kind}` parameters, found `{}`",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = format!("{MAGIC} {VERSION}\nkind: {}\n", self.kind);
        for (k, v) in &self.meta {
            header.push_str(&format!("{k}: {v}\n"));
        }
        header.push_str(&format!("len: {}\n{END}\n", self.data.len()));
        let mut bytes = header.into_bytes();
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut lines = Vec::new();
        loop {
            let rest = &bytes[pos..];
            let nl = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| Error::ParamFormat("unterminated header".into()))?;
            let line = std::str::from_utf8(&rest[..nl])
                .map_err(|_| Error::ParamFormat("header is not UTF-8".into()))?;
            pos += nl + 1;
            if line == END {
                break;
            }
            lines.push(line.to_string());
        }
        let mut it = lines.into_iter();
        let first = it.next().unwrap_or_default();
        let version = first
            .strip_prefix(MAGIC)
            .map(str::trim)
            .ok_or_else(|| Error::ParamFormat("missing magic line".into()))?;
        if version != VERSION.to_string() {
            return Err(Error::ParamFormat(format!("unsupported version {version}")));
        }
        let mut kind = None;
        let mut len = None;
        let mut meta = Vec::new();
        for line in it {
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| Error::ParamFormat(format!("bad header line `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "kind" => kind = Some(v.to_string()),
                "len" => {
                    len = Some(
                        v.parse::<usize>()
                            .map_err(|_| Error::ParamFormat(format!("bad len `{v}`")))?,
                    )
                }
                _ => meta.push((k.to_string(), v.to_string())),
            }
        }
        let kind = kind.ok_or_else(|| Error::ParamFormat("missing kind".into()))?;
        let len = len.ok_or_else(|| Error::ParamFormat("missing len".into()))?;
        let body = &bytes[pos..];
        if body.len() != len * 8 {
            return Err(Error::ParamFormat(format!(
                "expected {} data bytes, found {}",
                len * 8,
                body.len()
            )));
        }
        let data = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(Self { kind, meta, data })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Splits `data` into consecutive chunks of the given sizes, failing if the
/// total does not match.
pub(crate) fn split_exact<'a>(data: &'a [f64], sizes: &[usize]) -> Result<Vec<&'a [f64]>> {
    let total: usize = sizes.iter().sum();
    if total != data.len() {
        return Err(Error::ParamFormat(format!(
            "header dimensions imply {total} values, file holds {}",
            data.len()
        )));
    }
    let mut out = Vec::with_capacity(sizes.len());
    let mut rest = data;
    for &n in sizes {
        let (head, tail) = rest.split_at(n);
        out.push(head);
        rest = tail;
    }
    Ok(out)
}
