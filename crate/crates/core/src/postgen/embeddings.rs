use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Word vectors of a common dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be at least 1".into()));
        }
        Ok(EmbeddingTable {
            dim,
            vectors: BTreeMap::new(),
        })
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let word = word.into();
        if vector.len() != self.dim {
            return Err(Error::InvalidField {
                field: "embedding".into(),
                message: format!(
                    "`{word}` has dimension {}, expected {}",
                    vector.len(),
                    self.dim
                ),
            });
        }
        self.vectors.insert(word, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    /// Reads the text word2vec format: a `V d` header, then `V` lines of
    /// `word v1 ... vd`.
    pub fn parse(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((i, line)) => {
                    let line = line.map_err(|e| Error::Parse {
                        line: i + 1,
                        message: e.to_string(),
                    })?;
                    if !line.trim().is_empty() {
                        break (i + 1, line);
                    }
                }
                None => {
                    return Err(Error::Parse {
                        line: 1,
                        message: "missing `V d` header".into(),
                    })
                }
            }
        };
        let fields: Vec<&str> = header.1.split_whitespace().collect();
        let parse_usize = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line: header.0,
                message: format!("header: expected `V d`, found `{}`", header.1),
            })
        };
        let [count, dim] = fields.as_slice() else {
            return Err(Error::Parse {
                line: header.0,
                message: format!("header: expected `V d`, found `{}`", header.1),
            });
        };
        let (count, dim) = (parse_usize(count)?, parse_usize(dim)?);
        let mut table = EmbeddingTable::new(dim)?;
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let vector = parts
                .map(|v| {
                    v.parse::<f64>().map_err(|_| Error::Parse {
                        line: line_no,
                        message: format!("bad component `{v}` for `{word}`"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            table.insert(word, vector).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        }
        if table.len() != count {
            return Err(Error::Parse {
                line: header.0,
                message: format!("header declares {count} words, found {}", table.len()),
            });
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(BufReader::new(file))
    }

    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.vectors.len(), self.dim)?;
        for (word, v) in &self.vectors {
            write!(w, "{word}")?;
            for x in v {
                write!(w, " {x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}
