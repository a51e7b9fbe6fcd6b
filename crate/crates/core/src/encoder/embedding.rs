use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Token written as the first line of an exported table; its vector is the
/// out-of-vocabulary fallback.
pub const UNK_TOKEN: &str = "<unk>";

/// Word vectors of a fixed dimension with an unknown-word fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
    unk: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            vectors: Vec::new(),
            unk: vec![0.0; dim],
        }
    }

    /// Seeded uniform vectors in `[-0.5, 0.5)` for every distinct word.
    pub fn random<I, S>(words: I, dim: usize, seed: u64) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table = EmbeddingTable::new(dim);
        for w in words {
            let w = w.into();
            if w == UNK_TOKEN || table.index.contains_key(&w) {
                continue;
            }
            let v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
            table.insert(w, &v).expect("dimension matches");
        }
        table
    }

    pub fn insert(&mut self, word: String, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Shape(format!(
                "vector for {word:?} has {} values, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if word == UNK_TOKEN {
            self.unk = vector.to_vec();
            return Ok(());
        }
        match self.index.get(&word) {
            Some(&i) => self.vectors[i * self.dim..(i + 1) * self.dim].copy_from_slice(vector),
            None => {
                self.index.insert(word.clone(), self.words.len());
                self.words.push(word);
                self.vectors.extend_from_slice(vector);
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn unk(&self) -> &[f64] {
        &self.unk
    }

    /// The word's vector, or the unknown vector.
    pub fn lookup(&self, word: &str) -> &[f64] {
        match self.index.get(word) {
            Some(&i) => &self.vectors[i * self.dim..(i + 1) * self.dim],
            None => &self.unk,
        }
    }

    /// Reads the common text distribution format: one word per line followed
    /// by its whitespace-separated components. A leading `count dim` header
    /// line is accepted and ignored.
    pub fn read_text<R: BufRead>(reader: R, source: &str) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let values: Vec<&str> = parts.collect();
            if n == 0 && values.len() == 1 && word.parse::<usize>().is_ok() && values[0].parse::<usize>().is_ok() {
                continue;
            }
            let vector = values
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::format(source, n + 1, e.to_string()))?;
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::format(source, n + 1, "non-finite component"));
            }
            let t = table.get_or_insert_with(|| EmbeddingTable::new(vector.len()));
            if vector.len() != t.dim || vector.is_empty() {
                return Err(Error::format(
                    source,
                    n + 1,
                    format!("expected {} components, found {}", t.dim, vector.len()),
                ));
            }
            t.insert(word.to_string(), &vector)?;
        }
        table.ok_or_else(|| Error::format(source, 0, "no vectors"))
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let fmt = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(out, "{UNK_TOKEN} {}", fmt(&self.unk))?;
        for (i, w) in self.words.iter().enumerate() {
            writeln!(out, "{w} {}", fmt(&self.vectors[i * self.dim..(i + 1) * self.dim]))?;
        }
        out.flush()?;
        Ok(())
    }
}
