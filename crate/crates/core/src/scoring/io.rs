//! Plain-text model files.
//!
//! Layout: a version header, the transition system, layer sizes, the word,
//! tag and label tables (one entry per line, each preceded by a count line),
//! then every tensor as `tensor <name> <dims...>` followed by one line of
//! space-separated values per row. Floats are written in shortest
//! round-trip form, so a saved model reloads bit-identically.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::model::{Lexicon, ModelDims, ScorerModel};
use super::params::Tensor;
use crate::error::ModelError;
use crate::transition::SystemId;
use crate::treebank::LabelVocab;

pub const MODEL_HEADER: &str = "swiftdep-model 1";

pub fn write_model(model: &ScorerModel, out: &mut impl Write) -> Result<(), ModelError> {
    writeln!(out, "{MODEL_HEADER}")?;
    writeln!(out, "system {}", model.system.short_name())?;
    let d = &model.dims;
    writeln!(
        out,
        "dims {} {} {} {}",
        d.word_dim, d.pos_dim, d.window, d.repr_dim
    )?;
    for (name, entries) in [
        ("words", model.lexicon.words()),
        ("tags", model.lexicon.tags()),
        ("labels", model.lexicon.labels.labels()),
    ] {
        writeln!(out, "{name} {}", entries.len())?;
        for e in entries {
            writeln!(out, "{e}")?;
        }
    }
    for (name, t) in model.params.named() {
        let dims: Vec<String> = t.shape.iter().map(|d| d.to_string()).collect();
        writeln!(out, "tensor {name} {}", dims.join(" "))?;
        let width = t.data.len() / t.shape[0].max(1);
        for row in t.data.chunks(width.max(1)) {
            let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", vals.join(" "))?;
        }
    }
    Ok(())
}

pub fn save_model(model: &ScorerModel, path: &Path) -> Result<(), ModelError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ScorerModel, ModelError> {
    read_model(BufReader::new(File::open(path)?))
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String, ModelError> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, message: impl std::fmt::Display) -> ModelError {
        ModelError::Format(format!("line {}: {message}", self.line))
    }

    fn keyed(&mut self, key: &str) -> Result<Vec<String>, ModelError> {
        let l = self.next()?;
        let mut parts = l.split(' ');
        if parts.next() != Some(key) {
            return Err(self.err(format!("expected {key:?}")));
        }
        Ok(parts.map(String::from).collect())
    }

    fn number<T: std::str::FromStr>(&self, s: &str) -> Result<T, ModelError> {
        s.parse()
            .map_err(|_| self.err(format!("not a number: {s:?}")))
    }

    fn table(&mut self, key: &str) -> Result<Vec<String>, ModelError> {
        let fields = self.keyed(key)?;
        let [count] = fields.as_slice() else {
            return Err(self.err(format!("{key} line needs one count")));
        };
        let count: usize = self.number(count)?;
        (0..count).map(|_| self.next()).collect()
    }
}

pub fn read_model(reader: impl Read) -> Result<ScorerModel, ModelError> {
    let mut lines = Lines {
        inner: BufReader::new(reader).lines(),
        line: 0,
    };
    let header = lines.next()?;
    if header != MODEL_HEADER {
        return Err(lines.err(format!(
            "unsupported header {header:?}, expected {MODEL_HEADER:?}"
        )));
    }
    let system = lines.keyed("system")?;
    let system: SystemId = match system.as_slice() {
        [s] => s.parse().map_err(|e| lines.err(e))?,
        _ => return Err(lines.err("system line needs one value")),
    };
    let dims = lines.keyed("dims")?;
    let dims: Vec<usize> = dims
        .iter()
        .map(|d| lines.number(d))
        .collect::<Result<_, _>>()?;
    let [word_dim, pos_dim, window, repr_dim] = dims[..] else {
        return Err(lines.err("dims line needs four sizes"));
    };
    let dims = ModelDims {
        word_dim,
        pos_dim,
        window,
        repr_dim,
    };
    let words = lines.table("words")?;
    let tags = lines.table("tags")?;
    let labels = lines.table("labels")?;
    let lexicon = Lexicon::new(words, tags, LabelVocab::new(labels));

    // Start from a correctly shaped model and overwrite every tensor.
    let mut model = ScorerModel::new(system, lexicon, dims, 0);
    let expected = model.expected_shapes();
    let mut tensors = Vec::with_capacity(expected.len());
    for (name, shape) in &expected {
        let fields = lines.keyed("tensor")?;
        let found_name = fields.first().cloned().unwrap_or_default();
        if found_name != *name {
            return Err(lines.err(format!("expected tensor {name}, found {found_name:?}")));
        }
        let found: Vec<usize> = fields[1..]
            .iter()
            .map(|d| lines.number(d))
            .collect::<Result<_, _>>()?;
        if found != *shape {
            return Err(ModelError::Shape {
                name: name.to_string(),
                expected: shape.clone(),
                found,
            });
        }
        let rows = shape[0];
        let width: usize = shape[1..].iter().product();
        let mut data = Vec::with_capacity(rows * width);
        for _ in 0..rows {
            let l = lines.next()?;
            let row: Vec<f64> = if l.is_empty() {
                Vec::new()
            } else {
                l.split(' ')
                    .map(|v| lines.number(v))
                    .collect::<Result<_, _>>()?
            };
            if row.len() != width {
                return Err(lines.err(format!(
                    "{name}: row has {} values, expected {width}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        tensors.push(Tensor {
            shape: shape.clone(),
            data,
        });
    }
    for ((_, slot), t) in model.params.named_mut().into_iter().zip(tensors) {
        *slot = t;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::parse_conllu;

    fn tiny_model() -> ScorerModel {
        let corpus =
            parse_conllu("1\ta\t_\tX\t_\t_\t2\tdep\t_\t_\n2\tb\t_\tY\t_\t_\t0\troot\t_\t_\n\n")
                .unwrap();
        let dims = ModelDims {
            word_dim: 3,
            pos_dim: 2,
            window: 1,
            repr_dim: 4,
        };
        ScorerModel::new(SystemId::ArcSwift, Lexicon::from_corpus(&corpus), dims, 3)
    }

    #[test]
    fn round_trip_is_exact() {
        let m = tiny_model();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        let back = read_model(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_other_versions() {
        let mut buf = Vec::new();
        write_model(&tiny_model(), &mut buf).unwrap();
        let text = String::from_utf8(buf)
            .unwrap()
            .replacen("model 1", "model 2", 1);
        assert!(matches!(
            read_model(text.as_bytes()),
            Err(ModelError::Format(_))
        ));
    }

    #[test]
    fn rejects_shape_mismatch() {
        let mut buf = Vec::new();
        write_model(&tiny_model(), &mut buf).unwrap();
        let text =
            String::from_utf8(buf)
                .unwrap()
                .replacen("tensor head_b 4", "tensor head_b 5", 1);
        assert!(matches!(
            read_model(text.as_bytes()),
            Err(ModelError::Shape { .. })
        ));
    }
}
