//! Versioned text checkpoints.
//!
//! ```text
//! QFGN-CKPT v1
//! kind qfgn
//! seed 3
//! final_loss 1.2345678901234567e-3
//! config 42
//! <42 lines of TOML run configuration>
//! circuit 400
//! <400 lines of circuit text>
//! tensor fgfs.bias 16
//! <values, one row of the last dimension per line>
//! end
//! ```
//!
//! Values use 17 significant digits, so every `f64` round-trips exactly.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::circuit::{parse_circuit, CircuitSpec};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::models::{build_model_with, Model, ModelKind};

pub const FORMAT_VERSION: &str = "v1";
const MAGIC: &str = "QFGN-CKPT";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub seed: u64,
    pub final_loss: f64,
    pub config: RunConfig,
    pub circuit: CircuitSpec,
    /// Every model tensor, including fixed ones and running statistics.
    pub tensors: Vec<Tensor>,
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl Checkpoint {
    pub fn from_model(model: &Model, config: &RunConfig, final_loss: f64) -> Self {
        let mut config = config.clone();
        config.model = model.kind;
        Checkpoint {
            kind: model.kind,
            seed: model.seed,
            final_loss,
            config,
            circuit: (*model.circuit).clone(),
            tensors: model
                .params()
                .into_iter()
                .map(|p| Tensor {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    values: p.value.clone(),
                })
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
        let _ = writeln!(out, "kind {}", self.kind);
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(out, "final_loss {}", fmt_f64(self.final_loss));
        for (label, body) in [("config", self.config.to_toml()), ("circuit", self.circuit.to_text())] {
            let lines: Vec<&str> = body.lines().collect();
            let _ = writeln!(out, "{label} {}", lines.len());
            for l in lines {
                out.push_str(l);
                out.push('\n');
            }
        }
        for t in &self.tensors {
            let dims: Vec<String> = t.shape.iter().map(|d| d.to_string()).collect();
            let _ = writeln!(out, "tensor {} {}", t.name, dims.join(" "));
            let row = t.shape.last().copied().unwrap_or(1).max(1);
            for chunk in t.values.chunks(row) {
                let vals: Vec<String> = chunk.iter().map(|&v| fmt_f64(v)).collect();
                out.push_str(&vals.join(" "));
                out.push('\n');
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_checkpoint(&text)
    }

    /// Rebuilds the model and restores every stored tensor.
    pub fn to_model(&self) -> Result<Model> {
        let mut model = build_model_with(
            self.kind,
            &self.config.model_config(),
            Arc::new(self.circuit.clone()),
            self.seed,
        )?;
        let mut params = model.params_mut();
        if params.len() != self.tensors.len() {
            return Err(Error::Format(format!(
                "checkpoint holds {} tensors, a {} model has {}",
                self.tensors.len(),
                self.kind,
                params.len()
            )));
        }
        for (p, t) in params.iter_mut().zip(&self.tensors) {
            if p.name != t.name || p.shape != t.shape {
                return Err(Error::Format(format!(
                    "tensor {} {:?} does not match model tensor {} {:?}",
                    t.name, t.shape, p.name, p.shape
                )));
            }
            p.value.copy_from_slice(&t.values);
        }
        model.refresh();
        Ok(model)
    }
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.iter.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l))
            }
            None => Err(Error::parse(self.last + 1, format!("unexpected end of checkpoint, expected {what}"))),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, l) = self.next(key)?;
        match l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')) {
            Some(rest) => Ok((n, rest)),
            None => Err(Error::parse(n, format!("expected '{key} …', found '{}'", truncate(l)))),
        }
    }

    fn block(&mut self, key: &str) -> Result<String> {
        let (n, count) = self.keyed(key)?;
        let count: usize = count
            .parse()
            .map_err(|_| Error::parse(n, format!("bad {key} line count '{count}'")))?;
        let mut body = String::new();
        for _ in 0..count {
            let (_, l) = self.next(key)?;
            body.push_str(l);
            body.push('\n');
        }
        Ok(body)
    }
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(40) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

pub fn parse_checkpoint(text: &str) -> Result<Checkpoint> {
    let mut lines = Lines {
        iter: text.lines().enumerate(),
        last: 0,
    };
    let (_, header) = lines.next("header")?;
    let version = header
        .strip_prefix(MAGIC)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| Error::Format(format!("not a checkpoint: header must start with '{MAGIC}'")))?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "checkpoint version {} is not supported; this build reads {FORMAT_VERSION}",
            truncate(version)
        )));
    }
    let (n, kind) = lines.keyed("kind")?;
    let kind: ModelKind = kind.parse().map_err(|_| Error::parse(n, format!("unknown model kind '{}'", truncate(kind))))?;
    let (n, seed) = lines.keyed("seed")?;
    let seed: u64 = seed.parse().map_err(|_| Error::parse(n, "bad seed"))?;
    let (n, loss) = lines.keyed("final_loss")?;
    let final_loss: f64 = loss.parse().map_err(|_| Error::parse(n, "bad final_loss"))?;
    let config_line = lines.last + 1;
    let config = RunConfig::parse(&lines.block("config")?).map_err(|e| Error::parse(config_line, e.to_string()))?;
    let circuit = parse_circuit(&lines.block("circuit")?)?;
    let mut tensors = Vec::new();
    loop {
        let (n, l) = lines.next("tensor or end")?;
        if l == "end" {
            break;
        }
        let rest = l
            .strip_prefix("tensor ")
            .ok_or_else(|| Error::parse(n, format!("expected 'tensor' or 'end', found '{}'", truncate(l))))?;
        let mut parts = rest.split(' ');
        let name = parts.next().filter(|s| !s.is_empty()).ok_or_else(|| Error::parse(n, "tensor without name"))?;
        let shape = parts
            .map(|d| d.parse::<usize>().map_err(|_| Error::parse(n, format!("bad dimension '{}'", truncate(d)))))
            .collect::<Result<Vec<_>>>()?;
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::parse(n, "tensor size overflows"))?;
        let row = shape.last().copied().unwrap_or(1).max(1);
        // bounded by the remaining text: every value needs at least two bytes
        if count > text.len() {
            return Err(Error::parse(n, format!("tensor {name} claims {count} values")));
        }
        let mut values = Vec::with_capacity(count);
        while values.len() < count {
            let (m, l) = lines.next("tensor values")?;
            let before = values.len();
            for tok in l.split(' ') {
                values.push(tok.parse::<f64>().map_err(|_| Error::parse(m, format!("bad value '{}'", truncate(tok))))?);
            }
            if values.len() - before != row.min(count - before) {
                return Err(Error::parse(m, format!("expected {} values on this line", row.min(count - before))));
            }
        }
        tensors.push(Tensor {
            name: name.to_string(),
            shape,
            values,
        });
    }
    if lines.iter.next().is_some() {
        return Err(Error::parse(lines.last + 1, "content after 'end'"));
    }
    if config.model != kind {
        return Err(Error::parse(2, format!("kind {kind} disagrees with configured model {}", config.model)));
    }
    Ok(Checkpoint {
        kind,
        seed,
        final_loss,
        config,
        circuit,
        tensors,
    })
}
