//! Plain-text model files.
//!
//! ```text
//! moldream-mlp v1
//! 240 500 500 500 500 1
//! activation relu
//! max_len 20
//! normalization <mean> <std>
//! layer 0 240 500
//! <240 lines of 500 weights>
//! <1 line of 500 biases>
//! layer 1 500 500
//! ...
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so a written
//! model reads back bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Activation, Dense, Mlp, Model, NetError, Normalization};
use crate::selfies::ALPHABET_SIZE;

const HEADER: &str = "moldream-mlp v1";

fn push_row(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{v:?}").expect("writing to a String");
    }
    out.push('\n');
}

pub fn model_to_string(model: &Model) -> String {
    let mlp = &model.mlp;
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    let dims: Vec<String> = mlp.dims().iter().map(usize::to_string).collect();
    out.push_str(&dims.join(" "));
    out.push('\n');
    writeln!(out, "activation {}", mlp.hidden_activation().name()).unwrap();
    writeln!(out, "max_len {}", model.max_len).unwrap();
    writeln!(
        out,
        "normalization {:?} {:?}",
        model.normalization.mean, model.normalization.std
    )
    .unwrap();
    for (i, layer) in mlp.layers().iter().enumerate() {
        writeln!(out, "layer {i} {} {}", layer.inputs, layer.outputs).unwrap();
        for row in layer.weights.chunks(layer.outputs) {
            push_row(&mut out, row);
        }
        push_row(&mut out, &layer.bias);
    }
    out
}

pub fn write_model(model: &Model, path: &Path) -> Result<(), NetError> {
    fs::write(path, model_to_string(model))?;
    Ok(())
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str), NetError> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l))
            }
            None => Err(NetError::ModelFormat {
                line: self.last + 1,
                message: "unexpected end of file".into(),
            }),
        }
    }
}

fn format_error(line: usize, message: impl Into<String>) -> NetError {
    NetError::ModelFormat {
        line,
        message: message.into(),
    }
}

fn parse_values<T: std::str::FromStr>(line: usize, text: &str, expected: usize) -> Result<Vec<T>, NetError> {
    let values: Vec<T> = text
        .split_whitespace()
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| format_error(line, format!("bad number {t:?}")))
        })
        .collect::<Result<_, _>>()?;
    if values.len() != expected {
        return Err(format_error(
            line,
            format!("expected {expected} values, found {}", values.len()),
        ));
    }
    Ok(values)
}

fn keyed<'a>(line: usize, text: &'a str, key: &str) -> Result<&'a str, NetError> {
    text.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| format_error(line, format!("expected `{key} ...`")))
}

pub fn model_from_str(text: &str) -> Result<Model, NetError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let (n, header) = lines.next()?;
    if header.trim() != HEADER {
        return Err(format_error(n, format!("expected header {HEADER:?}")));
    }
    let (n, dims_line) = lines.next()?;
    let dims: Vec<usize> = dims_line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| format_error(n, format!("bad dimension {t:?}"))))
        .collect::<Result<_, _>>()?;
    if dims.len() < 2 {
        return Err(format_error(n, "dimension chain needs at least two sizes"));
    }
    let (n, act_line) = lines.next()?;
    let act_name = keyed(n, act_line, "activation")?;
    let activation = Activation::from_name(act_name.trim())
        .ok_or_else(|| format_error(n, format!("unknown activation {act_name:?}")))?;
    let (n, len_line) = lines.next()?;
    let max_len: usize = parse_values(n, keyed(n, len_line, "max_len")?, 1)?[0];
    if max_len * ALPHABET_SIZE != dims[0] {
        return Err(format_error(
            n,
            format!("max_len {max_len} does not match input size {}", dims[0]),
        ));
    }
    let (n, norm_line) = lines.next()?;
    let norm: Vec<f64> = parse_values(n, keyed(n, norm_line, "normalization")?, 2)?;
    if !(norm[0].is_finite() && norm[1].is_finite() && norm[1] > 0.0) {
        return Err(format_error(n, "normalization needs finite mean and positive std"));
    }

    let mut layers = Vec::with_capacity(dims.len() - 1);
    for (i, pair) in dims.windows(2).enumerate() {
        let (inputs, outputs) = (pair[0], pair[1]);
        let (n, head) = lines.next()?;
        let expected = format!("layer {i} {inputs} {outputs}");
        if head.trim() != expected {
            return Err(format_error(n, format!("expected {expected:?}")));
        }
        let mut weights = Vec::with_capacity(inputs * outputs);
        for _ in 0..inputs {
            let (n, row) = lines.next()?;
            weights.extend(parse_values::<f64>(n, row, outputs)?);
        }
        let (n, row) = lines.next()?;
        let bias = parse_values(n, row, outputs)?;
        layers.push(Dense {
            inputs,
            outputs,
            weights,
            bias,
        });
    }
    if let Some((i, extra)) = lines.inner.find(|(_, l)| !l.trim().is_empty()) {
        return Err(format_error(i + 1, format!("trailing content {:?}", extra.trim())));
    }
    Ok(Model {
        mlp: Mlp::from_layers(layers, activation)?,
        normalization: Normalization {
            mean: norm[0],
            std: norm[1],
        },
        max_len,
    })
}

pub fn read_model(path: &Path) -> Result<Model, NetError> {
    model_from_str(&fs::read_to_string(path)?)
}
