//! Model checkpoints as self-describing JSON documents.
//!
//! Numbers are written in shortest round-trip form, so `load(save(m))`
//! reproduces the parameters bit for bit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RbmParams;
use crate::scalar::Scalar;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointDoc {
    format_version: u32,
    n_visible: usize,
    n_hidden: usize,
    b: Vec<f64>,
    c: Vec<f64>,
    /// `n_hidden` rows of `n_visible` weights.
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
}

pub fn to_json<T: Scalar>(params: &RbmParams<T>) -> String {
    let f = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
    let doc = CheckpointDoc {
        format_version: FORMAT_VERSION,
        n_visible: params.n_visible(),
        n_hidden: params.n_hidden(),
        b: f(params.visible_bias()),
        c: f(params.hidden_bias()),
        w: (0..params.n_hidden()).map(|i| f(params.weight_row(i))).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("checkpoint serializes")
}

pub fn from_json<T: Scalar>(text: &str) -> Result<RbmParams<T>> {
    let doc: CheckpointDoc = serde_json::from_str(text)?;
    if doc.format_version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format_version {}",
            doc.format_version
        )));
    }
    if doc.b.len() != doc.n_visible || doc.c.len() != doc.n_hidden || doc.w.len() != doc.n_hidden {
        return Err(Error::Checkpoint("declared sizes do not match the arrays".into()));
    }
    if let Some(i) = doc.w.iter().position(|row| row.len() != doc.n_visible) {
        return Err(Error::Checkpoint(format!("weight row {i} has the wrong length")));
    }
    let conv = |v: Vec<f64>| v.into_iter().map(T::of).collect::<Vec<T>>();
    RbmParams::from_parts(
        conv(doc.b),
        conv(doc.c),
        conv(doc.w.into_iter().flatten().collect()),
    )
    .map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save<T: Scalar, W: Write>(params: &RbmParams<T>, mut out: W) -> Result<()> {
    out.write_all(to_json(params).as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn load<T: Scalar, R: Read>(mut input: R) -> Result<RbmParams<T>> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    from_json(&text)
}
