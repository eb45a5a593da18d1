//! Container for contribution stacks: magic, big-endian header length, JSON
//! header naming the layers, then each layer's weights as little-endian `f32`
//! in header order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{CompositeError, ContributionStack, Layer};
use crate::world::FmssId;

pub const STACK_MAGIC: &[u8; 9] = b"URSASTK1\n";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StackHeader {
    width: u32,
    height: u32,
    layers: Vec<FmssId>,
}

fn io(e: std::io::Error) -> CompositeError {
    CompositeError::Io(e.to_string())
}

pub fn write_stack<W: Write>(stack: &ContributionStack, mut out: W) -> Result<(), CompositeError> {
    let header = StackHeader {
        width: stack.width(),
        height: stack.height(),
        layers: stack.layers().iter().map(|l| l.fmss.clone()).collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| CompositeError::Stack(e.to_string()))?;
    out.write_all(STACK_MAGIC).map_err(io)?;
    out.write_all(&(json.len() as u64).to_be_bytes())
        .map_err(io)?;
    out.write_all(&json).map_err(io)?;
    for layer in stack.layers() {
        let mut buf = Vec::with_capacity(layer.weights.len() * 4);
        for w in &layer.weights {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        out.write_all(&buf).map_err(io)?;
    }
    Ok(())
}

pub fn read_stack<R: Read>(mut source: R) -> Result<ContributionStack, CompositeError> {
    let mut magic = [0u8; 9];
    source
        .read_exact(&mut magic)
        .map_err(|_| CompositeError::Stack("truncated magic".into()))?;
    if &magic != STACK_MAGIC {
        return Err(CompositeError::Stack("bad magic".into()));
    }
    let mut len = [0u8; 8];
    source
        .read_exact(&mut len)
        .map_err(|_| CompositeError::Stack("truncated header length".into()))?;
    let len = u64::from_be_bytes(len);
    let mut json = Vec::new();
    source
        .by_ref()
        .take(len)
        .read_to_end(&mut json)
        .map_err(io)?;
    if json.len() as u64 != len {
        return Err(CompositeError::Stack(format!(
            "header declares {len} bytes, found {}",
            json.len()
        )));
    }
    let header: StackHeader =
        serde_json::from_slice(&json).map_err(|e| CompositeError::Stack(e.to_string()))?;

    let pixels = header.width as usize * header.height as usize;
    let mut payload = Vec::new();
    source.read_to_end(&mut payload).map_err(io)?;
    let expected = pixels * 4 * header.layers.len();
    if payload.len() != expected {
        return Err(CompositeError::Stack(format!(
            "payload has {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let layers = header
        .layers
        .into_iter()
        .enumerate()
        .map(|(i, fmss)| {
            let raw = &payload[i * pixels * 4..(i + 1) * pixels * 4];
            let weights = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            Layer { fmss, weights }
        })
        .collect();
    ContributionStack::new(header.width, header.height, layers)
}
