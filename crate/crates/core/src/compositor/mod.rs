//! Ground-truth label maps from per-pixel asset contributions.

mod ppm;
mod stack_file;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::FmssId;

pub use ppm::{decode_label_map, encode_label_map, Palette};
pub use stack_file::{read_stack, write_stack, STACK_MAGIC};

/// Class id written for pixels no asset claims.
pub const UNLABELED: u8 = 255;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompositeError {
    #[error("layer {layer} has {found} weights, expected {expected} ({width}x{height})")]
    DimensionMismatch {
        layer: usize,
        found: usize,
        expected: usize,
        width: u32,
        height: u32,
    },
    #[error("layer {layer} pixel {pixel}: weight {weight} outside [0, 1]")]
    WeightOutOfRange {
        layer: usize,
        pixel: usize,
        weight: f32,
    },
    #[error("class id {0} has no palette color")]
    MissingPaletteEntry(u8),
    #[error("palette maps two class ids to color {0:?}")]
    PaletteNotInjective([u8; 3]),
    #[error("malformed PPM header: {0}")]
    MalformedHeader(String),
    #[error("pixel ({x}, {y}) has color {rgb:?}, which is not in the palette")]
    UnknownColor { x: u32, y: u32, rgb: [u8; 3] },
    #[error("malformed palette: {0}")]
    Palette(String),
    #[error("malformed contribution stack: {0}")]
    Stack(String),
    #[error("I/O error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub fmss: FmssId,
    /// Row-major influence weights in `[0, 1]`.
    pub weights: Vec<f32>,
}

/// Per-pixel contributions of every asset section drawn into one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionStack {
    width: u32,
    height: u32,
    layers: Vec<Layer>,
}

impl ContributionStack {
    pub fn new(width: u32, height: u32, layers: Vec<Layer>) -> Result<Self, CompositeError> {
        let expected = width as usize * height as usize;
        for (li, layer) in layers.iter().enumerate() {
            if layer.weights.len() != expected {
                return Err(CompositeError::DimensionMismatch {
                    layer: li,
                    found: layer.weights.len(),
                    expected,
                    width,
                    height,
                });
            }
            if let Some((pixel, &weight)) = layer
                .weights
                .iter()
                .enumerate()
                .find(|(_, w)| !(w.is_finite() && (0.0..=1.0).contains(*w)))
            {
                return Err(CompositeError::WeightOutOfRange {
                    layer: li,
                    pixel,
                    weight,
                });
            }
        }
        Ok(ContributionStack {
            width,
            height,
            layers,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }
}

/// Row-major grid of class ids; [`UNLABELED`] marks unclaimed pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl LabelMap {
    pub fn filled(width: u32, height: u32, class: u8) -> Self {
        LabelMap {
            width,
            height,
            data: vec![class; width as usize * height as usize],
        }
    }

    pub fn from_rows(rows: &[&[u8]]) -> Self {
        let height = rows.len() as u32;
        let width = rows.first().map_or(0, |r| r.len()) as u32;
        assert!(
            rows.iter().all(|r| r.len() == width as usize),
            "ragged rows"
        );
        LabelMap {
            width,
            height,
            data: rows.concat(),
        }
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }
}

/// Class id for each asset section; ids missing from the map read as unlabeled.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<LabelingEntry>", into = "Vec<LabelingEntry>")]
pub struct FmssLabeling(pub BTreeMap<FmssId, u8>);

#[derive(Serialize, Deserialize)]
struct LabelingEntry {
    #[serde(flatten)]
    fmss: FmssId,
    class_id: u8,
}

impl From<Vec<LabelingEntry>> for FmssLabeling {
    fn from(v: Vec<LabelingEntry>) -> Self {
        FmssLabeling(v.into_iter().map(|e| (e.fmss, e.class_id)).collect())
    }
}

impl From<FmssLabeling> for Vec<LabelingEntry> {
    fn from(l: FmssLabeling) -> Self {
        l.0.into_iter()
            .map(|(fmss, class_id)| LabelingEntry { fmss, class_id })
            .collect()
    }
}

impl FmssLabeling {
    pub fn class_of(&self, id: &FmssId) -> u8 {
        self.0.get(id).copied().unwrap_or(UNLABELED)
    }

    pub fn insert(&mut self, id: FmssId, class: u8) {
        self.0.insert(id, class);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Assigns each pixel to the layer with the highest influence there.
///
/// Equal weights resolve to the smaller [`FmssId`]; pixels where every weight
/// is zero, and frames with no layers, come out [`UNLABELED`]. Rows are
/// processed in parallel.
pub fn assign_pixels(stack: &ContributionStack, labeling: &FmssLabeling) -> LabelMap {
    let width = stack.width as usize;
    let mut out = LabelMap::filled(stack.width, stack.height, UNLABELED);
    if width == 0 || stack.layers.is_empty() {
        return out;
    }
    // visit layers in id order so the first strict maximum is the tie winner
    let mut order: Vec<usize> = (0..stack.layers.len()).collect();
    order.sort_by(|&a, &b| stack.layers[a].fmss.cmp(&stack.layers[b].fmss));
    let classes: Vec<u8> = stack
        .layers
        .iter()
        .map(|l| labeling.class_of(&l.fmss))
        .collect();

    out.data
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(row, pixels)| {
            let base = row * width;
            for (col, px) in pixels.iter_mut().enumerate() {
                let mut best: Option<(f32, usize)> = None;
                for &li in &order {
                    let w = stack.layers[li].weights[base + col];
                    if w > 0.0 && best.is_none_or(|(bw, _)| w > bw) {
                        best = Some((w, li));
                    }
                }
                if let Some((_, li)) = best {
                    *px = classes[li];
                }
            }
        });
    out
}
