//! Class sets, remapping between them, and per-class IOU.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compositor::{LabelMap, Palette, UNLABELED};

const ROAD_SCENE_CLASSES: &str = include_str!("../data/road_scene_classes.csv");
const EVALUATION_CLASSES: &str = include_str!("../data/evaluation_classes.csv");
const ROAD_SCENE_TO_EVALUATION: &str = include_str!("../data/road_scene_to_evaluation.csv");
const ROAD_SCENE_PALETTE: &str = include_str!("../data/road_scene_palette.csv");
const EVALUATION_PALETTE: &str = include_str!("../data/evaluation_palette.csv");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaxonomyError {
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("class id {0} appears twice")]
    DuplicateId(u32),
    #[error("class name {0:?} appears twice")]
    DuplicateName(String),
    #[error("class ids must be contiguous from 0; {0} is missing")]
    Gap(u32),
    #[error("class id {0} is reserved or out of range (ids must be below 255)")]
    IdOutOfRange(u32),
    #[error("remap table has no entry for class id {0}")]
    Unmapped(u8),
    #[error("remap target {0:?} is neither a class id nor \"ignore\"")]
    BadTarget(String),
    #[error("maps differ in size: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("class id {0} is not in the taxonomy")]
    UnknownClass(u8),
}

/// Named classes with ids `0..len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassTaxonomy {
    names: Vec<String>,
}

#[derive(Deserialize)]
struct ClassRow {
    id: u32,
    name: String,
}

/// Reads a `id,name` CSV. Rows may come in any order.
pub fn load_taxonomy<R: Read>(source: R) -> Result<ClassTaxonomy, TaxonomyError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut by_id = BTreeMap::new();
    let mut names = BTreeSet::new();
    for row in reader.deserialize::<ClassRow>() {
        let row = row.map_err(|e| TaxonomyError::Csv(e.to_string()))?;
        if row.id >= UNLABELED as u32 {
            return Err(TaxonomyError::IdOutOfRange(row.id));
        }
        if !names.insert(row.name.clone()) {
            return Err(TaxonomyError::DuplicateName(row.name));
        }
        if by_id.insert(row.id, row.name).is_some() {
            return Err(TaxonomyError::DuplicateId(row.id));
        }
    }
    for (expected, &id) in by_id.keys().enumerate() {
        if id != expected as u32 {
            return Err(TaxonomyError::Gap(expected as u32));
        }
    }
    Ok(ClassTaxonomy {
        names: by_id.into_values().collect(),
    })
}

impl ClassTaxonomy {
    /// The 37 road-scene classes.
    pub fn road_scene() -> Self {
        load_taxonomy(ROAD_SCENE_CLASSES.as_bytes()).expect("shipped taxonomy is valid")
    }

    /// The 19 classes used for evaluation.
    pub fn evaluation() -> Self {
        load_taxonomy(EVALUATION_CLASSES.as_bytes()).expect("shipped taxonomy is valid")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, id: u8) -> bool {
        (id as usize) < self.names.len()
    }

    pub fn name(&self, id: u8) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn id_of(&self, name: &str) -> Option<u8> {
        self.names.iter().position(|n| n == name).map(|i| i as u8)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u8, &str)> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| (i as u8, n.as_str()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,name\n");
        for (id, name) in self.iter() {
            out.push_str(&format!("{id},{name}\n"));
        }
        out
    }
}

pub fn road_scene_palette() -> Palette {
    Palette::from_csv(ROAD_SCENE_PALETTE.as_bytes()).expect("shipped palette is valid")
}

pub fn evaluation_palette() -> Palette {
    Palette::from_csv(EVALUATION_PALETTE.as_bytes()).expect("shipped palette is valid")
}

/// Source class id to target id, or `None` for ignore.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RemapTable {
    map: BTreeMap<u8, Option<u8>>,
}

#[derive(Deserialize)]
struct RemapRow {
    src_id: u8,
    dst_id: String,
}

impl RemapTable {
    pub fn from_pairs<I: IntoIterator<Item = (u8, Option<u8>)>>(pairs: I) -> Self {
        RemapTable {
            map: pairs.into_iter().collect(),
        }
    }

    pub fn identity(t: &ClassTaxonomy) -> Self {
        Self::from_pairs(t.iter().map(|(id, _)| (id, Some(id))))
    }

    /// Reads `src_id,dst_id` rows where `dst_id` is a class id or `ignore`.
    pub fn from_csv<R: Read>(source: R) -> Result<Self, TaxonomyError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(source);
        let mut map = BTreeMap::new();
        for row in reader.deserialize::<RemapRow>() {
            let row = row.map_err(|e| TaxonomyError::Csv(e.to_string()))?;
            let target = if row.dst_id.eq_ignore_ascii_case("ignore") {
                None
            } else {
                match row.dst_id.parse::<u8>() {
                    Ok(id) if id != UNLABELED => Some(id),
                    _ => return Err(TaxonomyError::BadTarget(row.dst_id)),
                }
            };
            if map.insert(row.src_id, target).is_some() {
                return Err(TaxonomyError::DuplicateId(row.src_id as u32));
            }
        }
        Ok(RemapTable { map })
    }

    /// Shipped default from the 37 road-scene classes to the 19 evaluation
    /// classes. Our own choice, not a published table.
    pub fn road_scene_to_evaluation() -> Self {
        Self::from_csv(ROAD_SCENE_TO_EVALUATION.as_bytes()).expect("shipped remap is valid")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("src_id,dst_id\n");
        for (src, dst) in &self.map {
            match dst {
                Some(d) => out.push_str(&format!("{src},{d}\n")),
                None => out.push_str(&format!("{src},ignore\n")),
            }
        }
        out
    }

    pub fn get(&self, src: u8) -> Option<Option<u8>> {
        self.map.get(&src).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Checks that every source class has an entry and every target exists.
    pub fn validate(
        &self,
        source: &ClassTaxonomy,
        target: &ClassTaxonomy,
    ) -> Result<(), TaxonomyError> {
        for (id, _) in source.iter() {
            if !self.map.contains_key(&id) {
                return Err(TaxonomyError::Unmapped(id));
            }
        }
        for (&src, dst) in &self.map {
            if !source.contains(src) {
                return Err(TaxonomyError::UnknownClass(src));
            }
            if let Some(d) = dst {
                if !target.contains(*d) {
                    return Err(TaxonomyError::UnknownClass(*d));
                }
            }
        }
        Ok(())
    }
}

/// Applies the table pixelwise; ignored classes and unlabeled pixels become 255.
pub fn remap_label_map(m: &LabelMap, t: &RemapTable) -> Result<LabelMap, TaxonomyError> {
    let mut lut = [None::<u8>; 256];
    lut[UNLABELED as usize] = Some(UNLABELED);
    for (&src, &dst) in &t.map {
        if src != UNLABELED {
            lut[src as usize] = Some(dst.unwrap_or(UNLABELED));
        }
    }
    let data = m
        .data
        .iter()
        .map(|&c| lut[c as usize].ok_or(TaxonomyError::Unmapped(c)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LabelMap {
        width: m.width,
        height: m.height,
        data,
    })
}

/// How classes absent from both maps enter the mean.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbsentPolicy {
    #[default]
    Exclude,
    CountAsZero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassIou {
    pub id: u8,
    pub name: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// `None` when the class appears in neither map.
    pub iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IouReport {
    pub classes: Vec<ClassIou>,
    pub mean: Option<f64>,
    pub absent_policy: AbsentPolicy,
}

impl IouReport {
    pub fn iou_of(&self, id: u8) -> Option<f64> {
        self.classes.get(id as usize).and_then(|c| c.iou)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn class_iou(
    pred: &LabelMap,
    gt: &LabelMap,
    t: &ClassTaxonomy,
) -> Result<IouReport, TaxonomyError> {
    class_iou_with(pred, gt, t, AbsentPolicy::Exclude)
}

/// Per-class `TP / (TP + FP + FN)`. Pixels unlabeled in `gt` are skipped;
/// an unlabeled prediction on a labeled pixel is a miss for the true class.
pub fn class_iou_with(
    pred: &LabelMap,
    gt: &LabelMap,
    t: &ClassTaxonomy,
    policy: AbsentPolicy,
) -> Result<IouReport, TaxonomyError> {
    if (pred.width, pred.height) != (gt.width, gt.height) {
        return Err(TaxonomyError::DimensionMismatch(
            pred.width,
            pred.height,
            gt.width,
            gt.height,
        ));
    }
    let n = t.len();
    for &c in pred.data.iter().chain(&gt.data) {
        if c != UNLABELED && !t.contains(c) {
            return Err(TaxonomyError::UnknownClass(c));
        }
    }
    let row = (pred.width as usize).max(1);
    let zero = || vec![[0u64; 3]; n];
    let counts = pred
        .data
        .par_chunks(row)
        .zip(gt.data.par_chunks(row))
        .fold(zero, |mut acc, (p, g)| {
            for (&p, &g) in p.iter().zip(g) {
                if g == UNLABELED {
                    continue;
                }
                if p == g {
                    acc[g as usize][0] += 1;
                } else {
                    acc[g as usize][2] += 1;
                    if p != UNLABELED {
                        acc[p as usize][1] += 1;
                    }
                }
            }
            acc
        })
        .reduce(zero, |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                for k in 0..3 {
                    x[k] += y[k];
                }
            }
            a
        });

    let classes: Vec<ClassIou> = t
        .iter()
        .map(|(id, name)| {
            let [tp, fp, fn_] = counts[id as usize];
            let denom = tp + fp + fn_;
            let iou = (denom > 0).then(|| tp as f64 / denom as f64);
            ClassIou {
                id,
                name: name.to_string(),
                tp,
                fp,
                fn_,
                iou,
            }
        })
        .collect();
    let values: Vec<f64> = match policy {
        AbsentPolicy::Exclude => classes.iter().filter_map(|c| c.iou).collect(),
        AbsentPolicy::CountAsZero => classes.iter().map(|c| c.iou.unwrap_or(0.0)).collect(),
    };
    let mean = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
    Ok(IouReport {
        classes,
        mean,
        absent_policy: policy,
    })
}
