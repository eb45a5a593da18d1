use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{CompositeError, LabelMap};

/// Class id to display color, read from CSV `class_id,name,r,g,b`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Palette {
    entries: BTreeMap<u8, (String, [u8; 3])>,
}

#[derive(Serialize, Deserialize)]
struct PaletteRow {
    class_id: u8,
    name: String,
    r: u8,
    g: u8,
    b: u8,
}

impl Palette {
    pub fn from_entries<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (u8, S, [u8; 3])>,
        S: Into<String>,
    {
        Palette {
            entries: entries
                .into_iter()
                .map(|(id, n, rgb)| (id, (n.into(), rgb)))
                .collect(),
        }
    }

    pub fn from_csv<R: Read>(source: R) -> Result<Self, CompositeError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(source);
        let mut entries = BTreeMap::new();
        for (line, row) in reader.deserialize::<PaletteRow>().enumerate() {
            let row = row.map_err(|e| CompositeError::Palette(e.to_string()))?;
            if entries
                .insert(row.class_id, (row.name, [row.r, row.g, row.b]))
                .is_some()
            {
                return Err(CompositeError::Palette(format!(
                    "row {}: class id {} repeated",
                    line + 2,
                    row.class_id
                )));
            }
        }
        Ok(Palette { entries })
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for (&class_id, (name, [r, g, b])) in &self.entries {
            w.serialize(PaletteRow {
                class_id,
                name: name.clone(),
                r: *r,
                g: *g,
                b: *b,
            })
            .expect("in-memory CSV write");
        }
        String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
    }

    pub fn color(&self, class: u8) -> Option<[u8; 3]> {
        self.entries.get(&class).map(|e| e.1)
    }

    pub fn name(&self, class: u8) -> Option<&str> {
        self.entries.get(&class).map(|e| e.0.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u8, &str, [u8; 3])> {
        self.entries
            .iter()
            .map(|(&id, (n, rgb))| (id, n.as_str(), *rgb))
    }

    /// Reverse lookup table; fails if two ids share a color.
    fn inverse(&self) -> Result<HashMap<[u8; 3], u8>, CompositeError> {
        let mut inv = HashMap::with_capacity(self.entries.len());
        for (&id, (_, rgb)) in &self.entries {
            if inv.insert(*rgb, id).is_some() {
                return Err(CompositeError::PaletteNotInjective(*rgb));
            }
        }
        Ok(inv)
    }
}

/// Binary PPM (`P6`, maxval 255), one palette color per pixel.
pub fn encode_label_map(m: &LabelMap, palette: &Palette) -> Result<Vec<u8>, CompositeError> {
    let header = format!("P6\n{} {}\n255\n", m.width, m.height);
    let mut out = Vec::with_capacity(header.len() + m.data.len() * 3);
    out.extend_from_slice(header.as_bytes());
    for &class in &m.data {
        let rgb = palette
            .color(class)
            .ok_or(CompositeError::MissingPaletteEntry(class))?;
        out.extend_from_slice(&rgb);
    }
    Ok(out)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.at < self.bytes.len() {
            match self.bytes[self.at] {
                b'#' => {
                    while self.at < self.bytes.len() && self.bytes[self.at] != b'\n' {
                        self.at += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.at += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self, what: &str) -> Result<&[u8], CompositeError> {
        self.skip_space_and_comments();
        let start = self.at;
        while self.at < self.bytes.len() && !self.bytes[self.at].is_ascii_whitespace() {
            self.at += 1;
        }
        if start == self.at {
            return Err(CompositeError::MalformedHeader(format!("missing {what}")));
        }
        Ok(&self.bytes[start..self.at])
    }

    fn number(&mut self, what: &str) -> Result<u32, CompositeError> {
        let tok = self.token(what)?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CompositeError::MalformedHeader(format!("{what} is not a number")))
    }
}

pub fn decode_label_map(bytes: &[u8], palette: &Palette) -> Result<LabelMap, CompositeError> {
    let inverse = palette.inverse()?;
    let mut cur = HeaderCursor { bytes, at: 0 };
    if cur.token("magic")? != b"P6" {
        return Err(CompositeError::MalformedHeader("magic is not P6".into()));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(CompositeError::MalformedHeader(format!(
            "maxval {maxval}, only 255 is supported"
        )));
    }
    match bytes.get(cur.at) {
        Some(c) if c.is_ascii_whitespace() => cur.at += 1,
        _ => {
            return Err(CompositeError::MalformedHeader(
                "no whitespace after maxval".into(),
            ))
        }
    }
    let payload = &bytes[cur.at..];
    let expected = width as usize * height as usize * 3;
    if payload.len() != expected {
        return Err(CompositeError::MalformedHeader(format!(
            "payload has {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let mut data = Vec::with_capacity(expected / 3);
    for (i, px) in payload.chunks_exact(3).enumerate() {
        let rgb = [px[0], px[1], px[2]];
        let class = inverse
            .get(&rgb)
            .copied()
            .ok_or(CompositeError::UnknownColor {
                x: (i % width as usize) as u32,
                y: (i / width as usize) as u32,
                rgb,
            })?;
        data.push(class);
    }
    Ok(LabelMap {
        width,
        height,
        data,
    })
}
