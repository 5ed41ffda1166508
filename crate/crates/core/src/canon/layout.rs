use std::collections::HashMap;

use crate::array::{Array, Values};
use crate::expr::{Declaration, LeafAttrs};
use crate::shape::Shape;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayoutEntry {
    pub name: String,
    pub offset: usize,
    pub shape: Shape,
    pub attrs: LeafAttrs,
}

/// Ordered placement of named arrays in a flat vector (matrices column-major).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Layout {
    entries: Vec<LayoutEntry>,
    index: HashMap<String, usize>,
    size: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LayoutError {
    #[error("missing value for `{0}`")]
    Missing(String),
    #[error("unknown name `{0}`")]
    Unknown(String),
    #[error("`{name}` has shape {found}, expected {expected}")]
    Shape {
        name: String,
        expected: Shape,
        found: Shape,
    },
    #[error("flat vector has length {found}, expected {expected}")]
    Length { expected: usize, found: usize },
}

impl Layout {
    pub fn new(decls: &[Declaration]) -> Self {
        let mut layout = Layout::default();
        for d in decls {
            layout.push(d);
        }
        layout
    }

    pub(crate) fn push(&mut self, d: &Declaration) {
        self.index.insert(d.name.clone(), self.entries.len());
        self.entries.push(LayoutEntry {
            name: d.name.clone(),
            offset: self.size,
            shape: d.shape.clone(),
            attrs: d.attrs,
        });
        self.size += d.shape.size();
    }

    pub fn entries(&self) -> &[LayoutEntry] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<&LayoutEntry> {
        self.index.get(name).map(|&k| &self.entries[k])
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.name.clone()).collect()
    }

    /// Flattens a complete assignment. Extra names are rejected.
    pub fn flatten(&self, values: &Values) -> Result<Vec<f64>, LayoutError> {
        if let Some(extra) = values.keys().find(|k| !self.index.contains_key(*k)) {
            return Err(LayoutError::Unknown(extra.clone()));
        }
        let mut out = vec![0.0; self.size];
        for e in &self.entries {
            let v = values
                .get(&e.name)
                .ok_or_else(|| LayoutError::Missing(e.name.clone()))?;
            self.write(e, v, &mut out)?;
        }
        Ok(out)
    }

    /// Like [`Layout::flatten`], but missing names are zero.
    pub fn flatten_partial(&self, values: &Values) -> Result<Vec<f64>, LayoutError> {
        let mut out = vec![0.0; self.size];
        for (name, v) in values {
            let e = self.get(name).ok_or_else(|| LayoutError::Unknown(name.clone()))?;
            self.write(e, v, &mut out)?;
        }
        Ok(out)
    }

    fn write(&self, e: &LayoutEntry, v: &Array, out: &mut [f64]) -> Result<(), LayoutError> {
        if v.shape() != &e.shape {
            return Err(LayoutError::Shape {
                name: e.name.clone(),
                expected: e.shape.clone(),
                found: v.shape().clone(),
            });
        }
        out[e.offset..e.offset + e.shape.size()].copy_from_slice(v.data());
        Ok(())
    }

    pub fn unflatten(&self, flat: &[f64]) -> Result<Values, LayoutError> {
        if flat.len() != self.size {
            return Err(LayoutError::Length {
                expected: self.size,
                found: flat.len(),
            });
        }
        Ok(self
            .entries
            .iter()
            .map(|e| {
                let data = flat[e.offset..e.offset + e.shape.size()].to_vec();
                (
                    e.name.clone(),
                    Array::new(e.shape.clone(), data).expect("layout sizes agree"),
                )
            })
            .collect())
    }
}
