//! Dataset schema, ingestion, validation, and synthetic generation.
//!
//! Annotation files are JSON with this exact shape:
//!
//! ```json
//! {
//!   "version": 1,
//!   "images": [
//!     {
//!       "id": "img_0001",
//!       "width": 100.0,
//!       "height": 100.0,
//!       "objects": [{"label": "person", "x": 5.0, "y": 5.0, "w": 20.0, "h": 40.0}],
//!       "relationships": [{"s": 0, "p": 1, "o": 1, "fmap": "fm_0001.fmap"}]
//!     }
//!   ],
//!   "predicates": ["carry", "ride"]
//! }
//! ```
//!
//! `s`/`o` index into the image's object list, `p` into the predicate
//! vocabulary; `fmap` is an optional feature-map reference for appearance
//! models and names a file relative to the feature-map directory.

pub mod synth;

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{BoundingBox, ImageSize};

/// A (subject label, predicate name, object label) triplet type.
pub type TripletType = (String, String, String);

pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub label: String,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl ObjectRecord {
    pub fn bbox(&self) -> BoundingBox {
        BoundingBox::new(self.x, self.y, self.w, self.h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationshipRecord {
    /// Subject object index within the image.
    pub s: usize,
    /// Predicate index into the dataset vocabulary.
    pub p: usize,
    /// Object object index within the image.
    pub o: usize,
    /// Optional feature-map reference for appearance models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fmap: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub width: f64,
    pub height: f64,
    pub objects: Vec<ObjectRecord>,
    pub relationships: Vec<RelationshipRecord>,
}

impl ImageRecord {
    pub fn size(&self) -> ImageSize {
        ImageSize::new(self.width, self.height)
    }
}

/// A validated dataset: images with objects and relationship triplets,
/// plus the predicate vocabulary and the derived object-label vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub version: u32,
    pub images: Vec<ImageRecord>,
    pub predicates: Vec<String>,
    /// Deduplicated, sorted object labels; derived, not serialized.
    #[serde(skip)]
    pub object_vocab: Vec<String>,
}

impl Dataset {
    pub fn new(images: Vec<ImageRecord>, predicates: Vec<String>) -> Self {
        let mut ds = Dataset {
            version: DATASET_VERSION,
            images,
            predicates,
            object_vocab: Vec::new(),
        };
        ds.rebuild_vocab();
        ds
    }

    fn rebuild_vocab(&mut self) {
        let set: BTreeSet<&str> = self
            .images
            .iter()
            .flat_map(|img| img.objects.iter().map(|o| o.label.as_str()))
            .collect();
        self.object_vocab = set.into_iter().map(String::from).collect();
    }

    /// Parse and fully validate an annotation stream; the first violation
    /// aborts the load, naming the offending image.
    pub fn load(reader: impl Read) -> Result<Self> {
        let mut ds: Dataset = serde_json::from_reader(reader)?;
        if ds.version != DATASET_VERSION {
            return Err(Error::UnsupportedVersion(ds.version));
        }
        ds.rebuild_vocab();
        if let Some(v) = ds.validate().into_iter().next() {
            return Err(Error::DatasetViolation {
                image: v.image,
                message: v.message,
            });
        }
        Ok(ds)
    }

    pub fn save(&self, writer: &mut impl Write) -> Result<()> {
        serde_json::to_writer_pretty(&mut *writer, self)?;
        writer.write_all(b"\n")?;
        Ok(())
    }

    /// Collect schema violations without mutating or aborting. An empty
    /// report means the dataset is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut complain = |image: &str, message: String| {
            out.push(Violation {
                image: image.to_string(),
                message,
            });
        };
        for img in &self.images {
            let size = img.size();
            if !size.is_proper() {
                complain(
                    &img.id,
                    format!("degenerate image size {}x{}", img.width, img.height),
                );
            }
            for (i, obj) in img.objects.iter().enumerate() {
                let b = obj.bbox();
                if !b.is_proper() {
                    complain(
                        &img.id,
                        format!(
                            "object {i} ({}) has a degenerate box (w={}, h={})",
                            obj.label, obj.w, obj.h
                        ),
                    );
                } else if size.is_proper() && !b.fits_in(&size) {
                    complain(
                        &img.id,
                        format!("object {i} ({}) exceeds the image bounds", obj.label),
                    );
                }
            }
            for (r, rel) in img.relationships.iter().enumerate() {
                if rel.s >= img.objects.len() {
                    complain(
                        &img.id,
                        format!("relationship {r}: subject index {} out of range", rel.s),
                    );
                }
                if rel.o >= img.objects.len() {
                    complain(
                        &img.id,
                        format!("relationship {r}: object index {} out of range", rel.o),
                    );
                }
                if rel.p >= self.predicates.len() {
                    complain(
                        &img.id,
                        format!(
                            "relationship {r}: predicate index {} out of range ({} predicates)",
                            rel.p,
                            self.predicates.len()
                        ),
                    );
                }
            }
        }
        out
    }

    /// Deduplicated set of (subject label, predicate name, object label)
    /// types present in the annotations.
    pub fn triplet_types(&self) -> BTreeSet<TripletType> {
        let mut set = BTreeSet::new();
        for img in &self.images {
            for rel in &img.relationships {
                if let (Some(s), Some(p), Some(o)) = (
                    img.objects.get(rel.s),
                    self.predicates.get(rel.p),
                    img.objects.get(rel.o),
                ) {
                    set.insert((s.label.clone(), p.clone(), o.label.clone()));
                }
            }
        }
        set
    }

    /// Triplets as (subject label, predicate index, object label), the
    /// form consumed by [`crate::model::ComboTable`].
    pub fn indexed_triplets(&self) -> Vec<(String, usize, String)> {
        let mut out = Vec::new();
        for img in &self.images {
            for rel in &img.relationships {
                if let (Some(s), Some(o)) = (img.objects.get(rel.s), img.objects.get(rel.o)) {
                    out.push((s.label.clone(), rel.p, o.label.clone()));
                }
            }
        }
        out
    }

    pub fn relationship_count(&self) -> usize {
        self.images.iter().map(|i| i.relationships.len()).sum()
    }
}

/// One schema violation found by [`Dataset::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub image: String,
    pub message: String,
}
