//! Ground-truth annotation engine for foreground regions of document images.
//!
//! The pipeline binarizes a scan ([`binarize`]), groups foreground pixels
//! with morphology or run-length smoothing ([`morphology`]), turns each
//! group into a polygonal labeling unit ([`geometry`]), lets a user attach
//! labels to the units ([`session`]) and writes an indexed label image plus
//! an XML description ([`export`]).

pub mod binarize;
pub mod export;
pub mod geometry;
pub mod morphology;
pub mod raster;
pub mod session;

pub use binarize::{ThresholdMethod, ThresholdParams};
pub use geometry::{Contour, Point, Polygon, Rect};
pub use morphology::{ElementShape, GroupingRecipe, GroupingStep, StructuringElement};
pub use raster::{BinaryMask, GrayImage, LabelImage, Rgb, RgbImage, SourceImage};

pub use session::{
    AnnotationSession, LabelDef, LabelSet, LabelingUnit, Phase, RoiMode, SessionError,
};
