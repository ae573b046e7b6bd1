//! Annotation state machine: labels, labeling units, one-by-one and ROI
//! labeling, preview rendering and finalization.
//!
//! Phases advance `Loaded → Binarized → UnitsReady → Annotating → Finalized`.
//! Re-binarizing or regenerating units drops back to `Binarized`; when any
//! unit already carries a label the caller must pass `confirm_discard`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binarize::{self, BinarizeError, ThresholdParams};
use crate::geometry::{self, bounding_box, polygon_in_rect, Polygon, Rect, Run};
use crate::morphology::{self, GroupingRecipe, MorphError};
use crate::raster::{BinaryMask, GrayImage, LabelImage, Rgb, RgbImage, SourceImage};

/// Tolerance used for unit polygons unless the caller overrides it.
pub const DEFAULT_EPSILON: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Loaded,
    Binarized,
    UnitsReady,
    Annotating,
    Finalized,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("operation `{op}` not allowed in phase {phase:?}")]
    WrongPhase { op: &'static str, phase: Phase },
    #[error(transparent)]
    Binarize(#[from] BinarizeError),
    #[error(transparent)]
    Morph(#[from] MorphError),
    #[error("no grouping recipe has been applied")]
    NoGroupedMask,
    #[error("no foreground pixels after grouping")]
    NoForeground,
    #[error("labels already assigned; confirmation required to discard them")]
    ConfirmationRequired,
    #[error("label name must not be empty")]
    EmptyName,
    #[error("label name {0:?} already exists")]
    DuplicateName(String),
    #[error("label color {0} already in use")]
    DuplicateColor(Rgb),
    #[error("white is reserved for the background")]
    ReservedColor,
    #[error("no label indices left (maximum 255)")]
    LabelCapacityExceeded,
    #[error("label {index} is still assigned to units {units:?}")]
    LabelInUse { index: u8, units: Vec<u32> },
    #[error("unknown label index {0}")]
    UnknownLabel(u8),
    #[error("this mode needs a label")]
    LabelRequired,
    #[error("unknown unit id {0}")]
    UnknownUnit(u32),
    #[error("session is finalized and read-only")]
    SessionFinalized,
    #[error("no unit lies completely inside the region")]
    EmptyRoi,
    #[error("region {0:?} is not inside the image")]
    RoiOutOfBounds(Rect),
    #[error("units {0:?} are still unlabeled")]
    UnlabeledUnitsRemain(Vec<u32>),
    #[error("snapshot does not match the source image: {0}")]
    SnapshotMismatch(String),
}

impl SessionError {
    /// Stable machine-readable name.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::WrongPhase { .. } => "WrongPhase",
            SessionError::Binarize(BinarizeError::BadWindow(_)) => "BadWindow",
            SessionError::Binarize(BinarizeError::MissingThreshold) => "MissingThreshold",
            SessionError::Morph(MorphError::BadElement { .. }) => "BadElement",
            SessionError::Morph(MorphError::EmptyRecipe) => "EmptyRecipe",
            SessionError::NoGroupedMask => "NoGroupedMask",
            SessionError::NoForeground => "NoForeground",
            SessionError::ConfirmationRequired => "ConfirmationRequired",
            SessionError::EmptyName => "EmptyName",
            SessionError::DuplicateName(_) => "DuplicateName",
            SessionError::DuplicateColor(_) => "DuplicateColor",
            SessionError::ReservedColor => "ReservedColor",
            SessionError::LabelCapacityExceeded => "LabelCapacityExceeded",
            SessionError::LabelInUse { .. } => "LabelInUse",
            SessionError::UnknownLabel(_) => "UnknownLabel",
            SessionError::LabelRequired => "LabelRequired",
            SessionError::UnknownUnit(_) => "UnknownUnit",
            SessionError::SessionFinalized => "SessionFinalized",
            SessionError::EmptyRoi => "EmptyRoi",
            SessionError::RoiOutOfBounds(_) => "RoiOutOfBounds",
            SessionError::UnlabeledUnitsRemain(_) => "UnlabeledUnitsRemain",
            SessionError::SnapshotMismatch(_) => "SnapshotMismatch",
        }
    }
}

pub type Result<T> = std::result::Result<T, SessionError>;

/// Colors handed out to labels created without an explicit color.
pub const AUTO_PALETTE: [Rgb; 20] = [
    Rgb::new(0xE6, 0x19, 0x4B),
    Rgb::new(0x3C, 0xB4, 0x4B),
    Rgb::new(0xFF, 0xE1, 0x19),
    Rgb::new(0x43, 0x63, 0xD8),
    Rgb::new(0xF5, 0x82, 0x31),
    Rgb::new(0x91, 0x1E, 0xB4),
    Rgb::new(0x42, 0xD4, 0xF4),
    Rgb::new(0xF0, 0x32, 0xE6),
    Rgb::new(0xBF, 0xEF, 0x45),
    Rgb::new(0xFA, 0xBE, 0xD4),
    Rgb::new(0x46, 0x99, 0x90),
    Rgb::new(0xDC, 0xBE, 0xFF),
    Rgb::new(0x9A, 0x63, 0x24),
    Rgb::new(0xFF, 0xFA, 0xC8),
    Rgb::new(0x80, 0x00, 0x00),
    Rgb::new(0xAA, 0xFF, 0xC3),
    Rgb::new(0x80, 0x80, 0x00),
    Rgb::new(0xFF, 0xD8, 0xB1),
    Rgb::new(0x00, 0x00, 0x75),
    Rgb::new(0xA9, 0xA9, 0xA9),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDef {
    pub index: u8,
    pub name: String,
    pub color: Rgb,
}

/// Ordered label definitions. Indices are handed out sequentially and never
/// reused, even after deletion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    labels: Vec<LabelDef>,
    next_index: u16,
}

impl Default for LabelSet {
    fn default() -> Self {
        Self {
            labels: Vec::new(),
            next_index: 1,
        }
    }
}

impl LabelSet {
    /// Rebuilds a set from stored definitions, e.g. when importing ground truth.
    pub fn from_labels(labels: Vec<LabelDef>) -> Self {
        let next_index = labels.iter().map(|l| l.index as u16 + 1).max().unwrap_or(1);
        Self { labels, next_index }
    }

    pub fn labels(&self) -> &[LabelDef] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, index: u8) -> Option<&LabelDef> {
        self.labels.iter().find(|l| l.index == index)
    }

    pub fn by_name(&self, name: &str) -> Option<&LabelDef> {
        self.labels.iter().find(|l| l.name == name)
    }

    pub fn add(&mut self, name: &str, color: Option<Rgb>) -> Result<LabelDef> {
        let name = name.trim();
        if name.is_empty() {
            return Err(SessionError::EmptyName);
        }
        if self.by_name(name).is_some() {
            return Err(SessionError::DuplicateName(name.to_string()));
        }
        if self.next_index > 255 {
            return Err(SessionError::LabelCapacityExceeded);
        }
        let color = match color {
            Some(Rgb::WHITE) => return Err(SessionError::ReservedColor),
            Some(c) if self.color_in_use(c) => return Err(SessionError::DuplicateColor(c)),
            Some(c) => c,
            None => self.auto_color(),
        };
        let def = LabelDef {
            index: self.next_index as u8,
            name: name.to_string(),
            color,
        };
        self.next_index += 1;
        self.labels.push(def.clone());
        Ok(def)
    }

    fn remove(&mut self, index: u8) -> Result<LabelDef> {
        let pos = self
            .labels
            .iter()
            .position(|l| l.index == index)
            .ok_or(SessionError::UnknownLabel(index))?;
        Ok(self.labels.remove(pos))
    }

    fn color_in_use(&self, c: Rgb) -> bool {
        self.labels.iter().any(|l| l.color == c)
    }

    /// Next palette color, starting at the slot matching the index about to
    /// be assigned and skipping colors already taken.
    fn auto_color(&self) -> Rgb {
        let start = (self.next_index as usize - 1) % AUTO_PALETTE.len();
        (0..AUTO_PALETTE.len())
            .map(|k| AUTO_PALETTE[(start + k) % AUTO_PALETTE.len()])
            .find(|&c| !self.color_in_use(c))
            .unwrap_or_else(|| {
                // Palette exhausted by explicit colors; walk a fixed sequence instead.
                (0u32..)
                    .map(|k| {
                        Rgb::new(
                            (k * 67 + 31) as u8,
                            (k * 131 + 7) as u8,
                            (k * 29 + 101) as u8,
                        )
                    })
                    .find(|&c| c != Rgb::WHITE && !self.color_in_use(c))
                    .expect("fewer than 256 labels")
            })
    }

    /// Palette for the indexed label image: slot k holds label k's color,
    /// slot 0 is white and unused slots are black.
    pub fn palette(&self) -> Vec<Rgb> {
        let top = self
            .labels
            .iter()
            .map(|l| l.index as usize)
            .max()
            .unwrap_or(0);
        let mut pal = vec![Rgb::BLACK; top + 1];
        pal[0] = Rgb::WHITE;
        for l in &self.labels {
            pal[l.index as usize] = l.color;
        }
        pal
    }
}

/// Pixels owned by a unit, as sorted row runs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PixelSet {
    runs: Vec<Run>,
}

impl PixelSet {
    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn area(&self) -> u64 {
        self.runs.iter().map(Run::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn contains(&self, x: i32, y: i32) -> bool {
        self.runs.iter().any(|r| r.y == y && r.x0 <= x && x <= r.x1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.runs
            .iter()
            .flat_map(|r| (r.x0..=r.x1).map(move |x| (x as u32, r.y as u32)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelingUnit {
    pub id: u32,
    pub polygon: Polygon,
    pub pixels: PixelSet,
    pub bbox: Rect,
    pub label: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoiMode {
    /// Every unit inside gets the label, overwriting earlier labels.
    FillAll,
    /// Only still-unlabeled units inside get the label.
    FillUnlabeled,
    /// Nothing is assigned; the candidates are returned for individual prompting.
    PerUnit,
}

/// Serializable session state. Pixel sets are not stored; they are
/// recomputed from the polygons on restore.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub source_name: String,
    pub dpi: Option<u32>,
    pub width: u32,
    pub height: u32,
    pub phase: Phase,
    pub threshold: Option<ThresholdParams>,
    pub recipe: Option<GroupingRecipe>,
    pub epsilon: f64,
    pub labels: LabelSet,
    pub units: Vec<UnitSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitSnapshot {
    pub id: u32,
    pub polygon: Polygon,
    pub label: Option<u8>,
}

#[derive(Debug, Clone)]
pub struct AnnotationSession {
    source_name: String,
    source: SourceImage,
    threshold: Option<ThresholdParams>,
    threshold_used: Option<u8>,
    mask: Option<BinaryMask>,
    recipe: Option<GroupingRecipe>,
    grouped: Option<BinaryMask>,
    epsilon: f64,
    units: Vec<LabelingUnit>,
    labels: LabelSet,
    phase: Phase,
    output: Option<LabelImage>,
}

impl AnnotationSession {
    pub fn new(source_name: impl Into<String>, source: SourceImage) -> Self {
        Self {
            source_name: source_name.into(),
            source,
            threshold: None,
            threshold_used: None,
            mask: None,
            recipe: None,
            grouped: None,
            epsilon: DEFAULT_EPSILON,
            units: Vec::new(),
            labels: LabelSet::default(),
            phase: Phase::Loaded,
            output: None,
        }
    }

    pub fn from_gray(source_name: impl Into<String>, gray: GrayImage) -> Self {
        Self::new(
            source_name,
            SourceImage {
                gray,
                color: None,
                dpi: None,
            },
        )
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    pub fn source(&self) -> &SourceImage {
        &self.source
    }

    pub fn width(&self) -> u32 {
        self.source.gray.width()
    }

    pub fn height(&self) -> u32 {
        self.source.gray.height()
    }

    pub fn mask(&self) -> Option<&BinaryMask> {
        self.mask.as_ref()
    }

    pub fn grouped(&self) -> Option<&BinaryMask> {
        self.grouped.as_ref()
    }

    pub fn threshold(&self) -> Option<&ThresholdParams> {
        self.threshold.as_ref()
    }

    /// Intensity cut chosen by the last global or Otsu binarization.
    pub fn threshold_used(&self) -> Option<u8> {
        self.threshold_used
    }

    pub fn recipe(&self) -> Option<&GroupingRecipe> {
        self.recipe.as_ref()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn units(&self) -> &[LabelingUnit] {
        &self.units
    }

    pub fn unit(&self, id: u32) -> Option<&LabelingUnit> {
        // Ids are 1-based and contiguous.
        self.units
            .get((id as usize).wrapping_sub(1))
            .filter(|u| u.id == id)
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    /// The label image produced by [`finalize`](Self::finalize), if any.
    pub fn output(&self) -> Option<&LabelImage> {
        self.output.as_ref()
    }

    pub fn labeled_count(&self) -> usize {
        self.units.iter().filter(|u| u.label.is_some()).count()
    }

    fn ensure_mutable(&self) -> Result<()> {
        if self.phase == Phase::Finalized {
            Err(SessionError::SessionFinalized)
        } else {
            Ok(())
        }
    }

    fn ensure_annotatable(&self, op: &'static str) -> Result<()> {
        self.ensure_mutable()?;
        match self.phase {
            Phase::UnitsReady | Phase::Annotating => Ok(()),
            phase => Err(SessionError::WrongPhase { op, phase }),
        }
    }

    fn discard_units(&mut self, confirm_discard: bool) -> Result<()> {
        if self.labeled_count() > 0 && !confirm_discard {
            return Err(SessionError::ConfirmationRequired);
        }
        self.units.clear();
        Ok(())
    }

    /// Thresholds the source; returns the intensity cut for global/Otsu.
    pub fn binarize(
        &mut self,
        params: &ThresholdParams,
        confirm_discard: bool,
    ) -> Result<Option<u8>> {
        self.ensure_mutable()?;
        params.validate()?;
        self.discard_units(confirm_discard)?;
        let out = binarize::binarize(&self.source.gray, params)?;
        self.grouped = match &self.recipe {
            Some(r) => Some(morphology::apply_recipe(&out.mask, r)?),
            None => None,
        };
        self.mask = Some(out.mask);
        self.threshold = Some(params.clone());
        self.threshold_used = out.threshold;
        self.phase = Phase::Binarized;
        Ok(out.threshold)
    }

    /// Applies a grouping recipe to the binarized mask.
    pub fn set_recipe(
        &mut self,
        recipe: GroupingRecipe,
        confirm_discard: bool,
    ) -> Result<&BinaryMask> {
        self.ensure_mutable()?;
        let Some(mask) = &self.mask else {
            return Err(SessionError::WrongPhase {
                op: "set_recipe",
                phase: self.phase,
            });
        };
        let grouped = morphology::apply_recipe(mask, &recipe)?;
        self.discard_units(confirm_discard)?;
        self.grouped = Some(grouped);
        self.recipe = Some(recipe);
        self.phase = Phase::Binarized;
        Ok(self.grouped.as_ref().expect("just set"))
    }

    /// Traces the grouped mask into polygons and assigns each foreground
    /// pixel to the lowest-id unit whose polygon contains it.
    pub fn generate_units(&mut self, epsilon: Option<f64>, confirm_discard: bool) -> Result<usize> {
        self.ensure_mutable()?;
        if self.phase < Phase::Binarized {
            return Err(SessionError::WrongPhase {
                op: "generate_units",
                phase: self.phase,
            });
        }
        let grouped = self.grouped.as_ref().ok_or(SessionError::NoGroupedMask)?;
        if grouped.is_empty() {
            return Err(SessionError::NoForeground);
        }
        let epsilon = epsilon.unwrap_or(self.epsilon).max(0.0);
        let polygons: Vec<Polygon> = geometry::trace_contours(grouped)
            .iter()
            .map(|c| geometry::simplify(c, epsilon))
            .collect();
        let mask = self.mask.as_ref().expect("binarized");
        let units: Vec<LabelingUnit> = claim_pixels(mask, &polygons)
            .into_iter()
            .zip(polygons)
            .filter(|(px, _)| !px.is_empty())
            .enumerate()
            .map(|(i, (pixels, polygon))| LabelingUnit {
                id: i as u32 + 1,
                bbox: bounding_box(&polygon),
                polygon,
                pixels,
                label: None,
            })
            .collect();
        if units.is_empty() {
            return Err(SessionError::NoForeground);
        }
        self.discard_units(confirm_discard)?;
        self.epsilon = epsilon;
        self.units = units;
        self.phase = Phase::UnitsReady;
        Ok(self.units.len())
    }

    pub fn add_label(&mut self, name: &str, color: Option<Rgb>) -> Result<LabelDef> {
        self.ensure_mutable()?;
        self.labels.add(name, color)
    }

    pub fn delete_label(&mut self, index: u8) -> Result<LabelDef> {
        self.ensure_mutable()?;
        if self.labels.get(index).is_none() {
            return Err(SessionError::UnknownLabel(index));
        }
        let users: Vec<u32> = self
            .units
            .iter()
            .filter(|u| u.label == Some(index))
            .map(|u| u.id)
            .collect();
        if !users.is_empty() {
            return Err(SessionError::LabelInUse {
                index,
                units: users,
            });
        }
        self.labels.remove(index)
    }

    /// Lowest-id unit without a label.
    pub fn next_unlabeled(&self) -> Option<u32> {
        self.units.iter().find(|u| u.label.is_none()).map(|u| u.id)
    }

    pub fn unlabeled(&self) -> Vec<u32> {
        self.units
            .iter()
            .filter(|u| u.label.is_none())
            .map(|u| u.id)
            .collect()
    }

    pub fn assign_label(&mut self, unit_id: u32, label: u8) -> Result<()> {
        self.ensure_annotatable("assign_label")?;
        if self.labels.get(label).is_none() {
            return Err(SessionError::UnknownLabel(label));
        }
        let pos = self
            .unit(unit_id)
            .map(|u| u.id as usize - 1)
            .ok_or(SessionError::UnknownUnit(unit_id))?;
        self.units[pos].label = Some(label);
        self.phase = Phase::Annotating;
        Ok(())
    }

    /// Units whose polygons lie completely inside `roi`, ascending by id.
    pub fn units_in_roi(&self, roi: &Rect) -> Vec<u32> {
        self.units
            .iter()
            .filter(|u| polygon_in_rect(&u.polygon, roi))
            .map(|u| u.id)
            .collect()
    }

    /// Labels the units inside `roi` according to `mode`; returns the ids
    /// that changed (fill modes) or the candidates (per-unit mode).
    pub fn annotate_roi(
        &mut self,
        roi: Rect,
        mode: RoiMode,
        label: Option<u8>,
    ) -> Result<Vec<u32>> {
        self.ensure_annotatable("annotate_roi")?;
        if !roi.within(self.width(), self.height()) {
            return Err(SessionError::RoiOutOfBounds(roi));
        }
        let label = match (mode, label) {
            (RoiMode::PerUnit, _) => None,
            (_, None) => return Err(SessionError::LabelRequired),
            (_, Some(l)) if self.labels.get(l).is_none() => {
                return Err(SessionError::UnknownLabel(l))
            }
            (_, Some(l)) => Some(l),
        };
        let candidates = self.units_in_roi(&roi);
        if candidates.is_empty() {
            return Err(SessionError::EmptyRoi);
        }
        let affected: Vec<u32> = match mode {
            RoiMode::PerUnit => return Ok(candidates),
            RoiMode::FillAll => candidates,
            RoiMode::FillUnlabeled => candidates
                .into_iter()
                .filter(|&id| self.units[id as usize - 1].label.is_none())
                .collect(),
        };
        for &id in &affected {
            self.units[id as usize - 1].label = label;
        }
        self.phase = Phase::Annotating;
        Ok(affected)
    }

    fn base_image(&self) -> RgbImage {
        self.source
            .color
            .clone()
            .unwrap_or_else(|| RgbImage::from_gray(&self.source.gray))
    }

    /// Original image with every labeled unit's pixels painted in its label color.
    pub fn render_preview(&self) -> Result<RgbImage> {
        if self.phase < Phase::UnitsReady {
            return Err(SessionError::WrongPhase {
                op: "render_preview",
                phase: self.phase,
            });
        }
        let mut img = self.base_image();
        for unit in &self.units {
            if let Some(color) = unit.label.and_then(|l| self.labels.get(l)).map(|l| l.color) {
                for (x, y) in unit.pixels.iter() {
                    img.set(x, y, color);
                }
            }
        }
        Ok(img)
    }

    /// Preview cropped to the unit's box plus `margin`, with the unit's own
    /// pixels highlighted.
    pub fn unit_crop(&self, unit_id: u32, margin: u32) -> Result<RgbImage> {
        let unit = self
            .unit(unit_id)
            .ok_or(SessionError::UnknownUnit(unit_id))?;
        let preview = self.render_preview()?;
        let x0 = (unit.bbox.x as i64 - margin as i64).max(0) as u32;
        let y0 = (unit.bbox.y as i64 - margin as i64).max(0) as u32;
        let x1 = ((unit.bbox.right() + margin as i64) as u32).min(self.width());
        let y1 = ((unit.bbox.bottom() + margin as i64) as u32).min(self.height());
        let mut crop = preview.crop(x0, y0, x1 - x0, y1 - y0);
        for (x, y) in unit.pixels.iter() {
            let c = crop.get(x - x0, y - y0).0;
            let tint = |v: u8, t: u8| ((v as u16 + t as u16) / 2) as u8;
            crop.set(
                x - x0,
                y - y0,
                Rgb([tint(c[0], 255), tint(c[1], 0), tint(c[2], 255)]),
            );
        }
        Ok(crop)
    }

    /// Label image of the current assignments, without changing phase.
    pub fn label_image(&self) -> LabelImage {
        let mut img = LabelImage::zeros(self.width(), self.height());
        let w = self.width() as usize;
        let data = img.indices_mut();
        for unit in &self.units {
            if let Some(label) = unit.label {
                for r in unit.pixels.runs() {
                    let row = r.y as usize * w;
                    data[row + r.x0 as usize..=row + r.x1 as usize].fill(label);
                }
            }
        }
        img
    }

    pub fn finalize(&mut self) -> Result<LabelImage> {
        self.ensure_annotatable("finalize")?;
        let missing = self.unlabeled();
        if !missing.is_empty() {
            return Err(SessionError::UnlabeledUnitsRemain(missing));
        }
        let img = self.label_image();
        self.output = Some(img.clone());
        self.phase = Phase::Finalized;
        Ok(img)
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            source_name: self.source_name.clone(),
            dpi: self.source.dpi,
            width: self.width(),
            height: self.height(),
            phase: self.phase,
            threshold: self.threshold.clone(),
            recipe: self.recipe.clone(),
            epsilon: self.epsilon,
            labels: self.labels.clone(),
            units: self
                .units
                .iter()
                .map(|u| UnitSnapshot {
                    id: u.id,
                    polygon: u.polygon.clone(),
                    label: u.label,
                })
                .collect(),
        }
    }

    /// Rebuilds a session from its source image and a snapshot, recomputing
    /// the masks and unit pixel sets.
    pub fn restore(source: SourceImage, snap: SessionSnapshot) -> Result<Self> {
        let mismatch = |m: String| SessionError::SnapshotMismatch(m);
        if (source.gray.width(), source.gray.height()) != (snap.width, snap.height) {
            return Err(mismatch(format!(
                "image is {}x{}, snapshot expects {}x{}",
                source.gray.width(),
                source.gray.height(),
                snap.width,
                snap.height
            )));
        }
        let mut s = Self::new(snap.source_name, source);
        s.source.dpi = s.source.dpi.or(snap.dpi);
        s.labels = snap.labels;
        s.epsilon = snap.epsilon;
        if let Some(params) = snap.threshold {
            let out = binarize::binarize(&s.source.gray, &params)?;
            s.threshold_used = out.threshold;
            s.grouped = match &snap.recipe {
                Some(r) => Some(morphology::apply_recipe(&out.mask, r)?),
                None => None,
            };
            s.mask = Some(out.mask);
            s.threshold = Some(params);
            s.recipe = snap.recipe;
        } else if snap.phase > Phase::Loaded {
            return Err(mismatch("phase requires threshold parameters".into()));
        }
        if !snap.units.is_empty() {
            let mask = s
                .mask
                .as_ref()
                .ok_or_else(|| mismatch("units without a mask".into()))?;
            let polygons: Vec<Polygon> = snap.units.iter().map(|u| u.polygon.clone()).collect();
            for (i, (u, pixels)) in snap
                .units
                .into_iter()
                .zip(claim_pixels(mask, &polygons))
                .enumerate()
            {
                if u.id != i as u32 + 1 || pixels.is_empty() {
                    return Err(mismatch(format!("unit {} cannot be rebuilt", u.id)));
                }
                if let Some(l) = u.label {
                    if s.labels.get(l).is_none() {
                        return Err(SessionError::UnknownLabel(l));
                    }
                }
                s.units.push(LabelingUnit {
                    id: u.id,
                    bbox: bounding_box(&u.polygon),
                    polygon: u.polygon,
                    pixels,
                    label: u.label,
                });
            }
        }
        s.phase = snap.phase;
        if s.phase == Phase::Finalized {
            if !s.unlabeled().is_empty() {
                return Err(mismatch("finalized snapshot has unlabeled units".into()));
            }
            s.output = Some(s.label_image());
        }
        Ok(s)
    }
}

/// Foreground pixels inside each polygon, first claim wins.
fn claim_pixels(mask: &BinaryMask, polygons: &[Polygon]) -> Vec<PixelSet> {
    let (w, h) = (mask.width() as i32, mask.height() as i32);
    let mut claimed = vec![false; w as usize * h as usize];
    let bits = mask.bits();
    polygons
        .iter()
        .map(|poly| {
            let mut runs = Vec::new();
            for r in geometry::polygon_runs(poly) {
                if r.y < 0 || r.y >= h {
                    continue;
                }
                let (x0, x1) = (r.x0.max(0), r.x1.min(w - 1));
                let row = r.y as usize * w as usize;
                let mut open: Option<i32> = None;
                for x in x0..=x1 + 1 {
                    let take = x <= x1 && {
                        let i = row + x as usize;
                        bits[i] && !claimed[i]
                    };
                    if take {
                        claimed[row + x as usize] = true;
                        open.get_or_insert(x);
                    } else if let Some(start) = open.take() {
                        runs.push(Run {
                            y: r.y,
                            x0: start,
                            x1: x - 1,
                        });
                    }
                }
            }
            PixelSet { runs }
        })
        .collect()
}
