//! Binary morphology and run-length smoothing used to group foreground
//! pixels into labeling units.
//!
//! Pixels outside the image always count as background. Structuring
//! elements are stored as horizontal spans per row, so erosion and dilation
//! cost one linear pass per distinct span plus one row combine per element
//! row.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::BinaryMask;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MorphError {
    #[error("structuring element size must be odd and >= 1, got {width}x{height}")]
    BadElement { width: u32, height: u32 },
    #[error("grouping recipe has no steps")]
    EmptyRecipe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementShape {
    Rect,
    Ellipse,
    Cross,
}

/// Horizontal run of element cells `x0..=x1` at row offset `dy`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Span {
    dy: i32,
    x0: i32,
    x1: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ElementSpec", into = "ElementSpec")]
pub struct StructuringElement {
    shape: ElementShape,
    width: u32,
    height: u32,
    spans: Vec<Span>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElementSpec {
    shape: ElementShape,
    width: u32,
    height: u32,
}

impl TryFrom<ElementSpec> for StructuringElement {
    type Error = MorphError;

    fn try_from(s: ElementSpec) -> Result<Self, MorphError> {
        StructuringElement::new(s.shape, s.width, s.height)
    }
}

impl From<StructuringElement> for ElementSpec {
    fn from(se: StructuringElement) -> Self {
        ElementSpec {
            shape: se.shape,
            width: se.width,
            height: se.height,
        }
    }
}

impl StructuringElement {
    pub fn new(shape: ElementShape, width: u32, height: u32) -> Result<Self, MorphError> {
        if width == 0 || height == 0 || width.is_multiple_of(2) || height.is_multiple_of(2) {
            return Err(MorphError::BadElement { width, height });
        }
        let (rx, ry) = ((width / 2) as i32, (height / 2) as i32);
        let (w, h) = (width as i64, height as i64);
        let degenerate = width == 1 || height == 1;
        let mut spans = Vec::new();
        for dy in -ry..=ry {
            let row: Vec<i32> = (-rx..=rx)
                .filter(|&dx| match shape {
                    _ if degenerate => true,
                    ElementShape::Rect => true,
                    ElementShape::Cross => dx == 0 || dy == 0,
                    // (dx/(w/2))^2 + (dy/(h/2))^2 <= 1, cleared of fractions.
                    ElementShape::Ellipse => {
                        let (dx, dy) = (dx as i64, dy as i64);
                        4 * dx * dx * h * h + 4 * dy * dy * w * w <= w * w * h * h
                    }
                })
                .collect();
            // Split the row's cells into maximal contiguous spans.
            let mut iter = row.into_iter().peekable();
            while let Some(start) = iter.next() {
                let mut end = start;
                while iter.peek() == Some(&(end + 1)) {
                    end = iter.next().unwrap();
                }
                spans.push(Span {
                    dy,
                    x0: start,
                    x1: end,
                });
            }
        }
        Ok(Self {
            shape,
            width,
            height,
            spans,
        })
    }

    pub fn rect(width: u32, height: u32) -> Result<Self, MorphError> {
        Self::new(ElementShape::Rect, width, height)
    }

    pub fn shape(&self) -> ElementShape {
        self.shape
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn contains(&self, dx: i32, dy: i32) -> bool {
        self.spans
            .iter()
            .any(|s| s.dy == dy && s.x0 <= dx && dx <= s.x1)
    }

    /// Cell offsets relative to the origin, row by row.
    pub fn cells(&self) -> Vec<(i32, i32)> {
        self.spans
            .iter()
            .flat_map(|s| (s.x0..=s.x1).map(move |dx| (dx, s.dy)))
            .collect()
    }

    /// Point reflection through the origin. Every supported shape is
    /// symmetric about its center, so this is the element itself.
    pub fn reflect(&self) -> Self {
        self.clone()
    }

    fn distinct_intervals(&self) -> BTreeMap<(i32, i32), usize> {
        let mut map = BTreeMap::new();
        for s in &self.spans {
            let next = map.len();
            map.entry((s.x0, s.x1)).or_insert(next);
        }
        map
    }
}

/// Output is foreground iff every element cell placed at the pixel lands on foreground.
pub fn erode(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let intervals = distinct_intervals_ordered(se);
    let passes: Vec<Vec<bool>> = intervals
        .iter()
        .map(|&(a, b)| {
            let mut out = vec![false; w * h];
            out.par_chunks_mut(w)
                .zip(mask.bits().par_chunks(w))
                .for_each(|(dst, src)| erode_row(src, dst, a, b));
            out
        })
        .collect();
    let index = se.distinct_intervals();
    let mut out = BinaryMask::empty(mask.width(), mask.height());
    out.bits_mut()
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, dst)| {
            dst.fill(true);
            for s in &se.spans {
                let src_y = y as i64 + s.dy as i64;
                if src_y < 0 || src_y >= h as i64 {
                    dst.fill(false);
                    return;
                }
                let pass = &passes[index[&(s.x0, s.x1)]];
                let src = &pass[src_y as usize * w..(src_y as usize + 1) * w];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d &= s;
                }
            }
        });
    out
}

/// Output is foreground iff the reflected element placed at the pixel hits foreground.
pub fn dilate(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let intervals = distinct_intervals_ordered(se);
    let passes: Vec<Vec<bool>> = intervals
        .iter()
        .map(|&(a, b)| {
            let mut out = vec![false; w * h];
            out.par_chunks_mut(w)
                .zip(mask.bits().par_chunks(w))
                .for_each(|(dst, src)| dilate_row(src, dst, a, b));
            out
        })
        .collect();
    let index = se.distinct_intervals();
    let mut out = BinaryMask::empty(mask.width(), mask.height());
    out.bits_mut()
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, dst)| {
            for s in &se.spans {
                let src_y = y as i64 - s.dy as i64;
                if src_y < 0 || src_y >= h as i64 {
                    continue;
                }
                let pass = &passes[index[&(s.x0, s.x1)]];
                let src = &pass[src_y as usize * w..(src_y as usize + 1) * w];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d |= s;
                }
            }
        });
    out
}

fn distinct_intervals_ordered(se: &StructuringElement) -> Vec<(i32, i32)> {
    let mut v: Vec<_> = se.distinct_intervals().into_iter().collect();
    v.sort_by_key(|&(_, i)| i);
    v.into_iter().map(|(k, _)| k).collect()
}

/// dst[x] = src[x+a..=x+b] all foreground and inside the row.
fn erode_row(src: &[bool], dst: &mut [bool], a: i32, b: i32) {
    let w = src.len() as i64;
    // run[x] = length of the foreground run starting at x.
    let mut run = vec![0u32; src.len() + 1];
    for x in (0..src.len()).rev() {
        run[x] = if src[x] { run[x + 1] + 1 } else { 0 };
    }
    let len = (b - a + 1) as i64;
    for (x, d) in dst.iter_mut().enumerate() {
        let start = x as i64 + a as i64;
        *d = start >= 0 && start + len <= w && run[start as usize] as i64 >= len;
    }
}

/// dst[x] = any foreground in src[x-b..=x-a] (clipped to the row).
fn dilate_row(src: &[bool], dst: &mut [bool], a: i32, b: i32) {
    let w = src.len() as i64;
    // last[x] = position of the last foreground pixel at or before x.
    let mut last = vec![-1i64; src.len()];
    let mut seen = -1i64;
    for (x, &v) in src.iter().enumerate() {
        if v {
            seen = x as i64;
        }
        last[x] = seen;
    }
    for (x, d) in dst.iter_mut().enumerate() {
        let hi = (x as i64 - a as i64).min(w - 1);
        let lo = (x as i64 - b as i64).max(0);
        *d = lo <= hi && hi >= 0 && last[hi as usize] >= lo;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpenClose {
    Open,
    Close,
}

pub fn open_close(mask: &BinaryMask, se: &StructuringElement, mode: OpenClose) -> BinaryMask {
    match mode {
        OpenClose::Open => dilate(&erode(mask, se), se),
        OpenClose::Close => erode(&dilate(mask, se), se),
    }
}

/// Fills background runs of length <= `run` that have foreground on both
/// sides within the same row.
pub fn rlsa_horizontal(mask: &BinaryMask, run: u32) -> BinaryMask {
    let mut out = mask.clone();
    if run == 0 {
        return out;
    }
    let w = mask.width() as usize;
    out.bits_mut()
        .par_chunks_mut(w)
        .for_each(|row| fill_row_gaps(row, run as usize));
    out
}

fn fill_row_gaps(row: &mut [bool], run: usize) {
    let mut last: Option<usize> = None;
    for x in 0..row.len() {
        if row[x] {
            if let Some(l) = last {
                let gap = x - l - 1;
                if gap > 0 && gap <= run {
                    row[l + 1..x].fill(true);
                }
            }
            last = Some(x);
        }
    }
}

/// Column-wise counterpart of [`rlsa_horizontal`].
pub fn rlsa_vertical(mask: &BinaryMask, run: u32) -> BinaryMask {
    let mut out = mask.clone();
    if run == 0 {
        return out;
    }
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let src = mask.bits();
    let dst = out.bits_mut();
    let mut last: Vec<Option<usize>> = vec![None; w];
    for y in 0..h {
        for x in 0..w {
            if src[y * w + x] {
                if let Some(l) = last[x] {
                    let gap = y - l - 1;
                    if gap > 0 && gap <= run as usize {
                        for fy in l + 1..y {
                            dst[fy * w + x] = true;
                        }
                    }
                }
                last[x] = Some(y);
            }
        }
    }
    out
}

/// Run-length smoothing. Sequential horizontal-then-vertical passes, or the
/// classic AND combination followed by a short horizontal pass of
/// `max(1, run_h / 8)`.
pub fn smooth_rlsa(mask: &BinaryMask, run_h: u32, run_v: u32, combined: bool) -> BinaryMask {
    if combined {
        let both = rlsa_horizontal(mask, run_h).intersection(&rlsa_vertical(mask, run_v));
        rlsa_horizontal(&both, (run_h / 8).max(1))
    } else {
        rlsa_vertical(&rlsa_horizontal(mask, run_h), run_v)
    }
}

/// Union of independent horizontal and vertical gap fills.
pub fn fill_gaps(mask: &BinaryMask, gap_h: u32, gap_v: u32) -> BinaryMask {
    rlsa_horizontal(mask, gap_h).union(&rlsa_vertical(mask, gap_v))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum GroupingStep {
    Erode(StructuringElement),
    Dilate(StructuringElement),
    Open(StructuringElement),
    Close(StructuringElement),
    Smooth {
        run_h: u32,
        run_v: u32,
        #[serde(default)]
        combined: bool,
    },
    FillGaps {
        gap_h: u32,
        gap_v: u32,
    },
}

impl GroupingStep {
    pub fn apply(&self, mask: &BinaryMask) -> BinaryMask {
        match self {
            GroupingStep::Erode(se) => erode(mask, se),
            GroupingStep::Dilate(se) => dilate(mask, se),
            GroupingStep::Open(se) => open_close(mask, se, OpenClose::Open),
            GroupingStep::Close(se) => open_close(mask, se, OpenClose::Close),
            GroupingStep::Smooth {
                run_h,
                run_v,
                combined,
            } => smooth_rlsa(mask, *run_h, *run_v, *combined),
            GroupingStep::FillGaps { gap_h, gap_v } => fill_gaps(mask, *gap_h, *gap_v),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupingRecipe {
    pub steps: Vec<GroupingStep>,
}

impl GroupingRecipe {
    pub fn new(steps: Vec<GroupingStep>) -> Self {
        Self { steps }
    }
}

pub fn apply_recipe(mask: &BinaryMask, recipe: &GroupingRecipe) -> Result<BinaryMask, MorphError> {
    let (first, rest) = recipe.steps.split_first().ok_or(MorphError::EmptyRecipe)?;
    Ok(rest
        .iter()
        .fold(first.apply(mask), |m, step| step.apply(&m)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(w: u32, h: u32) -> StructuringElement {
        StructuringElement::rect(w, h).unwrap()
    }

    fn single(w: u32, h: u32, x: u32, y: u32) -> BinaryMask {
        BinaryMask::from_fn(w, h, |px, py| px == x && py == y)
    }

    #[test]
    fn element_patterns() {
        let cross = StructuringElement::new(ElementShape::Cross, 3, 3).unwrap();
        assert_eq!(
            cross.cells(),
            vec![(0, -1), (-1, 0), (0, 0), (1, 0), (0, 1)]
        );
        // A 3x3 ellipse reaches its corners: (1/1.5)^2 * 2 < 1.
        let ell3 = StructuringElement::new(ElementShape::Ellipse, 3, 3).unwrap();
        assert_eq!(ell3.cells().len(), 9);
        let ell5 = StructuringElement::new(ElementShape::Ellipse, 5, 5).unwrap();
        assert!(!ell5.contains(2, 2));
        assert!(ell5.contains(2, 1));
        assert_eq!(ell5.cells().len(), 21);
        // Thin ellipses and crosses degenerate to rectangles.
        let thin = StructuringElement::new(ElementShape::Ellipse, 1, 7).unwrap();
        assert_eq!(thin.cells().len(), 7);
        let thin = StructuringElement::new(ElementShape::Cross, 9, 1).unwrap();
        assert_eq!(thin.cells().len(), 9);
    }

    #[test]
    fn even_or_zero_element_rejected() {
        assert_eq!(
            rect_err(2, 3),
            MorphError::BadElement {
                width: 2,
                height: 3
            }
        );
        assert_eq!(
            rect_err(3, 0),
            MorphError::BadElement {
                width: 3,
                height: 0
            }
        );
    }

    fn rect_err(w: u32, h: u32) -> MorphError {
        StructuringElement::rect(w, h).unwrap_err()
    }

    #[test]
    fn erode_examples() {
        assert!(erode(&BinaryMask::empty(5, 5), &rect(3, 3)).is_empty());
        let full = BinaryMask::from_fn(5, 5, |_, _| true);
        let e = erode(&full, &rect(3, 3));
        let expect = BinaryMask::from_fn(5, 5, |x, y| (1..=3).contains(&x) && (1..=3).contains(&y));
        assert_eq!(e, expect);
        assert!(erode(&single(5, 5, 2, 2), &rect(3, 3)).is_empty());
    }

    #[test]
    fn dilate_examples() {
        assert!(dilate(&BinaryMask::empty(5, 5), &rect(3, 3)).is_empty());
        let d = dilate(&single(5, 5, 2, 2), &rect(3, 3));
        let expect = BinaryMask::from_fn(5, 5, |x, y| (1..=3).contains(&x) && (1..=3).contains(&y));
        assert_eq!(d, expect);
        // Clipped at the border.
        assert_eq!(dilate(&single(5, 5, 0, 0), &rect(3, 3)).count(), 4);
    }

    #[test]
    fn open_close_examples() {
        assert!(open_close(&single(5, 5, 2, 2), &rect(3, 3), OpenClose::Open).is_empty());
        // (2,2) and (2,4) share a column; a 1-wide, 3-tall element bridges the gap.
        let two = BinaryMask::from_fn(7, 7, |x, y| x == 2 && (y == 2 || y == 4));
        let closed = open_close(&two, &rect(1, 3), OpenClose::Close);
        let expect = BinaryMask::from_fn(7, 7, |x, y| x == 2 && (2..=4).contains(&y));
        assert_eq!(closed, expect);
        // On a 5x5 canvas the bottom pixel touches the border and erodes away.
        let two = BinaryMask::from_fn(5, 5, |x, y| x == 2 && (y == 2 || y == 4));
        let closed = open_close(&two, &rect(1, 3), OpenClose::Close);
        assert_eq!(
            closed,
            BinaryMask::from_fn(5, 5, |x, y| x == 2 && (y == 2 || y == 3))
        );
    }

    #[test]
    fn rlsa_row_fill() {
        let m = BinaryMask::from_ascii(&["#..#"]);
        assert_eq!(
            smooth_rlsa(&m, 2, 0, false),
            BinaryMask::from_ascii(&["####"])
        );
        assert_eq!(smooth_rlsa(&m, 1, 0, false), m);
        let open_left = BinaryMask::from_ascii(&["..#"]);
        for run in [0, 1, 5, 100] {
            assert_eq!(smooth_rlsa(&open_left, run, 0, false), open_left);
        }
    }

    #[test]
    fn rlsa_identity_at_zero() {
        let m = BinaryMask::from_ascii(&["#.#.", ".#..", "#..#"]);
        assert_eq!(smooth_rlsa(&m, 0, 0, false), m);
        assert_eq!(fill_gaps(&m, 0, 0), m);
    }

    #[test]
    fn rlsa_vertical_and_sequential() {
        let m = BinaryMask::from_ascii(&["#..", "...", "#.#", "...", "..#"]);
        let v = rlsa_vertical(&m, 1);
        assert_eq!(
            v,
            BinaryMask::from_ascii(&["#..", "#..", "#.#", "..#", "..#"])
        );
        // Horizontal first closes row 2, then the vertical pass sees the new pixel.
        let s = smooth_rlsa(&m, 1, 1, false);
        assert_eq!(
            s,
            BinaryMask::from_ascii(&["#..", "#..", "###", "..#", "..#"])
        );
    }

    #[test]
    fn rlsa_combined() {
        // Horizontal pass joins row 0; vertical joins nothing; AND keeps originals only.
        let m = BinaryMask::from_ascii(&["#.#", "...", "..."]);
        assert_eq!(
            smooth_rlsa(&m, 1, 1, true),
            BinaryMask::from_ascii(&["###", "...", "..."])
        );
        // h(3) fills rows 0 and 2, v(1) fills columns 0 and 3; the AND keeps
        // only the originals, and the closing h(1) pass cannot bridge 2.
        let m = BinaryMask::from_ascii(&["#..#", "....", "#..#"]);
        assert_eq!(smooth_rlsa(&m, 3, 1, true), m);
        // The AND removes the horizontal fill; the closing h(1) pass restores it.
        let m = BinaryMask::from_ascii(&["#.#", "#.#"]);
        assert_eq!(
            smooth_rlsa(&m, 1, 1, true),
            BinaryMask::from_ascii(&["###", "###"])
        );
    }

    #[test]
    fn gap_fill_examples() {
        // Same-column pixels: a horizontal-only fill leaves the column gap open.
        let col = BinaryMask::from_fn(5, 5, |x, y| x == 2 && (y == 1 || y == 3));
        assert_eq!(fill_gaps(&col, 1, 0), col);
        assert!(fill_gaps(&col, 0, 1).get(2, 2));
        let row = BinaryMask::from_fn(5, 5, |x, y| y == 2 && (x == 1 || x == 3));
        let filled = fill_gaps(&row, 1, 0);
        assert!(filled.get(2, 2));
        assert_eq!(filled.count(), 3);
    }

    #[test]
    fn recipe_application() {
        let m = BinaryMask::from_ascii(&[".....", ".###.", ".###.", ".###.", "....."]);
        let se = rect(3, 3);
        let r = GroupingRecipe::new(vec![GroupingStep::Dilate(se.clone())]);
        assert_eq!(apply_recipe(&m, &r).unwrap(), dilate(&m, &se));
        let r = GroupingRecipe::new(vec![
            GroupingStep::Erode(se.clone()),
            GroupingStep::Dilate(se.clone()),
        ]);
        assert_eq!(
            apply_recipe(&m, &r).unwrap(),
            open_close(&m, &se, OpenClose::Open)
        );
        assert_eq!(
            apply_recipe(&m, &GroupingRecipe::default()),
            Err(MorphError::EmptyRecipe)
        );
    }

    #[test]
    fn recipe_json() {
        let json = r#"{"steps":[{"op":"close","shape":"rect","width":15,"height":3},
            {"op":"smooth","run_h":20,"run_v":4},{"op":"fill-gaps","gap_h":3,"gap_v":0}]}"#;
        let r: GroupingRecipe = serde_json::from_str(json).unwrap();
        assert_eq!(r.steps.len(), 3);
        assert_eq!(r.steps[0], GroupingStep::Close(rect(15, 3)));
        assert_eq!(
            r.steps[1],
            GroupingStep::Smooth {
                run_h: 20,
                run_v: 4,
                combined: false
            }
        );
        let back: GroupingRecipe =
            serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(serde_json::from_str::<GroupingRecipe>(
            r#"{"steps":[{"op":"erode","shape":"rect","width":2,"height":3}]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<GroupingRecipe>(
            r#"{"steps":[{"op":"erode","shape":"rect","width":3,"height":3,"extra":1}]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<GroupingRecipe>(r#"{"steps":[{"op":"twist"}]}"#).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn mask() -> impl Strategy<Value = BinaryMask> {
            (1u32..14, 1u32..14).prop_flat_map(|(w, h)| {
                proptest::collection::vec(any::<bool>(), (w * h) as usize)
                    .prop_map(move |bits| BinaryMask::new(w, h, bits).unwrap())
            })
        }

        fn element() -> impl Strategy<Value = StructuringElement> {
            (
                prop_oneof![
                    Just(ElementShape::Rect),
                    Just(ElementShape::Ellipse),
                    Just(ElementShape::Cross)
                ],
                0u32..3,
                0u32..3,
            )
                .prop_map(|(s, w, h)| StructuringElement::new(s, 2 * w + 1, 2 * h + 1).unwrap())
        }

        fn pad(m: &BinaryMask, p: u32) -> BinaryMask {
            BinaryMask::from_fn(m.width() + 2 * p, m.height() + 2 * p, |x, y| {
                m.get_signed(x as i64 - p as i64, y as i64 - p as i64)
            })
        }

        proptest! {
            #[test]
            fn erode_dilate_order(m in mask(), se in element()) {
                prop_assert!(erode(&m, &se).is_subset_of(&m));
                prop_assert!(m.is_subset_of(&dilate(&m, &se)));
            }

            #[test]
            fn duality_on_padded_canvas(m in mask(), se in element()) {
                // Compared on the original extent; the padding absorbs edge effects.
                let p = pad(&m, 6);
                let crop = |c: &BinaryMask| BinaryMask::from_fn(m.width(), m.height(), |x, y| c.get(x + 6, y + 6));
                prop_assert_eq!(
                    crop(&dilate(&p, &se)),
                    crop(&erode(&p.complement(), &se.reflect()).complement())
                );
            }

            #[test]
            fn open_close_idempotent(m in mask(), se in element()) {
                let open = open_close(&m, &se, OpenClose::Open);
                prop_assert!(open.is_subset_of(&m));
                prop_assert_eq!(open_close(&open, &se, OpenClose::Open), open);
                let p = pad(&m, 6);
                let close = open_close(&p, &se, OpenClose::Close);
                prop_assert!(p.is_subset_of(&close));
                prop_assert_eq!(open_close(&close, &se, OpenClose::Close), close);
            }

            #[test]
            fn rlsa_supersets(m in mask(), a in 0u32..8, b in 0u32..8) {
                let (lo, hi) = (a.min(b), a.max(b));
                prop_assert!(m.is_subset_of(&rlsa_horizontal(&m, lo)));
                prop_assert!(rlsa_horizontal(&m, lo).is_subset_of(&rlsa_horizontal(&m, hi)));
                prop_assert!(rlsa_vertical(&m, lo).is_subset_of(&rlsa_vertical(&m, hi)));
                let gaps = fill_gaps(&m, a, b);
                prop_assert!(rlsa_horizontal(&m, a).union(&rlsa_vertical(&m, b)).is_subset_of(&gaps));
                prop_assert!(gaps.is_subset_of(&smooth_rlsa(&m, a, b, false)));
            }
        }
    }
}
