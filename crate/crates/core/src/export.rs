//! Ground-truth output: an indexed PNG (`<stem>_gt.png`) plus an XML
//! description (`<stem>_gt.xml`), and the matching import, validation and
//! corpus statistics.
//!
//! The XML is written byte-deterministically: fixed attribute order,
//! two-space indentation, `\n` line endings, UTF-8.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{bounding_box, Point, Polygon, Rect};
use crate::raster::{self, LabelImage, RasterError, Rgb};
use crate::session::{AnnotationSession, LabelDef, Phase};

pub const ROOT_ELEMENT: &str = "anveshak-groundtruth";
pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("session is not finalized")]
    NotFinalized,
    #[error("schema violation at line {line}, <{element}>: {message}")]
    SchemaViolation {
        line: u32,
        element: String,
        message: String,
    },
    #[error("label image not found: {0}")]
    MissingPng(PathBuf),
    #[error("label image uses indices {0:?} that have no label")]
    IndexMismatch(Vec<u8>),
    #[error("label image disagrees with the XML: {0}")]
    PngMismatch(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ExportError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourceInfo {
    pub file: String,
    pub width: u32,
    pub height: u32,
    pub dpi: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnitRecord {
    pub id: u32,
    pub label_index: u8,
    pub area: u64,
    pub bbox: Rect,
    pub polygon: Polygon,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroundtruthDocument {
    pub source: SourceInfo,
    pub labels: Vec<LabelDef>,
    pub units: Vec<UnitRecord>,
}

impl GroundtruthDocument {
    pub fn from_session(session: &AnnotationSession) -> Result<Self> {
        if session.phase() != Phase::Finalized {
            return Err(ExportError::NotFinalized);
        }
        let file = Path::new(session.source_name()).file_name().map_or_else(
            || session.source_name().to_string(),
            |f| f.to_string_lossy().into_owned(),
        );
        Ok(Self {
            source: SourceInfo {
                file,
                width: session.width(),
                height: session.height(),
                dpi: session.source().dpi,
            },
            labels: session.labels().labels().to_vec(),
            units: session
                .units()
                .iter()
                .map(|u| UnitRecord {
                    id: u.id,
                    label_index: u.label.expect("finalized units are labeled"),
                    area: u.pixels.area(),
                    bbox: u.bbox,
                    polygon: u.polygon.clone(),
                })
                .collect(),
        })
    }

    /// Slot k holds label k's color, slot 0 white, gaps black.
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

    pub fn to_xml(&self) -> String {
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        let _ = writeln!(out, "<{ROOT_ELEMENT} version=\"{SCHEMA_VERSION}\">");
        let s = &self.source;
        let _ = write!(
            out,
            "  <source file=\"{}\" width=\"{}\" height=\"{}\"",
            escape(&s.file),
            s.width,
            s.height
        );
        if let Some(dpi) = s.dpi {
            let _ = write!(out, " dpi=\"{dpi}\"");
        }
        out.push_str("/>\n  <labels>\n");
        for l in &self.labels {
            let _ = writeln!(
                out,
                "    <label index=\"{}\" name=\"{}\" color=\"{}\"/>",
                l.index,
                escape(&l.name),
                l.color
            );
        }
        let _ = writeln!(out, "  </labels>\n  <units count=\"{}\">", self.units.len());
        for u in &self.units {
            let b = u.bbox;
            let _ = writeln!(
                out,
                "    <unit id=\"{}\" label-index=\"{}\" area=\"{}\" bbox=\"{},{},{},{}\">",
                u.id, u.label_index, u.area, b.x, b.y, b.w, b.h
            );
            let points: Vec<String> = u
                .polygon
                .vertices()
                .iter()
                .map(|p| format!("{},{}", p.x, p.y))
                .collect();
            let _ = writeln!(out, "      <polygon points=\"{}\"/>", points.join(" "));
            out.push_str("    </unit>\n");
        }
        let _ = writeln!(out, "  </units>\n</{ROOT_ELEMENT}>");
        out
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\n' => out.push_str("&#10;"),
            '\t' => out.push_str("&#9;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    out
}

/// File stem shared by both outputs.
pub fn output_stem(source_name: &str) -> String {
    Path::new(source_name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "image".to_string())
}

/// In-memory export: indexed PNG bytes and XML text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedGroundtruth {
    pub stem: String,
    pub png: Vec<u8>,
    pub xml: String,
}

impl RenderedGroundtruth {
    pub fn png_name(&self) -> String {
        format!("{}_gt.png", self.stem)
    }

    pub fn xml_name(&self) -> String {
        format!("{}_gt.xml", self.stem)
    }
}

pub fn render_groundtruth(session: &AnnotationSession) -> Result<RenderedGroundtruth> {
    let doc = GroundtruthDocument::from_session(session)?;
    let image = session.output().ok_or(ExportError::NotFinalized)?;
    let png = raster::encode_indexed_png(image, &doc.palette())?;
    Ok(RenderedGroundtruth {
        stem: output_stem(session.source_name()),
        png,
        xml: doc.to_xml(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportPaths {
    pub png: PathBuf,
    pub xml: PathBuf,
}

pub fn export_groundtruth(
    session: &AnnotationSession,
    out_dir: impl AsRef<Path>,
) -> Result<ExportPaths> {
    let rendered = render_groundtruth(session)?;
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let paths = ExportPaths {
        png: dir.join(rendered.png_name()),
        xml: dir.join(rendered.xml_name()),
    };
    std::fs::write(&paths.png, &rendered.png)?;
    std::fs::write(&paths.xml, rendered.xml.as_bytes())?;
    Ok(paths)
}

/// `foo_gt.xml` pairs with `foo_gt.png`.
pub fn png_path_for(xml_path: &Path) -> PathBuf {
    xml_path.with_extension("png")
}

struct Parser<'a> {
    doc: &'a roxmltree::Document<'a>,
}

impl<'a> Parser<'a> {
    fn err(&self, node: roxmltree::Node, message: impl Into<String>) -> ExportError {
        let line = self.doc.text_pos_at(node.range().start).row;
        let element = if node.is_element() {
            node.tag_name().name().to_string()
        } else {
            "#text".into()
        };
        ExportError::SchemaViolation {
            line,
            element,
            message: message.into(),
        }
    }

    fn children(&self, node: roxmltree::Node<'a, 'a>) -> Result<Vec<roxmltree::Node<'a, 'a>>> {
        let mut out = Vec::new();
        for c in node.children() {
            if c.is_element() {
                out.push(c);
            } else if c.is_text() && !c.text().unwrap_or("").trim().is_empty() {
                return Err(self.err(c, "unexpected text content"));
            }
        }
        Ok(out)
    }

    fn expect_name(&self, node: roxmltree::Node, name: &str) -> Result<()> {
        if node.tag_name().name() != name || node.tag_name().namespace().is_some() {
            return Err(self.err(node, format!("expected <{name}>")));
        }
        Ok(())
    }

    fn only_attrs(&self, node: roxmltree::Node, allowed: &[&str]) -> Result<()> {
        match node
            .attributes()
            .find(|a| !allowed.contains(&a.name()) || a.namespace().is_some())
        {
            Some(a) => Err(self.err(node, format!("unexpected attribute `{}`", a.name()))),
            None => Ok(()),
        }
    }

    fn attr(&self, node: roxmltree::Node<'a, 'a>, name: &str) -> Result<&'a str> {
        node.attribute(name)
            .ok_or_else(|| self.err(node, format!("missing attribute `{name}`")))
    }

    fn num<T: std::str::FromStr>(&self, node: roxmltree::Node<'a, 'a>, name: &str) -> Result<T> {
        let raw = self.attr(node, name)?;
        // Plain decimal digits only, so the text round-trips byte-exactly.
        let canonical = !raw.is_empty()
            && raw.bytes().all(|b| b.is_ascii_digit())
            && (raw == "0" || !raw.starts_with('0'));
        match raw.parse() {
            Ok(v) if canonical => Ok(v),
            _ => Err(self.err(
                node,
                format!("attribute `{name}` is not a valid number: {raw:?}"),
            )),
        }
    }

    fn leaf(&self, node: roxmltree::Node<'a, 'a>) -> Result<()> {
        if let Some(c) = self.children(node)?.first() {
            return Err(self.err(*c, "unexpected child element"));
        }
        Ok(())
    }
}

fn parse_int_list(s: &str) -> Option<Vec<i32>> {
    s.split(',')
        .map(|t| if t.is_empty() { None } else { t.parse().ok() })
        .collect()
}

/// Parses the XML and checks its structure; semantic consistency is left to
/// [`check_document`].
pub fn parse_xml(text: &str) -> Result<GroundtruthDocument> {
    let doc = roxmltree::Document::parse(text).map_err(|e| ExportError::SchemaViolation {
        line: e.pos().row,
        element: String::new(),
        message: e.to_string(),
    })?;
    let p = Parser { doc: &doc };
    let root = doc.root_element();
    p.expect_name(root, ROOT_ELEMENT)?;
    p.only_attrs(root, &["version"])?;
    let version = p.attr(root, "version")?;
    if version != SCHEMA_VERSION {
        return Err(p.err(root, format!("unsupported version {version:?}")));
    }
    let parts = p.children(root)?;
    let [source, labels, units] = parts.as_slice() else {
        return Err(p.err(root, "expected exactly <source>, <labels>, <units>"));
    };
    p.expect_name(*source, "source")?;
    p.expect_name(*labels, "labels")?;
    p.expect_name(*units, "units")?;

    p.only_attrs(*source, &["file", "width", "height", "dpi"])?;
    p.leaf(*source)?;
    let info = SourceInfo {
        file: p.attr(*source, "file")?.to_string(),
        width: p.num(*source, "width")?,
        height: p.num(*source, "height")?,
        dpi: if source.has_attribute("dpi") {
            Some(p.num(*source, "dpi")?)
        } else {
            None
        },
    };
    if info.width == 0 || info.height == 0 {
        return Err(p.err(*source, "image dimensions must be positive"));
    }

    p.only_attrs(*labels, &[])?;
    let mut label_defs = Vec::new();
    for l in p.children(*labels)? {
        p.expect_name(l, "label")?;
        p.only_attrs(l, &["index", "name", "color"])?;
        p.leaf(l)?;
        let index: u8 = p.num(l, "index")?;
        let color_raw = p.attr(l, "color")?;
        let color: Rgb = color_raw
            .parse()
            .map_err(|_| p.err(l, format!("invalid color {color_raw:?}")))?;
        if color.to_string() != color_raw {
            return Err(p.err(
                l,
                format!("color must be upper-case #RRGGBB, got {color_raw:?}"),
            ));
        }
        label_defs.push(LabelDef {
            index,
            name: p.attr(l, "name")?.to_string(),
            color,
        });
    }

    p.only_attrs(*units, &["count"])?;
    let count: usize = p.num(*units, "count")?;
    let mut records = Vec::new();
    for u in p.children(*units)? {
        p.expect_name(u, "unit")?;
        p.only_attrs(u, &["id", "label-index", "area", "bbox"])?;
        let bbox_raw = p.attr(u, "bbox")?;
        let bbox = match parse_int_list(bbox_raw).as_deref() {
            Some(&[x, y, w, h]) if w > 0 && h > 0 => Rect {
                x,
                y,
                w: w as u32,
                h: h as u32,
            },
            _ => return Err(p.err(u, format!("invalid bbox {bbox_raw:?}"))),
        };
        let kids = p.children(u)?;
        let [poly] = kids.as_slice() else {
            return Err(p.err(u, "expected exactly one <polygon>"));
        };
        p.expect_name(*poly, "polygon")?;
        p.only_attrs(*poly, &["points"])?;
        p.leaf(*poly)?;
        let raw = p.attr(*poly, "points")?;
        let points: Option<Vec<Point>> = raw
            .split(' ')
            .map(|pair| match parse_int_list(pair).as_deref() {
                Some(&[x, y]) => Some(Point::new(x, y)),
                _ => None,
            })
            .collect();
        let points = points.ok_or_else(|| p.err(*poly, format!("invalid points {raw:?}")))?;
        let polygon = Polygon::new(points).map_err(|e| p.err(*poly, e.to_string()))?;
        records.push(UnitRecord {
            id: p.num(u, "id")?,
            label_index: p.num(u, "label-index")?,
            area: p.num(u, "area")?,
            bbox,
            polygon,
        });
    }
    if count != records.len() {
        return Err(p.err(
            *units,
            format!("count is {count} but {} units are listed", records.len()),
        ));
    }
    Ok(GroundtruthDocument {
        source: info,
        labels: label_defs,
        units: records,
    })
}

/// One problem found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub code: &'static str,
    pub message: String,
}

impl Violation {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

/// Semantic checks on a parsed document.
pub fn check_document(doc: &GroundtruthDocument) -> Vec<Violation> {
    let mut out = Vec::new();
    let (mut indices, mut names, mut colors) = (HashSet::new(), HashSet::new(), HashSet::new());
    for l in &doc.labels {
        if l.index == 0 {
            out.push(Violation::new(
                "ReservedIndex",
                "label index 0 is reserved for the background",
            ));
        }
        if !indices.insert(l.index) {
            out.push(Violation::new(
                "DuplicateLabelIndex",
                format!("label index {} appears twice", l.index),
            ));
        }
        if l.name.trim().is_empty() {
            out.push(Violation::new(
                "EmptyLabelName",
                format!("label {} has an empty name", l.index),
            ));
        }
        if !names.insert(l.name.as_str()) {
            out.push(Violation::new(
                "DuplicateLabelName",
                format!("label name {:?} appears twice", l.name),
            ));
        }
        if l.color == Rgb::WHITE {
            out.push(Violation::new(
                "ReservedColor",
                format!("label {} uses the background color", l.index),
            ));
        } else if !colors.insert(l.color) {
            out.push(Violation::new(
                "DuplicateLabelColor",
                format!("color {} appears twice", l.color),
            ));
        }
    }
    let (w, h) = (doc.source.width, doc.source.height);
    let mut prev_id = 0u32;
    for u in &doc.units {
        if u.id <= prev_id {
            out.push(Violation::new(
                "UnitOrder",
                format!("unit id {} is not ascending and unique", u.id),
            ));
        }
        prev_id = prev_id.max(u.id);
        if !indices.contains(&u.label_index) {
            out.push(Violation::new(
                "UnknownLabel",
                format!("unit {} refers to missing label {}", u.id, u.label_index),
            ));
        }
        if !u.bbox.within(w, h) {
            out.push(Violation::new(
                "BboxOutOfBounds",
                format!("unit {} bbox {:?} exceeds {w}x{h}", u.id, u.bbox),
            ));
        }
        if !bounding_box(&u.polygon).within(w, h) {
            out.push(Violation::new(
                "PolygonOutOfBounds",
                format!("unit {} polygon leaves the image", u.id),
            ));
        }
        if u.area == 0 {
            out.push(Violation::new(
                "EmptyUnit",
                format!("unit {} has zero area", u.id),
            ));
        }
    }
    out
}

/// Cross-checks the label image against the document.
fn check_png(doc: &GroundtruthDocument, img: &LabelImage, palette: &[Rgb]) -> Vec<Violation> {
    let mut out = Vec::new();
    if (img.width(), img.height()) != (doc.source.width, doc.source.height) {
        out.push(Violation::new(
            "SizeMismatch",
            format!(
                "label image is {}x{}, XML says {}x{}",
                img.width(),
                img.height(),
                doc.source.width,
                doc.source.height
            ),
        ));
    }
    let counts = img.index_counts();
    let unknown: Vec<u8> = (1..=255u8)
        .filter(|&i| counts[i as usize] > 0 && !doc.labels.iter().any(|l| l.index == i))
        .collect();
    if !unknown.is_empty() {
        out.push(Violation::new(
            "IndexMismatch",
            format!("indices {unknown:?} have no label"),
        ));
    }
    for l in &doc.labels {
        match palette.get(l.index as usize) {
            Some(&c) if c == l.color => {}
            None if counts[l.index as usize] == 0 => {}
            other => out.push(Violation::new(
                "PaletteMismatch",
                format!(
                    "palette slot {} is {:?}, label color is {}",
                    l.index,
                    other.map(|c| c.to_string()),
                    l.color
                ),
            )),
        }
        let area: u64 = doc
            .units
            .iter()
            .filter(|u| u.label_index == l.index)
            .map(|u| u.area)
            .sum();
        if area != counts[l.index as usize] {
            out.push(Violation::new(
                "AreaMismatch",
                format!(
                    "label {} covers {} pixels, units sum to {area}",
                    l.index, counts[l.index as usize]
                ),
            ));
        }
    }
    out
}

/// Reads an XML file and its label image, failing on the first problem.
pub fn import_groundtruth(xml_path: impl AsRef<Path>) -> Result<(GroundtruthDocument, LabelImage)> {
    let xml_path = xml_path.as_ref();
    let text = std::fs::read_to_string(xml_path)?;
    let doc = parse_xml(&text)?;
    if let Some(v) = check_document(&doc).into_iter().next() {
        return Err(ExportError::SchemaViolation {
            line: 0,
            element: String::new(),
            message: v.message,
        });
    }
    let png_path = png_path_for(xml_path);
    if !png_path.is_file() {
        return Err(ExportError::MissingPng(png_path));
    }
    let (img, palette) = raster::read_indexed_png(&png_path)?;
    if let Some(v) = check_png(&doc, &img, &palette).into_iter().next() {
        if v.code == "IndexMismatch" {
            let counts = img.index_counts();
            let missing = (1..=255u8)
                .filter(|&i| counts[i as usize] > 0 && !doc.labels.iter().any(|l| l.index == i))
                .collect();
            return Err(ExportError::IndexMismatch(missing));
        }
        return Err(ExportError::PngMismatch(v.message));
    }
    Ok((doc, img))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every problem with an XML file and its label image.
pub fn validate(xml_path: impl AsRef<Path>) -> ValidationReport {
    validate_inner(xml_path.as_ref()).1
}

fn validate_inner(
    xml_path: &Path,
) -> (Option<(GroundtruthDocument, LabelImage)>, ValidationReport) {
    let fail = |v: Violation| {
        (
            None,
            ValidationReport {
                violations: vec![v],
            },
        )
    };
    let text = match std::fs::read_to_string(xml_path) {
        Ok(t) => t,
        Err(e) => return fail(Violation::new("Io", format!("{}: {e}", xml_path.display()))),
    };
    let doc = match parse_xml(&text) {
        Ok(d) => d,
        Err(e) => return fail(Violation::new("SchemaViolation", e.to_string())),
    };
    let mut violations = check_document(&doc);
    let png_path = png_path_for(xml_path);
    let mut image = None;
    if !png_path.is_file() {
        violations.push(Violation::new(
            "MissingPng",
            format!("{} not found", png_path.display()),
        ));
    } else {
        match raster::read_indexed_png(&png_path) {
            Ok((img, palette)) => {
                violations.extend(check_png(&doc, &img, &palette));
                image = Some(img);
            }
            Err(e) => violations.push(Violation::new("BadPng", e.to_string())),
        }
    }
    let pair = if violations.is_empty() {
        image.map(|img| (doc, img))
    } else {
        None
    };
    (pair, ValidationReport { violations })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CorpusStats {
    pub images: usize,
    /// Absent when no valid files were found.
    pub mean_labels: Option<f64>,
    pub mean_units: Option<f64>,
    /// Pixel totals keyed by label name, over valid files.
    pub label_pixels: BTreeMap<String, u64>,
    pub invalid: Vec<InvalidFile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InvalidFile {
    pub path: PathBuf,
    pub violations: Vec<Violation>,
}

/// Averages over every valid `*.xml` ground-truth file directly in `dir`.
pub fn corpus_stats(dir: impl AsRef<Path>) -> std::io::Result<CorpusStats> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "xml"))
        .collect();
    files.sort();
    let mut stats = CorpusStats::default();
    let (mut labels, mut units) = (0usize, 0usize);
    for path in files {
        match validate_inner(&path) {
            (Some((doc, img)), _) => {
                stats.images += 1;
                labels += doc.labels.len();
                units += doc.units.len();
                let counts = img.index_counts();
                for l in &doc.labels {
                    *stats.label_pixels.entry(l.name.clone()).or_default() +=
                        counts[l.index as usize];
                }
            }
            (None, report) => stats.invalid.push(InvalidFile {
                path,
                violations: report.violations,
            }),
        }
    }
    if stats.images > 0 {
        stats.mean_labels = Some(labels as f64 / stats.images as f64);
        stats.mean_units = Some(units as f64 / stats.images as f64);
    }
    Ok(stats)
}
