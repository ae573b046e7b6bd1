use std::path::{Path, PathBuf};

use gtruth_core::export::{self, ExportError, ExportPaths};
use gtruth_core::raster::{self, RasterError};
use gtruth_core::{AnnotationSession, Polygon, Rect, SessionError};
use serde::{Deserialize, Serialize};

use crate::config::{LabelMap, PipelineConfig};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("export-run needs a label_map in the config")]
    MissingLabelMap,
}

impl PipelineError {
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::Raster(RasterError::FileNotFound(_)) => "FileNotFound",
            PipelineError::Raster(RasterError::UnsupportedFormat(_)) => "UnsupportedFormat",
            PipelineError::Raster(RasterError::CorruptImage(_)) => "CorruptImage",
            PipelineError::Raster(_) => "RasterError",
            PipelineError::Session(e) => e.code(),
            PipelineError::Export(ExportError::NotFinalized) => "NotFinalized",
            PipelineError::Export(_) => "ExportError",
            PipelineError::Io { .. } => "Io",
            PipelineError::MissingLabelMap => "MissingLabelMap",
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

/// Loads `input` and runs binarization, grouping and unit generation with
/// the configured parameters.
pub fn build_session(input: &Path, config: &PipelineConfig) -> Result<AnnotationSession> {
    let source = raster::load_source(input)?;
    let name = input
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut session = AnnotationSession::new(name, source);
    session.binarize(&config.threshold, false)?;
    session.set_recipe(config.recipe.clone(), false)?;
    session.generate_units(Some(config.epsilon), false)?;
    Ok(session)
}

/// Contents of `<stem>.units.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitsDocument {
    pub source: String,
    pub width: u32,
    pub height: u32,
    pub threshold: Option<u8>,
    pub epsilon: f64,
    pub units: Vec<UnitEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitEntry {
    pub id: u32,
    pub polygon: Polygon,
    pub bbox: Rect,
    pub area: u64,
}

impl UnitsDocument {
    pub fn from_session(session: &AnnotationSession) -> Self {
        Self {
            source: session.source_name().to_string(),
            width: session.width(),
            height: session.height(),
            threshold: session.threshold_used(),
            epsilon: session.epsilon(),
            units: session
                .units()
                .iter()
                .map(|u| UnitEntry {
                    id: u.id,
                    polygon: u.polygon.clone(),
                    bbox: u.bbox,
                    area: u.pixels.area(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }
}

/// Both files written by the `units` command, rendered in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitsOutput {
    pub stem: String,
    pub json: String,
    pub grouped_png: Vec<u8>,
}

impl UnitsOutput {
    pub fn json_name(&self) -> String {
        format!("{}.units.json", self.stem)
    }

    pub fn png_name(&self) -> String {
        format!("{}.grouped.png", self.stem)
    }
}

pub fn render_units(session: &AnnotationSession) -> UnitsOutput {
    UnitsOutput {
        stem: export::output_stem(session.source_name()),
        json: UnitsDocument::from_session(session).to_json(),
        grouped_png: session.grouped().map(|m| m.to_png()).unwrap_or_default(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnitsPaths {
    pub units: usize,
    pub json: PathBuf,
    pub png: PathBuf,
}

pub fn run_units(input: &Path, config: &PipelineConfig, out_dir: &Path) -> Result<UnitsPaths> {
    let session = build_session(input, config)?;
    let out = render_units(&session);
    let paths = UnitsPaths {
        units: session.units().len(),
        json: out_dir.join(out.json_name()),
        png: out_dir.join(out.png_name()),
    };
    create_dir(out_dir)?;
    write(&paths.json, out.json.as_bytes())?;
    write(&paths.png, &out.grouped_png)?;
    Ok(paths)
}

/// Creates the configured labels, then any label the map names that the
/// config did not list (default first, then in unit order), and assigns
/// every mapped unit.
pub fn apply_label_map(
    session: &mut AnnotationSession,
    config: &PipelineConfig,
    map: &LabelMap,
) -> Result<()> {
    for spec in &config.labels {
        session.add_label(&spec.name, spec.color)?;
    }
    for name in map.default.iter().chain(map.units.values()) {
        if session.labels().by_name(name).is_none() {
            session.add_label(name, None)?;
        }
    }
    let count = session.units().len() as u32;
    if let Some(&id) = map.units.keys().find(|&&id| id == 0 || id > count) {
        return Err(SessionError::UnknownUnit(id).into());
    }
    for id in 1..=count {
        let name = map.units.get(&id).or(map.default.as_ref());
        if let Some(name) = name {
            let index = session.labels().by_name(name).expect("added above").index;
            session.assign_label(id, index)?;
        }
    }
    Ok(())
}

/// Full headless run: units, scripted labels, finalize, export.
pub fn annotate(input: &Path, config: &PipelineConfig) -> Result<AnnotationSession> {
    let map = config
        .label_map
        .as_ref()
        .ok_or(PipelineError::MissingLabelMap)?;
    let mut session = build_session(input, config)?;
    apply_label_map(&mut session, config, map)?;
    session.finalize()?;
    Ok(session)
}

pub fn run_export(input: &Path, config: &PipelineConfig, out_dir: &Path) -> Result<ExportPaths> {
    let session = annotate(input, config)?;
    Ok(export::export_groundtruth(&session, out_dir)?)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::LabelSpec;
    use gtruth_core::{GrayImage, Rgb, ThresholdParams};
    use std::collections::BTreeMap;

    /// Two 8×5 "words" of three letters each, 22 px apart and clear of the border.
    fn two_words() -> GrayImage {
        GrayImage::from_fn(60, 20, |x, y| {
            let in_row = (6..11).contains(&y);
            let letter = |x0: u32| (x0..x0 + 2).contains(&x);
            let word = |x0: u32| letter(x0) || letter(x0 + 3) || letter(x0 + 6);
            if in_row && (word(10) || word(40)) {
                0
            } else {
                255
            }
        })
    }

    fn write_png(dir: &Path, name: &str, img: &GrayImage) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, img.to_png()).unwrap();
        p
    }

    fn config() -> PipelineConfig {
        PipelineConfig {
            threshold: ThresholdParams::global(128),
            ..Default::default()
        }
    }

    #[test]
    fn units_files_match_library() {
        let dir = tempfile::tempdir().unwrap();
        let input = write_png(dir.path(), "words.png", &two_words());
        let out = dir.path().join("out");
        let paths = run_units(&input, &config(), &out).unwrap();
        assert_eq!(paths.units, 2);
        assert_eq!(paths.json, out.join("words.units.json"));
        let doc: UnitsDocument =
            serde_json::from_slice(&std::fs::read(&paths.json).unwrap()).unwrap();
        assert_eq!(doc.units.len(), 2);
        assert_eq!(doc.units[0].area, 30);
        assert_eq!(doc.threshold, Some(128));

        let session = build_session(&input, &config()).unwrap();
        let expected = render_units(&session);
        assert_eq!(std::fs::read_to_string(&paths.json).unwrap(), expected.json);
        assert_eq!(std::fs::read(&paths.png).unwrap(), expected.grouped_png);
    }

    #[test]
    fn empty_page_has_no_foreground() {
        let dir = tempfile::tempdir().unwrap();
        let input = write_png(dir.path(), "blank.png", &GrayImage::filled(20, 20, 255));
        let err = run_units(&input, &config(), dir.path()).unwrap_err();
        assert_eq!(err.code(), "NoForeground");
    }

    #[test]
    fn missing_input() {
        let err = run_units(
            Path::new("/nonexistent/x.png"),
            &config(),
            Path::new("/tmp"),
        )
        .unwrap_err();
        assert_eq!(err.code(), "FileNotFound");
    }

    #[test]
    fn label_map_adds_and_assigns() {
        let dir = tempfile::tempdir().unwrap();
        let input = write_png(dir.path(), "words.png", &two_words());
        let mut cfg = config();
        cfg.labels = vec![LabelSpec {
            name: "body".into(),
            color: Some(Rgb::new(0, 0, 255)),
        }];
        cfg.label_map = Some(LabelMap {
            default: Some("body".into()),
            units: BTreeMap::from([(2, "heading".into())]),
        });
        let session = annotate(&input, &cfg).unwrap();
        let names: Vec<&str> = session
            .labels()
            .labels()
            .iter()
            .map(|l| l.name.as_str())
            .collect();
        assert_eq!(names, ["body", "heading"]);
        assert_eq!(session.units()[0].label, Some(1));
        assert_eq!(session.units()[1].label, Some(2));

        let paths = run_export(&input, &cfg, dir.path()).unwrap();
        assert!(export::validate(&paths.xml).is_valid());
    }

    #[test]
    fn label_map_errors() {
        let dir = tempfile::tempdir().unwrap();
        let input = write_png(dir.path(), "words.png", &two_words());
        let mut cfg = config();
        assert_eq!(
            annotate(&input, &cfg).unwrap_err().code(),
            "MissingLabelMap"
        );

        cfg.label_map = Some(LabelMap {
            default: None,
            units: BTreeMap::from([(1, "a".into())]),
        });
        assert_eq!(
            annotate(&input, &cfg).unwrap_err().code(),
            "UnlabeledUnitsRemain"
        );

        cfg.label_map = Some(LabelMap {
            default: Some("a".into()),
            units: BTreeMap::from([(9, "b".into())]),
        });
        assert_eq!(annotate(&input, &cfg).unwrap_err().code(), "UnknownUnit");
    }
}
