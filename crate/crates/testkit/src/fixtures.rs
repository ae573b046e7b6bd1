use std::path::Path;

use gtruth_core::morphology::{GroupingRecipe, GroupingStep, StructuringElement};
use gtruth_core::raster::{BinaryMask, GrayImage};
use gtruth_core::{AnnotationSession, Point, Rgb, ThresholdParams};
use rand::Rng;

use crate::oracle;

/// Gray image drawn from one of several histogram shapes so Otsu sees
/// flat, bimodal, sparse and near-constant inputs.
pub fn random_gray<R: Rng>(rng: &mut R, w: u32, h: u32) -> GrayImage {
    match rng.random_range(0..4) {
        0 => GrayImage::from_fn(w, h, |_, _| rng.random()),
        1 => {
            let (a, b) = (rng.random_range(0..128u8), rng.random_range(128..=255u8));
            let spread = rng.random_range(0..40u8);
            GrayImage::from_fn(w, h, |_, _| {
                let c = if rng.random_bool(0.3) { a } else { b };
                c.saturating_add(rng.random_range(0..=spread))
            })
        }
        2 => {
            let levels: Vec<u8> = (0..rng.random_range(1..5)).map(|_| rng.random()).collect();
            GrayImage::from_fn(w, h, |_, _| levels[rng.random_range(0..levels.len())])
        }
        _ => {
            let base = rng.random();
            GrayImage::from_fn(w, h, |_, _| {
                if rng.random_bool(0.01) {
                    rng.random()
                } else {
                    base
                }
            })
        }
    }
}

pub fn random_mask<R: Rng>(rng: &mut R, w: u32, h: u32, density: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |_, _| rng.random_bool(density))
}

/// Simple polygon made by sorting random angles around a center and
/// snapping to the integer lattice; rejected and redrawn until simple.
pub fn random_simple_polygon<R: Rng>(rng: &mut R, span: i32) -> Vec<Point> {
    loop {
        let n = rng.random_range(3..12);
        let cx = rng.random_range(-span..=span) as f64;
        let cy = rng.random_range(-span..=span) as f64;
        let mut angles: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        angles.sort_by(f64::total_cmp);
        let verts: Vec<Point> = angles
            .iter()
            .map(|a| {
                let r = rng.random_range(1.0..span as f64);
                Point::new(
                    (cx + r * a.cos()).round() as i32,
                    (cy + r * a.sin()).round() as i32,
                )
            })
            .collect();
        if oracle::is_simple(&verts) {
            return verts;
        }
    }
}

fn fill_rect(img: &mut GrayImage, x: u32, y: u32, w: u32, h: u32, v: u8) {
    for yy in y..(y + h).min(img.height()) {
        for xx in x..(x + w).min(img.width()) {
            img.set(xx, yy, v);
        }
    }
}

/// Page with a logo blob and lines of glyph-like strokes on a lightly
/// textured background.
pub fn render_document(width: u32, height: u32, seed: u64) -> GrayImage {
    let mut rng = crate::rng(seed);
    let mut img = GrayImage::from_fn(width, height, |_, _| 0);
    for v in 0..(width as usize * height as usize) {
        let (x, y) = ((v % width as usize) as u32, (v / width as usize) as u32);
        img.set(x, y, rng.random_range(225..=250));
    }
    let scale = (width as f64 / 1000.0).max(0.2);
    let s = |v: f64| ((v * scale).round() as u32).max(1);

    // Logo: a filled ellipse with a ring cut out.
    let (lcx, lcy, rx, ry) = (
        s(150.0) as f64,
        s(120.0) as f64,
        s(80.0) as f64,
        s(60.0) as f64,
    );
    for y in 0..height.min(s(220.0)) {
        for x in 0..width.min(s(300.0)) {
            let q = ((x as f64 - lcx) / rx).powi(2) + ((y as f64 - lcy) / ry).powi(2);
            if q <= 1.0 && !(0.35..0.5).contains(&q) {
                img.set(x, y, rng.random_range(10..40));
            }
        }
    }

    let margin = s(60.0);
    let line_h = s(18.0);
    let mut y = s(260.0);
    while y + line_h + margin < height {
        let mut x = margin;
        let line_end = width - margin - rng.random_range(0..s(200.0));
        while x + s(60.0) < line_end {
            let letters = rng.random_range(2..9);
            for _ in 0..letters {
                let gw = rng.random_range(s(6.0)..=s(11.0));
                let asc = rng.random_bool(0.3);
                let gh = if asc { line_h } else { line_h * 2 / 3 };
                let gy = y + line_h - gh;
                let ink = rng.random_range(0..60);
                match rng.random_range(0..3) {
                    // Bowl with a counter.
                    0 => {
                        fill_rect(&mut img, x, gy, gw, gh, ink);
                        let t = s(2.0);
                        if gw > 2 * t && gh > 2 * t {
                            fill_rect(&mut img, x + t, gy + t, gw - 2 * t, gh - 2 * t, 240);
                        }
                    }
                    1 => fill_rect(&mut img, x + gw / 3, gy, s(3.0), gh, ink),
                    _ => fill_rect(&mut img, x, gy, gw, gh, ink),
                }
                x += gw + rng.random_range(s(1.0)..=s(3.0));
            }
            x += rng.random_range(s(10.0)..=s(16.0));
        }
        y += line_h + rng.random_range(s(14.0)..=s(24.0));
    }
    img
}

/// Grid of isolated square blobs, one unit each. `n` blobs of side 4 on a
/// 10-pixel pitch, ten per row.
pub fn blob_grid(n: usize) -> GrayImage {
    let cols = 10u32;
    let rows = (n as u32).div_ceil(cols).max(1);
    let mut img = GrayImage::filled(cols * 10 + 6, rows * 10 + 6, 255);
    for i in 0..n as u32 {
        fill_rect(&mut img, 5 + (i % cols) * 10, 5 + (i / cols) * 10, 4, 4, 0);
    }
    img
}

/// One-pixel dilation leaves the mask unchanged; used where a recipe is
/// required but no grouping is wanted.
pub fn identity_recipe() -> GroupingRecipe {
    GroupingRecipe::new(vec![GroupingStep::Dilate(
        StructuringElement::rect(1, 1).unwrap(),
    )])
}

/// Finalized session over a blob grid with `labels` labels assigned round-robin.
pub fn grid_session(name: &str, units: usize, labels: usize) -> AnnotationSession {
    let mut s = AnnotationSession::from_gray(name, blob_grid(units));
    s.binarize(&ThresholdParams::otsu(), false).unwrap();
    s.set_recipe(identity_recipe(), false).unwrap();
    assert_eq!(s.generate_units(None, false).unwrap(), units);
    for k in 0..labels {
        s.add_label(&format!("class-{k}"), None).unwrap();
    }
    let ids: Vec<u32> = s.units().iter().map(|u| u.id).collect();
    for (i, id) in ids.into_iter().enumerate() {
        s.assign_label(id, (i % labels) as u8 + 1).unwrap();
    }
    s.finalize().unwrap();
    s
}

/// Writes `images` exported ground truths with exactly `labels` labels and
/// `units` units each.
pub fn build_corpus(dir: &Path, images: usize, labels: usize, units: usize) {
    for i in 0..images {
        let s = grid_session(&format!("page{i:03}.png"), units, labels);
        gtruth_core::export::export_groundtruth(&s, dir).unwrap();
    }
}

const NAMES: [&str; 8] = [
    "text",
    "graphics",
    "table & grid",
    "<header>",
    "\"quote\"",
    "footnote",
    "logo",
    "math",
];

/// Finalized session with random blobs, label names and assignments.
pub fn random_session<R: Rng>(rng: &mut R, name: &str) -> AnnotationSession {
    let (w, h) = (rng.random_range(24..80), rng.random_range(24..80));
    let mut img = GrayImage::filled(w, h, 255);
    for _ in 0..rng.random_range(1..12) {
        let (bw, bh) = (rng.random_range(1..8), rng.random_range(1..8));
        let (x, y) = (rng.random_range(0..w - bw), rng.random_range(0..h - bh));
        fill_rect(&mut img, x, y, bw, bh, rng.random_range(0..80));
    }
    let mut s = AnnotationSession::from_gray(name, img);
    s.binarize(&ThresholdParams::global(128), false).unwrap();
    let recipe = if rng.random_bool(0.5) {
        identity_recipe()
    } else {
        GroupingRecipe::new(vec![GroupingStep::Close(
            StructuringElement::rect(3, 1).unwrap(),
        )])
    };
    s.set_recipe(recipe, false).unwrap();
    let eps = [0.0, 0.5, 1.0, 2.0][rng.random_range(0..4)];
    s.generate_units(Some(eps), false).unwrap();
    let n_labels = rng.random_range(1..=NAMES.len());
    for name in &NAMES[..n_labels] {
        let color = if rng.random_bool(0.5) {
            Some(Rgb::new(
                rng.random(),
                rng.random(),
                rng.random_range(0..255),
            ))
        } else {
            None
        };
        if s.add_label(name, color).is_err() {
            s.add_label(name, None).unwrap();
        }
    }
    let indices: Vec<u8> = s.labels().labels().iter().map(|l| l.index).collect();
    let ids: Vec<u32> = s.units().iter().map(|u| u.id).collect();
    for id in ids {
        s.assign_label(id, indices[rng.random_range(0..indices.len())])
            .unwrap();
    }
    s.finalize().unwrap();
    s
}
