//! Library algorithms checked against the brute-force oracles in
//! `gtruth-testkit`.

use gtruth_core::binarize::{histogram, otsu_level, threshold_otsu, Histogram};
use gtruth_core::geometry::{point_in_polygon, simplify, trace_contours, Location};
use gtruth_core::morphology::{
    dilate, erode, fill_gaps, open_close, rlsa_horizontal, rlsa_vertical, smooth_rlsa,
    ElementShape, OpenClose, StructuringElement,
};
use gtruth_core::raster::BinaryMask;
use gtruth_core::{Point, Polygon};
use gtruth_testkit::rand::Rng;
use gtruth_testkit::{fixtures, oracle, rng};

fn hist(counts: [u64; 256]) -> Histogram {
    Histogram { counts }
}

#[test]
fn otsu_frozen_histograms() {
    let cases: [([u64; 256], u8); 6] = [
        (std::array::from_fn(|v| v as u64), 157),
        (std::array::from_fn(|v| 255 - v as u64), 97),
        (std::array::from_fn(|v| (v as u64 * v as u64) % 97), 126),
        (
            std::array::from_fn(|v| {
                if (40..60).contains(&v) || (180..200).contains(&v) {
                    1000
                } else {
                    1
                }
            }),
            119,
        ),
        (
            std::array::from_fn(|v| match v {
                30 => 100,
                120 => 50,
                220 => 300,
                _ => 0,
            }),
            120,
        ),
        (
            std::array::from_fn(|v| match v {
                0 | 255 => 1,
                _ => 0,
            }),
            0,
        ),
    ];
    for (counts, expected) in cases {
        assert_eq!(oracle::otsu_threshold(&counts), expected);
        assert_eq!(otsu_level(&hist(counts)), expected);
    }
}

#[test]
fn otsu_matches_oracle_on_random_histograms() {
    let mut r = rng(0x0750);
    for _ in 0..100 {
        let support = r.random_range(1..=256);
        let counts: [u64; 256] = std::array::from_fn(|_| {
            if r.random_range(0..256) < support {
                r.random_range(0..5000)
            } else {
                0
            }
        });
        assert_eq!(
            otsu_level(&hist(counts)),
            oracle::otsu_threshold(&counts),
            "{counts:?}"
        );
    }
}

#[test]
fn otsu_matches_oracle_on_random_images() {
    let mut r = rng(0x0751);
    for _ in 0..40 {
        let img = fixtures::random_gray(&mut r, 64, 64);
        let (t, mask) = threshold_otsu(&img);
        assert_eq!(t, oracle::otsu_threshold(&histogram(&img).counts));
        assert!(img
            .data()
            .iter()
            .zip(mask.bits())
            .all(|(&v, &m)| m == (v <= t)));
    }
}

fn all_elements() -> Vec<StructuringElement> {
    let mut out = Vec::new();
    for shape in [
        ElementShape::Rect,
        ElementShape::Ellipse,
        ElementShape::Cross,
    ] {
        for w in [1, 3, 5] {
            for h in [1, 3, 5] {
                out.push(StructuringElement::new(shape, w, h).unwrap());
            }
        }
    }
    out
}

#[test]
fn erode_dilate_match_definition() {
    let mut r = rng(0x3091);
    for se in all_elements() {
        for _ in 0..8 {
            let (w, h) = (r.random_range(1..20), r.random_range(1..20));
            let density = r.random_range(0.2..0.9);
            let m = fixtures::random_mask(&mut r, w, h, density);
            assert_eq!(
                erode(&m, &se),
                oracle::erode(&m, &se.cells()),
                "{se:?}\n{m:?}"
            );
            assert_eq!(
                dilate(&m, &se),
                oracle::dilate(&m, &se.cells()),
                "{se:?}\n{m:?}"
            );
        }
    }
}

/// Places `m` in the middle of a canvas with a `pad`-pixel background border.
fn padded(m: &BinaryMask, pad: u32) -> BinaryMask {
    BinaryMask::from_fn(m.width() + 2 * pad, m.height() + 2 * pad, |x, y| {
        m.get_signed(x as i64 - pad as i64, y as i64 - pad as i64)
    })
}

fn crop(m: &BinaryMask, pad: u32, w: u32, h: u32) -> BinaryMask {
    BinaryMask::from_fn(w, h, |x, y| m.get(x + pad, y + pad))
}

#[test]
fn morphology_properties() {
    let mut r = rng(0x3092);
    let elements = all_elements();
    for case in 0..300 {
        let se = &elements[case % elements.len()];
        let density = r.random_range(0.1..0.9);
        let m = fixtures::random_mask(&mut r, 16, 16, density);

        // Duality away from the border.
        let p = padded(&m, 6);
        let lhs = crop(&dilate(&p, se), 6, 16, 16);
        let rhs = crop(
            &erode(&p.complement(), &se.reflect()).complement(),
            6,
            16,
            16,
        );
        assert_eq!(lhs, rhs, "duality {se:?}");

        let open = open_close(&m, se, OpenClose::Open);
        assert_eq!(
            open_close(&open, se, OpenClose::Open),
            open,
            "open idempotence {se:?}"
        );
        assert!(erode(&m, se).is_subset_of(&open));
        assert!(open.is_subset_of(&m));
        assert!(m.is_subset_of(&dilate(&m, se)));

        let close = open_close(&p, se, OpenClose::Close);
        assert_eq!(
            open_close(&close, se, OpenClose::Close),
            close,
            "close idempotence {se:?}"
        );
        assert!(p.is_subset_of(&close));
        assert!(close.is_subset_of(&dilate(&p, se)));
    }
}

#[test]
fn rlsa_properties() {
    let mut r = rng(0x3093);
    for _ in 0..200 {
        let (w, h) = (r.random_range(1..24), r.random_range(1..24));
        let density = r.random_range(0.05..0.7);
        let m = fixtures::random_mask(&mut r, w, h, density);
        let (a, b) = (r.random_range(0..6), r.random_range(0..6));
        let (lo, hi) = (a.min(b), a.max(b));
        let h_lo = rlsa_horizontal(&m, lo);
        assert!(m.is_subset_of(&h_lo));
        assert!(h_lo.is_subset_of(&rlsa_horizontal(&m, hi)));
        assert!(rlsa_vertical(&m, lo).is_subset_of(&rlsa_vertical(&m, hi)));
        assert!(m.is_subset_of(&smooth_rlsa(&m, a, b, true)));
        let seq = smooth_rlsa(&m, a, b, false);
        assert!(rlsa_horizontal(&m, a).is_subset_of(&seq));
        let gaps = fill_gaps(&m, a, b);
        assert!(rlsa_horizontal(&m, a).is_subset_of(&gaps));
        assert!(rlsa_vertical(&m, b).is_subset_of(&gaps));
        assert!(gaps.is_subset_of(&seq));
    }
}

#[test]
fn contours_match_components() {
    let mut r = rng(0xC047);
    for _ in 0..150 {
        let density = r.random_range(0.05..0.7);
        let m = fixtures::random_mask(&mut r, 32, 32, density);
        let comps = oracle::components(&m);
        let contours = trace_contours(&m);
        assert_eq!(contours.len(), comps.len());
        for (c, comp) in contours.iter().zip(&comps) {
            assert_eq!(c.points[0], Point::new(comp[0].0 as i32, comp[0].1 as i32));
            assert!(c
                .points
                .iter()
                .all(|p| comp.contains(&(p.x as u32, p.y as u32))));
        }
    }
}

const EPSILONS: [(f64, i64, i64); 5] = [
    (0.0, 0, 1),
    (0.5, 1, 2),
    (1.0, 1, 1),
    (2.0, 2, 1),
    (5.0, 5, 1),
];

#[test]
fn simplification_is_sound() {
    let mut r = rng(0xD0061);
    let mut checked = 0;
    while checked < 60 {
        let density = r.random_range(0.3..0.7);
        let m = fixtures::random_mask(&mut r, 24, 24, density);
        for c in trace_contours(&m)
            .into_iter()
            .filter(|c| c.points.len() > 2)
            .take(3)
        {
            checked += 1;
            for (eps, num, den) in EPSILONS {
                let poly = simplify(&c, eps);
                assert!(poly.vertices().iter().all(|v| c.points.contains(v)));
                for &p in &c.points {
                    assert!(
                        oracle::within_closed_polyline(p, poly.vertices(), num, den),
                        "eps {eps} point {p:?}"
                    );
                }
            }
        }
    }
}

#[test]
fn point_in_polygon_matches_winding() {
    let mut r = rng(0x919);
    for _ in 0..200 {
        let verts = fixtures::random_simple_polygon(&mut r, 20);
        let poly = Polygon::new(verts.clone()).unwrap();
        for _ in 0..25 {
            let p = Point::new(r.random_range(-25..=25), r.random_range(-25..=25));
            let expected = if oracle::on_boundary(p, &verts) {
                Location::Boundary
            } else if oracle::winding_number(p, &verts) != 0 {
                Location::Inside
            } else {
                Location::Outside
            };
            assert_eq!(point_in_polygon(p, &poly), expected, "{p:?} in {verts:?}");
        }
    }
}
