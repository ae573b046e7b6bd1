use gtruth_core::export::{
    corpus_stats, export_groundtruth, import_groundtruth, render_groundtruth, GroundtruthDocument,
};
use gtruth_core::geometry::point_in_polygon;
use gtruth_testkit::{fixtures, rng};

#[test]
fn random_sessions_round_trip() {
    let mut r = rng(0xE4);
    for i in 0..20 {
        let s = fixtures::random_session(&mut r, &format!("scan {i}.png"));
        let dir = tempfile::tempdir().unwrap();
        let paths = export_groundtruth(&s, dir.path()).unwrap();
        let (doc, img) = import_groundtruth(&paths.xml).unwrap();
        assert_eq!(&img, s.output().unwrap());
        assert_eq!(doc, GroundtruthDocument::from_session(&s).unwrap());
        assert_eq!(
            render_groundtruth(&s).unwrap().xml.as_bytes(),
            std::fs::read(&paths.xml).unwrap()
        );
    }
}

#[test]
fn units_partition_in_polygon_foreground() {
    let mut r = rng(0xE5);
    for i in 0..10 {
        let s = fixtures::random_session(&mut r, &format!("p{i}.png"));
        let mask = s.mask().unwrap();
        let mut owner = vec![0u32; (s.width() * s.height()) as usize];
        for u in s.units() {
            for (x, y) in u.pixels.iter() {
                assert!(mask.get(x, y));
                let o = &mut owner[(y * s.width() + x) as usize];
                assert_eq!(*o, 0, "pixel ({x},{y}) claimed twice");
                *o = u.id;
            }
        }
        for y in 0..s.height() {
            for x in 0..s.width() {
                let inside = s.units().iter().any(|u| {
                    point_in_polygon(gtruth_core::Point::new(x as i32, y as i32), &u.polygon)
                        .is_member()
                });
                let claimed = owner[(y * s.width() + x) as usize] != 0;
                assert_eq!(claimed, inside && mask.get(x, y), "({x},{y})");
            }
        }
    }
}

#[test]
fn corpus_means() {
    let dir = tempfile::tempdir().unwrap();
    fixtures::build_corpus(dir.path(), 3, 5, 148);
    let stats = corpus_stats(dir.path()).unwrap();
    assert_eq!(stats.images, 3);
    assert_eq!(stats.mean_labels, Some(5.0));
    assert_eq!(stats.mean_units, Some(148.0));
    assert!(stats.invalid.is_empty());
}

/// Every element and attribute the writer emits is declared in the shipped
/// schema, and every required attribute is written.
#[test]
fn xml_matches_shipped_schema() {
    use std::collections::{BTreeMap, BTreeSet};

    let xsd_text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../schema/groundtruth.xsd"
    ))
    .unwrap();
    let xsd = roxmltree::Document::parse(&xsd_text).unwrap();
    let mut declared: BTreeMap<String, (BTreeSet<String>, BTreeSet<String>)> = BTreeMap::new();
    for el in xsd
        .descendants()
        .filter(|n| n.tag_name().name() == "element")
    {
        let attrs = el
            .descendants()
            .filter(|n| n.tag_name().name() == "attribute")
            .filter(|a| {
                a.ancestors()
                    .find(|p| p.tag_name().name() == "element")
                    .is_some_and(|p| p == el)
            });
        let entry = declared
            .entry(el.attribute("name").unwrap().to_string())
            .or_default();
        for a in attrs {
            let name = a.attribute("name").unwrap().to_string();
            if a.attribute("use") == Some("required") {
                entry.1.insert(name.clone());
            }
            entry.0.insert(name);
        }
    }

    let mut r = rng(0xE6);
    for i in 0..10 {
        let s = fixtures::random_session(&mut r, &format!("x{i}.png"));
        let xml = render_groundtruth(&s).unwrap().xml;
        let doc = roxmltree::Document::parse(&xml).unwrap();
        for el in doc.descendants().filter(|n| n.is_element()) {
            let (allowed, required) = &declared[el.tag_name().name()];
            let present: BTreeSet<String> = el.attributes().map(|a| a.name().to_string()).collect();
            assert!(present.is_subset(allowed), "{:?}", el.tag_name());
            assert!(required.is_subset(&present), "{:?}", el.tag_name());
        }
    }
}
