use std::io::{Cursor, Write};

use gtruth_core::export::RenderedGroundtruth;
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipWriter};

/// Zip holding the XML and the label image. Entry timestamps are pinned so
/// equal inputs give equal archives.
pub fn zip_bundle(gt: &RenderedGroundtruth) -> zip::result::ZipResult<Vec<u8>> {
    let options = SimpleFileOptions::default()
        .compression_method(CompressionMethod::Deflated)
        .last_modified_time(DateTime::default())
        .unix_permissions(0o644);
    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    zip.start_file(gt.xml_name(), options)?;
    zip.write_all(gt.xml.as_bytes())?;
    // PNG data is already compressed.
    zip.start_file(
        gt.png_name(),
        options.compression_method(CompressionMethod::Stored),
    )?;
    zip.write_all(&gt.png)?;
    Ok(zip.finish()?.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Read;

    fn sample() -> RenderedGroundtruth {
        RenderedGroundtruth {
            stem: "page".into(),
            png: vec![1, 2, 3, 4],
            xml: "<anveshak-groundtruth/>\n".into(),
        }
    }

    #[test]
    fn deterministic_with_both_entries() {
        let a = zip_bundle(&sample()).unwrap();
        assert_eq!(a, zip_bundle(&sample()).unwrap());
        let mut archive = zip::ZipArchive::new(Cursor::new(a)).unwrap();
        assert_eq!(archive.len(), 2);
        let mut xml = String::new();
        archive
            .by_name("page_gt.xml")
            .unwrap()
            .read_to_string(&mut xml)
            .unwrap();
        assert_eq!(xml, sample().xml);
        let mut png = Vec::new();
        archive
            .by_name("page_gt.png")
            .unwrap()
            .read_to_end(&mut png)
            .unwrap();
        assert_eq!(png, sample().png);
    }
}
