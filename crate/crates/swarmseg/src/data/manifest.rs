//! On-disk dataset layout: a tab-separated manifest naming image/mask pairs
//! and whether each pair counts as labeled.
//!
//! Each line is `image<TAB>mask<TAB>flag` with flag `labeled` or
//! `unlabeled`. Relative paths resolve against the manifest's directory.

use super::{DataItem, Dataset};
use crate::data::pnm;
use crate::error::{Error, Result};
use crate::tensor::Real;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const MANIFEST_NAME: &str = "manifest.tsv";

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub mask: PathBuf,
    pub labeled: bool,
}

pub fn save_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = String::new();
    for e in entries {
        writeln!(
            out,
            "{}\t{}\t{}",
            e.image.display(),
            e.mask.display(),
            if e.labeled { "labeled" } else { "unlabeled" }
        )
        .expect("string write");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let display = path.display().to_string();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(display.clone(), e))?;
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Manifest {
                path: display,
                line: lineno + 1,
                detail: format!("expected 3 tab-separated fields, got {}", fields.len()),
            });
        }
        let labeled = match fields[2] {
            "labeled" => true,
            "unlabeled" => false,
            other => {
                return Err(Error::Manifest {
                    path: display,
                    line: lineno + 1,
                    detail: format!("flag must be labeled|unlabeled, got {other:?}"),
                })
            }
        };
        entries.push(ManifestEntry {
            image: PathBuf::from(fields[0]),
            mask: PathBuf::from(fields[1]),
            labeled,
        });
    }
    Ok(entries)
}

/// Writes every item as `image_NNN.ppm` / `mask_NNN.pgm` plus the manifest,
/// returning the manifest path. Paths inside the manifest are relative.
pub fn save_dataset<T: Real>(dir: &Path, dataset: &Dataset<T>) -> Result<PathBuf> {
    dataset.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let labeled: std::collections::HashSet<usize> =
        dataset.labeled_indices.iter().copied().collect();
    let mut entries = Vec::with_capacity(dataset.len());
    for (i, item) in dataset.items.iter().enumerate() {
        let image = format!("image_{i:03}.ppm");
        let mask = format!("mask_{i:03}.pgm");
        pnm::save_image(&dir.join(&image), &item.image)?;
        pnm::save_image(&dir.join(&mask), &item.mask)?;
        entries.push(ManifestEntry {
            image: PathBuf::from(image),
            mask: PathBuf::from(mask),
            labeled: labeled.contains(&i),
        });
    }
    let manifest = dir.join(MANIFEST_NAME);
    save_manifest(&manifest, &entries)?;
    Ok(manifest)
}

/// Loads a dataset back from its manifest, validating shapes and mask
/// binariness.
pub fn load_dataset<T: Real>(manifest_path: &Path) -> Result<Dataset<T>> {
    let entries = load_manifest(manifest_path)?;
    if entries.is_empty() {
        return Err(Error::EmptyDataset("manifest lists no items"));
    }
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &Path| -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };
    let mut items = Vec::with_capacity(entries.len());
    let mut labeled_indices = Vec::new();
    let mut unlabeled_indices = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        let image = pnm::load_image::<T>(&resolve(&e.image))?;
        let mask = pnm::load_image::<T>(&resolve(&e.mask))?;
        items.push(DataItem { image, mask });
        if e.labeled {
            labeled_indices.push(i);
        } else {
            unlabeled_indices.push(i);
        }
    }
    let dataset = Dataset {
        items,
        labeled_indices,
        unlabeled_indices,
    };
    dataset.validate()?;
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, split_labeled, SyntheticConfig};
    use tempfile::tempdir;

    #[test]
    fn dataset_round_trip_preserves_split_and_quantized_pixels() {
        let cfg = SyntheticConfig {
            image_count: 5,
            image_size: 8,
            ..SyntheticConfig::default()
        };
        let ds = generate_synthetic::<f32>(&cfg).unwrap();
        let ds = split_labeled(ds, 0.4, 3).unwrap();
        let dir = tempdir().unwrap();
        let manifest = save_dataset(dir.path(), &ds).unwrap();
        let back: Dataset<f32> = load_dataset(&manifest).unwrap();
        assert_eq!(back.labeled_indices, ds.labeled_indices);
        assert_eq!(back.unlabeled_indices, ds.unlabeled_indices);
        // Masks are binary, so they survive quantization exactly.
        for (a, b) in ds.items.iter().zip(&back.items) {
            assert_eq!(a.mask, b.mask);
            assert_eq!(a.image.shape, b.image.shape);
            // Images were float; after one save they sit on the 8-bit grid.
            for (&x, &y) in a.image.data.iter().zip(&b.image.data) {
                assert!((x - y).abs() <= 0.5 / 255.0 + 1e-6);
            }
        }
        // A second round trip is exact: already quantized.
        let dir2 = tempdir().unwrap();
        let manifest2 = save_dataset(dir2.path(), &back).unwrap();
        let back2: Dataset<f32> = load_dataset(&manifest2).unwrap();
        for (a, b) in back.items.iter().zip(&back2.items) {
            assert_eq!(a.image, b.image);
            assert_eq!(a.mask, b.mask);
        }
    }

    #[test]
    fn manifest_parse_errors_name_the_line() {
        let dir = tempdir().unwrap();
        let p = dir.path().join(MANIFEST_NAME);

        std::fs::write(&p, "a.ppm\tb.pgm\n").unwrap();
        match load_manifest(&p) {
            Err(Error::Manifest { line, .. }) => assert_eq!(line, 1),
            other => panic!("want Manifest error, got {other:?}"),
        }

        std::fs::write(&p, "a.ppm\tb.pgm\tlabeled\nx.ppm\ty.pgm\tmaybe\n").unwrap();
        match load_manifest(&p) {
            Err(Error::Manifest { line, .. }) => assert_eq!(line, 2),
            other => panic!("want Manifest error, got {other:?}"),
        }
    }

    #[test]
    fn manifest_tolerates_blank_lines() {
        let dir = tempdir().unwrap();
        let p = dir.path().join(MANIFEST_NAME);
        std::fs::write(&p, "\na.ppm\tb.pgm\tlabeled\n\n").unwrap();
        let entries = load_manifest(&p).unwrap();
        assert_eq!(entries.len(), 1);
        assert!(entries[0].labeled);
    }

    #[test]
    fn loading_non_binary_mask_fails_validation() {
        let dir = tempdir().unwrap();
        // A gray PGM posing as a mask.
        std::fs::write(
            dir.path().join("m.pgm"),
            [b"P5\n1 1\n255\n".as_ref(), &[128u8]].concat(),
        )
        .unwrap();
        std::fs::write(
            dir.path().join("i.ppm"),
            [b"P6\n1 1\n255\n".as_ref(), &[0u8, 0, 0]].concat(),
        )
        .unwrap();
        let p = dir.path().join(MANIFEST_NAME);
        std::fs::write(&p, "i.ppm\tm.pgm\tlabeled\n").unwrap();
        assert!(matches!(
            load_dataset::<f64>(&p),
            Err(Error::NonBinaryTarget(_))
        ));
    }

    #[test]
    fn empty_manifest_rejected() {
        let dir = tempdir().unwrap();
        let p = dir.path().join(MANIFEST_NAME);
        std::fs::write(&p, "").unwrap();
        assert!(matches!(
            load_dataset::<f64>(&p),
            Err(Error::EmptyDataset(_))
        ));
    }
}
