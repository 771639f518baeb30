//! Dataset directories: `images/`, `truth/` and optional `masks/`, matched by
//! file stem.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use mtht::error::Error;

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub name: String,
    pub image: PathBuf,
    pub truth: PathBuf,
    pub mask: Option<PathBuf>,
}

/// Files of `dir` keyed by stem; a missing directory is empty.
fn by_stem(dir: &Path) -> Result<BTreeMap<String, PathBuf>, Error> {
    let mut files = BTreeMap::new();
    if !dir.is_dir() {
        return Ok(files);
    }
    let io_err = |source| Error::Io {
        path: dir.to_path_buf(),
        source,
    };
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if !path.is_file() {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            files.insert(stem.to_string(), path);
        }
    }
    Ok(files)
}

/// Entries sorted by name. Every image needs a truth file; masks are optional.
pub fn scan(root: &Path) -> Result<Vec<Entry>, Error> {
    let images = by_stem(&root.join("images"))?;
    let mut truths = by_stem(&root.join("truth"))?;
    let mut masks = by_stem(&root.join("masks"))?;
    if images.is_empty() {
        return Err(Error::Empty("dataset images/ directory"));
    }
    images
        .into_iter()
        .map(|(name, image)| {
            let truth = truths.remove(&name).ok_or_else(|| Error::Io {
                path: root.join("truth").join(&name),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no truth file with this stem"),
            })?;
            let mask = masks.remove(&name);
            Ok(Entry {
                name,
                image,
                truth,
                mask,
            })
        })
        .collect()
}
