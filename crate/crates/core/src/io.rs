//! File helpers shared by the serialisable formats.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<V: DeserializeOwned>(path: &Path) -> Result<V> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
}

/// Checks a `"major.minor"` version tag against the supported major version.
pub fn check_version(kind: &str, found: &str, supported_major: u32) -> Result<()> {
    let major = found
        .split('.')
        .next()
        .and_then(|m| m.parse::<u32>().ok());
    if major == Some(supported_major) {
        Ok(())
    } else {
        Err(Error::UnsupportedVersion {
            kind: kind.to_string(),
            found: found.to_string(),
            supported: supported_major,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.json");
        write_atomic(&p, b"first").unwrap();
        write_atomic(&p, b"second").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "second");
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn version_check_rejects_other_majors() {
        assert!(check_version("labels", "1.3", 1).is_ok());
        assert!(check_version("labels", "2.0", 1).is_err());
        assert!(check_version("labels", "garbage", 1).is_err());
    }
}
