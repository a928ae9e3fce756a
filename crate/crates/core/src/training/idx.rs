//! Big-endian IDX files (the MNIST distribution format).

use std::path::Path;

use crate::error::{GcsError, Result};

use super::Dataset;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| GcsError::TruncatedFile(format!("{what}: header ends at byte {}", bytes.len())))
}

fn check_magic(bytes: &[u8], expected: u32, what: &str) -> Result<()> {
    let found = read_u32(bytes, 0, what)?;
    if found != expected {
        return Err(GcsError::BadMagic { found, expected });
    }
    Ok(())
}

/// Images scaled to `[0, 1]`, each flattened row-major.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(Vec<Vec<f64>>, usize)> {
    check_magic(bytes, IMAGE_MAGIC, "images")?;
    let count = read_u32(bytes, 4, "images")? as usize;
    let rows = read_u32(bytes, 8, "images")? as usize;
    let cols = read_u32(bytes, 12, "images")? as usize;
    let n = rows * cols;
    let body = &bytes[16..];
    if body.len() < count * n {
        return Err(GcsError::TruncatedFile(format!(
            "images: expected {} pixel bytes, found {}",
            count * n,
            body.len()
        )));
    }
    let samples = body[..count * n]
        .chunks_exact(n.max(1))
        .take(count)
        .map(|c| c.iter().map(|&b| f64::from(b) / 255.0).collect())
        .collect();
    Ok((samples, n))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABEL_MAGIC, "labels")?;
    let count = read_u32(bytes, 4, "labels")? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(GcsError::TruncatedFile(format!(
            "labels: expected {count} bytes, found {}",
            body.len()
        )));
    }
    Ok(body[..count].to_vec())
}

pub fn load_idx(images: impl AsRef<Path>, labels: Option<&Path>) -> Result<Dataset> {
    let (samples, n) = parse_idx_images(&std::fs::read(images)?)?;
    let labels = match labels {
        Some(p) => {
            let l = parse_idx_labels(&std::fs::read(p)?)?;
            if l.len() != samples.len() {
                return Err(GcsError::DimensionMismatch(format!(
                    "{} images but {} labels",
                    samples.len(),
                    l.len()
                )));
            }
            Some(l)
        }
        None => None,
    };
    Ok(Dataset { samples, n, labels })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> Vec<u8> {
        let mut b = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 3];
        b.extend_from_slice(&[0, 51, 255, 102, 0, 1]);
        b.extend_from_slice(&[255, 255, 0, 0, 204, 153]);
        b
    }

    #[test]
    fn two_image_fixture() {
        let (s, n) = parse_idx_images(&fixture()).unwrap();
        assert_eq!(n, 6);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0], vec![0.0, 0.2, 1.0, 0.4, 0.0, 1.0 / 255.0]);
        assert_eq!(s[1], vec![1.0, 1.0, 0.0, 0.0, 0.8, 0.6]);
    }

    #[test]
    fn bad_magic_and_truncation() {
        let mut b = fixture();
        b[3] = 1;
        assert!(matches!(
            parse_idx_images(&b),
            Err(GcsError::BadMagic { found: 0x801, expected: 0x803 })
        ));
        let b = fixture();
        assert!(matches!(parse_idx_images(&b[..20]), Err(GcsError::TruncatedFile(_))));
        assert!(matches!(parse_idx_images(&b[..10]), Err(GcsError::TruncatedFile(_))));
        assert!(matches!(parse_idx_labels(&[0, 0, 8, 1, 0, 0, 0, 3, 7]), Err(GcsError::TruncatedFile(_))));
    }

    #[test]
    fn files_with_labels() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        let lab = dir.path().join("lab");
        std::fs::write(&img, fixture()).unwrap();
        std::fs::write(&lab, [0, 0, 8, 1, 0, 0, 0, 2, 7, 3]).unwrap();
        let d = load_idx(&img, Some(&lab)).unwrap();
        assert_eq!(d.labels, Some(vec![7, 3]));
        std::fs::write(&lab, [0, 0, 8, 1, 0, 0, 0, 1, 7]).unwrap();
        assert!(matches!(load_idx(&img, Some(&lab)), Err(GcsError::DimensionMismatch(_))));
    }
}
