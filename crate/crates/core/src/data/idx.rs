//! MNIST IDX reader and writer (big-endian, unsigned-byte payloads).

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};

use super::{DataError, Dataset};
use crate::numerics::Matrix;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const MNIST_CLASSES: usize = 10;

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_u32(cur: &mut Cursor<&[u8]>, what: &str) -> Result<u32, DataError> {
    let offset = cur.position() as usize;
    cur.read_u32::<BigEndian>().map_err(|_| DataError::Format {
        offset,
        message: format!("truncated header while reading {what}"),
    })
}

fn check_magic(cur: &mut Cursor<&[u8]>, expected: u32) -> Result<(), DataError> {
    let magic = read_u32(cur, "magic number")?;
    if magic != expected {
        return Err(DataError::Format {
            offset: 0,
            message: format!("bad magic 0x{magic:08x}, expected 0x{expected:08x}"),
        });
    }
    Ok(())
}

fn read_payload(cur: &mut Cursor<&[u8]>, len: usize) -> Result<Vec<u8>, DataError> {
    let offset = cur.position() as usize;
    let mut buf = vec![0u8; len];
    cur.read_exact(&mut buf).map_err(|_| DataError::Format {
        offset: cur.get_ref().len(),
        message: format!(
            "truncated payload: expected {len} bytes from offset {offset}, file has {}",
            cur.get_ref().len().saturating_sub(offset)
        ),
    })?;
    Ok(buf)
}

/// Parses an IDX image file into `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>), DataError> {
    let mut cur = Cursor::new(bytes);
    check_magic(&mut cur, IDX_IMAGES_MAGIC)?;
    let count = read_u32(&mut cur, "image count")? as usize;
    let rows = read_u32(&mut cur, "row count")? as usize;
    let cols = read_u32(&mut cur, "column count")? as usize;
    if count == 0 || rows == 0 || cols == 0 {
        return Err(DataError::Format {
            offset: 4,
            message: format!("degenerate dimensions {count}x{rows}x{cols}"),
        });
    }
    let pixels = read_payload(&mut cur, count * rows * cols)?;
    Ok((count, rows, cols, pixels))
}

/// Parses an IDX label file.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, DataError> {
    let mut cur = Cursor::new(bytes);
    check_magic(&mut cur, IDX_LABELS_MAGIC)?;
    let count = read_u32(&mut cur, "label count")? as usize;
    let labels = read_payload(&mut cur, count)?;
    if let Some(pos) = labels.iter().position(|&l| usize::from(l) >= MNIST_CLASSES) {
        return Err(DataError::Format {
            offset: 8 + pos,
            message: format!("label {} outside 0..{MNIST_CLASSES}", labels[pos]),
        });
    }
    Ok(labels)
}

/// Loads an MNIST image/label file pair; pixels are scaled by 1/255.
pub fn load_mnist_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<Dataset, DataError> {
    let images_path = images_path.as_ref();
    let image_bytes = read_file(images_path)?;
    let label_bytes = read_file(labels_path.as_ref())?;
    let (count, rows, cols, pixels) = parse_idx_images(&image_bytes)?;
    let labels = parse_idx_labels(&label_bytes)?;
    if labels.len() != count {
        return Err(DataError::Format {
            offset: 4,
            message: format!(
                "label file holds {} entries but image file holds {count}",
                labels.len()
            ),
        });
    }
    let features = Matrix::from_vec(
        count,
        rows * cols,
        pixels.iter().map(|&p| f64::from(p) / 255.0).collect(),
    )?;
    let name = images_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mnist".into());
    Dataset::new(
        features,
        labels.into_iter().map(usize::from).collect(),
        MNIST_CLASSES,
        name,
    )
}

/// Encodes features as IDX images of shape `rows × cols`, rounding each
/// value times 255 to the nearest byte.
pub fn encode_idx_images(
    features: &Matrix,
    rows: usize,
    cols: usize,
) -> Result<Vec<u8>, DataError> {
    if rows * cols != features.cols() {
        return Err(DataError::Invalid(format!(
            "{rows}x{cols} images cannot hold {} features",
            features.cols()
        )));
    }
    let mut out = Vec::with_capacity(16 + features.as_slice().len());
    out.write_u32::<BigEndian>(IDX_IMAGES_MAGIC)
        .expect("vec write");
    for dim in [features.rows(), rows, cols] {
        out.write_u32::<BigEndian>(dim as u32).expect("vec write");
    }
    out.extend(
        features
            .as_slice()
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    Ok(out)
}

pub fn encode_idx_labels(labels: &[usize]) -> Result<Vec<u8>, DataError> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.write_u32::<BigEndian>(IDX_LABELS_MAGIC)
        .expect("vec write");
    out.write_u32::<BigEndian>(labels.len() as u32)
        .expect("vec write");
    for &y in labels {
        let byte = u8::try_from(y)
            .map_err(|_| DataError::Invalid(format!("label {y} does not fit in a byte")))?;
        out.push(byte);
    }
    Ok(out)
}

/// Writes `dataset` as an IDX image/label pair with the given image shape.
pub fn write_mnist_idx(
    dataset: &Dataset,
    rows: usize,
    cols: usize,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<(), DataError> {
    let write = |path: &Path, bytes: Vec<u8>| {
        fs::write(path, bytes).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })
    };
    write(
        images_path.as_ref(),
        encode_idx_images(dataset.features(), rows, cols)?,
    )?;
    write(labels_path.as_ref(), encode_idx_labels(dataset.labels())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(magic: u32, dims: &[u32]) -> Vec<u8> {
        let mut out = Vec::new();
        out.write_u32::<BigEndian>(magic).unwrap();
        for &d in dims {
            out.write_u32::<BigEndian>(d).unwrap();
        }
        out
    }

    fn image_file(count: u32) -> Vec<u8> {
        let mut bytes = header(IDX_IMAGES_MAGIC, &[count, 28, 28]);
        bytes.extend((0..count as usize * 784).map(|i| (i % 256) as u8));
        bytes
    }

    fn label_file(labels: &[u8]) -> Vec<u8> {
        let mut bytes = header(IDX_LABELS_MAGIC, &[labels.len() as u32]);
        bytes.extend_from_slice(labels);
        bytes
    }

    #[test]
    fn loads_ten_images() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
        fs::write(&ip, image_file(10)).unwrap();
        fs::write(&lp, label_file(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9])).unwrap();
        let d = load_mnist_idx(&ip, &lp).unwrap();
        assert_eq!((d.len(), d.dim()), (10, 784));
        // Byte 255 sits at flat index 255.
        assert_eq!(d.features().as_slice()[255], 1.0);
        assert_eq!(d.features().as_slice()[0], 0.0);
    }

    #[test]
    fn bad_magic_is_reported() {
        let mut bytes = image_file(1);
        bytes[3] = 0x02;
        let err = parse_idx_images(&bytes).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
    }

    #[test]
    fn truncated_and_mismatched_files() {
        let bytes = image_file(2);
        let err = parse_idx_images(&bytes[..bytes.len() - 1]).unwrap_err();
        assert!(matches!(err, DataError::Format { .. }), "{err}");
        assert!(parse_idx_images(&bytes[..6]).is_err());

        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
        fs::write(&ip, image_file(2)).unwrap();
        fs::write(&lp, label_file(&[1, 2, 3])).unwrap();
        let err = load_mnist_idx(&ip, &lp).unwrap_err();
        assert!(err.to_string().contains("label file holds 3"), "{err}");
    }

    #[test]
    fn rejects_out_of_range_label() {
        let err = parse_idx_labels(&label_file(&[3, 11])).unwrap_err();
        assert!(matches!(err, DataError::Format { offset: 9, .. }), "{err}");
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_mnist_idx("/nonexistent/a", "/nonexistent/b").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/a"));
    }
}
