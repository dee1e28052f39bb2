//! Binary codebook files.
//!
//! Little-endian layout:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SNCB"
//! 4       4     version (u32) = 1
//! 8       4     K (u32)
//! 12      4     D (u32)
//! 16      1     metric (0 = L2 squared, 1 = neg dot, 2 = neg cosine)
//! 17      3     zero padding
//! 20      4*K*D f32 values, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Codebook, Metric};
use crate::error::{Error, FormatError, Result};

const MAGIC: [u8; 4] = *b"SNCB";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

pub fn write_codebook<W: Write>(codebook: &Codebook, mut w: W) -> std::io::Result<()> {
    let mut header = [0u8; HEADER_LEN];
    header[0..4].copy_from_slice(&MAGIC);
    header[4..8].copy_from_slice(&VERSION.to_le_bytes());
    header[8..12].copy_from_slice(&(codebook.size() as u32).to_le_bytes());
    header[12..16].copy_from_slice(&(codebook.dim() as u32).to_le_bytes());
    header[16] = codebook.metric().code();
    w.write_all(&header)?;
    for v in codebook.as_flat() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

/// Decode a codebook from an in-memory file image.
pub fn read_codebook(bytes: &[u8]) -> Result<Codebook> {
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated {
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        }
        .into());
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(FormatError::BadMagic { found: magic }.into());
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version).into());
    }
    let (size, dim) = (u32_at(8), u32_at(12));
    let metric = Metric::from_code(bytes[16]).ok_or(FormatError::UnknownMetric(bytes[16]))?;
    if bytes[17..20] != [0, 0, 0] {
        return Err(FormatError::BadPadding.into());
    }
    if size == 0 || dim == 0 {
        return Err(FormatError::InvalidShape { size, dim }.into());
    }
    let payload = &bytes[HEADER_LEN..];
    let expected = u64::from(size) * u64::from(dim) * 4;
    let actual = payload.len() as u64;
    if actual < expected {
        return Err(FormatError::Truncated { expected, actual }.into());
    }
    if actual > expected {
        return Err(FormatError::TrailingBytes(actual - expected).into());
    }
    let mut values = Vec::with_capacity(payload.len() / 4);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(FormatError::NonFinite(i).into());
        }
        values.push(v);
    }
    Codebook::new(values, size as usize, dim as usize, metric)
}

pub fn save_codebook(codebook: &Codebook, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_codebook(codebook, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_codebook(path: impl AsRef<Path>) -> Result<Codebook> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    read_codebook(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::grid_codebook;

    fn encode(cb: &Codebook) -> Vec<u8> {
        let mut buf = Vec::new();
        write_codebook(cb, &mut buf).unwrap();
        buf
    }

    fn format_err(bytes: &[u8]) -> FormatError {
        match read_codebook(bytes) {
            Err(Error::Format(e)) => e,
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn header_layout() {
        let cb = Codebook::from_rows(&[[1.0, 2.0]], Metric::NegDot).unwrap();
        let buf = encode(&cb);
        assert_eq!(
            buf,
            [
                b'S', b'N', b'C', b'B', 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, //
                0, 0, 0x80, 0x3f, 0, 0, 0, 0x40
            ]
        );
    }

    #[test]
    fn grid_round_trip_on_disk() {
        let cb = grid_codebook(-5.0, 5.0, 50).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.sncb");
        save_codebook(&cb, &path).unwrap();
        let back = load_codebook(&path).unwrap();
        assert_eq!(back, cb);
        let a: Vec<u32> = cb.as_flat().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = back.as_flat().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_corruption() {
        let cb = grid_codebook(0.0, 1.0, 3).unwrap();
        let good = encode(&cb);

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(format_err(&bad), FormatError::BadMagic { .. }));

        let mut bad = good.clone();
        bad[4] = 2;
        assert_eq!(format_err(&bad), FormatError::UnsupportedVersion(2));

        let mut bad = good.clone();
        bad[16] = 9;
        assert_eq!(format_err(&bad), FormatError::UnknownMetric(9));

        let mut bad = good.clone();
        bad[18] = 1;
        assert_eq!(format_err(&bad), FormatError::BadPadding);

        let bad = &good[..good.len() - 3];
        assert!(matches!(format_err(bad), FormatError::Truncated { .. }));

        let mut bad = good.clone();
        bad[8..12].copy_from_slice(&100u32.to_le_bytes());
        assert!(matches!(format_err(&bad), FormatError::Truncated { .. }));

        let mut bad = good.clone();
        bad.push(0);
        assert_eq!(format_err(&bad), FormatError::TrailingBytes(1));

        let mut bad = good.clone();
        bad[20..24].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert_eq!(format_err(&bad), FormatError::NonFinite(0));

        assert!(matches!(format_err(&good[..7]), FormatError::Truncated { .. }));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_codebook("/nonexistent/dir/cb.sncb"),
            Err(Error::Io { .. })
        ));
    }
}
