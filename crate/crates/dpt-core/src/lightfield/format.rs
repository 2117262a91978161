//! On-disk formats: the LFR container and 16-bit PGM view exports.
//!
//! LFR layout (little-endian): magic "LFR1", five u32 extents U, V, C, H, W,
//! then U*V*C*H*W f32 samples in row-major [u][v][c][h][w] order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::LightField;
use crate::error::{dim_err, Error, Result};

const LFR_MAGIC: [u8; 4] = *b"LFR1";

pub fn write_lfr(path: &Path, lf: &LightField) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&LFR_MAGIC)?;
    for extent in [lf.views_u(), lf.views_v(), lf.channels(), lf.height(), lf.width()] {
        let extent = u32::try_from(extent)
            .map_err(|_| Error::Format(format!("extent {extent} exceeds u32")))?;
        out.write_all(&extent.to_le_bytes())?;
    }
    for &v in lf.data() {
        out.write_all(&(v as f32).to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_lfr(path: &Path) -> Result<LightField> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    input
        .read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated LFR header".to_string()))?;
    if magic != LFR_MAGIC {
        return Err(Error::Format(format!("bad LFR magic {magic:02x?}")));
    }
    let mut extents = [0usize; 5];
    for e in &mut extents {
        let mut buf = [0u8; 4];
        input
            .read_exact(&mut buf)
            .map_err(|_| Error::Format("truncated LFR header".to_string()))?;
        *e = u32::from_le_bytes(buf) as usize;
    }
    let count = extents
        .iter()
        .try_fold(1u64, |acc, &e| acc.checked_mul(e as u64))
        .filter(|&n| n <= (usize::MAX / 8) as u64)
        .ok_or_else(|| Error::Format(format!("LFR extents {extents:?} overflow")))?
        as usize;
    let mut data = Vec::with_capacity(count);
    let mut buf = [0u8; 4];
    for _ in 0..count {
        input
            .read_exact(&mut buf)
            .map_err(|_| Error::Format("truncated LFR payload".to_string()))?;
        data.push(f32::from_le_bytes(buf) as f64);
    }
    if input.read(&mut buf)? != 0 {
        return Err(Error::Format("trailing bytes after LFR payload".to_string()));
    }
    LightField::from_data(extents[0], extents[1], extents[2], extents[3], extents[4], data)
}

/// Write one binary 16-bit PGM per view, named `sai_u{u}_v{v}.pgm`.
/// Samples are round(x * 65535), clamped, big-endian per the PGM spec.
pub fn export_pgm(lf: &LightField, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    if lf.channels() != 1 {
        return dim_err(format!("export_pgm wants C=1, got {}", lf.channels()));
    }
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for u in 0..lf.views_u() {
        for v in 0..lf.views_v() {
            let path = dir.join(format!("sai_u{u}_v{v}.pgm"));
            let mut out = BufWriter::new(File::create(&path)?);
            write!(out, "P5\n{} {}\n65535\n", lf.width(), lf.height())?;
            for &x in lf.plane(u, v, 0) {
                let q = (x * 65535.0).round().clamp(0.0, 65535.0) as u16;
                out.write_all(&q.to_be_bytes())?;
            }
            out.flush()?;
            paths.push(path);
        }
    }
    Ok(paths)
}

/// Read a binary 16-bit PGM back as unit-range samples (test/inspection aid).
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let header_err = || Error::Format(format!("bad PGM header in {}", path.display()));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 && pos < bytes.len() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| header_err())?);
    }
    if fields.len() != 4 || fields[0] != "P5" || fields[3] != "65535" {
        return Err(header_err());
    }
    let w: usize = fields[1].parse().map_err(|_| header_err())?;
    let h: usize = fields[2].parse().map_err(|_| header_err())?;
    pos += 1; // single whitespace after maxval
    let payload = &bytes[pos..];
    if payload.len() != 2 * w * h {
        return Err(Error::Format(format!(
            "PGM payload {} bytes, want {}",
            payload.len(),
            2 * w * h
        )));
    }
    let data = payload
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 / 65535.0)
        .collect();
    Ok((h, w, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn lfr_round_trip_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut lf = LightField::zeros(2, 2, 3, 4, 5);
        let mut rng = crate::rng::stream(1, crate::rng::StreamKind::Test);
        for v in lf.data_mut() {
            // draw f32-representable values: LFR stores f32 samples
            *v = rng.gen::<f32>() as f64;
        }
        let path = dir.path().join("field.lfr");
        write_lfr(&path, &lf).unwrap();
        let back = read_lfr(&path).unwrap();
        assert_eq!(back, lf);

        // file-level idempotence: write(read(f)) reproduces the bytes
        let path2 = dir.path().join("copy.lfr");
        write_lfr(&path2, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn minimal_field_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let lf = LightField::from_data(1, 1, 1, 1, 1, vec![0.25]).unwrap();
        let path = dir.path().join("tiny.lfr");
        write_lfr(&path, &lf).unwrap();
        assert_eq!(read_lfr(&path).unwrap(), lf);
    }

    #[test]
    fn header_only_file_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.lfr");
        let mut bytes = b"LFR1".to_vec();
        for e in [1u32, 1, 1, 2, 2] {
            bytes.extend_from_slice(&e.to_le_bytes());
        }
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_lfr(&path), Err(Error::Format(_))));
    }

    #[test]
    fn bad_magic_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.lfr");
        std::fs::write(&path, b"NOPE00000000000000000000").unwrap();
        assert!(matches!(read_lfr(&path), Err(Error::Format(_))));
    }

    #[test]
    fn extent_overflow_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("huge.lfr");
        let mut bytes = b"LFR1".to_vec();
        for e in [u32::MAX, u32::MAX, u32::MAX, u32::MAX, u32::MAX] {
            bytes.extend_from_slice(&e.to_le_bytes());
        }
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_lfr(&path), Err(Error::Format(_))));
    }

    #[test]
    fn pgm_export_count_and_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let mut lf = LightField::zeros(2, 2, 1, 3, 3);
        for v in lf.data_mut() {
            *v = 0.5;
        }
        let paths = export_pgm(&lf, dir.path()).unwrap();
        assert_eq!(paths.len(), 4);
        let (h, w, data) = read_pgm(&paths[0]).unwrap();
        assert_eq!((h, w), (3, 3));
        // round(0.5 * 65535) = 32768
        assert!(data.iter().all(|&v| v == 32768.0 / 65535.0));
    }

    #[test]
    fn pgm_reimport_within_quantization_bound() {
        let dir = tempfile::tempdir().unwrap();
        let mut lf = LightField::zeros(1, 1, 1, 4, 4);
        let mut rng = crate::rng::stream(2, crate::rng::StreamKind::Test);
        for v in lf.data_mut() {
            *v = rng.gen_range(0.0..1.0);
        }
        let paths = export_pgm(&lf, dir.path()).unwrap();
        let (_, _, data) = read_pgm(&paths[0]).unwrap();
        for (a, b) in data.iter().zip(lf.plane(0, 0, 0)) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
        }
    }
}
