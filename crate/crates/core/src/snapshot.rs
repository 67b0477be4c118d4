//! NSEL binary snapshot files.
//!
//! Layout, all little-endian: magic `NSEL`, format version `u32`, points per
//! axis `u32`, component count `u32`, time `f64`, then each component's
//! `n³` grid samples as `f64` in storage order (x fastest).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::RealField;

pub const MAGIC: &[u8; 4] = b"NSEL";
pub const VERSION: u32 = 1;
const HEADER: usize = 4 + 4 + 4 + 4 + 8;

pub fn encode(time: f64, field: &RealField) -> Vec<u8> {
    let n = field.n();
    let mut buf = Vec::with_capacity(HEADER + 8 * field.ncomp() * n * n * n);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&(field.ncomp() as u32).to_le_bytes());
    buf.extend_from_slice(&time.to_le_bytes());
    for comp in field.comps() {
        for v in comp {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<(f64, RealField)> {
    let truncated = |expected: usize| Error::Truncated {
        path: path.to_path_buf(),
        expected,
        found: bytes.len(),
    };
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
        });
    }
    if bytes.len() < HEADER {
        return Err(truncated(HEADER));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            version,
            path: path.to_path_buf(),
        });
    }
    let n = u32_at(8) as usize;
    let ncomp = u32_at(12) as usize;
    let time = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let len = n * n * n;
    let expected = HEADER + 8 * ncomp * len;
    if bytes.len() != expected {
        return Err(truncated(expected));
    }
    let mut comps = Vec::with_capacity(ncomp);
    let mut chunks = bytes[HEADER..].chunks_exact(8);
    for _ in 0..ncomp {
        let comp: Vec<f64> = chunks
            .by_ref()
            .take(len)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        comps.push(comp);
    }
    Ok((time, RealField::from_components(n, comps)))
}

pub fn write(path: &Path, time: f64, field: &RealField) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode(time, field))?;
    file.sync_all()?;
    Ok(())
}

pub fn read(path: &Path) -> Result<(f64, RealField)> {
    let bytes = fs::read(path)?;
    decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(n: usize, ncomp: usize, seed: u64) -> RealField {
        RealField::from_fn(n, ncomp, |c, x| {
            ((seed as f64 + 1.0) * x[0] + c as f64 * x[1]).sin() * 1e3 + x[2]
        })
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let p = Path::new("x.nsel");
        let mut b = encode(0.5, &sample(4, 1, 0));
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad, p), Err(Error::BadMagic { .. })));
        b[4] = 2;
        assert!(matches!(
            decode(&b, p),
            Err(Error::UnsupportedVersion { version: 2, .. })
        ));
    }

    #[test]
    fn rejects_truncation() {
        let b = encode(0.0, &sample(4, 3, 1));
        let p = Path::new("x.nsel");
        assert!(matches!(
            decode(&b[..b.len() - 1], p),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(decode(&b[..10], p), Err(Error::Truncated { .. })));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.nsel");
        let f = sample(8, 3, 2);
        write(&path, 0.125, &f).unwrap();
        let (t, g) = read(&path).unwrap();
        assert_eq!(t, 0.125);
        assert_eq!(g, f);
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            time in any::<f64>(),
            values in proptest::collection::vec(any::<f64>(), 2 * 64),
        ) {
            let comps = vec![values[..64].to_vec(), values[64..].to_vec()];
            let f = RealField::from_components(4, comps);
            let (t, g) = decode(&encode(time, &f), Path::new("p")).unwrap();
            prop_assert_eq!(t.to_bits(), time.to_bits());
            for (a, b) in f.comps().iter().flatten().zip(g.comps().iter().flatten()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
