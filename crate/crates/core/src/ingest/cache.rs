//! Versioned binary cache of a [`FeatureMatrix`], stamped with the hash of
//! the schema that produced it.
//!
//! Layout (little endian): magic `EFMX`, u16 version, 32-byte schema hash,
//! u64 rows, u64 features, u8 has-labels, feature names as (u32 length,
//! UTF-8 bytes), row-major f64 values, then one u8 per label.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::flow::FlowLabel;
use crate::ingest::matrix::FeatureMatrix;

const MAGIC: &[u8; 4] = b"EFMX";
pub const CACHE_VERSION: u16 = 1;

pub fn write_cache<W: Write>(mut out: W, m: &FeatureMatrix, schema_hash: &str) -> Result<()> {
    let hash = decode_hash(schema_hash)?;
    out.write_all(MAGIC)?;
    out.write_u16::<LittleEndian>(CACHE_VERSION)?;
    out.write_all(&hash)?;
    out.write_u64::<LittleEndian>(m.n_rows() as u64)?;
    out.write_u64::<LittleEndian>(m.n_features() as u64)?;
    out.write_u8(m.labels().is_some() as u8)?;
    for name in m.feature_names() {
        out.write_u32::<LittleEndian>(name.len() as u32)?;
        out.write_all(name.as_bytes())?;
    }
    for &v in m.values() {
        out.write_f64::<LittleEndian>(v)?;
    }
    if let Some(labels) = m.labels() {
        for &l in labels {
            out.write_u8(l as u8)?;
        }
    }
    Ok(())
}

/// Reads a cache. When `expected_hash` is given, a cache written under a
/// different schema is rejected.
pub fn read_cache<R: Read>(mut src: R, expected_hash: Option<&str>) -> Result<(FeatureMatrix, String)> {
    let mut magic = [0u8; 4];
    src.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a feature cache".into()));
    }
    let version = src.read_u16::<LittleEndian>()?;
    if version != CACHE_VERSION {
        return Err(Error::Format(format!("unsupported cache version {version}")));
    }
    let mut hash = [0u8; 32];
    src.read_exact(&mut hash)?;
    let hash = hex::encode(hash);
    if let Some(expected) = expected_hash {
        if expected != hash {
            return Err(Error::Schema(format!("cache was built from schema {hash}, expected {expected}")));
        }
    }
    let rows = src.read_u64::<LittleEndian>()? as usize;
    let cols = src.read_u64::<LittleEndian>()? as usize;
    let has_labels = src.read_u8()? != 0;
    let mut names = Vec::with_capacity(cols);
    for _ in 0..cols {
        let len = src.read_u32::<LittleEndian>()? as usize;
        let mut buf = vec![0u8; len];
        src.read_exact(&mut buf)?;
        names.push(String::from_utf8(buf).map_err(|_| Error::Format("feature name is not UTF-8".into()))?);
    }
    let mut values = vec![0.0; rows * cols];
    src.read_f64_into::<LittleEndian>(&mut values)?;
    let labels = if has_labels {
        let mut raw = vec![0u8; rows];
        src.read_exact(&mut raw)?;
        Some(raw.into_iter().map(|b| FlowLabel::try_from(b).map_err(Error::Format)).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    Ok((FeatureMatrix::new(values, names, labels)?, hash))
}

fn decode_hash(h: &str) -> Result<[u8; 32]> {
    let bytes = hex::decode(h).map_err(|_| Error::Format("schema hash is not hex".into()))?;
    bytes.try_into().map_err(|_| Error::Format("schema hash must be 32 bytes".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::schema::DatasetSchema;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(rows in proptest::collection::vec(proptest::collection::vec(-1e9f64..1e9, 4), 1..20),
                      labeled in any::<bool>()) {
            let labels = labeled.then(|| (0..rows.len()).map(|i| FlowLabel::from(i % 3 == 0)).collect());
            let m = FeatureMatrix::from_rows(&rows, labels).unwrap();
            let hash = DatasetSchema::preset("sdn").unwrap().hash();
            let mut buf = Vec::new();
            write_cache(&mut buf, &m, &hash).unwrap();
            let (back, h) = read_cache(buf.as_slice(), Some(&hash)).unwrap();
            prop_assert_eq!(back, m);
            prop_assert_eq!(h, hash);
        }
    }

    #[test]
    fn rejects_foreign_schema_and_garbage() {
        let m = FeatureMatrix::from_rows(&[vec![1.0]], None).unwrap();
        let nims = DatasetSchema::preset("nims").unwrap().hash();
        let sdn = DatasetSchema::preset("sdn").unwrap().hash();
        let mut buf = Vec::new();
        write_cache(&mut buf, &m, &nims).unwrap();
        assert!(matches!(read_cache(buf.as_slice(), Some(&sdn)), Err(Error::Schema(_))));
        assert!(read_cache(&b"NOPE"[..], None).is_err());
        buf[4] = 9;
        assert!(matches!(read_cache(buf.as_slice(), None), Err(Error::Format(_))));
    }
}
