use std::io::{ErrorKind, Read, Write};
use std::path::Path;

use super::{EmbeddingDataset, MODALITIES};
use crate::error::{Error, Result};

pub const MMEB_MAGIC: &[u8; 4] = b"MMEB";
pub const MMEB_VERSION: u8 = 1;

const HEADER_LEN: usize = 4 + 1 + 8 + 8;

impl EmbeddingDataset {
    /// MMEB1 encoding: magic, version byte, `n` and `d_emb` as u64 LE,
    /// one label byte per row, then every feature as f32 LE in row order.
    pub fn to_mmeb_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.len() * (1 + 4 * self.width()));
        out.extend_from_slice(MMEB_MAGIC);
        out.push(MMEB_VERSION);
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.d_emb as u64).to_le_bytes());
        out.extend_from_slice(&self.labels);
        for v in &self.features {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_mmeb_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let truncated = |what: &str| {
            Error::io(
                path,
                std::io::Error::new(ErrorKind::UnexpectedEof, format!("truncated {what}")),
            )
        };
        if bytes.len() < 4 {
            return Err(truncated("header"));
        }
        if &bytes[..4] != MMEB_MAGIC {
            return Err(Error::Format(format!(
                "{}: bad magic {:?}, expected \"MMEB\"",
                path.display(),
                String::from_utf8_lossy(&bytes[..4])
            )));
        }
        if bytes.len() < HEADER_LEN {
            return Err(truncated("header"));
        }
        if bytes[4] != MMEB_VERSION {
            return Err(Error::Format(format!(
                "{}: unsupported version {}, expected {MMEB_VERSION}",
                path.display(),
                bytes[4]
            )));
        }
        let n = u64::from_le_bytes(bytes[5..13].try_into().unwrap()) as usize;
        let d_emb = u64::from_le_bytes(bytes[13..21].try_into().unwrap()) as usize;
        let n_feat = n
            .checked_mul(3)
            .and_then(|x| x.checked_mul(d_emb))
            .ok_or_else(|| Error::Format(format!("{}: header sizes overflow", path.display())))?;
        let need = HEADER_LEN + n + 4 * n_feat;
        if bytes.len() < need {
            return Err(truncated("payload"));
        }
        if bytes.len() > need {
            return Err(Error::Format(format!(
                "{}: {} trailing bytes after payload",
                path.display(),
                bytes.len() - need
            )));
        }
        let labels = bytes[HEADER_LEN..HEADER_LEN + n].to_vec();
        let features = bytes[HEADER_LEN + n..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(d_emb, labels, features, format!("mmeb:{}", path.display()))
    }

    pub fn save_mmeb(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_mmeb_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load_mmeb(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_mmeb_bytes(&bytes, path)
    }

    pub fn csv_header(d_emb: usize) -> Vec<String> {
        let mut h = vec!["label".to_string()];
        for m in MODALITIES {
            h.extend((0..d_emb).map(|k| format!("{m}_{k}")));
        }
        h
    }

    /// CSV mode; values use the shortest text that round-trips the `f32`.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
        w.write_record(Self::csv_header(self.d_emb)).map_err(io)?;
        for i in 0..self.len() {
            let mut rec = vec![self.labels[i].to_string()];
            rec.extend(self.row_f32(i).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        let header = r
            .headers()
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
            .clone();
        let width = header.len().saturating_sub(1);
        if width == 0 || width % 3 != 0 {
            return Err(Error::Format(format!(
                "{}: header has {} feature columns, expected a multiple of 3",
                path.display(),
                width
            )));
        }
        let d_emb = width / 3;
        let expected = Self::csv_header(d_emb);
        if header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(Error::Format(format!(
                "{}: header does not match label,rgb_0..,depth_0..,ir_0..",
                path.display()
            )));
        }
        let mut labels = Vec::new();
        let mut features = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            let parse_err = |col: usize| {
                Error::Format(format!("{}: row {row}, column {col}: not a number", path.display()))
            };
            labels.push(rec[0].trim().parse::<u8>().map_err(|_| parse_err(0))?);
            for c in 1..rec.len() {
                let v: f32 = rec[c].trim().parse().map_err(|_| parse_err(c))?;
                if !(v.abs() < 1.0) {
                    return Err(Error::Range {
                        row,
                        column: c - 1,
                        value: v as f64,
                    });
                }
                features.push(v);
            }
        }
        Self::new(d_emb, labels, features, format!("csv:{}", path.display()))
    }

    /// Loads by extension: `.csv` as CSV, anything else as MMEB1.
    pub fn load(path: &Path) -> Result<Self> {
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            Self::load_csv(path)
        } else {
            Self::load_mmeb(path)
        }
    }
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::super::{gen_synthetic, GenParams};
    use super::*;

    fn sample() -> EmbeddingDataset {
        gen_synthetic(&GenParams {
            n: 37,
            d_emb: 5,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn mmeb_roundtrip_is_byte_exact() {
        let d = sample();
        let bytes = d.to_mmeb_bytes();
        let back = EmbeddingDataset::from_mmeb_bytes(&bytes, Path::new("x")).unwrap();
        assert_eq!(back.features, d.features);
        assert_eq!(back.labels, d.labels);
        assert_eq!(back.to_mmeb_bytes(), bytes);
    }

    #[test]
    fn corrupted_magic_and_truncation() {
        let mut bytes = sample().to_mmeb_bytes();
        let cut = bytes[..bytes.len() - 3].to_vec();
        assert!(matches!(
            EmbeddingDataset::from_mmeb_bytes(&cut, Path::new("x")),
            Err(Error::Io { .. })
        ));
        bytes[0] = b'X';
        match EmbeddingDataset::from_mmeb_bytes(&bytes, Path::new("x")) {
            Err(Error::Format(m)) => assert!(m.contains("MMEB")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let d = sample();
        d.save_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("label,rgb_0,rgb_1,rgb_2,rgb_3,rgb_4,depth_0,"));
        let back = EmbeddingDataset::load(&path).unwrap();
        assert_eq!(back.features, d.features);
        assert_eq!(back.labels, d.labels);
    }

    #[test]
    fn csv_range_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "label,rgb_0,depth_0,ir_0\n0,0.1,0.2,0.3\n1,0.1,1.5,0.0\n").unwrap();
        match EmbeddingDataset::load_csv(&path) {
            Err(Error::Range { row, column, value }) => {
                assert_eq!((row, column, value), (1, 1, 1.5));
            }
            other => panic!("{other:?}"),
        }
    }
}
