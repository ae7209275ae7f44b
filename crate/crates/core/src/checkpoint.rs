//! Self-describing checkpoint container.
//!
//! Layout: the magic `MPSQ`, one version byte, the header length as u64 LE,
//! a UTF-8 JSON header, then every array listed in the header as raw f64 LE
//! values in header order. The header records the payload's SHA-256.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::write_atomic;
use crate::error::{Error, Result};
use crate::mps::{bond_label, phys_label, MpsMode, MpsProjector, FEATURE_LABEL, HEAD_INPUT_LABEL};
use crate::tensor::Tensor;
use crate::train::StageOneHead;
use crate::vqc::{AnsatzSpec, ReadoutHead, VqcModel};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MPSQ";
pub const CHECKPOINT_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckpointKind {
    /// Projector plus its stage-one head.
    StageOne,
    /// Circuit classifier trained on a frozen projector.
    StageTwo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayMeta {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ArrayMeta {
    fn len(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub kind: CheckpointKind,
    pub seed: u64,
    pub config_hash: String,
    pub payload_sha256: String,
    pub meta: serde_json::Value,
    pub arrays: Vec<ArrayMeta>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MpsMeta {
    mode: MpsMode,
    length: usize,
    phys_dim: usize,
    d_fused: usize,
    center: usize,
    checksum: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VqcMeta {
    circuit: AnsatzSpec,
    d_fused: usize,
    mps_checksum: String,
}

/// Decoded checkpoint: header plus named arrays.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    arrays: Vec<Vec<f64>>,
}

fn payload_digest(arrays: &[Vec<f64>]) -> String {
    let mut h = Sha256::new();
    for a in arrays {
        for x in a {
            h.update(x.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

impl Checkpoint {
    fn build(
        kind: CheckpointKind,
        seed: u64,
        config_hash: &str,
        meta: serde_json::Value,
        named: Vec<(String, Vec<usize>, Vec<f64>)>,
    ) -> Self {
        let mut metas = Vec::with_capacity(named.len());
        let mut arrays = Vec::with_capacity(named.len());
        for (name, shape, data) in named {
            debug_assert_eq!(shape.iter().product::<usize>(), data.len());
            metas.push(ArrayMeta { name, shape });
            arrays.push(data);
        }
        Self {
            header: CheckpointHeader {
                kind,
                seed,
                config_hash: config_hash.to_string(),
                payload_sha256: payload_digest(&arrays),
                meta,
                arrays: metas,
            },
            arrays,
        }
    }

    pub fn array(&self, name: &str) -> Result<(&ArrayMeta, &[f64])> {
        self.header
            .arrays
            .iter()
            .zip(&self.arrays)
            .find(|(m, _)| m.name == name)
            .map(|(m, a)| (m, a.as_slice()))
            .ok_or_else(|| Error::Format(format!("checkpoint has no array `{name}`")))
    }

    /// Recomputes the payload digest and compares it with the header.
    pub fn payload_intact(&self) -> bool {
        payload_digest(&self.arrays) == self.header.payload_sha256
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let n: usize = self.arrays.iter().map(Vec::len).sum();
        let mut out = Vec::with_capacity(13 + header.len() + 8 * n);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.push(CHECKPOINT_VERSION);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for a in &self.arrays {
            for x in a {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    /// Parses the container. The payload digest is not checked here; see
    /// [`Checkpoint::payload_intact`].
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let eof = |what: &str| {
            Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::UnexpectedEof, format!("truncated {what}")),
            )
        };
        if bytes.len() < 13 {
            return Err(eof("header"));
        }
        if &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::Format(format!(
                "{}: not a checkpoint (expected magic \"MPSQ\")",
                path.display()
            )));
        }
        if bytes[4] != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "{}: checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                path.display(),
                bytes[4]
            )));
        }
        let hlen = u64::from_le_bytes(bytes[5..13].try_into().unwrap()) as usize;
        let body = &bytes[13..];
        if body.len() < hlen {
            return Err(eof("header"));
        }
        let header: CheckpointHeader = serde_json::from_slice(&body[..hlen])
            .map_err(|e| Error::Format(format!("{}: checkpoint header: {e}", path.display())))?;
        let mut rest = &body[hlen..];
        let mut arrays = Vec::with_capacity(header.arrays.len());
        for m in &header.arrays {
            let need = 8 * m.len();
            if rest.len() < need {
                return Err(eof(&format!("array `{}`", m.name)));
            }
            let (a, b) = rest.split_at(need);
            arrays.push(
                a.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            );
            rest = b;
        }
        if !rest.is_empty() {
            return Err(Error::Format(format!(
                "{}: {} trailing bytes after payload",
                path.display(),
                rest.len()
            )));
        }
        Ok(Self { header, arrays })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    fn require(&self, kind: CheckpointKind) -> Result<()> {
        if self.header.kind != kind {
            return Err(Error::Config(format!(
                "expected a {kind:?} checkpoint, found {:?}",
                self.header.kind
            )));
        }
        if !self.payload_intact() {
            return Err(Error::Format("checkpoint payload digest mismatch".into()));
        }
        Ok(())
    }

    pub fn stage_one(mps: &MpsProjector, head: &StageOneHead, seed: u64, config_hash: &str) -> Self {
        let meta = MpsMeta {
            mode: mps.mode(),
            length: mps.len(),
            phys_dim: 2,
            d_fused: mps.d_fused(),
            center: mps.center(),
            checksum: mps.checksum(),
        };
        let mut named: Vec<(String, Vec<usize>, Vec<f64>)> = mps
            .sites()
            .iter()
            .enumerate()
            .map(|(n, t)| (format!("site{n}"), t.shape().to_vec(), t.data().to_vec()))
            .collect();
        for (n, b) in mps.biases().iter().enumerate() {
            named.push((format!("bias{n}"), vec![b.len()], b.clone()));
        }
        if let Some(h) = mps.head() {
            named.push(("feature_head".into(), h.shape().to_vec(), h.data().to_vec()));
        }
        named.push((
            "stage_one_head".into(),
            vec![head.classes(), head.d_fused()],
            head.weights().to_vec(),
        ));
        Self::build(
            CheckpointKind::StageOne,
            seed,
            config_hash,
            serde_json::to_value(meta).expect("meta serializes"),
            named,
        )
    }

    /// Projector and stage-one head. Structural invariants are validated;
    /// canonical form is left to the verification suite.
    pub fn to_stage_one(&self) -> Result<(MpsProjector, StageOneHead)> {
        self.require(CheckpointKind::StageOne)?;
        let meta: MpsMeta = serde_json::from_value(self.header.meta.clone())
            .map_err(|e| Error::Format(format!("checkpoint meta: {e}")))?;
        let mut sites = Vec::with_capacity(meta.length);
        for n in 0..meta.length {
            let (m, data) = self.array(&format!("site{n}"))?;
            let mut labels = vec![bond_label(n), phys_label(n), bond_label(n + 1)];
            if m.shape.len() == 4 {
                labels.push(FEATURE_LABEL.into());
            }
            sites.push(Tensor::new(&labels, &m.shape, data.to_vec())?);
        }
        let (biases, head) = match meta.mode {
            MpsMode::Standard => (vec![], None),
            MpsMode::Activated => {
                let biases = (0..meta.length)
                    .map(|n| self.array(&format!("bias{n}")).map(|(_, b)| b.to_vec()))
                    .collect::<Result<Vec<_>>>()?;
                let (m, data) = self.array("feature_head")?;
                let head = Tensor::new(&[HEAD_INPUT_LABEL, FEATURE_LABEL], &m.shape, data.to_vec())?;
                (biases, Some(head))
            }
        };
        let mps = MpsProjector::from_parts(sites, meta.center, meta.d_fused, meta.mode, biases, head)?;
        let (m, w) = self.array("stage_one_head")?;
        if m.shape.len() != 2 {
            return Err(Error::Format("stage-one head must be two-dimensional".into()));
        }
        let head = StageOneHead::from_weights(m.shape[0], m.shape[1], w.to_vec())?;
        Ok((mps, head))
    }

    /// Checksum the projector had when it was saved.
    pub fn recorded_mps_checksum(&self) -> Option<String> {
        let key = match self.header.kind {
            CheckpointKind::StageOne => "checksum",
            CheckpointKind::StageTwo => "mps_checksum",
        };
        self.header.meta.get(key)?.as_str().map(str::to_string)
    }

    pub fn stage_two(model: &VqcModel, mps_checksum: &str, seed: u64, config_hash: &str) -> Self {
        let meta = VqcMeta {
            circuit: model.spec().clone(),
            d_fused: model.d_fused(),
            mps_checksum: mps_checksum.to_string(),
        };
        let nq = model.spec().n_qubits;
        let d = model.d_fused();
        let named = vec![
            ("circuit_params".into(), vec![model.params.len()], model.params.clone()),
            ("proj_w".into(), vec![nq, d], model.proj_w.clone()),
            ("proj_b".into(), vec![nq], model.proj_b.clone()),
            ("readout_w".into(), vec![model.head.weights.len()], model.head.weights.clone()),
            ("readout_b".into(), vec![1], vec![model.head.bias]),
            ("feature_mean".into(), vec![d], model.feature_mean.clone()),
            ("feature_scale".into(), vec![d], model.feature_scale.clone()),
        ];
        Self::build(
            CheckpointKind::StageTwo,
            seed,
            config_hash,
            serde_json::to_value(meta).expect("meta serializes"),
            named,
        )
    }

    pub fn to_stage_two(&self) -> Result<VqcModel> {
        self.require(CheckpointKind::StageTwo)?;
        let meta: VqcMeta = serde_json::from_value(self.header.meta.clone())
            .map_err(|e| Error::Format(format!("checkpoint meta: {e}")))?;
        let get = |name: &str| self.array(name).map(|(_, a)| a.to_vec());
        VqcModel::from_parts(
            &meta.circuit,
            get("circuit_params")?,
            get("proj_w")?,
            get("proj_b")?,
            ReadoutHead {
                weights: get("readout_w")?,
                bias: get("readout_b")?[0],
            },
            get("feature_mean")?,
            get("feature_scale")?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mps::{init_mps, MpsInit};
    use crate::vqc::{EntanglerKind, Topology};

    fn projector(mode: MpsMode) -> MpsProjector {
        init_mps(&MpsInit {
            length: 6,
            chi_init: 3,
            d_fused: 2,
            center: 2,
            mode,
            seed: 1,
        })
        .unwrap()
    }

    #[test]
    fn stage_one_round_trip() {
        for mode in [MpsMode::Standard, MpsMode::Activated] {
            let mps = projector(mode);
            let head = StageOneHead::from_weights(2, 2, vec![0.5, -1.0, 2.0, 0.25]).unwrap();
            let ck = Checkpoint::stage_one(&mps, &head, 7, "abc");
            let bytes = ck.to_bytes();
            let back = Checkpoint::from_bytes(&bytes, Path::new("t")).unwrap();
            let (m, h) = back.to_stage_one().unwrap();
            assert_eq!(m, mps);
            assert_eq!(h, head);
            assert_eq!(back.header.seed, 7);
            assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn stage_two_round_trip() {
        let spec = AnsatzSpec::uniform(3, Topology::Brickwall, EntanglerKind::Heisenberg);
        let model = VqcModel::init(&spec, 2, vec![0.1, 0.2], vec![1.0, 2.0], 0.3, 4).unwrap();
        let ck = Checkpoint::stage_two(&model, "deadbeef", 4, "h");
        let back = Checkpoint::from_bytes(&ck.to_bytes(), Path::new("t")).unwrap();
        let m = back.to_stage_two().unwrap();
        assert_eq!(m.params_flat(), model.params_flat());
        assert_eq!(m.spec(), model.spec());
        assert_eq!(back.recorded_mps_checksum().as_deref(), Some("deadbeef"));
        assert!(matches!(back.to_stage_one(), Err(Error::Config(_))));
    }

    #[test]
    fn damaged_files() {
        let ck = Checkpoint::stage_one(&projector(MpsMode::Standard), &StageOneHead::zeros(2, 2), 0, "");
        let bytes = ck.to_bytes();
        let mut bad = bytes.clone();
        bad[1] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad, Path::new("t")), Err(Error::Format(_))));
        let short = &bytes[..bytes.len() - 4];
        assert!(matches!(Checkpoint::from_bytes(short, Path::new("t")), Err(Error::Io { .. })));
        let mut flipped = bytes.clone();
        let k = flipped.len() - 3;
        flipped[k] ^= 0x40;
        let parsed = Checkpoint::from_bytes(&flipped, Path::new("t")).unwrap();
        assert!(!parsed.payload_intact());
        assert!(matches!(parsed.to_stage_one(), Err(Error::Format(_))));
    }
}
