use super::SteeringError;
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::Path;

const MAGIC: &[u8; 4] = b"STVC";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VectorMeta {
    /// Post-exclusion sample counts per condition.
    pub n_accented: u64,
    pub n_neutral: u64,
    pub augment: bool,
    pub checkpoint_digest: String,
    pub extraction_seed: u64,
    /// Unix seconds; 0 in timestamp-free mode.
    pub created_unix: u64,
}

/// One layer's extracted direction (neutral -> accented) plus provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteeringVector {
    pub layer: usize,
    pub values: Vec<f64>,
    pub meta: VectorMeta,
}

impl SteeringVector {
    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// All vectors extracted from one model, keyed by layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorSet {
    pub d_model: usize,
    pub vectors: Vec<SteeringVector>,
}

impl VectorSet {
    pub fn get(&self, layer: usize) -> Option<&SteeringVector> {
        self.vectors.iter().find(|v| v.layer == layer)
    }

    pub fn layers(&self) -> Vec<usize> {
        self.vectors.iter().map(|v| v.layer).collect()
    }

    /// Hard error on dimension mismatch; digest differences are returned as
    /// warnings so a caller can surface them without aborting.
    pub fn validate_against(
        &self,
        d_model: usize,
        checkpoint_digest: &str,
    ) -> Result<Vec<String>, SteeringError> {
        if self.d_model != d_model {
            return Err(SteeringError::DimensionMismatch {
                vector: self.d_model,
                model: d_model,
            });
        }
        let mut warnings = Vec::new();
        for v in &self.vectors {
            if v.meta.checkpoint_digest != checkpoint_digest {
                warnings.push(format!(
                    "layer {}: vector extracted from checkpoint {}.., model is {}..",
                    v.layer,
                    &v.meta.checkpoint_digest[..12.min(v.meta.checkpoint_digest.len())],
                    &checkpoint_digest[..12.min(checkpoint_digest.len())],
                ));
            }
        }
        Ok(warnings)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.d_model as u32).to_le_bytes());
        out.extend_from_slice(&(self.vectors.len() as u32).to_le_bytes());
        for v in &self.vectors {
            out.extend_from_slice(&(v.layer as u32).to_le_bytes());
            out.extend_from_slice(&v.meta.n_accented.to_le_bytes());
            out.extend_from_slice(&v.meta.n_neutral.to_le_bytes());
            out.push(u8::from(v.meta.augment));
            out.extend_from_slice(&v.meta.extraction_seed.to_le_bytes());
            out.extend_from_slice(&v.meta.created_unix.to_le_bytes());
            let digest = v.meta.checkpoint_digest.as_bytes();
            out.extend_from_slice(&(digest.len() as u32).to_le_bytes());
            out.extend_from_slice(digest);
            debug_assert_eq!(v.values.len(), self.d_model);
            for &x in &v.values {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SteeringError> {
        let mut cur = std::io::Cursor::new(bytes);
        let mut magic = [0u8; 4];
        read(&mut cur, &mut magic)?;
        if &magic != MAGIC {
            return Err(SteeringError::Corrupt("bad magic".into()));
        }
        let version = read_u32(&mut cur)?;
        if version != FORMAT_VERSION {
            return Err(SteeringError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let d_model = read_u32(&mut cur)? as usize;
        let count = read_u32(&mut cur)? as usize;
        let mut vectors = Vec::with_capacity(count);
        for _ in 0..count {
            let layer = read_u32(&mut cur)? as usize;
            let n_accented = read_u64(&mut cur)?;
            let n_neutral = read_u64(&mut cur)?;
            let mut flag = [0u8; 1];
            read(&mut cur, &mut flag)?;
            let extraction_seed = read_u64(&mut cur)?;
            let created_unix = read_u64(&mut cur)?;
            let digest_len = read_u32(&mut cur)? as usize;
            let mut digest = vec![0u8; digest_len];
            read(&mut cur, &mut digest)?;
            let checkpoint_digest = String::from_utf8(digest)
                .map_err(|_| SteeringError::Corrupt("digest not UTF-8".into()))?;
            let mut values = Vec::with_capacity(d_model);
            for _ in 0..d_model {
                let mut b = [0u8; 8];
                read(&mut cur, &mut b)?;
                values.push(f64::from_le_bytes(b));
            }
            vectors.push(SteeringVector {
                layer,
                values,
                meta: VectorMeta {
                    n_accented,
                    n_neutral,
                    augment: flag[0] != 0,
                    checkpoint_digest,
                    extraction_seed,
                    created_unix,
                },
            });
        }
        Ok(VectorSet { d_model, vectors })
    }

    /// Human-readable JSON mirror of the binary file, for inspection.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("vector set serializes")
    }
}

fn read<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), SteeringError> {
    r.read_exact(buf)
        .map_err(|_| SteeringError::Corrupt("unexpected end of file".into()))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, SteeringError> {
    let mut b = [0u8; 4];
    read(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, SteeringError> {
    let mut b = [0u8; 8];
    read(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn save_vectors(set: &VectorSet, path: &Path) -> Result<(), SteeringError> {
    std::fs::write(path, set.to_bytes())?;
    Ok(())
}

pub fn load_vectors(path: &Path) -> Result<VectorSet, SteeringError> {
    let bytes = std::fs::read(path)?;
    VectorSet::from_bytes(&bytes)
}
