//! Binary checkpoint container and its text manifest.
//!
//! Layout (all integers and reals little-endian):
//!
//! ```text
//! magic "CNETCKPT" | version u32
//! fields u64 | k u64 | t u64 | blocks u64 | variant u8 | sharing u8 | ablations u8 | l2 f64
//! cardinalities: f × u64
//! tensor count u64, then per tensor: rows u64 | cols u64 | rows·cols × f64
//! ```
//!
//! Tensors follow [`Parameters::named_tensors`] order.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Ablations, ModelConfig, Parameters, Sharing, Variant};
use crate::numeric::Matrix;

pub const MAGIC: &[u8; 8] = b"CNETCKPT";
pub const VERSION: u32 = 1;
const MANIFEST_HEADER: &str = "contextnet-manifest\tv1";

/// Sidecar manifest path for a checkpoint: `checkpoint.bin` -> `checkpoint.manifest`.
pub fn manifest_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("manifest")
}

fn variant_code(v: Variant) -> u8 {
    match v {
        Variant::Pffn => 0,
        Variant::Sffn => 1,
    }
}

fn sharing_code(s: Sharing) -> u8 {
    match s {
        Sharing::ShareNothing => 0,
        Sharing::ShareA => 1,
        Sharing::ShareAP => 2,
    }
}

fn tensor_bytes(m: &Matrix) -> Vec<u8> {
    m.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn encode(config: &ModelConfig, params: &Parameters) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for n in [config.fields, config.embedding_size, config.aggregation_width, config.blocks] {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    out.push(variant_code(config.variant));
    out.push(sharing_code(config.sharing));
    out.push(config.ablations.bits());
    out.extend_from_slice(&config.l2.to_le_bytes());
    for c in params.cardinalities() {
        out.extend_from_slice(&(c as u64).to_le_bytes());
    }
    let tensors = params.tensors();
    out.extend_from_slice(&(tensors.len() as u64).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.value.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(t.value.cols() as u64).to_le_bytes());
        out.extend_from_slice(&tensor_bytes(t.value));
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::Checkpoint(format!("size {v} does not fit in memory")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<(ModelConfig, Parameters)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len()).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Checkpoint("bad magic: not a contextnet checkpoint".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version} (expected {VERSION})")));
    }
    let mut config = ModelConfig::new(r.usize()?);
    config.embedding_size = r.usize()?;
    config.aggregation_width = r.usize()?;
    config.blocks = r.usize()?;
    config.variant = match r.u8()? {
        0 => Variant::Pffn,
        1 => Variant::Sffn,
        c => return Err(Error::Checkpoint(format!("unknown variant code {c}"))),
    };
    config.sharing = match r.u8()? {
        0 => Sharing::ShareNothing,
        1 => Sharing::ShareA,
        2 => Sharing::ShareAP,
        c => return Err(Error::Checkpoint(format!("unknown sharing code {c}"))),
    };
    config.ablations = Ablations::from_bits(r.u8()?).map_err(|e| Error::Checkpoint(e.to_string()))?;
    config.l2 = r.f64()?;
    if config.fields > bytes.len() {
        return Err(Error::Checkpoint(format!("implausible field count {}", config.fields)));
    }
    let cards = (0..config.fields).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
    let mut params = Parameters::zeros(&config, &cards).map_err(|e| Error::Checkpoint(e.to_string()))?;

    let count = r.usize()?;
    let mut slots = params.tensors_mut();
    if count != slots.len() {
        return Err(Error::Checkpoint(format!(
            "{count} tensors stored, configuration needs {}",
            slots.len()
        )));
    }
    for (i, slot) in slots.iter_mut().enumerate() {
        let shape = (r.usize()?, r.usize()?);
        if shape != slot.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor {i}: stored shape {shape:?}, expected {:?}",
                slot.shape()
            )));
        }
        for v in slot.as_mut_slice() {
            *v = r.f64()?;
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok((config, params))
}

/// Manifest text. The `created` line is the only field that varies between
/// identical runs.
pub fn manifest(params: &Parameters, created_unix: u64) -> String {
    let mut out = format!("{MANIFEST_HEADER}\nformat_version\t{VERSION}\ncreated\t{created_unix}\n");
    out.push_str("name\trows\tcols\tsha256\n");
    for (name, t) in params.named_tensors() {
        let digest = Sha256::digest(tensor_bytes(t.value));
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        out.push_str(&format!("{name}\t{}\t{}\t{hex}\n", t.value.rows(), t.value.cols()));
    }
    out
}

/// Writes `path` and its manifest sidecar.
pub fn save(path: &Path, config: &ModelConfig, params: &Parameters) -> Result<()> {
    fs::write(path, encode(config, params)).map_err(|e| Error::io(path, e))?;
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mpath = manifest_path(path);
    fs::write(&mpath, manifest(params, now)).map_err(|e| Error::io(mpath, e))
}

pub fn load(path: &Path) -> Result<(ModelConfig, Parameters)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
        other => other,
    })
}
