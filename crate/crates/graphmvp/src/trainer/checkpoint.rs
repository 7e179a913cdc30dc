//! Versioned binary checkpoints with bit-exact resume.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic "GMVP" | version u32
//! config JSON            (u64 length + bytes)
//! params                 (count, then name / shape / f64 data per entry)
//! adam                   (lr b1 b2 eps f64, t u64, then m+v per entry)
//! rng                    (seed u64, state 4 x u64)
//! step u64
//! crc32 u32 over everything above
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::adam::AdamState;
use super::TrainConfig;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"GMVP";

/// Everything needed to continue a pre-training run exactly where it
/// stopped.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub config: TrainConfig,
    pub params: ParamStore,
    pub adam: AdamState,
    /// The derived stream the next training step would consume.
    pub rng: Rng,
    /// Completed steps.
    pub step: u64,
}

// CRC-32 (IEEE 802.3, reflected, polynomial 0xEDB88320).
const fn crc32_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut c = i as u32;
        let mut k = 0;
        while k < 8 {
            c = if c & 1 != 0 {
                0xEDB8_8320 ^ (c >> 1)
            } else {
                c >> 1
            };
            k += 1;
        }
        table[i] = c;
        i += 1;
    }
    table
}

const CRC_TABLE: [u32; 256] = crc32_table();

pub fn crc32(bytes: &[u8]) -> u32 {
    let mut c = 0xFFFF_FFFFu32;
    for &b in bytes {
        c = CRC_TABLE[((c ^ b as u32) & 0xFF) as usize] ^ (c >> 8);
    }
    c ^ 0xFFFF_FFFF
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn bytes(&mut self, v: &[u8]) {
        self.u64(v.len() as u64);
        self.buf.extend_from_slice(v);
    }

    fn tensor(&mut self, t: &Tensor) {
        self.u64(t.shape().len() as u64);
        for &d in t.shape() {
            self.u64(d as u64);
        }
        for &v in t.data() {
            self.f64(v);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn bytes(&mut self) -> Result<&'a [u8]> {
        let len = self.u64()? as usize;
        self.take(len)
    }

    fn tensor(&mut self) -> Result<Tensor> {
        let rank = self.u64()? as usize;
        if rank > 8 {
            return Err(Error::Checkpoint(format!("implausible tensor rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.u64()? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            data.push(self.f64()?);
        }
        Tensor::new(shape, data)
    }
}

pub fn save(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut w = Writer::new();
    w.buf.extend_from_slice(MAGIC);
    w.u32(ckpt.version);
    w.bytes(serde_json::to_string(&ckpt.config)?.as_bytes());

    w.u64(ckpt.params.len() as u64);
    for (name, tensor) in ckpt.params.iter() {
        w.bytes(name.as_bytes());
        w.tensor(tensor);
    }

    w.f64(ckpt.adam.lr);
    w.f64(ckpt.adam.beta1);
    w.f64(ckpt.adam.beta2);
    w.f64(ckpt.adam.eps);
    w.u64(ckpt.adam.t);
    let moments = ckpt.adam.moments();
    w.u64(moments.len() as u64);
    for (name, (m, v)) in moments {
        w.bytes(name.as_bytes());
        w.tensor(m);
        w.tensor(v);
    }

    w.u64(ckpt.rng.seed());
    for word in ckpt.rng.state() {
        w.u64(word);
    }
    w.u64(ckpt.step);

    let crc = crc32(&w.buf);
    w.u32(crc);
    std::fs::write(path, &w.buf)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let buf = std::fs::read(path)?;
    if buf.len() < 8 {
        return Err(Error::Checkpoint("truncated file".into()));
    }
    let (body, trailer) = buf.split_at(buf.len() - 4);
    let stored_crc = u32::from_le_bytes(trailer.try_into().unwrap());
    let actual_crc = crc32(body);
    if stored_crc != actual_crc {
        return Err(Error::Checkpoint(format!(
            "checksum mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}"
        )));
    }

    let mut r = Reader { buf: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "version mismatch: file {version}, supported {CHECKPOINT_VERSION}"
        )));
    }
    let config: TrainConfig = serde_json::from_slice(r.bytes()?)?;

    let n_params = r.u64()? as usize;
    let mut params = ParamStore::new();
    for _ in 0..n_params {
        let name = String::from_utf8(r.bytes()?.to_vec())
            .map_err(|_| Error::Checkpoint("non-utf8 parameter name".into()))?;
        params.insert(&name, r.tensor()?)?;
    }

    let lr = r.f64()?;
    let beta1 = r.f64()?;
    let beta2 = r.f64()?;
    let eps = r.f64()?;
    let t = r.u64()?;
    let n_moments = r.u64()? as usize;
    let mut moments = BTreeMap::new();
    for _ in 0..n_moments {
        let name = String::from_utf8(r.bytes()?.to_vec())
            .map_err(|_| Error::Checkpoint("non-utf8 moment name".into()))?;
        let m = r.tensor()?;
        let v = r.tensor()?;
        moments.insert(name, (m, v));
    }
    let adam = AdamState::from_parts(lr, beta1, beta2, eps, t, moments);

    let seed = r.u64()?;
    let state = [r.u64()?, r.u64()?, r.u64()?, r.u64()?];
    let rng = Rng::restore(seed, state);
    let step = r.u64()?;
    if r.pos != body.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after checkpoint payload",
            body.len() - r.pos
        )));
    }

    Ok(Checkpoint {
        version,
        config,
        params,
        adam,
        rng,
        step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_checkpoint() -> Checkpoint {
        let mut rng = Rng::from_seed(3);
        let mut params = ParamStore::new();
        params
            .insert("a.w", Tensor::uniform(&[3, 2], 1.0, &mut rng))
            .unwrap();
        params
            .insert("a.b", Tensor::uniform(&[2], 1.0, &mut rng))
            .unwrap();
        let mut adam = AdamState::new(0.001, &params);
        adam.t = 17;
        let mut stream = Rng::from_seed(9);
        stream.next_u64();
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: TrainConfig::default(),
            params,
            adam,
            rng: stream,
            step: 42,
        }
    }

    #[test]
    fn crc_known_vector() {
        // CRC-32("123456789") is the standard check value.
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let ckpt = sample_checkpoint();
        let path = std::env::temp_dir().join("graphmvp-ckpt-test.gmvp");
        save(&path, &ckpt).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(ckpt, back);
    }

    #[test]
    fn corrupted_byte_fails_checksum() {
        let ckpt = sample_checkpoint();
        let path = std::env::temp_dir().join("graphmvp-ckpt-corrupt.gmvp");
        save(&path, &ckpt).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        std::fs::write(&path, &bytes).unwrap();
        match load(&path) {
            Err(Error::Checkpoint(msg)) => assert!(msg.contains("checksum"), "{msg}"),
            other => panic!("expected checksum error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_file_rejected() {
        let ckpt = sample_checkpoint();
        let path = std::env::temp_dir().join("graphmvp-ckpt-trunc.gmvp");
        save(&path, &ckpt).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(load(&path).is_err());
    }

    #[test]
    fn wrong_version_rejected() {
        let mut ckpt = sample_checkpoint();
        ckpt.version = 999;
        let path = std::env::temp_dir().join("graphmvp-ckpt-version.gmvp");
        save(&path, &ckpt).unwrap();
        match load(&path) {
            Err(Error::Checkpoint(msg)) => assert!(msg.contains("version"), "{msg}"),
            other => panic!("expected version error, got {other:?}"),
        }
    }
}
