//! Model checkpoint layout (little-endian):
//!
//! ```text
//! b"MLP1" | input_dim: u32 | n_outputs: u32 | task: u32 (0 binary, 1 multiclass)
//!         | n_hidden: u32 | hidden sizes: [u32; n_hidden]
//!         | input_dropout_rate: f64
//!         | per layer: weights (fan_in x fan_out, row-major) then bias, as f64
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{LayerParams, Mlp, MlpConfig, TaskKind};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MLP1";

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(chunk.try_into().unwrap())
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take()?) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

fn put_u32(buf: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{v} does not fit in u32")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

impl Mlp {
    pub fn to_checkpoint_bytes(&self) -> Result<Vec<u8>> {
        let cfg = &self.config;
        let mut buf = Vec::with_capacity(32 + 8 * self.n_params());
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut buf, cfg.input_dim)?;
        put_u32(&mut buf, cfg.n_outputs)?;
        put_u32(
            &mut buf,
            matches!(cfg.task_kind, TaskKind::Multiclass) as usize,
        )?;
        put_u32(&mut buf, cfg.hidden_sizes.len())?;
        for &h in &cfg.hidden_sizes {
            put_u32(&mut buf, h)?;
        }
        buf.extend_from_slice(&cfg.input_dropout_rate.to_le_bytes());
        for layer in &self.layers {
            for v in layer.weights.iter().chain(layer.bias.iter()) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(buf)
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("missing MLP1 magic".into()));
        }
        let mut cur = Cursor { bytes, pos: 4 };
        let input_dim = cur.u32()?;
        let n_outputs = cur.u32()?;
        let task_kind = match cur.u32()? {
            0 => TaskKind::Binary,
            1 => TaskKind::Multiclass,
            other => return Err(Error::Checkpoint(format!("unknown task tag {other}"))),
        };
        let n_hidden = cur.u32()?;
        if n_hidden > 1024 {
            return Err(Error::Checkpoint(format!(
                "implausible hidden layer count {n_hidden}"
            )));
        }
        let hidden_sizes = (0..n_hidden)
            .map(|_| cur.u32())
            .collect::<Result<Vec<_>>>()?;
        let input_dropout_rate = cur.f64()?;
        let config = MlpConfig {
            input_dim,
            hidden_sizes,
            n_outputs,
            input_dropout_rate,
            task_kind,
        };
        config
            .validate()
            .map_err(|e| Error::Checkpoint(format!("invalid config: {e}")))?;

        let sizes = config.layer_sizes();
        let expected = cur.pos + 8 * sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum::<usize>();
        if bytes.len() != expected {
            return Err(Error::Checkpoint(format!(
                "expected {expected} bytes, found {}",
                bytes.len()
            )));
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for w in sizes.windows(2) {
            let weights = (0..w[0] * w[1])
                .map(|_| cur.f64())
                .collect::<Result<Vec<_>>>()?;
            let bias = (0..w[1]).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
            layers.push(LayerParams {
                weights: Array2::from_shape_vec((w[0], w[1]), weights).expect("sized above"),
                bias: Array1::from(bias),
            });
        }
        Mlp::from_parts(config, layers).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_checkpoint_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let m = Mlp::init(MlpConfig::severity(7, 5), 3).unwrap();
        let bytes = m.to_checkpoint_bytes().unwrap();
        assert_eq!(&bytes[..4], b"MLP1");
        assert_eq!(Mlp::from_checkpoint_bytes(&bytes).unwrap(), m);
    }

    #[test]
    fn layout_header() {
        let m = Mlp::init(MlpConfig::identify(3), 0).unwrap();
        let bytes = m.to_checkpoint_bytes().unwrap();
        let words: Vec<u32> = bytes[4..28]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(words, vec![3, 1, 0, 2, 256, 128]);
        assert_eq!(f64::from_le_bytes(bytes[28..36].try_into().unwrap()), 0.2);
        assert_eq!(bytes.len(), 36 + 8 * m.n_params());
    }

    #[test]
    fn rejects_damage() {
        let m = Mlp::init(MlpConfig::identify(3), 0).unwrap();
        let mut bytes = m.to_checkpoint_bytes().unwrap();
        assert!(Mlp::from_checkpoint_bytes(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(matches!(
            Mlp::from_checkpoint_bytes(&bytes),
            Err(Error::Checkpoint(_))
        ));
    }
}
