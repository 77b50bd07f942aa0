//! Binary checkpoint layout, all little-endian:
//!
//! ```text
//! magic "GDPM" | version u32 | state_dim u32 | embed u32 | hidden u32 | layers u32
//! stage u8 | normalizer lo.x lo.y hi.x hi.y f64 | k u32 | anchors k x 2 f64
//! encoder, decoder, predictor: per layer, weights (in x out, row-major) then bias, f64
//! subgoal table k x embed f64
//! ```

use super::{Mlp, ModelConfig, Normalizer, PredictorError, PredictorModel, Stage};
use crate::geometry::Vec2;
use ndarray::{Array1, Array2};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"GDPM";
pub const VERSION: u32 = 1;

pub fn encode_model(m: &PredictorModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let c = m.config;
    for v in [VERSION, c.state_dim as u32, c.embed_dim as u32, c.hidden as u32, c.layers as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(match m.stage {
        Stage::Initialized => 0,
        Stage::Pretrained => 1,
        Stage::Trained => 2,
    });
    let n = m.normalizer;
    for v in [n.lo.x, n.lo.y, n.hi.x, n.hi.y] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(m.anchors.len() as u32).to_le_bytes());
    for a in &m.anchors {
        out.extend_from_slice(&a.x.to_le_bytes());
        out.extend_from_slice(&a.y.to_le_bytes());
    }
    for net in [&m.encoder, &m.decoder, &m.predictor] {
        for (w, b) in net.weights.iter().zip(&net.biases) {
            w.iter().chain(b.iter()).for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        }
    }
    m.table.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], PredictorError> {
        let end = self.pos + n;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| PredictorError::BadCheckpoint(format!("truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, PredictorError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64, PredictorError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn mlp(&mut self, sizes: &[usize]) -> Result<Mlp, PredictorError> {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let vals = (0..w[0] * w[1]).map(|_| self.f64()).collect::<Result<Vec<_>, _>>()?;
            weights.push(Array2::from_shape_vec((w[0], w[1]), vals).expect("shape matches length"));
            let b = (0..w[1]).map(|_| self.f64()).collect::<Result<Vec<_>, _>>()?;
            biases.push(Array1::from(b));
        }
        Ok(Mlp { weights, biases })
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<PredictorModel, PredictorError> {
    let bad = |s: &str| PredictorError::BadCheckpoint(s.to_string());
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(bad("wrong magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(PredictorError::BadCheckpoint(format!("unsupported version {version}")));
    }
    let config = ModelConfig {
        state_dim: r.u32()? as usize,
        embed_dim: r.u32()? as usize,
        hidden: r.u32()? as usize,
        layers: r.u32()? as usize,
    };
    if config.state_dim != 2 || config.embed_dim == 0 || config.hidden == 0 || config.layers == 0 {
        return Err(bad("invalid dimensions"));
    }
    let stage = match r.take(1)?[0] {
        0 => Stage::Initialized,
        1 => Stage::Pretrained,
        2 => Stage::Trained,
        _ => return Err(bad("invalid stage")),
    };
    let normalizer = Normalizer { lo: Vec2::new(r.f64()?, r.f64()?), hi: Vec2::new(r.f64()?, r.f64()?) };
    let k = r.u32()? as usize;
    let anchors = (0..k).map(|_| Ok(Vec2::new(r.f64()?, r.f64()?))).collect::<Result<Vec<_>, PredictorError>>()?;
    let sizes = |input: usize, output: usize| {
        let mut s = vec![input];
        s.extend(std::iter::repeat_n(config.hidden, config.layers));
        s.push(output);
        s
    };
    let encoder = r.mlp(&sizes(config.state_dim, config.embed_dim))?;
    let decoder = r.mlp(&sizes(config.embed_dim, config.state_dim))?;
    let predictor = r.mlp(&sizes(config.state_dim, config.embed_dim))?;
    let table_vals = (0..k * config.embed_dim).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    let table = Array2::from_shape_vec((k, config.embed_dim), table_vals).expect("shape matches length");
    if r.pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(PredictorModel { config, normalizer, encoder, decoder, predictor, anchors, table, stage })
}

pub fn save_model(path: impl AsRef<Path>, m: &PredictorModel) -> Result<(), PredictorError> {
    std::fs::write(path, encode_model(m))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PredictorModel, PredictorError> {
    decode_model(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::init_model;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut m = init_model(ModelConfig { hidden: 8, embed_dim: 4, ..ModelConfig::default() }, 2).unwrap();
        m.set_subgoals(&[Vec2::new(0.25, 0.5), Vec2::new(-0.75, 0.1)]);
        m.stage = Stage::Pretrained;
        let bytes = encode_model(&m);
        let back = decode_model(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(encode_model(&back), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let m = init_model(ModelConfig { hidden: 4, embed_dim: 3, ..ModelConfig::default() }, 1).unwrap();
        let bytes = encode_model(&m);
        assert!(decode_model(&bytes[..bytes.len() - 3]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(decode_model(&wrong).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(decode_model(&extra).is_err());
    }
}
