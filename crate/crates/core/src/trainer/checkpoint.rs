//! Binary checkpoint format, version 1. All integers and floats little-endian.
//!
//! ```text
//! magic        8 bytes  "SYMBACKP"
//! version      u32      1
//! config_len   u32
//! config       config_len bytes of UTF-8 JSON (TrainConfig)
//! seed         u64
//! epoch        u64
//! shape        3 × u32  channels, height, width
//! num_classes  u32
//! model_kind   u8       1 = layer-local, 2 = backprop
//! layer_count  u32
//! layers       layer_count × layer record
//! [layer-local only]
//!   loss_kind  u8       1 = FF (then θ: f64), 2 = SymBa (then α: f64)
//!   param      f64
//!   labeling   u8       1 = overlay (then on_value: f64)
//!                       2 = ICP (then classes u32, height u32, width u32,
//!                            rate f64, seed u64, classes·height·width bytes of 0/1)
//! crc32        u32      IEEE CRC-32 of every preceding byte
//! ```
//!
//! Layer record: `out u32, in u32, norm_epsilon f64, weights (out·in f64),
//! bias (out f64)`, then for weights and bias in turn an Adam block
//! `t u64, lr f64, beta1 f64, beta2 f64, eps f64, m, v`.

use std::io::Write;
use std::path::Path;

use super::{FfNetwork, Mlp, Model, TrainConfig};
use crate::error::{Error, Result};
use crate::labeling::{IcpBank, ImageShape, Labeling};
use crate::layer::LayerState;
use crate::losses::LossConfig;
use crate::numerics::{AdamConfig, AdamState, Matrix};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SYMBACKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub model: Model,
    /// Master seed the run was started from.
    pub seed: u64,
    /// Completed epochs.
    pub epoch: u64,
}

impl Checkpoint {
    pub fn shape(&self) -> ImageShape {
        match &self.model {
            Model::LayerLocal(n) => n.shape,
            Model::Backprop(m) => m.shape,
        }
    }

    pub fn num_classes(&self) -> usize {
        match &self.model {
            Model::LayerLocal(n) => n.num_classes,
            Model::Backprop(m) => m.num_classes,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        let json = serde_json::to_vec(&self.config).expect("config serializes");
        w.u32(json.len() as u32);
        w.bytes(&json);
        w.u64(self.seed);
        w.u64(self.epoch);
        let shape = self.shape();
        for v in [shape.channels, shape.height, shape.width, self.num_classes()] {
            w.u32(v as u32);
        }
        let layers = match &self.model {
            Model::LayerLocal(n) => {
                w.u8(1);
                &n.layers
            }
            Model::Backprop(m) => {
                w.u8(2);
                &m.layers
            }
        };
        w.u32(layers.len() as u32);
        for l in layers {
            w.layer(l);
        }
        if let Model::LayerLocal(n) = &self.model {
            match n.loss {
                LossConfig::Ff { theta } => {
                    w.u8(1);
                    w.f64(theta);
                }
                LossConfig::Symba { alpha } => {
                    w.u8(2);
                    w.f64(alpha);
                }
            }
            match &n.labeling {
                Labeling::Overlay { on_value } => {
                    w.u8(1);
                    w.f64(*on_value);
                }
                Labeling::Icp(bank) => {
                    w.u8(2);
                    w.u32(bank.num_classes() as u32);
                    w.u32(bank.height() as u32);
                    w.u32(bank.width() as u32);
                    w.f64(bank.rate());
                    w.u64(bank.seed());
                    for c in 0..bank.num_classes() {
                        w.bytes(bank.pattern(c));
                    }
                }
            }
        }
        let crc = crc32fast::hash(&w.buf);
        w.u32(crc);
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < CHECKPOINT_MAGIC.len() + 8 {
            return Err(Error::format(0, "file too short to be a checkpoint"));
        }
        if &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(Error::format(0, "not a checkpoint (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::format(
                8,
                format!("unsupported checkpoint version {version} (this build reads {CHECKPOINT_VERSION})"),
            ));
        }
        let body_len = bytes.len() - 4;
        let stored = u32::from_le_bytes(bytes[body_len..].try_into().unwrap());
        if crc32fast::hash(&bytes[..body_len]) != stored {
            return Err(Error::format(body_len, "checksum mismatch; file is corrupted"));
        }

        let mut r = ByteReader {
            buf: &bytes[..body_len],
            pos: 12,
        };
        let json_len = r.u32()? as usize;
        let config: TrainConfig = serde_json::from_slice(r.take(json_len)?)
            .map_err(|e| Error::format(16, format!("embedded config: {e}")))?;
        let seed = r.u64()?;
        let epoch = r.u64()?;
        let shape = ImageShape::new(r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        let num_classes = r.u32()? as usize;
        let kind = r.u8()?;
        let count = r.u32()? as usize;
        let layers = (0..count).map(|_| r.layer()).collect::<Result<Vec<_>>>()?;
        let model = match kind {
            1 => {
                let loss = match r.u8()? {
                    1 => LossConfig::Ff { theta: r.f64()? },
                    2 => LossConfig::Symba { alpha: r.f64()? },
                    t => return Err(Error::format(r.pos - 1, format!("unknown loss tag {t}"))),
                };
                let labeling = match r.u8()? {
                    1 => Labeling::Overlay { on_value: r.f64()? },
                    2 => {
                        let classes = r.u32()? as usize;
                        let h = r.u32()? as usize;
                        let w = r.u32()? as usize;
                        let rate = r.f64()?;
                        let bank_seed = r.u64()?;
                        let patterns = (0..classes)
                            .map(|_| r.take(h * w).map(<[u8]>::to_vec))
                            .collect::<Result<Vec<_>>>()?;
                        Labeling::Icp(IcpBank::from_parts(patterns, h, w, rate, bank_seed)?)
                    }
                    t => return Err(Error::format(r.pos - 1, format!("unknown labeling tag {t}"))),
                };
                Model::LayerLocal(FfNetwork {
                    layers,
                    labeling,
                    shape,
                    num_classes,
                    loss,
                })
            }
            2 => Model::Backprop(Mlp {
                layers,
                shape,
                num_classes,
            }),
            t => return Err(Error::format(r.pos - 1, format!("unknown model kind {t}"))),
        };
        if r.pos != body_len {
            return Err(Error::format(r.pos, "trailing bytes before checksum"));
        }
        Ok(Checkpoint {
            config,
            model,
            seed,
            epoch,
        })
    }
}

/// Writes to a temporary sibling and renames it into place.
pub fn checkpoint_save(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&checkpoint.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn checkpoint_load(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }
    fn floats(&mut self, m: &Matrix) {
        for &v in m.data() {
            self.f64(v);
        }
    }
    fn adam(&mut self, a: &AdamState) {
        self.u64(a.t);
        for v in [a.config.lr, a.config.beta1, a.config.beta2, a.config.eps] {
            self.f64(v);
        }
        self.floats(&a.m);
        self.floats(&a.v);
    }
    fn layer(&mut self, l: &LayerState) {
        self.u32(l.outputs() as u32);
        self.u32(l.inputs() as u32);
        self.f64(l.norm_epsilon);
        self.floats(&l.weights);
        self.floats(&l.bias);
        self.adam(&l.adam_w);
        self.adam(&l.adam_b);
    }
}

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        match self.pos.checked_add(n) {
            Some(end) if end <= self.buf.len() => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            _ => Err(Error::format(self.pos, format!("truncated: need {n} more bytes"))),
        }
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
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
    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::format(self.pos, "matrix size overflows"))?;
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::format(self.pos, "matrix size overflows"))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Matrix::from_vec(rows, cols, data)
    }
    fn adam(&mut self, rows: usize, cols: usize) -> Result<AdamState> {
        let t = self.u64()?;
        let config = AdamConfig {
            lr: self.f64()?,
            beta1: self.f64()?,
            beta2: self.f64()?,
            eps: self.f64()?,
        };
        Ok(AdamState {
            m: self.matrix(rows, cols)?,
            v: self.matrix(rows, cols)?,
            t,
            config,
        })
    }
    fn layer(&mut self) -> Result<LayerState> {
        let out = self.u32()? as usize;
        let inp = self.u32()? as usize;
        let norm_epsilon = self.f64()?;
        let weights = self.matrix(out, inp)?;
        let bias = self.matrix(1, out)?;
        let adam_w = self.adam(out, inp)?;
        let adam_b = self.adam(1, out)?;
        Ok(LayerState {
            weights,
            bias,
            adam_w,
            adam_b,
            norm_epsilon,
        })
    }
}
