//! MNIST IDX and CIFAR binary parsers, loaders and augmentation.
//!
//! Pixels are scaled to `[0, 1]` by dividing by 255 and nothing else.
//! Images are stored channel-major (`C × H × W`) per row, which is the
//! native CIFAR layout.
//!
//! Expected layout under the data root:
//!
//! ```text
//! <root>/mnist/{train,t10k}-{images-idx3,labels-idx1}-ubyte
//! <root>/cifar-10-batches-bin/{data_batch_1..5,test_batch}.bin
//! <root>/cifar-100-binary/{train,test}.bin
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::ImageShape;
use crate::numerics::{Matrix, Rng};

pub const DATA_ROOT_ENV: &str = "SYMBA_DATA_ROOT";

const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const CIFAR_PIXELS: usize = 3 * 32 * 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Mnist,
    Cifar10,
    Cifar100,
}

impl DatasetKind {
    pub fn shape(self) -> ImageShape {
        match self {
            DatasetKind::Mnist => ImageShape::new(1, 28, 28),
            DatasetKind::Cifar10 | DatasetKind::Cifar100 => ImageShape::new(3, 32, 32),
        }
    }

    pub fn num_classes(self) -> usize {
        match self {
            DatasetKind::Mnist | DatasetKind::Cifar10 => 10,
            DatasetKind::Cifar100 => 100,
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::Mnist => "mnist",
            DatasetKind::Cifar10 => "cifar10",
            DatasetKind::Cifar100 => "cifar100",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub name: String,
    pub shape: ImageShape,
    pub num_classes: usize,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `N × C·H·W`, values in `[0, 1]`.
    pub images: Matrix,
    pub labels: Vec<usize>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(images: Matrix, labels: Vec<usize>, meta: DatasetMeta) -> Result<Self> {
        if images.rows() != labels.len() {
            return Err(Error::dim(
                "Dataset::new",
                format!("{} images vs {} labels", images.rows(), labels.len()),
            ));
        }
        if images.cols() != meta.shape.len() {
            return Err(Error::dim(
                "Dataset::new",
                format!("rows have {} entries, shape needs {}", images.cols(), meta.shape.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= meta.num_classes) {
            return Err(Error::param(format!(
                "label {bad} out of range for {} classes",
                meta.num_classes
            )));
        }
        if images.data().iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::param("pixel values must lie in [0, 1]"));
        }
        Ok(Self {
            images,
            labels,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The first `n` samples (or all of them).
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        let idx: Vec<usize> = (0..n).collect();
        self.select(&idx)
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            images: self.images.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            meta: self.meta.clone(),
        }
    }
}

/// Contents of one IDX file.
#[derive(Debug, Clone, PartialEq)]
pub enum IdxData {
    Images {
        rows: usize,
        cols: usize,
        /// `N × rows·cols`, scaled to `[0, 1]`.
        pixels: Matrix,
    },
    Labels(Vec<u8>),
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::format(
                self.bytes.len(),
                format!(
                    "truncated while reading {what}: need {n} bytes at offset {}, {} available",
                    self.pos,
                    self.bytes.len() - self.pos
                ),
            )),
        }
    }

    fn u32_be(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxData> {
    if bytes.is_empty() {
        return Err(Error::format(0, "empty IDX input"));
    }
    let mut r = Reader::new(bytes);
    let magic = r.u32_be("magic number")?;
    match magic {
        IDX_LABELS_MAGIC => {
            let n = r.u32_be("item count")? as usize;
            let labels = r.take(n, "labels")?.to_vec();
            trailing(&r)?;
            Ok(IdxData::Labels(labels))
        }
        IDX_IMAGES_MAGIC => {
            let n = r.u32_be("item count")? as usize;
            let rows = r.u32_be("row count")? as usize;
            let cols = r.u32_be("column count")? as usize;
            let len = n
                .checked_mul(rows)
                .and_then(|x| x.checked_mul(cols))
                .ok_or_else(|| Error::format(4, "image dimensions overflow"))?;
            let raw = r.take(len, "pixels")?;
            trailing(&r)?;
            let data = raw.iter().map(|&b| f64::from(b) / 255.0).collect();
            Ok(IdxData::Images {
                rows,
                cols,
                pixels: Matrix::from_vec(n, rows * cols, data)?,
            })
        }
        other => Err(Error::format(
            0,
            format!("unknown IDX magic 0x{other:08x} (expected 0x00000801 or 0x00000803)"),
        )),
    }
}

fn trailing(r: &Reader<'_>) -> Result<()> {
    if r.pos != r.bytes.len() {
        return Err(Error::format(
            r.pos,
            format!("{} unexpected trailing bytes", r.bytes.len() - r.pos),
        ));
    }
    Ok(())
}

fn to_byte(x: f64) -> u8 {
    (x * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn encode_idx_images(pixels: &Matrix, rows: usize, cols: usize) -> Result<Vec<u8>> {
    if pixels.cols() != rows * cols {
        return Err(Error::dim("encode_idx_images", "row length != rows * cols"));
    }
    let mut out = Vec::with_capacity(16 + pixels.data().len());
    out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    for v in [pixels.rows(), rows, cols] {
        out.extend_from_slice(&(v as u32).to_be_bytes());
    }
    out.extend(pixels.data().iter().map(|&x| to_byte(x)));
    Ok(out)
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CifarVariant {
    Cifar10,
    Cifar100,
}

impl CifarVariant {
    fn label_bytes(self) -> usize {
        match self {
            CifarVariant::Cifar10 => 1,
            CifarVariant::Cifar100 => 2,
        }
    }

    pub fn record_size(self) -> usize {
        self.label_bytes() + CIFAR_PIXELS
    }

    fn kind(self) -> DatasetKind {
        match self {
            CifarVariant::Cifar10 => DatasetKind::Cifar10,
            CifarVariant::Cifar100 => DatasetKind::Cifar100,
        }
    }
}

pub fn parse_cifar(bytes: &[u8], variant: CifarVariant, split: Split) -> Result<Dataset> {
    let rec = variant.record_size();
    if !bytes.len().is_multiple_of(rec) {
        return Err(Error::format(
            bytes.len() - bytes.len() % rec,
            format!(
                "{} bytes is not a whole number of {rec}-byte records",
                bytes.len()
            ),
        ));
    }
    let kind = variant.kind();
    let n = bytes.len() / rec;
    let mut data = Vec::with_capacity(n * CIFAR_PIXELS);
    let mut labels = Vec::with_capacity(n);
    for (i, chunk) in bytes.chunks_exact(rec).enumerate() {
        // CIFAR-100 records are <coarse><fine><pixels>; only the fine label is kept.
        let label = chunk[variant.label_bytes() - 1] as usize;
        if label >= kind.num_classes() {
            return Err(Error::format(
                i * rec + variant.label_bytes() - 1,
                format!("label {label} out of range"),
            ));
        }
        labels.push(label);
        data.extend(chunk[variant.label_bytes()..].iter().map(|&b| f64::from(b) / 255.0));
    }
    Dataset::new(
        Matrix::from_vec(n, CIFAR_PIXELS, data)?,
        labels,
        DatasetMeta {
            name: kind.to_string(),
            shape: kind.shape(),
            num_classes: kind.num_classes(),
            split,
        },
    )
}

/// Serializes a CIFAR dataset; `coarse` supplies CIFAR-100 coarse labels
/// (zeros when absent).
pub fn encode_cifar(ds: &Dataset, variant: CifarVariant, coarse: Option<&[u8]>) -> Result<Vec<u8>> {
    if ds.images.cols() != CIFAR_PIXELS {
        return Err(Error::dim("encode_cifar", "images are not 3x32x32"));
    }
    let mut out = Vec::with_capacity(ds.len() * variant.record_size());
    for (i, &label) in ds.labels.iter().enumerate() {
        if variant == CifarVariant::Cifar100 {
            out.push(coarse.map_or(0, |c| c[i]));
        }
        out.push(label as u8);
        out.extend(ds.images.row(i).iter().map(|&x| to_byte(x)));
    }
    Ok(out)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Resolves the data root: explicit argument, then `SYMBA_DATA_ROOT`.
pub fn resolve_data_root(explicit: Option<&Path>) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from))
}

pub fn load_mnist(root: &Path, split: Split) -> Result<Dataset> {
    let dir = root.join("mnist");
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let images = parse_idx(&read_file(&dir.join(format!("{prefix}-images-idx3-ubyte")))?)?;
    let labels = parse_idx(&read_file(&dir.join(format!("{prefix}-labels-idx1-ubyte")))?)?;
    let (pixels, rows, cols) = match images {
        IdxData::Images { pixels, rows, cols } => (pixels, rows, cols),
        IdxData::Labels(_) => return Err(Error::format(0, "expected an image file, found labels")),
    };
    let labels = match labels {
        IdxData::Labels(l) => l,
        IdxData::Images { .. } => return Err(Error::format(0, "expected a label file, found images")),
    };
    if (rows, cols) != (28, 28) {
        return Err(Error::format(8, format!("MNIST images must be 28x28, got {rows}x{cols}")));
    }
    Dataset::new(
        pixels,
        labels.into_iter().map(usize::from).collect(),
        DatasetMeta {
            name: "mnist".into(),
            shape: DatasetKind::Mnist.shape(),
            num_classes: 10,
            split,
        },
    )
}

pub fn load_cifar10(root: &Path, split: Split) -> Result<Dataset> {
    let dir = root.join("cifar-10-batches-bin");
    let files: Vec<PathBuf> = match split {
        Split::Train => (1..=5).map(|i| dir.join(format!("data_batch_{i}.bin"))).collect(),
        Split::Test => vec![dir.join("test_batch.bin")],
    };
    let mut bytes = Vec::new();
    for f in &files {
        bytes.extend(read_file(f)?);
    }
    parse_cifar(&bytes, CifarVariant::Cifar10, split)
}

pub fn load_cifar100(root: &Path, split: Split) -> Result<Dataset> {
    let file = match split {
        Split::Train => "train.bin",
        Split::Test => "test.bin",
    };
    parse_cifar(
        &read_file(&root.join("cifar-100-binary").join(file))?,
        CifarVariant::Cifar100,
        split,
    )
}

pub fn load(root: &Path, kind: DatasetKind, split: Split) -> Result<Dataset> {
    match kind {
        DatasetKind::Mnist => load_mnist(root, split),
        DatasetKind::Cifar10 => load_cifar10(root, split),
        DatasetKind::Cifar100 => load_cifar100(root, split),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    /// Zero padding added on every side before the random crop.
    pub crop_pad: i32,
    pub hflip: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            crop_pad: 4,
            hflip: true,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.crop_pad < 0 {
            return Err(Error::param(format!("crop_pad must be >= 0, got {}", self.crop_pad)));
        }
        Ok(())
    }
}

/// Zero-pads by `pad`, crops back to `H × W` at `(dy, dx)` in padded
/// coordinates, and optionally mirrors horizontally.
pub fn crop_flip(src: &[f64], shape: ImageShape, pad: usize, dy: usize, dx: usize, flip: bool) -> Vec<f64> {
    let (h, w) = (shape.height as isize, shape.width as isize);
    let mut out = vec![0.0; shape.len()];
    for c in 0..shape.channels {
        let plane = &src[c * shape.plane()..(c + 1) * shape.plane()];
        let dst = &mut out[c * shape.plane()..(c + 1) * shape.plane()];
        for y in 0..h {
            let sy = y + dy as isize - pad as isize;
            if sy < 0 || sy >= h {
                continue;
            }
            for x in 0..w {
                let ox = if flip { w - 1 - x } else { x };
                let sx = ox + dx as isize - pad as isize;
                if sx < 0 || sx >= w {
                    continue;
                }
                dst[(y * w + x) as usize] = plane[(sy * w + sx) as usize];
            }
        }
    }
    out
}

/// Independent random crop (and flip) per row.
pub fn augment(images: &Matrix, shape: ImageShape, config: &AugmentConfig, rng: &mut Rng) -> Result<Matrix> {
    config.validate()?;
    if images.cols() != shape.len() {
        return Err(Error::dim("augment", "row length does not match image shape"));
    }
    let pad = config.crop_pad as usize;
    let mut out = Matrix::zeros(images.rows(), images.cols());
    for r in 0..images.rows() {
        let dy = rng.below(2 * pad + 1);
        let dx = rng.below(2 * pad + 1);
        let flip = config.hflip && rng.coin();
        out.row_mut(r)
            .copy_from_slice(&crop_flip(images.row(r), shape, pad, dy, dx, flip));
    }
    Ok(out)
}
