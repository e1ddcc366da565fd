//! Class-label injection and positive/negative sample construction.
//!
//! Two schemes:
//!
//! - **Overlay**: the first `num_classes` entries of channel 0 are replaced
//!   by a one-hot code scaled to `on_value`. Those pixels are lost.
//! - **Intrinsic class patterns (ICP)**: every class owns a fixed random
//!   binary `H × W` pattern with exactly `round(rate · H · W)` ones. The
//!   pattern is appended as one extra channel, leaving the image untouched.

use log::warn;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

pub const DEFAULT_ICP_RATE: f64 = 0.1;
pub const DEFAULT_OVERLAY_VALUE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ImageShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl ImageShape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub const fn plane(&self) -> usize {
        self.height * self.width
    }

    pub const fn len(&self) -> usize {
        self.channels * self.plane()
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn overlay_encode(
    image: &[f64],
    class: usize,
    num_classes: usize,
    on_value: f64,
) -> Result<Vec<f64>> {
    if class >= num_classes {
        return Err(Error::param(format!(
            "class {class} out of range for {num_classes} classes"
        )));
    }
    if num_classes > image.len() {
        return Err(Error::param(format!(
            "{num_classes} classes do not fit in a {}-entry input",
            image.len()
        )));
    }
    let mut out = image.to_vec();
    overlay_in_place(&mut out, class, num_classes, on_value);
    Ok(out)
}

fn overlay_in_place(row: &mut [f64], class: usize, num_classes: usize, on_value: f64) {
    for (i, x) in row[..num_classes].iter_mut().enumerate() {
        *x = if i == class { on_value } else { 0.0 };
    }
}

/// Fixed per-class binary patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct IcpBank {
    /// `num_classes × (height · width)`, entries 0 or 1.
    patterns: Vec<Vec<u8>>,
    height: usize,
    width: usize,
    rate: f64,
    seed: u64,
}

impl IcpBank {
    pub fn num_classes(&self) -> usize {
        self.patterns.len()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn pattern(&self, class: usize) -> &[u8] {
        &self.patterns[class]
    }

    pub fn ones_per_pattern(&self) -> usize {
        self.patterns
            .first()
            .map_or(0, |p| p.iter().filter(|&&b| b == 1).count())
    }

    /// Every pixel set: all classes share the same pattern.
    pub fn is_saturated(&self) -> bool {
        self.ones_per_pattern() == self.height * self.width
    }

    /// Rebuilds a bank from stored patterns, checking the popcount invariant.
    pub fn from_parts(
        patterns: Vec<Vec<u8>>,
        height: usize,
        width: usize,
        rate: f64,
        seed: u64,
    ) -> Result<Self> {
        let plane = height * width;
        let want = pattern_ones(rate, plane)?;
        for (c, p) in patterns.iter().enumerate() {
            if p.len() != plane || p.iter().any(|&b| b > 1) {
                return Err(Error::param(format!("pattern {c} is not a binary {height}x{width} plane")));
            }
            let ones = p.iter().filter(|&&b| b == 1).count();
            if ones != want {
                return Err(Error::param(format!(
                    "pattern {c} has {ones} ones, rate {rate} requires {want}"
                )));
            }
        }
        Ok(Self {
            patterns,
            height,
            width,
            rate,
            seed,
        })
    }
}

fn pattern_ones(rate: f64, plane: usize) -> Result<usize> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::param(format!("ICP rate must be in (0, 1], got {rate}")));
    }
    let ones = (rate * plane as f64).round() as usize;
    if ones == 0 {
        return Err(Error::param(format!(
            "ICP rate {rate} leaves no active pixel in a {plane}-pixel plane"
        )));
    }
    Ok(ones)
}

pub fn icp_generate(
    num_classes: usize,
    height: usize,
    width: usize,
    rate: f64,
    seed: u64,
) -> Result<IcpBank> {
    if num_classes == 0 || height == 0 || width == 0 {
        return Err(Error::param("ICP bank needs at least one class and a non-empty plane"));
    }
    let plane = height * width;
    let ones = pattern_ones(rate, plane)?;
    let mut rng = Rng::new(seed);
    let patterns: Vec<Vec<u8>> = (0..num_classes)
        .map(|_| {
            let mut p = vec![0u8; plane];
            for i in rng.sample_distinct(plane, ones) {
                p[i] = 1;
            }
            p
        })
        .collect();

    let bank = IcpBank {
        patterns,
        height,
        width,
        rate,
        seed,
    };
    if bank.is_saturated() {
        if num_classes > 1 {
            warn!("ICP rate {rate} sets every pixel; class patterns are indistinguishable");
        }
    } else {
        for a in 0..num_classes {
            for b in a + 1..num_classes {
                if bank.patterns[a] == bank.patterns[b] {
                    return Err(Error::param(format!(
                        "ICP patterns {a} and {b} coincide under seed {seed}; pick another seed"
                    )));
                }
            }
        }
    }
    Ok(bank)
}

/// Appends the class pattern as one extra channel.
pub fn icp_encode(image: &[f64], shape: ImageShape, class: usize, bank: &IcpBank) -> Result<Vec<f64>> {
    check_icp_shape(image.len(), shape, bank)?;
    if class >= bank.num_classes() {
        return Err(Error::param(format!(
            "class {class} out of range for {} patterns",
            bank.num_classes()
        )));
    }
    let mut out = Vec::with_capacity(image.len() + shape.plane());
    out.extend_from_slice(image);
    out.extend(bank.pattern(class).iter().map(|&b| f64::from(b)));
    Ok(out)
}

fn check_icp_shape(len: usize, shape: ImageShape, bank: &IcpBank) -> Result<()> {
    if len != shape.len() {
        return Err(Error::param(format!(
            "image has {len} entries, shape {}x{}x{} needs {}",
            shape.channels,
            shape.height,
            shape.width,
            shape.len()
        )));
    }
    if (shape.height, shape.width) != (bank.height, bank.width) {
        return Err(Error::param(format!(
            "ICP bank is {}x{}, images are {}x{}",
            bank.height, bank.width, shape.height, shape.width
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Labeling {
    Overlay { on_value: f64 },
    Icp(IcpBank),
}

impl Labeling {
    pub fn name(&self) -> &'static str {
        match self {
            Labeling::Overlay { .. } => "overlay",
            Labeling::Icp(_) => "icp",
        }
    }

    /// Width of an encoded input row.
    pub fn encoded_len(&self, shape: ImageShape) -> usize {
        match self {
            Labeling::Overlay { .. } => shape.len(),
            Labeling::Icp(_) => shape.len() + shape.plane(),
        }
    }

    pub fn validate(&self, shape: ImageShape, num_classes: usize) -> Result<()> {
        match self {
            Labeling::Overlay { .. } if num_classes > shape.plane() => Err(Error::param(format!(
                "{num_classes} classes do not fit in a {}-pixel channel",
                shape.plane()
            ))),
            Labeling::Icp(bank) => {
                check_icp_shape(shape.len(), shape, bank)?;
                if bank.num_classes() < num_classes {
                    return Err(Error::param(format!(
                        "ICP bank has {} patterns for {num_classes} classes",
                        bank.num_classes()
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Encodes each row of `images` with the matching entry of `labels`.
    pub fn encode_batch(
        &self,
        images: &Matrix,
        labels: &[usize],
        shape: ImageShape,
        num_classes: usize,
    ) -> Result<Matrix> {
        if images.rows() != labels.len() || images.cols() != shape.len() {
            return Err(Error::dim(
                "encode_batch",
                format!(
                    "{:?} images, {} labels, {} entries per image",
                    images.shape(),
                    labels.len(),
                    shape.len()
                ),
            ));
        }
        self.validate(shape, num_classes)?;
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::param(format!("label {bad} out of range for {num_classes} classes")));
        }
        let width = self.encoded_len(shape);
        let mut out = Matrix::zeros(images.rows(), width);
        for (r, &label) in labels.iter().enumerate() {
            let src = images.row(r);
            let dst = out.row_mut(r);
            dst[..src.len()].copy_from_slice(src);
            match self {
                Labeling::Overlay { on_value } => {
                    overlay_in_place(dst, label, num_classes, *on_value)
                }
                Labeling::Icp(bank) => {
                    for (d, &b) in dst[src.len()..].iter_mut().zip(bank.pattern(label)) {
                        *d = f64::from(b);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub inputs: Matrix,
    /// The label that was injected (the true label for positives).
    pub labels: Vec<usize>,
    pub polarity: Polarity,
}

/// A label drawn uniformly from the `num_classes - 1` classes other than `truth`.
pub fn wrong_label(truth: usize, num_classes: usize, rng: &mut Rng) -> usize {
    let r = rng.below(num_classes - 1);
    if r >= truth {
        r + 1
    } else {
        r
    }
}

pub fn make_pos_neg(
    images: &Matrix,
    labels: &[usize],
    shape: ImageShape,
    num_classes: usize,
    labeling: &Labeling,
    rng: &mut Rng,
) -> Result<(LabeledBatch, LabeledBatch)> {
    if labels.is_empty() {
        return Err(Error::param("cannot build positive/negative samples from an empty batch"));
    }
    if num_classes < 2 {
        return Err(Error::param("negative samples need at least two classes"));
    }
    let neg_labels: Vec<usize> = labels
        .iter()
        .map(|&t| wrong_label(t, num_classes, rng))
        .collect();
    let pos = LabeledBatch {
        inputs: labeling.encode_batch(images, labels, shape, num_classes)?,
        labels: labels.to_vec(),
        polarity: Polarity::Positive,
    };
    let neg = LabeledBatch {
        inputs: labeling.encode_batch(images, &neg_labels, shape, num_classes)?,
        labels: neg_labels,
        polarity: Polarity::Negative,
    };
    Ok((pos, neg))
}
