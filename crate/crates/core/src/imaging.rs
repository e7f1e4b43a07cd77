//! Per-vertex images, salt-and-pepper corruption and PSNR.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::scalar::Real;

/// Intensities attached to mesh vertices, stored vertex-major
/// (`values[v * channels + c]`).
///
/// Images built with [`MeshImage::new`] are checked to lie in [0, 1]; solver
/// iterates use [`MeshImage::from_raw`] and may leave that range until
/// clamped.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshImage<T> {
    values: Vec<T>,
    channels: usize,
}

impl<T: Real> MeshImage<T> {
    pub fn new(values: Vec<T>, channels: usize) -> Result<Self> {
        let image = Self::from_raw(values, channels)?;
        for (i, &v) in image.values.iter().enumerate() {
            if v.is_nan() {
                return Err(Error::NaNInput);
            }
            if v < T::zero() || v > T::one() {
                return Err(Error::ValueOutOfRange {
                    index: i,
                    value: v.to_f64_lossy(),
                });
            }
        }
        Ok(image)
    }

    /// Wraps values without the [0, 1] range check.
    pub fn from_raw(values: Vec<T>, channels: usize) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidChannels(channels));
        }
        if values.len() % channels != 0 {
            return Err(Error::DimensionMismatch {
                context: "image values per channel",
                expected: values.len() / channels * channels,
                found: values.len(),
            });
        }
        Ok(Self { values, channels })
    }

    pub fn constant(vertex_count: usize, channels: usize, value: T) -> Result<Self> {
        Self::from_raw(vec![value; vertex_count * channels], channels)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn vertex_count(&self) -> usize {
        self.values.len() / self.channels
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.values.iter().all(|&v| v >= T::zero() && v <= T::one())
    }

    /// One contiguous vector per channel.
    pub fn planes(&self) -> Vec<Vec<T>> {
        (0..self.channels)
            .map(|c| self.values.iter().skip(c).step_by(self.channels).copied().collect())
            .collect()
    }

    pub fn from_planes(planes: &[Vec<T>]) -> Result<Self> {
        let channels = planes.len();
        let nv = planes.first().map_or(0, Vec::len);
        for p in planes {
            check_len("channel plane", nv, p.len())?;
        }
        let mut values = Vec::with_capacity(nv * channels);
        for v in 0..nv {
            for p in planes {
                values.push(p[v]);
            }
        }
        Self::from_raw(values, channels)
    }

    pub(crate) fn check_same_shape(&self, other: &Self, context: &'static str) -> Result<()> {
        check_len(context, self.channels, other.channels)?;
        check_len(context, self.values.len(), other.values.len())
    }
}

/// Clamps every value into [0, 1]. Any NaN is an error.
pub fn clamp_to_unit<T: Real>(image: &MeshImage<T>) -> Result<MeshImage<T>> {
    if image.values.iter().any(|v| v.is_nan()) {
        return Err(Error::NaNInput);
    }
    let values = image
        .values
        .iter()
        .map(|&v| v.max(T::zero()).min(T::one()))
        .collect();
    MeshImage::new(values, image.channels)
}

/// Salt-and-pepper corruption parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    level: f64,
    seed: u64,
}

impl NoiseSpec {
    pub fn new(level: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&level) {
            return Err(Error::InvalidParams(format!("noise level {level} outside [0, 1]")));
        }
        Ok(Self { level, seed })
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// What happened to each value during corruption.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Corruption {
    Untouched,
    Pepper,
    Salt,
}

/// Independently per value: pepper (0) with probability level/2, salt (1)
/// with probability level/2, otherwise unchanged.
pub fn add_salt_pepper<T: Real>(image: &MeshImage<T>, spec: &NoiseSpec) -> MeshImage<T> {
    add_salt_pepper_with_mask(image, spec).0
}

pub fn add_salt_pepper_with_mask<T: Real>(
    image: &MeshImage<T>,
    spec: &NoiseSpec,
) -> (MeshImage<T>, Vec<Corruption>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let half = spec.level / 2.0;
    let mut mask = Vec::with_capacity(image.len());
    let values = image
        .values
        .iter()
        .map(|&v| {
            let draw: f64 = rng.gen();
            if draw < half {
                mask.push(Corruption::Pepper);
                T::zero()
            } else if draw < spec.level {
                mask.push(Corruption::Salt);
                T::one()
            } else {
                mask.push(Corruption::Untouched);
                v
            }
        })
        .collect();
    (
        MeshImage {
            values,
            channels: image.channels,
        },
        mask,
    )
}

/// PSNR in dB, `10 log10(n / ‖u − ref‖²)` with n the number of stored values
/// (vertex count for gray, three times that for color). Identical images give
/// `+∞`.
pub fn psnr<T: Real>(u: &MeshImage<T>, reference: &MeshImage<T>) -> Result<f64> {
    u.check_same_shape(reference, "psnr")?;
    let sq: f64 = u
        .values
        .iter()
        .zip(&reference.values)
        .map(|(&a, &b)| {
            let d = (a - b).to_f64_lossy();
            d * d
        })
        .sum();
    if sq == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (u.len() as f64 / sq).log10())
}
