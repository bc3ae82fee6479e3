//! Single-channel rasters.
//!
//! [`Plane<f32>`] carries intensities and model state, [`Plane<u16>`] carries
//! per-pixel age counters and [`BinaryMask`] carries {0,1} masks.

use crate::error::{Error, Result};

/// Row-major single-channel raster with positive dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plane<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Plane<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            data: vec![value; width * height],
        })
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::Format(format!(
                "plane {}x{} needs {} values, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    #[inline]
    pub fn row_mut(&mut self, y: usize) -> &mut [T] {
        &mut self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Applies `f` to every value, producing a plane of the same shape.
    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Plane<U> {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Combines two same-shaped planes value by value.
    pub fn zip_map<U: Copy, V: Copy>(&self, other: &Plane<U>, f: impl Fn(T, U) -> V) -> Result<Plane<V>> {
        ensure_same_dims(self.dims(), other.dims())?;
        Ok(Plane {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

impl Plane<f32> {
    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Clamps and rounds to 8 bits.
    pub fn to_luma8(&self) -> image::GrayImage {
        let data = self.data.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect();
        image::GrayImage::from_raw(self.width as u32, self.height as u32, data)
            .expect("plane dims match buffer")
    }
}

pub(crate) fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions { width, height });
    }
    Ok(())
}

pub(crate) fn ensure_same_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// A plane whose values are restricted to 0 and 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask(Plane<u8>);

impl BinaryMask {
    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Plane::filled(width, height, 0).map(Self)
    }

    pub fn ones(width: usize, height: usize) -> Result<Self> {
        Plane::filled(width, height, 1).map(Self)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        Plane::from_fn(width, height, |x, y| f(x, y) as u8).map(Self)
    }

    /// Wraps a plane, rejecting any value other than 0 or 1.
    pub fn from_plane(plane: Plane<u8>) -> Result<Self> {
        if let Some(v) = plane.as_slice().iter().find(|&&v| v > 1) {
            return Err(Error::Format(format!("mask value {v} is not 0 or 1")));
        }
        Ok(Self(plane))
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.0.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.0.height()
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.0.get(x, y) != 0
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.0.set(x, y, on as u8);
    }

    pub fn count_ones(&self) -> usize {
        self.0.as_slice().iter().filter(|&&v| v != 0).count()
    }

    pub fn as_plane(&self) -> &Plane<u8> {
        &self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [u8] {
        self.0.as_mut_slice()
    }

    pub fn as_slice(&self) -> &[u8] {
        self.0.as_slice()
    }

    /// 0 → black, 1 → white.
    pub fn to_luma8(&self) -> image::GrayImage {
        let data = self.0.as_slice().iter().map(|&v| v * 255).collect();
        image::GrayImage::from_raw(self.width() as u32, self.height() as u32, data)
            .expect("mask dims match buffer")
    }
}
