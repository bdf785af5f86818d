//! Row-major raster containers shared by all pipeline stages.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A pixel position. `col` grows rightward, `row` grows downward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PixelCoord {
    pub col: i32,
    pub row: i32,
}

impl PixelCoord {
    pub fn new(col: i32, row: i32) -> Self {
        Self { col, row }
    }
}

/// Dense row-major grid of `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Raster<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Raster<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(alloc::format!(
                "raster data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> &T {
        debug_assert!(row < self.height && col < self.width);
        &self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: T) {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col] = value;
    }

    pub fn at(&self, index: usize) -> &T {
        &self.data[index]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn contains(&self, p: PixelCoord) -> bool {
        p.col >= 0 && p.row >= 0 && (p.col as usize) < self.width && (p.row as usize) < self.height
    }

    pub fn index_of(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    /// Checks that `other` shares this raster's dimensions.
    pub fn check_dims<U>(&self, other: &Raster<U>) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                got: other.dims(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(Raster::from_vec(3, 2, alloc::vec![0u8; 5]).is_err());
        assert!(Raster::from_vec(3, 2, alloc::vec![0u8; 6]).is_ok());
    }

    #[test]
    fn row_major_indexing() {
        let mut r = Raster::filled(4, 3, 0u8);
        r.set(2, 1, 9);
        assert_eq!(*r.get(2, 1), 9);
        assert_eq!(r.data()[2 * 4 + 1], 9);
    }

    #[test]
    fn bounds_check() {
        let r = Raster::filled(4, 3, 0u8);
        assert!(r.contains(PixelCoord::new(3, 2)));
        assert!(!r.contains(PixelCoord::new(4, 2)));
        assert!(!r.contains(PixelCoord::new(-1, 0)));
    }
}
