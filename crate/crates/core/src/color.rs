//! Row-major RGB image buffer with channels in [0, 1].

use nalgebra::Vector3;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    width: u32,
    height: u32,
    data: Vec<Vector3<f64>>,
}

impl ColorImage {
    pub fn new(width: u32, height: u32, data: Vec<Vector3<f64>>) -> Result<Self> {
        if data.len() != (width as usize) * (height as usize) {
            return Err(Error::domain(format!(
                "image data length {} != {}x{}",
                data.len(),
                width,
                height
            )));
        }
        for c in &data {
            if !c.iter().all(|x| x.is_finite() && (0.0..=1.0).contains(x)) {
                return Err(Error::domain(format!("color {c:?} outside [0, 1]")));
            }
        }
        Ok(Self { width, height, data })
    }

    pub fn constant(width: u32, height: u32, color: Vector3<f64>) -> Result<Self> {
        Self::new(width, height, vec![color; (width as usize) * (height as usize)])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, v: u32, u: u32) -> Vector3<f64> {
        self.data[(v * self.width + u) as usize]
    }

    pub fn set(&mut self, v: u32, u: u32, color: Vector3<f64>) {
        self.data[(v * self.width + u) as usize] = color;
    }

    pub fn pixels(&self) -> &[Vector3<f64>] {
        &self.data
    }
}
