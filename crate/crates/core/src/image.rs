//! Packed 8-bit RGB images and binary PPM (P6) I/O.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0; width * height * 3] }
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let mut img = Self::new(width, height);
        for px in img.data.chunks_exact_mut(3) {
            px.copy_from_slice(&rgb);
        }
        img
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::DimensionMismatch { expected: width * height * 3, got: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, u: usize, v: usize) -> [u8; 3] {
        let i = (v * self.width + u) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put(&mut self, u: usize, v: usize, rgb: [u8; 3]) {
        let i = (v * self.width + u) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Mean over all pixels and channels.
    pub fn mean_intensity(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|&b| b as u64).sum::<u64>() as f64 / self.data.len() as f64
    }

    pub fn write_ppm<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.data)?;
        Ok(())
    }

    pub fn read_ppm<R: BufRead>(mut r: R) -> Result<Self> {
        let mut fields = Vec::with_capacity(4);
        let mut line = String::new();
        while fields.len() < 4 {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::Format("truncated ppm header".into()));
            }
            let content = line.split('#').next().unwrap_or("");
            fields.extend(content.split_whitespace().map(str::to_owned));
        }
        if fields[0] != "P6" || fields[3] != "255" {
            return Err(Error::Format(format!("unsupported ppm header {:?}", fields)));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad ppm dimension {s}")));
        let (width, height) = (parse(&fields[1])?, parse(&fields[2])?);
        let mut data = vec![0; width * height * 3];
        r.read_exact(&mut data)?;
        Self::from_raw(width, height, data)
    }
}
