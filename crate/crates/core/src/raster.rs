//! Dense interleaved image buffers.

/// Row-major `height × width × channels` buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    width: u32,
    height: u32,
    channels: u32,
    data: Vec<T>,
}

impl<T: Copy> Raster<T> {
    pub fn filled(width: u32, height: u32, channels: u32, value: T) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; (width * height * channels) as usize],
        }
    }

    /// Wraps existing data; `None` when the length does not match.
    pub fn from_vec(width: u32, height: u32, channels: u32, data: Vec<T>) -> Option<Self> {
        (data.len() == (width as usize * height as usize * channels as usize)).then_some(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u32 {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        (self.width * self.height) as usize
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Channel values of the pixel with linear index `i`.
    pub fn pixel(&self, i: usize) -> &[T] {
        let c = self.channels as usize;
        &self.data[i * c..(i + 1) * c]
    }

    pub fn pixel_mut(&mut self, i: usize) -> &mut [T] {
        let c = self.channels as usize;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn get(&self, x: u32, y: u32) -> &[T] {
        self.pixel((y * self.width + x) as usize)
    }

    pub fn same_shape<U>(&self, other: &Raster<U>) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }
}
