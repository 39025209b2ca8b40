//! Rectangular pixel windows on the sensor.
//!
//! Trails cover a few thousand pixels of a multi-megapixel sensor, so grids
//! hold a region of interest anchored at a sensor offset. Reads outside the
//! window return zero.

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    /// Sensor column of the first stored column.
    pub x0: i64,
    /// Sensor row of the first stored row.
    pub y0: i64,
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn zeros(x0: i64, y0: i64, width: usize, height: usize) -> Self {
        Grid {
            x0,
            y0,
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn filled(x0: i64, y0: i64, width: usize, height: usize, value: f64) -> Self {
        Grid {
            x0,
            y0,
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn same_extent(&self) -> Self {
        Grid::zeros(self.x0, self.y0, self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Storage index of sensor pixel `(x, y)`, if inside the window.
    #[inline]
    pub fn index(&self, x: i64, y: i64) -> Option<usize> {
        let cx = x - self.x0;
        let cy = y - self.y0;
        if cx < 0 || cy < 0 || cx as usize >= self.width || cy as usize >= self.height {
            None
        } else {
            Some(cy as usize * self.width + cx as usize)
        }
    }

    /// Sensor coordinates of a storage index.
    #[inline]
    pub fn coords(&self, idx: usize) -> (i64, i64) {
        (
            self.x0 + (idx % self.width) as i64,
            self.y0 + (idx / self.width) as i64,
        )
    }

    #[inline]
    pub fn get(&self, x: i64, y: i64) -> f64 {
        self.index(x, y).map_or(0.0, |i| self.data[i])
    }

    pub fn set(&mut self, x: i64, y: i64, v: f64) {
        if let Some(i) = self.index(x, y) {
            self.data[i] = v;
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    pub fn same_window(&self, other: &Grid) -> bool {
        self.x0 == other.x0
            && self.y0 == other.y0
            && self.width == other.width
            && self.height == other.height
    }
}
