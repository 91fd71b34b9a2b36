use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{load_gray16, save_gray16};

/// Integer-labelled nucleus map: 0 is background, every k >= 1 is one instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceMask {
    width: usize,
    height: usize,
    labels: Vec<u16>,
    /// Pixel indices per instance id, ascending by id and by index.
    instances: BTreeMap<u16, Vec<usize>>,
}

impl InstanceMask {
    pub fn new(width: usize, height: usize, labels: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "mask of {width}x{height} needs {} labels, got {}",
                width * height,
                labels.len()
            )));
        }
        let mut instances: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
        for (i, &l) in labels.iter().enumerate() {
            if l != 0 {
                instances.entry(l).or_default().push(i);
            }
        }
        Ok(Self {
            width,
            height,
            labels,
            instances,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, x: usize, y: usize) -> u16 {
        self.labels[y * self.width + x]
    }

    /// Instance ids in ascending order.
    pub fn ids(&self) -> impl Iterator<Item = u16> + '_ {
        self.instances.keys().copied()
    }

    pub fn instance_count(&self) -> usize {
        self.instances.len()
    }

    /// Row-major pixel indices of one instance.
    pub fn pixels(&self, id: u16) -> Result<&[usize]> {
        self.instances
            .get(&id)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownInstance(id))
    }

    pub fn matches(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_gray16(path.as_ref(), self.width, self.height, &self.labels)
    }
}

/// Read a 16-bit grayscale PNG instance mask.
pub fn load_mask(path: impl AsRef<Path>) -> Result<InstanceMask> {
    let (w, h, labels) = load_gray16(path.as_ref())?;
    InstanceMask::new(w, h, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{save_image, Raster};

    #[test]
    fn census() {
        let empty = InstanceMask::new(3, 3, vec![0; 9]).unwrap();
        assert_eq!(empty.instance_count(), 0);
        let m = InstanceMask::new(3, 2, vec![1, 0, 5, 9, 9, 0]).unwrap();
        assert_eq!(m.ids().collect::<Vec<_>>(), vec![1, 5, 9]);
        assert_eq!(m.pixels(9).unwrap(), &[3, 4]);
        assert!(matches!(m.pixels(2), Err(Error::UnknownInstance(2))));
        assert!(InstanceMask::new(2, 2, vec![0; 3]).is_err());
    }

    #[test]
    fn png_round_trip_and_bit_depth() {
        let dir = tempfile::tempdir().unwrap();
        let m = InstanceMask::new(4, 1, vec![0, 300, 300, 65535]).unwrap();
        let p = dir.path().join("m.png");
        m.save(&p).unwrap();
        assert_eq!(load_mask(&p).unwrap(), m);

        let eight = dir.path().join("eight.png");
        save_image(&Raster::filled(4, 1, 1, 1).unwrap(), &eight).unwrap();
        assert!(matches!(
            load_mask(&eight),
            Err(Error::UnsupportedFormat { .. })
        ));
    }
}
