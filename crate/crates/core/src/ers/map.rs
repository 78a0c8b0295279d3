use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::raster;

/// Per-pixel superpixel ids `1..=n_superpixels` over a row-major lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperpixelMap {
    height: usize,
    width: usize,
    assignment: Vec<u32>,
    sizes: Vec<usize>,
}

impl SuperpixelMap {
    /// Validates that ids are dense in `1..=max` with every id used.
    pub fn from_assignment(height: usize, width: usize, assignment: Vec<u32>) -> Result<Self> {
        if assignment.len() != height * width || assignment.is_empty() {
            return Err(Error::Dimension(format!(
                "{} superpixel ids do not fill {height}x{width}",
                assignment.len()
            )));
        }
        let n_sp = *assignment.iter().max().expect("nonempty") as usize;
        let mut sizes = vec![0usize; n_sp];
        for &s in &assignment {
            if s == 0 {
                return Err(Error::param("superpixel id 0 is reserved"));
            }
            sizes[s as usize - 1] += 1;
        }
        if let Some(k) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::param(format!("superpixel {} is empty", k + 1)));
        }
        Ok(Self {
            height,
            width,
            assignment,
            sizes,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_pixels(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_superpixels(&self) -> usize {
        self.sizes.len()
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    /// Pixel count of each superpixel, indexed by `id - 1`.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Pixel indices of each superpixel, ascending, indexed by `id - 1`.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members: Vec<Vec<usize>> =
            self.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (i, &s) in self.assignment.iter().enumerate() {
            members[s as usize - 1].push(i);
        }
        members
    }

    /// True when every superpixel is connected under 8-adjacency.
    pub fn is_eight_connected(&self) -> bool {
        let (h, w) = (self.height, self.width);
        let mut seen = vec![false; self.assignment.len()];
        let mut started = vec![false; self.sizes.len()];
        let mut queue = VecDeque::new();
        for start in 0..self.assignment.len() {
            let id = self.assignment[start];
            if seen[start] {
                continue;
            }
            if started[id as usize - 1] {
                // second region with the same id
                return false;
            }
            started[id as usize - 1] = true;
            seen[start] = true;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                let (r, c) = ((i / w) as isize, (i % w) as isize);
                for dr in -1..=1 {
                    for dc in -1..=1 {
                        let (nr, nc) = (r + dr, c + dc);
                        if nr < 0 || nc < 0 || nr as usize >= h || nc as usize >= w {
                            continue;
                        }
                        let j = nr as usize * w + nc as usize;
                        if !seen[j] && self.assignment[j] == id {
                            seen[j] = true;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        true
    }

    pub fn to_pgm(&self) -> String {
        raster::pgm_ascii(self.height, self.width, &self.assignment)
    }

    pub fn to_csv(&self) -> String {
        raster::labels_csv(self.width, &self.assignment)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_gaps() {
        assert!(SuperpixelMap::from_assignment(1, 3, vec![1, 3, 3]).is_err());
        assert!(SuperpixelMap::from_assignment(1, 2, vec![0, 1]).is_err());
    }

    #[test]
    fn connectivity_check() {
        let ok = SuperpixelMap::from_assignment(2, 2, vec![1, 2, 2, 1]).unwrap();
        assert!(ok.is_eight_connected());
        let split = SuperpixelMap::from_assignment(1, 3, vec![1, 2, 1]).unwrap();
        assert!(!split.is_eight_connected());
    }

    #[test]
    fn members_and_sizes() {
        let m = SuperpixelMap::from_assignment(1, 4, vec![2, 1, 2, 2]).unwrap();
        assert_eq!(m.sizes(), &[1, 3]);
        assert_eq!(m.members(), vec![vec![1], vec![0, 2, 3]]);
        assert_eq!(m.to_csv(), "2,1,2,2\n");
    }
}
