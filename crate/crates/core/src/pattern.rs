use crate::error::{Error, Result};
use crate::tiles::TileMask;

/// Largest pattern side.
pub const MAX_PATTERN_SIDE: usize = 3;

/// An `rows × cols` patch where each cell lists the tiles it requires (for
/// an input pattern) or produces (for an output pattern).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Pattern {
    rows: usize,
    cols: usize,
    cells: Vec<TileMask>,
}

impl Pattern {
    pub fn empty(rows: usize, cols: usize) -> Result<Self> {
        Self::from_cells(rows, cols, vec![0; rows * cols])
    }

    pub fn from_cells(rows: usize, cols: usize, cells: Vec<TileMask>) -> Result<Self> {
        if !(1..=MAX_PATTERN_SIDE).contains(&rows) || !(1..=MAX_PATTERN_SIDE).contains(&cols) {
            return Err(Error::Contract(format!(
                "pattern size {rows}x{cols} outside 1..={MAX_PATTERN_SIDE}"
            )));
        }
        if cells.len() != rows * cols {
            return Err(Error::Contract(format!(
                "pattern {rows}x{cols} needs {} cells, got {}",
                rows * cols,
                cells.len()
            )));
        }
        Ok(Pattern { rows, cols, cells })
    }

    /// Build from row slices of cell masks.
    pub fn from_rows(rows: &[&[TileMask]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Contract("ragged pattern rows".into()));
        }
        Self::from_cells(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> TileMask {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, mask: TileMask) {
        self.cells[row * self.cols + col] = mask;
    }

    pub fn cells(&self) -> &[TileMask] {
        &self.cells
    }

    /// Number of required tile entries over all cells.
    pub fn count(&self) -> u32 {
        self.cells.iter().map(|m| m.count_ones()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(|&m| m == 0)
    }

    /// Union of every tile mentioned in the pattern.
    pub fn used_tiles(&self) -> TileMask {
        self.cells.iter().fold(0, |a, &m| a | m)
    }

    /// Quarter turn clockwise: an `n × m` pattern becomes `m × n`, and a
    /// pattern pointing east now points south.
    pub fn rotate_cw(&self) -> Pattern {
        let (n, m) = (self.rows, self.cols);
        let mut cells = vec![0; n * m];
        for r in 0..m {
            for c in 0..n {
                cells[r * n + c] = self.get(n - 1 - c, r);
            }
        }
        Pattern { rows: m, cols: n, cells }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_limits() {
        assert!(Pattern::empty(0, 1).is_err());
        assert!(Pattern::empty(4, 1).is_err());
        assert!(Pattern::empty(3, 3).is_ok());
    }

    #[test]
    fn rotation_turns_east_into_south() {
        let p = Pattern::from_rows(&[&[1, 2]]).unwrap();
        let s = p.rotate_cw();
        assert_eq!((s.rows(), s.cols()), (2, 1));
        assert_eq!(s.get(0, 0), 1);
        assert_eq!(s.get(1, 0), 2);
        let w = s.rotate_cw();
        assert_eq!(w.cells(), &[2, 1]);
        let n = w.rotate_cw();
        assert_eq!(n.cells(), &[2, 1]);
        assert_eq!((n.rows(), n.cols()), (2, 1));
        assert_eq!(n.rotate_cw(), p);
    }

    #[test]
    fn counts_entries() {
        let p = Pattern::from_rows(&[&[0b11, 0], &[0b100, 0b1]]).unwrap();
        assert_eq!(p.count(), 4);
        assert_eq!(p.used_tiles(), 0b111);
    }
}
