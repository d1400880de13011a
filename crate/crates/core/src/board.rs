use crate::error::{Error, Result};
use crate::tiles::TileMask;

/// Smallest legal board side.
pub const MIN_SIDE: usize = 3;

/// Multihot occupancy grid: `height × width` cells over `channels` tiles.
///
/// Stored as one `u8` plane per channel (`[channel][row][col]`), each entry
/// 0 or 1. A cell may hold several tiles at once.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Board {
    height: usize,
    width: usize,
    channels: usize,
    cells: Vec<u8>,
}

impl Board {
    pub fn new(height: usize, width: usize, channels: usize) -> Result<Self> {
        if height < MIN_SIDE || width < MIN_SIDE {
            return Err(Error::Board(format!(
                "board must be at least {MIN_SIDE}x{MIN_SIDE}, got {height}x{width}"
            )));
        }
        if channels == 0 || channels > crate::tiles::MAX_TILES {
            return Err(Error::Board(format!("unsupported channel count {channels}")));
        }
        Ok(Board { height, width, channels, cells: vec![0; height * width * channels] })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    fn index(&self, row: usize, col: usize, channel: usize) -> usize {
        debug_assert!(row < self.height && col < self.width && channel < self.channels);
        (channel * self.height + row) * self.width + col
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> bool {
        self.cells[self.index(row, col, channel)] != 0
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, channel: usize, on: bool) {
        let i = self.index(row, col, channel);
        self.cells[i] = u8::from(on);
    }

    pub fn toggle(&mut self, row: usize, col: usize, channel: usize) {
        let i = self.index(row, col, channel);
        self.cells[i] ^= 1;
    }

    /// Tiles present at a cell as a bit set.
    pub fn cell(&self, row: usize, col: usize) -> TileMask {
        (0..self.channels)
            .filter(|&ch| self.get(row, col, ch))
            .fold(0, |mask, ch| mask | (1 << ch))
    }

    pub fn set_cell(&mut self, row: usize, col: usize, mask: TileMask) {
        for ch in 0..self.channels {
            self.set(row, col, ch, mask & (1 << ch) != 0);
        }
    }

    /// The `height × width` plane of one channel, row-major.
    pub fn plane(&self, channel: usize) -> &[u8] {
        let n = self.height * self.width;
        &self.cells[channel * n..(channel + 1) * n]
    }

    pub fn clear_channel(&mut self, channel: usize) {
        let n = self.height * self.width;
        self.cells[channel * n..(channel + 1) * n].fill(0);
    }

    pub fn count(&self, channel: usize) -> usize {
        self.plane(channel).iter().filter(|&&v| v != 0).count()
    }

    /// Row-major first active cell of a channel.
    pub fn first_active(&self, channel: usize) -> Option<(usize, usize)> {
        self.plane(channel)
            .iter()
            .position(|&v| v != 0)
            .map(|i| (i / self.width, i % self.width))
    }

    /// All active cells of a channel, row-major.
    pub fn active_cells(&self, channel: usize) -> Vec<(usize, usize)> {
        let w = self.width;
        self.plane(channel)
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(i, _)| (i / w, i % w))
            .collect()
    }

    /// Raw channel-major cell values.
    pub fn raw(&self) -> &[u8] {
        &self.cells
    }

    /// Apply a signed delta (same layout as [`Board::raw`]) and clamp each
    /// entry to `{0, 1}`.
    pub(crate) fn apply_clamped(&mut self, delta: &[i16]) {
        debug_assert_eq!(delta.len(), self.cells.len());
        for (cell, &d) in self.cells.iter_mut().zip(delta) {
            if d != 0 {
                *cell = (i16::from(*cell) + d).clamp(0, 1) as u8;
            }
        }
    }

    /// Total number of bits, `height * width * channels`.
    pub fn bit_len(&self) -> usize {
        self.cells.len()
    }

    /// Pack cells as bits in `[row][col][channel]` order, least significant
    /// bit first within each byte.
    pub fn to_packed(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.bit_len().div_ceil(8)];
        let mut bit = 0;
        for r in 0..self.height {
            for c in 0..self.width {
                for ch in 0..self.channels {
                    if self.get(r, c, ch) {
                        out[bit / 8] |= 1 << (bit % 8);
                    }
                    bit += 1;
                }
            }
        }
        out
    }

    /// Inverse of [`Board::to_packed`]. Padding bits in the last byte must be zero.
    pub fn from_packed(height: usize, width: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        let mut board = Board::new(height, width, channels)?;
        let bits = board.bit_len();
        if bytes.len() != bits.div_ceil(8) {
            return Err(Error::Board(format!(
                "expected {} packed bytes, got {}",
                bits.div_ceil(8),
                bytes.len()
            )));
        }
        if bits % 8 != 0 && bytes[bytes.len() - 1] >> (bits % 8) != 0 {
            return Err(Error::Board("nonzero padding bits".into()));
        }
        let mut bit = 0;
        for r in 0..height {
            for c in 0..width {
                for ch in 0..channels {
                    board.set(r, c, ch, bytes[bit / 8] & (1 << (bit % 8)) != 0);
                    bit += 1;
                }
            }
        }
        Ok(board)
    }
}
