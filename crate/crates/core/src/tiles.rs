use crate::error::{Error, Result};

/// Bit set over tile indices. Tile index `i` is bit `i`.
pub type TileMask = u64;

/// Largest tileset a [`TileMask`] can address.
pub const MAX_TILES: usize = TileMask::BITS as usize;

pub const PLAYER: usize = 0;
pub const FORCE: usize = 1;
pub const WALL: usize = 2;
pub const FLOOR: usize = 3;
pub const FOOD: usize = 4;

/// Names of the reserved tiles, in index order.
pub const RESERVED: [&str; 5] = ["player", "force", "wall", "floor", "food"];

/// Number of tiles the default tileset adds on top of the reserved ones.
pub const DEFAULT_EXTRA_TILES: usize = 5;

/// Ordered tile vocabulary. Index 0..5 are always `player force wall floor food`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TileSet {
    names: Vec<String>,
}

pub(crate) fn is_identifier(name: &str) -> bool {
    let mut bytes = name.bytes();
    matches!(bytes.next(), Some(b'a'..=b'z'))
        && bytes.all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

impl TileSet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < RESERVED.len() {
            return Err(Error::TileSet(format!(
                "need at least {} tiles, got {}",
                RESERVED.len(),
                names.len()
            )));
        }
        if names.len() > MAX_TILES {
            return Err(Error::TileSet(format!("at most {MAX_TILES} tiles are supported")));
        }
        for (i, expected) in RESERVED.iter().enumerate() {
            if names[i] != *expected {
                return Err(Error::TileSet(format!(
                    "tile {i} must be `{expected}`, found `{}`",
                    names[i]
                )));
            }
        }
        for (i, name) in names.iter().enumerate() {
            if !is_identifier(name) {
                return Err(Error::TileSet(format!("invalid tile name `{name}`")));
            }
            if names[..i].contains(name) {
                return Err(Error::TileSet(format!("duplicate tile name `{name}`")));
            }
        }
        Ok(TileSet { names })
    }

    /// Reserved tiles followed by `extra` placeholder tiles `t0`, `t1`, ...
    pub fn with_extras(extra: usize) -> Self {
        let names = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain((0..extra).map(|i| format!("t{i}")));
        TileSet::new(names).expect("generated tile names are valid")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Mask with one bit per tile in the set.
    pub fn full_mask(&self) -> TileMask {
        if self.len() == MAX_TILES {
            TileMask::MAX
        } else {
            (1 << self.len()) - 1
        }
    }
}

impl Default for TileSet {
    fn default() -> Self {
        TileSet::with_extras(DEFAULT_EXTRA_TILES)
    }
}

/// Iterate the tile indices set in `mask`, lowest first.
pub fn mask_tiles(mut mask: TileMask) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(i)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_has_ten_tiles() {
        let t = TileSet::default();
        assert_eq!(t.len(), 10);
        assert_eq!(t.index_of("food"), Some(FOOD));
        assert_eq!(t.full_mask(), 0b11_1111_1111);
    }

    #[test]
    fn rejects_bad_sets() {
        assert!(TileSet::new(["player", "force", "wall", "floor"]).is_err());
        assert!(TileSet::new(["force", "player", "wall", "floor", "food"]).is_err());
        assert!(TileSet::new(["player", "force", "wall", "floor", "food", "food"]).is_err());
        assert!(TileSet::new(["player", "force", "wall", "floor", "food", "Lava"]).is_err());
        assert!(TileSet::new(["player", "force", "wall", "floor", "food", "9x"]).is_err());
        assert!(TileSet::new(["player", "force", "wall", "floor", "food", "lava_2"]).is_ok());
    }

    #[test]
    fn mask_iteration() {
        assert_eq!(mask_tiles(0b1010_0001).collect::<Vec<_>>(), vec![0, 5, 7]);
        assert_eq!(mask_tiles(0).count(), 0);
    }
}
