//! Line-oriented text form of a complete environment.
//!
//! ```text
//! rulegrid 1
//! tiles player force wall floor food t0
//! map 3 4
//! wall wall  wall       wall
//! wall player floor+t0  food
//! wall wall  wall       wall
//! episode_limit 102
//! rule spread reward -1 rotate
//! in 1 2
//! t0 floor
//! out
//! t0 t0
//! end
//! ```
//!
//! Cells are `.` or `+`-joined tile names. `#` starts a comment and blank
//! lines are ignored. [`serialize`] emits the canonical form: single spaces,
//! tile names within a cell in index order, `episode_limit` right after the
//! map, rules in stored order.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::board::{Board, MIN_SIDE};
use crate::error::{Error, Result};
use crate::pattern::{Pattern, MAX_PATTERN_SIDE};
use crate::rules::{RewriteRule, Ruleset};
use crate::scalar::Reward;
use crate::tiles::{mask_tiles, TileMask, TileSet, PLAYER};

pub const HEADER: &str = "rulegrid 1";

/// Episode length used when a genome does not set one.
pub const DEFAULT_EPISODE_LIMIT: u32 = 102;

/// Largest map side the parser accepts.
pub const MAX_MAP_SIDE: usize = 256;

/// 128-bit digest of a genome's canonical text.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GenomeId(pub [u8; 16]);

impl GenomeId {
    pub fn of_text(text: &str) -> Self {
        let digest = Sha256::digest(text.as_bytes());
        let mut id = [0u8; 16];
        id.copy_from_slice(&digest[..16]);
        GenomeId(id)
    }
}

impl fmt::Display for GenomeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for GenomeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GenomeId({self})")
    }
}

impl FromStr for GenomeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Archive(format!("invalid genome id `{s}`"));
        if s.len() != 32 || !s.is_ascii() {
            return Err(bad());
        }
        let mut id = [0u8; 16];
        for (i, byte) in id.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
        }
        Ok(GenomeId(id))
    }
}

/// Ruleset, initial map and episode length: the unit of evolution.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvGenome<R> {
    init_map: Board,
    rules: Ruleset<R>,
    episode_limit: u32,
    id: GenomeId,
}

impl<R: Reward> EnvGenome<R> {
    pub fn new(init_map: Board, rules: Ruleset<R>, episode_limit: u32) -> Result<Self> {
        if init_map.channels() != rules.tiles().len() {
            return Err(Error::Genome(format!(
                "map has {} channels but the tileset has {} tiles",
                init_map.channels(),
                rules.tiles().len()
            )));
        }
        if init_map.height() > MAX_MAP_SIDE || init_map.width() > MAX_MAP_SIDE {
            return Err(Error::Genome(format!("map sides are limited to {MAX_MAP_SIDE}")));
        }
        let players = init_map.count(PLAYER);
        if players != 1 {
            return Err(Error::Genome(format!("map must contain exactly one player, found {players}")));
        }
        if episode_limit == 0 {
            return Err(Error::Genome("episode_limit must be positive".into()));
        }
        let mut g = EnvGenome { init_map, rules, episode_limit, id: GenomeId([0; 16]) };
        g.id = GenomeId::of_text(&serialize(&g));
        Ok(g)
    }

    pub fn tiles(&self) -> &TileSet {
        self.rules.tiles()
    }

    pub fn init_map(&self) -> &Board {
        &self.init_map
    }

    pub fn rules(&self) -> &Ruleset<R> {
        &self.rules
    }

    pub fn episode_limit(&self) -> u32 {
        self.episode_limit
    }

    pub fn id(&self) -> GenomeId {
        self.id
    }

    pub fn with_episode_limit(&self, episode_limit: u32) -> Result<Self> {
        EnvGenome::new(self.init_map.clone(), self.rules.clone(), episode_limit)
    }

    pub fn to_text(&self) -> String {
        serialize(self)
    }
}

fn cell_text(mask: TileMask, tiles: &TileSet, out: &mut String) {
    if mask == 0 {
        out.push('.');
        return;
    }
    for (i, t) in mask_tiles(mask).enumerate() {
        if i > 0 {
            out.push('+');
        }
        out.push_str(tiles.name(t));
    }
}

fn pattern_text(p: &Pattern, tiles: &TileSet, out: &mut String) {
    for r in 0..p.rows() {
        for c in 0..p.cols() {
            if c > 0 {
                out.push(' ');
            }
            cell_text(p.get(r, c), tiles, out);
        }
        out.push('\n');
    }
}

/// Canonical text of a genome.
pub fn serialize<R: Reward>(g: &EnvGenome<R>) -> String {
    let tiles = g.tiles();
    let map = &g.init_map;
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    out.push_str("tiles ");
    out.push_str(&tiles.names().join(" "));
    out.push('\n');
    let _ = writeln!(out, "map {} {}", map.height(), map.width());
    for r in 0..map.height() {
        for c in 0..map.width() {
            if c > 0 {
                out.push(' ');
            }
            cell_text(map.cell(r, c), tiles, &mut out);
        }
        out.push('\n');
    }
    let _ = writeln!(out, "episode_limit {}", g.episode_limit);
    for rule in g.rules.rules() {
        let _ = write!(out, "rule {} reward {}", rule.name, rule.reward.to_decimal());
        if rule.rotate {
            out.push_str(" rotate");
        }
        if !rule.mutable {
            out.push_str(" immutable");
        }
        out.push('\n');
        let _ = writeln!(out, "in {} {}", rule.input.rows(), rule.input.cols());
        pattern_text(&rule.input, tiles, &mut out);
        out.push_str("out\n");
        pattern_text(&rule.output, tiles, &mut out);
        out.push_str("end\n");
    }
    out
}

struct Line<'a> {
    number: usize,
    tokens: Vec<&'a str>,
}

struct Lines<'a> {
    lines: Vec<Line<'a>>,
    pos: usize,
    eof_line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let mut lines = Vec::new();
        let mut last = 0;
        for (i, raw) in text.lines().enumerate() {
            last = i + 1;
            let content = raw.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = content.split_whitespace().collect();
            if !tokens.is_empty() {
                lines.push(Line { number: i + 1, tokens });
            }
        }
        Lines { lines, pos: 0, eof_line: last + 1 }
    }

    fn next(&mut self, what: &str) -> Result<&Line<'a>> {
        match self.lines.get(self.pos) {
            Some(line) => {
                self.pos += 1;
                Ok(line)
            }
            None => Err(Error::parse(self.eof_line, format!("unexpected end of input, expected {what}"))),
        }
    }

    fn peek(&self) -> Option<&Line<'a>> {
        self.lines.get(self.pos)
    }
}

fn parse_size(tok: &str, line: usize, what: &str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| Error::parse(line, format!("invalid {what} `{tok}`")))
}

fn parse_cell(tok: &str, tiles: &TileSet, line: usize) -> Result<TileMask> {
    if tok == "." {
        return Ok(0);
    }
    let mut mask: TileMask = 0;
    for name in tok.split('+') {
        let idx = tiles
            .index_of(name)
            .ok_or_else(|| Error::parse(line, format!("unknown tile `{name}`")))?;
        if mask & (1 << idx) != 0 {
            return Err(Error::parse(line, format!("tile `{name}` repeated in one cell")));
        }
        mask |= 1 << idx;
    }
    Ok(mask)
}

fn parse_row(line: &Line<'_>, cols: usize, tiles: &TileSet, what: &str) -> Result<Vec<TileMask>> {
    if line.tokens.len() != cols {
        return Err(Error::parse(
            line.number,
            format!("shape mismatch: {what} row has {} cells, expected {cols}", line.tokens.len()),
        ));
    }
    line.tokens.iter().map(|t| parse_cell(t, tiles, line.number)).collect()
}

fn parse_pattern_rows(lines: &mut Lines<'_>, rows: usize, cols: usize, tiles: &TileSet, what: &str) -> Result<Pattern> {
    let mut cells = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let line = lines.next(what)?;
        if matches!(line.tokens[0], "out" | "end" | "rule") {
            return Err(Error::parse(
                line.number,
                format!("shape mismatch: {what} pattern needs {rows} rows, found `{}`", line.tokens[0]),
            ));
        }
        cells.extend(parse_row(line, cols, tiles, what)?);
    }
    Pattern::from_cells(rows, cols, cells).map_err(|e| Error::parse(lines.eof_line, e.to_string()))
}

fn parse_rule<R: Reward>(lines: &mut Lines<'_>, tiles: &TileSet) -> Result<(RewriteRule<R>, usize)> {
    let head = lines.next("rule")?;
    let at = head.number;
    let t = &head.tokens;
    if t.len() < 4 || t[0] != "rule" || t[2] != "reward" {
        return Err(Error::parse(at, "expected `rule <name> reward <decimal> [rotate] [immutable]`"));
    }
    let name = t[1].to_string();
    if !crate::tiles::is_identifier(&name) {
        return Err(Error::parse(at, format!("invalid rule name `{name}`")));
    }
    let reward = R::parse_decimal(t[3]).ok_or_else(|| Error::parse(at, format!("invalid reward `{}`", t[3])))?;
    let (mut rotate, mut immutable) = (false, false);
    for flag in &t[4..] {
        let slot = match *flag {
            "rotate" => &mut rotate,
            "immutable" => &mut immutable,
            other => return Err(Error::parse(at, format!("unknown rule flag `{other}`"))),
        };
        if *slot {
            return Err(Error::parse(at, format!("repeated rule flag `{flag}`")));
        }
        *slot = true;
    }

    let shape = lines.next("`in <rows> <cols>`")?;
    if shape.tokens.len() != 3 || shape.tokens[0] != "in" {
        return Err(Error::parse(shape.number, "expected `in <rows> <cols>`"));
    }
    let rows = parse_size(shape.tokens[1], shape.number, "pattern rows")?;
    let cols = parse_size(shape.tokens[2], shape.number, "pattern cols")?;
    let range = 1..=MAX_PATTERN_SIDE;
    if !range.contains(&rows) || !range.contains(&cols) {
        return Err(Error::parse(
            shape.number,
            format!("pattern size {rows}x{cols} out of range 1..={MAX_PATTERN_SIDE}"),
        ));
    }
    let input = parse_pattern_rows(lines, rows, cols, tiles, "input")?;

    let out = lines.next("`out`")?;
    if out.tokens != ["out"] {
        return Err(Error::parse(
            out.number,
            format!("shape mismatch: expected `out` after {rows} input rows"),
        ));
    }
    let output = parse_pattern_rows(lines, rows, cols, tiles, "output")?;

    let end = lines.next("`end`")?;
    if end.tokens != ["end"] {
        return Err(Error::parse(
            end.number,
            format!("shape mismatch: expected `end` after {rows} output rows"),
        ));
    }
    let rule = RewriteRule::new(name, input, output, reward).rotating(rotate).mutable(!immutable);
    Ok((rule, at))
}

/// Parse and validate a genome.
pub fn parse<R: Reward>(text: &str) -> Result<EnvGenome<R>> {
    let mut lines = Lines::new(text);

    let header = lines.next("header")?;
    if header.tokens != ["rulegrid", "1"] {
        return Err(Error::parse(header.number, format!("malformed header: expected `{HEADER}`")));
    }

    let tiles_line = lines.next("`tiles ...`")?;
    if tiles_line.tokens[0] != "tiles" {
        return Err(Error::parse(tiles_line.number, "expected `tiles <name> ...`"));
    }
    let tiles = TileSet::new(tiles_line.tokens[1..].iter().copied())
        .map_err(|e| Error::parse(tiles_line.number, e.to_string()))?;

    let map_line = lines.next("`map <rows> <cols>`")?;
    let map_at = map_line.number;
    if map_line.tokens.len() != 3 || map_line.tokens[0] != "map" {
        return Err(Error::parse(map_at, "expected `map <rows> <cols>`"));
    }
    let height = parse_size(map_line.tokens[1], map_at, "map rows")?;
    let width = parse_size(map_line.tokens[2], map_at, "map cols")?;
    let sides = MIN_SIDE..=MAX_MAP_SIDE;
    if !sides.contains(&height) || !sides.contains(&width) {
        return Err(Error::parse(
            map_at,
            format!("map size {height}x{width} out of range {MIN_SIDE}..={MAX_MAP_SIDE}"),
        ));
    }
    let mut map = Board::new(height, width, tiles.len()).map_err(|e| Error::parse(map_at, e.to_string()))?;
    let mut player_seen = false;
    for r in 0..height {
        let line = lines.next("map row")?;
        let row = parse_row(line, width, &tiles, "map")?;
        for (c, mask) in row.into_iter().enumerate() {
            if mask & (1 << PLAYER) != 0 {
                if player_seen {
                    return Err(Error::parse(line.number, "duplicate player: map must contain exactly one"));
                }
                player_seen = true;
            }
            map.set_cell(r, c, mask);
        }
    }
    if !player_seen {
        return Err(Error::parse(map_at, "missing player: map must contain exactly one"));
    }

    let mut episode_limit = None;
    let mut rules = Vec::new();
    let mut rule_lines = Vec::new();
    while let Some(line) = lines.peek() {
        match line.tokens[0] {
            "episode_limit" => {
                let at = line.number;
                if line.tokens.len() != 2 {
                    return Err(Error::parse(at, "expected `episode_limit <int>`"));
                }
                if episode_limit.is_some() {
                    return Err(Error::parse(at, "duplicate episode_limit"));
                }
                let limit = line.tokens[1]
                    .parse::<u32>()
                    .ok()
                    .filter(|&v| v > 0)
                    .ok_or_else(|| Error::parse(at, format!("invalid episode_limit `{}`", line.tokens[1])))?;
                episode_limit = Some(limit);
                lines.pos += 1;
            }
            "rule" => {
                let (rule, at) = parse_rule::<R>(&mut lines, &tiles)?;
                rule_lines.push((rule.name.clone(), at));
                rules.push(rule);
            }
            other => {
                return Err(Error::parse(line.number, format!("unexpected `{other}`, expected `rule` or `episode_limit`")));
            }
        }
    }

    let ruleset = Ruleset::new(tiles, rules).map_err(|e| {
        // name clashes point at the later definition
        let at = match &e {
            Error::Rule { rule, .. } => rule_lines
                .iter()
                .rev()
                .find(|(name, _)| name == rule)
                .map_or(map_at, |&(_, at)| at),
            _ => map_at,
        };
        Error::parse(at, e.to_string())
    })?;
    EnvGenome::new(map, ruleset, episode_limit.unwrap_or(DEFAULT_EPISODE_LIMIT))
        .map_err(|e| Error::parse(map_at, e.to_string()))
}

impl<R: Reward> FromStr for EnvGenome<R> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse(s)
    }
}
