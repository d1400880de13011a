//! Rewrite rules compiled to convolution kernels.
//!
//! A rule with input pattern `I` and output pattern `O` (both `n × m` over
//! `c` tiles) compiles to
//!
//! * `K_I`, a `c × n × m` kernel with a one at every required input entry,
//!   and the threshold `I = sum(K_I)`;
//! * `K_O = O − I`, a `c × n × m` kernel with entries in `{-1, 0, 1}`.
//!
//! One tick of the whole ruleset is
//!
//! ```text
//! B_t     = ReLU(conv_{K_I}(D_t) − I + 1)          (per compiled rule)
//! D_{t+1} = clamp_{0,1}(D_t + Σ_rules conv^T_{K_O}(B_t))
//! ```
//!
//! with a valid-only convolution anchored at the patch's top-left cell. All
//! rules read the pre-tick board; their deltas are summed and clamped once,
//! so the result does not depend on rule order.

use crate::board::Board;
use crate::error::{Error, Result};
use crate::pattern::Pattern;
use crate::scalar::Reward;
use crate::tiles::{is_identifier, TileMask, TileSet, FLOOR, FOOD, FORCE, PLAYER, WALL};

/// Default number of empty, mutable rule slots in the base maze.
pub const DEFAULT_NOOP_RULES: usize = 5;

/// Side of the empty no-op rule patterns.
pub const NOOP_RULE_SIDE: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct RewriteRule<R> {
    pub name: String,
    pub input: Pattern,
    pub output: Pattern,
    pub reward: R,
    /// Expand into the four quarter-turn rotations when compiling.
    pub rotate: bool,
    /// Evolution may edit this rule's patterns and reward.
    pub mutable: bool,
}

impl<R: Reward> RewriteRule<R> {
    pub fn new(name: impl Into<String>, input: Pattern, output: Pattern, reward: R) -> Self {
        RewriteRule { name: name.into(), input, output, reward, rotate: false, mutable: true }
    }

    pub fn rotating(mut self, rotate: bool) -> Self {
        self.rotate = rotate;
        self
    }

    pub fn mutable(mut self, mutable: bool) -> Self {
        self.mutable = mutable;
        self
    }

    /// An all-empty mutable rule of the given shape. It never fires.
    pub fn noop(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        let empty = Pattern::empty(rows, cols).expect("no-op rule shape");
        RewriteRule::new(name, empty.clone(), empty, R::zero())
    }

    pub fn validate(&self, tiles: &TileSet) -> Result<()> {
        if !is_identifier(&self.name) {
            return Err(Error::rule(&self.name, "invalid rule name"));
        }
        if self.input.rows() != self.output.rows() || self.input.cols() != self.output.cols() {
            return Err(Error::rule(
                &self.name,
                format!(
                    "input is {}x{} but output is {}x{}",
                    self.input.rows(),
                    self.input.cols(),
                    self.output.rows(),
                    self.output.cols()
                ),
            ));
        }
        let stray = (self.input.used_tiles() | self.output.used_tiles()) & !tiles.full_mask();
        if stray != 0 {
            return Err(Error::rule(
                &self.name,
                format!("tile index {} out of range for {} tiles", stray.trailing_zeros(), tiles.len()),
            ));
        }
        Ok(())
    }
}

/// One rotation of a rule as a kernel pair.
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledRule<R> {
    rows: usize,
    cols: usize,
    channels: usize,
    kernel_in: Vec<i8>,
    kernel_out: Vec<i8>,
    threshold: u32,
    pub reward: R,
    /// Index of the originating rule in its ruleset.
    pub source: usize,
    /// Quarter turns applied to the source patterns.
    pub rotation: u8,
    // Non-zero kernel entries as (channel, dr, dc[, weight]); the
    // convolutions only need these.
    taps_in: Vec<(usize, usize, usize)>,
    taps_out: Vec<(usize, usize, usize, i8)>,
}

impl<R: Reward> CompiledRule<R> {
    fn from_patterns(input: &Pattern, output: &Pattern, channels: usize, reward: R, source: usize, rotation: u8) -> Self {
        let (rows, cols) = (input.rows(), input.cols());
        let len = channels * rows * cols;
        let mut kernel_in = vec![0i8; len];
        let mut kernel_out = vec![0i8; len];
        for ch in 0..channels {
            for r in 0..rows {
                for c in 0..cols {
                    let i = (ch * rows + r) * cols + c;
                    let bit: TileMask = 1 << ch;
                    let want = i8::from(input.get(r, c) & bit != 0);
                    let make = i8::from(output.get(r, c) & bit != 0);
                    kernel_in[i] = want;
                    kernel_out[i] = make - want;
                }
            }
        }
        let threshold = kernel_in.iter().map(|&v| v as u32).sum();
        let mut taps_in = Vec::new();
        let mut taps_out = Vec::new();
        for ch in 0..channels {
            for r in 0..rows {
                for c in 0..cols {
                    let i = (ch * rows + r) * cols + c;
                    if kernel_in[i] != 0 {
                        taps_in.push((ch, r, c));
                    }
                    if kernel_out[i] != 0 {
                        taps_out.push((ch, r, c, kernel_out[i]));
                    }
                }
            }
        }
        CompiledRule {
            rows,
            cols,
            channels,
            kernel_in,
            kernel_out,
            threshold,
            reward,
            source,
            rotation,
            taps_in,
            taps_out,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `K_I` in `[channel][row][col]` order.
    pub fn kernel_in(&self) -> &[i8] {
        &self.kernel_in
    }

    /// `K_O = O − I` in `[channel][row][col]` order.
    pub fn kernel_out(&self) -> &[i8] {
        &self.kernel_out
    }

    /// `I`, the number of required input entries.
    pub fn threshold(&self) -> u32 {
        self.threshold
    }

    fn same_kernels(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.kernel_in == other.kernel_in
            && self.kernel_out == other.kernel_out
    }

    /// Activation at one anchor: `ReLU(conv − I + 1)`. Zero when the patch
    /// would leave the board or the input pattern is empty.
    #[inline]
    fn activation_at(&self, board: &Board, row: usize, col: usize) -> u8 {
        if self.threshold == 0 || row + self.rows > board.height() || col + self.cols > board.width() {
            return 0;
        }
        let plane = board.height() * board.width();
        let raw = board.raw();
        let conv: i32 = self
            .taps_in
            .iter()
            .map(|&(ch, dr, dc)| i32::from(raw[ch * plane + (row + dr) * board.width() + col + dc]))
            .sum();
        (conv - self.threshold as i32 + 1).max(0) as u8
    }
}

/// Compile one rule into its distinct rotations.
pub fn compile<R: Reward>(rule: &RewriteRule<R>, tiles: &TileSet, source: usize) -> Result<Vec<CompiledRule<R>>> {
    rule.validate(tiles)?;
    let turns = if rule.rotate { 4 } else { 1 };
    let mut out: Vec<CompiledRule<R>> = Vec::with_capacity(turns);
    let (mut input, mut output) = (rule.input.clone(), rule.output.clone());
    for turn in 0..turns {
        let cr = CompiledRule::from_patterns(&input, &output, tiles.len(), rule.reward, source, turn as u8);
        if !out.iter().any(|seen| seen.same_kernels(&cr)) {
            out.push(cr);
        }
        input = input.rotate_cw();
        output = output.rotate_cw();
    }
    Ok(out)
}

/// `H × W` activation map `B_t` of one compiled rule, row-major.
pub fn match_map<R: Reward>(board: &Board, rule: &CompiledRule<R>) -> Vec<u8> {
    assert_eq!(board.channels(), rule.channels, "board and kernel channel counts differ");
    let mut out = vec![0u8; board.height() * board.width()];
    for r in 0..board.height() {
        for c in 0..board.width() {
            out[r * board.width() + c] = rule.activation_at(board, r, c);
        }
    }
    out
}

/// Result of one parallel application of a ruleset.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome<R> {
    pub next: Board,
    pub reward: R,
    /// Firing count per compiled rule, in [`Ruleset::compiled`] order.
    pub fire_counts: Vec<u32>,
}

/// Reusable delta buffer for [`step_rules_with`].
#[derive(Default, Debug)]
pub struct StepScratch {
    delta: Vec<i16>,
}

/// Apply every compiled rule to `board` in parallel.
pub fn step_rules<R: Reward>(board: &Board, rules: &Ruleset<R>) -> StepOutcome<R> {
    step_rules_with(board, rules, &mut StepScratch::default())
}

pub fn step_rules_with<R: Reward>(board: &Board, rules: &Ruleset<R>, scratch: &mut StepScratch) -> StepOutcome<R> {
    assert_eq!(board.channels(), rules.tiles.len(), "board and ruleset tile counts differ");
    let (h, w) = (board.height(), board.width());
    let plane = h * w;
    scratch.delta.clear();
    scratch.delta.resize(board.bit_len(), 0);
    let mut reward = R::zero();
    let mut fire_counts = Vec::with_capacity(rules.compiled.len());
    for cr in &rules.compiled {
        let mut fired = 0u32;
        if cr.threshold > 0 && cr.rows <= h && cr.cols <= w {
            for r in 0..=h - cr.rows {
                for c in 0..=w - cr.cols {
                    if cr.activation_at(board, r, c) == 0 {
                        continue;
                    }
                    fired += 1;
                    // transposed convolution: scatter K_O from the anchor
                    for &(ch, dr, dc, weight) in &cr.taps_out {
                        scratch.delta[ch * plane + (r + dr) * w + c + dc] += i16::from(weight);
                    }
                }
            }
        }
        if fired > 0 {
            reward = reward + R::from_u32(fired).expect("fire count fits the reward type") * cr.reward;
        }
        fire_counts.push(fired);
    }
    let mut next = board.clone();
    next.apply_clamped(&scratch.delta);
    StepOutcome { next, reward, fire_counts }
}

/// Ordered rules plus their compiled rotations.
#[derive(Clone, Debug, PartialEq)]
pub struct Ruleset<R> {
    tiles: TileSet,
    rules: Vec<RewriteRule<R>>,
    compiled: Vec<CompiledRule<R>>,
}

impl<R: Reward> Ruleset<R> {
    pub fn new(tiles: TileSet, rules: Vec<RewriteRule<R>>) -> Result<Self> {
        let mut compiled = Vec::new();
        for (i, rule) in rules.iter().enumerate() {
            if rules[..i].iter().any(|r| r.name == rule.name) {
                return Err(Error::rule(&rule.name, "duplicate rule name"));
            }
            compiled.extend(compile(rule, &tiles, i)?);
        }
        Ok(Ruleset { tiles, rules, compiled })
    }

    pub fn tiles(&self) -> &TileSet {
        &self.tiles
    }

    pub fn rules(&self) -> &[RewriteRule<R>] {
        &self.rules
    }

    pub fn compiled(&self) -> &[CompiledRule<R>] {
        &self.compiled
    }

    pub fn mutable_rules(&self) -> impl Iterator<Item = &RewriteRule<R>> {
        self.rules.iter().filter(|r| r.mutable)
    }

    pub fn into_rules(self) -> Vec<RewriteRule<R>> {
        self.rules
    }

    /// Sum compiled-rule fire counts back onto their source rules.
    pub fn fires_per_rule(&self, fire_counts: &[u32]) -> Vec<u32> {
        let mut out = vec![0; self.rules.len()];
        for (cr, &n) in self.compiled.iter().zip(fire_counts) {
            out[cr.source] += n;
        }
        out
    }
}

fn cells(tiles: &[usize]) -> TileMask {
    tiles.iter().fold(0, |m, &t| m | (1 << t))
}

/// The three fixed maze rules.
///
/// * `move`: `[player][force floor] -> [floor][player]`, rotating.
/// * `eat`: `[player][force food] -> [floor][player]`, rotating, reward 1.
/// * `bump`: `[force wall] -> [wall]`.
///
/// The player cell holds no floor; the floor is restored when it leaves.
pub fn base_rules<R: Reward>() -> Vec<RewriteRule<R>> {
    let step = |target: usize| {
        (
            Pattern::from_rows(&[&[cells(&[PLAYER]), cells(&[FORCE, target])]]).expect("1x2"),
            Pattern::from_rows(&[&[cells(&[FLOOR]), cells(&[PLAYER])]]).expect("1x2"),
        )
    };
    let (move_in, move_out) = step(FLOOR);
    let (eat_in, eat_out) = step(FOOD);
    let bump_in = Pattern::from_rows(&[&[cells(&[FORCE, WALL])]]).expect("1x1");
    let bump_out = Pattern::from_rows(&[&[cells(&[WALL])]]).expect("1x1");
    vec![
        RewriteRule::new("move", move_in, move_out, R::zero()).rotating(true).mutable(false),
        RewriteRule::new("eat", eat_in, eat_out, R::one()).rotating(true).mutable(false),
        RewriteRule::new("bump", bump_in, bump_out, R::zero()).mutable(false),
    ]
}

/// Base maze rules followed by `noop_rules` empty mutable `3 × 3` rules.
pub fn base_maze_ruleset<R: Reward>(tiles: &TileSet, noop_rules: usize) -> Result<Ruleset<R>> {
    let mut rules = base_rules();
    rules.extend((0..noop_rules).map(|i| RewriteRule::noop(format!("noop{i}"), NOOP_RULE_SIDE, NOOP_RULE_SIDE)));
    Ruleset::new(tiles.clone(), rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Orientation;

    fn tiles() -> TileSet {
        TileSet::default()
    }

    fn maze_rules() -> Ruleset<f64> {
        base_maze_ruleset(&tiles(), DEFAULT_NOOP_RULES).unwrap()
    }

    #[test]
    fn move_rule_compiles_to_four_rotations() {
        let rule = &base_rules::<f64>()[0];
        let compiled = compile(rule, &tiles(), 0).unwrap();
        assert_eq!(compiled.len(), 4);
        let shapes: Vec<_> = compiled.iter().map(|c| (c.rows(), c.cols())).collect();
        assert_eq!(shapes, vec![(1, 2), (2, 1), (1, 2), (2, 1)]);
        for cr in &compiled {
            assert_eq!(cr.threshold(), 3);
            assert_eq!(cr.threshold() as i32, cr.kernel_in().iter().map(|&v| v as i32).sum::<i32>());
            assert!(cr.kernel_out().iter().all(|v| (-1..=1).contains(v)));
        }
    }

    #[test]
    fn single_food_threshold_is_one() {
        let p = Pattern::from_rows(&[&[cells(&[FOOD])]]).unwrap();
        let rule = RewriteRule::new("f", p.clone(), Pattern::empty(1, 1).unwrap(), 0.0);
        let cr = compile(&rule, &tiles(), 0).unwrap();
        assert_eq!(cr[0].threshold(), 1);
    }

    #[test]
    fn symmetric_rotations_collapse() {
        let p = Pattern::from_rows(&[&[cells(&[FOOD])]]).unwrap();
        let rule = RewriteRule::new("f", p, Pattern::empty(1, 1).unwrap(), 0.0).rotating(true);
        assert_eq!(compile(&rule, &tiles(), 0).unwrap().len(), 1);
    }

    #[test]
    fn out_of_range_tile_names_rule() {
        let p = Pattern::from_rows(&[&[1 << 12]]).unwrap();
        let rule = RewriteRule::new("bad", p, Pattern::empty(1, 1).unwrap(), 0.0);
        match compile(&rule, &tiles(), 0) {
            Err(Error::Rule { rule, .. }) => assert_eq!(rule, "bad"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let rule = RewriteRule::new("x", Pattern::empty(1, 2).unwrap(), Pattern::empty(2, 1).unwrap(), 0.0);
        assert!(rule.validate(&tiles()).is_err());
    }

    #[test]
    fn empty_board_never_matches() {
        let board = Board::new(6, 6, 10).unwrap();
        for cr in maze_rules().compiled() {
            assert!(match_map(&board, cr).iter().all(|&v| v == 0));
        }
    }

    #[test]
    fn single_patch_activates_at_anchor() {
        let mut board = Board::new(5, 5, 10).unwrap();
        board.set(2, 1, PLAYER, true);
        board.set(2, 2, FORCE, true);
        board.set(2, 2, FLOOR, true);
        let rs = maze_rules();
        let east = &rs.compiled()[0];
        let map = match_map(&board, east);
        assert_eq!(map.iter().filter(|&&v| v == 1).count(), 1);
        assert_eq!(map[2 * 5 + 1], 1);
    }

    #[test]
    fn patches_do_not_match_off_board() {
        // player on the last column: the east move rule has no room
        let mut board = Board::new(3, 3, 10).unwrap();
        board.set(1, 2, PLAYER, true);
        board.set(1, 0, FORCE, true);
        board.set(1, 0, FLOOR, true);
        let rs = maze_rules();
        for cr in rs.compiled() {
            assert!(match_map(&board, cr).iter().all(|&v| v == 0));
        }
    }

    #[test]
    fn noop_rules_leave_board_alone() {
        let noops: Vec<RewriteRule<f64>> = (0..4).map(|i| RewriteRule::noop(format!("n{i}"), 3, 3)).collect();
        let rs = Ruleset::new(tiles(), noops).unwrap();
        let mut board = Board::new(5, 5, 10).unwrap();
        board.set(1, 1, PLAYER, true);
        board.set(2, 3, FOOD, true);
        let out = step_rules(&board, &rs);
        assert_eq!(out.next, board);
        assert_eq!(out.reward, 0.0);
        assert!(out.fire_counts.iter().all(|&n| n == 0));
    }

    fn facing(board: &mut Board, pos: (usize, usize), dir: Orientation) {
        let (r, c) = dir.step_from(pos, board.height(), board.width()).unwrap();
        board.set(r, c, FORCE, true);
    }

    #[test]
    fn eating_food_rewards_one() {
        let mut board = Board::new(4, 4, 10).unwrap();
        board.set(1, 1, PLAYER, true);
        board.set(1, 2, FOOD, true);
        facing(&mut board, (1, 1), Orientation::East);
        let out = step_rules(&board, &maze_rules());
        assert_eq!(out.reward, 1.0);
        assert!(!out.next.get(1, 2, FOOD));
        assert!(out.next.get(1, 2, PLAYER));
        assert!(out.next.get(1, 1, FLOOR));
    }

    #[test]
    fn moving_onto_floor() {
        let mut board = Board::new(4, 4, 10).unwrap();
        board.set(2, 1, PLAYER, true);
        board.set(1, 1, FLOOR, true);
        facing(&mut board, (2, 1), Orientation::North);
        let out = step_rules(&board, &maze_rules());
        assert_eq!(out.next.first_active(PLAYER), Some((1, 1)));
        assert!(!out.next.get(1, 1, FORCE));
        assert!(!out.next.get(1, 1, FLOOR));
        assert!(out.next.get(2, 1, FLOOR));
        assert_eq!(out.reward, 0.0);
    }

    #[test]
    fn walls_block_and_eat_force() {
        let mut board = Board::new(4, 4, 10).unwrap();
        board.set(2, 1, PLAYER, true);
        board.set(2, 2, WALL, true);
        facing(&mut board, (2, 1), Orientation::East);
        let out = step_rules(&board, &maze_rules());
        assert_eq!(out.next.first_active(PLAYER), Some((2, 1)));
        assert_eq!(out.next.count(FORCE), 0);
        assert!(out.next.get(2, 2, WALL));
    }

    #[test]
    fn reward_counts_each_firing() {
        // two food tiles each with an adjacent force, two separate players
        let mut board = Board::new(5, 5, 10).unwrap();
        for r in [0, 3] {
            board.set(r, 0, PLAYER, true);
            board.set(r, 1, FOOD, true);
            board.set(r, 1, FORCE, true);
        }
        let rs = maze_rules();
        let out = step_rules(&board, &rs);
        assert_eq!(out.reward, 2.0);
        let per_rule = rs.fires_per_rule(&out.fire_counts);
        assert_eq!(per_rule[1], 2);
    }

    #[test]
    fn base_ruleset_shape() {
        let rs = maze_rules();
        assert_eq!(rs.rules().len(), 8);
        assert_eq!(rs.rules().iter().filter(|r| !r.mutable).count(), 3);
        assert_eq!(rs.mutable_rules().count(), 5);
        // move 4 + eat 4 + bump 1 + five non-rotating no-ops
        assert_eq!(rs.compiled().len(), 14);
    }

    #[test]
    fn duplicate_names_rejected() {
        let rules: Vec<RewriteRule<f64>> = vec![RewriteRule::noop("a", 1, 1), RewriteRule::noop("a", 1, 1)];
        assert!(Ruleset::new(tiles(), rules).is_err());
    }
}
