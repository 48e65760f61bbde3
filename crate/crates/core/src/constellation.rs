//! Dual-mode 3D constellations, the index lookup table, and the mapping
//! between subblock bits and 3×n transmit matrices.
//!
//! Positions and symbol indices are 0-based throughout. Table position `1`
//! in the usual 1-based notation is position `0` here, and symbol `S^1` is
//! symbol index `0`.

use rand::Rng;

use crate::{Error, Result};

/// Rows of a transmit/receive matrix: one per spatial dimension of a 3D point.
pub const DIMS: usize = 3;

/// Largest `p` that [`System::enumerate`] callers are allowed to ask for.
pub const MAX_EXHAUSTIVE_BITS: usize = 24;

/// System parameters `(n, k, s_A, s_B)` and the derived bit budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SystemConfig {
    pub n: usize,
    pub k: usize,
    pub s_a: usize,
    pub s_b: usize,
    /// Index bits.
    pub p1: usize,
    /// Symbol bits.
    pub p2: usize,
    /// Total bits per subblock.
    pub p: usize,
}

impl SystemConfig {
    pub fn new(n: usize, k: usize, s_a: usize, s_b: usize) -> Result<Self> {
        let (p1, p2, p) = bit_budget(n, k, s_a, s_b)?;
        if s_a != s_b {
            return Err(Error::InvalidConfig(format!(
                "s_A = {s_a} and s_B = {s_b} must be equal"
            )));
        }
        Ok(SystemConfig {
            n,
            k,
            s_a,
            s_b,
            p1,
            p2,
            p,
        })
    }

    /// `(n, k, s_A, s_B) = (4, 2, 2, 2)`.
    pub fn scenario1() -> Self {
        Self::new(4, 2, 2, 2).expect("scenario 1 is valid")
    }

    /// `(n, k, s_A, s_B) = (4, 2, 4, 4)`.
    pub fn scenario2() -> Self {
        Self::new(4, 2, 4, 4).expect("scenario 2 is valid")
    }

    pub fn bits_a(&self) -> usize {
        log2_exact(self.s_a)
    }

    pub fn bits_b(&self) -> usize {
        log2_exact(self.s_b)
    }
}

/// Returns `(p1, p2, p)` with `p1 = floor(log2 C(n,k))`,
/// `p2 = k·log2 s_A + (n−k)·log2 s_B` and `p = p1 + p2`.
pub fn bit_budget(n: usize, k: usize, s_a: usize, s_b: usize) -> Result<(usize, usize, usize)> {
    if k == 0 || k >= n {
        return Err(Error::InvalidConfig(format!(
            "need 0 < k < n, got n={n}, k={k}"
        )));
    }
    for s in [s_a, s_b] {
        if s < 2 || !s.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "constellation size {s} is not a power of two >= 2"
            )));
        }
    }
    let combos =
        binomial(n, k).ok_or_else(|| Error::InvalidConfig(format!("C({n},{k}) overflows")))?;
    let p1 = floor_log2(combos);
    let p2 = k * log2_exact(s_a) + (n - k) * log2_exact(s_b);
    Ok((p1, p2, p1 + p2))
}

pub(crate) fn binomial(n: usize, k: usize) -> Option<usize> {
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

fn floor_log2(v: usize) -> usize {
    (usize::BITS - 1 - v.leading_zeros()) as usize
}

fn log2_exact(s: usize) -> usize {
    s.trailing_zeros() as usize
}

/// MSB-first bits to an integer.
pub fn bits_to_index(bits: &[bool]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

/// Integer to `width` MSB-first bits.
pub fn index_to_bits(value: usize, width: usize) -> Vec<bool> {
    (0..width).rev().map(|i| (value >> i) & 1 == 1).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    A,
    B,
}

/// One set of 3D signal points.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation3D {
    pub mode: Mode,
    pub points: Vec<[f64; 3]>,
}

impl Constellation3D {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean_energy(&self) -> f64 {
        self.points
            .iter()
            .map(|p| sq_dist(p, &[0.0; 3]))
            .sum::<f64>()
            / self.points.len() as f64
    }

    /// Smallest pairwise distance inside this set.
    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                best = best.min(sq_dist(a, b).sqrt());
            }
        }
        best
    }

    /// Smallest distance between a point of `self` and a point of `other`.
    pub fn cross_distance(&self, other: &Constellation3D) -> f64 {
        let mut best = f64::INFINITY;
        for a in &self.points {
            for b in &other.points {
                best = best.min(sq_dist(a, b).sqrt());
            }
        }
        best
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    let d2 = a[2] - b[2];
    d0 * d0 + d1 * d1 + d2 * d2
}

/// Source of the two constellations for a given size.
pub trait Geometry {
    fn constellations(&self, s: usize) -> Result<(Constellation3D, Constellation3D)>;
}

/// Antipodal axis pairs for `s = 2`, a regular tetrahedron and its negation
/// for `s = 4`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultGeometry;

impl Geometry for DefaultGeometry {
    fn constellations(&self, s: usize) -> Result<(Constellation3D, Constellation3D)> {
        default_constellations(s)
    }
}

pub fn default_constellations(s: usize) -> Result<(Constellation3D, Constellation3D)> {
    let (a, b) = match s {
        2 => (
            vec![[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]],
            vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
        ),
        4 => {
            let r = 1.0 / 3f64.sqrt();
            let a = vec![[r, r, r], [r, -r, -r], [-r, r, -r], [-r, -r, r]];
            let b = a.iter().map(|p| [-p[0], -p[1], -p[2]]).collect();
            (a, b)
        }
        other => return Err(Error::UnsupportedConstellation(other)),
    };
    Ok((
        Constellation3D {
            mode: Mode::A,
            points: a,
        },
        Constellation3D {
            mode: Mode::B,
            points: b,
        },
    ))
}

/// Index of the closest point and its squared distance. Ties go to the
/// lowest index.
pub fn nearest_symbol(point: &[f64; 3], constellation: &Constellation3D) -> (usize, f64) {
    argmin(constellation.points.iter().map(|c| sq_dist(point, c)))
}

/// Position and value of the smallest element; first one wins on ties.
pub(crate) fn argmin(values: impl IntoIterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best
}

/// The `2^p1` legal mode-A position sets, indexed by the index bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexLookup {
    n: usize,
    k: usize,
    patterns: Vec<Vec<usize>>,
}

impl IndexLookup {
    pub fn new(config: &SystemConfig) -> Self {
        let patterns = if (config.n, config.k) == (4, 2) {
            vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![0, 3]]
        } else {
            lexicographic_subsets(config.n, config.k, 1 << config.p1)
        };
        IndexLookup {
            n: config.n,
            k: config.k,
            patterns,
        }
    }

    pub fn patterns(&self) -> &[Vec<usize>] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn pattern(&self, index: usize) -> &[usize] {
        &self.patterns[index]
    }

    pub fn bits_to_pattern(&self, index_bits: &[bool]) -> &[usize] {
        &self.patterns[bits_to_index(index_bits)]
    }

    /// Position of `pattern` in the table. The pattern may be given in any
    /// order.
    pub fn pattern_index(&self, pattern: &[usize]) -> Result<usize> {
        let mut sorted = pattern.to_vec();
        sorted.sort_unstable();
        self.patterns
            .iter()
            .position(|p| *p == sorted)
            .ok_or(Error::IllegalPattern(sorted))
    }

    pub fn pattern_to_bits(&self, pattern: &[usize]) -> Result<Vec<bool>> {
        let width = floor_log2(self.patterns.len());
        Ok(index_to_bits(self.pattern_index(pattern)?, width))
    }

    /// Per-position mode for the pattern at `index`.
    pub fn modes(&self, index: usize) -> Vec<Mode> {
        let mut modes = vec![Mode::B; self.n];
        for &pos in &self.patterns[index] {
            modes[pos] = Mode::A;
        }
        modes
    }
}

fn lexicographic_subsets(n: usize, k: usize, limit: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(limit);
    let mut combo: Vec<usize> = (0..k).collect();
    loop {
        out.push(combo.clone());
        if out.len() == limit {
            return out;
        }
        // advance to the next k-subset in lexicographic order
        let mut i = k;
        while i > 0 && combo[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        combo[i - 1] += 1;
        for j in i..k {
            combo[j] = combo[j - 1] + 1;
        }
    }
}

/// Bits of one subblock. `symbol_bits` holds the `k` mode-A symbols (in
/// ascending position order) followed by the `n−k` mode-B symbols, each in
/// natural binary, MSB first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubblockBits {
    pub index_bits: Vec<bool>,
    pub symbol_bits: Vec<bool>,
}

impl SubblockBits {
    pub fn from_flat(bits: &[bool], config: &SystemConfig) -> Result<Self> {
        if bits.len() != config.p {
            return Err(Error::BitLength {
                expected: config.p,
                actual: bits.len(),
            });
        }
        Ok(SubblockBits {
            index_bits: bits[..config.p1].to_vec(),
            symbol_bits: bits[config.p1..].to_vec(),
        })
    }

    /// The `value`-th subblock in bit-lexicographic order.
    pub fn from_index(value: usize, config: &SystemConfig) -> Self {
        let flat = index_to_bits(value, config.p);
        SubblockBits::from_flat(&flat, config).expect("width matches")
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, config: &SystemConfig) -> Self {
        SubblockBits {
            index_bits: (0..config.p1).map(|_| rng.random()).collect(),
            symbol_bits: (0..config.p2).map(|_| rng.random()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.index_bits.len() + self.symbol_bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<bool> {
        let mut v = self.index_bits.clone();
        v.extend_from_slice(&self.symbol_bits);
        v
    }

    pub fn bit_errors(&self, other: &SubblockBits) -> usize {
        let diff = |a: &[bool], b: &[bool]| a.iter().zip(b).filter(|(x, y)| x != y).count();
        diff(&self.index_bits, &other.index_bits) + diff(&self.symbol_bits, &other.symbol_bits)
    }
}

/// Symbol-level view of a subblock: which lookup entry is used and which
/// symbol index sits on each subcarrier (within that subcarrier's own
/// constellation).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubblockSymbols {
    pub pattern: usize,
    pub modes: Vec<Mode>,
    pub symbols: Vec<usize>,
}

/// Real 3×n transmit matrix, row-major: entry `(i, α)` at `i * n + α`.
#[derive(Debug, Clone, PartialEq)]
pub struct TxBlock {
    pub n: usize,
    pub data: Vec<f64>,
}

impl TxBlock {
    pub fn zeros(n: usize) -> Self {
        TxBlock {
            n,
            data: vec![0.0; DIMS * n],
        }
    }

    #[inline]
    pub fn get(&self, dim: usize, pos: usize) -> f64 {
        self.data[dim * self.n + pos]
    }

    pub fn column(&self, pos: usize) -> [f64; 3] {
        [self.get(0, pos), self.get(1, pos), self.get(2, pos)]
    }

    pub fn set_column(&mut self, pos: usize, p: &[f64; 3]) {
        for (dim, v) in p.iter().enumerate() {
            self.data[dim * self.n + pos] = *v;
        }
    }
}

/// A configured mapper: system parameters, lookup table and the two
/// constellations.
#[derive(Debug, Clone)]
pub struct System {
    pub config: SystemConfig,
    pub lookup: IndexLookup,
    pub a: Constellation3D,
    pub b: Constellation3D,
}

impl System {
    pub fn new(config: SystemConfig) -> Result<Self> {
        Self::with_geometry(config, &DefaultGeometry)
    }

    pub fn with_geometry(config: SystemConfig, geometry: &dyn Geometry) -> Result<Self> {
        let (a, _) = geometry.constellations(config.s_a)?;
        let (_, b) = geometry.constellations(config.s_b)?;
        Self::with_constellations(config, a, b)
    }

    pub fn with_constellations(
        config: SystemConfig,
        a: Constellation3D,
        b: Constellation3D,
    ) -> Result<Self> {
        if a.len() != config.s_a || b.len() != config.s_b {
            return Err(Error::InvalidConstellation(format!(
                "sizes ({}, {}) do not match s_A={}, s_B={}",
                a.len(),
                b.len(),
                config.s_a,
                config.s_b
            )));
        }
        let min_dist = a
            .min_distance()
            .min(b.min_distance())
            .min(a.cross_distance(&b));
        if min_dist.is_nan() || min_dist <= 0.0 {
            return Err(Error::InvalidConstellation(
                "points must be distinct within and across the two sets".into(),
            ));
        }
        Ok(System {
            lookup: IndexLookup::new(&config),
            config,
            a,
            b,
        })
    }

    pub fn constellation(&self, mode: Mode) -> &Constellation3D {
        match mode {
            Mode::A => &self.a,
            Mode::B => &self.b,
        }
    }

    pub fn symbols_of(&self, bits: &SubblockBits) -> Result<SubblockSymbols> {
        let cfg = &self.config;
        if bits.index_bits.len() != cfg.p1 || bits.symbol_bits.len() != cfg.p2 {
            return Err(Error::BitLength {
                expected: cfg.p,
                actual: bits.len(),
            });
        }
        let pattern = bits_to_index(&bits.index_bits);
        let modes = self.lookup.modes(pattern);
        let (ba, bb) = (cfg.bits_a(), cfg.bits_b());
        let mut symbols = vec![0; cfg.n];
        let mut cursor = 0;
        for mode in [Mode::A, Mode::B] {
            let width = if mode == Mode::A { ba } else { bb };
            for pos in (0..cfg.n).filter(|&pos| modes[pos] == mode) {
                symbols[pos] = bits_to_index(&bits.symbol_bits[cursor..cursor + width]);
                cursor += width;
            }
        }
        Ok(SubblockSymbols {
            pattern,
            modes,
            symbols,
        })
    }

    /// Inverse of [`System::symbols_of`]. `symbols[pos]` must be a valid
    /// index into the constellation of the mode the pattern assigns to `pos`.
    pub fn bits_of(&self, pattern: usize, symbols: &[usize]) -> SubblockBits {
        let cfg = &self.config;
        let modes = self.lookup.modes(pattern);
        let mut symbol_bits = Vec::with_capacity(cfg.p2);
        for mode in [Mode::A, Mode::B] {
            let width = if mode == Mode::A {
                cfg.bits_a()
            } else {
                cfg.bits_b()
            };
            for pos in (0..cfg.n).filter(|&pos| modes[pos] == mode) {
                symbol_bits.extend(index_to_bits(symbols[pos], width));
            }
        }
        SubblockBits {
            index_bits: index_to_bits(pattern, cfg.p1),
            symbol_bits,
        }
    }

    pub fn encode(&self, bits: &SubblockBits) -> Result<TxBlock> {
        Ok(self.modulate(&self.symbols_of(bits)?))
    }

    pub fn modulate(&self, syms: &SubblockSymbols) -> TxBlock {
        let mut tx = TxBlock::zeros(self.config.n);
        for pos in 0..self.config.n {
            let point = &self.constellation(syms.modes[pos]).points[syms.symbols[pos]];
            tx.set_column(pos, point);
        }
        tx
    }

    /// Recovers bits from a transmit matrix by snapping every column to the
    /// nearest point of either constellation. Fails when the resulting mode
    /// split is not a lookup entry.
    pub fn decode(&self, tx: &TxBlock) -> Result<SubblockBits> {
        let n = self.config.n;
        let mut a_positions = Vec::with_capacity(self.config.k);
        let symbols: Vec<usize> = (0..n)
            .map(|pos| {
                let col = tx.column(pos);
                let (ia, da) = nearest_symbol(&col, &self.a);
                let (ib, db) = nearest_symbol(&col, &self.b);
                if da <= db {
                    a_positions.push(pos);
                    ia
                } else {
                    ib
                }
            })
            .collect();
        let pattern = self.lookup.pattern_index(&a_positions)?;
        Ok(self.bits_of(pattern, &symbols))
    }

    /// Every subblock in bit-lexicographic order.
    pub fn enumerate(&self) -> Result<Vec<(SubblockBits, TxBlock)>> {
        let p = self.config.p;
        if p > MAX_EXHAUSTIVE_BITS {
            return Err(Error::TooManyCandidates(p));
        }
        (0..1usize << p)
            .map(|v| {
                let bits = SubblockBits::from_index(v, &self.config);
                let tx = self.encode(&bits)?;
                Ok((bits, tx))
            })
            .collect()
    }
}
