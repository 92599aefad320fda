//! Packed-bit representability engine.
//!
//! A [`RepTable`] answers "is `n` a sum of `k` weights" for every `n` in
//! `[1, N]` at once. Tables are built with word-level shift-OR over layered
//! bit arrays; [`brute_force_oracle`] is an independent enumeration used to
//! check them on small instances.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bits::BitSet;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"REPT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepMode {
    /// Exactly `k` pairwise-distinct summands.
    ExactDistinct,
    /// Exactly `k` summands, repetition allowed.
    ExactWeak,
    /// Between 1 and `k` summands, repetition allowed.
    AtMostWeak,
}

impl RepMode {
    pub fn code(self) -> u8 {
        match self {
            RepMode::ExactDistinct => 0,
            RepMode::ExactWeak => 1,
            RepMode::AtMostWeak => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(RepMode::ExactDistinct),
            1 => Some(RepMode::ExactWeak),
            2 => Some(RepMode::AtMostWeak),
            _ => None,
        }
    }
}

impl std::str::FromStr for RepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-distinct" => Ok(RepMode::ExactDistinct),
            "exact-weak" => Ok(RepMode::ExactWeak),
            "atmost-weak" | "at-most-weak" => Ok(RepMode::AtMostWeak),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepTable {
    mode: RepMode,
    k: u32,
    horizon: u64,
    /// Bit `n` set iff `n` is representable; bit 0 is unused.
    flags: BitSet,
    source_digest: [u8; 32],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExceptionalSet {
    pub values: Vec<u64>,
    /// Largest non-representable `n` in `[1, horizon]`.
    pub last_exception: Option<u64>,
}

/// Outcome of the midpoint test `2 W_n = W_i + W_j` with `i != j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MidpointVerdict {
    /// 1-based indices `i < n < j` with `W_i + W_j = 2 W_n`.
    Representable { i: usize, j: usize },
    /// Every candidate partner lies below the horizon and none matched.
    NotRepresentable,
    /// `2 W_n` is beyond the horizon and no partner was found in the data.
    Undecided,
}

pub fn weights_digest(weights: &[u64]) -> [u8; 32] {
    let mut h = Sha256::new();
    for w in weights {
        h.update(w.to_le_bytes());
    }
    h.finalize().into()
}

impl RepTable {
    pub fn mode(&self) -> RepMode {
        self.mode
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn flags(&self) -> &BitSet {
        &self.flags
    }

    pub fn source_digest(&self) -> &[u8; 32] {
        &self.source_digest
    }

    pub fn digest_hex(&self) -> String {
        self.source_digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// True when this table was built from exactly `weights`.
    pub fn is_built_from(&self, weights: &[u64]) -> bool {
        self.source_digest == weights_digest(weights)
    }

    #[inline]
    pub fn is_representable(&self, n: u64) -> bool {
        n >= 1 && n <= self.horizon && self.flags.contains(n as usize)
    }

    pub fn representable(&self) -> impl Iterator<Item = u64> + '_ {
        self.flags.iter_ones().map(|i| i as u64)
    }

    /// Binary export: `"REPT"`, mode byte, three zero bytes, `k` and `N` as
    /// u32 LE, then the flag words (bit `n` of the array is flag `n`) as u64 LE.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let horizon = u32::try_from(self.horizon).map_err(|_| {
            Error::InvalidArgument(format!("horizon {} does not fit in 32 bits", self.horizon))
        })?;
        let mut header = [0u8; 16];
        header[..4].copy_from_slice(MAGIC);
        header[4] = self.mode.code();
        header[8..12].copy_from_slice(&self.k.to_le_bytes());
        header[12..16].copy_from_slice(&horizon.to_le_bytes());
        out.write_all(&header)?;
        for w in self.flags.words() {
            out.write_all(&w.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a table written by [`RepTable::write_to`]. The digest is not
    /// part of the format, so the result carries an all-zero digest.
    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut header = [0u8; 16];
        input.read_exact(&mut header)?;
        if &header[..4] != MAGIC {
            return Err(Error::Parse("missing REPT magic".into()));
        }
        let mode = RepMode::from_code(header[4])
            .ok_or_else(|| Error::Parse(format!("unknown mode byte {}", header[4])))?;
        let k = u32::from_le_bytes(header[8..12].try_into().unwrap());
        let horizon = u32::from_le_bytes(header[12..16].try_into().unwrap()) as u64;
        let len = horizon as usize + 1;
        let mut words = vec![0u64; len.div_ceil(64)];
        let mut buf = [0u8; 8];
        for w in &mut words {
            input.read_exact(&mut buf)?;
            *w = u64::from_le_bytes(buf);
        }
        let flags = BitSet::from_words(words, len).expect("word count matches length");
        Ok(Self {
            mode,
            k,
            horizon,
            flags,
            source_digest: [0; 32],
        })
    }
}

fn check_weights(weights: &[u64], k: u32) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if weights.first() == Some(&0) {
        return Err(Error::InvalidArgument("weights must be positive".into()));
    }
    if weights.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "weights must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn table_len(horizon: u64) -> usize {
    usize::try_from(horizon).expect("horizon fits in memory") + 1
}

/// Sums of exactly `k` pairwise-distinct weights.
///
/// Layers `B_0..B_k` hold the sums of `j` distinct weights seen so far. Each
/// new weight `w` updates `B_j |= B_{j-1} << w` for `j = k` down to 1, so `w`
/// is used at most once per sum. `hi[j]` bounds the top bit of layer `j`,
/// which limits every shift to the words that can be nonzero.
pub fn representable_exact_distinct(weights: &[u64], k: u32, horizon: u64) -> Result<RepTable> {
    check_weights(weights, k)?;
    let len = table_len(horizon);
    let k = k as usize;
    let mut layers: Vec<BitSet> = (0..=k).map(|_| BitSet::new(len)).collect();
    layers[0].insert(0);
    let mut hi: Vec<Option<usize>> = vec![None; k + 1];
    hi[0] = Some(0);
    for &w in weights.iter().take_while(|&&w| w <= horizon) {
        let w = w as usize;
        for j in (1..=k).rev() {
            let Some(src_hi) = hi[j - 1] else { continue };
            if w > len - 1 {
                continue;
            }
            let (lower, upper) = layers.split_at_mut(j);
            upper[0].or_shifted(&lower[j - 1], w, src_hi);
            let top = (src_hi + w).min(len - 1);
            hi[j] = Some(hi[j].map_or(top, |h| h.max(top)));
        }
    }
    let mut flags = layers.swap_remove(k);
    flags.remove(0);
    Ok(RepTable {
        mode: RepMode::ExactDistinct,
        k: k as u32,
        horizon,
        flags,
        source_digest: weights_digest(weights),
    })
}

/// `S_1..S_k` with `S_1` the weight indicator and `S_j = S_{j-1} + S_1`.
fn weak_layers(weights: &[u64], k: usize, horizon: u64) -> Vec<BitSet> {
    let len = table_len(horizon);
    let usable: Vec<usize> = weights
        .iter()
        .take_while(|&&w| w <= horizon)
        .map(|&w| w as usize)
        .collect();
    let indicator = BitSet::from_indices(len, usable.iter().copied());
    let mut layers = vec![indicator];
    for _ in 1..k {
        let prev = layers.last().unwrap();
        let mut next = BitSet::new(len);
        if let Some(prev_hi) = prev.max_one() {
            for &w in &usable {
                next.or_shifted(prev, w, prev_hi);
            }
        }
        layers.push(next);
    }
    layers
}

/// Sums of exactly `k` weights with repetition.
pub fn representable_weak(weights: &[u64], k: u32, horizon: u64) -> Result<RepTable> {
    check_weights(weights, k)?;
    let flags = weak_layers(weights, k as usize, horizon).pop().unwrap();
    Ok(RepTable {
        mode: RepMode::ExactWeak,
        k,
        horizon,
        flags,
        source_digest: weights_digest(weights),
    })
}

/// Sums of at most `k` (at least one) weights with repetition.
pub fn representable_at_most_weak(weights: &[u64], k: u32, horizon: u64) -> Result<RepTable> {
    check_weights(weights, k)?;
    let mut layers = weak_layers(weights, k as usize, horizon).into_iter();
    let mut flags = layers.next().unwrap();
    for layer in layers {
        flags.union_with(&layer);
    }
    Ok(RepTable {
        mode: RepMode::AtMostWeak,
        k,
        horizon,
        flags,
        source_digest: weights_digest(weights),
    })
}

pub fn representable(weights: &[u64], k: u32, horizon: u64, mode: RepMode) -> Result<RepTable> {
    match mode {
        RepMode::ExactDistinct => representable_exact_distinct(weights, k, horizon),
        RepMode::ExactWeak => representable_weak(weights, k, horizon),
        RepMode::AtMostWeak => representable_at_most_weak(weights, k, horizon),
    }
}

pub fn exceptional_set(table: &RepTable, lo: u64, hi: u64) -> Result<ExceptionalSet> {
    let horizon = table.horizon;
    if lo < 1 || lo > hi || hi > horizon {
        return Err(Error::RangeOutOfBounds { lo, hi, horizon });
    }
    let values = (lo..=hi).filter(|&n| !table.flags.contains(n as usize)).collect();
    let last_exception = (1..=horizon)
        .rev()
        .find(|&n| !table.flags.contains(n as usize));
    Ok(ExceptionalSet {
        values,
        last_exception,
    })
}

/// Brown's criterion for completeness of a finite increasing list:
/// `a_1 = 1` and `a_k <= 1 + a_1 + ... + a_{k-1}` for every `k`.
pub fn brown_complete(weights: &[u64]) -> Result<bool> {
    if weights.is_empty() {
        return Err(Error::InvalidArgument("empty weight list".into()));
    }
    if weights.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "weights must be strictly increasing".into(),
        ));
    }
    let mut prefix: u128 = 0;
    for &a in weights {
        if a as u128 > prefix + 1 {
            return Ok(false);
        }
        prefix += a as u128;
    }
    Ok(true)
}

/// Decides `2 W_n = W_i + W_j` for distinct `i, j` (1-based `n`).
///
/// Any such pair has `i < n < j`, so the search walks `W_n - W_i` upward
/// and looks for `W_n + (W_n - W_i)` among the later weights. The verdict is
/// final when `2 W_n <= horizon`, since then every possible partner lies in
/// the truncated data.
pub fn midpoint_representable(weights: &[u64], n: usize, horizon: u64) -> Result<MidpointVerdict> {
    if n == 0 || n > weights.len() {
        return Err(Error::IndexOutOfBounds {
            index: n,
            len: weights.len(),
        });
    }
    let later = &weights[n..];
    Ok(midpoint_search(weights, n, horizon, |v| {
        later.binary_search(&v).ok().map(|pos| n + pos + 1)
    }))
}

pub(crate) fn midpoint_search(
    weights: &[u64],
    n: usize,
    horizon: u64,
    mut find_later: impl FnMut(u64) -> Option<usize>,
) -> MidpointVerdict {
    let wn = weights[n - 1];
    let last = weights.last().copied().unwrap_or(0);
    for i in (1..n).rev() {
        let target = 2 * wn - weights[i - 1];
        if target > last {
            break;
        }
        if let Some(j) = find_later(target) {
            return MidpointVerdict::Representable { i, j };
        }
    }
    if 2 * wn <= horizon {
        MidpointVerdict::NotRepresentable
    } else {
        MidpointVerdict::Undecided
    }
}

/// Ground truth by enumeration: is `n` a sum of `k` weights in `mode`?
pub fn brute_force_oracle(weights: &[u64], k: u32, n: u64, mode: RepMode) -> bool {
    let mut ws: Vec<u64> = weights.to_vec();
    ws.sort_unstable();
    ws.dedup();
    match mode {
        RepMode::ExactDistinct => search(&ws, 0, k, n, false),
        RepMode::ExactWeak => search(&ws, 0, k, n, true),
        RepMode::AtMostWeak => (1..=k).any(|c| search(&ws, 0, c, n, true)),
    }
}

/// Sums of between 1 and `k` distinct weights. Only the oracle offers this
/// notion; no fast table is built for it.
pub fn brute_force_at_most_distinct(weights: &[u64], k: u32, n: u64) -> bool {
    let mut ws: Vec<u64> = weights.to_vec();
    ws.sort_unstable();
    ws.dedup();
    (1..=k).any(|c| search(&ws, 0, c, n, false))
}

fn search(ws: &[u64], from: usize, count: u32, target: u64, repeat: bool) -> bool {
    if count == 0 {
        return target == 0;
    }
    for idx in from..ws.len() {
        let w = ws[idx];
        if w > target {
            break;
        }
        let next = if repeat { idx } else { idx + 1 };
        if search(ws, next, count - 1, target - w, repeat) {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ones(t: &RepTable) -> Vec<u64> {
        t.representable().collect()
    }

    #[test]
    fn powers_of_two_pairs() {
        let t = representable_exact_distinct(&[1, 2, 4, 8], 2, 12).unwrap();
        assert_eq!(ones(&t), vec![3, 5, 6, 9, 10, 12]);
        assert!(!t.is_representable(7));
        let e = exceptional_set(&t, 1, 12).unwrap();
        assert_eq!(e.values, vec![1, 2, 4, 7, 8, 11]);
        assert_eq!(e.last_exception, Some(11));
    }

    #[test]
    fn single_weight_has_no_distinct_pairs() {
        let t = representable_exact_distinct(&[1], 2, 50).unwrap();
        assert!(ones(&t).is_empty());
    }

    #[test]
    fn one_to_ten_triples_match_oracle() {
        let ws: Vec<u64> = (1..=10).collect();
        let t = representable_exact_distinct(&ws, 3, 30).unwrap();
        for n in 1..=30 {
            assert_eq!(
                t.is_representable(n),
                brute_force_oracle(&ws, 3, n, RepMode::ExactDistinct),
                "n = {n}"
            );
        }
        // 6 = 1+2+3 up to 27 = 8+9+10
        assert_eq!(ones(&t), (6..=27).collect::<Vec<_>>());
    }

    #[test]
    fn weak_examples() {
        assert_eq!(ones(&representable_weak(&[1, 3], 2, 20).unwrap()), vec![2, 4, 6]);
        assert_eq!(ones(&representable_weak(&[2, 3], 2, 20).unwrap()), vec![4, 5, 6]);
        assert_eq!(
            ones(&representable_at_most_weak(&[2, 3], 2, 20).unwrap()),
            vec![2, 3, 4, 5, 6]
        );
        assert_eq!(
            ones(&representable_at_most_weak(&[5], 3, 40).unwrap()),
            vec![5, 10, 15]
        );
        let ws = [3, 7, 11, 40];
        assert_eq!(ones(&representable_at_most_weak(&ws, 1, 40).unwrap()), ws.to_vec());
        assert_eq!(ones(&representable_weak(&ws, 1, 40).unwrap()), ws.to_vec());
    }

    #[test]
    fn weak_fifty_random_weights_match_oracle() {
        use rand::seq::index::sample;
        let mut rng = crate::seed::rng_from_seed(5);
        let mut ws: Vec<u64> = sample(&mut rng, 500, 50).into_iter().map(|i| i as u64 + 1).collect();
        ws.sort_unstable();
        let t = representable_weak(&ws, 3, 1500).unwrap();
        for n in 1..=1500 {
            assert_eq!(t.is_representable(n), brute_force_oracle(&ws, 3, n, RepMode::ExactWeak), "n = {n}");
        }
    }

    #[test]
    fn even_weights_leave_odd_exceptions() {
        let ws: Vec<u64> = (1..=30).map(|i| 2 * i).collect();
        let t = representable_exact_distinct(&ws, 2, 60).unwrap();
        let e = exceptional_set(&t, 1, 60).unwrap();
        let odds: Vec<u64> = (1..60).step_by(2).collect();
        assert!(odds.iter().all(|o| e.values.contains(o)));
        assert!(exceptional_set(&t, 0, 5).is_err());
        assert!(exceptional_set(&t, 5, 61).is_err());
    }

    #[test]
    fn all_true_table_has_no_exceptions() {
        let t = representable_at_most_weak(&[1], 5, 5).unwrap();
        let e = exceptional_set(&t, 1, 5).unwrap();
        assert!(e.values.is_empty());
        assert_eq!(e.last_exception, None);
    }

    #[test]
    fn brown_examples() {
        assert!(brown_complete(&[1, 2, 4, 8]).unwrap());
        assert!(!brown_complete(&[1, 2, 5]).unwrap());
        assert!(!brown_complete(&[2, 3]).unwrap());
        assert!(brown_complete(&[]).is_err());
    }

    #[test]
    fn midpoint_examples() {
        assert_eq!(
            midpoint_representable(&[1, 2, 3, 4, 5], 3, 5).unwrap(),
            MidpointVerdict::Representable { i: 2, j: 4 }
        );
        assert_eq!(
            midpoint_representable(&[1, 10, 100], 2, 100).unwrap(),
            MidpointVerdict::NotRepresentable
        );
        assert_eq!(
            midpoint_representable(&[1, 10, 100], 2, 19).unwrap(),
            MidpointVerdict::Undecided
        );
        assert!(midpoint_representable(&[1, 2], 3, 5).is_err());
        assert!(midpoint_representable(&[1, 2], 0, 5).is_err());
    }

    #[test]
    fn oracle_examples() {
        assert!(!brute_force_oracle(&[1, 2, 4, 8], 2, 7, RepMode::ExactDistinct));
        assert!(brute_force_oracle(&[1, 3], 2, 2, RepMode::ExactWeak));
        assert!(!brute_force_oracle(&[1, 3], 2, 2, RepMode::ExactDistinct));
        for n in 1..20 {
            assert_eq!(brute_force_oracle(&[2, 5, 9], 1, n, RepMode::ExactDistinct), [2, 5, 9].contains(&n));
        }
        assert!(brute_force_at_most_distinct(&[1, 2, 4], 2, 4));
        assert!(!brute_force_at_most_distinct(&[1, 2, 4], 2, 7));
        assert!(brute_force_at_most_distinct(&[1, 2, 4], 3, 7));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(representable_exact_distinct(&[1, 2], 0, 10).is_err());
        assert!(representable_exact_distinct(&[2, 1], 2, 10).is_err());
        assert!(representable_weak(&[0, 1], 2, 10).is_err());
    }

    #[test]
    fn export_header_layout() {
        let t = representable_exact_distinct(&[1, 2, 4, 8], 2, 12).unwrap();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"REPT");
        assert_eq!(buf[4], 0);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 12);
        assert_eq!(buf.len(), 16 + 8);
        let word = u64::from_le_bytes(buf[16..24].try_into().unwrap());
        assert_eq!(word, (1 << 3) | (1 << 5) | (1 << 6) | (1 << 9) | (1 << 10) | (1 << 12));
        assert!(RepTable::read_from(&b"REPX\0\0\0\0\0\0\0\0\0\0\0\0"[..]).is_err());
    }

    #[test]
    fn digest_binds_table_to_weights() {
        let t = representable_weak(&[1, 5, 9], 2, 30).unwrap();
        assert!(t.is_built_from(&[1, 5, 9]));
        assert!(!t.is_built_from(&[1, 5, 10]));
        assert_eq!(t.digest_hex().len(), 64);
    }

    fn weight_list() -> impl Strategy<Value = Vec<u64>> {
        proptest::collection::btree_set(1u64..60, 1..12).prop_map(|s| s.into_iter().collect())
    }

    proptest! {
        #[test]
        fn table_export_round_trips(ws in weight_list(), k in 1u32..4, mode_code in 0u8..3) {
            let mode = RepMode::from_code(mode_code).unwrap();
            let t = representable(&ws, k, 150, mode).unwrap();
            let mut buf = Vec::new();
            t.write_to(&mut buf).unwrap();
            let back = RepTable::read_from(buf.as_slice()).unwrap();
            prop_assert_eq!(back.flags(), t.flags());
            prop_assert_eq!((back.mode(), back.k(), back.horizon()), (mode, k, 150));
        }

        #[test]
        fn modes_nest_and_respect_gcd(ws in weight_list(), k in 1u32..5, scale in 1u64..4) {
            let ws: Vec<u64> = ws.iter().map(|w| w * scale).collect();
            let horizon = 200;
            let d = representable_exact_distinct(&ws, k, horizon).unwrap();
            let w = representable_weak(&ws, k, horizon).unwrap();
            let a = representable_at_most_weak(&ws, k, horizon).unwrap();
            let g = ws.iter().fold(0, |g, &x| num_integer::gcd(g, x));
            for n in 1..=horizon {
                if d.is_representable(n) { prop_assert!(w.is_representable(n)); }
                if w.is_representable(n) {
                    prop_assert!(a.is_representable(n));
                    prop_assert_eq!(n % g, 0);
                    prop_assert!(n >= k as u64 * ws[0]);
                }
            }
        }

        #[test]
        fn adding_a_weight_is_monotone(ws in weight_list(), extra in 1u64..60, k in 1u32..4, mode_code in 0u8..3) {
            let mode = RepMode::from_code(mode_code).unwrap();
            let mut more = ws.clone();
            if !more.contains(&extra) {
                more.push(extra);
                more.sort_unstable();
            }
            let before = representable(&ws, k, 200, mode).unwrap();
            let after = representable(&more, k, 200, mode).unwrap();
            for n in before.representable() {
                prop_assert!(after.is_representable(n));
            }
        }

        #[test]
        fn midpoint_matches_pair_scan(gaps in proptest::collection::vec(1u64..6, 2..40), extra in 0u64..20) {
            let ws: Vec<u64> = gaps.iter().scan(0, |s, g| { *s += g; Some(*s) }).collect();
            let horizon = ws.last().unwrap() + extra;
            for n in 1..=ws.len() {
                let wn = ws[n - 1];
                let pair = (0..ws.len()).any(|i| (0..ws.len()).any(|j| i != j && ws[i] + ws[j] == 2 * wn));
                match midpoint_representable(&ws, n, horizon).unwrap() {
                    MidpointVerdict::Representable { i, j } => {
                        prop_assert!(pair);
                        prop_assert!(i < n && n < j);
                        prop_assert_eq!(ws[i - 1] + ws[j - 1], 2 * wn);
                    }
                    MidpointVerdict::NotRepresentable => {
                        prop_assert!(2 * wn <= horizon);
                        prop_assert!(!pair);
                    }
                    MidpointVerdict::Undecided => prop_assert!(2 * wn > horizon && !pair),
                }
            }
        }
    }
}
