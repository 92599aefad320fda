//! Packed bit arrays with word-level shift-OR.

const WORD: usize = 64;

/// Fixed-length packed boolean array. Bits past `len` are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitSet {
    words: Vec<u64>,
    len: usize,
}

impl std::fmt::Debug for BitSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BitSet")
            .field("len", &self.len)
            .field("ones", &self.count_ones())
            .finish()
    }
}

impl BitSet {
    pub fn new(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(WORD)],
            len,
        }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(len: usize, indices: I) -> Self {
        let mut set = Self::new(len);
        for i in indices {
            set.insert(i);
        }
        set
    }

    pub fn from_words(words: Vec<u64>, len: usize) -> Option<Self> {
        if words.len() != len.div_ceil(WORD) {
            return None;
        }
        let mut set = Self { words, len };
        set.mask_tail();
        Some(set)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.len && (self.words[i / WORD] >> (i % WORD)) & 1 != 0
    }

    /// Sets bit `i`; indices past the end are ignored.
    #[inline]
    pub fn insert(&mut self, i: usize) {
        if i < self.len {
            self.words[i / WORD] |= 1 << (i % WORD);
        }
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        if i < self.len {
            self.words[i / WORD] &= !(1 << (i % WORD));
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * WORD + bit)
            })
        })
    }

    pub fn union_with(&mut self, other: &BitSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        self.mask_tail();
    }

    /// `self |= (other >> 0) << shift`, reading only bits `0..=src_hi` of
    /// `other` (bits above `src_hi` must be zero). Results past `len` drop.
    pub fn or_shifted(&mut self, other: &BitSet, shift: usize, src_hi: usize) {
        if shift >= self.len || other.is_empty() {
            return;
        }
        let ws = shift / WORD;
        let bs = shift % WORD;
        let dst_words = self.words.len();
        let src_words = (src_hi.min(other.len - 1) / WORD + 1).min(dst_words - ws);
        let src = &other.words[..src_words];
        let dst = &mut self.words[ws..];
        if bs == 0 {
            for (d, s) in dst.iter_mut().zip(src) {
                *d |= s;
            }
        } else {
            let back = WORD - bs;
            dst[0] |= src[0] << bs;
            for (d, pair) in dst[1..].iter_mut().zip(src.windows(2)) {
                *d |= (pair[1] << bs) | (pair[0] >> back);
            }
            if src_words < dst.len() {
                dst[src_words] |= src[src_words - 1] >> back;
            }
        }
        self.mask_tail();
    }

    /// Highest set bit, if any.
    pub fn max_one(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .rev()
            .find(|(_, &w)| w != 0)
            .map(|(i, &w)| i * WORD + (WORD - 1 - w.leading_zeros() as usize))
    }

    fn mask_tail(&mut self) {
        let rem = self.len % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn insert_contains_count() {
        let mut b = BitSet::new(130);
        b.insert(0);
        b.insert(64);
        b.insert(129);
        b.insert(500);
        assert!(b.contains(64) && b.contains(129) && !b.contains(1));
        assert_eq!(b.count_ones(), 3);
        assert_eq!(b.iter_ones().collect::<Vec<_>>(), vec![0, 64, 129]);
        assert_eq!(b.max_one(), Some(129));
        b.remove(129);
        assert_eq!(b.max_one(), Some(64));
    }

    proptest! {
        #[test]
        fn or_shifted_matches_naive(
            src in proptest::collection::btree_set(0usize..300, 0..40),
            dst in proptest::collection::btree_set(0usize..300, 0..40),
            shift in 0usize..320,
            len in 1usize..300,
        ) {
            let src_set = BitSet::from_indices(300, src.iter().copied());
            let mut got = BitSet::from_indices(len, dst.iter().copied());
            let hi = src_set.max_one().unwrap_or(0);
            got.or_shifted(&src_set, shift, hi);
            let want = BitSet::from_indices(
                len,
                dst.iter().copied().chain(src.iter().map(|s| s + shift)),
            );
            prop_assert_eq!(got, want);
        }
    }
}
