// SPDX-License-Identifier: Apache-2.0

use alloc::vec;
use alloc::vec::Vec;

use crate::mutgen::MutantId;

/// The set of mutant ids a process stands for.
///
/// The main process starts with every id as a bit vector; forked children
/// get the (small) ids of one equivalence class as a sorted list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MutantIdSet {
    Bits { words: Vec<u64>, len: usize },
    List(Vec<MutantId>),
}

impl MutantIdSet {
    /// `{0, 1, ..., n-1}`.
    pub fn all(n: u32) -> Self {
        let n = n as usize;
        let mut words = vec![u64::MAX; n / 64];
        if !n.is_multiple_of(64) {
            words.push((1u64 << (n % 64)) - 1);
        }
        MutantIdSet::Bits { words, len: n }
    }

    /// Builds a list set; `ids` need not be sorted.
    pub fn from_ids(mut ids: Vec<MutantId>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        MutantIdSet::List(ids)
    }

    pub fn single(id: MutantId) -> Self {
        MutantIdSet::List(vec![id])
    }

    pub fn len(&self) -> usize {
        match self {
            MutantIdSet::Bits { len, .. } => *len,
            MutantIdSet::List(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn contains(&self, id: MutantId) -> bool {
        match self {
            MutantIdSet::Bits { words, .. } => words
                .get(id.index() / 64)
                .is_some_and(|w| w & (1 << (id.index() % 64)) != 0),
            MutantIdSet::List(v) => v.binary_search(&id).is_ok(),
        }
    }

    /// Removes `id`; returns whether it was present.
    pub fn remove(&mut self, id: MutantId) -> bool {
        match self {
            MutantIdSet::Bits { words, len } => match words.get_mut(id.index() / 64) {
                Some(w) => {
                    let bit = 1 << (id.index() % 64);
                    let present = *w & bit != 0;
                    *w &= !bit;
                    *len -= present as usize;
                    present
                }
                None => false,
            },
            MutantIdSet::List(v) => match v.binary_search(&id) {
                Ok(i) => {
                    v.remove(i);
                    true
                }
                Err(_) => false,
            },
        }
    }

    /// Ids in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = MutantId> + '_ {
        let (words, list): (&[u64], &[MutantId]) = match self {
            MutantIdSet::Bits { words, .. } => (words, &[]),
            MutantIdSet::List(v) => (&[], v),
        };
        let from_bits = words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            core::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros();
                rest &= rest - 1;
                Some(MutantId(wi as u32 * 64 + b))
            })
        });
        from_bits.chain(list.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_and_remove() {
        for n in [0, 1, 63, 64, 65, 130] {
            let mut s = MutantIdSet::all(n);
            assert_eq!(s.len(), n as usize);
            assert_eq!(s.iter().count(), n as usize);
            assert!(!s.contains(MutantId(n)));
            if n > 0 {
                assert!(s.remove(MutantId(n - 1)));
                assert!(!s.remove(MutantId(n - 1)));
                assert_eq!(s.len(), n as usize - 1);
            }
        }
    }

    #[test]
    fn list_is_sorted() {
        let mut s = MutantIdSet::from_ids(vec![MutantId(9), MutantId(2), MutantId(9)]);
        assert_eq!(s.iter().collect::<Vec<_>>(), [MutantId(2), MutantId(9)]);
        assert!(s.remove(MutantId(2)));
        assert_eq!(s.len(), 1);
        assert!(s.contains(MutantId(9)));
    }
}
