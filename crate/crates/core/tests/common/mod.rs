#![allow(dead_code, unused_imports)]

mod oracle;

pub use oracle::*;

pub mod strategies {
    use proptest::prelude::*;
    use ras_core::{Alpha, Symbol, WordSeq};

    fn letter(i: u8) -> Symbol {
        Symbol::Word(["a", "b", "c"][i as usize].into())
    }

    pub fn reference(max_len: usize) -> impl Strategy<Value = WordSeq> {
        prop::collection::vec(0u8..3, 1..=max_len).prop_map(|v| v.into_iter().map(letter).collect())
    }

    pub fn plain(max_len: usize) -> impl Strategy<Value = WordSeq> {
        prop::collection::vec(0u8..3, 0..=max_len).prop_map(|v| v.into_iter().map(letter).collect())
    }

    /// Unmerged hypothesis where roughly a quarter of positions are placeholders.
    pub fn raw_hypothesis(max_len: usize) -> impl Strategy<Value = WordSeq> {
        prop::collection::vec(0u8..4, 0..=max_len).prop_map(|v| {
            v.into_iter()
                .map(|i| if i == 3 { Symbol::Placeholder } else { letter(i) })
                .collect()
        })
    }

    pub fn hypothesis(max_len: usize) -> impl Strategy<Value = WordSeq> {
        raw_hypothesis(max_len).prop_map(|h| h.normalized())
    }

    pub fn alpha() -> impl Strategy<Value = Alpha> {
        (0.01f64..0.99).prop_map(|a| Alpha::new(a).unwrap())
    }
}
