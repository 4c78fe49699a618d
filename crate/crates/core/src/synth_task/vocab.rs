use serde::{Deserialize, Serialize};

/// Token id layout. Ids 0..3 are specials, then the two variants of each
/// content word interleave (neutral, accented), then the timbre alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    pub n_content_words: usize,
    pub n_timbre_symbols: usize,
}

impl Vocab {
    pub const STOP: usize = 0;
    pub const SEP: usize = 1;
    pub const GEN: usize = 2;
    const BASE: usize = 3;

    pub fn new(n_content_words: usize, n_timbre_symbols: usize) -> Self {
        Vocab {
            n_content_words,
            n_timbre_symbols,
        }
    }

    pub fn size(&self) -> usize {
        Self::BASE + 2 * self.n_content_words + self.n_timbre_symbols
    }

    pub fn neutral_id(&self, word: usize) -> usize {
        debug_assert!(word < self.n_content_words);
        Self::BASE + 2 * word
    }

    pub fn accented_id(&self, word: usize) -> usize {
        debug_assert!(word < self.n_content_words);
        Self::BASE + 2 * word + 1
    }

    pub fn timbre_id(&self, symbol: usize) -> usize {
        debug_assert!(symbol < self.n_timbre_symbols);
        Self::BASE + 2 * self.n_content_words + symbol
    }

    pub fn is_content(&self, id: usize) -> bool {
        (Self::BASE..Self::BASE + 2 * self.n_content_words).contains(&id)
    }

    pub fn is_timbre(&self, id: usize) -> bool {
        let start = Self::BASE + 2 * self.n_content_words;
        (start..start + self.n_timbre_symbols).contains(&id)
    }

    /// Canonical word index of a content-variant id.
    pub fn canonical_word(&self, id: usize) -> Option<usize> {
        self.is_content(id).then(|| (id - Self::BASE) / 2)
    }

    /// Whether a content-variant id is the accented form.
    pub fn is_accented_variant(&self, id: usize) -> Option<bool> {
        self.is_content(id).then(|| (id - Self::BASE) % 2 == 1)
    }

    pub fn timbre_index(&self, id: usize) -> Option<usize> {
        self.is_timbre(id)
            .then(|| id - Self::BASE - 2 * self.n_content_words)
    }

    /// Fraction of content tokens that are accented variants, with the
    /// content-token count. None when the sequence has no content tokens.
    pub fn accented_fraction(&self, seq: &[usize]) -> Option<(f64, usize)> {
        let mut content = 0usize;
        let mut accented = 0usize;
        for &id in seq {
            if let Some(acc) = self.is_accented_variant(id) {
                content += 1;
                if acc {
                    accented += 1;
                }
            }
        }
        (content > 0).then(|| (accented as f64 / content as f64, content))
    }

    /// Histogram over the timbre alphabet of all timbre tokens in `seq`.
    pub fn timbre_histogram(&self, seq: &[usize]) -> Vec<f64> {
        let mut hist = vec![0.0; self.n_timbre_symbols];
        for &id in seq {
            if let Some(t) = self.timbre_index(id) {
                hist[t] += 1.0;
            }
        }
        hist
    }

    /// Canonical word indices of the content tokens, in order.
    pub fn canonical_content(&self, seq: &[usize]) -> Vec<usize> {
        seq.iter().filter_map(|&id| self.canonical_word(id)).collect()
    }
}
