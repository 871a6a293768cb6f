use crate::data::PAD_ID;
use crate::error::{Error, Result};
use crate::numerics::AttentionGeometry;

/// Rectangular block of token ids, one padded row per sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenBatch {
    pub ids: Vec<usize>,
    pub valid: Vec<bool>,
    pub rows: usize,
    pub len: usize,
}

impl TokenBatch {
    /// Pads `seqs` on the right with `PAD` to the longest length.
    pub fn from_sequences(seqs: &[Vec<usize>]) -> Result<Self> {
        if seqs.is_empty() {
            return Err(Error::Empty("token batch"));
        }
        let len = seqs.iter().map(Vec::len).max().unwrap_or(0);
        if len == 0 {
            return Err(Error::Empty("token sequence"));
        }
        let mut ids = Vec::with_capacity(seqs.len() * len);
        let mut valid = Vec::with_capacity(seqs.len() * len);
        for s in seqs {
            ids.extend_from_slice(s);
            valid.extend(std::iter::repeat_n(true, s.len()));
            ids.extend(std::iter::repeat_n(PAD_ID, len - s.len()));
            valid.extend(std::iter::repeat_n(false, len - s.len()));
        }
        Ok(Self { ids, valid, rows: seqs.len(), len })
    }

    pub fn single(ids: &[usize]) -> Result<Self> {
        Self::from_sequences(&[ids.to_vec()])
    }

    /// Explicit ids and validity flags, e.g. to mark a position as padding
    /// without changing its id.
    pub fn with_mask(ids: Vec<usize>, valid: Vec<bool>, rows: usize) -> Result<Self> {
        if rows == 0 || ids.len() != valid.len() || !ids.len().is_multiple_of(rows) || ids.is_empty() {
            return Err(Error::invalid("token batch ids/mask/rows disagree"));
        }
        let len = ids.len() / rows;
        Ok(Self { ids, valid, rows, len })
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.ids[r * self.len..(r + 1) * self.len]
    }

    pub fn row_valid(&self, r: usize) -> &[bool] {
        &self.valid[r * self.len..(r + 1) * self.len]
    }

    /// Ids with padded positions replaced by `PAD`, used as loss targets.
    pub fn targets(&self) -> Vec<usize> {
        self.ids
            .iter()
            .zip(&self.valid)
            .map(|(&id, &v)| if v { id } else { PAD_ID })
            .collect()
    }

    pub fn real_tokens(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Copies every row `times` times consecutively.
    pub fn repeat_rows(&self, times: usize) -> Self {
        let mut ids = Vec::with_capacity(self.ids.len() * times);
        let mut valid = Vec::with_capacity(self.ids.len() * times);
        for r in 0..self.rows {
            for _ in 0..times {
                ids.extend_from_slice(self.row(r));
                valid.extend_from_slice(self.row_valid(r));
            }
        }
        Self { ids, valid, rows: self.rows * times, len: self.len }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    /// Query `i` sees keys `j <= i`.
    Causal,
    /// Query sees every valid key.
    Full,
}

/// Attention visibility: a structural kind plus per-key validity flags.
#[derive(Debug, Clone)]
pub struct AttentionMask {
    pub kind: MaskKind,
    pub rows: usize,
    pub k_len: usize,
    pub key_valid: Vec<bool>,
}

impl AttentionMask {
    pub fn causal(keys: &TokenBatch) -> Self {
        Self::new(MaskKind::Causal, keys)
    }

    pub fn full(keys: &TokenBatch) -> Self {
        Self::new(MaskKind::Full, keys)
    }

    fn new(kind: MaskKind, keys: &TokenBatch) -> Self {
        Self { kind, rows: keys.rows, k_len: keys.len, key_valid: keys.valid.clone() }
    }

    pub fn allows(&self, row: usize, query: usize, key: usize) -> bool {
        let valid = self.key_valid[row * self.k_len + key];
        match self.kind {
            MaskKind::Causal => valid && key <= query,
            MaskKind::Full => valid,
        }
    }

    pub fn geometry(&self, q_len: usize, heads: usize) -> AttentionGeometry {
        let mut allowed = Vec::with_capacity(self.rows * q_len * self.k_len);
        for r in 0..self.rows {
            for i in 0..q_len {
                for j in 0..self.k_len {
                    allowed.push(self.allows(r, i, j));
                }
            }
        }
        AttentionGeometry { batch: self.rows, q_len, k_len: self.k_len, heads, allowed }
    }
}
