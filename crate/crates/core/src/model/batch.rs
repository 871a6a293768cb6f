use super::mask::TokenBatch;
use crate::data::{BOS_ID, EOS_ID, PAD_ID};
use crate::error::{Error, Result};

/// Teacher-forcing views of a padded batch of `(source, target)` pairs.
///
/// Built from content ids (no specials); every view adds BOS/EOS itself.
#[derive(Debug, Clone)]
pub struct PairBatch {
    /// `BOS x EOS`, encoder input.
    pub src: TokenBatch,
    /// `BOS x`, estimator input.
    pub src_in: TokenBatch,
    /// `x EOS`, estimator targets with `PAD` on padded positions.
    pub src_out: Vec<usize>,
    /// `BOS y EOS`, reconstruction-stream input.
    pub tgt_full: TokenBatch,
    /// `BOS y`, translation-stream input.
    pub tgt_in: TokenBatch,
    /// `y EOS`, translation targets with `PAD` on padded positions.
    pub tgt_out: Vec<usize>,
}

fn wrap(ids: &[usize]) -> Vec<usize> {
    let mut v = Vec::with_capacity(ids.len() + 2);
    v.push(BOS_ID);
    v.extend_from_slice(ids);
    v.push(EOS_ID);
    v
}

fn shifted(seqs: &[Vec<usize>]) -> Result<(TokenBatch, Vec<usize>)> {
    let inputs: Vec<Vec<usize>> = seqs.iter().map(|s| s[..s.len() - 1].to_vec()).collect();
    let outputs: Vec<Vec<usize>> = seqs.iter().map(|s| s[1..].to_vec()).collect();
    let input = TokenBatch::from_sequences(&inputs)?;
    let targets = TokenBatch::from_sequences(&outputs)?.targets();
    Ok((input, targets))
}

impl PairBatch {
    pub fn from_pairs(pairs: &[(Vec<usize>, Vec<usize>)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Empty("pair batch"));
        }
        if pairs.iter().any(|(s, t)| s.is_empty() || t.is_empty()) {
            return Err(Error::Empty("sentence in pair batch"));
        }
        if pairs.iter().flat_map(|(s, t)| s.iter().chain(t)).any(|&id| id == PAD_ID) {
            return Err(Error::invalid("content ids must not contain PAD"));
        }
        let src_seqs: Vec<Vec<usize>> = pairs.iter().map(|(s, _)| wrap(s)).collect();
        let tgt_seqs: Vec<Vec<usize>> = pairs.iter().map(|(_, t)| wrap(t)).collect();
        let (src_in, src_out) = shifted(&src_seqs)?;
        let (tgt_in, tgt_out) = shifted(&tgt_seqs)?;
        Ok(Self {
            src: TokenBatch::from_sequences(&src_seqs)?,
            src_in,
            src_out,
            tgt_full: TokenBatch::from_sequences(&tgt_seqs)?,
            tgt_in,
            tgt_out,
        })
    }

    pub fn rows(&self) -> usize {
        self.src.rows
    }

    pub fn target_tokens(&self) -> usize {
        self.tgt_out.iter().filter(|&&t| t != PAD_ID).count()
    }

    pub fn source_tokens(&self) -> usize {
        self.src_out.iter().filter(|&&t| t != PAD_ID).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn views_line_up() {
        let b = PairBatch::from_pairs(&[(vec![5, 6], vec![7]), (vec![8], vec![9, 10, 11])]).unwrap();
        assert_eq!(b.src.row(0), &[BOS_ID, 5, 6, EOS_ID]);
        assert_eq!(b.src_in.row(1), &[BOS_ID, 8, PAD_ID]);
        assert_eq!(&b.src_out[3..], &[8, EOS_ID, PAD_ID]);
        assert_eq!(b.tgt_in.row(0), &[BOS_ID, 7, PAD_ID, PAD_ID]);
        assert_eq!(&b.tgt_out[..4], &[7, EOS_ID, PAD_ID, PAD_ID]);
        assert_eq!(b.tgt_full.len, 5);
        assert_eq!(b.target_tokens(), 2 + 4);
        assert_eq!(b.source_tokens(), 3 + 2);
    }

    #[test]
    fn rejects_empty() {
        assert!(PairBatch::from_pairs(&[]).is_err());
        assert!(PairBatch::from_pairs(&[(vec![], vec![4])]).is_err());
    }
}
