use std::collections::HashMap;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;

use crate::error::{Error, Result};

/// Byte sequences ranked by merge priority; the rank doubles as the id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct RankTable {
    ranks: HashMap<Vec<u8>, u32>,
    tokens: HashMap<u32, Vec<u8>>,
}

impl RankTable {
    pub(crate) fn parse(text: &str, file: &str) -> Result<Self> {
        let mut ranks = HashMap::new();
        let mut tokens = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (b64, rank) = line
                .split_once(' ')
                .ok_or_else(|| Error::parse(file, line_no, "expected `base64 rank`"))?;
            let bytes = STANDARD
                .decode(b64)
                .map_err(|e| Error::parse(file, line_no, format!("bad base64: {e}")))?;
            let rank: u32 = rank
                .trim()
                .parse()
                .map_err(|e| Error::parse(file, line_no, format!("bad rank: {e}")))?;
            if bytes.is_empty() {
                return Err(Error::parse(file, line_no, "empty token"));
            }
            if tokens.insert(rank, bytes.clone()).is_some() {
                return Err(Error::parse(
                    file,
                    line_no,
                    format!("duplicate rank {rank}"),
                ));
            }
            if ranks.insert(bytes, rank).is_some() {
                return Err(Error::parse(file, line_no, "duplicate token"));
            }
        }
        let mut table = Self { ranks, tokens };
        table.add_missing_bytes();
        Ok(table)
    }

    /// Single bytes absent from the file get ids after the highest rank so
    /// that every input can be encoded.
    fn add_missing_bytes(&mut self) {
        let mut next = self.tokens.keys().max().map_or(0, |m| m + 1);
        for b in 0..=255u8 {
            if !self.ranks.contains_key(&[b][..]) {
                self.ranks.insert(vec![b], next);
                self.tokens.insert(next, vec![b]);
                next += 1;
            }
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.tokens.len()
    }

    pub(crate) fn token_bytes(&self, id: u32) -> Option<&[u8]> {
        self.tokens.get(&id).map(Vec::as_slice)
    }

    /// Greedy lowest-rank merging over the bytes of one piece.
    pub(crate) fn encode_piece(&self, piece: &[u8], out: &mut Vec<u32>) {
        if let Some(&id) = self.ranks.get(piece) {
            out.push(id);
            return;
        }
        let mut bounds: Vec<usize> = (0..=piece.len()).collect();
        loop {
            let mut best: Option<(u32, usize)> = None;
            for i in 0..bounds.len().saturating_sub(2) {
                if let Some(&r) = self.ranks.get(&piece[bounds[i]..bounds[i + 2]]) {
                    if best.is_none_or(|(br, _)| r < br) {
                        best = Some((r, i));
                    }
                }
            }
            match best {
                Some((_, i)) => {
                    bounds.remove(i + 1);
                }
                None => break,
            }
        }
        out.extend(bounds.windows(2).map(|w| self.ranks[&piece[w[0]..w[1]]]));
    }
}
