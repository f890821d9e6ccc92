//! Segmentation lattice of one word: forward–backward and Viterbi.

use super::UnigramModel;

/// An edge spelling `word[bounds[start]..bounds[end]]`. `piece` is `None`
/// for the unknown-character edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub start: usize,
    pub end: usize,
    pub piece: Option<u32>,
    pub log_prob: f64,
}

#[derive(Debug, Clone)]
pub struct Lattice<'a> {
    word: &'a str,
    /// Byte offset of every character boundary, `len + 1` entries.
    bounds: Vec<usize>,
    edges: Vec<Edge>,
    /// Edge indices grouped by start node.
    from: Vec<Vec<usize>>,
    /// Edge indices grouped by end node.
    to: Vec<Vec<usize>>,
}

/// Best path found by [`Lattice::viterbi`].
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub score: f64,
    pub edges: Vec<Edge>,
}

impl Path {
    pub fn uses_unk(&self) -> bool {
        self.edges.iter().any(|e| e.piece.is_none())
    }
}

pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

impl<'a> Lattice<'a> {
    /// Every vocabulary piece matching a substring of `word`, plus an
    /// unknown edge at each character no single-character piece covers
    /// when the model has an unknown token.
    pub fn build(model: &UnigramModel, word: &'a str) -> Self {
        Self::with_unk(model, word, true)
    }

    /// As [`Lattice::build`], with unknown edges only when `unk` is set.
    pub fn with_unk(model: &UnigramModel, word: &'a str, unk: bool) -> Self {
        let bounds: Vec<usize> = word
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(word.len()))
            .collect();
        let n = bounds.len() - 1;
        let mut lattice = Lattice {
            word,
            bounds,
            edges: Vec::new(),
            from: vec![Vec::new(); n + 1],
            to: vec![Vec::new(); n + 1],
        };
        let max_len = model.max_piece_chars();
        for start in 0..n {
            let mut has_char = false;
            for end in start + 1..=(start + max_len).min(n) {
                let piece = &word[lattice.bounds[start]..lattice.bounds[end]];
                if let Some(id) = model.id(piece) {
                    has_char |= end == start + 1;
                    lattice.push(Edge {
                        start,
                        end,
                        piece: Some(id),
                        log_prob: model.log_prob(id),
                    });
                }
            }
            if unk && !has_char && model.unk_token().is_some() {
                lattice.push(Edge {
                    start,
                    end: start + 1,
                    piece: None,
                    log_prob: model.unk_log_prob(),
                });
            }
        }
        lattice
    }

    fn push(&mut self, edge: Edge) {
        let i = self.edges.len();
        self.from[edge.start].push(i);
        self.to[edge.end].push(i);
        self.edges.push(edge);
    }

    pub fn word(&self) -> &'a str {
        self.word
    }

    /// Number of characters, i.e. the index of the final node.
    pub fn len(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn surface(&self, edge: &Edge) -> &'a str {
        &self.word[self.bounds[edge.start]..self.bounds[edge.end]]
    }

    /// Log of the total probability of all paths and the posterior marginal
    /// of each edge, or `None` when no path spells the word.
    pub fn forward_backward(&self) -> Option<(f64, Vec<f64>)> {
        let n = self.len();
        let mut alpha = vec![f64::NEG_INFINITY; n + 1];
        alpha[0] = 0.0;
        for node in 1..=n {
            for &e in &self.to[node] {
                let edge = &self.edges[e];
                alpha[node] = log_add(alpha[node], alpha[edge.start] + edge.log_prob);
            }
        }
        let z = alpha[n];
        if z == f64::NEG_INFINITY {
            return None;
        }
        let mut beta = vec![f64::NEG_INFINITY; n + 1];
        beta[n] = 0.0;
        for node in (0..n).rev() {
            for &e in &self.from[node] {
                let edge = &self.edges[e];
                beta[node] = log_add(beta[node], edge.log_prob + beta[edge.end]);
            }
        }
        let marginals = self
            .edges
            .iter()
            .map(|e| (alpha[e.start] + e.log_prob + beta[e.end] - z).exp())
            .collect();
        Some((z, marginals))
    }

    /// Highest-scoring path, ignoring edges of piece `exclude`. Ties go to
    /// fewer pieces, then to the longer leftmost piece.
    pub fn viterbi(&self, exclude: Option<u32>) -> Option<Path> {
        let n = self.len();
        // best[i]: (score, pieces, edge) of the best path from node i to n.
        let mut best: Vec<Option<(f64, usize, usize)>> = vec![None; n + 1];
        best[n] = Some((0.0, 0, usize::MAX));
        for node in (0..n).rev() {
            let mut here: Option<(f64, usize, usize)> = None;
            for &e in &self.from[node] {
                let edge = &self.edges[e];
                if exclude.is_some() && edge.piece == exclude {
                    continue;
                }
                let Some((rest, count, _)) = best[edge.end] else {
                    continue;
                };
                let cand = (edge.log_prob + rest, count + 1, e);
                let better = match here {
                    None => true,
                    Some((score, pieces, cur)) => {
                        cand.0 > score
                            || (cand.0 == score
                                && (cand.1 < pieces
                                    || (cand.1 == pieces && edge.end > self.edges[cur].end)))
                    }
                };
                if better {
                    here = Some(cand);
                }
            }
            best[node] = here;
        }
        let (score, _, _) = best[0]?;
        let mut edges = Vec::new();
        let mut node = 0;
        while node < n {
            let (_, _, e) = best[node].expect("reachable node");
            edges.push(self.edges[e]);
            node = self.edges[e].end;
        }
        Some(Path { score, edges })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(pieces: &[(&str, f64)]) -> UnigramModel {
        UnigramModel::new(
            pieces.iter().map(|&(p, lp)| (p.to_string(), lp)).collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn log_add_matches_direct_sum() {
        let got = log_add(0.3f64.ln(), 0.2f64.ln());
        assert!((got - 0.5f64.ln()).abs() < 1e-12);
        assert_eq!(log_add(f64::NEG_INFINITY, -1.0), -1.0);
    }

    #[test]
    fn every_path_spells_the_word() {
        let m = model(&[
            ("a", -1.0),
            ("b", -1.0),
            ("ab", -1.5),
            ("ba", -2.0),
            ("aba", -3.0),
        ]);
        let lat = Lattice::build(&m, "abab");
        for e in lat.edges() {
            assert_eq!(lat.surface(e), m.piece(e.piece.unwrap()).unwrap());
        }
        assert_eq!(lat.edges().len(), 4 + 2 + 1 + 1);
    }

    #[test]
    fn forward_backward_by_hand() {
        // Paths of "aa": a+a (0.25) and aa (0.5); Z = 0.75.
        let m = model(&[("a", 0.5f64.ln()), ("aa", 0.5f64.ln())]);
        let lat = Lattice::build(&m, "aa");
        let (z, marg) = lat.forward_backward().unwrap();
        assert!((z - 0.75f64.ln()).abs() < 1e-12);
        for (e, p) in lat.edges().iter().zip(&marg) {
            let want = if e.end - e.start == 2 {
                2.0 / 3.0
            } else {
                1.0 / 3.0
            };
            assert!((p - want).abs() < 1e-12, "{e:?} {p}");
        }
    }

    #[test]
    fn viterbi_prefers_fewer_pieces_on_ties() {
        let m = model(&[("a", -1.0), ("aa", -2.0)]);
        let path = Lattice::build(&m, "aa").viterbi(None).unwrap();
        assert_eq!(path.edges.len(), 1);
    }

    #[test]
    fn viterbi_prefers_longer_leftmost_on_ties() {
        let m = model(&[
            ("a", -1.0),
            ("b", -1.0),
            ("c", -1.0),
            ("ab", -1.0),
            ("bc", -1.0),
        ]);
        let lat = Lattice::build(&m, "abc");
        let path = lat.viterbi(None).unwrap();
        let pieces: Vec<_> = path.edges.iter().map(|e| lat.surface(e)).collect();
        assert_eq!(pieces, vec!["ab", "c"]);
    }

    #[test]
    fn exclusion_reroutes() {
        let m = model(&[("a", -1.0), ("aa", -0.5)]);
        let lat = Lattice::build(&m, "aa");
        let aa = m.id("aa");
        assert_eq!(lat.viterbi(None).unwrap().score, -0.5);
        assert_eq!(lat.viterbi(aa).unwrap().score, -2.0);
    }

    #[test]
    fn uncoverable_without_unk() {
        let m = model(&[("a", -1.0)]);
        let lat = Lattice::build(&m, "ab");
        assert!(lat.viterbi(None).is_none());
        assert!(lat.forward_backward().is_none());
    }
}
