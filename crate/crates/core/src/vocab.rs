use std::collections::HashMap;

use indexmap::IndexMap;

use crate::error::{Error, Result};

/// Dense id <-> piece bijection.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    pieces: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from an ordered piece list; duplicates are an error.
    pub fn from_pieces<I, S>(pieces: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::new();
        for piece in pieces {
            let piece = piece.into();
            if vocab.contains(&piece) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate vocabulary piece {piece:?}"
                )));
            }
            vocab.push(piece);
        }
        Ok(vocab)
    }

    /// Append `piece` if absent; returns its id either way.
    pub fn push(&mut self, piece: impl Into<String>) -> u32 {
        let piece = piece.into();
        if let Some(&id) = self.index.get(&piece) {
            return id;
        }
        let id = self.pieces.len() as u32;
        self.index.insert(piece.clone(), id);
        self.pieces.push(piece);
        id
    }

    pub fn id(&self, piece: &str) -> Option<u32> {
        self.index.get(piece).copied()
    }

    pub fn piece(&self, id: u32) -> Option<&str> {
        self.pieces.get(id as usize).map(String::as_str)
    }

    pub fn piece_checked(&self, id: u32) -> Result<&str> {
        self.piece(id).ok_or(Error::IdOutOfRange {
            id,
            size: self.len(),
        })
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.index.contains_key(piece)
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    /// A JSON object mapping piece to id, one entry per line in id order.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{\n");
        for (id, p) in self.pieces.iter().enumerate() {
            let sep = if id + 1 == self.pieces.len() { "" } else { "," };
            let key = serde_json::to_string(p).expect("strings serialize");
            out.push_str(&format!("  {key}: {id}{sep}\n"));
        }
        out.push_str("}\n");
        out
    }

    /// Parse a piece-to-id JSON object whose ids are exactly `0..n`.
    pub fn from_json(text: &str, file: &str) -> Result<Self> {
        let map: IndexMap<String, u32> = serde_json::from_str(text).map_err(|e| {
            Error::parse(
                file,
                e.line(),
                format!("expected a piece-to-id object: {e}"),
            )
        })?;
        let mut slots: Vec<Option<String>> = vec![None; map.len()];
        for (piece, id) in map {
            match slots.get_mut(id as usize) {
                Some(slot @ None) => *slot = Some(piece),
                Some(Some(other)) => {
                    return Err(Error::parse(
                        file,
                        0,
                        format!("id {id} is shared by {other:?} and {piece:?}"),
                    ))
                }
                None => {
                    return Err(Error::parse(
                        file,
                        0,
                        format!("id {id} of {piece:?} leaves a gap in the ids"),
                    ))
                }
            }
        }
        Self::from_pieces(slots.into_iter().map(|p| p.expect("every slot filled")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_dense_and_stable() {
        let mut v = Vocab::new();
        assert_eq!(v.push("a"), 0);
        assert_eq!(v.push("b"), 1);
        assert_eq!(v.push("a"), 0);
        assert_eq!(v.len(), 2);
        assert_eq!(v.piece(1), Some("b"));
        assert!(matches!(
            v.piece_checked(2),
            Err(Error::IdOutOfRange { id: 2, size: 2 })
        ));
    }

    #[test]
    fn json_round_trip() {
        let v = Vocab::from_pieces(["<unk>", " a", "\n", "ཀ", "\"q"]).unwrap();
        let text = v.to_json();
        assert_eq!(text.lines().count(), 7);
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["ཀ"], 3);
        assert_eq!(Vocab::from_json(&text, "vocab.json").unwrap(), v);
    }

    #[test]
    fn ids_must_be_dense() {
        assert!(Vocab::from_json(r#"{"a": 0, "b": 2}"#, "v").is_err());
        assert!(Vocab::from_json(r#"{"a": 0, "b": 0}"#, "v").is_err());
        let v = Vocab::from_json(r#"{"b": 1, "a": 0}"#, "v").unwrap();
        assert_eq!(v.pieces(), ["a", "b"]);
        let err = Vocab::from_json("{\n\"a\": x}", "v").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
