//! Byte-level helpers: `<0xNN>` fallback pieces and the printable
//! byte-to-character alphabet of the vocab+merges format.

use std::collections::HashMap;
use std::sync::LazyLock;

static BYTE_TO_CHAR: LazyLock<[char; 256]> = LazyLock::new(build_byte_alphabet);
static CHAR_TO_BYTE: LazyLock<HashMap<char, u8>> = LazyLock::new(|| {
    BYTE_TO_CHAR
        .iter()
        .enumerate()
        .map(|(b, &c)| (c, b as u8))
        .collect()
});

// Printable bytes map to themselves, the rest to U+0100 onwards in byte order.
fn build_byte_alphabet() -> [char; 256] {
    let printable = |b: u8| matches!(b, b'!'..=b'~' | 0xA1..=0xAC | 0xAE..=0xFF);
    let mut table = ['\0'; 256];
    let mut next = 0u32;
    for b in 0..=255u8 {
        table[b as usize] = if printable(b) {
            char::from(b)
        } else {
            let c = char::from_u32(256 + next).expect("valid scalar");
            next += 1;
            c
        };
    }
    table
}

pub fn byte_to_char(b: u8) -> char {
    BYTE_TO_CHAR[b as usize]
}

pub fn char_to_byte(c: char) -> Option<u8> {
    CHAR_TO_BYTE.get(&c).copied()
}

/// Map raw bytes into the printable byte alphabet.
pub fn bytes_to_printable(bytes: &[u8]) -> String {
    bytes.iter().map(|&b| byte_to_char(b)).collect()
}

/// Inverse of [`bytes_to_printable`]; `None` on characters outside the alphabet.
pub fn printable_to_bytes(s: &str) -> Option<Vec<u8>> {
    s.chars().map(char_to_byte).collect()
}

/// The fallback piece for one byte, e.g. `<0xE0>`.
pub fn fallback_piece(b: u8) -> String {
    format!("<0x{b:02X}>")
}

/// Parse a `<0xNN>` piece.
pub fn parse_fallback_piece(piece: &str) -> Option<u8> {
    let hex = piece.strip_prefix("<0x")?.strip_suffix('>')?;
    if hex.len() != 2 {
        return None;
    }
    u8::from_str_radix(hex, 16).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphabet_is_a_bijection() {
        let mut seen = std::collections::HashSet::new();
        for b in 0..=255u8 {
            let c = byte_to_char(b);
            assert!(seen.insert(c));
            assert_eq!(char_to_byte(c), Some(b));
        }
        assert_eq!(byte_to_char(b' '), 'Ġ');
        assert_eq!(byte_to_char(b'a'), 'a');
        assert_eq!(byte_to_char(b'\n'), 'Ċ');
    }

    #[test]
    fn fallback_pieces() {
        assert_eq!(fallback_piece(0xE0), "<0xE0>");
        assert_eq!(parse_fallback_piece("<0xBD>"), Some(0xBD));
        assert_eq!(parse_fallback_piece("<0xB>"), None);
        assert_eq!(parse_fallback_piece("0xBD"), None);
    }

    #[test]
    fn printable_round_trip() {
        let s = "ཀ a\n";
        let p = bytes_to_printable(s.as_bytes());
        assert_eq!(printable_to_bytes(&p).unwrap(), s.as_bytes());
    }
}
