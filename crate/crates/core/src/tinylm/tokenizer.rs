use super::{ModelError, STOP_TOKEN};

/// Byte-level tokenizer: token id = byte value, id 0 (NUL) is the stop token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ByteTokenizer {
    vocab_size: usize,
}

impl ByteTokenizer {
    pub fn new(vocab_size: usize) -> Self {
        Self { vocab_size }
    }

    pub fn encode(&self, text: &str) -> Result<Vec<u32>, ModelError> {
        text.bytes()
            .map(|b| {
                let t = u32::from(b);
                if t == STOP_TOKEN || b as usize >= self.vocab_size {
                    Err(ModelError::TokenOutOfRange {
                        token: t,
                        vocab_size: self.vocab_size,
                    })
                } else {
                    Ok(t)
                }
            })
            .collect()
    }

    /// Lossy decode; ids above 255 and the stop token are dropped.
    pub fn decode(&self, tokens: &[u32]) -> String {
        let bytes: Vec<u8> = tokens
            .iter()
            .filter(|&&t| t != STOP_TOKEN)
            .filter_map(|&t| u8::try_from(t).ok())
            .collect();
        String::from_utf8_lossy(&bytes).into_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_round_trip() {
        let tok = ByteTokenizer::new(128);
        let ids = tok.encode("age 3?").unwrap();
        assert_eq!(ids, vec![97, 103, 101, 32, 51, 63]);
        assert_eq!(tok.decode(&ids), "age 3?");
    }

    #[test]
    fn bytes_beyond_vocab_are_rejected() {
        assert!(ByteTokenizer::new(128).encode("é").is_err());
        assert_eq!(ByteTokenizer::new(256).decode(&ByteTokenizer::new(256).encode("é").unwrap()), "é");
    }
}
