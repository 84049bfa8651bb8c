//! Token counting.
//!
//! The default counter needs no model files: it counts alphanumeric runs and
//! individual punctuation characters, then scales by 1.3 (rounded up) to
//! approximate subword tokenizers.

pub trait Tokenizer: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WordTokenizer;

impl WordTokenizer {
    /// Alphanumeric runs plus one unit per punctuation/symbol character.
    pub fn words(text: &str) -> usize {
        let mut n = 0;
        let mut in_word = false;
        for c in text.chars() {
            if c.is_alphanumeric() {
                if !in_word {
                    n += 1;
                    in_word = true;
                }
            } else {
                in_word = false;
                if !c.is_whitespace() {
                    n += 1;
                }
            }
        }
        n
    }
}

impl Tokenizer for WordTokenizer {
    fn count(&self, text: &str) -> usize {
        // ceil(words * 1.3) in integer arithmetic
        (Self::words(text) * 13).div_ceil(10)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts() {
        let t = WordTokenizer;
        assert_eq!(t.count(""), 0);
        assert_eq!(t.count("   "), 0);
        assert_eq!(WordTokenizer::words("hello world"), 2);
        assert_eq!(WordTokenizer::words("<p>a</p>"), 8);
        assert_eq!(WordTokenizer::words("$1,039.99"), 6);
        assert_eq!(t.count("one two three four five six seven eight nine ten"), 13);
        assert_eq!(t.count("x"), 2);
    }

    proptest! {
        #[test]
        fn near_additive(a in ".{0,40}", b in ".{0,40}") {
            let t = WordTokenizer;
            let joined = format!("{a}{b}");
            prop_assert!(t.count(&joined) <= t.count(&a) + t.count(&b) + 1);
        }
    }
}
