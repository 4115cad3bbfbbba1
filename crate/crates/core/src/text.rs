//! Tokenizers shared by the indices, the reader, and the leakage scanner.

/// Lowercased maximal alphanumeric runs. Used by BM25, the hashed embedder,
/// and the lexical reader so all three agree on what a term is.
pub fn lexical_tokens(text: &str) -> Vec<String> {
    lexical_token_spans(text)
        .into_iter()
        .map(|(s, e)| text[s..e].to_lowercase())
        .collect()
}

/// Byte ranges of the tokens produced by [`lexical_tokens`].
pub fn lexical_token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            spans.push((s, i));
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

/// Byte ranges of maximal non-whitespace runs.
pub fn whitespace_token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                spans.push((s, i));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

pub fn whitespace_token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Collapses every whitespace run to one space and trims the ends.
pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits after '.', '!' or '?' when followed by whitespace.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        if matches!(c, '.' | '!' | '?') && chars.peek().is_some_and(|n| n.is_whitespace()) {
            let s = current.trim();
            if !s.is_empty() {
                out.push(s.to_string());
            }
            current.clear();
        }
    }
    let s = current.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexical_tokens_lowercase_and_split_on_punctuation() {
        assert_eq!(lexical_tokens("Enron's CEO, Ken-Lay!"), vec!["enron", "s", "ceo", "ken", "lay"]);
        assert!(lexical_tokens("  ...  ").is_empty());
    }

    #[test]
    fn whitespace_spans_slice_back_to_tokens() {
        let t = "  a bb\tccc \n";
        let toks: Vec<&str> = whitespace_token_spans(t).into_iter().map(|(s, e)| &t[s..e]).collect();
        assert_eq!(toks, vec!["a", "bb", "ccc"]);
    }

    #[test]
    fn sentences_split_on_terminal_punctuation() {
        assert_eq!(
            split_sentences("Hi there. How are you? Fine!  3.5 is a number."),
            vec!["Hi there.", "How are you?", "Fine!", "3.5 is a number."]
        );
        assert!(split_sentences("   ").is_empty());
    }
}
