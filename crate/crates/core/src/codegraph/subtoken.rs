//! Identifier subtokenization: camelCase, snake_case, acronym and digit
//! boundaries, lowercased output.

/// Splits an identifier into lowercase subtokens.
///
/// Boundaries: underscores (dropped), lower-to-upper transitions, letter
/// against digit transitions, and inside an uppercase run before its last
/// capital when a lowercase follows ("HTMLParser" -> html, parser). Digit
/// runs stay together. Joining the output and dropping case and
/// underscores reproduces the input.
pub fn split_subtokens(identifier: &str) -> Vec<String> {
    #[derive(PartialEq, Clone, Copy)]
    enum Class {
        Lower,
        Upper,
        Digit,
        Other,
    }
    fn classify(c: char) -> Class {
        if c.is_lowercase() {
            Class::Lower
        } else if c.is_uppercase() {
            Class::Upper
        } else if c.is_ascii_digit() {
            Class::Digit
        } else {
            Class::Other
        }
    }

    let chars: Vec<char> = identifier.chars().collect();
    let mut out = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c == '_' {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            continue;
        }
        let class = classify(c);
        let boundary = if current.is_empty() {
            false
        } else {
            let prev = classify(*chars[..i]
                .iter()
                .rev()
                .find(|&&p| p != '_')
                .expect("current is non-empty"));
            match (prev, class) {
                (Class::Lower, Class::Upper) => true,
                (Class::Upper, Class::Upper) => {
                    // Acronym rule: split before the capital that starts a
                    // new word, i.e. when a lowercase follows.
                    matches!(chars.get(i + 1), Some(n) if classify(*n) == Class::Lower)
                }
                (a, b) if a != b => true,
                _ => false,
            }
        };
        if boundary {
            out.push(std::mem::take(&mut current));
        }
        current.extend(c.to_lowercase());
    }
    if !current.is_empty() {
        out.push(current);
    }
    if out.is_empty() {
        // Identifiers made only of underscores keep a literal stand-in.
        out.push("_".to_string());
    }
    out
}
