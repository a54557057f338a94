//! Tokenizer shared by the element (`u`) and polynomial (`T`) literal parsers.

use crate::error::{Error, Result};

/// One signed monomial `±coef·var^exp` of a literal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Term {
    pub negative: bool,
    /// Raw coefficient text: decimal digits, or the inside of a parenthesised group.
    pub coef: Option<String>,
    pub exp: usize,
}

/// Splits `s` into signed monomials in `var`. Whitespace is ignored; `*` between
/// coefficient and variable is optional.
pub(crate) fn parse_terms(s: &str, var: char) -> Result<Vec<Term>> {
    let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
    if chars.is_empty() {
        return Err(Error::Parse("empty literal".into()));
    }
    let mut terms = Vec::new();
    let mut i = 0;
    let mut first = true;
    while i < chars.len() {
        let mut negative = false;
        if chars[i] == '+' || chars[i] == '-' {
            negative = chars[i] == '-';
            i += 1;
        } else if !first {
            return Err(Error::Parse(format!("expected '+' or '-' at offset {i} in {s:?}")));
        }
        first = false;
        let mut coef = None;
        if i < chars.len() && chars[i] == '(' {
            let mut depth = 0usize;
            let start = i + 1;
            while i < chars.len() {
                match chars[i] {
                    '(' => depth += 1,
                    ')' => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    _ => {}
                }
                i += 1;
            }
            if i >= chars.len() {
                return Err(Error::Parse(format!("unbalanced parenthesis in {s:?}")));
            }
            coef = Some(chars[start..i].iter().collect());
            i += 1;
        } else {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if var != 'u' && i < chars.len() && chars[i] == 'u' {
                i += 1;
                if i < chars.len() && chars[i] == '^' {
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            if i > start {
                coef = Some(chars[start..i].iter().collect());
            }
        }
        if i < chars.len() && chars[i] == '*' {
            i += 1;
            if i >= chars.len() || chars[i] != var {
                return Err(Error::Parse(format!("expected {var:?} after '*' in {s:?}")));
            }
        }
        let mut exp = 0;
        if i < chars.len() && chars[i] == var {
            i += 1;
            exp = 1;
            if i < chars.len() && chars[i] == '^' {
                i += 1;
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i == start {
                    return Err(Error::Parse(format!("missing exponent in {s:?}")));
                }
                let digits: String = chars[start..i].iter().collect();
                exp = digits
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad exponent {digits:?}")))?;
            }
        } else if coef.is_none() {
            return Err(Error::Parse(format!("unexpected character at offset {i} in {s:?}")));
        }
        terms.push(Term {
            negative,
            coef,
            exp,
        });
    }
    Ok(terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_symbolic_polynomial() {
        let t = parse_terms("T^2 + 2T - 1", 'T').unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t[0].exp, 2);
        assert_eq!(t[1].coef.as_deref(), Some("2"));
        assert!(t[2].negative);
        assert_eq!(t[2].exp, 0);
    }

    #[test]
    fn parenthesised_coefficients() {
        let t = parse_terms("(u+1)*T^3+(2u)T", 'T').unwrap();
        assert_eq!(t[0].coef.as_deref(), Some("u+1"));
        assert_eq!(t[0].exp, 3);
        assert_eq!(t[1].coef.as_deref(), Some("2u"));
        let t = parse_terms("2u^2T+u", 'T').unwrap();
        assert_eq!(t[0].coef.as_deref(), Some("2u^2"));
        assert_eq!((t[1].coef.as_deref(), t[1].exp), (Some("u"), 0));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_terms("T^", 'T').is_err());
        assert!(parse_terms("T T", 'T').is_err());
        assert!(parse_terms("x", 'T').is_err());
        assert!(parse_terms("", 'T').is_err());
    }
}
