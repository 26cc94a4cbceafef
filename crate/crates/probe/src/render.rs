use occam_core::boolean::{BooleanPrompt, Example};

use crate::{ProbeError, Result};

/// Default wording; override it through the config template.
pub const DEFAULT_TEMPLATE: &str = "Each input is a list of bits and each output is one bit computed from the input by a fixed rule. \
Reply with the output bit only.\n\n{examples}\n{query}";

fn bits(x: &[u8]) -> String {
    x.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn render_prompt(p: &BooleanPrompt, template: &str) -> Result<String> {
    for slot in ["{examples}", "{query}"] {
        match template.matches(slot).count() {
            1 => {}
            0 => return Err(ProbeError::Template(format!("missing {slot} slot"))),
            _ => return Err(ProbeError::Template(format!("{slot} appears more than once"))),
        }
    }
    let examples: String = p
        .examples
        .iter()
        .map(|e| format!("Input: {}\nOutput: {}\n", bits(&e.x), e.y))
        .collect();
    let query = format!("Input: {}\nOutput:", bits(&p.query));
    // one pass so slot text inside examples is never re-expanded
    let (head, rest) = template.split_once("{examples}").expect("checked");
    let out = if let Some((mid, tail)) = rest.split_once("{query}") {
        format!("{head}{examples}{mid}{query}{tail}")
    } else {
        let (pre, mid) = head.split_once("{query}").expect("checked");
        format!("{pre}{query}{mid}{examples}{rest}")
    };
    Ok(out)
}

fn parse_bits(s: &str) -> Result<Vec<u8>> {
    s.split_whitespace()
        .map(|t| match t {
            "0" => Ok(0),
            "1" => Ok(1),
            _ => Err(ProbeError::Template(format!("bad bit {t:?}"))),
        })
        .collect()
}

/// Recovers the examples and query from rendered text.
pub fn parse_rendered(text: &str) -> Result<(Vec<Example>, Vec<u8>)> {
    let mut examples = Vec::new();
    let mut pending: Option<Vec<u8>> = None;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("Input:") {
            if pending.is_some() {
                return Err(ProbeError::Template("two inputs without an output".into()));
            }
            pending = Some(parse_bits(rest)?);
        } else if let Some(rest) = line.strip_prefix("Output:") {
            let x = pending
                .take()
                .ok_or_else(|| ProbeError::Template("output without input".into()))?;
            match rest.trim() {
                "" => return Ok((examples, x)),
                y => {
                    let y = parse_bits(y)?;
                    if y.len() != 1 {
                        return Err(ProbeError::Template("output must be one bit".into()));
                    }
                    examples.push(Example { x, y: y[0] });
                }
            }
        }
    }
    Err(ProbeError::Template("no query found".into()))
}

/// First whitespace- or punctuation-delimited token equal to `0` or `1`.
pub fn parse_label(completion: &str) -> Option<u8> {
    completion
        .split(|c: char| !c.is_alphanumeric())
        .find_map(|t| match t {
            "0" => Some(0),
            "1" => Some(1),
            _ => None,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use occam_core::boolean::{gen_prompt, PromptMode, TriplePolicy};
    use occam_core::Rng;

    fn prompt(n: usize, seed: u64) -> BooleanPrompt {
        gen_prompt(&mut Rng::new(seed, 0), 5, n, PromptMode::Ambiguous, TriplePolicy::IncludeZero).unwrap()
    }

    #[test]
    fn one_example_gives_two_input_lines() {
        let text = render_prompt(&prompt(1, 3), DEFAULT_TEMPLATE).unwrap();
        assert_eq!(text.matches("Input:").count(), 2);
        assert!(text.ends_with("Output:"));
    }

    #[test]
    fn rendering_is_deterministic_and_round_trips() {
        for seed in 0..20 {
            let p = prompt(1 + seed as usize % 7, seed);
            let a = render_prompt(&p, DEFAULT_TEMPLATE).unwrap();
            assert_eq!(a, render_prompt(&p, DEFAULT_TEMPLATE).unwrap());
            let (examples, query) = parse_rendered(&a).unwrap();
            assert_eq!(examples, p.examples);
            assert_eq!(query, p.query);
        }
    }

    #[test]
    fn query_slot_may_come_first() {
        let p = prompt(2, 1);
        let text = render_prompt(&p, "Q: {query}\nE:\n{examples}").unwrap();
        assert!(text.starts_with("Q: Input:"));
    }

    #[test]
    fn malformed_templates() {
        let p = prompt(2, 1);
        assert!(render_prompt(&p, "{examples} only").is_err());
        assert!(render_prompt(&p, "{query} only").is_err());
        assert!(render_prompt(&p, "{examples}{query}{query}").is_err());
    }

    #[test]
    fn label_parsing() {
        assert_eq!(parse_label("0"), Some(0));
        assert_eq!(parse_label(" 1\n"), Some(1));
        assert_eq!(parse_label("Output: 1."), Some(1));
        assert_eq!(parse_label("10 then 0"), Some(0));
        assert_eq!(parse_label("the answer is one"), None);
        assert_eq!(parse_label(""), None);
    }
}
