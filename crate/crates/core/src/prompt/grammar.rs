use super::{check_token, check_weight, DfPrompt, EffectRange, ModifierTriple, PromptError};

/// Parses the plain-text form `base, [token : b->e : w], ...`.
///
/// Text outside bracket groups forms the base; a comma directly before a
/// group (ignoring whitespace) is consumed with it. Whitespace around `:` and
/// `->` is ignored.
pub fn parse_dfprompt(text: &str) -> Result<DfPrompt, PromptError> {
    let mut base = String::new();
    let mut triples = Vec::new();
    let mut cursor = 0;

    while let Some(offset) = text[cursor..].find(['[', ']']) {
        let open = cursor + offset;
        if text.as_bytes()[open] == b']' {
            return Err(malformed(open, "unmatched ']'"));
        }
        let segment = text[cursor..open].trim_end();
        base.push_str(segment.strip_suffix(',').unwrap_or(segment));

        let close = match text[open + 1..].find(['[', ']']) {
            Some(rel) if text.as_bytes()[open + 1 + rel] == b']' => open + 1 + rel,
            Some(rel) => return Err(malformed(open + 1 + rel, "nested '['")),
            None => return Err(malformed(open, "unclosed '['")),
        };
        triples.push(parse_group(&text[open + 1..close], open)?);
        cursor = close + 1;
    }
    base.push_str(&text[cursor..]);

    DfPrompt::new(base, triples)
}

fn parse_group(group: &str, position: usize) -> Result<ModifierTriple, PromptError> {
    if group.trim().is_empty() {
        return Err(malformed(position, "empty group"));
    }
    let fields: Vec<&str> = group.split(':').collect();
    let [token, range, weight] = fields[..] else {
        return Err(malformed(position, "expected token : range : weight"));
    };
    let token = token.trim();
    check_token(token).map_err(|e| malformed(position, &e.to_string()))?;

    let Some((begin, end)) = range.split_once("->") else {
        return Err(malformed(position, "range must be written b->e"));
    };
    let begin = parse_number(begin, position)?;
    let end = parse_number(end, position)?;
    let range = EffectRange::new(begin, end)?;

    let weight = check_weight(parse_number(weight, position)?)?;
    ModifierTriple::new(token, range, weight)
}

fn parse_number(field: &str, position: usize) -> Result<f64, PromptError> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| malformed(position, &format!("not a number: {:?}", field.trim())))
}

fn malformed(position: usize, reason: &str) -> PromptError {
    PromptError::MalformedBracket { position, reason: reason.to_string() }
}

/// Canonical text form: the base, then `, [token : b->e : w]` per triple with
/// shortest round-tripping decimals.
pub fn format_dfprompt(p: &DfPrompt) -> String {
    let mut out = p.base().to_string();
    for t in p.triples() {
        out.push_str(&format!(", [{} : {} : {}]", t.token(), t.range(), t.weight()));
    }
    out
}
