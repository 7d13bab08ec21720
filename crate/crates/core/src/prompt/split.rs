use super::{ActionSpaces, DfPrompt, EffectRange, PromptError, DEFAULT_WEIGHT};

/// Splits an original prompt at its first comma into the short theme prompt
/// and the whitespace-separated modifier words that follow.
pub fn split_at_division(original: &str) -> Result<(String, Vec<String>), PromptError> {
    let (short, rest) = original.split_once(',').ok_or(PromptError::NoDivisionPoint)?;
    let short = short.trim();
    if short.is_empty() {
        return Err(PromptError::EmptyBase);
    }
    let modifiers = rest
        .split(',')
        .flat_map(str::split_whitespace)
        .map(str::to_string)
        .collect();
    Ok((short.to_string(), modifiers))
}

/// Gives every triple of a comma-separated phrase the phrase's modal range
/// and weight.
///
/// A phrase ends at a triple whose token ends with `,` (a bare `,` token
/// included) or at the end of the list. Ties prefer the default (`1->0`,
/// weight 1), then the earlier element of the ordered action space, then
/// first appearance.
pub fn group_phrases(p: &DfPrompt) -> DfPrompt {
    let mut out = p.clone();
    let mut start = 0;
    let n = out.triples.len();
    for i in 0..n {
        let closes = i + 1 == n || out.triples[i].token().ends_with(',');
        if !closes {
            continue;
        }
        let phrase = &out.triples[start..=i];
        let ranges: Vec<EffectRange> = phrase.iter().map(|t| t.range()).collect();
        let weights: Vec<f64> = phrase.iter().map(|t| t.weight()).collect();
        let range = mode(&ranges, EffectRange::FULL, |r| ActionSpaces::range_index(*r));
        let weight = mode(&weights, DEFAULT_WEIGHT, |w| ActionSpaces::weight_index(*w));
        for t in &mut out.triples[start..=i] {
            t.set_range_and_weight(range, weight);
        }
        start = i + 1;
    }
    out
}

fn mode<T: Copy + PartialEq>(values: &[T], default: T, rank: impl Fn(&T) -> Option<usize>) -> T {
    let mut distinct: Vec<(T, usize, usize)> = Vec::new();
    for (pos, v) in values.iter().enumerate() {
        match distinct.iter_mut().find(|(d, _, _)| d == v) {
            Some(entry) => entry.1 += 1,
            None => distinct.push((*v, 1, pos)),
        }
    }
    let top = distinct.iter().map(|d| d.1).max().unwrap_or(0);
    let tied = distinct.into_iter().filter(|d| d.1 == top);
    tied.min_by_key(|(v, _, first)| {
        let is_default = *v == default;
        (!is_default, rank(v).unwrap_or(usize::MAX), *first)
    })
    .map(|(v, _, _)| v)
    .unwrap_or(default)
}
