use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{TrainingExample, TrainingSet};

/// Modifier words joined with single spaces.
pub fn render_suffix(modifiers: &[String]) -> String {
    modifiers.join(" ")
}

/// Randomly toggles the case of the short prompt's first letter and,
/// independently, turns every comma in the modifiers into a period. Each
/// happens with probability 1/2; both coins are always drawn, case first.
pub fn augment<R: Rng + ?Sized>(pair: &TrainingExample, rng: &mut R) -> TrainingExample {
    let toggle_case = rng.random_bool(0.5);
    let commas_to_periods = rng.random_bool(0.5);
    let mut out = pair.clone();
    if toggle_case {
        out.short = toggle_first_letter(&out.short);
    }
    if commas_to_periods {
        for m in &mut out.modifiers {
            *m = m.replace(',', ".");
        }
    }
    out
}

/// The pairs of `set` followed by one augmented copy of each, drawn from a
/// generator seeded with `seed`.
pub fn with_augmented_copies(set: &TrainingSet, seed: u64) -> TrainingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let copies: Vec<TrainingExample> = set.examples.iter().map(|e| augment(e, &mut rng)).collect();
    set.examples.iter().cloned().chain(copies).collect()
}

fn toggle_first_letter(s: &str) -> String {
    let Some((i, c)) = s.char_indices().find(|(_, c)| c.is_alphabetic()) else {
        return s.to_string();
    };
    let flipped: String = if c.is_uppercase() { c.to_lowercase().collect() } else { c.to_uppercase().collect() };
    format!("{}{}{}", &s[..i], flipped, &s[i + c.len_utf8()..])
}

#[cfg(test)]
mod tests {
    use rand::RngCore;

    use super::*;

    /// Emits the same word forever.
    struct Constant(u64);

    impl RngCore for Constant {
        fn next_u32(&mut self) -> u32 {
            self.0 as u32
        }
        fn next_u64(&mut self) -> u64 {
            self.0
        }
        fn fill_bytes(&mut self, dst: &mut [u8]) {
            dst.fill(self.0 as u8);
        }
    }

    fn pair(short: &str, mods: &[&str]) -> TrainingExample {
        TrainingExample {
            short: short.into(),
            modifiers: mods.iter().map(|m| m.to_string()).collect(),
            source: "t".into(),
            d_aes: 0.1,
            d_clip: 0.0,
        }
    }

    #[test]
    fn no_coin_fired_is_identity() {
        // random_bool(0.5) on an all-ones stream is false.
        let mut rng = Constant(u64::MAX);
        let p = pair("a dog", &["x,", "y"]);
        assert_eq!(augment(&p, &mut rng), p);
    }

    #[test]
    fn both_coins_fired() {
        let mut rng = Constant(0);
        let out = augment(&pair("a dog", &["x,", "y"]), &mut rng);
        assert_eq!(out.short, "A dog");
        assert_eq!(render_suffix(&out.modifiers), "x. y");
    }

    #[test]
    fn toggles_back_and_skips_leading_punctuation() {
        assert_eq!(toggle_first_letter("A dog"), "a dog");
        assert_eq!(toggle_first_letter("\"quoted\""), "\"Quoted\"");
        assert_eq!(toggle_first_letter("123"), "123");
    }

    #[test]
    fn seeded_augmentation_is_reproducible_and_content_preserving() {
        let p = pair("a dog", &["highly,", "detailed"]);
        let a: Vec<_> = {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            (0..32).map(|_| augment(&p, &mut rng)).collect()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for out in &a {
            assert_eq!(out, &augment(&p, &mut rng));
            assert_eq!(out.short.to_lowercase(), p.short);
            let normalized: Vec<_> = out.modifiers.iter().map(|m| m.replace('.', ",")).collect();
            assert_eq!(normalized, p.modifiers);
        }
        assert!(a.iter().any(|o| o.short == "A dog"));
        assert!(a.iter().any(|o| o.short == "a dog"));
    }
}
