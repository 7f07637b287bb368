use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const TOKENS: &[&str] = &[
    "<",
    ">",
    "/>",
    "\"",
    "'",
    "=",
    "-1",
    "NaN",
    "inf",
    "1e309",
    "-0",
    "0x10",
    "&amp;",
    "&bogus;",
    "<![CDATA[x]]>",
    "</scenario>",
    "<obstacle/>",
    "<conflict id=\"99\"/>",
    "<trigger at=\"-5\"/>",
    "<weather id=\"42\"/>",
    "lane=\"7\"",
    "urgency=\"9\"",
    "\u{0}",
    "é",
    " ",
    "\n",
];

/// Applies one to four random edits to `doc`.
pub fn mutate(doc: &str, rng: &mut ChaCha8Rng) -> String {
    let mut chars: Vec<char> = doc.chars().collect();
    for _ in 0..rng.gen_range(1..=4) {
        let n = chars.len().max(1);
        let at = rng.gen_range(0..n).min(chars.len());
        match rng.gen_range(0..6) {
            0 => {
                let end = (at + rng.gen_range(1..40)).min(chars.len());
                chars.drain(at..end);
            }
            1 => {
                let end = (at + rng.gen_range(1..80)).min(chars.len());
                let copy: Vec<char> = chars[at..end].to_vec();
                let to = rng.gen_range(0..=chars.len());
                chars.splice(to..to, copy);
            }
            2 => {
                let tok = TOKENS.choose(rng).unwrap();
                chars.splice(at..at, tok.chars());
            }
            3 => {
                // swap a digit for junk to hit numeric attribute parsing
                if let Some(i) = (at..chars.len()).find(|&i| chars[i].is_ascii_digit()) {
                    chars[i] = *['x', '-', '.', 'e', '9'].choose(rng).unwrap();
                }
            }
            4 => chars.truncate(at),
            _ => {
                if at < chars.len() {
                    chars[at] = char::from(rng.gen_range(0x20u8..0x7f));
                }
            }
        }
    }
    chars.into_iter().collect()
}
