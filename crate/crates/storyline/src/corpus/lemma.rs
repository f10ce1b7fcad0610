//! Deterministic rule-based lemmatizer.
//!
//! Exceptions are consulted first, then ordered suffix rules
//! (-ies, -ied, -ing, -ed, -es, -s), else the word is returned unchanged.
//! Tokens containing digits are treated as opaque identifiers. This is a
//! heuristic, not a dictionary lemmatizer; it is total and deterministic,
//! which is what label derivation needs.

/// Irregular forms mapped straight to their lemma.
const EXCEPTIONS: &[(&str, &str)] = &[
    ("am", "be"),
    ("are", "be"),
    ("ate", "eat"),
    ("beaten", "beat"),
    ("became", "become"),
    ("been", "be"),
    ("began", "begin"),
    ("begun", "begin"),
    ("bore", "bear"),
    ("bought", "buy"),
    ("broke", "break"),
    ("broken", "break"),
    ("brought", "bring"),
    ("built", "build"),
    ("came", "come"),
    ("caught", "catch"),
    ("chose", "choose"),
    ("chosen", "choose"),
    ("did", "do"),
    ("died", "die"),
    ("done", "do"),
    ("drawn", "draw"),
    ("drew", "draw"),
    ("driven", "drive"),
    ("drove", "drive"),
    ("eaten", "eat"),
    ("fallen", "fall"),
    ("fell", "fall"),
    ("felt", "feel"),
    ("flew", "fly"),
    ("flown", "fly"),
    ("forgot", "forget"),
    ("forgotten", "forget"),
    ("fought", "fight"),
    ("found", "find"),
    ("froze", "freeze"),
    ("frozen", "freeze"),
    ("gave", "give"),
    ("given", "give"),
    ("gone", "go"),
    ("got", "get"),
    ("gotten", "get"),
    ("grew", "grow"),
    ("grown", "grow"),
    ("had", "have"),
    ("has", "have"),
    ("heard", "hear"),
    ("held", "hold"),
    ("hid", "hide"),
    ("hidden", "hide"),
    ("is", "be"),
    ("kept", "keep"),
    ("knew", "know"),
    ("known", "know"),
    ("lay", "lie"),
    ("led", "lead"),
    ("left", "leave"),
    ("lied", "lie"),
    ("lost", "lose"),
    ("made", "make"),
    ("meant", "mean"),
    ("met", "meet"),
    ("paid", "pay"),
    ("ran", "run"),
    ("ridden", "ride"),
    ("risen", "rise"),
    ("rode", "ride"),
    ("rose", "rise"),
    ("said", "say"),
    ("sat", "sit"),
    ("saw", "see"),
    ("seen", "see"),
    ("sent", "send"),
    ("shown", "show"),
    ("sold", "sell"),
    ("sought", "seek"),
    ("spent", "spend"),
    ("spoke", "speak"),
    ("spoken", "speak"),
    ("stolen", "steal"),
    ("stood", "stand"),
    ("struck", "strike"),
    ("taken", "take"),
    ("taught", "teach"),
    ("thought", "think"),
    ("threw", "throw"),
    ("thrown", "throw"),
    ("told", "tell"),
    ("took", "take"),
    ("understood", "understand"),
    ("was", "be"),
    ("went", "go"),
    ("were", "be"),
    ("won", "win"),
    ("wore", "wear"),
    ("worn", "wear"),
    ("wrote", "write"),
];

/// Final consonants that are undoubled after stripping -ing/-ed
/// (planned -> plan); s/l/f/z stay doubled (missed -> miss).
const UNDOUBLE: &[char] = &['b', 'd', 'g', 'm', 'n', 'p', 'r', 't'];

/// Stem endings that take a restored final 'e' (loved -> love,
/// argued -> argue, danced -> dance).
const RESTORE_E: &[char] = &['v', 'u', 'c'];

pub fn lemmatize(surface: &str) -> String {
    let word = surface.to_lowercase();
    if word.chars().any(|c| c.is_ascii_digit()) {
        return word;
    }
    if let Ok(i) = EXCEPTIONS.binary_search_by(|(k, _)| (*k).cmp(word.as_str())) {
        return EXCEPTIONS[i].1.to_string();
    }
    if let Some(stem) = word.strip_suffix("ies").filter(|s| s.len() >= 2) {
        return format!("{stem}y");
    }
    if let Some(stem) = word.strip_suffix("ied").filter(|s| s.len() >= 2) {
        return format!("{stem}y");
    }
    if let Some(stem) = word.strip_suffix("ing").filter(|s| s.len() >= 3) {
        return fix_stem(stem);
    }
    if let Some(stem) = word.strip_suffix("ed").filter(|s| s.len() >= 3) {
        return fix_stem(stem);
    }
    if ends_with_any(&word, &["ses", "xes", "zes", "ches", "shes", "oes"]) {
        return word[..word.len() - 2].to_string();
    }
    if word.len() > 3 && word.ends_with('s') && !word.ends_with("ss") && !word.ends_with("us") {
        return word[..word.len() - 1].to_string();
    }
    word
}

fn ends_with_any(word: &str, suffixes: &[&str]) -> bool {
    suffixes.iter().any(|s| word.ends_with(s) && word.len() > s.len())
}

fn fix_stem(stem: &str) -> String {
    let chars: Vec<char> = stem.chars().collect();
    let n = chars.len();
    if n >= 2 && chars[n - 1] == chars[n - 2] && UNDOUBLE.contains(&chars[n - 1]) {
        return stem[..stem.len() - 1].to_string();
    }
    if RESTORE_E.contains(&chars[n - 1]) {
        return format!("{stem}e");
    }
    stem.to_string()
}
