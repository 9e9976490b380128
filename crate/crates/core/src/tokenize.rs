/// Lowercased alphanumeric runs. Everything that is not `char::is_alphanumeric`
/// separates tokens.
pub fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}
