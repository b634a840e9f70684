pub const SYSTEM_PROMPT: &str = include_str!("../../assets/prompts/system.txt");
pub const USER_PROMPT: &str = include_str!("../../assets/prompts/user.txt");

/// The system and user prompt, byte for byte as shipped.
pub fn build_prompts() -> (&'static str, &'static str) {
    (SYSTEM_PROMPT, USER_PROMPT)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sha2::{Digest, Sha256};

    fn hex(bytes: &[u8]) -> String {
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    #[test]
    fn fixtures_are_unchanged() {
        assert_eq!(hex(SYSTEM_PROMPT.as_bytes()), "8ff50306c2780cff67ea7dd3563d647cad08db5307aad16777c598c652dc209c");
        assert_eq!(hex(USER_PROMPT.as_bytes()), "6bea053dae08a348bcde2174dc158c06c37906bf29e7b9b13d770d52771c6a19");
    }

    #[test]
    fn prompt_content() {
        let (system, user) = build_prompts();
        assert_eq!(system.lines().next(), Some("You are an image-recognition API."));
        assert!(user.starts_with("What is the main object in this image?"));
        let list = user.split("Categories are: ").nth(1).unwrap().trim_end_matches('.');
        assert_eq!(list.split(", ").count(), 16);
        assert!(!system.ends_with('\n') && !user.ends_with('\n'));
    }
}
