use serde::{Deserialize, Serialize};

use super::doc::clean_doc;

const TEMPLATE: &str = include_str!("instruction_template.txt");

/// Optional text transform (for example a translator) applied to
/// documentation that is not in English.
pub trait TextTransform: Send + Sync {
    fn transform(&self, text: &str) -> Option<String>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePair {
    pub instruction: String,
    pub context: String,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
}

impl SamplePair {
    pub fn new(
        context: &str,
        function_name: &str,
        cleaned_doc: &str,
        target: impl Into<String>,
        reasoning: Option<String>,
    ) -> Self {
        Self {
            instruction: build_instruction(context, function_name, cleaned_doc),
            context: context.to_string(),
            target: target.into(),
            reasoning,
        }
    }
}

/// Deterministic prompt from the bundled template. An empty doc is replaced
/// by a description derived from the function name.
pub fn build_instruction(context: &str, function_name: &str, cleaned_doc: &str) -> String {
    assert!(!function_name.is_empty(), "function_name must be non-empty");
    let description = if cleaned_doc.trim().is_empty() {
        describe_from_name(function_name)
    } else {
        cleaned_doc.trim().to_string()
    };
    TEMPLATE
        .replace("{context}", context.trim_end())
        .replace("{function_name}", function_name)
        .replace("{description}", &description)
}

fn has_cjk(s: &str) -> bool {
    s.chars().any(|c| matches!(c as u32, 0x3040..=0x30FF | 0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xAC00..=0xD7AF | 0xF900..=0xFAFF))
}

/// Cleans raw documentation; CJK text goes through `translator` when given,
/// otherwise (or when it declines) the name-based fallback is used.
pub fn prepare_description(raw_doc: &str, function_name: &str, translator: Option<&dyn TextTransform>) -> String {
    let cleaned = clean_doc(raw_doc);
    if cleaned.is_empty() {
        return describe_from_name(function_name);
    }
    if has_cjk(&cleaned) {
        return translator
            .and_then(|t| t.transform(&cleaned))
            .map(|t| t.trim().to_string())
            .filter(|t| !t.is_empty())
            .unwrap_or_else(|| describe_from_name(function_name));
    }
    cleaned
}

fn split_words(name: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = name.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if c == '_' || c == '$' {
            if !cur.is_empty() {
                words.push(std::mem::take(&mut cur));
            }
            continue;
        }
        let boundary = c.is_ascii_uppercase()
            && !cur.is_empty()
            && (chars[i - 1].is_ascii_lowercase()
                || chars[i - 1].is_ascii_digit()
                || chars.get(i + 1).is_some_and(|n| n.is_ascii_lowercase()));
        if boundary {
            words.push(std::mem::take(&mut cur));
        }
        cur.push(c);
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    words.into_iter().map(|w| if !w.chars().any(|c| c.is_ascii_lowercase()) && w.chars().filter(|c| c.is_ascii_uppercase()).count() > 1 { w } else { w.to_lowercase() }).collect()
}

/// Pattern-based description from a camelCase or snake_case function name.
pub fn describe_from_name(function_name: &str) -> String {
    let words = split_words(function_name);
    let Some((verb, rest)) = words.split_first() else {
        return format!("Implement `{function_name}`.");
    };
    let object = if rest.is_empty() { "the relevant contract state".to_string() } else { format!("the {}", rest.join(" ")) };
    let sentence = match verb.as_str() {
        "get" | "view" | "query" | "read" | "fetch" => format!("Returns {object}"),
        "set" | "update" | "change" | "configure" => format!("Updates {object} to the provided value"),
        "is" | "has" | "can" | "check" => format!("Checks whether {}", if rest.is_empty() { "the condition holds".into() } else { rest.join(" ") }),
        "add" | "register" => format!("Adds {object}"),
        "remove" | "delete" | "revoke" => format!("Removes {object}"),
        "transfer" | "send" => format!("Transfers {}", if rest.is_empty() { "tokens to the recipient".into() } else { object }),
        "withdraw" => format!("Withdraws {}", if rest.is_empty() { "funds to the caller".into() } else { object }),
        "deposit" => format!("Deposits {}", if rest.is_empty() { "the sent funds for the caller".into() } else { object }),
        "mint" => format!("Mints {}", if rest.is_empty() { "new tokens to the recipient".into() } else { object }),
        "burn" => format!("Burns {}", if rest.is_empty() { "tokens from the caller".into() } else { object }),
        "approve" => format!("Approves {}", if rest.is_empty() { "a spender allowance".into() } else { object }),
        "pause" | "unpause" => format!("{}s the contract", capitalize(verb)),
        _ => format!("Performs the `{function_name}` operation on {object}"),
    };
    format!("{sentence}, validating inputs and caller permissions.")
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation() {
        let s = build_instruction("contract A{}", "withdraw", "Withdraws funds");
        assert!(s.contains("withdraw") && s.contains("Withdraws funds") && s.contains("contract A{}"));
        assert_eq!(s, build_instruction("contract A{}", "withdraw", "Withdraws funds"));
    }

    #[test]
    fn fallback_description() {
        let s = build_instruction("contract A{}", "setFeeRate", "");
        assert!(s.contains("Updates the fee rate"), "{s}");
        assert_eq!(split_words("getERC20Balance"), ["get", "ERC20", "balance"]);
        assert_eq!(split_words("transfer_ownership"), ["transfer", "ownership"]);
        assert!(describe_from_name("withdraw").starts_with("Withdraws funds to the caller"));
    }

    struct Upper;
    impl TextTransform for Upper {
        fn transform(&self, _: &str) -> Option<String> {
            Some("Withdraws all funds".into())
        }
    }

    #[test]
    fn translator_hook() {
        assert_eq!(prepare_description("/// @dev 提取资金", "withdraw", Some(&Upper)), "Withdraws all funds");
        assert!(prepare_description("/// @dev 提取资金", "withdraw", None).starts_with("Withdraws funds"));
        assert_eq!(prepare_description("/// @dev Pays out", "withdraw", None), "Pays out");
    }
}
