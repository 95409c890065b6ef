use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopicError {
    #[error("topic or filter is empty")]
    Empty,
    #[error("'#' must be the last level of a filter")]
    HashNotLast,
    #[error("wildcard must occupy a whole level: {0:?}")]
    EmbeddedWildcard(String),
    #[error("topic name contains a wildcard: {0:?}")]
    WildcardInTopic(String),
    #[error("topic contains a NUL character")]
    NulCharacter,
}

/// A validated subscription filter, stored as its '/'-separated levels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TopicFilter {
    levels: Vec<String>,
}

impl TopicFilter {
    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn has_wildcards(&self) -> bool {
        self.levels.iter().any(|l| l == "+" || l == "#")
    }
}

impl fmt::Display for TopicFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.levels.join("/"))
    }
}

impl std::str::FromStr for TopicFilter {
    type Err = TopicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        validate_filter(s)
    }
}

/// Parse a filter, rejecting misplaced wildcards.
pub fn validate_filter(filter: &str) -> Result<TopicFilter, TopicError> {
    if filter.is_empty() {
        return Err(TopicError::Empty);
    }
    if filter.contains('\0') {
        return Err(TopicError::NulCharacter);
    }
    let levels: Vec<String> = filter.split('/').map(str::to_owned).collect();
    let last = levels.len() - 1;
    for (i, level) in levels.iter().enumerate() {
        if level == "#" {
            if i != last {
                return Err(TopicError::HashNotLast);
            }
        } else if level == "+" {
            continue;
        } else if level.contains('#') || level.contains('+') {
            return Err(TopicError::EmbeddedWildcard(level.clone()));
        }
    }
    Ok(TopicFilter { levels })
}

/// Check that a topic name is usable in a PUBLISH.
pub fn validate_topic(topic: &str) -> Result<(), TopicError> {
    if topic.is_empty() {
        return Err(TopicError::Empty);
    }
    if topic.contains('\0') {
        return Err(TopicError::NulCharacter);
    }
    if topic.contains('+') || topic.contains('#') {
        return Err(TopicError::WildcardInTopic(topic.to_owned()));
    }
    Ok(())
}

/// Standard matching: '+' takes exactly one level, '#' takes zero or more
/// trailing levels (so `a/#` also matches `a`).
pub fn topic_matches(filter: &TopicFilter, topic: &str) -> bool {
    let mut topic_levels = topic.split('/');
    for level in &filter.levels {
        match level.as_str() {
            "#" => return true,
            "+" => {
                if topic_levels.next().is_none() {
                    return false;
                }
            }
            exact => match topic_levels.next() {
                Some(t) if t == exact => {}
                _ => return false,
            },
        }
    }
    topic_levels.next().is_none()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> TopicFilter {
        validate_filter(s).unwrap()
    }

    #[test]
    fn parses_levels() {
        assert_eq!(f("a/+/c").levels(), ["a", "+", "c"]);
        assert_eq!(f("#").levels(), ["#"]);
        assert_eq!(f("a//b").levels(), ["a", "", "b"]);
    }

    #[test]
    fn rejects_bad_wildcards() {
        assert_eq!(validate_filter("a/#/b"), Err(TopicError::HashNotLast));
        assert!(matches!(validate_filter("a+b"), Err(TopicError::EmbeddedWildcard(_))));
        assert!(matches!(validate_filter("a/b#"), Err(TopicError::EmbeddedWildcard(_))));
        assert_eq!(validate_filter(""), Err(TopicError::Empty));
    }

    #[test]
    fn topic_names_reject_wildcards() {
        assert!(validate_topic("rw/traffic").is_ok());
        assert!(validate_topic("rw/+").is_err());
        assert!(validate_topic("").is_err());
    }

    #[test]
    fn matching_examples() {
        assert!(topic_matches(&f("a/+"), "a/b"));
        assert!(!topic_matches(&f("a/+"), "a/b/c"));
        assert!(topic_matches(&f("a/#"), "a"));
        assert!(topic_matches(&f("a/#"), "a/b/c"));
        assert!(topic_matches(&f("#"), "x/y"));
        assert!(!topic_matches(&f("a/b"), "a/c"));
        assert!(!topic_matches(&f("a/+/c"), "a/b"));
        assert!(topic_matches(&f("+/+"), "/x"));
    }
}
