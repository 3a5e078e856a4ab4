//! Chat templates as data.
//!
//! A template is a handful of literal marker strings. Message bodies are
//! escaped so that no marker can occur inside them, which keeps rendering
//! injective for a fixed template.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Inserted after the first character of any marker found in a message body.
const BREAK: char = '\u{200B}';

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTemplateSpec {
    pub name: String,
    #[serde(default)]
    pub system_open: String,
    #[serde(default)]
    pub system_close: String,
    #[serde(default)]
    pub user_open: String,
    #[serde(default)]
    pub user_close: String,
    #[serde(default)]
    pub assistant_open: String,
    /// Defaults to `user_close` when absent.
    #[serde(default)]
    pub assistant_close: Option<String>,
    #[serde(default)]
    pub turn_separator: String,
    /// Placed right before the completion point.
    #[serde(default)]
    pub generation_prefix: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChatRole {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::Assistant,
            content: content.into(),
        }
    }
}

impl ChatTemplateSpec {
    fn assistant_close(&self) -> &str {
        self.assistant_close.as_deref().unwrap_or(&self.user_close)
    }

    /// Marker strings that must never appear inside an escaped body.
    /// Whitespace-only markers are not escapable and are skipped.
    pub fn markers(&self) -> Vec<&str> {
        let mut out: Vec<&str> = [
            self.system_open.as_str(),
            self.system_close.as_str(),
            self.user_open.as_str(),
            self.user_close.as_str(),
            self.assistant_open.as_str(),
            self.assistant_close(),
            self.turn_separator.as_str(),
            self.generation_prefix.as_str(),
        ]
        .into_iter()
        .map(str::trim)
        .filter(|m| !m.is_empty())
        .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Escapes a message body against this template's markers.
    ///
    /// Existing break characters are doubled first, then a break character is
    /// inserted after the first character of every marker occurrence.
    pub fn escape(&self, body: &str) -> String {
        let markers = self.markers();
        let doubled: String = body
            .chars()
            .flat_map(|c| {
                let n = if c == BREAK { 2 } else { 1 };
                std::iter::repeat_n(c, n)
            })
            .collect();
        if !markers.iter().any(|m| doubled.contains(m)) {
            return doubled;
        }
        log::debug!("template `{}`: escaping chat markers in message body", self.name);
        let mut out = String::with_capacity(doubled.len() + 8);
        let mut rest = doubled.as_str();
        while let Some(c) = rest.chars().next() {
            out.push(c);
            if markers.iter().any(|m| rest.starts_with(m)) {
                out.push(BREAK);
            }
            rest = &rest[c.len_utf8()..];
        }
        out
    }

    fn validate(&self) -> Result<(), String> {
        if self.markers().iter().any(|m| m.contains(BREAK)) {
            return Err("markers may not contain U+200B".into());
        }
        Ok(())
    }
}

/// Renders a system message and a sequence of user/assistant messages,
/// ending with the template's generation prefix.
pub fn render_chat(system: &str, messages: &[ChatMessage], template: &ChatTemplateSpec) -> String {
    let mut out = String::new();
    out.push_str(&template.system_open);
    out.push_str(&template.escape(system));
    out.push_str(&template.system_close);
    out.push_str(&template.turn_separator);
    for m in messages {
        let (open, close) = match m.role {
            ChatRole::User => (template.user_open.as_str(), template.user_close.as_str()),
            ChatRole::Assistant => (template.assistant_open.as_str(), template.assistant_close()),
        };
        out.push_str(open);
        out.push_str(&template.escape(&m.content));
        out.push_str(close);
        out.push_str(&template.turn_separator);
    }
    out.push_str(&template.generation_prefix);
    out
}

/// Wraps a system message and user turns in the template's markers.
pub fn apply_chat_template(system: &str, user_turns: &[String], template: &ChatTemplateSpec) -> String {
    let messages: Vec<ChatMessage> = user_turns.iter().map(ChatMessage::user).collect();
    render_chat(system, &messages, template)
}

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("{path}: {message}")]
    Load { path: PathBuf, message: String },
    #[error("model `{model}` is mapped by both `{first}` and `{second}`")]
    DuplicateModel {
        model: String,
        first: String,
        second: String,
    },
}

#[derive(Debug, Deserialize)]
struct TemplateFile {
    #[serde(default)]
    models: Vec<String>,
    #[serde(flatten)]
    spec: ChatTemplateSpec,
}

/// Model id → chat template, loaded from a directory of `*.toml` files.
#[derive(Debug, Clone, Default)]
pub struct TemplateSet {
    by_model: BTreeMap<String, ChatTemplateSpec>,
}

impl TemplateSet {
    pub fn insert(&mut self, model: impl Into<String>, spec: ChatTemplateSpec) {
        self.by_model.insert(model.into(), spec);
    }

    pub fn get(&self, model: &str) -> Option<&ChatTemplateSpec> {
        self.by_model.get(model)
    }

    pub fn len(&self) -> usize {
        self.by_model.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_model.is_empty()
    }

    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        let load_err = |path: &Path, message: String| TemplateError::Load {
            path: path.to_path_buf(),
            message,
        };
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| load_err(dir, e.to_string()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        paths.sort();
        let mut set = TemplateSet::default();
        for path in paths {
            let text = fs::read_to_string(&path).map_err(|e| load_err(&path, e.to_string()))?;
            let file: TemplateFile = toml::from_str(&text).map_err(|e| load_err(&path, e.to_string()))?;
            file.spec.validate().map_err(|m| load_err(&path, m))?;
            for model in file.models {
                if let Some(prev) = set.by_model.get(&model) {
                    return Err(TemplateError::DuplicateModel {
                        model,
                        first: prev.name.clone(),
                        second: file.spec.name.clone(),
                    });
                }
                set.by_model.insert(model, file.spec.clone());
            }
        }
        Ok(set)
    }
}

#[cfg(test)]
pub(crate) fn chatml() -> ChatTemplateSpec {
    ChatTemplateSpec {
        name: "chatml".into(),
        system_open: "<|im_start|>system\n".into(),
        system_close: "<|im_end|>".into(),
        user_open: "<|im_start|>user\n".into(),
        user_close: "<|im_end|>".into(),
        assistant_open: "<|im_start|>assistant\n".into(),
        assistant_close: None,
        turn_separator: "\n".into(),
        generation_prefix: "<|im_start|>assistant\n".into(),
    }
}
