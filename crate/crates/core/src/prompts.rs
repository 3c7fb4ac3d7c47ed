//! Versioned prompt templates with `{placeholder}` substitution.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TemplateError {
    #[error("template references unknown placeholder `{{{0}}}`")]
    MissingValue(String),
    #[error("unterminated placeholder at byte {0}")]
    Unterminated(usize),
    #[error("cannot read template {path}: {message}")]
    Io { path: String, message: String },
}

/// Replaces each `{name}` in `template` with its value. Substitution is a
/// single pass, so braces inside values are never re-expanded. `{{` and `}}`
/// produce literal braces.
pub fn render(template: &str, values: &[(&str, &str)]) -> Result<String, TemplateError> {
    let lookup: BTreeMap<&str, &str> = values.iter().copied().collect();
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    let mut offset = 0;
    while let Some(pos) = rest.find(['{', '}']) {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if tail.starts_with("{{") || tail.starts_with("}}") {
            out.push_str(&tail[..1]);
            rest = &tail[2..];
            offset += pos + 2;
            continue;
        }
        if let Some(after) = tail.strip_prefix('}') {
            out.push('}');
            rest = after;
            offset += pos + 1;
            continue;
        }
        let end = tail.find('}').ok_or(TemplateError::Unterminated(offset + pos))?;
        let name = &tail[1..end];
        let value = lookup
            .get(name)
            .ok_or_else(|| TemplateError::MissingValue(name.to_string()))?;
        out.push_str(value);
        rest = &tail[end + 1..];
        offset += pos + end + 1;
    }
    out.push_str(rest);
    Ok(out)
}

/// The prompt templates used by the pipeline, tagged with a version string
/// that participates in aspect-cache keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub version: String,
    pub aspects: String,
    pub zero_shot: String,
    pub cot: String,
    pub cot_step: String,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateSet {
    pub fn builtin() -> Self {
        Self {
            version: "v1".into(),
            aspects: include_str!("../fixtures/templates/aspects.v1.txt").into(),
            zero_shot: include_str!("../fixtures/templates/zero_shot.v1.txt").into(),
            cot: include_str!("../fixtures/templates/cot.v1.txt").into(),
            cot_step: include_str!("../fixtures/templates/cot_step.v1.txt").into(),
        }
    }

    /// Loads `aspects.<version>.txt`, `zero_shot.<version>.txt`,
    /// `cot.<version>.txt` and `cot_step.<version>.txt` from `dir`.
    pub fn load(dir: impl AsRef<Path>, version: &str) -> Result<Self, TemplateError> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let path = dir.join(format!("{name}.{version}.txt"));
            std::fs::read_to_string(&path).map_err(|e| TemplateError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })
        };
        Ok(Self {
            version: version.to_string(),
            aspects: read("aspects")?,
            zero_shot: read("zero_shot")?,
            cot: read("cot")?,
            cot_step: read("cot_step")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitutes_once() {
        let out = render("a {x} b {y}", &[("x", "{y}"), ("y", "2")]).unwrap();
        assert_eq!(out, "a {y} b 2");
    }

    #[test]
    fn escaped_braces() {
        assert_eq!(render("{{x}}", &[]).unwrap(), "{x}");
    }

    #[test]
    fn missing_value() {
        assert_eq!(
            render("{nope}", &[]),
            Err(TemplateError::MissingValue("nope".into()))
        );
        assert_eq!(render("ab {x", &[("x", "1")]), Err(TemplateError::Unterminated(3)));
    }

    #[test]
    fn builtin_templates_mention_all_three_steps() {
        let t = TemplateSet::builtin();
        for step in ["Step 1: {step1}", "Step 2: {step2}", "Step 3: {step3}"] {
            assert!(t.cot.contains(step));
        }
        assert!(t.aspects.ends_with("Aspects:\n1."));
    }
}
