//! A small ARFF reader covering the subset the scenario files use:
//! numeric / string / nominal attributes, quoted values with backslash
//! escapes, `?` missing markers, and `%` comments.

use std::fmt;

use thiserror::Error;

/// Parse failure with its 1-based line number.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("ARFF line {line}: {reason}")]
pub struct MalformedArff {
    /// 1-based line number in the input text.
    pub line: usize,
    /// Human-readable cause.
    pub reason: String,
}

fn malformed(line: usize, reason: impl Into<String>) -> MalformedArff {
    MalformedArff { line, reason: reason.into() }
}

/// Declared attribute type.
#[derive(Debug, Clone, PartialEq)]
pub enum AttributeKind {
    /// `NUMERIC`, `REAL`, or `INTEGER`.
    Numeric,
    /// `STRING`.
    Str,
    /// `{a,b,c}` enumeration; values are kept as plain strings.
    Nominal(Vec<String>),
}

/// One `@attribute` declaration.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribute {
    /// Attribute name.
    pub name: String,
    /// Declared type.
    pub kind: AttributeKind,
}

/// A parsed data cell.
#[derive(Debug, Clone, PartialEq)]
pub enum ArffValue {
    /// Numeric cell.
    Numeric(f64),
    /// String or nominal cell.
    Str(String),
    /// The `?` marker.
    Missing,
}

impl ArffValue {
    /// Numeric content, if this cell is numeric.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ArffValue::Numeric(v) => Some(*v),
            _ => None,
        }
    }

    /// String content, if this cell is textual.
    pub fn as_str(&self) -> Option<&str> {
        match self {
            ArffValue::Str(s) => Some(s),
            _ => None,
        }
    }
}

/// A parsed relation: attribute declarations plus data rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    /// `@relation` name.
    pub name: String,
    /// Attributes in declaration order.
    pub attributes: Vec<Attribute>,
    /// Data rows; each row has exactly one value per attribute.
    pub rows: Vec<Vec<ArffValue>>,
}

impl Relation {
    /// Index of an attribute by case-insensitive name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.attributes
            .iter()
            .position(|a| a.name.eq_ignore_ascii_case(name))
    }
}

/// Splits a data line into `(field, was_quoted)` pairs, honoring
/// single/double quotes and backslash escapes. Unquoted fields are trimmed;
/// quotedness matters because only a bare `?` is the missing marker.
fn split_fields(line_no: usize, line: &str) -> Result<Vec<(String, bool)>, MalformedArff> {
    let mut fields = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        while matches!(chars.peek(), Some(c) if c.is_whitespace()) {
            chars.next();
        }
        let entry = if matches!(chars.peek(), Some('\'') | Some('"')) {
            let quote = chars.next().unwrap();
            let mut field = String::new();
            loop {
                match chars.next() {
                    None => return Err(malformed(line_no, "unterminated quote")),
                    Some(c) if c == quote => break,
                    Some('\\') => match chars.next() {
                        Some('n') => field.push('\n'),
                        Some('t') => field.push('\t'),
                        Some('r') => field.push('\r'),
                        Some(other) => field.push(other),
                        None => return Err(malformed(line_no, "trailing backslash")),
                    },
                    Some(c) => field.push(c),
                }
            }
            while matches!(chars.peek(), Some(c) if c.is_whitespace()) {
                chars.next();
            }
            (field, true)
        } else {
            let mut field = String::new();
            while matches!(chars.peek(), Some(&c) if c != ',') {
                field.push(chars.next().unwrap());
            }
            (field.trim_end().to_string(), false)
        };
        fields.push(entry);
        match chars.next() {
            Some(',') => continue,
            None => return Ok(fields),
            Some(c) => {
                return Err(malformed(line_no, format!("unexpected {c:?} after quoted value")))
            }
        }
    }
}

fn parse_attribute(line_no: usize, rest: &str) -> Result<Attribute, MalformedArff> {
    let rest = rest.trim();
    // Name may be quoted.
    let (name, type_part) = if let Some(q) = rest.chars().next().filter(|&c| c == '\'' || c == '"')
    {
        let closing = rest[1..]
            .find(q)
            .ok_or_else(|| malformed(line_no, "unterminated quote in attribute name"))?;
        (rest[1..1 + closing].to_string(), rest[2 + closing..].trim())
    } else {
        let mut parts = rest.splitn(2, char::is_whitespace);
        let name = parts
            .next()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| malformed(line_no, "attribute without a name"))?;
        (name.to_string(), parts.next().unwrap_or("").trim())
    };
    if type_part.is_empty() {
        return Err(malformed(line_no, format!("attribute {name:?} has no type")));
    }
    let kind = if type_part.starts_with('{') {
        if !type_part.ends_with('}') {
            return Err(malformed(line_no, "unterminated nominal specification"));
        }
        let inner = &type_part[1..type_part.len() - 1];
        let values = split_fields(line_no, inner)?
            .into_iter()
            .map(|(v, _)| v)
            .filter(|v| !v.is_empty())
            .collect();
        AttributeKind::Nominal(values)
    } else {
        match type_part.to_ascii_lowercase().as_str() {
            "numeric" | "real" | "integer" => AttributeKind::Numeric,
            "string" => AttributeKind::Str,
            other => {
                return Err(malformed(line_no, format!("unknown attribute type {other:?}")));
            }
        }
    };
    Ok(Attribute { name, kind })
}

/// Parses an ARFF document.
pub fn parse_arff(text: &str) -> Result<Relation, MalformedArff> {
    let mut name = String::new();
    let mut attributes: Vec<Attribute> = Vec::new();
    let mut rows: Vec<Vec<ArffValue>> = Vec::new();
    let mut in_data = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if !in_data {
            let lower = line.to_ascii_lowercase();
            if lower.starts_with("@relation") {
                let rest = line["@relation".len()..].trim();
                name = split_fields(line_no, rest)?
                    .into_iter()
                    .next()
                    .map(|(v, _)| v)
                    .unwrap_or_default();
            } else if lower.starts_with("@attribute") {
                attributes.push(parse_attribute(line_no, &line["@attribute".len()..])?);
            } else if lower.starts_with("@data") {
                if attributes.is_empty() {
                    return Err(malformed(line_no, "@data before any @attribute"));
                }
                in_data = true;
            } else {
                return Err(malformed(line_no, format!("unexpected header line {line:?}")));
            }
            continue;
        }

        if line.starts_with('{') {
            return Err(malformed(line_no, "sparse ARFF rows are not supported"));
        }
        let fields = split_fields(line_no, line)?;
        if fields.len() != attributes.len() {
            return Err(malformed(
                line_no,
                format!("expected {} values, got {}", attributes.len(), fields.len()),
            ));
        }
        let mut row = Vec::with_capacity(fields.len());
        for ((field, quoted), attribute) in fields.into_iter().zip(&attributes) {
            if field == "?" && !quoted {
                row.push(ArffValue::Missing);
                continue;
            }
            match attribute.kind {
                AttributeKind::Numeric => {
                    let v: f64 = field.parse().map_err(|_| {
                        malformed(
                            line_no,
                            format!("bad numeric value {field:?} in column {:?}", attribute.name),
                        )
                    })?;
                    row.push(ArffValue::Numeric(v));
                }
                AttributeKind::Str | AttributeKind::Nominal(_) => {
                    row.push(ArffValue::Str(field));
                }
            }
        }
        rows.push(row);
    }

    if !in_data {
        return Err(malformed(text.lines().count().max(1), "missing @data section"));
    }
    Ok(Relation { name, attributes, rows })
}

fn needs_quoting(s: &str) -> bool {
    s.is_empty()
        || s == "?"
        || s.chars()
            .any(|c| matches!(c, ',' | '%' | '\'' | '"' | '{' | '}' | '\\') || c.is_whitespace())
}

fn write_escaped(out: &mut String, s: &str) {
    out.push('\'');
    for c in s.chars() {
        match c {
            '\'' => out.push_str("\\'"),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            other => out.push(other),
        }
    }
    out.push('\'');
}

fn write_field(out: &mut String, s: &str) {
    if needs_quoting(s) {
        write_escaped(out, s);
    } else {
        out.push_str(s);
    }
}

/// Renders a relation back to ARFF text; [`parse_arff`] inverts it.
pub fn to_arff_string(relation: &Relation) -> String {
    let mut out = String::new();
    out.push_str("@relation ");
    write_field(&mut out, &relation.name);
    out.push('\n');
    for attribute in &relation.attributes {
        out.push_str("@attribute ");
        write_field(&mut out, &attribute.name);
        match &attribute.kind {
            AttributeKind::Numeric => out.push_str(" numeric"),
            AttributeKind::Str => out.push_str(" string"),
            AttributeKind::Nominal(values) => {
                out.push_str(" {");
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write_field(&mut out, v);
                }
                out.push('}');
            }
        }
        out.push('\n');
    }
    out.push_str("@data\n");
    for row in &relation.rows {
        for (i, value) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            match value {
                ArffValue::Missing => out.push('?'),
                ArffValue::Numeric(v) => {
                    let mut buf = String::new();
                    fmt::Write::write_fmt(&mut buf, format_args!("{v}")).unwrap();
                    out.push_str(&buf);
                }
                ArffValue::Str(s) => write_field(&mut out, s),
            }
        }
        out.push('\n');
    }
    out
}
