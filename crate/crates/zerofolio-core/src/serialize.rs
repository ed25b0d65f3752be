//! Turning raw instance files into the text fed to an embedding backend.
//!
//! An instance file is read as plain text, with no parsing and no
//! format-specific handling. Because the embedding input is capped by a
//! character budget, a fixed file order would mean everything past the budget
//! is never seen; shuffling the lines with a seeded permutation exposes a
//! different sample of the file per seed.

use alloc::borrow::Cow;
use alloc::string::String;
use alloc::vec::Vec;

use crate::rng::shuffle_in_place;

/// Controls how instance files become embedding input.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SerializationConfig {
    /// Maximum output length in Unicode scalar values.
    pub budget_chars: usize,
    /// Seed for the line permutation.
    pub seed: u64,
    /// Whether to shuffle lines at all; `false` keeps file order.
    pub shuffle: bool,
}

impl Default for SerializationConfig {
    fn default() -> Self {
        Self { budget_chars: 10_000, seed: 0, shuffle: true }
    }
}

impl SerializationConfig {
    /// Same configuration with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Returns a permutation of `lines` determined solely by `seed`.
///
/// Identical `(lines, seed)` give identical output on every platform: the
/// permutation is Fisher–Yates driven by splitmix64 (see [`crate::rng`]).
pub fn shuffle_lines<S: Clone>(lines: &[S], seed: u64) -> Vec<S> {
    let mut out: Vec<S> = lines.to_vec();
    shuffle_in_place(&mut out, seed);
    out
}

/// Serializes one instance (one or more raw files) into embedding input.
///
/// Files are concatenated in manifest order with a single newline between
/// them, split into lines, shuffled iff `config.shuffle`, rejoined with
/// `"\n"`, and truncated to the first `budget_chars` characters. Bytes that
/// are not valid UTF-8 are replaced with U+FFFD; `"\r"` is stripped from line
/// ends; a trailing newline does not produce a phantom empty line.
pub fn serialize_instance<B: AsRef<[u8]>>(files: &[B], config: &SerializationConfig) -> String {
    debug_assert!(config.budget_chars >= 1);
    let mut text = String::new();
    for (i, file) in files.iter().enumerate() {
        if i > 0 {
            text.push('\n');
        }
        match String::from_utf8_lossy(file.as_ref()) {
            Cow::Borrowed(s) => text.push_str(s),
            Cow::Owned(s) => text.push_str(&s),
        }
    }

    let mut lines: Vec<&str> = text.lines().collect();
    if config.shuffle {
        shuffle_in_place(&mut lines, config.seed);
    }

    let mut out = String::with_capacity(text.len().min(config.budget_chars + 1));
    let mut remaining = config.budget_chars;
    'outer: for (i, line) in lines.iter().enumerate() {
        if i > 0 {
            if remaining == 0 {
                break;
            }
            out.push('\n');
            remaining -= 1;
        }
        for ch in line.chars() {
            if remaining == 0 {
                break 'outer;
            }
            out.push(ch);
            remaining -= 1;
        }
    }
    out
}
