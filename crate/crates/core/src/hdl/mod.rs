//! Verilog subset: AST, parser, location-preserving renderer, layout
//! classification, constant evaluation and line maps.

pub mod ast;
pub mod edit;
pub mod consteval;
pub mod layout;
pub mod lexer;
pub mod linemap;
pub mod parser;
pub mod render;

pub use ast::*;
pub use consteval::{const_eval, NotConstant};
pub use layout::{line_classes, points_on_line, slide_target, LineClassTable};
pub use linemap::LineMap;
pub use render::{render, render_expr, render_file};

use thiserror::Error;

/// Default path label of the main file.
pub const MAIN_PATH: &str = "main.v";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}:{line}:{col}: {message}")]
pub struct ParseError {
    pub path: String,
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl ParseError {
    pub fn new(line: u32, col: u32, message: impl Into<String>) -> Self {
        Self {
            path: String::new(),
            line,
            col,
            message: message.into(),
        }
    }

    fn in_file(mut self, path: &str) -> Self {
        self.path = path.to_string();
        self
    }
}

/// Parse a single-file design.
pub fn parse(text: &str) -> Result<SourceUnit, ParseError> {
    parse_set(&[(MAIN_PATH.to_string(), text.to_string())])
}

/// Parse a file set. The first entry is the main file; the rest are
/// auxiliary files that may only be reached through `include directives of
/// the main file.
pub fn parse_set(files: &[(String, String)]) -> Result<SourceUnit, ParseError> {
    if files.is_empty() {
        return Err(ParseError::new(1, 1, "empty file set"));
    }
    let mut out = Vec::with_capacity(files.len());
    for (i, (path, text)) in files.iter().enumerate() {
        let f = parser::parse_file(path, text, i as u32).map_err(|e| e.in_file(path))?;
        if i > 0 && !f.includes.is_empty() {
            let inc = &f.includes[0];
            return Err(ParseError::new(inc.loc.line, inc.loc.col, "nested includes are outside the subset").in_file(path));
        }
        out.push(f);
    }
    let unit = SourceUnit { files: out };
    for inc in &unit.files[0].includes {
        if unit.files.iter().skip(1).all(|f| f.path != inc.path) {
            return Err(ParseError::new(inc.loc.line, inc.loc.col, format!("included file \"{}\" not found", inc.path))
                .in_file(&unit.files[0].path));
        }
    }
    Ok(unit)
}

/// Render every file of a unit as (path, text) pairs.
pub fn render_set(unit: &SourceUnit) -> Vec<(String, String)> {
    unit.files.iter().map(|f| (f.path.clone(), render_file(f))).collect()
}
