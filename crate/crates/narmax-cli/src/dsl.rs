//! Plain-text model files: parsing and canonical rendering.
//!
//! A model file is line-based. `#` starts a comment, blank lines are
//! skipped, and optional metadata lines precede a single equation:
//!
//! ```text
//! name: example-1
//! y[k] = u[k] + e[k-1]^2 + e[k]
//! ```
//!
//! A left-hand side of `y[k]` declares a stochastic prediction model; its
//! right-hand side is a sum of signed terms over `u`/`y`/`e` references and
//! must end with the bare additive noise term `+ e[k]`. Lagged noise inside
//! the other terms denotes samples of the same process. The metadata keys
//! `noise_scale:` and `noise_mean:` (defaults 1 and 0) declare the noise law
//! `v = scale * e + mean`; every `e` in the file then denotes `v`, and the
//! model is standardized on construction.
//!
//! A left-hand side of `ys[k]` declares a deterministic simulation model
//! over `u`/`ys` references only, with an optional `approx_order:` metadata
//! line (`exact` or a non-negative integer) recording its provenance.
//!
//! Rendering produces the same format back in canonical term order (total
//! degree descending), with unit coefficients omitted on non-constant terms
//! and floats printed in shortest round-trip form. `parse` and `render` are
//! inverse up to that canonicalization.

use std::fmt;

use narmax_core::{LaggedMonomial, NarmaxModel, Polynomial, SignalKind, SignalRef, SimModel};

// ───────────────────────── errors ──────────────────────────

/// Parse errors with 1-based line/column positions.
#[derive(Debug, Clone, PartialEq)]
pub enum DslError {
    /// Malformed syntax or an invalid construct, with a human explanation.
    Syntax { line: usize, col: usize, message: String },
    /// A prediction equation whose final term is not the bare `+ e[k]`.
    MissingAdditiveNoise { line: usize },
    /// A signal reference whose lag is illegal in its position (current-time
    /// output or noise inside a term).
    IllegalLag { line: usize, col: usize, signal: String },
}

impl fmt::Display for DslError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DslError::Syntax { line, col, message } => {
                write!(f, "line {line}, column {col}: {message}")
            }
            DslError::MissingAdditiveNoise { line } => write!(
                f,
                "line {line}: a prediction equation must end with the bare noise term `+ e[k]`"
            ),
            DslError::IllegalLag { line, col, signal } => write!(
                f,
                "line {line}, column {col}: `{signal}` is not allowed here; only lagged \
                 references (lag >= 1) may appear inside terms"
            ),
        }
    }
}

impl std::error::Error for DslError {}

// ───────────────────────── documents ──────────────────────────

/// A parsed model file: either a stochastic prediction model or a
/// deterministic simulation model, with its optional name.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelDocument {
    Prediction { name: Option<String>, model: NarmaxModel },
    Simulation { name: Option<String>, model: SimModel },
}

impl ModelDocument {
    pub fn name(&self) -> Option<&str> {
        match self {
            ModelDocument::Prediction { name, .. } | ModelDocument::Simulation { name, .. } => {
                name.as_deref()
            }
        }
    }
}

// ───────────────────────── parsing ──────────────────────────

/// One line's scanner with 1-based column reporting.
struct Cursor {
    line: usize,
    chars: Vec<char>,
    pos: usize,
}

impl Cursor {
    fn new(line: usize, text: &str) -> Self {
        Cursor { line, chars: text.chars().collect(), pos: 0 }
    }

    fn col(&self) -> usize {
        self.pos + 1
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn skip_spaces(&mut self) {
        while matches!(self.peek(), Some(c) if c == ' ' || c == '\t') {
            self.pos += 1;
        }
    }

    fn error(&self, message: impl Into<String>) -> DslError {
        DslError::Syntax { line: self.line, col: self.col(), message: message.into() }
    }

    fn expect(&mut self, wanted: char) -> Result<(), DslError> {
        match self.peek() {
            Some(c) if c == wanted => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => Err(self.error(format!("expected `{wanted}`, found `{c}`"))),
            None => Err(self.error(format!("expected `{wanted}`, found end of line"))),
        }
    }

    fn parse_ident(&mut self) -> Result<String, DslError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphabetic()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.error("expected a signal name"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn parse_unsigned(&mut self) -> Result<u32, DslError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.error("expected a number"));
        }
        let digits: String = self.chars[start..self.pos].iter().collect();
        digits.parse().map_err(|_| {
            DslError::Syntax {
                line: self.line,
                col: start + 1,
                message: format!("`{digits}` does not fit an integer"),
            }
        })
    }

    /// Parses an unsigned float literal: digits, optional fraction, optional
    /// exponent. Signs are handled at the term level.
    fn parse_number(&mut self) -> Result<f64, DslError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.peek() == Some('.') {
            self.pos += 1;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            // Only an exponent if followed by digits or a signed digit run —
            // otherwise this `e` is the noise signal of a `2e[k-1]`-style
            // typo and must not be swallowed.
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some('+' | '-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = mark;
            }
        }
        if self.pos == start {
            return Err(self.error("expected a number"));
        }
        let literal: String = self.chars[start..self.pos].iter().collect();
        literal.parse().map_err(|_| DslError::Syntax {
            line: self.line,
            col: start + 1,
            message: format!("`{literal}` is not a valid number"),
        })
    }
}

/// One parsed factor: a signal reference with exponent, or a bare number.
enum Factor {
    Number(f64),
    Signal { symbol: String, lag: u32, exponent: u32, col: usize },
}

/// One parsed term, before semantic checking.
struct RawTerm {
    sign: f64,
    factors: Vec<Factor>,
}

fn parse_factor(cursor: &mut Cursor) -> Result<Factor, DslError> {
    cursor.skip_spaces();
    let col = cursor.col();
    match cursor.peek() {
        Some(c) if c.is_ascii_digit() || c == '.' => Ok(Factor::Number(cursor.parse_number()?)),
        Some(c) if c.is_ascii_alphabetic() => {
            let symbol = cursor.parse_ident()?;
            cursor.expect('[')?;
            cursor.expect('k')?;
            let lag = if cursor.peek() == Some('-') {
                cursor.bump();
                cursor.parse_unsigned()?
            } else {
                0
            };
            cursor.expect(']')?;
            let exponent = if cursor.peek() == Some('^') {
                cursor.bump();
                let e = cursor.parse_unsigned()?;
                if e == 0 {
                    return Err(DslError::Syntax {
                        line: cursor.line,
                        col: cursor.col(),
                        message: "exponent 0 is not allowed; drop the factor instead".into(),
                    });
                }
                e
            } else {
                1
            };
            Ok(Factor::Signal { symbol, lag, exponent, col })
        }
        Some(c) => Err(cursor.error(format!("expected a coefficient or signal, found `{c}`"))),
        None => Err(cursor.error("expected a coefficient or signal, found end of line")),
    }
}

fn parse_terms(cursor: &mut Cursor) -> Result<Vec<RawTerm>, DslError> {
    let mut terms = Vec::new();
    loop {
        cursor.skip_spaces();
        let sign = match cursor.peek() {
            Some('-') => {
                cursor.bump();
                -1.0
            }
            Some('+') => {
                cursor.bump();
                1.0
            }
            None if terms.is_empty() => {
                return Err(cursor.error("the right-hand side is empty"))
            }
            None => break,
            _ if terms.is_empty() => 1.0,
            Some(c) => {
                return Err(cursor.error(format!("expected `+` or `-` between terms, found `{c}`")))
            }
        };
        cursor.skip_spaces();
        let mut factors = vec![parse_factor(cursor)?];
        loop {
            cursor.skip_spaces();
            if cursor.peek() == Some('*') {
                cursor.bump();
                factors.push(parse_factor(cursor)?);
            } else {
                break;
            }
        }
        terms.push(RawTerm { sign, factors });
        cursor.skip_spaces();
        if cursor.peek().is_none() {
            break;
        }
    }
    Ok(terms)
}

fn signal_display(symbol: &str, lag: u32) -> String {
    if lag == 0 {
        format!("{symbol}[k]")
    } else {
        format!("{symbol}[k-{lag}]")
    }
}

/// Semantic assembly of a raw term for a given model kind. `simulated` is
/// true when the equation defines `ys[k]`.
fn assemble_term(
    raw: &RawTerm,
    simulated: bool,
    line: usize,
) -> Result<LaggedMonomial, DslError> {
    let mut coefficient = raw.sign;
    let mut factors: Vec<(SignalRef, u32)> = Vec::new();
    for factor in &raw.factors {
        match factor {
            Factor::Number(value) => coefficient *= value,
            Factor::Signal { symbol, lag, exponent, col } => {
                let reference = match (symbol.as_str(), simulated) {
                    ("u", _) => SignalRef::input(*lag),
                    ("y", false) => SignalRef::output(*lag),
                    ("e", false) => SignalRef::noise(*lag),
                    ("ys", true) => SignalRef::output(*lag),
                    ("y", true) | ("e", true) => {
                        return Err(DslError::Syntax {
                            line,
                            col: *col,
                            message: format!(
                                "`{symbol}` cannot appear in a simulation model; only `u` and \
                                 `ys` may"
                            ),
                        })
                    }
                    ("ys", false) => {
                        return Err(DslError::Syntax {
                            line,
                            col: *col,
                            message: "`ys` cannot appear in a prediction model; did you mean \
                                      `y`?"
                                .into(),
                        })
                    }
                    _ => {
                        return Err(DslError::Syntax {
                            line,
                            col: *col,
                            message: format!("unknown signal `{symbol}`"),
                        })
                    }
                };
                if reference.lag == 0 && reference.kind != SignalKind::Input {
                    return Err(DslError::IllegalLag {
                        line,
                        col: *col,
                        signal: signal_display(symbol, *lag),
                    });
                }
                factors.push((reference, *exponent));
            }
        }
    }
    Ok(LaggedMonomial::new(coefficient, factors))
}

/// True when a raw term is precisely the bare `e[k]`: positive sign, a
/// single signal factor `e` at lag 0 with exponent 1, no numeric factor.
fn is_bare_current_noise(raw: &RawTerm) -> bool {
    raw.sign == 1.0
        && raw.factors.len() == 1
        && matches!(
            raw.factors[0],
            Factor::Signal { ref symbol, lag: 0, exponent: 1, .. } if symbol == "e"
        )
}

#[derive(Default)]
struct Metadata {
    name: Option<String>,
    noise_scale: Option<f64>,
    noise_mean: Option<f64>,
    approx_order: Option<Option<u32>>,
    last_line: usize,
}

/// Parses a complete model file.
pub fn parse_document(text: &str) -> Result<ModelDocument, DslError> {
    let mut metadata = Metadata::default();
    let mut equation: Option<(usize, String)> = None;
    for (index, full_line) in text.lines().enumerate() {
        let line_no = index + 1;
        let line = match full_line.find('#') {
            Some(at) => &full_line[..at],
            None => full_line,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(eq) = trimmed.find('=') {
            let lhs = trimmed[..eq].trim();
            if lhs == "y[k]" || lhs == "ys[k]" {
                if equation.is_some() {
                    return Err(DslError::Syntax {
                        line: line_no,
                        col: 1,
                        message: "a model file holds exactly one equation".into(),
                    });
                }
                equation = Some((line_no, trimmed.to_string()));
                continue;
            }
        }
        // Not an equation: must be a `key: value` metadata line.
        if equation.is_some() {
            return Err(DslError::Syntax {
                line: line_no,
                col: 1,
                message: "metadata must precede the equation".into(),
            });
        }
        let Some(colon) = trimmed.find(':') else {
            return Err(DslError::Syntax {
                line: line_no,
                col: 1,
                message: "expected `key: value` metadata or an equation".into(),
            });
        };
        let key = trimmed[..colon].trim();
        let value = trimmed[colon + 1..].trim();
        let value_col = line.find(':').map(|c| c + 2).unwrap_or(1);
        metadata.last_line = line_no;
        match key {
            "name" => {
                if value.is_empty() {
                    return Err(DslError::Syntax {
                        line: line_no,
                        col: value_col,
                        message: "name must not be empty".into(),
                    });
                }
                metadata.name = Some(value.to_string());
            }
            "noise_scale" | "noise_mean" => {
                let parsed: f64 = value.parse().map_err(|_| DslError::Syntax {
                    line: line_no,
                    col: value_col,
                    message: format!("`{value}` is not a valid number"),
                })?;
                if key == "noise_scale" {
                    metadata.noise_scale = Some(parsed);
                } else {
                    metadata.noise_mean = Some(parsed);
                }
            }
            "approx_order" => {
                metadata.approx_order = Some(if value == "exact" {
                    None
                } else {
                    Some(value.parse().map_err(|_| DslError::Syntax {
                        line: line_no,
                        col: value_col,
                        message: format!("`{value}` is neither `exact` nor an order"),
                    })?)
                });
            }
            other => {
                return Err(DslError::Syntax {
                    line: line_no,
                    col: 1,
                    message: format!("unknown metadata key `{other}`"),
                })
            }
        }
    }

    let Some((line_no, equation_text)) = equation else {
        return Err(DslError::Syntax {
            line: metadata.last_line.max(1),
            col: 1,
            message: "no equation found".into(),
        });
    };

    let eq_at = equation_text.find('=').expect("checked during scan");
    let simulated = equation_text[..eq_at].trim() == "ys[k]";
    let rhs_offset = eq_at + 1;
    let mut cursor = Cursor::new(line_no, &equation_text[rhs_offset..]);
    // Column positions inside the RHS are offset by the consumed prefix.
    let raw_terms = match parse_terms(&mut cursor) {
        Ok(terms) => terms,
        Err(err) => return Err(offset_error(err, rhs_offset)),
    };

    if simulated {
        if metadata.noise_scale.is_some() || metadata.noise_mean.is_some() {
            return Err(DslError::Syntax {
                line: line_no,
                col: 1,
                message: "noise_scale/noise_mean apply to prediction models only".into(),
            });
        }
        let mut terms = Vec::new();
        for raw in &raw_terms {
            terms.push(offset_result(assemble_term(raw, true, line_no), rhs_offset)?);
        }
        let regression = Polynomial::from_terms(terms);
        let model = SimModel::new(regression, metadata.approx_order.unwrap_or(None))
            .map_err(|err| DslError::Syntax {
                line: line_no,
                col: 1,
                message: err.to_string(),
            })?;
        Ok(ModelDocument::Simulation { name: metadata.name, model })
    } else {
        if metadata.approx_order.is_some() {
            return Err(DslError::Syntax {
                line: line_no,
                col: 1,
                message: "approx_order applies to simulation models only".into(),
            });
        }
        let Some(last) = raw_terms.last() else {
            return Err(DslError::MissingAdditiveNoise { line: line_no });
        };
        if !is_bare_current_noise(last) {
            return Err(DslError::MissingAdditiveNoise { line: line_no });
        }
        let mut terms = Vec::new();
        for raw in &raw_terms[..raw_terms.len() - 1] {
            terms.push(offset_result(assemble_term(raw, false, line_no), rhs_offset)?);
        }
        let regression = Polynomial::from_terms(terms);
        let model = NarmaxModel::with_noise_law(
            regression,
            metadata.noise_scale.unwrap_or(1.0),
            metadata.noise_mean.unwrap_or(0.0),
        )
        .map_err(|err| DslError::Syntax {
            line: line_no,
            col: 1,
            message: err.to_string(),
        })?;
        Ok(ModelDocument::Prediction { name: metadata.name, model })
    }
}

fn offset_error(err: DslError, offset: usize) -> DslError {
    match err {
        DslError::Syntax { line, col, message } => {
            DslError::Syntax { line, col: col + offset, message }
        }
        DslError::IllegalLag { line, col, signal } => {
            DslError::IllegalLag { line, col: col + offset, signal }
        }
        other => other,
    }
}

fn offset_result<T>(result: Result<T, DslError>, offset: usize) -> Result<T, DslError> {
    result.map_err(|e| offset_error(e, offset))
}

// ───────────────────────── rendering ──────────────────────────

fn render_term(term: &LaggedMonomial, output_symbol: &str, into: &mut String) {
    let magnitude = term.coefficient.abs();
    if term.exponents.is_empty() {
        into.push_str(&format!("{magnitude}"));
        return;
    }
    let mut first = true;
    if magnitude != 1.0 {
        into.push_str(&format!("{magnitude}"));
        first = false;
    }
    for (signal, exponent) in &term.exponents {
        if !first {
            into.push('*');
        }
        first = false;
        let symbol = match signal.kind {
            SignalKind::Input => "u",
            SignalKind::Output => output_symbol,
            SignalKind::Noise => "e",
        };
        into.push_str(&signal_display(symbol, signal.lag));
        if *exponent > 1 {
            into.push_str(&format!("^{exponent}"));
        }
    }
}

fn render_polynomial(poly: &Polynomial, output_symbol: &str, into: &mut String) {
    if poly.is_zero() {
        into.push('0');
        return;
    }
    for (index, term) in poly.terms().iter().enumerate() {
        if index == 0 {
            if term.coefficient < 0.0 {
                into.push('-');
            }
        } else if term.coefficient < 0.0 {
            into.push_str(" - ");
        } else {
            into.push_str(" + ");
        }
        render_term(term, output_symbol, into);
    }
}

/// Rewrites a standardized regression back in terms of the file's noise
/// process `v = scale * e + mean` by substituting `e = (v - mean) / scale`
/// into every lagged noise reference. Parsing the rendered file
/// re-standardizes, recovering the model (exactly for dyadic laws, to
/// rounding otherwise).
fn unstandardize(model: &NarmaxModel) -> Polynomial {
    let scale = model.noise_scale();
    let mean = model.noise_mean();
    if scale == 1.0 && mean == 0.0 {
        return model.regression().clone();
    }
    let budget = narmax_core::DEFAULT_TERM_BUDGET;
    let mut total = Polynomial::zero();
    for term in model.regression().terms() {
        let mut noise_part: Vec<(SignalRef, u32)> = Vec::new();
        let mut other_part: Vec<(SignalRef, u32)> = Vec::new();
        for (&signal, &exponent) in &term.exponents {
            if signal.kind == SignalKind::Noise {
                noise_part.push((signal, exponent));
            } else {
                other_part.push((signal, exponent));
            }
        }
        let mut piece =
            Polynomial::from_terms([LaggedMonomial::new(term.coefficient, other_part)]);
        for (signal, exponent) in noise_part {
            let substitution = Polynomial::from_terms([
                LaggedMonomial::new(1.0 / scale, [(signal, 1)]),
                LaggedMonomial::constant(-mean / scale),
            ]);
            let power = substitution
                .pow_checked(exponent, budget)
                .expect("file-sized models stay far below the term budget");
            piece = piece
                .mul_checked(&power, budget)
                .expect("file-sized models stay far below the term budget");
        }
        total = total.add(&piece);
    }
    total
}

/// Renders a prediction model in the file format (ends with `+ e[k]`).
pub fn render_prediction(name: Option<&str>, model: &NarmaxModel) -> String {
    let mut out = String::new();
    if let Some(name) = name {
        out.push_str(&format!("name: {name}\n"));
    }
    if model.noise_scale() != 1.0 {
        out.push_str(&format!("noise_scale: {}\n", model.noise_scale()));
    }
    if model.noise_mean() != 0.0 {
        out.push_str(&format!("noise_mean: {}\n", model.noise_mean()));
    }
    let regression = unstandardize(model);
    out.push_str("y[k] = ");
    if !regression.is_zero() {
        render_polynomial(&regression, "y", &mut out);
        out.push_str(" + ");
    }
    out.push_str("e[k]\n");
    out
}

/// Renders a simulation model in the file format.
pub fn render_simulation(name: Option<&str>, model: &SimModel) -> String {
    let mut out = String::new();
    if let Some(name) = name {
        out.push_str(&format!("name: {name}\n"));
    }
    match model.approx_order() {
        None => out.push_str("approx_order: exact\n"),
        Some(l) => out.push_str(&format!("approx_order: {l}\n")),
    }
    out.push_str("ys[k] = ");
    render_polynomial(model.regression(), "ys", &mut out);
    out.push('\n');
    out
}

/// Renders either document kind.
pub fn render_document(document: &ModelDocument) -> String {
    match document {
        ModelDocument::Prediction { name, model } => render_prediction(name.as_deref(), model),
        ModelDocument::Simulation { name, model } => render_simulation(name.as_deref(), model),
    }
}

/// Renders just the equation line of a simulation model (no metadata) — the
/// form the `derive` subcommand prints to stdout.
pub fn render_simulation_equation(model: &SimModel) -> String {
    let mut out = String::from("ys[k] = ");
    render_polynomial(model.regression(), "ys", &mut out);
    out.push('\n');
    out
}

// ───────────────────────── tests ──────────────────────────
