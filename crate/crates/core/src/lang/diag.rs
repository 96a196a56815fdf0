use std::fmt;

use serde::Serialize;

/// Stable diagnostic codes. Codes starting with `W_` are warnings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Code {
    Lex,
    Parse,
    EmptyProgram,
    DuplicateProc,
    DuplicateParam,
    UnknownProc,
    Recursion,
    Arity,
    Undefined,
    Kind,
    RuleI,
    RuleII,
    RuleIV,
    ClassicalOnQuantum,
    QuantumOnClassical,
    MeasureInQif,
    DissipateInQif,
    ClassicalOutputInQif,
    MeasureInReverse,
    ClassicalOutputInReverse,
    QuantumOutputInReverse,
    ReverseTarget,
    DissipateInReverse,
    ControlInBody,
    OutputMode,
    NestedCall,
    Unsupported,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::Lex => "E_LEX",
            Code::Parse => "E_PARSE",
            Code::EmptyProgram => "E_EMPTY_PROGRAM",
            Code::DuplicateProc => "E_DUPLICATE_PROC",
            Code::DuplicateParam => "E_DUPLICATE_PARAM",
            Code::UnknownProc => "E_UNKNOWN_PROC",
            Code::Recursion => "E_RECURSION",
            Code::Arity => "E_ARITY",
            Code::Undefined => "E_UNDEFINED",
            Code::Kind => "E_KIND",
            Code::RuleI => "E_RULE_I",
            Code::RuleII => "E_RULE_II",
            Code::RuleIV => "E_RULE_IV",
            Code::ClassicalOnQuantum => "E_CLASSICAL_ON_QUANTUM",
            Code::QuantumOnClassical => "E_QUANTUM_ON_CLASSICAL",
            Code::MeasureInQif => "E_MEASURE_IN_QIF",
            Code::DissipateInQif => "E_DISSIPATE_IN_QIF",
            Code::ClassicalOutputInQif => "E_CLASSICAL_OUTPUT_IN_QIF",
            Code::MeasureInReverse => "E_MEASURE_IN_REVERSE",
            Code::ClassicalOutputInReverse => "E_CLASSICAL_OUTPUT_IN_REVERSE",
            Code::QuantumOutputInReverse => "E_QUANTUM_OUTPUT_IN_REVERSE",
            Code::ReverseTarget => "E_REVERSE_TARGET",
            Code::DissipateInReverse => "W_DISSIPATE_IN_REVERSE",
            Code::ControlInBody => "E_CONTROL_IN_BODY",
            Code::OutputMode => "E_OUTPUT_MODE",
            Code::NestedCall => "E_NESTED_CALL",
            Code::Unsupported => "E_UNSUPPORTED",
        }
    }

    pub fn is_warning(self) -> bool {
        self.as_str().starts_with("W_")
    }
}

impl std::str::FromStr for Code {
    type Err = String;

    fn from_str(s: &str) -> Result<Code, String> {
        ALL_CODES
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown diagnostic code `{s}`"))
    }
}

const ALL_CODES: &[Code] = &[
    Code::Lex,
    Code::Parse,
    Code::EmptyProgram,
    Code::DuplicateProc,
    Code::DuplicateParam,
    Code::UnknownProc,
    Code::Recursion,
    Code::Arity,
    Code::Undefined,
    Code::Kind,
    Code::RuleI,
    Code::RuleII,
    Code::RuleIV,
    Code::ClassicalOnQuantum,
    Code::QuantumOnClassical,
    Code::MeasureInQif,
    Code::DissipateInQif,
    Code::ClassicalOutputInQif,
    Code::MeasureInReverse,
    Code::ClassicalOutputInReverse,
    Code::QuantumOutputInReverse,
    Code::ReverseTarget,
    Code::DissipateInReverse,
    Code::ControlInBody,
    Code::OutputMode,
    Code::NestedCall,
    Code::Unsupported,
];

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Source position, 1-based. Positions never take part in AST equality, so
/// a reformatted program compares equal to its original.
#[derive(Debug, Clone, Copy, Default, Eq)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: u32,
    pub col: u32,
    pub code: Code,
    pub message: String,
}

impl Diagnostic {
    pub fn new(span: Span, code: Code, message: impl Into<String>) -> Self {
        Diagnostic {
            line: span.line,
            col: span.col,
            code,
            message: message.into(),
        }
    }

    pub fn is_warning(&self) -> bool {
        self.code.is_warning()
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{} {} {}", self.line, self.col, self.code, self.message)
    }
}

impl std::error::Error for Diagnostic {}

/// True if any diagnostic is an error rather than a warning.
pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| !d.is_warning())
}
