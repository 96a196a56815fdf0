//! Runtime values and classical arithmetic.

use std::fmt;

use crate::lang::ast::{BinOp, UnOp};
use crate::qstate::QubitId;

/// One bit of a register: either a classical bit held by the machine or a
/// qubit in the quantum store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    C(bool),
    Q(QubitId),
}

/// A register's contents. `Bits` is indexed least significant bit first.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Bits(Vec<Cell>),
}

impl Value {
    /// Bits written most significant first, as in `0b101`.
    pub fn from_msb(bits: &[bool]) -> Value {
        Value::Bits(bits.iter().rev().map(|&b| Cell::C(b)).collect())
    }

    /// Register of fresh qubits; `ids` are most significant first.
    pub fn from_qubits_msb(ids: &[QubitId]) -> Value {
        Value::Bits(ids.iter().rev().map(|&q| Cell::Q(q)).collect())
    }

    pub fn is_classical(&self) -> bool {
        match self {
            Value::Bits(cells) => cells.iter().all(|c| matches!(c, Cell::C(_))),
            _ => true,
        }
    }

    /// Live qubits of the register, most significant first.
    pub fn qubits(&self) -> Vec<QubitId> {
        match self {
            Value::Bits(cells) => cells
                .iter()
                .rev()
                .filter_map(|c| match c {
                    Cell::Q(q) => Some(*q),
                    Cell::C(_) => None,
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Classical bits, most significant first, if fully classical.
    pub fn classical_msb(&self) -> Option<Vec<bool>> {
        match self {
            Value::Bits(cells) => cells
                .iter()
                .rev()
                .map(|c| match c {
                    Cell::C(b) => Some(*b),
                    Cell::Q(_) => None,
                })
                .collect(),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "integer",
            Value::Real(_) => "real",
            Value::Bits(_) => "bit register",
        }
    }

    /// Output form: numbers stay numbers, classical registers become bit
    /// strings and registers with qubits list their cells.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Int(v) => serde_json::Value::from(*v),
            Value::Real(v) => serde_json::Value::from(*v),
            Value::Bits(cells) => {
                if let Some(bits) = self.classical_msb() {
                    serde_json::Value::from(bits_to_string(&bits))
                } else {
                    let cells: Vec<String> = cells
                        .iter()
                        .rev()
                        .map(|c| match c {
                            Cell::C(b) => if *b { "1" } else { "0" }.to_string(),
                            Cell::Q(q) => q.to_string(),
                        })
                        .collect();
                    serde_json::json!({ "qubits": cells })
                }
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v:?}"),
            Value::Bits(cells) => {
                for c in cells.iter().rev() {
                    match c {
                        Cell::C(b) => write!(f, "{}", *b as u8)?,
                        Cell::Q(q) => write!(f, "[{q}]")?,
                    }
                }
                Ok(())
            }
        }
    }
}

pub fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Parses a bit string (optionally `0b`-prefixed), most significant first.
pub fn parse_bit_string(s: &str) -> Option<Vec<bool>> {
    let body = s.strip_prefix("0b").unwrap_or(s);
    if body.is_empty() {
        return None;
    }
    body.chars()
        .map(|c| match c {
            '0' => Some(false),
            '1' => Some(true),
            _ => None,
        })
        .collect()
}

/// Classical bits of `v` as an unsigned integer.
fn bits_value(cells: &[Cell]) -> Result<i64, String> {
    if cells.len() > 63 {
        return Err("bit register too wide for arithmetic".into());
    }
    let mut acc = 0i64;
    for (i, c) in cells.iter().enumerate() {
        match c {
            Cell::C(true) => acc |= 1 << i,
            Cell::C(false) => {}
            Cell::Q(_) => return Err("quantum bit in classical arithmetic".into()),
        }
    }
    Ok(acc)
}

fn as_f64(v: &Value) -> Result<f64, String> {
    match v {
        Value::Int(i) => Ok(*i as f64),
        Value::Real(r) => Ok(*r),
        Value::Bits(c) => Ok(bits_value(c)? as f64),
    }
}

pub fn as_int(v: &Value) -> Result<i64, String> {
    match v {
        Value::Int(i) => Ok(*i),
        Value::Bits(c) => bits_value(c),
        Value::Real(r) => Err(format!("expected an integer, got real {r:?}")),
    }
}

/// A single bit from an integer 0/1 or a one-bit register.
pub fn as_bit(v: &Value) -> Result<bool, String> {
    match v {
        Value::Int(0) => Ok(false),
        Value::Int(1) => Ok(true),
        Value::Bits(c) if c.len() == 1 => match c[0] {
            Cell::C(b) => Ok(b),
            Cell::Q(_) => Err("quantum bit used as a classical bit".into()),
        },
        other => Err(format!("expected a single bit, got {other}")),
    }
}

/// Bits, most significant first, of a value used to initialize qubits.
/// Integers other than 0 and 1 have no inherent width and are rejected.
pub fn init_bits(v: &Value) -> Result<Vec<bool>, String> {
    match v {
        Value::Bits(_) => v
            .classical_msb()
            .ok_or_else(|| "register is already partly quantum".to_string()),
        Value::Int(0) => Ok(vec![false]),
        Value::Int(1) => Ok(vec![true]),
        Value::Int(i) => Err(format!(
            "integer {i} has no bit width; use a bit literal or zeros(n)"
        )),
        Value::Real(_) => Err("a real value cannot initialize qubits".into()),
    }
}

fn finite(r: f64) -> Result<Value, String> {
    if r.is_finite() {
        Ok(Value::Real(r))
    } else {
        Err("arithmetic produced a non-finite real".into())
    }
}

pub fn unop(op: UnOp, v: &Value) -> Result<Value, String> {
    match (op, v) {
        (UnOp::Neg, Value::Int(i)) => i.checked_neg().map(Value::Int).ok_or_else(|| "integer overflow".into()),
        (UnOp::Neg, Value::Real(r)) => finite(-r),
        (UnOp::Neg, Value::Bits(c)) => Ok(Value::Int(-bits_value(c)?)),
        (UnOp::Not, Value::Int(i)) => Ok(Value::Int((*i == 0) as i64)),
        (UnOp::Not, Value::Bits(c)) => {
            bits_value(c).ok();
            c.iter()
                .map(|c| match c {
                    Cell::C(b) => Ok(Cell::C(!b)),
                    Cell::Q(_) => Err("quantum bit in classical logic".to_string()),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Value::Bits)
        }
        (UnOp::Not, Value::Real(_)) => Err("`not` needs integers or bits".into()),
    }
}

fn logic(op: BinOp, a: bool, b: bool) -> bool {
    match op {
        BinOp::And => a & b,
        BinOp::Or => a | b,
        _ => a ^ b,
    }
}

pub fn binop(op: BinOp, a: &Value, b: &Value) -> Result<Value, String> {
    use Value::*;
    match op {
        BinOp::And | BinOp::Or | BinOp::Xor => match (a, b) {
            (Bits(x), Bits(y)) => {
                if x.len() != y.len() {
                    return Err(format!("bit registers of widths {} and {} in `{op:?}`", x.len(), y.len()));
                }
                x.iter()
                    .zip(y)
                    .map(|p| match p {
                        (Cell::C(p), Cell::C(q)) => Ok(Cell::C(logic(op, *p, *q))),
                        _ => Err("quantum bit in classical logic".to_string()),
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map(Bits)
            }
            (Real(_), _) | (_, Real(_)) => Err("logical operators need integers or bits".into()),
            _ => {
                let (x, y) = (as_int(a)?, as_int(b)?);
                Ok(Int(match op {
                    BinOp::And => x & y,
                    BinOp::Or => x | y,
                    _ => x ^ y,
                }))
            }
        },
        BinOp::Div => {
            let (x, y) = (as_f64(a)?, as_f64(b)?);
            if y == 0.0 {
                return Err("division by zero".into());
            }
            finite(x / y)
        }
        _ => {
            let real = matches!(a, Real(_)) || matches!(b, Real(_));
            if !real {
                let (x, y) = (as_int(a)?, as_int(b)?);
                let r = match op {
                    BinOp::Add => x.checked_add(y),
                    BinOp::Sub => x.checked_sub(y),
                    BinOp::Mul => x.checked_mul(y),
                    BinOp::IntDiv | BinOp::Mod if y == 0 => return Err("division by zero".into()),
                    BinOp::IntDiv => x.checked_div_euclid(y),
                    BinOp::Mod => x.checked_rem_euclid(y),
                    BinOp::Pow if y < 0 => return finite((x as f64).powf(y as f64)),
                    BinOp::Pow => u32::try_from(y).ok().and_then(|e| x.checked_pow(e)),
                    _ => unreachable!("handled above"),
                };
                return r.map(Int).ok_or_else(|| "integer overflow".into());
            }
            let (x, y) = (as_f64(a)?, as_f64(b)?);
            match op {
                BinOp::Add => finite(x + y),
                BinOp::Sub => finite(x - y),
                BinOp::Mul => finite(x * y),
                BinOp::IntDiv | BinOp::Mod if y == 0.0 => Err("division by zero".into()),
                BinOp::IntDiv => finite((x / y).floor()),
                BinOp::Mod => finite(x - y * (x / y).floor()),
                BinOp::Pow => finite(x.powf(y)),
                _ => unreachable!("handled above"),
            }
        }
    }
}

/// Bit `i` of a classical value.
pub fn index_value(v: &Value, i: i64) -> Result<Cell, String> {
    match v {
        Value::Bits(c) => usize::try_from(i)
            .ok()
            .and_then(|i| c.get(i).copied())
            .ok_or_else(|| format!("index {i} out of range for width {}", c.len())),
        Value::Int(x) if (0..63).contains(&i) => Ok(Cell::C((x >> i) & 1 == 1)),
        Value::Int(_) => Err(format!("bit index {i} out of range for an integer")),
        Value::Real(_) => Err("a real value has no bits".into()),
    }
}
