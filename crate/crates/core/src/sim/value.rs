//! Four-state bit vectors up to 64 bits.
//!
//! Each bit is a pair of planes `(val, unk)`: 0 = (0,0), 1 = (1,0),
//! Z = (0,1), X = (1,1).

use std::fmt;

use crate::hdl::ast::{mask, BinaryOp, UnaryOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Value {
    pub width: u32,
    pub val: u64,
    pub unk: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bit {
    Zero,
    One,
    X,
    Z,
}

impl Value {
    pub fn known(width: u32, v: u64) -> Self {
        Self {
            width,
            val: v & mask(width),
            unk: 0,
        }
    }

    pub fn x(width: u32) -> Self {
        Self {
            width,
            val: mask(width),
            unk: mask(width),
        }
    }

    pub fn z(width: u32) -> Self {
        Self {
            width,
            val: 0,
            unk: mask(width),
        }
    }

    pub fn is_known(&self) -> bool {
        self.unk == 0
    }

    /// Known value as an integer.
    pub fn to_u64(&self) -> Option<u64> {
        self.is_known().then_some(self.val)
    }

    /// Whether any bit is Z.
    pub fn has_z(&self) -> bool {
        self.unk & !self.val != 0
    }

    pub fn bit(&self, i: u32) -> Bit {
        match ((self.val >> i) & 1, (self.unk >> i) & 1) {
            (0, 0) => Bit::Zero,
            (1, 0) => Bit::One,
            (0, _) => Bit::Z,
            _ => Bit::X,
        }
    }

    /// Zero-extend or truncate.
    pub fn resize(&self, width: u32) -> Self {
        let m = mask(width);
        Self {
            width,
            val: self.val & m,
            unk: self.unk & m,
        }
    }

    /// Truth for conditions: `Some(true)` when any bit is a known 1,
    /// `Some(false)` when all bits are known 0, `None` otherwise.
    pub fn truth(&self) -> Option<bool> {
        if self.val & !self.unk != 0 {
            Some(true)
        } else if self.unk == 0 {
            Some(false)
        } else {
            None
        }
    }

    pub fn unary(op: UnaryOp, a: Value) -> Value {
        match op {
            UnaryOp::Not => Value {
                width: a.width,
                // known bits flip; X and Z both become X
                val: (!a.val & !a.unk | a.unk) & mask(a.width),
                unk: a.unk,
            },
            UnaryOp::Neg => match a.to_u64() {
                Some(v) => Value::known(a.width, v.wrapping_neg()),
                None => Value::x(a.width),
            },
            UnaryOp::LogicalNot => match a.truth() {
                Some(t) => Value::known(1, (!t) as u64),
                None => Value::x(1),
            },
        }
    }

    pub fn binary(op: BinaryOp, a: Value, b: Value) -> Value {
        match op {
            BinaryOp::Shl | BinaryOp::Shr => {
                let w = a.width;
                match (a.to_u64(), b.to_u64()) {
                    (Some(x), Some(s)) => {
                        let r = if s >= w as u64 {
                            0
                        } else if op == BinaryOp::Shl {
                            x << s
                        } else {
                            x >> s
                        };
                        Value::known(w, r)
                    }
                    _ => Value::x(w),
                }
            }
            _ => {
                let w = a.width.max(b.width);
                let (a, b) = (a.resize(w), b.resize(w));
                let m = mask(w);
                match op {
                    BinaryOp::And => {
                        let a0 = !a.val & !a.unk;
                        let b0 = !b.val & !b.unk;
                        let zero = (a0 | b0) & m;
                        let one = (a.val & !a.unk) & (b.val & !b.unk);
                        let unk = m & !zero & !one;
                        Value { width: w, val: one | unk, unk }
                    }
                    BinaryOp::Or => {
                        let a1 = a.val & !a.unk;
                        let b1 = b.val & !b.unk;
                        let one = a1 | b1;
                        let zero = (!a.val & !a.unk) & (!b.val & !b.unk) & m;
                        let unk = m & !zero & !one;
                        Value { width: w, val: one | unk, unk }
                    }
                    BinaryOp::Xor => {
                        let unk = a.unk | b.unk;
                        Value {
                            width: w,
                            val: ((a.val ^ b.val) & !unk) | unk,
                            unk,
                        }
                    }
                    _ => match (a.to_u64(), b.to_u64()) {
                        (Some(x), Some(y)) => match op {
                            BinaryOp::Add => Value::known(w, x.wrapping_add(y)),
                            BinaryOp::Sub => Value::known(w, x.wrapping_sub(y)),
                            BinaryOp::Eq => Value::known(1, (x == y) as u64),
                            BinaryOp::Ne => Value::known(1, (x != y) as u64),
                            BinaryOp::Lt => Value::known(1, (x < y) as u64),
                            BinaryOp::Gt => Value::known(1, (x > y) as u64),
                            _ => unreachable!(),
                        },
                        _ => Value::x(if op.is_relational() { 1 } else { w }),
                    },
                }
            }
        }
    }

    /// Parse the `w'b...` form produced by `Display`.
    pub fn parse(s: &str) -> Option<Value> {
        let (w, bits) = s.split_once("'b")?;
        let width: u32 = w.parse().ok()?;
        if width == 0 || width > 64 || bits.len() != width as usize {
            return None;
        }
        let mut v = Value::known(width, 0);
        for (i, c) in bits.chars().rev().enumerate() {
            let (val, unk) = match c {
                '0' => (0, 0),
                '1' => (1, 0),
                'z' => (0, 1),
                'x' => (1, 1),
                _ => return None,
            };
            v.val |= val << i;
            v.unk |= unk << i;
        }
        Some(v)
    }
}

impl fmt::Display for Value {
    /// Width, then every bit MSB first: `4'b10xz`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}'b", self.width)?;
        for i in (0..self.width).rev() {
            let c = match self.bit(i) {
                Bit::Zero => '0',
                Bit::One => '1',
                Bit::X => 'x',
                Bit::Z => 'z',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bit(b: Bit) -> Value {
        match b {
            Bit::Zero => Value::known(1, 0),
            Bit::One => Value::known(1, 1),
            Bit::X => Value::x(1),
            Bit::Z => Value::z(1),
        }
    }

    const ALL: [Bit; 4] = [Bit::Zero, Bit::One, Bit::X, Bit::Z];

    #[test]
    fn not_truth_table() {
        let expect = [Bit::One, Bit::Zero, Bit::X, Bit::X];
        for (b, e) in ALL.iter().zip(expect) {
            assert_eq!(Value::unary(UnaryOp::Not, bit(*b)).bit(0), e, "~{b:?}");
        }
    }

    #[test]
    fn and_or_tables() {
        use Bit::*;
        // rows: a, columns: b in order 0 1 X Z
        let and = [[Zero, Zero, Zero, Zero], [Zero, One, X, X], [Zero, X, X, X], [Zero, X, X, X]];
        let or = [[Zero, One, X, X], [One, One, One, One], [X, One, X, X], [X, One, X, X]];
        for (i, a) in ALL.iter().enumerate() {
            for (j, b) in ALL.iter().enumerate() {
                assert_eq!(Value::binary(BinaryOp::And, bit(*a), bit(*b)).bit(0), and[i][j]);
                assert_eq!(Value::binary(BinaryOp::Or, bit(*a), bit(*b)).bit(0), or[i][j]);
            }
        }
    }

    #[test]
    fn arithmetic_with_unknown_is_all_x() {
        let a = Value { width: 4, val: 0b0100, unk: 0b0100 };
        let r = Value::binary(BinaryOp::Add, a, Value::known(4, 1));
        assert_eq!(r, Value::x(4));
        assert_eq!(Value::binary(BinaryOp::Lt, a, Value::known(4, 1)), Value::x(1));
    }

    #[test]
    fn display_round_trip() {
        let v = Value { width: 4, val: 0b1010, unk: 0b0011 };
        assert_eq!(v.to_string(), "4'b10xz");
        assert_eq!(Value::parse("4'b10xz"), Some(v));
    }

    #[test]
    fn widths_follow_operands() {
        let r = Value::binary(BinaryOp::Add, Value::known(2, 3), Value::known(8, 1));
        assert_eq!(r, Value::known(8, 4));
        let s = Value::binary(BinaryOp::Shl, Value::known(2, 3), Value::known(32, 1));
        assert_eq!(s, Value::known(2, 2));
    }
}
